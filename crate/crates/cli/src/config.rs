//! Experiment configuration: one JSON document, optionally patched with
//! `--set path=value` overrides.

use plap_core::io::{check_json_version, SCHEMA_VERSION};
use plap_core::{
    build_disk, build_interval, build_radial, default_schedule, BoundarySpec, Mesh, ProblemData, RadialCase,
    SolveParams, SourceSpec, SweepOptions, ThresholdMethod, ThresholdOptions,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub domain: Domain,
    pub data: DataBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub threshold: ThresholdBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Radial {
        #[serde(rename = "N")]
        n: usize,
        #[serde(rename = "R")]
        r: f64,
        cells: usize,
        #[serde(default = "one")]
        grading: f64,
    },
    Disk {
        #[serde(rename = "R")]
        r: f64,
        refinement: u32,
    },
    Interval {
        nodes: usize,
        length: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    pub f_spec: SourceSpec,
    pub g_spec: BoundarySpec,
    pub lambda_spec: BoundarySpec,
    #[serde(default)]
    pub lambda_integrable_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    /// Exponent for `solve` and `verify`.
    pub p: f64,
    /// Regularization ε. Absolute for `solve`; sweeps read it relative to
    /// the size of the warm start.
    pub epsilon: f64,
    pub newton_tol: f64,
    pub cg_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolveParams::new(2.0);
        SolverBlock { p: 1.5, epsilon: d.epsilon, newton_tol: d.newton_tol, cg_tol: d.cg_tol, max_iters: d.max_iters }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// `null` selects `p_j = 1 + 2^{-j}`, `j = 1..7`.
    pub schedule: Option<Vec<f64>>,
    pub band: f64,
    pub divergence_limit: f64,
    pub truncation_level: f64,
    pub warm_start: bool,
}

impl Default for SweepBlock {
    fn default() -> Self {
        let d = SweepOptions::default();
        SweepBlock {
            schedule: None,
            band: d.band,
            divergence_limit: d.divergence_limit,
            truncation_level: d.truncation_level,
            warm_start: d.warm_start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdBlock {
    pub method: ThresholdMethod,
    pub inner_iters: usize,
    pub max_outer: usize,
    pub step: f64,
    pub local_search: bool,
    pub exhaustive_nodes: usize,
}

impl Default for ThresholdBlock {
    fn default() -> Self {
        let d = ThresholdOptions::default();
        ThresholdBlock {
            method: ThresholdMethod::Dinkelbach,
            inner_iters: d.inner_iters,
            max_outer: d.max_outer,
            step: d.step,
            local_search: d.local_search,
            exhaustive_nodes: d.exhaustive_nodes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: "plap-out".into(), formats: vec![Format::Json, Format::Csv] }
    }
}

impl OutputBlock {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Reasons a configuration is rejected.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Parses an override value: JSON if it parses, otherwise a bare string.
fn override_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Applies `a.b.c=value` to a JSON document, creating objects on the way.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, value) = assignment.split_once('=').ok_or_else(|| bad(format!("override {assignment:?} lacks '='")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(bad(format!("bad override path {path:?}")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| bad(format!("override path {path:?} crosses a non-object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| bad(format!("override path {path:?} crosses a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), override_value(value.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| bad(format!("config is not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        check_json_version(&doc).map_err(|e| bad(e.to_string()))?;
        if let Some(d) = doc.get("domain").and_then(Value::as_object) {
            if d.len() != 1 {
                return Err(bad(format!("domain must have exactly one block, found {}", d.len())));
            }
        }
        let cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| bad(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!("unsupported schema_version {}", self.schema_version)));
        }
        if let Some(s) = &self.sweep.schedule {
            if s.is_empty() {
                return Err(bad("sweep.schedule is empty"));
            }
            if s.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(bad("sweep.schedule must be strictly decreasing"));
            }
            if s.iter().any(|&p| !(p > 1.0 && p <= 2.0)) {
                return Err(bad("sweep.schedule values must lie in (1, 2]"));
            }
        }
        if !(self.sweep.band > 0.0 && self.sweep.band < 1.0) {
            return Err(bad("sweep.band must lie in (0, 1)"));
        }
        if !(self.solver.epsilon > 0.0) {
            return Err(bad("solver.epsilon must be positive"));
        }
        if self.output.directory.is_empty() {
            return Err(bad("output.directory is empty"));
        }
        Ok(())
    }

    pub fn mesh(&self) -> plap_core::Result<Mesh> {
        match self.domain {
            Domain::Radial { n, r, cells, grading } => build_radial(n, r, cells, grading),
            Domain::Disk { r, refinement } => build_disk(r, refinement),
            Domain::Interval { nodes, length } => build_interval(nodes, length),
        }
    }

    pub fn problem(&self) -> ProblemData {
        let mut d = ProblemData::new(self.data.f_spec.clone(), self.data.g_spec.clone(), self.data.lambda_spec.clone());
        d.lambda_integrable_only = self.data.lambda_integrable_only;
        d
    }

    /// The closed-form radial case, when domain and data have that shape.
    pub fn radial_case(&self) -> Option<RadialCase> {
        let Domain::Radial { n, r, .. } = self.domain else { return None };
        let SourceSpec::RadialSingular(a) = self.data.f_spec else { return None };
        let gamma = self.data.g_spec.constant_value()?;
        let lambda = self.data.lambda_spec.constant_value()?;
        RadialCase::new(n, r, a, gamma, lambda).ok()
    }

    pub fn schedule(&self) -> Vec<f64> {
        self.sweep.schedule.clone().unwrap_or_else(default_schedule)
    }

    pub fn solve_params(&self, p: f64) -> SolveParams {
        let mut s = SolveParams::new(p);
        s.epsilon = self.solver.epsilon;
        s.newton_tol = self.solver.newton_tol;
        s.cg_tol = self.solver.cg_tol;
        s.max_iters = self.solver.max_iters;
        s
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            solve: self.solve_params(2.0),
            band: self.sweep.band,
            divergence_limit: self.sweep.divergence_limit,
            truncation_level: self.sweep.truncation_level,
            warm_start: self.sweep.warm_start,
        }
    }

    pub fn threshold_options(&self) -> ThresholdOptions {
        ThresholdOptions {
            inner_iters: self.threshold.inner_iters,
            max_outer: self.threshold.max_outer,
            step: self.threshold.step,
            local_search: self.threshold.local_search,
            exhaustive_nodes: self.threshold.exhaustive_nodes,
            ..ThresholdOptions::default()
        }
    }
}
