//! Continuation in p towards 1 and classification of `(f, g, λ)`.
//!
//! `ln ‖u_p‖_λ` is asymptotically affine in `1/(p-1)` with slope `ln M`,
//! so a least-squares fit over the smallest values of p estimates the
//! threshold.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fields::{truncated_flux, FluxField};
use crate::io::SCHEMA_VERSION;
use crate::mesh::Mesh;
use crate::norms::{measure_lambda, norm_lambda_raw};
use crate::problem::{DiscreteData, Field, ProblemData, SolveParams};
use crate::radial::saturating_power;
use crate::solver::{EnergyBreakdown, Solver, Termination};

/// Smallest admissible p in a schedule.
pub const MIN_P: f64 = 1.0 + 1e-3;

/// Norms below this are treated as zero by the slope fit.
pub const ZERO_NORM: f64 = 1e-12;

/// `p_j = 1 + 2^{-j}` for `j = 1..=7`.
pub fn default_schedule() -> Vec<f64> {
    (1..=7).map(|j| 1.0 + 0.5f64.powi(j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Base solver settings; `p` is overwritten per record and `epsilon` is
    /// read as relative to the size of the solution.
    pub solve: SolveParams,
    pub band: f64,
    /// A solve is aborted once `‖u‖_∞` exceeds this value.
    pub divergence_limit: f64,
    /// Level `k` of the truncated-flux diagnostic.
    pub truncation_level: f64,
    pub warm_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            solve: SolveParams::new(2.0),
            band: 0.05,
            divergence_limit: 1e12,
            truncation_level: 10.0,
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum RecordStatus {
    Converged,
    /// The solve stopped without meeting the tolerance.
    NotConverged(Termination),
    /// `‖u‖_∞` exceeded the divergence limit.
    Overflow,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub p: f64,
    pub status: RecordStatus,
    pub norm_lambda: f64,
    pub sup_norm: f64,
    pub energy: EnergyBreakdown,
    /// `∫|∇u|^p + ∫λ|u|^p`.
    pub p_energy: f64,
    pub flux_sup: f64,
    pub beta_sup: f64,
    pub truncated_flux_sup: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub epsilon: f64,
}

impl SweepRecord {
    fn empty(p: f64, status: RecordStatus) -> Self {
        SweepRecord {
            p,
            status,
            norm_lambda: f64::NAN,
            sup_norm: f64::NAN,
            energy: EnergyBreakdown::default(),
            p_energy: f64::NAN,
            flux_sup: f64::NAN,
            beta_sup: f64::NAN,
            truncated_flux_sup: f64::NAN,
            iterations: 0,
            final_residual: f64::NAN,
            epsilon: f64::NAN,
        }
    }

    pub fn is_usable(&self) -> bool {
        self.status == RecordStatus::Converged
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Degenerate,
    Finite,
    BlowUp,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Degenerate => "Degenerate",
            Verdict::Finite => "Finite",
            Verdict::BlowUp => "BlowUp",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// `exp(slope)`.
    pub m: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Fit deviation is small enough that `M̂` stays within the band of 1
    /// regardless of `R²`.
    pub flat: bool,
    pub points: usize,
    /// All norms vanished; `m` is 0.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub schedule: Vec<f64>,
    pub records: Vec<SweepRecord>,
    pub slope_m_estimate: Option<f64>,
    pub fit: Option<SlopeFit>,
    pub band: f64,
    pub verdict: Verdict,
    /// `|Ω| + ∫λ`.
    pub lambda_measure: f64,
    /// Iterate at the smallest usable p.
    pub final_u: Option<Field>,
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(invalid("empty p schedule"));
    }
    for w in schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(invalid("p schedule must be strictly decreasing"));
        }
    }
    if schedule.iter().any(|&p| !(p <= 2.0)) {
        return Err(invalid("p schedule must stay in (1, 2]"));
    }
    if schedule.iter().any(|&p| !(p >= MIN_P)) {
        return Err(invalid(format!("p schedule must stay above {MIN_P}")));
    }
    Ok(())
}

/// `sign(u)|u|^e`, or `None` if it overflows.
fn power_map(u: &[f64], e: f64) -> Option<Vec<f64>> {
    let v: Vec<f64> = u.iter().map(|&x| x.signum() * saturating_power(x.abs(), e)).collect();
    v.iter().all(|x| x.is_finite()).then_some(v)
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn run_sweep(mesh: &Mesh, data: &ProblemData, schedule: &[f64], opts: &SweepOptions) -> Result<SweepReport> {
    check_schedule(schedule)?;
    if !(opts.band > 0.0) || !(opts.truncation_level > 0.0) || !(opts.divergence_limit > 0.0) {
        return Err(invalid("band, truncation level and divergence limit must be positive"));
    }
    if !(opts.solve.epsilon > 0.0) {
        return Err(invalid("relative epsilon must be positive"));
    }
    let d = data.discretize(mesh)?;
    let solver = Solver::from_discrete(mesh, d.clone())?;
    let lambda_measure = measure_lambda(mesh, &d.lambda)?;
    let data_scale = (d.abs_f_integral + d.abs_g_integral()) / lambda_measure;

    let mut records = Vec::with_capacity(schedule.len());
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut final_u = None;
    for &p in schedule {
        let rec = sweep_step(&solver, &d, p, opts, prev.as_ref(), data_scale);
        let rec = match rec {
            Ok((rec, u)) => {
                if rec.is_usable() {
                    final_u = Some(Field::from_raw(u.clone(), mesh.id()));
                    if opts.warm_start {
                        prev = Some((p, u));
                    }
                }
                rec
            }
            Err(e) => SweepRecord::empty(p, RecordStatus::Failed(e.to_string())),
        };
        records.push(rec);
    }
    let mut report = SweepReport {
        schema_version: SCHEMA_VERSION,
        schedule: schedule.to_vec(),
        records,
        slope_m_estimate: None,
        fit: None,
        band: opts.band,
        verdict: Verdict::Inconclusive,
        lambda_measure,
        final_u,
    };
    report.fit = fit_slope(&report).ok();
    report.slope_m_estimate = report.fit.map(|f| f.m);
    report.verdict = classify(&report, opts.band);
    Ok(report)
}

fn sweep_step(
    solver: &Solver<'_>,
    d: &DiscreteData,
    p: f64,
    opts: &SweepOptions,
    prev: Option<&(f64, Vec<f64>)>,
    data_scale: f64,
) -> Result<(SweepRecord, Vec<f64>)> {
    let mesh = solver.mesh();
    let eps_rel = opts.solve.epsilon;
    let mut params = opts.solve.clone();
    params.p = p;
    params.divergence_limit = opts.divergence_limit;

    let size_hint = if data_scale > 0.0 { saturating_power(data_scale, 1.0 / (p - 1.0)) } else { 0.0 };
    let eps_for = |scale: f64| {
        let s = if scale > 0.0 && scale.is_finite() { scale } else { size_hint.clamp(1e-300, 1e300) };
        if s > 0.0 {
            eps_rel * s
        } else {
            eps_rel
        }
    };

    // Pick the warm start with the lower energy.
    let mut guess: Option<Vec<f64>> = None;
    if let Some((q, u)) = prev {
        let mut candidates = vec![u.clone()];
        if let Some(v) = power_map(u, (q - 1.0) / (p - 1.0)) {
            candidates.push(v);
        }
        let mut best = f64::INFINITY;
        for c in candidates {
            if sup(&c) > opts.divergence_limit {
                continue;
            }
            let e = solver.energy(&c, p, eps_for(sup(&c))).total;
            if e < best {
                best = e;
                guess = Some(c);
            }
        }
        if guess.is_none() {
            // Every candidate is beyond the limit: report the overflow.
            let mut rec = SweepRecord::empty(p, RecordStatus::Overflow);
            rec.sup_norm = sup(u);
            return Ok((rec, u.clone()));
        }
    }

    let mut epsilon = eps_for(guess.as_deref().map_or(0.0, sup));
    let mut result;
    let mut attempts = 0;
    loop {
        params.epsilon = epsilon;
        let init = guess.as_ref().map(|g| Field::from_raw(g.clone(), mesh.id()));
        result = solver.solve(&params, init.as_ref())?;
        attempts += 1;
        let s = result.u.sup_norm();
        if result.termination == Termination::Overflow || attempts > 3 || s == 0.0 || epsilon <= 10.0 * eps_rel * s {
            break;
        }
        epsilon = eps_rel * s;
        guess = Some(result.u.values().to_vec());
    }

    let u = result.u.values().to_vec();
    let status = match result.termination {
        Termination::Converged => RecordStatus::Converged,
        Termination::Overflow => RecordStatus::Overflow,
        t => RecordStatus::NotConverged(t),
    };
    let flux = FluxField::from_field(mesh, d, &result.u, p, epsilon)?;
    let trunc = truncated_flux(mesh, &result.u, &flux, opts.truncation_level)?;
    let p_energy = mesh
        .elements()
        .iter()
        .map(|e| {
            let g = mesh.element_gradient(e, &u);
            e.measure * g[0].hypot(g[1]).powf(p)
        })
        .sum::<f64>()
        + mesh
            .boundary_nodes()
            .iter()
            .zip(&d.lambda)
            .map(|(b, l)| l * b.measure * u[b.node].abs().powf(p))
            .sum::<f64>();
    let rec = SweepRecord {
        p,
        status,
        norm_lambda: norm_lambda_raw(mesh, &u, &d.lambda),
        sup_norm: result.u.sup_norm(),
        energy: result.energy,
        p_energy,
        flux_sup: flux.sup_z(),
        beta_sup: flux.sup_beta(),
        truncated_flux_sup: trunc.sup,
        iterations: result.iterations,
        final_residual: result.final_residual,
        epsilon,
    };
    Ok((rec, u))
}

/// Least-squares fit of `ln ‖u_p‖_λ` against `1/(p-1)` over the
/// `max(3, ⌈n/2⌉)` usable records with the smallest p.
pub fn fit_slope(report: &SweepReport) -> Result<SlopeFit> {
    fit_records(&report.records, report.band)
}

fn fit_records(records: &[SweepRecord], band: f64) -> Result<SlopeFit> {
    let mut usable: Vec<&SweepRecord> = records.iter().filter(|r| r.is_usable()).collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData { usable: usable.len(), needed: 3 });
    }
    usable.sort_by(|a, b| a.p.total_cmp(&b.p));
    if usable.iter().all(|r| r.norm_lambda < ZERO_NORM) {
        return Ok(SlopeFit {
            m: 0.0,
            slope: f64::NEG_INFINITY,
            intercept: f64::NAN,
            r_squared: 1.0,
            flat: false,
            points: usable.len(),
            degenerate: true,
        });
    }
    let n = 3.max(usable.len().div_ceil(2));
    let pts: Vec<(f64, f64)> = usable
        .iter()
        .take(n)
        .filter(|r| r.norm_lambda > 0.0)
        .map(|r| (1.0 / (r.p - 1.0), r.norm_lambda.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData { usable: pts.len(), needed: 3 });
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let flat = syy.sqrt() <= (1.0 + band).ln() * stt.sqrt();
    Ok(SlopeFit { m: slope.exp(), slope, intercept, r_squared, flat, points: pts.len(), degenerate: false })
}

pub fn estimate_m_slope(report: &SweepReport) -> Result<f64> {
    fit_slope(report).map(|f| f.m)
}

pub fn classify(report: &SweepReport, band: f64) -> Verdict {
    let overflowed = report.records.iter().any(|r| r.status == RecordStatus::Overflow);
    let fit = match fit_records(&report.records, band) {
        Ok(f) => f,
        Err(_) if overflowed => return Verdict::BlowUp,
        Err(_) => return Verdict::Inconclusive,
    };
    if !fit.degenerate && !fit.flat && fit.r_squared < 0.99 {
        return Verdict::Inconclusive;
    }
    classify_value(fit.m, band)
}

/// Band classification of a threshold value.
pub fn classify_value(m: f64, band: f64) -> Verdict {
    if m < 1.0 - band {
        Verdict::Degenerate
    } else if m > 1.0 + band {
        Verdict::BlowUp
    } else {
        Verdict::Finite
    }
}

/// Writes the per-p table.
pub fn write_sweep_csv<W: Write>(report: &SweepReport, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "# schema_version: {SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "norm_lambda", "sup_norm", "grad_term", "boundary_term", "flux_sup", "status"])?;
    for r in &report.records {
        let status = match &r.status {
            RecordStatus::Converged => "converged".to_string(),
            RecordStatus::NotConverged(_) => "not_converged".to_string(),
            RecordStatus::Overflow => "overflow".to_string(),
            RecordStatus::Failed(_) => "failed".to_string(),
        };
        w.write_record([
            r.p.to_string(),
            r.norm_lambda.to_string(),
            r.sup_norm.to_string(),
            r.energy.grad_term.to_string(),
            r.energy.boundary_term.to_string(),
            r.flux_sup.to_string(),
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}
