//! The threshold `M(f,g,λ) = sup (∫fu + ∫gu) / ‖u‖_λ` on the discrete space.
//!
//! The ratio is maximized by Dinkelbach's method: each outer step fixes
//! `t` at the best ratio so far and maximizes `L(u) - t‖u‖_λ` over the box
//! `‖u‖_∞ ≤ 1` by averaged projected subgradient ascent. The inner solution
//! is rounded to level-set indicators and polished by a local search over
//! `{-1, 0, 1}` nodal values, which is where the extreme points of the unit
//! ball lie for one-dimensional grids.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::mesh::Mesh;
use crate::norms::norm_lambda_raw;
use crate::problem::{truncate, DiscreteData, Field, ProblemData};

pub use crate::radial::radial_m;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    Dinkelbach,
    RadialClosedForm,
    SlopeRegression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub inner_iters: usize,
    pub max_outer: usize,
    /// Step constant `c` of the `c/√j` schedule.
    pub step: f64,
    /// Relative improvement below which the outer loop stops.
    pub tol: f64,
    pub local_search: bool,
    /// Meshes with at most this many nodes are searched exhaustively over
    /// `{-1, 0, 1}` vectors.
    pub exhaustive_nodes: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions { inner_iters: 500, max_outer: 50, step: 0.5, tol: 1e-12, local_search: true, exhaustive_nodes: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub schema_version: u32,
    /// Ratio at `certificate`.
    pub m_lower: f64,
    pub certificate: Field,
    pub method: ThresholdMethod,
    pub iterations: usize,
    pub converged: bool,
    /// Data functional vanishes; `m_lower = 0` and the certificate is arbitrary.
    pub zero_functional: bool,
    /// λ only assumed integrable: the value is reported as a lower bound only.
    pub lambda_integrable_only: bool,
}

/// `∫ f u + ∫_∂Ω g u`.
pub fn linear_functional(mesh: &Mesh, data: &ProblemData, u: &Field) -> Result<f64> {
    mesh.check_field(u)?;
    let w = data.discretize(mesh)?.functional_weights(mesh);
    Ok(dot(&w, u.values()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Ratio<'a> {
    mesh: &'a Mesh,
    w: Vec<f64>,
    /// `λ_b m_b` per boundary node.
    bw: Vec<f64>,
    node_elements: Vec<Vec<usize>>,
}

impl<'a> Ratio<'a> {
    fn new(mesh: &'a Mesh, d: &DiscreteData) -> Self {
        let mut node_elements = vec![Vec::new(); mesh.node_count()];
        for (i, e) in mesh.elements().iter().enumerate() {
            for &n in &e.nodes {
                node_elements[n].push(i);
            }
        }
        let bw = d.lambda.iter().zip(&d.boundary_measure).map(|(l, m)| l * m).collect();
        Ratio { mesh, w: d.functional_weights(mesh), bw, node_elements }
    }

    fn norm(&self, u: &[f64]) -> f64 {
        let lambda: Vec<f64> = self.bw.iter().zip(self.mesh.boundary_nodes()).map(|(w, b)| w / b.measure).collect();
        norm_lambda_raw(self.mesh, u, &lambda)
    }

    fn element_norm(&self, e: usize, u: &[f64]) -> f64 {
        let el = &self.mesh.elements()[e];
        let g = self.mesh.element_gradient(el, u);
        el.measure * g[0].hypot(g[1])
    }

    /// `|L(u)| / ‖u‖_λ`, 0 for `u = 0`.
    fn ratio(&self, u: &[f64]) -> f64 {
        let n = self.norm(u);
        if n > 0.0 {
            dot(&self.w, u).abs() / n
        } else {
            0.0
        }
    }

    /// Averaged projected subgradient ascent on `L(u) - t‖u‖_λ`.
    fn inner(&self, t: f64, start: &[f64], opts: &ThresholdOptions) -> Vec<f64> {
        let mesh = self.mesh;
        let n = mesh.node_count();
        let mut u = start.to_vec();
        let mut avg = vec![0.0; n];
        let mut count = 0.0;
        let mut s = vec![0.0; n];
        for j in 1..=opts.inner_iters {
            s.copy_from_slice(&self.w);
            for e in mesh.elements() {
                let g = mesh.element_gradient(e, &u);
                let gn = g[0].hypot(g[1]);
                if gn == 0.0 {
                    continue;
                }
                let q = [g[0] / gn, g[1] / gn];
                for (a, &node) in e.nodes.iter().enumerate() {
                    let bg = e.basis_gradients[a];
                    s[node] -= t * e.measure * (q[0] * bg[0] + q[1] * bg[1]);
                }
            }
            for (b, w) in mesh.boundary_nodes().iter().zip(&self.bw) {
                let x = u[b.node];
                if x != 0.0 {
                    s[b.node] -= t * w * x.signum();
                }
            }
            let sn = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if sn == 0.0 {
                break;
            }
            let step = opts.step * (n as f64).sqrt() / (j as f64).sqrt() / sn;
            for (x, d) in u.iter_mut().zip(&s) {
                *x = (*x + step * d).clamp(-1.0, 1.0);
            }
            if 2 * j > opts.inner_iters {
                for (a, x) in avg.iter_mut().zip(&u) {
                    *a += x;
                }
                count += 1.0;
            }
        }
        if count > 0.0 {
            avg.iter_mut().for_each(|a| *a /= count);
            avg
        } else {
            u
        }
    }

    /// Best level-set indicator of `u` (and of `-u`).
    fn round(&self, u: &[f64]) -> Option<Vec<f64>> {
        let mut levels: Vec<f64> = u.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
        levels.sort_by(|a, b| b.total_cmp(a));
        levels.dedup();
        const MAX_LEVELS: usize = 256;
        if levels.len() > MAX_LEVELS {
            let k = levels.len();
            levels = (0..MAX_LEVELS).map(|i| levels[i * (k - 1) / (MAX_LEVELS - 1)]).collect();
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for &s in &levels {
            let cands: [Vec<f64>; 3] = [
                u.iter().map(|&x| if x >= s { 1.0 } else { 0.0 }).collect(),
                u.iter().map(|&x| if x <= -s { -1.0 } else { 0.0 }).collect(),
                u.iter().map(|&x| if x.abs() >= s { x.signum() } else { 0.0 }).collect(),
            ];
            for c in cands {
                let r = self.ratio(&c);
                if best.as_ref().is_none_or(|b| r > b.0) {
                    best = Some((r, c));
                }
            }
        }
        best.map(|b| b.1)
    }

    /// First-improvement search over single-node changes among `{-1, 0, 1}`.
    fn local_search(&self, v: &mut [f64]) {
        let mesh = self.mesh;
        let mut num = dot(&self.w, v);
        if num < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
            num = -num;
        }
        let mut den = self.norm(v);
        let mut trial = v.to_vec();
        for _pass in 0..200 {
            let mut improved = false;
            for i in 0..v.len() {
                let old = v[i];
                let elems = &self.node_elements[i];
                let before: f64 = elems.iter().map(|&e| self.element_norm(e, v)).sum();
                let bw = mesh.boundary_slot(i).map_or(0.0, |k| self.bw[k]);
                for new in [-1.0, 0.0, 1.0] {
                    if new == old {
                        continue;
                    }
                    trial[i] = new;
                    let after: f64 = elems.iter().map(|&e| self.element_norm(e, &trial)).sum();
                    let n2 = num + self.w[i] * (new - old);
                    let d2 = den - before + after + bw * (new.abs() - old.abs());
                    let cur = if den > 0.0 { num / den } else { 0.0 };
                    if d2 > 0.0 && n2 / d2 > cur * (1.0 + 1e-14) && n2 > 0.0 {
                        v[i] = new;
                        num = n2;
                        den = d2;
                        improved = true;
                        break;
                    }
                    trial[i] = old;
                }
                trial[i] = v[i];
            }
            if !improved {
                break;
            }
        }
    }

    fn exhaustive(&self) -> Vec<f64> {
        let n = self.mesh.node_count();
        let mut v = vec![-1.0; n];
        let mut best = (0.0, vec![1.0; n]);
        loop {
            let r = self.ratio(&v);
            if r > best.0 {
                best = (r, v.clone());
            }
            // Next vector in base-3 order.
            let mut i = 0;
            while i < n && v[i] == 1.0 {
                v[i] = -1.0;
                i += 1;
            }
            if i == n {
                break;
            }
            v[i] += 1.0;
        }
        best.1
    }
}

/// Dinkelbach estimate of the discrete threshold.
pub fn estimate_m(mesh: &Mesh, data: &ProblemData, opts: &ThresholdOptions) -> Result<ThresholdReport> {
    let d = data.discretize(mesh)?;
    if d.lambda_is_null() {
        return Err(invalid("lambda vanishes identically; ‖·‖_λ is not a norm"));
    }
    if opts.step <= 0.0 || !(opts.tol >= 0.0) {
        return Err(invalid("threshold step must be positive and tol nonnegative"));
    }
    let ratio = Ratio::new(mesh, &d);
    let n = mesh.node_count();
    let base = |m_lower, certificate: Vec<f64>, iterations, converged, zero| ThresholdReport {
        schema_version: SCHEMA_VERSION,
        m_lower,
        certificate: Field::from_raw(certificate, mesh.id()),
        method: ThresholdMethod::Dinkelbach,
        iterations,
        converged,
        zero_functional: zero,
        lambda_integrable_only: d.lambda_integrable_only,
    };
    if ratio.w.iter().all(|&x| x == 0.0) {
        return Ok(base(0.0, vec![1.0; n], 0, true, true));
    }

    let mut best: Vec<f64> = ratio.w.iter().map(|&x| if x == 0.0 { 0.0 } else { x.signum() }).collect();
    if opts.local_search {
        ratio.local_search(&mut best);
    }
    let mut t = ratio.ratio(&best);
    let mut iterations = 0;
    let mut converged = false;
    let mut start = best.clone();
    for _ in 0..opts.max_outer {
        iterations += 1;
        let u = ratio.inner(t, &start, opts);
        let mut cands = vec![u.clone()];
        if let Some(mut r) = ratio.round(&u) {
            if opts.local_search {
                ratio.local_search(&mut r);
            }
            cands.push(r);
        }
        let mut improved = false;
        for c in cands {
            let r = ratio.ratio(&c);
            if r > t * (1.0 + opts.tol) {
                t = r;
                best = c;
                improved = true;
            }
        }
        start = u;
        if !improved {
            converged = true;
            break;
        }
    }
    if n <= opts.exhaustive_nodes {
        let v = ratio.exhaustive();
        let r = ratio.ratio(&v);
        if r > t {
            best = v;
        }
    }
    if dot(&ratio.w, &best) < 0.0 {
        best.iter_mut().for_each(|x| *x = -*x);
    }
    let m = dot(&ratio.w, &best) / ratio.norm(&best);
    Ok(base(m, best, iterations, converged, false))
}

/// `min{λ,1}·N/R` with R the radius of the ball of equal volume.
pub fn eigen_lower_bound(mesh: &Mesh, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda must be a nonnegative constant"));
    }
    let n = mesh.ambient_dim() as f64;
    Ok(lambda.min(1.0) * n / mesh.equal_volume_radius())
}

/// Threshold report from the closed form on a radial grid.
pub fn radial_report(mesh: &Mesh, case: &crate::radial::RadialCase) -> ThresholdReport {
    let n = mesh.node_count();
    ThresholdReport {
        schema_version: SCHEMA_VERSION,
        m_lower: case.threshold(),
        certificate: Field::from_raw(vec![1.0; n], mesh.id()),
        method: ThresholdMethod::RadialClosedForm,
        iterations: 0,
        converged: true,
        zero_functional: case.coefficient == 0.0 && case.gamma == 0.0,
        lambda_integrable_only: false,
    }
}

/// Limit functional.
///
/// With `capped`, evaluates `∫|∇u| + min{λ,1}∫_∂Ω|u| - ∫fu`, which needs
/// `g ≡ 0` and constant λ. Otherwise evaluates
/// `∫|∇u| + ∫_∂Ω T₁(λ sign u - g) u - ∫fu`.
pub fn limit_energy(mesh: &Mesh, data: &ProblemData, u: &Field, capped: bool) -> Result<f64> {
    mesh.check_field(u)?;
    let d = data.discretize(mesh)?;
    let v = u.values();
    let grad: f64 = mesh
        .elements()
        .iter()
        .map(|e| {
            let g = mesh.element_gradient(e, v);
            e.measure * g[0].hypot(g[1])
        })
        .sum();
    let source = dot(&d.load, v);
    let boundary = if capped {
        if d.g.iter().any(|&g| g != 0.0) {
            return Err(invalid("the capped limit functional needs g = 0"));
        }
        let lambda = data.lambda.constant_value().ok_or_else(|| invalid("the capped limit functional needs constant lambda"))?;
        let c = lambda.min(1.0);
        mesh.boundary_nodes().iter().map(|b| c * b.measure * v[b.node].abs()).sum::<f64>()
    } else {
        let mut s = 0.0;
        for (k, b) in mesh.boundary_nodes().iter().enumerate() {
            let x = v[b.node];
            if x != 0.0 {
                s += b.measure * truncate(d.lambda[k] * x.signum() - d.g[k], 1.0)? * x;
            }
        }
        s
    };
    if !(grad + boundary - source).is_finite() {
        return Err(Error::NonFinite("limit energy"));
    }
    Ok(grad + boundary - source)
}
