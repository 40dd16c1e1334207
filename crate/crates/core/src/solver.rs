//! Damped Newton solver for the regularized Robin p-Laplacian energy
//!
//! ```text
//! Q(u) = (1/p)∫(|∇u|²+ε²)^{p/2} + (1/p)∫_∂Ω λ(u²+ε²)^{p/2} - ∫ f u - ∫_∂Ω g u
//! ```
//!
//! over the P1 space of a [`Mesh`]. Each Newton system is solved with
//! Jacobi-preconditioned CG; steps are damped by an Armijo backtracking line
//! search so the energy never increases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{pcg_jacobi, CsrMatrix};
use crate::mesh::Mesh;
use crate::problem::{DiscreteData, Field, ProblemData, SolveParams};

/// The four terms of the regularized energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub grad_term: f64,
    pub boundary_term: f64,
    pub source_term: f64,
    pub boundary_source_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn abs_scale(&self) -> f64 {
        self.grad_term.abs() + self.boundary_term.abs() + self.source_term.abs() + self.boundary_source_term.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    /// Line search could not find an acceptable step.
    Stagnated,
    /// `‖u‖_∞` exceeded [`SolveParams::divergence_limit`].
    Overflow,
}

/// Interior and boundary blocks of the scaled optimality residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `max_j |r_j| / (∫|f| + 1)` over interior nodes.
    pub interior: f64,
    /// `max_b |r_b| / m_b` over boundary nodes.
    pub boundary: f64,
}

impl Residual {
    pub fn max(&self) -> f64 {
        self.interior.max(self.boundary)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub u: Field,
    pub iterations: usize,
    pub final_residual: f64,
    pub residual: Residual,
    pub energy: EnergyBreakdown,
    pub converged: bool,
    pub termination: Termination,
    pub p: f64,
    pub epsilon: f64,
    /// Energy of every accepted iterate, starting with the initial guess.
    pub energy_history: Vec<f64>,
}

const CHUNK: usize = 2048;

/// Sums per-item contributions into a vector. Items are split into fixed
/// chunks, so the result does not depend on the thread count.
fn accumulate<F>(n_items: usize, out_len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunks = n_items.div_ceil(CHUNK);
    if chunks <= 1 {
        let mut out = vec![0.0; out_len];
        for i in 0..n_items {
            f(i, &mut out);
        }
        return out;
    }
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut out = vec![0.0; out_len];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_items) {
                f(i, &mut out);
            }
            out
        })
        .collect();
    let mut out = vec![0.0; out_len];
    for part in parts {
        for (o, x) in out.iter_mut().zip(part) {
            *o += x;
        }
    }
    out
}

/// `ρ^{p-2}` with `ρ = hypot(s, ε)`; zero where `ρ = 0` and `p < 2`.
#[inline]
pub(crate) fn reg_weight(rho: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if rho == 0.0 {
        0.0
    } else {
        ((p - 2.0) * rho.ln()).exp()
    }
}

/// Regularized flux `(|g|² + ε²)^{(p-2)/2} g`.
#[inline]
pub fn regularized_flux(g: [f64; 2], p: f64, epsilon: f64) -> [f64; 2] {
    let w = reg_weight(g[0].hypot(g[1]).hypot(epsilon), p);
    [w * g[0], w * g[1]]
}

/// Regularized boundary power `(u² + ε²)^{(p-2)/2} u`.
#[inline]
pub fn regularized_power(u: f64, p: f64, epsilon: f64) -> f64 {
    reg_weight(u.hypot(epsilon), p) * u
}

/// Energy, gradient and Hessian evaluation bound to one mesh and data set.
#[derive(Clone, Debug)]
pub struct Solver<'m> {
    mesh: &'m Mesh,
    data: DiscreteData,
}

impl<'m> Solver<'m> {
    pub fn new(mesh: &'m Mesh, data: &ProblemData) -> Result<Self> {
        Ok(Solver { mesh, data: data.discretize(mesh)? })
    }

    pub fn from_discrete(mesh: &'m Mesh, data: DiscreteData) -> Result<Self> {
        if data.mesh_id != mesh.id() {
            return Err(Error::MeshMismatch { expected: mesh.id(), found: data.mesh_id });
        }
        Ok(Solver { mesh, data })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn data(&self) -> &DiscreteData {
        &self.data
    }

    pub fn energy(&self, u: &[f64], p: f64, epsilon: f64) -> EnergyBreakdown {
        let mesh = self.mesh;
        let grad_term: f64 = mesh
            .elements()
            .iter()
            .map(|e| {
                let g = mesh.element_gradient(e, u);
                e.measure * g[0].hypot(g[1]).hypot(epsilon).powf(p)
            })
            .sum::<f64>()
            / p;
        let mut boundary_term = 0.0;
        let mut boundary_source_term = 0.0;
        for (k, b) in mesh.boundary_nodes().iter().enumerate() {
            let x = u[b.node];
            boundary_term += self.data.lambda[k] * b.measure * x.hypot(epsilon).powf(p);
            boundary_source_term += self.data.g[k] * b.measure * x;
        }
        boundary_term /= p;
        let source_term: f64 = self.data.load.iter().zip(u).map(|(w, x)| w * x).sum();
        EnergyBreakdown {
            grad_term,
            boundary_term,
            source_term,
            boundary_source_term,
            total: grad_term + boundary_term - source_term - boundary_source_term,
        }
    }

    /// Nodal gradient of the energy, i.e. the weak-form residual tested
    /// against every basis function.
    pub fn gradient(&self, u: &[f64], p: f64, epsilon: f64) -> Vec<f64> {
        let mesh = self.mesh;
        let elements = mesh.elements();
        let mut r = accumulate(elements.len(), mesh.node_count(), |i, out| {
            let e = &elements[i];
            let z = regularized_flux(mesh.element_gradient(e, u), p, epsilon);
            for (a, &n) in e.nodes.iter().enumerate() {
                let gp = e.basis_gradients[a];
                out[n] += e.measure * (z[0] * gp[0] + z[1] * gp[1]);
            }
        });
        for (k, b) in mesh.boundary_nodes().iter().enumerate() {
            let beta = regularized_power(u[b.node], p, epsilon);
            r[b.node] += b.measure * (self.data.lambda[k] * beta - self.data.g[k]);
        }
        for (ri, w) in r.iter_mut().zip(&self.data.load) {
            *ri -= w;
        }
        r
    }

    /// Splits a nodal residual into its scaled interior and boundary blocks.
    pub fn residual(&self, r: &[f64]) -> Residual {
        let scale = self.data.abs_f_integral + 1.0;
        let mut interior: f64 = 0.0;
        for (j, x) in r.iter().enumerate() {
            if self.mesh.boundary_slot(j).is_none() {
                interior = interior.max(x.abs() / scale);
            }
        }
        let boundary = self
            .mesh
            .boundary_nodes()
            .iter()
            .map(|b| r[b.node].abs() / b.measure)
            .fold(0.0, f64::max);
        Residual { interior, boundary }
    }

    fn assemble_hessian(&self, u: &[f64], p: f64, epsilon: f64, h: &mut CsrMatrix) {
        let mesh = self.mesh;
        let elements = mesh.elements();
        let nnz = h.nnz();
        let values = {
            let h_ref: &CsrMatrix = h;
            accumulate(elements.len(), nnz, |i, out| {
                let e = &elements[i];
                let g = mesh.element_gradient(e, u);
                let rho = g[0].hypot(g[1]).hypot(epsilon);
                let w = reg_weight(rho, p);
                let c = if rho > 0.0 { (p - 2.0) / (rho * rho) } else { 0.0 };
                // H = w (I + c g gᵀ)
                let hm = [
                    [w * (1.0 + c * g[0] * g[0]), w * c * g[0] * g[1]],
                    [w * c * g[1] * g[0], w * (1.0 + c * g[1] * g[1])],
                ];
                let k = e.nodes.len();
                let slots = h_ref.element_slots(i);
                for a in 0..k {
                    let ga = e.basis_gradients[a];
                    let ha = [hm[0][0] * ga[0] + hm[1][0] * ga[1], hm[0][1] * ga[0] + hm[1][1] * ga[1]];
                    for b in 0..k {
                        let gb = e.basis_gradients[b];
                        out[slots[a * k + b]] += e.measure * (ha[0] * gb[0] + ha[1] * gb[1]);
                    }
                }
            })
        };
        h.values = values;
        for (k, b) in mesh.boundary_nodes().iter().enumerate() {
            let x = u[b.node];
            let rho = x.hypot(epsilon);
            let d = if rho > 0.0 {
                reg_weight(rho, p) * ((p - 1.0) * x * x + epsilon * epsilon) / (rho * rho)
            } else if p == 2.0 {
                1.0
            } else {
                0.0
            };
            let slot = h.diagonal_slot(b.node);
            h.values[slot] += self.data.lambda[k] * b.measure * d;
        }
    }

    /// Runs damped Newton from `initial` (or zero).
    pub fn solve(&self, params: &SolveParams, initial: Option<&Field>) -> Result<SolveResult> {
        params.validate()?;
        let (p, eps) = (params.p, params.epsilon);
        if eps == 0.0 && p != 2.0 {
            return Err(invalid("epsilon must be positive for p != 2"));
        }
        if self.data.lambda_is_null() {
            return Err(invalid("lambda vanishes identically; the energy is not coercive"));
        }
        let mesh = self.mesh;
        let n = mesh.node_count();
        let mut u = match initial {
            Some(f) => {
                mesh.check_field(f)?;
                f.values().to_vec()
            }
            None => vec![0.0; n],
        };
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("initial guess"));
        }
        let cg_max = if params.cg_max_iters == 0 { 10 * n.max(10) } else { params.cg_max_iters };
        let mut hess = CsrMatrix::for_mesh(mesh);
        let mut energy = self.energy(&u, p, eps);
        let mut history = vec![energy.total];
        let mut termination = Termination::MaxIters;
        let mut iterations = 0;
        let mut grad = self.gradient(&u, p, eps);
        let mut residual = self.residual(&grad);

        if u.iter().fold(0.0f64, |m, x| m.max(x.abs())) > params.divergence_limit {
            termination = Termination::Overflow;
        } else {
            loop {
                if residual.max() <= params.newton_tol {
                    termination = Termination::Converged;
                    break;
                }
                if iterations >= params.max_iters {
                    break;
                }
                iterations += 1;
                self.assemble_hessian(&u, p, eps, &mut hess);
                let rhs: Vec<f64> = grad.iter().map(|x| -x).collect();
                let cg = pcg_jacobi(&hess, &rhs, params.cg_tol, cg_max)?;
                let mut dir = cg.solution;
                let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
                if !(slope < 0.0) {
                    // Fall back to preconditioned steepest descent.
                    let diag = hess.diagonal();
                    dir = grad.iter().zip(&diag).map(|(g, d)| -g / d).collect();
                    slope = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
                    if !(slope < 0.0) {
                        termination = Termination::Stagnated;
                        break;
                    }
                }
                match self.line_search(&u, &dir, slope, &energy, params) {
                    Some((u_new, e_new)) => {
                        u = u_new;
                        energy = e_new;
                        history.push(energy.total);
                    }
                    None => {
                        termination = Termination::Stagnated;
                        break;
                    }
                }
                grad = self.gradient(&u, p, eps);
                residual = self.residual(&grad);
                if u.iter().fold(0.0f64, |m, x| m.max(x.abs())) > params.divergence_limit {
                    termination = Termination::Overflow;
                    break;
                }
            }
        }
        if termination != Termination::Converged && residual.max() <= params.newton_tol {
            termination = Termination::Converged;
        }
        Ok(SolveResult {
            u: Field::from_raw(u, mesh.id()),
            iterations,
            final_residual: residual.max(),
            residual,
            energy,
            converged: termination == Termination::Converged,
            termination,
            p,
            epsilon: eps,
            energy_history: history,
        })
    }

    fn line_search(
        &self,
        u: &[f64],
        dir: &[f64],
        slope: f64,
        e0: &EnergyBreakdown,
        params: &SolveParams,
    ) -> Option<(Vec<f64>, EnergyBreakdown)> {
        let (p, eps) = (params.p, params.epsilon);
        let mut alpha = 1.0;
        let noise = 64.0 * f64::EPSILON * e0.abs_scale().max(f64::MIN_POSITIVE);
        for _ in 0..=params.max_backtracks {
            let trial: Vec<f64> = u.iter().zip(dir).map(|(x, d)| x + alpha * d).collect();
            if trial.iter().all(|x| x.is_finite()) {
                let e = self.energy(&trial, p, eps);
                if e.total.is_finite() {
                    if e.total <= e0.total + params.armijo * alpha * slope {
                        return Some((trial, e));
                    }
                    // Energy differences below rounding: along a line the energy
                    // is convex, so a non-positive directional derivative at the
                    // trial point certifies that the energy did not increase.
                    if e.total - e0.total <= noise {
                        let g = self.gradient(&trial, p, eps);
                        let dd: f64 = g.iter().zip(dir).map(|(g, d)| g * d).sum();
                        if dd <= 0.0 {
                            return Some((trial, e));
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        None
    }
}

/// Energy of `u` for the data on `mesh`.
pub fn energy(mesh: &Mesh, data: &ProblemData, u: &Field, params: &SolveParams) -> Result<EnergyBreakdown> {
    mesh.check_field(u)?;
    if !(params.p > 1.0) || !(params.epsilon >= 0.0) {
        return Err(invalid("energy needs p > 1 and epsilon >= 0"));
    }
    Ok(Solver::new(mesh, data)?.energy(u.values(), params.p, params.epsilon))
}

/// Nodal gradient of the energy (the weak-form residual).
pub fn energy_gradient(mesh: &Mesh, data: &ProblemData, u: &Field, params: &SolveParams) -> Result<Field> {
    mesh.check_field(u)?;
    if !(params.p > 1.0) || !(params.epsilon >= 0.0) {
        return Err(invalid("energy gradient needs p > 1 and epsilon >= 0"));
    }
    let g = Solver::new(mesh, data)?.gradient(u.values(), params.p, params.epsilon);
    Ok(Field::from_raw(g, mesh.id()))
}

/// Solves the regularized problem for one value of p.
pub fn solve_p(mesh: &Mesh, data: &ProblemData, params: &SolveParams, initial: Option<&Field>) -> Result<SolveResult> {
    Solver::new(mesh, data)?.solve(params, initial)
}
