//! Flux `z_p`, boundary function `β_p` and the residual checks of the limit
//! problem.
//!
//! Two normal traces are kept. The facet trace is `z_T·ν` on the element
//! owning the facet. The variational trace at a boundary node `b` is
//! `(∫ z·∇φ_b - ∫ f φ_b) / m_b`, the value that makes the discrete Green
//! formula exact; it is the one used by the boundary identity and the
//! complementarity check.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::mesh::{Mesh, MeshId};
use crate::problem::{default_zero_band, truncate, DiscreteData, Field, ProblemData};
use crate::solver::{regularized_flux, regularized_power, SolveResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxField {
    pub mesh_id: MeshId,
    /// Per element.
    pub z: Vec<[f64; 2]>,
    /// `z·ν` per boundary facet.
    pub facet_trace: Vec<f64>,
    /// Variational `[z,ν]` per boundary node.
    pub boundary_trace: Vec<f64>,
    /// `β` per boundary node.
    pub beta: Vec<f64>,
    /// `λ > 0` per boundary node; β is excluded from norms elsewhere.
    pub lambda_positive: Vec<bool>,
}

impl FluxField {
    /// Builds a flux from element vectors and boundary values.
    pub fn from_parts(mesh: &Mesh, data: &DiscreteData, z: Vec<[f64; 2]>, beta: Vec<f64>) -> Result<Self> {
        if data.mesh_id != mesh.id() {
            return Err(Error::MeshMismatch { expected: mesh.id(), found: data.mesh_id });
        }
        if z.len() != mesh.elements().len() {
            return Err(Error::LengthMismatch { expected: mesh.elements().len(), found: z.len() });
        }
        if beta.len() != mesh.boundary_nodes().len() {
            return Err(Error::LengthMismatch { expected: mesh.boundary_nodes().len(), found: beta.len() });
        }
        if z.iter().flatten().chain(&beta).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("flux"));
        }
        let facet_trace = mesh
            .facets()
            .iter()
            .map(|f| {
                let zt = z[f.element];
                zt[0] * f.normal[0] + zt[1] * f.normal[1]
            })
            .collect();
        let tested = tested_flux(mesh, &z);
        let boundary_trace = mesh
            .boundary_nodes()
            .iter()
            .map(|b| (tested[b.node] - data.load[b.node]) / b.measure)
            .collect();
        let lambda_positive = data.lambda.iter().map(|&l| l > 0.0).collect();
        Ok(FluxField { mesh_id: mesh.id(), z, facet_trace, boundary_trace, beta, lambda_positive })
    }

    /// Flux of a field at exponent `p` and regularization `epsilon`.
    pub fn from_field(mesh: &Mesh, data: &DiscreteData, u: &Field, p: f64, epsilon: f64) -> Result<Self> {
        mesh.check_field(u)?;
        if !(p > 1.0) || !(epsilon >= 0.0) {
            return Err(invalid("flux needs p > 1 and epsilon >= 0"));
        }
        let v = u.values();
        let z = mesh
            .elements()
            .iter()
            .map(|e| regularized_flux(mesh.element_gradient(e, v), p, epsilon))
            .collect();
        let beta = mesh.boundary_nodes().iter().map(|b| regularized_power(v[b.node], p, epsilon)).collect();
        Self::from_parts(mesh, data, z, beta)
    }

    pub fn sup_z(&self) -> f64 {
        self.z.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max)
    }

    /// `sup |β|` over boundary nodes with `λ > 0`.
    pub fn sup_beta(&self) -> f64 {
        self.beta
            .iter()
            .zip(&self.lambda_positive)
            .filter(|(_, &pos)| pos)
            .map(|(b, _)| b.abs())
            .fold(0.0, f64::max)
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(Error::MeshMismatch { expected: mesh.id(), found: self.mesh_id });
        }
        Ok(())
    }
}

/// `∫ z·∇φ_j` for every node.
fn tested_flux(mesh: &Mesh, z: &[[f64; 2]]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.node_count()];
    for (e, zt) in mesh.elements().iter().zip(z) {
        for (a, &n) in e.nodes.iter().enumerate() {
            let g = e.basis_gradients[a];
            out[n] += e.measure * (zt[0] * g[0] + zt[1] * g[1]);
        }
    }
    out
}

/// Flux of a converged solve.
pub fn extract_flux(mesh: &Mesh, data: &ProblemData, result: &SolveResult) -> Result<FluxField> {
    if !result.converged {
        return Err(Error::NotConverged { residual: result.final_residual });
    }
    let d = data.discretize(mesh)?;
    FluxField::from_field(mesh, &d, &result.u, result.p, result.epsilon)
}

/// Weak divergence residual `max_j |∫z·∇φ_j - ∫fφ_j| / (∫|f| + 1)` over
/// interior nodes.
pub fn check_divergence(mesh: &Mesh, data: &DiscreteData, flux: &FluxField) -> Result<f64> {
    flux.check(mesh)?;
    let tested = tested_flux(mesh, &flux.z);
    let scale = data.abs_f_integral + 1.0;
    Ok((0..mesh.node_count())
        .filter(|&j| mesh.boundary_slot(j).is_none())
        .map(|j| (tested[j] - data.load[j]).abs() / scale)
        .fold(0.0, f64::max))
}

/// `max_b |[z,ν] + λβ - g|` with the variational trace.
pub fn check_boundary_identity(mesh: &Mesh, data: &DiscreteData, flux: &FluxField) -> Result<f64> {
    flux.check(mesh)?;
    Ok(boundary_identity(&flux.boundary_trace, data, flux))
}

/// Same identity evaluated with the facet trace `z_T·ν`, spread to nodes
/// by facet-measure weighting.
pub fn check_boundary_identity_facet(mesh: &Mesh, data: &DiscreteData, flux: &FluxField) -> Result<f64> {
    flux.check(mesh)?;
    let trace = nodal_facet_trace(mesh, flux);
    Ok(boundary_identity(&trace, data, flux))
}

fn boundary_identity(trace: &[f64], data: &DiscreteData, flux: &FluxField) -> f64 {
    trace
        .iter()
        .zip(&flux.beta)
        .zip(data.lambda.iter().zip(&data.g))
        .map(|((t, b), (l, g))| (t + l * b - g).abs())
        .fold(0.0, f64::max)
}

fn nodal_facet_trace(mesh: &Mesh, flux: &FluxField) -> Vec<f64> {
    let nb = mesh.boundary_nodes().len();
    let mut num = vec![0.0; nb];
    let mut den = vec![0.0; nb];
    for (f, t) in mesh.facets().iter().zip(&flux.facet_trace) {
        for &n in &f.nodes {
            if let Some(k) = mesh.boundary_slot(n) {
                num[k] += f.measure * t;
                den[k] += f.measure;
            }
        }
    }
    num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    /// `|Σ(|∇u| - z·∇u)m| / Σ|∇u|m`.
    pub gap: f64,
    /// Same quantity before the absolute value; negative when `|z| > 1`
    /// dominates.
    pub signed_gap: f64,
    /// `max_T |1 - (|∇u|²+ε²)^{(p-2)/2}|∇u||` over elements with nonzero gradient.
    pub max_element_gap: f64,
    /// Set when `∇u ≡ 0`; the gap is then reported as 0.
    pub zero_gradient: bool,
}

/// Discrete pairing gap between `(z, Du)` and `|Du|`.
pub fn check_pairing(mesh: &Mesh, u: &Field, flux: &FluxField) -> Result<PairingReport> {
    mesh.check_field(u)?;
    flux.check(mesh)?;
    let v = u.values();
    let mut total = 0.0;
    let mut diff = 0.0;
    let mut max_element_gap: f64 = 0.0;
    for (e, z) in mesh.elements().iter().zip(&flux.z) {
        let g = mesh.element_gradient(e, v);
        let n = g[0].hypot(g[1]);
        if n == 0.0 {
            continue;
        }
        let zg = z[0] * g[0] + z[1] * g[1];
        total += n * e.measure;
        diff += (n - zg) * e.measure;
        max_element_gap = max_element_gap.max((1.0 - zg / n).abs());
    }
    if total == 0.0 {
        return Ok(PairingReport { gap: 0.0, signed_gap: 0.0, max_element_gap: 0.0, zero_gradient: true });
    }
    let signed_gap = diff / total;
    Ok(PairingReport { gap: signed_gap.abs(), signed_gap, max_element_gap, zero_gradient: false })
}

/// `max |u|·|[z,ν] + T₁(λ sign u - g)| / ‖u‖_∞` over boundary nodes with
/// `|u| > zero_band`.
pub fn check_complementarity(
    mesh: &Mesh,
    data: &DiscreteData,
    u: &Field,
    flux: &FluxField,
    zero_band: f64,
) -> Result<f64> {
    mesh.check_field(u)?;
    flux.check(mesh)?;
    if !(zero_band >= 0.0) {
        return Err(invalid("zero band must be nonnegative"));
    }
    let sup = u.sup_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for (k, b) in mesh.boundary_nodes().iter().enumerate() {
        let x = u.values()[b.node];
        if x.abs() <= zero_band {
            continue;
        }
        let t = truncate(data.lambda[k] * x.signum() - data.g[k], 1.0)?;
        worst = worst.max(x.abs() * (flux.boundary_trace[k] + t).abs() / sup);
    }
    Ok(worst)
}

/// Inside the zero band only `|λβ - g| ≤ max(|λ-g|, |λ+g|, 1)` is checked;
/// returns the largest excess over that bound (0 when consistent).
pub fn check_zero_band_consistency(
    mesh: &Mesh,
    data: &DiscreteData,
    u: &Field,
    flux: &FluxField,
    zero_band: f64,
) -> Result<f64> {
    mesh.check_field(u)?;
    flux.check(mesh)?;
    let mut worst: f64 = 0.0;
    for (k, b) in mesh.boundary_nodes().iter().enumerate() {
        if u.values()[b.node].abs() > zero_band {
            continue;
        }
        let (l, g) = (data.lambda[k], data.g[k]);
        let bound = (l - g).abs().max((l + g).abs()).max(1.0);
        worst = worst.max((l * flux.beta[k] - g).abs() - bound);
    }
    Ok(worst.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedFlux {
    pub k: f64,
    /// Element flux where every nodal `|u| < k`, zero elsewhere.
    pub z: Vec<[f64; 2]>,
    pub mask: Vec<bool>,
    pub sup: f64,
}

pub fn truncated_flux(mesh: &Mesh, u: &Field, flux: &FluxField, k: f64) -> Result<TruncatedFlux> {
    mesh.check_field(u)?;
    flux.check(mesh)?;
    if !(k > 0.0) {
        return Err(invalid("truncation level must be positive"));
    }
    let v = u.values();
    let mask: Vec<bool> = mesh.elements().iter().map(|e| e.nodes.iter().all(|&n| v[n].abs() < k)).collect();
    let z: Vec<[f64; 2]> = flux.z.iter().zip(&mask).map(|(z, &m)| if m { *z } else { [0.0; 2] }).collect();
    let sup = z.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max);
    Ok(TruncatedFlux { k, z, mask, sup })
}

/// `max_b (|g| - λ - 1)`; positive values rule out `M ≤ 1`.
pub fn boundary_data_excess(data: &DiscreteData) -> f64 {
    data.g.iter().zip(&data.lambda).map(|(g, l)| g.abs() - l - 1.0).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCheckReport {
    pub p: f64,
    pub sup_norm_z: f64,
    pub sup_norm_beta_on_lambda_pos: f64,
    pub div_residual: f64,
    pub boundary_residual: f64,
    /// Boundary identity evaluated with the facet trace instead.
    pub facet_boundary_residual: f64,
    pub pairing_gap: f64,
    pub pairing: PairingReport,
    pub complementarity_residual: f64,
    pub zero_band: f64,
    pub zero_band_excess: f64,
    /// `(k, sup |z_k|)`.
    pub truncated_flux_sup: Vec<(f64, f64)>,
    pub boundary_data_excess: f64,
}

/// Runs every check on a converged solve.
pub fn limit_check(mesh: &Mesh, data: &ProblemData, result: &SolveResult, ks: &[f64]) -> Result<LimitCheckReport> {
    let flux = extract_flux(mesh, data, result)?;
    let d = data.discretize(mesh)?;
    limit_check_with(mesh, &d, &result.u, result.p, &flux, ks)
}

pub fn limit_check_with(
    mesh: &Mesh,
    data: &DiscreteData,
    u: &Field,
    p: f64,
    flux: &FluxField,
    ks: &[f64],
) -> Result<LimitCheckReport> {
    let zero_band = default_zero_band(u);
    let pairing = check_pairing(mesh, u, flux)?;
    let truncated = ks
        .iter()
        .map(|&k| truncated_flux(mesh, u, flux, k).map(|t| (k, t.sup)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitCheckReport {
        p,
        sup_norm_z: flux.sup_z(),
        sup_norm_beta_on_lambda_pos: flux.sup_beta(),
        div_residual: check_divergence(mesh, data, flux)?,
        boundary_residual: check_boundary_identity(mesh, data, flux)?,
        facet_boundary_residual: check_boundary_identity_facet(mesh, data, flux)?,
        pairing_gap: pairing.gap,
        pairing,
        complementarity_residual: check_complementarity(mesh, data, u, flux, zero_band)?,
        zero_band,
        zero_band_excess: check_zero_band_consistency(mesh, data, u, flux, zero_band)?,
        truncated_flux_sup: truncated,
        boundary_data_excess: boundary_data_excess(data),
    })
}

/// Per-boundary-node table: node, coordinates, u, β, λ, g, both traces and
/// the boundary identity residual.
pub fn write_boundary_table<W: Write>(mesh: &Mesh, data: &DiscreteData, u: &Field, flux: &FluxField, out: W) -> Result<()> {
    mesh.check_field(u)?;
    flux.check(mesh)?;
    let facet = nodal_facet_trace(mesh, flux);
    let mut out = out;
    writeln!(out, "# schema_version: {SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "x", "y", "u", "beta", "lambda", "g", "trace", "facet_trace", "identity_residual"])?;
    for (k, b) in mesh.boundary_nodes().iter().enumerate() {
        let x = mesh.nodes()[b.node];
        let res = flux.boundary_trace[k] + data.lambda[k] * flux.beta[k] - data.g[k];
        w.write_record([
            b.node.to_string(),
            x[0].to_string(),
            x[1].to_string(),
            u.values()[b.node].to_string(),
            flux.beta[k].to_string(),
            data.lambda[k].to_string(),
            data.g[k].to_string(),
            flux.boundary_trace[k].to_string(),
            facet[k].to_string(),
            res.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
