//! Problem data `(f, g, λ)`, nodal fields, solver parameters and the scalar
//! helpers shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::{Mesh, MeshId, MeshKind};
use crate::quadrature::{duffy_triangle, gauss_legendre};

/// Volumetric source `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    Constant(f64),
    /// `A / |x|` with `A >= 0`.
    RadialSingular(f64),
    /// P1 interpolant of per-node values.
    Nodal(Vec<f64>),
}

/// Boundary datum given per boundary node (ordered as [`Mesh::boundary_nodes`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl BoundarySpec {
    fn values(&self, count: usize, what: &str) -> Result<Vec<f64>> {
        let v = match self {
            BoundarySpec::Constant(c) => vec![*c; count],
            BoundarySpec::Nodal(v) => {
                if v.len() != count {
                    return Err(invalid(format!("{what} has {} values, boundary has {count} nodes", v.len())));
                }
                v.clone()
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("boundary data"));
        }
        Ok(v)
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            BoundarySpec::Constant(c) => Some(*c),
            BoundarySpec::Nodal(v) => {
                let first = *v.first()?;
                v.iter().all(|&x| x == first).then_some(first)
            }
        }
    }
}

/// The triple `(f, g, λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemData {
    pub f: SourceSpec,
    pub g: BoundarySpec,
    pub lambda: BoundarySpec,
    /// Marks the regime where λ is only assumed integrable on ∂Ω. The
    /// discrete computations are unchanged; reports carry the flag so that
    /// threshold values are read as lower bounds only.
    #[serde(default)]
    pub lambda_integrable_only: bool,
}

impl ProblemData {
    pub fn new(f: SourceSpec, g: BoundarySpec, lambda: BoundarySpec) -> Self {
        ProblemData { f, g, lambda, lambda_integrable_only: false }
    }

    /// Radial family `f = A/|x|`, `g ≡ γ`, `λ` constant.
    pub fn radial(a: f64, gamma: f64, lambda: f64) -> Self {
        Self::new(SourceSpec::RadialSingular(a), BoundarySpec::Constant(gamma), BoundarySpec::Constant(lambda))
    }

    /// Data with `(f, g)` multiplied by `t` and λ unchanged.
    pub fn scaled(&self, t: f64) -> Self {
        let f = match &self.f {
            SourceSpec::Constant(c) => SourceSpec::Constant(t * c),
            SourceSpec::RadialSingular(a) => SourceSpec::RadialSingular(t * a),
            SourceSpec::Nodal(v) => SourceSpec::Nodal(v.iter().map(|x| t * x).collect()),
        };
        let g = match &self.g {
            BoundarySpec::Constant(c) => BoundarySpec::Constant(t * c),
            BoundarySpec::Nodal(v) => BoundarySpec::Nodal(v.iter().map(|x| t * x).collect()),
        };
        ProblemData { f, g, lambda: self.lambda.clone(), lambda_integrable_only: self.lambda_integrable_only }
    }

    /// Evaluates the data on `mesh`: load vector, boundary values, weights.
    pub fn discretize(&self, mesh: &Mesh) -> Result<DiscreteData> {
        let nb = mesh.boundary_nodes().len();
        let g = self.g.values(nb, "g")?;
        let lambda = self.lambda.values(nb, "lambda")?;
        if lambda.iter().any(|&l| l < 0.0) {
            return Err(invalid("lambda must be nonnegative"));
        }
        let load = load_vector(mesh, &self.f)?;
        let abs_spec = match &self.f {
            SourceSpec::Constant(c) => SourceSpec::Constant(c.abs()),
            SourceSpec::RadialSingular(a) => SourceSpec::RadialSingular(*a),
            SourceSpec::Nodal(v) => SourceSpec::Nodal(v.iter().map(|x| x.abs()).collect()),
        };
        let abs_f_integral = load_vector(mesh, &abs_spec)?.iter().sum();
        let boundary_measure = mesh.boundary_nodes().iter().map(|b| b.measure).collect();
        Ok(DiscreteData {
            mesh_id: mesh.id(),
            load,
            abs_f_integral,
            g,
            lambda,
            boundary_measure,
            lambda_integrable_only: self.lambda_integrable_only,
        })
    }
}

/// Problem data evaluated on a particular mesh.
#[derive(Clone, Debug)]
pub struct DiscreteData {
    pub mesh_id: MeshId,
    /// `∫ f φ_j` for every node.
    pub load: Vec<f64>,
    /// `∫ |f|`.
    pub abs_f_integral: f64,
    /// g at boundary nodes.
    pub g: Vec<f64>,
    /// λ at boundary nodes.
    pub lambda: Vec<f64>,
    /// Lumped boundary measure per boundary node.
    pub boundary_measure: Vec<f64>,
    pub lambda_integrable_only: bool,
}

impl DiscreteData {
    /// Nodal weights of the linear functional `u ↦ ∫ f u + ∫_∂Ω g u`.
    pub fn functional_weights(&self, mesh: &Mesh) -> Vec<f64> {
        let mut w = self.load.clone();
        for (k, b) in mesh.boundary_nodes().iter().enumerate() {
            w[b.node] += self.g[k] * self.boundary_measure[k];
        }
        w
    }

    pub fn lambda_is_null(&self) -> bool {
        self.lambda.iter().all(|&l| l == 0.0)
    }

    pub fn is_zero_data(&self) -> bool {
        self.load.iter().all(|&x| x == 0.0) && self.g.iter().all(|&x| x == 0.0)
    }

    /// `∫_∂Ω |g|`.
    pub fn abs_g_integral(&self) -> f64 {
        self.g.iter().zip(&self.boundary_measure).map(|(g, m)| g.abs() * m).sum()
    }
}

fn load_vector(mesh: &Mesh, f: &SourceSpec) -> Result<Vec<f64>> {
    let n = mesh.node_count();
    match f {
        SourceSpec::Constant(c) if !c.is_finite() => return Err(Error::NonFinite("source")),
        SourceSpec::RadialSingular(a) if !(a.is_finite() && *a >= 0.0) => {
            return Err(invalid("singular source coefficient must be finite and nonnegative"))
        }
        SourceSpec::Nodal(v) => {
            if v.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("source"));
            }
        }
        _ => {}
    }
    let mut w = vec![0.0; n];
    match mesh.kind() {
        MeshKind::Radial1D { .. } | MeshKind::Interval1D { .. } => {
            let (weight_power, sphere) = match mesh.kind() {
                MeshKind::Radial1D { ambient_dim, .. } => {
                    (*ambient_dim as i32 - 1, crate::mesh::unit_sphere_area(*ambient_dim))
                }
                _ => (0, 1.0),
            };
            if weight_power == 0 && matches!(f, SourceSpec::RadialSingular(_)) {
                return Err(invalid("the singular source A/|x| needs a radial grid or a disk"));
            }
            // Polynomial integrands of degree <= N + 1 (the 1/r factor drops
            // one power of the weight), integrated exactly.
            let rule = gauss_legendre((weight_power as usize + 4) / 2 + 1);
            for e in mesh.elements() {
                let (i, j) = (e.nodes[0], e.nodes[1]);
                let (ra, rb) = (mesh.nodes()[i][0], mesh.nodes()[j][0]);
                let h = rb - ra;
                for &(s, wq) in &rule {
                    let r = ra + s * h;
                    let (phi_a, phi_b) = (1.0 - s, s);
                    let fv_weighted = match f {
                        SourceSpec::Constant(c) => c * r.powi(weight_power),
                        SourceSpec::RadialSingular(a) => a * r.powi(weight_power - 1),
                        SourceSpec::Nodal(v) => (v[i] * phi_a + v[j] * phi_b) * r.powi(weight_power),
                    };
                    let q = sphere * h * wq * fv_weighted;
                    w[i] += q * phi_a;
                    w[j] += q * phi_b;
                }
            }
        }
        MeshKind::Triangular2D => {
            for e in mesh.elements() {
                let t = [e.nodes[0], e.nodes[1], e.nodes[2]];
                let area = e.measure;
                match f {
                    SourceSpec::Constant(c) => {
                        for &a in &t {
                            w[a] += c * area / 3.0;
                        }
                    }
                    SourceSpec::Nodal(v) => {
                        let s = v[t[0]] + v[t[1]] + v[t[2]];
                        for &a in &t {
                            w[a] += area / 12.0 * (s + v[a]);
                        }
                    }
                    SourceSpec::RadialSingular(coef) => {
                        // Collapse the rule at the vertex nearest the origin.
                        let pts = mesh.nodes();
                        let k0 = (0..3)
                            .min_by(|&x, &y| {
                                let rx = pts[t[x]][0].hypot(pts[t[x]][1]);
                                let ry = pts[t[y]][0].hypot(pts[t[y]][1]);
                                rx.total_cmp(&ry)
                            })
                            .unwrap_or(0);
                        let order = [t[k0], t[(k0 + 1) % 3], t[(k0 + 2) % 3]];
                        for q in duffy_triangle(6, area) {
                            let mut x = [0.0; 2];
                            for c in 0..3 {
                                x[0] += q.bary[c] * pts[order[c]][0];
                                x[1] += q.bary[c] * pts[order[c]][1];
                            }
                            let fx = coef / x[0].hypot(x[1]);
                            for c in 0..3 {
                                w[order[c]] += q.weight * fx * q.bary[c];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(w)
}

/// Nodal scalar function bound to a mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    values: Vec<f64>,
    mesh_id: MeshId,
}

impl Field {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::LengthMismatch { expected: mesh.node_count(), found: values.len() });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field"));
        }
        Ok(Field { values, mesh_id: mesh.id() })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Field { values: vec![0.0; mesh.node_count()], mesh_id: mesh.id() }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Field { values: mesh.nodes().iter().map(|&x| f(x)).collect(), mesh_id: mesh.id() }
    }

    pub(crate) fn from_raw(values: Vec<f64>, mesh_id: MeshId) -> Self {
        Field { values, mesh_id }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, t: f64) -> Field {
        Field { values: self.values.iter().map(|x| t * x).collect(), mesh_id: self.mesh_id }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { values: self.values.iter().map(|&x| f(x)).collect(), mesh_id: self.mesh_id }
    }
}

/// Parameters of a single regularized solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub p: f64,
    /// Regularization in `(|∇u|² + ε²)^{(p-2)/2}`; must be positive for solves.
    pub epsilon: f64,
    /// Tolerance on the scaled optimality residual.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Relative tolerance of the inner conjugate-gradient solve.
    pub cg_tol: f64,
    /// Iteration cap for CG; 0 means `10 × unknowns`.
    pub cg_max_iters: usize,
    /// Abort when `‖u‖_∞` exceeds this value.
    pub divergence_limit: f64,
}

impl SolveParams {
    pub fn new(p: f64) -> Self {
        SolveParams {
            p,
            epsilon: 1e-8,
            newton_tol: 1e-10,
            max_iters: 200,
            armijo: 1e-4,
            max_backtracks: 60,
            cg_tol: 1e-10,
            cg_max_iters: 0,
            divergence_limit: f64::INFINITY,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon must be finite and nonnegative"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(invalid("newton_tol must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(invalid("armijo constant must lie in (0, 1/2)"));
        }
        Ok(())
    }
}

/// `T_k(s) = max(-k, min(s, k))`.
pub fn truncate(s: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(invalid(format!("truncation level must be positive, got {k}")));
    }
    Ok(s.clamp(-k, k))
}

/// Value of the multivalued sign: a point outside the zero band, the whole
/// interval `[-1, 1]` inside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignSet {
    Point(f64),
    Interval,
}

/// Sign of `s`, multivalued when `|s| <= zero_band`.
pub fn sign_set(s: f64, zero_band: f64) -> SignSet {
    if s.abs() <= zero_band {
        SignSet::Interval
    } else {
        SignSet::Point(s.signum())
    }
}

/// Default zero band `1e-8 · ‖u‖_∞`.
pub fn default_zero_band(u: &Field) -> f64 {
    1e-8 * u.sup_norm()
}
