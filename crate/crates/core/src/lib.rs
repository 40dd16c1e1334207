//! Finite element laboratory for the Robin p-Laplacian as p tends to 1.
//!
//! The crate solves
//!
//! ```text
//! -Δ_p u = f in Ω,   |∇u|^{p-2}∇u·ν + λ|u|^{p-2}u = g on ∂Ω
//! ```
//!
//! on radial grids and triangulated disks, follows the solutions along a
//! decreasing p schedule, and estimates the threshold
//! `M(f,g,λ) = sup (∫fu + ∫gu) / ‖u‖_λ` that decides whether `u_p`
//! vanishes, stays bounded or blows up.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod inequalities;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod problem;
pub mod quadrature;
pub mod radial;
pub mod solver;
pub mod sweep;
pub mod threshold;

pub use error::{Error, Result};
pub use mesh::{build_disk, build_interval, build_radial, Mesh, MeshId, MeshKind};
pub use norms::{measure_lambda, norm_lambda};
pub use problem::{
    default_zero_band, sign_set, truncate, BoundarySpec, DiscreteData, Field, ProblemData, SignSet, SolveParams,
    SourceSpec,
};
pub use solver::{energy, energy_gradient, solve_p, EnergyBreakdown, Residual, SolveResult, Solver, Termination};
pub use radial::{radial_limit, radial_m, radial_solution, RadialCase, RadialLimit, TaggedLimit, TaxonomyLabel};
pub use fields::{
    check_boundary_identity, check_complementarity, check_divergence, check_pairing, extract_flux, limit_check,
    truncated_flux, FluxField, LimitCheckReport, PairingReport, TruncatedFlux,
};
pub use sweep::{
    classify, default_schedule, estimate_m_slope, run_sweep, RecordStatus, SweepOptions, SweepRecord, SweepReport,
    Verdict,
};
pub use threshold::{
    eigen_lower_bound, estimate_m, limit_energy, linear_functional, ThresholdMethod, ThresholdOptions, ThresholdReport,
};
pub use inequalities::{mixed_holder_check, mixed_norm, mixed_norm_limit, MixedFunctionPair};
