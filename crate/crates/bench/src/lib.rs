//! Fixtures shared by the benchmarks.

use plap_core::{build_disk, BoundarySpec, Mesh, ProblemData, RadialCase, SourceSpec};

/// Radial case with M = 1 (finite limit) on `cells` cells.
pub fn radial_finite(cells: usize) -> (Mesh, ProblemData) {
    let case = RadialCase::new(2, 1.0, 1.0, 0.5, 1.5).expect("valid radial case");
    (case.mesh(cells, 1.0).expect("radial mesh"), case.problem_data())
}

/// Unit disk with `f ≡ 1`, `g ≡ 0` and constant λ.
pub fn disk_torsion(refinement: u32, lambda: f64) -> (Mesh, ProblemData) {
    let mesh = build_disk(1.0, refinement).expect("disk mesh");
    let data = ProblemData::new(SourceSpec::Constant(1.0), BoundarySpec::Constant(0.0), BoundarySpec::Constant(lambda));
    (mesh, data)
}
