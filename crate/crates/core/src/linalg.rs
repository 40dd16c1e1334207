//! Symmetric sparse matrices on the mesh connectivity and a
//! Jacobi-preconditioned conjugate gradient solver.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// CSR matrix whose sparsity pattern is the node adjacency of a mesh.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) col: Vec<usize>,
    pub(crate) values: Vec<f64>,
    diag_slot: Vec<usize>,
    /// For each element, the slots of its local `k × k` block (row major).
    elem_slots: Vec<Vec<usize>>,
}

impl CsrMatrix {
    pub fn for_mesh(mesh: &Mesh) -> Self {
        let n = mesh.node_count();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for e in mesh.elements() {
            for &a in &e.nodes {
                for &b in &e.nodes {
                    rows[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col.extend_from_slice(r);
            row_ptr.push(col.len());
        }
        let find = |row: usize, c: usize| -> usize {
            let s = &col[row_ptr[row]..row_ptr[row + 1]];
            row_ptr[row] + s.binary_search(&c).expect("pattern contains element couplings")
        };
        let diag_slot = (0..n).map(|i| find(i, i)).collect();
        let elem_slots = mesh
            .elements()
            .iter()
            .map(|e| {
                let mut s = Vec::with_capacity(e.nodes.len() * e.nodes.len());
                for &a in &e.nodes {
                    for &b in &e.nodes {
                        s.push(find(a, b));
                    }
                }
                s
            })
            .collect();
        let nnz = col.len();
        CsrMatrix { row_ptr, col, values: vec![0.0; nnz], diag_slot, elem_slots }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub(crate) fn element_slots(&self, e: usize) -> &[usize] {
        &self.elem_slots[e]
    }

    pub(crate) fn diagonal_slot(&self, i: usize) -> usize {
        self.diag_slot[i]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.diag_slot.iter().map(|&s| self.values[s]).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col[k]];
            }
            *yi = acc;
        }
    }
}

/// Outcome of a CG solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from zero.
///
/// Stops when `‖r‖ ≤ tol ‖b‖` or after `max_iters` steps; in the latter case
/// the last iterate is returned with `converged = false`. Non-positive
/// curvature or non-finite values are a breakdown.
pub fn pcg_jacobi(a: &CsrMatrix, b: &[f64], tol: f64, max_iters: usize) -> Result<CgOutcome> {
    let n = a.dim();
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::LinearSolveBreakdown { iterations: 0, reason: "non-positive diagonal".into() });
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome { solution: x, iterations: 0, relative_residual: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel: f64 = 1.0;
    for it in 0..max_iters {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            if it > 0 && rel.is_finite() {
                // Curvature lost to rounding: keep the progress made so far.
                return Ok(CgOutcome { solution: x, iterations: it, relative_residual: rel, converged: false });
            }
            return Err(Error::LinearSolveBreakdown { iterations: it, reason: format!("curvature {pap:e}") });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if !rel.is_finite() {
            return Err(Error::LinearSolveBreakdown { iterations: it + 1, reason: "non-finite residual".into() });
        }
        if rel <= tol {
            return Ok(CgOutcome { solution: x, iterations: it + 1, relative_residual: rel, converged: true });
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(CgOutcome { solution: x, iterations: max_iters, relative_residual: rel, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk, build_interval};

    fn laplacian_plus_mass(mesh: &Mesh) -> CsrMatrix {
        let mut a = CsrMatrix::for_mesh(mesh);
        for (ei, e) in mesh.elements().iter().enumerate() {
            let k = e.nodes.len();
            for i in 0..k {
                for j in 0..k {
                    let gi = e.basis_gradients[i];
                    let gj = e.basis_gradients[j];
                    let s = a.element_slots(ei)[i * k + j];
                    a.values[s] += (gi[0] * gj[0] + gi[1] * gj[1]) * e.measure;
                }
            }
        }
        for b in mesh.boundary_nodes() {
            let s = a.diagonal_slot(b.node);
            a.values[s] += b.measure;
        }
        a
    }

    #[test]
    fn cg_solves_robin_laplacian() {
        let m = build_disk(1.0, 3).unwrap();
        let a = laplacian_plus_mass(&m);
        let n = a.dim();
        let xs: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 3.0).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&xs, &mut b);
        let out = pcg_jacobi(&a, &b, 1e-12, 10 * n).unwrap();
        assert!(out.converged);
        let err = out.solution.iter().zip(&xs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let m = build_interval(5, 1.0).unwrap();
        let a = laplacian_plus_mass(&m);
        let out = pcg_jacobi(&a, &[0.0; 5], 1e-10, 50).unwrap();
        assert!(out.converged && out.solution.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn indefinite_diagonal_is_breakdown() {
        let m = build_interval(4, 1.0).unwrap();
        let a = CsrMatrix::for_mesh(&m);
        assert!(matches!(pcg_jacobi(&a, &[1.0; 4], 1e-10, 10), Err(Error::LinearSolveBreakdown { .. })));
    }

    #[test]
    fn pattern_is_symmetric() {
        let m = build_disk(1.0, 2).unwrap();
        let a = CsrMatrix::for_mesh(&m);
        for i in 0..a.dim() {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col[k];
                let row = &a.col[a.row_ptr[j]..a.row_ptr[j + 1]];
                assert!(row.binary_search(&i).is_ok());
            }
        }
        assert_eq!(a.nnz(), a.dim() + 2 * edges(&m));
    }

    fn edges(m: &Mesh) -> usize {
        let mut set = std::collections::BTreeSet::new();
        for e in m.elements() {
            for a in 0..3 {
                let (p, q) = (e.nodes[a], e.nodes[(a + 1) % 3]);
                set.insert((p.min(q), p.max(q)));
            }
        }
        set.len()
    }
}
