//! The weighted norm `‖u‖_λ = ∫_Ω |∇u| + ∫_∂Ω λ|u|` and the quantity
//! `Λ = |Ω| + ∫_∂Ω λ`.

use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;
use crate::problem::Field;

fn check_lambda(mesh: &Mesh, lambda: &[f64]) -> Result<()> {
    if lambda.len() != mesh.boundary_nodes().len() {
        return Err(Error::LengthMismatch { expected: mesh.boundary_nodes().len(), found: lambda.len() });
    }
    if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(invalid("lambda must be finite and nonnegative"));
    }
    Ok(())
}

/// Discrete `‖u‖_λ` with λ given per boundary node.
pub fn norm_lambda(u: &Field, mesh: &Mesh, lambda: &[f64]) -> Result<f64> {
    mesh.check_field(u)?;
    check_lambda(mesh, lambda)?;
    Ok(norm_lambda_raw(mesh, u.values(), lambda))
}

pub(crate) fn norm_lambda_raw(mesh: &Mesh, u: &[f64], lambda: &[f64]) -> f64 {
    let volume: f64 = mesh
        .elements()
        .iter()
        .map(|e| {
            let g = mesh.element_gradient(e, u);
            g[0].hypot(g[1]) * e.measure
        })
        .sum();
    let boundary: f64 = mesh
        .boundary_nodes()
        .iter()
        .zip(lambda)
        .map(|(b, l)| l * u[b.node].abs() * b.measure)
        .sum();
    volume + boundary
}

/// `Λ = |Ω| + ∫_∂Ω λ`.
pub fn measure_lambda(mesh: &Mesh, lambda: &[f64]) -> Result<f64> {
    check_lambda(mesh, lambda)?;
    Ok(mesh.volume() + boundary_weight(mesh, lambda))
}

/// `∫_∂Ω λ`.
pub fn boundary_weight(mesh: &Mesh, lambda: &[f64]) -> f64 {
    mesh.boundary_nodes().iter().zip(lambda).map(|(b, l)| l * b.measure).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval, build_radial};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_has_zero_norm() {
        let m = build_radial(2, 1.0, 10, 1.0).unwrap();
        assert_eq!(norm_lambda(&Field::zeros(&m), &m, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn constant_on_interval() {
        let m = build_interval(9, 1.0).unwrap();
        let u = Field::from_fn(&m, |_| 1.0);
        assert!((norm_lambda(&u, &m, &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matches_loop_oracle_on_eight_nodes() {
        let m = build_interval(8, 2.0).unwrap();
        let vals = [0.3, -1.2, 2.5, 0.0, 0.7, -0.4, 1.1, 3.0];
        let lam = [0.5, 2.0];
        let u = Field::new(&m, vals.to_vec()).unwrap();
        let h = 2.0 / 7.0;
        let mut oracle = 0.0;
        for i in 0..7 {
            oracle += ((vals[i + 1] - vals[i]) / h).abs() * h;
        }
        oracle += lam[0] * vals[0].abs() + lam[1] * vals[7].abs();
        assert!((norm_lambda(&u, &m, &lam).unwrap() - oracle).abs() < 1e-13);
    }

    #[test]
    fn measure_lambda_examples() {
        let m = build_radial(2, 1.0, 50, 1.0).unwrap();
        assert!((measure_lambda(&m, &[1.0]).unwrap() - 3.0 * PI).abs() < 1e-12);
        assert!((measure_lambda(&m, &[0.0]).unwrap() - PI).abs() < 1e-12);
        assert!((measure_lambda(&m, &[2.0]).unwrap() - 5.0 * PI).abs() < 1e-12);
        assert!(measure_lambda(&m, &[-1.0]).is_err());
    }

    #[test]
    fn constant_one_consistency() {
        let m = build_radial(3, 1.5, 30, 1.2).unwrap();
        let lam = [0.8];
        let one = Field::from_fn(&m, |_| 1.0);
        let n = norm_lambda(&one, &m, &lam).unwrap();
        let big = measure_lambda(&m, &lam).unwrap();
        assert!((n - (big - m.volume())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn homogeneous_and_subadditive(
            a in proptest::collection::vec(-5.0f64..5.0, 12),
            b in proptest::collection::vec(-5.0f64..5.0, 12),
            t in -10.0f64..10.0,
            l0 in 0.0f64..3.0, l1 in 0.0f64..3.0,
        ) {
            let m = build_interval(12, 1.0).unwrap();
            let lam = [l0, l1];
            let u = Field::new(&m, a.clone()).unwrap();
            let v = Field::new(&m, b.clone()).unwrap();
            let nu = norm_lambda(&u, &m, &lam).unwrap();
            let nv = norm_lambda(&v, &m, &lam).unwrap();
            let ntu = norm_lambda(&u.scaled(t), &m, &lam).unwrap();
            prop_assert!((ntu - t.abs() * nu).abs() <= 1e-12 * (1.0 + ntu));
            let sum = Field::new(&m, a.iter().zip(&b).map(|(x, y)| x + y).collect()).unwrap();
            prop_assert!(norm_lambda(&sum, &m, &lam).unwrap() <= nu + nv + 1e-12);
        }
    }
}
