//! Mixed volume/boundary Lebesgue norms
//!
//! ```text
//! [∫_Ω |f|^s + ∫_∂Ω λ|g|^s]^{1/s}
//! ```
//!
//! with the matching Hölder inequality and the `s → ∞` limit. Values
//! live on elements (volume part) and boundary nodes (boundary part).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedFunctionPair {
    pub volume_values: Vec<f64>,
    pub boundary_values: Vec<f64>,
    /// Element measures.
    pub volume_weights: Vec<f64>,
    /// `λ_b m_b` per boundary node.
    pub boundary_weights: Vec<f64>,
}

impl MixedFunctionPair {
    pub fn new(mesh: &Mesh, volume_values: Vec<f64>, boundary_values: Vec<f64>, lambda: &[f64]) -> Result<Self> {
        let nb = mesh.boundary_nodes().len();
        if lambda.len() != nb {
            return Err(Error::LengthMismatch { expected: nb, found: lambda.len() });
        }
        if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(invalid("lambda must be finite and nonnegative"));
        }
        let vw = mesh.elements().iter().map(|e| e.measure).collect();
        let bw = mesh.boundary_nodes().iter().zip(lambda).map(|(b, l)| l * b.measure).collect();
        Self::from_weights(volume_values, boundary_values, vw, bw)
    }

    pub fn from_weights(
        volume_values: Vec<f64>,
        boundary_values: Vec<f64>,
        volume_weights: Vec<f64>,
        boundary_weights: Vec<f64>,
    ) -> Result<Self> {
        if volume_values.len() != volume_weights.len() {
            return Err(Error::LengthMismatch { expected: volume_weights.len(), found: volume_values.len() });
        }
        if boundary_values.len() != boundary_weights.len() {
            return Err(Error::LengthMismatch { expected: boundary_weights.len(), found: boundary_values.len() });
        }
        if volume_weights.iter().chain(&boundary_weights).any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        if volume_values.iter().chain(&boundary_values).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mixed function values"));
        }
        Ok(MixedFunctionPair { volume_values, boundary_values, volume_weights, boundary_weights })
    }

    /// `|Ω| + ∫λ`.
    pub fn lambda_measure(&self) -> f64 {
        self.volume_weights.iter().chain(&self.boundary_weights).sum()
    }

    /// `max{sup|f|, sup_{λ>0}|g|}` over entries with positive weight.
    pub fn weighted_sup(&self) -> f64 {
        self.entries().filter(|(_, w)| *w > 0.0).map(|(x, _)| x.abs()).fold(0.0, f64::max)
    }

    fn entries(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.volume_values
            .iter()
            .zip(&self.volume_weights)
            .chain(self.boundary_values.iter().zip(&self.boundary_weights))
            .map(|(x, w)| (*x, *w))
    }

    fn same_weights(&self, other: &Self) -> Result<()> {
        if self.volume_weights != other.volume_weights || self.boundary_weights != other.boundary_weights {
            return Err(invalid("pairs are defined on different measures"));
        }
        Ok(())
    }
}

/// `[Σ w|x|^s]^{1/s}` in log-sum-exp form.
pub fn mixed_norm(pair: &MixedFunctionPair, s: f64) -> Result<f64> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(invalid("mixed norm needs finite s >= 1"));
    }
    let logs: Vec<f64> = pair
        .entries()
        .filter(|(x, w)| *x != 0.0 && *w > 0.0)
        .map(|(x, w)| w.ln() + s * x.abs().ln())
        .collect();
    if logs.is_empty() {
        return Ok(0.0);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    Ok((lse / s).exp())
}

/// `mixed_norm(pair, s) / Λ^{1/s}`, non-decreasing in s.
pub fn normalized_mixed_norm(pair: &MixedFunctionPair, s: f64) -> Result<f64> {
    let lm = pair.lambda_measure();
    if !(lm > 0.0) {
        return Err(invalid("pair carries no mass"));
    }
    Ok(mixed_norm(pair, s)? / lm.powf(1.0 / s))
}

/// `∫|f₁f₂| + ∫λ|g₁g₂|`.
pub fn mixed_product_l1(pair1: &MixedFunctionPair, pair2: &MixedFunctionPair) -> Result<f64> {
    pair1.same_weights(pair2)?;
    Ok(pair1.entries().zip(pair2.entries()).map(|((a, w), (b, _))| w * (a * b).abs()).sum())
}

/// `(lhs, rhs)` of the mixed Hölder inequality with exponents `p`, `p'`.
pub fn mixed_holder_check(pair1: &MixedFunctionPair, pair2: &MixedFunctionPair, p: f64) -> Result<(f64, f64)> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid("Hölder exponent must be in (1, ∞)"));
    }
    let q = p / (p - 1.0);
    let lhs = mixed_product_l1(pair1, pair2)?;
    let rhs = mixed_norm(pair1, p)? * mixed_norm(pair2, q)?;
    Ok((lhs, rhs))
}

/// Mixed norm at the largest exponent of an increasing list.
pub fn mixed_norm_limit(pair: &MixedFunctionPair, s_list: &[f64]) -> Result<f64> {
    if s_list.is_empty() {
        return Err(invalid("empty exponent list"));
    }
    if s_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("exponent list must be increasing"));
    }
    mixed_norm(pair, s_list[s_list.len() - 1])
}

/// `s = 1, 2, 4, …, 1024`.
pub fn default_exponents() -> Vec<f64> {
    (0..=10).map(|k| 2f64.powi(k)).collect()
}

/// The pair `(|∇u|^{p-1}, |u|^{p-1})` whose mixed s-norm is bounded by
/// `M Λ^{1/s}`.
pub fn solution_pair(mesh: &Mesh, u: &[f64], lambda: &[f64], p: f64) -> Result<MixedFunctionPair> {
    if u.len() != mesh.node_count() {
        return Err(Error::LengthMismatch { expected: mesh.node_count(), found: u.len() });
    }
    let vol = mesh
        .elements()
        .iter()
        .map(|e| {
            let g = mesh.element_gradient(e, u);
            g[0].hypot(g[1]).powf(p - 1.0)
        })
        .collect();
    let bnd = mesh.boundary_nodes().iter().map(|b| u[b.node].abs().powf(p - 1.0)).collect();
    MixedFunctionPair::new(mesh, vol, bnd, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk, build_interval};
    use crate::norms::measure_lambda;
    use proptest::prelude::*;

    fn pair_on(mesh: &Mesh, f: Vec<f64>, g: Vec<f64>, lambda: f64) -> MixedFunctionPair {
        let l = vec![lambda; mesh.boundary_nodes().len()];
        MixedFunctionPair::new(mesh, f, g, &l).unwrap()
    }

    #[test]
    fn constant_pair() {
        let m = build_disk(1.0, 2).unwrap();
        let (ne, nb) = (m.elements().len(), m.boundary_nodes().len());
        let p = pair_on(&m, vec![2.0; ne], vec![2.0; nb], 1.5);
        let lm = measure_lambda(&m, &vec![1.5; nb]).unwrap();
        for s in [1.0, 2.0, 7.5] {
            assert!((mixed_norm(&p, s).unwrap() - 2.0 * lm.powf(1.0 / s)).abs() < 1e-12);
        }
    }

    #[test]
    fn loop_oracle_s3() {
        let m = build_interval(5, 2.0).unwrap();
        let f = vec![0.5, -1.5, 2.0, 0.25];
        let g = vec![-3.0, 1.0];
        let p = pair_on(&m, f.clone(), g.clone(), 0.7);
        let mut sum = 0.0;
        for x in &f {
            sum += 0.5 * x.abs().powi(3);
        }
        for x in &g {
            sum += 0.7 * x.abs().powi(3);
        }
        assert!((mixed_norm(&p, 3.0).unwrap() - sum.cbrt()).abs() < 1e-13);
        let l1: f64 = f.iter().map(|x| 0.5 * x.abs()).sum::<f64>() + g.iter().map(|x| 0.7 * x.abs()).sum::<f64>();
        assert!((mixed_norm(&p, 1.0).unwrap() - l1).abs() < 1e-13);
    }

    #[test]
    fn limit_examples() {
        let m = build_disk(1.0, 3).unwrap();
        let (ne, nb) = (m.elements().len(), m.boundary_nodes().len());
        let p = pair_on(&m, vec![2.0; ne], vec![3.0; nb], 1.0);
        let l = mixed_norm_limit(&p, &default_exponents()).unwrap();
        assert!((l - 3.0).abs() < 0.03);
        let p = pair_on(&m, vec![2.0; ne], vec![50.0; nb], 0.0);
        let l = mixed_norm_limit(&p, &default_exponents()).unwrap();
        assert!((l - 2.0).abs() < 0.02);
        let p = pair_on(&m, vec![0.0; ne], vec![0.0; nb], 1.0);
        assert_eq!(mixed_norm_limit(&p, &default_exponents()).unwrap(), 0.0);
        assert!(mixed_norm_limit(&p, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn holder_equality_for_ones() {
        let m = build_disk(1.0, 1).unwrap();
        let (ne, nb) = (m.elements().len(), m.boundary_nodes().len());
        let p = pair_on(&m, vec![1.0; ne], vec![1.0; nb], 2.0);
        let (lhs, rhs) = mixed_holder_check(&p, &p, 1.7).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
        assert!((lhs - p.lambda_measure()).abs() < 1e-12);
    }

    #[test]
    fn holder_equality_for_young_pairs() {
        let m = build_disk(1.0, 1).unwrap();
        let (ne, nb) = (m.elements().len(), m.boundary_nodes().len());
        let pexp = 2.5;
        let q = pexp / (pexp - 1.0);
        let f1: Vec<f64> = (0..ne).map(|i| 0.3 + i as f64 * 0.1).collect();
        let g1: Vec<f64> = (0..nb).map(|i| 1.0 + (i % 3) as f64).collect();
        // |f₂|^{q} ∝ |f₁|^{p}
        let f2: Vec<f64> = f1.iter().map(|x| 2.0 * x.powf(pexp / q)).collect();
        let g2: Vec<f64> = g1.iter().map(|x| 2.0 * x.powf(pexp / q)).collect();
        let a = pair_on(&m, f1, g1, 0.8);
        let b = pair_on(&m, f2, g2, 0.8);
        let (lhs, rhs) = mixed_holder_check(&a, &b, pexp).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn mismatched_pairs_rejected() {
        let m = build_interval(4, 1.0).unwrap();
        let a = pair_on(&m, vec![1.0; 3], vec![1.0; 2], 1.0);
        let b = pair_on(&m, vec![1.0; 3], vec![1.0; 2], 2.0);
        assert!(mixed_holder_check(&a, &b, 2.0).is_err());
        assert!(MixedFunctionPair::new(&m, vec![1.0; 2], vec![1.0; 2], &[1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn holder_inequality(
            f1 in prop::collection::vec(-5.0f64..5.0, 6),
            f2 in prop::collection::vec(-5.0f64..5.0, 6),
            g1 in prop::collection::vec(-5.0f64..5.0, 2),
            g2 in prop::collection::vec(-5.0f64..5.0, 2),
            lambda in 0.0f64..3.0,
            p in 1.05f64..8.0,
        ) {
            let m = build_interval(7, 1.5).unwrap();
            let a = pair_on(&m, f1, g1, lambda);
            let b = pair_on(&m, f2, g2, lambda);
            let (lhs, rhs) = mixed_holder_check(&a, &b, p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn normalized_norm_is_monotone(
            f in prop::collection::vec(-5.0f64..5.0, 6),
            g in prop::collection::vec(-5.0f64..5.0, 2),
            lambda in 0.0f64..3.0,
        ) {
            let m = build_interval(7, 1.5).unwrap();
            let a = pair_on(&m, f, g, lambda);
            let mut prev = 0.0;
            for s in default_exponents() {
                let v = normalized_mixed_norm(&a, s).unwrap();
                prop_assert!(v >= prev * (1.0 - 1e-12));
                prev = v;
            }
        }
    }
}
