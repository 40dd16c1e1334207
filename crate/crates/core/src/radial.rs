//! Closed forms for `Ω = B_R`, `f = A/|x|`, `g ≡ γ` and constant `λ`.
//!
//! With `a = A/(N-1)` and `b = (a+γ)/λ` the solution is
//! `u_p(r) = b^{1/(p-1)} + a^{1/(p-1)}(R - r)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::SCHEMA_VERSION;
use crate::mesh::{build_radial, Mesh};
use crate::problem::ProblemData;

/// Relative tolerance used to decide the critical cases `a = 1`, `b = 1`.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialCase {
    pub ambient_dim: usize,
    pub radius: f64,
    /// Coefficient `A` of the source `A/|x|`.
    pub coefficient: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl RadialCase {
    pub fn new(ambient_dim: usize, radius: f64, coefficient: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(invalid("radial case needs N >= 2"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("radial case needs R > 0"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid("radial case needs lambda > 0"));
        }
        if !(coefficient >= 0.0) || !(gamma >= 0.0) || !coefficient.is_finite() || !gamma.is_finite() {
            return Err(invalid("radial case needs A >= 0 and gamma >= 0"));
        }
        Ok(RadialCase { ambient_dim, radius, coefficient, gamma, lambda })
    }

    /// `a = A/(N-1)`, the gradient base.
    pub fn a(&self) -> f64 {
        self.coefficient / (self.ambient_dim as f64 - 1.0)
    }

    /// `b = (a+γ)/λ`, the boundary value base.
    pub fn b(&self) -> f64 {
        (self.a() + self.gamma) / self.lambda
    }

    pub fn threshold(&self) -> f64 {
        self.a().max(self.b())
    }

    pub fn problem_data(&self) -> ProblemData {
        ProblemData::radial(self.coefficient, self.gamma, self.lambda)
    }

    pub fn mesh(&self, n_cells: usize, grading: f64) -> Result<Mesh> {
        build_radial(self.ambient_dim, self.radius, n_cells, grading)
    }
}

/// `base^{exponent}` for `base >= 0`, evaluated as `exp(exponent·ln base)`
/// and saturated to `+∞` once the logarithm exceeds 700.
pub fn saturating_power(base: f64, exponent: f64) -> f64 {
    if base == 0.0 {
        return if exponent > 0.0 { 0.0 } else { 1.0 };
    }
    let l = exponent * base.ln();
    if l > 700.0 {
        f64::INFINITY
    } else {
        l.exp()
    }
}

/// `M(A/|x|, γ, λ) = max{a, b}`.
pub fn radial_m(ambient_dim: usize, radius: f64, coefficient: f64, gamma: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(invalid("radial threshold formula needs lambda > 0"));
    }
    Ok(RadialCase::new(ambient_dim, radius, coefficient, gamma, lambda)?.threshold())
}

/// Exact `u_p(r)`.
pub fn radial_solution(case: &RadialCase, p: f64, r: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid("radial solution needs p > 1"));
    }
    if !(0.0..=case.radius).contains(&r) {
        return Err(invalid(format!("r = {r} outside [0, {}]", case.radius)));
    }
    let e = 1.0 / (p - 1.0);
    let slope = saturating_power(case.a(), e);
    let offset = saturating_power(case.b(), e);
    let dr = case.radius - r;
    if slope.is_infinite() && dr == 0.0 {
        return Ok(offset);
    }
    Ok(offset + slope * dr)
}

/// Exact `-u_p'(r) = a^{1/(p-1)}`.
pub fn radial_slope(case: &RadialCase, p: f64) -> f64 {
    saturating_power(case.a(), 1.0 / (p - 1.0))
}

/// Leaves of the case analysis as p tends to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaxonomyLabel {
    /// `a > 1`
    #[serde(rename = "1")]
    Case1,
    /// `a = 1`, `λ < 1+γ`
    #[serde(rename = "2a")]
    Case2a,
    /// `a = 1`, `λ = 1+γ`
    #[serde(rename = "2b")]
    Case2b,
    /// `a = 1`, `λ > 1+γ`
    #[serde(rename = "2c")]
    Case2c,
    /// `a < 1`, `λ < a+γ`
    #[serde(rename = "3a")]
    Case3a,
    /// `a < 1`, `λ = a+γ`
    #[serde(rename = "3b")]
    Case3b,
    /// `a < 1`, `λ > a+γ`
    #[serde(rename = "3c")]
    Case3c,
}

impl TaxonomyLabel {
    pub const ALL: [TaxonomyLabel; 7] = [
        TaxonomyLabel::Case1,
        TaxonomyLabel::Case2a,
        TaxonomyLabel::Case2b,
        TaxonomyLabel::Case2c,
        TaxonomyLabel::Case3a,
        TaxonomyLabel::Case3b,
        TaxonomyLabel::Case3c,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaxonomyLabel::Case1 => "1",
            TaxonomyLabel::Case2a => "2a",
            TaxonomyLabel::Case2b => "2b",
            TaxonomyLabel::Case2c => "2c",
            TaxonomyLabel::Case3a => "3a",
            TaxonomyLabel::Case3b => "3b",
            TaxonomyLabel::Case3c => "3c",
        }
    }
}

impl std::fmt::Display for TaxonomyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pointwise limit of `u_p` as p tends to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RadialLimit {
    Infinite,
    /// `r ↦ offset + slope·(R - r)`.
    Function { offset: f64, slope: f64 },
    Zero,
}

impl RadialLimit {
    pub fn value(&self, radius: f64, r: f64) -> f64 {
        match *self {
            RadialLimit::Infinite => f64::INFINITY,
            RadialLimit::Function { offset, slope } => offset + slope * (radius - r),
            RadialLimit::Zero => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedLimit {
    pub limit: RadialLimit,
    pub label: TaxonomyLabel,
}

fn compare(x: f64, y: f64) -> std::cmp::Ordering {
    if (x - y).abs() <= CRITICAL_TOL * x.abs().max(y.abs()).max(1.0) {
        std::cmp::Ordering::Equal
    } else if x < y {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    }
}

pub fn radial_limit(case: &RadialCase) -> TaggedLimit {
    use std::cmp::Ordering::*;
    let a = case.a();
    let (limit, label) = match compare(a, 1.0) {
        Greater => (RadialLimit::Infinite, TaxonomyLabel::Case1),
        Equal => match compare(case.lambda, 1.0 + case.gamma) {
            Less => (RadialLimit::Infinite, TaxonomyLabel::Case2a),
            Equal => (RadialLimit::Function { offset: 1.0, slope: 1.0 }, TaxonomyLabel::Case2b),
            Greater => (RadialLimit::Function { offset: 0.0, slope: 1.0 }, TaxonomyLabel::Case2c),
        },
        Less => match compare(case.lambda, a + case.gamma) {
            Less => (RadialLimit::Infinite, TaxonomyLabel::Case3a),
            Equal => (RadialLimit::Function { offset: 1.0, slope: 0.0 }, TaxonomyLabel::Case3b),
            Greater => (RadialLimit::Zero, TaxonomyLabel::Case3c),
        },
    };
    TaggedLimit { limit, label }
}

/// Writes `(p, r, u_p(r))` in long format.
pub fn write_solution_grid<W: Write>(case: &RadialCase, ps: &[f64], n_r: usize, out: W) -> Result<()> {
    if n_r < 2 {
        return Err(invalid("need at least two radii"));
    }
    let mut out = out;
    writeln!(out, "# schema_version: {SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "r", "u"])?;
    for &p in ps {
        for i in 0..n_r {
            let r = case.radius * i as f64 / (n_r - 1) as f64;
            let u = radial_solution(case, p, r)?;
            w.write_record([p.to_string(), r.to_string(), u.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(n: usize, a: f64, gamma: f64, lambda: f64) -> RadialCase {
        RadialCase::new(n, 1.0, a, gamma, lambda).unwrap()
    }

    #[test]
    fn solution_examples() {
        let c = case(2, 1.0, 0.5, 2.0);
        assert!((radial_solution(&c, 2.0, 0.0).unwrap() - 1.75).abs() < 1e-15);
        assert!((radial_solution(&c, 1.5, 1.0).unwrap() - 0.5625).abs() < 1e-15);
        let z = case(2, 0.0, 0.0, 1.0);
        for p in [2.0, 1.5, 1.01] {
            for r in [0.0, 0.5, 1.0] {
                assert_eq!(radial_solution(&z, p, r).unwrap(), 0.0);
            }
        }
        assert!(radial_solution(&c, 2.0, 1.5).is_err());
        assert!(radial_solution(&c, 1.0, 0.5).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert!((radial_m(2, 1.0, 1.0, 0.5, 1.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(radial_m(2, 1.0, 0.0, 0.0, 0.7).unwrap(), 0.0);
        assert_eq!(radial_m(3, 1.0, 4.0, 0.0, 1.0).unwrap(), 2.0);
        assert!(radial_m(2, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn limit_examples() {
        let t = radial_limit(&case(2, 1.0, 0.5, 1.5));
        assert_eq!(t.label, TaxonomyLabel::Case2b);
        assert_eq!(t.limit.value(1.0, 0.25), 1.75);
        let t = radial_limit(&case(2, 0.5, 0.0, 2.0));
        assert_eq!((t.label, t.limit), (TaxonomyLabel::Case3c, RadialLimit::Zero));
        let t = radial_limit(&case(3, 4.0, 0.0, 1.0));
        assert_eq!((t.label, t.limit), (TaxonomyLabel::Case1, RadialLimit::Infinite));
    }

    #[test]
    fn saturation() {
        assert_eq!(saturating_power(2.0, 1e4), f64::INFINITY);
        assert_eq!(saturating_power(0.5, 1e4), 0.0);
        assert!((saturating_power(0.75, 128.0) - 0.75f64.powi(128)).abs() < 1e-25);
    }

    #[test]
    fn limit_agrees_with_threshold_on_grid() {
        let mut seen = std::collections::HashSet::new();
        for n in [2usize, 3, 4] {
            for ai in 0..=8 {
                for gi in 0..=4 {
                    for li in 1..=8 {
                        let c = case(n, (n - 1) as f64 * ai as f64 * 0.25, gi as f64 * 0.25, li as f64 * 0.25);
                        let t = radial_limit(&c);
                        seen.insert(t.label);
                        let m = c.threshold();
                        match t.limit {
                            RadialLimit::Infinite => assert!(m > 1.0, "{c:?}"),
                            RadialLimit::Function { .. } => assert!((m - 1.0).abs() < 1e-12, "{c:?}"),
                            RadialLimit::Zero => assert!(m < 1.0, "{c:?}"),
                        }
                    }
                }
            }
        }
        assert_eq!(seen.len(), TaxonomyLabel::ALL.len());
    }

    #[test]
    fn pointwise_convergence_to_limit() {
        let p = 1.001;
        for c in [case(2, 1.0, 0.5, 1.5), case(2, 1.0, 0.5, 2.0), case(2, 0.5, 0.5, 1.0), case(2, 0.5, 0.0, 2.0)] {
            let t = radial_limit(&c);
            for r in [0.0, 0.3, 0.7, 1.0] {
                let u = radial_solution(&c, p, r).unwrap();
                let l = t.limit.value(1.0, r);
                assert!((u - l).abs() <= 0.01 * l.abs().max(1e-2), "{c:?} r={r}: {u} vs {l}");
            }
        }
        for c in [case(2, 2.0, 0.0, 1.0), case(2, 1.0, 0.5, 1.0), case(2, 0.5, 1.0, 1.0)] {
            assert!(radial_solution(&c, p, 0.5).unwrap() > 1e100);
        }
    }

    #[test]
    fn grid_csv_has_header() {
        let mut buf = Vec::new();
        write_solution_grid(&case(2, 1.0, 0.5, 2.0), &[2.0, 1.5], 3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# schema_version: 1");
        assert_eq!(lines[1], "p,r,u");
        assert_eq!(lines.len(), 8);
    }
}
