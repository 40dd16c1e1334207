//! Gauss-Legendre rules and a collapsed (Duffy) rule on triangles.

use std::f64::consts::PI;

/// Gauss-Legendre rule with `n` points mapped to `[0, 1]`.
///
/// Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n > 0, "rule needs at least one point");
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Point of a collapsed tensor rule on a triangle: barycentric coordinates
/// and weight (already multiplied by the triangle area).
#[derive(Clone, Copy, Debug)]
pub struct TrianglePoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Collapsed Gauss rule on a triangle of area `area`, degenerate at local
/// vertex 0. The Jacobian vanishes linearly at that vertex, which cancels a
/// `1/|x - v0|` singularity.
pub fn duffy_triangle(order: usize, area: f64) -> Vec<TrianglePoint> {
    let gl = gauss_legendre(order);
    let mut pts = Vec::with_capacity(order * order);
    for &(xi, wx) in &gl {
        for &(eta, wy) in &gl {
            let l1 = xi * (1.0 - eta);
            let l2 = xi * eta;
            pts.push(TrianglePoint {
                bary: [1.0 - xi, l1, l2],
                weight: 2.0 * area * xi * wx * wy,
            });
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=10 {
            let rule = gauss_legendre(n);
            let wsum: f64 = rule.iter().map(|&(_, w)| w).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for deg in 0..(2 * n) {
                let q: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn duffy_rule_has_triangle_area_and_linear_moments() {
        let pts = duffy_triangle(5, 0.5);
        let area: f64 = pts.iter().map(|p| p.weight).sum();
        assert!((area - 0.5).abs() < 1e-14);
        for k in 0..3 {
            let m: f64 = pts.iter().map(|p| p.weight * p.bary[k]).sum();
            assert!((m - 0.5 / 3.0).abs() < 1e-14);
        }
    }
}
