//! Algebraic properties of the λ-norm and of the meshes.

use plap_core::*;
use proptest::prelude::*;

fn meshes() -> Vec<Mesh> {
    vec![build_disk(1.3, 2).unwrap(), build_radial(3, 2.0, 30, 1.5).unwrap(), build_interval(8, 0.7).unwrap()]
}

fn field(mesh: &Mesh, seed: &[f64]) -> Field {
    Field::new(mesh, (0..mesh.node_count()).map(|i| seed[i % seed.len()] * (1.0 + 0.1 * i as f64).sin()).collect())
        .unwrap()
}

fn lambda(mesh: &Mesh, scale: f64) -> Vec<f64> {
    (0..mesh.boundary_nodes().len()).map(|k| scale * (1.0 + (k % 3) as f64)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_clamps(s in -1e6f64..1e6, k in 0.0f64..100.0) {
        let t = truncate(s, k).unwrap();
        prop_assert!(t.abs() <= k);
        if s.abs() <= k {
            prop_assert_eq!(t, s);
        }
    }

    #[test]
    fn norm_is_homogeneous(seed in proptest::collection::vec(-5.0f64..5.0, 1..9), t in -10.0f64..10.0, ls in 0.0f64..3.0) {
        for mesh in meshes() {
            let u = field(&mesh, &seed);
            let lam = lambda(&mesh, ls);
            let a = norm_lambda(&u.scaled(t), &mesh, &lam).unwrap();
            let b = t.abs() * norm_lambda(&u, &mesh, &lam).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn norm_is_subadditive(
        s1 in proptest::collection::vec(-5.0f64..5.0, 1..9),
        s2 in proptest::collection::vec(-5.0f64..5.0, 1..9),
        ls in 0.0f64..3.0,
    ) {
        for mesh in meshes() {
            let u = field(&mesh, &s1);
            let v = field(&mesh, &s2);
            let lam = lambda(&mesh, ls);
            let w = Field::new(&mesh, u.values().iter().zip(v.values()).map(|(a, b)| a + b).collect()).unwrap();
            let lhs = norm_lambda(&w, &mesh, &lam).unwrap();
            let rhs = norm_lambda(&u, &mesh, &lam).unwrap() + norm_lambda(&v, &mesh, &lam).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn gradients_satisfy_divergence_theorem(seed in proptest::collection::vec(-5.0f64..5.0, 1..9), w in proptest::array::uniform2(-2.0f64..2.0)) {
        let mesh = build_disk(1.0, 2).unwrap();
        let u = field(&mesh, &seed);
        let grads = plap_core::mesh::gradient(&mesh, &u).unwrap();
        let volume: f64 = mesh.elements().iter().zip(&grads).map(|(e, g)| e.measure * (g[0] * w[0] + g[1] * w[1])).sum();
        let surface: f64 = mesh
            .facets()
            .iter()
            .map(|f| {
                let avg = f.nodes.iter().map(|&n| u.values()[n]).sum::<f64>() / f.nodes.len() as f64;
                f.measure * avg * (w[0] * f.normal[0] + w[1] * f.normal[1])
            })
            .sum();
        prop_assert!((volume - surface).abs() <= 1e-10 * volume.abs().max(1.0));
    }
}

#[test]
fn constant_field_measures_lambda() {
    for mesh in meshes() {
        let lam = lambda(&mesh, 0.7);
        let one = Field::from_fn(&mesh, |_| 1.0);
        let n = norm_lambda(&one, &mesh, &lam).unwrap();
        let m = measure_lambda(&mesh, &lam).unwrap();
        assert!((m - mesh.volume() - n).abs() <= 1e-12 * m);
    }
}

#[test]
fn affine_gradient_is_exact() {
    let mesh = build_disk(1.0, 3).unwrap();
    let u = Field::from_fn(&mesh, |x| 2.0 * x[0] - 0.5 * x[1] + 3.0);
    for g in plap_core::mesh::gradient(&mesh, &u).unwrap() {
        assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 0.5).abs() < 1e-12);
    }
    let radial = build_radial(2, 1.0, 20, 1.0).unwrap();
    let v = Field::from_fn(&radial, |x| 1.0 - x[0]);
    for g in plap_core::mesh::gradient(&radial, &v).unwrap() {
        assert!((g[0] + 1.0).abs() < 1e-12);
    }
}
