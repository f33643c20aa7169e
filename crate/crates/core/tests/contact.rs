mod common;

use std::collections::BTreeSet;

use nalgebra::Vector3;
use proptest::prelude::*;
use shellsim::contact::{brute_force_pairs, detect_collisions, f0, f1_over_y, friction_gradient, ContactParams};
use shellsim::dynamics::{ClampMode, Simulation};

use common::scenes;

/// Settles a sheet on the floor; returns (sum of lambda, weight, deepest
/// penetration over the run, lowest vertex height over the run).
fn settle(steps: usize) -> (f64, f64, f64, f64) {
    let scene = scenes::resting_sheet(9, 0.08);
    let sheet = &scene.bodies[1];
    let verts = sheet.first_vertex..sheet.first_vertex + sheet.num_vertices();
    let weight: f64 = verts.clone().map(|v| scene.mass[3 * v]).sum::<f64>() * scene.gravity.norm();
    let mut sim = Simulation::new(&scene);
    let mut lowest = f64::INFINITY;
    for _ in 0..steps {
        let r = sim.step(&[], ClampMode::Strict).unwrap();
        assert!(r.newton.converged);
        for v in verts.clone() {
            lowest = lowest.min(sim.state.x[3 * v + 2]);
        }
    }
    let lambda: f64 = sim.pairs.iter().map(|p| p.lambda).sum();
    let eps = scene.contact.eps_r;
    (lambda, weight, (eps - lowest).max(0.0), lowest)
}

#[test]
fn resting_sheet_carries_its_weight() {
    let (lambda, weight, depth, lowest) = settle(500);
    assert!((lambda - weight).abs() <= 0.05 * weight, "{lambda} vs {weight}");
    assert!(depth < 1e-3, "penetration {depth}");
    assert!(lowest > 0.0, "tunnelled to {lowest}");
}

#[test]
fn friction_force_saturates_at_mu_lambda() {
    let p = ContactParams::default();
    let (mu, d) = (0.4, 0.4e-3);
    let prev = [Vector3::new(-1.0, -1.0, 0.0), Vector3::new(1.0, -1.0, 0.0), Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.1, 0.0, d)];
    let lambda = p.k_r * (p.eps_r - d);
    for (ux, uy) in [(1.0, 0.0), (0.6, -0.8), (3.0, 4.0), (-250.0, 10.0)] {
        let mut x = prev;
        x[3] += Vector3::new(ux, uy, 0.0) * p.eps_v;
        let (_, g) = friction_gradient(&x, &prev, 1.0, mu, p.k_r, p.eps_r, p.eps_v);
        let force = Vector3::new(g[9], g[10], g[11]).norm();
        assert!((force - mu * lambda).abs() <= 1e-6 * mu * lambda, "{force} vs {}", mu * lambda);
        assert!(g[11].abs() < 1e-12 * mu * lambda);
    }
    let (e, g) = friction_gradient(&prev, &prev, 1.0, mu, p.k_r, p.eps_r, p.eps_v);
    assert!(g.iter().all(|v| *v == 0.0));
    assert!((e - mu * lambda * p.eps_v / 3.0).abs() < 1e-18);
}

#[test]
fn f0_is_c1_at_the_smoothing_distance() {
    for eps in [1e-6f64, 1e-5, 3e-4] {
        let below = eps * (1.0 - 1e-15);
        let above = eps * (1.0 + 1e-15);
        assert!((f0(eps, eps) - eps).abs() <= 1e-12 * eps);
        assert!((f0(below, eps) - f0(above, eps)).abs() <= 1e-12 * eps);
        let slope = |y: f64| f1_over_y(y, eps).0 * y;
        assert!((slope(below) - 1.0).abs() < 1e-12);
        assert!((slope(above) - 1.0).abs() < 1e-12);
        assert_eq!(f1_over_y(0.0, eps).0 * 0.0, 0.0);
    }
}

fn keyset(pairs: impl IntoIterator<Item = (usize, usize, usize)>) -> BTreeSet<(usize, usize, usize)> {
    pairs.into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hashed_detection_matches_brute_force(
        bumps in proptest::collection::vec(-2.5e-3..2.5e-3f64, 81),
        shift in proptest::collection::vec(-1e-3..1e-3f64, 2),
        lift in -0.5e-3..1.5e-3f64,
    ) {
        let scene = scenes::resting_sheet(9, 0.08);
        let sheet = &scene.bodies[1];
        let mut x: Vec<f64> = scene.initial.x.iter().copied().collect();
        for (i, dz) in bumps.iter().enumerate() {
            let v = sheet.first_vertex + i;
            x[3 * v] += shift[0];
            x[3 * v + 1] += shift[1];
            x[3 * v + 2] += lift + dz;
        }
        let p = &scene.contact;
        let fast = detect_collisions(&scene.surfaces, &x, &x, &[], p).unwrap();
        let fast = keyset(fast.iter().map(|c| (c.vertex, c.surface, c.triangle_index)));
        let slow = keyset(brute_force_pairs(&scene.surfaces, &x, p.release_distance(), p.eps_r));
        prop_assert_eq!(fast, slow);
    }
}
