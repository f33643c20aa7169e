mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellsim::dynamics::{
    fix_dofs, newton_solve, solve_spd, ClampMode, EvalLevel, IncrementalPotential, Potential, SceneEnergy, Simulation,
    SparseSystem,
};

use common::scenes;

fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::from_fn(n, n, |_, _| if rng.gen_bool(0.1) { rng.gen_range(-1.0..1.0) } else { 0.0 });
    a = &a * a.transpose();
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    a
}

fn sparse(a: &DMatrix<f64>) -> SparseSystem {
    let mut s = SparseSystem::new(a.nrows());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)] != 0.0 {
                s.push(i, j, a[(i, j)]);
            }
        }
    }
    s
}

#[test]
fn spd_solve_residual() {
    let a = random_spd(100, 3);
    let b: Vec<f64> = (0..100).map(|i| (i as f64).cos()).collect();
    let u = solve_spd(&sparse(&a), &b).unwrap();
    let r = &a * DVector::from_vec(u) - DVector::from_vec(b.clone());
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(r.amax() <= 1e-10 * (1.0 + bmax));
}

#[test]
fn constrained_solve_matches_reduced_system() {
    let n = 40;
    let a = random_spd(n, 9);
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let fixed: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
    let mut s = sparse(&a);
    let mut rhs = b.clone();
    fix_dofs(&mut s, &mut rhs, &fixed);
    let u = solve_spd(&s, &rhs).unwrap();

    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let ar = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
    let br = DVector::from_iterator(free.len(), free.iter().map(|&i| b[i]));
    let ur = ar.cholesky().unwrap().solve(&br);
    for (k, &i) in free.iter().enumerate() {
        assert!((u[i] - ur[k]).abs() < 1e-12);
    }
    assert!(fixed.iter().zip(&u).all(|(&f, &v)| !f || v == 0.0));
}

#[test]
fn fixing_one_end_of_a_spring_moves_only_the_other() {
    // 1-D spring of stiffness k between dofs 0 and 1, stretched by 1
    let k = 4.0;
    let mut s = SparseSystem::new(2);
    for (i, j, v) in [(0, 0, k), (1, 1, k), (0, 1, -k), (1, 0, -k)] {
        s.push(i, j, v);
    }
    let mut rhs = vec![k, -k];
    let fixed = [true, false];
    fix_dofs(&mut s, &mut rhs, &fixed);
    let u = solve_spd(&s, &rhs).unwrap();
    assert_eq!(u[0], 0.0);
    assert!((u[1] + 1.0).abs() < 1e-15);
}

#[test]
fn zero_action_without_gravity_is_a_fixed_point() {
    let mut scene = scenes::floating_sheet(5);
    scene.gravity = nalgebra::Vector3::zeros();
    let mut sim = Simulation::new(&scene);
    let x0 = sim.state.x.clone();
    for _ in 0..3 {
        let r = sim.step(&[], ClampMode::Strict).unwrap();
        assert!(r.newton.converged);
    }
    assert_eq!(sim.state.x, x0);
    assert!(sim.state.v.amax() == 0.0);
}

#[test]
fn free_fall_follows_ballistic_update() {
    let scene = scenes::floating_sheet(4);
    let mut sim = Simulation::new(&scene);
    let h = scene.h;
    let mut expect = sim.state.x.clone();
    let mut vz = 0.0;
    for _ in 0..5 {
        sim.step(&[], ClampMode::Strict).unwrap();
        vz += -9.8 * h;
        for i in (2..expect.len()).step_by(3) {
            expect[i] += h * vz;
        }
    }
    let err = (sim.state.x.clone() - expect).amax();
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn momentum_change_equals_weight_impulse() {
    let scene = scenes::floating_sheet(6);
    let mut sim = Simulation::new(&scene);
    // stretched and spinning start so internal forces are active
    let n = sim.state.x.len();
    for i in 0..n {
        sim.state.x[i] *= 1.05;
        sim.state.v[i] = 0.05 * ((i as f64) * 1.3).sin();
    }
    let momentum = |v: &DVector<f64>, axis: usize| (axis..n).step_by(3).map(|i| scene.mass[i] * v[i]).sum::<f64>();
    let total: f64 = (0..n).step_by(3).map(|i| scene.mass[i]).sum();
    for _ in 0..3 {
        let before: Vec<f64> = (0..3).map(|a| momentum(&sim.state.v, a)).collect();
        let r = sim.step(&[], ClampMode::Strict).unwrap();
        assert!(r.newton.converged);
        let impulse = total * 9.8 * scene.h;
        for a in 0..3 {
            let dp = momentum(&sim.state.v, a) - before[a];
            let expect = if a == 2 { -impulse } else { 0.0 };
            assert!((dp - expect).abs() <= 1e-10 * impulse, "axis {a}: {dp} vs {expect}");
        }
    }
}

#[test]
fn hanging_sheet_balances_weight() {
    let mut scene = scenes::hanging_sheet(6, 0.05);
    // a very long step makes the solve a static equilibrium problem
    scene.h = 10.0;
    let mut sim = Simulation::new(&scene);
    let r = sim.step(&[], ClampMode::Strict).unwrap();
    assert!(r.newton.converged);
    let x = sim.state.x.as_slice();
    let energy = SceneEnergy { scene: &scene, rest_angles: &sim.state.rest_angles, pairs: &[], x_prev: x };
    let e = energy.eval(x, EvalLevel::Gradient);
    for v in 0..scene.num_vertices() {
        if scene.dof_map.is_vertex_fixed(v) {
            continue;
        }
        let m = scene.mass[3 * v];
        let f = nalgebra::Vector3::new(-e.gradient[3 * v], -e.gradient[3 * v + 1], -e.gradient[3 * v + 2] - m * 9.8);
        assert!(f.norm() < 1e-6, "vertex {v}: net force {f}");
    }
}

#[test]
fn pressing_pad_activates_contact() {
    let scene = scenes::pad_over_sheet(1.8e-3);
    let mut sim = Simulation::new(&scene);
    let r = sim.step(&[0.0; 6], ClampMode::Strict).unwrap();
    assert_eq!(r.manipulator_pairs, 0);
    let r = sim.step(&[0.0, 0.0, -1e-3, 0.0, 0.0, 0.0], ClampMode::Strict).unwrap();
    assert!(r.manipulator_pairs > 0);
    assert!(r.manipulator_force > 0.0);
    assert!(sim.pairs.iter().filter(|p| p.manipulator).any(|p| p.lambda > 0.0));
}

#[test]
fn attachments_follow_commanded_pose() {
    let scene = scenes::pad_over_sheet(1.8e-3);
    let mut sim = Simulation::new(&scene);
    for k in 0..4 {
        let a = [1e-4 * k as f64, -2e-4, -3e-4, 0.004, -0.008, 0.002];
        sim.step(&a, ClampMode::Strict).unwrap();
    }
    let m = &scene.manipulators[0];
    for att in &m.attachments {
        let p = m.position(att, &sim.poses[0]);
        for r in 0..3 {
            assert_eq!(sim.state.x[3 * att.vertex + r], p[r]);
        }
    }
}

#[test]
fn rollout_is_bit_identical() {
    let scene = scenes::pad_over_sheet(1.8e-3);
    let run = || {
        let mut sim = Simulation::new(&scene);
        for k in 0..6 {
            let dz = if k < 3 { -6e-4 } else { 0.0 };
            sim.step(&[3e-4, 0.0, dz, 0.0, 0.0, 0.0], ClampMode::Strict).unwrap();
        }
        sim.state.hash()
    };
    assert_eq!(run(), run());
}

#[test]
fn newton_never_increases_objective() {
    let scene = scenes::pad_over_sheet(1.8e-3);
    let mut sim = Simulation::new(&scene);
    for k in 0..8 {
        let dz = if k < 4 { -8e-4 } else { 0.0 };
        let r = sim.step(&[5e-4, 0.0, dz, 0.0, 0.0, 0.0], ClampMode::Strict).unwrap();
        // accepted iterates never raise g beyond its rounding resolution
        assert!(r.newton.history.windows(2).all(|w| w[1] <= w[0] + r.newton.noise));
        assert!(r.newton.converged, "step {k}: {:?}", r.newton);
    }
}

#[test]
fn incremental_potential_reports_scale() {
    let scene = scenes::floating_sheet(3);
    let x = scene.initial.x.as_slice();
    let energy = SceneEnergy { scene: &scene, rest_angles: &scene.initial.rest_angles, pairs: &[], x_prev: x };
    let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
    let ip = IncrementalPotential { energy: &energy, mass: &scene.mass, y: &y, h: scene.h, fixed: &scene.dof_map.fixed };
    assert!(ip.residual_scale(x) >= 1.0);
    let (_, rep) = newton_solve(&ip, x.to_vec(), &scene.newton);
    assert!(rep.converged);
}
