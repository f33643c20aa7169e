mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellsim::adjoint::{backward, backward_step, parameter_gradient, trajectory_gradient, LossGrads};
use shellsim::contact::MaterialClass;
use shellsim::dynamics::{ClampMode, ParamId, Scene, Simulation, StepRecord};

use common::scenes;

struct Run {
    x: Vec<f64>,
    rest: Vec<f64>,
    tape: Vec<StepRecord>,
}

fn run(scene: &Scene, actions: &[Vec<f64>]) -> Run {
    let mut sim = Simulation::new(scene);
    for a in actions {
        sim.step(a, ClampMode::Strict).unwrap();
    }
    Run { x: sim.state.x.as_slice().to_vec(), rest: sim.state.rest_angles.clone(), tape: sim.tape }
}

/// Contact set and yield decisions of every step.
fn structure(r: &Run) -> Vec<(Vec<(usize, usize, usize, i8)>, Vec<bool>)> {
    r.tape
        .iter()
        .map(|s| (s.pairs.iter().map(|p| (p.vertex, p.surface, p.triangle_index, p.side as i8)).collect(), s.yielded.clone()))
        .collect()
}

struct Linear {
    wx: Vec<f64>,
    wr: Vec<f64>,
}

impl Linear {
    fn random(scene: &Scene, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wx = (0..scene.num_dofs()).map(|i| if scene.dof_map.fixed[i] { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let wr = (0..scene.num_hinges()).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        Linear { wx, wr }
    }

    fn eval(&self, r: &Run) -> f64 {
        let a: f64 = self.wx.iter().zip(&r.x).map(|(w, x)| w * x).sum();
        a + self.wr.iter().zip(&r.rest).map(|(w, x)| w * x).sum::<f64>()
    }

    fn grads(&self, steps: usize) -> LossGrads {
        LossGrads::terminal(steps, self.wx.clone(), self.wr.clone())
    }
}

/// FD differences need the Newton solve resolved well below the step size.
fn tight(mut scene: Scene) -> Scene {
    scene.newton.tolerance = 1e-11;
    scene
}

fn press_and_drag() -> Vec<Vec<f64>> {
    (0..6).map(|k| if k < 3 { vec![0.0, 0.0, -8e-4, 0.0, 0.0, 0.0] } else { vec![5e-4, 1e-4, 0.0, 0.0, 0.0, 2e-3] }).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn zero_incoming_gradient_gives_zero_outputs() {
    let scene = scenes::pad_over_sheet(1.8e-3);
    let r = run(&scene, &press_and_drag());
    let out = backward_step(&scene, &r.tape[4], &vec![0.0; scene.num_dofs()], &[ParamId::BendingStiffness]).unwrap();
    for v in [&out.dx_start, &out.dx_before, &out.dx_fixed, &out.drest, &out.dparams] {
        assert!(v.iter().all(|&g| g == 0.0));
    }
}

#[test]
fn free_translation_routes_two_and_minus_one() {
    let scene = scenes::limp_sheet(4);
    let r = run(&scene, &[vec![], vec![]]);
    let ones = vec![1.0; scene.num_dofs()];
    let out = backward_step(&scene, &r.tape[1], &ones, &[]).unwrap();
    for i in 0..scene.num_dofs() {
        assert!((out.dx_start[i] - 2.0).abs() < 1e-9, "{}", out.dx_start[i]);
        assert!((out.dx_before[i] + 1.0).abs() < 1e-9);
    }
    // with elasticity only the totals survive: translation is in the stiffness null space
    let scene = scenes::floating_sheet(4);
    let r = run(&scene, &[vec![], vec![]]);
    let out = backward_step(&scene, &r.tape[1], &ones, &[]).unwrap();
    let n = scene.num_dofs() as f64;
    assert!((out.dx_start.iter().sum::<f64>() - 2.0 * n).abs() < 1e-8 * n);
    assert!((out.dx_before.iter().sum::<f64>() + n).abs() < 1e-8 * n);
}

#[test]
fn ballistic_rollout_matches_double_integrator() {
    let scene = scenes::limp_sheet(3);
    let steps = 7;
    let r = run(&scene, &vec![vec![]; steps]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w: Vec<f64> = (0..scene.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut loss = LossGrads::zeros(steps);
    loss.x[steps] = w.clone();
    let g = backward(&scene, &r.tape, &loss, &[]).unwrap();
    // x^T = x^0 + T h v^0 + h^2 g T(T+1)/2: unit sensitivity to x^0
    for i in 0..w.len() {
        assert!((g.initial[i] - w[i]).abs() < 1e-9);
    }
    // weight on an intermediate state only: same answer
    let mut mid = LossGrads::zeros(steps);
    mid.x[3] = w.clone();
    let g = backward(&scene, &r.tape, &mid, &[]).unwrap();
    assert!(g.initial.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-9));
}

#[test]
fn attachment_height_gives_count_translation_gradient() {
    let scene = scenes::pad_over_sheet(1.8e-3);
    let acts = press_and_drag();
    let r = run(&scene, &acts);
    let mut wx = vec![0.0; scene.num_dofs()];
    let atts = &scene.manipulators[0].attachments;
    for a in atts {
        wx[3 * a.vertex + 2] = 1.0;
    }
    let g = trajectory_gradient(&scene, &r.tape, &LossGrads::terminal(acts.len(), wx, vec![])).unwrap();
    for step in &g {
        assert!(step[0].abs() < 1e-12 && step[1].abs() < 1e-12);
        assert!((step[2] - atts.len() as f64).abs() < 1e-12);
    }
}

fn fd_action_check(scene: &Scene, acts: &[Vec<f64>], loss: &Linear, components: &[usize], eps: f64) -> (usize, usize, f64) {
    let nominal = run(scene, acts);
    let g = trajectory_gradient(scene, &nominal.tape, &loss.grads(acts.len())).unwrap();
    let base = structure(&nominal);
    let (mut checked, mut excluded, mut worst) = (0, 0, 0.0f64);
    for t in 0..acts.len() {
        for &c in components {
            let mut p = acts.to_vec();
            p[t][c] += eps;
            let up = run(scene, &p);
            p[t][c] -= 2.0 * eps;
            let dn = run(scene, &p);
            if structure(&up) != base || structure(&dn) != base {
                excluded += 1;
                continue;
            }
            let fd = (loss.eval(&up) - loss.eval(&dn)) / (2.0 * eps);
            checked += 1;
            let e = rel(g[t][c], fd);
            worst = worst.max(e);
            assert!(e < 1e-3, "step {t} comp {c}: adjoint {:e} fd {fd:e}", g[t][c]);
        }
    }
    (checked, excluded, worst)
}

#[test]
fn trajectory_gradient_matches_fd_on_contact_scene() {
    let scene = tight(scenes::pad_over_sheet(1.8e-3));
    let loss = Linear::random(&scene, 11);
    let (checked, excluded, _) = fd_action_check(&scene, &press_and_drag(), &loss, &[0, 1, 2], 1e-7);
    assert!(checked >= 12, "checked {checked}, excluded {excluded}");
}

#[test]
fn rotation_gradient_matches_fd() {
    let scene = tight(scenes::pad_over_sheet(1.8e-3));
    let loss = Linear::random(&scene, 12);
    let (checked, _, _) = fd_action_check(&scene, &press_and_drag(), &loss, &[3, 4, 5], 1e-7);
    assert!(checked >= 12);
}

fn fd_param(scene: &Scene, acts: &[Vec<f64>], loss: &Linear, id: ParamId, eps: f64) -> (f64, f64) {
    let nominal = run(scene, acts);
    let g = parameter_gradient(scene, &nominal.tape, &loss.grads(acts.len()), &[id]).unwrap()[&id];
    let v = scene.param(id);
    let mut up = scene.clone();
    up.set_param(id, v + eps).unwrap();
    let mut dn = scene.clone();
    dn.set_param(id, v - eps).unwrap();
    let (ru, rd) = (run(&up, acts), run(&dn, acts));
    assert_eq!(structure(&ru), structure(&nominal), "{id} perturbation changed the contact set");
    assert_eq!(structure(&rd), structure(&nominal));
    (g, (loss.eval(&ru) - loss.eval(&rd)) / (2.0 * eps))
}

#[test]
fn parameter_gradients_match_fd() {
    let scene = tight(scenes::pad_over_sheet(1.8e-3));
    let acts = press_and_drag();
    let loss = Linear::random(&scene, 21);
    for (id, eps) in [
        (ParamId::BendingStiffness, 1e-2),
        (ParamId::Friction(MaterialClass::Cloth, MaterialClass::Manipulator), 1e-4),
        (ParamId::Friction(MaterialClass::Cloth, MaterialClass::Table), 1e-4),
        (ParamId::PenaltyStiffness, 1.0),
    ] {
        let (g, fd) = fd_param(&scene, &acts, &loss, id, eps);
        assert!(rel(g, fd) < 1e-3, "{id}: adjoint {g:e} fd {fd:e}");
    }
    let block = tight(scenes::pad_over_block(1.8e-3));
    let loss = Linear::random(&block, 22);
    for id in [ParamId::LameMu, ParamId::LameLambda] {
        let (g, fd) = fd_param(&block, &acts, &loss, id, 1.0);
        assert!(rel(g, fd) < 1e-3, "{id}: adjoint {g:e} fd {fd:e}");
    }
}

#[test]
fn flat_sheet_has_zero_bending_gradient() {
    let scene = scenes::floating_sheet(4);
    let r = run(&scene, &vec![vec![]; 3]);
    let loss = Linear::random(&scene, 3);
    let g = parameter_gradient(&scene, &r.tape, &loss.grads(3), &[ParamId::BendingStiffness]).unwrap();
    assert!(g[&ParamId::BendingStiffness].abs() < 1e-15);
}

#[test]
fn yield_angle_is_rejected() {
    let scene = scenes::floating_sheet(3);
    let r = run(&scene, &[vec![]]);
    let err = parameter_gradient(&scene, &r.tape, &LossGrads::zeros(1), &[ParamId::YieldAngle]).unwrap_err();
    assert!(err.to_string().contains("YieldAngle"));
}

#[test]
fn backward_is_linear_in_the_loss() {
    let scene = scenes::pad_over_sheet(1.8e-3);
    let acts = press_and_drag();
    let r = run(&scene, &acts);
    let (l1, l2) = (Linear::random(&scene, 1), Linear::random(&scene, 2));
    let (a, b) = (0.7, -1.3);
    let combo = Linear {
        wx: l1.wx.iter().zip(&l2.wx).map(|(x, y)| a * x + b * y).collect(),
        wr: l1.wr.iter().zip(&l2.wr).map(|(x, y)| a * x + b * y).collect(),
    };
    let ids = [ParamId::BendingStiffness, ParamId::PenaltyStiffness];
    let g1 = backward(&scene, &r.tape, &l1.grads(6), &ids).unwrap();
    let g2 = backward(&scene, &r.tape, &l2.grads(6), &ids).unwrap();
    let gc = backward(&scene, &r.tape, &combo.grads(6), &ids).unwrap();
    for t in 0..6 {
        for c in 0..6 {
            let expect = a * g1.actions[t][c] + b * g2.actions[t][c];
            assert!((gc.actions[t][c] - expect).abs() <= 1e-9 * (1.0 + expect.abs()), "{t} {c}: {} vs {expect}", gc.actions[t][c]);
        }
    }
    for id in ids {
        let expect = a * g1.params[&id] + b * g2.params[&id];
        assert!((gc.params[&id] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
    }
}

