#![allow(dead_code)]

use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellsim::contact::{friction_energy, penalty_energy};
use shellsim::energy::{bend_hinge, neo_hookean, stretch_area, stretch_edge, tet_energy, EnergyEval};

pub fn rel_err(a: &[f64], f: &[f64]) -> f64 {
    let num = a.iter().zip(f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = a.iter().chain(f).map(|v| v.abs()).fold(1e-10, f64::max);
    num / den
}

pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let dn = f(&p);
            p[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Column-major central-difference Jacobian.
pub fn fd_jacobian(g: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    let mut out = Vec::new();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = g(&p);
        p[i] = x[i] - h;
        let dn = g(&p);
        p[i] = x[i];
        out.extend(up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * h)));
    }
    out
}

fn pts<const K: usize>(x: &[f64]) -> [Vector3<f64>; K] {
    std::array::from_fn(|k| Vector3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]))
}

/// Worst gradient and Hessian errors of `eval` against FD over one point.
pub fn check<const N: usize>(eval: impl Fn(&[f64]) -> EnergyEval<f64, N>, x: &[f64]) -> (f64, f64) {
    let h = 1e-6;
    let e = eval(x);
    let g_fd = fd_gradient(|p| eval(p).value, x, h);
    let h_fd = fd_jacobian(|p| eval(p).gradient.as_slice().to_vec(), x, h);
    (rel_err(e.gradient.as_slice(), &g_fd), rel_err(e.hessian.as_slice(), &h_fd))
}

fn jitter(rng: &mut ChaCha8Rng, base: &[f64], s: f64) -> Vec<f64> {
    base.iter().map(|b| b + rng.gen_range(-s..s)).collect()
}

pub struct SuiteRow {
    pub name: &'static str,
    pub samples: usize,
    pub grad: f64,
    pub hess: f64,
}

/// Randomized derivative suite for every element energy (unit-scale geometry
/// so that the fixed FD step resolves every regime).
pub fn energy_suite(samples: usize, seed: u64) -> Vec<SuiteRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut run = |name: &'static str, rng: &mut ChaCha8Rng, f: &mut dyn FnMut(&mut ChaCha8Rng) -> (f64, f64)| {
        let mut worst = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let (g, h) = f(rng);
            worst = (worst.0.max(g), worst.1.max(h));
        }
        rows.push(SuiteRow { name, samples, grad: worst.0, hess: worst.1 });
    };

    run("neo_hookean", &mut rng, &mut |rng| {
        let mut f = Matrix3::identity();
        for v in f.iter_mut() {
            *v += rng.gen_range(-0.6..0.6);
        }
        if rng.gen_bool(0.2) {
            f.set_column(0, &(-f.column(0)));
        }
        let (mu, la) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..4.0));
        check(|p| neo_hookean(&Matrix3::from_column_slice(p), mu, la), f.as_slice())
    });
    run("tet_energy", &mut rng, &mut |rng| {
        let rest = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let r = jitter(rng, &rest, 0.15);
        let dm = Matrix3::from_columns(&[
            Vector3::new(r[3] - r[0], r[4] - r[1], r[5] - r[2]),
            Vector3::new(r[6] - r[0], r[7] - r[1], r[8] - r[2]),
            Vector3::new(r[9] - r[0], r[10] - r[1], r[11] - r[2]),
        ]);
        let inv = dm.try_inverse().unwrap();
        let vol = dm.determinant() / 6.0;
        let x = jitter(rng, &r, 0.3);
        check(|p| tet_energy(&pts::<4>(p), &inv, vol, 1.3, 2.1), &x)
    });
    run("stretch_edge", &mut rng, &mut |rng| {
        let x = jitter(rng, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 0.5);
        let rest = rng.gen_range(0.5..1.5);
        check(|p| { let q = pts::<2>(p); stretch_edge(&q[0], &q[1], rest, 2.0) }, &x)
    });
    run("stretch_area", &mut rng, &mut |rng| {
        let x = jitter(rng, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 0.3);
        let rest = rng.gen_range(0.3..0.8);
        check(|p| { let q = pts::<3>(p); stretch_area(&q[0], &q[1], &q[2], rest, 2.0) }, &x)
    });
    run("bend_hinge", &mut rng, &mut |rng| {
        let phi = rng.gen_range(-2.5..2.5f64);
        let base = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.4, 1.0, 0.0, 0.6, -phi.cos(), phi.sin()];
        let x = jitter(rng, &base, 0.15);
        let rest = rng.gen_range(-1.0..1.0);
        check(|p| bend_hinge(&pts::<4>(p), rest, 1.0, 0.4, 1.5), &x)
    });
    run("penalty_energy", &mut rng, &mut |rng| {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let base = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.3, 0.3, side * rng.gen_range(-0.05..0.08)];
        let x = jitter(rng, &base, 0.05);
        check(|p| penalty_energy(&pts::<4>(p), side, 10.0, 0.1), &x)
    });
    run("friction_energy", &mut rng, &mut |rng| {
        let prev = jitter(rng, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.3, 0.3, 0.02], 0.02);
        let eps_v = 0.05;
        // slip magnitudes on both sides of eps_v, away from the knot
        let mag = if rng.gen_bool(0.5) { rng.gen_range(0.005..0.04) } else { rng.gen_range(0.06..0.2) };
        let dir = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut x = jitter(rng, &prev, 0.002);
        x[9] += mag * dir.cos();
        x[10] += mag * dir.sin();
        let xp = pts::<4>(&prev);
        check(|p| friction_energy(&pts::<4>(p), &xp, 1.0, 0.7, 10.0, 0.1, eps_v), &x)
    });
    rows
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub mod scenes;
