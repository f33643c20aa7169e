use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// CMA-ES minimizer state: weighted recombination, rank-one and rank-mu
/// covariance updates and cumulative step-size adaptation.
#[derive(Debug, Clone)]
pub struct CmaEs {
    n: usize,
    pub lambda: usize,
    weights: Vec<f64>,
    mueff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    ps: DVector<f64>,
    pc: DVector<f64>,
    pub generation: usize,
    /// Covariance repairs performed.
    pub repairs: usize,
    rng: ChaCha8Rng,
    pending: Vec<DVector<f64>>,
}

impl CmaEs {
    pub fn new(mean: Vec<f64>, sigma: f64, lambda: usize, seed: u64) -> Self {
        let n = mean.len().max(1);
        let lambda = lambda.max(2);
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu).map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let nf = n as f64;
        let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let cs = (mueff + 2.0) / (nf + mueff + 5.0);
        let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        CmaEs {
            n,
            lambda,
            weights,
            mueff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            mean: DVector::from_vec(if mean.is_empty() { vec![0.0] } else { mean }),
            sigma,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            ps: DVector::zeros(n),
            pc: DVector::zeros(n),
            generation: 0,
            repairs: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Samples a generation of `lambda` candidates.
    pub fn ask(&mut self) -> Vec<Vec<f64>> {
        self.pending = (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.n, |_, _| StandardNormal.sample(&mut self.rng));
                &self.basis * z.component_mul(&self.scales)
            })
            .collect();
        self.pending.iter().map(|y| (&self.mean + self.sigma * y).as_slice().to_vec()).collect()
    }

    /// Updates the distribution from the fitness (lower is better) of the
    /// candidates returned by the last [`CmaEs::ask`].
    pub fn tell(&mut self, fitness: &[f64]) {
        assert_eq!(fitness.len(), self.pending.len(), "one fitness per candidate");
        let mut order: Vec<usize> = (0..fitness.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let ys = std::mem::take(&mut self.pending);
        let mut yw = DVector::zeros(self.n);
        for (w, &i) in self.weights.iter().zip(&order) {
            yw += *w * &ys[i];
        }
        self.mean += self.sigma * &yw;

        // C^{-1/2} y_w through the eigenbasis
        let inv_sqrt_yw = &self.basis * (self.basis.transpose() * &yw).component_div(&self.scales);
        self.ps = (1.0 - self.cs) * &self.ps + (self.cs * (2.0 - self.cs) * self.mueff).sqrt() * inv_sqrt_yw;
        let g = (self.generation + 1) as f64;
        let ps_norm = self.ps.norm();
        let hsig = ps_norm / (1.0 - (1.0 - self.cs).powf(2.0 * g)).sqrt() / self.chi_n < 1.4 + 2.0 / (self.n as f64 + 1.0);
        let hs = if hsig { 1.0 } else { 0.0 };
        self.pc = (1.0 - self.cc) * &self.pc + hs * (self.cc * (2.0 - self.cc) * self.mueff).sqrt() * &yw;

        let mut rank_mu = DMatrix::zeros(self.n, self.n);
        for (w, &i) in self.weights.iter().zip(&order) {
            rank_mu.ger(*w, &ys[i], &ys[i], 1.0);
        }
        let old = (1.0 - self.c1 - self.cmu) + self.c1 * (1.0 - hs) * self.cc * (2.0 - self.cc);
        self.cov = old * &self.cov + self.c1 * &self.pc * self.pc.transpose() + self.cmu * rank_mu;
        self.sigma *= ((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.decompose();
    }

    /// Eigendecomposition of the covariance; non-positive or non-finite
    /// eigenvalues are lifted back to a small positive floor.
    fn decompose(&mut self) {
        let sym = 0.5 * (&self.cov + self.cov.transpose());
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
        let floor = 1e-14 * top.max(f64::MIN_POSITIVE);
        let mut vals = eig.eigenvalues.clone();
        let mut repaired = false;
        for v in vals.iter_mut() {
            if !v.is_finite() || *v < floor {
                *v = floor;
                repaired = true;
            }
        }
        if repaired {
            self.repairs += 1;
            log::warn!("cma-es covariance lost positive definiteness; eigenvalues repaired");
            self.cov = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        } else {
            self.cov = 0.5 * (&self.cov + self.cov.transpose());
        }
        self.scales = vals.map(f64::sqrt);
        self.basis = eig.eigenvectors;
    }
}

/// Minimizes `f` from `x0` with at most `max_evals` evaluations; a final
/// partial generation is evaluated without an update. Candidates of a
/// generation are evaluated concurrently. Returns the best point, its
/// value and every evaluated value in order.
pub fn cmaes_minimize<F>(f: F, x0: Vec<f64>, sigma: f64, lambda: usize, max_evals: usize, seed: u64) -> (Vec<f64>, f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut es = CmaEs::new(x0.clone(), sigma, lambda, seed);
    let mut best = (x0, f64::INFINITY);
    let mut values = Vec::with_capacity(max_evals);
    while values.len() < max_evals {
        let mut cands = es.ask();
        let room = max_evals - values.len();
        let partial = room < cands.len();
        cands.truncate(room);
        let fit: Vec<f64> = cands.par_iter().map(|c| f(c)).collect();
        for (c, &v) in cands.iter().zip(&fit) {
            if v < best.1 {
                best = (c.clone(), v);
            }
        }
        values.extend_from_slice(&fit);
        if !partial {
            es.tell(&fit);
        }
    }
    (best.0, best.1, values)
}
