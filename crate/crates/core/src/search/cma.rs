//! (mu, lambda)-CMA-ES in two dimensions with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation. Internal state is kept in `f64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SearchBox, SurfaceEvaluator};

use super::{Budgeted, OptimizerConfig};

pub const LAMBDA: usize = 6;
pub const MU: usize = 3;
const DIM: f64 = 2.0;
const EIGEN_FLOOR: f64 = 1e-14;

type Vec2 = [f64; 2];
/// Symmetric 2x2 matrix stored as `[a11, a12, a22]`.
pub type Sym2 = [f64; 3];

/// Eigenvalues (descending) and the unit eigenvector of the larger one.
pub fn eigen_sym2(m: Sym2) -> ([f64; 2], Vec2) {
    let [a, b, c] = m;
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    let v = if b.abs() > 1e-300 {
        let (x, y) = (l1 - c, b);
        let n = (x * x + y * y).sqrt();
        [x / n, y / n]
    } else if a >= c {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    ([l1, l2], v)
}

pub fn is_spd(m: Sym2) -> bool {
    let ([_, l2], _) = eigen_sym2(m);
    m[0] > 0.0 && m[2] > 0.0 && l2 > 0.0 && m[0] * m[2] - m[1] * m[1] > 0.0
}

#[derive(Clone, Debug)]
pub struct CmaState {
    pub mean: Vec2,
    pub sigma: f64,
    pub cov: Sym2,
    p_sigma: Vec2,
    p_c: Vec2,
    weights: [f64; MU],
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    generation: usize,
    bounds: SearchBox<f64>,
    // eigen decomposition of `cov`: columns of B and the square roots of the eigenvalues
    basis: [Vec2; 2],
    scales: Vec2,
}

/// One sampled candidate: `x` is in the box, `y = (x - mean) / sigma` after repair.
#[derive(Clone, Copy, Debug)]
pub struct Candidate {
    pub x: Vec2,
    y: Vec2,
}

impl CmaState {
    pub fn new(mean: Vec2, sigma: f64, bounds: SearchBox<f64>) -> Self {
        let raw: Vec<f64> = (1..=MU).map(|i| ((LAMBDA as f64 + 1.0) / 2.0).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let mut weights = [0.0; MU];
        for (w, r) in weights.iter_mut().zip(&raw) {
            *w = r / total;
        }
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (DIM + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (DIM + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / DIM) / (DIM + 4.0 + 2.0 * mu_eff / DIM);
        let c_1 = 2.0 / ((DIM + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((DIM + 2.0).powi(2) + mu_eff));
        let chi_n = DIM.sqrt() * (1.0 - 1.0 / (4.0 * DIM) + 1.0 / (21.0 * DIM * DIM));
        Self {
            mean,
            sigma,
            cov: [1.0, 0.0, 1.0],
            p_sigma: [0.0; 2],
            p_c: [0.0; 2],
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            generation: 0,
            bounds,
            basis: [[1.0, 0.0], [0.0, 1.0]],
            scales: [1.0, 1.0],
        }
    }

    fn clip(&self, x: Vec2) -> Vec2 {
        let b = &self.bounds;
        [x[0].clamp(b.c_min, b.c_max), x[1].clamp(b.gamma_min, b.gamma_max)]
    }

    /// Samples `LAMBDA` candidates, clipped onto the box.
    pub fn ask<R: rand::Rng>(&self, rng: &mut R) -> Vec<Candidate> {
        (0..LAMBDA)
            .map(|_| {
                let z: Vec2 = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
                let [b1, b2] = self.basis;
                let y = [
                    b1[0] * self.scales[0] * z[0] + b2[0] * self.scales[1] * z[1],
                    b1[1] * self.scales[0] * z[0] + b2[1] * self.scales[1] * z[1],
                ];
                let x = self.clip([self.mean[0] + self.sigma * y[0], self.mean[1] + self.sigma * y[1]]);
                let y = [(x[0] - self.mean[0]) / self.sigma, (x[1] - self.mean[1]) / self.sigma];
                Candidate { x, y }
            })
            .collect()
    }

    /// `C^{-1/2} y`
    fn whiten(&self, y: Vec2) -> Vec2 {
        let [b1, b2] = self.basis;
        let (p1, p2) = (b1[0] * y[0] + b1[1] * y[1], b2[0] * y[0] + b2[1] * y[1]);
        let (q1, q2) = (p1 / self.scales[0], p2 / self.scales[1]);
        [b1[0] * q1 + b2[0] * q2, b1[1] * q1 + b2[1] * q2]
    }

    /// Updates mean, paths, covariance and step size from one evaluated generation.
    pub fn tell(&mut self, candidates: &[Candidate], values: &[f64]) {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        // stable sort keeps candidate order among ties
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        let mut y_w = [0.0; 2];
        for (w, &i) in self.weights.iter().zip(&order) {
            y_w[0] += w * candidates[i].y[0];
            y_w[1] += w * candidates[i].y[1];
        }
        self.mean = self.clip([self.mean[0] + self.sigma * y_w[0], self.mean[1] + self.sigma * y_w[1]]);

        let cs = self.c_sigma;
        let white = self.whiten(y_w);
        let k_s = (cs * (2.0 - cs) * self.mu_eff).sqrt();
        self.p_sigma = [(1.0 - cs) * self.p_sigma[0] + k_s * white[0], (1.0 - cs) * self.p_sigma[1] + k_s * white[1]];
        let ps_norm = (self.p_sigma[0].powi(2) + self.p_sigma[1].powi(2)).sqrt();
        self.generation += 1;
        let denom = (1.0 - (1.0 - cs).powi(2 * self.generation as i32)).sqrt();
        let h_sigma = if ps_norm / denom < (1.4 + 2.0 / (DIM + 1.0)) * self.chi_n { 1.0 } else { 0.0 };

        let cc = self.c_c;
        let k_c = h_sigma * (cc * (2.0 - cc) * self.mu_eff).sqrt();
        self.p_c = [(1.0 - cc) * self.p_c[0] + k_c * y_w[0], (1.0 - cc) * self.p_c[1] + k_c * y_w[1]];

        let mut rank_mu = [0.0; 3];
        for (w, &i) in self.weights.iter().zip(&order) {
            let y = candidates[i].y;
            rank_mu[0] += w * y[0] * y[0];
            rank_mu[1] += w * y[0] * y[1];
            rank_mu[2] += w * y[1] * y[1];
        }
        let pc = self.p_c;
        let rank_one = [pc[0] * pc[0], pc[0] * pc[1], pc[1] * pc[1]];
        let keep = 1.0 - self.c_1 - self.c_mu;
        let correction = (1.0 - h_sigma) * cc * (2.0 - cc);
        for k in 0..3 {
            self.cov[k] =
                keep * self.cov[k] + self.c_1 * (rank_one[k] + correction * self.cov[k]) + self.c_mu * rank_mu[k];
        }
        self.sigma *= ((cs / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.sigma = self.sigma.clamp(1e-12, self.bounds.diagonal());
        self.refresh_eigen();
    }

    /// Re-decomposes the covariance, lifting the spectrum if it degenerates.
    fn refresh_eigen(&mut self) {
        let ([mut l1, mut l2], v) = eigen_sym2(self.cov);
        let floor = EIGEN_FLOOR * l1.abs().max(1e-300);
        if !(l2 > floor) || !l1.is_finite() {
            if !l1.is_finite() || l1 <= 0.0 {
                self.cov = [1.0, 0.0, 1.0];
                l1 = 1.0;
                l2 = 1.0;
            } else {
                let lift = floor - l2.min(0.0) + floor;
                self.cov[0] += lift;
                self.cov[2] += lift;
                l1 += lift;
                l2 += lift;
            }
        }
        self.basis = [v, [-v[1], v[0]]];
        self.scales = [l1.sqrt(), l2.sqrt()];
    }

    pub fn generation(&self) -> usize {
        self.generation
    }
}

pub fn cma_es<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, cfg: &OptimizerConfig) -> Result<TieSet<T>> {
    if cfg.budget < LAMBDA {
        return Err(Error::InvalidParameter(format!("cma needs a budget of at least {LAMBDA}")));
    }
    let generations = cfg.budget / LAMBDA;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bx = ev.bounds();
    let bx64 = SearchBox::new(bx.c_min.as_f64(), bx.c_max.as_f64(), bx.gamma_min.as_f64(), bx.gamma_max.as_f64());
    let center = bx64.center();
    let mut state = CmaState::new([center.log2_c, center.log2_gamma], bx64.diagonal() / 4.0, bx64);
    let mut b = Budgeted::new(ev, generations * LAMBDA);
    for _ in 0..generations {
        let cands = state.ask(&mut rng);
        let mut values = Vec::with_capacity(LAMBDA);
        for c in &cands {
            match b.eval(HyperPoint::new(T::lit(c.x[0]), T::lit(c.x[1])))? {
                Some(e) => values.push(e.accuracy.as_f64()),
                None => return b.finish(),
            }
        }
        state.tell(&cands, &values);
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConcaveSurrogate;

    #[test]
    fn eigen_decomposition_reconstructs() {
        let m = [3.0, 1.2, 0.5];
        let ([l1, l2], v) = eigen_sym2(m);
        let w = [-v[1], v[0]];
        let rec = [
            l1 * v[0] * v[0] + l2 * w[0] * w[0],
            l1 * v[0] * v[1] + l2 * w[0] * w[1],
            l1 * v[1] * v[1] + l2 * w[1] * w[1],
        ];
        for k in 0..3 {
            assert!((rec[k] - m[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_stays_spd_every_generation() {
        let s = ConcaveSurrogate::default();
        for seed in 0..10 {
            let bx = SearchBox::<f64>::standard();
            let mut state = CmaState::new([5.0, -6.0], bx.diagonal() / 4.0, bx);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let cands = state.ask(&mut rng);
                let vals: Vec<f64> = cands.iter().map(|c| s.value(HyperPoint::new(c.x[0], c.x[1]))).collect();
                state.tell(&cands, &vals);
                assert!(is_spd(state.cov), "generation {} cov {:?}", state.generation(), state.cov);
                assert!(state.sigma > 0.0 && state.sigma.is_finite());
            }
        }
    }

    #[test]
    fn whole_generations_only() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 100);
        cma_es(&mut ev, &OptimizerConfig { budget: 100, seed: 1 }).unwrap();
        assert_eq!(ev.used(), 96);
    }
}
