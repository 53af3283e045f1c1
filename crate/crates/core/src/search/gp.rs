//! Gaussian-process Bayesian optimization with expected improvement.
//!
//! The surrogate works in unit-square coordinates on standardized accuracies, in `f64`.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SurfaceEvaluator};

use super::gridlike::ud_points_in;
use super::{Budgeted, OptimizerConfig};

pub const EI_XI: f64 = 0.01;
pub const LATTICE_SIDE: usize = 100;
pub const POLISH_STEPS: usize = 10;
/// Conditioning set size: the best half and the most recent half of this many points.
pub const MAX_CONDITIONING: usize = 40;
/// Hyperparameters are re-fitted by likelihood maximization every this many iterations.
pub const REFIT_EVERY: usize = 5;
const INITIAL_JITTER: f64 = 1e-10;
const MAX_JITTER: f64 = 1e-2;

/// ln bounds for (length scale, length scale, signal variance, noise variance).
const THETA_LO: [f64; 4] = [-3.912, -3.912, -4.605, -23.03]; // 0.02, 0.02, 0.01, 1e-10
const THETA_HI: [f64; 4] = [1.099, 1.099, 4.605, 0.0]; // 3, 3, 100, 1

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpParams {
    pub length_scales: [f64; 2],
    pub signal_var: f64,
    pub noise_var: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self { length_scales: [0.25, 0.25], signal_var: 1.0, noise_var: 1e-6 }
    }
}

impl GpParams {
    fn to_theta(self) -> [f64; 4] {
        [self.length_scales[0].ln(), self.length_scales[1].ln(), self.signal_var.ln(), self.noise_var.ln()]
    }

    fn from_theta(t: [f64; 4]) -> Self {
        let c = |k: usize| t[k].clamp(THETA_LO[k], THETA_HI[k]).exp();
        Self { length_scales: [c(0), c(1)], signal_var: c(2), noise_var: c(3) }
    }

    fn kernel(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let d0 = (a[0] - b[0]) / self.length_scales[0];
        let d1 = (a[1] - b[1]) / self.length_scales[1];
        self.signal_var * (-0.5 * (d0 * d0 + d1 * d1)).exp()
    }
}

/// Lower Cholesky factor of a row-major `n x n` matrix, or `None` if not positive definite.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * x[k]).sum();
        x[i] = (x[i] - s) / l[i * n + i];
    }
    x
}

fn backward(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (x[i] - s) / l[i * n + i];
    }
    x
}

/// Zero-mean GP on standardized targets (so a constant mean on the raw scale).
#[derive(Clone, Debug)]
pub struct GpSurrogate {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<f64>,
    pub params: GpParams,
    pub jitter: f64,
    y_mean: f64,
    y_scale: f64,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    kinv: Vec<f64>,
}

impl GpSurrogate {
    /// Conditions on `(x, y)`. A failed factorization raises the jitter tenfold up to a cap.
    pub fn fit(x: Vec<[f64; 2]>, y: Vec<f64>, params: GpParams) -> Result<Self> {
        let mut gp = Self::factorize(x, y, params)?;
        let n = gp.len();
        let mut e = vec![0.0; n];
        gp.kinv = vec![0.0; n * n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = backward(&gp.chol, n, &forward(&gp.chol, n, &e));
            for i in 0..n {
                gp.kinv[i * n + j] = col[i];
            }
        }
        Ok(gp)
    }

    /// Cholesky factor and weights only; enough for the likelihood and the lattice scan.
    fn factorize(x: Vec<[f64; 2]>, y: Vec<f64>, params: GpParams) -> Result<Self> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(Error::InvalidParameter("GP needs matching, non-empty observations".into()));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = params.kernel(x[i], x[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let mut jitter = INITIAL_JITTER;
        let chol = loop {
            let mut a = k.clone();
            for i in 0..n {
                a[i * n + i] += params.noise_var + jitter;
            }
            if let Some(l) = cholesky(&a, n) {
                break l;
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER {
                return Err(Error::IllConditioned);
            }
        };
        let alpha = backward(&chol, n, &forward(&chol, n, &ys));
        Ok(Self { x, y, params, jitter, y_mean, y_scale, chol, alpha, kinv: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        let ys: Vec<f64> = self.y.iter().map(|v| (v - self.y_mean) / self.y_scale).collect();
        let fit: f64 = ys.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let logdet: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    /// Posterior mean and standard deviation on the standardized scale, from a precomputed
    /// kernel vector.
    fn predict_from_k(&self, k: &[f64]) -> (f64, f64) {
        let n = self.len();
        let mu: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let quad: f64 = if self.kinv.is_empty() {
            forward(&self.chol, n, k).iter().map(|v| v * v).sum()
        } else {
            let mut q = 0.0;
            for i in 0..n {
                let row = &self.kinv[i * n..i * n + i];
                let off: f64 = row.iter().zip(&k[..i]).map(|(a, b)| a * b).sum();
                q += k[i] * (self.kinv[i * n + i] * k[i] + 2.0 * off);
            }
            q
        };
        let var = (self.params.signal_var - quad).max(0.0);
        (mu, var.sqrt())
    }

    pub fn predict_standardized(&self, u: [f64; 2]) -> (f64, f64) {
        let k: Vec<f64> = self.x.iter().map(|&xi| self.params.kernel(u, xi)).collect();
        self.predict_from_k(&k)
    }

    /// Posterior mean and standard deviation on the accuracy scale.
    pub fn predict(&self, u: [f64; 2]) -> (f64, f64) {
        let (m, s) = self.predict_standardized(u);
        (self.y_mean + self.y_scale * m, self.y_scale * s)
    }

    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.y_mean) / self.y_scale
    }

    /// Maximizes the marginal likelihood over the hyperparameters with Nelder-Mead on their
    /// logarithms, started from each of `starts`.
    pub fn fit_hyper(x: Vec<[f64; 2]>, y: Vec<f64>, starts: &[GpParams]) -> Result<Self> {
        let objective = |t: &[f64; 4]| match Self::factorize(x.clone(), y.clone(), GpParams::from_theta(*t)) {
            Ok(g) => -g.log_marginal_likelihood(),
            Err(_) => f64::INFINITY,
        };
        let mut best: Option<([f64; 4], f64)> = None;
        for s in starts {
            let (t, f) = minimize4(&objective, s.to_theta(), 0.5, 80);
            if best.is_none_or(|(_, bf)| f < bf) {
                best = Some((t, f));
            }
        }
        let (t, f) = best.ok_or_else(|| Error::InvalidParameter("no hyperparameter start".into()))?;
        if f.is_finite() {
            Self::factorize(x, y, GpParams::from_theta(t))
        } else {
            Self::factorize(x, y, starts[0]).map_err(|_| Error::IllConditioned)
        }
    }
}

/// Derivative-free minimization of a 4-parameter objective (Nelder-Mead, box clamped).
fn minimize4(f: &impl Fn(&[f64; 4]) -> f64, x0: [f64; 4], step: f64, max_evals: usize) -> ([f64; 4], f64) {
    let clamp = |mut x: [f64; 4]| {
        for k in 0..4 {
            x[k] = x[k].clamp(THETA_LO[k], THETA_HI[k]);
        }
        x
    };
    let x0 = clamp(x0);
    let mut simplex: Vec<([f64; 4], f64)> = vec![(x0, f(&x0))];
    for k in 0..4 {
        let mut x = x0;
        x[k] += if x[k] + step <= THETA_HI[k] { step } else { -step };
        let x = clamp(x);
        simplex.push((x, f(&x)));
    }
    let mut evals = 5;
    let combine = |a: &[f64; 4], b: &[f64; 4], t: f64| {
        let mut r = [0.0; 4];
        for k in 0..4 {
            r[k] = a[k] + t * (b[k] - a[k]);
        }
        clamp(r)
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if (simplex[4].1 - simplex[0].1).abs() < 1e-9 {
            break;
        }
        let mut centroid = [0.0; 4];
        for v in &simplex[..4] {
            for k in 0..4 {
                centroid[k] += v.0[k] / 4.0;
            }
        }
        let worst = simplex[4];
        let r = combine(&centroid, &worst.0, -1.0);
        let fr = f(&r);
        evals += 1;
        if fr < simplex[0].1 {
            let e = combine(&centroid, &worst.0, -2.0);
            let fe = f(&e);
            evals += 1;
            simplex[4] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[3].1 {
            simplex[4] = (r, fr);
        } else {
            let c = combine(&centroid, &worst.0, 0.5);
            let fc = f(&c);
            evals += 1;
            if fc < worst.1 {
                simplex[4] = (c, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &v.0, 0.5);
                    *v = (x, f(&x));
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex[0]
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement over `best` for a maximization problem.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64, xi: f64) -> f64 {
    let gain = mu - best - xi;
    if !(sigma > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// Picks the conditioning set: the best `MAX_CONDITIONING / 2` points plus the most recent
/// ones, distinct, in log order.
fn conditioning_indices(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    if n <= MAX_CONDITIONING {
        return (0..n).collect();
    }
    let half = MAX_CONDITIONING / 2;
    let mut by_value: Vec<usize> = (0..n).collect();
    by_value.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let mut keep = vec![false; n];
    by_value.iter().take(half).for_each(|&i| keep[i] = true);
    let mut recent = 0;
    for i in (0..n).rev() {
        if recent == MAX_CONDITIONING - half {
            break;
        }
        if !keep[i] {
            keep[i] = true;
            recent += 1;
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

/// Maximizes EI over a lattice of cell centres, then polishes with a shrinking pattern search.
///
/// Each lattice column is processed as one block: the separable kernel gives the `n x m`
/// cross-covariance directly and a single forward substitution yields all variances.
fn maximize_ei(gp: &GpSurrogate, best: f64) -> [f64; 2] {
    let m = LATTICE_SIDE;
    let ticks: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let p = gp.params;
    let fac = |dim: usize| -> Vec<Vec<f64>> {
        gp.x.iter()
            .map(|xi| ticks.iter().map(|t| (-0.5 * ((t - xi[dim]) / p.length_scales[dim]).powi(2)).exp()).collect())
            .collect()
    };
    let (f0, f1) = (fac(0), fac(1));
    let n = gp.len();
    let l = &gp.chol;
    let mut v = vec![0.0; n * m];
    let mut mu = vec![0.0; m];
    let mut arg = [ticks[0], ticks[0]];
    let mut top = f64::NEG_INFINITY;
    for a in 0..m {
        mu.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let scale = p.signal_var * f0[i][a];
            let (done, rest) = v.split_at_mut(i * m);
            let row = &mut rest[..m];
            for (r, f) in row.iter_mut().zip(&f1[i]) {
                *r = scale * f;
            }
            for (mb, r) in mu.iter_mut().zip(row.iter()) {
                *mb += gp.alpha[i] * r;
            }
            for k in 0..i {
                let lik = l[i * n + k];
                for (r, prev) in row.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                    *r -= lik * prev;
                }
            }
            let inv = 1.0 / l[i * n + i];
            row.iter_mut().for_each(|r| *r *= inv);
        }
        for b in 0..m {
            let quad: f64 = (0..n).map(|i| v[i * m + b] * v[i * m + b]).sum();
            let sd = (p.signal_var - quad).max(0.0).sqrt();
            let ei = expected_improvement(mu[b], sd, best, EI_XI);
            if ei > top {
                top = ei;
                arg = [ticks[a], ticks[b]];
            }
        }
    }
    let ei_at = |u: [f64; 2]| {
        let (mu, sd) = gp.predict_standardized(u);
        expected_improvement(mu, sd, best, EI_XI)
    };
    let mut h = 1.0 / m as f64;
    for _ in 0..POLISH_STEPS {
        let mut moved = false;
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let c = [(arg[0] + dx).clamp(0.0, 1.0), (arg[1] + dy).clamp(0.0, 1.0)];
            let v = ei_at(c);
            if v > top {
                top = v;
                arg = c;
                moved = true;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    arg
}

pub fn init_design_size(budget: usize) -> usize {
    (budget / 10).max(5)
}

pub fn gp_bayes_opt<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, cfg: &OptimizerConfig) -> Result<TieSet<T>> {
    let init = init_design_size(cfg.budget);
    if cfg.budget < init + 1 {
        return Err(Error::InvalidParameter(format!("bogp needs a budget of at least {}", init + 1)));
    }
    let bx = ev.bounds();
    let mut b = Budgeted::new(ev, cfg.budget);
    let mut xs: Vec<[f64; 2]> = Vec::with_capacity(cfg.budget);
    let mut ys: Vec<f64> = Vec::with_capacity(cfg.budget);
    let mut keys = std::collections::HashSet::new();
    let mut record = |e: crate::surface::Evaluation<T>, xs: &mut Vec<[f64; 2]>, ys: &mut Vec<f64>| {
        if keys.insert(e.point.key()) {
            let (u, v) = bx.to_unit(&e.point);
            xs.push([u.as_f64(), v.as_f64()]);
            ys.push(e.accuracy.as_f64());
        }
    };
    for p in ud_points_in(init, &bx)?.points {
        match b.eval(p)? {
            Some(e) => record(e, &mut xs, &mut ys),
            None => return b.finish(),
        }
    }
    let mut params = GpParams::default();
    let mut iteration = 0;
    while b.left() > 0 {
        let idx = conditioning_indices(&ys);
        let cx: Vec<[f64; 2]> = idx.iter().map(|&i| xs[i]).collect();
        let cy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
        let gp = if iteration % REFIT_EVERY == 0 {
            let starts = [params, GpParams::default(), GpParams { length_scales: [0.1, 0.1], ..GpParams::default() }];
            GpSurrogate::fit_hyper(cx, cy, &starts)?
        } else {
            GpSurrogate::factorize(cx, cy, params)?
        };
        params = gp.params;
        let best = gp.standardize(ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let u = maximize_ei(&gp, best);
        let p: HyperPoint<T> = bx.from_unit(T::lit(u[0]), T::lit(u[1]));
        match b.eval(p)? {
            Some(e) => record(e, &mut xs, &mut ys),
            None => break,
        }
        iteration += 1;
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConcaveSurrogate;

    #[test]
    fn ei_zero_without_uncertainty_at_or_below_best() {
        assert_eq!(expected_improvement(0.3, 0.0, 0.5, EI_XI), 0.0);
        assert_eq!(expected_improvement(0.5, 0.0, 0.5, EI_XI), 0.0);
        assert!((expected_improvement(0.7, 0.0, 0.5, EI_XI) - 0.19).abs() < 1e-12);
    }

    #[test]
    fn ei_nonnegative() {
        for mu in [-5.0, -1.0, 0.0, 0.4, 2.0] {
            for sd in [0.0, 1e-9, 0.1, 1.0, 10.0] {
                assert!(expected_improvement(mu, sd, 0.5, EI_XI) >= 0.0);
            }
        }
    }

    #[test]
    fn noiseless_fit_interpolates() {
        let x = vec![[0.1, 0.2], [0.5, 0.5], [0.9, 0.1], [0.3, 0.8], [0.7, 0.7]];
        let y = vec![0.6, 0.9, 0.55, 0.7, 0.8];
        let gp = GpSurrogate::fit(x.clone(), y.clone(), GpParams { noise_var: 0.0, ..GpParams::default() }).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (m, s) = gp.predict(*xi);
            assert!((m - yi).abs() < 1e-6, "{m} vs {yi}");
            assert!(s < 1e-3);
        }
    }

    #[test]
    fn duplicate_points_still_factorize() {
        let x = vec![[0.5, 0.5], [0.5, 0.5], [0.2, 0.9]];
        let gp = GpSurrogate::fit(x, vec![0.5, 0.5, 0.7], GpParams { noise_var: 0.0, ..GpParams::default() }).unwrap();
        assert!((gp.predict([0.5, 0.5]).0 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn hopeless_covariance_is_reported() {
        let x = vec![[0.1, 0.1], [0.9, 0.9]];
        let bad = GpParams { signal_var: -1.0, noise_var: 0.0, ..GpParams::default() };
        assert_eq!(GpSurrogate::fit(x, vec![0.1, 0.2], bad).unwrap_err(), Error::IllConditioned);
    }

    #[test]
    fn conditioning_set_keeps_best_and_recent() {
        let values: Vec<f64> = (0..100).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
        let idx = conditioning_indices(&values);
        assert_eq!(idx.len(), MAX_CONDITIONING);
        assert!(idx[..20].iter().copied().eq(0..20));
        assert!(idx[20..].iter().copied().eq(80..100));
    }

    #[test]
    fn finds_surrogate_peak() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 60);
        let ties = gp_bayes_opt(&mut ev, &OptimizerConfig { budget: 60, seed: 0 }).unwrap();
        assert_eq!(ev.used(), 60);
        assert!(ties.points()[0].distance(&ConcaveSurrogate::optimum()) < 0.5);
    }
}
