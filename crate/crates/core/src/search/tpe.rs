//! Tree-structured Parzen estimator for the two-dimensional box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SearchBox, SurfaceEvaluator};

use super::{random_point, Budgeted, OptimizerConfig};

pub const GAMMA_Q: f64 = 0.25;
pub const CANDIDATES: usize = 24;
/// Bandwidth floor as a fraction of the box side.
pub const BANDWIDTH_FLOOR: f64 = 1.0 / 50.0;
/// Bandwidth of a lone observation as a fraction of the box side.
pub const SINGLETON_BANDWIDTH: f64 = 1.0 / 10.0;
const MAX_REJECTIONS: usize = 100;

pub fn init_design_size(budget: usize) -> usize {
    (budget / 10).max(10)
}

/// Observations split into the top `ceil(gamma_q * n)` by accuracy and the rest. Ties
/// are ordered by observation index.
#[derive(Clone, Debug, PartialEq)]
pub struct TpeSplit {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    pub gamma_q: f64,
}

impl TpeSplit {
    pub fn new(values: &[f64], gamma_q: f64) -> Self {
        let n = values.len();
        let n_good = ((gamma_q * n as f64).ceil() as usize).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
        let bad = order.split_off(n_good);
        Self { good: order, bad, gamma_q }
    }
}

/// Equal-weight mixture of box-truncated axis-aligned Gaussians.
#[derive(Clone, Debug)]
pub struct ParzenModel {
    pub centers: Vec<[f64; 2]>,
    pub bandwidths: Vec<[f64; 2]>,
    /// Per component and dimension: `1 / (h sqrt(2 pi) * in-box mass)`.
    norms: Vec<[f64; 2]>,
    lo: [f64; 2],
    hi: [f64; 2],
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

impl ParzenModel {
    pub fn new(centers: Vec<[f64; 2]>, bx: &SearchBox<f64>) -> Self {
        let lo = [bx.c_min, bx.gamma_min];
        let hi = [bx.c_max, bx.gamma_max];
        let side = [hi[0] - lo[0], hi[1] - lo[1]];
        let bandwidths = (0..centers.len())
            .map(|i| {
                let mut bw = [0.0; 2];
                for d in 0..2 {
                    bw[d] = if centers.len() == 1 {
                        side[d] * SINGLETON_BANDWIDTH
                    } else {
                        let nn = (0..centers.len())
                            .filter(|&j| j != i)
                            .map(|j| (centers[j][d] - centers[i][d]).abs())
                            .fold(f64::INFINITY, f64::min);
                        nn.max(side[d] * BANDWIDTH_FLOOR)
                    };
                }
                bw
            })
            .collect::<Vec<[f64; 2]>>();
        let norms = centers
            .iter()
            .zip(&bandwidths)
            .map(|(c, h)| {
                let mut out = [0.0; 2];
                for d in 0..2 {
                    let mass = std_normal_cdf((hi[d] - c[d]) / h[d]) - std_normal_cdf((lo[d] - c[d]) / h[d]);
                    out[d] = 1.0 / (h[d] * (2.0 * std::f64::consts::PI).sqrt() * mass.max(1e-300));
                }
                out
            })
            .collect();
        Self { centers, bandwidths, norms, lo, hi }
    }

    pub fn density(&self, x: [f64; 2]) -> f64 {
        let total: f64 = self
            .centers
            .iter()
            .zip(&self.bandwidths)
            .zip(&self.norms)
            .map(|((c, h), w)| {
                let z0 = (x[0] - c[0]) / h[0];
                let z1 = (x[1] - c[1]) / h[1];
                (-0.5 * (z0 * z0 + z1 * z1)).exp() * w[0] * w[1]
            })
            .sum();
        total / self.centers.len() as f64
    }

    /// Draws from the mixture, rejecting out-of-box draws (clamping after many rejections).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let k = rng.random_range(0..self.centers.len());
        let (c, h) = (self.centers[k], self.bandwidths[k]);
        let mut out = [0.0; 2];
        for d in 0..2 {
            let mut v = f64::NAN;
            for _ in 0..MAX_REJECTIONS {
                let z: f64 = StandardNormal.sample(rng);
                v = c[d] + h[d] * z;
                if v >= self.lo[d] && v <= self.hi[d] {
                    break;
                }
            }
            out[d] = v.clamp(self.lo[d], self.hi[d]);
        }
        out
    }
}

pub fn tpe<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, cfg: &OptimizerConfig) -> Result<TieSet<T>> {
    let init = init_design_size(cfg.budget);
    if cfg.budget < init + 1 {
        return Err(Error::InvalidParameter(format!("tpe needs a budget of at least {}", init + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bx = ev.bounds();
    let bx64 = SearchBox::new(bx.c_min.as_f64(), bx.c_max.as_f64(), bx.gamma_min.as_f64(), bx.gamma_max.as_f64());
    let mut b = Budgeted::new(ev, cfg.budget);
    let mut xs: Vec<[f64; 2]> = Vec::with_capacity(cfg.budget);
    let mut ys: Vec<f64> = Vec::with_capacity(cfg.budget);
    for _ in 0..init {
        match b.eval(random_point(&mut rng, &bx))? {
            Some(e) => {
                xs.push([e.point.log2_c.as_f64(), e.point.log2_gamma.as_f64()]);
                ys.push(e.accuracy.as_f64());
            }
            None => return b.finish(),
        }
    }
    while b.left() > 0 {
        let split = TpeSplit::new(&ys, GAMMA_Q);
        let l = ParzenModel::new(split.good.iter().map(|&i| xs[i]).collect(), &bx64);
        let g = ParzenModel::new(split.bad.iter().map(|&i| xs[i]).collect(), &bx64);
        let mut pick = None;
        let mut top = f64::NEG_INFINITY;
        for _ in 0..CANDIDATES {
            let c = l.sample(&mut rng);
            let score = l.density(c).ln() - g.density(c).max(1e-300).ln();
            if score > top || pick.is_none() {
                top = score;
                pick = Some(c);
            }
        }
        let c = pick.expect("at least one candidate");
        match b.eval(HyperPoint::new(T::lit(c[0]), T::lit(c[1])))? {
            Some(e) => {
                xs.push([e.point.log2_c.as_f64(), e.point.log2_gamma.as_f64()]);
                ys.push(e.accuracy.as_f64());
            }
            None => break,
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConcaveSurrogate;

    #[test]
    fn split_sizes_use_ceiling() {
        let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s = TpeSplit::new(&v, 0.25);
        assert_eq!(s.good, vec![9, 8, 7]);
        assert_eq!(s.bad.len(), 7);
    }

    #[test]
    fn lone_good_observation_attracts_samples() {
        let bx = SearchBox::<f64>::standard();
        let center = [2.0, -9.0];
        let m = ParzenModel::new(vec![center], &bx);
        let h = m.bandwidths[0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // histogram of 1000 draws on cells of one bandwidth
        let mut counts = std::collections::HashMap::new();
        for _ in 0..1000 {
            let x = m.sample(&mut rng);
            let cell = (((x[0] - center[0]) / h[0]).floor() as i64, ((x[1] - center[1]) / h[1]).floor() as i64);
            *counts.entry(cell).or_insert(0) += 1;
        }
        let (mode, _) = counts.iter().max_by_key(|(k, &v)| (v, std::cmp::Reverse(**k))).unwrap();
        let mid = [(mode.0 as f64 + 0.5) * h[0], (mode.1 as f64 + 0.5) * h[1]];
        assert!(mid[0].abs() <= h[0] && mid[1].abs() <= h[1], "modal cell {mode:?}");
    }

    #[test]
    fn density_integrates_to_one() {
        let bx = SearchBox::<f64>::standard();
        let m = ParzenModel::new(vec![[-5.0, 3.0], [0.0, 0.0], [14.0, -14.0]], &bx);
        let (nc, ng) = (400, 360);
        let (dc, dg) = (20.0 / nc as f64, 18.0 / ng as f64);
        let mut total = 0.0;
        for i in 0..nc {
            for j in 0..ng {
                total += m.density([-5.0 + (i as f64 + 0.5) * dc, -15.0 + (j as f64 + 0.5) * dg]) * dc * dg;
            }
        }
        assert!((total - 1.0).abs() < 1e-2, "{total}");
    }

    #[test]
    fn budget_respected() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 100);
        tpe(&mut ev, &OptimizerConfig { budget: 100, seed: 3 }).unwrap();
        assert_eq!(ev.used(), 100);
    }
}
