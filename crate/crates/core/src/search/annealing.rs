//! Simulated annealing with Metropolis acceptance and exponential cooling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SurfaceEvaluator};

use super::{random_point, Budgeted, OptimizerConfig};

pub const BOOTSTRAP_PROBES: usize = 5;
pub const COOLING_RATE: f64 = 0.95;
pub const STEP_FRACTION: f64 = 0.1;
const MIN_TEMPERATURE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealingParams {
    /// Initial temperature; `None` derives it from the bootstrap probes.
    pub t0: Option<f64>,
    pub cooling: f64,
    /// Proposal standard deviation as a fraction of each box side.
    pub step_fraction: f64,
}

impl Default for AnnealingParams {
    fn default() -> Self {
        Self { t0: None, cooling: COOLING_RATE, step_fraction: STEP_FRACTION }
    }
}

/// Metropolis rule for maximization: improvements always pass, a loss of `-delta` passes
/// with probability `exp(delta / temperature)`.
pub fn metropolis_accept(delta: f64, temperature: f64, u: f64) -> bool {
    if delta >= 0.0 {
        return true;
    }
    temperature > 0.0 && u < (delta / temperature).exp()
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Accepted moves as (previous value, new value), for inspecting the acceptance rule.
pub type AcceptedMoves = Vec<(f64, f64)>;

pub fn anneal<T: Scalar>(
    ev: &mut SurfaceEvaluator<'_, T>,
    cfg: &OptimizerConfig,
    params: &AnnealingParams,
) -> Result<(TieSet<T>, AcceptedMoves)> {
    if cfg.budget < 2 {
        return Err(Error::InvalidParameter("sa needs a budget of at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bx = ev.bounds();
    let mut b = Budgeted::new(ev, cfg.budget);
    let mut moves = Vec::new();

    let mut current: Option<(HyperPoint<T>, f64)> = None;
    let mut boot = Vec::with_capacity(BOOTSTRAP_PROBES);
    for _ in 0..BOOTSTRAP_PROBES.min(cfg.budget) {
        let Some(e) = b.eval(random_point(&mut rng, &bx))? else { break };
        let f = e.accuracy.as_f64();
        boot.push(f);
        if current.is_none_or(|(_, cf)| f > cf) {
            current = Some((e.point, f));
        }
    }
    let Some((mut x, mut fx)) = current else { return Ok((b.finish()?, moves)) };
    let mut temperature = params.t0.unwrap_or_else(|| {
        let sd = sample_sd(&boot);
        if sd > 0.0 {
            sd
        } else {
            MIN_TEMPERATURE
        }
    });
    let sc = bx.c_width().as_f64() * params.step_fraction;
    let sg = bx.gamma_width().as_f64() * params.step_fraction;

    while b.left() > 0 {
        let zc: f64 = StandardNormal.sample(&mut rng);
        let zg: f64 = StandardNormal.sample(&mut rng);
        let cand = bx.clamp(HyperPoint::new(x.log2_c + T::lit(sc * zc), x.log2_gamma + T::lit(sg * zg)));
        let Some(e) = b.eval(cand)? else { break };
        let f = e.accuracy.as_f64();
        let u: f64 = rng.random();
        if metropolis_accept(f - fx, temperature, u) {
            moves.push((fx, f));
            x = e.point;
            fx = f;
        }
        temperature *= params.cooling;
    }
    Ok((b.finish()?, moves))
}

/// Annealing with the default schedule; returns the best points seen, not the final state.
pub fn simulated_annealing<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, cfg: &OptimizerConfig) -> Result<TieSet<T>> {
    anneal(ev, cfg, &AnnealingParams::default()).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConcaveSurrogate;

    #[test]
    fn improving_moves_always_accepted() {
        for u in [0.0, 0.5, 0.999_999] {
            assert!(metropolis_accept(0.1, 1.0, u));
            assert!(metropolis_accept(0.0, 0.0, u));
        }
        assert!(!metropolis_accept(-0.1, 0.0, 0.0));
        assert!(metropolis_accept(-0.1, 1.0, 0.5));
    }

    #[test]
    fn cold_chain_never_accepts_a_loss() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 200);
        let params = AnnealingParams { t0: Some(1e-300), ..Default::default() };
        let (_, moves) = anneal(&mut ev, &OptimizerConfig { budget: 200, seed: 5 }, &params).unwrap();
        assert!(!moves.is_empty());
        assert!(moves.iter().all(|(a, b)| b >= a));
    }

    #[test]
    fn returns_best_seen_and_respects_budget() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 100);
        let ties = simulated_annealing(&mut ev, &OptimizerConfig { budget: 100, seed: 2 }).unwrap();
        assert_eq!(ev.used(), 100);
        assert_eq!(s.value(ties.points()[0]), ev.best_value().unwrap());
    }
}
