//! Searchers whose probe points are fixed before any evaluation, and their two-level
//! hierarchical variants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{argmax_points, HyperPoint, SearchBox, SurfaceEvaluator};

use super::ud::uniform_design;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Grid,
    Ud,
    Rand,
    Normrand,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbePlan<T> {
    pub points: Vec<HyperPoint<T>>,
    pub generator: Generator,
    /// Only meaningful for the random generators.
    pub seed: u64,
}

impl<T: Scalar> ProbePlan<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn perfect_root(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

fn linspace<T: Scalar>(lo: T, hi: T, k: usize) -> Vec<T> {
    if k == 1 {
        return vec![(lo + hi) * T::lit(0.5)];
    }
    let step = (hi - lo) / T::from_usize(k - 1).unwrap();
    (0..k).map(|i| if i == k - 1 { hi } else { lo + step * T::from_usize(i).unwrap() }).collect()
}

/// Endpoint-inclusive `sqrt(N) x sqrt(N)` lattice over `region`, log2 C major.
pub fn grid_points_in<T: Scalar>(n: usize, region: &SearchBox<T>) -> Result<ProbePlan<T>> {
    let side = perfect_root(n)
        .filter(|&s| s >= 2)
        .ok_or_else(|| Error::InvalidParameter(format!("grid size {n} is not a perfect square >= 4")))?;
    let cs = linspace(region.c_min, region.c_max, side);
    let gs = linspace(region.gamma_min, region.gamma_max, side);
    let points = cs.iter().flat_map(|&c| gs.iter().map(move |&g| HyperPoint::new(c, g))).collect();
    Ok(ProbePlan { points, generator: Generator::Grid, seed: 0 })
}

pub fn grid_points<T: Scalar>(n: usize) -> Result<ProbePlan<T>> {
    grid_points_in(n, &SearchBox::standard())
}

/// Uniform design with `n` points scaled into `region`.
pub fn ud_points_in<T: Scalar>(n: usize, region: &SearchBox<T>) -> Result<ProbePlan<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("uniform design needs at least 2 points".into()));
    }
    let points = uniform_design(n).into_iter().map(|(u, v)| region.from_unit(T::lit(u), T::lit(v))).collect();
    Ok(ProbePlan { points, generator: Generator::Ud, seed: 0 })
}

pub fn ud_points<T: Scalar>(n: usize) -> Result<ProbePlan<T>> {
    ud_points_in(n, &SearchBox::standard())
}

/// `n` i.i.d. uniform points over the box.
pub fn rand_points<T: Scalar>(n: usize, seed: u64) -> ProbePlan<T> {
    let bx = SearchBox::<f64>::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| {
            let c = rng.random_range(bx.c_min..=bx.c_max);
            let g = rng.random_range(bx.gamma_min..=bx.gamma_max);
            HyperPoint::new(T::lit(c), T::lit(g))
        })
        .collect();
    ProbePlan { points, generator: Generator::Rand, seed }
}

/// Raw (unclipped) draws of log2 C ~ N(5, 5) and log2 gamma ~ N(-5, 5).
pub fn normrand_raw(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dc = Normal::new(5.0, 5.0).unwrap();
    let dg = Normal::new(-5.0, 5.0).unwrap();
    (0..n).map(|_| (dc.sample(&mut rng), dg.sample(&mut rng))).collect()
}

/// Gaussian draws clipped onto the box.
pub fn normrand_points<T: Scalar>(n: usize, seed: u64) -> ProbePlan<T> {
    let bx = SearchBox::<T>::standard();
    let points =
        normrand_raw(n, seed).into_iter().map(|(c, g)| bx.clamp(HyperPoint::new(T::lit(c), T::lit(g)))).collect();
    ProbePlan { points, generator: Generator::Normrand, seed }
}

pub fn make_plan<T: Scalar>(generator: Generator, n: usize, seed: u64) -> Result<ProbePlan<T>> {
    match generator {
        Generator::Grid => grid_points(n),
        Generator::Ud => ud_points(n),
        Generator::Rand => Ok(rand_points(n, seed)),
        Generator::Normrand => Ok(normrand_points(n, seed)),
    }
}

/// Evaluates every plan point in order and returns the argmax set.
pub fn run_flat<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, plan: &ProbePlan<T>) -> Result<TieSet<T>> {
    if ev.remaining() < plan.len() {
        return Err(Error::BudgetExhausted);
    }
    for p in &plan.points {
        ev.evaluate(*p)?;
    }
    TieSet::new(ev.best_so_far()?)
}

/// Nearest distinct coordinates below and above `x` among `coords`, or the outer bounds.
fn neighbours<T: Scalar>(coords: impl Iterator<Item = T>, x: T, lo: T, hi: T) -> (T, T) {
    let mut below = lo;
    let mut above = hi;
    for v in coords {
        if v < x && v > below {
            below = v;
        }
        if v > x && v < above {
            above = v;
        }
    }
    (below, above)
}

/// Sub-box bounded by the nearest level-1 neighbours of `x` in each dimension.
pub fn refinement_box<T: Scalar>(level1: &[HyperPoint<T>], x: HyperPoint<T>, outer: &SearchBox<T>) -> SearchBox<T> {
    let (c_lo, c_hi) = neighbours(level1.iter().map(|p| p.log2_c), x.log2_c, outer.c_min, outer.c_max);
    let (g_lo, g_hi) = neighbours(level1.iter().map(|p| p.log2_gamma), x.log2_gamma, outer.gamma_min, outer.gamma_max);
    SearchBox::new(c_lo, c_hi, g_lo, g_hi)
}

/// Two-level search: a full-box plan, then a fresh plan of the same generator spanning the
/// neighbourhood of the level-1 winner (first evaluated among ties).
pub fn run_hier<T: Scalar>(
    ev: &mut SurfaceEvaluator<'_, T>,
    generator: Generator,
    n_per_level: usize,
) -> Result<TieSet<T>> {
    if ev.remaining() < 2 * n_per_level {
        return Err(Error::BudgetExhausted);
    }
    let outer = SearchBox::standard();
    let level1 = match generator {
        Generator::Grid => grid_points_in(n_per_level, &outer)?,
        Generator::Ud => ud_points_in(n_per_level, &outer)?,
        _ => return Err(Error::InvalidParameter("hierarchical search supports grid and ud".into())),
    };
    let start = ev.eval_log().len();
    for p in &level1.points {
        ev.evaluate(*p)?;
    }
    let winner = ev.eval_log()[start..]
        .iter()
        .fold(None, |best: Option<crate::surface::Evaluation<T>>, e| match best {
            Some(b) if b.accuracy >= e.accuracy => Some(b),
            _ => Some(*e),
        })
        .expect("level-1 plan is non-empty");

    let sub = refinement_box(&level1.points, winner.point, &outer);
    let level2 = match generator {
        Generator::Grid => grid_points_in(n_per_level, &sub)?,
        _ => ud_points_in(n_per_level, &sub)?,
    };
    let mid = ev.eval_log().len();
    for p in &level2.points {
        ev.evaluate(*p)?;
    }
    let candidates: Vec<_> = std::iter::once(winner).chain(ev.eval_log()[mid..].iter().copied()).collect();
    let best = candidates.iter().map(|e| e.accuracy).fold(T::neg_infinity(), T::max);
    TieSet::new(argmax_points(candidates.iter().filter(|e| e.accuracy == best)))
}
