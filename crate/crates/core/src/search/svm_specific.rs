//! Searchers that fix gamma from the training rows (or a line through the box) and then
//! grid-search C.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SearchBox, SurfaceEvaluator};
use crate::svm::squared_distance;

use super::Budgeted;

/// Stage-2 asymp points are rounded to multiples of this, so that `log2 C + log2 gamma`
/// reproduces `log2 C_hat` without rounding error.
pub const DYADIC_RESOLUTION: f64 = 1.0 / 65536.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMethod {
    Sigest,
    Skl,
    Dbtc,
    Sdbtc,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GammaDiagnostics<T> {
    None,
    /// Median squared distance of the sampled rows.
    MedianSquaredDistance(T),
    /// (log2 gamma, squared class-centre distance) over the grid.
    CenterDistanceCurve(Vec<(T, T)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaEstimate<T> {
    pub gamma: T,
    pub method: GammaMethod,
    pub diagnostics: GammaDiagnostics<T>,
}

/// Rows used by the median heuristic: half of them, at least two, sorted.
pub fn sigest_sample_indices(n: usize, seed: u64) -> Vec<usize> {
    let m = n.div_ceil(2).max(2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}

fn median<T: Scalar>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) * T::lit(0.5)
    }
}

/// gamma = 1 / median squared distance among a seeded half of the rows.
pub fn sigest_gamma<T: Scalar>(rows: &Dataset<T>, seed: u64) -> Result<GammaEstimate<T>> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter("sigest needs at least 2 rows".into()));
    }
    let idx = sigest_sample_indices(rows.len(), seed);
    let mut d2 = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d2.push(squared_distance(rows.row(i), rows.row(j)));
        }
    }
    let med = median(d2);
    if !(med > T::zero()) {
        return Err(Error::DegenerateGeometry);
    }
    Ok(GammaEstimate {
        gamma: T::one() / med,
        method: GammaMethod::Sigest,
        diagnostics: GammaDiagnostics::MedianSquaredDistance(med),
    })
}

/// gamma = 1 / d.
pub fn skl_gamma<T: Scalar>(d: usize) -> Result<GammaEstimate<T>> {
    if d == 0 {
        return Err(Error::InvalidParameter("skl needs at least one feature".into()));
    }
    let gamma = T::one() / T::from_usize(d).unwrap();
    Ok(GammaEstimate { gamma, method: GammaMethod::Skl, diagnostics: GammaDiagnostics::None })
}

/// Squared distance between the two class means in the RBF feature space, for each gamma.
pub fn center_distance_curve<T: Scalar>(rows: &Dataset<T>, indices: &[usize], gammas: &[T]) -> Result<Vec<T>> {
    let pos: Vec<usize> = indices.iter().copied().filter(|&i| rows.label(i) == 1).collect();
    let neg: Vec<usize> = indices.iter().copied().filter(|&i| rows.label(i) == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    // squared distances grouped by class pair; within-class pairs counted once, doubled later
    let within = |set: &[usize]| -> Vec<T> {
        let mut v = Vec::with_capacity(set.len() * set.len() / 2);
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                v.push(squared_distance(rows.row(i), rows.row(j)));
            }
        }
        v
    };
    let (pp, nn) = (within(&pos), within(&neg));
    let mut pn = Vec::with_capacity(pos.len() * neg.len());
    for &i in &pos {
        for &j in &neg {
            pn.push(squared_distance(rows.row(i), rows.row(j)));
        }
    }
    let (np, nm) = (T::from_usize(pos.len()).unwrap(), T::from_usize(neg.len()).unwrap());
    let two = T::lit(2.0);
    Ok(gammas
        .iter()
        .map(|&g| {
            let sum = |v: &[T]| v.iter().map(|&d| (-g * d).exp()).sum::<T>();
            // diagonal terms contribute K(x, x) = 1 each
            let s_pp = np + two * sum(&pp);
            let s_nn = nm + two * sum(&nn);
            let s_pn = sum(&pn);
            s_pp / (np * np) + s_nn / (nm * nm) - two * s_pn / (np * nm)
        })
        .collect())
}

fn linspace<T: Scalar>(lo: T, hi: T, k: usize) -> Vec<T> {
    if k == 1 {
        return vec![(lo + hi) * T::lit(0.5)];
    }
    let step = (hi - lo) / T::from_usize(k - 1).unwrap();
    (0..k).map(|i| if i == k - 1 { hi } else { lo + step * T::from_usize(i).unwrap() }).collect()
}

fn per_class_sample<T: Scalar>(rows: &Dataset<T>, fraction: T, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::new();
    for class in [0u8, 1] {
        let members: Vec<usize> = (0..rows.len()).filter(|&i| rows.label(i) == class).collect();
        let take = (fraction * T::from_usize(members.len()).unwrap()).ceil().to_usize().unwrap_or(0).min(members.len());
        out.extend(sample(rng, members.len(), take).into_iter().map(|k| members[k]));
    }
    out.sort_unstable();
    out
}

/// gamma maximizing the class-centre distance over a `grid_size`-point log2 grid spanning the
/// box; `sample_fraction < 1` works on a seeded per-class sample. Ties go to the smaller gamma.
pub fn dbtc_gamma<T: Scalar>(
    rows: &Dataset<T>,
    grid_size: usize,
    sample_fraction: T,
    seed: u64,
) -> Result<GammaEstimate<T>> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter("dbtc grid needs at least 2 points".into()));
    }
    if !(sample_fraction > T::zero() && sample_fraction <= T::one()) {
        return Err(Error::InvalidParameter("sample fraction must lie in (0, 1]".into()));
    }
    let [n0, n1] = rows.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    let full = sample_fraction == T::one();
    let indices = if full {
        (0..rows.len()).collect()
    } else {
        // a ceiling per class keeps every present class non-empty
        per_class_sample(rows, sample_fraction, &mut ChaCha8Rng::seed_from_u64(seed))
    };
    let bx = SearchBox::<T>::standard();
    let log2_gammas = linspace(bx.gamma_min, bx.gamma_max, grid_size);
    let gammas: Vec<T> = log2_gammas.iter().map(|g| g.exp2()).collect();
    let curve = center_distance_curve(rows, &indices, &gammas)?;
    let mut best = 0;
    for k in 1..curve.len() {
        if curve[k] > curve[best] {
            best = k;
        }
    }
    Ok(GammaEstimate {
        gamma: gammas[best],
        method: if full { GammaMethod::Dbtc } else { GammaMethod::Sdbtc },
        diagnostics: GammaDiagnostics::CenterDistanceCurve(log2_gammas.into_iter().zip(curve).collect()),
    })
}

/// log2 of `gamma`, clipped to the box's gamma range.
pub fn clip_log2_gamma<T: Scalar>(gamma: T, bx: &SearchBox<T>) -> T {
    gamma.log2().max(bx.gamma_min).min(bx.gamma_max)
}

/// log2 C values probed at a fixed gamma: endpoint-inclusive over the box, or C = 1 alone.
pub fn c_grid<T: Scalar>(n_c: usize, bx: &SearchBox<T>) -> Vec<T> {
    if n_c == 1 {
        vec![T::zero()]
    } else {
        linspace(bx.c_min, bx.c_max, n_c)
    }
}

pub fn fixed_gamma_c_search<T: Scalar>(
    ev: &mut SurfaceEvaluator<'_, T>,
    log2_gamma: T,
    n_c: usize,
) -> Result<TieSet<T>> {
    if n_c == 0 || ev.remaining() < n_c {
        return Err(Error::BudgetExhausted);
    }
    let bx = ev.bounds();
    let mut b = Budgeted::new(ev, n_c);
    for c in c_grid(n_c, &bx) {
        b.eval(HyperPoint::new(c, log2_gamma))?.ok_or(Error::BudgetExhausted)?;
    }
    b.finish()
}

fn dyadic<T: Scalar>(x: T) -> T {
    let s = T::lit(1.0 / DYADIC_RESOLUTION);
    (x * s).round() / s
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsympOutcome<T> {
    pub tie_set: TieSet<T>,
    pub log2_c_hat: T,
    pub stage2: Vec<HyperPoint<T>>,
}

/// Feasible log2 C interval of the line `log2 gamma = log2 C_hat - log2 C` inside the box.
pub fn asymp_interval<T: Scalar>(log2_c_hat: T, bx: &SearchBox<T>) -> (T, T) {
    let lo = bx.c_min.max(log2_c_hat - bx.gamma_max);
    let hi = bx.c_max.min(log2_c_hat - bx.gamma_min);
    (lo, hi)
}

/// Linear-kernel C grid, then `n_pair` RBF probes along the asymptote through the best C.
pub fn asymp_search<T: Scalar>(
    ev_linear: &mut SurfaceEvaluator<'_, T>,
    ev_rbf: &mut SurfaceEvaluator<'_, T>,
    n_pair: usize,
) -> Result<AsympOutcome<T>> {
    if n_pair == 0 || ev_linear.remaining() < n_pair || ev_rbf.remaining() < n_pair {
        return Err(Error::BudgetExhausted);
    }
    let bx = ev_rbf.bounds();
    let mut best: Option<(T, T)> = None;
    for c in linspace(bx.c_min, bx.c_max, n_pair).into_iter().map(dyadic) {
        let e = ev_linear.evaluate(HyperPoint::new(c, T::zero()))?;
        // ascending C, strict improvement: ties keep the smaller C
        if best.is_none_or(|(_, a)| e.accuracy > a) {
            best = Some((c, e.accuracy));
        }
    }
    let (c_hat, _) = best.expect("n_pair >= 1");
    let (lo, hi) = asymp_interval(c_hat, &bx);
    assert!(lo <= hi, "asymptote misses the box");
    let stage2: Vec<HyperPoint<T>> = linspace(lo, hi, n_pair)
        .into_iter()
        .map(|c| {
            let c = dyadic(c).max(lo).min(hi);
            HyperPoint::new(c, c_hat - c)
        })
        .collect();
    let mut b = Budgeted::new(ev_rbf, n_pair);
    for p in &stage2 {
        b.eval(*p)?.ok_or(Error::BudgetExhausted)?;
    }
    Ok(AsympOutcome { tie_set: b.finish()?, log2_c_hat: c_hat, stage2 })
}
