//! Bootstrap intervals and rank tests for comparing searchers and selection rules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

use svmtune_core::selection::{SelectionRule, TieSet};
use svmtune_core::surface::HyperPoint;

use crate::error::{BenchError, Result};

pub const DEFAULT_REPLICATES: usize = 5000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
    pub replicates: usize,
    pub seed: u64,
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci_mean(values: &[f64], replicates: usize, level: f64, seed: u64) -> Result<CiResult> {
    if values.len() < 2 {
        return Err(BenchError::Stats("bootstrap needs at least 2 values".into()));
    }
    if replicates == 0 || !(level > 0.0 && level < 1.0) {
        return Err(BenchError::Stats("bootstrap needs replicates > 0 and a level in (0, 1)".into()));
    }
    let n = values.len();
    if values.iter().all(|&v| v == values[0]) {
        // every resample is the same vector; summing would only add rounding
        return Ok(CiResult { mean: values[0], low: values[0], high: values[0], replicates, seed });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> =
        (0..replicates).map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64).collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - level) / 2.0;
    let at = |q: f64| means[((q * replicates as f64).floor() as usize).min(replicates - 1)];
    // a constant sample can differ from its resample means in the last bit
    let (low, high) = (at(tail).min(mean), at(1.0 - tail).max(mean));
    Ok(CiResult { mean, low, high, replicates, seed })
}

/// Degenerate interval for a single observation.
pub fn point_interval(value: f64, seed: u64) -> CiResult {
    CiResult { mean: value, low: value, high: value, replicates: 0, seed }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub mean_ranks: Vec<f64>,
}

/// Ascending ranks with ties sharing their mean rank; also returns the tie-group sizes.
pub fn mean_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        order[start..end].iter().for_each(|&i| ranks[i] = r);
        groups.push(end - start);
        start = end;
    }
    (ranks, groups)
}

fn check_matrix(matrix: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n = matrix.len();
    let k = matrix.first().map_or(0, Vec::len);
    if n < 2 || k < 2 || matrix.iter().any(|r| r.len() != k) {
        return Err(BenchError::Stats(format!(
            "rank tests need a rectangular matrix with n >= 2 and k >= 2 (got {n} x {k})"
        )));
    }
    if matrix.iter().flatten().any(|v| v.is_nan()) {
        return Err(BenchError::Stats("rank tests do not accept NaN".into()));
    }
    Ok((n, k))
}

/// Friedman test on `n` blocks (rows) by `k` treatments (columns); small values rank first.
pub fn friedman_test(matrix: &[Vec<f64>]) -> Result<RankTestResult> {
    let (n, k) = check_matrix(matrix)?;
    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in matrix {
        let (r, groups) = mean_ranks(row);
        rank_sums.iter_mut().zip(&r).for_each(|(s, v)| *s += v);
        tie_term += groups.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let (nf, kf) = (n as f64, k as f64);
    let centre = nf * (kf + 1.0) / 2.0;
    let spread: f64 = rank_sums.iter().map(|s| (s - centre).powi(2)).sum();
    let denom = nf * kf * (kf + 1.0) - tie_term / (kf - 1.0);
    let statistic = if denom > 1e-12 { 12.0 * spread / denom } else { 0.0 };
    let p_value = if statistic > 0.0 { ChiSquared::new(kf - 1.0).unwrap().sf(statistic) } else { 1.0 };
    Ok(RankTestResult { statistic, df: k - 1, p_value, mean_ranks: rank_sums.iter().map(|s| s / nf).collect() })
}

/// `P(Q <= q)` for the range of `k` independent standard normals (infinite degrees of freedom).
pub fn studentized_range_cdf(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let norm = Normal::standard();
    // Simpson's rule on the density of the minimum times the probability the rest fall
    // within q of it
    let (lo, hi, steps) = (-9.0, 9.0, 3000);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| norm.pdf(z) * (norm.cdf(z + q) - norm.cdf(z)).powi(k as i32 - 1);
    let mut s = f(lo) + f(hi);
    for i in 1..steps {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (k as f64 * s * h / 3.0).clamp(0.0, 1.0)
}

/// Upper-`alpha` critical value of the studentized range divided by sqrt(2), the scale on
/// which the Nemenyi critical difference is expressed.
pub fn nemenyi_q(alpha: f64, k: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k) < 1.0 - alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / std::f64::consts::SQRT_2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NemenyiResult {
    pub mean_ranks: Vec<f64>,
    /// Symmetric, ones on the diagonal.
    pub p_values: Vec<Vec<f64>>,
    pub alpha: f64,
    pub q_alpha: f64,
    pub critical_difference: f64,
}

pub fn nemenyi_test(matrix: &[Vec<f64>], alpha: f64) -> Result<NemenyiResult> {
    let fr = friedman_test(matrix)?;
    let (n, k) = (matrix.len() as f64, fr.mean_ranks.len());
    let se = (k as f64 * (k as f64 + 1.0) / (6.0 * n)).sqrt();
    let mut p_values = vec![vec![1.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let z = (fr.mean_ranks[a] - fr.mean_ranks[b]).abs() / se;
            let p = if z > 0.0 { 1.0 - studentized_range_cdf(z * std::f64::consts::SQRT_2, k) } else { 1.0 };
            p_values[a][b] = p;
            p_values[b][a] = p;
        }
    }
    let q_alpha = nemenyi_q(alpha, k);
    Ok(NemenyiResult { mean_ranks: fr.mean_ranks, p_values, alpha, q_alpha, critical_difference: q_alpha * se })
}

/// One (algorithm, subset) search outcome whose tie set feeds the rule comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionCase {
    pub label: String,
    pub tie_set: TieSet<f64>,
    /// Seed for randCg, normally the trial's search seed.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionComparison {
    pub rules: Vec<SelectionRule>,
    pub cases: usize,
    /// Mean rank per rule; rank 1 is the best future accuracy.
    pub mean_ranks: Vec<f64>,
    pub test: RankTestResult,
}

/// Applies each rule to every qualifying tie set, scores the chosen pair with
/// `future_accuracy(case, pair)`, ranks the rules within each case and runs Friedman.
pub fn selection_rule_comparison(
    cases: &[SelectionCase],
    rules: &[SelectionRule],
    min_tie_size: usize,
    mut future_accuracy: impl FnMut(usize, HyperPoint<f64>) -> Result<f64>,
) -> Result<SelectionComparison> {
    let min = min_tie_size.max(2);
    let mut matrix = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        if case.tie_set.len() < min {
            continue;
        }
        let mut row = Vec::with_capacity(rules.len());
        for &rule in rules {
            // negated so that the most accurate rule receives rank 1
            row.push(-future_accuracy(i, case.tie_set.select(rule, case.seed))?);
        }
        matrix.push(row);
    }
    if matrix.len() < 2 {
        return Err(BenchError::Stats(format!("only {} tie sets with at least {min} members", matrix.len())));
    }
    let test = friedman_test(&matrix)?;
    Ok(SelectionComparison { rules: rules.to_vec(), cases: matrix.len(), mean_ranks: test.mean_ranks.clone(), test })
}
