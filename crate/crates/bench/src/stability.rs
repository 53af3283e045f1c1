//! Two-run stability: the same probe plan on two surfaces built from different inner folds.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

use svmtune_core::dataset::{make_split_plan_with_inner, Dataset};
use svmtune_core::surface::{CvSurface, Evaluation, HyperPoint, KernelKind, ResponseSurface};
use svmtune_core::{run_on_data, Algorithm, SelectionRule};

use crate::config::NamedDataset;
use crate::error::{BenchError, Result};

/// The six measurements, in report order.
pub const MEASUREMENTS: [&str; 6] = [
    "n_single_best",
    "same_best_proportion",
    "mean_cross_run_rank",
    "median_best_second_gap",
    "median_cross_run_best_gap",
    "mean_log_distance",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub algorithm: String,
    /// Datasets where at least one run has a single best point.
    pub n_single_best: usize,
    /// Among those, the share where both runs picked the same point.
    pub same_best_proportion: f64,
    /// Mean rank of one run's best point within the other run's log (1 is best).
    pub mean_cross_run_rank: f64,
    /// Median of best minus second-best accuracy within a run.
    pub median_best_second_gap: f64,
    /// Median of the absolute difference of the two runs' best accuracies.
    pub median_cross_run_best_gap: f64,
    /// Mean distance in log2 space between the two runs' best points.
    pub mean_log_distance: f64,
    /// Datasets the means and medians were taken over.
    pub datasets_used: usize,
}

/// One run's view: the selected best point and the accuracy of every distinct probe.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub best: HyperPoint<f64>,
    pub best_accuracy: f64,
    pub tie_size: usize,
    pub accuracies: HashMap<(i64, i64), f64>,
}

impl RunSummary {
    pub fn from_log(log: &[Evaluation<f64>], best: HyperPoint<f64>, tie_size: usize) -> Self {
        let accuracies: HashMap<_, _> = log.iter().map(|e| (e.point.key(), e.accuracy)).collect();
        let best_accuracy = accuracies[&best.key()];
        RunSummary { best, best_accuracy, tie_size, accuracies }
    }

    /// Best minus the next distinct probe's accuracy; zero when the best is tied.
    pub fn best_second_gap(&self) -> f64 {
        if self.tie_size > 1 {
            return 0.0;
        }
        let second = self
            .accuracies
            .iter()
            .filter(|(k, _)| **k != self.best.key())
            .map(|(_, &a)| a)
            .fold(f64::NEG_INFINITY, f64::max);
        if second.is_finite() {
            self.best_accuracy - second
        } else {
            0.0
        }
    }

    /// Mean rank of accuracy `a` among this run's distinct probes, counting `a` itself when
    /// the point was never probed here.
    pub fn rank_of(&self, key: (i64, i64), a: f64) -> f64 {
        let mut values: Vec<f64> = self.accuracies.values().copied().collect();
        if !self.accuracies.contains_key(&key) {
            values.push(a);
        }
        let above = values.iter().filter(|&&v| v > a).count() as f64;
        let tied = values.iter().filter(|&&v| v == a).count() as f64;
        above + (tied + 1.0) / 2.0
    }
}

/// Measurements from per-dataset pairs of runs, taken over the datasets where some run has a
/// single best point. When there are none, every dataset is used instead.
/// `extra_probe(i, run)` scores the other run's best on `run`'s surface when it was not logged.
pub fn summarize(
    algorithm: &str,
    pairs: &[(RunSummary, RunSummary)],
    extra_probe: impl Fn(usize, usize) -> f64,
) -> StabilityReport {
    let single: Vec<usize> =
        (0..pairs.len()).filter(|&i| pairs[i].0.tie_size == 1 || pairs[i].1.tie_size == 1).collect();
    let used: Vec<usize> = if single.is_empty() { (0..pairs.len()).collect() } else { single.clone() };
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };

    let same: Vec<f64> =
        used.iter().map(|&i| f64::from(u8::from(pairs[i].0.best.key() == pairs[i].1.best.key()))).collect();
    let mut ranks = Vec::new();
    let mut gaps = Vec::new();
    let mut cross = Vec::new();
    let mut dist = Vec::new();
    for &i in &used {
        let (a, b) = &pairs[i];
        // accuracy of each run's best on the other surface, probing it if it was not logged
        let a_on_b = b.accuracies.get(&a.best.key()).copied().unwrap_or_else(|| extra_probe(i, 1));
        let b_on_a = a.accuracies.get(&b.best.key()).copied().unwrap_or_else(|| extra_probe(i, 0));
        ranks.push(b.rank_of(a.best.key(), a_on_b));
        ranks.push(a.rank_of(b.best.key(), b_on_a));
        gaps.push(a.best_second_gap());
        gaps.push(b.best_second_gap());
        cross.push((a.best_accuracy - b.best_accuracy).abs());
        dist.push(a.best.distance(&b.best));
    }
    StabilityReport {
        algorithm: algorithm.to_string(),
        n_single_best: single.len(),
        same_best_proportion: mean(&same),
        mean_cross_run_rank: mean(&ranks),
        median_best_second_gap: median(&mut gaps),
        median_cross_run_best_gap: median(&mut cross),
        mean_log_distance: mean(&dist),
        datasets_used: used.len(),
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Seeds of a stability analysis. The outer split seed only feeds the stratified fold
/// dealing; each run searches the whole dataset.
#[derive(Clone, Copy, Debug)]
pub struct StabilitySeeds {
    pub split: u64,
    pub search: u64,
    pub runs: (u64, u64),
}

/// Runs `alg` twice on every dataset, once per inner-fold seed, with identical probe plans.
pub fn two_run_stability(
    alg: Algorithm,
    datasets: &[NamedDataset],
    k_inner: usize,
    seeds: StabilitySeeds,
    rule: SelectionRule,
) -> Result<StabilityReport> {
    if !alg.is_grid_like() {
        return Err(BenchError::NotGridLike(alg.to_string()));
    }
    let mut pairs = Vec::new();
    let mut surfaces = Vec::new();
    for ds in datasets {
        let wrap = |source| BenchError::Dataset { dataset: ds.id.clone(), source };
        let mut runs = Vec::new();
        let mut both = Vec::new();
        for s in [seeds.runs.0, seeds.runs.1] {
            let folds = whole_dataset_folds(&ds.data, k_inner, seeds.split, s).map_err(wrap)?;
            let surface = CvSurface::new(&ds.data, &folds, KernelKind::Rbf).map_err(wrap)?;
            let run = run_on_data(alg, &ds.data, &folds, seeds.search, None).map_err(wrap)?;
            let best = run.tie_set.select(rule, seeds.search);
            runs.push(RunSummary::from_log(&run.eval_log, best, run.tie_set.len()));
            both.push(surface);
        }
        let b = runs.pop().unwrap();
        pairs.push((runs.pop().unwrap(), b));
        surfaces.push(both);
    }
    let probe = |i: usize, on: usize| {
        let (a, b) = &pairs[i];
        let p = if on == 1 { a.best } else { b.best };
        surfaces[i][on].probe(p).accuracy
    };
    Ok(summarize(&alg.to_string(), &pairs, probe))
}

/// Stratified `k`-fold ids (1..=k) over every row of the dataset.
pub fn whole_dataset_folds(
    data: &Dataset<f64>,
    k: usize,
    split_seed: u64,
    inner_seed: u64,
) -> svmtune_core::Result<Vec<u8>> {
    // each outer half is dealt into k stratified folds; merging them keeps the strata
    let plan = make_split_plan_with_inner(data, k, split_seed, inner_seed)?;
    let mut folds = vec![0u8; data.len()];
    for j in [1u8, 2] {
        for (&row, &f) in plan.members(j).iter().zip(plan.folds(j)) {
            folds[row] = f;
        }
    }
    Ok(folds)
}

impl StabilityReport {
    fn values(&self) -> [f64; 6] {
        [
            self.n_single_best as f64,
            self.same_best_proportion,
            self.mean_cross_run_rank,
            self.median_best_second_gap,
            self.median_cross_run_best_gap,
            self.mean_log_distance,
        ]
    }

    /// `algorithm,measurement,value`, six rows plus a trailing `datasets_used` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["algorithm", "measurement", "value"])?;
        for (name, v) in MEASUREMENTS.iter().zip(self.values()) {
            w.write_record([self.algorithm.as_str(), name, &v.to_string()])?;
        }
        w.write_record([self.algorithm.as_str(), "datasets_used", &self.datasets_used.to_string()])?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut alg = None;
        let mut got: HashMap<String, String> = HashMap::new();
        for row in r.records() {
            let row = row?;
            if row.len() != 3 {
                return Err(BenchError::Parse(format!("expected 3 columns, got {}", row.len())));
            }
            if *alg.get_or_insert_with(|| row[0].to_string()) != row[0] {
                return Err(BenchError::Parse("mixed algorithms in one report".into()));
            }
            got.insert(row[1].to_string(), row[2].to_string());
        }
        let take = |name: &str| -> Result<f64> {
            let v = got.get(name).ok_or_else(|| BenchError::Parse(format!("missing measurement {name}")))?;
            v.parse().map_err(|_| BenchError::Parse(format!("{name}: not a number: {v}")))
        };
        let count = |name: &str| -> Result<usize> {
            let v = take(name)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(BenchError::Parse(format!("{name}: not a count: {v}")));
            }
            Ok(v as usize)
        };
        Ok(StabilityReport {
            algorithm: alg.ok_or_else(|| BenchError::Parse("empty report".into()))?,
            n_single_best: count(MEASUREMENTS[0])?,
            same_best_proportion: take(MEASUREMENTS[1])?,
            mean_cross_run_rank: take(MEASUREMENTS[2])?,
            median_best_second_gap: take(MEASUREMENTS[3])?,
            median_cross_run_best_gap: take(MEASUREMENTS[4])?,
            mean_log_distance: take(MEASUREMENTS[5])?,
            datasets_used: count("datasets_used")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(c: f64, g: f64, a: f64, seq: usize) -> Evaluation<f64> {
        Evaluation { point: HyperPoint::new(c, g), accuracy: a, seq }
    }

    #[test]
    fn best_second_gap_definition() {
        let log = [ev(0.0, 0.0, 0.90, 0), ev(1.0, 0.0, 0.89, 1), ev(2.0, 0.0, 0.5, 2)];
        let s = RunSummary::from_log(&log, HyperPoint::new(0.0, 0.0), 1);
        assert!((s.best_second_gap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn ties_share_mean_rank() {
        let log = [ev(0.0, 0.0, 0.9, 0), ev(1.0, 0.0, 0.8, 1), ev(2.0, 0.0, 0.8, 2), ev(3.0, 0.0, 0.7, 3)];
        let s = RunSummary::from_log(&log, HyperPoint::new(0.0, 0.0), 1);
        assert_eq!(s.rank_of(HyperPoint::new(0.0, 0.0).key(), 0.9), 1.0);
        assert_eq!(s.rank_of(HyperPoint::new(1.0, 0.0).key(), 0.8), 2.5);
        assert_eq!(s.rank_of((99, 99), 0.75), 4.0);
    }

    #[test]
    fn identical_runs_are_degenerate() {
        let log = [ev(0.0, 0.0, 0.9, 0), ev(1.0, 0.0, 0.8, 1)];
        let s = RunSummary::from_log(&log, HyperPoint::new(0.0, 0.0), 1);
        let r = summarize("grid4", &[(s.clone(), s)], |_, _| unreachable!());
        assert_eq!(r.n_single_best, 1);
        assert_eq!((r.same_best_proportion, r.mean_cross_run_rank), (1.0, 1.0));
        assert_eq!((r.median_cross_run_best_gap, r.mean_log_distance), (0.0, 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let r = StabilityReport {
            algorithm: "ud400".into(),
            n_single_best: 45,
            same_best_proportion: 0.09,
            mean_cross_run_rank: 20.2,
            median_best_second_gap: 8.6e-4,
            median_cross_run_best_gap: 8.9e-3,
            mean_log_distance: 4.7,
            datasets_used: 45,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 1 + 6 + 1);
        assert_eq!(StabilityReport::read_csv(&buf[..]).unwrap(), r);
    }

    #[test]
    fn adaptive_searchers_rejected() {
        let e = two_run_stability(
            "nelder100".parse().unwrap(),
            &[],
            5,
            StabilitySeeds { split: 0, search: 0, runs: (1, 2) },
            SelectionRule::RandCg,
        );
        assert!(e.unwrap_err().to_string().contains("stability requires predetermined probes"));
    }
}
