//! The nested protocol: a 5-fold surface inside a 2-fold outer split, per (searcher, dataset).

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use svmtune_core::dataset::{make_split_plan, Dataset, SplitPlan};
use svmtune_core::selection::TieSet;
use svmtune_core::surface::HyperPoint;
use svmtune_core::svm::{self, KernelSpec, TrainConfig};
use svmtune_core::{run_on_data, Algorithm, Error as CoreError, SelectionRule};

use crate::config::{NamedDataset, RunConfig};
use crate::error::{BenchError, Result};
use crate::stats::{bootstrap_ci_mean, point_interval, CiResult, SelectionCase};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TrialFlag {
    /// Hit the per-trial time limit; the record is excluded from aggregation.
    TimeLimit,
    /// Any other failure; excluded as well.
    Failed(String),
    /// Some SMO fits stopped at the pair-update cap. Informational only.
    Unconverged(usize),
}

impl TrialFlag {
    pub fn excludes(&self) -> bool {
        !matches!(self, TrialFlag::Unconverged(_))
    }
}

/// Outcome of one search on one outer subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub dataset: String,
    pub subset: u8,
    pub split_seed: u64,
    pub search_seed: u64,
    pub theta: Option<HyperPoint<f64>>,
    /// Best inner cross-validated accuracy found.
    pub alpha: Option<f64>,
    /// Accuracy on the other subset of one model trained on this whole subset at `theta`.
    pub beta: Option<f64>,
    pub eval_count: usize,
    pub budget: usize,
    pub wall_time: f64,
    pub tie_set_size: usize,
    /// Full tie set, kept so selection rules can be compared after the fact.
    pub tie_set: Vec<HyperPoint<f64>>,
    pub flags: Vec<TrialFlag>,
}

pub type TrialKey = (String, String, u8, u64, u64);

impl TrialRecord {
    pub fn is_complete(&self) -> bool {
        self.alpha.is_some() && self.beta.is_some() && !self.flags.iter().any(TrialFlag::excludes)
    }

    pub fn key(&self) -> TrialKey {
        (self.algorithm.to_string(), self.dataset.clone(), self.subset, self.split_seed, self.search_seed)
    }

    fn failed(alg: Algorithm, dataset: &str, subset: u8, split_seed: u64, search_seed: u64, flag: TrialFlag) -> Self {
        TrialRecord {
            algorithm: alg,
            dataset: dataset.to_string(),
            subset,
            split_seed,
            search_seed,
            theta: None,
            alpha: None,
            beta: None,
            eval_count: 0,
            budget: alg.budget(),
            wall_time: 0.0,
            tie_set_size: 0,
            tie_set: Vec::new(),
            flags: vec![flag],
        }
    }
}

/// Everything `run_trial` needs besides the data.
#[derive(Clone, Copy, Debug)]
pub struct TrialSpec {
    pub algorithm: Algorithm,
    pub subset: u8,
    pub search_seed: u64,
    pub rule: SelectionRule,
    pub time_limit: Option<Duration>,
}

/// Searches subset `j` of `plan` with its inner folds, selects one pair from the tie set and
/// scores it on the other subset. Failures come back as flagged records.
pub fn run_trial(dataset_id: &str, data: &Dataset<f64>, plan: &SplitPlan, spec: TrialSpec) -> TrialRecord {
    let TrialSpec { algorithm: alg, subset: j, search_seed, rule, time_limit } = spec;
    let started = Instant::now();
    let flag_of = |e: CoreError| match e {
        CoreError::TimeLimit => TrialFlag::TimeLimit,
        e => TrialFlag::Failed(e.to_string()),
    };
    let (train, test) = outer_pair(data, plan, j);
    let run = match run_on_data(alg, &train, plan.folds(j), search_seed, time_limit.map(|t| started + t)) {
        Ok(run) => run,
        Err(e) => return TrialRecord::failed(alg, dataset_id, j, plan.seed, search_seed, flag_of(e)),
    };
    let theta = run.tie_set.select(rule, search_seed);
    let beta = train_and_score(&train, &test, theta);
    let mut flags = Vec::new();
    if run.unconverged_folds > 0 {
        flags.push(TrialFlag::Unconverged(run.unconverged_folds));
    }
    let beta = match beta {
        Ok(b) => Some(b),
        Err(e) => {
            flags.push(TrialFlag::Failed(format!("future-data model: {e}")));
            None
        }
    };
    TrialRecord {
        algorithm: alg,
        dataset: dataset_id.to_string(),
        subset: j,
        split_seed: plan.seed,
        search_seed,
        theta: Some(theta),
        alpha: Some(run.best_value),
        beta,
        eval_count: run.evaluations,
        budget: alg.budget(),
        wall_time: started.elapsed().as_secs_f64(),
        tie_set_size: run.tie_set.len(),
        tie_set: run.tie_set.points().to_vec(),
        flags,
    }
}

fn outer_pair(data: &Dataset<f64>, plan: &SplitPlan, j: u8) -> (Dataset<f64>, Dataset<f64>) {
    (data.subset(&plan.members(j)), data.subset(&plan.members(3 - j)))
}

fn train_and_score(train: &Dataset<f64>, test: &Dataset<f64>, p: HyperPoint<f64>) -> svmtune_core::Result<f64> {
    let model = svm::train(train, &TrainConfig::new(p.c())?, KernelSpec::rbf(p.gamma())?)?;
    svm::accuracy(&model, test)
}

/// Accuracy on the other subset of one model trained on all of subset `j` at `p`.
pub fn future_accuracy_at(data: &Dataset<f64>, plan: &SplitPlan, j: u8, p: HyperPoint<f64>) -> Result<f64> {
    let (train, test) = outer_pair(data, plan, j);
    Ok(train_and_score(&train, &test, p)?)
}

/// Tie sets of the complete records of grid-like searchers, for comparing selection rules
/// after a campaign.
pub fn selection_cases(records: &RecordSet) -> Vec<SelectionCase> {
    records
        .records()
        .iter()
        .filter(|r| r.is_complete() && r.algorithm.is_grid_like())
        .filter_map(|r| {
            let tie_set = TieSet::new(r.tie_set.clone()).ok()?;
            Some(SelectionCase {
                label: format!("{}/{}/{}", r.algorithm, r.dataset, r.subset),
                tie_set,
                seed: r.search_seed,
            })
        })
        .collect()
}

/// Completed trial records with the aggregate views defined over them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordSet {
    records: Vec<TrialRecord>,
}

impl RecordSet {
    /// Sorted by (dataset, algorithm, subset) so aggregation ignores completion order.
    pub fn new(mut records: Vec<TrialRecord>) -> Self {
        records.sort_by(|a, b| {
            (&a.dataset, a.algorithm, a.subset, a.split_seed, a.search_seed).cmp(&(
                &b.dataset,
                b.algorithm,
                b.subset,
                b.split_seed,
                b.search_seed,
            ))
        });
        RecordSet { records }
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn flagged(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().filter(|r| !r.is_complete())
    }

    fn pair(&self, alg: Algorithm, dataset: &str) -> Result<[&TrialRecord; 2]> {
        let find = |j| {
            self.records.iter().find(|r| r.algorithm == alg && r.dataset == dataset && r.subset == j && r.is_complete())
        };
        match (find(1), find(2)) {
            (Some(a), Some(b)) => Ok([a, b]),
            _ => Err(BenchError::MissingRecords { algorithm: alg.to_string(), dataset: dataset.to_string() }),
        }
    }

    /// Mean of the two subsets' best inner accuracies.
    pub fn mean_best_accuracy(&self, alg: Algorithm, dataset: &str) -> Result<f64> {
        let [a, b] = self.pair(alg, dataset)?;
        Ok((a.alpha.unwrap() + b.alpha.unwrap()) / 2.0)
    }

    pub fn accuracy_gain(&self, alg: Algorithm, baseline: Algorithm, dataset: &str) -> Result<f64> {
        Ok(self.mean_best_accuracy(alg, dataset)? - self.mean_best_accuracy(baseline, dataset)?)
    }

    /// Two-fold estimate of accuracy on unseen data.
    pub fn future_accuracy(&self, alg: Algorithm, dataset: &str) -> Result<f64> {
        let [a, b] = self.pair(alg, dataset)?;
        Ok((a.beta.unwrap() + b.beta.unwrap()) / 2.0)
    }

    pub fn future_gain(&self, alg: Algorithm, baseline: Algorithm, dataset: &str) -> Result<f64> {
        Ok(self.future_accuracy(alg, dataset)? - self.future_accuracy(baseline, dataset)?)
    }

    /// `(time_ratio, eval_ratio)` against the baseline, summed over both subsets.
    pub fn cost_ratio(&self, alg: Algorithm, baseline: Algorithm, dataset: &str) -> Result<(f64, f64)> {
        let x = self.pair(alg, dataset)?;
        let b = self.pair(baseline, dataset)?;
        let time = |p: [&TrialRecord; 2]| p[0].wall_time + p[1].wall_time;
        let evals = |p: [&TrialRecord; 2]| (p[0].eval_count + p[1].eval_count) as f64;
        if time(b) <= 0.0 {
            return Err(BenchError::ZeroBaselineTime(dataset.to_string()));
        }
        // the same trial object gives exactly 1 even if its clock reading is odd
        let time_ratio = if alg == baseline { 1.0 } else { time(x) / time(b) };
        Ok((time_ratio, evals(x) / evals(b)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub algorithm: String,
    pub dataset: String,
    pub accgain: f64,
    pub future_gain: f64,
    pub eval_ratio: f64,
    /// Hardware-specific; NaN when the baseline time is zero.
    pub time_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedDataset {
    pub dataset: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainTable {
    pub rows: Vec<GainRow>,
    pub excluded: Vec<ExcludedDataset>,
}

pub const GAIN_COLUMNS: [&str; 6] = ["algorithm", "dataset", "accgain", "future_gain", "eval_ratio", "time_ratio"];

/// Builds the gain table in (algorithm order, dataset order). A dataset where any listed
/// searcher lacks a complete pair of records is dropped for every searcher.
pub fn gain_table(
    records: &RecordSet,
    algorithms: &[Algorithm],
    datasets: &[String],
    baseline: Algorithm,
) -> GainTable {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for ds in datasets {
        match algorithms.iter().chain([&baseline]).find_map(|&a| records.pair(a, ds).err()) {
            Some(e) => excluded.push(ExcludedDataset { dataset: ds.clone(), reason: e.to_string() }),
            None => kept.push(ds),
        }
    }
    let mut rows = Vec::new();
    for &alg in algorithms {
        for ds in &kept {
            let (time_ratio, eval_ratio) = match records.cost_ratio(alg, baseline, ds) {
                Ok(r) => r,
                Err(_) => {
                    let [a, b] = [records.pair(alg, ds).unwrap(), records.pair(baseline, ds).unwrap()];
                    let e = |p: [&TrialRecord; 2]| (p[0].eval_count + p[1].eval_count) as f64;
                    (f64::NAN, e(a) / e(b))
                }
            };
            rows.push(GainRow {
                algorithm: alg.to_string(),
                dataset: (*ds).clone(),
                accgain: records.accuracy_gain(alg, baseline, ds).unwrap(),
                future_gain: records.future_gain(alg, baseline, ds).unwrap(),
                eval_ratio,
                time_ratio,
            });
        }
    }
    GainTable { rows, excluded }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainCi {
    pub algorithm: String,
    pub datasets: usize,
    pub accgain: CiResult,
    pub future_gain: CiResult,
    pub mean_eval_ratio: f64,
}

/// Bootstrap intervals of the per-dataset gains, one row per searcher.
pub fn gain_intervals(
    table: &GainTable,
    algorithms: &[Algorithm],
    replicates: usize,
    seed: u64,
) -> Result<Vec<GainCi>> {
    let mut out = Vec::new();
    for alg in algorithms {
        let name = alg.to_string();
        let rows: Vec<&GainRow> = table.rows.iter().filter(|r| r.algorithm == name).collect();
        if rows.is_empty() {
            continue;
        }
        let ci = |v: Vec<f64>| match v.len() {
            1 => Ok(point_interval(v[0], seed)),
            _ => bootstrap_ci_mean(&v, replicates, crate::stats::DEFAULT_LEVEL, seed),
        };
        out.push(GainCi {
            algorithm: name,
            datasets: rows.len(),
            accgain: ci(rows.iter().map(|r| r.accgain).collect())?,
            future_gain: ci(rows.iter().map(|r| r.future_gain).collect())?,
            mean_eval_ratio: rows.iter().map(|r| r.eval_ratio).sum::<f64>() / rows.len() as f64,
        });
    }
    Ok(out)
}

/// Paths of the files written by [`write_reports`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub gain_table: PathBuf,
    pub gain_ci: PathBuf,
    pub plot_data: PathBuf,
    pub excluded: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        ReportFiles {
            gain_table: dir.join("gain_table.csv"),
            gain_ci: dir.join("gain_ci.csv"),
            plot_data: dir.join("plot_data.csv"),
            excluded: dir.join("excluded.csv"),
        }
    }
}

/// Writes the gain table, the interval table, plot data `(mean accgain, log10 eval_ratio)`
/// and the list of excluded datasets.
pub fn write_reports(table: &GainTable, cis: &[GainCi], dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let files = ReportFiles::in_dir(dir);

    // headers are written by hand so empty tables still get one
    let mut headerless = csv::WriterBuilder::new();
    headerless.has_headers(false);
    let mut w = headerless.from_path(&files.gain_table)?;
    w.write_record(GAIN_COLUMNS)?;
    for r in &table.rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&files.gain_ci)?;
    w.write_record([
        "algorithm",
        "datasets",
        "mean_accgain",
        "accgain_low",
        "accgain_high",
        "mean_future_gain",
        "future_gain_low",
        "future_gain_high",
        "replicates",
        "seed",
    ])?;
    for c in cis {
        w.write_record([
            c.algorithm.clone(),
            c.datasets.to_string(),
            c.accgain.mean.to_string(),
            c.accgain.low.to_string(),
            c.accgain.high.to_string(),
            c.future_gain.mean.to_string(),
            c.future_gain.low.to_string(),
            c.future_gain.high.to_string(),
            c.accgain.replicates.to_string(),
            c.accgain.seed.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&files.plot_data)?;
    w.write_record(["algorithm", "mean_accgain", "log10_eval_ratio"])?;
    for c in cis {
        w.write_record([c.algorithm.clone(), c.accgain.mean.to_string(), c.mean_eval_ratio.log10().to_string()])?;
    }
    w.flush()?;

    let mut w = headerless.from_path(&files.excluded)?;
    w.write_record(["dataset", "reason"])?;
    for e in &table.excluded {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(files)
}

/// Reads a records file, ignoring a torn final line left by an interrupted run.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if Some(i) == last => break,
            Err(e) => return Err(BenchError::Parse(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn rewrite_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub struct CampaignOutcome {
    pub records: RecordSet,
    pub table: GainTable,
    pub intervals: Vec<GainCi>,
    pub files: ReportFiles,
    /// Trials run in this invocation (the rest were already on disk).
    pub executed: usize,
}

impl CampaignOutcome {
    /// Flagged trials make the campaign partial.
    pub fn is_partial(&self) -> bool {
        self.records.flagged().next().is_some()
    }
}

pub const RECORDS_FILE: &str = "records.jsonl";

/// Runs every missing (searcher, dataset, subset) trial with `cfg.jobs` workers, appending
/// each record to `records.jsonl` as it finishes, then writes the reports.
pub fn run_campaign(cfg: &RunConfig, datasets: &[NamedDataset], out_dir: &Path) -> Result<CampaignOutcome> {
    cfg.validate()?;
    cfg.validate_campaign()?;
    std::fs::create_dir_all(out_dir)?;
    let records_path = out_dir.join(RECORDS_FILE);
    let mut records = read_records(&records_path)?;
    // drops a torn tail so appends start on a fresh line
    rewrite_records(&records_path, &records)?;
    let done: HashSet<TrialKey> = records.iter().map(TrialRecord::key).collect();

    let (split_seed, search_seed) = (cfg.seeds.split, cfg.seeds.search);
    let mut plans = Vec::new();
    let mut jobs = Vec::new();
    for ds in datasets {
        let plan = make_split_plan(&ds.data, cfg.k_inner, split_seed);
        for &alg in &cfg.algorithms {
            for j in [1u8, 2] {
                let key = (alg.to_string(), ds.id.clone(), j, split_seed, search_seed);
                if !done.contains(&key) {
                    jobs.push((plans.len(), alg, j));
                }
            }
        }
        plans.push((ds, plan));
    }

    let executed = jobs.len();
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(|e| BenchError::Config(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<TrialRecord>();
    let mut sink = OpenOptions::new().append(true).open(&records_path)?;
    let time_limit = Some(cfg.time_limit());
    let rule = cfg.selection_rule;
    std::thread::scope(|scope| -> Result<()> {
        let plans = &plans;
        scope.spawn(move || {
            pool.scope(|s| {
                for (di, alg, j) in jobs {
                    let tx = tx.clone();
                    s.spawn(move |_| {
                        let (ds, plan) = &plans[di];
                        let rec = match plan {
                            Ok(plan) => {
                                let spec = TrialSpec { algorithm: alg, subset: j, search_seed, rule, time_limit };
                                run_trial(&ds.id, &ds.data, plan, spec)
                            }
                            Err(e) => TrialRecord::failed(
                                alg,
                                &ds.id,
                                j,
                                split_seed,
                                search_seed,
                                TrialFlag::Failed(e.to_string()),
                            ),
                        };
                        let _ = tx.send(rec);
                    });
                }
            });
        });
        // only this thread touches the records file
        for rec in rx {
            serde_json::to_writer(&mut sink, &rec)?;
            sink.write_all(b"\n")?;
            sink.flush()?;
            records.push(rec);
        }
        Ok(())
    })?;

    let ids: Vec<String> = datasets.iter().map(|d| d.id.clone()).collect();
    let (set, table, intervals, files) = aggregate(cfg, records, &ids, out_dir)?;
    Ok(CampaignOutcome { records: set, table, intervals, files, executed })
}

type Aggregated = (RecordSet, GainTable, Vec<GainCi>, ReportFiles);

fn aggregate(cfg: &RunConfig, records: Vec<TrialRecord>, ids: &[String], out_dir: &Path) -> Result<Aggregated> {
    let (split, search) = (cfg.seeds.split, cfg.seeds.search);
    let set =
        RecordSet::new(records.into_iter().filter(|r| r.split_seed == split && r.search_seed == search).collect());
    let table = gain_table(&set, &cfg.algorithms, ids, cfg.baseline);
    let intervals = gain_intervals(&table, &cfg.algorithms, cfg.bootstrap_replicates, cfg.seeds.bootstrap)?;
    let files = write_reports(&table, &intervals, out_dir)?;
    Ok((set, table, intervals, files))
}

/// Re-aggregates an existing records file without running any trial.
pub fn report_from_records(cfg: &RunConfig, out_dir: &Path) -> Result<CampaignOutcome> {
    let records = read_records(&out_dir.join(RECORDS_FILE))?;
    if records.is_empty() {
        return Err(BenchError::Config(format!("no records in {}", out_dir.display())));
    }
    let ids: Vec<String> = cfg.datasets.iter().map(|d| d.id.clone()).collect();
    let (set, table, intervals, files) = aggregate(cfg, records, &ids, out_dir)?;
    Ok(CampaignOutcome { records: set, table, intervals, files, executed: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alg: &str, ds: &str, j: u8, alpha: f64, beta: f64, evals: usize, time: f64) -> TrialRecord {
        let a: Algorithm = alg.parse().unwrap();
        TrialRecord {
            algorithm: a,
            dataset: ds.into(),
            subset: j,
            split_seed: 1,
            search_seed: 2,
            theta: Some(HyperPoint::new(0.0, 0.0)),
            alpha: Some(alpha),
            beta: Some(beta),
            eval_count: evals,
            budget: a.budget(),
            wall_time: time,
            tie_set_size: 1,
            tie_set: vec![HyperPoint::new(0.0, 0.0)],
            flags: vec![],
        }
    }

    fn alg(s: &str) -> Algorithm {
        s.parse().unwrap()
    }

    fn fixture() -> RecordSet {
        RecordSet::new(vec![
            rec("grid100", "d", 1, 0.85, 0.7, 100, 2.0),
            rec("grid100", "d", 2, 0.87, 0.8, 100, 2.0),
            rec("grid25", "d", 1, 0.9, 0.75, 25, 0.5),
            rec("grid25", "d", 2, 0.9, 0.75, 25, 0.5),
            rec("grid400", "d", 2, 0.8, 0.9, 400, 8.0),
            rec("grid400", "d", 1, 0.9, 0.6, 400, 8.0),
        ])
    }

    #[test]
    fn gains_and_ratios() {
        let s = fixture();
        let (g100, g25, g400) = (alg("grid100"), alg("grid25"), alg("grid400"));
        assert!((s.mean_best_accuracy(g400, "d").unwrap() - 0.85).abs() < 1e-15);
        assert!((s.accuracy_gain(g25, g100, "d").unwrap() - 0.04).abs() < 1e-12);
        assert_eq!(s.accuracy_gain(g25, g100, "d").unwrap(), -s.accuracy_gain(g100, g25, "d").unwrap());
        assert_eq!(s.accuracy_gain(g100, g100, "d").unwrap(), 0.0);
        assert_eq!(s.future_accuracy(g100, "d").unwrap(), 0.75);
        assert_eq!(s.future_gain(g100, g100, "d").unwrap(), 0.0);
        assert_eq!(s.cost_ratio(g25, g100, "d").unwrap().1, 0.25);
        assert_eq!(s.cost_ratio(g400, g100, "d").unwrap().1, 4.0);
        assert_eq!(s.cost_ratio(g100, g100, "d").unwrap().0, 1.0);
    }

    #[test]
    fn zero_baseline_time_is_an_error() {
        let s = RecordSet::new(vec![
            rec("grid100", "d", 1, 0.8, 0.8, 100, 0.0),
            rec("grid100", "d", 2, 0.8, 0.8, 100, 0.0),
        ]);
        assert!(matches!(s.cost_ratio(alg("grid100"), alg("grid100"), "d"), Err(BenchError::ZeroBaselineTime(_))));
    }

    #[test]
    fn flagged_record_excludes_the_dataset() {
        let mut recs = fixture().records().to_vec();
        recs.push(rec("grid100", "e", 1, 0.8, 0.8, 100, 1.0));
        let mut bad = rec("grid100", "e", 2, 0.8, 0.8, 100, 1.0);
        bad.flags.push(TrialFlag::TimeLimit);
        recs.push(bad);
        let s = RecordSet::new(recs);
        assert!(s.mean_best_accuracy(alg("grid100"), "e").is_err());
        let t = gain_table(&s, &[alg("grid100"), alg("grid25")], &["d".into(), "e".into()], alg("grid100"));
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.excluded.len(), 1);
        assert_eq!(t.excluded[0].dataset, "e");
    }

    #[test]
    fn unconverged_flag_does_not_exclude() {
        let mut r = rec("grid25", "d", 1, 0.8, 0.8, 25, 1.0);
        r.flags.push(TrialFlag::Unconverged(3));
        assert!(r.is_complete());
    }

    #[test]
    fn records_round_trip_and_torn_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(RECORDS_FILE);
        let recs = fixture().records().to_vec();
        rewrite_records(&p, &recs).unwrap();
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(b"{\"algorithm\":\"grid2").unwrap();
        assert_eq!(read_records(&p).unwrap(), recs);
    }

    proptest::proptest! {
        #[test]
        fn records_survive_json_bit_for_bit(alpha in 0.0f64..1.0, beta in 0.0f64..1.0, c in -5.0f64..15.0) {
            let mut r = rec("ud100", "x", 2, alpha, beta, 100, alpha * 7.0);
            r.theta = Some(HyperPoint::new(c, -c / 3.0));
            let back: TrialRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
            proptest::prop_assert_eq!(back, r);
        }
    }

    #[test]
    fn baseline_interval_is_degenerate_zero() {
        let s = fixture();
        let algs = [alg("grid100"), alg("grid25")];
        let t = gain_table(&s, &algs, &["d".into()], alg("grid100"));
        let cis = gain_intervals(&t, &algs, 100, 0).unwrap();
        assert_eq!((cis[0].accgain.low, cis[0].accgain.mean, cis[0].accgain.high), (0.0, 0.0, 0.0));
    }
}
