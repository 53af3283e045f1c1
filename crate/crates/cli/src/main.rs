//! `svmtune`: tune one dataset, run a benchmark campaign, analyse two-run stability or
//! re-aggregate stored records.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use svmtune_bench::config::{NamedDataset, RunConfig};
use svmtune_bench::harness::{report_from_records, run_campaign, CampaignOutcome};
use svmtune_bench::stability::{two_run_stability, whole_dataset_folds, StabilitySeeds};
use svmtune_bench::BenchError;
use svmtune_core::surface::write_eval_log;
use svmtune_core::{run_on_data, Algorithm};

#[derive(Parser)]
#[command(name = "svmtune", version, about = "RBF SVM hyperparameter search and benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search one dataset with a 5-fold surface and report the selected (C, gamma).
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algorithm: String,
        /// Dataset id from the config; defaults to the first one.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Run the nested 2-fold/5-fold campaign and write gain tables.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        jobs: Option<usize>,
        /// Restrict the config's searcher list (repeatable); the baseline is always kept.
        #[arg(long)]
        algorithm: Vec<String>,
    },
    /// Two runs of a grid-like searcher on surfaces from different inner folds.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algorithm: String,
        /// Inner-fold seeds of the two runs, overriding the config's `seeds.stability`.
        #[arg(long, num_args = 2, value_names = ["FIRST", "SECOND"])]
        seed_pair: Option<Vec<u64>>,
    },
    /// Re-aggregate an existing records.jsonl without running trials.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed_split: Option<u64>,
    #[arg(long)]
    seed_search: Option<u64>,
    #[arg(long)]
    time_limit_secs: Option<u64>,
}

/// Exit status plus message.
struct Failure {
    code: u8,
    message: String,
}

const USAGE: u8 = 1;
const DATA: u8 = 2;
const PARTIAL: u8 = 3;

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let code = match &e {
            BenchError::Dataset { .. } | BenchError::Io(_) | BenchError::Csv(_) | BenchError::Parse(_) => DATA,
            BenchError::Core(c)
                if !matches!(c, svmtune_core::Error::UnknownAlgorithm(_) | svmtune_core::Error::UnknownRule(_)) =>
            {
                DATA
            }
            _ => USAGE,
        };
        let mut message = e.to_string();
        if message.contains("unknown algorithm id") {
            message.push_str(&registry_note());
        }
        Failure { code, message }
    }
}

fn registry_note() -> String {
    format!("\nregistered algorithms: {}", Algorithm::registry_listing())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, Failure> {
    s.parse().map_err(|e: svmtune_core::Error| Failure { code: USAGE, message: format!("{e}{}", registry_note()) })
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(s) = common.seed_split {
        cfg.seeds.split = s;
    }
    if let Some(s) = common.seed_search {
        cfg.seeds.search = s;
    }
    if let Some(t) = common.time_limit_secs {
        cfg.time_limit_secs = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn tune(common: &Common, algorithm: &str, dataset: Option<&str>) -> Result<(), Failure> {
    let alg = parse_algorithm(algorithm)?;
    let cfg = load_config(common)?;
    let spec = match dataset {
        Some(id) => cfg.datasets.iter().find(|d| d.id == id),
        None => cfg.datasets.first(),
    }
    .ok_or_else(|| Failure { code: USAGE, message: format!("dataset {} not in config", dataset.unwrap_or("(any)")) })?;
    let ds = svmtune_bench::config::load_dataset(spec)?;
    let data_err = |e: svmtune_core::Error| Failure::from(BenchError::Dataset { dataset: ds.id.clone(), source: e });
    let folds = whole_dataset_folds(&ds.data, cfg.k_inner, cfg.seeds.split, cfg.seeds.split).map_err(data_err)?;
    let deadline = Some(Instant::now() + Duration::from_secs(cfg.time_limit_secs));
    let run = run_on_data(alg, &ds.data, &folds, cfg.seeds.search, deadline).map_err(data_err)?;
    let theta = run.tie_set.select(cfg.selection_rule, cfg.seeds.search);
    let accuracy = run.eval_log.iter().find(|e| e.point.key() == theta.key()).map_or(run.best_value, |e| e.accuracy);

    std::fs::create_dir_all(&cfg.output_dir).map_err(BenchError::from)?;
    let log_path = cfg.output_dir.join(format!("eval_log_{}_{alg}.jsonl", ds.id));
    let mut out = std::io::BufWriter::new(std::fs::File::create(&log_path).map_err(BenchError::from)?);
    write_eval_log(&run.eval_log, &mut out).map_err(BenchError::from)?;
    if !run.linear_log.is_empty() {
        let lin = cfg.output_dir.join(format!("eval_log_{}_{alg}_linear.jsonl", ds.id));
        let mut f = std::fs::File::create(lin).map_err(BenchError::from)?;
        write_eval_log(&run.linear_log, &mut f).map_err(BenchError::from)?;
    }

    println!("dataset: {}", ds.id);
    println!("algorithm: {alg}");
    println!("selection: {} from {} tied point(s)", cfg.selection_rule, run.tie_set.len());
    println!("C: {}", theta.c());
    println!("gamma: {}", theta.gamma());
    println!("log2C: {}", theta.log2_c);
    println!("log2gamma: {}", theta.log2_gamma);
    println!("cv_accuracy: {accuracy}");
    println!("evaluations: {}", run.evaluations);
    println!("eval_log: {}", log_path.display());
    Ok(())
}

fn summarize_campaign(out: &CampaignOutcome) -> Result<(), Failure> {
    println!("trials run: {}, records: {}", out.executed, out.records.records().len());
    println!("gain table: {}", out.files.gain_table.display());
    println!("intervals: {}", out.files.gain_ci.display());
    println!("plot data: {}", out.files.plot_data.display());
    for c in &out.intervals {
        println!(
            "{:<12} accgain {:+.4} [{:+.4}, {:+.4}]  future_gain {:+.4}  eval_ratio {:.3}",
            c.algorithm, c.accgain.mean, c.accgain.low, c.accgain.high, c.future_gain.mean, c.mean_eval_ratio
        );
    }
    if !out.table.excluded.is_empty() {
        println!("excluded datasets: {}", out.table.excluded.len());
    }
    let flagged = out.records.flagged().count();
    if flagged > 0 {
        return Err(Failure {
            code: PARTIAL,
            message: format!("{flagged} trial(s) flagged; see {}", out.files.excluded.display()),
        });
    }
    Ok(())
}

fn benchmark(common: &Common, jobs: Option<usize>, algorithms: &[String]) -> Result<(), Failure> {
    let mut cfg = load_config(common)?;
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    if !algorithms.is_empty() {
        let mut chosen = vec![cfg.baseline];
        for a in algorithms {
            let a = parse_algorithm(a)?;
            if !chosen.contains(&a) {
                chosen.push(a);
            }
        }
        cfg.algorithms = chosen;
    }
    cfg.validate()?;
    cfg.validate_campaign()?;
    let datasets = cfg.load_datasets()?;
    let out = run_campaign(&cfg, &datasets, &cfg.output_dir)?;
    summarize_campaign(&out)
}

fn stability(common: &Common, algorithm: &str, seed_pair: Option<&[u64]>) -> Result<(), Failure> {
    let alg = parse_algorithm(algorithm)?;
    let cfg = load_config(common)?;
    let runs = match (seed_pair, cfg.seeds.stability) {
        (Some(p), _) => (p[0], p[1]),
        (None, Some(p)) => p,
        (None, None) => {
            return Err(Failure {
                code: USAGE,
                message: "no stability seeds: set seeds.stability or pass --seed-pair".into(),
            })
        }
    };
    let datasets: Vec<NamedDataset> = cfg.load_datasets()?;
    let seeds = StabilitySeeds { split: cfg.seeds.split, search: cfg.seeds.search, runs };
    let report = two_run_stability(alg, &datasets, cfg.k_inner, seeds, cfg.selection_rule)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(BenchError::from)?;
    let path = cfg.output_dir.join(format!("stability_{alg}.csv"));
    report.write_csv(std::fs::File::create(&path).map_err(BenchError::from)?)?;
    report.write_csv(std::io::stdout())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn report(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    cfg.validate_campaign()?;
    let out = report_from_records(&cfg, Path::new(&cfg.output_dir))?;
    summarize_campaign(&out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Tune { common, algorithm, dataset } => tune(common, algorithm, dataset.as_deref()),
        Command::Benchmark { common, jobs, algorithm } => benchmark(common, *jobs, algorithm),
        Command::Stability { common, algorithm, seed_pair } => stability(common, algorithm, seed_pair.as_deref()),
        Command::Report { common } => report(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
