//! The cross-validated response surface over (log2 C, log2 gamma) and the budgeted,
//! caching evaluator every searcher talks to.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::svm::{default_max_pair_updates, signed_labels, solve_dual, GramMatrix, DEFAULT_KKT_TOLERANCE};

pub const LOG2_C_MIN: f64 = -5.0;
pub const LOG2_C_MAX: f64 = 15.0;
pub const LOG2_GAMMA_MIN: f64 = -15.0;
pub const LOG2_GAMMA_MAX: f64 = 3.0;

/// Cache keys quantize coordinates to this absolute resolution.
pub const KEY_RESOLUTION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint<T> {
    #[serde(rename = "log2C")]
    pub log2_c: T,
    #[serde(rename = "log2gamma")]
    pub log2_gamma: T,
}

impl<T: Scalar> HyperPoint<T> {
    pub fn new(log2_c: T, log2_gamma: T) -> Self {
        Self { log2_c, log2_gamma }
    }

    pub fn c(&self) -> T {
        self.log2_c.exp2()
    }

    pub fn gamma(&self) -> T {
        self.log2_gamma.exp2()
    }

    pub fn distance(&self, other: &Self) -> T {
        ((self.log2_c - other.log2_c).powi(2) + (self.log2_gamma - other.log2_gamma).powi(2)).sqrt()
    }

    pub fn key(&self) -> (i64, i64) {
        let q = |v: T| (v.as_f64() / KEY_RESOLUTION).round() as i64;
        (q(self.log2_c), q(self.log2_gamma))
    }

    pub fn to_f64(self) -> HyperPoint<f64> {
        HyperPoint::new(self.log2_c.as_f64(), self.log2_gamma.as_f64())
    }
}

/// Axis-aligned rectangle in (log2 C, log2 gamma) space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox<T> {
    pub c_min: T,
    pub c_max: T,
    pub gamma_min: T,
    pub gamma_max: T,
}

impl<T: Scalar> SearchBox<T> {
    /// `2^-5 <= C <= 2^15`, `2^-15 <= gamma <= 2^3`.
    pub fn standard() -> Self {
        Self {
            c_min: T::lit(LOG2_C_MIN),
            c_max: T::lit(LOG2_C_MAX),
            gamma_min: T::lit(LOG2_GAMMA_MIN),
            gamma_max: T::lit(LOG2_GAMMA_MAX),
        }
    }

    pub fn new(c_min: T, c_max: T, gamma_min: T, gamma_max: T) -> Self {
        debug_assert!(c_min <= c_max && gamma_min <= gamma_max);
        Self { c_min, c_max, gamma_min, gamma_max }
    }

    pub fn c_width(&self) -> T {
        self.c_max - self.c_min
    }

    pub fn gamma_width(&self) -> T {
        self.gamma_max - self.gamma_min
    }

    pub fn center(&self) -> HyperPoint<T> {
        let half = T::lit(0.5);
        HyperPoint::new((self.c_min + self.c_max) * half, (self.gamma_min + self.gamma_max) * half)
    }

    pub fn contains(&self, p: &HyperPoint<T>) -> bool {
        p.log2_c >= self.c_min
            && p.log2_c <= self.c_max
            && p.log2_gamma >= self.gamma_min
            && p.log2_gamma <= self.gamma_max
    }

    pub fn clamp(&self, p: HyperPoint<T>) -> HyperPoint<T> {
        HyperPoint::new(p.log2_c.max(self.c_min).min(self.c_max), p.log2_gamma.max(self.gamma_min).min(self.gamma_max))
    }

    /// Maps a point of the unit square onto the box.
    pub fn from_unit(&self, u: T, v: T) -> HyperPoint<T> {
        HyperPoint::new(self.c_min + u * self.c_width(), self.gamma_min + v * self.gamma_width())
    }

    pub fn to_unit(&self, p: &HyperPoint<T>) -> (T, T) {
        let u = if self.c_width() > T::zero() { (p.log2_c - self.c_min) / self.c_width() } else { T::zero() };
        let v = if self.gamma_width() > T::zero() {
            (p.log2_gamma - self.gamma_min) / self.gamma_width()
        } else {
            T::zero()
        };
        (u, v)
    }

    pub fn diagonal(&self) -> T {
        (self.c_width().powi(2) + self.gamma_width().powi(2)).sqrt()
    }
}

/// One raw probe of a surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe<T> {
    pub accuracy: T,
    pub unconverged_folds: usize,
}

/// A black-box objective over (log2 C, log2 gamma); larger is better.
pub trait ResponseSurface<T>: Send + Sync {
    fn probe(&self, p: HyperPoint<T>) -> Probe<T>;
}

/// Wraps a plain function as a surface.
pub struct FnSurface<F>(pub F);

impl<T, F> ResponseSurface<T> for FnSurface<F>
where
    F: Fn(HyperPoint<T>) -> T + Send + Sync,
{
    fn probe(&self, p: HyperPoint<T>) -> Probe<T> {
        Probe { accuracy: (self.0)(p), unconverged_folds: 0 }
    }
}

/// `-((log2C - 5)^2 + (log2gamma + 5)^2) / scale`, maximal at (5, -5).
#[derive(Clone, Copy, Debug)]
pub struct ConcaveSurrogate {
    pub scale: f64,
}

impl Default for ConcaveSurrogate {
    fn default() -> Self {
        Self { scale: 100.0 }
    }
}

impl ConcaveSurrogate {
    pub fn optimum<T: Scalar>() -> HyperPoint<T> {
        HyperPoint::new(T::lit(5.0), T::lit(-5.0))
    }

    pub fn value<T: Scalar>(&self, p: HyperPoint<T>) -> T {
        let dc = p.log2_c - T::lit(5.0);
        let dg = p.log2_gamma + T::lit(5.0);
        -(dc * dc + dg * dg) / T::lit(self.scale)
    }
}

impl<T: Scalar> ResponseSurface<T> for ConcaveSurrogate {
    fn probe(&self, p: HyperPoint<T>) -> Probe<T> {
        Probe { accuracy: self.value(p), unconverged_folds: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    /// Ignores the gamma coordinate.
    Linear,
}

/// k-fold cross-validated SVM accuracy on one data subset.
pub struct CvSurface<T> {
    kind: KernelKind,
    n: usize,
    y: Vec<T>,
    labels: Vec<u8>,
    /// Pairwise squared distances (rbf) or inner products (linear), row-major n x n.
    base: Vec<T>,
    folds: Vec<(Vec<usize>, Vec<usize>)>,
    pub kkt_tolerance: T,
    pub max_pair_updates: Option<usize>,
}

impl<T: Scalar> CvSurface<T> {
    /// `fold_ids[i]` ∈ 1..=k is the held-out fold of row `i` of `data`.
    pub fn new(data: &Dataset<T>, fold_ids: &[u8], kind: KernelKind) -> Result<Self> {
        let n = data.len();
        if fold_ids.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: fold_ids.len() });
        }
        let k = fold_ids.iter().copied().max().unwrap_or(0) as usize;
        if k < 2 {
            return Err(Error::InvalidParameter("at least two folds are required".into()));
        }
        let mut folds = Vec::with_capacity(k);
        for f in 1..=k as u8 {
            let test: Vec<usize> = (0..n).filter(|&i| fold_ids[i] == f).collect();
            let train: Vec<usize> = (0..n).filter(|&i| fold_ids[i] != f).collect();
            let train_labels: Vec<u8> = train.iter().map(|&i| data.label(i)).collect();
            if test.is_empty() || !train_labels.contains(&0) || !train_labels.contains(&1) {
                return Err(Error::InvalidParameter(format!("fold {f} is degenerate")));
            }
            folds.push((train, test));
        }
        let mut base = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = match kind {
                    KernelKind::Rbf => crate::svm::squared_distance(data.row(i), data.row(j)),
                    KernelKind::Linear => crate::svm::dot(data.row(i), data.row(j)),
                };
                base[i * n + j] = v;
                base[j * n + i] = v;
            }
        }
        Ok(Self {
            kind,
            n,
            y: signed_labels(data.labels()),
            labels: data.labels().to_vec(),
            base,
            folds,
            kkt_tolerance: T::lit(DEFAULT_KKT_TOLERANCE),
            max_pair_updates: None,
        })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// Accuracy of each fold at `p`, plus the number of unconverged fold trainings.
    pub fn fold_accuracies(&self, p: HyperPoint<T>) -> (Vec<T>, usize) {
        let n = self.n;
        let c = p.c();
        let kernel: Vec<T> = match self.kind {
            KernelKind::Rbf => {
                let g = p.gamma();
                self.base.iter().map(|&d| (-g * d).exp()).collect()
            }
            KernelKind::Linear => self.base.clone(),
        };
        let mut unconverged = 0;
        let mut accs = Vec::with_capacity(self.folds.len());
        for (train, test) in &self.folds {
            let m = train.len();
            let mut values = Vec::with_capacity(m * m);
            for &i in train {
                values.extend(train.iter().map(|&j| kernel[i * n + j]));
            }
            let gram = GramMatrix::from_values(m, values);
            let y: Vec<T> = train.iter().map(|&i| self.y[i]).collect();
            let cap = self.max_pair_updates.unwrap_or_else(|| default_max_pair_updates(m));
            let sol = solve_dual(&y, &gram, c, self.kkt_tolerance, cap);
            if !sol.converged {
                unconverged += 1;
            }
            let support: Vec<(usize, T)> = train
                .iter()
                .zip(&sol.alpha)
                .filter(|(_, &a)| a > T::zero())
                .map(|(&i, &a)| (i, self.y[i] * a))
                .collect();
            let correct = test
                .iter()
                .filter(|&&t| {
                    let f: T = support.iter().map(|&(s, coef)| coef * kernel[s * n + t]).sum::<T>() + sol.bias;
                    u8::from(f > T::zero()) == self.labels[t]
                })
                .count();
            accs.push(T::from_usize(correct).unwrap() / T::from_usize(test.len()).unwrap());
        }
        (accs, unconverged)
    }
}

impl<T: Scalar> ResponseSurface<T> for CvSurface<T> {
    fn probe(&self, p: HyperPoint<T>) -> Probe<T> {
        let (accs, unconverged_folds) = self.fold_accuracies(p);
        let k = T::from_usize(accs.len()).unwrap();
        Probe { accuracy: accs.into_iter().sum::<T>() / k, unconverged_folds }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation<T> {
    pub point: HyperPoint<T>,
    pub accuracy: T,
    pub seq: usize,
}

#[derive(Serialize, Deserialize)]
struct LogRecord {
    #[serde(rename = "log2C")]
    log2_c: f64,
    #[serde(rename = "log2gamma")]
    log2_gamma: f64,
    accuracy: f64,
    seq: usize,
}

/// Budgeted, cached access to a surface. Every call consumes one budget unit, including
/// calls answered from the cache. Requests outside the box are clamped onto it.
pub struct SurfaceEvaluator<'a, T> {
    surface: &'a dyn ResponseSurface<T>,
    bounds: SearchBox<T>,
    budget: usize,
    remaining: usize,
    cache: HashMap<(i64, i64), Probe<T>>,
    log: Vec<Evaluation<T>>,
    pub seed: u64,
    deadline: Option<Instant>,
    unconverged_folds: usize,
}

impl<'a, T: Scalar> SurfaceEvaluator<'a, T> {
    pub fn new(surface: &'a dyn ResponseSurface<T>, budget: usize) -> Self {
        Self {
            surface,
            bounds: SearchBox::standard(),
            budget,
            remaining: budget,
            cache: HashMap::new(),
            log: Vec::new(),
            seed: 0,
            deadline: None,
            unconverged_folds: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn bounds(&self) -> SearchBox<T> {
        self.bounds
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn used(&self) -> usize {
        self.budget - self.remaining
    }

    pub fn unconverged_folds(&self) -> usize {
        self.unconverged_folds
    }

    pub fn eval_log(&self) -> &[Evaluation<T>] {
        &self.log
    }

    pub fn evaluate(&mut self, p: HyperPoint<T>) -> Result<Evaluation<T>> {
        if self.remaining == 0 {
            return Err(Error::BudgetExhausted);
        }
        if self.deadline.is_some_and(|d| Instant::now() > d) {
            return Err(Error::TimeLimit);
        }
        let point = self.bounds.clamp(p);
        let probe = match self.cache.get(&point.key()) {
            Some(hit) => *hit,
            None => {
                let probe = self.surface.probe(point);
                self.unconverged_folds += probe.unconverged_folds;
                self.cache.insert(point.key(), probe);
                probe
            }
        };
        self.remaining -= 1;
        let e = Evaluation { point, accuracy: probe.accuracy, seq: self.log.len() };
        self.log.push(e);
        Ok(e)
    }

    pub fn best_value(&self) -> Option<T> {
        self.log.iter().map(|e| e.accuracy).fold(None, |m, a| Some(m.map_or(a, |m: T| m.max(a))))
    }

    /// All distinct logged points achieving the maximal logged accuracy, in log order.
    pub fn best_so_far(&self) -> Result<Vec<HyperPoint<T>>> {
        let best = self.best_value().ok_or(Error::EmptyLog)?;
        Ok(argmax_points(self.log.iter().filter(|e| e.accuracy == best)))
    }

    /// Writes one JSON object per evaluation: `{log2C, log2gamma, accuracy, seq}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        write_eval_log(&self.log, &mut out)
    }
}

pub(crate) fn argmax_points<'e, T: Scalar + 'e>(evals: impl Iterator<Item = &'e Evaluation<T>>) -> Vec<HyperPoint<T>> {
    let mut seen = std::collections::HashSet::new();
    evals.filter(|e| seen.insert(e.point.key())).map(|e| e.point).collect()
}

pub fn write_eval_log<T: Scalar, W: Write>(log: &[Evaluation<T>], out: &mut W) -> Result<()> {
    for e in log {
        let rec = LogRecord {
            log2_c: e.point.log2_c.as_f64(),
            log2_gamma: e.point.log2_gamma.as_f64(),
            accuracy: e.accuracy.as_f64(),
            seq: e.seq,
        };
        serde_json::to_writer(&mut *out, &rec).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_eval_log(text: &str) -> Result<Vec<Evaluation<f64>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let r: LogRecord = serde_json::from_str(l).map_err(|e| Error::Io(e.to_string()))?;
            Ok(Evaluation { point: HyperPoint::new(r.log2_c, r.log2_gamma), accuracy: r.accuracy, seq: r.seq })
        })
        .collect()
}
