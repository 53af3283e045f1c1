//! Hyperparameter searchers and the registry mapping identity strings to them.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{
    argmax_points, CvSurface, Evaluation, HyperPoint, KernelKind, ResponseSurface, SearchBox, SurfaceEvaluator,
};

pub mod annealing;
pub mod cma;
pub mod gp;
pub mod gridlike;
pub mod nelder_mead;
pub mod pso;
pub mod quad_trust_region;
pub mod svm_specific;
pub mod tpe;
pub mod ud;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub seed: u64,
}

/// Evaluator view capped at a search's own budget. Running out of budget ends the search
/// quietly (`Ok(None)`); a time limit still propagates as an error.
pub struct Budgeted<'b, 'a, T> {
    ev: &'b mut SurfaceEvaluator<'a, T>,
    left: usize,
    start: usize,
}

impl<'b, 'a, T: Scalar> Budgeted<'b, 'a, T> {
    pub fn new(ev: &'b mut SurfaceEvaluator<'a, T>, budget: usize) -> Self {
        let left = budget.min(ev.remaining());
        let start = ev.eval_log().len();
        Self { ev, left, start }
    }

    pub fn eval(&mut self, p: HyperPoint<T>) -> Result<Option<Evaluation<T>>> {
        if self.left == 0 {
            return Ok(None);
        }
        match self.ev.evaluate(p) {
            Ok(e) => {
                self.left -= 1;
                Ok(Some(e))
            }
            Err(Error::BudgetExhausted) => {
                self.left = 0;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn bounds(&self) -> SearchBox<T> {
        self.ev.bounds()
    }

    /// Evaluations made through this view so far.
    pub fn log(&self) -> &[Evaluation<T>] {
        &self.ev.eval_log()[self.start..]
    }

    /// Argmax set over the evaluations made through this view.
    pub fn finish(self) -> Result<TieSet<T>> {
        let log = &self.ev.eval_log()[self.start..];
        let best = log.iter().map(|e| e.accuracy).reduce(T::max).ok_or(Error::EmptyLog)?;
        TieSet::new(argmax_points(log.iter().filter(|e| e.accuracy == best)))
    }
}

/// Uniform point in the box.
pub fn random_point<T: Scalar, R: Rng>(rng: &mut R, bx: &SearchBox<T>) -> HyperPoint<T> {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    bx.from_unit(T::lit(u), T::lit(v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Grid,
    Ud,
    Rand,
    Normrand,
    GridHier,
    UdHier,
    Nelder,
    Bobyqa,
    Sa,
    Pso,
    Cma,
    Bogp,
    Tpe,
    Skl,
    Sigest,
    Dbtc,
    Sdbtc,
    Asymp,
}

impl Family {
    pub const ALL: [Family; 18] = [
        Family::Grid,
        Family::Ud,
        Family::Rand,
        Family::Normrand,
        Family::GridHier,
        Family::UdHier,
        Family::Nelder,
        Family::Bobyqa,
        Family::Sa,
        Family::Pso,
        Family::Cma,
        Family::Bogp,
        Family::Tpe,
        Family::Skl,
        Family::Sigest,
        Family::Dbtc,
        Family::Sdbtc,
        Family::Asymp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Grid => "grid",
            Family::Ud => "ud",
            Family::Rand => "rand",
            Family::Normrand => "normrand",
            Family::GridHier => "gridhier",
            Family::UdHier => "udhier",
            Family::Nelder => "nelder",
            Family::Bobyqa => "bobyqa",
            Family::Sa => "sa",
            Family::Pso => "pso",
            Family::Cma => "cma",
            Family::Bogp => "bogp",
            Family::Tpe => "tpe",
            Family::Skl => "skl",
            Family::Sigest => "sigest",
            Family::Dbtc => "dbtc",
            Family::Sdbtc => "sdbtc",
            Family::Asymp => "asymp",
        }
    }

    /// Budgets with a registered identity string.
    pub fn budgets(self) -> &'static [usize] {
        match self {
            Family::Grid | Family::Ud | Family::Rand | Family::Normrand => &[25, 100, 400],
            Family::GridHier | Family::UdHier => &[50, 200],
            Family::Nelder | Family::Bobyqa | Family::Sa | Family::Pso => &[25, 100, 400],
            Family::Cma | Family::Bogp | Family::Tpe => &[100, 400],
            Family::Skl => &[1, 5, 10, 20],
            Family::Sigest | Family::Dbtc | Family::Sdbtc => &[5, 10, 20],
            Family::Asymp => &[10, 20, 40],
        }
    }
}

/// A searcher family together with its evaluation budget, e.g. `grid100` or `asymp20`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Algorithm {
    family: Family,
    budget: usize,
}

impl Algorithm {
    pub fn new(family: Family, budget: usize) -> Result<Self> {
        if family.budgets().contains(&budget) {
            Ok(Self { family, budget })
        } else {
            Err(Error::UnknownAlgorithm(format!("{}{budget}", family.name())))
        }
    }

    pub fn family(self) -> Family {
        self.family
    }

    /// Declared evaluation budget N.
    pub fn budget(self) -> usize {
        self.budget
    }

    /// Every registered identity, in registry order.
    pub fn registry() -> Vec<Algorithm> {
        Family::ALL.iter().flat_map(|&f| f.budgets().iter().map(move |&b| Algorithm { family: f, budget: b })).collect()
    }

    pub fn registry_listing() -> String {
        Self::registry().iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
    }

    /// Probe sets fixed before any evaluation (flat or hierarchical).
    pub fn is_grid_like(self) -> bool {
        matches!(
            self.family,
            Family::Grid | Family::Ud | Family::Rand | Family::Normrand | Family::GridHier | Family::UdHier
        )
    }

    /// Searchers that fix gamma first and then grid-search C.
    pub fn is_fixed_gamma(self) -> bool {
        matches!(self.family, Family::Skl | Family::Sigest | Family::Dbtc | Family::Sdbtc)
    }

    /// Whether the searcher needs the training rows, not just the response surface.
    pub fn needs_data(self) -> bool {
        self.is_fixed_gamma() || self.family == Family::Asymp
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family.name(), self.budget)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(|| Error::UnknownAlgorithm(s.into()))?;
        let (name, digits) = s.split_at(split);
        let family =
            Family::ALL.iter().copied().find(|f| f.name() == name).ok_or_else(|| Error::UnknownAlgorithm(s.into()))?;
        let budget: usize = digits.parse().map_err(|_| Error::UnknownAlgorithm(s.into()))?;
        Algorithm::new(family, budget).map_err(|_| Error::UnknownAlgorithm(s.into()))
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> Self {
        a.to_string()
    }
}

/// Outcome of one search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchRun<T> {
    pub tie_set: TieSet<T>,
    /// Response-surface value shared by every tie-set member.
    pub best_value: T,
    /// RBF evaluations, in order.
    pub eval_log: Vec<Evaluation<T>>,
    /// Linear-kernel evaluations (asymp stage 1 only).
    pub linear_log: Vec<Evaluation<T>>,
    /// Total evaluations consumed, both kernels included.
    pub evaluations: usize,
    pub unconverged_folds: usize,
    /// Gamma fixed by a fixed-gamma searcher, after clipping to the box.
    pub gamma: Option<T>,
}

fn run_surface_algorithm<T: Scalar>(alg: Algorithm, ev: &mut SurfaceEvaluator<'_, T>, seed: u64) -> Result<TieSet<T>> {
    use gridlike::{make_plan, run_flat, run_hier, Generator};
    let n = alg.budget;
    let cfg = OptimizerConfig { budget: n, seed };
    match alg.family {
        Family::Grid => run_flat(ev, &make_plan(Generator::Grid, n, seed)?),
        Family::Ud => run_flat(ev, &make_plan(Generator::Ud, n, seed)?),
        Family::Rand => run_flat(ev, &make_plan(Generator::Rand, n, seed)?),
        Family::Normrand => run_flat(ev, &make_plan(Generator::Normrand, n, seed)?),
        Family::GridHier => run_hier(ev, Generator::Grid, n / 2),
        Family::UdHier => run_hier(ev, Generator::Ud, n / 2),
        Family::Nelder => nelder_mead::nelder_mead(ev, &cfg),
        Family::Bobyqa => quad_trust_region::quad_trust_region(ev, &cfg),
        Family::Sa => annealing::simulated_annealing(ev, &cfg),
        Family::Pso => pso::particle_swarm(ev, &cfg),
        Family::Cma => cma::cma_es(ev, &cfg),
        Family::Bogp => gp::gp_bayes_opt(ev, &cfg),
        Family::Tpe => tpe::tpe(ev, &cfg),
        _ => Err(Error::InvalidParameter(format!("{alg} needs training data"))),
    }
}

fn finish_run<T: Scalar>(
    tie_set: TieSet<T>,
    ev: &SurfaceEvaluator<'_, T>,
    linear: Option<&SurfaceEvaluator<'_, T>>,
    gamma: Option<T>,
) -> Result<SearchRun<T>> {
    let log = ev.eval_log().to_vec();
    let key = tie_set.points()[0].key();
    let best_value = log.iter().find(|e| e.point.key() == key).ok_or(Error::EmptyLog)?.accuracy;
    let linear_log = linear.map(|l| l.eval_log().to_vec()).unwrap_or_default();
    Ok(SearchRun {
        tie_set,
        best_value,
        evaluations: log.len() + linear_log.len(),
        unconverged_folds: ev.unconverged_folds() + linear.map_or(0, |l| l.unconverged_folds()),
        eval_log: log,
        linear_log,
        gamma,
    })
}

/// Runs a surface-only searcher (anything but the fixed-gamma and asymp families) on an
/// arbitrary response surface.
pub fn run_on_surface<T: Scalar>(alg: Algorithm, surface: &dyn ResponseSurface<T>, seed: u64) -> Result<SearchRun<T>> {
    let mut ev = SurfaceEvaluator::new(surface, alg.budget).with_seed(seed);
    let ties = run_surface_algorithm(alg, &mut ev, seed)?;
    finish_run(ties, &ev, None, None)
}

/// Runs any registered searcher on `data` with the inner fold assignment `fold_ids`.
pub fn run_on_data<T: Scalar>(
    alg: Algorithm,
    data: &Dataset<T>,
    fold_ids: &[u8],
    seed: u64,
    deadline: Option<Instant>,
) -> Result<SearchRun<T>> {
    use svm_specific::*;
    let rbf = CvSurface::new(data, fold_ids, KernelKind::Rbf)?;
    let n = alg.budget;
    match alg.family {
        Family::Asymp => {
            let lin = CvSurface::new(data, fold_ids, KernelKind::Linear)?;
            let half = n / 2;
            let mut ev_lin = SurfaceEvaluator::new(&lin, half).with_seed(seed).with_deadline(deadline);
            let mut ev = SurfaceEvaluator::new(&rbf, half).with_seed(seed).with_deadline(deadline);
            let out = asymp_search(&mut ev_lin, &mut ev, half)?;
            finish_run(out.tie_set, &ev, Some(&ev_lin), None)
        }
        f if alg.is_fixed_gamma() => {
            let est = match f {
                Family::Skl => skl_gamma(data.dim())?,
                Family::Sigest => sigest_gamma(data, seed)?,
                Family::Dbtc => dbtc_gamma(data, n, T::one(), seed)?,
                _ => dbtc_gamma(data, n, T::lit(0.5), seed)?,
            };
            let mut ev = SurfaceEvaluator::new(&rbf, n).with_seed(seed).with_deadline(deadline);
            let log2_gamma = clip_log2_gamma(est.gamma, &ev.bounds());
            let ties = fixed_gamma_c_search(&mut ev, log2_gamma, n)?;
            finish_run(ties, &ev, None, Some(log2_gamma.exp2()))
        }
        _ => {
            let mut ev = SurfaceEvaluator::new(&rbf, n).with_seed(seed).with_deadline(deadline);
            let ties = run_surface_algorithm(alg, &mut ev, seed)?;
            finish_run(ties, &ev, None, None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::ConcaveSurrogate;

    #[test]
    fn registry_round_trips_identity_strings() {
        let all = Algorithm::registry();
        assert_eq!(all.len(), 12 + 4 + 12 + 6 + 4 + 9 + 3);
        for a in all {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!(matches!("grid26".parse::<Algorithm>(), Err(Error::UnknownAlgorithm(_))));
        assert!(matches!("skl2".parse::<Algorithm>(), Err(Error::UnknownAlgorithm(_))));
        assert!(matches!("foo100".parse::<Algorithm>(), Err(Error::UnknownAlgorithm(_))));
        assert!(matches!("grid".parse::<Algorithm>(), Err(Error::UnknownAlgorithm(_))));
    }

    #[test]
    fn serde_uses_identity_string() {
        let a: Algorithm = "udhier200".parse().unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "\"udhier200\"");
        assert_eq!(serde_json::from_str::<Algorithm>(&json).unwrap(), a);
    }

    #[test]
    fn budgeted_view_stops_quietly() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 3);
        let mut b = Budgeted::new(&mut ev, 5);
        assert_eq!(b.left(), 3);
        for _ in 0..3 {
            assert!(b.eval(HyperPoint::new(0.0, 0.0)).unwrap().is_some());
        }
        assert!(b.eval(HyperPoint::new(0.0, 0.0)).unwrap().is_none());
        assert_eq!(b.finish().unwrap().len(), 1);
    }

    #[test]
    fn data_searchers_rejected_on_bare_surface() {
        let s = ConcaveSurrogate::default();
        let a: Algorithm = "sigest5".parse().unwrap();
        assert!(run_on_surface::<f64>(a, &s, 0).is_err());
    }
}
