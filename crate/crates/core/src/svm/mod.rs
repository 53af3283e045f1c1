//! Soft-margin kernel SVM trained through its dual.

mod kernel;
mod smo;

pub use kernel::{dot, kernel_eval, squared_distance, KernelSpec};
pub use smo::{default_max_pair_updates, dual_objective, solve_dual, DualSolution, GramMatrix, FULL_CACHE_LIMIT};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_KKT_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    pub c: T,
    pub kkt_tolerance: T,
    /// Cap on pair updates; `None` uses [`default_max_pair_updates`].
    pub max_pair_updates: Option<usize>,
}

impl<T: Scalar> TrainConfig<T> {
    pub fn new(c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("C must be in (0, inf), got {c}")));
        }
        Ok(Self { c, kkt_tolerance: T::lit(DEFAULT_KKT_TOLERANCE), max_pair_updates: None })
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.kkt_tolerance = tol;
        self
    }
}

/// Maps class labels {0, 1} to {-1, +1}.
pub fn signed_labels<T: Scalar>(labels: &[u8]) -> Vec<T> {
    labels.iter().map(|&l| if l == 1 { T::one() } else { -T::one() }).collect()
}

/// A trained model; only support vectors (alpha > 0) are retained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel<T> {
    pub support_indices: Vec<usize>,
    /// `y_i * alpha_i` for each support vector.
    pub dual_coefs: Vec<T>,
    pub bias: T,
    pub kernel: KernelSpec<T>,
    support_vectors: Vec<T>,
    dim: usize,
    pub converged: bool,
}

impl<T: Scalar> SvmModel<T> {
    pub fn from_dual(rows: &Dataset<T>, sol: &DualSolution<T>, kernel: KernelSpec<T>) -> Self {
        let y: Vec<T> = signed_labels(rows.labels());
        let mut support_indices = Vec::new();
        let mut dual_coefs = Vec::new();
        let mut support_vectors = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > T::zero() {
                support_indices.push(i);
                dual_coefs.push(y[i] * a);
                support_vectors.extend_from_slice(rows.row(i));
            }
        }
        Self {
            support_indices,
            dual_coefs,
            bias: sol.bias,
            kernel,
            support_vectors,
            dim: rows.dim(),
            converged: sol.converged,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_vector(&self, k: usize) -> &[T] {
        &self.support_vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn decision_value(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let s: T = self
            .dual_coefs
            .iter()
            .enumerate()
            .map(|(k, &coef)| coef * self.kernel.eval_unchecked(self.support_vector(k), x))
            .sum();
        Ok(s + self.bias)
    }

    /// Class 1 when the decision value is strictly positive, class 0 otherwise.
    pub fn predict(&self, x: &[T]) -> Result<u8> {
        Ok(u8::from(self.decision_value(x)? > T::zero()))
    }
}

pub fn train<T: Scalar>(rows: &Dataset<T>, cfg: &TrainConfig<T>, kernel: KernelSpec<T>) -> Result<SvmModel<T>> {
    let counts = rows.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let gram = GramMatrix::new(rows.features(), rows.dim(), kernel);
    let y = signed_labels(rows.labels());
    let cap = cfg.max_pair_updates.unwrap_or_else(|| default_max_pair_updates(rows.len()));
    let sol = solve_dual(&y, &gram, cfg.c, cfg.kkt_tolerance, cap);
    Ok(SvmModel::from_dual(rows, &sol, kernel))
}

pub fn predict<T: Scalar>(model: &SvmModel<T>, x: &[T]) -> Result<u8> {
    model.predict(x)
}

/// Fraction of correctly classified rows.
pub fn accuracy<T: Scalar>(model: &SvmModel<T>, test: &Dataset<T>) -> Result<T> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut correct = 0usize;
    for i in 0..test.len() {
        if model.predict(test.row(i))? == test.label(i) {
            correct += 1;
        }
    }
    Ok(T::from_usize(correct).unwrap() / T::from_usize(test.len()).unwrap())
}
