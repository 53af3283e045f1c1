//! Two-variable decomposition solver for the soft-margin SVM dual
//!
//! ```text
//! min  1/2 sum_ij y_i a_i y_j a_j K(x_i, x_j) - sum_i a_i
//! s.t. sum_i y_i a_i = 0,  0 <= a_i <= C
//! ```
//!
//! The working pair is the maximal violating pair: `i` maximizes `-y_t G_t` over the
//! indices that may move up, `j` minimizes it over those that may move down, which is
//! the pair with the largest error difference `E_j - E_i`.

use crate::scalar::Scalar;

use super::kernel::KernelSpec;

/// Rows above this count are computed on demand instead of caching the full matrix.
pub const FULL_CACHE_LIMIT: usize = 5000;
pub const MAX_PAIR_UPDATES_CAP: usize = 1_000_000;

/// Source of kernel values for the solver.
#[derive(Clone, Debug)]
pub enum GramMatrix<T> {
    Full { n: usize, values: Vec<T> },
    OnDemand { rows: Vec<T>, d: usize, kernel: KernelSpec<T> },
}

impl<T: Scalar> GramMatrix<T> {
    /// Builds the kernel source for row-major `rows` with `d` columns.
    pub fn new(rows: &[T], d: usize, kernel: KernelSpec<T>) -> Self {
        let n = rows.len() / d;
        if n > FULL_CACHE_LIMIT {
            return GramMatrix::OnDemand { rows: rows.to_vec(), d, kernel };
        }
        let mut values = vec![T::zero(); n * n];
        for i in 0..n {
            let xi = &rows[i * d..(i + 1) * d];
            for j in i..n {
                let v = kernel.eval_unchecked(xi, &rows[j * d..(j + 1) * d]);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        GramMatrix::Full { n, values }
    }

    /// Wraps a precomputed, symmetric, row-major `n x n` matrix.
    pub fn from_values(n: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), n * n, "gram matrix must be n x n");
        GramMatrix::Full { n, values }
    }

    pub fn len(&self) -> usize {
        match self {
            GramMatrix::Full { n, .. } => *n,
            GramMatrix::OnDemand { rows, d, .. } => rows.len() / d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match self {
            GramMatrix::Full { n, values } => values[i * n + j],
            GramMatrix::OnDemand { rows, d, kernel } => {
                kernel.eval_unchecked(&rows[i * d..(i + 1) * d], &rows[j * d..(j + 1) * d])
            }
        }
    }

    fn fill_row(&self, i: usize, out: &mut [T]) {
        match self {
            GramMatrix::Full { n, values } => out.copy_from_slice(&values[i * n..(i + 1) * n]),
            GramMatrix::OnDemand { .. } => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = self.get(i, j);
                }
            }
        }
    }
}

/// Result of a dual solve: one multiplier per training row.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution<T> {
    pub alpha: Vec<T>,
    /// The `b` of the decision function `sum_i y_i a_i K(x_i, x) + b`.
    pub bias: T,
    pub converged: bool,
    pub pair_updates: usize,
}

/// Default cap on pair updates: `10 n` passes of `n` updates each, at most 10^6.
pub fn default_max_pair_updates(n: usize) -> usize {
    (10 * n).saturating_mul(n).clamp(1, MAX_PAIR_UPDATES_CAP)
}

/// Dual objective `1/2 a^T Q a - sum a` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective<T: Scalar>(alpha: &[T], y: &[T], gram: &GramMatrix<T>) -> T {
    let n = alpha.len();
    let mut quad = T::zero();
    for i in 0..n {
        if alpha[i] == T::zero() {
            continue;
        }
        for j in 0..n {
            quad += y[i] * alpha[i] * y[j] * alpha[j] * gram.get(i, j);
        }
    }
    T::lit(0.5) * quad - alpha.iter().copied().sum::<T>()
}

/// Solves the dual for labels `y` in {-1, +1}. Both signs must be present.
pub fn solve_dual<T: Scalar>(y: &[T], gram: &GramMatrix<T>, c: T, tol: T, max_updates: usize) -> DualSolution<T> {
    let n = y.len();
    debug_assert_eq!(gram.len(), n);
    let tau = T::lit(1e-12);
    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let diag: Vec<T> = (0..n).map(|i| gram.get(i, i)).collect();
    let mut row_i = vec![T::zero(); n];
    let mut row_j = vec![T::zero(); n];
    let pos = |t: usize| y[t] > T::zero();

    let mut updates = 0;
    let mut converged = false;
    while updates < max_updates {
        let mut g_max = T::neg_infinity();
        let mut g_min = T::infinity();
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = if pos(t) { alpha[t] < c } else { alpha[t] > T::zero() };
            let low = if pos(t) { alpha[t] > T::zero() } else { alpha[t] < c };
            if up && v > g_max {
                g_max = v;
                i = t;
            }
            if low && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < tol {
            converged = true;
            break;
        }

        gram.fill_row(i, &mut row_i);
        gram.fill_row(j, &mut row_j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * row_i[j];
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] + T::lit(2.0) * q_ij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - T::lit(2.0) * q_ij;
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * d_i + y[j] * row_j[t] * d_j);
        }
        updates += 1;
    }

    let bias = compute_bias(y, &alpha, &grad, c);
    DualSolution { alpha, bias, converged, pair_updates: updates }
}

fn compute_bias<T: Scalar>(y: &[T], alpha: &[T], grad: &[T], c: T) -> T {
    let mut upper = T::infinity();
    let mut lower = T::neg_infinity();
    let mut free_sum = T::zero();
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        let positive = y[t] > T::zero();
        if alpha[t] >= c {
            if positive {
                lower = lower.max(yg);
            } else {
                upper = upper.min(yg);
            }
        } else if alpha[t] <= T::zero() {
            if positive {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / T::from_usize(free).unwrap()
    } else if upper.is_finite() && lower.is_finite() {
        (upper + lower) * T::lit(0.5)
    } else if upper.is_finite() {
        upper
    } else {
        lower
    };
    -rho
}
