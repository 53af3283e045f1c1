//! Derivative-free trust-region search driven by a fully determined quadratic model.
//!
//! Six interpolation points determine `q(s) = a + g.s + 1/2 s^T H s` in normalized box
//! coordinates. Each step maximizes `q` over the (infinity-norm) trust region intersected
//! with the box, evaluates the maximizer and updates the radius by the usual ratio test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SearchBox, SurfaceEvaluator};

use super::{random_point, Budgeted, OptimizerConfig};

pub const INITIAL_RADIUS: f64 = 0.1;
const MAX_RADIUS: f64 = 0.25;
const MIN_RADIUS: f64 = 1e-3;
const PIVOT_TOL: f64 = 1e-10;

/// `q(s) = a + g.s + 1/2 s^T H s` around `base`, all in unit-square coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticModel<T> {
    pub base: [T; 2],
    pub a: T,
    pub g: [T; 2],
    /// `[h11, h12, h22]`
    pub h: [T; 3],
}

fn solve6<T: Scalar>(mut m: [[T; 7]; 6]) -> Option<[T; 6]> {
    for col in 0..6 {
        let piv = (col..6).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[piv][col].abs() < T::lit(PIVOT_TOL) {
            return None;
        }
        m.swap(col, piv);
        for r in 0..6 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..7 {
                    let v = m[col][k];
                    m[r][k] -= f * v;
                }
            }
        }
    }
    let mut x = [T::zero(); 6];
    for i in 0..6 {
        x[i] = m[i][6] / m[i][i];
    }
    Some(x)
}

impl<T: Scalar> QuadraticModel<T> {
    /// Interpolates six points; offsets are scaled by `radius` so the system is O(1).
    /// Returns `None` when the points do not determine a unique quadratic.
    pub fn fit(base: [T; 2], points: &[[T; 2]], values: &[T], radius: T) -> Option<Self> {
        if points.len() != 6 || values.len() != 6 {
            return None;
        }
        let half = T::lit(0.5);
        let mut m = [[T::zero(); 7]; 6];
        for (row, (p, &v)) in m.iter_mut().zip(points.iter().zip(values)) {
            let s0 = (p[0] - base[0]) / radius;
            let s1 = (p[1] - base[1]) / radius;
            *row = [T::one(), s0, s1, half * s0 * s0, s0 * s1, half * s1 * s1, v];
        }
        let x = solve6(m)?;
        let r2 = radius * radius;
        Some(Self { base, a: x[0], g: [x[1] / radius, x[2] / radius], h: [x[3] / r2, x[4] / r2, x[5] / r2] })
    }

    pub fn value_at_step(&self, s: [T; 2]) -> T {
        let half = T::lit(0.5);
        self.a
            + self.g[0] * s[0]
            + self.g[1] * s[1]
            + half * self.h[0] * s[0] * s[0]
            + self.h[1] * s[0] * s[1]
            + half * self.h[2] * s[1] * s[1]
    }

    pub fn value(&self, x: [T; 2]) -> T {
        self.value_at_step([x[0] - self.base[0], x[1] - self.base[1]])
    }

    /// Exact maximizer over the rectangle `[lo0, hi0] x [lo1, hi1]` (absolute coordinates).
    pub fn maximize_in(&self, lo: [T; 2], hi: [T; 2]) -> [T; 2] {
        let b = self.base;
        let (l, u) = ([lo[0] - b[0], lo[1] - b[1]], [hi[0] - b[0], hi[1] - b[1]]);
        let [h11, h12, h22] = self.h;
        let clamp = |v: T, a: T, z: T| v.max(a).min(z);
        let mut cands: Vec<[T; 2]> = vec![[l[0], l[1]], [l[0], u[1]], [u[0], l[1]], [u[0], u[1]]];
        // edges with s0 fixed: maximize over s1
        if h22 < T::zero() {
            for s0 in [l[0], u[0]] {
                cands.push([s0, clamp(-(self.g[1] + h12 * s0) / h22, l[1], u[1])]);
            }
        }
        if h11 < T::zero() {
            for s1 in [l[1], u[1]] {
                cands.push([clamp(-(self.g[0] + h12 * s1) / h11, l[0], u[0]), s1]);
            }
        }
        let det = h11 * h22 - h12 * h12;
        if h11 < T::zero() && det > T::zero() {
            let s0 = -(h22 * self.g[0] - h12 * self.g[1]) / det;
            let s1 = -(h11 * self.g[1] - h12 * self.g[0]) / det;
            if s0 >= l[0] && s0 <= u[0] && s1 >= l[1] && s1 <= u[1] {
                cands.push([s0, s1]);
            }
        }
        let best = cands
            .into_iter()
            .fold(None, |acc: Option<([T; 2], T)>, s| {
                let v = self.value_at_step(s);
                match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((s, v)),
                }
            })
            .unwrap()
            .0;
        [b[0] + best[0], b[1] + best[1]]
    }
}

/// Trust-region box `[x - r, x + r]^2` clipped to the unit square.
pub fn trust_rect<T: Scalar>(x: [T; 2], radius: T) -> ([T; 2], [T; 2]) {
    let lo = [(x[0] - radius).max(T::zero()), (x[1] - radius).max(T::zero())];
    let hi = [(x[0] + radius).min(T::one()), (x[1] + radius).min(T::one())];
    (lo, hi)
}

/// Six-point pattern around `x`: the base, two offsets per axis (stepping inward at the
/// boundary) and one diagonal point. Always determines a unique quadratic.
pub fn interpolation_pattern<T: Scalar>(x: [T; 2], radius: T) -> [[T; 2]; 6] {
    let offsets = |v: T| {
        let first = if v + radius <= T::one() { radius } else { -radius };
        let second = if first > T::zero() && v - radius >= T::zero() {
            -radius
        } else if first < T::zero() && v + radius <= T::one() {
            radius
        } else {
            first * T::lit(2.0)
        };
        (first, second)
    };
    let (a1, a2) = offsets(x[0]);
    let (b1, b2) = offsets(x[1]);
    [x, [x[0] + a1, x[1]], [x[0] + a2, x[1]], [x[0], x[1] + b1], [x[0], x[1] + b2], [x[0] + a1, x[1] + b1]]
}

struct Interp<T> {
    pts: Vec<[T; 2]>,
    vals: Vec<T>,
}

impl<T: Scalar> Interp<T> {
    fn best(&self) -> usize {
        (0..self.pts.len()).fold(0, |b, i| if self.vals[i] > self.vals[b] { i } else { b })
    }
}

enum Phase {
    Converged,
    OutOfBudget,
}

fn to_box<T: Scalar>(bx: &SearchBox<T>, u: [T; 2]) -> HyperPoint<T> {
    bx.from_unit(u[0], u[1])
}

/// Evaluates the pattern around `x` (reusing `known` for the base if given).
fn seed_pattern<T: Scalar>(
    b: &mut Budgeted<'_, '_, T>,
    x: [T; 2],
    known: Option<T>,
    radius: T,
) -> Result<Option<Interp<T>>> {
    let bx = b.bounds();
    let pattern = interpolation_pattern(x, radius);
    let mut set = Interp { pts: Vec::with_capacity(6), vals: Vec::with_capacity(6) };
    for (k, p) in pattern.iter().enumerate() {
        let v = match (k, known) {
            (0, Some(v)) => v,
            _ => match b.eval(to_box(&bx, *p))? {
                Some(e) => e.accuracy,
                None => return Ok(None),
            },
        };
        set.pts.push(*p);
        set.vals.push(v);
    }
    Ok(Some(set))
}

fn descend<T: Scalar>(b: &mut Budgeted<'_, '_, T>, start: [T; 2]) -> Result<Phase> {
    let bx = b.bounds();
    let mut radius = T::lit(INITIAL_RADIUS);
    let mut set = match seed_pattern(b, start, None, radius)? {
        Some(s) => s,
        None => return Ok(Phase::OutOfBudget),
    };
    loop {
        if radius < T::lit(MIN_RADIUS) {
            return Ok(Phase::Converged);
        }
        let ib = set.best();
        let base = set.pts[ib];
        let fb = set.vals[ib];
        let model = match QuadraticModel::fit(base, &set.pts, &set.vals, radius) {
            Some(m) => m,
            None => {
                set = match seed_pattern(b, base, Some(fb), radius)? {
                    Some(s) => s,
                    None => return Ok(Phase::OutOfBudget),
                };
                continue;
            }
        };
        let (lo, hi) = trust_rect(base, radius);
        let x_new = model.maximize_in(lo, hi);
        let predicted = model.value(x_new) - model.value(base);
        let step = (x_new[0] - base[0]).abs().max((x_new[1] - base[1]).abs());
        if !(predicted > T::lit(1e-14)) || step < T::lit(1e-9) {
            radius *= T::lit(0.5);
            if radius < T::lit(MIN_RADIUS) {
                return Ok(Phase::Converged);
            }
            set = match seed_pattern(b, base, Some(fb), radius)? {
                Some(s) => s,
                None => return Ok(Phase::OutOfBudget),
            };
            continue;
        }
        let f_new = match b.eval(to_box(&bx, x_new))? {
            Some(e) => e.accuracy,
            None => return Ok(Phase::OutOfBudget),
        };
        let ratio = (f_new - fb) / predicted;
        if ratio >= T::lit(0.75) && step >= radius * T::lit(0.99) {
            radius = (radius * T::lit(2.0)).min(T::lit(MAX_RADIUS));
        } else if ratio < T::lit(0.25) {
            radius *= T::lit(0.5);
        }

        // replace the point farthest from the (possibly new) best, keeping the set poised
        let anchor = if f_new > fb { x_new } else { base };
        let dist = |p: &[T; 2]| (p[0] - anchor[0]).powi(2) + (p[1] - anchor[1]).powi(2);
        let mut order: Vec<usize> = (0..6).filter(|&i| i != ib || f_new > fb).collect();
        order.sort_by(|&i, &j| dist(&set.pts[j]).partial_cmp(&dist(&set.pts[i])).unwrap());
        let scale = radius.max(T::lit(MIN_RADIUS));
        let replaced = order.into_iter().find_map(|i| {
            let mut pts = set.pts.clone();
            let mut vals = set.vals.clone();
            pts[i] = x_new;
            vals[i] = f_new;
            QuadraticModel::fit(anchor, &pts, &vals, scale).map(|_| Interp { pts, vals })
        });
        set = match replaced {
            Some(s) => s,
            None => {
                let fa = if f_new > fb { f_new } else { fb };
                match seed_pattern(b, anchor, Some(fa), radius.max(T::lit(MIN_RADIUS)))? {
                    Some(s) => s,
                    None => return Ok(Phase::OutOfBudget),
                }
            }
        };
    }
}

/// Quadratic-interpolation trust region from the box center with uniform random restarts.
pub fn quad_trust_region<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, cfg: &OptimizerConfig) -> Result<TieSet<T>> {
    if cfg.budget < 6 {
        return Err(Error::InvalidParameter("bobyqa needs a budget of at least 6".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bx = ev.bounds();
    let mut b = Budgeted::new(ev, cfg.budget);
    let half = T::lit(0.5);
    let mut start = [half, half];
    while let Phase::Converged = descend(&mut b, start)? {
        if b.left() == 0 {
            break;
        }
        let (u, v) = bx.to_unit(&random_point(&mut rng, &bx));
        start = [u, v];
    }
    b.finish()
}
