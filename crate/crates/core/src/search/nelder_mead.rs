use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SearchBox, SurfaceEvaluator};

use super::{random_point, Budgeted, OptimizerConfig};

/// Simplex edge as a fraction of each box side.
pub const INITIAL_SIMPLEX_FRACTION: f64 = 0.1;
const X_TOL: f64 = 1e-5;
const F_TOL: f64 = 1e-12;

#[derive(Clone, Copy)]
struct Vertex<T> {
    p: HyperPoint<T>,
    f: T,
}

/// Axis-aligned start simplex at `x0`, stepping inward when a step would leave the box.
pub fn initial_simplex<T: Scalar>(x0: HyperPoint<T>, bx: &SearchBox<T>) -> [HyperPoint<T>; 3] {
    let frac = T::lit(INITIAL_SIMPLEX_FRACTION);
    let (dc, dg) = (bx.c_width() * frac, bx.gamma_width() * frac);
    let c = if x0.log2_c + dc <= bx.c_max { x0.log2_c + dc } else { x0.log2_c - dc };
    let g = if x0.log2_gamma + dg <= bx.gamma_max { x0.log2_gamma + dg } else { x0.log2_gamma - dg };
    [x0, HyperPoint::new(c, x0.log2_gamma), HyperPoint::new(x0.log2_c, g)]
}

fn lerp<T: Scalar>(a: HyperPoint<T>, b: HyperPoint<T>, t: T) -> HyperPoint<T> {
    HyperPoint::new(a.log2_c + t * (b.log2_c - a.log2_c), a.log2_gamma + t * (b.log2_gamma - a.log2_gamma))
}

enum Outcome {
    Converged,
    OutOfBudget,
}

/// One bounded Nelder-Mead descent (maximizing) from `x0` until convergence or budget end.
fn descend<T: Scalar>(b: &mut Budgeted<'_, '_, T>, x0: HyperPoint<T>) -> Result<Outcome> {
    let bx = b.bounds();
    let mut simplex = Vec::with_capacity(3);
    for p in initial_simplex(x0, &bx) {
        match b.eval(p)? {
            Some(e) => simplex.push(Vertex { p: e.point, f: e.accuracy }),
            None => return Ok(Outcome::OutOfBudget),
        }
    }
    let (one, two, half) = (T::one(), T::lit(2.0), T::lit(0.5));
    macro_rules! eval {
        ($p:expr) => {
            match b.eval(bx.clamp($p))? {
                Some(e) => Vertex { p: e.point, f: e.accuracy },
                None => return Ok(Outcome::OutOfBudget),
            }
        };
    }
    loop {
        simplex.sort_by(|a, b| b.f.partial_cmp(&a.f).unwrap());
        let (best, mid, worst) = (simplex[0], simplex[1], simplex[2]);
        let diameter = best.p.distance(&mid.p).max(best.p.distance(&worst.p));
        if diameter < T::lit(X_TOL) || (best.f - worst.f).abs() <= T::lit(F_TOL) {
            return Ok(Outcome::Converged);
        }
        let centroid = lerp(best.p, mid.p, half);
        // reflection: centroid + (centroid - worst)
        let r = eval!(lerp(centroid, worst.p, -one));
        if r.f > best.f {
            let e = eval!(lerp(centroid, worst.p, -two));
            simplex[2] = if e.f > r.f { e } else { r };
        } else if r.f > mid.f {
            simplex[2] = r;
        } else {
            let contracted = if r.f > worst.f {
                let oc = eval!(lerp(centroid, r.p, half));
                (oc.f >= r.f).then_some(oc)
            } else {
                let ic = eval!(lerp(centroid, worst.p, half));
                (ic.f > worst.f).then_some(ic)
            };
            match contracted {
                Some(v) => simplex[2] = v,
                None => {
                    for k in 1..3 {
                        let shrunk = eval!(lerp(best.p, simplex[k].p, half));
                        simplex[k] = shrunk;
                    }
                }
            }
        }
    }
}

/// Bounded Nelder-Mead from the box center, restarted from uniform random points whenever
/// the simplex converges before the budget is spent.
pub fn nelder_mead<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, cfg: &OptimizerConfig) -> Result<TieSet<T>> {
    if cfg.budget < 3 {
        return Err(Error::InvalidParameter("nelder needs a budget of at least 3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bx = ev.bounds();
    let mut b = Budgeted::new(ev, cfg.budget);
    let mut start = bx.center();
    while let Outcome::Converged = descend(&mut b, start)? {
        if b.left() == 0 {
            break;
        }
        start = random_point(&mut rng, &bx);
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{ConcaveSurrogate, FnSurface};

    #[test]
    fn minimal_budget_returns_best_initial_vertex() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 3);
        let ties = nelder_mead(&mut ev, &OptimizerConfig { budget: 3, seed: 1 }).unwrap();
        assert_eq!(ev.used(), 3);
        // simplex (5,-6), (7,-6), (5,-4.2): (5,-4.2) is nearest to (5,-5)
        assert_eq!(ties.points(), &[HyperPoint::new(5.0, -6.0 + 1.8)]);
    }

    #[test]
    fn flat_surface_spends_whole_budget_through_restarts() {
        let s = FnSurface(|_: HyperPoint<f64>| 0.5);
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 25);
        nelder_mead(&mut ev, &OptimizerConfig { budget: 25, seed: 3 }).unwrap();
        assert_eq!(ev.used(), 25);
    }

    #[test]
    fn converges_on_concave_surrogate() {
        let s = ConcaveSurrogate::default();
        let mut ev = SurfaceEvaluator::<f64>::new(&s, 100);
        let ties = nelder_mead(&mut ev, &OptimizerConfig { budget: 100, seed: 9 }).unwrap();
        assert!(ties.points()[0].distance(&ConcaveSurrogate::optimum()) < 0.5);
        assert!(ev.used() <= 100);
    }
}
