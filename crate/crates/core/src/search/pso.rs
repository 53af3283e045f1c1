//! Global-best particle swarm with constriction coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::selection::TieSet;
use crate::surface::{HyperPoint, SearchBox, SurfaceEvaluator};

use super::{random_point, Budgeted, OptimizerConfig};

pub const INERTIA: f64 = 0.7298;
pub const COGNITIVE: f64 = 1.49618;
pub const SOCIAL: f64 = 1.49618;

/// 10 particles, or 5 when the budget is below 50.
pub fn swarm_size(budget: usize) -> usize {
    if budget >= 50 {
        10
    } else {
        5
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle<T> {
    pub x: HyperPoint<T>,
    pub v: [T; 2],
    pub best: HyperPoint<T>,
    pub best_f: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Swarm<T> {
    pub particles: Vec<Particle<T>>,
    pub global: HyperPoint<T>,
    pub global_f: T,
    pub bounds: SearchBox<T>,
}

impl<T: Scalar> Swarm<T> {
    /// Velocity and position update; positions leaving the box are clamped and the
    /// offending velocity component is zeroed.
    pub fn advance<R: Rng>(&mut self, rng: &mut R) {
        let (w, c1, c2) = (T::lit(INERTIA), T::lit(COGNITIVE), T::lit(SOCIAL));
        let bx = self.bounds;
        let g = [self.global.log2_c, self.global.log2_gamma];
        for p in &mut self.particles {
            let x = [p.x.log2_c, p.x.log2_gamma];
            let pb = [p.best.log2_c, p.best.log2_gamma];
            let lo = [bx.c_min, bx.gamma_min];
            let hi = [bx.c_max, bx.gamma_max];
            let mut nx = [T::zero(); 2];
            for k in 0..2 {
                let r1 = T::lit(rng.random::<f64>());
                let r2 = T::lit(rng.random::<f64>());
                p.v[k] = w * p.v[k] + c1 * r1 * (pb[k] - x[k]) + c2 * r2 * (g[k] - x[k]);
                nx[k] = x[k] + p.v[k];
                if nx[k] < lo[k] || nx[k] > hi[k] {
                    nx[k] = nx[k].max(lo[k]).min(hi[k]);
                    p.v[k] = T::zero();
                }
            }
            p.x = HyperPoint::new(nx[0], nx[1]);
        }
    }

    /// Records the values of the current positions, in particle order.
    pub fn absorb(&mut self, values: &[T]) {
        for (p, &f) in self.particles.iter_mut().zip(values) {
            if f > p.best_f {
                p.best = p.x;
                p.best_f = f;
            }
            if f > self.global_f {
                self.global = p.x;
                self.global_f = f;
            }
        }
    }
}

pub fn particle_swarm<T: Scalar>(ev: &mut SurfaceEvaluator<'_, T>, cfg: &OptimizerConfig) -> Result<TieSet<T>> {
    let size = swarm_size(cfg.budget);
    if cfg.budget < size {
        return Err(Error::InvalidParameter(format!("pso needs a budget of at least {size}")));
    }
    let iterations = cfg.budget / size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bx = ev.bounds();
    let mut b = Budgeted::new(ev, size * iterations);

    let particles = (0..size)
        .map(|_| {
            let x = random_point(&mut rng, &bx);
            let y = random_point(&mut rng, &bx);
            let half = T::lit(0.5);
            let v = [(y.log2_c - x.log2_c) * half, (y.log2_gamma - x.log2_gamma) * half];
            Particle { x, v, best: x, best_f: T::neg_infinity() }
        })
        .collect();
    let mut swarm = Swarm { particles, global: bx.center(), global_f: T::neg_infinity(), bounds: bx };

    for it in 0..iterations {
        if it > 0 {
            swarm.advance(&mut rng);
        }
        let mut values = Vec::with_capacity(size);
        for p in &swarm.particles {
            match b.eval(p.x)? {
                Some(e) => values.push(e.accuracy),
                None => return b.finish(),
            }
        }
        swarm.absorb(&values);
    }
    b.finish()
}
