//! Independent reference computations used to check the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svmtune_core::dataset::Dataset;

/// Gaussian features with a class-dependent shift; both classes always present.
pub fn random_dataset(seed: u64, n: usize, d: usize, shift: f64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|i| if i < 2 { i as u8 } else { rng.random_range(0..2u8) }).collect();
    let mut feats = Vec::with_capacity(n * d);
    for &l in &labels {
        for _ in 0..d {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            feats.push(z + if l == 1 { shift } else { 0.0 });
        }
    }
    Dataset::from_parts(feats, labels, d).unwrap()
}

pub fn rbf_gram(ds: &Dataset<f64>, gamma: f64) -> Vec<f64> {
    let n = ds.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = ds.row(i).iter().zip(ds.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            k[i * n + j] = (-gamma * d2).exp();
        }
    }
    k
}

pub fn signs(ds: &Dataset<f64>) -> Vec<f64> {
    ds.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

pub fn dual_value(alpha: &[f64], y: &[f64], k: &[f64]) -> f64 {
    let n = alpha.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += alpha[i] * alpha[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    0.5 * q - alpha.iter().sum::<f64>()
}

/// Euclidean projection onto `{0 <= a <= c, y.a = 0}` by bisection on the multiplier.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(ai, yi)| ai * yi).sum::<f64>();
    // balance(lam) is non-increasing in lam
    let (mut lo, mut hi) = (-1.0, 1.0);
    while balance(&at(lo)) < 0.0 {
        lo *= 2.0;
    }
    while balance(&at(hi)) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient on the dual; returns (alpha, objective).
pub fn projected_gradient_dual(k: &[f64], y: &[f64], c: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    // Lipschitz bound: largest absolute row sum of Q
    let lip = (0..n).map(|i| (0..n).map(|j| k[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n).map(|i| y[i] * (0..n).map(|j| y[j] * a[j] * k[i * n + j]).sum::<f64>() - 1.0).collect()
    };
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let g = grad(&z);
        let step: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi / lip).collect();
        let x_new = project(&step, y, c);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = x_new.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / t_new * (a - b)).collect();
        x = x_new;
        t = t_new;
    }
    let obj = dual_value(&x, y, k);
    (x, obj)
}

/// Largest violation of the KKT margin conditions, box and balance constraints.
pub fn kkt_violation(alpha: &[f64], y: &[f64], k: &[f64], c: f64, bias: f64) -> f64 {
    let n = y.len();
    let mut worst = alpha.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>().abs();
    for i in 0..n {
        let f: f64 = (0..n).map(|j| y[j] * alpha[j] * k[i * n + j]).sum::<f64>() + bias;
        let m = y[i] * f;
        let v = if alpha[i] < 0.0 || alpha[i] > c {
            f64::INFINITY
        } else if alpha[i] == 0.0 {
            (1.0 - m).max(0.0)
        } else if alpha[i] == c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// gamma = 1 / median of all pairwise squared distances among `indices`.
pub fn brute_sigest(ds: &Dataset<f64>, indices: &[usize]) -> f64 {
    let mut d2 = Vec::new();
    for a in 0..indices.len() {
        for b in a + 1..indices.len() {
            let (x, z) = (ds.row(indices[a]), ds.row(indices[b]));
            d2.push(x.iter().zip(z).map(|(p, q)| (p - q) * (p - q)).sum::<f64>());
        }
    }
    d2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = d2.len();
    let med = if m % 2 == 1 { d2[m / 2] } else { 0.5 * (d2[m / 2 - 1] + d2[m / 2]) };
    1.0 / med
}

/// Squared distance of class means in RBF feature space by the full double sum.
pub fn naive_center_distance(ds: &Dataset<f64>, indices: &[usize], gamma: f64) -> f64 {
    let k = |i: usize, j: usize| {
        let d2: f64 = ds.row(i).iter().zip(ds.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        (-gamma * d2).exp()
    };
    let pos: Vec<usize> = indices.iter().copied().filter(|&i| ds.label(i) == 1).collect();
    let neg: Vec<usize> = indices.iter().copied().filter(|&i| ds.label(i) == 0).collect();
    let mean = |a: &[usize], b: &[usize]| {
        let mut s = 0.0;
        for &i in a {
            for &j in b {
                s += k(i, j);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    mean(&pos, &pos) + mean(&neg, &neg) - 2.0 * mean(&pos, &neg)
}

/// Centered L2-discrepancy by its closed form, written out independently.
pub fn centered_discrepancy(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let term = |x: f64| (x - 0.5).abs();
    let mut s1 = 0.0;
    for &(u, v) in points {
        s1 += (1.0 + 0.5 * term(u) - 0.5 * term(u).powi(2)) * (1.0 + 0.5 * term(v) - 0.5 * term(v).powi(2));
    }
    let mut s2 = 0.0;
    for &(u1, v1) in points {
        for &(u2, v2) in points {
            let f = |a: f64, b: f64| 1.0 + 0.5 * term(a) + 0.5 * term(b) - 0.5 * (a - b).abs();
            s2 += f(u1, u2) * f(v1, v2);
        }
    }
    ((13.0f64 / 12.0).powi(2) - 2.0 / n * s1 + s2 / (n * n)).sqrt()
}
