//! Two-class Gaussian blob datasets with a known Bayes accuracy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;
use std::path::Path;

use svmtune_core::dataset::{standardize_in_place, Dataset};

use crate::error::Result;

/// Bayes accuracy of two unit-variance spherical Gaussians whose means are `separation`
/// standard deviations apart, with equal priors.
pub fn bayes_accuracy(separation: f64) -> f64 {
    Normal::standard().cdf(separation / 2.0)
}

/// Mean separation giving the requested Bayes accuracy.
pub fn separation_for(bayes: f64) -> f64 {
    2.0 * Normal::standard().inverse_cdf(bayes)
}

/// `n_per_class` rows per class in `d` dimensions; class 1 is shifted by `separation` along
/// the diagonal. Columns are standardized.
pub fn blobs(n_per_class: usize, d: usize, separation: f64, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = separation / (d as f64).sqrt();
    let n = 2 * n_per_class;
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 2) as u8;
        labels.push(class);
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(z + if class == 1 { shift } else { 0.0 });
        }
    }
    standardize_in_place(&mut features, n, d);
    Dataset::from_parts(features, labels, d).expect("blobs have both classes")
}

/// Writes `x1..xd,label` with a header.
pub fn write_csv(ds: &Dataset<f64>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=ds.dim()).map(|k| format!("x{k}")).chain(["label".to_string()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..ds.len() {
        let row: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{}", row.join(","), ds.label(i))?;
    }
    out.flush()?;
    Ok(())
}
