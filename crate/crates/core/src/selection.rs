//! Post-search selection of one (C, gamma) pair from a set of equally good pairs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surface::HyperPoint;

/// Non-empty set of pairs that share the maximal response-surface value of one search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TieSet<T> {
    points: Vec<HyperPoint<T>>,
}

impl<T: Scalar> TieSet<T> {
    pub fn new(points: Vec<HyperPoint<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTieSet);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[HyperPoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points ordered by log2 C, then log2 gamma.
    pub fn canonical(&self) -> Vec<HyperPoint<T>> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| {
            a.log2_c.partial_cmp(&b.log2_c).unwrap().then(a.log2_gamma.partial_cmp(&b.log2_gamma).unwrap())
        });
        pts
    }

    pub fn select(&self, rule: SelectionRule, seed: u64) -> HyperPoint<T> {
        select(self, rule, seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SelectionRule {
    #[serde(rename = "minCg")]
    MinCg,
    #[serde(rename = "mingC")]
    MinGc,
    #[serde(rename = "meanCg")]
    MeanCg,
    #[serde(rename = "randCg")]
    RandCg,
    #[serde(rename = "maxCg")]
    MaxCg,
    #[serde(rename = "maxgC")]
    MaxGc,
}

impl SelectionRule {
    pub const ALL: [SelectionRule; 6] = [
        SelectionRule::MinCg,
        SelectionRule::MinGc,
        SelectionRule::MeanCg,
        SelectionRule::RandCg,
        SelectionRule::MaxCg,
        SelectionRule::MaxGc,
    ];

    /// The four rules that favour smaller or central values.
    pub const REASONABLE: [SelectionRule; 4] =
        [SelectionRule::MinCg, SelectionRule::MinGc, SelectionRule::RandCg, SelectionRule::MeanCg];

    pub fn name(self) -> &'static str {
        match self {
            SelectionRule::MinCg => "minCg",
            SelectionRule::MinGc => "mingC",
            SelectionRule::MeanCg => "meanCg",
            SelectionRule::RandCg => "randCg",
            SelectionRule::MaxCg => "maxCg",
            SelectionRule::MaxGc => "maxgC",
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionRule::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| Error::UnknownRule(s.to_string()))
    }
}

/// Lexicographic extreme: optimize `first`, then `second` among the points sharing it.
fn lexicographic<T: Scalar>(
    points: &[HyperPoint<T>],
    first: impl Fn(&HyperPoint<T>) -> T,
    second: impl Fn(&HyperPoint<T>) -> T,
    pick: impl Fn(T, T) -> T,
) -> HyperPoint<T> {
    let f = points.iter().map(&first).reduce(&pick).unwrap();
    let s = points.iter().filter(|p| first(p) == f).map(&second).reduce(&pick).unwrap();
    *points.iter().find(|p| first(p) == f && second(p) == s).unwrap()
}

pub fn select<T: Scalar>(b: &TieSet<T>, rule: SelectionRule, seed: u64) -> HyperPoint<T> {
    let pts = b.points();
    let c = |p: &HyperPoint<T>| p.log2_c;
    let g = |p: &HyperPoint<T>| p.log2_gamma;
    match rule {
        SelectionRule::MinCg => lexicographic(pts, c, g, T::min),
        SelectionRule::MinGc => lexicographic(pts, g, c, T::min),
        SelectionRule::MaxCg => lexicographic(pts, c, g, T::max),
        SelectionRule::MaxGc => lexicographic(pts, g, c, T::max),
        SelectionRule::MeanCg => {
            let n = T::from_usize(pts.len()).unwrap();
            HyperPoint::new(pts.iter().map(c).sum::<T>() / n, pts.iter().map(g).sum::<T>() / n)
        }
        SelectionRule::RandCg => {
            let sorted = b.canonical();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sorted[rng.random_range(0..sorted.len())]
        }
    }
}
