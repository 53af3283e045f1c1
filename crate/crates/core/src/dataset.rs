//! Tabular dataset loading and preprocessing.
//!
//! The pipeline is `load_csv` → `encode_categoricals` → `binarize_labels` → `standardize`,
//! followed by `make_split_plan` for the nested (outer 2-fold, inner k-fold) resampling.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    fn key(&self) -> String {
        match self {
            Cell::Number(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Text(s) => s.parse().ok(),
        }
    }
}

/// Orders label values numerically when both parse as numbers, lexicographically otherwise.
fn label_order(a: &Cell, b: &Cell) -> Ordering {
    match (a.as_number(), b.as_number()) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.key().cmp(&b.key()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    pub label_column: String,
}

impl RawDataset {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Cell>>, label_column: impl Into<String>) -> Result<Self> {
        let label_column = label_column.into();
        if !columns.iter().any(|c| c.name == label_column) {
            return Err(Error::InvalidDataset(format!("label column `{label_column}` not present")));
        }
        if rows.len() < 2 {
            return Err(Error::InvalidDataset("at least two rows are required".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Row {
                    row: i,
                    message: format!("expected {} fields, found {}", columns.len(), row.len()),
                });
            }
        }
        Ok(Self { columns, rows, label_column })
    }

    pub fn label_index(&self) -> usize {
        self.columns.iter().position(|c| c.name == self.label_column).expect("label column validated at construction")
    }

    fn feature_indices(&self) -> Vec<usize> {
        let label = self.label_index();
        (0..self.columns.len()).filter(|&i| i != label).collect()
    }
}

/// Reads a CSV file with a header row.
///
/// Columns listed in `categorical`, and any column containing a non-numeric token, are
/// categorical. Empty fields are rejected with the (0-based) data row index.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, categorical: &[String]) -> Result<RawDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, label_column, categorical)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str, categorical: &[String]) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut text_rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Row { row: i, message: e.to_string() })?;
        if record.len() != names.len() {
            return Err(Error::Row {
                row: i,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        if let Some(j) = record.iter().position(str::is_empty) {
            return Err(Error::Row { row: i, message: format!("missing value in column `{}`", names[j]) });
        }
        text_rows.push(record.iter().map(str::to_owned).collect::<Vec<_>>());
    }

    let columns: Vec<Column> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let listed = categorical.iter().any(|c| c == name);
            let numeric = text_rows.iter().all(|r| r[j].parse::<f64>().is_ok());
            let kind = if listed || !numeric { ColumnKind::Categorical } else { ColumnKind::Numeric };
            Column { name: name.clone(), kind }
        })
        .collect();
    let rows = text_rows
        .into_iter()
        .map(|r| {
            r.into_iter()
                .zip(&columns)
                .map(|(tok, col)| match col.kind {
                    ColumnKind::Numeric => Cell::Number(tok.parse().expect("checked numeric")),
                    ColumnKind::Categorical => Cell::Text(tok),
                })
                .collect()
        })
        .collect();
    RawDataset::new(columns, rows, label_column)
}

/// Replaces every categorical feature column by integer codes 1, 2, 3, ... in order of first
/// appearance. The label column is left untouched.
pub fn encode_categoricals(raw: &RawDataset) -> RawDataset {
    let mut out = raw.clone();
    for j in raw.feature_indices() {
        if raw.columns[j].kind != ColumnKind::Categorical {
            continue;
        }
        let mut codes: HashMap<String, usize> = HashMap::new();
        for row in &mut out.rows {
            let next = codes.len() + 1;
            let code = *codes.entry(row[j].key()).or_insert(next);
            row[j] = Cell::Number(code as f64);
        }
        out.columns[j].kind = ColumnKind::Numeric;
    }
    out
}

/// Maps labels to {0, 1} by alternating over classes sorted by descending frequency.
pub fn binarize_labels(raw: &RawDataset) -> Result<RawDataset> {
    let label = raw.label_index();
    let mut counts: Vec<(Cell, usize)> = Vec::new();
    for row in &raw.rows {
        match counts.iter_mut().find(|(c, _)| c.key() == row[label].key()) {
            Some((_, n)) => *n += 1,
            None => counts.push((row[label].clone(), 1)),
        }
    }
    if counts.len() < 2 {
        return Err(Error::DegenerateLabels);
    }
    counts.sort_by(|(a, na), (b, nb)| nb.cmp(na).then_with(|| label_order(a, b)));
    let mapping: HashMap<String, f64> =
        counts.iter().enumerate().map(|(rank, (c, _))| (c.key(), (rank % 2) as f64)).collect();

    let mut out = raw.clone();
    for row in &mut out.rows {
        row[label] = Cell::Number(mapping[&row[label].key()]);
    }
    out.columns[label].kind = ColumnKind::Numeric;
    Ok(out)
}

/// A standardized binary classification dataset (row-major feature matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Vec<T>,
    labels: Vec<u8>,
    n: usize,
    d: usize,
    pub feature_means: Vec<T>,
    pub feature_sds: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from an already prepared matrix; no scaling is applied.
    pub fn from_parts(features: Vec<T>, labels: Vec<u8>, d: usize) -> Result<Self> {
        let n = labels.len();
        if d == 0 || features.len() != n * d {
            return Err(Error::InvalidDataset(format!(
                "feature matrix has {} values, expected {n}x{d}",
                features.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
        }
        if !(labels.contains(&0) && labels.contains(&1)) {
            return Err(Error::DegenerateLabels);
        }
        Ok(Self { features, labels, n, d, feature_means: vec![T::zero(); d], feature_sds: vec![T::one(); d] })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.n - ones, ones]
    }

    /// Copies the given rows (in the given order) into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n: indices.len(),
            d: self.d,
            feature_means: self.feature_means.clone(),
            feature_sds: self.feature_sds.clone(),
        }
    }
}

/// Z-scores every feature column with the sample (n - 1) standard deviation. Constant columns
/// become zero with a recorded sd of 1. Requires numeric features and {0, 1} labels.
pub fn standardize<T: Scalar>(raw: &RawDataset) -> Result<Dataset<T>> {
    let label = raw.label_index();
    let features = raw.feature_indices();
    let n = raw.rows.len();
    let d = features.len();
    if d == 0 {
        return Err(Error::InvalidDataset("no feature columns".into()));
    }

    let mut matrix = vec![0.0f64; n * d];
    let mut labels = Vec::with_capacity(n);
    for (i, row) in raw.rows.iter().enumerate() {
        for (k, &j) in features.iter().enumerate() {
            matrix[i * d + k] = match &row[j] {
                Cell::Number(v) => *v,
                Cell::Text(_) => {
                    return Err(Error::Row {
                        row: i,
                        message: format!("column `{}` is not numeric; encode categoricals first", raw.columns[j].name),
                    })
                }
            };
        }
        match row[label] {
            Cell::Number(v) if v == 0.0 || v == 1.0 => labels.push(v as u8),
            _ => return Err(Error::Row { row: i, message: "label is not binary; binarize labels first".into() }),
        }
    }

    let (means, sds) = standardize_in_place(&mut matrix, n, d);
    let mut ds = Dataset::from_parts(matrix.into_iter().map(T::lit).collect(), labels, d)?;
    ds.feature_means = means.into_iter().map(T::lit).collect();
    ds.feature_sds = sds.into_iter().map(T::lit).collect();
    Ok(ds)
}

/// Column-wise z-scoring of a row-major matrix; returns (means, sds).
pub fn standardize_in_place(matrix: &mut [f64], n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut means = vec![0.0; d];
    let mut sds = vec![1.0; d];
    for k in 0..d {
        let mean = (0..n).map(|i| matrix[i * d + k]).sum::<f64>() / n as f64;
        let var =
            if n > 1 { (0..n).map(|i| (matrix[i * d + k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let sd = var.sqrt();
        let constant = (0..n).all(|i| matrix[i * d + k] == matrix[k]);
        for i in 0..n {
            matrix[i * d + k] = if constant { 0.0 } else { (matrix[i * d + k] - mean) / sd };
        }
        means[k] = mean;
        sds[k] = if constant { 1.0 } else { sd };
    }
    (means, sds)
}

/// Full preprocessing pipeline from a raw table to a standardized binary dataset.
pub fn prepare<T: Scalar>(raw: &RawDataset) -> Result<Dataset<T>> {
    let encoded = encode_categoricals(raw);
    let binary = binarize_labels(&encoded)?;
    standardize(&binary)
}

/// Outer 2-fold assignment plus a stratified inner k-fold assignment inside each subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Subset id (1 or 2) per dataset row.
    pub subset_assignment: Vec<u8>,
    /// For each subset, the fold id (1..=k) of each member, aligned with `members(j)`.
    pub fold_assignment_per_subset: [Vec<u8>; 2],
    pub k_inner: usize,
    pub seed: u64,
    pub inner_seed: u64,
}

impl SplitPlan {
    /// Row indices (ascending) belonging to subset `j` ∈ {1, 2}.
    pub fn members(&self, j: u8) -> Vec<usize> {
        self.subset_assignment.iter().enumerate().filter_map(|(i, &s)| (s == j).then_some(i)).collect()
    }

    pub fn folds(&self, j: u8) -> &[u8] {
        &self.fold_assignment_per_subset[usize::from(j - 1)]
    }

    /// Same outer split, inner folds re-derived from a different seed.
    pub fn with_inner_seed<T: Scalar>(&self, ds: &Dataset<T>, inner_seed: u64) -> SplitPlan {
        let folds = inner_fold_assignments(ds.labels(), &self.subset_assignment, self.k_inner, inner_seed);
        SplitPlan { fold_assignment_per_subset: folds, inner_seed, ..self.clone() }
    }
}

/// Shuffles each class with `rng` and deals its members round-robin into `bins` bins.
/// The dealing position carries over between classes so bin totals differ by at most one.
fn deal_stratified(labels: &[u8], bins: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = vec![0u8; labels.len()];
    let mut next = 0usize;
    for class in 0..=1u8 {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for i in idx {
            out[i] = (next % bins) as u8 + 1;
            next += 1;
        }
    }
    out
}

fn inner_fold_assignments(labels: &[u8], subsets: &[u8], k: usize, inner_seed: u64) -> [Vec<u8>; 2] {
    // A distinct stream from the outer split, so equal seeds do not correlate the two.
    let mut rng = ChaCha8Rng::seed_from_u64(inner_seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut per_subset = |j: u8| {
        let member_labels: Vec<u8> = subsets.iter().zip(labels).filter_map(|(&s, &l)| (s == j).then_some(l)).collect();
        deal_stratified(&member_labels, k, &mut rng)
    };
    let first = per_subset(1);
    let second = per_subset(2);
    [first, second]
}

/// Stratified outer 2-fold split followed by stratified `k_inner`-fold assignment in each
/// subset, fully determined by `seed`.
pub fn make_split_plan<T: Scalar>(ds: &Dataset<T>, k_inner: usize, seed: u64) -> Result<SplitPlan> {
    make_split_plan_with_inner(ds, k_inner, seed, seed)
}

pub fn make_split_plan_with_inner<T: Scalar>(
    ds: &Dataset<T>,
    k_inner: usize,
    seed: u64,
    inner_seed: u64,
) -> Result<SplitPlan> {
    if k_inner < 2 {
        return Err(Error::InvalidParameter("k_inner must be at least 2".into()));
    }
    let counts = ds.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count < 2 * k_inner {
            return Err(Error::InsufficientClassCount { class: class as u8, count, needed: 2 * k_inner });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subset_assignment = deal_stratified(ds.labels(), 2, &mut rng);
    let fold_assignment_per_subset = inner_fold_assignments(ds.labels(), &subset_assignment, k_inner, inner_seed);
    Ok(SplitPlan { subset_assignment, fold_assignment_per_subset, k_inner, seed, inner_seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(cols: &[(&str, ColumnKind)], rows: Vec<Vec<Cell>>, label: &str) -> RawDataset {
        let columns = cols.iter().map(|(n, k)| Column { name: n.to_string(), kind: *k }).collect();
        RawDataset::new(columns, rows, label).unwrap()
    }

    fn t(s: &str) -> Cell {
        Cell::Text(s.into())
    }

    fn num(v: f64) -> Cell {
        Cell::Number(v)
    }

    #[test]
    fn categorical_codes_follow_first_appearance() {
        let r = raw(
            &[("colour", ColumnKind::Categorical), ("x", ColumnKind::Numeric), ("y", ColumnKind::Categorical)],
            vec![
                vec![t("red"), num(0.5), t("a")],
                vec![t("blue"), num(1.5), t("b")],
                vec![t("red"), num(0.5), t("a")],
                vec![t("green"), num(1.5), t("b")],
            ],
            "y",
        );
        let e = encode_categoricals(&r);
        let col: Vec<_> = e.rows.iter().map(|r| r[0].clone()).collect();
        assert_eq!(col, vec![num(1.0), num(2.0), num(1.0), num(3.0)]);
        let x: Vec<_> = e.rows.iter().map(|r| r[1].clone()).collect();
        assert_eq!(x, vec![num(0.5), num(1.5), num(0.5), num(1.5)]);
        // label column untouched
        assert_eq!(e.rows[0][2], t("a"));
    }

    #[test]
    fn single_category_maps_to_one() {
        let r = raw(
            &[("c", ColumnKind::Categorical), ("y", ColumnKind::Numeric)],
            vec![vec![t("x"), num(0.0)], vec![t("x"), num(1.0)], vec![t("x"), num(0.0)]],
            "y",
        );
        let e = encode_categoricals(&r);
        assert!(e.rows.iter().all(|r| r[0] == num(1.0)));
    }

    fn label_map(counts: &[(&str, usize)]) -> HashMap<String, f64> {
        let mut rows = Vec::new();
        for (l, c) in counts {
            for _ in 0..*c {
                rows.push(vec![num(0.0), t(l)]);
            }
        }
        let r = raw(&[("f", ColumnKind::Numeric), ("y", ColumnKind::Categorical)], rows.clone(), "y");
        let b = binarize_labels(&r).unwrap();
        rows.iter()
            .zip(&b.rows)
            .map(|(orig, new)| match (&orig[1], &new[1]) {
                (Cell::Text(s), Cell::Number(v)) => (s.clone(), *v),
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn binarization_alternates_over_frequency_rank() {
        let m = label_map(&[("c", 2), ("a", 5), ("d", 1), ("b", 3)]);
        assert_eq!(m["a"], 0.0);
        assert_eq!(m["b"], 1.0);
        assert_eq!(m["c"], 0.0);
        assert_eq!(m["d"], 1.0);
        let m = label_map(&[("b", 3), ("a", 5)]);
        assert_eq!((m["a"], m["b"]), (0.0, 1.0));
    }

    #[test]
    fn binarization_ties_use_label_order() {
        let m = label_map(&[("b", 2), ("a", 2)]);
        assert_eq!((m["a"], m["b"]), (0.0, 1.0));
        // numeric labels compare numerically: 10 sorts after 9
        let m = label_map(&[("10", 2), ("9", 2)]);
        assert_eq!((m["9"], m["10"]), (0.0, 1.0));
    }

    #[test]
    fn single_class_is_degenerate() {
        let r = raw(
            &[("f", ColumnKind::Numeric), ("y", ColumnKind::Numeric)],
            vec![vec![num(0.0), num(1.0)], vec![num(1.0), num(1.0)]],
            "y",
        );
        assert_eq!(binarize_labels(&r), Err(Error::DegenerateLabels));
    }

    fn column_dataset(values: &[f64]) -> Dataset<f64> {
        let rows = values.iter().enumerate().map(|(i, v)| vec![num(*v), num((i % 2) as f64)]).collect();
        let r = raw(&[("f", ColumnKind::Numeric), ("y", ColumnKind::Numeric)], rows, "y");
        standardize(&r).unwrap()
    }

    #[test]
    fn standardize_uses_sample_sd() {
        let ds = column_dataset(&[1.0, 3.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ds.row(0)[0] + s).abs() < 1e-12);
        assert!((ds.row(1)[0] - s).abs() < 1e-12);

        let ds = column_dataset(&[0.0, 0.0, 1.0, 1.0]);
        let sd = (1.0f64 / 3.0).sqrt();
        assert!((ds.feature_sds[0] - sd).abs() < 1e-12);
        assert!((ds.row(0)[0] + 0.5 / sd).abs() < 1e-12);
        assert!((ds.row(0)[0] + 0.866_025).abs() < 1e-6);
        assert!((ds.row(3)[0] - 0.866_025).abs() < 1e-6);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let ds = column_dataset(&[4.0, 4.0, 4.0]);
        assert!((0..3).all(|i| ds.row(i)[0] == 0.0));
        assert_eq!(ds.feature_sds[0], 1.0);
    }

    fn balanced(n_per_class: usize, d: usize) -> Dataset<f64> {
        let n = 2 * n_per_class;
        let features = (0..n * d).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::from_parts(features, labels, d).unwrap()
    }

    #[test]
    fn split_plan_is_exactly_balanced() {
        let ds = balanced(10, 2);
        let plan = make_split_plan(&ds, 5, 7).unwrap();
        for j in 1..=2u8 {
            let members = plan.members(j);
            let ones = members.iter().filter(|&&i| ds.label(i) == 1).count();
            assert_eq!((members.len(), ones), (10, 5));
            let folds = plan.folds(j);
            for f in 1..=5u8 {
                let in_fold: Vec<usize> =
                    members.iter().zip(folds).filter_map(|(&i, &g)| (g == f).then_some(i)).collect();
                assert_eq!(in_fold.len(), 2);
                assert_eq!(in_fold.iter().filter(|&&i| ds.label(i) == 1).count(), 1);
            }
        }
        assert_eq!(plan, make_split_plan(&ds, 5, 7).unwrap());
    }

    #[test]
    fn split_plan_rejects_small_classes() {
        let labels = vec![0, 0, 0, 0, 1, 1];
        let ds = Dataset::from_parts(vec![0.0; 6], labels, 1).unwrap();
        assert!(matches!(make_split_plan(&ds, 5, 1), Err(Error::InsufficientClassCount { .. })));
    }

    #[test]
    fn inner_reseed_keeps_outer_split() {
        let ds = balanced(15, 1);
        let plan = make_split_plan(&ds, 5, 3).unwrap();
        let other = plan.with_inner_seed(&ds, 99);
        assert_eq!(plan.subset_assignment, other.subset_assignment);
        assert_ne!(plan.fold_assignment_per_subset, other.fold_assignment_per_subset);
        assert_eq!(plan, plan.with_inner_seed(&ds, 3));
    }

    #[test]
    fn csv_loading_detects_categoricals_and_rejects_missing() {
        let text = "a,b,class\n1.0,x,yes\n2.0,y,no\n3.0,x,yes\n";
        let r = read_csv(text.as_bytes(), "class", &[]).unwrap();
        assert_eq!(r.columns[0].kind, ColumnKind::Numeric);
        assert_eq!(r.columns[1].kind, ColumnKind::Categorical);
        let ds: Dataset<f64> = prepare(&r).unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.labels(), &[0, 1, 0]);

        let listed = read_csv(text.as_bytes(), "class", &["a".to_string()]).unwrap();
        assert_eq!(listed.columns[0].kind, ColumnKind::Categorical);

        let missing = "a,class\n1.0,yes\n,no\n";
        match read_csv(missing.as_bytes(), "class", &[]) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected row error, got {other:?}"),
        }
    }
}
