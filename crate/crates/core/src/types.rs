//! Domain types shared by every module.
//!
//! Categories are the contiguous ids `1..=S`; labels only matter at the I/O
//! boundary. Everything here is immutable once constructed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a probability vector's total from 1.
pub const DISTRIBUTION_TOL: f64 = 1e-9;
/// Allowed deviation of a constructed PRAM row's total from 1.
pub const ROW_TOL: f64 = 1e-12;

/// Probability vector over `S >= 2` categories.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CategoricalDistribution {
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_distribution(&probs)
    }

    /// Uniform distribution over `categories` outcomes.
    pub fn uniform(categories: usize) -> Result<Self> {
        if categories < 2 {
            return Err(Error::TooFewCategories(categories));
        }
        Ok(Self {
            probs: vec![1.0 / categories as f64; categories],
        })
    }

    /// Empirical distribution of a frequency table.
    pub fn from_counts(table: &FrequencyTable) -> Result<Self> {
        let total = table.total();
        if total == 0 {
            return Err(Error::EmptyInput);
        }
        if table.len() < 2 {
            return Err(Error::TooFewCategories(table.len()));
        }
        let n = total as f64;
        Ok(Self {
            probs: table.counts().iter().map(|&c| c as f64 / n).collect(),
        })
    }

    /// Wraps a vector the caller already knows lies on the simplex.
    pub(crate) fn from_simplex_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn categories(&self) -> usize {
        self.probs.len()
    }

    /// Total-variation distance `0.5 * sum |p_k - r_k|`.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        if self.categories() != other.categories() {
            return Err(Error::DimensionMismatch {
                expected: self.categories(),
                found: other.categories(),
            });
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Checks a raw probability vector and renormalizes sub-tolerance drift.
pub fn validate_distribution(probs: &[f64]) -> Result<CategoricalDistribution> {
    if probs.len() < 2 {
        return Err(Error::TooFewCategories(probs.len()));
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::NegativeMass { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    let probs = if sum == 1.0 {
        probs.to_vec()
    } else {
        probs.iter().map(|p| p / sum).collect()
    };
    Ok(CategoricalDistribution { probs })
}

/// Privacy loss budget `alpha` in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrivacyLevel(f64);

impl PrivacyLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The likelihood-ratio bound `e^alpha`.
    pub fn exp(self) -> f64 {
        self.0.exp()
    }
}

/// Diagonal of a PRAM matrix: `q_k` is the probability category `k` survives.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RetentionVector(Vec<f64>);

impl RetentionVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        for (index, &value) in q.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange { index, value });
            }
        }
        Ok(Self(q))
    }

    /// Constant vector `q_k = value`.
    pub fn constant(categories: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; categories])
    }

    /// The zero-information point `q_k = 1/S`.
    pub fn uniform(categories: usize) -> Self {
        Self(vec![1.0 / categories as f64; categories])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Row-stochastic matrix with `M[k][k] = q_k` and `(1 - q_k) / (S - 1)`
/// spread evenly over the other columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PramMatrix {
    size: usize,
    retention: RetentionVector,
}

impl PramMatrix {
    pub fn new(retention: RetentionVector) -> Result<Self> {
        let size = retention.len();
        if size < 2 {
            return Err(Error::TooFewCategories(size));
        }
        Ok(Self { size, retention })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn retention(&self) -> &RetentionVector {
        &self.retention
    }

    /// Off-diagonal mass of row `k` (0-based) for each other column.
    pub fn off_diagonal(&self, k: usize) -> f64 {
        (1.0 - self.retention.0[k]) / (self.size - 1) as f64
    }

    /// Entry `M[from][to]`, 0-based.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        if from == to {
            self.retention.0[from]
        } else {
            self.off_diagonal(from)
        }
    }

    pub fn row(&self, from: usize) -> Vec<f64> {
        (0..self.size).map(|to| self.entry(from, to)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|k| self.row(k)).collect()
    }
}

/// Ordered sequence of category ids in `1..=S` plus their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrodataColumn {
    records: Vec<u32>,
    labels: Vec<String>,
}

impl MicrodataColumn {
    /// Column whose labels are the ids themselves.
    pub fn new(records: Vec<u32>, categories: usize) -> Result<Self> {
        let labels = (1..=categories).map(|k| k.to_string()).collect();
        Self::with_labels(records, labels)
    }

    /// `labels[k - 1]` names category `k`.
    pub fn with_labels(records: Vec<u32>, labels: Vec<String>) -> Result<Self> {
        let categories = labels.len();
        for (index, &category) in records.iter().enumerate() {
            if category == 0 || category as usize > categories {
                return Err(Error::CategoryOutOfRange {
                    index,
                    category,
                    categories,
                });
            }
        }
        Ok(Self { records, labels })
    }

    /// Replaces the records while keeping this column's label map.
    pub fn with_records(&self, records: Vec<u32>) -> Result<Self> {
        Self::with_labels(records, self.labels.clone())
    }

    pub fn records(&self) -> &[u32] {
        &self.records
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, category: u32) -> Option<&str> {
        self.labels
            .get((category as usize).wrapping_sub(1))
            .map(String::as_str)
    }

    pub fn categories(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Per-cell counts: `f_k` for a sample, `F_k` for a population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrequencyTable(Vec<u64>);

impl FrequencyTable {
    pub fn new(counts: Vec<u64>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// Counts records per category; `counts[k - 1]` is the count of id `k`.
pub fn frequencies(column: &MicrodataColumn) -> FrequencyTable {
    let mut counts = vec![0u64; column.categories()];
    for &r in column.records() {
        counts[r as usize - 1] += 1;
    }
    FrequencyTable(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validates_ten_category_vector() {
        let p = [0.3, 0.1, 0.2, 0.08, 0.02, 0.04, 0.06, 0.1, 0.01, 0.09];
        let d = validate_distribution(&p).unwrap();
        assert_eq!(d.categories(), 10);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_binary_is_valid() {
        let d = validate_distribution(&[0.5, 0.5]).unwrap();
        assert_eq!(d.categories(), 2);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(
            validate_distribution(&[0.7, 0.4]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            validate_distribution(&[1.2, -0.2]),
            Err(Error::NegativeMass { index: 1, .. })
        ));
        assert!(matches!(
            validate_distribution(&[1.0]),
            Err(Error::TooFewCategories(1))
        ));
        assert!(matches!(
            validate_distribution(&[]),
            Err(Error::TooFewCategories(0))
        ));
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let d = validate_distribution(&[0.5 + 4e-10, 0.5]).unwrap();
        assert!((d.probs()[0] + d.probs()[1] - 1.0).abs() < 1e-15);
        assert!(validate_distribution(&[0.5 + 2e-9, 0.5]).is_err());
    }

    #[test]
    fn privacy_level_rejects_negative_and_infinite() {
        assert!(PrivacyLevel::new(-1.0).is_err());
        assert!(PrivacyLevel::new(f64::INFINITY).is_err());
        assert!(PrivacyLevel::new(f64::NAN).is_err());
        assert_eq!(PrivacyLevel::new(0.0).unwrap().exp(), 1.0);
    }

    #[test]
    fn frequencies_count_directly() {
        let c = MicrodataColumn::new(vec![1, 1, 2, 3], 3).unwrap();
        assert_eq!(frequencies(&c).counts(), &[2, 1, 1]);
        let c = MicrodataColumn::new(vec![], 2).unwrap();
        assert_eq!(frequencies(&c).counts(), &[0, 0]);
        let c = MicrodataColumn::new(vec![2, 2, 2], 2).unwrap();
        assert_eq!(frequencies(&c).counts(), &[0, 3]);
    }

    #[test]
    fn column_rejects_out_of_range_ids() {
        assert!(matches!(
            MicrodataColumn::new(vec![1, 3], 2),
            Err(Error::CategoryOutOfRange { index: 1, .. })
        ));
        assert!(MicrodataColumn::new(vec![0], 2).is_err());
    }

    #[test]
    fn retention_rejects_out_of_range() {
        assert!(RetentionVector::new(vec![0.5, 1.5]).is_err());
        assert!(RetentionVector::new(vec![-0.1, 0.5]).is_err());
    }

    proptest! {
        #[test]
        fn pram_rows_are_stochastic(q in prop::collection::vec(0.0f64..=1.0, 2..12)) {
            let m = PramMatrix::new(RetentionVector::new(q).unwrap()).unwrap();
            for k in 0..m.size() {
                let row = m.row(k);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= ROW_TOL);
                prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn frequencies_ignore_record_order(
            records in prop::collection::vec(1u32..=5, 0..64),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = frequencies(&MicrodataColumn::new(records, 5).unwrap());
            let b = frequencies(&MicrodataColumn::new(shuffled, 5).unwrap());
            prop_assert_eq!(a.total() as usize, b.total() as usize);
            prop_assert_eq!(a, b);
        }
    }
}
