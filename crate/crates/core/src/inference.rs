//! Recovering `p` from a privatized column, and disclosure-risk indices.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{frequencies, CategoricalDistribution, FrequencyTable, MicrodataColumn, PramMatrix};

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMethod {
    Inversion,
    Em,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub p_hat: CategoricalDistribution,
    pub method: EstimationMethod,
    pub iterations: usize,
    /// Observed-data log-likelihood at `p_hat` (EM only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_likelihood: Option<f64>,
    /// Log-likelihood after each EM update, starting from the uniform start.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub log_likelihood_trace: Vec<f64>,
    /// Whether the raw inversion left the simplex and was projected back.
    pub projected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

fn check_size(table: &FrequencyTable, m: &PramMatrix) -> Result<()> {
    if table.len() != m.size() {
        return Err(Error::DimensionMismatch {
            expected: m.size(),
            found: table.len(),
        });
    }
    if table.total() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn counts_of(z: &MicrodataColumn, m: &PramMatrix) -> Result<FrequencyTable> {
    if z.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = frequencies(z).counts().to_vec();
    if counts.len() > m.size() {
        if let Some(k) = counts[m.size()..].iter().position(|&c| c > 0) {
            let category = (m.size() + k + 1) as u32;
            let index = z.records().iter().position(|&r| r == category).unwrap_or(0);
            return Err(Error::CategoryOutOfRange {
                index,
                category,
                categories: m.size(),
            });
        }
    }
    counts.resize(m.size(), 0);
    Ok(FrequencyTable::new(counts))
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Solves `M^T p = m_hat` for given released-category frequencies.
pub fn invert_frequencies(m_hat: &[f64], m: &PramMatrix) -> Result<EstimationResult> {
    let size = m.size();
    if m_hat.len() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            found: m_hat.len(),
        });
    }
    let mt = DMatrix::from_fn(size, size, |z, k| m.entry(k, z));
    let sv = mt.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::SingularMatrix { condition });
    }
    let solution = mt
        .lu()
        .solve(&DVector::from_column_slice(m_hat))
        .ok_or(Error::SingularMatrix { condition })?;
    let raw: Vec<f64> = solution.iter().copied().collect();
    let projected = raw.iter().any(|&x| x < 0.0);
    let p = if projected {
        project_to_simplex(&raw)
    } else {
        let sum: f64 = raw.iter().sum();
        raw.iter().map(|x| x / sum).collect()
    };
    Ok(EstimationResult {
        p_hat: CategoricalDistribution::from_simplex_unchecked(p),
        method: EstimationMethod::Inversion,
        iterations: 1,
        log_likelihood: None,
        log_likelihood_trace: Vec::new(),
        projected,
    })
}

/// Moment inversion from the empirical distribution of `z`.
pub fn estimate_p_inversion(z: &MicrodataColumn, m: &PramMatrix) -> Result<EstimationResult> {
    let counts = counts_of(z, m)?;
    let n = counts.total() as f64;
    let m_hat: Vec<f64> = counts.counts().iter().map(|&c| c as f64 / n).collect();
    invert_frequencies(&m_hat, m)
}

fn log_likelihood(counts: &[u64], mz: &[f64]) -> f64 {
    counts
        .iter()
        .zip(mz)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &m)| c as f64 * m.ln())
        .sum()
}

fn released_marginal(p: &[f64], m: &PramMatrix, out: &mut [f64]) {
    for (z, slot) in out.iter_mut().enumerate() {
        *slot = p.iter().enumerate().map(|(k, &pk)| pk * m.entry(k, z)).sum();
    }
}

/// EM for the mixture likelihood `prod_i m(p)_{z_i}` over released counts.
///
/// Records sharing a released category have identical E-step weights, so
/// the E-step runs over the `S` count cells; the sums are then in a fixed
/// order and the result does not depend on how `z` is partitioned.
pub fn em_from_counts(counts: &FrequencyTable, m: &PramMatrix, options: EmOptions) -> Result<EstimationResult> {
    check_size(counts, m)?;
    let size = m.size();
    let c = counts.counts();
    let n = counts.total() as f64;
    let mut p = vec![1.0 / size as f64; size];
    let mut mz = vec![0.0; size];
    released_marginal(&p, m, &mut mz);
    let mut ll = log_likelihood(c, &mz);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut next = vec![0.0; size];
    while iterations < options.max_iter {
        for (k, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for z in 0..size {
                if c[z] > 0 && mz[z] > 0.0 {
                    acc += c[z] as f64 * m.entry(k, z) / mz[z];
                }
            }
            *slot = p[k] * acc / n;
        }
        let sum: f64 = next.iter().sum();
        for x in &mut next {
            *x /= sum;
        }
        std::mem::swap(&mut p, &mut next);
        released_marginal(&p, m, &mut mz);
        let updated = log_likelihood(c, &mz);
        iterations += 1;
        trace.push(updated);
        let gain = updated - ll;
        ll = updated;
        if gain < options.tol {
            break;
        }
    }
    Ok(EstimationResult {
        p_hat: CategoricalDistribution::from_simplex_unchecked(p),
        method: EstimationMethod::Em,
        iterations,
        log_likelihood: Some(ll),
        log_likelihood_trace: trace,
        projected: false,
    })
}

/// Maximum-likelihood estimate of `p` from the privatized column `z`.
pub fn estimate_p_em(z: &MicrodataColumn, m: &PramMatrix, options: EmOptions) -> Result<EstimationResult> {
    em_from_counts(&counts_of(z, m)?, m, options)
}

/// Per-cell risk on a sample unique.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellRisk {
    /// 1-based cell index.
    pub cell: usize,
    pub r1: u8,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub tau1: f64,
    pub tau2: f64,
    pub per_record: Vec<CellRisk>,
}

/// File-level risk with the population known: over cells with `f_k = 1`,
/// `r1 = 1{F_k = 1}` and `r2 = 1 / F_k`.
pub fn risk_indices(sample: &FrequencyTable, population: &FrequencyTable) -> Result<RiskReport> {
    if sample.len() != population.len() {
        return Err(Error::LengthMismatch {
            left: sample.len(),
            right: population.len(),
        });
    }
    let mut per_record = Vec::new();
    for (k, (&f, &pop)) in sample.counts().iter().zip(population.counts()).enumerate() {
        if f > pop {
            return Err(Error::InconsistentTables {
                cell: k + 1,
                sample: f,
                population: pop,
            });
        }
        if f == 1 {
            per_record.push(CellRisk {
                cell: k + 1,
                r1: u8::from(pop == 1),
                r2: 1.0 / pop as f64,
            });
        }
    }
    Ok(RiskReport {
        tau1: per_record.iter().map(|r| f64::from(r.r1)).sum(),
        tau2: per_record.iter().map(|r| r.r2).sum(),
        per_record,
    })
}
