//! Entropy and mutual information in nats.
//!
//! `mutual_information` evaluates the utility objective in closed form from
//! `(p, q)` in O(S); `plugin_mi` is the empirical `H(X) + H(Z) - H(X,Z)`
//! estimate from a pair of columns.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{CategoricalDistribution, MicrodataColumn, RetentionVector};

/// A nonnegative information quantity in natural-log units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct NatsValue(f64);

impl NatsValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `x ln x` with `0 ln 0 = 0`.
#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn entropy_of(probs: impl IntoIterator<Item = f64>) -> f64 {
    -probs.into_iter().map(xlogx).sum::<f64>()
}

pub fn entropy(d: &CategoricalDistribution) -> NatsValue {
    NatsValue(entropy_of(d.probs().iter().copied()).max(0.0))
}

fn check_dims(p: &CategoricalDistribution, q: &RetentionVector) -> Result<()> {
    if p.categories() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.categories(),
            found: q.len(),
        });
    }
    Ok(())
}

/// Released-category law `m_j = p_j q_j + sum_{k != j} p_k (1 - q_k) / (S - 1)`.
pub fn marginal_z(p: &CategoricalDistribution, q: &RetentionVector) -> Result<CategoricalDistribution> {
    check_dims(p, q)?;
    Ok(CategoricalDistribution::from_simplex_unchecked(marginal_raw(
        p.probs(),
        q.as_slice(),
    )))
}

pub(crate) fn marginal_raw(p: &[f64], q: &[f64]) -> Vec<f64> {
    let s1 = (p.len() - 1) as f64;
    let shared: f64 = p.iter().zip(q).map(|(pk, qk)| pk * (1.0 - qk)).sum::<f64>() / s1;
    p.iter()
        .zip(q)
        .map(|(pj, qj)| (pj * qj + shared - pj * (1.0 - qj) / s1).clamp(0.0, 1.0))
        .collect()
}

/// Raw objective without dimension checks or clamping. Allocation-free so
/// vertex sweeps can call it in a tight loop.
pub(crate) fn objective(p: &[f64], q: &[f64]) -> f64 {
    let s1 = (p.len() - 1) as f64;
    let ln_s1 = s1.ln();
    let mut shared = 0.0;
    let mut neg_cond = 0.0;
    for (pk, qk) in p.iter().zip(q) {
        shared += pk * (1.0 - qk);
        neg_cond += pk * (xlogx(*qk) + xlogx(1.0 - qk) - (1.0 - qk) * ln_s1);
    }
    shared /= s1;
    let h_z: f64 = -p
        .iter()
        .zip(q)
        .map(|(pj, qj)| xlogx((pj * qj + shared - pj * (1.0 - qj) / s1).clamp(0.0, 1.0)))
        .sum::<f64>();
    neg_cond + h_z
}

/// `I(X; Z) = H(Z) - H(Z | X)` for `X ~ p` sent through the PRAM matrix of `q`.
pub fn mutual_information(p: &CategoricalDistribution, q: &RetentionVector) -> Result<NatsValue> {
    check_dims(p, q)?;
    Ok(NatsValue(objective(p.probs(), q.as_slice()).max(0.0)))
}

/// Plug-in estimate `H(X) + H(Z) - H(X,Z)` from paired records.
pub fn plugin_mi(x: &MicrodataColumn, z: &MicrodataColumn) -> Result<NatsValue> {
    if x.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: z.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x.len() as f64;
    let mut cx = vec![0u64; x.categories()];
    let mut cz = vec![0u64; z.categories()];
    let mut joint: HashMap<(u32, u32), u64> = HashMap::new();
    for (&a, &b) in x.records().iter().zip(z.records()) {
        cx[a as usize - 1] += 1;
        cz[b as usize - 1] += 1;
        *joint.entry((a, b)).or_default() += 1;
    }
    let h = |counts: &mut dyn Iterator<Item = u64>| entropy_of(counts.map(|c| c as f64 / n));
    let hx = h(&mut cx.iter().copied());
    let hz = h(&mut cz.iter().copied());
    // sort so the summation order is independent of hash iteration order
    let mut jc: Vec<_> = joint.into_iter().collect();
    jc.sort_unstable();
    let hxz = h(&mut jc.iter().map(|(_, c)| *c));
    Ok(NatsValue((hx + hz - hxz).max(0.0)))
}
