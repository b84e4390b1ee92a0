//! Linearized α-differential-privacy feasible set for the retention vector.
//!
//! For the uniform-off-diagonal PRAM family the supremum likelihood ratio
//! over neighbouring inputs `k != k'` takes one of three forms, depending on
//! whether the released category equals `k`, equals `k'`, or is neither:
//!
//! ```text
//! (S-1) q_k / (1 - q_k')      (1 - q_k) / ((S-1) q_k')      (1 - q_k) / (1 - q_k')
//! ```
//!
//! Bounding each by `e^alpha` and clearing denominators gives, per ordered
//! pair `(x, y) = (q_k, q_k')`, the rows
//!
//! ```text
//! (S-1) x + e^a y     <= e^a
//! -x - (S-1) e^a y    <= -1
//! e^a y - x           <= e^a - 1      (only when S >= 3)
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{PramMatrix, PrivacyLevel, RetentionVector};

/// Default absolute slack for row checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Which released value the likelihood ratio is taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Output equals the first input's category.
    Retained,
    /// Output equals the neighbouring input's category.
    Swapped,
    /// Output differs from both; exists only for `S >= 3`.
    Elsewhere,
}

/// One linear inequality `coef_x * q_k + coef_y * q_l <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub k: usize,
    pub l: usize,
    pub family: Family,
    pub coef_x: f64,
    pub coef_y: f64,
    pub bound: f64,
}

impl ConstraintRow {
    pub fn lhs(&self, q: &[f64]) -> f64 {
        self.coef_x * q[self.k] + self.coef_y * q[self.l]
    }

    /// Dense coefficient vector of length `size`.
    pub fn coefficients(&self, size: usize) -> Vec<f64> {
        let mut c = vec![0.0; size];
        c[self.k] = self.coef_x;
        c[self.l] = self.coef_y;
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintSystem {
    size: usize,
    alpha: PrivacyLevel,
    rows: Vec<ConstraintRow>,
}

impl ConstraintSystem {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn alpha(&self) -> PrivacyLevel {
        self.alpha
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    /// Largest violation `lhs - bound` over all rows (negative when strictly inside).
    pub fn max_violation(&self, q: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.lhs(q) - r.bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rows for every ordered pair `(k, l)`, `k != l`, in lexicographic
/// `(k, l, family)` order.
pub fn build_constraint_system(size: usize, alpha: PrivacyLevel) -> Result<ConstraintSystem> {
    if size < 2 {
        return Err(Error::TooFewCategories(size));
    }
    let e = alpha.exp();
    let s1 = (size - 1) as f64;
    let per_pair = if size >= 3 { 3 } else { 2 };
    let mut rows = Vec::with_capacity(per_pair * size * (size - 1));
    for k in 0..size {
        for l in (0..size).filter(|&l| l != k) {
            rows.push(ConstraintRow {
                k,
                l,
                family: Family::Retained,
                coef_x: s1,
                coef_y: e,
                bound: e,
            });
            rows.push(ConstraintRow {
                k,
                l,
                family: Family::Swapped,
                coef_x: -1.0,
                coef_y: -s1 * e,
                bound: -1.0,
            });
            if size >= 3 {
                rows.push(ConstraintRow {
                    k,
                    l,
                    family: Family::Elsewhere,
                    coef_x: -1.0,
                    coef_y: e,
                    bound: e - 1.0,
                });
            }
        }
    }
    Ok(ConstraintSystem { size, alpha, rows })
}

/// True iff every row holds within `tol`.
pub fn is_feasible(q: &RetentionVector, system: &ConstraintSystem, tol: f64) -> Result<bool> {
    if q.len() != system.size {
        return Err(Error::DimensionMismatch {
            expected: system.size,
            found: q.len(),
        });
    }
    let q = q.as_slice();
    Ok(system.rows.iter().all(|r| r.lhs(q) <= r.bound + tol))
}

/// Location of the largest likelihood ratio, 1-based category ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Argmax {
    pub k: usize,
    #[serde(rename = "kprime")]
    pub k_prime: usize,
    pub family: Family,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else if num > 0.0 {
        Some(f64::INFINITY)
    } else {
        // both outcomes have zero probability; no constraint
        None
    }
}

fn supremum_ratio(m: &PramMatrix) -> (f64, Option<Argmax>) {
    let q = m.retention().as_slice();
    let size = m.size();
    let s1 = (size - 1) as f64;
    let mut best = 0.0;
    let mut arg = None;
    for k in 0..size {
        for kp in (0..size).filter(|&kp| kp != k) {
            let candidates = [
                (Family::Retained, ratio(s1 * q[k], 1.0 - q[kp])),
                (Family::Swapped, ratio(1.0 - q[k], s1 * q[kp])),
                (
                    Family::Elsewhere,
                    if size >= 3 {
                        ratio(1.0 - q[k], 1.0 - q[kp])
                    } else {
                        None
                    },
                ),
            ];
            for (family, r) in candidates {
                if let Some(r) = r {
                    if arg.is_none() || r > best {
                        best = r;
                        arg = Some(Argmax {
                            k: k + 1,
                            k_prime: kp + 1,
                            family,
                        });
                    }
                }
            }
        }
    }
    (best, arg)
}

/// Supremum of `Q(z|x) / Q(z|x')` over `z` and `x != x'`.
pub fn dp_ratio(m: &PramMatrix) -> f64 {
    supremum_ratio(m).0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub dp_ratio: f64,
    pub exp_alpha: f64,
    pub pass: bool,
    pub argmax: Option<Argmax>,
}

/// Computes the mechanism's worst-case ratio and compares it to `e^alpha`.
pub fn certify(m: &PramMatrix, alpha: PrivacyLevel, tol: f64) -> Certificate {
    let (r, argmax) = supremum_ratio(m);
    let exp_alpha = alpha.exp();
    Certificate {
        dp_ratio: r,
        exp_alpha,
        pass: r <= exp_alpha * (1.0 + tol),
        argmax,
    }
}
