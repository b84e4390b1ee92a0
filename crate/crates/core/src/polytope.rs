//! Vertices of the private retention polytope.
//!
//! When `S >= 4` and `alpha <= ln((S - 2 + sqrt(S (S - 4))) / 2)`, every
//! vertex takes coordinates from four levels only, and up to permutation is
//! one of: all `v_plus`; all `v_minus`; a `v_plus`/`v_minus` mix with between
//! 2 and `S - 2` pluses; one `v_min` among `v_plus`; one `v_max` among
//! `v_minus`. That is exactly `2^S` candidates.
//!
//! [`enumerate_vertices_oracle`] recovers the vertex set by brute force for
//! small `S` so the closed form can be checked independently.

use rayon::prelude::*;
use serde::Serialize;

use crate::dp::{build_constraint_system, ConstraintRow, ConstraintSystem, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::types::{PrivacyLevel, RetentionVector};

/// L∞ radius under which two oracle solutions are the same vertex.
pub const DEDUP_TOL: f64 = 1e-7;
/// Largest `S` the brute-force oracle accepts.
pub const ORACLE_MAX_SIZE: usize = 5;
/// Largest `S` whose `2^S` candidates can be indexed by a `u64` mask.
pub const MASK_MAX_SIZE: usize = 63;

/// The four coordinate levels of closed-form vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexValues {
    pub v_plus: f64,
    pub v_minus: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl VertexValues {
    pub fn value(&self, level: Level) -> f64 {
        match level {
            Level::Max => self.v_max,
            Level::Plus => self.v_plus,
            Level::Minus => self.v_minus,
            Level::Min => self.v_min,
        }
    }

    /// Level whose value is within `tol` of `x`. When levels coincide
    /// (`alpha = 0`) the plus/minus levels win over the extremes.
    pub fn classify(&self, x: f64, tol: f64) -> Option<Level> {
        [Level::Plus, Level::Minus, Level::Min, Level::Max]
            .into_iter()
            .find(|&l| (self.value(l) - x).abs() <= tol)
    }

    /// `v_min <= q_k <= v_max` for every coordinate.
    pub fn within_bounds(&self, q: &[f64], tol: f64) -> bool {
        q.iter()
            .all(|&x| x >= self.v_min - tol && x <= self.v_max + tol)
    }

    /// At most one coordinate above `v_plus` and at most one below `v_minus`.
    pub fn lemma_holds(&self, q: &[f64], tol: f64) -> bool {
        let above = q.iter().filter(|&&x| x > self.v_plus + tol).count();
        let below = q.iter().filter(|&&x| x < self.v_minus - tol).count();
        above <= 1 && below <= 1
    }
}

pub fn vertex_values(size: usize, alpha: PrivacyLevel) -> VertexValues {
    let s1 = (size - 1) as f64;
    let ep = alpha.exp();
    let em = (-alpha.value()).exp();
    VertexValues {
        v_plus: ep / (ep + s1),
        v_minus: em / (em + s1),
        v_min: em / (ep + s1),
        v_max: ep / (em + s1),
    }
}

/// Largest `alpha` for which the closed-form vertex list is exact, if `S >= 4`.
pub fn prop2_threshold(size: usize) -> Option<f64> {
    if size < 4 {
        return None;
    }
    let s = size as f64;
    Some(((s - 2.0 + (s * (s - 4.0)).sqrt()) / 2.0).ln())
}

pub fn prop2_applicable(size: usize, alpha: PrivacyLevel) -> bool {
    prop2_threshold(size).is_some_and(|t| alpha.value() <= t)
}

/// Coordinate level, declared in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Max,
    Plus,
    Minus,
    Min,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Max, Level::Plus, Level::Minus, Level::Min];
}

/// Which closed-form family a vertex belongs to. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexPattern {
    AllPlus,
    AllMinus,
    /// `true` marks a `v_plus` coordinate; between 2 and `S - 2` are set.
    Mixed(Vec<bool>),
    MinSpecial(usize),
    MaxSpecial(usize),
}

impl VertexPattern {
    pub fn levels(&self, size: usize) -> Vec<Level> {
        match self {
            VertexPattern::AllPlus => vec![Level::Plus; size],
            VertexPattern::AllMinus => vec![Level::Minus; size],
            VertexPattern::Mixed(signs) => signs
                .iter()
                .map(|&s| if s { Level::Plus } else { Level::Minus })
                .collect(),
            VertexPattern::MinSpecial(i) => {
                let mut l = vec![Level::Plus; size];
                l[*i] = Level::Min;
                l
            }
            VertexPattern::MaxSpecial(i) => {
                let mut l = vec![Level::Minus; size];
                l[*i] = Level::Max;
                l
            }
        }
    }

    /// Pattern from a plus-mask, with the two `popcount == 1` / `S - 1`
    /// bands mapped onto the special families so that every mask in
    /// `0..2^S` names a distinct vertex.
    pub fn from_mask(mask: u64, size: usize) -> Self {
        let full = if size == 64 { u64::MAX } else { (1u64 << size) - 1 };
        let plus = mask.count_ones() as usize;
        if mask == full {
            VertexPattern::AllPlus
        } else if mask == 0 {
            VertexPattern::AllMinus
        } else if plus == 1 {
            VertexPattern::MaxSpecial(mask.trailing_zeros() as usize)
        } else if plus == size - 1 {
            VertexPattern::MinSpecial((!mask & full).trailing_zeros() as usize)
        } else {
            VertexPattern::Mixed((0..size).map(|k| mask >> k & 1 == 1).collect())
        }
    }

    pub fn is_valid(&self, size: usize) -> bool {
        match self {
            VertexPattern::Mixed(signs) => {
                let plus = signs.iter().filter(|&&s| s).count();
                signs.len() == size && (2..=size.saturating_sub(2)).contains(&plus)
            }
            VertexPattern::MinSpecial(i) | VertexPattern::MaxSpecial(i) => *i < size,
            _ => true,
        }
    }

    pub fn realize(&self, values: &VertexValues, size: usize) -> Vec<f64> {
        self.levels(size).into_iter().map(|l| values.value(l)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexCandidate {
    pub pattern: VertexPattern,
    pub q: RetentionVector,
}

impl VertexCandidate {
    fn new(pattern: VertexPattern, values: &VertexValues, size: usize) -> Self {
        let q = RetentionVector::new(pattern.realize(values, size))
            .expect("vertex levels lie in [0, 1]");
        Self { pattern, q }
    }
}

/// All `2^S` closed-form vertices: `AllPlus`, `AllMinus`, the mixed sign
/// vectors by ascending plus-mask, then `MinSpecial(i)` and `MaxSpecial(i)`
/// by ascending `i`.
pub fn enumerate_vertices_prop2(
    size: usize,
    alpha: PrivacyLevel,
) -> Result<impl Iterator<Item = VertexCandidate>> {
    if !prop2_applicable(size, alpha) {
        return Err(Error::NotApplicable {
            categories: size,
            alpha: alpha.value(),
        });
    }
    if size > MASK_MAX_SIZE {
        return Err(Error::TooLarge {
            size,
            limit: MASK_MAX_SIZE,
        });
    }
    let values = vertex_values(size, alpha);
    let constant = [VertexPattern::AllPlus, VertexPattern::AllMinus].into_iter();
    let mixed = (0u64..1u64 << size)
        .filter(move |m| (2..=size - 2).contains(&(m.count_ones() as usize)))
        .map(move |m| VertexPattern::from_mask(m, size));
    let mins = (0..size).map(VertexPattern::MinSpecial);
    let maxs = (0..size).map(VertexPattern::MaxSpecial);
    Ok(constant
        .chain(mixed)
        .chain(mins)
        .chain(maxs)
        .map(move |p| VertexCandidate::new(p, &values, size)))
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn push_unique(points: &mut Vec<Vec<f64>>, candidate: Vec<f64>) {
    if !points.iter().any(|p| linf(p, &candidate) <= DEDUP_TOL) {
        points.push(candidate);
    }
}

type Dense = [f64; ORACLE_MAX_SIZE];

/// Partially reduced equality system shared along one branch of the subset
/// search. Row `i` has its pivot in column `pivots[i]`, and later rows have
/// that column eliminated.
struct Echelon {
    size: usize,
    rows: Vec<(Dense, f64)>,
    pivots: Vec<usize>,
}

impl Echelon {
    /// Reduces `row` against the current basis and appends it, or returns
    /// `false` when it is (numerically) dependent.
    fn push(&mut self, row: &ConstraintRow) -> bool {
        let mut c: Dense = [0.0; ORACLE_MAX_SIZE];
        c[row.k] = row.coef_x;
        c[row.l] = row.coef_y;
        let mut b = row.bound;
        let scale = row.coef_x.abs().max(row.coef_y.abs());
        for ((basis, bb), &p) in self.rows.iter().zip(&self.pivots) {
            let f = c[p] / basis[p];
            if f != 0.0 {
                for j in 0..self.size {
                    c[j] -= f * basis[j];
                }
                c[p] = 0.0;
                b -= f * bb;
            }
        }
        let (pivot, mag) = (0..self.size)
            .map(|j| (j, c[j].abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag < 1e-10 * scale {
            return false;
        }
        self.rows.push((c, b));
        self.pivots.push(pivot);
        true
    }

    fn pop(&mut self) {
        self.rows.pop();
        self.pivots.pop();
    }

    /// Back-substitution once the basis has full rank.
    fn solve(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.size];
        for (i, ((row, b), &p)) in self.rows.iter().zip(&self.pivots).enumerate().rev() {
            let tail: f64 = self.pivots[i + 1..]
                .iter()
                .map(|&q| row[q] * x[q])
                .sum();
            x[p] = (b - tail) / row[p];
        }
        x
    }
}

/// Extends the current basis with every increasing tail drawn from
/// `start..total`, pruning branches as soon as a row is dependent.
fn scan_combinations(
    system: &ConstraintSystem,
    basis: &mut Echelon,
    start: usize,
    out: &mut Vec<Vec<f64>>,
) {
    let size = system.size();
    let total = system.rows().len();
    if basis.rows.len() == size {
        let x = basis.solve();
        if system.max_violation(&x) <= FEASIBILITY_TOL {
            push_unique(out, x);
        }
        return;
    }
    let remaining = size - basis.rows.len();
    for i in start..=total - remaining {
        if basis.push(&system.rows()[i]) {
            scan_combinations(system, basis, i + 1, out);
            basis.pop();
        }
    }
}

/// Brute-force vertex set: every `S`-subset of constraint rows whose
/// equality system is nonsingular and whose solution is feasible, merged
/// within [`DEDUP_TOL`] and sorted lexicographically.
pub fn enumerate_vertices_oracle(size: usize, alpha: PrivacyLevel) -> Result<Vec<RetentionVector>> {
    if size > ORACLE_MAX_SIZE {
        return Err(Error::TooLarge {
            size,
            limit: ORACLE_MAX_SIZE,
        });
    }
    let system = build_constraint_system(size, alpha)?;
    let total = system.rows().len();
    let per_first: Vec<Vec<Vec<f64>>> = (0..=total - size)
        .into_par_iter()
        .map(|first| {
            let mut found = Vec::new();
            let mut basis = Echelon {
                size,
                rows: Vec::with_capacity(size),
                pivots: Vec::with_capacity(size),
            };
            if basis.push(&system.rows()[first]) {
                scan_combinations(&system, &mut basis, first + 1, &mut found);
            }
            found
        })
        .collect();
    let mut points = Vec::new();
    for x in per_first.into_iter().flatten() {
        push_unique(&mut points, x);
    }
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points
        .into_iter()
        .map(|x| RetentionVector::new(x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()))
        .collect()
}
