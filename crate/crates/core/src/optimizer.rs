//! Maximizes `I(X; Z)` over the private retention polytope.
//!
//! The objective is convex in `q`, so its maximum over the polytope is
//! attained at a vertex and every method below scores vertices only:
//! closed forms for `S = 2`, brute-force oracle vertices for small `S`
//! outside the closed-form regime, an exhaustive `2^S` sweep up to
//! [`EXHAUSTIVE_MAX_SIZE`], and a hill-climb over closed-form vertex
//! patterns beyond that.
//!
//! Ties (within [`TIE_TOL`]) are broken by the lexicographically smallest
//! level signature with `v_max < v_plus < v_minus < v_min` per coordinate.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{objective, xlogx, NatsValue};
use crate::polytope::{
    enumerate_vertices_oracle, prop2_applicable, vertex_values, Level, VertexPattern,
    VertexValues, ORACLE_MAX_SIZE,
};
use crate::types::{CategoricalDistribution, PrivacyLevel, RetentionVector};

pub const EXHAUSTIVE_MAX_SIZE: usize = 24;
pub const DEFAULT_RESTARTS: usize = 32;
/// Objective values closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-12;
/// Tolerance for matching a coordinate to one of the four vertex levels.
pub const LEVEL_TOL: f64 = 1e-9;
/// Tied optima listed in a report; `tie_count` carries the full number.
pub const MAX_REPORTED_TIES: usize = 64;
/// Reference comparisons enumerate at most this many placements.
const MAX_REFERENCE_PLACEMENTS: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Auto,
    Exhaustive,
    LocalSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedFormBinary,
    ClosedFormSymmetric,
    Exhaustive,
    Oracle,
    LocalSearch,
}

/// How many coordinates sit at each vertex level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PatternSummary {
    pub v_plus: usize,
    pub v_minus: usize,
    pub v_min: usize,
    pub v_max: usize,
    /// Coordinates matching none of the four levels (oracle vertices only).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub other: usize,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

impl PatternSummary {
    pub const fn counts(v_plus: usize, v_minus: usize, v_min: usize, v_max: usize) -> Self {
        Self {
            v_plus,
            v_minus,
            v_min,
            v_max,
            other: 0,
        }
    }

    pub fn from_levels<'a>(levels: impl IntoIterator<Item = &'a Option<Level>>) -> Self {
        let mut s = Self::default();
        for l in levels {
            match l {
                Some(Level::Plus) => s.v_plus += 1,
                Some(Level::Minus) => s.v_minus += 1,
                Some(Level::Min) => s.v_min += 1,
                Some(Level::Max) => s.v_max += 1,
                None => s.other += 1,
            }
        }
        s
    }

    pub fn total(&self) -> usize {
        self.v_plus + self.v_minus + self.v_min + self.v_max + self.other
    }
}

/// An alternate optimum with the same objective value as `q_star`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiedOptimum {
    pub q: Vec<f64>,
    pub levels: Vec<Option<Level>>,
}

/// Comparison of the optimum against a vertex family with prescribed counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub reference: PatternSummary,
    pub matches_reference: bool,
    /// Best objective among vertices with the reference counts.
    pub reference_mi_nats: f64,
    /// `mi_nats - reference_mi_nats`.
    pub margin_nats: f64,
    /// Set when the optimum differs from the reference and beats it by more
    /// than `1e-9` nats.
    pub dominates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationReport {
    pub q_star: RetentionVector,
    pub mi_nats: NatsValue,
    pub pattern_summary: PatternSummary,
    pub method: Method,
    pub candidates_evaluated: u64,
    pub ties: Vec<TiedOptimum>,
    pub tie_count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dominance: Option<DominanceCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimizeOptions {
    pub strategy: Strategy,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Auto,
            seed: 0,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

/// Sort key: level codes (unknown levels after `Min`), then raw coordinates.
#[derive(Debug, Clone, PartialEq)]
struct Scored {
    value: f64,
    levels: Vec<Option<Level>>,
    q: Vec<f64>,
}

fn level_code(l: &Option<Level>) -> u8 {
    match l {
        Some(Level::Max) => 0,
        Some(Level::Plus) => 1,
        Some(Level::Minus) => 2,
        Some(Level::Min) => 3,
        None => 4,
    }
}

fn signature_cmp(a: &Scored, b: &Scored) -> Ordering {
    a.levels
        .iter()
        .map(level_code)
        .cmp(b.levels.iter().map(level_code))
        .then_with(|| {
            a.q.iter()
                .zip(&b.q)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

fn classify_all(values: &VertexValues, q: &[f64]) -> Vec<Option<Level>> {
    q.iter().map(|&x| values.classify(x, LEVEL_TOL)).collect()
}

fn exact_levels(pattern: &VertexPattern, size: usize) -> Vec<Option<Level>> {
    pattern.levels(size).into_iter().map(Some).collect()
}

/// Picks the winner among near-best candidates and assembles the report.
fn finish(
    p: &CategoricalDistribution,
    mut tied: Vec<Scored>,
    tie_count: u64,
    method: Method,
    candidates_evaluated: u64,
) -> Result<OptimizationReport> {
    tied.sort_by(signature_cmp);
    let mut rest = tied.into_iter();
    let best = rest.next().expect("at least one candidate");
    let q_star = RetentionVector::new(best.q.iter().map(|x| x.clamp(0.0, 1.0)).collect())?;
    let mi_nats = crate::info::mutual_information(p, &q_star)?;
    Ok(OptimizationReport {
        q_star,
        mi_nats,
        pattern_summary: PatternSummary::from_levels(&best.levels),
        method,
        candidates_evaluated,
        ties: rest
            .take(MAX_REPORTED_TIES)
            .map(|s| TiedOptimum {
                q: s.q,
                levels: s.levels,
            })
            .collect(),
        tie_count: tie_count.saturating_sub(1),
        dominance: None,
    })
}

/// Scores an explicit list of candidate points.
fn score_points(
    p: &CategoricalDistribution,
    points: Vec<(Vec<f64>, Vec<Option<Level>>)>,
    method: Method,
) -> Result<OptimizationReport> {
    let evaluated = points.len() as u64;
    let scored: Vec<Scored> = points
        .into_iter()
        .map(|(q, levels)| Scored {
            value: objective(p.probs(), &q),
            levels,
            q,
        })
        .collect();
    let best = scored.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<Scored> = scored
        .into_iter()
        .filter(|s| s.value >= best - TIE_TOL)
        .collect();
    let count = tied.len() as u64;
    finish(p, tied, count, method, evaluated)
}

/// The two symmetric optima `(v, v)` and `(w, w)` of the binary problem,
/// `v = e^a / (1 + e^a)`, `w = 1 / (1 + e^a)`. They do not depend on `p`.
pub fn optimize_binary(alpha: PrivacyLevel) -> (RetentionVector, RetentionVector) {
    let e = alpha.exp();
    let v = e / (1.0 + e);
    let w = 1.0 / (1.0 + e);
    (
        RetentionVector::new(vec![v, v]).expect("in [0, 1]"),
        RetentionVector::new(vec![w, w]).expect("in [0, 1]"),
    )
}

/// Endpoints of the feasible interval when all `q_k` are forced equal:
/// `(e^-a / (S - 1 + e^-a), e^a / (S - 1 + e^a))`.
pub fn optimize_symmetric(size: usize, alpha: PrivacyLevel) -> Result<(RetentionVector, RetentionVector)> {
    if size < 2 {
        return Err(Error::TooFewCategories(size));
    }
    let v = vertex_values(size, alpha);
    Ok((
        RetentionVector::constant(size, v.v_minus)?,
        RetentionVector::constant(size, v.v_plus)?,
    ))
}

/// Best point on the constant-`q` diagonal, for comparison with the full optimum.
pub fn optimize_symmetric_report(
    p: &CategoricalDistribution,
    alpha: PrivacyLevel,
) -> Result<OptimizationReport> {
    let size = p.categories();
    let values = vertex_values(size, alpha);
    let (lo, hi) = optimize_symmetric(size, alpha)?;
    let points = [hi, lo]
        .into_iter()
        .map(|q| {
            let levels = classify_all(&values, q.as_slice());
            (q.into_inner(), levels)
        })
        .collect();
    score_points(p, points, Method::ClosedFormSymmetric)
}

fn binary_report(p: &CategoricalDistribution, alpha: PrivacyLevel) -> Result<OptimizationReport> {
    let values = vertex_values(2, alpha);
    let (v, w) = optimize_binary(alpha);
    // the remaining two vertices of the quadrilateral carry zero information
    let points = [v.into_inner(), w.into_inner(), vec![1.0, 0.0], vec![0.0, 1.0]]
        .into_iter()
        .map(|q| {
            let levels = classify_all(&values, &q);
            (q, levels)
        })
        .collect();
    score_points(p, points, Method::ClosedFormBinary)
}

fn oracle_report(p: &CategoricalDistribution, alpha: PrivacyLevel) -> Result<OptimizationReport> {
    let values = vertex_values(p.categories(), alpha);
    let points = enumerate_vertices_oracle(p.categories(), alpha)?
        .into_iter()
        .map(|q| {
            let levels = classify_all(&values, q.as_slice());
            (q.into_inner(), levels)
        })
        .collect();
    score_points(p, points, Method::Oracle)
}

/// Levels taken by set and unset bits of `mask` (see [`VertexPattern::from_mask`]).
#[inline]
fn mask_band(mask: u64, size: usize) -> (Level, Level) {
    let full = (1u64 << size) - 1;
    match mask.count_ones() as usize {
        c if mask == full || (c != 1 && c != size - 1) => (Level::Plus, Level::Minus),
        1 => (Level::Max, Level::Minus),
        _ => (Level::Plus, Level::Min),
    }
}

#[inline]
fn mask_level(mask: u64, size: usize, k: usize) -> Level {
    let (set, unset) = mask_band(mask, size);
    if mask >> k & 1 == 1 {
        set
    } else {
        unset
    }
}

/// Per-coordinate objective terms for each level, so scoring a mask costs
/// `S` logarithms instead of `3S`.
struct MaskScorer {
    size: usize,
    /// `(conditional term, contribution to the shared leak, own share)` per level code.
    terms: Vec<[(f64, f64, f64); 4]>,
}

impl MaskScorer {
    fn new(p: &[f64], values: &VertexValues) -> Self {
        let s1 = (p.len() - 1) as f64;
        let ln_s1 = s1.ln();
        let terms = p
            .iter()
            .map(|&pk| {
                Level::ALL.map(|l| {
                    let q = values.value(l);
                    let cond = pk * (xlogx(q) + xlogx(1.0 - q) - (1.0 - q) * ln_s1);
                    let leak = pk * (1.0 - q) / s1;
                    (cond, leak, pk * q - leak)
                })
            })
            .collect();
        Self { size: p.len(), terms }
    }

    fn score(&self, mask: u64) -> f64 {
        let (set, unset) = mask_band(mask, self.size);
        let (set, unset) = (level_code(&Some(set)) as usize, level_code(&Some(unset)) as usize);
        let mut own = [0.0f64; EXHAUSTIVE_MAX_SIZE];
        let mut shared = 0.0;
        let mut cond = 0.0;
        for (k, t) in self.terms.iter().enumerate() {
            let (c, leak, o) = t[if mask >> k & 1 == 1 { set } else { unset }];
            cond += c;
            shared += leak;
            own[k] = o;
        }
        cond - own[..self.size]
            .iter()
            .map(|o| xlogx((o + shared).clamp(0.0, 1.0)))
            .sum::<f64>()
    }
}

fn mask_signature(mask: u64, size: usize) -> Vec<u8> {
    (0..size)
        .map(|k| level_code(&Some(mask_level(mask, size, k))))
        .collect()
}

/// Keeps the `limit` smallest masks by signature.
fn merge_smallest(mut a: Vec<(Vec<u8>, u64)>, b: Vec<(Vec<u8>, u64)>, limit: usize) -> Vec<(Vec<u8>, u64)> {
    a.extend(b);
    a.sort();
    a.truncate(limit);
    a
}

fn push_smallest(mut acc: Vec<(Vec<u8>, u64)>, item: (Vec<u8>, u64), limit: usize) -> Vec<(Vec<u8>, u64)> {
    acc.push(item);
    if acc.len() >= 4 * limit {
        acc.sort();
        acc.truncate(limit);
    }
    acc
}

fn exhaustive_report(p: &CategoricalDistribution, alpha: PrivacyLevel) -> Result<OptimizationReport> {
    let size = p.categories();
    let values = vertex_values(size, alpha);
    let probs = p.probs();
    let total = 1u64 << size;
    // max over f64 without NaN is associative and commutative, so the
    // parallel reduction is schedule-independent
    let scorer = MaskScorer::new(probs, &values);
    let best = (0..total)
        .into_par_iter()
        .map(|m| scorer.score(m))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let limit = MAX_REPORTED_TIES + 1;
    let (count, smallest) = (0..total)
        .into_par_iter()
        .filter(|&m| scorer.score(m) >= best - TIE_TOL)
        .fold(
            || (0u64, Vec::new()),
            |(c, acc), m| (c + 1, push_smallest(acc, (mask_signature(m, size), m), limit)),
        )
        .reduce(
            || (0u64, Vec::new()),
            |(c1, a), (c2, b)| (c1 + c2, merge_smallest(a, b, limit)),
        );
    let tied = smallest
        .into_iter()
        .map(|(_, m)| {
            let pattern = VertexPattern::from_mask(m, size);
            let q = pattern.realize(&values, size);
            Scored {
                value: objective(probs, &q),
                levels: exact_levels(&pattern, size),
                q,
            }
        })
        .collect();
    finish(p, tied, count, Method::Exhaustive, 2 * total)
}

/// Neighbouring closed-form vertices of `pattern` for the hill-climb:
/// single sign flips, adding, removing or relocating the special
/// coordinate. A flip that lands on a non-vertex sign vector (one plus, or
/// one minus) is replaced by the vertices bounding that edge together with
/// the valid second flips from it.
fn neighbours(pattern: &VertexPattern, size: usize) -> Vec<VertexPattern> {
    let signs: Vec<bool> = match pattern {
        VertexPattern::AllPlus | VertexPattern::MinSpecial(_) => vec![true; size],
        VertexPattern::AllMinus | VertexPattern::MaxSpecial(_) => vec![false; size],
        VertexPattern::Mixed(s) => s.clone(),
    };
    let mut out = Vec::new();
    for j in 0..size {
        let mut flipped = signs.clone();
        flipped[j] = !flipped[j];
        out.extend(sign_vertices(&flipped, size, true));
    }
    match pattern {
        VertexPattern::AllPlus => out.extend((0..size).map(VertexPattern::MinSpecial)),
        VertexPattern::AllMinus => out.extend((0..size).map(VertexPattern::MaxSpecial)),
        VertexPattern::MinSpecial(i) => {
            out.push(VertexPattern::AllPlus);
            out.extend((0..size).filter(|j| j != i).map(VertexPattern::MinSpecial));
        }
        VertexPattern::MaxSpecial(i) => {
            out.push(VertexPattern::AllMinus);
            out.extend((0..size).filter(|j| j != i).map(VertexPattern::MaxSpecial));
        }
        VertexPattern::Mixed(_) => {}
    }
    let mut seen = HashSet::new();
    out.retain(|n| n != pattern && seen.insert(n.clone()));
    out
}

/// Vertices reachable from a sign vector; `extend` also takes second flips
/// out of the one-plus / one-minus bands.
fn sign_vertices(signs: &[bool], size: usize, extend: bool) -> Vec<VertexPattern> {
    let plus = signs.iter().filter(|&&s| s).count();
    if plus == size {
        return vec![VertexPattern::AllPlus];
    }
    if plus == 0 {
        return vec![VertexPattern::AllMinus];
    }
    if (2..=size - 2).contains(&plus) {
        return vec![VertexPattern::Mixed(signs.to_vec())];
    }
    let odd = signs
        .iter()
        .position(|&s| s == (plus == 1))
        .expect("band has one odd coordinate");
    let mut out = if plus == 1 {
        vec![VertexPattern::MaxSpecial(odd), VertexPattern::AllMinus]
    } else {
        vec![VertexPattern::MinSpecial(odd), VertexPattern::AllPlus]
    };
    if extend {
        for t in (0..size).filter(|&t| t != odd) {
            let mut again = signs.to_vec();
            again[t] = !again[t];
            out.extend(sign_vertices(&again, size, false));
        }
    }
    out
}

struct Climber<'a> {
    p: &'a [f64],
    values: VertexValues,
    size: usize,
    evaluated: u64,
}

impl Climber<'_> {
    fn score(&mut self, pattern: VertexPattern) -> Scored {
        self.evaluated += 1;
        let q = pattern.realize(&self.values, self.size);
        Scored {
            value: objective(self.p, &q),
            levels: exact_levels(&pattern, self.size),
            q,
        }
    }

    fn better(a: &Scored, b: &Scored) -> bool {
        a.value > b.value || (a.value == b.value && signature_cmp(a, b) == Ordering::Less)
    }

    fn pattern_of(s: &Scored, size: usize) -> VertexPattern {
        let levels: Vec<Level> = s.levels.iter().map(|l| l.expect("exact")).collect();
        if let Some(i) = levels.iter().position(|&l| l == Level::Min) {
            VertexPattern::MinSpecial(i)
        } else if let Some(i) = levels.iter().position(|&l| l == Level::Max) {
            VertexPattern::MaxSpecial(i)
        } else {
            let signs: Vec<bool> = levels.iter().map(|&l| l == Level::Plus).collect();
            sign_vertices(&signs, size, false).remove(0)
        }
    }

    /// Steepest ascent from `start` until no neighbour strictly improves.
    fn climb(&mut self, start: VertexPattern) -> Scored {
        let mut current = self.score(start);
        loop {
            let pattern = Self::pattern_of(&current, self.size);
            let mut best: Option<Scored> = None;
            for n in neighbours(&pattern, self.size) {
                let s = self.score(n);
                if best.as_ref().is_none_or(|b| Self::better(&s, b)) {
                    best = Some(s);
                }
            }
            match best {
                Some(b) if b.value > current.value => current = b,
                _ => return current,
            }
        }
    }

    /// Seeded random start; one-plus / one-minus draws snap to the better
    /// endpoint of their edge.
    fn random_start(&mut self, rng: &mut ChaCha8Rng) -> VertexPattern {
        let signs: Vec<bool> = (0..self.size).map(|_| rng.gen_bool(0.5)).collect();
        let options = sign_vertices(&signs, self.size, false);
        options
            .into_iter()
            .map(|p| (self.score(p.clone()), p))
            .reduce(|a, b| if Self::better(&b.0, &a.0) { b } else { a })
            .map(|(_, p)| p)
            .expect("nonempty")
    }
}

/// Multi-start hill-climb over closed-form vertex patterns. Starts are
/// `AllPlus`, `AllMinus`, then `restarts - 2` random sign vectors drawn
/// from a ChaCha8 stream seeded with `seed`.
pub fn local_search(
    p: &CategoricalDistribution,
    alpha: PrivacyLevel,
    restarts: usize,
    seed: u64,
) -> Result<OptimizationReport> {
    let size = p.categories();
    if !prop2_applicable(size, alpha) {
        return Err(Error::NotApplicable {
            categories: size,
            alpha: alpha.value(),
        });
    }
    let mut climber = Climber {
        p: p.probs(),
        values: vertex_values(size, alpha),
        size,
        evaluated: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut optima: Vec<Scored> = Vec::new();
    for r in 0..restarts.max(1) {
        let start = match r {
            0 => VertexPattern::AllPlus,
            1 => VertexPattern::AllMinus,
            _ => climber.random_start(&mut rng),
        };
        let found = climber.climb(start);
        if !optima.iter().any(|o| o.levels == found.levels) {
            optima.push(found);
        }
    }
    let best = optima.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<Scored> = optima
        .into_iter()
        .filter(|s| s.value >= best - TIE_TOL)
        .collect();
    let count = tied.len() as u64;
    finish(p, tied, count, Method::LocalSearch, climber.evaluated)
}

/// Maximizes mutual information over the α-private retention polytope.
pub fn optimize(
    p: &CategoricalDistribution,
    alpha: PrivacyLevel,
    options: &OptimizeOptions,
) -> Result<OptimizationReport> {
    let size = p.categories();
    let applicable = prop2_applicable(size, alpha);
    let not_applicable = || Error::NotApplicable {
        categories: size,
        alpha: alpha.value(),
    };
    match options.strategy {
        Strategy::Exhaustive => {
            if !applicable {
                return Err(not_applicable());
            }
            if size > EXHAUSTIVE_MAX_SIZE {
                return Err(Error::InfeasibleStrategy(format!(
                    "exhaustive sweep is capped at S={EXHAUSTIVE_MAX_SIZE}, got S={size}"
                )));
            }
            exhaustive_report(p, alpha)
        }
        Strategy::LocalSearch => local_search(p, alpha, options.restarts, options.seed),
        Strategy::Auto => {
            if size == 2 {
                binary_report(p, alpha)
            } else if !applicable && size <= ORACLE_MAX_SIZE {
                oracle_report(p, alpha)
            } else if applicable && size <= EXHAUSTIVE_MAX_SIZE {
                exhaustive_report(p, alpha)
            } else if applicable {
                local_search(p, alpha, options.restarts, options.seed)
            } else {
                Err(not_applicable())
            }
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Best objective over closed-form vertices whose level counts equal
/// `reference`, or `None` when no such vertex exists or there are too many
/// placements to enumerate.
pub fn best_with_counts(
    p: &CategoricalDistribution,
    alpha: PrivacyLevel,
    reference: &PatternSummary,
) -> Option<(f64, RetentionVector)> {
    let size = p.categories();
    if reference.total() != size || reference.other != 0 {
        return None;
    }
    let values = vertex_values(size, alpha);
    let probs = p.probs();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |q: Vec<f64>| {
        let v = objective(probs, &q);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, q));
        }
    };
    let special = |level: Level, base: Level, consider: &mut dyn FnMut(Vec<f64>)| {
        for i in 0..size {
            let mut q = vec![values.value(base); size];
            q[i] = values.value(level);
            consider(q);
        }
    };
    match (reference.v_min, reference.v_max) {
        (1, 0) if reference.v_plus == size - 1 => special(Level::Min, Level::Plus, &mut consider),
        (0, 1) if reference.v_minus == size - 1 => special(Level::Max, Level::Minus, &mut consider),
        (0, 0) => {
            if binomial(size as u64, reference.v_plus as u64) > MAX_REFERENCE_PLACEMENTS {
                return None;
            }
            for_each_subset(size, reference.v_plus, |plus| {
                let mut q = vec![values.v_minus; size];
                for &k in plus {
                    q[k] = values.v_plus;
                }
                consider(q);
            });
        }
        _ => return None,
    }
    let (v, q) = best?;
    Some((v, RetentionVector::new(q).ok()?))
}

/// Compares `report` against the best vertex having `reference` counts.
pub fn dominance_check(
    p: &CategoricalDistribution,
    alpha: PrivacyLevel,
    report: &OptimizationReport,
    reference: PatternSummary,
) -> Option<DominanceCheck> {
    let (reference_mi, _) = best_with_counts(p, alpha, &reference)?;
    let matches_reference = report.pattern_summary == reference;
    let margin = report.mi_nats.value() - reference_mi;
    Some(DominanceCheck {
        reference,
        matches_reference,
        reference_mi_nats: reference_mi,
        margin_nats: margin,
        dominates: !matches_reference && margin > 1e-9,
    })
}
