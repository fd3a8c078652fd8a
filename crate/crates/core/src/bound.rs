//! Permanent-based upper bounds on the minimum distance of any QC code lifted
//! from a protomatrix.
//!
//! For every set `S` of `n_c + 1` columns the quantity
//! `sum_{i in S \ punctured} perm(P_{S \ i})` is the weight bound of one
//! codeword; the overall bound is the smallest non-zero such value.
//!
//! [`full_bound`] enumerates all `C(n_v, n_c + 1)` sets and is the reference.
//! [`reduced_bound`] exploits the raptor-like layout: for unpunctured
//! matrices only the `C(n_vH, n_cH + 1)` sets containing every
//! incremental-redundancy column need to be visited, and every permanent
//! there collapses to a core of at most `n_cH + 1` rows. With punctured
//! columns a second group of sets (those containing a punctured column but
//! not the whole redundancy block) must be added.

use std::fmt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering as AtomicOrdering};

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::permanent::{perm_reduced_detailed, perm_ryser, PermanentError, SquareIntMatrix};
use crate::protomatrix::{Protomatrix, ProtomatrixError, RatePoint};

/// Default ceiling on the number of column sets [`full_bound`] will visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundError {
    #[error("min* of an empty set")]
    EmptyInput,
    #[error("full enumeration needs {needed} column sets, cap is {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("column set has {found} columns, expected n_c + 1 = {expected}")]
    SubsetSize { found: usize, expected: usize },
    #[error("column {0} is out of range or repeated")]
    BadColumn(usize),
    #[error("design rate must be positive: n_v = {n_v}, n_c = {n_c}")]
    NoPositiveRate { n_c: usize, n_v: usize },
    #[error(transparent)]
    Permanent(#[from] PermanentError),
    #[error(transparent)]
    Protomatrix(#[from] ProtomatrixError),
}

/// Result of a `min*`: a positive integer, or infinite when every candidate
/// value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundValue {
    Finite(u128),
    Infinite,
}

impl BoundValue {
    pub fn finite(self) -> Option<u128> {
        match self {
            BoundValue::Finite(v) => Some(v),
            BoundValue::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, BoundValue::Finite(_))
    }

    /// `min*` merge of two partial results.
    pub fn merge(self, other: BoundValue) -> BoundValue {
        self.min(other)
    }

    fn from_sum(sum: u128) -> BoundValue {
        if sum == 0 {
            BoundValue::Infinite
        } else {
            BoundValue::Finite(sum)
        }
    }
}

impl fmt::Display for BoundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundValue::Finite(v) => write!(f, "{v}"),
            BoundValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for BoundValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BoundValue::Finite(v) => s.serialize_u128(*v),
            BoundValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for BoundValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = BoundValue;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"inf\"")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<BoundValue, E> {
                self.visit_u128(v as u128)
            }

            fn visit_u128<E: serde::de::Error>(self, v: u128) -> Result<BoundValue, E> {
                match v {
                    0 => Err(E::custom("bound must be positive")),
                    v => Ok(BoundValue::Finite(v)),
                }
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<BoundValue, E> {
                match v {
                    "inf" => Ok(BoundValue::Infinite),
                    _ => Err(E::custom(format!("invalid bound `{v}`"))),
                }
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// Smallest strictly positive value, or infinite when all values are zero.
pub fn min_star(values: impl IntoIterator<Item = u128>) -> Result<BoundValue, BoundError> {
    let mut seen = false;
    let mut best = BoundValue::Infinite;
    for v in values {
        seen = true;
        best = best.merge(BoundValue::from_sum(v));
    }
    if seen {
        Ok(best)
    } else {
        Err(BoundError::EmptyInput)
    }
}

/// One column set together with its restricted permanent sum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsetSum {
    /// 1-based, ascending.
    pub columns: Vec<usize>,
    pub value: u128,
}

/// Counters and value of a bound computation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub bound: BoundValue,
    /// Column sets visited.
    pub subsets: u64,
    /// Sets containing the whole redundancy block (reduced path only).
    pub group1_subsets: u64,
    /// Sets with a punctured column but not the whole redundancy block
    /// (reduced path only).
    pub group2_subsets: u64,
    /// Permanents evaluated.
    pub permanents: u64,
    /// Largest matrix handed to Ryser after singleton stripping, over the
    /// sets containing the whole redundancy block (reduced path only).
    pub max_core_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Engine {
    Ryser,
    Reduced,
}

#[derive(Default)]
struct Counters {
    permanents: AtomicU64,
    max_core: AtomicUsize,
}

/// Memo of subset sums keyed by the column sub-matrix contents and the
/// puncture pattern of its columns. Sharing one cache across many closely
/// related protomatrices (as the greedy designer does) avoids recomputing
/// the sets whose sub-matrix did not change.
#[derive(Debug, Default)]
pub struct SubsetSumCache {
    map: DashMap<(usize, Vec<u8>, u64), u128>,
}

impl SubsetSumCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn column_matrix(p: &Protomatrix, cols: &[usize]) -> SquareIntMatrix {
    let n = cols.len();
    debug_assert_eq!(n, p.n_c());
    let mut entries = Vec::with_capacity(n * n);
    for r in 0..p.n_c() {
        entries.extend(cols.iter().map(|&c| p.get(r, c) as u64));
    }
    SquareIntMatrix::new(n, entries).expect("square by construction")
}

/// Restricted sum for 0-based columns `set`.
fn restricted_sum(
    p: &Protomatrix,
    set: &[usize],
    engine: Engine,
    counters: &Counters,
    track_core: bool,
) -> Result<u128, BoundError> {
    let mut sum: u128 = 0;
    let mut rest = Vec::with_capacity(set.len() - 1);
    for (k, &drop) in set.iter().enumerate() {
        if p.is_punctured(drop + 1) {
            continue;
        }
        rest.clear();
        rest.extend(
            set.iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &c)| c),
        );
        let m = column_matrix(p, &rest);
        let value = match engine {
            Engine::Ryser => perm_ryser(&m)?,
            Engine::Reduced => {
                let r = perm_reduced_detailed(&m)?;
                if track_core {
                    counters
                        .max_core
                        .fetch_max(r.core_dim, AtomicOrdering::Relaxed);
                }
                r.value
            }
        };
        counters.permanents.fetch_add(1, AtomicOrdering::Relaxed);
        sum = sum.checked_add(value).ok_or(PermanentError::Overflow)?;
    }
    Ok(sum)
}

fn cached_sum(
    p: &Protomatrix,
    set: &[usize],
    counters: &Counters,
    track_core: bool,
    cache: Option<&SubsetSumCache>,
) -> Result<u128, BoundError> {
    let Some(cache) = cache else {
        return restricted_sum(p, set, Engine::Reduced, counters, track_core);
    };
    let mask = set
        .iter()
        .enumerate()
        .filter(|(_, &c)| p.is_punctured(c + 1))
        .fold(0u64, |m, (k, _)| m | (1 << k));
    let key = (p.n_c(), p.columns(set), mask);
    if let Some(v) = cache.map.get(&key) {
        return Ok(*v);
    }
    let v = restricted_sum(p, set, Engine::Reduced, counters, track_core)?;
    cache.map.insert(key, v);
    Ok(v)
}

fn check_positive_rate(p: &Protomatrix) -> Result<(), BoundError> {
    if p.n_v() <= p.n_c() {
        return Err(BoundError::NoPositiveRate {
            n_c: p.n_c(),
            n_v: p.n_v(),
        });
    }
    Ok(())
}

/// Restricted permanent sum over the 1-based column set `columns`.
pub fn subset_sum(p: &Protomatrix, columns: &[usize]) -> Result<SubsetSum, BoundError> {
    if columns.len() != p.n_c() + 1 {
        return Err(BoundError::SubsetSize {
            found: columns.len(),
            expected: p.n_c() + 1,
        });
    }
    let mut sorted = columns.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(BoundError::BadColumn(w[0]));
        }
    }
    if let Some(&c) = sorted.iter().find(|&&c| c == 0 || c > p.n_v()) {
        return Err(BoundError::BadColumn(c));
    }
    let set: Vec<usize> = sorted.iter().map(|c| c - 1).collect();
    let value = restricted_sum(p, &set, Engine::Reduced, &Counters::default(), false)?;
    Ok(SubsetSum {
        columns: sorted,
        value,
    })
}

/// Binomial coefficient, zero outside `0 <= k <= n`.
pub fn binomial(n: i64, k: i64) -> u128 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// The `idx`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut idx: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    for slot in 0..k {
        loop {
            let remaining = binomial((n - next - 1) as i64, (k - slot - 1) as i64);
            if idx < remaining {
                out.push(next);
                next += 1;
                break;
            }
            idx -= remaining;
            next += 1;
        }
    }
    out
}

/// Bound by enumerating every `(n_c + 1)`-column set, capped at
/// [`DEFAULT_ENUMERATION_CAP`] sets.
pub fn full_bound(p: &Protomatrix) -> Result<BoundValue, BoundError> {
    full_bound_report(p, DEFAULT_ENUMERATION_CAP).map(|r| r.bound)
}

/// [`full_bound`] with counters and an explicit enumeration cap. Permanents
/// are evaluated with Ryser's formula directly, independent of the
/// structural reduction used by [`reduced_bound`].
pub fn full_bound_report(p: &Protomatrix, cap: u128) -> Result<BoundReport, BoundError> {
    check_positive_rate(p)?;
    let n = p.n_v();
    let k = p.n_c() + 1;
    let total = binomial(n as i64, k as i64);
    if total > cap {
        return Err(BoundError::CapExceeded { needed: total, cap });
    }
    let counters = Counters::default();
    let bound = (0..total as u64)
        .into_par_iter()
        .map(|idx| {
            let set = unrank_combination(n, k, idx as u128);
            restricted_sum(p, &set, Engine::Ryser, &counters, false).map(BoundValue::from_sum)
        })
        .try_reduce(|| BoundValue::Infinite, |a, b| Ok(a.merge(b)))?;
    Ok(BoundReport {
        bound,
        subsets: total as u64,
        group1_subsets: 0,
        group2_subsets: 0,
        permanents: counters.permanents.into_inner(),
        max_core_dim: 0,
    })
}

type ColumnSets = Vec<Vec<usize>>;

/// Column sets visited by the reduced path, split into its two groups.
/// Columns are 0-based.
fn reduced_sets(p: &Protomatrix) -> Result<(ColumnSets, ColumnSets), BoundError> {
    let h = p.hrc_shape().ok_or(ProtomatrixError::MissingStructure)?;
    let n_vh = h.vars;
    let ir: Vec<usize> = (n_vh..p.n_v()).collect();
    let n_ir = ir.len();
    let k = p.n_c() + 1;

    use itertools::Itertools;
    let group1: Vec<Vec<usize>> = (0..n_vh)
        .combinations(h.checks + 1)
        .map(|mut s| {
            s.extend_from_slice(&ir);
            s
        })
        .collect();

    let punct: Vec<usize> = (0..n_vh).filter(|&c| p.is_punctured(c + 1)).collect();
    let plain: Vec<usize> = (0..n_vh).filter(|&c| !p.is_punctured(c + 1)).collect();
    let mut group2 = Vec::new();
    for i in 1..=punct.len() {
        for j in 0..n_ir {
            let Some(rest) = k.checked_sub(i + j) else {
                continue;
            };
            if rest > plain.len() {
                continue;
            }
            for ps in punct.iter().copied().combinations(i) {
                for irs in ir.iter().copied().combinations(j) {
                    for hs in plain.iter().copied().combinations(rest) {
                        let mut s: Vec<usize> = ps
                            .iter()
                            .chain(irs.iter())
                            .chain(hs.iter())
                            .copied()
                            .collect();
                        s.sort_unstable();
                        group2.push(s);
                    }
                }
            }
        }
    }
    Ok((group1, group2))
}

/// Bound using only the column sets the raptor-like layout makes necessary.
///
/// Requires a block layout, and assumes the full bound is finite (which the
/// designer guarantees by starting from a core with a finite bound); under
/// that assumption the result equals [`full_bound`].
pub fn reduced_bound(p: &Protomatrix) -> Result<BoundValue, BoundError> {
    reduced_bound_report(p, None).map(|r| r.bound)
}

/// [`reduced_bound`] with counters and an optional subset-sum memo.
pub fn reduced_bound_report(
    p: &Protomatrix,
    cache: Option<&SubsetSumCache>,
) -> Result<BoundReport, BoundError> {
    check_positive_rate(p)?;
    let (group1, group2) = reduced_sets(p)?;
    let counters = Counters::default();
    let b1 = group1
        .par_iter()
        .map(|s| cached_sum(p, s, &counters, true, cache).map(BoundValue::from_sum))
        .try_reduce(|| BoundValue::Infinite, |a, b| Ok(a.merge(b)))?;
    let max_core_dim = counters.max_core.load(AtomicOrdering::Relaxed);
    let b2 = group2
        .par_iter()
        .map(|s| cached_sum(p, s, &counters, false, cache).map(BoundValue::from_sum))
        .try_reduce(|| BoundValue::Infinite, |a, b| Ok(a.merge(b)))?;
    Ok(BoundReport {
        bound: b1.merge(b2),
        subsets: (group1.len() + group2.len()) as u64,
        group1_subsets: group1.len() as u64,
        group2_subsets: group2.len() as u64,
        permanents: counters.permanents.into_inner(),
        max_core_dim,
    })
}

/// Number of sets with at least one punctured column and not the whole
/// redundancy block:
/// `sum_{i=1}^{n_p} sum_{j=0}^{n_v - n_vH - 1} C(n_p, i) C(n_vH - n_p, n_c + 1 - i - j) C(n_v - n_vH, j)`.
pub fn count_punctured_subsets(p: &Protomatrix) -> Result<u128, BoundError> {
    let h = p.hrc_shape().ok_or(ProtomatrixError::MissingStructure)?;
    let n_p = p.n_p() as i64;
    let n_vh = h.vars as i64;
    let n_ir = (p.n_v() - h.vars) as i64;
    let k = p.n_c() as i64 + 1;
    let mut total = 0u128;
    for i in 1..=n_p {
        for j in 0..n_ir {
            total += binomial(n_p, i) * binomial(n_vh - n_p, k - i - j) * binomial(n_ir, j);
        }
    }
    Ok(total)
}

/// One point of a rate/bound curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfilePoint {
    pub rows: usize,
    #[serde(serialize_with = "serialize_rate")]
    pub rate: RatePoint,
    pub bound: BoundValue,
}

pub(crate) fn serialize_rate<S: Serializer>(r: &RatePoint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// [`reduced_bound`] of every rate-compatible prefix, highest rate first.
pub fn bound_profile(p: &Protomatrix) -> Result<Vec<ProfilePoint>, BoundError> {
    let h = p.hrc_shape().ok_or(ProtomatrixError::MissingStructure)?;
    (h.checks..=p.n_c())
        .map(|rows| {
            let q = p.prefix(rows)?;
            Ok(ProfilePoint {
                rows,
                rate: q.rate()?,
                bound: reduced_bound(&q)?,
            })
        })
        .collect()
}
