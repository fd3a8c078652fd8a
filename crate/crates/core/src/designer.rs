//! Greedy construction of the incremental-redundancy rows.
//!
//! Each round appends one row (plus its degree-one column) to the current
//! protomatrix. Every admissible row is scored, the best score wins, and ties
//! are broken by a seeded ChaCha8 stream so runs are reproducible. Two
//! objectives are available: maximizing the reduced minimum-distance bound
//! ([`Objective::Pbd`]) and minimizing the RCA threshold
//! ([`Objective::Threshold`]).

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bound::{reduced_bound, reduced_bound_report, BoundError, BoundValue, SubsetSumCache};
use crate::protomatrix::{Protomatrix, ProtomatrixError};
use crate::threshold::{self, ThresholdError};

/// Upper limit on the candidate rows of one round.
pub const MAX_CANDIDATES: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("unsatisfiable constraints: {0}")]
    Unsatisfiable(String),
    #[error("{count} candidate rows exceed the limit of {MAX_CANDIDATES}")]
    TooManyCandidates { count: u128 },
    #[error("core bound must be finite and positive, got {0}")]
    CoreBound(BoundValue),
    #[error("no candidate row converges in round {round}")]
    NoViableCandidate { round: usize },
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Protomatrix(#[from] ProtomatrixError),
}

/// Admissible shape of every designed row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignConstraints {
    /// Non-zeros per full row, counting the identity entry; `None` leaves the
    /// weight free.
    pub row_weight: Option<usize>,
    /// Largest entry allowed in the core columns.
    pub max_entry: u8,
    /// 1-based core columns every row must connect to.
    pub forced_columns: BTreeSet<usize>,
    pub num_irc_rows: usize,
}

impl DesignConstraints {
    /// Weight-4 rows with 0/1 entries and no forced columns.
    pub fn weight_four(num_irc_rows: usize) -> Self {
        Self {
            row_weight: Some(4),
            max_entry: 1,
            forced_columns: BTreeSet::new(),
            num_irc_rows,
        }
    }

    pub fn validate(&self, n_vh: usize) -> Result<(), DesignError> {
        if self.max_entry == 0 {
            return Err(DesignError::Unsatisfiable(
                "max_entry must be at least 1".into(),
            ));
        }
        if let Some(&c) = self.forced_columns.iter().find(|&&c| c == 0 || c > n_vh) {
            return Err(DesignError::Unsatisfiable(format!(
                "forced column {c} outside 1..={n_vh}"
            )));
        }
        if let Some(w) = self.row_weight {
            if w < self.forced_columns.len() + 2 {
                return Err(DesignError::Unsatisfiable(format!(
                    "row weight {w} leaves no room beyond {} forced columns and the identity entry",
                    self.forced_columns.len()
                )));
            }
            if w - 1 > n_vh {
                return Err(DesignError::Unsatisfiable(format!(
                    "row weight {w} exceeds {n_vh} core columns plus the identity entry"
                )));
            }
        }
        Ok(())
    }
}

/// All admissible core parts of a new row, in a fixed order: by support
/// size, then lexicographically by column indices, then lexicographically by
/// entry values.
pub fn candidate_rows(c: &DesignConstraints, n_vh: usize) -> Result<Vec<Vec<u8>>, DesignError> {
    c.validate(n_vh)?;
    let forced: Vec<usize> = c.forced_columns.iter().map(|&x| x - 1).collect();
    let free: Vec<usize> = (0..n_vh).filter(|x| !forced.contains(x)).collect();
    let sizes: Vec<usize> = match c.row_weight {
        Some(w) => vec![w - 1],
        None => (forced.len().max(1)..=n_vh).collect(),
    };
    let levels = c.max_entry as u128;
    let mut count = 0u128;
    for &k in &sizes {
        let extra = k - forced.len();
        count += crate::bound::binomial(free.len() as i64, extra as i64) * levels.pow(k as u32);
    }
    if count > MAX_CANDIDATES as u128 {
        return Err(DesignError::TooManyCandidates { count });
    }

    let mut out = Vec::with_capacity(count as usize);
    for &k in &sizes {
        for extra in free.iter().copied().combinations(k - forced.len()) {
            let mut support: Vec<usize> = forced.iter().copied().chain(extra).collect();
            support.sort_unstable();
            for values in (0..k).map(|_| 1..=c.max_entry).multi_cartesian_product() {
                let mut row = vec![0u8; n_vh];
                for (&col, &v) in support.iter().zip(&values) {
                    row[col] = v;
                }
                out.push(row);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Maximize the minimum-distance bound.
    Pbd,
    /// Minimize the RCA threshold.
    Threshold,
}

/// One designed row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    /// 1-based round number.
    pub round: usize,
    /// Core part of the row (the identity entry is implied).
    pub row: Vec<u8>,
    /// Bound of the protomatrix after appending the row.
    pub bound: BoundValue,
    /// Threshold after appending the row (threshold objective only).
    pub threshold_db: Option<f64>,
    pub candidates: usize,
    /// Candidates sharing the best score.
    pub ties: usize,
    /// ChaCha8 stream consumed for the tie-break.
    pub rng_stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub schema: u32,
    pub objective: Objective,
    pub seed: u64,
    pub constraints: DesignConstraints,
    pub hrc: Protomatrix,
    pub hrc_bound: BoundValue,
    pub rows: Vec<DesignRow>,
    pub protomatrix: Protomatrix,
}

impl DesignRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}

/// Score of one candidate, ordered so that larger is better.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Score {
    Bound(BoundValue),
    /// Negated threshold; `None` when RCA never converges.
    Threshold(Option<f64>),
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        match (self, other) {
            (Score::Bound(a), Score::Bound(b)) => a > b,
            (Score::Threshold(a), Score::Threshold(b)) => match (a, b) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => true,
                _ => false,
            },
            _ => unreachable!("scores of one round share an objective"),
        }
    }
}

/// Picks uniformly among `ties` with the stream `round` of `seed`.
fn tie_break(seed: u64, round: u64, ties: usize) -> usize {
    if ties == 1 {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng.random_range(0..ties)
}

fn score(
    q: &Protomatrix,
    objective: Objective,
    cache: &SubsetSumCache,
) -> Result<Score, DesignError> {
    match objective {
        Objective::Pbd => Ok(Score::Bound(reduced_bound_report(q, Some(cache))?.bound)),
        Objective::Threshold => {
            match threshold::threshold(q, threshold::DEFAULT_TOL_DB, threshold::DEFAULT_MAX_ITER) {
                Ok(t) => Ok(Score::Threshold(Some(t.eb_n0_db))),
                Err(ThresholdError::NoConvergence { .. }) => Ok(Score::Threshold(None)),
                Err(e) => Err(e.into()),
            }
        }
    }
}

/// Runs the greedy loop for either objective.
pub fn design(
    hrc: &Protomatrix,
    c: &DesignConstraints,
    objective: Objective,
    seed: u64,
) -> Result<DesignRecord, DesignError> {
    let hrc = match hrc.hrc_shape() {
        Some(_) => hrc.clone(),
        None => hrc.as_core(),
    };
    let h = hrc.hrc_shape().expect("core layout set above");
    let candidates = candidate_rows(c, h.vars)?;
    let hrc_bound = reduced_bound(&hrc)?;
    if !matches!(hrc_bound, BoundValue::Finite(v) if v > 0) {
        return Err(DesignError::CoreBound(hrc_bound));
    }

    let cache = SubsetSumCache::new();
    let mut current = hrc.clone();
    let mut rows = Vec::with_capacity(c.num_irc_rows);
    for round in 1..=c.num_irc_rows {
        let scores: Vec<Score> = candidates
            .par_iter()
            .map(|row| score(&current.extend(row)?, objective, &cache))
            .collect::<Result<_, _>>()?;
        let mut best = scores[0];
        for s in &scores[1..] {
            if s.better_than(&best) {
                best = *s;
            }
        }
        if best == Score::Threshold(None) {
            return Err(DesignError::NoViableCandidate { round });
        }
        let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
        let pick = tied[tie_break(seed, round as u64, tied.len())];
        current = current.extend(&candidates[pick])?;
        let bound = match best {
            Score::Bound(b) => b,
            Score::Threshold(_) => reduced_bound_report(&current, Some(&cache))?.bound,
        };
        rows.push(DesignRow {
            round,
            row: candidates[pick].clone(),
            bound,
            threshold_db: match best {
                Score::Threshold(t) => t,
                Score::Bound(_) => None,
            },
            candidates: candidates.len(),
            ties: tied.len(),
            rng_stream: round as u64,
        });
    }

    Ok(DesignRecord {
        schema: crate::SCHEMA_VERSION,
        objective,
        seed,
        constraints: c.clone(),
        hrc,
        hrc_bound,
        rows,
        protomatrix: current,
    })
}

/// Greedy design maximizing the minimum-distance bound.
pub fn design_pbd(
    hrc: &Protomatrix,
    c: &DesignConstraints,
    seed: u64,
) -> Result<DesignRecord, DesignError> {
    design(hrc, c, Objective::Pbd, seed)
}

/// Greedy design minimizing the RCA threshold.
pub fn design_threshold(
    hrc: &Protomatrix,
    c: &DesignConstraints,
    seed: u64,
) -> Result<DesignRecord, DesignError> {
    design(hrc, c, Objective::Threshold, seed)
}
