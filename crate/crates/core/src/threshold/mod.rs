//! Iterative decoding thresholds of protographs over the BI-AWGN channel via
//! the reciprocal channel approximation (RCA).
//!
//! Every protograph edge carries a scalar reliability, the LLR mean of an
//! equivalent consistent Gaussian. Variable nodes add reliabilities; check
//! nodes add them in the reciprocal domain ([`capacity::reciprocal`]).
//! Punctured nodes start with zero channel reliability.

pub mod capacity;

use serde::Serialize;
use thiserror::Error;

use crate::bound::serialize_rate;
use crate::protomatrix::{Protomatrix, ProtomatrixError, RatePoint};
use capacity::{capacity, channel_mean, reciprocal};

/// Posterior LLR mean at which a node counts as decoded: `Q(sqrt(m/2))`
/// drops below `1e-12` at `m ~ 98.97`.
pub const CONVERGED_METRIC: f64 = 99.0;
/// Messages are clamped here so that extrinsic sums stay finite.
pub const METRIC_CLAMP: f64 = 1.0e4;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_TOL_DB: f64 = 0.01;
pub const BRACKET_DB: (f64, f64) = (-2.0, 10.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("Eb/N0 must be finite, got {0}")]
    InvalidSnr(f64),
    #[error("variable node {0} has no edges")]
    DegreeZeroVariable(usize),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("max_iter must be at least 1")]
    NoIterations,
    #[error("no convergence even at {upper_db} dB")]
    NoConvergence { upper_db: f64 },
    #[error(transparent)]
    Protomatrix(#[from] ProtomatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RcaOutcome {
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub eb_n0_db: f64,
    pub converged: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdPoint {
    pub rows: usize,
    #[serde(serialize_with = "serialize_rate")]
    pub rate: RatePoint,
    pub threshold: ThresholdResult,
}

struct Edge {
    check: usize,
    var: usize,
    mult: f64,
}

fn edges(p: &Protomatrix) -> Result<Vec<Edge>, ThresholdError> {
    for c in 0..p.n_v() {
        if p.col_sum(c) == 0 {
            return Err(ThresholdError::DegreeZeroVariable(c + 1));
        }
    }
    let mut out = Vec::new();
    for r in 0..p.n_c() {
        for c in 0..p.n_v() {
            let v = p.get(r, c);
            if v > 0 {
                out.push(Edge {
                    check: r,
                    var: c,
                    mult: v as f64,
                });
            }
        }
    }
    Ok(out)
}

/// Runs RCA with the given per-variable channel LLR means.
fn run_rca(
    p: &Protomatrix,
    channel: &[f64],
    max_iter: usize,
) -> Result<RcaOutcome, ThresholdError> {
    if max_iter == 0 {
        return Err(ThresholdError::NoIterations);
    }
    let edges = edges(p)?;
    let by_check: Vec<Vec<usize>> = (0..p.n_c())
        .map(|r| (0..edges.len()).filter(|&e| edges[e].check == r).collect())
        .collect();
    let mut to_var = vec![0.0f64; edges.len()];
    let mut to_check = vec![0.0f64; edges.len()];
    let mut recip = vec![0.0f64; edges.len()];
    let mut total = vec![0.0f64; p.n_v()];

    for iter in 1..=max_iter {
        total.copy_from_slice(channel);
        for (e, edge) in edges.iter().enumerate() {
            total[edge.var] += edge.mult * to_var[e];
        }
        for (e, edge) in edges.iter().enumerate() {
            to_check[e] = (total[edge.var] - to_var[e]).clamp(0.0, METRIC_CLAMP);
            recip[e] = reciprocal(to_check[e]);
        }

        let mut change = 0.0f64;
        for members in &by_check {
            for &e in members {
                // Extrinsic sum in the reciprocal domain: every other edge at
                // full multiplicity, this edge's own parallel copies minus one.
                let mut sum = 0.0;
                for &o in members {
                    let m = if o == e {
                        edges[o].mult - 1.0
                    } else {
                        edges[o].mult
                    };
                    if m > 0.0 {
                        sum += m * recip[o];
                    }
                }
                let out = reciprocal(sum).min(METRIC_CLAMP);
                change = change.max((out - to_var[e]).abs() / (1.0 + to_var[e]));
                to_var[e] = out;
            }
        }

        total.copy_from_slice(channel);
        for (e, edge) in edges.iter().enumerate() {
            total[edge.var] += edge.mult * to_var[e];
        }
        if total.iter().all(|&t| t >= CONVERGED_METRIC) {
            return Ok(RcaOutcome {
                converged: true,
                iterations: iter,
            });
        }
        if change < 1e-13 {
            return Ok(RcaOutcome {
                converged: false,
                iterations: iter,
            });
        }
    }
    Ok(RcaOutcome {
        converged: false,
        iterations: max_iter,
    })
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// RCA at the given channel `Es/N0` (dB); no rate conversion.
pub fn rca_converges_es(
    p: &Protomatrix,
    es_n0_db: f64,
    max_iter: usize,
) -> Result<RcaOutcome, ThresholdError> {
    if !es_n0_db.is_finite() {
        return Err(ThresholdError::InvalidSnr(es_n0_db));
    }
    let m = channel_mean(db_to_linear(es_n0_db));
    let channel: Vec<f64> = (1..=p.n_v())
        .map(|c| if p.is_punctured(c) { 0.0 } else { m })
        .collect();
    run_rca(p, &channel, max_iter)
}

/// RCA at `Eb/N0` (dB), converted with the design rate (punctured nodes
/// carry no transmitted energy).
pub fn rca_converges(
    p: &Protomatrix,
    eb_n0_db: f64,
    max_iter: usize,
) -> Result<RcaOutcome, ThresholdError> {
    if !eb_n0_db.is_finite() {
        return Err(ThresholdError::InvalidSnr(eb_n0_db));
    }
    let rate = p.rate()?.as_f64();
    rca_converges_es(p, eb_n0_db + 10.0 * rate.log10(), max_iter)
}

/// Bisection on `Eb/N0` over [`BRACKET_DB`] down to a bracket of width
/// `tol_db`; returns the upper (converging) end.
pub fn threshold(
    p: &Protomatrix,
    tol_db: f64,
    max_iter: usize,
) -> Result<ThresholdResult, ThresholdError> {
    if tol_db.is_nan() || tol_db <= 0.0 {
        return Err(ThresholdError::InvalidTolerance(tol_db));
    }
    let (mut lo, mut hi) = BRACKET_DB;
    let top = rca_converges(p, hi, max_iter)?;
    if !top.converged {
        return Err(ThresholdError::NoConvergence { upper_db: hi });
    }
    let mut at_hi = top;
    let bottom = rca_converges(p, lo, max_iter)?;
    if bottom.converged {
        return Ok(ThresholdResult {
            eb_n0_db: lo,
            converged: true,
            iterations_used: bottom.iterations,
        });
    }
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        let r = rca_converges(p, mid, max_iter)?;
        if r.converged {
            hi = mid;
            at_hi = r;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult {
        eb_n0_db: hi,
        converged: true,
        iterations_used: at_hi.iterations,
    })
}

/// Thresholds of every rate-compatible prefix, highest rate first.
pub fn threshold_profile(
    p: &Protomatrix,
    tol_db: f64,
    max_iter: usize,
) -> Result<Vec<ThresholdPoint>, ThresholdError> {
    let h = p.hrc_shape().ok_or(ProtomatrixError::MissingStructure)?;
    use rayon::prelude::*;
    (h.checks..=p.n_c())
        .into_par_iter()
        .map(|rows| {
            let q = p.prefix(rows)?;
            Ok(ThresholdPoint {
                rows,
                rate: q.rate()?,
                threshold: threshold(&q, tol_db, max_iter)?,
            })
        })
        .collect()
}

/// Smallest `Eb/N0` (dB) at which the BPSK-constrained AWGN capacity
/// reaches `rate`.
pub fn shannon_limit_db(rate: f64) -> f64 {
    let meets = |db: f64| capacity(channel_mean(rate * db_to_linear(db))) >= rate;
    let (mut lo, mut hi) = (-10.0, 30.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
