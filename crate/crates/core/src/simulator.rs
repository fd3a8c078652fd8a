//! Encoder, BI-AWGN channel, flooding belief propagation and the FER harness.
//!
//! One lowest-rate [`LiftedCode`] serves every rate of the family: a higher
//! rate keeps only a prefix of the check rows, and the redundancy columns
//! beyond that prefix are neither sent nor decoded.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::lifting::LiftedCode;
use crate::protomatrix::{Protomatrix, RatePoint};
use crate::sparse::SparseBinary;

/// Default bound on message magnitudes inside the decoder.
pub const DEFAULT_LLR_CLAMP: f64 = 50.0;
pub const DEFAULT_BP_ITERATIONS: usize = 100;
/// Frames decoded per parallel batch. Counts are merged in frame order, so
/// results do not depend on this value or on the worker count.
pub const FRAME_BATCH: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("core block has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("expected {expected} information bits, got {found}")]
    InfoLength { expected: usize, found: usize },
    #[error("rate {0} is not a member of this code family")]
    InvalidRate(RatePoint),
    #[error("Eb/N0 must be finite, got {0}")]
    InvalidSnr(f64),
    #[error("error target must be at least 1")]
    ZeroStop,
    #[error("max_iter must be at least 1")]
    ZeroIterations,
    #[error("sweep line {line}: {msg}")]
    Sweep { line: usize, msg: String },
}

/// Systematic encoder: information bits occupy the non-pivot core columns,
/// core parities follow from a reduced echelon form of the lifted core, and
/// each redundancy parity is the sum its identity row dictates.
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    core_cols: usize,
    info_positions: Vec<usize>,
    /// For each core parity column, the information columns it sums.
    parity_sources: Vec<(usize, Vec<usize>)>,
    /// For each redundancy column, the core columns of its check row.
    ir_sources: Vec<(usize, Vec<usize>)>,
    h: SparseBinary,
}

impl Encoder {
    pub fn new(code: &LiftedCode) -> Result<Self, SimError> {
        let p = code.proto();
        let nn = code.lift_factor();
        let (core_rows, core_cols) = match p.hrc_shape() {
            Some(s) => (s.checks * nn, s.vars * nn),
            None => (p.n_c() * nn, p.n_v() * nn),
        };
        let h = code.expand();
        let words = core_cols.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = (0..core_rows)
            .map(|r| {
                let mut bits = vec![0u64; words];
                for &c in h.row(r) {
                    if c < core_cols {
                        bits[c / 64] |= 1 << (c % 64);
                    }
                }
                bits
            })
            .collect();
        let bit = |row: &[u64], c: usize| (row[c / 64] >> (c % 64)) & 1 == 1;

        // Gauss-Jordan elimination, pivots taken from the rightmost columns
        // so information bits sit at the front of the core.
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in (0..core_cols).rev() {
            let Some(r) = (rank..core_rows).find(|&r| bit(&rows[r], c)) else {
                continue;
            };
            rows.swap(rank, r);
            let pivot = rows[rank].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != rank && bit(row, c) {
                    row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == core_rows {
                break;
            }
        }
        if rank < core_rows {
            return Err(SimError::RankDeficient {
                rank,
                expected: core_rows,
            });
        }
        let mut is_pivot = vec![false; core_cols];
        pivots.iter().for_each(|&c| is_pivot[c] = true);
        let info_positions: Vec<usize> = (0..core_cols).filter(|&c| !is_pivot[c]).collect();
        let parity_sources = pivots
            .iter()
            .enumerate()
            .map(|(r, &c)| {
                let src = info_positions
                    .iter()
                    .copied()
                    .filter(|&i| bit(&rows[r], i))
                    .collect();
                (c, src)
            })
            .collect();
        let ir_sources = (core_rows..h.rows())
            .map(|r| {
                let (src, own): (Vec<usize>, Vec<usize>) =
                    h.row(r).iter().partition(|&&c| c < core_cols);
                debug_assert_eq!(own.len(), 1, "one redundancy column per extension row");
                (own[0], src)
            })
            .collect();
        Ok(Self {
            n: h.cols(),
            core_cols,
            info_positions,
            parity_sources,
            ir_sources,
            h,
        })
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Codeword positions carrying the information bits, ascending.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Full parity-check matrix of the lowest-rate code.
    pub fn parity_check(&self) -> &SparseBinary {
        &self.h
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>, SimError> {
        if info.len() != self.k() {
            return Err(SimError::InfoLength {
                expected: self.k(),
                found: info.len(),
            });
        }
        let mut x = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            x[pos] = b & 1;
        }
        for (c, src) in &self.parity_sources {
            x[*c] = src.iter().fold(0, |acc, &i| acc ^ x[i]);
        }
        debug_assert!(self.core_cols <= self.n);
        for (c, src) in &self.ir_sources {
            x[*c] = src.iter().fold(0, |acc, &i| acc ^ x[i]);
        }
        debug_assert!(self.h.is_codeword(&x), "encoder produced a non-codeword");
        Ok(x)
    }
}

/// The member of the family with a given rate: protomatrix rows in use and
/// the corresponding transmitted mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMember {
    pub rate: RatePoint,
    /// Active protomatrix rows.
    pub rows: usize,
    /// Active lifted columns (a prefix of the codeword).
    pub cols: usize,
    /// Per active column: sent over the channel or not.
    pub transmitted: Vec<bool>,
}

impl RateMember {
    pub fn new(code: &LiftedCode, rate: RatePoint) -> Result<Self, SimError> {
        let p = code.proto();
        let nn = code.lift_factor();
        let found = member_rows(p).find(|&(_, r)| r == rate);
        let Some((rows, rate)) = found else {
            return Err(SimError::InvalidRate(rate));
        };
        let q = match p.hrc_shape() {
            Some(_) => p.prefix(rows).expect("row count from the family"),
            None => p.clone(),
        };
        let transmitted = (0..q.n_v() * nn)
            .map(|c| !q.is_punctured(c / nn + 1))
            .collect();
        Ok(Self {
            rate,
            rows,
            cols: q.n_v() * nn,
            transmitted,
        })
    }
}

/// `(rows, rate)` of every member, highest rate first.
fn member_rows(p: &Protomatrix) -> impl Iterator<Item = (usize, RatePoint)> + '_ {
    let rows = match p.hrc_shape() {
        Some(h) => h.checks..=p.n_c(),
        None => p.n_c()..=p.n_c(),
    };
    rows.filter_map(move |r| {
        let q = match p.hrc_shape() {
            Some(_) => p.prefix(r).ok()?,
            None => p.clone(),
        };
        q.rate().ok().map(|rate| (r, rate))
    })
}

/// Rates available from a lifted code, highest first.
pub fn family_rates(code: &LiftedCode) -> Vec<RatePoint> {
    member_rows(code.proto()).map(|(_, r)| r).collect()
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Noise standard deviation for unit-energy BPSK at `Eb/N0` and rate `r`.
pub fn noise_sigma(rate: f64, eb_n0_db: f64) -> f64 {
    (1.0 / (2.0 * rate * db_to_linear(eb_n0_db))).sqrt()
}

/// BPSK over AWGN; returns channel LLRs of the active columns, exactly zero
/// at positions that are not sent.
pub fn transmit<R: Rng + ?Sized>(
    codeword: &[u8],
    member: &RateMember,
    eb_n0_db: f64,
    rng: &mut R,
) -> Result<Vec<f64>, SimError> {
    if !eb_n0_db.is_finite() {
        return Err(SimError::InvalidSnr(eb_n0_db));
    }
    let sigma = noise_sigma(member.rate.as_f64(), eb_n0_db);
    let scale = 2.0 / (sigma * sigma);
    Ok((0..member.cols)
        .map(|c| {
            if !member.transmitted[c] {
                return 0.0;
            }
            let s = if codeword[c] == 0 { 1.0 } else { -1.0 };
            let noise: f64 = rng.sample(StandardNormal);
            scale * (s + sigma * noise)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Converged,
    MaxIterReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    pub status: DecodeStatus,
    pub iterations: usize,
}

/// `phi(x) = -ln tanh(x / 2)`, its own inverse on `(0, inf)`.
fn phi(x: f64) -> f64 {
    let x = x.max(1e-300);
    (2.0 / x.exp_m1()).ln_1p()
}

/// Flooding sum-product decoder in the LLR domain.
#[derive(Debug, Clone)]
pub struct BpDecoder {
    n: usize,
    /// Edge ranges per check (edges are stored check-major).
    check_start: Vec<usize>,
    edge_var: Vec<usize>,
    /// Edge ids per variable.
    var_edges: Vec<Vec<usize>>,
    clamp: f64,
}

impl BpDecoder {
    pub fn new(h: &SparseBinary) -> Self {
        let mut check_start = Vec::with_capacity(h.rows() + 1);
        let mut edge_var = Vec::with_capacity(h.nnz());
        let mut var_edges = vec![Vec::new(); h.cols()];
        check_start.push(0);
        for r in 0..h.rows() {
            for &c in h.row(r) {
                var_edges[c].push(edge_var.len());
                edge_var.push(c);
            }
            check_start.push(edge_var.len());
        }
        Self {
            n: h.cols(),
            check_start,
            edge_var,
            var_edges,
            clamp: DEFAULT_LLR_CLAMP,
        }
    }

    pub fn with_clamp(mut self, clamp: f64) -> Self {
        self.clamp = clamp;
        self
    }

    fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.check_start.windows(2).all(|w| {
            self.edge_var[w[0]..w[1]]
                .iter()
                .fold(0, |a, &v| a ^ bits[v])
                == 0
        })
    }

    pub fn decode(&self, llr: &[f64], max_iter: usize) -> Result<DecodeOutcome, SimError> {
        if max_iter == 0 {
            return Err(SimError::ZeroIterations);
        }
        assert_eq!(llr.len(), self.n, "one LLR per column");
        let clamp = self.clamp;
        let mut to_check: Vec<f64> = self
            .edge_var
            .iter()
            .map(|&v| llr[v].clamp(-clamp, clamp))
            .collect();
        let mut to_var = vec![0.0f64; self.edge_var.len()];
        let mut bits = vec![0u8; self.n];
        let mut mags = Vec::new();
        let mut suffix = Vec::new();
        for iter in 1..=max_iter {
            for w in self.check_start.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                mags.clear();
                mags.extend(to_check[lo..hi].iter().map(|m| phi(m.abs())));
                let negative = to_check[lo..hi].iter().filter(|&&m| m < 0.0).count();
                // Exclusive sums via suffix accumulation, avoiding the
                // cancellation of subtracting from the full sum.
                suffix.clear();
                suffix.resize(hi - lo + 1, 0.0);
                for i in (0..hi - lo).rev() {
                    suffix[i] = suffix[i + 1] + mags[i];
                }
                let mut prefix = 0.0;
                for i in 0..hi - lo {
                    let e = lo + i;
                    let own_neg = to_check[e] < 0.0;
                    let sign = if (negative - own_neg as usize) % 2 == 1 {
                        -1.0
                    } else {
                        1.0
                    };
                    to_var[e] = (sign * phi(prefix + suffix[i + 1])).clamp(-clamp, clamp);
                    prefix += mags[i];
                }
            }
            for v in 0..self.n {
                let total: f64 = llr[v] + self.var_edges[v].iter().map(|&e| to_var[e]).sum::<f64>();
                bits[v] = (total < 0.0) as u8;
                for &e in &self.var_edges[v] {
                    to_check[e] = (total - to_var[e]).clamp(-clamp, clamp);
                }
            }
            if self.syndrome_ok(&bits) {
                return Ok(DecodeOutcome {
                    bits,
                    status: DecodeStatus::Converged,
                    iterations: iter,
                });
            }
        }
        Ok(DecodeOutcome {
            bits,
            status: DecodeStatus::MaxIterReached,
            iterations: max_iter,
        })
    }
}

/// Counts at one (rate, SNR) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    #[serde(serialize_with = "rate_str", deserialize_with = "rate_from_str")]
    pub rate: RatePoint,
    pub eb_n0_db: f64,
    pub frames_run: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    /// Frame errors where the decoder stopped on a wrong codeword.
    pub undetected_errors: u64,
    pub mean_iterations: f64,
}

fn rate_str<S: Serializer>(r: &RatePoint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn rate_from_str<'de, D: serde::Deserializer<'de>>(d: D) -> Result<RatePoint, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

pub const CSV_HEADER: &str = "rate,ebn0_db,frames,frame_errors,bit_errors,undetected,mean_iters";

impl SimPoint {
    pub fn fer(&self) -> f64 {
        if self.frames_run == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames_run as f64
        }
    }

    /// 95% Wilson score interval for the frame error rate.
    pub fn fer_interval(&self) -> (f64, f64) {
        wilson_interval(self.frame_errors, self.frames_run, 1.959_963_984_540_054)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.rate,
            self.eb_n0_db,
            self.frames_run,
            self.frame_errors,
            self.bit_errors,
            self.undetected_errors,
            self.mean_iterations
        )
    }
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte Carlo settings of one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FerConfig {
    /// Stop after this many frame errors.
    pub stop: u64,
    pub max_frames: u64,
    pub max_iter: usize,
    pub seed: u64,
    pub clamp: f64,
}

impl FerConfig {
    pub fn new(stop: u64, max_frames: u64, seed: u64) -> Self {
        Self {
            stop,
            max_frames,
            max_iter: DEFAULT_BP_ITERATIONS,
            seed,
            clamp: DEFAULT_LLR_CLAMP,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct FrameResult {
    frame_error: bool,
    bit_errors: u64,
    undetected: bool,
    iterations: usize,
}

/// Encoder and per-rate decoders of a lifted code, reusable across points.
#[derive(Debug, Clone)]
pub struct Harness {
    encoder: Encoder,
    code: LiftedCode,
}

impl Harness {
    pub fn new(code: &LiftedCode) -> Result<Self, SimError> {
        Ok(Self {
            encoder: Encoder::new(code)?,
            code: code.clone(),
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    fn frame(
        &self,
        member: &RateMember,
        decoder: &BpDecoder,
        eb_n0_db: f64,
        cfg: &FerConfig,
        index: u64,
    ) -> Result<FrameResult, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index);
        let info: Vec<u8> = (0..self.encoder.k())
            .map(|_| rng.random::<bool>() as u8)
            .collect();
        let x = self.encoder.encode(&info)?;
        let llr = transmit(&x, member, eb_n0_db, &mut rng)?;
        let out = decoder.decode(&llr, cfg.max_iter)?;
        let bit_errors = self
            .encoder
            .info_positions()
            .iter()
            .filter(|&&p| out.bits[p] != x[p])
            .count() as u64;
        Ok(FrameResult {
            frame_error: bit_errors > 0,
            bit_errors,
            undetected: bit_errors > 0 && out.status == DecodeStatus::Converged,
            iterations: out.iterations,
        })
    }

    /// Runs frames in index order until `stop` frame errors or `max_frames`.
    pub fn fer_run(
        &self,
        rate: RatePoint,
        eb_n0_db: f64,
        cfg: &FerConfig,
    ) -> Result<SimPoint, SimError> {
        if cfg.stop == 0 {
            return Err(SimError::ZeroStop);
        }
        if !eb_n0_db.is_finite() {
            return Err(SimError::InvalidSnr(eb_n0_db));
        }
        let member = RateMember::new(&self.code, rate)?;
        let h = self.encoder.parity_check();
        let active = h.top_left(member.rows * self.code.lift_factor(), member.cols);
        let decoder = BpDecoder::new(&active).with_clamp(cfg.clamp);

        let mut point = SimPoint {
            rate,
            eb_n0_db,
            frames_run: 0,
            frame_errors: 0,
            bit_errors: 0,
            undetected_errors: 0,
            mean_iterations: 0.0,
        };
        let mut iterations = 0u64;
        'outer: while point.frames_run < cfg.max_frames {
            let start = point.frames_run;
            let end = (start + FRAME_BATCH as u64).min(cfg.max_frames);
            let batch: Vec<FrameResult> = (start..end)
                .into_par_iter()
                .map(|i| self.frame(&member, &decoder, eb_n0_db, cfg, i))
                .collect::<Result<_, _>>()?;
            for r in batch {
                point.frames_run += 1;
                iterations += r.iterations as u64;
                point.bit_errors += r.bit_errors;
                point.frame_errors += r.frame_error as u64;
                point.undetected_errors += r.undetected as u64;
                if point.frame_errors >= cfg.stop {
                    break 'outer;
                }
            }
        }
        if point.frames_run > 0 {
            point.mean_iterations = iterations as f64 / point.frames_run as f64;
        }
        Ok(point)
    }
}

/// One-shot [`Harness::fer_run`].
pub fn fer_run(
    code: &LiftedCode,
    rate: RatePoint,
    eb_n0_db: f64,
    cfg: &FerConfig,
) -> Result<SimPoint, SimError> {
    Harness::new(code)?.fer_run(rate, eb_n0_db, cfg)
}

/// One line of a sweep file: `rate snr1,snr2,... stop max_frames`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLine {
    #[serde(serialize_with = "rate_str", deserialize_with = "rate_from_str")]
    pub rate: RatePoint,
    pub eb_n0_db: Vec<f64>,
    pub stop: u64,
    pub max_frames: u64,
}

impl fmt::Display for SweepLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let snrs: Vec<String> = self.eb_n0_db.iter().map(ToString::to_string).collect();
        write!(
            f,
            "{} {} {} {}",
            self.rate,
            snrs.join(","),
            self.stop,
            self.max_frames
        )
    }
}

/// Parses a sweep file; `#` starts a comment.
pub fn parse_sweep(text: &str) -> Result<Vec<SweepLine>, SimError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| SimError::Sweep { line, msg };
        let toks: Vec<&str> = l.split_whitespace().collect();
        let [rate, snrs, stop, max_frames] = toks.as_slice() else {
            return Err(err("expected `rate snr,snr,... stop max_frames`".into()));
        };
        let rate = RatePoint::from_str(rate).map_err(|e| err(e.to_string()))?;
        let eb_n0_db = snrs
            .split(',')
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(err(format!("bad SNR `{s}`"))),
            })
            .collect::<Result<_, _>>()?;
        let stop: u64 = stop
            .parse()
            .map_err(|_| err(format!("bad stop `{stop}`")))?;
        let max_frames: u64 = max_frames
            .parse()
            .map_err(|_| err(format!("bad max_frames `{max_frames}`")))?;
        if stop == 0 {
            return Err(err("stop must be at least 1".into()));
        }
        out.push(SweepLine {
            rate,
            eb_n0_db,
            stop,
            max_frames,
        });
    }
    Ok(out)
}
