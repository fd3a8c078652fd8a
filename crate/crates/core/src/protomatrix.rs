//! Protomatrices: edge-multiplicity base matrices, optionally carrying the
//! raptor-like block layout
//!
//! ```text
//!     [ HRC   0 ]
//!     [ IRC   I ]
//! ```
//!
//! where the top-left `n_cH x n_vH` block is the high-rate core and every row
//! below it adds one degree-one incremental-redundancy variable node.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest entry accepted by the parser.
pub const MAX_ENTRY: u8 = 15;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtomatrixError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("entry {value} at ({row}, {col}) exceeds the cap of {MAX_ENTRY}")]
    EntryTooLarge { row: usize, col: usize, value: i64 },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: i64 },
    #[error("punctured column {0} is outside 1..={1}")]
    PunctureOutOfRange(usize, usize),
    #[error("punctured column {col} lies outside the first {n_vh} (high-rate core) columns")]
    PunctureOutsideCore { col: usize, n_vh: usize },
    #[error("raptor-like structure violated: {0}")]
    Structure(String),
    #[error("protomatrix has no raptor-like block layout")]
    MissingStructure,
    #[error("prefix of {rows} rows requested, valid range is {min}..={max}")]
    PrefixOutOfRange { rows: usize, min: usize, max: usize },
    #[error("design rate is not in (0, 1): {n_v} variable nodes, {n_c} checks, {n_t} transmitted")]
    InvalidRate { n_c: usize, n_v: usize, n_t: usize },
}

/// Design rate `(n_v - n_c) / n_t`, kept unreduced so that `6/8` prints as
/// `6/8`. Comparison and equality are by rational value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RatePoint {
    pub info: usize,
    pub transmitted: usize,
}

impl RatePoint {
    pub fn new(info: usize, transmitted: usize) -> Self {
        Self { info, transmitted }
    }

    pub fn as_f64(&self) -> f64 {
        self.info as f64 / self.transmitted as f64
    }
}

impl PartialEq for RatePoint {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RatePoint {}

impl PartialOrd for RatePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RatePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.info as u128 * other.transmitted as u128)
            .cmp(&(other.info as u128 * self.transmitted as u128))
    }
}

impl fmt::Display for RatePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.info, self.transmitted)
    }
}

impl FromStr for RatePoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| format!("rate `{s}` is not of the form a/b"))?;
        let info = a.trim().parse().map_err(|e| format!("rate `{s}`: {e}"))?;
        let transmitted: usize = b.trim().parse().map_err(|e| format!("rate `{s}`: {e}"))?;
        if transmitted == 0 {
            return Err(format!("rate `{s}` has a zero denominator"));
        }
        Ok(Self { info, transmitted })
    }
}

/// Dimensions of the high-rate core block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HrcShape {
    pub checks: usize,
    pub vars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Protomatrix {
    n_c: usize,
    n_v: usize,
    entries: Vec<u8>,
    /// 1-based column indices.
    punctured: BTreeSet<usize>,
    hrc: Option<HrcShape>,
}

impl Protomatrix {
    /// Builds and validates a protomatrix from its rows.
    pub fn new(
        rows: Vec<Vec<u8>>,
        punctured: impl IntoIterator<Item = usize>,
        hrc: Option<HrcShape>,
    ) -> Result<Self, ProtomatrixError> {
        let n_c = rows.len();
        let n_v = rows.first().map_or(0, Vec::len);
        if n_c == 0 || n_v == 0 {
            return Err(ProtomatrixError::Malformed {
                line: 0,
                msg: "protomatrix must have at least one row and one column".into(),
            });
        }
        let mut entries = Vec::with_capacity(n_c * n_v);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_v {
                return Err(ProtomatrixError::RaggedRow {
                    row: r + 1,
                    found: row.len(),
                    expected: n_v,
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if v > MAX_ENTRY {
                    return Err(ProtomatrixError::EntryTooLarge {
                        row: r + 1,
                        col: c + 1,
                        value: v as i64,
                    });
                }
            }
            entries.extend_from_slice(row);
        }
        let p = Self {
            n_c,
            n_v,
            entries,
            punctured: punctured.into_iter().collect(),
            hrc,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ProtomatrixError> {
        for &col in &self.punctured {
            if col == 0 || col > self.n_v {
                return Err(ProtomatrixError::PunctureOutOfRange(col, self.n_v));
            }
        }
        let Some(h) = self.hrc else { return Ok(()) };
        if h.checks == 0 || h.vars == 0 || h.checks > self.n_c || h.vars > self.n_v {
            return Err(ProtomatrixError::Structure(format!(
                "core block {}x{} does not fit a {}x{} matrix",
                h.checks, h.vars, self.n_c, self.n_v
            )));
        }
        let n_ir = self.n_v - h.vars;
        if n_ir != self.n_c - h.checks {
            return Err(ProtomatrixError::Structure(format!(
                "{} incremental-redundancy columns but {} extension rows",
                n_ir,
                self.n_c - h.checks
            )));
        }
        for r in 0..self.n_c {
            for k in 0..n_ir {
                let v = self.get(r, h.vars + k);
                let expected = if r >= h.checks && r - h.checks == k {
                    1
                } else {
                    0
                };
                if v != expected {
                    return Err(ProtomatrixError::Structure(format!(
                        "entry ({}, {}) is {v}, expected {expected}",
                        r + 1,
                        h.vars + k + 1
                    )));
                }
            }
        }
        if let Some(&col) = self.punctured.iter().find(|&&c| c > h.vars) {
            return Err(ProtomatrixError::PunctureOutsideCore { col, n_vh: h.vars });
        }
        Ok(())
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Number of punctured variable nodes.
    pub fn n_p(&self) -> usize {
        self.punctured.len()
    }

    /// Number of transmitted variable nodes.
    pub fn n_t(&self) -> usize {
        self.n_v - self.punctured.len()
    }

    pub fn hrc_shape(&self) -> Option<HrcShape> {
        self.hrc
    }

    pub fn punctured(&self) -> &BTreeSet<usize> {
        &self.punctured
    }

    /// Whether the 1-based column `col` is punctured.
    pub fn is_punctured(&self, col: usize) -> bool {
        self.punctured.contains(&col)
    }

    /// Entry at 0-based `(row, col)`.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.n_v + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.entries[row * self.n_v..(row + 1) * self.n_v]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.chunks(self.n_v)
    }

    pub fn max_entry(&self) -> u8 {
        self.entries.iter().copied().max().unwrap_or(0)
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.row(row).iter().map(|&v| v as usize).sum()
    }

    pub fn col_sum(&self, col: usize) -> usize {
        (0..self.n_c).map(|r| self.get(r, col) as usize).sum()
    }

    /// Same matrix with a different puncture set.
    pub fn with_punctured(
        &self,
        punctured: impl IntoIterator<Item = usize>,
    ) -> Result<Self, ProtomatrixError> {
        let mut p = self.clone();
        p.punctured = punctured.into_iter().collect();
        p.validate()?;
        Ok(p)
    }

    /// Declares the whole matrix as a high-rate core when no layout is set.
    pub fn as_core(&self) -> Self {
        let mut p = self.clone();
        if p.hrc.is_none() {
            p.hrc = Some(HrcShape {
                checks: self.n_c,
                vars: self.n_v,
            });
        }
        p
    }

    /// Design rate `(n_v - n_c) / n_t`.
    pub fn rate(&self) -> Result<RatePoint, ProtomatrixError> {
        let n_t = self.n_t();
        if self.n_v <= self.n_c || n_t <= self.n_v - self.n_c {
            return Err(ProtomatrixError::InvalidRate {
                n_c: self.n_c,
                n_v: self.n_v,
                n_t,
            });
        }
        Ok(RatePoint::new(self.n_v - self.n_c, n_t))
    }

    /// The rate-compatible member made of the first `rows` check rows.
    pub fn prefix(&self, rows: usize) -> Result<Self, ProtomatrixError> {
        let h = self.hrc.ok_or(ProtomatrixError::MissingStructure)?;
        if rows < h.checks || rows > self.n_c {
            return Err(ProtomatrixError::PrefixOutOfRange {
                rows,
                min: h.checks,
                max: self.n_c,
            });
        }
        let cols = h.vars + (rows - h.checks);
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            entries.extend_from_slice(&self.row(r)[..cols]);
        }
        Ok(Self {
            n_c: rows,
            n_v: cols,
            entries,
            punctured: self
                .punctured
                .iter()
                .copied()
                .filter(|&c| c <= cols)
                .collect(),
            hrc: Some(h),
        })
    }

    /// Appends one extension row: `core_part` covers the first `n_vH`
    /// columns, the new degree-one column closes the identity block.
    pub fn extend(&self, core_part: &[u8]) -> Result<Self, ProtomatrixError> {
        let h = self.hrc.ok_or(ProtomatrixError::MissingStructure)?;
        if core_part.len() != h.vars {
            return Err(ProtomatrixError::RaggedRow {
                row: self.n_c + 1,
                found: core_part.len(),
                expected: h.vars,
            });
        }
        let mut rows: Vec<Vec<u8>> = self
            .rows()
            .map(|r| {
                let mut v = r.to_vec();
                v.push(0);
                v
            })
            .collect();
        let mut new_row = vec![0u8; self.n_v + 1];
        new_row[..h.vars].copy_from_slice(core_part);
        new_row[self.n_v] = 1;
        rows.push(new_row);
        Self::new(rows, self.punctured.iter().copied(), Some(h))
    }

    /// Column sub-matrix on the given 0-based columns, flattened row-major.
    pub fn columns(&self, cols: &[usize]) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n_c * cols.len());
        for r in 0..self.n_c {
            out.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        out
    }

    /// Serializes to the line-oriented text format accepted by [`FromStr`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Protomatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hrc {
            Some(h) => writeln!(f, "pbrl {} {} {} {}", self.n_c, self.n_v, h.checks, h.vars)?,
            None => writeln!(f, "proto {} {}", self.n_c, self.n_v)?,
        }
        if !self.punctured.is_empty() {
            let list: Vec<String> = self.punctured.iter().map(ToString::to_string).collect();
            writeln!(f, "punctured {}", list.join(" "))?;
        }
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Serialized as the text format, so JSON documents embed a readable matrix.
impl Serialize for Protomatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for Protomatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, ProtomatrixError> {
    tok.parse().map_err(|_| ProtomatrixError::Malformed {
        line,
        msg: format!("expected {what}, found `{tok}`"),
    })
}

impl FromStr for Protomatrix {
    type Err = ProtomatrixError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .peekable();

        let (hline, header) = lines.next().ok_or(ProtomatrixError::Malformed {
            line: 0,
            msg: "empty input".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let (n_c, n_v, hrc) = match toks.as_slice() {
            ["proto", c, v] => (
                parse_usize(c, hline, "check count")?,
                parse_usize(v, hline, "variable count")?,
                None,
            ),
            ["pbrl", c, v, ch, vh] => (
                parse_usize(c, hline, "check count")?,
                parse_usize(v, hline, "variable count")?,
                Some(HrcShape {
                    checks: parse_usize(ch, hline, "core check count")?,
                    vars: parse_usize(vh, hline, "core variable count")?,
                }),
            ),
            _ => {
                return Err(ProtomatrixError::Malformed {
                    line: hline,
                    msg: "header must be `proto <n_c> <n_v>` or `pbrl <n_c> <n_v> <n_cH> <n_vH>`"
                        .into(),
                })
            }
        };

        let mut punctured = Vec::new();
        if let Some(&(pline, l)) = lines.peek() {
            if let Some(rest) = l.strip_prefix("punctured") {
                for tok in rest.split_whitespace() {
                    punctured.push(parse_usize(tok, pline, "punctured column index")?);
                }
                lines.next();
            }
        }

        let mut rows = Vec::with_capacity(n_c);
        for (lno, l) in lines {
            let r = rows.len() + 1;
            if r > n_c {
                return Err(ProtomatrixError::Malformed {
                    line: lno,
                    msg: format!("more than the declared {n_c} rows"),
                });
            }
            let mut row = Vec::with_capacity(n_v);
            for (c, tok) in l.split_whitespace().enumerate() {
                let v: i64 = tok.parse().map_err(|_| ProtomatrixError::Malformed {
                    line: lno,
                    msg: format!("`{tok}` is not an integer"),
                })?;
                if v < 0 {
                    return Err(ProtomatrixError::NegativeEntry {
                        row: r,
                        col: c + 1,
                        value: v,
                    });
                }
                if v > MAX_ENTRY as i64 {
                    return Err(ProtomatrixError::EntryTooLarge {
                        row: r,
                        col: c + 1,
                        value: v,
                    });
                }
                row.push(v as u8);
            }
            if row.len() != n_v {
                return Err(ProtomatrixError::RaggedRow {
                    row: r,
                    found: row.len(),
                    expected: n_v,
                });
            }
            rows.push(row);
        }
        if rows.len() != n_c {
            return Err(ProtomatrixError::Malformed {
                line: hline,
                msg: format!("declared {n_c} rows, found {}", rows.len()),
            });
        }
        Protomatrix::new(rows, punctured, hrc)
    }
}
