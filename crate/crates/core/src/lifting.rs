//! Quasi-cyclic lifting of a protomatrix by circulant permutation matrices.
//!
//! A cell with entry `e` becomes the sum of `e` distinct `N x N` circulants;
//! the circulant with shift `s` has its ones at `(r, (r + s) mod N)`.
//! [`lift_cpeg_ace`] picks shifts edge by edge, favouring long local cycles
//! and, among equally short ones, a large approximate cycle extrinsic
//! message degree (ACE).

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protomatrix::{HrcShape, Protomatrix, ProtomatrixError};
use crate::sparse::{Girth, SparseBinary};

/// Cycles up to length `2 * DEFAULT_ACE_DEPTH` are scored during lifting.
pub const DEFAULT_ACE_DEPTH: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiftError {
    #[error("lift factor must be positive")]
    ZeroFactor,
    #[error("lift factor {n} too small for entry {entry} at cell ({row}, {col})")]
    FactorTooSmall {
        row: usize,
        col: usize,
        entry: u8,
        n: usize,
    },
    #[error("ace depth must be at least 2")]
    AceDepth,
    #[error("no admissible shift for cell ({row}, {col})")]
    NoAdmissibleShift { row: usize, col: usize },
    #[error("cell ({row}, {col}) lists {found} shifts for entry {entry}")]
    ShiftCount {
        row: usize,
        col: usize,
        found: usize,
        entry: u8,
    },
    #[error("cell ({row}, {col}) repeats shift {shift}")]
    DuplicateShift {
        row: usize,
        col: usize,
        shift: usize,
    },
    #[error("cell ({row}, {col}) shift {shift} outside 0..{n}")]
    ShiftOutOfRange {
        row: usize,
        col: usize,
        shift: usize,
        n: usize,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Protomatrix(#[from] ProtomatrixError),
}

/// A protomatrix together with one shift list per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedCode {
    proto: Protomatrix,
    lift_factor: usize,
    /// Row-major over cells.
    shifts: Vec<Vec<usize>>,
}

impl LiftedCode {
    /// Validates shift lists against the protomatrix entries.
    pub fn new(
        proto: Protomatrix,
        lift_factor: usize,
        shifts: Vec<Vec<usize>>,
    ) -> Result<Self, LiftError> {
        if lift_factor == 0 {
            return Err(LiftError::ZeroFactor);
        }
        assert_eq!(
            shifts.len(),
            proto.n_c() * proto.n_v(),
            "one shift list per cell"
        );
        for r in 0..proto.n_c() {
            for c in 0..proto.n_v() {
                let list = &shifts[r * proto.n_v() + c];
                let entry = proto.get(r, c);
                let (row, col) = (r + 1, c + 1);
                if list.len() != entry as usize {
                    return Err(LiftError::ShiftCount {
                        row,
                        col,
                        found: list.len(),
                        entry,
                    });
                }
                for (k, &shift) in list.iter().enumerate() {
                    if shift >= lift_factor {
                        return Err(LiftError::ShiftOutOfRange {
                            row,
                            col,
                            shift,
                            n: lift_factor,
                        });
                    }
                    if list[..k].contains(&shift) {
                        return Err(LiftError::DuplicateShift { row, col, shift });
                    }
                }
            }
        }
        Ok(Self {
            proto,
            lift_factor,
            shifts,
        })
    }

    pub fn proto(&self) -> &Protomatrix {
        &self.proto
    }

    pub fn lift_factor(&self) -> usize {
        self.lift_factor
    }

    /// Shifts of the 0-based cell `(row, col)`.
    pub fn shifts(&self, row: usize, col: usize) -> &[usize] {
        &self.shifts[row * self.proto.n_v() + col]
    }

    /// Codeword length `n_v * N`.
    pub fn n(&self) -> usize {
        self.proto.n_v() * self.lift_factor
    }

    /// Information length `(n_v - n_c) * N`.
    pub fn k(&self) -> usize {
        (self.proto.n_v() - self.proto.n_c()) * self.lift_factor
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.lift_factor;
        let nv = self.proto.n_v();
        (0..self.proto.n_c()).flat_map(move |i| {
            (0..nv).flat_map(move |j| {
                self.shifts(i, j)
                    .iter()
                    .flat_map(move |&s| (0..n).map(move |r| (i * n + r, j * n + (r + s) % n)))
            })
        })
    }

    /// The explicit `(n_c N) x (n_v N)` parity-check matrix.
    pub fn expand(&self) -> SparseBinary {
        let n = self.lift_factor;
        SparseBinary::from_entries(self.proto.n_c() * n, self.proto.n_v() * n, self.entries())
            .expect("distinct shifts give distinct positions")
    }

    /// Girth of the lifted Tanner graph. Cyclic symmetry makes one root per
    /// block column sufficient.
    pub fn girth(&self) -> Girth {
        let roots: Vec<usize> = (0..self.proto.n_v())
            .map(|j| j * self.lift_factor)
            .collect();
        self.expand().girth_from(&roots)
    }

    /// Text form: `qc n_c n_v N`, optional `pbrl n_cH n_vH` and `punctured`
    /// lines, then `i j : s1,s2,...` for every non-empty cell (1-based).
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LiftedCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.proto;
        writeln!(f, "qc {} {} {}", p.n_c(), p.n_v(), self.lift_factor)?;
        if let Some(h) = p.hrc_shape() {
            writeln!(f, "pbrl {} {}", h.checks, h.vars)?;
        }
        if !p.punctured().is_empty() {
            let list: Vec<String> = p.punctured().iter().map(ToString::to_string).collect();
            writeln!(f, "punctured {}", list.join(" "))?;
        }
        for i in 0..p.n_c() {
            for j in 0..p.n_v() {
                let s = self.shifts(i, j);
                if !s.is_empty() {
                    let list: Vec<String> = s.iter().map(ToString::to_string).collect();
                    writeln!(f, "{} {} : {}", i + 1, j + 1, list.join(","))?;
                }
            }
        }
        Ok(())
    }
}

impl FromStr for LiftedCode {
    type Err = LiftError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let malformed = |line: usize, msg: String| LiftError::Malformed { line, msg };
        let num = |tok: &str, line: usize| -> Result<usize, LiftError> {
            tok.trim()
                .parse()
                .map_err(|_| malformed(line, format!("expected a number, found `{tok}`")))
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hl, header) = lines
            .next()
            .ok_or_else(|| malformed(0, "empty input".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let (n_c, n_v, n) = match toks.as_slice() {
            ["qc", c, v, n] => (num(c, hl)?, num(v, hl)?, num(n, hl)?),
            _ => return Err(malformed(hl, "header must be `qc <n_c> <n_v> <N>`".into())),
        };
        if n_c == 0 || n_v == 0 {
            return Err(malformed(hl, "empty protomatrix".into()));
        }
        let mut hrc = None;
        let mut punctured = Vec::new();
        let mut shifts = vec![Vec::new(); n_c * n_v];
        let mut seen = vec![false; n_c * n_v];
        for (ln, l) in lines {
            if let Some(rest) = l.strip_prefix("pbrl") {
                let t: Vec<&str> = rest.split_whitespace().collect();
                let [ch, vh] = t.as_slice() else {
                    return Err(malformed(ln, "expected `pbrl <n_cH> <n_vH>`".into()));
                };
                hrc = Some(HrcShape {
                    checks: num(ch, ln)?,
                    vars: num(vh, ln)?,
                });
                continue;
            }
            if let Some(rest) = l.strip_prefix("punctured") {
                for t in rest.split_whitespace() {
                    punctured.push(num(t, ln)?);
                }
                continue;
            }
            let (cell, list) = l
                .split_once(':')
                .ok_or_else(|| malformed(ln, "expected `i j : shifts`".into()))?;
            let ij: Vec<&str> = cell.split_whitespace().collect();
            let [i, j] = ij.as_slice() else {
                return Err(malformed(ln, "expected two cell indices".into()));
            };
            let (i, j) = (num(i, ln)?, num(j, ln)?);
            if i == 0 || i > n_c || j == 0 || j > n_v {
                return Err(malformed(
                    ln,
                    format!("cell ({i}, {j}) outside {n_c}x{n_v}"),
                ));
            }
            let idx = (i - 1) * n_v + (j - 1);
            if seen[idx] {
                return Err(malformed(ln, format!("cell ({i}, {j}) listed twice")));
            }
            seen[idx] = true;
            shifts[idx] = list
                .split(',')
                .map(|t| num(t, ln))
                .collect::<Result<_, _>>()?;
        }
        let rows: Vec<Vec<u8>> = (0..n_c)
            .map(|i| {
                (0..n_v)
                    .map(|j| shifts[i * n_v + j].len().min(u8::MAX as usize) as u8)
                    .collect()
            })
            .collect();
        let proto = Protomatrix::new(rows, punctured, hrc)?;
        LiftedCode::new(proto, n, shifts)
    }
}

fn check_factor(p: &Protomatrix, n: usize) -> Result<(), LiftError> {
    if n == 0 {
        return Err(LiftError::ZeroFactor);
    }
    for i in 0..p.n_c() {
        for j in 0..p.n_v() {
            let entry = p.get(i, j);
            if entry as usize > n {
                return Err(LiftError::FactorTooSmall {
                    row: i + 1,
                    col: j + 1,
                    entry,
                    n,
                });
            }
        }
    }
    Ok(())
}

/// Shifts drawn uniformly at random (distinct within a cell).
pub fn lift_random(p: &Protomatrix, n: usize, seed: u64) -> Result<LiftedCode, LiftError> {
    check_factor(p, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shifts = Vec::with_capacity(p.n_c() * p.n_v());
    for i in 0..p.n_c() {
        for j in 0..p.n_v() {
            shifts.push(sample(&mut rng, n, p.get(i, j) as usize).into_vec());
        }
    }
    LiftedCode::new(p.clone(), n, shifts)
}

/// Tanner graph under construction; variables are `0..nv`, checks are
/// numbered separately.
struct Growing {
    var_adj: Vec<Vec<usize>>,
    chk_adj: Vec<Vec<usize>>,
    /// Final degree minus two per variable, the ACE contribution.
    ace_weight: Vec<i64>,
}

/// Local quality of a candidate shift; larger is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct LocalScore {
    /// Shortest new cycle, `usize::MAX` when none within the search depth.
    cycle: usize,
    /// Smallest ACE among the shortest new cycles.
    ace: i64,
}

impl Growing {
    fn add(&mut self, edges: &[(usize, usize)]) {
        for &(c, v) in edges {
            self.chk_adj[c].push(v);
            self.var_adj[v].push(c);
        }
    }

    fn remove(&mut self, edges: &[(usize, usize)]) {
        for &(c, v) in edges.iter().rev() {
            self.chk_adj[c].pop();
            self.var_adj[v].pop();
        }
    }

    /// Shortest cycle through the edge `(c0, v0)` up to `max_len`, and the
    /// minimum ACE over the cycles of that length.
    fn score_edge(&self, c0: usize, v0: usize, max_len: usize) -> LocalScore {
        let nv = self.var_adj.len();
        // Node ids: variables 0..nv, checks nv.. .
        let total = nv + self.chk_adj.len();
        let mut dist = vec![usize::MAX; total];
        let mut ace = vec![i64::MAX; total];
        let mut queue = VecDeque::new();
        let target = nv + c0;
        dist[v0] = 0;
        ace[v0] = self.ace_weight[v0];
        queue.push_back(v0);
        while let Some(u) = queue.pop_front() {
            if u == target {
                break;
            }
            // A path of length d + 1 closes a cycle of length d + 2.
            if dist[u] + 2 > max_len {
                break;
            }
            let next: &[usize] = if u < nv {
                &self.var_adj[u]
            } else {
                &self.chk_adj[u - nv]
            };
            for &w in next {
                let w = if u < nv { nv + w } else { w };
                if u == v0 && w == target {
                    continue;
                }
                let gain = if w < nv { self.ace_weight[w] } else { 0 };
                let cand = ace[u] + gain;
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    ace[w] = cand;
                    queue.push_back(w);
                } else if dist[w] == dist[u] + 1 {
                    ace[w] = ace[w].min(cand);
                }
            }
        }
        if dist[target] == usize::MAX {
            LocalScore {
                cycle: usize::MAX,
                ace: i64::MAX,
            }
        } else {
            LocalScore {
                cycle: dist[target] + 1,
                ace: ace[target],
            }
        }
    }
}

/// Circulant PEG lifting with ACE tie-breaking.
///
/// Cells are visited column by column, top to bottom, the copies of a
/// multi-edge cell consecutively. Each candidate shift is scored by the
/// shortest cycle it closes (up to length `2 * ace_depth`), then by the
/// smallest ACE among those cycles; remaining ties are broken with a
/// ChaCha8 stream seeded by `seed`.
pub fn lift_cpeg_ace(
    p: &Protomatrix,
    n: usize,
    seed: u64,
    ace_depth: usize,
) -> Result<LiftedCode, LiftError> {
    check_factor(p, n)?;
    if ace_depth < 2 {
        return Err(LiftError::AceDepth);
    }
    let max_len = 2 * ace_depth;
    let (nc, nv) = (p.n_c(), p.n_v());
    let mut g = Growing {
        var_adj: vec![Vec::new(); nv * n],
        chk_adj: vec![Vec::new(); nc * n],
        ace_weight: (0..nv * n).map(|v| p.col_sum(v / n) as i64 - 2).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shifts = vec![Vec::new(); nc * nv];
    let mut edges = Vec::with_capacity(n);
    for j in 0..nv {
        for i in 0..nc {
            for _ in 0..p.get(i, j) {
                let used = &shifts[i * nv + j];
                let mut best: Option<LocalScore> = None;
                let mut tied = Vec::new();
                for s in (0..n).filter(|s| !used.contains(s)) {
                    edges.clear();
                    edges.extend((0..n).map(|r| (i * n + r, j * n + (r + s) % n)));
                    g.add(&edges);
                    let score = g.score_edge(i * n, j * n + s, max_len);
                    g.remove(&edges);
                    match best {
                        Some(b) if score < b => {}
                        Some(b) if score == b => tied.push(s),
                        _ => {
                            best = Some(score);
                            tied.clear();
                            tied.push(s);
                        }
                    }
                }
                if tied.is_empty() {
                    return Err(LiftError::NoAdmissibleShift {
                        row: i + 1,
                        col: j + 1,
                    });
                }
                let s = tied[rng.random_range(0..tied.len())];
                edges.clear();
                edges.extend((0..n).map(|r| (i * n + r, j * n + (r + s) % n)));
                g.add(&edges);
                shifts[i * nv + j].push(s);
            }
        }
    }
    LiftedCode::new(p.clone(), n, shifts)
}
