//! Sparse binary matrices as Tanner graphs: adjacency lists, the alist text
//! format and girth by breadth-first search.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    OutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("entry ({row}, {col}) set twice")]
    Duplicate { row: usize, col: usize },
    #[error("alist: {0}")]
    Alist(String),
}

/// Length of the shortest cycle, or infinite for a forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Girth {
    Finite(usize),
    Infinite,
}

impl Girth {
    pub fn finite(self) -> Option<usize> {
        match self {
            Girth::Finite(g) => Some(g),
            Girth::Infinite => None,
        }
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Finite(g) => write!(f, "{g}"),
            Girth::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Girth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Girth::Finite(g) => s.serialize_u64(*g as u64),
            Girth::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Binary matrix stored as row and column adjacency lists, both sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinary {
    rows: usize,
    cols: usize,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
}

impl SparseBinary {
    /// Builds from 0-based `(row, col)` positions of the ones.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, SparseError> {
        let mut row_adj = vec![Vec::new(); rows];
        let mut col_adj = vec![Vec::new(); cols];
        for (row, col) in entries {
            if row >= rows || col >= cols {
                return Err(SparseError::OutOfRange {
                    row,
                    col,
                    rows,
                    cols,
                });
            }
            row_adj[row].push(col);
            col_adj[col].push(row);
        }
        for (row, adj) in row_adj.iter_mut().enumerate() {
            adj.sort_unstable();
            if let Some(w) = adj.windows(2).find(|w| w[0] == w[1]) {
                return Err(SparseError::Duplicate { row, col: w[0] });
            }
        }
        col_adj.iter_mut().for_each(|a| a.sort_unstable());
        Ok(Self {
            rows,
            cols,
            row_adj,
            col_adj,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column indices of the ones in `row`.
    pub fn row(&self, row: usize) -> &[usize] {
        &self.row_adj[row]
    }

    /// Row indices of the ones in `col`.
    pub fn col(&self, col: usize) -> &[usize] {
        &self.col_adj[col]
    }

    pub fn nnz(&self) -> usize {
        self.row_adj.iter().map(Vec::len).sum()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.row_adj[row].binary_search(&col).is_ok()
    }

    /// The sub-matrix made of the first `rows` rows and `cols` columns.
    pub fn top_left(&self, rows: usize, cols: usize) -> Self {
        let entries = (0..rows).flat_map(|r| {
            self.row_adj[r]
                .iter()
                .copied()
                .filter(move |&c| c < cols)
                .map(move |c| (r, c))
        });
        Self::from_entries(rows, cols, entries).expect("sub-matrix of a valid matrix")
    }

    /// `H x` over GF(2) for a 0/1 vector `x`.
    pub fn syndrome(&self, x: &[u8]) -> Vec<u8> {
        self.row_adj
            .iter()
            .map(|adj| adj.iter().fold(0u8, |acc, &c| acc ^ (x[c] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, x: &[u8]) -> bool {
        self.syndrome(x).iter().all(|&s| s == 0)
    }

    /// Girth of the Tanner graph, searching from every variable node.
    pub fn girth(&self) -> Girth {
        let roots: Vec<usize> = (0..self.cols).collect();
        self.girth_from(&roots)
    }

    /// Shortest cycle through any of the given variable nodes. Equals the
    /// girth whenever every cycle class has a representative among `roots`.
    pub fn girth_from(&self, roots: &[usize]) -> Girth {
        roots
            .par_iter()
            .map(|&v| self.shortest_cycle_at(v))
            .min()
            .unwrap_or(Girth::Infinite)
    }

    /// Shortest closed walk without backtracking found by BFS from variable
    /// `root`; the minimum over all roots is the girth.
    fn shortest_cycle_at(&self, root: usize) -> Girth {
        // Nodes 0..cols are variables, cols.. are checks.
        let n = self.cols + self.rows;
        let mut dist = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        dist[root] = 0;
        queue.push_back(root);
        let mut best = usize::MAX;
        while let Some(u) = queue.pop_front() {
            if 2 * dist[u] + 1 >= best {
                break;
            }
            let neighbours: Box<dyn Iterator<Item = usize>> = if u < self.cols {
                Box::new(self.col_adj[u].iter().map(|&r| r + self.cols))
            } else {
                Box::new(self.row_adj[u - self.cols].iter().copied())
            };
            for w in neighbours {
                if w == parent[u] {
                    continue;
                }
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    parent[w] = u;
                    queue.push_back(w);
                } else {
                    best = best.min(dist[u] + dist[w] + 1);
                }
            }
        }
        if best == usize::MAX {
            Girth::Infinite
        } else {
            Girth::Finite(best)
        }
    }

    /// MacKay's alist format: sizes, maximum weights, per-column and per-row
    /// weights, then 1-based adjacency lists padded with zeros.
    pub fn to_alist(&self) -> String {
        let col_w: Vec<usize> = self.col_adj.iter().map(Vec::len).collect();
        let row_w: Vec<usize> = self.row_adj.iter().map(Vec::len).collect();
        let max_c = col_w.iter().copied().max().unwrap_or(0);
        let max_r = row_w.iter().copied().max().unwrap_or(0);
        let join = |v: &[usize]| {
            v.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        };
        let padded = |adj: &[usize], width: usize| {
            let mut v: Vec<usize> = adj.iter().map(|&x| x + 1).collect();
            v.resize(width, 0);
            join(&v)
        };
        let mut out = format!("{} {}\n{} {}\n", self.cols, self.rows, max_c, max_r);
        out.push_str(&join(&col_w));
        out.push('\n');
        out.push_str(&join(&row_w));
        out.push('\n');
        for adj in &self.col_adj {
            out.push_str(&padded(adj, max_c));
            out.push('\n');
        }
        for adj in &self.row_adj {
            out.push_str(&padded(adj, max_r));
            out.push('\n');
        }
        out
    }

    pub fn from_alist(text: &str) -> Result<Self, SparseError> {
        let bad = |m: &str| SparseError::Alist(m.to_string());
        let nums: Vec<usize> = text
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(&format!("not a number: `{t}`"))))
            .collect::<Result<_, _>>()?;
        let mut it = nums.into_iter();
        let mut next = || it.next().ok_or_else(|| bad("truncated"));
        let (cols, rows) = (next()?, next()?);
        let (max_c, _max_r) = (next()?, next()?);
        let col_w: Vec<usize> = (0..cols).map(|_| next()).collect::<Result<_, _>>()?;
        for _ in 0..rows {
            next()?;
        }
        let mut entries = Vec::new();
        for (c, &w) in col_w.iter().enumerate() {
            let mut seen = 0;
            for _ in 0..max_c {
                let r = next()?;
                if r > 0 {
                    entries.push((r - 1, c));
                    seen += 1;
                }
            }
            if seen != w {
                return Err(bad(&format!(
                    "column {} lists {seen} rows, weight says {w}",
                    c + 1
                )));
            }
        }
        let m = Self::from_entries(rows, cols, entries)?;
        Ok(m)
    }
}
