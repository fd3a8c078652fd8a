//! Exact permanents of small non-negative integer matrices.
//!
//! Three engines are provided. [`perm_naive`] sums over every permutation and
//! serves as the reference. [`perm_ryser`] is Ryser's inclusion-exclusion
//! formula walked in Gray-code order, `O(l * 2^l)`. [`perm_reduced`] first
//! strips columns and rows holding a single non-zero entry (a Laplace
//! expansion with one surviving term) and hands the remaining core to Ryser.
//!
//! All arithmetic is checked; overflow is an error, never a wrapped value.

use thiserror::Error;

/// Largest dimension accepted by [`perm_naive`].
pub const NAIVE_MAX_DIM: usize = 9;
/// Largest dimension accepted by [`perm_ryser`].
pub const RYSER_MAX_DIM: usize = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermanentError {
    #[error("permanent overflowed 128-bit arithmetic")]
    Overflow,
    #[error("{engine} permanent limited to {max}x{max}, got {dim}x{dim}")]
    TooLarge {
        engine: &'static str,
        dim: usize,
        max: usize,
    },
    #[error("matrix is not square: {entries} entries for dimension {dim}")]
    NotSquare { dim: usize, entries: usize },
    #[error("matrix is empty")]
    Empty,
}

/// An `l x l` matrix of non-negative integers, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SquareIntMatrix {
    dim: usize,
    entries: Vec<u64>,
}

impl SquareIntMatrix {
    pub fn new(dim: usize, entries: Vec<u64>) -> Result<Self, PermanentError> {
        if dim == 0 {
            return Err(PermanentError::Empty);
        }
        if entries.len() != dim * dim {
            return Err(PermanentError::NotSquare {
                dim,
                entries: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, PermanentError> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(PermanentError::NotSquare {
                    dim,
                    entries: r.len() * dim,
                });
            }
            entries.extend_from_slice(r);
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    /// `out[i][j] = self[rows[i]][cols[j]]`; `rows` and `cols` must have
    /// equal length. With full index lists this is a row/column permutation.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        assert_eq!(rows.len(), cols.len());
        let mut entries = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            entries.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        Self {
            dim: rows.len(),
            entries,
        }
    }
}

/// Sum over all `l!` permutations of the products of the selected entries.
pub fn perm_naive(m: &SquareIntMatrix) -> Result<u128, PermanentError> {
    if m.dim > NAIVE_MAX_DIM {
        return Err(PermanentError::TooLarge {
            engine: "naive",
            dim: m.dim,
            max: NAIVE_MAX_DIM,
        });
    }
    fn walk(m: &SquareIntMatrix, row: usize, used: u32, acc: u128) -> Result<u128, PermanentError> {
        if row == m.dim {
            return Ok(acc);
        }
        let mut total: u128 = 0;
        for col in 0..m.dim {
            if used & (1 << col) != 0 {
                continue;
            }
            let prod = acc
                .checked_mul(m.get(row, col) as u128)
                .ok_or(PermanentError::Overflow)?;
            let sub = walk(m, row + 1, used | (1 << col), prod)?;
            total = total.checked_add(sub).ok_or(PermanentError::Overflow)?;
        }
        Ok(total)
    }
    walk(m, 0, 0, 1)
}

/// Ryser's formula
/// `perm(A) = (-1)^l * sum_{S} (-1)^{|S|} prod_i sum_{j in S} a_ij`
/// with subsets visited in Gray-code order so each step updates the row sums
/// by a single column.
pub fn perm_ryser(m: &SquareIntMatrix) -> Result<u128, PermanentError> {
    let n = m.dim;
    if n > RYSER_MAX_DIM {
        return Err(PermanentError::TooLarge {
            engine: "ryser",
            dim: n,
            max: RYSER_MAX_DIM,
        });
    }
    let mut row_sums = vec![0i128; n];
    let mut in_set = vec![false; n];
    let mut set_size = 0usize;
    let mut total: i128 = 0;
    for k in 1u64..(1u64 << n) {
        let col = k.trailing_zeros() as usize;
        let adding = !in_set[col];
        in_set[col] = adding;
        if adding {
            set_size += 1;
            for (r, s) in row_sums.iter_mut().enumerate() {
                *s += m.get(r, col) as i128;
            }
        } else {
            set_size -= 1;
            for (r, s) in row_sums.iter_mut().enumerate() {
                *s -= m.get(r, col) as i128;
            }
        }
        let mut prod: i128 = 1;
        for &s in &row_sums {
            if s == 0 {
                prod = 0;
                break;
            }
            prod = prod.checked_mul(s).ok_or(PermanentError::Overflow)?;
        }
        if prod == 0 {
            continue;
        }
        total = if (n - set_size).is_multiple_of(2) {
            total.checked_add(prod)
        } else {
            total.checked_sub(prod)
        }
        .ok_or(PermanentError::Overflow)?;
    }
    u128::try_from(total).map_err(|_| PermanentError::Overflow)
}

/// Outcome of [`perm_reduced_detailed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reduction {
    pub value: u128,
    /// Dimension of the irreducible core passed to Ryser (0 when the
    /// reduction finished the job on its own).
    pub core_dim: usize,
}

enum Line {
    /// An all-zero row or column.
    Zero,
    /// Positions (in `rows`, `cols`) of the lone non-zero entry of a line.
    Singleton(usize, usize),
    None,
}

fn find_singleton(m: &SquareIntMatrix, rows: &[usize], cols: &[usize]) -> Line {
    let mut row_hit = None;
    for (ci, &c) in cols.iter().enumerate() {
        let mut nz = rows.iter().enumerate().filter(|(_, &r)| m.get(r, c) != 0);
        match (nz.next(), nz.next()) {
            (None, _) => return Line::Zero,
            (Some((ri, _)), None) => return Line::Singleton(ri, ci),
            _ => {}
        }
    }
    for (ri, &r) in rows.iter().enumerate() {
        let mut nz = cols.iter().enumerate().filter(|(_, &c)| m.get(r, c) != 0);
        match (nz.next(), nz.next()) {
            (None, _) => return Line::Zero,
            (Some((ci, _)), None) if row_hit.is_none() => row_hit = Some((ri, ci)),
            _ => {}
        }
    }
    match row_hit {
        Some((ri, ci)) => Line::Singleton(ri, ci),
        None => Line::None,
    }
}

/// Permanent via singleton-line stripping followed by Ryser on the core.
pub fn perm_reduced(m: &SquareIntMatrix) -> Result<u128, PermanentError> {
    perm_reduced_detailed(m).map(|r| r.value)
}

/// Like [`perm_reduced`], also reporting the size of the core.
///
/// A column (scanned first, left to right) or row with exactly one non-zero
/// entry `v` contributes the factor `v` and is removed together with the
/// crossing line. An all-zero line makes the permanent zero.
pub fn perm_reduced_detailed(m: &SquareIntMatrix) -> Result<Reduction, PermanentError> {
    let mut rows: Vec<usize> = (0..m.dim).collect();
    let mut cols: Vec<usize> = (0..m.dim).collect();
    let mut factor: u128 = 1;

    while !rows.is_empty() {
        match find_singleton(m, &rows, &cols) {
            Line::Zero => {
                return Ok(Reduction {
                    value: 0,
                    core_dim: 0,
                })
            }
            Line::Singleton(ri, ci) => {
                factor = factor
                    .checked_mul(m.get(rows[ri], cols[ci]) as u128)
                    .ok_or(PermanentError::Overflow)?;
                rows.remove(ri);
                cols.remove(ci);
            }
            Line::None => break,
        }
    }

    if rows.is_empty() {
        return Ok(Reduction {
            value: factor,
            core_dim: 0,
        });
    }
    let core = m.submatrix(&rows, &cols);
    let value = factor
        .checked_mul(perm_ryser(&core)?)
        .ok_or(PermanentError::Overflow)?;
    Ok(Reduction {
        value,
        core_dim: core.dim,
    })
}
