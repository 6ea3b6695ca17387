//! Prime-field arithmetic and dense matrices over F_q.
//!
//! Elements are plain `u64` values in `[0, q)`. Products go through `u128`
//! so any prime below 2^63 is safe.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldError {
    /// Inverse of zero requested.
    ZeroInverse,
    /// Matrix is not invertible.
    Singular,
    /// Shapes do not line up.
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// Modulus is not prime or does not fit.
    NotPrime(u64),
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::ZeroInverse => write!(f, "inverse of zero"),
            FieldError::Singular => write!(f, "singular matrix"),
            FieldError::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            FieldError::NotPrime(q) => write!(f, "modulus {q} is not a usable prime"),
        }
    }
}

/// The prime field F_q.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fq {
    q: u64,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Fq {
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if q >= 1 << 63 || !is_prime(q) {
            return Err(FieldError::NotPrime(q));
        }
        Ok(Fq { q })
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.q
    }

    /// Maps a signed integer into the field.
    pub fn from_i64(&self, a: i64) -> u64 {
        a.rem_euclid(self.q as i64) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut r = 1 % self.q;
        a %= self.q;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }

    pub fn inv(&self, a: u64) -> Result<u64, FieldError> {
        let a = a % self.q;
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn div(&self, a: u64, b: u64) -> Result<u64, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn dot(&self, a: &[u64], b: &[u64]) -> u64 {
        let mut acc = 0u128;
        let q = self.q as u128;
        for (x, y) in a.iter().zip(b) {
            acc += *x as u128 * *y as u128;
            if acc >= 1 << 126 {
                acc %= q;
            }
        }
        (acc % q) as u64
    }
}

/// Dense row-major matrix over F_q.
#[derive(Clone, PartialEq, Eq)]
pub struct FqMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl fmt::Debug for FqMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FqMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl FqMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FqMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, FieldError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(FieldError::DimensionMismatch {
                    expected: (r, c),
                    found: (r, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(FqMatrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        FqMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<u64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self.get(r0 + i, c0 + j))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), self.cols, |i, j| self.get(idx[i], j))
    }

    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]))
    }

    pub fn hstack(&self, other: &Self) -> Result<Self, FieldError> {
        if self.rows != other.rows {
            return Err(FieldError::DimensionMismatch {
                expected: (self.rows, other.cols),
                found: (other.rows, other.cols),
            });
        }
        Ok(Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.get(i, j)
            } else {
                other.get(i, j - self.cols)
            }
        }))
    }

    pub fn vstack(&self, other: &Self) -> Result<Self, FieldError> {
        if self.cols != other.cols {
            return Err(FieldError::DimensionMismatch {
                expected: (other.rows, self.cols),
                found: (other.rows, other.cols),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(FqMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn block_diag(blocks: &[&FqMatrix]) -> Self {
        let r: usize = blocks.iter().map(|b| b.rows).sum();
        let c: usize = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(r, c);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m.set(r0 + i, c0 + j, b.get(i, j));
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        m
    }

    pub fn mul(&self, f: &Fq, other: &Self) -> Result<Self, FieldError> {
        if self.cols != other.rows {
            return Err(FieldError::DimensionMismatch {
                expected: (self.cols, other.cols),
                found: (other.rows, other.cols),
            });
        }
        let t = other.transpose();
        Ok(Self::from_fn(self.rows, other.cols, |i, j| {
            f.dot(self.row(i), t.row(j))
        }))
    }

    pub fn mul_vec(&self, f: &Fq, v: &[u64]) -> Result<Vec<u64>, FieldError> {
        if self.cols != v.len() {
            return Err(FieldError::DimensionMismatch {
                expected: (self.cols, 1),
                found: (v.len(), 1),
            });
        }
        Ok((0..self.rows).map(|i| f.dot(self.row(i), v)).collect())
    }

    pub fn scale(&self, f: &Fq, s: u64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| f.mul(self.get(i, j), s))
    }

    pub fn add(&self, f: &Fq, other: &Self) -> Result<Self, FieldError> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(FieldError::DimensionMismatch {
                expected: (self.rows, self.cols),
                found: (other.rows, other.cols),
            });
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            f.add(self.get(i, j), other.get(i, j))
        }))
    }

    /// Row-reduces in place; returns pivot columns. First nonzero entry is the pivot.
    fn reduce_in_place(&mut self, f: &Fq) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            if p != r {
                for j in 0..self.cols {
                    self.data.swap(p * self.cols + j, r * self.cols + j);
                }
            }
            let inv = f.inv(self.get(r, c)).expect("pivot is nonzero");
            for j in 0..self.cols {
                let v = f.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i != r {
                    let factor = self.get(i, c);
                    if factor != 0 {
                        for j in c..self.cols {
                            let v = f.sub(self.get(i, j), f.mul(factor, self.get(r, j)));
                            self.set(i, j, v);
                        }
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self, f: &Fq) -> usize {
        let mut m = self.clone();
        m.reduce_in_place(f).len()
    }

    pub fn inverse(&self, f: &Fq) -> Result<Self, FieldError> {
        if self.rows != self.cols {
            return Err(FieldError::DimensionMismatch {
                expected: (self.rows, self.rows),
                found: (self.rows, self.cols),
            });
        }
        let n = self.rows;
        let mut aug = self.hstack(&Self::identity(n))?;
        let pivots = aug.reduce_in_place(f);
        if pivots.len() < n || pivots[n - 1] >= n {
            return Err(FieldError::Singular);
        }
        Ok(aug.block(0, n, n, 2 * n))
    }

    /// Solves `self * x = b` for square invertible `self`.
    pub fn solve(&self, f: &Fq, b: &[u64]) -> Result<Vec<u64>, FieldError> {
        if self.rows != b.len() {
            return Err(FieldError::DimensionMismatch {
                expected: (self.rows, 1),
                found: (b.len(), 1),
            });
        }
        self.inverse(f)?.mul_vec(f, b)
    }
}
