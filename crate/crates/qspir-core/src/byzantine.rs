//! Location and cancellation of Byzantine contamination.
//!
//! With `C = CSA^{-1}` over the responsive servers, a deviation vector supported
//! on a set `J` of `B` servers shifts the decoded coefficient vector by
//! `C[:, J] * delta`. The last `2B` coefficients are known to be zero in an
//! honest round; `Phi` and `Psi` are those rows, split in half.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Fq, FqMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionViews {
    b: usize,
    cinv: FqMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviationEstimate {
    pub j: Vec<usize>,
    pub estimate: Vec<u64>,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    /// Accepted candidate set, as responsive positions.
    pub accepted: Vec<usize>,
    /// Corrected coefficient vectors, one per instance.
    pub corrected: Vec<Vec<u64>>,
}

impl CorrectionViews {
    pub fn new(field: &Fq, csa: &FqMatrix, b: usize) -> Result<Self> {
        if csa.rows() < 2 * b {
            return Err(Error::InvalidConfig("fewer than 2B check rows".into()));
        }
        Ok(CorrectionViews {
            b,
            cinv: csa.inverse(field)?,
        })
    }

    pub fn from_inverse(cinv: FqMatrix, b: usize) -> Self {
        CorrectionViews { b, cinv }
    }

    pub fn len(&self) -> usize {
        self.cinv.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.cinv.rows() == 0
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn cinv(&self) -> &FqMatrix {
        &self.cinv
    }

    /// First `a` rows, columns `j`.
    pub fn d(&self, a: usize, j: &[usize]) -> FqMatrix {
        self.cinv.block(0, a, 0, self.len()).select_cols(j)
    }

    pub fn phi(&self, j: &[usize]) -> FqMatrix {
        let r = self.len();
        self.cinv.block(r - 2 * self.b, r - self.b, 0, r).select_cols(j)
    }

    pub fn psi(&self, j: &[usize]) -> FqMatrix {
        let r = self.len();
        self.cinv.block(r - self.b, r, 0, r).select_cols(j)
    }
}

/// `block` holds the `2B` check coefficients of one instance.
pub fn estimate_and_check(
    field: &Fq,
    views: &CorrectionViews,
    block: &[u64],
    j: &[usize],
) -> Result<DeviationEstimate> {
    let b = views.b;
    if block.len() != 2 * b || j.len() != b {
        return Err(crate::field::FieldError::DimensionMismatch {
            expected: (2 * b, b),
            found: (block.len(), j.len()),
        }
        .into());
    }
    let estimate = views.psi(j).solve(field, &block[b..])?;
    let predicted = views.phi(j).mul_vec(field, &estimate)?;
    Ok(DeviationEstimate {
        j: j.to_vec(),
        consistent: predicted == block[..b],
        estimate,
    })
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for t in i..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

/// Subtracts `D(len, J) * estimate` from the positions marked known.
pub fn apply_correction(
    field: &Fq,
    views: &CorrectionViews,
    x: &[u64],
    known: &[bool],
    j: &[usize],
    estimate: &[u64],
) -> Result<Vec<u64>> {
    let shift = views.d(views.len(), j).mul_vec(field, estimate)?;
    Ok(x
        .iter()
        .zip(&shift)
        .zip(known)
        .map(|((&v, &s), &k)| if k { field.sub(v, s) } else { v })
        .collect())
}

/// Finds the first candidate set consistent for every instance and corrects with it.
///
/// `xs[i]` is instance i's coefficient vector (unknown positions arbitrary),
/// `known[i]` marks the positions actually observed.
pub fn search_and_correct(
    field: &Fq,
    views: &[CorrectionViews],
    xs: &[Vec<u64>],
    known: &[Vec<bool>],
) -> Result<Correction> {
    let Some(first) = views.first() else {
        return Ok(Correction {
            accepted: Vec::new(),
            corrected: Vec::new(),
        });
    };
    let b = first.b;
    let universe = first.len();
    if b == 0 {
        return Ok(Correction {
            accepted: Vec::new(),
            corrected: xs.to_vec(),
        });
    }
    'candidates: for j in combinations(universe, b) {
        let mut estimates = Vec::with_capacity(views.len());
        for (v, x) in views.iter().zip(xs) {
            let r = v.len();
            let est = estimate_and_check(field, v, &x[r - 2 * b..], &j)?;
            if !est.consistent {
                continue 'candidates;
            }
            estimates.push(est.estimate);
        }
        let mut corrected = Vec::with_capacity(views.len());
        for ((v, x), (k, e)) in views.iter().zip(xs).zip(known.iter().zip(&estimates)) {
            corrected.push(apply_correction(field, v, x, k, &j, e)?);
        }
        return Ok(Correction {
            accepted: j,
            corrected,
        });
    }
    Err(Error::DecodeFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{csa, EvaluationPoints};
    use crate::rng::Stream;
    use alloc::vec;

    fn views(n: usize, l: usize, b: usize) -> (Fq, CorrectionViews) {
        let f = Fq::new(257).unwrap();
        let p = EvaluationPoints::canonical(&f, n, l, 0).unwrap();
        let c = csa(&f, &p.alpha, &p.f, l).unwrap();
        (f, CorrectionViews::new(&f, &c, b).unwrap())
    }

    #[test]
    fn combinations_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn zero_b_is_empty() {
        let (_, v) = views(5, 1, 0);
        assert_eq!(v.phi(&[]).rows(), 0);
        assert_eq!(v.psi(&[]).cols(), 0);
        assert_eq!(v.d(5, &[]).cols(), 0);
    }

    #[test]
    fn partition_of_d() {
        let (f, v) = views(9, 1, 2);
        let j = [2, 7];
        let stacked = v
            .d(5, &j)
            .vstack(&v.phi(&j))
            .unwrap()
            .vstack(&v.psi(&j))
            .unwrap();
        assert_eq!(stacked, v.d(9, &j));
        let est = estimate_and_check(&f, &v, &[0, 0, 0, 0], &j).unwrap();
        assert!(est.consistent);
        assert_eq!(est.estimate, vec![0, 0]);
    }

    #[test]
    fn planted_true_set_recovers() {
        let (f, v) = views(10, 2, 2);
        let mut s = Stream::new(5, "planted", 0);
        for _ in 0..50 {
            let j = s.subset(10, 2);
            let delta = s.elems(&f, 2);
            let mut full = vec![0u64; 10];
            full[j[0]] = delta[0];
            full[j[1]] = delta[1];
            let x = v.cinv().mul_vec(&f, &full).unwrap();
            let est = estimate_and_check(&f, &v, &x[6..], &j).unwrap();
            assert!(est.consistent);
            assert_eq!(est.estimate, delta);
        }
    }
}
