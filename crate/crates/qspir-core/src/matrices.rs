//! Structured code matrices: Cauchy-Vandermonde, generalized Reed-Solomon,
//! generalized Cauchy, their scaled variants and plain Vandermonde.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Fq, FqMatrix};

/// Evaluation points of one scheme instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationPoints {
    /// Server points, distinct and nonzero.
    pub alpha: Vec<u64>,
    /// Cauchy poles, disjoint from `alpha`.
    pub f: Vec<u64>,
    /// Vandermonde points for the box precoder.
    pub b: Vec<u64>,
    /// Scaling of the first code, distinct and nonzero.
    pub u: Vec<u64>,
    /// Dual scaling derived from `u` and `alpha`.
    pub v: Vec<u64>,
}

impl EvaluationPoints {
    /// alpha_n = n, f_j = n + j, b_k = k, u_n = n.
    pub fn canonical(field: &Fq, n: usize, poles: usize, width: usize) -> Result<Self> {
        let needed = (n as u64 + 1).max((n + poles) as u64).max(width as u64);
        if field.q() < needed {
            return Err(Error::FieldTooSmall {
                q: field.q(),
                needed,
            });
        }
        let alpha: Vec<u64> = (1..=n as u64).collect();
        let f = (1..=poles as u64).map(|j| field.reduce(n as u64 + j)).collect();
        let b = (0..width as u64).collect();
        let u = alpha.clone();
        let v = dual_scaling(field, &u, &alpha)?;
        Ok(EvaluationPoints { alpha, f, b, u, v })
    }
}

/// N x N Cauchy-Vandermonde matrix: `l` Cauchy columns then N - l powers.
pub fn csa(field: &Fq, alpha: &[u64], f: &[u64], l: usize) -> Result<FqMatrix> {
    let n = alpha.len();
    if l > n || f.len() < l {
        return Err(Error::InvalidConfig("csa width exceeds points".into()));
    }
    let mut m = FqMatrix::zeros(n, n);
    for (i, &a) in alpha.iter().enumerate() {
        for j in 0..l {
            m.set(i, j, field.inv(field.sub(f[j], a))?);
        }
        for k in 0..n - l {
            m.set(i, l + k, field.pow(a, k as u64));
        }
    }
    Ok(m)
}

/// diag(beta) * CSA.
pub fn qcsa(field: &Fq, alpha: &[u64], f: &[u64], l: usize, beta: &[u64]) -> Result<FqMatrix> {
    let c = csa(field, alpha, f, l)?;
    Ok(FqMatrix::from_fn(c.rows(), c.cols(), |i, j| {
        field.mul(beta[i], c.get(i, j))
    }))
}

/// N x k matrix with entries u_n * alpha_n^j.
pub fn grs(field: &Fq, alpha: &[u64], u: &[u64], k: usize) -> FqMatrix {
    FqMatrix::from_fn(alpha.len(), k, |i, j| {
        field.mul(u[i], field.pow(alpha[i], j as u64))
    })
}

/// N x L matrix with entries u_n / (f_j - alpha_n).
pub fn gc(field: &Fq, alpha: &[u64], u: &[u64], f: &[u64]) -> Result<FqMatrix> {
    let mut m = FqMatrix::zeros(alpha.len(), f.len());
    for (i, &a) in alpha.iter().enumerate() {
        for (j, &fj) in f.iter().enumerate() {
            m.set(i, j, field.mul(u[i], field.inv(field.sub(fj, a))?));
        }
    }
    Ok(m)
}

/// v_j = u_j^{-1} prod_{i != j} (alpha_j - alpha_i)^{-1}.
pub fn dual_scaling(field: &Fq, u: &[u64], alpha: &[u64]) -> Result<Vec<u64>> {
    let mut v = Vec::with_capacity(u.len());
    for j in 0..alpha.len() {
        let mut p = u[j] % field.q();
        for i in 0..alpha.len() {
            if i != j {
                p = field.mul(p, field.sub(alpha[j], alpha[i]));
            }
        }
        v.push(field.inv(p)?);
    }
    Ok(v)
}

/// Square Vandermonde with rows (1, b_k, b_k^2, ...).
pub fn vandermonde(field: &Fq, b: &[u64]) -> FqMatrix {
    FqMatrix::from_fn(b.len(), b.len(), |i, j| field.pow(b[i], j as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn rows(m: &FqMatrix) -> Vec<Vec<u64>> {
        m.to_rows()
    }

    #[test]
    fn small_examples() {
        let f = Fq::new(5).unwrap();
        let c = csa(&f, &[1, 2], &[3], 1).unwrap();
        assert_eq!(rows(&c), vec![vec![3, 1], vec![1, 1]]);
        let c0 = csa(&f, &[1, 2], &[], 0).unwrap();
        assert_eq!(rows(&c0), vec![vec![1, 1], vec![1, 2]]);
        assert_eq!(
            rows(&grs(&f, &[1, 2], &[2, 3], 2)),
            vec![vec![2, 2], vec![3, 1]]
        );
        assert_eq!(rows(&gc(&f, &[1, 2], &[1, 1], &[3]).unwrap()), vec![vec![3], vec![1]]);
        assert_eq!(
            rows(&qcsa(&f, &[1, 2], &[3], 1, &[2, 1]).unwrap()),
            vec![vec![1, 2], vec![1, 1]]
        );
        assert_eq!(dual_scaling(&f, &[1, 1], &[1, 2]).unwrap(), vec![4, 1]);
        assert_eq!(dual_scaling(&Fq::new(7).unwrap(), &[5], &[1]).unwrap(), vec![3]);
        assert_eq!(rows(&vandermonde(&f, &[0, 1])), vec![vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn canonical_needs_room() {
        let f = Fq::new(7).unwrap();
        assert!(EvaluationPoints::canonical(&f, 5, 2, 3).is_ok());
        assert_eq!(
            EvaluationPoints::canonical(&f, 5, 3, 3),
            Err(Error::FieldTooSmall { q: 7, needed: 8 })
        );
    }

    proptest! {
        #[test]
        fn csa_invertible(n in 1usize..9, l in 0usize..9) {
            prop_assume!(l <= n);
            let f = Fq::new(257).unwrap();
            let p = EvaluationPoints::canonical(&f, n, l, 0).unwrap();
            let c = csa(&f, &p.alpha, &p.f, l).unwrap();
            prop_assert_eq!(c.rank(&f), n);
        }

        #[test]
        fn dual_codes_orthogonal(n in 2usize..9, k in 1usize..8, q in prop::sample::select(vec![11u64, 13, 17, 257])) {
            prop_assume!(k < n);
            let f = Fq::new(q).unwrap();
            let p = EvaluationPoints::canonical(&f, n, 0, 0).unwrap();
            let a = grs(&f, &p.alpha, &p.u, k);
            let b = grs(&f, &p.alpha, &p.v, n - k);
            let prod = a.transpose().mul(&f, &b).unwrap();
            prop_assert_eq!(prod, FqMatrix::zeros(k, n - k));
        }
    }
}
