//! N-sum box transfer matrices.
//!
//! A box is described by a 2N x 2N generator `[G H]` whose first N columns
//! are strongly self-orthogonal. The receiver sees `y = G' a` with
//! `G' = [0 I] [G H]^{-1}`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Fq, FqMatrix};
use crate::matrices::{qcsa, EvaluationPoints};

/// Symplectic form `[0 I; -I 0]`.
pub fn j_matrix(field: &Fq, n: usize) -> FqMatrix {
    let m1 = field.neg(1);
    FqMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j == i + n {
            1
        } else if i >= n && j + n == i {
            m1
        } else {
            0
        }
    })
}

/// True iff `g` is 2N x N, `g^t J g = 0` and rank N.
pub fn check_sso(field: &Fq, g: &FqMatrix) -> bool {
    let n = g.cols();
    if g.rows() != 2 * n {
        return false;
    }
    let j = j_matrix(field, n);
    let form = g
        .transpose()
        .mul(field, &j)
        .and_then(|t| t.mul(field, g))
        .expect("shapes agree");
    form == FqMatrix::zeros(n, n) && g.rank(field) == n
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferBox {
    n: usize,
    gprime: FqMatrix,
    generator: FqMatrix,
}

impl TransferBox {
    pub fn n(&self) -> usize {
        self.n
    }

    /// N x 2N transfer matrix.
    pub fn gprime(&self) -> &FqMatrix {
        &self.gprime
    }

    /// The full generator `[G H]`.
    pub fn generator(&self) -> &FqMatrix {
        &self.generator
    }

    /// y = G' a.
    pub fn apply(&self, field: &Fq, a: &[u64]) -> Result<Vec<u64>> {
        Ok(self.gprime.mul_vec(field, a)?)
    }
}

/// Builds the box from an SSO `g` and a completion `h`.
pub fn make_transfer(field: &Fq, g: &FqMatrix, h: &FqMatrix) -> Result<TransferBox> {
    if !check_sso(field, g) {
        return Err(Error::NotSso);
    }
    let n = g.cols();
    let generator = g.hstack(h)?;
    from_generator(field, n, generator)
}

fn from_generator(field: &Fq, n: usize, generator: FqMatrix) -> Result<TransferBox> {
    let inv = generator.inverse(field)?;
    let gprime = inv.block(n, 2 * n, 0, 2 * n);
    Ok(TransferBox {
        n,
        gprime,
        generator,
    })
}

/// Box from the dual QCSA pair with `l` Cauchy columns, `l <= floor(N/2)`.
///
/// The receiver gets `(x1[..l], x1[l+ceil(N/2)..], x2[..l], x2[l+floor(N/2)..])`
/// when fed `a = (H^u x1, H^v x2)`.
pub fn make_transfer_dual_qcsa(field: &Fq, pts: &EvaluationPoints, l: usize) -> Result<TransferBox> {
    let n = pts.alpha.len();
    let (nu, mu) = (n.div_ceil(2), n / 2);
    if l > mu {
        return Err(Error::InvalidConfig("Cauchy width exceeds floor(N/2)".into()));
    }
    let hu = qcsa(field, &pts.alpha, &pts.f, l, &pts.u)?;
    let hv = qcsa(field, &pts.alpha, &pts.f, l, &pts.v)?;
    let full = FqMatrix::block_diag(&[&hu, &hv]);
    let order: Vec<usize> = (l..l + nu)
        .chain(n + l..n + l + mu)
        .chain(0..l)
        .chain(l + nu..n)
        .chain(n..n + l)
        .chain(n + l + mu..2 * n)
        .collect();
    let permuted = full.select_cols(&order);
    make_transfer(
        field,
        &permuted.block(0, 2 * n, 0, n),
        &permuted.block(0, 2 * n, n, 2 * n),
    )
}

/// New generator `[G H] blkdiag(v1, v2)`.
pub fn precode(field: &Fq, bx: &TransferBox, v1: &FqMatrix, v2: &FqMatrix) -> Result<TransferBox> {
    let n = bx.n;
    for v in [v1, v2] {
        if v.rows() != n || v.cols() != n {
            return Err(crate::field::FieldError::DimensionMismatch {
                expected: (n, n),
                found: (v.rows(), v.cols()),
            }
            .into());
        }
        if v.rank(field) != n {
            return Err(crate::field::FieldError::Singular.into());
        }
    }
    let generator = bx.generator.mul(field, &FqMatrix::block_diag(&[v1, v2]))?;
    if !check_sso(field, &generator.block(0, 2 * n, 0, n)) {
        return Err(Error::NotSso);
    }
    from_generator(field, n, generator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn stack(a: &FqMatrix, b: &FqMatrix) -> FqMatrix {
        a.vstack(b).unwrap()
    }

    #[test]
    fn sso_examples() {
        let f = Fq::new(5).unwrap();
        let i = FqMatrix::identity(2);
        let z = FqMatrix::zeros(2, 2);
        assert!(check_sso(&f, &stack(&i, &z)));
        assert!(check_sso(&f, &stack(&i, &i)));
        let e13 = FqMatrix::from_fn(4, 2, |r, c| u64::from((c == 0 && r == 0) || (c == 1 && r == 2)));
        assert!(!check_sso(&f, &e13));
    }

    #[test]
    fn transfer_examples() {
        let f = Fq::new(5).unwrap();
        let i = FqMatrix::identity(2);
        let z = FqMatrix::zeros(2, 2);
        let bx = make_transfer(&f, &stack(&i, &z), &stack(&z, &i)).unwrap();
        assert_eq!(bx.gprime(), &z.hstack(&i).unwrap());

        let one = FqMatrix::identity(1);
        let zero = FqMatrix::zeros(1, 1);
        let bx = make_transfer(&f, &stack(&one, &one), &stack(&zero, &one)).unwrap();
        assert_eq!(bx.gprime().to_rows(), vec![vec![4, 1]]);

        let bad = FqMatrix::from_fn(4, 2, |r, c| u64::from((c == 0 && r == 0) || (c == 1 && r == 2)));
        assert_eq!(make_transfer(&f, &bad, &bad), Err(Error::NotSso));
    }

    #[test]
    fn dual_qcsa_two_servers() {
        let f = Fq::new(13).unwrap();
        let pts = EvaluationPoints::canonical(&f, 2, 1, 0).unwrap();
        let bx = make_transfer_dual_qcsa(&f, &pts, 1).unwrap();
        let hu = qcsa(&f, &pts.alpha, &pts.f, 1, &pts.u).unwrap();
        let hv = qcsa(&f, &pts.alpha, &pts.f, 1, &pts.v).unwrap();
        let (x1, x2) = ([7, 3], [11, 5]);
        let mut a = hu.mul_vec(&f, &x1).unwrap();
        a.extend(hv.mul_vec(&f, &x2).unwrap());
        assert_eq!(bx.apply(&f, &a).unwrap(), vec![7, 11]);
    }

    #[test]
    fn identity_precode_is_noop() {
        let f = Fq::new(13).unwrap();
        let pts = EvaluationPoints::canonical(&f, 5, 2, 0).unwrap();
        let bx = make_transfer_dual_qcsa(&f, &pts, 2).unwrap();
        let i = FqMatrix::identity(5);
        assert_eq!(precode(&f, &bx, &i, &i).unwrap(), bx);
    }

    proptest! {
        #[test]
        fn dual_qcsa_selector(n in 1usize..9, l in 0usize..5, seed in prop::collection::vec(0u64..13, 16)) {
            let f = Fq::new(13).unwrap();
            prop_assume!(l <= n / 2);
            let pts = EvaluationPoints::canonical(&f, n, l, 0).unwrap();
            let bx = make_transfer_dual_qcsa(&f, &pts, l).unwrap();
            prop_assert_eq!(bx.gprime().rank(&f), n);
            prop_assert!(check_sso(&f, &bx.generator().block(0, 2 * n, 0, n)));
            let hu = qcsa(&f, &pts.alpha, &pts.f, l, &pts.u).unwrap();
            let hv = qcsa(&f, &pts.alpha, &pts.f, l, &pts.v).unwrap();
            let x1 = &seed[..n];
            let x2 = &seed[8..8 + n];
            let mut a = hu.mul_vec(&f, x1).unwrap();
            a.extend(hv.mul_vec(&f, x2).unwrap());
            let (nu, mu) = (n.div_ceil(2), n / 2);
            let mut expect = x1[..l].to_vec();
            expect.extend_from_slice(&x1[l + nu..]);
            expect.extend_from_slice(&x2[..l]);
            expect.extend_from_slice(&x2[l + mu..]);
            prop_assert_eq!(bx.apply(&f, &a).unwrap(), expect);
        }

        #[test]
        fn precode_composes(n in 1usize..5, s in prop::collection::vec(0u64..13, 64)) {
            let f = Fq::new(13).unwrap();
            let pts = EvaluationPoints::canonical(&f, n, 0, 0).unwrap();
            let bx = make_transfer_dual_qcsa(&f, &pts, 0).unwrap();
            let mk = |o: usize| FqMatrix::from_fn(n, n, |i, j| s[o + i * n + j]);
            let (v1, v2, w1, w2) = (mk(0), mk(16), mk(32), mk(48));
            prop_assume!([&v1, &v2, &w1, &w2].iter().all(|m| m.rank(&f) == n));
            let step = precode(&f, &precode(&f, &bx, &v1, &v2).unwrap(), &w1, &w2).unwrap();
            let once = precode(&f, &bx, &v1.mul(&f, &w1).unwrap(), &v2.mul(&f, &w2).unwrap()).unwrap();
            prop_assert_eq!(step.gprime(), once.gprime());
            prop_assert!(check_sso(&f, &step.generator().block(0, 2 * n, 0, n)));
        }
    }
}
