//! The retrieval protocol: planning, storage, queries, shared noise, answers,
//! channel encoding and decoding.
//!
//! # Coefficient layout
//!
//! For instance `i`, the stacked responsive answers equal `CSA * x_i` with
//!
//! ```text
//! x_i = [ content (c_i) | interference (H+M_i) | R' (B) | zeros (z_i) ]
//! ```
//!
//! where the content block holds `delta_i` dummy rows followed by message dits.
//! The last `d_i + z_i` entries are the power coefficients 0, 1, 2, ... of the
//! answer polynomial. The scheme matrix orders its 2N columns as
//!
//! ```text
//! [ I1(1) | I1(2) | C(1) | C(2) | I2(1) | I2(2) | Z(1) | Z(2) | Om(1) | Om(2) ]
//! ```
//!
//! with `I1(i)` the first `s_i` powers, `I2(i)` the remaining `d_i - s_i`
//! interference powers, `Z(i)` the zero rows and `Om(i)` unit columns of the
//! unresponsive servers. The first N columns are strongly self-orthogonal.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::byzantine::{search_and_correct, CorrectionViews};
use crate::error::{Error, Result};
use crate::field::{Fq, FqMatrix};
use crate::matrices::{csa, vandermonde, EvaluationPoints};
use crate::nsum::{make_transfer, precode, TransferBox};
use crate::params::Params;
use crate::rates::{theorem_rate, Flag, Rational};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeConfig {
    pub params: Params,
    pub q: u64,
    /// Requested message, 0-based.
    pub theta: usize,
    pub seed: u64,
}

/// Widths of one instance's coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceLayout {
    /// Cauchy rows (storage rows per server).
    pub cauchy: usize,
    /// Leading dummy rows.
    pub dummy: usize,
    /// Offset of this instance's dits in the message.
    pub offset: usize,
    /// Query noise degree.
    pub query_noise: usize,
    /// Which query instance serves this instance.
    pub query: usize,
    /// Storage noise degree plus query noise degree.
    pub noise_terms: usize,
    /// Interference width including R' slots.
    pub interference: usize,
    pub zeros: usize,
    /// Leading interference powers absorbed by the box.
    pub split: usize,
}

impl InstanceLayout {
    pub fn messages(&self) -> usize {
        self.cauchy - self.dummy
    }

    pub fn len(&self) -> usize {
        self.cauchy + self.interference + self.zeros
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positions of `x_i` visible after the box.
    pub fn known(&self) -> Vec<bool> {
        let mut k = vec![true; self.len()];
        for p in &mut k[self.cauchy..self.cauchy + self.split] {
            *p = false;
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimePlan {
    pub params: Params,
    pub regime: u8,
    pub classical: bool,
    pub l1: usize,
    pub l2: usize,
    pub delta: usize,
    /// Query noise degrees of the two instances in regime 3.
    pub t: Option<(usize, usize)>,
    /// SSO split (s_1, s_2).
    pub gamma: (usize, usize),
    pub m: usize,
    pub h: usize,
    pub instances: Vec<InstanceLayout>,
    /// (rows, noise degree) per query instance.
    pub query_instances: Vec<(usize, usize)>,
    pub flag: Flag,
    pub rate: Rational,
}

impl RegimePlan {
    /// Message dits per round.
    pub fn message_len(&self) -> usize {
        self.l1 + self.l2
    }

    pub fn max_cauchy(&self) -> usize {
        self.instances.iter().map(|l| l.cauchy).max().unwrap_or(0)
    }

    /// Rows of the Vandermonde precoder.
    pub fn width(&self) -> usize {
        if self.classical {
            return 0;
        }
        self.instances
            .iter()
            .map(|l| l.cauchy + l.interference - l.split)
            .sum()
    }
}

/// Selects the case of the theorem and lays out both instances.
pub fn plan_regime(p: &Params) -> Result<RegimePlan> {
    p.validate()?;
    let rp = theorem_rate(p);
    let Some(regime) = rp.regime else {
        return Err(Error::Infeasible(format!("{:?}: {}", p, rp.reason)));
    };
    if rp.flag == Flag::Unrealizable {
        return Err(Error::Unrealizable(format!(
            "{:?}: L1 = {}, L2 = {}",
            p, rp.l1, rp.l2
        )));
    }
    let (n, u, b, e) = (p.n, p.u, p.b, p.e);
    let (m, h) = (rp.m, rp.h);
    let (nu, mu) = (n.div_ceil(2), n / 2);
    let (l1, l2) = (rp.l1 as usize, rp.l2 as usize);
    let resp = n - u;
    let inst = |cauchy: usize, dummy: usize, offset: usize, qn: usize, query: usize, split: usize| {
        let interference = h + qn + b;
        InstanceLayout {
            cauchy,
            dummy,
            offset,
            query_noise: qn,
            query,
            noise_terms: h + qn,
            interference,
            zeros: resp - cauchy - interference,
            split,
        }
    };
    let mut t = None;
    let (instances, query_instances, classical, delta) = match regime {
        1 | 2 => {
            let delta = rp.delta.max(0) as usize;
            let c = l2 + delta.min(0);
            let c = if regime == 1 { l1 } else { c };
            let a = inst(c, delta, 0, m, 0, nu);
            let bb = inst(c, 0, l1, m, 0, mu);
            (vec![a, bb], vec![(c, m)], false, if regime == 2 { delta } else { 0 })
        }
        3 => {
            let (t1, t2) = (mu - h - b, nu - h - b);
            t = Some((t1, t2));
            let c1 = nu - 3 * b - u;
            let c2 = mu - 3 * b - u;
            if t1 == t2 && c1 == c2 {
                let a = inst(c1, e, 0, t1, 0, mu);
                let bb = inst(c2, 0, l1, t2, 0, nu);
                (vec![a, bb], vec![(c1, t1)], false, 0)
            } else {
                let a = inst(c1, e, 0, t1, 0, mu);
                let bb = inst(c2, 0, l1, t2, 1, nu);
                (vec![a, bb], vec![(c1, t1), (c2, t2)], false, 0)
            }
        }
        _ => {
            let a = inst(l1, 0, 0, m, 0, 0);
            (vec![a], vec![(l1, m)], true, 0)
        }
    };
    for l in &instances {
        if l.cauchy + l.interference > resp || (p.model.byzantine() && l.zeros < 2 * b) {
            return Err(Error::Unrealizable(format!("{:?}: {:?}", p, l)));
        }
        if !classical && l.split > l.interference {
            return Err(Error::Unrealizable(format!("{:?}: split exceeds interference", p)));
        }
    }
    let gamma = if classical {
        (0, 0)
    } else {
        (instances[0].split, instances[1].split)
    };
    Ok(RegimePlan {
        params: *p,
        regime,
        classical,
        l1,
        l2,
        delta,
        t,
        gamma,
        m,
        h,
        instances,
        query_instances,
        flag: rp.flag,
        rate: rp.rate,
    })
}

/// Every random draw of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Randomness {
    /// `messages[k][j]`: dit j of message k.
    pub messages: Vec<Vec<u64>>,
    /// `dummy[i][row][k]`.
    pub dummy: Vec<Vec<Vec<u64>>>,
    /// `storage_noise[i][row][power - 1][k]`.
    pub storage_noise: Vec<Vec<Vec<Vec<u64>>>>,
    /// `query_noise[query instance][row][power - 1][k]`.
    pub query_noise: Vec<Vec<Vec<Vec<u64>>>>,
    /// `zprime[i][j]`, coefficient of alpha^j.
    pub zprime: Vec<Vec<u64>>,
    /// `rprime[i][j]`.
    pub rprime: Vec<Vec<u64>>,
}

impl Randomness {
    pub fn zeros(plan: &RegimePlan) -> Self {
        let k = plan.params.k;
        let b = plan.params.b;
        let z3 = |r: usize, c: usize| vec![vec![vec![0u64; k]; c]; r];
        Randomness {
            messages: vec![vec![0; plan.message_len()]; k],
            dummy: plan.instances.iter().map(|l| vec![vec![0; k]; l.dummy]).collect(),
            storage_noise: plan.instances.iter().map(|l| z3(l.cauchy, plan.h)).collect(),
            query_noise: plan.query_instances.iter().map(|&(r, d)| z3(r, d)).collect(),
            zprime: plan.instances.iter().map(|l| vec![0; l.noise_terms]).collect(),
            rprime: plan.instances.iter().map(|_| vec![0; b]).collect(),
        }
    }

    /// Fills every slot from its own labeled stream.
    pub fn sample(field: &Fq, plan: &RegimePlan, seed: u64, trial: u64) -> Self {
        let mut r = Self::zeros(plan);
        let fill = |label: &str, slots: &mut dyn Iterator<Item = &mut u64>| {
            let mut s = Stream::new(seed, label, trial);
            for v in slots {
                *v = s.elem(field);
            }
        };
        fill("messages", &mut r.messages.iter_mut().flatten());
        fill("dummy", &mut r.dummy.iter_mut().flatten().flatten());
        fill(
            "storage-noise",
            &mut r.storage_noise.iter_mut().flatten().flatten().flatten(),
        );
        fill(
            "query-noise",
            &mut r.query_noise.iter_mut().flatten().flatten().flatten(),
        );
        fill("zprime", &mut r.zprime.iter_mut().flatten());
        fill("rprime", &mut r.rprime.iter_mut().flatten());
        r
    }
}

/// `shares[n][i][row]` is the K-vector stored by server n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Storage {
    pub shares: Vec<Vec<Vec<Vec<u64>>>>,
}

/// `shares[n][query instance][row]` is the K-vector sent to server n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub shares: Vec<Vec<Vec<Vec<u64>>>>,
}

impl QuerySet {
    pub fn instances(&self) -> usize {
        self.shares.first().map_or(0, |s| s.len())
    }
}

/// `zhat[n][i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedNoise {
    pub zhat: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedResult {
    pub message: Vec<u64>,
    /// Accepted Byzantine candidate set (server indices), Byzantine models only.
    pub accepted: Option<Vec<usize>>,
    /// Corrected coefficient vectors; unknown positions are zero.
    pub coefficients: Vec<Vec<u64>>,
}

/// One stored row: `content + sum_k (f - alpha)^k noise[k-1]`.
pub fn storage_symbol(field: &Fq, content: &[u64], noise: &[Vec<u64>], f: u64, alpha: u64) -> Vec<u64> {
    let d = field.sub(f, alpha);
    let mut out = content.to_vec();
    let mut dk = 1;
    for term in noise {
        dk = field.mul(dk, d);
        for (o, &t) in out.iter_mut().zip(term) {
            *o = field.add(*o, field.mul(dk, t));
        }
    }
    out
}

/// One query row: `(e_theta + sum_j (f - alpha)^j noise[j-1]) / (f - alpha)`.
pub fn query_symbol(field: &Fq, k: usize, theta: usize, noise: &[Vec<u64>], f: u64, alpha: u64) -> Result<Vec<u64>> {
    let d = field.sub(f, alpha);
    let dinv = field.inv(d)?;
    let mut out = vec![0u64; k];
    out[theta] = 1;
    let mut dj = 1;
    for term in noise {
        dj = field.mul(dj, d);
        for (o, &t) in out.iter_mut().zip(term) {
            *o = field.add(*o, field.mul(dj, t));
        }
    }
    Ok(out.iter().map(|&v| field.mul(v, dinv)).collect())
}

/// Shared noise at one server: Z' and then R' on consecutive powers of alpha, from alpha^0.
pub fn zhat_symbol(field: &Fq, alpha: u64, zprime: &[u64], rprime: &[u64]) -> u64 {
    let mut acc = 0;
    let mut p = 1;
    for &z in zprime.iter().chain(rprime) {
        acc = field.add(acc, field.mul(p, z));
        p = field.mul(p, alpha);
    }
    acc
}

/// A configured scheme with its points fixed.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub cfg: SchemeConfig,
    pub field: Fq,
    pub plan: RegimePlan,
    pub points: EvaluationPoints,
}

impl Scheme {
    pub fn new(cfg: SchemeConfig) -> Result<Self> {
        let field = Fq::new(cfg.q)?;
        let plan = plan_regime(&cfg.params)?;
        if cfg.theta >= cfg.params.k {
            return Err(Error::InvalidConfig("theta out of range".into()));
        }
        let points = EvaluationPoints::canonical(&field, cfg.params.n, plan.max_cauchy(), plan.width())?;
        Ok(Scheme {
            cfg,
            field,
            plan,
            points,
        })
    }

    pub fn n(&self) -> usize {
        self.cfg.params.n
    }

    pub fn k(&self) -> usize {
        self.cfg.params.k
    }

    pub fn instances(&self) -> usize {
        self.plan.instances.len()
    }

    fn scale(&self, i: usize) -> &[u64] {
        if i == 0 {
            &self.points.u
        } else {
            &self.points.v
        }
    }

    /// Content of row `row` of instance `i`: a dummy row or a message dit column.
    pub fn content_row(&self, r: &Randomness, i: usize, row: usize) -> Vec<u64> {
        let l = &self.plan.instances[i];
        if row < l.dummy {
            r.dummy[i][row].clone()
        } else {
            let j = l.offset + row - l.dummy;
            r.messages.iter().map(|w| w[j]).collect()
        }
    }

    /// content + sum_k (f_row - alpha_n)^k R_k.
    pub fn storage_row(&self, content: &[u64], noise: &[Vec<u64>], row: usize, n: usize) -> Vec<u64> {
        storage_symbol(&self.field, content, noise, self.points.f[row], self.points.alpha[n])
    }

    pub fn storage(&self, r: &Randomness) -> Storage {
        let shares = (0..self.n())
            .map(|n| {
                self.plan
                    .instances
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        (0..l.cauchy)
                            .map(|row| {
                                let c = self.content_row(r, i, row);
                                self.storage_row(&c, &r.storage_noise[i][row], row, n)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Storage { shares }
    }

    /// (e_theta + sum_j (f_row - alpha_n)^j Z_j) / (f_row - alpha_n).
    pub fn query_row(&self, theta: usize, noise: &[Vec<u64>], row: usize, n: usize) -> Vec<u64> {
        query_symbol(&self.field, self.k(), theta, noise, self.points.f[row], self.points.alpha[n])
            .expect("poles are disjoint from server points")
    }

    pub fn queries(&self, r: &Randomness, theta: usize) -> QuerySet {
        let shares = (0..self.n())
            .map(|n| {
                self.plan
                    .query_instances
                    .iter()
                    .enumerate()
                    .map(|(qi, &(rows, _))| {
                        (0..rows)
                            .map(|row| self.query_row(theta, &r.query_noise[qi][row], row, n))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        QuerySet { shares }
    }

    /// sum_j alpha^j Z'_j + sum_j alpha^(H+M_i+j) R'_j.
    pub fn zhat(&self, n: usize, zprime: &[u64], rprime: &[u64]) -> u64 {
        zhat_symbol(&self.field, self.points.alpha[n], zprime, rprime)
    }

    pub fn shared_noise(&self, r: &Randomness) -> SharedNoise {
        let zhat = (0..self.n())
            .map(|n| {
                (0..self.instances())
                    .map(|i| self.zhat(n, &r.zprime[i], &r.rprime[i]))
                    .collect()
            })
            .collect();
        SharedNoise { zhat }
    }

    /// S_n(i)^t Q_n(i) + Zhat_n(i).
    pub fn honest_answer(&self, st: &Storage, qs: &QuerySet, sn: &SharedNoise, n: usize, i: usize) -> u64 {
        let qi = self.plan.instances[i].query;
        let rows = &st.shares[n][i];
        let q = &qs.shares[n][qi];
        let f = &self.field;
        let mut acc = sn.zhat[n][i];
        for (s, qr) in rows.iter().zip(q) {
            acc = f.add(acc, f.dot(s, qr));
        }
        acc
    }

    /// `answers[n][i]` for every server.
    pub fn honest_answers(&self, st: &Storage, qs: &QuerySet, sn: &SharedNoise) -> Vec<Vec<u64>> {
        (0..self.n())
            .map(|n| {
                (0..self.instances())
                    .map(|i| self.honest_answer(st, qs, sn, n, i))
                    .collect()
            })
            .collect()
    }

    /// Slots n and N+n carry u_n A_n(1) and v_n A_n(2).
    pub fn encode_channel(&self, answers: &[Vec<u64>]) -> Vec<u64> {
        let n = self.n();
        let f = &self.field;
        let mut a = vec![0u64; 2 * n];
        for (s, ans) in answers.iter().enumerate() {
            a[s] = f.mul(self.points.u[s], ans[0]);
            a[n + s] = f.mul(self.points.v[s], ans[1]);
        }
        a
    }

    pub fn responsive(&self, unresponsive: &[usize]) -> Vec<usize> {
        (0..self.n()).filter(|s| !unresponsive.contains(s)).collect()
    }

    /// CSA over the responsive servers for instance `i`.
    pub fn csa_responsive(&self, i: usize, unresponsive: &[usize]) -> Result<FqMatrix> {
        let resp = self.responsive(unresponsive);
        let alpha: Vec<u64> = resp.iter().map(|&s| self.points.alpha[s]).collect();
        csa(&self.field, &alpha, &self.points.f, self.plan.instances[i].cauchy)
    }

    /// The 2N x 2N scheme matrix for a given unresponsive set.
    pub fn scheme_matrix(&self, unresponsive: &[usize]) -> Result<FqMatrix> {
        if self.plan.classical {
            return Err(Error::InvalidConfig("classical regime has no box".into()));
        }
        let n = self.n();
        let f = &self.field;
        let alpha = &self.points.alpha;
        let mut m = FqMatrix::zeros(2 * n, 2 * n);
        let mut col = 0;
        let powers = |m: &mut FqMatrix, i: usize, from: usize, to: usize, col: &mut usize| {
            for k in from..to {
                for s in 0..n {
                    let v = f.mul(self.scale(i)[s], f.pow(alpha[s], k as u64));
                    m.set(i * n + s, *col, v);
                }
                *col += 1;
            }
        };
        let ls = &self.plan.instances;
        for (i, l) in ls.iter().enumerate() {
            powers(&mut m, i, 0, l.split, &mut col);
        }
        for (i, l) in ls.iter().enumerate() {
            for j in 0..l.cauchy {
                for s in 0..n {
                    let c = f.inv(f.sub(self.points.f[j], alpha[s]))?;
                    m.set(i * n + s, col, f.mul(self.scale(i)[s], c));
                }
                col += 1;
            }
        }
        for (i, l) in ls.iter().enumerate() {
            powers(&mut m, i, l.split, l.interference, &mut col);
        }
        for (i, l) in ls.iter().enumerate() {
            powers(&mut m, i, l.interference, l.interference + l.zeros, &mut col);
        }
        for i in 0..2 {
            for &s in unresponsive {
                m.set(i * n + s, col, 1);
                col += 1;
            }
        }
        if col != 2 * n {
            return Err(Error::InvalidConfig(format!(
                "unresponsive set of size {} does not match U = {}",
                unresponsive.len(),
                self.cfg.params.u
            )));
        }
        Ok(m)
    }

    /// Vandermonde precoder over the width of the visible code block.
    pub fn precoder(&self) -> FqMatrix {
        vandermonde(&self.field, &self.points.b[..self.plan.width()])
    }

    /// Box whose output is `[V (C, I2); Z; Delta']`.
    pub fn transfer_box(&self, unresponsive: &[usize]) -> Result<TransferBox> {
        let n = self.n();
        let m = self.scheme_matrix(unresponsive)?;
        let bx = make_transfer(&self.field, &m.block(0, 2 * n, 0, n), &m.block(0, 2 * n, n, 2 * n))?;
        let vinv = self.precoder().inverse(&self.field)?;
        let rest = FqMatrix::identity(n - self.plan.width());
        precode(&self.field, &bx, &FqMatrix::identity(n), &FqMatrix::block_diag(&[&vinv, &rest]))
    }

    /// Recovers W_theta. `y` is the box output, or for the classical regime the N answers.
    pub fn decode(&self, y: &[u64], unresponsive: &[usize]) -> Result<DecodedResult> {
        let f = &self.field;
        let resp = self.responsive(unresponsive);
        let ls = &self.plan.instances;
        let mut xs: Vec<Vec<u64>> = Vec::with_capacity(ls.len());
        if self.plan.classical {
            let a: Vec<u64> = resp.iter().map(|&s| y[s]).collect();
            xs.push(self.csa_responsive(0, unresponsive)?.solve(f, &a)?);
        } else {
            let w = self.plan.width();
            let top = self.precoder().solve(f, &y[..w])?;
            let mut cur = 0;
            let mut take = |len: usize| {
                let s = &top[cur..cur + len];
                cur += len;
                s.to_vec()
            };
            let cauchy: Vec<Vec<u64>> = ls.iter().map(|l| take(l.cauchy)).collect();
            let inter: Vec<Vec<u64>> = ls.iter().map(|l| take(l.interference - l.split)).collect();
            let mut zoff = w;
            for (i, l) in ls.iter().enumerate() {
                let mut x = vec![0u64; l.len()];
                x[..l.cauchy].copy_from_slice(&cauchy[i]);
                x[l.cauchy + l.split..l.cauchy + l.interference].copy_from_slice(&inter[i]);
                x[l.cauchy + l.interference..].copy_from_slice(&y[zoff..zoff + l.zeros]);
                zoff += l.zeros;
                xs.push(x);
            }
        }
        let known: Vec<Vec<bool>> = ls.iter().map(|l| l.known()).collect();
        let b = self.cfg.params.b;
        let mut accepted = None;
        if self.cfg.params.model.byzantine() && b > 0 {
            let views = (0..ls.len())
                .map(|i| CorrectionViews::new(f, &self.csa_responsive(i, unresponsive)?, b))
                .collect::<Result<Vec<_>>>()?;
            let c = search_and_correct(f, &views, &xs, &known)?;
            accepted = Some(c.accepted.iter().map(|&j| resp[j]).collect());
            xs = c.corrected;
        }
        let mut message = Vec::with_capacity(self.plan.message_len());
        for (x, l) in xs.iter().zip(ls) {
            message.extend_from_slice(&x[l.dummy..l.cauchy]);
        }
        Ok(DecodedResult {
            message,
            accepted,
            coefficients: xs,
        })
    }

    pub fn message(&self, r: &Randomness, theta: usize) -> Vec<u64> {
        r.messages[theta].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nsum::check_sso;
    use crate::params::Model;
    use proptest::prelude::*;

    fn params(model: Model, n: usize, x: usize, t: usize, e: usize, u: usize, b: usize) -> Params {
        Params::new(model, n, 2, x, t, e, u, b)
    }

    fn scheme(p: Params, q: u64) -> Scheme {
        Scheme::new(SchemeConfig {
            params: p,
            q,
            theta: 1,
            seed: 9,
        })
        .unwrap()
    }

    #[test]
    fn plan_examples() {
        let a = plan_regime(&params(Model::Xeutspir, 8, 3, 2, 1, 1, 0)).unwrap();
        assert_eq!((a.regime, a.l1, a.l2), (1, 2, 2));
        let b = plan_regime(&params(Model::Xeutspir, 10, 2, 2, 1, 1, 0)).unwrap();
        assert_eq!((b.regime, b.l1, b.l2), (3, 3, 4));
        let c = plan_regime(&params(Model::XbeutspirDynamic, 17, 5, 4, 0, 0, 2)).unwrap();
        assert_eq!((c.regime, c.l1, c.gamma), (1, 2, (9, 8)));
        assert!(matches!(
            plan_regime(&params(Model::Xeutspir, 6, 0, 0, 3, 1, 0)),
            Err(Error::Unrealizable(_))
        ));
        assert!(matches!(
            plan_regime(&params(Model::Xeutspir, 4, 4, 4, 0, 0, 0)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn regime_two_rows() {
        let p = params(Model::Xeutspir, 8, 2, 3, 3, 0, 0);
        let plan = plan_regime(&p).unwrap();
        assert_eq!(plan.regime, 2);
        assert_eq!(plan.instances[0].cauchy, plan.l1 + plan.delta);
        assert_eq!(plan.instances[1].cauchy, plan.l2);
    }

    #[test]
    fn regime_three_query_instances() {
        let even = plan_regime(&params(Model::Xeutspir, 10, 2, 2, 1, 1, 0)).unwrap();
        assert_eq!(even.t, Some((3, 3)));
        assert_eq!(even.query_instances.len(), 1);
        assert_eq!(even.instances[0].dummy, 1);
        let odd = plan_regime(&params(Model::Xeutspir, 11, 2, 2, 0, 1, 0)).unwrap();
        assert_eq!(odd.t, Some((3, 4)));
        assert_eq!(odd.query_instances.len(), 2);
        let same = plan_regime(&params(Model::Xeutspir, 10, 2, 2, 0, 1, 0)).unwrap();
        assert_eq!(same.regime, 3);
        assert_eq!(same.query_instances.len(), 1);
        for p in [even, odd, same] {
            let (t1, t2) = p.t.unwrap();
            assert!(p.params.e <= t1 && t1 <= t2 && t2 <= t1 + 1);
        }
    }

    #[test]
    fn raw_storage_without_noise() {
        let s = scheme(params(Model::Xeutspir, 4, 0, 2, 0, 0, 0), 11);
        let r = Randomness::sample(&s.field, &s.plan, 1, 0);
        let st = s.storage(&r);
        for n in 0..4 {
            for (i, l) in s.plan.instances.iter().enumerate() {
                for row in 0..l.cauchy {
                    assert_eq!(st.shares[n][i][row], s.content_row(&r, i, row));
                }
            }
        }
    }

    #[test]
    fn noiseless_queries() {
        let s = scheme(params(Model::Xeutspir, 4, 2, 0, 0, 0, 0), 11);
        let r = Randomness::sample(&s.field, &s.plan, 1, 0);
        let qs = s.queries(&r, 1);
        let f = &s.field;
        for n in 0..4 {
            let d = f.sub(s.points.f[0], s.points.alpha[n]);
            assert_eq!(qs.shares[n][0][0], vec![0, f.inv(d).unwrap()]);
        }
    }

    #[test]
    fn single_answer_by_hand() {
        let s = scheme(params(Model::Xeutspir, 4, 2, 0, 0, 0, 0), 7);
        // alpha_1 = 1, f_1 = 5; W = 3, Z' = 4: 3 / 4 + 4 = 3 * 2 + 4 = 3 mod 7
        let f = &s.field;
        let st = s.storage_row(&[3], &[], 0, 0);
        let d = f.sub(s.points.f[0], s.points.alpha[0]);
        assert_eq!(d, 4);
        let q = f.inv(d).unwrap();
        assert_eq!(f.add(f.mul(st[0], q), s.zhat(0, &[4], &[])), 3);
    }

    #[test]
    fn storage_recoverable_from_x_plus_one() {
        let s = scheme(params(Model::Xeutspir, 4, 2, 0, 0, 0, 0), 7);
        let r = Randomness::sample(&s.field, &s.plan, 4, 0);
        let st = s.storage(&r);
        let f = &s.field;
        // row 0 of instance 0 over servers 0..3 is a degree-2 polynomial in (f_1 - alpha)
        for k in 0..2 {
            let a = FqMatrix::from_fn(3, 3, |n, p| {
                f.pow(f.sub(s.points.f[0], s.points.alpha[n]), p as u64)
            });
            let y: Vec<u64> = (0..3).map(|n| st.shares[n][0][0][k]).collect();
            let c = a.solve(f, &y).unwrap();
            assert_eq!(c[0], r.messages[k][0]);
        }
    }

    #[test]
    fn zhat_is_grs_codeword() {
        let s = scheme(params(Model::XbeutspirDynamic, 17, 5, 4, 0, 0, 2), 257);
        let r = Randomness::sample(&s.field, &s.plan, 2, 0);
        let sn = s.shared_noise(&r);
        let ones = vec![1u64; 17];
        let g = crate::matrices::grs(&s.field, &s.points.alpha, &ones, s.plan.h + s.plan.m + 2);
        let col = FqMatrix::from_fn(17, 1, |n, _| sn.zhat[n][0]);
        assert_eq!(g.hstack(&col).unwrap().rank(&s.field), g.rank(&s.field));
        let z = Randomness {
            rprime: vec![vec![0; 2]; 2],
            ..r.clone()
        };
        let plain = s.shared_noise(&z);
        assert_eq!(plain.zhat[3][1], s.zhat(3, &r.zprime[1], &[]));
    }

    #[test]
    fn seeded_randomness_is_deterministic() {
        let s = scheme(params(Model::XbeutspirDynamic, 9, 1, 1, 0, 0, 1), 257);
        assert_eq!(
            Randomness::sample(&s.field, &s.plan, 5, 3),
            Randomness::sample(&s.field, &s.plan, 5, 3)
        );
    }

    fn reachable() -> Vec<Params> {
        let mut out = Vec::new();
        for model in Model::ALL {
            for n in 1..=9 {
                for x in 0..3 {
                    for t in 0..3 {
                        for e in 0..3 {
                            for u in 0..2 {
                                for b in 0..2 {
                                    if model == Model::Xeutspir && b > 0 {
                                        continue;
                                    }
                                    let p = params(model, n, x, t, e, u, b);
                                    if plan_regime(&p).is_ok() {
                                        out.push(p);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn honest_answer_algebra() {
        for p in reachable() {
            let s = scheme(p, 257);
            let r = Randomness::sample(&s.field, &s.plan, 11, 0);
            let (st, qs, sn) = (s.storage(&r), s.queries(&r, 1), s.shared_noise(&r));
            let ans = s.honest_answers(&st, &qs, &sn);
            let unresp: Vec<usize> = (0..p.u).collect();
            let resp = s.responsive(&unresp);
            for (i, l) in s.plan.instances.iter().enumerate() {
                let a: Vec<u64> = resp.iter().map(|&n| ans[n][i]).collect();
                let x = s.csa_responsive(i, &unresp).unwrap().solve(&s.field, &a).unwrap();
                for row in 0..l.cauchy {
                    assert_eq!(x[row], s.content_row(&r, i, row)[1], "{:?}", p);
                }
                let rp = l.cauchy + l.noise_terms;
                assert_eq!(&x[rp..rp + p.b], &r.rprime[i][..], "{:?}", p);
                assert!(x[rp + p.b..].iter().all(|&v| v == 0), "{:?}", p);
            }
        }
    }

    #[test]
    fn scheme_matrix_feasible_and_consistent() {
        for p in reachable() {
            let s = scheme(p, 257);
            if s.plan.classical {
                continue;
            }
            let n = p.n;
            let unresp: Vec<usize> = (n - p.u..n).collect();
            let m = s.scheme_matrix(&unresp).unwrap();
            assert_eq!(m.rank(&s.field), 2 * n);
            assert!(check_sso(&s.field, &m.block(0, 2 * n, 0, n)), "{:?}", p);
            let bx = s.transfer_box(&unresp).unwrap();
            // apply to a = M x returns blkdiag(V, I) times the bottom of x
            let mut st = Stream::new(3, "x", 0);
            let x = st.elems(&s.field, 2 * n);
            let a = m.mul_vec(&s.field, &x).unwrap();
            let y = bx.apply(&s.field, &a).unwrap();
            let w = s.plan.width();
            let mut expect = s.precoder().mul_vec(&s.field, &x[n..n + w]).unwrap();
            expect.extend_from_slice(&x[n + w..]);
            assert_eq!(y, expect, "{:?}", p);
        }
    }

    #[test]
    fn precode_with_inverse_vandermonde_reproduces_channel() {
        let s = scheme(params(Model::Xeutspir, 8, 3, 2, 1, 1, 0), 257);
        let unresp = [7usize];
        let n = 8;
        let m = s.scheme_matrix(&unresp).unwrap();
        let f = &s.field;
        let v = s.precoder();
        let rest = FqMatrix::identity(n - v.rows());
        let lhs = FqMatrix::block_diag(&[&FqMatrix::identity(n), &v, &rest])
            .mul(f, &m.inverse(f).unwrap())
            .unwrap()
            .block(n, 2 * n, 0, 2 * n);
        assert_eq!(s.transfer_box(&unresp).unwrap().gprime(), &lhs);
    }

    #[test]
    fn honest_rounds_decode() {
        for p in reachable() {
            let s = scheme(p, 257);
            for trial in 0..3 {
                let r = Randomness::sample(&s.field, &s.plan, 77, trial);
                let (st, qs, sn) = (s.storage(&r), s.queries(&r, 1), s.shared_noise(&r));
                let ans = s.honest_answers(&st, &qs, &sn);
                let unresp: Vec<usize> = (0..p.u).collect();
                let y = if s.plan.classical {
                    ans.iter().map(|a| a[0]).collect()
                } else {
                    s.transfer_box(&unresp)
                        .unwrap()
                        .apply(&s.field, &s.encode_channel(&ans))
                        .unwrap()
                };
                let d = s.decode(&y, &unresp).unwrap();
                assert_eq!(d.message, s.message(&r, 1), "{:?}", p);
                assert_eq!(
                    Rational::new(d.message.len() as u64, p.n as u64),
                    s.plan.rate,
                    "{:?}",
                    p
                );
            }
        }
    }

    proptest! {
        #[test]
        fn encode_is_additive(seed in any::<u64>()) {
            let s = scheme(params(Model::Xeutspir, 8, 3, 2, 1, 1, 0), 257);
            let mut st = Stream::new(seed, "a", 0);
            let a: Vec<Vec<u64>> = (0..8).map(|_| st.elems(&s.field, 2)).collect();
            let b: Vec<Vec<u64>> = (0..8).map(|_| st.elems(&s.field, 2)).collect();
            let sum: Vec<Vec<u64>> = a.iter().zip(&b).map(|(x, y)| vec![s.field.add(x[0], y[0]), s.field.add(x[1], y[1])]).collect();
            let ea = s.encode_channel(&a);
            let eb = s.encode_channel(&b);
            let es = s.encode_channel(&sum);
            for j in 0..16 {
                prop_assert_eq!(es[j], s.field.add(ea[j], eb[j]));
            }
        }
    }
}
