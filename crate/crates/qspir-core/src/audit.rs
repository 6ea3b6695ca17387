//! Exact leakage checks.
//!
//! Every check enumerates the relevant randomness over `F_q`, tallies integer
//! counts of (secret, view) pairs and decides independence by cross
//! multiplication. When a state space exceeds the budget, affine views fall
//! back to a rank certificate: a view `F * noise + g(secret)` is uniform for
//! every secret whenever the noise block of `F` has full row rank.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::byzantine::combinations;
use crate::error::{Error, Result};
use crate::field::{Fq, FqMatrix};
use crate::matrices::EvaluationPoints;
use crate::params::{Model, Params};
use crate::rng::Stream;
use crate::scheme::{query_symbol, storage_symbol, zhat_symbol, Randomness, Scheme, SchemeConfig};
use crate::sim::erased_set;
use crate::threat::{apply_strategy, byzantine_view, Strategy, ThreatConfig};

pub const DEFAULT_BUDGET: u128 = 10_000_000;
const DENSE_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    Refuse,
    RankCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditBudget {
    pub max_states: u128,
    pub fallback: Fallback,
}

impl Default for AuditBudget {
    fn default() -> Self {
        AuditBudget {
            max_states: DEFAULT_BUDGET,
            fallback: Fallback::RankCertificate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    BudgetExceeded,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::BudgetExceeded => "budget-exceeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Trivial,
    Exhaustive,
    Factorized,
    RankCertificate,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Trivial => "trivial",
            Method::Exhaustive => "exhaustive",
            Method::Factorized => "factorized",
            Method::RankCertificate => "rank-certificate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub lemma: &'static str,
    pub verdict: Verdict,
    pub method: Method,
    pub states: u128,
    pub detail: String,
}

impl AuditReport {
    fn new(lemma: &'static str, pass: bool, method: Method, states: u128, detail: String) -> Self {
        AuditReport {
            lemma,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            method,
            states,
            detail,
        }
    }

    fn trivial(lemma: &'static str, detail: &str) -> Self {
        Self::new(lemma, true, Method::Trivial, 0, detail.into())
    }

    fn over_budget(lemma: &'static str, states: u128) -> Self {
        AuditReport {
            lemma,
            verdict: Verdict::BudgetExceeded,
            method: Method::Exhaustive,
            states,
            detail: String::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `q^len`, saturating.
pub fn card(q: u64, len: usize) -> u128 {
    let mut c: u128 = 1;
    for _ in 0..len {
        c = c.saturating_mul(q as u128);
    }
    c
}

/// Little-endian mixed-radix code of a field vector.
pub fn encode(q: u64, v: &[u64]) -> u128 {
    v.iter().rev().fold(0u128, |acc, &d| acc * q as u128 + d as u128)
}

/// Calls `f` on every vector of `F_q^m`.
pub fn for_each_assignment(q: u64, m: usize, mut f: impl FnMut(&[u64])) {
    let mut v = vec![0u64; m];
    loop {
        f(&v);
        let mut i = 0;
        loop {
            if i == m {
                return;
            }
            v[i] += 1;
            if v[i] < q {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

/// Integer counts of (x, y) outcome pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCounts {
    y_card: u128,
    dense: Option<Vec<u64>>,
    sparse: BTreeMap<(u128, u128), u64>,
    total: u64,
}

impl PairCounts {
    /// Dense storage when the outcome grid is small enough.
    pub fn new(x_card: u128, y_card: u128) -> Self {
        let cells = x_card.saturating_mul(y_card);
        PairCounts {
            y_card,
            dense: (cells <= DENSE_LIMIT).then(|| vec![0; cells as usize]),
            sparse: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn sparse() -> Self {
        PairCounts {
            y_card: 0,
            dense: None,
            sparse: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn add(&mut self, x: u128, y: u128, c: u64) {
        match &mut self.dense {
            Some(d) => d[(x * self.y_card + y) as usize] += c,
            None => *self.sparse.entry((x, y)).or_insert(0) += c,
        }
        self.total += c;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn get(&self, x: u128, y: u128) -> u64 {
        match &self.dense {
            Some(d) => d[(x * self.y_card + y) as usize],
            None => self.sparse.get(&(x, y)).copied().unwrap_or(0),
        }
    }

    fn cells(&self) -> Vec<(u128, u128, u64)> {
        match &self.dense {
            Some(d) => d
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i as u128 / self.y_card, i as u128 % self.y_card, c))
                .collect(),
            None => self.sparse.iter().map(|(&(x, y), &c)| (x, y, c)).collect(),
        }
    }

    pub fn marginals(&self) -> (BTreeMap<u128, u64>, BTreeMap<u128, u64>) {
        let mut mx = BTreeMap::new();
        let mut my = BTreeMap::new();
        for (x, y, c) in self.cells() {
            *mx.entry(x).or_insert(0) += c;
            *my.entry(y).or_insert(0) += c;
        }
        (mx, my)
    }

    /// `c(x, y) * total == c(x) * c(y)` on the whole product of supports.
    pub fn independent(&self) -> bool {
        let (mx, my) = self.marginals();
        let t = self.total as u128;
        mx.iter().all(|(&x, &cx)| {
            my.iter()
                .all(|(&y, &cy)| self.get(x, y) as u128 * t == cx as u128 * cy as u128)
        })
    }

    /// The y marginal is uniform over exactly `outcomes` values.
    pub fn y_uniform(&self, outcomes: u128) -> bool {
        let (_, my) = self.marginals();
        my.len() as u128 == outcomes && my.values().all(|&c| c as u128 * outcomes == self.total as u128)
    }

    /// Mutual information in units of `log q`; for display only.
    pub fn mutual_information(&self, q: u64) -> f64 {
        let (mx, my) = self.marginals();
        let t = self.total as f64;
        let lq = libm::log(q as f64);
        self.cells()
            .iter()
            .map(|&(x, y, c)| {
                let c = c as f64;
                c / t * libm::log(c * t / (mx[&x] as f64 * my[&y] as f64)) / lq
            })
            .sum()
    }
}

/// Counts over labelled variables; each outcome holds one code per label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JointDistribution {
    pub labels: Vec<String>,
    pub table: BTreeMap<Vec<u128>, u64>,
}

impl JointDistribution {
    pub fn new(labels: &[&str]) -> Self {
        JointDistribution {
            labels: labels.iter().map(|&s| s.into()).collect(),
            table: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, outcome: Vec<u128>, count: u64) {
        *self.table.entry(outcome).or_insert(0) += count;
    }

    pub fn total(&self) -> u64 {
        self.table.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiResult {
    pub zero: bool,
    /// In units of `log q`.
    pub value: f64,
    pub outcomes: usize,
}

/// Mutual information between the labels in `x` and all others.
pub fn mi_exact(joint: &JointDistribution, x: &[usize], q: u64) -> Result<MiResult> {
    let width = joint.labels.len();
    if x.iter().any(|&i| i >= width) {
        return Err(Error::InvalidConfig("partition label out of range".into()));
    }
    let mut pc = PairCounts::sparse();
    let mut xs: BTreeMap<Vec<u128>, u128> = BTreeMap::new();
    let mut ys: BTreeMap<Vec<u128>, u128> = BTreeMap::new();
    for (outcome, &c) in &joint.table {
        let xv: Vec<u128> = x.iter().map(|&i| outcome[i]).collect();
        let yv: Vec<u128> = (0..width).filter(|i| !x.contains(i)).map(|i| outcome[i]).collect();
        let nx = xs.len() as u128;
        let xi = *xs.entry(xv).or_insert(nx);
        let ny = ys.len() as u128;
        let yi = *ys.entry(yv).or_insert(ny);
        pc.add(xi, yi, c);
    }
    Ok(MiResult {
        zero: pc.independent(),
        value: pc.mutual_information(q),
        outcomes: joint.table.len(),
    })
}

/// Probes `f` at the origin and unit vectors, returning `[F | g]`.
/// Random probes must satisfy `f(v) = F v + g`, otherwise `NotAffine`.
pub fn linearize(field: &Fq, vars: usize, f: &dyn Fn(&[u64]) -> Vec<u64>, seed: u64) -> Result<FqMatrix> {
    let zero = vec![0u64; vars];
    let g = f(&zero);
    let rows = g.len();
    let mut m = FqMatrix::zeros(rows, vars + 1);
    for j in 0..vars {
        let mut e = zero.clone();
        e[j] = 1;
        let col = f(&e);
        for r in 0..rows {
            m.set(r, j, field.sub(col[r], g[r]));
        }
    }
    for (r, &v) in g.iter().enumerate() {
        m.set(r, vars, v);
    }
    let lin = m.block(0, rows, 0, vars);
    for p in 0..16 {
        let v = Stream::new(seed, "linearize", p).elems(field, vars);
        let lhs = f(&v);
        let rhs: Vec<u64> = lin
            .mul_vec(field, &v)?
            .iter()
            .zip(&g)
            .map(|(&a, &b)| field.add(a, b))
            .collect();
        if lhs != rhs {
            return Err(Error::NotAffine);
        }
    }
    Ok(m)
}

/// `view_map = [F | g]`. The view is independent of the non-noise variables
/// iff the noise columns span the column space of `F`; with `uniform` the
/// noise columns must also have full row rank.
pub fn rank_certificate(field: &Fq, view_map: &FqMatrix, noise_coords: &[usize], uniform: bool) -> Result<bool> {
    let vars = view_map.cols().saturating_sub(1);
    if noise_coords.iter().any(|&c| c >= vars) {
        return Err(Error::InvalidConfig("noise coordinate out of range".into()));
    }
    let noise_rank = view_map.select_cols(noise_coords).rank(field);
    let full_rank = view_map.block(0, view_map.rows(), 0, vars).rank(field);
    Ok(noise_rank == full_rank && (!uniform || noise_rank == view_map.rows()))
}

fn certify(field: &Fq, vars: usize, noise: &[usize], f: &dyn Fn(&[u64]) -> Vec<u64>) -> Result<bool> {
    rank_certificate(field, &linearize(field, vars, f, 0)?, noise, false)
}

fn micro_points(field: &Fq, n: usize) -> Result<EvaluationPoints> {
    EvaluationPoints::canonical(field, n, 1, 0)
}

fn split(v: &[u64], k: usize) -> Vec<Vec<u64>> {
    v.chunks(k.max(1)).map(|c| c.to_vec()).collect()
}

/// Gates an enumeration of `states` against the budget.
enum Plan {
    Enumerate,
    Certify,
    Refuse,
}

fn plan(budget: &AuditBudget, states: u128) -> Plan {
    if states <= budget.max_states {
        Plan::Enumerate
    } else if budget.fallback == Fallback::RankCertificate {
        Plan::Certify
    } else {
        Plan::Refuse
    }
}

/// One stored row against every X-subset of servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageAudit {
    pub q: u64,
    pub n: usize,
    pub k: usize,
    pub x: usize,
    /// Noise terms per row.
    pub h: usize,
    /// Drops the last noise term.
    pub mutant: bool,
}

impl StorageAudit {
    pub fn micro() -> Self {
        StorageAudit {
            q: 5,
            n: 4,
            k: 2,
            x: 2,
            h: 2,
            mutant: false,
        }
    }

    pub fn for_params(p: &Params, q: u64) -> Self {
        StorageAudit {
            q,
            n: p.n,
            k: p.k,
            x: p.x,
            h: p.h(),
            mutant: false,
        }
    }
}

pub fn audit_storage_security(a: &StorageAudit, budget: &AuditBudget) -> Result<AuditReport> {
    const NAME: &str = "storage-security";
    if a.x == 0 {
        return Ok(AuditReport::trivial(NAME, "X = 0"));
    }
    let field = Fq::new(a.q)?;
    let pts = micro_points(&field, a.n)?;
    let h = if a.mutant { a.h.saturating_sub(1) } else { a.h };
    let vars = a.k * (1 + h);
    let subsets = combinations(a.n, a.x);
    let states = card(a.q, vars);
    let view = |v: &[u64], set: &[usize]| -> Vec<u64> {
        let noise = split(&v[a.k..], a.k);
        set.iter()
            .flat_map(|&n| storage_symbol(&field, &v[..a.k], &noise, pts.f[0], pts.alpha[n]))
            .collect()
    };
    match plan(budget, states) {
        Plan::Refuse => Ok(AuditReport::over_budget(NAME, states)),
        Plan::Certify => {
            let noise: Vec<usize> = (a.k..vars).collect();
            let mut pass = true;
            for set in &subsets {
                pass &= certify(&field, vars, &noise, &|v| view(v, set))?;
            }
            Ok(AuditReport::new(NAME, pass, Method::RankCertificate, 0, format!("{} subsets", subsets.len())))
        }
        Plan::Enumerate => {
            let y_card = card(a.q, a.k * a.x);
            let mut counts: Vec<PairCounts> = subsets.iter().map(|_| PairCounts::new(card(a.q, a.k), y_card)).collect();
            for_each_assignment(a.q, vars, |v| {
                let x = encode(a.q, &v[..a.k]);
                for (pc, set) in counts.iter_mut().zip(&subsets) {
                    pc.add(x, encode(a.q, &view(v, set)), 1);
                }
            });
            let pass = counts.iter().all(|c| c.independent());
            Ok(AuditReport::new(NAME, pass, Method::Exhaustive, states, format!("{} subsets", subsets.len())))
        }
    }
}

/// One query row against every T-subset of servers, over uniform theta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryAudit {
    pub q: u64,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub m: usize,
    /// Zeroes the last noise term.
    pub mutant: bool,
}

impl QueryAudit {
    pub fn micro() -> Self {
        QueryAudit {
            q: 5,
            n: 4,
            k: 2,
            t: 2,
            m: 2,
            mutant: false,
        }
    }

    pub fn for_params(p: &Params, q: u64) -> Self {
        QueryAudit {
            q,
            n: p.n,
            k: p.k,
            t: p.t,
            m: p.m(),
            mutant: false,
        }
    }
}

pub fn audit_query_privacy(a: &QueryAudit, budget: &AuditBudget) -> Result<AuditReport> {
    const NAME: &str = "query-privacy";
    if a.t == 0 || a.k < 2 {
        return Ok(AuditReport::trivial(NAME, "T = 0 or K = 1"));
    }
    let field = Fq::new(a.q)?;
    let pts = micro_points(&field, a.n)?;
    let m = if a.mutant { a.m.saturating_sub(1) } else { a.m };
    let vars = a.k * m;
    let subsets = combinations(a.n, a.t);
    let states = (a.k as u128).saturating_mul(card(a.q, vars));
    let view = |theta: usize, v: &[u64], set: &[usize]| -> Result<Vec<u64>> {
        let noise = split(v, a.k);
        let mut out = Vec::new();
        for &n in set {
            out.extend(query_symbol(&field, a.k, theta, &noise[..m], pts.f[0], pts.alpha[n])?);
        }
        Ok(out)
    };
    match plan(budget, states) {
        Plan::Refuse => Ok(AuditReport::over_budget(NAME, states)),
        Plan::Certify => {
            // secret as the indicator vector e_theta, then the noise
            let mut pass = true;
            let noise: Vec<usize> = (a.k..a.k + vars).collect();
            for set in &subsets {
                let f = |v: &[u64]| -> Vec<u64> {
                    let base = view(0, &vec![0; vars], set).unwrap_or_default();
                    let mut out = view(0, &v[a.k..], set).unwrap_or_default();
                    for o in out.iter_mut().zip(&base) {
                        *o.0 = field.sub(*o.0, *o.1);
                    }
                    for (t, &e) in v[..a.k].iter().enumerate() {
                        let et = view(t, &vec![0; vars], set).unwrap_or_default();
                        for (o, &b) in out.iter_mut().zip(&et) {
                            *o = field.add(*o, field.mul(e, b));
                        }
                    }
                    out
                };
                pass &= certify(&field, a.k + vars, &noise, &f)?;
            }
            Ok(AuditReport::new(NAME, pass, Method::RankCertificate, 0, format!("{} subsets", subsets.len())))
        }
        Plan::Enumerate => {
            let y_card = card(a.q, a.k * a.t);
            let mut counts: Vec<PairCounts> = subsets.iter().map(|_| PairCounts::new(a.k as u128, y_card)).collect();
            let mut err = None;
            for theta in 0..a.k {
                for_each_assignment(a.q, vars, |v| {
                    for (pc, set) in counts.iter_mut().zip(&subsets) {
                        match view(theta, v, set) {
                            Ok(y) => pc.add(theta as u128, encode(a.q, &y), 1),
                            Err(e) => err = Some(e),
                        }
                    }
                });
            }
            if let Some(e) = err {
                return Err(e);
            }
            let pass = counts.iter().all(|c| c.independent());
            Ok(AuditReport::new(NAME, pass, Method::Exhaustive, states, format!("{} subsets", subsets.len())))
        }
    }
}

/// Shared noise at every B-subset against the interference masks and the Byzantine queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByzantineMaskAudit {
    pub q: u64,
    pub n: usize,
    pub k: usize,
    pub h: usize,
    pub m: usize,
    pub b: usize,
    /// Removes R'.
    pub mutant: bool,
}

impl ByzantineMaskAudit {
    pub fn micro() -> Self {
        ByzantineMaskAudit {
            q: 7,
            n: 5,
            k: 2,
            h: 1,
            m: 1,
            b: 1,
            mutant: false,
        }
    }

    pub fn for_params(p: &Params, q: u64) -> Self {
        ByzantineMaskAudit {
            q,
            n: p.n,
            k: p.k,
            h: p.h(),
            m: p.m(),
            b: p.b,
            mutant: false,
        }
    }
}

pub fn audit_masking_vs_byzantine(a: &ByzantineMaskAudit, budget: &AuditBudget) -> Result<AuditReport> {
    const NAME: &str = "masking-vs-byzantine";
    if a.b == 0 {
        return Ok(AuditReport::trivial(NAME, "B = 0"));
    }
    let field = Fq::new(a.q)?;
    let pts = micro_points(&field, a.n)?;
    let zl = a.h + a.m;
    let rl = if a.mutant { 0 } else { a.b };
    let ql = a.k * a.m;
    let subsets = combinations(a.n, a.b);
    let states = (a.k as u128).saturating_mul(card(a.q, ql + zl + rl));
    let zhat = |v: &[u64], set: &[usize]| -> Vec<u64> {
        set.iter()
            .map(|&n| zhat_symbol(&field, pts.alpha[n], &v[..zl], &v[zl..zl + rl]))
            .collect()
    };
    match plan(budget, states) {
        Plan::Refuse => Ok(AuditReport::over_budget(NAME, states)),
        Plan::Certify => {
            let noise: Vec<usize> = (zl..zl + rl).collect();
            let mut pass = true;
            for set in &subsets {
                let map = linearize(&field, zl + rl, &|v| zhat(v, set), 0)?;
                pass &= rank_certificate(&field, &map, &noise, true)?;
            }
            Ok(AuditReport::new(NAME, pass, Method::RankCertificate, 0, format!("{} subsets", subsets.len())))
        }
        Plan::Enumerate => {
            let mut counts: Vec<PairCounts> = subsets.iter().map(|_| PairCounts::sparse()).collect();
            let mut err = None;
            for theta in 0..a.k {
                for_each_assignment(a.q, ql + zl + rl, |v| {
                    let (qv, rest) = v.split_at(ql);
                    let noise = split(qv, a.k);
                    for (pc, set) in counts.iter_mut().zip(&subsets) {
                        let mut secret = rest[..zl].to_vec();
                        for &n in set {
                            match query_symbol(&field, a.k, theta, &noise[..a.m], pts.f[0], pts.alpha[n]) {
                                Ok(qn) => secret.extend(qn),
                                Err(e) => err = Some(e),
                            }
                        }
                        pc.add(encode(a.q, &secret), encode(a.q, &zhat(rest, set)), 1);
                    }
                });
            }
            if let Some(e) = err {
                return Err(e);
            }
            let outcomes = card(a.q, a.b);
            let pass = counts.iter().all(|c| c.independent() && c.y_uniform(outcomes));
            Ok(AuditReport::new(NAME, pass, Method::Exhaustive, states, format!("{} subsets", subsets.len())))
        }
    }
}

/// Surviving mask positions after the box, 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskExposure {
    /// Z' positions left visible per instance.
    pub l: [Vec<usize>; 2],
    /// R' positions left visible per instance.
    pub h: [Vec<usize>; 2],
    pub gamma: (usize, usize),
}

/// `L_i = {s_i+1..H+M}`, `H_i = {max(1, s_i-H-M+1)..B}`.
pub fn mask_exposure(hm: usize, b: usize, gamma: (usize, usize)) -> MaskExposure {
    let sets = |s: usize| -> (Vec<usize>, Vec<usize>) {
        let l = (s + 1..=hm).collect();
        let lo = (s + 1).saturating_sub(hm).max(1);
        (l, (lo..=b).collect())
    };
    let (l1, h1) = sets(gamma.0);
    let (l2, h2) = sets(gamma.1);
    MaskExposure {
        l: [l1, l2],
        h: [h1, h2],
        gamma,
    }
}

/// Surviving Z' against surviving R' and the shared noise at every B-subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserMaskAudit {
    pub q: u64,
    pub n: usize,
    pub h: usize,
    pub m: usize,
    pub b: usize,
    pub gamma: (usize, usize),
    /// Zeroes every Z' outside the surviving set.
    pub mutant: bool,
}

impl UserMaskAudit {
    pub fn micro() -> Self {
        UserMaskAudit {
            q: 7,
            n: 5,
            h: 1,
            m: 2,
            b: 1,
            gamma: (3, 2),
            mutant: false,
        }
    }

    pub fn for_params(p: &Params, q: u64) -> Result<Self> {
        let plan = crate::scheme::plan_regime(p)?;
        Ok(UserMaskAudit {
            q,
            n: p.n,
            h: plan.h,
            m: plan.m,
            b: p.b,
            gamma: plan.gamma,
            mutant: false,
        })
    }
}

pub fn audit_masking_vs_user(a: &UserMaskAudit, budget: &AuditBudget) -> Result<(AuditReport, MaskExposure)> {
    const NAME: &str = "masking-vs-user";
    let hm = a.h + a.m;
    let exp = mask_exposure(hm, a.b, a.gamma);
    if a.b == 0 && exp.l.iter().all(|l| l.is_empty()) {
        return Ok((AuditReport::trivial(NAME, "nothing exposed"), exp));
    }
    let field = Fq::new(a.q)?;
    let pts = micro_points(&field, a.n)?;
    // variable slots: per instance, the free Z' positions then R'
    let mut zslots: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut vars = 0;
    let mut secret = Vec::new();
    let mut rslot = [0usize; 2];
    for i in 0..2 {
        for j in 1..=hm {
            let survives = exp.l[i].contains(&j);
            if survives || !a.mutant {
                if survives {
                    secret.push(vars);
                }
                zslots[i].push(vars);
                vars += 1;
            } else {
                zslots[i].push(usize::MAX);
            }
        }
        rslot[i] = vars;
        vars += a.b;
    }
    let subsets = combinations(a.n, a.b);
    let states = card(a.q, vars);
    let instance = |v: &[u64], i: usize| -> (Vec<u64>, Vec<u64>) {
        let z: Vec<u64> = zslots[i].iter().map(|&s| if s == usize::MAX { 0 } else { v[s] }).collect();
        (z, v[rslot[i]..rslot[i] + a.b].to_vec())
    };
    let view = |v: &[u64], set: &[usize]| -> Vec<u64> {
        let mut y = Vec::new();
        for i in 0..2 {
            let (_, r) = instance(v, i);
            y.extend(exp.h[i].iter().map(|&j| r[j - 1]));
        }
        for i in 0..2 {
            let (z, r) = instance(v, i);
            y.extend(set.iter().map(|&n| zhat_symbol(&field, pts.alpha[n], &z, &r)));
        }
        y
    };
    let detail = format!("L1={:?} L2={:?} H1={:?} H2={:?}", exp.l[0], exp.l[1], exp.h[0], exp.h[1]);
    let report = match plan(budget, states) {
        Plan::Refuse => AuditReport::over_budget(NAME, states),
        Plan::Certify => {
            let noise: Vec<usize> = (0..vars).filter(|c| !secret.contains(c)).collect();
            let mut pass = true;
            for set in &subsets {
                pass &= certify(&field, vars, &noise, &|v| view(v, set))?;
            }
            AuditReport::new(NAME, pass, Method::RankCertificate, 0, detail)
        }
        Plan::Enumerate => {
            let x_card = card(a.q, secret.len());
            let y_len = exp.h[0].len() + exp.h[1].len() + 2 * a.b;
            let mut counts: Vec<PairCounts> = subsets.iter().map(|_| PairCounts::new(x_card, card(a.q, y_len))).collect();
            let mut sv = vec![0u64; secret.len()];
            for_each_assignment(a.q, vars, |v| {
                for (d, &s) in sv.iter_mut().zip(&secret) {
                    *d = v[s];
                }
                let x = encode(a.q, &sv);
                for (pc, set) in counts.iter_mut().zip(&subsets) {
                    pc.add(x, encode(a.q, &view(v, set)), 1);
                }
            });
            let pass = counts.iter().all(|c| c.independent());
            AuditReport::new(NAME, pass, Method::Exhaustive, states, detail)
        }
    };
    Ok((report, exp))
}

/// Per-instance evaluation of a full round with all other randomness zeroed.
struct InstanceModel<'a> {
    scheme: &'a Scheme,
    i: usize,
    byzantine: Vec<usize>,
    strategy: Option<Strategy>,
    unresponsive: Vec<usize>,
    drop_zprime: bool,
    z_len: usize,
    w_len: usize,
    dummy: usize,
    noise: usize,
    zprime: usize,
    rprime: usize,
    coins: usize,
}

impl<'a> InstanceModel<'a> {
    fn new(scheme: &'a Scheme, i: usize, threat: &ThreatConfig, drop_zprime: bool) -> Self {
        let plan = &scheme.plan;
        let l = &plan.instances[i];
        let k = scheme.k();
        let strategy = threat.strategy.filter(|_| !threat.byzantine.is_empty());
        InstanceModel {
            scheme,
            i,
            byzantine: threat.byzantine.clone(),
            strategy,
            unresponsive: threat.unresponsive.clone(),
            drop_zprime,
            z_len: plan.query_instances.iter().map(|&(r, d)| r * d * k).sum(),
            w_len: k * l.messages(),
            dummy: l.dummy * k,
            noise: l.cauchy * plan.h * k,
            zprime: if drop_zprime { 0 } else { l.noise_terms },
            rprime: scheme.cfg.params.b,
            coins: strategy.map_or(0, |s| s.coins(threat.byzantine.len())),
        }
    }

    fn private_len(&self) -> usize {
        self.dummy + self.noise + self.zprime + self.rprime + self.coins + self.unresponsive.len()
    }

    fn randomness(&self, z: &[u64], w: &[u64], p: &[u64]) -> Randomness {
        let plan = &self.scheme.plan;
        let l = &plan.instances[self.i];
        let k = self.scheme.k();
        let mut r = Randomness::zeros(plan);
        for (s, &v) in r.query_noise.iter_mut().flatten().flatten().flatten().zip(z) {
            *s = v;
        }
        let m = l.messages();
        for kk in 0..k {
            for j in 0..m {
                r.messages[kk][l.offset + j] = w[kk * m + j];
            }
        }
        let mut at = 0;
        let mut take = |len: usize| {
            let s = &p[at..at + len];
            at += len;
            s
        };
        for (s, &v) in r.dummy[self.i].iter_mut().flatten().zip(take(self.dummy)) {
            *s = v;
        }
        for (s, &v) in r.storage_noise[self.i].iter_mut().flatten().flatten().zip(take(self.noise)) {
            *s = v;
        }
        let zp = take(self.zprime);
        if !self.drop_zprime {
            r.zprime[self.i].copy_from_slice(zp);
        }
        r.rprime[self.i].copy_from_slice(take(self.rprime));
        r
    }

    /// Final answers of this instance at every server.
    fn answers(&self, theta: usize, z: &[u64], w: &[u64], p: &[u64]) -> Vec<u64> {
        let s = self.scheme;
        let f = &s.field;
        let r = self.randomness(z, w, p);
        let st = s.storage(&r);
        let qs = s.queries(&r, theta);
        let sn = s.shared_noise(&r);
        let mut a: Vec<u64> = (0..s.n()).map(|n| s.honest_answer(&st, &qs, &sn, n, self.i)).collect();
        let tail = &p[self.dummy + self.noise + self.zprime + self.rprime..];
        if let Some(strategy) = self.strategy {
            let view = byzantine_view(s, &st, &qs, &sn, &self.byzantine);
            let mut coins = vec![vec![0u64; self.coins]; s.instances()];
            coins[self.i] = tail[..self.coins].to_vec();
            let d = apply_strategy(f, strategy, &view, &coins);
            for (j, &n) in self.byzantine.iter().enumerate() {
                a[n] = f.add(a[n], d[j][self.i]);
            }
        }
        for (j, &n) in self.unresponsive.iter().enumerate() {
            a[n] = f.add(a[n], tail[self.coins + j]);
        }
        a
    }
}

/// The user's view against the unrequested messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricAudit {
    pub cfg: SchemeConfig,
    pub threat: ThreatConfig,
    /// Removes Z' from the answers.
    pub mutant: bool,
}

impl SymmetricAudit {
    pub fn micro() -> Self {
        SymmetricAudit {
            cfg: SchemeConfig {
                params: Params::new(Model::Xeutspir, 3, 2, 0, 2, 0, 0, 0),
                q: 5,
                theta: 0,
                seed: 0,
            },
            threat: ThreatConfig::default(),
            mutant: false,
        }
    }

    /// Classical-regime Byzantine configuration with one deviating server.
    pub fn micro_byzantine(strategy: Strategy) -> Self {
        SymmetricAudit {
            cfg: SchemeConfig {
                params: Params::new(Model::XbeutspirStatic, 5, 2, 0, 0, 0, 0, 1),
                q: 7,
                theta: 0,
                seed: 0,
            },
            threat: ThreatConfig {
                byzantine: vec![2],
                strategy: Some(strategy),
                ..Default::default()
            },
            mutant: false,
        }
    }
}

/// Per instance and per theta: the user sees the query noise and the visible
/// coefficients of that instance. Given the query noise the instances are
/// independent, so the per-instance checks together decide the joint one.
pub fn audit_symmetric_privacy(a: &SymmetricAudit, budget: &AuditBudget) -> Result<AuditReport> {
    const NAME: &str = "symmetric-privacy";
    let scheme = Scheme::new(a.cfg)?;
    let k = scheme.k();
    if k < 2 {
        return Ok(AuditReport::trivial(NAME, "K = 1"));
    }
    let q = scheme.field.q();
    let erased = erased_set(&scheme, &a.threat.unresponsive);
    let resp = scheme.responsive(&erased);
    let models: Vec<InstanceModel> = (0..scheme.instances())
        .map(|i| InstanceModel::new(&scheme, i, &a.threat, a.mutant))
        .collect();
    let mut states: u128 = 0;
    for m in &models {
        let s = card(q, m.z_len + m.w_len + m.private_len()).saturating_mul(k as u128);
        states = states.saturating_add(s);
    }
    let z_states = card(q, models[0].z_len).saturating_mul((k * models.len()) as u128);
    let method = if states <= budget.max_states {
        Method::Exhaustive
    } else if budget.fallback == Fallback::RankCertificate && z_states <= budget.max_states {
        Method::RankCertificate
    } else {
        return Ok(AuditReport::over_budget(NAME, states));
    };
    let mut pass = true;
    for m in &models {
        let l = scheme.plan.instances[m.i];
        let cinv = scheme.csa_responsive(m.i, &erased)?.inverse(&scheme.field)?;
        let known = l.known();
        let msgs = l.messages();
        let (zl, wl, pl) = (m.z_len, m.w_len, m.private_len());
        let visible = |theta: usize, z: &[u64], w: &[u64], p: &[u64]| -> Vec<u64> {
            let a = m.answers(theta, z, w, p);
            let ar: Vec<u64> = resp.iter().map(|&n| a[n]).collect();
            let x = cinv.mul_vec(&scheme.field, &ar).unwrap_or_default();
            x.iter().zip(&known).filter(|(_, &kn)| kn).map(|(&xv, _)| xv).collect()
        };
        for theta in 0..k {
            let other = |kk: usize| kk != theta;
            if method == Method::RankCertificate {
                // conditioned on Z the view is affine in the messages and the private noise
                let noise: Vec<usize> = (0..wl + pl).filter(|&c| c >= wl || !other(c / msgs)).collect();
                let mut err = None;
                for_each_assignment(q, zl, |z| {
                    let f = |v: &[u64]| visible(theta, z, &v[..wl], &v[wl..]);
                    match linearize(&scheme.field, wl + pl, &f, 0).and_then(|map| rank_certificate(&scheme.field, &map, &noise, false)) {
                        Ok(ok) => pass &= ok,
                        Err(e) => err = Some(e),
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
                continue;
            }
            let mut pc = PairCounts::sparse();
            for_each_assignment(q, zl + wl + pl, |v| {
                let (z, rest) = v.split_at(zl);
                let (w, p) = rest.split_at(wl);
                let mut y: Vec<u64> = z.to_vec();
                y.extend(visible(theta, z, w, p));
                let secret: Vec<u64> = (0..k)
                    .filter(|&kk| other(kk))
                    .flat_map(|kk| w[kk * msgs..(kk + 1) * msgs].iter().copied())
                    .collect();
                pc.add(encode(q, &secret), encode(q, &y), 1);
            });
            pass &= pc.independent();
        }
    }
    let detail = format!("{} instances x {} messages", models.len(), k);
    let states = if method == Method::Exhaustive { states } else { 0 };
    Ok(AuditReport::new(NAME, pass, method, states, detail))
}

/// Eavesdropper view against (theta, W).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EavesdropperAudit {
    pub cfg: SchemeConfig,
    /// Taps and Byzantine placement; the Byzantine set is not bounded by B.
    pub threat: ThreatConfig,
}

/// Given (theta, Z, W) the instances are independent, so the view law for each
/// secret is the Z-mixture of a product of per-instance laws. Every secret must
/// induce the same law.
pub fn audit_eavesdropper(a: &EavesdropperAudit, budget: &AuditBudget) -> Result<AuditReport> {
    const NAME: &str = "eavesdropper";
    let t = &a.threat;
    if t.eaves_up.is_empty() && t.eaves_down.is_empty() {
        return Ok(AuditReport::trivial(NAME, "E = 0"));
    }
    let scheme = Scheme::new(a.cfg)?;
    let f = &scheme.field;
    let q = f.q();
    let k = scheme.k();
    let inst = scheme.instances();
    let models: Vec<InstanceModel> = (0..inst).map(|i| InstanceModel::new(&scheme, i, t, false)).collect();
    let z_len = models[0].z_len;
    let up_len: usize = scheme
        .plan
        .query_instances
        .iter()
        .map(|&(r, _)| r * k)
        .sum::<usize>()
        * t.eaves_up.len();
    let up_card = card(q, up_len);
    let v_card = card(q, t.eaves_down.len());
    let cells = (0..inst).fold(up_card, |c, _| c.saturating_mul(v_card));
    let mut states: u128 = 0;
    for m in &models {
        let s = card(q, z_len + m.w_len + m.private_len()).saturating_mul(k as u128);
        states = states.saturating_add(s);
    }
    if states > budget.max_states || cells > DENSE_LIMIT {
        return Ok(AuditReport::over_budget(NAME, states));
    }
    let n_z = card(q, z_len) as usize;
    // memo[theta][z] = (uplink code, per instance per W_i: sparse law of the downlink)
    type Law = Vec<(usize, u64)>;
    let mut memo: Vec<Vec<(usize, Vec<Vec<Law>>)>> = Vec::with_capacity(k);
    for theta in 0..k {
        let mut per_z = Vec::with_capacity(n_z);
        for_each_assignment(q, z_len, |z| {
            let r = models[0].randomness(z, &vec![0; models[0].w_len], &vec![0; models[0].private_len()]);
            let qs = scheme.queries(&r, theta);
            let up: Vec<u64> = t
                .eaves_up
                .iter()
                .flat_map(|&n| qs.shares[n].iter().flatten().flatten().copied())
                .collect();
            let up = encode(q, &up) as usize;
            let mut laws = Vec::with_capacity(inst);
            for m in &models {
                let mut per_w = Vec::new();
                for_each_assignment(q, m.w_len, |w| {
                    let mut law = vec![0u64; v_card as usize];
                    for_each_assignment(q, m.private_len(), |p| {
                        let a = m.answers(theta, z, w, p);
                        let v: Vec<u64> = t
                            .eaves_down
                            .iter()
                            .map(|&n| {
                                if scheme.plan.classical {
                                    a[n]
                                } else if m.i == 0 {
                                    f.mul(scheme.points.u[n], a[n])
                                } else {
                                    f.mul(scheme.points.v[n], a[n])
                                }
                            })
                            .collect();
                        law[encode(q, &v) as usize] += 1;
                    });
                    per_w.push(law.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)).collect());
                });
                laws.push(per_w);
            }
            per_z.push((up, laws));
        });
        memo.push(per_z);
    }
    let w_cards: Vec<usize> = models.iter().map(|m| card(q, m.w_len) as usize).collect();
    let n_w: usize = w_cards.iter().product();
    let vc = v_card as usize;
    let mut reference: Option<Vec<u64>> = None;
    let mut pass = true;
    'outer: for per_z in &memo {
        for widx in 0..n_w {
            let mut idx = Vec::with_capacity(inst);
            let mut rest = widx;
            for &c in &w_cards {
                idx.push(rest % c);
                rest /= c;
            }
            let mut law = vec![0u64; cells as usize];
            for (up, laws) in per_z {
                let mut acc: Vec<(usize, u64)> = vec![(*up, 1)];
                for (i, l) in laws.iter().enumerate() {
                    let mut next = Vec::with_capacity(acc.len() * l[idx[i]].len());
                    for &(code, c) in &acc {
                        for &(v, cv) in &l[idx[i]] {
                            next.push((code * vc + v, c * cv));
                        }
                    }
                    acc = next;
                }
                for (code, c) in acc {
                    law[code] += c;
                }
            }
            match &reference {
                None => reference = Some(law),
                Some(r) if *r != law => {
                    pass = false;
                    break 'outer;
                }
                _ => {}
            }
        }
    }
    let detail = format!(
        "up={:?} down={:?} byzantine={:?} {}",
        t.eaves_up,
        t.eaves_down,
        t.byzantine,
        t.strategy.map_or("none", |s| s.name())
    );
    Ok(AuditReport::new(NAME, pass, Method::Factorized, states, detail))
}

impl EavesdropperAudit {
    fn relay(params: Params, q: u64, up: usize, down: usize) -> Self {
        EavesdropperAudit {
            cfg: SchemeConfig {
                params,
                q,
                theta: 0,
                seed: 0,
            },
            threat: ThreatConfig {
                eaves_up: vec![up],
                eaves_down: vec![down],
                byzantine: vec![down],
                strategy: Some(Strategy::QueryRelay),
                ..Default::default()
            },
        }
    }

    /// Query noise degree 1 = max{E, T}, one relaying server on a tapped downlink.
    pub fn relay_undersized() -> Self {
        Self::relay(Params::new(Model::Xeutspir, 2, 2, 0, 1, 1, 0, 0), 3, 0, 1)
    }

    /// Query noise degree 2 = E + B, one relaying server on a tapped downlink.
    pub fn relay_sized() -> Self {
        Self::relay(Params::new(Model::Xeutspir, 3, 2, 0, 2, 1, 0, 0), 5, 0, 1)
    }

    /// Same link tapped both ways, relaying server on it.
    pub fn relay_static() -> Self {
        Self::relay(Params::new(Model::Xeutspir, 3, 2, 0, 2, 1, 0, 0), 5, 1, 1)
    }

    pub fn honest_dynamic() -> Self {
        let mut a = Self::relay_sized();
        a.threat.byzantine.clear();
        a.threat.strategy = None;
        a
    }
}

/// Relay attack on a tapped downlink: undersized query noise, then noise sized for E + B.
pub fn relay_attack_comparison(budget: &AuditBudget) -> Result<(AuditReport, AuditReport)> {
    Ok((
        audit_eavesdropper(&EavesdropperAudit::relay_undersized(), budget)?,
        audit_eavesdropper(&EavesdropperAudit::relay_sized(), budget)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lemma {
    Storage,
    Query,
    ByzantineMask,
    UserMask,
    Symmetric,
    Eavesdropper,
}

impl Lemma {
    pub const ALL: [Lemma; 6] = [
        Lemma::Storage,
        Lemma::Query,
        Lemma::ByzantineMask,
        Lemma::UserMask,
        Lemma::Symmetric,
        Lemma::Eavesdropper,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Lemma::Storage => "storage-security",
            Lemma::Query => "query-privacy",
            Lemma::ByzantineMask => "masking-vs-byzantine",
            Lemma::UserMask => "masking-vs-user",
            Lemma::Symmetric => "symmetric-privacy",
            Lemma::Eavesdropper => "eavesdropper",
        }
    }
}

/// Selects which lemma runs its mutant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Mutants {
    pub storage: bool,
    pub query: bool,
    pub byzantine_mask: bool,
    pub user_mask: bool,
    pub symmetric: bool,
    pub eavesdropper: bool,
}

impl Mutants {
    pub fn only(lemma: Lemma) -> Self {
        let mut m = Mutants::default();
        *m.flag(lemma) = true;
        m
    }

    pub fn flag(&mut self, lemma: Lemma) -> &mut bool {
        match lemma {
            Lemma::Storage => &mut self.storage,
            Lemma::Query => &mut self.query,
            Lemma::ByzantineMask => &mut self.byzantine_mask,
            Lemma::UserMask => &mut self.user_mask,
            Lemma::Symmetric => &mut self.symmetric,
            Lemma::Eavesdropper => &mut self.eavesdropper,
        }
    }

    pub fn get(&self, lemma: Lemma) -> bool {
        *self.clone().flag(lemma)
    }
}

fn combine(lemma: &'static str, parts: Vec<AuditReport>) -> AuditReport {
    let verdict = if parts.iter().any(|p| p.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if parts.iter().any(|p| p.verdict == Verdict::BudgetExceeded) {
        Verdict::BudgetExceeded
    } else {
        Verdict::Pass
    };
    let method = parts.first().map_or(Method::Trivial, |p| p.method);
    AuditReport {
        lemma,
        verdict,
        method,
        states: parts.iter().fold(0u128, |a, p| a.saturating_add(p.states)),
        detail: format!("{} runs", parts.len()),
    }
}

/// One lemma at its micro configuration, or its mutant.
pub fn micro_audit(lemma: Lemma, budget: &AuditBudget, mutant: bool) -> Result<AuditReport> {
    match lemma {
        Lemma::Storage => audit_storage_security(
            &StorageAudit {
                mutant,
                ..StorageAudit::micro()
            },
            budget,
        ),
        Lemma::Query => audit_query_privacy(
            &QueryAudit {
                mutant,
                ..QueryAudit::micro()
            },
            budget,
        ),
        Lemma::ByzantineMask => audit_masking_vs_byzantine(
            &ByzantineMaskAudit {
                mutant,
                ..ByzantineMaskAudit::micro()
            },
            budget,
        ),
        Lemma::UserMask => Ok(audit_masking_vs_user(
            &UserMaskAudit {
                mutant,
                ..UserMaskAudit::micro()
            },
            budget,
        )?
        .0),
        Lemma::Symmetric => {
            let mut parts = vec![audit_symmetric_privacy(
                &SymmetricAudit {
                    mutant,
                    ..SymmetricAudit::micro()
                },
                budget,
            )?];
            if !mutant {
                for s in [Strategy::QueryRelay, Strategy::StorageLeak, Strategy::AdditiveRandom] {
                    parts.push(audit_symmetric_privacy(&SymmetricAudit::micro_byzantine(s), budget)?);
                }
            }
            Ok(combine(lemma.name(), parts))
        }
        Lemma::Eavesdropper => {
            let parts = if mutant {
                vec![audit_eavesdropper(&EavesdropperAudit::relay_undersized(), budget)?]
            } else {
                vec![
                    audit_eavesdropper(&EavesdropperAudit::honest_dynamic(), budget)?,
                    audit_eavesdropper(&EavesdropperAudit::relay_sized(), budget)?,
                    audit_eavesdropper(&EavesdropperAudit::relay_static(), budget)?,
                ]
            };
            Ok(combine(lemma.name(), parts))
        }
    }
}

/// The six lemma checks at their micro configurations, one report each.
pub fn micro_suite(budget: &AuditBudget, mutants: Mutants) -> Result<Vec<AuditReport>> {
    Lemma::ALL
        .iter()
        .map(|&l| micro_audit(l, budget, mutants.get(l)))
        .collect()
}

/// One lemma sized from a parameter point; large points fall back or refuse.
pub fn params_audit(lemma: Lemma, p: &Params, q: u64, budget: &AuditBudget, seed: u64) -> Result<AuditReport> {
    let cfg = SchemeConfig {
        params: *p,
        q,
        theta: 0,
        seed,
    };
    let placement = ThreatConfig::random(p, Strategy::QueryRelay, seed, 0);
    match lemma {
        Lemma::Storage => audit_storage_security(&StorageAudit::for_params(p, q), budget),
        Lemma::Query => audit_query_privacy(&QueryAudit::for_params(p, q), budget),
        Lemma::ByzantineMask => audit_masking_vs_byzantine(&ByzantineMaskAudit::for_params(p, q), budget),
        Lemma::UserMask => Ok(audit_masking_vs_user(&UserMaskAudit::for_params(p, q)?, budget)?.0),
        Lemma::Symmetric => audit_symmetric_privacy(
            &SymmetricAudit {
                cfg,
                threat: ThreatConfig {
                    eaves_up: Vec::new(),
                    eaves_down: Vec::new(),
                    ..placement
                },
                mutant: false,
            },
            budget,
        ),
        Lemma::Eavesdropper => audit_eavesdropper(
            &EavesdropperAudit {
                cfg,
                threat: placement,
            },
            budget,
        ),
    }
}

pub fn params_suite(p: &Params, q: u64, budget: &AuditBudget, seed: u64) -> Result<Vec<AuditReport>> {
    Lemma::ALL
        .iter()
        .map(|&l| params_audit(l, p, q, budget, seed))
        .collect()
}
