//! Adversary placement, Byzantine strategies and view extraction.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::field::Fq;
use crate::params::{Model, Params};
use crate::rng::Stream;
use crate::scheme::{QuerySet, Scheme, SharedNoise, Storage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    HonestZero,
    AdditiveRandom,
    QueryRelay,
    StorageLeak,
    CoordinatedCustom,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::HonestZero,
        Strategy::AdditiveRandom,
        Strategy::QueryRelay,
        Strategy::StorageLeak,
        Strategy::CoordinatedCustom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::HonestZero => "honest-zero",
            Strategy::AdditiveRandom => "additive-random",
            Strategy::QueryRelay => "query-relay",
            Strategy::StorageLeak => "storage-leak",
            Strategy::CoordinatedCustom => "coordinated-custom",
        }
    }

    pub fn function(&self) -> StrategyFn {
        STRATEGIES
            .iter()
            .find(|(s, _)| s == self)
            .map(|&(_, f)| f)
            .expect("every strategy is registered")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown strategy {s}")))
    }
}

/// Everything one Byzantine server may base its answer on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByzantineEntry {
    pub server: usize,
    pub alpha: u64,
    /// `storage[i][row]`.
    pub storage: Vec<Vec<Vec<u64>>>,
    /// `queries[i][row]`, the query block serving instance i.
    pub queries: Vec<Vec<Vec<u64>>>,
    pub zhat: Vec<u64>,
    /// The answer the server would send if honest.
    pub honest: Vec<u64>,
}

/// Deviation of every Byzantine server for instance `i`, from the joint view and that instance's coins.
pub type StrategyFn = fn(&Fq, &[ByzantineEntry], usize, &[u64]) -> Vec<u64>;

pub const STRATEGIES: [(Strategy, StrategyFn); 5] = [
    (Strategy::HonestZero, honest_zero),
    (Strategy::AdditiveRandom, additive_random),
    (Strategy::QueryRelay, query_relay),
    (Strategy::StorageLeak, storage_leak),
    (Strategy::CoordinatedCustom, coordinated_custom),
];

fn honest_zero(_: &Fq, view: &[ByzantineEntry], _: usize, _: &[u64]) -> Vec<u64> {
    vec![0; view.len()]
}

fn additive_random(_: &Fq, _: &[ByzantineEntry], _: usize, coins: &[u64]) -> Vec<u64> {
    coins.to_vec()
}

/// Replaces answer i with dit i of the first query row.
fn query_relay(f: &Fq, view: &[ByzantineEntry], i: usize, _: &[u64]) -> Vec<u64> {
    view.iter()
        .map(|e| {
            let dit = e.queries[i].first().map_or(0, |r| r[i % r.len()]);
            f.sub(dit, e.honest[i])
        })
        .collect()
}

/// Replaces each answer with the first stored dit of that instance.
fn storage_leak(f: &Fq, view: &[ByzantineEntry], i: usize, _: &[u64]) -> Vec<u64> {
    view.iter()
        .map(|e| {
            let dit = e.storage[i].first().map_or(0, |r| r[0]);
            f.sub(dit, e.honest[i])
        })
        .collect()
}

/// Evaluates one shared polynomial, coefficients from the coins, at the Byzantine points.
fn coordinated_custom(f: &Fq, view: &[ByzantineEntry], _: usize, coins: &[u64]) -> Vec<u64> {
    view.iter()
        .map(|e| coins.iter().rev().fold(0, |acc, &a| f.add(f.mul(acc, e.alpha), a)))
        .collect()
}

impl Strategy {
    /// Private field elements drawn per instance for a Byzantine set of the given size.
    pub fn coins(&self, byzantine: usize) -> usize {
        match self {
            Strategy::AdditiveRandom | Strategy::CoordinatedCustom => byzantine,
            _ => 0,
        }
    }
}

/// `deltas[j][i]` for the j-th Byzantine server, given `coins[i]`.
pub fn apply_strategy(f: &Fq, strategy: Strategy, view: &[ByzantineEntry], coins: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let inst = view.first().map_or(0, |e| e.honest.len());
    let mut out = vec![vec![0u64; inst]; view.len()];
    for (i, c) in coins.iter().enumerate().take(inst) {
        for (j, d) in (strategy.function())(f, view, i, c).into_iter().enumerate() {
            out[j][i] = d;
        }
    }
    out
}

/// Placement of every adversary in one round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ThreatConfig {
    pub colluding: Vec<usize>,
    pub communicating: Vec<usize>,
    pub eaves_up: Vec<usize>,
    pub eaves_down: Vec<usize>,
    pub byzantine: Vec<usize>,
    pub unresponsive: Vec<usize>,
    pub strategy: Option<Strategy>,
}

impl ThreatConfig {
    /// Sets of maximal size drawn uniformly; the static model taps the same links both ways.
    pub fn random(p: &Params, strategy: Strategy, seed: u64, trial: u64) -> Self {
        let mut s = Stream::new(seed, "placement", trial);
        let eaves_up = s.subset(p.n, p.e);
        let eaves_down = if p.model == Model::XbeutspirStatic {
            eaves_up.clone()
        } else {
            s.subset(p.n, p.e)
        };
        ThreatConfig {
            colluding: s.subset(p.n, p.t),
            communicating: s.subset(p.n, p.x),
            eaves_up,
            eaves_down,
            byzantine: s.subset(p.n, p.b),
            unresponsive: s.subset(p.n, p.u),
            strategy: Some(strategy),
        }
    }

    pub fn validate(&self, p: &Params) -> Result<()> {
        let checks: [(&'static str, &Vec<usize>, usize); 6] = [
            ("colluding", &self.colluding, p.t),
            ("communicating", &self.communicating, p.x),
            ("eaves-up", &self.eaves_up, p.e),
            ("eaves-down", &self.eaves_down, p.e),
            ("byzantine", &self.byzantine, p.b),
            ("unresponsive", &self.unresponsive, p.u),
        ];
        for (set, v, bound) in checks {
            if v.len() > bound {
                return Err(Error::SetTooLarge {
                    set,
                    size: v.len(),
                    bound,
                });
            }
            if v.iter().any(|&n| n >= p.n) || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{set} set must be sorted distinct servers below {}",
                    p.n
                )));
            }
        }
        if p.model == Model::XbeutspirStatic && self.eaves_up != self.eaves_down {
            return Err(Error::InvalidConfig("static eavesdropper taps the same links both ways".into()));
        }
        Ok(())
    }
}

/// Honest answers with every deviation recorded separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSet {
    pub honest: Vec<Vec<u64>>,
    /// Byzantine deviations, zero outside the Byzantine set.
    pub deviations: Vec<Vec<u64>>,
    /// Unresponsive offsets, zero outside the unresponsive set.
    pub offsets: Vec<Vec<u64>>,
    pub answers: Vec<Vec<u64>>,
}

pub fn byzantine_view(
    scheme: &Scheme,
    st: &Storage,
    qs: &QuerySet,
    sn: &SharedNoise,
    set: &[usize],
) -> Vec<ByzantineEntry> {
    set.iter()
        .map(|&n| ByzantineEntry {
            server: n,
            alpha: scheme.points.alpha[n],
            storage: st.shares[n].clone(),
            queries: scheme
                .plan
                .instances
                .iter()
                .map(|l| qs.shares[n][l.query].clone())
                .collect(),
            zhat: sn.zhat[n].clone(),
            honest: (0..scheme.instances())
                .map(|i| scheme.honest_answer(st, qs, sn, n, i))
                .collect(),
        })
        .collect()
}

/// Folds Byzantine deviations and unresponsive offsets into the honest answers.
pub fn corrupt_answers(
    scheme: &Scheme,
    st: &Storage,
    qs: &QuerySet,
    sn: &SharedNoise,
    cfg: &ThreatConfig,
    seed: u64,
    trial: u64,
) -> Result<AnswerSet> {
    cfg.validate(&scheme.cfg.params)?;
    Ok(corrupt_answers_unchecked(scheme, st, qs, sn, cfg, seed, trial))
}

/// As `corrupt_answers`, without set-size bounds.
pub fn corrupt_answers_unchecked(
    scheme: &Scheme,
    st: &Storage,
    qs: &QuerySet,
    sn: &SharedNoise,
    cfg: &ThreatConfig,
    seed: u64,
    trial: u64,
) -> AnswerSet {
    let f = &scheme.field;
    let honest = scheme.honest_answers(st, qs, sn);
    let width = scheme.instances();
    let mut deviations = vec![vec![0u64; width]; scheme.n()];
    if let Some(strategy) = cfg.strategy {
        if !cfg.byzantine.is_empty() {
            let view = byzantine_view(scheme, st, qs, sn, &cfg.byzantine);
            let mut s = Stream::new(seed, strategy.name(), trial);
            let coins: Vec<Vec<u64>> = (0..width)
                .map(|_| s.elems(f, strategy.coins(view.len())))
                .collect();
            let d = apply_strategy(f, strategy, &view, &coins);
            for (&n, dn) in cfg.byzantine.iter().zip(d) {
                deviations[n] = dn;
            }
        }
    }
    let mut offsets = vec![vec![0u64; width]; scheme.n()];
    let mut s = Stream::new(seed, "unresponsive", trial);
    for &n in &cfg.unresponsive {
        offsets[n] = s.elems(f, width);
    }
    let answers = (0..scheme.n())
        .map(|n| {
            (0..width)
                .map(|i| f.add(f.add(honest[n][i], deviations[n][i]), offsets[n][i]))
                .collect()
        })
        .collect();
    AnswerSet {
        honest,
        deviations,
        offsets,
        answers,
    }
}

/// A full round as seen on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub storage: Storage,
    pub queries: QuerySet,
    pub noise: SharedNoise,
    pub answers: AnswerSet,
    /// Downlink symbols per server: the dit pair, or the single classical answer.
    pub downlink: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdversaryView {
    /// Queries at the colluding servers.
    pub collusion: Vec<(usize, Vec<Vec<Vec<u64>>>)>,
    /// Storage at the communicating servers.
    pub communication: Vec<(usize, Vec<Vec<Vec<u64>>>)>,
    pub eaves_up: Vec<(usize, Vec<Vec<Vec<u64>>>)>,
    pub eaves_down: Vec<(usize, Vec<u64>)>,
    pub byzantine: Vec<ByzantineEntry>,
}

/// Downlink symbols: `(a_n, a_{N+n})` per server, or the classical answer.
pub fn downlink(scheme: &Scheme, answers: &[Vec<u64>]) -> Vec<Vec<u64>> {
    if scheme.plan.classical {
        return answers.to_vec();
    }
    let a = scheme.encode_channel(answers);
    let n = scheme.n();
    (0..n).map(|s| vec![a[s], a[n + s]]).collect()
}

pub fn extract_views(scheme: &Scheme, tr: &Transcript, cfg: &ThreatConfig) -> AdversaryView {
    let q = |set: &[usize]| set.iter().map(|&n| (n, tr.queries.shares[n].clone())).collect();
    AdversaryView {
        collusion: q(&cfg.colluding),
        communication: cfg
            .communicating
            .iter()
            .map(|&n| (n, tr.storage.shares[n].clone()))
            .collect(),
        eaves_up: q(&cfg.eaves_up),
        eaves_down: cfg
            .eaves_down
            .iter()
            .map(|&n| (n, tr.downlink[n].clone()))
            .collect(),
        byzantine: byzantine_view(scheme, &tr.storage, &tr.queries, &tr.noise, &cfg.byzantine),
    }
}
