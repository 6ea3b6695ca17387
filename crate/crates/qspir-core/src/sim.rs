//! One protocol round end to end, and seeded batches of rounds.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::Model;
use crate::rates::Rational;
use crate::scheme::{DecodedResult, Randomness, Scheme};
use crate::threat::{corrupt_answers, corrupt_answers_unchecked, downlink, Strategy, ThreatConfig, Transcript};

#[derive(Debug, Clone)]
pub struct Round {
    pub randomness: Randomness,
    pub threat: ThreatConfig,
    pub transcript: Transcript,
    /// Servers the user treats as silent: the unresponsive set, padded to U.
    pub erased: Vec<usize>,
    pub decoded: Result<DecodedResult>,
}

impl Round {
    pub fn planted(&self, scheme: &Scheme) -> Vec<u64> {
        scheme.message(&self.randomness, scheme.cfg.theta)
    }

    pub fn success(&self, scheme: &Scheme) -> bool {
        matches!(&self.decoded, Ok(d) if d.message == self.planted(scheme))
    }
}

/// Pads `unresponsive` with the highest-index remaining servers up to U.
pub fn erased_set(scheme: &Scheme, unresponsive: &[usize]) -> Vec<usize> {
    let mut e = unresponsive.to_vec();
    let mut n = scheme.n();
    while e.len() < scheme.cfg.params.u && n > 0 {
        n -= 1;
        if !e.contains(&n) {
            e.push(n);
        }
    }
    e.sort_unstable();
    e
}

fn run(scheme: &Scheme, threat: &ThreatConfig, trial: u64, checked: bool) -> Result<Round> {
    let seed = scheme.cfg.seed;
    let theta = scheme.cfg.theta;
    let randomness = Randomness::sample(&scheme.field, &scheme.plan, seed, trial);
    let storage = scheme.storage(&randomness);
    let queries = scheme.queries(&randomness, theta);
    let noise = scheme.shared_noise(&randomness);
    let answers = if checked {
        corrupt_answers(scheme, &storage, &queries, &noise, threat, seed, trial)?
    } else {
        corrupt_answers_unchecked(scheme, &storage, &queries, &noise, threat, seed, trial)
    };
    let erased = erased_set(scheme, &threat.unresponsive);
    if erased.len() > scheme.cfg.params.u {
        return Err(Error::SetTooLarge {
            set: "unresponsive",
            size: erased.len(),
            bound: scheme.cfg.params.u,
        });
    }
    let dl = downlink(scheme, &answers.answers);
    let decoded = if scheme.plan.classical {
        let y: Vec<u64> = answers.answers.iter().map(|a| a[0]).collect();
        scheme.decode(&y, &erased)
    } else {
        let bx = scheme.transfer_box(&erased)?;
        let y = bx.apply(&scheme.field, &scheme.encode_channel(&answers.answers))?;
        scheme.decode(&y, &erased)
    };
    Ok(Round {
        randomness,
        threat: threat.clone(),
        transcript: Transcript {
            storage,
            queries,
            noise,
            answers,
            downlink: dl,
        },
        erased,
        decoded,
    })
}

/// Runs one round. Decode failures are reported in `Round::decoded`, not as errors.
pub fn run_round(scheme: &Scheme, threat: &ThreatConfig, trial: u64) -> Result<Round> {
    run(scheme, threat, trial, true)
}

/// As `run_round` but lets threat sets exceed their bounds.
pub fn run_round_unchecked(scheme: &Scheme, threat: &ThreatConfig, trial: u64) -> Result<Round> {
    run(scheme, threat, trial, false)
}

/// Threat sets per trial: fresh maximal-size random sets, with optional fixed overrides.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Placement {
    pub eaves_up: Option<Vec<usize>>,
    pub eaves_down: Option<Vec<usize>>,
    pub byzantine: Option<Vec<usize>>,
    pub unresponsive: Option<Vec<usize>>,
    /// Random Byzantine set of this size among responsive servers; may exceed B.
    pub over_threat: Option<usize>,
}

impl Placement {
    pub fn random() -> Self {
        Placement::default()
    }

    pub fn over_threat(b: usize) -> Self {
        Placement {
            over_threat: Some(b),
            ..Default::default()
        }
    }

    /// The threat of one trial, and whether its set sizes are checked.
    pub fn threat(&self, scheme: &Scheme, strategy: Strategy, trial: u64) -> (ThreatConfig, bool) {
        let p = &scheme.cfg.params;
        let mut t = ThreatConfig::random(p, strategy, scheme.cfg.seed, trial);
        if let Some(s) = &self.eaves_up {
            t.eaves_up = s.clone();
            if p.model == Model::XbeutspirStatic && self.eaves_down.is_none() {
                t.eaves_down = s.clone();
            }
        }
        if let Some(s) = &self.eaves_down {
            t.eaves_down = s.clone();
        }
        if let Some(s) = &self.byzantine {
            t.byzantine = s.clone();
        }
        if let Some(s) = &self.unresponsive {
            t.unresponsive = s.clone();
        }
        match self.over_threat {
            Some(b) => {
                let mut s = crate::rng::Stream::new(scheme.cfg.seed, "over-threat", trial);
                let responsive: Vec<usize> = (0..p.n).filter(|n| !t.unresponsive.contains(n)).collect();
                let pick = s.subset(responsive.len(), b.min(responsive.len()));
                t.byzantine = pick.iter().map(|&j| responsive[j]).collect();
                (t, false)
            }
            None => (t, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub success: bool,
    pub accepted: Option<Vec<usize>>,
}

pub fn run_trial(scheme: &Scheme, strategy: Strategy, placement: &Placement, trial: u64) -> Result<TrialOutcome> {
    let (threat, checked) = placement.threat(scheme, strategy, trial);
    let round = if checked {
        run_round(scheme, &threat, trial)?
    } else {
        run_round_unchecked(scheme, &threat, trial)?
    };
    let accepted = match &round.decoded {
        Ok(d) => d.accepted.clone(),
        Err(_) => None,
    };
    Ok(TrialOutcome {
        success: round.success(scheme),
        accepted,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSummary {
    pub trials: u64,
    pub failures: u64,
    pub message_dits: usize,
    /// Correctly retrieved dits over downloaded dits, both summed over trials.
    pub measured_rate: Rational,
    /// Accepted Byzantine sets, keyed by the sorted server list.
    pub accepted: BTreeMap<Vec<usize>, u64>,
}

impl BatchSummary {
    /// Reduces outcomes in trial order.
    pub fn from_outcomes(scheme: &Scheme, outcomes: &[TrialOutcome]) -> Self {
        let trials = outcomes.len() as u64;
        let dits = scheme.plan.message_len();
        let mut out = BatchSummary {
            trials,
            failures: 0,
            message_dits: dits,
            measured_rate: Rational::zero(),
            accepted: BTreeMap::new(),
        };
        let mut retrieved = 0u64;
        for o in outcomes {
            if o.success {
                retrieved += dits as u64;
            } else {
                out.failures += 1;
            }
            if let Some(set) = &o.accepted {
                *out.accepted.entry(set.clone()).or_insert(0) += 1;
            }
        }
        if trials > 0 {
            out.measured_rate = Rational::new(retrieved, trials * scheme.n() as u64);
        }
        out
    }
}

pub fn run_batch(scheme: &Scheme, strategy: Strategy, placement: &Placement, trials: u64) -> Result<BatchSummary> {
    let outcomes = (0..trials)
        .map(|t| run_trial(scheme, strategy, placement, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchSummary::from_outcomes(scheme, &outcomes))
}
