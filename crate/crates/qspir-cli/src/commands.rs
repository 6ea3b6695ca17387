use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qspir_core::audit::{self, AuditReport, Lemma, Verdict};
use qspir_core::params::{Model, Params};
use qspir_core::rates::{sweep, theorem_rate, Grid, Rational};
use qspir_core::scheme::{Scheme, SchemeConfig};
use qspir_core::sim::{run_trial, BatchSummary, TrialOutcome};
use qspir_core::threat::Strategy;

use crate::config::{ConfigError, RunConfig, Span};

/// 0 ok, 1 property failure, 2 usage error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Failure = 1,
    Usage = 2,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) => f.write_str(s),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<qspir_core::Error> for CliError {
    fn from(e: qspir_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

pub fn from_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize().map(|x| x.map_err(CliError::from)).collect()
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<(), CliError> {
    match &cfg.out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateRow {
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "X")]
    pub x: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "E")]
    pub e: usize,
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub q: u64,
    pub regime: String,
    #[serde(rename = "L1")]
    pub l1: i64,
    #[serde(rename = "L2")]
    pub l2: i64,
    pub rate_num: u64,
    pub rate_den: u64,
    pub boundary_flag: String,
}

fn point_config(p: &Params, q: u64) -> RunConfig {
    let one = |v| Span { lo: v, hi: v };
    RunConfig {
        models: vec![p.model],
        n: one(p.n),
        k: one(p.k),
        x: one(p.x),
        t: one(p.t),
        e: one(p.e),
        u: one(p.u),
        b: one(p.b),
        q,
        explicit_params: true,
        ..Default::default()
    }
}

impl RateRow {
    pub fn new(p: &Params, q: u64) -> Self {
        let r = theorem_rate(p);
        RateRow {
            model: p.model.name().into(),
            n: p.n,
            k: p.k,
            x: p.x,
            t: p.t,
            e: p.e,
            u: p.u,
            b: p.b,
            q,
            regime: r.regime.map_or("none".into(), |g| g.to_string()),
            l1: r.l1,
            l2: r.l2,
            rate_num: r.rate.num,
            rate_den: r.rate.den,
            boundary_flag: r.flag.name().into(),
        }
    }

    pub fn config(&self) -> Result<RunConfig, ConfigError> {
        let model: Model = self.model.parse().map_err(|e: qspir_core::Error| ConfigError(e.to_string()))?;
        let p = Params::new(model, self.n, self.k, self.x, self.t, self.e, self.u, self.b);
        Ok(point_config(&p, self.q))
    }
}

pub fn grid(cfg: &RunConfig) -> Grid {
    let r = |s: Span| (s.lo, s.hi);
    Grid {
        models: cfg.models.clone(),
        n: r(cfg.n),
        k: r(cfg.k),
        x: r(cfg.x),
        t: r(cfg.t),
        e: r(cfg.e),
        u: r(cfg.u),
        b: r(cfg.b),
    }
}

pub fn rates(cfg: &RunConfig) -> Result<Vec<RateRow>, CliError> {
    let g = grid(cfg);
    if g.n.0 == 0 || g.k.0 == 0 {
        return Err(CliError::Usage("N and K must be positive".into()));
    }
    Ok(sweep(&g).iter().map(|r| RateRow::new(&r.params, cfg.q)).collect())
}

pub fn cmd_rates(cfg: &RunConfig) -> Result<Exit, CliError> {
    emit(cfg, &to_csv(&rates(cfg)?)?)?;
    Ok(Exit::Ok)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRow {
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "X")]
    pub x: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "E")]
    pub e: usize,
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub q: u64,
    pub theta: usize,
    pub seed: u64,
    pub strategy: String,
    pub eaves_up: String,
    pub eaves_down: String,
    pub byzantine: String,
    pub unresponsive: String,
    pub over_threat: String,
    pub trials: u64,
    pub failures: u64,
    pub message_dits: usize,
    pub measured_rate_num: u64,
    pub measured_rate_den: u64,
    pub theorem_rate_num: u64,
    pub theorem_rate_den: u64,
    /// `servers:count` pairs joined by `;`, servers joined by `+`.
    pub accepted_byzantine_sets: String,
}

pub fn histogram(h: &BTreeMap<Vec<usize>, u64>) -> String {
    h.iter()
        .map(|(set, c)| {
            let s: Vec<String> = set.iter().map(|x| x.to_string()).collect();
            let s = if s.is_empty() { "-".into() } else { s.join("+") };
            format!("{s}:{c}")
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_histogram(s: &str) -> Result<BTreeMap<Vec<usize>, u64>, ConfigError> {
    let bad = || ConfigError(format!("bad histogram {s:?}"));
    let mut h = BTreeMap::new();
    for part in s.split(';').filter(|p| !p.is_empty()) {
        let (set, c) = part.split_once(':').ok_or_else(bad)?;
        let set = if set == "-" {
            Vec::new()
        } else {
            set.split('+').map(|x| x.parse().map_err(|_| bad())).collect::<Result<Vec<usize>, _>>()?
        };
        h.insert(set, c.parse().map_err(|_| bad())?);
    }
    Ok(h)
}

impl SimRow {
    pub fn config(&self) -> Result<RunConfig, ConfigError> {
        let model: Model = self.model.parse().map_err(|e: qspir_core::Error| ConfigError(e.to_string()))?;
        let p = Params::new(model, self.n, self.k, self.x, self.t, self.e, self.u, self.b);
        let strategy: Strategy = self.strategy.parse().map_err(|e: qspir_core::Error| ConfigError(e.to_string()))?;
        Ok(RunConfig {
            theta: self.theta,
            seed: self.seed,
            trials: self.trials,
            strategies: vec![strategy],
            eaves_up: self.eaves_up.parse()?,
            eaves_down: self.eaves_down.parse()?,
            byzantine: self.byzantine.parse()?,
            unresponsive: self.unresponsive.parse()?,
            over_threat: match self.over_threat.as_str() {
                "none" => None,
                v => Some(v.parse().map_err(|_| ConfigError(format!("bad over-threat {v:?}")))?),
            },
            ..point_config(&p, self.q)
        })
    }

    pub fn histogram(&self) -> Result<BTreeMap<Vec<usize>, u64>, ConfigError> {
        parse_histogram(&self.accepted_byzantine_sets)
    }

    pub fn measured_rate(&self) -> Rational {
        Rational::new(self.measured_rate_num, self.measured_rate_den)
    }
}

/// Strategies that apply to the model; a model without Byzantine servers runs once.
fn strategies(cfg: &RunConfig, p: &Params) -> Vec<Strategy> {
    if p.model.byzantine() && (p.b > 0 || cfg.over_threat.is_some()) {
        cfg.strategies.clone()
    } else {
        vec![Strategy::HonestZero]
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<SimRow>, CliError> {
    let p = cfg.params()?;
    let scheme = Scheme::new(SchemeConfig {
        params: p,
        q: cfg.q,
        theta: cfg.theta,
        seed: cfg.seed,
    })?;
    let placement = cfg.placement();
    let mut rows = Vec::new();
    for strategy in strategies(cfg, &p) {
        let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(&scheme, strategy, &placement, t))
            .collect::<Result<_, _>>()?;
        let s = BatchSummary::from_outcomes(&scheme, &outcomes);
        let measured = if s.trials == 0 { scheme.plan.rate } else { s.measured_rate };
        rows.push(SimRow {
            model: p.model.name().into(),
            n: p.n,
            k: p.k,
            x: p.x,
            t: p.t,
            e: p.e,
            u: p.u,
            b: p.b,
            q: cfg.q,
            theta: cfg.theta,
            seed: cfg.seed,
            strategy: strategy.name().into(),
            eaves_up: cfg.eaves_up.to_string(),
            eaves_down: cfg.eaves_down.to_string(),
            byzantine: cfg.byzantine.to_string(),
            unresponsive: cfg.unresponsive.to_string(),
            over_threat: cfg.over_threat.map_or("none".into(), |v| v.to_string()),
            trials: s.trials,
            failures: s.failures,
            message_dits: s.message_dits,
            measured_rate_num: measured.num,
            measured_rate_den: measured.den,
            theorem_rate_num: scheme.plan.rate.num,
            theorem_rate_den: scheme.plan.rate.den,
            accepted_byzantine_sets: histogram(&s.accepted),
        });
    }
    Ok(rows)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Exit, CliError> {
    let rows = simulate(cfg)?;
    emit(cfg, &to_csv(&rows)?)?;
    let failed: u64 = rows.iter().map(|r| r.failures).sum();
    if failed > 0 {
        eprintln!("{failed} decode failures");
        return Ok(Exit::Failure);
    }
    Ok(Exit::Ok)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub lemma: String,
    pub verdict: String,
    pub method: String,
    pub states: String,
    pub wall_ms: u64,
    pub detail: String,
}

impl AuditRow {
    fn new(r: &AuditReport, ms: u64) -> Self {
        AuditRow {
            lemma: r.lemma.into(),
            verdict: r.verdict.name().into(),
            method: r.method.name().into(),
            states: r.states.to_string(),
            wall_ms: ms,
            detail: r.detail.clone(),
        }
    }
}

pub fn audit_reports(cfg: &RunConfig) -> Result<Vec<(AuditReport, u64)>, CliError> {
    let budget = cfg.audit_budget();
    let point = if cfg.explicit_params { Some(cfg.params()?) } else { None };
    let mut out = Vec::new();
    for lemma in Lemma::ALL {
        let start = Instant::now();
        let r = match &point {
            Some(p) => audit::params_audit(lemma, p, cfg.q, &budget, cfg.seed)?,
            None => audit::micro_audit(lemma, &budget, cfg.mutants.get(lemma))?,
        };
        out.push((r, start.elapsed().as_millis() as u64));
    }
    Ok(out)
}

/// Any verdict other than pass is a failure: an audit over budget established nothing.
pub fn cmd_audit(cfg: &RunConfig) -> Result<Exit, CliError> {
    let reports = audit_reports(cfg)?;
    let rows: Vec<AuditRow> = reports.iter().map(|(r, ms)| AuditRow::new(r, *ms)).collect();
    emit(cfg, &to_csv(&rows)?)?;
    if reports.iter().all(|(r, _)| r.verdict == Verdict::Pass) {
        Ok(Exit::Ok)
    } else {
        Ok(Exit::Failure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        pass,
        detail,
    }
}

const SELFTEST_CONFIGS: [(Model, usize, usize, usize, usize, usize, usize); 4] = [
    (Model::Xeutspir, 8, 3, 2, 1, 1, 0),
    (Model::XbeutspirStatic, 12, 2, 2, 1, 1, 1),
    (Model::XbeutspirDynamic, 12, 2, 1, 0, 1, 2),
    (Model::XbeutspirDynamic, 17, 5, 4, 0, 0, 2),
];

/// Quick end-to-end checks: rate anchors, seeded rounds, mask exposure, micro audits and their mutants.
pub fn selftest(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let a = theorem_rate(&Params::new(Model::Xeutspir, 8, 2, 3, 2, 1, 1, 0)).rate;
    let b = theorem_rate(&Params::new(Model::XbeutspirDynamic, 17, 2, 5, 4, 0, 0, 2)).rate;
    out.push(check(
        "rate-anchors",
        a == Rational::new(1, 2) && b == Rational::new(4, 17),
        format!("{a} {b}"),
    ));
    for (model, n, x, t, e, u, bz) in SELFTEST_CONFIGS {
        let mut c = point_config(&Params::new(model, n, 2, x, t, e, u, bz), 257);
        c.trials = 20;
        c.seed = cfg.seed;
        let rows = simulate(&c)?;
        let pass = rows
            .iter()
            .all(|r| r.failures == 0 && r.measured_rate_num == r.theorem_rate_num && r.measured_rate_den == r.theorem_rate_den);
        let name = format!("simulate-{}-N{}", model.name(), n);
        out.push(check(&name, pass, format!("{} strategies", rows.len())));
    }
    let p = Params::new(Model::XbeutspirDynamic, 17, 2, 5, 4, 0, 0, 2);
    let (r, e) = audit::audit_masking_vs_user(&audit::UserMaskAudit::for_params(&p, 257)?, &cfg.audit_budget())?;
    out.push(check(
        "mask-exposure-N17",
        r.passed() && e.l == [vec![], vec![9]] && e.h == [vec![1, 2], vec![1, 2]],
        format!("{:?} {:?}", e.l, e.h),
    ));
    let budget = cfg.audit_budget();
    for lemma in Lemma::ALL {
        let clean = audit::micro_audit(lemma, &budget, false)?;
        let broken = audit::micro_audit(lemma, &budget, true)?;
        out.push(check(
            lemma.name(),
            clean.verdict == Verdict::Pass && broken.verdict == Verdict::Fail,
            format!("clean {} mutant {}", clean.verdict.name(), broken.verdict.name()),
        ));
    }
    Ok(out)
}

pub fn cmd_selftest(cfg: &RunConfig) -> Result<Exit, CliError> {
    let checks = selftest(cfg)?;
    let mut text = String::new();
    for c in &checks {
        text.push_str(&format!("{} {} {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    emit(cfg, text.as_bytes())?;
    Ok(if checks.iter().all(|c| c.pass) { Exit::Ok } else { Exit::Failure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SetSpec;

    #[test]
    fn histogram_round_trip() {
        let mut h = BTreeMap::new();
        h.insert(vec![0, 3], 12);
        h.insert(vec![], 2);
        h.insert(vec![5], 1);
        let s = histogram(&h);
        assert_eq!(s, "-:2;0+3:12;5:1");
        assert_eq!(parse_histogram(&s).unwrap(), h);
        assert_eq!(parse_histogram("").unwrap(), BTreeMap::new());
        assert!(parse_histogram("1+x:3").is_err());
    }

    #[test]
    fn rate_point_matches_theorem() {
        let mut c = point_config(&Params::new(Model::Xeutspir, 8, 2, 3, 2, 1, 1, 0), 257);
        c.q = 257;
        let rows = rates(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].rate_num, rows[0].rate_den, rows[0].regime.as_str()), (1, 2, "1"));
    }

    #[test]
    fn grid_row_count() {
        let c = RunConfig {
            models: Model::ALL.to_vec(),
            n: Span { lo: 4, hi: 8 },
            b: Span { lo: 0, hi: 1 },
            ..Default::default()
        };
        // b > 0 is skipped for the model without Byzantine servers
        assert_eq!(rates(&c).unwrap().len(), 5 * (1 + 2 + 2));
    }

    #[test]
    fn rows_round_trip() {
        let c = RunConfig {
            models: Model::ALL.to_vec(),
            n: Span { lo: 5, hi: 9 },
            e: Span { lo: 0, hi: 1 },
            b: Span { lo: 0, hi: 1 },
            ..Default::default()
        };
        let rows = rates(&c).unwrap();
        let back: Vec<RateRow> = from_csv(&to_csv(&rows).unwrap()).unwrap();
        assert_eq!(back, rows);
        for r in &back {
            assert_eq!(&rates(&r.config().unwrap()).unwrap()[0], r);
        }
    }

    #[test]
    fn simulate_round_trip() {
        let mut c = point_config(&Params::new(Model::XbeutspirStatic, 12, 2, 2, 1, 1, 1, 1), 257);
        c.trials = 6;
        c.seed = 9;
        let rows = simulate(&c).unwrap();
        assert_eq!(rows.len(), Strategy::ALL.len());
        let back: Vec<SimRow> = from_csv(&to_csv(&rows).unwrap()).unwrap();
        assert_eq!(back, rows);
        for r in &back {
            assert_eq!(&simulate(&r.config().unwrap()).unwrap()[0], r);
            assert_eq!(r.histogram().unwrap().values().sum::<u64>(), 6);
        }
    }

    #[test]
    fn honest_simulation_has_no_failures() {
        let mut c = point_config(&Params::new(Model::Xeutspir, 8, 2, 3, 2, 1, 1, 0), 257);
        c.trials = 10;
        let rows = simulate(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].failures, 0);
        assert_eq!(rows[0].measured_rate(), Rational::new(1, 2));
    }

    #[test]
    fn over_threat_reports_failures() {
        let mut c = point_config(&Params::new(Model::XbeutspirDynamic, 12, 2, 2, 1, 0, 1, 1), 257);
        c.trials = 20;
        c.strategies = vec![Strategy::AdditiveRandom];
        c.over_threat = Some(3);
        let out = RunConfig {
            out: Some(std::env::temp_dir().join("qspir-over-threat.csv")),
            ..c.clone()
        };
        assert_eq!(cmd_simulate(&out).unwrap(), Exit::Failure);
        let rows = simulate(&c).unwrap();
        assert!(rows[0].failures > 0);
        assert!(rows[0].measured_rate() < Rational::new(rows[0].theorem_rate_num, rows[0].theorem_rate_den));
    }

    #[test]
    fn invalid_sets_are_usage_errors() {
        let mut c = point_config(&Params::new(Model::XbeutspirStatic, 12, 2, 2, 1, 1, 1, 1), 257);
        c.trials = 2;
        c.byzantine = SetSpec::Fixed(vec![1, 2]);
        assert!(matches!(simulate(&c), Err(CliError::Usage(_))));
    }
}
