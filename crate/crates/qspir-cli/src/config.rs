//! Run configuration: flat `key = value` files, flag overrides, validation.
//!
//! Keys: `model N K X T E U B q trials seed theta strategy eaves-up eaves-down
//! byzantine unresponsive over-threat fallback out`. Blank lines and lines
//! starting with `#` are ignored. Numeric parameters accept `lo..hi` spans,
//! which only `rates` expands. Server sets are 0-based comma lists or `random`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use qspir_core::audit::{AuditBudget, Fallback, Mutants, DEFAULT_BUDGET};
use qspir_core::params::{Model, Params};
use qspir_core::sim::Placement;
use qspir_core::threat::Strategy;

pub const KEYS: [&str; 21] = [
    "model",
    "N",
    "K",
    "X",
    "T",
    "E",
    "U",
    "B",
    "q",
    "trials",
    "seed",
    "theta",
    "strategy",
    "eaves-up",
    "eaves-down",
    "byzantine",
    "unresponsive",
    "over-threat",
    "fallback",
    "out",
    "budget",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn single(&self) -> Option<usize> {
        (self.lo == self.hi).then_some(self.lo)
    }
}

impl FromStr for Span {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let num = |v: &str| v.trim().parse::<usize>().map_err(|_| ConfigError(format!("bad number {v:?}")));
        match s.split_once("..") {
            Some((a, b)) => {
                let (lo, hi) = (num(a)?, num(b)?);
                if lo > hi {
                    return err(format!("empty span {s}"));
                }
                Ok(Span { lo, hi })
            }
            None => {
                let v = num(s)?;
                Ok(Span { lo: v, hi: v })
            }
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}..{}", self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SetSpec {
    #[default]
    Random,
    Fixed(Vec<usize>),
}

impl SetSpec {
    pub fn fixed(&self) -> Option<Vec<usize>> {
        match self {
            SetSpec::Random => None,
            SetSpec::Fixed(v) => Some(v.clone()),
        }
    }
}

impl FromStr for SetSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let s = s.trim();
        if s == "random" {
            return Ok(SetSpec::Random);
        }
        if s.is_empty() || s == "none" {
            return Ok(SetSpec::Fixed(Vec::new()));
        }
        let mut v = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| ConfigError(format!("bad server index {x:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        v.sort_unstable();
        v.dedup();
        Ok(SetSpec::Fixed(v))
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::Random => f.write_str("random"),
            SetSpec::Fixed(v) if v.is_empty() => f.write_str("none"),
            SetSpec::Fixed(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                f.write_str(&s.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub models: Vec<Model>,
    pub n: Span,
    pub k: Span,
    pub x: Span,
    pub t: Span,
    pub e: Span,
    pub u: Span,
    pub b: Span,
    pub q: u64,
    pub trials: u64,
    pub seed: u64,
    pub theta: usize,
    pub strategies: Vec<Strategy>,
    pub eaves_up: SetSpec,
    pub eaves_down: SetSpec,
    pub byzantine: SetSpec,
    pub unresponsive: SetSpec,
    pub over_threat: Option<usize>,
    pub fallback: Fallback,
    pub budget: u128,
    pub out: Option<PathBuf>,
    pub mutants: Mutants,
    /// Whether any system parameter was given.
    pub explicit_params: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let one = |v| Span { lo: v, hi: v };
        RunConfig {
            models: vec![Model::Xeutspir],
            n: one(8),
            k: one(2),
            x: one(0),
            t: one(0),
            e: one(0),
            u: one(0),
            b: one(0),
            q: 257,
            trials: 100,
            seed: 0,
            theta: 0,
            strategies: Strategy::ALL.to_vec(),
            eaves_up: SetSpec::Random,
            eaves_down: SetSpec::Random,
            byzantine: SetSpec::Random,
            unresponsive: SetSpec::Random,
            over_threat: None,
            fallback: Fallback::RankCertificate,
            budget: DEFAULT_BUDGET,
            out: None,
            mutants: Mutants::default(),
            explicit_params: false,
        }
    }
}

fn parse_list<T: FromStr>(s: &str, all: &[T]) -> Result<Vec<T>, ConfigError>
where
    T: Clone,
    T::Err: fmt::Display,
{
    if s.trim() == "all" {
        return Ok(all.to_vec());
    }
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|e| ConfigError(e.to_string())))
        .collect()
}

/// Parses `key = value` lines.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value", i + 1));
        };
        let k = normalize_key(k.trim())?;
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

fn normalize_key(k: &str) -> Result<String, ConfigError> {
    let k = k.replace('_', "-");
    let k = match k.as_str() {
        "n" => "N".to_string(),
        "k" => "K".to_string(),
        "x" => "X".to_string(),
        "t" => "T".to_string(),
        "e" => "E".to_string(),
        "u" => "U".to_string(),
        "b" => "B".to_string(),
        _ => k,
    };
    if KEYS.contains(&k.as_str()) {
        Ok(k)
    } else {
        err(format!("unknown key {k:?}"))
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        for (k, v) in map {
            let num = |v: &str| v.parse::<u64>().map_err(|_| ConfigError(format!("{k}: bad number {v:?}")));
            match k.as_str() {
                "model" => c.models = parse_list(v, &Model::ALL)?,
                "N" => c.n = v.parse()?,
                "K" => c.k = v.parse()?,
                "X" => c.x = v.parse()?,
                "T" => c.t = v.parse()?,
                "E" => c.e = v.parse()?,
                "U" => c.u = v.parse()?,
                "B" => c.b = v.parse()?,
                "q" => c.q = num(v)?,
                "trials" => c.trials = num(v)?,
                "seed" => c.seed = num(v)?,
                "theta" => c.theta = num(v)? as usize,
                "strategy" => c.strategies = parse_list(v, &Strategy::ALL)?,
                "eaves-up" => c.eaves_up = v.parse()?,
                "eaves-down" => c.eaves_down = v.parse()?,
                "byzantine" => c.byzantine = v.parse()?,
                "unresponsive" => c.unresponsive = v.parse()?,
                "over-threat" => c.over_threat = if v == "none" { None } else { Some(num(v)? as usize) },
                "fallback" => {
                    c.fallback = match v.as_str() {
                        "refuse" => Fallback::Refuse,
                        "certificate" => Fallback::RankCertificate,
                        _ => return err(format!("fallback: expected refuse or certificate, got {v:?}")),
                    }
                }
                "budget" => c.budget = v.parse().map_err(|_| ConfigError(format!("budget: bad number {v:?}")))?,
                "out" => c.out = Some(PathBuf::from(v)),
                _ => return err(format!("unknown key {k:?}")),
            }
            if ["model", "N", "K", "X", "T", "E", "U", "B"].contains(&k.as_str()) {
                c.explicit_params = true;
            }
        }
        Ok(c)
    }

    /// Inverse of `from_map` for everything except the mutant flags.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let names: Vec<&str> = self.models.iter().map(|x| x.name()).collect();
        m.insert("model".into(), names.join(","));
        for (k, s) in [("N", self.n), ("K", self.k), ("X", self.x), ("T", self.t), ("E", self.e), ("U", self.u), ("B", self.b)] {
            m.insert(k.into(), s.to_string());
        }
        m.insert("q".into(), self.q.to_string());
        m.insert("trials".into(), self.trials.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("theta".into(), self.theta.to_string());
        let st: Vec<&str> = self.strategies.iter().map(|x| x.name()).collect();
        m.insert("strategy".into(), st.join(","));
        m.insert("eaves-up".into(), self.eaves_up.to_string());
        m.insert("eaves-down".into(), self.eaves_down.to_string());
        m.insert("byzantine".into(), self.byzantine.to_string());
        m.insert("unresponsive".into(), self.unresponsive.to_string());
        m.insert(
            "over-threat".into(),
            self.over_threat.map_or("none".into(), |v| v.to_string()),
        );
        m.insert(
            "fallback".into(),
            match self.fallback {
                Fallback::Refuse => "refuse",
                Fallback::RankCertificate => "certificate",
            }
            .into(),
        );
        m.insert("budget".into(), self.budget.to_string());
        if let Some(o) = &self.out {
            m.insert("out".into(), o.display().to_string());
        }
        m
    }

    pub fn to_kv(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// The single parameter point, for commands that do not sweep.
    pub fn params(&self) -> Result<Params, ConfigError> {
        let single = |name: &str, s: Span| s.single().ok_or_else(|| ConfigError(format!("{name} must be a single value")));
        let [model] = self.models[..] else {
            return err("exactly one model required");
        };
        let p = Params::new(
            model,
            single("N", self.n)?,
            single("K", self.k)?,
            single("X", self.x)?,
            single("T", self.t)?,
            single("E", self.e)?,
            single("U", self.u)?,
            single("B", self.b)?,
        );
        p.validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.theta >= p.k {
            return err(format!("theta {} out of range for K = {}", self.theta, p.k));
        }
        Ok(p)
    }

    pub fn placement(&self) -> Placement {
        Placement {
            eaves_up: self.eaves_up.fixed(),
            eaves_down: self.eaves_down.fixed(),
            byzantine: self.byzantine.fixed(),
            unresponsive: self.unresponsive.fixed(),
            over_threat: self.over_threat,
        }
    }

    pub fn audit_budget(&self) -> AuditBudget {
        AuditBudget {
            max_states: self.budget,
            fallback: self.fallback,
        }
    }
}
