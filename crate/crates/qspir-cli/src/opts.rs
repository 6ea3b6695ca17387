use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_kv, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "qspir", version, about = "Exact simulator and verifier for symmetric PIR over N-sum boxes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Achievable rates over a parameter grid, as CSV.
    Rates(Common),
    /// Seeded batches of rounds, one CSV row per strategy.
    Simulate(Common),
    /// Exhaustive leakage checks, one line per lemma.
    Audit(AuditOpts),
    /// Quick end-to-end checks.
    Selftest(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// key = value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "N")]
    pub n: Option<String>,
    #[arg(long = "K")]
    pub k: Option<String>,
    #[arg(long = "X")]
    pub x: Option<String>,
    #[arg(long = "T")]
    pub t: Option<String>,
    #[arg(long = "E")]
    pub e: Option<String>,
    #[arg(long = "U")]
    pub u: Option<String>,
    #[arg(long = "B")]
    pub b: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Index of the requested message, 0-based.
    #[arg(long)]
    pub theta: Option<String>,
    /// Strategy name, comma list or "all".
    #[arg(long)]
    pub strategy: Option<String>,
    /// 0-based server list or "random".
    #[arg(long = "eaves-up")]
    pub eaves_up: Option<String>,
    #[arg(long = "eaves-down")]
    pub eaves_down: Option<String>,
    #[arg(long)]
    pub byzantine: Option<String>,
    #[arg(long)]
    pub unresponsive: Option<String>,
    /// Random Byzantine sets of this size, allowed to exceed B.
    #[arg(long = "over-threat")]
    pub over_threat: Option<String>,
    /// refuse or certificate, when an audit exceeds its budget.
    #[arg(long)]
    pub fallback: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AuditOpts {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "break-storage")]
    pub break_storage: bool,
    #[arg(long = "break-query")]
    pub break_query: bool,
    #[arg(long = "break-byzantine-mask")]
    pub break_byzantine_mask: bool,
    #[arg(long = "break-user-mask")]
    pub break_user_mask: bool,
    #[arg(long = "break-symmetric")]
    pub break_symmetric: bool,
    #[arg(long = "break-eavesdropper")]
    pub break_eavesdropper: bool,
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("model", &self.model),
            ("N", &self.n),
            ("K", &self.k),
            ("X", &self.x),
            ("T", &self.t),
            ("E", &self.e),
            ("U", &self.u),
            ("B", &self.b),
            ("q", &self.q),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("theta", &self.theta),
            ("strategy", &self.strategy),
            ("eaves-up", &self.eaves_up),
            ("eaves-down", &self.eaves_down),
            ("byzantine", &self.byzantine),
            ("unresponsive", &self.unresponsive),
            ("over-threat", &self.over_threat),
            ("fallback", &self.fallback),
            ("out", &self.out),
        ]
    }

    /// File entries, then flags, then the budget from `budget_env`.
    pub fn resolve(&self, budget_env: Option<String>) -> Result<RunConfig, ConfigError> {
        let mut map: BTreeMap<String, String> = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                parse_kv(&text)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in self.flags() {
            if let Some(v) = v {
                map.insert(k.into(), v.clone());
            }
        }
        if let Some(b) = budget_env {
            map.insert("budget".into(), b);
        }
        RunConfig::from_map(&map)
    }
}

impl AuditOpts {
    pub fn resolve(&self, budget_env: Option<String>) -> Result<RunConfig, ConfigError> {
        let mut c = self.common.resolve(budget_env)?;
        c.mutants.storage = self.break_storage;
        c.mutants.query = self.break_query;
        c.mutants.byzantine_mask = self.break_byzantine_mask;
        c.mutants.user_mask = self.break_user_mask;
        c.mutants.symmetric = self.break_symmetric;
        c.mutants.eavesdropper = self.break_eavesdropper;
        if c.explicit_params && c.mutants != Default::default() {
            return Err(ConfigError("mutant flags apply to the micro suite only".into()));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SetSpec;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "model = xbeutspir-static\nN = 12\nB = 1\ntrials = 7\n").unwrap();
        let cli = parse(&["qspir", "simulate", "--config", path.to_str().unwrap(), "--N", "10", "--eaves-up", "2"]);
        let Command::Simulate(c) = cli.command else { panic!() };
        let cfg = c.resolve(None).unwrap();
        assert_eq!(cfg.n.single(), Some(10));
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.eaves_up, SetSpec::Fixed(vec![2]));
    }

    #[test]
    fn budget_from_env_and_mutants() {
        let cli = parse(&["qspir", "audit", "--break-query"]);
        let Command::Audit(a) = cli.command else { panic!() };
        let cfg = a.resolve(Some("1234".into())).unwrap();
        assert_eq!(cfg.budget, 1234);
        assert!(cfg.mutants.query && !cfg.mutants.storage);
        assert!(a.resolve(Some("lots".into())).is_err());
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(Cli::try_parse_from(["qspir", "rates", "--colour", "red"]).is_err());
        assert!(Cli::try_parse_from(["qspir", "launch"]).is_err());
    }
}
