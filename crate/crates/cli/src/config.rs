//! Run configuration: a JSON file, flag overrides, and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use mbl_core::Tolerances;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("empty report {0}")]
    EmptyReport(String),
    #[error(transparent)]
    Core(#[from] mbl_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Everything that stops a command before it can report counts as a
    /// configuration problem.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Gen,
    Check,
    Certify,
    Lemma1,
    Search,
    Scan,
    Bound,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Every setting optional; used for the config file and for flags alike.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub depth: Option<usize>,
    pub delta: Option<f64>,
    pub max_children: Option<usize>,
    pub split_prob: Option<f64>,
    pub dim: Option<usize>,
    pub p: Option<f64>,
    pub trials: Option<usize>,
    pub samples: Option<usize>,
    pub refine: Option<usize>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub candidate: Option<String>,
    pub target: Option<Vec<f64>>,
    pub corpus: Option<bool>,
    pub tol_scale: Option<f64>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` win.
    pub fn merge(self, over: PartialConfig) -> PartialConfig {
        macro_rules! pick {
            ($($f:ident),*) => { PartialConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(depth, delta, max_children, split_prob, dim, p, trials, samples, refine, seed, input, out, format, candidate, target, corpus, tol_scale)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub depth: usize,
    pub delta: f64,
    pub max_children: usize,
    pub split_prob: f64,
    pub dim: usize,
    pub p: f64,
    pub trials: usize,
    pub samples: usize,
    pub refine: usize,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub format: Format,
    pub candidate: String,
    pub target: Option<Vec<f64>>,
    pub corpus: bool,
    pub tol_scale: f64,
}

impl RunConfig {
    /// Fills defaults and validates. `env_tol` is the raw `MBL_TOL` value; an
    /// explicit `tol_scale` in the file or flags takes precedence over it.
    pub fn resolve(command: Command, c: PartialConfig, env_tol: Option<&str>) -> CliResult<Self> {
        let delta = c.delta.unwrap_or(0.5);
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(CliError::Config(format!("delta = {delta} outside (0, 1/2]")));
        }
        let p = c.p.unwrap_or(2.0);
        if !(p > 1.0 && p <= 2.0) {
            return Err(CliError::Config(format!("p = {p} outside (1, 2]")));
        }
        let tol_scale = match (c.tol_scale, env_tol) {
            (Some(t), _) => t,
            (None, Some(s)) => s.trim().parse().map_err(|_| CliError::Config(format!("MBL_TOL = {s:?} is not a number")))?,
            (None, None) => 1.0,
        };
        if !(tol_scale > 0.0 && tol_scale.is_finite()) {
            return Err(CliError::Config(format!("tolerance scale {tol_scale} must be positive")));
        }
        let split_prob = c.split_prob.unwrap_or(0.7);
        if !(split_prob > 0.0 && split_prob <= 1.0) {
            return Err(CliError::Config(format!("split_prob = {split_prob} outside (0, 1]")));
        }
        let dim = c.dim.unwrap_or(1);
        if dim == 0 {
            return Err(CliError::Config("dim must be at least 1".into()));
        }
        let trials = c.trials.unwrap_or(100);
        let samples = c.samples.unwrap_or(2000);
        if trials == 0 || samples == 0 {
            return Err(CliError::Config("trials and samples must be positive".into()));
        }
        let cfg = RunConfig {
            command,
            depth: c.depth.unwrap_or(3),
            delta,
            max_children: c.max_children.unwrap_or(((1.0 / delta + 1e-9).floor() as usize).min(3)),
            split_prob,
            dim,
            p,
            trials,
            samples,
            refine: c.refine.unwrap_or(4),
            seed: c.seed,
            input: c.input,
            out: c.out.unwrap_or_else(|| PathBuf::from("out")),
            format: c.format.unwrap_or_default(),
            candidate: c.candidate.unwrap_or_else(|| if p == 2.0 { "quadratic" } else { "radial" }.into()),
            target: c.target,
            corpus: c.corpus.unwrap_or(false),
            tol_scale,
        };
        if cfg.needs_seed() && cfg.seed.is_none() {
            return Err(CliError::Config(format!("{:?} is randomized and needs --seed", cfg.command).to_lowercase()));
        }
        if let Some(t) = &cfg.target {
            if t.len() != dim + 3 {
                return Err(CliError::Config(format!("target needs dim + 3 = {} coordinates", dim + 3)));
            }
        }
        Ok(cfg)
    }

    /// The depth-1 dyadic fixture is the only seedless generator.
    pub fn is_haar_fixture(&self) -> bool {
        self.delta == 0.5 && self.depth == 1 && self.dim == 1
    }

    pub fn needs_seed(&self) -> bool {
        match self.command {
            Command::Gen => !self.is_haar_fixture(),
            Command::Certify => self.input.is_none(),
            _ => true,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances::default().scaled(self.tol_scale)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = PartialConfig { depth: Some(4), p: Some(1.5), seed: Some(1), ..Default::default() };
        let flags = PartialConfig { depth: Some(2), ..Default::default() };
        let c = RunConfig::resolve(Command::Check, file.merge(flags), None).unwrap();
        assert_eq!((c.depth, c.p, c.seed), (2, 1.5, Some(1)));
        assert_eq!(c.candidate, "radial");
        assert_eq!(c.max_children, 2);
    }

    #[test]
    fn validation() {
        let ok = PartialConfig { seed: Some(1), ..Default::default() };
        assert!(RunConfig::resolve(Command::Scan, PartialConfig::default(), None).is_err());
        assert!(RunConfig::resolve(Command::Gen, PartialConfig { depth: Some(1), ..Default::default() }, None).is_ok());
        for bad in [
            PartialConfig { p: Some(2.5), ..ok.clone() },
            PartialConfig { p: Some(1.0), ..ok.clone() },
            PartialConfig { delta: Some(0.6), ..ok.clone() },
            PartialConfig { trials: Some(0), ..ok.clone() },
            PartialConfig { target: Some(vec![0.0]), ..ok.clone() },
        ] {
            assert!(RunConfig::resolve(Command::Check, bad, None).is_err());
        }
        assert!(RunConfig::resolve(Command::Check, ok.clone(), Some("abc")).is_err());
        assert_eq!(RunConfig::resolve(Command::Check, ok.clone(), Some("10")).unwrap().tol_scale, 10.0);
        let explicit = PartialConfig { tol_scale: Some(2.0), ..ok };
        assert_eq!(RunConfig::resolve(Command::Check, explicit, Some("10")).unwrap().tol_scale, 2.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<PartialConfig>(r#"{"depht": 3}"#).is_err());
        let c: PartialConfig = serde_json::from_str(r#"{"depth": 3, "format": "json"}"#).unwrap();
        assert_eq!(c.format, Some(Format::Json));
    }
}
