//! Layered run configuration: built-in defaults, then a JSON config file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::markov::AttackerParams;
use crate::optimizer::Objective;
use crate::reward::RewardSpec;
use crate::sim::LambdaMode;

use super::CliError;

/// Options shared by every subcommand. Every field is optional so that a
/// config file can supply it; flags always win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// Attacker hashrate fraction in [0, 0.5)
    #[arg(long)]
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Fraction of honest hashrate mining on the attacker's block in a race
    #[arg(long)]
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Reward cutoff below which a fresh block is withheld ("inf" for always)
    #[arg(long, value_parser = parse_beta)]
    #[serde(default, with = "beta_serde")]
    pub beta: Option<f64>,
    /// Constant reward per block
    #[arg(long)]
    #[serde(default)]
    pub block_reward: Option<f64>,
    /// Fee accrual rate per unit time since the parent block
    #[arg(long)]
    #[serde(default)]
    pub linear_rate: Option<f64>,
    /// Probability of the Bernoulli bonus
    #[arg(long)]
    #[serde(default)]
    pub bernoulli_p: Option<f64>,
    /// Size of the Bernoulli bonus
    #[arg(long)]
    #[serde(default)]
    pub bernoulli_e: Option<f64>,
    /// Components to optimize for: total, or a '+'-joined subset of block, linear, bernoulli
    #[arg(long)]
    #[serde(default)]
    pub objective: Option<String>,
    /// Seed for the simulator
    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,
    /// Block-creation events per simulated replica
    #[arg(long)]
    #[serde(default)]
    pub events: Option<u64>,
    /// Number of independent simulated replicas
    #[arg(long)]
    #[serde(default)]
    pub replicas: Option<u32>,
    /// analytic, self-calibrating, or fixed:<lambda>
    #[arg(long)]
    #[serde(default)]
    pub lambda_mode: Option<String>,
    /// Output format: csv or json
    #[arg(long)]
    #[serde(default)]
    pub format: Option<String>,
    /// Output file (defaults to stdout, or <figure>.<format> for figures)
    #[arg(long)]
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// JSON file with any of the options above, keyed by flag name
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn parse_beta(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number or 'inf'"))?;
    if v.is_nan() {
        return Err("beta must not be NaN".into());
    }
    Ok(v)
}

mod beta_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() => Repr::Text("inf".into()).serialize(s),
            Some(x) => Repr::Num(*x).serialize(s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => super::parse_beta(&t).map(Some).map_err(serde::de::Error::custom),
        }
    }
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl Options {
    /// Reads the config file (if any) and lays the flags over it.
    pub fn resolve(self) -> Result<Options, CliError> {
        let mut base = match &self.config {
            Some(path) => load_config(path)?,
            None => Options::default(),
        };
        overlay!(
            base,
            self,
            alpha,
            gamma,
            beta,
            block_reward,
            linear_rate,
            bernoulli_p,
            bernoulli_e,
            objective,
            seed,
            events,
            replicas,
            lambda_mode,
            format,
            out
        );
        base.config = self.config;
        Ok(base)
    }

    /// The reward spec. Without any reward flag this is the combined reward
    /// with C = 1, a = 1, p = 0.25, E = 4; once any reward flag is given,
    /// the unspecified sources are absent.
    pub fn reward_spec(&self) -> Result<RewardSpec, CliError> {
        let any = self.block_reward.is_some()
            || self.linear_rate.is_some()
            || self.bernoulli_p.is_some()
            || self.bernoulli_e.is_some();
        if !any {
            return Ok(RewardSpec::standard(1.0, 1.0, 0.25, 4.0)?);
        }
        let mut parts = Vec::new();
        if let Some(c) = self.block_reward {
            parts.push(RewardSpec::constant(c)?);
        }
        if let Some(a) = self.linear_rate {
            parts.push(RewardSpec::linear(a)?);
        }
        match (self.bernoulli_p, self.bernoulli_e) {
            (Some(p), Some(e)) => parts.push(RewardSpec::bernoulli(p, e)?),
            (None, None) => {}
            _ => {
                return Err(CliError::Invalid(
                    "--bernoulli-p and --bernoulli-e must be given together".into(),
                ))
            }
        }
        Ok(RewardSpec::composite(parts)?)
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        self.alpha
            .ok_or_else(|| CliError::Invalid("--alpha is required for this command".into()))
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.0)
    }

    pub fn params(&self) -> Result<AttackerParams, CliError> {
        let beta = self
            .beta
            .ok_or_else(|| CliError::Invalid("--beta is required for this command".into()))?;
        Ok(AttackerParams::new(self.alpha()?, self.gamma(), beta)?)
    }

    pub fn objective(&self, default: Objective) -> Result<Objective, CliError> {
        match &self.objective {
            Some(s) => Ok(s.parse()?),
            None => Ok(default),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn events(&self) -> u64 {
        self.events.unwrap_or(1_000_000)
    }

    pub fn replicas(&self) -> u32 {
        self.replicas.unwrap_or(1)
    }

    pub fn lambda_mode(&self) -> Result<LambdaMode, CliError> {
        let raw = self
            .lambda_mode
            .as_deref()
            .unwrap_or("analytic")
            .trim()
            .to_ascii_lowercase();
        match raw.as_str() {
            "analytic" => Ok(LambdaMode::Analytic),
            "self-calibrating" | "self_calibrating" => Ok(LambdaMode::SelfCalibrating),
            other => match other.strip_prefix("fixed:") {
                Some(v) => v
                    .parse()
                    .map(LambdaMode::Fixed)
                    .map_err(|_| CliError::Invalid(format!("bad fixed lambda '{v}'"))),
                None => Err(CliError::Invalid(format!(
                    "unknown lambda mode '{other}' (use analytic, self-calibrating or fixed:<lambda>)"
                ))),
            },
        }
    }

    pub fn format(&self) -> Result<Format, CliError> {
        match self.format.as_deref().unwrap_or("csv").to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Invalid(format!("unknown format '{other}' (use csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
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

fn load_config(path: &Path) -> Result<Options, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("bad config {}: {e}", path.display())))
}
