//! Experiment configuration: strict JSON schema, whole-document
//! validation, and resolution into concrete simulation inputs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::StrategyKind;
use crate::environment::{generate_instance, path_rng, InstanceSpec, NoiseModel};
use crate::error::{Error, Result};
use crate::market::ValuationProfile;
use crate::output::load_instance;
use crate::sim::{AgentRoster, SimSettings};

/// ChaCha stream reserved for drawing per-agent alphas; simulation paths
/// use streams 0..paths, so they never collide with it.
const ALPHA_STREAM: u64 = u64::MAX;

/// Where the true valuations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum InstanceSource {
    /// Sample an instance from an [`InstanceSpec`].
    Spec { spec: InstanceSpec },
    /// Load a previously saved instance file (replay).
    File { path: PathBuf },
    /// Inline valuations; derived quantities are recomputed.
    Values { buyer_values: Vec<f64>, seller_values: Vec<f64> },
}

/// Per-agent confidence scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AlphaConfig {
    /// One value per agent, drawn uniformly from [min, max] on a
    /// dedicated RNG stream of the master seed (so the draw is fixed
    /// across paths and reproducible).
    Uniform { min: f64, max: f64 },
    /// Explicit per-agent values.
    PerAgent { buyers: Vec<f64>, sellers: Vec<f64> },
}

impl AlphaConfig {
    fn min_alpha(&self) -> f64 {
        match self {
            AlphaConfig::Uniform { min, .. } => *min,
            AlphaConfig::PerAgent { buyers, sellers } => {
                buyers.iter().chain(sellers).copied().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Strategy assignment: a default for everyone plus per-id overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub default: StrategyKind,
    pub buyer_overrides: BTreeMap<usize, StrategyKind>,
    pub seller_overrides: BTreeMap<usize, StrategyKind>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            default: StrategyKind::ConfidenceBound,
            buyer_overrides: BTreeMap::new(),
            seller_overrides: BTreeMap::new(),
        }
    }
}

fn default_horizon() -> u64 {
    10_000
}

fn default_paths() -> usize {
    100
}

fn default_noise() -> NoiseModel {
    NoiseModel::Bernoulli
}

fn default_alphas() -> AlphaConfig {
    AlphaConfig::Uniform { min: 4.0, max: 8.0 }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Full description of one experiment. Serializes losslessly; unknown
/// keys are rejected so every accepted field is meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default = "default_alphas")]
    pub alphas: AlphaConfig,
    #[serde(default)]
    pub strategies: StrategyConfig,
    #[serde(default)]
    pub relaxed_mode: bool,
    /// Cold-start buyer bid; defaults to 1.0 under Bernoulli noise and
    /// is required otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_cap: Option<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Trace decimation stride; defaults to every round for horizons up
    /// to 10^4 and every 10th round beyond.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    /// Accept confidence scales below the protocol floor of 4.
    #[serde(default)]
    pub allow_low_alpha: bool,
}

impl ExperimentConfig {
    pub fn resolved_v_cap(&self) -> Option<f64> {
        self.v_cap.or(match self.noise {
            NoiseModel::Bernoulli => Some(1.0),
            NoiseModel::Gaussian => None,
        })
    }

    pub fn resolved_stride(&self) -> u64 {
        self.stride.unwrap_or_else(|| SimSettings::default_stride(self.horizon))
    }

    /// Structural validation; collects every violation instead of
    /// stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.horizon < 1 {
            errs.push("horizon must be >= 1".to_string());
        }
        if self.paths < 1 {
            errs.push("paths must be >= 1".to_string());
        }
        if self.stride.is_some_and(|s| s < 1) {
            errs.push("stride must be >= 1".to_string());
        }
        match &self.alphas {
            AlphaConfig::Uniform { min, max } => {
                if !(min.is_finite() && max.is_finite() && min <= max) {
                    errs.push("alpha range must be a finite interval with min <= max".to_string());
                }
            }
            AlphaConfig::PerAgent { buyers, sellers } => {
                if buyers.iter().chain(sellers).any(|a| !a.is_finite()) {
                    errs.push("per-agent alphas must be finite".to_string());
                }
                if buyers.is_empty() || sellers.is_empty() {
                    errs.push("per-agent alphas need at least one value per side".to_string());
                }
            }
        }
        if !self.allow_low_alpha && self.alphas.min_alpha() < 4.0 {
            errs.push(
                "alpha below the protocol constraint min{alpha_b, alpha_s} >= 4; \
                 set allow_low_alpha to override"
                    .to_string(),
            );
        }
        match self.resolved_v_cap() {
            None => errs.push(
                "v_cap is required for gaussian noise (no natural valuation cap)".to_string(),
            ),
            Some(v) if !v.is_finite() => errs.push("v_cap must be finite".to_string()),
            _ => {}
        }
        if let InstanceSource::Spec { spec } = &self.instance {
            if let Err(Error::InvalidConfig(inner)) = spec.validate() {
                errs.extend(inner);
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Parses and validates a config document.
pub fn parse_config(document: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(document)
        .map_err(|e| Error::InvalidConfig(vec![format!("malformed config: {e}")]))?;
    config.validate()?;
    Ok(config)
}

/// Concrete simulation inputs derived from a validated config.
pub struct ResolvedExperiment {
    pub profile: ValuationProfile,
    pub roster: AgentRoster,
    pub settings: SimSettings,
    pub paths: usize,
    pub master_seed: u64,
}

/// Materializes the instance, draws or checks alphas, and expands the
/// strategy assignment into a full roster.
pub fn resolve(config: &ExperimentConfig) -> Result<ResolvedExperiment> {
    config.validate()?;
    let profile = match &config.instance {
        InstanceSource::Spec { spec } => generate_instance(spec)?,
        InstanceSource::File { path } => load_instance(path)?,
        InstanceSource::Values { buyer_values, seller_values } => {
            crate::market::oracle_solution(buyer_values, seller_values)?
        }
    };
    let n = profile.n_buyers();
    let m = profile.m_sellers();

    let (buyer_alphas, seller_alphas) = match &config.alphas {
        AlphaConfig::Uniform { min, max } => {
            let mut rng = path_rng(config.master_seed, ALPHA_STREAM);
            let mut draw = |count: usize| -> Vec<f64> {
                (0..count)
                    .map(|_| if min == max { *min } else { rng.random_range(*min..=*max) })
                    .collect()
            };
            (draw(n), draw(m))
        }
        AlphaConfig::PerAgent { buyers, sellers } => {
            if buyers.len() != n || sellers.len() != m {
                return Err(Error::InvalidConfig(vec![format!(
                    "per-agent alphas sized {}x{} but the instance is {n}x{m}",
                    buyers.len(),
                    sellers.len()
                )]));
            }
            (buyers.clone(), sellers.clone())
        }
    };

    let mut errs = Vec::new();
    let expand = |count: usize, overrides: &BTreeMap<usize, StrategyKind>, side: &str, errs: &mut Vec<String>| {
        let mut v = vec![config.strategies.default; count];
        for (&id, kind) in overrides {
            if id < count {
                v[id] = *kind;
            } else {
                errs.push(format!("{side} override id {id} out of range for {count} agents"));
            }
        }
        v
    };
    let buyer_strategies = expand(n, &config.strategies.buyer_overrides, "buyer", &mut errs);
    let seller_strategies = expand(m, &config.strategies.seller_overrides, "seller", &mut errs);
    if !errs.is_empty() {
        return Err(Error::InvalidConfig(errs));
    }

    Ok(ResolvedExperiment {
        profile,
        roster: AgentRoster { buyer_strategies, seller_strategies, buyer_alphas, seller_alphas },
        settings: SimSettings {
            noise: config.noise,
            v_cap: config.resolved_v_cap().expect("checked in validate"),
            relaxed_mode: config.relaxed_mode,
            horizon: config.horizon,
            stride: config.resolved_stride(),
        },
        paths: config.paths,
        master_seed: config.master_seed,
    })
}
