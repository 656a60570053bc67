use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PowerSpectrum, SpectrumEntry};
use crate::manifold::{Family, ManifoldSpec};
use crate::rosenblatt::{DEFAULT_HORIZON, DEFAULT_STEP};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SOJOURN_OUTPUT_DIR";

/// Smallest replication count accepted by the distribution studies.
pub const MIN_DISTRIBUTION_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    VarianceScaling,
    DistributionSrd,
    DistributionLrd,
    CoefficientAudit,
    AsymptoteAudit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub family: Family,
    pub d: u32,
}

/// Pass thresholds of the acceptance gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gates {
    /// Allowed `|fitted - predicted|` log-log slope.
    pub slope_tolerance: f64,
    pub p_threshold: f64,
    /// Relative tolerance on `Var/T^order` at the largest horizon; no gate when absent.
    pub constant_tolerance: Option<f64>,
    /// Relative tolerance of the asymptote audit; no gate when absent.
    pub asymptote_tolerance: Option<f64>,
    /// Attempts of a distribution test that must pass.
    pub min_passes: u32,
    /// Standard errors allowed between an estimator and the closed form.
    pub audit_sigmas: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            slope_tolerance: 0.15,
            p_threshold: 0.01,
            constant_tolerance: None,
            asymptote_tolerance: None,
            min_passes: 2,
            audit_sigmas: 4.0,
        }
    }
}

/// Time-domain construction of the Rosenblatt draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RosenblattOptions {
    pub horizon: f64,
    pub dt: f64,
}

impl Default for RosenblattOptions {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON, dt: DEFAULT_STEP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub spectrum: Vec<SpectrumEntry>,
    pub k: u32,
    pub thresholds: Vec<f64>,
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub n_points: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub study: Study,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub q_max: Option<u32>,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub rosenblatt: RosenblattOptions,
    /// Seeded attempts of each distribution test.
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_retries() -> u32 {
    3
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn manifold(&self) -> Result<ManifoldSpec> {
        ManifoldSpec::new(self.space.family, self.space.d)
    }

    pub fn power_spectrum(&self) -> Result<PowerSpectrum> {
        PowerSpectrum::new(self.manifold()?, self.spectrum.clone())
    }

    /// `output_dir`, unless overridden by the environment.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.power_spectrum().map_err(|e| invalid(format!("spectrum: {e}")))?;
        if self.k == 0 || self.k > crate::chaos::MAX_COMPONENTS {
            return Err(invalid(format!("k = {} outside 1..={}", self.k, crate::chaos::MAX_COMPONENTS)));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
            return Err(invalid("thresholds must be a nonempty list of positive numbers"));
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(invalid("horizons must be a nonempty list of positive numbers"));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("horizons must be strictly increasing"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt must be positive"));
        }
        if self.n_points == 0 {
            return Err(invalid("n_points must be positive"));
        }
        if self.replications < 2 {
            return Err(invalid("need at least two replications"));
        }
        if let Some(0) = self.q_max {
            return Err(invalid("q_max must be at least 1"));
        }
        let g = &self.gates;
        if !(g.p_threshold > 0.0 && g.p_threshold < 1.0) || g.slope_tolerance < 0.0 || g.audit_sigmas <= 0.0 {
            return Err(invalid("gate thresholds out of range"));
        }
        if !(self.rosenblatt.horizon > 0.0 && self.rosenblatt.dt > 0.0) {
            return Err(invalid("rosenblatt horizon and dt must be positive"));
        }
        match self.study {
            Study::DistributionSrd | Study::DistributionLrd => {
                if self.replications < MIN_DISTRIBUTION_REPLICATIONS {
                    return Err(invalid(format!(
                        "distribution studies need at least {MIN_DISTRIBUTION_REPLICATIONS} replications"
                    )));
                }
                if self.retries == 0 || g.min_passes == 0 || g.min_passes > self.retries {
                    return Err(invalid("need 1 <= min_passes <= retries"));
                }
            }
            Study::VarianceScaling if self.horizons.len() < 3 => {
                return Err(invalid("variance scaling needs at least three horizons"));
            }
            _ => {}
        }
        Ok(())
    }
}
