//! Config-driven Monte Carlo studies of the sojourn functional, their
//! statistics and their on-disk reports.

mod config;
mod output;
mod stats;
mod studies;
mod svg;

pub use config::{
    ExperimentConfig, Gates, RosenblattOptions, SpaceConfig, Study, MIN_DISTRIBUTION_REPLICATIONS, OUTPUT_DIR_ENV,
};
pub use output::{format_float, load_result, write_outputs, DISTRIBUTION_HEADER, VARIANCE_HEADER};
pub use stats::{
    correlation, fit_loglog_slope, kolmogorov_sf, ks_one_sample, ks_two_sample, moments, KsOutcome, Moments, SlopeFit,
};
pub use studies::{
    asymptote_audit, coefficient_audit, predict, run, run_audit, run_distribution_test, run_variance_scaling,
    PredictionReport, Run,
};

use serde::{Deserialize, Serialize};

use crate::asymptotics::VariancePrediction;
use crate::temporal::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub regime: Regime,
    pub exponent: f64,
    pub log_factor: bool,
    pub constant: f64,
    pub truncation_ratio: Option<f64>,
}

impl From<&VariancePrediction> for Prediction {
    fn from(p: &VariancePrediction) -> Self {
        Self {
            regime: p.regime,
            exponent: p.exponent,
            log_factor: p.log_factor,
            constant: p.constant,
            truncation_ratio: p.truncation_ratio,
        }
    }
}

impl Prediction {
    pub fn order(&self, horizon: f64) -> f64 {
        let base = horizon.powf(self.exponent);
        if self.log_factor {
            base * horizon.ln()
        } else {
            base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub u: f64,
    /// Whole functional.
    pub total: Prediction,
    /// Chaos component of order `2q` for `q = 1, 2, ...`.
    pub chaos: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub u: f64,
    pub horizon: f64,
    pub replications: usize,
    pub mean: f64,
    pub var_estimate: f64,
    pub var_se: f64,
    pub predicted_order: f64,
    pub predicted_constant: f64,
    /// Second-chaos projection of the same replications.
    pub chaos2_var_estimate: f64,
    pub chaos2_var_se: f64,
    pub chaos2_predicted_constant: f64,
    pub chaos2_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub u: f64,
    pub fit: SlopeFit,
    pub predicted_exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    OneSampleNormal,
    TwoSampleLimitLaw,
}

impl TestKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestKind::OneSampleNormal => "one_sample_normal",
            TestKind::TwoSampleLimitLaw => "two_sample_limit_law",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub u: f64,
    pub horizon: f64,
    pub attempt: u32,
    pub test_kind: TestKind,
    pub ks_stat: f64,
    pub p_value: f64,
    pub n: usize,
    /// The test is meant to reject.
    pub expect_reject: bool,
    pub passed: bool,
    pub skewness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub check: String,
    pub k: u32,
    pub index: Vec<u32>,
    pub u: f64,
    pub reference: f64,
    pub estimate: f64,
    pub se: Option<f64>,
    pub tolerance: f64,
    /// A row documenting a known-wrong formula; it passes when the check fails.
    pub expected_failure: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteRow {
    pub degree: u32,
    pub beta: f64,
    pub horizon: f64,
    pub numeric: f64,
    pub asymptotic: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub studies: Vec<Study>,
    pub master_seed: u64,
    pub k: u32,
    pub spectrum_digest: String,
    pub predictions: Vec<PredictionRow>,
    pub variance: Vec<VarianceRow>,
    pub slopes: Vec<SlopeRow>,
    pub distribution: Vec<DistributionRow>,
    pub audit: Vec<AuditRow>,
    pub asymptotes: Vec<AsymptoteRow>,
    pub gates: Vec<Gate>,
}

impl ExperimentResult {
    pub(crate) fn empty(cfg: &ExperimentConfig, digest: String) -> Self {
        Self {
            studies: vec![cfg.study],
            master_seed: cfg.master_seed,
            k: cfg.k,
            spectrum_digest: digest,
            predictions: Vec::new(),
            variance: Vec::new(),
            slopes: Vec::new(),
            distribution: Vec::new(),
            audit: Vec::new(),
            asymptotes: Vec::new(),
            gates: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn failures(&self) -> Vec<&Gate> {
        self.gates.iter().filter(|g| !g.passed).collect()
    }
}
