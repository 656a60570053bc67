use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{ExperimentConfig, Study};
use super::stats::{correlation, fit_loglog_slope, ks_one_sample, ks_two_sample, moments};
use super::{
    AsymptoteRow, AuditRow, DistributionRow, ExperimentResult, Gate, Prediction, PredictionRow, SlopeRow, TestKind,
    VarianceRow,
};
use crate::asymptotics::{chaos_variance_limit, predicted_variance, DEFAULT_Q_MAX};
use crate::chaos::{
    alpha_closed, alpha_mc, alpha_printed_sum, alpha_semianalytic, compositions, parseval_partial, parseval_target,
};
use crate::error::{Error, Result};
use crate::field::{chaos2_projection, sojourn, FieldSimulator, PowerSpectrum};
use crate::manifold::PointSet;
use crate::rosenblatt::{limit_law, sample_composite, RosenblattSampler};
use crate::seeding::substream;
use crate::temporal::{k_asymptote, k_single, TimeGrid};

// labels of the child seeds drawn from the master seed
const POINTS_STREAM: u64 = 0;
const HORIZON_STREAM: u64 = 1;
const FIELD_ATTEMPT_STREAM: u64 = 1_000;
const LIMIT_ATTEMPT_STREAM: u64 = 2_000;
const AUDIT_STREAM: u64 = 3_000;

/// Parseval orders checked per component count.
const PARSEVAL_ORDERS_K1: u32 = 5_000;
const PARSEVAL_ORDERS: u32 = 200;
/// Relative agreement required by the single-component reduction identity.
const REDUCTION_TOL: f64 = 1e-10;
/// Threshold grid for the positivity check of `α_{2,0,...,0}`.
const POSITIVITY_GRID: usize = 200;
const POSITIVITY_U_MAX: f64 = 20.0;

fn child_seed(master: u64, label: u64) -> u64 {
    substream(master, label).next_u64()
}

/// A finished study plus the raw samples used only for plots.
#[derive(Debug, Clone)]
pub struct Run {
    pub result: ExperimentResult,
    /// Standardized functional and, for long memory, limit-law draws.
    pub histogram: Option<(Vec<f64>, Option<Vec<f64>>)>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Run> {
    match cfg.study {
        Study::VarianceScaling => run_variance_scaling(cfg),
        Study::DistributionSrd | Study::DistributionLrd => run_distribution_test(cfg),
        Study::CoefficientAudit => Ok(Run { result: coefficient_audit(cfg)?, histogram: None }),
        Study::AsymptoteAudit => Ok(Run { result: asymptote_audit(cfg)?, histogram: None }),
    }
}

/// Both audits merged into one result.
pub fn run_audit(cfg: &ExperimentConfig) -> Result<Run> {
    let mut result = coefficient_audit(cfg)?;
    let asym = asymptote_audit(cfg)?;
    result.studies = vec![Study::CoefficientAudit, Study::AsymptoteAudit];
    result.predictions = asym.predictions;
    result.asymptotes = asym.asymptotes;
    result.gates.extend(asym.gates);
    Ok(Run { result, histogram: None })
}

fn q_max(cfg: &ExperimentConfig) -> u32 {
    cfg.q_max.unwrap_or(DEFAULT_Q_MAX)
}

fn prediction_row(spectrum: &PowerSpectrum, k: u32, u: f64, q_max: u32) -> Result<PredictionRow> {
    let total = Prediction::from(&predicted_variance(spectrum, k, u, q_max)?);
    let chaos = (1..=q_max)
        .map(|q| chaos_variance_limit(spectrum, k, u, q).map(|p| Prediction::from(&p)))
        .collect::<Result<_>>()?;
    Ok(PredictionRow { u, total, chaos })
}

/// Theory-only output of `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub k: u32,
    pub beta_star: f64,
    pub spectrum_digest: String,
    pub predictions: Vec<PredictionRow>,
    pub horizons: Vec<f64>,
    /// `constant · order(T)` of the whole functional, per threshold then horizon.
    pub predicted_variance: Vec<Vec<f64>>,
}

pub fn predict(cfg: &ExperimentConfig) -> Result<PredictionReport> {
    let spectrum = cfg.power_spectrum()?;
    let predictions = cfg
        .thresholds
        .iter()
        .map(|&u| prediction_row(&spectrum, cfg.k, u, q_max(cfg)))
        .collect::<Result<Vec<_>>>()?;
    let predicted_variance = predictions
        .iter()
        .map(|p| cfg.horizons.iter().map(|&t| p.total.constant * p.total.order(t)).collect())
        .collect();
    Ok(PredictionReport {
        k: cfg.k,
        beta_star: spectrum.beta_star(),
        spectrum_digest: spectrum.digest(),
        predictions,
        horizons: cfg.horizons.clone(),
        predicted_variance,
    })
}

struct Setup {
    spectrum: PowerSpectrum,
    points: Arc<PointSet>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let spectrum = cfg.power_spectrum()?;
    let mut rng = substream(child_seed(cfg.master_seed, POINTS_STREAM), 0);
    let points = Arc::new(spectrum.space().sample_points(cfg.n_points, &mut rng)?);
    Ok(Setup { spectrum, points })
}

/// `(functional, second-chaos projection)` per replication and threshold.
fn replicate(sim: &FieldSimulator, seed: u64, reps: usize, thresholds: &[f64]) -> Result<Vec<Vec<(f64, f64)>>> {
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let sample = sim.simulate(&mut rng);
            thresholds
                .iter()
                .map(|&u| Ok((sojourn(&sample, u)?.value, chaos2_projection(&sample, u)?)))
                .collect()
        })
        .collect()
}

fn column(values: &[Vec<(f64, f64)>], ui: usize, second: bool) -> Vec<f64> {
    values.iter().map(|v| if second { v[ui].1 } else { v[ui].0 }).collect()
}

pub fn run_variance_scaling(cfg: &ExperimentConfig) -> Result<Run> {
    let Setup { spectrum, points } = setup(cfg)?;
    let mut result = ExperimentResult::empty(cfg, spectrum.digest());
    for &u in &cfg.thresholds {
        result.predictions.push(prediction_row(&spectrum, cfg.k, u, q_max(cfg))?);
    }
    let mut by_u: Vec<Vec<VarianceRow>> = vec![Vec::new(); cfg.thresholds.len()];
    for (hi, &horizon) in cfg.horizons.iter().enumerate() {
        let grid = TimeGrid::with_step(horizon, cfg.dt)?;
        let sim = FieldSimulator::new(&spectrum, Arc::clone(&points), grid, cfg.k)?;
        let seed = child_seed(cfg.master_seed, HORIZON_STREAM + hi as u64);
        let values = replicate(&sim, seed, cfg.replications, &cfg.thresholds)?;
        for (ui, &u) in cfg.thresholds.iter().enumerate() {
            let m = column(&values, ui, false);
            let c2 = column(&values, ui, true);
            let (mm, cm) = (moments(&m)?, moments(&c2)?);
            let pred = &result.predictions[ui];
            by_u[ui].push(VarianceRow {
                u,
                horizon,
                replications: cfg.replications,
                mean: mm.mean,
                var_estimate: mm.variance,
                var_se: mm.variance_se,
                predicted_order: pred.total.order(horizon),
                predicted_constant: pred.total.constant,
                chaos2_var_estimate: cm.variance,
                chaos2_var_se: cm.variance_se,
                chaos2_predicted_constant: pred.chaos[0].constant,
                chaos2_correlation: correlation(&m, &c2),
            });
        }
    }
    for (ui, rows) in by_u.iter().enumerate() {
        let u = cfg.thresholds[ui];
        let pred = result.predictions[ui].total;
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.horizon, r.var_estimate)).collect();
        let fit = fit_loglog_slope(&pairs)?;
        let off = (fit.slope - pred.exponent).abs();
        result.gates.push(Gate {
            name: format!("slope u={u}"),
            passed: off <= cfg.gates.slope_tolerance,
            detail: format!(
                "fitted {:.4} [{:.4}, {:.4}], predicted {:.4}, tolerance {}",
                fit.slope, fit.ci95[0], fit.ci95[1], pred.exponent, cfg.gates.slope_tolerance
            ),
        });
        if let (Some(tol), Some(last)) = (cfg.gates.constant_tolerance, rows.last()) {
            let ratio = last.var_estimate / last.predicted_order;
            let rel = (ratio / pred.constant - 1.0).abs();
            result.gates.push(Gate {
                name: format!("constant u={u}"),
                passed: rel <= tol,
                detail: format!("Var/order {ratio:.6e} at T={}, predicted {:.6e}", last.horizon, pred.constant),
            });
        }
        result.slopes.push(SlopeRow { u, fit, predicted_exponent: pred.exponent });
    }
    result.variance = by_u.into_iter().flatten().collect();
    Ok(Run { result, histogram: None })
}

pub fn run_distribution_test(cfg: &ExperimentConfig) -> Result<Run> {
    let long_memory = match cfg.study {
        Study::DistributionSrd => false,
        Study::DistributionLrd => true,
        other => return Err(Error::Config(format!("{other:?} is not a distribution study"))),
    };
    let Setup { spectrum, points } = setup(cfg)?;
    if long_memory != (2.0 * spectrum.beta_star() < 1.0) {
        return Err(Error::Regime(format!(
            "{:?} does not match β* = {}",
            cfg.study,
            spectrum.beta_star()
        )));
    }
    let mut result = ExperimentResult::empty(cfg, spectrum.digest());
    for &u in &cfg.thresholds {
        result.predictions.push(prediction_row(&spectrum, cfg.k, u, q_max(cfg))?);
    }
    let horizon = *cfg.horizons.last().expect("validated nonempty");
    let grid = TimeGrid::with_step(horizon, cfg.dt)?;
    let sim = FieldSimulator::new(&spectrum, points, grid, cfg.k)?;
    let rosenblatt = if long_memory {
        Some(RosenblattSampler::new(spectrum.beta_star(), cfg.rosenblatt.horizon, cfg.rosenblatt.dt)?)
    } else {
        None
    };
    let laws = if long_memory {
        cfg.thresholds.iter().map(|&u| limit_law(&spectrum, cfg.k, u).map(Some)).collect::<Result<Vec<_>>>()?
    } else {
        vec![None; cfg.thresholds.len()]
    };
    let normal = Normal::standard();
    let p_thr = cfg.gates.p_threshold;
    let mut passes = vec![0u32; cfg.thresholds.len()];
    let mut histogram = None;
    for attempt in 0..cfg.retries {
        let seed = child_seed(cfg.master_seed, FIELD_ATTEMPT_STREAM + attempt as u64);
        let values = replicate(&sim, seed, cfg.replications, &cfg.thresholds)?;
        for (ui, &u) in cfg.thresholds.iter().enumerate() {
            let m = column(&values, ui, false);
            let sd = moments(&m)?.variance.sqrt();
            let z: Vec<f64> = m.iter().map(|v| v / sd).collect();
            let skew = moments(&z)?.skewness;
            let norm = ks_one_sample(&z, |x| normal.cdf(x))?;
            let norm_ok = if long_memory { norm.p_value < p_thr } else { norm.p_value > p_thr };
            result.distribution.push(DistributionRow {
                u,
                horizon,
                attempt,
                test_kind: TestKind::OneSampleNormal,
                ks_stat: norm.statistic,
                p_value: norm.p_value,
                n: z.len(),
                expect_reject: long_memory,
                passed: norm_ok,
                skewness: skew,
            });
            let mut ok = norm_ok;
            let mut law_draws = None;
            if let (Some(sampler), Some(law)) = (&rosenblatt, &laws[ui]) {
                let mut rng = substream(child_seed(cfg.master_seed, LIMIT_ATTEMPT_STREAM + attempt as u64), ui as u64);
                let draws = sample_composite(&law.composite, sampler, cfg.replications, &mut rng)?;
                let two = ks_two_sample(&z, &draws)?;
                let two_ok = two.p_value > p_thr;
                result.distribution.push(DistributionRow {
                    u,
                    horizon,
                    attempt,
                    test_kind: TestKind::TwoSampleLimitLaw,
                    ks_stat: two.statistic,
                    p_value: two.p_value,
                    n: draws.len(),
                    expect_reject: false,
                    passed: two_ok,
                    skewness: moments(&draws)?.skewness,
                });
                ok &= two_ok;
                law_draws = Some(draws);
            }
            if ok {
                passes[ui] += 1;
            }
            if attempt == 0 && ui == 0 {
                histogram = Some((z, law_draws));
            }
        }
    }
    for (ui, &u) in cfg.thresholds.iter().enumerate() {
        result.gates.push(Gate {
            name: format!("{} u={u}", if long_memory { "limit law" } else { "normality" }),
            passed: passes[ui] >= cfg.gates.min_passes,
            detail: format!("{} of {} attempts passed, {} required", passes[ui], cfg.retries, cfg.gates.min_passes),
        });
    }
    Ok(Run { result, histogram })
}

struct Cell {
    k: u32,
    index: Vec<u32>,
    u: f64,
}

pub fn coefficient_audit(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let digest = cfg.power_spectrum()?.digest();
    let mut result = ExperimentResult::empty(cfg, digest);
    result.studies = vec![Study::CoefficientAudit];
    let sigmas = cfg.gates.audit_sigmas;
    let n = cfg.replications;
    let mut cells = Vec::new();
    for k in 1..=cfg.k {
        for q in 0..=q_max(cfg) {
            for index in compositions(k, q)? {
                for &u in &cfg.thresholds {
                    cells.push(Cell { k, index: index.clone(), u });
                }
            }
        }
    }
    let seed = child_seed(cfg.master_seed, AUDIT_STREAM);
    let mc_rows = cells
        .par_iter()
        .enumerate()
        .map(|(ci, c)| {
            let mut rng = substream(seed, ci as u64);
            let closed = alpha_closed(c.k, &c.index, c.u)?;
            let (est, se) = alpha_mc(c.k, &c.index, c.u, n, &mut rng)?;
            let mut rows = vec![AuditRow {
                check: "closed_vs_mc".into(),
                k: c.k,
                index: c.index.clone(),
                u: c.u,
                reference: closed,
                estimate: est,
                se: Some(se),
                tolerance: sigmas * se,
                expected_failure: false,
                passed: (closed - est).abs() <= sigmas * se,
            }];
            let n1 = c.index[0];
            if c.k >= 2 && n1 >= 1 && c.index[1..].iter().all(|&v| v == 0) {
                let (semi, semi_se) = alpha_semianalytic(c.k, n1, c.u, n, &mut rng)?;
                rows.push(AuditRow {
                    check: "closed_vs_semianalytic".into(),
                    k: c.k,
                    index: c.index.clone(),
                    u: c.u,
                    reference: closed,
                    estimate: semi,
                    se: Some(semi_se),
                    tolerance: sigmas * semi_se,
                    expected_failure: false,
                    passed: (closed - semi).abs() <= sigmas * semi_se,
                });
            }
            if c.index.iter().sum::<u32>() == 1 && n1 == 1 {
                let printed = alpha_printed_sum(c.k, &c.index, c.u, false)?;
                let fails = (printed - est).abs() > sigmas * se;
                rows.push(AuditRow {
                    check: "uncorrected_sign_vs_mc".into(),
                    k: c.k,
                    index: c.index.clone(),
                    u: c.u,
                    reference: printed,
                    estimate: est,
                    se: Some(se),
                    tolerance: sigmas * se,
                    expected_failure: true,
                    passed: fails,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<Vec<AuditRow>>>>()?;
    result.audit.extend(mc_rows.into_iter().flatten());

    if cfg.k >= 1 {
        for &u in &cfg.thresholds {
            for n1 in 0..=10u32 {
                let hermite = alpha_closed(1, &[n1], u)?;
                let sum = alpha_printed_sum(1, &[n1], u, true)?;
                let tol = REDUCTION_TOL * hermite.abs().max(1e-300);
                result.audit.push(AuditRow {
                    check: "single_component_reduction".into(),
                    k: 1,
                    index: vec![n1],
                    u,
                    reference: hermite,
                    estimate: sum,
                    se: None,
                    tolerance: tol,
                    expected_failure: false,
                    passed: (hermite - sum).abs() <= tol,
                });
            }
        }
    }

    for k in 1..=cfg.k {
        let mut index = vec![0u32; k as usize];
        index[0] = 1;
        let mut worst = f64::INFINITY;
        let mut worst_u = 0.0;
        for i in 1..=POSITIVITY_GRID {
            let u = POSITIVITY_U_MAX * i as f64 / POSITIVITY_GRID as f64;
            let a = alpha_closed(k, &index, u)?;
            if a < worst {
                worst = a;
                worst_u = u;
            }
        }
        result.audit.push(AuditRow {
            check: "second_order_positivity".into(),
            k,
            index,
            u: worst_u,
            reference: 0.0,
            estimate: worst,
            se: None,
            tolerance: 0.0,
            expected_failure: false,
            passed: worst > 0.0,
        });
        for &u in &cfg.thresholds {
            let orders = if k == 1 { PARSEVAL_ORDERS_K1 } else { PARSEVAL_ORDERS };
            let sums = parseval_partial(k, u, orders)?;
            let target = parseval_target(k, u)?;
            let last = *sums.last().expect("at least one order");
            let monotone = sums.windows(2).all(|w| w[1] >= w[0]);
            let bounded = last <= target * (1.0 + 1e-12);
            result.audit.push(AuditRow {
                check: format!("parseval_partial_sum_q{orders}"),
                k,
                index: Vec::new(),
                u,
                reference: target,
                estimate: last,
                se: None,
                tolerance: 0.0,
                expected_failure: false,
                passed: monotone && bounded,
            });
        }
    }

    let bad: Vec<&AuditRow> = result.audit.iter().filter(|r| !r.passed).collect();
    result.gates.push(Gate {
        name: "coefficient audit".into(),
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} rows passed", result.audit.len())
        } else {
            bad.iter().map(|r| format!("{} k={} {:?} u={}", r.check, r.k, r.index, r.u)).collect::<Vec<_>>().join("; ")
        },
    });
    Ok(result)
}

pub fn asymptote_audit(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let spectrum = cfg.power_spectrum()?;
    let mut result = ExperimentResult::empty(cfg, spectrum.digest());
    result.studies = vec![Study::AsymptoteAudit];
    for &u in &cfg.thresholds {
        match prediction_row(&spectrum, cfg.k, u, q_max(cfg)) {
            Ok(row) => result.predictions.push(row),
            // the total is undefined on the boundary; the per-degree rows still apply
            Err(Error::Regime(_)) => {}
            Err(e) => return Err(e),
        }
    }
    for e in spectrum.entries() {
        let cov = spectrum.covariance(e);
        let asym = k_asymptote(&[cov.clone(), cov.clone()])?;
        for &horizon in &cfg.horizons {
            let numeric = k_single(&cov, horizon);
            let asymptotic = asym.value(horizon);
            result.asymptotes.push(AsymptoteRow {
                degree: e.degree,
                beta: e.beta,
                horizon,
                numeric,
                asymptotic,
                rel_error: numeric / asymptotic - 1.0,
            });
        }
    }
    if let Some(tol) = cfg.gates.asymptote_tolerance {
        let last = *cfg.horizons.last().expect("validated nonempty");
        for r in result.asymptotes.iter().filter(|r| r.horizon == last) {
            result.gates.push(Gate {
                name: format!("asymptote degree={} beta={}", r.degree, r.beta),
                passed: r.rel_error.abs() <= tol,
                detail: format!("relative error {:.3e} at T={last}, tolerance {tol}", r.rel_error),
            });
        }
    }
    Ok(result)
}
