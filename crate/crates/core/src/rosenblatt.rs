//! Standardized Rosenblatt variables, their composites and the non-Gaussian
//! limit law of the long-memory sojourn functional.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::asymptotics::v_lrd;
use crate::chaos::alpha_closed;
use crate::error::{domain, Error, Result};
use crate::field::PowerSpectrum;
use crate::seeding::substream;
use crate::temporal::{StationarySampler, TemporalCovariance, TimeGrid};

/// Default horizon of the time-domain construction.
pub const DEFAULT_HORIZON: f64 = 2048.0;
/// Default step of the time-domain construction.
pub const DEFAULT_STEP: f64 = 0.25;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 0.5 {
        Ok(())
    } else {
        Err(domain(format!("Rosenblatt parameter {beta} outside (0, 1/2)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RosenblattParams {
    pub beta: f64,
    /// `σ(β) = √((1-2β)(1-β)/2)`.
    pub sigma: f64,
    /// `a(β) = σ(β) / (2Γ(β) sin((1-β)π/2))`.
    pub a: f64,
}

impl RosenblattParams {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let sigma = (0.5 * (1.0 - 2.0 * beta) * (1.0 - beta)).sqrt();
        let a = sigma / (2.0 * gamma(beta) * ((1.0 - beta) * PI / 2.0).sin());
        Ok(Self { beta, sigma, a })
    }

    /// `j`-th cumulant `2^{j-1} (j-1)! σ^j a_j` given the cyclic integral `a_j`.
    pub fn cumulant(&self, j: u32, a_j: f64) -> f64 {
        let fact: f64 = (1..j).map(f64::from).product();
        2f64.powi(j as i32 - 1) * fact * self.sigma.powi(j as i32) * a_j
    }
}

/// `a_2 = ∫∫_{[0,1]²} |x - y|^{-2β} = 1/((1-2β)(1-β))`.
pub fn a2_exact(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(1.0 / ((1.0 - 2.0 * beta) * (1.0 - beta)))
}

/// Monte Carlo of `a_j = ∫_{[0,1]^j} |x_1-x_2|^{-β} ⋯ |x_{j-1}-x_j|^{-β} |x_j-x_1|^{-β}`.
///
/// The chain `x_{i+1} | x_i` is drawn with density `∝ |y - x_i|^{-β}`, which
/// absorbs every singular factor except the closing one; the remaining weight
/// has finite variance for β < 1/2. Returns `(estimate, standard error)`.
pub fn a_j_integral<R: Rng + ?Sized>(j: u32, beta: f64, n_samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    check_beta(beta)?;
    if j < 2 || n_samples < 2 {
        return Err(domain("a_j needs j >= 2 and at least two samples"));
    }
    let e = 1.0 - beta;
    let z = |x: f64| (x.powf(e) + (1.0 - x).powf(e)) / e;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n_samples {
        let x1: f64 = rng.random();
        let mut x = x1;
        let mut w = 1.0;
        for _ in 1..j {
            w *= z(x);
            let (right, left) = ((1.0 - x).powf(e), x.powf(e));
            let go_right = rng.random::<f64>() * (right + left) < right;
            let span = if go_right { 1.0 - x } else { x };
            let v: f64 = rng.random();
            let d = span * v.powf(1.0 / e);
            x = if go_right { x + d } else { x - d };
        }
        w *= (x - x1).abs().powf(-beta);
        s1 += w;
        s2 += w * w;
    }
    let n = n_samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Draws `∫_0^{T_R} H_2(ξ(t)) dt`, standardized, for a unit-variance
/// stationary Gaussian `ξ` with covariance `(1+|τ|)^{-β}`.
///
/// The normalizer is the exact variance of the trapezoid sum on the grid,
/// `2 Σ_ab w_a w_b g(t_a - t_b)²`, so every draw has mean 0 and variance 1
/// whatever the horizon.
#[derive(Debug)]
pub struct RosenblattSampler {
    params: RosenblattParams,
    grid: TimeGrid,
    weights: Vec<f64>,
    normalizer: f64,
    paths: StationarySampler,
}

impl RosenblattSampler {
    pub fn new(beta: f64, horizon: f64, dt: f64) -> Result<Self> {
        let params = RosenblattParams::new(beta)?;
        let grid = TimeGrid::with_step(horizon, dt)?;
        let cov = TemporalCovariance::new(1.0, beta)?;
        let paths = StationarySampler::new(&cov, &grid)?;
        let weights = grid.trapezoid_weights();
        let step = grid.dt();
        let lag_sq: Vec<f64> = (0..grid.m).map(|l| cov.eval(l as f64 * step).powi(2)).collect();
        let mut var = 0.0;
        for (a, &wa) in weights.iter().enumerate() {
            let mut inner = 0.0;
            for (b, &wb) in weights.iter().enumerate() {
                inner += wb * lag_sq[a.abs_diff(b)];
            }
            var += wa * inner;
        }
        Ok(Self { params, grid, weights, normalizer: (2.0 * var).sqrt(), paths })
    }

    pub fn with_defaults(beta: f64) -> Result<Self> {
        Self::new(beta, DEFAULT_HORIZON, DEFAULT_STEP)
    }

    pub fn params(&self) -> &RosenblattParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn functional(&self, path: &[f64]) -> f64 {
        path.iter().zip(&self.weights).map(|(x, w)| w * (x * x - 1.0)).sum::<f64>() / self.normalizer
    }

    /// `n` draws; pair `i` of draws comes from substream `i` of `seed`, so the
    /// output does not depend on the number of worker threads.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Vec<f64> {
        let m = self.grid.m;
        let pairs = n.div_ceil(2);
        let drawn: Vec<[f64; 2]> = (0..pairs)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, i as u64);
                let mut buf = vec![0.0; 2 * m];
                self.paths.fill(&mut rng, &mut buf);
                [self.functional(&buf[..m]), self.functional(&buf[m..])]
            })
            .collect();
        drawn.into_iter().flatten().take(n).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        self.sample_seeded(n, rng.next_u64())
    }
}

/// `V = Σ_i c_i X_i` with independent standardized Rosenblatt `X_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeSpec {
    pub coefficients: Vec<f64>,
    pub beta: f64,
}

impl CompositeSpec {
    pub fn new(coefficients: Vec<f64>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if coefficients.is_empty() {
            return Err(domain("composite needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| *c == 0.0 || !c.is_finite()) {
            return Err(domain("composite coefficients must be finite and nonzero"));
        }
        Ok(Self { coefficients, beta })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    pub fn variance(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }
}

pub fn sample_composite<R: Rng + ?Sized>(
    spec: &CompositeSpec,
    sampler: &RosenblattSampler,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if sampler.params().beta != spec.beta {
        return Err(domain("sampler and composite use different β"));
    }
    let draws = sampler.sample(n * spec.degree(), rng);
    Ok(draws.chunks(spec.degree()).map(|x| x.iter().zip(&spec.coefficients).map(|(x, c)| x * c).sum()).collect())
}

/// Composite limit of the standardized long-memory functional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitLaw {
    /// Rescaled to unit variance.
    pub composite: CompositeSpec,
    /// `Σ c_i²` before rescaling.
    pub pre_rescale_variance: f64,
}

/// Coefficients `(α_{2,0,...,0}(u)/2) C_l(0) / (a(β*) √v)`, one per
/// eigenfunction of each `l ∈ I*` and per replica, rescaled to unit variance.
pub fn limit_law(spectrum: &PowerSpectrum, k: u32, u: f64) -> Result<LimitLaw> {
    let b = spectrum.beta_star();
    if 2.0 * b >= 1.0 {
        return Err(Error::Regime(format!("2β* = {} is not below 1", 2.0 * b)));
    }
    let params = RosenblattParams::new(b)?;
    let v = v_lrd(spectrum, k, u)?;
    let mut idx = vec![0u32; k as usize];
    idx[0] = 1;
    let alpha = alpha_closed(k, &idx, u)?;
    let space = spectrum.space();
    let mut coefficients = Vec::new();
    for _ in 0..k {
        for e in spectrum.entries().iter().filter(|e| e.beta == b) {
            let c = 0.5 * alpha * e.c0 / (params.a * v.sqrt());
            let dim = space.dim_eigenspace(e.degree)? as usize;
            coefficients.extend(std::iter::repeat_n(c, dim));
        }
    }
    let pre = coefficients.iter().map(|c| c * c).sum::<f64>();
    let scale = pre.sqrt();
    coefficients.iter_mut().for_each(|c| *c /= scale);
    Ok(LimitLaw { composite: CompositeSpec::new(coefficients, b)?, pre_rescale_variance: pre })
}

pub fn limit_law_sample<R: Rng + ?Sized>(
    spectrum: &PowerSpectrum,
    k: u32,
    u: f64,
    sampler: &RosenblattSampler,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let law = limit_law(spectrum, k, u)?;
    sample_composite(&law.composite, sampler, n, rng)
}
