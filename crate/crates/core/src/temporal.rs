//! Temporal covariances `C_l(τ) = C_l(0) g_β(τ)`, their time integrals and
//! exact Gaussian path sampling on equispaced grids.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{psd_factor, LowRankFactor};

/// Relative tolerance of the adaptive quadratures.
pub const QUAD_REL_TOL: f64 = 1e-8;
/// Beyond this lag infinite integrals switch to the analytic power-law tail.
pub const TAIL_START: f64 = 1e4;
/// Smallest admissible circulant eigenvalue relative to the largest.
pub const CIRCULANT_NEG_TOL: f64 = 1e-10;
/// Relative diagonal jitter of the dense fallback factorization.
pub const DENSE_JITTER: f64 = 1e-10;

/// Memory kernel: `(1+|τ|)^{-β}` for β < 1 (long memory), `(1+|τ|)^{-2}` for β = 1.
pub fn g_beta(tau: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok((1.0 + tau.abs()).powf(-decay_exponent(beta)))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("memory exponent {beta} outside (0, 1]")))
    }
}

/// Power of the algebraic decay of `g_β`.
pub fn decay_exponent(beta: f64) -> f64 {
    if beta >= 1.0 {
        2.0
    } else {
        beta
    }
}

/// Slowly varying factor `G(τ)/G(0)`; must equal 1 at 0 and tend to 1.
pub type Modulation = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct TemporalCovariance {
    pub c0: f64,
    pub beta: f64,
    modulation: Option<Modulation>,
}

impl fmt::Debug for TemporalCovariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TemporalCovariance")
            .field("c0", &self.c0)
            .field("beta", &self.beta)
            .field("modulated", &self.modulation.is_some())
            .finish()
    }
}

impl TemporalCovariance {
    pub fn new(c0: f64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(domain(format!("variance weight {c0} must be positive")));
        }
        Ok(Self { c0, beta, modulation: None })
    }

    pub fn with_modulation(mut self, modulation: Modulation) -> Result<Self> {
        if (modulation(0.0) - 1.0).abs() > 1e-12 {
            return Err(domain("modulation must equal 1 at lag 0"));
        }
        self.modulation = Some(modulation);
        Ok(self)
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let m = self.modulation.as_ref().map_or(1.0, |f| f(tau.abs()));
        self.c0 * m * (1.0 + tau.abs()).powf(-decay_exponent(self.beta))
    }

    pub fn is_long_memory(&self) -> bool {
        self.beta < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub m: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, m: usize) -> Result<Self> {
        if m < 2 || !(horizon > 0.0) {
            return Err(domain(format!("time grid needs m >= 2 and T > 0 (got m={m}, T={horizon})")));
        }
        Ok(Self { horizon, m })
    }

    /// Grid whose step is as close to `dt` as the horizon allows.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(domain("time step must be positive"));
        }
        let steps = (horizon / dt).round().max(1.0) as usize;
        Self::new(horizon, steps + 1)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / (self.m - 1) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt();
        (0..self.m).map(move |a| a as f64 * dt)
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.m];
        w[0] = 0.5 * dt;
        w[self.m - 1] = 0.5 * dt;
        w
    }
}

fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson_step(f, a, fa, m, fm);
    let (rm, frm, right) = simpson_step(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        // Richardson extrapolation of the two Simpson levels
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson on `[a, b]` with relative tolerance `rel_tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson_step(f, a, fa, b, fb);
    // coarse magnitude from a 16-panel pass so the tolerance is relative
    let coarse: f64 = (0..16)
        .map(|i| {
            let x0 = a + (b - a) * i as f64 / 16.0;
            let x1 = a + (b - a) * (i + 1) as f64 / 16.0;
            (x1 - x0) * f(0.5 * (x0 + x1)).abs()
        })
        .sum();
    let tol = rel_tol * coarse.max(whole.abs()) + 1e-300;
    simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// `∫_0^T f` over geometrically growing panels `[0,1], [1,2], [2,4], ...`,
/// which keeps algebraically decaying integrands well resolved.
pub fn integrate_geometric(f: &dyn Fn(f64) -> f64, upper: f64) -> f64 {
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut lo = 0.0;
    let mut hi = 1.0_f64.min(upper);
    while lo < upper {
        let part = adaptive_simpson(f, lo, hi, QUAD_REL_TOL);
        // Kahan summation across panels
        let y = part - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
        lo = hi;
        hi = (2.0 * hi).min(upper);
    }
    total
}

fn product_at(covs: &[TemporalCovariance], tau: f64) -> f64 {
    covs.iter().map(|c| c.eval(tau)).product()
}

/// `∬_{[0,T]²} ∏_i C_i(t - s) dt ds = 2 ∫_0^T (T - τ) ∏_i C_i(τ) dτ`.
pub fn k_integral(covs: &[TemporalCovariance], horizon: f64) -> f64 {
    if horizon <= 0.0 || covs.is_empty() {
        return 0.0;
    }
    let f = |tau: f64| (horizon - tau) * product_at(covs, tau);
    2.0 * integrate_geometric(&f, horizon)
}

/// `K_l(T) = ∬_{[0,T]²} C_l(t - s)² dt ds`.
pub fn k_single(cov: &TemporalCovariance, horizon: f64) -> f64 {
    k_integral(&[cov.clone(), cov.clone()], horizon)
}

/// `∬_{[0,T]²} ∏ C_{l_i}(t - s) dt ds` for an even number (≥ 4) of factors.
pub fn k_multi(covs: &[TemporalCovariance], horizon: f64) -> Result<f64> {
    if covs.len() < 4 || !covs.len().is_multiple_of(2) {
        return Err(domain(format!("expected an even number >= 4 of covariances, got {}", covs.len())));
    }
    Ok(k_integral(covs, horizon))
}

/// `∫_ℝ ∏_i C_i(τ) dτ`, numeric up to [`TAIL_START`] plus the analytic
/// power-law tail. Fails when the product is not integrable.
pub fn line_integral(covs: &[TemporalCovariance]) -> Result<f64> {
    let p: f64 = covs.iter().map(|c| decay_exponent(c.beta)).sum();
    if p <= 1.0 {
        return Err(Error::Regime(format!("∏C decays like τ^-{p}, which is not integrable")));
    }
    let f = |tau: f64| product_at(covs, tau);
    let body = integrate_geometric(&f, TAIL_START);
    let amplitude = product_at(covs, TAIL_START) * (1.0 + TAIL_START).powf(p);
    let tail = amplitude * (1.0 + TAIL_START).powf(1.0 - p) / (p - 1.0);
    Ok(2.0 * (body + tail))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// order `T^{2 - Σβ}`
    LongMemory,
    /// order `T log T`
    Boundary,
    /// order `T`
    ShortMemory,
}

/// Large-`T` behavior `constant · T^exponent (· log T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptote {
    pub regime: Regime,
    pub exponent: f64,
    pub log_factor: bool,
    pub constant: f64,
}

impl Asymptote {
    pub fn order(&self, horizon: f64) -> f64 {
        let base = horizon.powf(self.exponent);
        if self.log_factor {
            base * horizon.ln()
        } else {
            base
        }
    }

    pub fn value(&self, horizon: f64) -> f64 {
        self.constant * self.order(horizon)
    }
}

/// Classifies `Σ β_i` against 1 and returns the leading term of
/// [`k_integral`] for the given factors (pass a covariance twice for `K_l`).
pub fn k_asymptote(covs: &[TemporalCovariance]) -> Result<Asymptote> {
    if covs.is_empty() {
        return Err(domain("no covariances given"));
    }
    let s: f64 = covs.iter().map(|c| c.beta).sum();
    let c0: f64 = covs.iter().map(|c| c.c0).product();
    Ok(if (s - 1.0).abs() < 1e-12 {
        Asymptote { regime: Regime::Boundary, exponent: 1.0, log_factor: true, constant: 2.0 * c0 }
    } else if s < 1.0 {
        // 2 ∫_0^T (T - τ) τ^{-s} dτ = 2 T^{2-s} / ((1-s)(2-s))
        Asymptote {
            regime: Regime::LongMemory,
            exponent: 2.0 - s,
            log_factor: false,
            constant: 2.0 * c0 / ((1.0 - s) * (2.0 - s)),
        }
    } else {
        Asymptote { regime: Regime::ShortMemory, exponent: 1.0, log_factor: false, constant: line_integral(covs)? }
    })
}

enum Method {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Dense(LowRankFactor),
}

/// Exact sampler of a stationary Gaussian vector on an equispaced grid.
///
/// Circulant embedding of length `2(m-1)` is tried first; if it is not
/// nonnegative definite a dense pivoted Cholesky is used instead. Either
/// factorization is built once and reused for every path.
pub struct StationarySampler {
    m: usize,
    method: Method,
}

impl fmt::Debug for StationarySampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StationarySampler").field("m", &self.m).field("circulant", &self.is_circulant()).finish()
    }
}

impl StationarySampler {
    pub fn new(cov: &TemporalCovariance, grid: &TimeGrid) -> Result<Self> {
        let dt = grid.dt();
        let acf: Vec<f64> = (0..grid.m).map(|a| cov.eval(a as f64 * dt)).collect();
        Self::from_autocovariance(&acf)
    }

    /// From lag autocovariances `acf[0..m]`.
    pub fn from_autocovariance(acf: &[f64]) -> Result<Self> {
        let m = acf.len();
        if m < 2 {
            return Err(domain("need at least two grid points"));
        }
        match Self::circulant(acf) {
            Some(method) => Ok(Self { m, method }),
            None => {
                let toeplitz = Array2::from_shape_fn((m, m), |(i, j)| acf[i.abs_diff(j)]);
                Ok(Self { m, method: Method::Dense(psd_factor(&toeplitz, DENSE_JITTER)?) })
            }
        }
    }

    /// Forces the dense factorization (used to cross-check the embedding).
    pub fn dense_from_autocovariance(acf: &[f64]) -> Result<Self> {
        let m = acf.len();
        let toeplitz = Array2::from_shape_fn((m, m), |(i, j)| acf[i.abs_diff(j)]);
        Ok(Self { m, method: Method::Dense(psd_factor(&toeplitz, DENSE_JITTER)?) })
    }

    fn circulant(acf: &[f64]) -> Option<Method> {
        let m = acf.len();
        let len = 2 * (m - 1);
        let mut buf: Vec<Complex64> = acf.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        buf.extend(acf[1..m - 1].iter().rev().map(|&c| Complex64::new(c, 0.0)));
        let fft = FftPlanner::new().plan_fft_forward(len);
        fft.process(&mut buf);
        let max = buf.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let min = buf.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        if !(max > 0.0) || min < -CIRCULANT_NEG_TOL * max {
            return None;
        }
        let scale = 1.0 / len as f64;
        let sqrt_eig = buf.iter().map(|z| (z.re.max(0.0) * scale).sqrt()).collect();
        Some(Method::Circulant { sqrt_eig, fft })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn is_circulant(&self) -> bool {
        matches!(self.method, Method::Circulant { .. })
    }

    /// Fills `out` (row-major, `out.len() / m` rows) with independent paths.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let m = self.m;
        assert_eq!(out.len() % m, 0, "output length must be a multiple of the grid size");
        let rows = out.len() / m;
        match &self.method {
            Method::Circulant { sqrt_eig, fft } => {
                let mut buf = vec![Complex64::new(0.0, 0.0); sqrt_eig.len()];
                let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
                let mut r = 0;
                while r < rows {
                    for (z, &s) in buf.iter_mut().zip(sqrt_eig) {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        *z = Complex64::new(s * re, s * im);
                    }
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    // real and imaginary parts are two independent paths
                    for (o, z) in out[r * m..(r + 1) * m].iter_mut().zip(&buf) {
                        *o = z.re;
                    }
                    if r + 1 < rows {
                        for (o, z) in out[(r + 1) * m..(r + 2) * m].iter_mut().zip(&buf) {
                            *o = z.im;
                        }
                    }
                    r += 2;
                }
            }
            Method::Dense(factor) => {
                let mut g = Array1::<f64>::zeros(factor.rank());
                for r in 0..rows {
                    g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    factor.apply(g.view(), &mut out[r * m..(r + 1) * m]);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n_paths: usize, rng: &mut R) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((n_paths, self.m));
        self.fill(rng, out.as_slice_mut().expect("standard layout"));
        out
    }
}

/// `n_paths × m` matrix of independent paths with covariance `cov` on `grid`.
pub fn sample_stationary<R: Rng + ?Sized>(
    cov: &TemporalCovariance,
    grid: &TimeGrid,
    n_paths: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    Ok(StationarySampler::new(cov, grid)?.sample(n_paths, rng))
}
