//! Large-horizon variance constants of the sojourn functional and of its
//! individual chaos components.

use serde::Serialize;

use crate::chaos::{alpha_closed, alpha_normalized, compositions};
use crate::error::{domain, Error, Result};
use crate::field::{PowerSpectrum, SpectrumEntry};
use crate::manifold::{jacobi_eval, ManifoldSpec};
use crate::temporal::{decay_exponent, line_integral, Regime, TemporalCovariance};

/// Default number of chaos orders summed for short-memory totals.
pub const DEFAULT_Q_MAX: u32 = 3;

/// `Var ≈ constant · T^exponent (· log T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariancePrediction {
    pub regime: Regime,
    pub exponent: f64,
    pub log_factor: bool,
    pub constant: f64,
    pub u: f64,
    pub k: u32,
    pub spectrum_digest: String,
    /// Chaos half-order for single-chaos predictions.
    pub q: Option<u32>,
    /// Last summed chaos term over the partial sum, for short-memory totals.
    pub truncation_ratio: Option<f64>,
}

impl VariancePrediction {
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

/// `∬ ∏_r P_{l_r}(cos ε ρ(x, y)) dν(x) dν(y)`, exact by Gauss–Jacobi.
pub fn spatial_moment(space: &ManifoldSpec, degrees: &[u32]) -> Result<f64> {
    for &l in degrees {
        if !space.contains_degree(l) {
            return Err(Error::DegreeNotInLambda { family: space.family, degree: l });
        }
    }
    let total: u32 = degrees.iter().sum();
    let quad = space.pair_cosine_quadrature(total as usize / 2 + 1);
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut acc = 0.0;
    for (&x, &w) in quad.nodes.iter().zip(&quad.weights) {
        let p = jacobi_eval(space.alpha, space.beta_j, max, x)?;
        acc += w * degrees.iter().map(|&l| p[l as usize]).product::<f64>();
    }
    Ok(acc)
}

fn first_order_alpha(k: u32, u: f64) -> Result<f64> {
    let mut idx = vec![0u32; k as usize];
    idx[0] = 1;
    alpha_closed(k, &idx, u)
}

/// `Σ_{|n|=q} α_n(u)² / ∏(2n_j)!`.
fn chaos_weight(k: u32, u: f64, q: u32) -> Result<f64> {
    let mut s = 0.0;
    for idx in compositions(k, q)? {
        s += alpha_normalized(k, &idx, u)?.powi(2);
    }
    Ok(s)
}

/// Long-memory limit of `Var(M_T(u)) / T^{2-2β*}`:
/// `k α_{2,0,...,0}(u)² Σ_{l∈I*} dim(Y_l) C_l(0)² / ((1-2β*)(2-2β*))`.
pub fn v_lrd(spectrum: &PowerSpectrum, k: u32, u: f64) -> Result<f64> {
    Ok(2.0 * v_lrd_half(spectrum, k, u)?)
}

/// The same constant with the double integral over `[0,T]²` counted once
/// instead of twice, i.e. exactly half of [`v_lrd`]. Kept for audits.
pub fn v_lrd_half(spectrum: &PowerSpectrum, k: u32, u: f64) -> Result<f64> {
    let b = spectrum.beta_star();
    if 2.0 * b >= 1.0 {
        return Err(Error::Regime(format!("2β* = {} is not below 1", 2.0 * b)));
    }
    let alpha = first_order_alpha(k, u)?;
    let space = spectrum.space();
    let mut sum = 0.0;
    for e in spectrum.entries().iter().filter(|e| e.beta == b) {
        sum += space.dim_eigenspace(e.degree)? as f64 * e.c0 * e.c0;
    }
    Ok(k as f64 * alpha * alpha / (2.0 * (2.0 - 2.0 * b) * (1.0 - 2.0 * b)) * sum)
}

/// Short-memory second-chaos constant `k α_{2,0,...,0}(u)²/2 Σ_l dim(Y_l) ∫_ℝ C_l²`.
pub fn s2(spectrum: &PowerSpectrum, k: u32, u: f64) -> Result<f64> {
    let alpha = first_order_alpha(k, u)?;
    let space = spectrum.space();
    let mut sum = 0.0;
    for e in spectrum.entries() {
        let c = spectrum.covariance(e);
        sum += space.dim_eigenspace(e.degree)? as f64 * line_integral(&[c.clone(), c])?;
    }
    Ok(k as f64 * 0.5 * alpha * alpha * sum)
}

/// Calls `f` for every `len`-tuple drawn from `entries` (with repetition).
fn for_each_tuple(entries: &[SpectrumEntry], len: usize, mut f: impl FnMut(&[SpectrumEntry]) -> Result<()>) -> Result<()> {
    if entries.is_empty() {
        return Ok(());
    }
    let mut idx = vec![0usize; len];
    let mut tuple: Vec<SpectrumEntry> = vec![entries[0]; len];
    loop {
        for (t, &i) in tuple.iter_mut().zip(&idx) {
            *t = entries[i];
        }
        f(&tuple)?;
        let mut j = 0;
        while j < len && idx[j] + 1 == entries.len() {
            idx[j] = 0;
            j += 1;
        }
        if j == len {
            return Ok(());
        }
        idx[j] += 1;
    }
}

fn tuple_spatial(space: &ManifoldSpec, tuple: &[SpectrumEntry]) -> Result<f64> {
    let degrees: Vec<u32> = tuple.iter().map(|e| e.degree).collect();
    let mut kappa = 1.0;
    for &l in &degrees {
        kappa *= space.kappa(l)?;
    }
    Ok(kappa * spatial_moment(space, &degrees)?)
}

/// Short-memory constant of chaos `2q`:
/// `Σ_{|n|=q} α_n²/∏(2n_j)! · Σ_{2q-tuples} ∏κ · ∫_ℝ ∏C · spatial moment`.
pub fn s2q(spectrum: &PowerSpectrum, k: u32, u: f64, q: u32) -> Result<f64> {
    if q == 0 {
        return Err(domain("chaos half-order must be at least 1"));
    }
    let b = spectrum.beta_star();
    if 2.0 * q as f64 * b <= 1.0 {
        return Err(Error::Regime(format!("2qβ* = {} is not above 1", 2.0 * q as f64 * b)));
    }
    let weight = chaos_weight(k, u, q)?;
    let space = spectrum.space();
    let mut sum = 0.0;
    for_each_tuple(spectrum.entries(), 2 * q as usize, |tuple| {
        let spatial = tuple_spatial(space, tuple)?;
        if spatial.abs() > 1e-14 {
            let covs: Vec<TemporalCovariance> = tuple.iter().map(|e| spectrum.covariance(e)).collect();
            sum += spatial * line_integral(&covs)?;
        }
        Ok(())
    })?;
    Ok(weight * sum)
}

/// Variance regime and constant of the single chaos component of order `2q`.
pub fn chaos_variance_limit(spectrum: &PowerSpectrum, k: u32, u: f64, q: u32) -> Result<VariancePrediction> {
    if q == 0 {
        return Err(domain("chaos half-order must be at least 1"));
    }
    let b = spectrum.beta_star();
    let s = 2.0 * q as f64 * b;
    let mut pred = VariancePrediction {
        regime: Regime::ShortMemory,
        exponent: 1.0,
        log_factor: false,
        constant: 0.0,
        u,
        k,
        spectrum_digest: spectrum.digest(),
        q: Some(q),
        truncation_ratio: None,
    };
    if s > 1.0 + 1e-12 {
        pred.constant = s2q(spectrum, k, u, q)?;
        return Ok(pred);
    }
    // only tuples drawn from I* reach the leading order
    let star: Vec<SpectrumEntry> = spectrum.entries().iter().filter(|e| e.beta == b).copied().collect();
    let space = spectrum.space();
    let mut sum = 0.0;
    for_each_tuple(&star, 2 * q as usize, |tuple| {
        let c0: f64 = tuple.iter().map(|e| e.c0).product();
        sum += c0 * tuple_spatial(space, tuple)?;
        Ok(())
    })?;
    let weight = chaos_weight(k, u, q)?;
    if (s - 1.0).abs() <= 1e-12 {
        pred.regime = Regime::Boundary;
        pred.log_factor = true;
        pred.constant = weight * 2.0 * sum;
    } else {
        pred.regime = Regime::LongMemory;
        pred.exponent = 2.0 - s;
        pred.constant = weight * 2.0 * sum / ((1.0 - s) * (2.0 - s));
    }
    Ok(pred)
}

/// Leading variance of the whole functional. Short-memory totals sum the
/// chaos constants up to `q_max` and report the last-term ratio.
pub fn predicted_variance(spectrum: &PowerSpectrum, k: u32, u: f64, q_max: u32) -> Result<VariancePrediction> {
    let b = spectrum.beta_star();
    if (2.0 * b - 1.0).abs() <= 1e-12 {
        return Err(Error::Regime("2β* = 1: no total-variance limit is available at the boundary".into()));
    }
    if 2.0 * b < 1.0 {
        let mut pred = chaos_variance_limit(spectrum, k, u, 1)?;
        pred.constant = v_lrd(spectrum, k, u)?;
        pred.q = None;
        return Ok(pred);
    }
    if q_max == 0 {
        return Err(domain("q_max must be at least 1"));
    }
    let mut total = 0.0;
    let mut last = 0.0;
    for q in 1..=q_max {
        last = s2q(spectrum, k, u, q)?;
        total += last;
    }
    Ok(VariancePrediction {
        regime: Regime::ShortMemory,
        exponent: 1.0,
        log_factor: false,
        constant: total,
        u,
        k,
        spectrum_digest: spectrum.digest(),
        q: None,
        truncation_ratio: Some(if total > 0.0 { last / total } else { 0.0 }),
    })
}

/// `∫_ℝ C_l²` for one spectrum entry.
pub fn squared_covariance_integral(entry: &SpectrumEntry) -> Result<f64> {
    let c = TemporalCovariance::new(entry.c0, entry.beta)?;
    if 2.0 * decay_exponent(entry.beta) <= 1.0 {
        return Err(Error::Regime(format!("C² with β = {} is not integrable", entry.beta)));
    }
    line_integral(&[c.clone(), c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Family;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere() -> ManifoldSpec {
        ManifoldSpec::new(Family::Sphere, 2).unwrap()
    }

    fn spectrum(b1: f64, b2: f64) -> PowerSpectrum {
        PowerSpectrum::new(
            sphere(),
            vec![SpectrumEntry { degree: 1, c0: 1.0 / 6.0, beta: b1 }, SpectrumEntry { degree: 2, c0: 0.1, beta: b2 }],
        )
        .unwrap()
    }

    #[test]
    fn spatial_moment_orthogonality() {
        for space in [sphere(), ManifoldSpec::new(Family::ComplexProjective, 6).unwrap()] {
            for l in 0..6u32 {
                for lp in 0..6u32 {
                    let v = spatial_moment(&space, &[l, lp]).unwrap();
                    let expect = if l == lp {
                        space.jacobi_at_one(l).powi(2) / space.dim_eigenspace(l).unwrap() as f64
                    } else {
                        0.0
                    };
                    assert!((v - expect).abs() < 1e-12, "{l},{lp}: {v} vs {expect}");
                }
            }
            assert_relative_eq!(spatial_moment(&space, &[0, 0, 0, 0]).unwrap(), 1.0, max_relative = 1e-14);
        }
        let rp = ManifoldSpec::new(Family::RealProjective, 2).unwrap();
        assert!(spatial_moment(&rp, &[1, 1]).is_err());
    }

    #[test]
    fn spatial_moment_bounded_by_values_at_one() {
        let s = sphere();
        for t in [[1, 1, 1, 1], [1, 2, 3, 4], [2, 2, 2, 2], [5, 1, 3, 3]] {
            let bound: f64 = t.iter().map(|&l| s.jacobi_at_one(l)).product();
            assert!(spatial_moment(&s, &t).unwrap().abs() <= bound);
        }
    }

    #[test]
    fn spatial_moment_against_pair_sampling() {
        let s = sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 200_000;
        let pts_a = s.sample_points(n, &mut rng).unwrap();
        let pts_b = s.sample_points(n, &mut rng).unwrap();
        let cosines: Vec<f64> =
            pts_a.coords.rows().into_iter().zip(pts_b.coords.rows()).map(|(x, y)| x.dot(&y).clamp(-1.0, 1.0)).collect();
        for _ in 0..10 {
            let len = 2 * rng.random_range(1..=2);
            let tuple: Vec<u32> = (0..len).map(|_| rng.random_range(0..=3)).collect();
            let max = *tuple.iter().max().unwrap();
            let vals: Vec<f64> = cosines
                .iter()
                .map(|&c| {
                    let p = s.jacobi(max, c).unwrap();
                    tuple.iter().map(|&l| p[l as usize]).product()
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0) / n as f64).sqrt();
            let exact = spatial_moment(&s, &tuple).unwrap();
            assert!((mean - exact).abs() < 4.0 * se + 1e-12, "{tuple:?}: {mean} vs {exact}");
        }
    }

    #[test]
    fn long_memory_constant() {
        let s = spectrum(0.3, 0.8);
        let half = v_lrd_half(&s, 2, 2.0).unwrap();
        let direct = 2.0 * (-2.0f64).exp() / (2.0 * 1.4 * 0.4) * 3.0 / 36.0;
        assert_relative_eq!(half, direct, max_relative = 1e-12);
        assert!((half - 0.02014).abs() < 1e-5);
        assert_relative_eq!(v_lrd(&s, 2, 2.0).unwrap(), 2.0 * direct, max_relative = 1e-12);
        for u in [0.01, 0.5, 3.0, 15.0] {
            let v = v_lrd(&s, 2, u).unwrap();
            assert!(v > 0.0 && v.is_finite());
        }
        let near = v_lrd(&spectrum(0.4999, 0.8), 2, 2.0).unwrap();
        assert!(near > 100.0 * v_lrd(&s, 2, 2.0).unwrap());
        assert!(matches!(v_lrd(&spectrum(0.5, 0.8), 2, 2.0), Err(Error::Regime(_))));
    }

    #[test]
    fn first_chaos_prediction_agrees_with_total() {
        let s = spectrum(0.3, 0.8);
        let c = chaos_variance_limit(&s, 2, 2.0, 1).unwrap();
        assert_eq!(c.regime, Regime::LongMemory);
        assert_relative_eq!(c.exponent, 1.4);
        assert_relative_eq!(c.constant, v_lrd(&s, 2, 2.0).unwrap(), max_relative = 1e-12);
        let p = predicted_variance(&s, 2, 2.0, DEFAULT_Q_MAX).unwrap();
        assert_relative_eq!(p.exponent, 1.4);
        assert_eq!(p.constant, v_lrd(&s, 2, 2.0).unwrap());
    }

    #[test]
    fn short_memory_constants() {
        let s = spectrum(1.0, 1.0);
        let direct = 2.0 * ((-2.0f64).exp() / 2.0) * (3.0 / 36.0 + 5.0 / 100.0) * (2.0 / 3.0);
        assert_relative_eq!(s2(&s, 2, 2.0).unwrap(), direct, max_relative = 1e-8);
        assert!((direct - 0.01204).abs() < 2e-5);
        assert_relative_eq!(s2q(&s, 2, 2.0, 1).unwrap(), direct, max_relative = 1e-8);
        // linear in k once the k-dependent coefficient is divided out
        for k in [1, 2, 4] {
            let a = first_order_alpha(k, 2.0).unwrap();
            assert_relative_eq!(s2(&s, k, 2.0).unwrap() / (k as f64 * a * a / 2.0), 2.0 / 3.0 * (3.0 / 36.0 + 0.05), max_relative = 1e-8);
        }
        assert!(matches!(s2(&spectrum(0.4, 1.0), 2, 2.0), Err(Error::Regime(_))));
        let p = predicted_variance(&s, 2, 2.0, 3).unwrap();
        assert_eq!(p.regime, Regime::ShortMemory);
        assert!(p.constant >= direct);
        let ratio = p.truncation_ratio.unwrap();
        assert!((0.0..1.0).contains(&ratio));
        let mut prev = 0.0;
        for q in 1..=4 {
            let v = s2q(&s, 2, 2.0, q).unwrap();
            assert!(v >= 0.0);
            assert!(prev + v >= prev);
            prev += v;
        }
    }

    #[test]
    fn single_degree_tuple_collapse() {
        let s = PowerSpectrum::new(sphere(), vec![SpectrumEntry { degree: 1, c0: 1.0 / 3.0, beta: 1.0 }]).unwrap();
        let c = s.covariance(&s.entries()[0]);
        let q = 2;
        let kappa = sphere().kappa(1).unwrap();
        let expect = chaos_weight(2, 1.0, q).unwrap()
            * kappa.powi(4)
            * line_integral(&[c.clone(), c.clone(), c.clone(), c]).unwrap()
            * spatial_moment(&sphere(), &[1, 1, 1, 1]).unwrap();
        assert_relative_eq!(s2q(&s, 2, 1.0, q).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn per_chaos_regimes() {
        let quarter = spectrum(0.25, 0.8);
        let p = chaos_variance_limit(&quarter, 2, 2.0, 1).unwrap();
        assert_eq!(p.regime, Regime::LongMemory);
        assert_relative_eq!(p.exponent, 1.5);
        let half = spectrum(0.5, 0.8);
        let p = chaos_variance_limit(&half, 2, 2.0, 1).unwrap();
        assert_eq!(p.regime, Regime::Boundary);
        assert!(p.log_factor);
        assert!(matches!(predicted_variance(&half, 2, 2.0, 3), Err(Error::Regime(_))));
        let p = chaos_variance_limit(&spectrum(0.3, 0.8), 2, 2.0, 2).unwrap();
        assert_eq!(p.regime, Regime::ShortMemory);
        assert!(p.constant > 0.0);
    }

    #[test]
    fn squared_integral() {
        let e = SpectrumEntry { degree: 1, c0: 0.5, beta: 1.0 };
        assert_relative_eq!(squared_covariance_integral(&e).unwrap(), 0.25 * 2.0 / 3.0, max_relative = 1e-8);
        assert!(squared_covariance_integral(&SpectrumEntry { degree: 1, c0: 0.5, beta: 0.5 }).is_err());
    }
}
