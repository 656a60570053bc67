use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size entering the limit law.
    pub n_eff: f64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges fast for small λ
        let y = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda
            * (1..=6).map(|j| (((2 * j - 1) as f64).powi(2) * y).exp()).sum::<f64>();
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' finite-sample adjustment.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(domain("KS test needs a nonempty sample"));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(domain("KS test sample contains NaN"));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsOutcome> {
    let x = sorted(samples)?;
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsOutcome { statistic: d, p_value: ks_p_value(d, n), n_eff: n })
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsOutcome> {
    let (x, y) = (sorted(a)?, sorted(b)?);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(KsOutcome { statistic: d, p_value: ks_p_value(d, n_eff), n_eff })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci95: [f64; 2],
    pub residual_sd: f64,
}

/// Least squares of `log v` on `log T` with a t-based 95% interval.
pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 3 {
        return Err(domain("slope fit needs at least three points"));
    }
    if pairs.iter().any(|&(t, v)| !(t > 0.0 && v > 0.0 && t.is_finite() && v.is_finite())) {
        return Err(domain("slope fit needs positive finite values"));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(domain("slope fit needs distinct horizons"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual_sd = (rss / (n - 2.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0).expect("positive dof").inverse_cdf(0.975);
    let half = t * residual_sd / sxx.sqrt();
    Ok(SlopeFit { slope, intercept, ci95: [slope - half, slope + half], residual_sd })
}

/// Sample mean, unbiased variance and the standard error of that variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub skewness: f64,
}

pub fn moments(x: &[f64]) -> Result<Moments> {
    if x.len() < 2 {
        return Err(domain("moments need at least two values"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let variance = m2 * n / (n - 1.0);
    let variance_se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    Ok(Moments { n: x.len(), mean, variance, variance_se, skewness })
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::substream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use statrs::distribution::Normal;

    fn normal_cdf(x: f64) -> f64 {
        Normal::standard().cdf(x)
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for &l in &[0.3, 0.8, 1.0, 1.17, 1.19, 1.5, 2.5] {
            let v = kolmogorov_sf(l);
            assert!((0.0..=1.0).contains(&v));
        }
        // both series at the switch point
        let y = -std::f64::consts::PI.powi(2) / (8.0 * 1.18f64.powi(2));
        let theta = 1.0
            - (2.0 * std::f64::consts::PI).sqrt() / 1.18 * (1..=6).map(|j| (((2 * j - 1) as f64).powi(2) * y).exp()).sum::<f64>();
        let alt: f64 = 2.0 * (1..=50).map(|j| (if j % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * (j * j) as f64 * 1.18f64.powi(2)).exp()).sum::<f64>();
        assert!((theta - alt).abs() < 1e-12);
        // scipy.special.kolmogorov
        assert!((kolmogorov_sf(1.36) - 0.049_485_876_755_377_876).abs() < 1e-12);
        assert!((kolmogorov_sf(0.8) - 0.544_142_411_574_198_1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_give_zero_distance() {
        let x = [0.3, -1.0, 2.0, 0.0];
        let r = ks_two_sample(&x, &x).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(ks_one_sample(&[], normal_cdf).is_err());
        assert!(ks_two_sample(&x, &[]).is_err());
    }

    #[test]
    fn own_empirical_cdf() {
        let x = [0.5, 0.1, 0.9, 0.3, 0.7];
        let mut s = x.to_vec();
        s.sort_by(f64::total_cmp);
        let ecdf = |v: f64| s.iter().filter(|&&w| w <= v).count() as f64 / s.len() as f64;
        assert!(ks_one_sample(&x, ecdf).unwrap().statistic <= 1.0 / x.len() as f64 + 1e-15);
    }

    #[test]
    fn calibration_and_power() {
        let mut ok = 0;
        for seed in 0..100 {
            let mut rng = substream(11, seed);
            let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
            if ks_one_sample(&x, normal_cdf).unwrap().p_value > 0.01 {
                ok += 1;
            }
        }
        assert!(ok >= 98, "{ok}");
        let mut rng = substream(12, 0);
        let u: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_one_sample(&u, normal_cdf).unwrap().p_value < 1e-6);
        let w: Vec<f64> = (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        assert!(ks_two_sample(&u, &w).unwrap().p_value < 1e-6);
    }

    #[test]
    fn two_sample_statistic_by_brute_force() {
        let a = [0.1, 0.4, 0.4, 0.9];
        let b = [0.2, 0.4, 0.5];
        let ecdf = |s: &[f64], v: f64| s.iter().filter(|&&w| w <= v).count() as f64 / s.len() as f64;
        let brute = a.iter().chain(&b).map(|&v| (ecdf(&a, v) - ecdf(&b, v)).abs()).fold(0.0, f64::max);
        assert!((ks_two_sample(&a, &b).unwrap().statistic - brute).abs() < 1e-15);
    }

    #[test]
    fn slope_fits() {
        let exact: Vec<(f64, f64)> = [64.0, 128.0, 256.0, 512.0].iter().map(|&t: &f64| (t, 3.0 * t.powf(1.4))).collect();
        let f = fit_loglog_slope(&exact).unwrap();
        assert!((f.slope - 1.4).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(f.residual_sd < 1e-10);
        let flat = fit_loglog_slope(&[(1.0, 2.0), (2.0, 2.0), (4.0, 2.0)]).unwrap();
        assert!(flat.slope.abs() < 1e-15);
        assert!(fit_loglog_slope(&[(1.0, 2.0), (2.0, 0.0), (4.0, 2.0)]).is_err());
        assert!(fit_loglog_slope(&[(1.0, 2.0), (2.0, 3.0)]).is_err());
        let mut rng = substream(13, 0);
        for _ in 0..50 {
            let noisy: Vec<(f64, f64)> = [64.0, 128.0, 256.0, 512.0]
                .iter()
                .map(|&t| (t, t * (1.0 + 0.05 * rng.sample::<f64, _>(StandardNormal))))
                .collect();
            let s = fit_loglog_slope(&noisy).unwrap();
            assert!((0.9..=1.1).contains(&s.slope), "{}", s.slope);
            assert!(s.ci95[0] <= s.slope && s.slope <= s.ci95[1]);
        }
    }

    #[test]
    fn moment_summary() {
        let m = moments(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.skewness, 0.0);
        assert!(moments(&[1.0]).is_err());
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 1.0).abs() < 1e-2);
    }

    proptest! {
        #[test]
        fn ks_statistic_in_unit_interval(a in prop::collection::vec(-5.0f64..5.0, 1..40), b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let r = ks_two_sample(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.statistic));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let s = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(r.statistic, s.statistic);
        }

        #[test]
        fn slope_recovers_power_law(p in -2.0f64..3.0, c in 0.01f64..100.0) {
            let pairs: Vec<(f64, f64)> = [3.0, 10.0, 40.0, 90.0].iter().map(|&t: &f64| (t, c * t.powf(p))).collect();
            prop_assert!((fit_loglog_slope(&pairs).unwrap().slope - p).abs() < 1e-9);
        }
    }
}
