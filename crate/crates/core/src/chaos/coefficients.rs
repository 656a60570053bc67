use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::RwLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::special::{chi2_tail, gamma_ladder, gamma_ladder_offsets};
use super::{hermite, hermite_normalized, MAX_COMPONENTS};
use crate::error::{domain, Result};

/// Stored coefficient `α_{2n_1,...,2n_k}(u)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaCoefficient {
    pub k: u32,
    pub multi_index: Vec<u32>,
    pub u: f64,
    pub value: f64,
}

impl AlphaCoefficient {
    pub fn compute(k: u32, multi_index: &[u32], u: f64) -> Result<Self> {
        let value = alpha_closed(k, multi_index, u)?;
        Ok(Self { k, multi_index: multi_index.to_vec(), u, value })
    }
}

fn check_index(k: u32, index: &[u32], u: f64) -> Result<()> {
    if k == 0 || k > MAX_COMPONENTS {
        return Err(domain(format!("number of components {k} outside 1..={MAX_COMPONENTS}")));
    }
    if index.len() != k as usize {
        return Err(domain(format!("multi-index has {} entries, expected {k}", index.len())));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(domain(format!("threshold {u} must be positive")));
    }
    Ok(())
}

fn sorted(index: &[u32]) -> Vec<u32> {
    let mut s = index.to_vec();
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn ln_factorial(n: u32) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Neumaier-compensated sum.
#[derive(Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// The finite double sum over `0 ≤ r_j ≤ n_j` with regularized incomplete
/// gammas and compensated summation.
///
/// With `corrected = false` the sum is evaluated exactly as commonly printed,
/// `Σ_r (-1)^{Σr} ∏(2n_j)! / (2^q ∏ r_j!(n_j-r_j)!) · P(k/2 + L, u/2)`,
/// which is the negative of the coefficient for every `q ≥ 1`. With
/// `corrected = true` the sign is fixed, i.e. the lower gammas are replaced by
/// upper ones.
pub fn alpha_printed_sum(k: u32, multi_index: &[u32], u: f64, corrected: bool) -> Result<f64> {
    check_index(k, multi_index, u)?;
    let n = sorted(multi_index);
    let q: u32 = n.iter().sum();
    if q == 0 {
        return chi2_tail(k, u);
    }
    let a = 0.5 * k as f64;
    let x = 0.5 * u;
    // the weights sum to zero, so the corrected sum only needs the offsets
    // Q(a + l) - Q(a), which carry full relative precision
    let gammas = if corrected { gamma_ladder_offsets(a, x, q as usize)? } else { gamma_ladder(a, x, q as usize, false)? };
    // per-component weights (2n_j - 1)!! · binom(n_j, r_j): exact integers in
    // floating point while they fit, log-space beyond
    let weights: Vec<Vec<f64>> = n.iter().map(|&nj| component_weights(nj)).collect();
    let mut r = vec![0u32; n.len()];
    let mut acc = Compensated::default();
    loop {
        let rs: u32 = r.iter().sum();
        let mag: f64 = r.iter().zip(&weights).map(|(&rj, w)| w[rj as usize]).product();
        let sign = if rs.is_multiple_of(2) { 1.0 } else { -1.0 };
        acc.add(sign * mag * gammas[(q - rs) as usize]);
        // odometer over the box ∏[0, n_j]
        let mut j = 0;
        while j < n.len() && r[j] == n[j] {
            r[j] = 0;
            j += 1;
        }
        if j == n.len() {
            break;
        }
        r[j] += 1;
    }
    Ok(acc.value())
}

/// `(2n - 1)!! · binom(n, r)` for `r = 0..=n`.
fn component_weights(n: u32) -> Vec<f64> {
    let double_fact: f64 = (1..=n).map(|i| (2 * i - 1) as f64).product();
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut binom = 1.0;
    for r in 0..=n {
        if r > 0 {
            binom = binom * (n - r + 1) as f64 / r as f64;
        }
        let w = double_fact * binom;
        out.push(if w.is_finite() {
            w
        } else {
            (ln_factorial(2 * n) - n as f64 * LN_2 - ln_factorial(r) - ln_factorial(n - r)).exp()
        });
    }
    out
}

/// `α_{2n_1,...,2n_k}(u) = E[1{Σ N_j² ≥ u} ∏ H_{2n_j}(N_j)]`.
///
/// `k = 1` uses `2φ(√u) H_{2n-1}(√u)`; `k ≥ 2` the sign-corrected double sum;
/// the all-zero index is the chi-square tail itself.
pub fn alpha_closed(k: u32, multi_index: &[u32], u: f64) -> Result<f64> {
    check_index(k, multi_index, u)?;
    let q: u32 = multi_index.iter().sum();
    if q == 0 {
        return chi2_tail(k, u);
    }
    if k == 1 {
        let s = u.sqrt();
        let n = multi_index[0] as usize;
        return Ok(2.0 * std_normal_pdf(s) * hermite(2 * n - 1, s)[2 * n - 1]);
    }
    alpha_printed_sum(k, multi_index, u, true)
}

/// Orthonormal Laguerre values `L_j^{(a)}(x) √(j!/Γ(j+a+1))`, `j = 0..=n`.
fn laguerre_normalized(n: usize, a: f64, x: f64) -> Vec<f64> {
    let mut l = Vec::with_capacity(n + 1);
    l.push((-0.5 * ln_gamma(a + 1.0)).exp());
    for j in 0..n {
        let jf = j as f64;
        let prev = if j == 0 { 0.0 } else { l[j - 1] };
        let next = ((2.0 * jf + 1.0 + a - x) * l[j] - (jf * (jf + a)).sqrt() * prev) / ((jf + 1.0) * (jf + a + 1.0)).sqrt();
        l.push(next);
    }
    l
}

/// Log of the index-dependent factor `∏ √((2n_j)!) / (2^{n_j} n_j!)`.
fn ln_index_factor(index: &[u32]) -> f64 {
    index.iter().map(|&nj| 0.5 * ln_factorial(2 * nj) - nj as f64 * LN_2 - ln_factorial(nj)).sum()
}

/// `α/√(∏(2n_j)!)` with the `k`-dependence collapsed onto a Laguerre polynomial:
/// the weighted sum over `r` is a `q`-th finite difference of `Q(k/2 + ·, u/2)`.
fn normalized_collapsed(k: u32, index: &[u32], u: f64, laguerre: &[f64]) -> f64 {
    let q: u32 = index.iter().sum();
    let a = 0.5 * k as f64;
    let x = 0.5 * u;
    let ln_mag = ln_index_factor(index) - x + a * x.ln() + 0.5 * (ln_gamma(q as f64) - ln_gamma(q as f64 + a));
    let sign = if q % 2 == 1 { 1.0 } else { -1.0 };
    sign * ln_mag.exp() * laguerre[q as usize - 1]
}

/// Same value as [`alpha_closed`] through the Laguerre reduction; an
/// independent, cancellation-free route used to cross-check the double sum.
pub fn alpha_collapsed(k: u32, multi_index: &[u32], u: f64) -> Result<f64> {
    check_index(k, multi_index, u)?;
    let q: u32 = multi_index.iter().sum();
    if q == 0 {
        return chi2_tail(k, u);
    }
    let lag = laguerre_normalized(q as usize - 1, 0.5 * k as f64, 0.5 * u);
    let ln_norm: f64 = multi_index.iter().map(|&nj| 0.5 * ln_factorial(2 * nj)).sum();
    Ok(normalized_collapsed(k, multi_index, u, &lag) * ln_norm.exp())
}

/// `α_{2n_1,...,2n_k}(u) / √(∏ (2n_j)!)`, finite for very high orders.
pub fn alpha_normalized(k: u32, multi_index: &[u32], u: f64) -> Result<f64> {
    check_index(k, multi_index, u)?;
    let q: u32 = multi_index.iter().sum();
    if q == 0 {
        return chi2_tail(k, u);
    }
    if k == 1 {
        let n = multi_index[0] as usize;
        let s = u.sqrt();
        return Ok(2.0 * std_normal_pdf(s) * hermite_normalized(2 * n - 1, s)[2 * n - 1] / (2.0 * n as f64).sqrt());
    }
    let lag = laguerre_normalized(q as usize - 1, 0.5 * k as f64, 0.5 * u);
    Ok(normalized_collapsed(k, multi_index, u, &lag))
}

/// Plain Monte Carlo of `E[1{Σ N_j² ≥ u} ∏ H_{m_j}(N_j)]` for raw Hermite
/// orders `m_j` (odd orders allowed). Returns `(estimate, standard error)`.
pub fn chaos_mc<R: Rng + ?Sized>(k: u32, orders: &[u32], u: f64, n_samples: usize, rng: &mut R) -> (f64, f64) {
    assert_eq!(orders.len(), k as usize, "one Hermite order per component");
    let max_order = orders.iter().copied().max().unwrap_or(0) as usize;
    let mut z = vec![0.0; k as usize];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n_samples {
        let mut r2 = 0.0;
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
            r2 += *v * *v;
        }
        // every draw is consumed even when the indicator is off, so the
        // stream position depends only on n_samples
        if r2 >= u {
            let mut prod = 1.0;
            for (&zj, &m) in z.iter().zip(orders) {
                if m > 0 {
                    prod *= hermite(max_order, zj)[m as usize];
                }
            }
            s1 += prod;
            s2 += prod * prod;
        }
    }
    let n = n_samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo oracle for `α_{2n_1,...,2n_k}(u)`; needs at least 10⁴ samples.
pub fn alpha_mc<R: Rng + ?Sized>(
    k: u32,
    multi_index: &[u32],
    u: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if multi_index.len() != k as usize || k == 0 {
        return Err(domain("multi-index length must equal k"));
    }
    if n_samples < 10_000 {
        return Err(domain(format!("at least 10^4 samples required, got {n_samples}")));
    }
    let orders: Vec<u32> = multi_index.iter().map(|&n| 2 * n).collect();
    Ok(chaos_mc(k, &orders, u, n_samples, rng))
}

/// Conditional Monte Carlo for `α_{2n_1,0,...,0}(u)`: integrates the first
/// coordinate analytically given `R = Σ_{j≥2} N_j²`. Returns `(estimate, se)`.
pub fn alpha_semianalytic<R: Rng + ?Sized>(
    k: u32,
    n1: u32,
    u: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if k < 2 || n1 == 0 {
        return Err(domain("semi-analytic oracle needs k >= 2 and n1 >= 1"));
    }
    if !(u > 0.0) || n_samples < 2 {
        return Err(domain("threshold must be positive and at least two samples drawn"));
    }
    let order = (2 * n1 - 1) as usize;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n_samples {
        let mut rest = 0.0;
        for _ in 1..k {
            let z: f64 = rng.sample(StandardNormal);
            rest += z * z;
        }
        let s = u - rest;
        if s > 0.0 {
            let r = s.sqrt();
            let v = 2.0 * std_normal_pdf(r) * hermite(order, r)[order];
            s1 += v;
            s2 += v * v;
        }
    }
    let n = n_samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// `P(1 - P)` with `P = P(χ²_k ≥ u)`, the limit of the Parseval partial sums.
pub fn parseval_target(k: u32, u: f64) -> Result<f64> {
    let p = chi2_tail(k, u)?;
    Ok(p * (1.0 - p))
}

/// Partial sums `S_Q = Σ_{1≤q≤Q} Σ_{|n|=q} α²/∏(2n_j)!` for `Q = 1..=q_max`.
///
/// `k = 1` runs the normalized Hermite recurrence. For `k ≥ 2` the inner sum
/// over compositions collapses: `Σ_{|n|=q} ∏ binom(2n_j, n_j)/4^{n_j} =
/// (k/2)_q / q!`, leaving a single orthonormal-Laguerre term per order.
pub fn parseval_partial(k: u32, u: f64, q_max: u32) -> Result<Vec<f64>> {
    if k == 0 || !(u > 0.0) {
        return Err(domain("Parseval sums need k >= 1 and u > 0"));
    }
    let q_max = q_max as usize;
    let mut out = Vec::with_capacity(q_max);
    let mut acc = Compensated::default();
    if k == 1 {
        let s = u.sqrt();
        let h = hermite_normalized(2 * q_max, s);
        let amp = 2.0 * std_normal_pdf(s);
        for n in 1..=q_max {
            let a = amp * h[2 * n - 1];
            acc.add(a * a / (2 * n) as f64);
            out.push(acc.value());
        }
    } else {
        let a = 0.5 * k as f64;
        let x = 0.5 * u;
        let lag = laguerre_normalized(q_max.saturating_sub(1), a, x);
        let pref = (-2.0 * x + 2.0 * a * x.ln() - ln_gamma(a)).exp();
        for q in 1..=q_max {
            let l = lag[q - 1];
            acc.add(pref * l * l / q as f64);
            out.push(acc.value());
        }
    }
    Ok(out)
}

type CacheKey = (u32, Vec<u32>, u64);

/// Coefficients keyed by `(k, sorted index, u)`; concurrent readers, one writer.
#[derive(Debug, Default)]
pub struct CoefficientCache {
    map: RwLock<HashMap<CacheKey, f64>>,
}

impl CoefficientCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, k: u32, multi_index: &[u32], u: f64) -> Result<f64> {
        let key = (k, sorted(multi_index), u.to_bits());
        if let Some(&v) = self.map.read().expect("cache lock poisoned").get(&key) {
            return Ok(v);
        }
        let v = alpha_closed(k, multi_index, u)?;
        self.map.write().expect("cache lock poisoned").insert(key, v);
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
