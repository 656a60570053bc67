//! Hermite polynomials, chi-square special functions and the Wiener chaos
//! coefficients of the chi-square excursion indicator `1{χ²_k ≥ u}`.

mod coefficients;
mod special;

pub use coefficients::{
    alpha_closed, alpha_collapsed, alpha_mc, alpha_normalized, alpha_printed_sum, alpha_semianalytic,
    chaos_mc, parseval_partial, parseval_target, AlphaCoefficient, CoefficientCache,
};
pub use special::{
    chi2_tail, gamma_ladder, gamma_ladder_offsets, marcum_q, noncentral_chi2_tail, regularized_lower_gamma, regularized_upper_gamma,
    MARCUM_MAX_TERMS,
};

use crate::error::{domain, Result};

/// Largest number of field components supported by composition enumeration.
pub const MAX_COMPONENTS: u32 = 8;

/// Probabilists' Hermite values `[H_0(x), ..., H_{q_max}(x)]`.
pub fn hermite(q_max: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(q_max + 1);
    h.push(1.0);
    if q_max >= 1 {
        h.push(x);
    }
    for q in 1..q_max {
        let next = x * h[q] - q as f64 * h[q - 1];
        h.push(next);
    }
    h
}

/// `[H_q(x)/√(q!)]` by the normalized recurrence, safe for very large `q`.
pub fn hermite_normalized(q_max: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(q_max + 1);
    h.push(1.0);
    if q_max >= 1 {
        h.push(x);
    }
    for q in 1..q_max {
        let qf = q as f64;
        let next = (x * h[q] - qf.sqrt() * h[q - 1]) / (qf + 1.0).sqrt();
        h.push(next);
    }
    h
}

/// All `(n_1, ..., n_k)` with nonnegative entries summing to `q`, in
/// lexicographically decreasing order.
pub fn compositions(k: u32, q: u32) -> Result<Vec<Vec<u32>>> {
    if k == 0 || k > MAX_COMPONENTS {
        return Err(domain(format!("number of components {k} outside 1..={MAX_COMPONENTS}")));
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; k as usize];
    fill_compositions(&mut current, 0, q, &mut out);
    Ok(out)
}

fn fill_compositions(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        fill_compositions(current, pos + 1, remaining - v, out);
    }
}

/// `binom(q + k - 1, k - 1)`.
pub fn composition_count(k: u32, q: u32) -> u64 {
    let mut c: u64 = 1;
    for i in 1..k as u64 {
        c = c * (q as u64 + i) / i;
    }
    c
}

/// Chaos orders `q = 0..=q_max` of a `k`-component field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChaosOrderBudget {
    pub k: u32,
    pub q_max: u32,
}

impl ChaosOrderBudget {
    pub fn new(k: u32, q_max: u32) -> Result<Self> {
        if k == 0 || k > MAX_COMPONENTS {
            return Err(domain(format!("number of components {k} outside 1..={MAX_COMPONENTS}")));
        }
        Ok(Self { k, q_max })
    }

    pub fn compositions(&self, q: u32) -> Vec<Vec<u32>> {
        compositions(self.k, q).expect("k validated on construction")
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Vec<Vec<u32>>)> + '_ {
        (0..=self.q_max).map(|q| (q, self.compositions(q)))
    }
}
