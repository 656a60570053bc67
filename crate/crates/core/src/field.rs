//! Space-time Gaussian fields with a finitely supported power spectrum, their
//! chi-square transforms and the sojourn functional.

use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chaos::{alpha_closed, chi2_tail, compositions, hermite};
use crate::error::{domain, Result};
use crate::linalg::{psd_factor, LowRankFactor};
use crate::manifold::{jacobi_eval, ManifoldSpec, PointSet};
use crate::temporal::{StationarySampler, TemporalCovariance, TimeGrid};

/// Unit-variance tolerance on `Σ dim(Y_l) C_l(0)`.
pub const VARIANCE_TOL: f64 = 1e-10;
/// Relative jitter for spatial Gram factorizations.
pub const SPATIAL_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumEntry {
    pub degree: u32,
    pub c0: f64,
    pub beta: f64,
}

/// Finitely supported angular power spectrum with memory exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSpectrum {
    space: ManifoldSpec,
    entries: Vec<SpectrumEntry>,
}

impl PowerSpectrum {
    /// Validates degrees, weights and exponents and requires unit variance.
    pub fn new(space: ManifoldSpec, entries: Vec<SpectrumEntry>) -> Result<Self> {
        let s = Self::checked(space, entries)?;
        let var = s.variance()?;
        if (var - 1.0).abs() > VARIANCE_TOL {
            return Err(domain(format!("spectrum has variance {var}, expected 1")));
        }
        Ok(s)
    }

    /// Rescales the weights so that the field has unit variance.
    pub fn normalized(space: ManifoldSpec, entries: Vec<SpectrumEntry>) -> Result<Self> {
        let mut s = Self::checked(space, entries)?;
        let var = s.variance()?;
        for e in &mut s.entries {
            e.c0 /= var;
        }
        Ok(s)
    }

    fn checked(space: ManifoldSpec, mut entries: Vec<SpectrumEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(domain("spectrum must have at least one degree"));
        }
        entries.sort_by_key(|e| e.degree);
        for w in entries.windows(2) {
            if w[0].degree == w[1].degree {
                return Err(domain(format!("degree {} listed twice", w[0].degree)));
            }
        }
        for e in &entries {
            if !space.contains_degree(e.degree) {
                return Err(crate::Error::DegreeNotInLambda { family: space.family, degree: e.degree });
            }
            // validates c0 and beta
            TemporalCovariance::new(e.c0, e.beta)?;
        }
        Ok(Self { space, entries })
    }

    fn variance(&self) -> Result<f64> {
        let mut v = 0.0;
        for e in &self.entries {
            v += self.space.dim_eigenspace(e.degree)? as f64 * e.c0;
        }
        Ok(v)
    }

    pub fn space(&self) -> &ManifoldSpec {
        &self.space
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    /// Smallest memory exponent.
    pub fn beta_star(&self) -> f64 {
        self.entries.iter().map(|e| e.beta).fold(f64::INFINITY, f64::min)
    }

    /// Degrees attaining the smallest memory exponent.
    pub fn i_star(&self) -> Vec<u32> {
        let b = self.beta_star();
        self.entries.iter().filter(|e| e.beta == b).map(|e| e.degree).collect()
    }

    pub fn covariance(&self, entry: &SpectrumEntry) -> TemporalCovariance {
        TemporalCovariance::new(entry.c0, entry.beta).expect("validated on construction")
    }

    /// Stable 64-bit FNV-1a digest of the space and entries, as hex.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("spectrum serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Space-time covariance `Σ_l κ_l C_l(τ) P_l(c)` at pair cosine `c` and lag `τ`.
    pub fn covariance_at(&self, cosine: f64, lag: f64) -> Result<f64> {
        let mut total = 0.0;
        for e in &self.entries {
            let p = jacobi_eval(self.space.alpha, self.space.beta_j, e.degree, cosine)?[e.degree as usize];
            total += self.space.kappa(e.degree)? * self.covariance(e).eval(lag) * p;
        }
        Ok(total)
    }
}

struct Component {
    spatial: LowRankFactor,
    temporal: StationarySampler,
}

/// Samples the `k` independent Gaussian replicas on fixed points and grid.
///
/// Each degree contributes a matrix-normal block `L_S G` whose rows of `G` are
/// independent temporal paths; both factorizations are computed once and
/// shared by every replica and replication.
pub struct FieldSimulator {
    spectrum: PowerSpectrum,
    points: Arc<PointSet>,
    grid: TimeGrid,
    k: u32,
    components: Vec<Component>,
}

impl std::fmt::Debug for FieldSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSimulator")
            .field("n", &self.points.len())
            .field("m", &self.grid.m)
            .field("k", &self.k)
            .field("ranks", &self.ranks())
            .finish()
    }
}

impl FieldSimulator {
    pub fn new(spectrum: &PowerSpectrum, points: Arc<PointSet>, grid: TimeGrid, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(domain("need at least one Gaussian replica"));
        }
        if points.space != *spectrum.space() {
            return Err(domain("points and spectrum live on different spaces"));
        }
        let cosines = points.cosine_matrix();
        let space = spectrum.space();
        let mut components = Vec::with_capacity(spectrum.entries().len());
        for e in spectrum.entries() {
            let kappa = space.kappa(e.degree)?;
            let l = e.degree as usize;
            let gram = cosines.mapv(|c| {
                kappa * crate::manifold::jacobi_unchecked(space.alpha, space.beta_j, l, c)[l]
            });
            let spatial = psd_factor(&gram, SPATIAL_JITTER)?;
            let temporal = StationarySampler::new(&spectrum.covariance(e), &grid)?;
            components.push(Component { spatial, temporal });
        }
        Ok(Self { spectrum: spectrum.clone(), points, grid, k, components })
    }

    pub fn spectrum(&self) -> &PowerSpectrum {
        &self.spectrum
    }

    pub fn points(&self) -> &Arc<PointSet> {
        &self.points
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Rank of each spatial factor, in spectrum order.
    pub fn ranks(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.spatial.rank()).collect()
    }

    /// `k × n × m` Gaussian replicas.
    pub fn simulate_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> Array3<f64> {
        let (n, m) = (self.points.len(), self.grid.m);
        let mut z = Array3::<f64>::zeros((self.k as usize, n, m));
        for mut replica in z.axis_iter_mut(Axis(0)) {
            for c in &self.components {
                let mut paths = Array2::<f64>::zeros((c.spatial.rank(), m));
                c.temporal.fill(rng, paths.as_slice_mut().expect("standard layout"));
                replica += &c.spatial.l.dot(&paths);
            }
        }
        z
    }

    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldSample {
        let z = self.simulate_gaussian(rng);
        let x = chi2_transform(&z);
        FieldSample { z, x, grid: self.grid, points: Arc::clone(&self.points), spectrum_digest: self.spectrum.digest() }
    }
}

/// One realization of the Gaussian replicas and the chi-square field.
#[derive(Debug, Clone)]
pub struct FieldSample {
    /// `k × n × m`.
    pub z: Array3<f64>,
    /// `n × m`, `x = Σ_j z_j²`.
    pub x: Array2<f64>,
    pub grid: TimeGrid,
    pub points: Arc<PointSet>,
    pub spectrum_digest: String,
}

impl FieldSample {
    pub fn k(&self) -> u32 {
        self.z.len_of(Axis(0)) as u32
    }

    /// `Σ_a w_a Σ_i w_i f(i, a)` with trapezoid time and point weights.
    fn integrate(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let tw = self.grid.trapezoid_weights();
        let sw = &self.points.weights;
        let mut total = 0.0;
        for (a, &wa) in tw.iter().enumerate() {
            let mut inner = 0.0;
            for (i, &wi) in sw.iter().enumerate() {
                inner += wi * f(i, a);
            }
            total += wa * inner;
        }
        total
    }

    /// Same weights for a pointwise function of an `n × m` array, row by row.
    fn integrate_rows(&self, v: ArrayView2<f64>, g: impl Fn(f64) -> f64) -> f64 {
        let tw = self.grid.trapezoid_weights();
        v.outer_iter()
            .zip(&self.points.weights)
            .map(|(row, wi)| wi * row.iter().zip(&tw).map(|(x, w)| w * g(*x)).sum::<f64>())
            .sum()
    }
}

/// Pointwise sum of squares over the replicas.
pub fn chi2_transform(z: &Array3<f64>) -> Array2<f64> {
    z.map_axis(Axis(0), |v| v.iter().map(|x| x * x).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SojournEstimate {
    pub u: f64,
    pub horizon: f64,
    pub value: f64,
    pub k: u32,
    pub seed: Option<u64>,
    pub spectrum_digest: String,
}

fn check_threshold(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("threshold {u} must be positive")))
    }
}

/// Discretized `M_T(u) = ∫_0^T ∫ (1{X ≥ u} - P(χ²_k ≥ u)) dν dt`.
pub fn sojourn(sample: &FieldSample, u: f64) -> Result<SojournEstimate> {
    check_threshold(u)?;
    let k = sample.k();
    let tail = chi2_tail(k, u)?;
    let value = sample.integrate_rows(sample.x.view(), |x| if x >= u { 1.0 - tail } else { -tail });
    Ok(SojournEstimate {
        u,
        horizon: sample.grid.horizon,
        value,
        k,
        seed: None,
        spectrum_digest: sample.spectrum_digest.clone(),
    })
}

/// Projection of the discretized functional onto chaos `2q`.
pub fn chaos_projection(sample: &FieldSample, u: f64, q: u32) -> Result<f64> {
    check_threshold(u)?;
    let k = sample.k();
    if q == 0 {
        return Ok(0.0);
    }
    let mut terms = Vec::new();
    for idx in compositions(k, q)? {
        let ln_fact: f64 = idx.iter().map(|&n| ln_factorial(2 * n)).sum();
        terms.push((alpha_closed(k, &idx, u)? * (-ln_fact).exp(), idx));
    }
    let order = 2 * q as usize;
    Ok(sample.integrate(|i, a| {
        let h: Vec<Vec<f64>> = (0..k as usize).map(|j| hermite(order, sample.z[[j, i, a]])).collect();
        terms
            .iter()
            .map(|(c, idx)| c * idx.iter().enumerate().map(|(j, &n)| h[j][2 * n as usize]).product::<f64>())
            .sum()
    }))
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// `(α_{2,0,...,0}(u)/2) Σ_j ∫∫ H_2(Z_j)`, the second chaos of the functional.
pub fn chaos2_projection(sample: &FieldSample, u: f64) -> Result<f64> {
    check_threshold(u)?;
    let k = sample.k();
    let mut idx = vec![0u32; k as usize];
    idx[0] = 1;
    let coef = 0.5 * alpha_closed(k, &idx, u)?;
    let inner: f64 = sample.z.outer_iter().map(|zj| sample.integrate_rows(zj, |z| z * z - 1.0)).sum();
    Ok(coef * inner)
}
