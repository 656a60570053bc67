//! Compact two-point homogeneous spaces and their zonal harmonic analysis.
//!
//! Every covariance in this crate reaches the manifold only through the
//! addition formula, i.e. through Jacobi polynomials `P_l^{(α,β)}` of the
//! pair cosine `cos(ε ρ(x, y))`. That is why the catalog carries just the
//! Jacobi parameters, the distance scaling and the admissible degree set.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};

const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sphere,
    RealProjective,
    ComplexProjective,
    QuaternionicProjective,
    CayleyPlane,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Sphere,
        Family::RealProjective,
        Family::ComplexProjective,
        Family::QuaternionicProjective,
        Family::CayleyPlane,
    ];
}

/// A two-point homogeneous space together with its harmonic-analysis constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub family: Family,
    pub d: u32,
    /// Jacobi α.
    pub alpha: f64,
    /// Jacobi β.
    pub beta_j: f64,
    /// Distance scaling ε: the addition formula is evaluated at `cos(ε ρ)`.
    pub eps: f64,
}

impl ManifoldSpec {
    /// Looks up `(family, d)` in the catalog.
    pub fn new(family: Family, d: u32) -> Result<Self> {
        let ok = match family {
            Family::Sphere | Family::RealProjective => d >= 2,
            Family::ComplexProjective => d >= 4 && d.is_multiple_of(2),
            Family::QuaternionicProjective => d >= 8 && d.is_multiple_of(4),
            Family::CayleyPlane => d == 16,
        };
        if !ok {
            return Err(Error::InvalidSpace { family, d });
        }
        let half = (d as f64 - 2.0) / 2.0;
        let (alpha, beta_j) = match family {
            Family::Sphere | Family::RealProjective => (half, half),
            Family::ComplexProjective => (half, 0.0),
            Family::QuaternionicProjective => (half, 1.0),
            Family::CayleyPlane => (7.0, 3.0),
        };
        let eps = if family == Family::RealProjective { 0.5 } else { 1.0 };
        Ok(Self { family, d, alpha, beta_j, eps })
    }

    /// Membership in the degree set Λ (even degrees on real projective spaces).
    pub fn contains_degree(&self, degree: u32) -> bool {
        self.family != Family::RealProjective || degree.is_multiple_of(2)
    }

    /// Admissible degrees `0..=max_degree` in increasing order.
    pub fn degrees(&self, max_degree: u32) -> impl Iterator<Item = u32> + '_ {
        (0..=max_degree).filter(move |&l| self.contains_degree(l))
    }

    fn check_degree(&self, degree: u32) -> Result<()> {
        if self.contains_degree(degree) {
            Ok(())
        } else {
            Err(Error::DegreeNotInLambda { family: self.family, degree })
        }
    }

    /// Laplace–Beltrami eigenvalue `-l(l + α + β + 1)`.
    pub fn eigenvalue(&self, degree: u32) -> Result<f64> {
        self.check_degree(degree)?;
        let l = degree as f64;
        Ok(-l * (l + self.alpha + self.beta_j + 1.0))
    }

    /// Dimension of the eigenspace of degree `l`.
    pub fn dim_eigenspace(&self, degree: u32) -> Result<u64> {
        self.check_degree(degree)?;
        let (a, b) = (self.alpha, self.beta_j);
        let l = degree as f64;
        let log_dim = (2.0 * l + a + b + 1.0).ln() + ln_gamma(b + 1.0) + ln_gamma(l + a + b + 1.0)
            + ln_gamma(l + a + 1.0)
            - ln_gamma(a + 1.0)
            - ln_gamma(a + b + 2.0)
            - ln_gamma(l + 1.0)
            - ln_gamma(l + b + 1.0);
        let dim = log_dim.exp();
        let rounded = dim.round();
        if (dim - rounded).abs() > 1e-6 * rounded.max(1.0) || rounded < 1.0 {
            return Err(domain(format!(
                "eigenspace dimension {dim} of degree {degree} on {:?} is not a positive integer",
                self.family
            )));
        }
        Ok(rounded as u64)
    }

    /// `P_l^{(α,β)}(1)`.
    pub fn jacobi_at_one(&self, degree: u32) -> f64 {
        jacobi_at_one(self.alpha, degree)
    }

    /// Addition-formula weight `κ_l = dim(Y_l) / P_l(1)`.
    pub fn kappa(&self, degree: u32) -> Result<f64> {
        Ok(self.dim_eigenspace(degree)? as f64 / self.jacobi_at_one(degree))
    }

    /// `[P_0(x), ..., P_L(x)]` with this space's Jacobi parameters.
    pub fn jacobi(&self, max_degree: u32, x: f64) -> Result<Vec<f64>> {
        jacobi_eval(self.alpha, self.beta_j, max_degree, x)
    }

    /// Pair-cosine quadrature for this space, see [`PairQuadrature`].
    pub fn pair_cosine_quadrature(&self, n_nodes: usize) -> PairQuadrature {
        PairQuadrature::gauss_jacobi(self.alpha, self.beta_j, n_nodes)
    }

    /// Draws `n` independent uniform points. Only spheres and real projective
    /// spaces have an ambient model here.
    pub fn sample_points<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PointSet> {
        if !matches!(self.family, Family::Sphere | Family::RealProjective) {
            return Err(Error::UnsupportedFamily(self.family));
        }
        if n == 0 {
            return Err(domain("at least one point is required"));
        }
        let dim = self.d as usize + 1;
        let mut coords = Array2::<f64>::zeros((n, dim));
        for mut row in coords.rows_mut() {
            let norm = loop {
                for v in row.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = row.dot(&row).sqrt();
                if norm > 1e-300 {
                    break norm;
                }
            };
            row.mapv_inplace(|v| v / norm);
            if self.family == Family::RealProjective {
                // canonical representative of the line: first nonzero coordinate positive
                if let Some(&first) = row.iter().find(|v| **v != 0.0) {
                    if first < 0.0 {
                        row.mapv_inplace(|v| -v);
                    }
                }
            }
        }
        Ok(PointSet { space: *self, coords, weights: vec![1.0 / n as f64; n] })
    }

    /// `cos(ε ρ(x, y))` for two ambient unit vectors.
    ///
    /// On real projective spaces `ρ = 2 arccos |<x, y>|`, so the result is
    /// `|<x, y>|` and antipodal representatives are identified.
    pub fn geodesic_cosine(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if !matches!(self.family, Family::Sphere | Family::RealProjective) {
            return Err(Error::UnsupportedFamily(self.family));
        }
        let dim = self.d as usize + 1;
        if x.len() != dim || y.len() != dim {
            return Err(domain(format!("expected ambient vectors of length {dim}")));
        }
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let ny: f64 = y.iter().map(|v| v * v).sum();
        if (nx - 1.0).abs() > UNIT_TOL || (ny - 1.0).abs() > UNIT_TOL {
            return Err(domain("geodesic cosine needs unit vectors"));
        }
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
        Ok(match self.family {
            Family::RealProjective => dot.abs(),
            _ => dot,
        })
    }
}

/// Points on a manifold with quadrature weights for the normalized measure.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub space: ManifoldSpec,
    /// One ambient unit vector per row.
    pub coords: Array2<f64>,
    pub weights: Vec<f64>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    /// Symmetric matrix of pair cosines `cos(ε ρ_ij)`.
    pub fn cosine_matrix(&self) -> Array2<f64> {
        let mut gram = self.coords.dot(&self.coords.t());
        let n = gram.nrows();
        for i in 0..n {
            gram[[i, i]] = 1.0;
        }
        gram.mapv_inplace(|v| {
            let v = v.clamp(-1.0, 1.0);
            if self.space.family == Family::RealProjective {
                v.abs()
            } else {
                v
            }
        });
        gram
    }
}

/// `P_l^{(α,β)}(1) = binom(l + α, l)`.
pub fn jacobi_at_one(alpha: f64, degree: u32) -> f64 {
    if alpha.fract() == 0.0 && degree < 150 {
        (1..=degree).fold(1.0, |acc, i| acc * (alpha + i as f64) / i as f64)
    } else {
        let l = degree as f64;
        (ln_gamma(l + alpha + 1.0) - ln_gamma(l + 1.0) - ln_gamma(alpha + 1.0)).exp()
    }
}

/// Jacobi polynomials `P_0(x), ..., P_L(x)` by the three-term recurrence.
pub fn jacobi_eval(alpha: f64, beta: f64, max_degree: u32, x: f64) -> Result<Vec<f64>> {
    if !(x.abs() <= 1.0 + 1e-12) {
        return Err(domain(format!("Jacobi argument {x} outside [-1, 1]")));
    }
    Ok(jacobi_unchecked(alpha, beta, max_degree as usize, x))
}

pub(crate) fn jacobi_unchecked(alpha: f64, beta: f64, max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(1.0);
    if max_degree == 0 {
        return out;
    }
    let ab = alpha + beta;
    out.push(0.5 * (alpha - beta) + 0.5 * (ab + 2.0) * x);
    for n in 1..max_degree {
        let nf = n as f64;
        let c = 2.0 * nf + ab;
        let a1 = 2.0 * (nf + 1.0) * (nf + ab + 1.0) * c;
        let a2 = (c + 1.0) * (alpha * alpha - beta * beta);
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (nf + alpha) * (nf + beta) * (c + 2.0);
        let next = ((a2 + a3 * x) * out[n] - a4 * out[n - 1]) / a1;
        out.push(next);
    }
    out
}

/// Squared norm of `P_j^{(α,β)}` under the probability measure proportional
/// to `(1-u)^α (1+u)^β` on `[-1, 1]`.
pub fn jacobi_norm_sq(alpha: f64, beta: f64, j: u32) -> f64 {
    let j = j as f64;
    let ab = alpha + beta;
    (ln_gamma(ab + 2.0) + ln_gamma(j + alpha + 1.0) + ln_gamma(j + beta + 1.0)
        - (2.0 * j + ab + 1.0).ln()
        - ln_gamma(j + ab + 1.0)
        - ln_gamma(j + 1.0)
        - ln_gamma(alpha + 1.0)
        - ln_gamma(beta + 1.0))
    .exp()
}

/// Gauss–Jacobi rule for the law of the pair cosine `cos(ε ρ(x, y))` of two
/// independent uniform points, so that
/// `∬ F(cos ερ(x,y)) dν(x) dν(y) = Σ_i w_i F(u_i)` for polynomial `F` of
/// degree at most `2n - 1`.
#[derive(Debug, Clone)]
pub struct PairQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PairQuadrature {
    pub fn gauss_jacobi(alpha: f64, beta: f64, n_nodes: usize) -> Self {
        let n = n_nodes.max(1);
        let ab = alpha + beta;

        // Jacobi matrix of the orthonormal recurrence
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let c = 2.0 * i as f64 + ab;
                if i == 0 {
                    (beta - alpha) / (ab + 2.0)
                } else {
                    (beta * beta - alpha * alpha) / (c * (c + 2.0))
                }
            })
            .collect();
        let off_sq: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 {
                    return 0.0;
                }
                let k = i as f64;
                let c = 2.0 * k + ab;
                4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (c * c * (c + 1.0) * (c - 1.0))
            })
            .collect();

        let mut nodes: Vec<f64> =
            (0..n).map(|i| tridiag_eigenvalue(&diag, &off_sq, i)).collect();

        // Newton polish on P_n, with P_n' = (n + α + β + 1)/2 · P_{n-1}^{(α+1, β+1)}
        let nf = n as f64;
        for x in nodes.iter_mut() {
            for _ in 0..8 {
                let p = jacobi_unchecked(alpha, beta, n, *x)[n];
                let dp = 0.5 * (nf + ab + 1.0) * jacobi_unchecked(alpha + 1.0, beta + 1.0, n - 1, *x)[n - 1];
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                let next = (*x - step).clamp(-1.0, 1.0);
                let done = (next - *x).abs() <= 1e-14 * x.abs().max(1e-3);
                *x = next;
                if done {
                    break;
                }
            }
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let norms: Vec<f64> = (0..n).map(|j| jacobi_norm_sq(alpha, beta, j as u32)).collect();
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                let p = jacobi_unchecked(alpha, beta, n - 1, x);
                1.0 / p.iter().zip(&norms).map(|(pj, h)| pj * pj / h).sum::<f64>()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&u, &w)| w * f(u)).sum()
    }
}

/// k-th smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
fn tridiag_eigenvalue(diag: &[f64], off_sq: &[f64], k: usize) -> f64 {
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..diag.len() {
            q = if i == 0 { diag[0] - x } else { diag[i] - x - off_sq[i] / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
