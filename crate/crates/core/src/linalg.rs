//! Factorization of positive semidefinite covariance matrices.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// `A ≈ L Lᵀ` with `L` of shape `n × rank`.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    pub l: Array2<f64>,
}

impl LowRankFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    /// `L g` for a standard normal vector `g` of length `rank`.
    pub fn apply(&self, g: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.l.rows()) {
            *o = row.dot(&g);
        }
    }
}

/// Diagonally pivoted Cholesky of a symmetric PSD matrix.
///
/// A relative jitter `rel_jitter · max diag` is added to the diagonal and the
/// elimination stops once every remaining pivot is below that level, so
/// rank-deficient Gram matrices yield a thin factor. A remaining diagonal
/// entry that goes clearly negative means the input is not PSD.
pub fn psd_factor(a: &Array2<f64>, rel_jitter: f64) -> Result<LowRankFactor> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::FactorizationFailure("matrix is not square".into()));
    }
    if n == 0 {
        return Ok(LowRankFactor { l: Array2::zeros((0, 0)) });
    }
    let max_diag = (0..n).map(|i| a[[i, i]]).fold(f64::MIN, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return Err(Error::FactorizationFailure(format!("nonpositive or non-finite diagonal (max {max_diag})")));
    }
    let jitter = rel_jitter * max_diag;
    let stop = 16.0 * jitter + f64::EPSILON * max_diag * n as f64;
    let mut diag: Vec<f64> = (0..n).map(|i| a[[i, i]] + jitter).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    // columns of L stored as rows for contiguous access
    let mut cols: Vec<Vec<f64>> = Vec::new();

    for k in 0..n {
        let (piv_pos, &piv_val) = diag[k..]
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .map(|(i, v)| (i + k, v))
            .unwrap();
        if piv_val <= stop {
            break;
        }
        perm.swap(k, piv_pos);
        diag.swap(k, piv_pos);
        for col in cols.iter_mut() {
            col.swap(k, piv_pos);
        }
        let p = perm[k];
        let root = piv_val.sqrt();
        let mut col = vec![0.0; n];
        col[k] = root;
        for i in (k + 1)..n {
            let mut s = a[[perm[i], p]];
            for c in &cols {
                s -= c[i] * c[k];
            }
            let v = s / root;
            col[i] = v;
            diag[i] -= v * v;
            if diag[i] < -1e-8 * max_diag {
                return Err(Error::FactorizationFailure(format!(
                    "matrix is not positive semidefinite (residual pivot {})",
                    diag[i]
                )));
            }
        }
        cols.push(col);
    }

    let rank = cols.len();
    let mut l = Array2::<f64>::zeros((n, rank));
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            l[[perm[i], j]] = v;
        }
    }
    Ok(LowRankFactor { l })
}
