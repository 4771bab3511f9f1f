//! Thin SVD helpers for the strongly rectangular matrices of the compressed
//! influence functional.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `a = u · diag(sigma) · vh` with `k = min(m, n)` columns in `u`,
/// singular values in descending order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<Complex64>,
    pub sigma: Vec<f64>,
    pub vh: DMatrix<Complex64>,
}

impl ThinSvd {
    /// Number of leading singular values with `σ_k ≥ ε · σ_max`.
    /// Values tied exactly at the boundary are kept.
    pub fn kept_rank(&self, threshold: f64) -> usize {
        let Some(&max) = self.sigma.first() else {
            return 0;
        };
        let cut = threshold * max;
        self.sigma.iter().take_while(|&&s| s >= cut).count().max(1)
    }
}

/// Thin SVD computed with faer; nalgebra's bidiagonal SVD loses several
/// digits on the tightly clustered spectra produced by the propagation.
pub fn thin_svd(a: &DMatrix<Complex64>) -> Result<ThinSvd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Linalg(format!("SVD of an empty {m}x{n} matrix")));
    }
    let mat = faer::Mat::<faer::c64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = mat
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("SVD of a {m}x{n} matrix failed: {e:?}")))?;
    let k = m.min(n);
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok(ThinSvd {
        u: DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        sigma: (0..k).map(|j| s[j].re).collect(),
        vh: DMatrix::from_fn(k, n, |i, j| v[(j, i)].conj()),
    })
}

/// Largest entrywise modulus of `a − b`.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
