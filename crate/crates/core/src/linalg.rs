use nalgebra::{DMatrix, DVector};

/// Relative singular-value floor below which a design matrix is rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;
/// Residual sums this small relative to `|y|²` are round-off from an exact fit.
const EXACT_FIT_TOLERANCE: f64 = 1e-20;

#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    pub coef: DVector<f64>,
    pub stderr: DVector<f64>,
    pub ssr: f64,
    pub nobs: usize,
}

impl OlsFit {
    /// Gaussian log-likelihood based AIC, `n (ln 2π + ln(ssr/n) + 1) + 2k`;
    /// `-inf` for an exact fit.
    pub fn aic(&self) -> f64 {
        let n = self.nobs as f64;
        let k = self.coef.len() as f64;
        n * ((2.0 * std::f64::consts::PI).ln() + (self.ssr / n).ln() + 1.0) + 2.0 * k
    }
}

/// Least squares through the SVD. Returns `None` for rank-deficient designs
/// or when there are no residual degrees of freedom.
pub(crate) fn ols(y: &DVector<f64>, x: &DMatrix<f64>) -> Option<OlsFit> {
    let (n, k) = x.shape();
    if n <= k {
        return None;
    }
    // equilibrate columns so the factorization does not see the data's units
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|&d| d == 0.0 || !d.is_finite()) {
        return None;
    }
    let mut xs = x.clone();
    for (mut col, d) in xs.column_iter_mut().zip(&norms) {
        col /= *d;
    }
    let svd = xs.svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    if smax <= 0.0 || s.min() <= smax * RANK_TOLERANCE {
        return None;
    }
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let uty = u.transpose() * y;
    let scaled = DVector::from_iterator(k, uty.iter().zip(s.iter()).map(|(a, b)| a / b));
    let mut coef = v_t.transpose() * scaled;
    for (c, d) in coef.iter_mut().zip(&norms) {
        *c /= d;
    }
    let resid = y - x * &coef;
    let mut ssr = resid.norm_squared();
    if ssr <= EXACT_FIT_TOLERANCE * y.norm_squared() {
        ssr = 0.0;
    }
    let sigma2 = ssr / (n - k) as f64;
    // diag((X'X)^-1) = Σ_j V_ij² / s_j²
    let stderr = DVector::from_iterator(
        k,
        (0..k).map(|i| {
            let d: f64 = (0..k).map(|j| (v_t[(j, i)] / s[j]).powi(2)).sum();
            (sigma2 * d).sqrt() / norms[i]
        }),
    );
    Some(OlsFit {
        coef,
        stderr,
        ssr,
        nobs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_exact_line_and_stderr() {
        // y = 1 + 2x + e with hand-checked residuals
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.1, 2.9, 5.1, 6.9];
        let x = DMatrix::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let fit = ols(&DVector::from_row_slice(&ys), &x).unwrap();
        assert_abs_diff_eq!(fit.coef[0], 1.06, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coef[1], 1.96, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.ssr, 0.032, epsilon = 1e-12);
        // se(slope) = sqrt(σ² / Σ(x - x̄)²) = sqrt(0.016 / 5)
        assert_abs_diff_eq!(fit.stderr[1], (0.016f64 / 5.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_rank_deficiency() {
        let x = DMatrix::from_fn(5, 2, |i, _| i as f64);
        assert!(ols(&DVector::from_element(5, 1.0), &x).is_none());
        let x = DMatrix::from_fn(2, 2, |i, j| (i + j) as f64 + 1.0);
        assert!(ols(&DVector::from_element(2, 1.0), &x).is_none());
    }
}
