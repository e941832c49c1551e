use nalgebra::{DMatrix, DVector};

use super::{AccuracyEstimate, LabeledMoments, Method};
use crate::error::{Error, Result};

/// `alpha * a_u + (1 - alpha) * a_l`, clipped to `[-1, 1]`.
pub fn combine_linear(
    a_u: &AccuracyEstimate,
    a_l: &AccuracyEstimate,
    alpha: f64,
) -> Result<AccuracyEstimate> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if a_u.m() != a_l.m() {
        return Err(Error::InvalidInput(format!(
            "estimates disagree on m ({} vs {})",
            a_u.m(),
            a_l.m()
        )));
    }
    let mixed = a_u
        .a_hat
        .iter()
        .zip(&a_l.a_hat)
        .map(|(u, l)| alpha * u + (1.0 - alpha) * l)
        .collect();
    let mut out = AccuracyEstimate::new(mixed, Method::CombinedLinear);
    out.alpha = Some(alpha);
    Ok(out)
}

/// Midpoint of the admissible shrinkage radii `[0, 2(m - 2)]`.
pub fn default_gs_radius(m: usize) -> f64 {
    m.saturating_sub(2) as f64
}

/// `sqrt(v^T S^{-1} v)` with `S` row-major `m x m`, after adding
/// `ridge = 1e-8 * trace(S) / m` to the diagonal.
pub fn mahalanobis_norm(v: &[f64], cov: &[f64]) -> Result<f64> {
    let m = v.len();
    let mut s = DMatrix::from_row_slice(m, m, cov);
    let ridge = 1e-8 * s.trace() / m as f64;
    for i in 0..m {
        s[(i, i)] += ridge;
    }
    let chol = s.cholesky().ok_or_else(|| {
        Error::Numerical("agreement covariance is singular after ridge regularisation".into())
    })?;
    let x = DVector::from_column_slice(v);
    let q = x.dot(&chol.solve(&x));
    if !q.is_finite() || q < 0.0 {
        return Err(Error::Numerical(format!("non-finite Mahalanobis norm ({q})")));
    }
    Ok(q.sqrt())
}

/// Shrink the labelled estimate towards the unlabelled one:
/// `alpha = min(r / ||a_l - a_u||, 1)` in the metric of the estimated
/// covariance of `a_l`, then `alpha * a_u + (1 - alpha) * a_l`.
///
/// `radius` defaults to [`default_gs_radius`].
pub fn combine_green_strawderman(
    a_u: &AccuracyEstimate,
    labeled: &LabeledMoments,
    radius: Option<f64>,
) -> Result<AccuracyEstimate> {
    let m = a_u.m();
    if m < 3 {
        return Err(Error::InvalidInput(format!(
            "Green-Strawderman combination needs m >= 3, got {m}"
        )));
    }
    if labeled.m() != m {
        return Err(Error::InvalidInput("labelled sample has a different m".into()));
    }
    let r = radius.unwrap_or_else(|| default_gs_radius(m));
    if !(0.0..=2.0 * (m as f64 - 2.0)).contains(&r) {
        return Err(Error::InvalidInput(format!(
            "radius must lie in [0, {}], got {r}",
            2 * (m - 2)
        )));
    }
    let a_l = AccuracyEstimate::new(labeled.agreement().to_vec(), Method::Labeled);
    let diff: Vec<f64> = a_l.a_hat.iter().zip(&a_u.a_hat).map(|(l, u)| l - u).collect();
    let alpha = if diff.iter().all(|&d| d == 0.0) {
        1.0
    } else {
        let n_l = labeled.n() as f64;
        let cov: Vec<f64> = labeled.agreement_covariance().iter().map(|c| c / n_l).collect();
        let norm = mahalanobis_norm(&diff, &cov)?;
        if norm == 0.0 {
            1.0
        } else {
            (r / norm).min(1.0)
        }
    };
    let mut out = combine_linear(a_u, &a_l, alpha)?;
    out.method = Method::CombinedGreenStrawderman;
    out.radius = Some(r);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SourceMatrix;

    fn est(v: &[f64]) -> AccuracyEstimate {
        AccuracyEstimate::new(v.to_vec(), Method::TripletMean)
    }

    #[test]
    fn endpoints_and_midpoint() {
        let (u, l) = (est(&[0.4]), est(&[0.8]));
        assert_eq!(combine_linear(&u, &l, 0.0).unwrap().a_hat, l.a_hat);
        assert_eq!(combine_linear(&u, &l, 1.0).unwrap().a_hat, u.a_hat);
        assert!((combine_linear(&u, &l, 0.5).unwrap().a_hat[0] - 0.6).abs() < 1e-15);
        assert!(combine_linear(&u, &l, 1.5).is_err());
    }

    #[test]
    fn identity_covariance_norm() {
        let cov = [4.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 4.0];
        let n = mahalanobis_norm(&[0.3, 0.4, 0.0], &cov).unwrap();
        assert!((n - 0.25).abs() < 1e-8);
    }

    fn labeled_sample() -> LabeledMoments {
        let rows = vec![
            vec![1, 1, -1],
            vec![1, -1, 1],
            vec![-1, 1, 1],
            vec![1, 1, 1],
            vec![-1, -1, 1],
            vec![1, -1, -1],
        ];
        let y = vec![1, 1, 1, -1, -1, -1];
        LabeledMoments::from_matrix(&SourceMatrix::from_rows(&rows, Some(y)).unwrap()).unwrap()
    }

    #[test]
    fn equal_estimates_return_unlabelled() {
        let stats = labeled_sample();
        let u = est(stats.agreement());
        let out = combine_green_strawderman(&u, &stats, None).unwrap();
        assert_eq!(out.alpha, Some(1.0));
        assert_eq!(out.a_hat, u.a_hat);
    }

    #[test]
    fn small_distance_clips_alpha_to_one() {
        let stats = labeled_sample();
        let shifted: Vec<f64> = stats.agreement().iter().map(|a| a + 1e-4).collect();
        let out = combine_green_strawderman(&est(&shifted), &stats, Some(1.0)).unwrap();
        assert_eq!(out.alpha, Some(1.0));
    }
}
