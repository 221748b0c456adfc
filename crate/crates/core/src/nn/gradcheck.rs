//! Central finite-difference validation of analytic gradients.

use rand::seq::index::sample;

use super::ParamVector;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Outcome of a finite-difference check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub coordinates_checked: usize,
}

/// Compares the analytic gradient of `f` at `params` with central differences
/// on up to `max_coords` randomly chosen coordinates (all of them if the
/// vector is shorter).
///
/// Relative error per coordinate is `|analytic - numeric| / (|numeric| + 1e-12)`.
pub fn finite_diff_check<F>(
    params: &ParamVector,
    mut f: F,
    epsilon: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    finite_diff_check_terms(
        params,
        |p| f(p).map(|(loss, g)| (vec![loss], g)),
        epsilon,
        max_coords,
        seed,
    )
}

/// Like [`finite_diff_check`] for a loss given as a sum of terms. Each term
/// is differenced on its own before summing, so terms untouched by a
/// coordinate cancel exactly instead of burying its change in the rounding
/// error of the total.
pub fn finite_diff_check_terms<F>(
    params: &ParamVector,
    mut f: F,
    epsilon: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamVector) -> Result<(Vec<f64>, ParamVector)>,
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference epsilon must be positive, got {epsilon}"
        )));
    }
    let (_, analytic) = f(params)?;
    if analytic.len() != params.len() {
        return Err(Error::dims("gradient length", params.len(), analytic.len()));
    }
    let n = params.len();
    let coords: Vec<usize> = if max_coords >= n {
        (0..n).collect()
    } else {
        let mut r = rng::stream(seed, Stream::Diagnostic);
        let mut v = sample(&mut r, n, max_coords).into_vec();
        v.sort_unstable();
        v
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coordinate: coords.first().copied().unwrap_or(0),
        coordinates_checked: coords.len(),
    };
    for &i in &coords {
        let orig = params[i];
        probe.as_mut_slice()[i] = orig + epsilon;
        let (fp, _) = f(&probe)?;
        probe.as_mut_slice()[i] = orig - epsilon;
        let (fm, _) = f(&probe)?;
        probe.as_mut_slice()[i] = orig;
        if fp.len() != fm.len() {
            return Err(Error::dims("loss terms", fp.len(), fm.len()));
        }
        let diff: f64 = fp.iter().zip(&fm).map(|(a, b)| a - b).sum();
        let numeric = diff / (2.0 * epsilon);
        let rel = (analytic[i] - numeric).abs() / (numeric.abs() + 1e-12);
        if rel > report.max_rel_error || rel.is_nan() {
            report.max_rel_error = rel;
            report.worst_coordinate = i;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epsilon_rejected() {
        let p = ParamVector::zeros(2);
        let r = finite_diff_check(&p, |x| Ok((0.0, x.clone())), 0.0, 2, 0);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn quadratic_is_exact() {
        let p = ParamVector::from_vec(vec![0.3, -1.2, 2.5]);
        let report = finite_diff_check(
            &p,
            |x| Ok((0.5 * x.norm_sq(), x.clone())),
            1e-5,
            64,
            1,
        )
        .unwrap();
        assert_eq!(report.coordinates_checked, 3);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn split_terms_match_total() {
        let p = ParamVector::from_vec(vec![0.7, -0.2]);
        let report = finite_diff_check_terms(
            &p,
            |x| {
                let terms = vec![x[0] * x[0], 3.0 * x[0] * x[1], 1e-5 * x[1] * x[1]];
                let g = vec![2.0 * x[0] + 3.0 * x[1], 3.0 * x[0] + 2e-5 * x[1]];
                Ok((terms, ParamVector::from_vec(g)))
            },
            1e-5,
            2,
            0,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn wrong_gradient_detected() {
        let p = ParamVector::from_vec(vec![1.0, 2.0]);
        let report =
            finite_diff_check(&p, |x| Ok((x.norm_sq(), x.clone())), 1e-5, 2, 0).unwrap();
        assert!(report.max_rel_error > 0.4);
    }
}
