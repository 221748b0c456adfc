//! Gradient evaluation at a point shifted along another direction.

use crate::error::{Error, Result};
use crate::nn::ParamVector;

/// Resolution of the unit direction. Components are snapped to multiples of
/// `1 / DIRECTION_GRID` so that `δ` and any positive rescaling of it yield
/// bit-identical shifts.
pub const DIRECTION_GRID: f64 = (1u64 << 24) as f64;

/// Norm below which a direction is treated as zero.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

/// `δ / ‖δ‖₂` on the direction grid, or `None` when `‖δ‖₂` is below
/// [`MIN_DIRECTION_NORM`].
pub fn unit_direction(delta: &ParamVector) -> Option<ParamVector> {
    let norm = delta.norm();
    if !(norm >= MIN_DIRECTION_NORM) || !norm.is_finite() {
        return None;
    }
    Some(ParamVector::from_vec(
        delta
            .as_slice()
            .iter()
            .map(|v| (v / norm * DIRECTION_GRID).round() / DIRECTION_GRID)
            .collect(),
    ))
}

/// Evaluates `f` at `params + scale · direction`, then restores `params` bit-exactly.
pub fn perturbed_gradient<F>(
    params: &mut ParamVector,
    direction: &ParamVector,
    scale: f64,
    mut f: F,
) -> Result<(f64, ParamVector)>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    if direction.len() != params.len() {
        return Err(Error::dims("perturbation direction", params.len(), direction.len()));
    }
    let saved = params.clone();
    params.axpy(scale, direction);
    let out = f(params);
    *params = saved;
    let (loss, grad) = out?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss} at rectified point")));
    }
    Ok((loss, grad))
}

/// Gradient of `f` at `params + λ_g · δ/‖δ‖₂`.
///
/// Falls back to the gradient at `params` when `δ` is absent, (near) zero,
/// or `λ_g` is zero.
pub fn rectified_gradient<F>(
    params: &mut ParamVector,
    nsg: Option<&ParamVector>,
    lambda_g: f64,
    mut f: F,
) -> Result<(f64, ParamVector)>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    if !params.is_finite() {
        return Err(Error::NonFinite("model parameters before rectification".into()));
    }
    let direction = match nsg {
        Some(d) if lambda_g != 0.0 => {
            if d.len() != params.len() {
                return Err(Error::dims("non-self gradient", params.len(), d.len()));
            }
            unit_direction(d)
        }
        _ => None,
    };
    match direction {
        Some(u) => perturbed_gradient(params, &u, lambda_g, f),
        None => f(params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f(θ) = ½ θᵀAθ with a fixed symmetric A.
    fn quadratic(theta: &ParamVector) -> Result<(f64, ParamVector)> {
        let a = [[2.0, 0.5, 0.0], [0.5, 1.0, -0.25], [0.0, -0.25, 3.0]];
        let t = theta.as_slice();
        let g: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i][j] * t[j]).sum()).collect();
        let f = 0.5 * t.iter().zip(&g).map(|(x, y)| x * y).sum::<f64>();
        Ok((f, ParamVector::from_vec(g)))
    }

    #[test]
    fn lambda_zero_is_unperturbed() {
        let mut theta = ParamVector::from_vec(vec![1.0, -2.0, 0.5]);
        let delta = ParamVector::from_vec(vec![0.3, 0.1, -0.9]);
        let a = rectified_gradient(&mut theta, Some(&delta), 0.0, quadratic).unwrap();
        assert_eq!(a, quadratic(&theta).unwrap());
    }

    #[test]
    fn closed_form_shift_along_e1() {
        let theta0 = ParamVector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut theta = theta0.clone();
        let e1 = ParamVector::from_vec(vec![1.0, 0.0, 0.0]);
        let (_, g) = rectified_gradient(&mut theta, Some(&e1), 0.5, quadratic).unwrap();
        // A (θ + 0.5 e1) = (2·1.5 + 0.5·-2, 0.5·1.5 + -2 - 0.25·0.5, 0.25·2 + 1.5)
        assert_eq!(g.as_slice(), &[2.0, -1.375, 2.0]);
        assert!(theta.bit_eq(&theta0));
    }

    #[test]
    fn zero_or_missing_direction_falls_back() {
        let mut theta = ParamVector::from_vec(vec![1.0, 1.0, 1.0]);
        let plain = quadratic(&theta).unwrap();
        assert_eq!(rectified_gradient(&mut theta, None, 0.5, quadratic).unwrap(), plain);
        let tiny = ParamVector::from_vec(vec![1e-14, 0.0, 0.0]);
        assert_eq!(rectified_gradient(&mut theta, Some(&tiny), 0.5, quadratic).unwrap(), plain);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut theta = ParamVector::from_vec(vec![1.0]);
        let d = ParamVector::from_vec(vec![1.0]);
        let r = rectified_gradient(&mut theta, Some(&d), 1.0, |_| {
            Ok((f64::NAN, ParamVector::zeros(1)))
        });
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert_eq!(theta[0], 1.0);
    }
}
