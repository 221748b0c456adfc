//! Non-self gradients: the previous round's aggregate update of every
//! participant except the querying client.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::ParamVector;

/// `δ_i = -η_g η_l · mean_{k ∈ S_{t-1} \ {i}} Δ_k^{t-1}`, summed in ascending id order.
pub fn non_self_gradient(
    prev_deltas: &BTreeMap<usize, ParamVector>,
    client: usize,
    eta_g: f64,
    eta_l: f64,
) -> Result<ParamVector> {
    let mut others = prev_deltas.iter().filter(|(&k, _)| k != client);
    let (_, first) = others
        .next()
        .ok_or(Error::NoNonSelfHistory { client })?;
    let mut sum = first.clone();
    let mut count = 1usize;
    for (_, d) in others {
        if d.len() != sum.len() {
            return Err(Error::dims("non-self gradient delta", sum.len(), d.len()));
        }
        sum.add_assign(d);
        count += 1;
    }
    sum.scale(-eta_g * eta_l / count as f64);
    Ok(sum)
}

/// Client-side reconstruction from consecutive global models.
///
/// `global_delta` is `θ^t - θ^{t-1}`. A client that took part last round
/// removes its own contribution `own_share · Δ_k^{t-1}`; with mean
/// aggregation that share is `η_g / |S_{t-1}|`, and `1.0` gives the literal
/// `Δθ^t - Δ_k^{t-1}` form.
pub fn non_self_gradient_cf(
    global_delta: &ParamVector,
    own_last_delta: Option<&ParamVector>,
    selected_last_round: bool,
    own_share: f64,
) -> Result<ParamVector> {
    if !selected_last_round {
        return Ok(global_delta.clone());
    }
    let own = own_last_delta.ok_or_else(|| {
        Error::StateCorruption(
            "client marked as selected last round but holds no cached delta".into(),
        )
    })?;
    if own.len() != global_delta.len() {
        return Err(Error::dims("own cached delta", global_delta.len(), own.len()));
    }
    let mut out = global_delta.clone();
    out.axpy(-own_share, own);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(v.to_vec())
    }

    #[test]
    fn excludes_self() {
        let mut prev = BTreeMap::new();
        prev.insert(1, pv(&[1.0, 2.0]));
        prev.insert(4, pv(&[3.0, -1.0]));
        let d = non_self_gradient(&prev, 1, 1.0, 0.01).unwrap();
        assert_eq!(d, pv(&[-0.03, 0.01]));
        // vacuous exclusion averages both
        let d = non_self_gradient(&prev, 7, 2.0, 0.5).unwrap();
        assert_eq!(d, pv(&[-2.0, -0.5]));
    }

    #[test]
    fn no_others_is_an_error() {
        let mut prev = BTreeMap::new();
        prev.insert(3, pv(&[1.0]));
        assert!(matches!(
            non_self_gradient(&prev, 3, 1.0, 1.0),
            Err(Error::NoNonSelfHistory { client: 3 })
        ));
        assert!(non_self_gradient(&BTreeMap::new(), 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_history_gives_zero() {
        let mut prev = BTreeMap::new();
        prev.insert(0, pv(&[0.0, 0.0]));
        prev.insert(1, pv(&[0.0, 0.0]));
        assert_eq!(non_self_gradient(&prev, 0, 1.0, 0.1).unwrap().norm(), 0.0);
    }

    #[test]
    fn cf_cases() {
        let g = pv(&[1.0, -2.0]);
        assert_eq!(non_self_gradient_cf(&g, None, false, 1.0).unwrap(), g);
        assert_eq!(
            non_self_gradient_cf(&g, Some(&g), true, 1.0).unwrap(),
            pv(&[0.0, 0.0])
        );
        assert_eq!(
            non_self_gradient_cf(&pv(&[0.0, 0.0]), None, false, 1.0).unwrap().norm(),
            0.0
        );
        assert!(matches!(
            non_self_gradient_cf(&g, None, true, 1.0),
            Err(Error::StateCorruption(_))
        ));
    }
}
