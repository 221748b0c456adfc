use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// Number of clients drawn per round: `round(rate · k)`, at least one.
pub fn sample_size(k: usize, rate: f64) -> usize {
    ((rate * k as f64).round() as usize).clamp(1, k)
}

/// Uniform sample without replacement, returned in ascending id order.
///
/// With `rectification` on, fewer than two participants per round is a
/// configuration error: the non-self gradient needs another client.
pub fn sample_clients<R: Rng + ?Sized>(
    k: usize,
    rate: f64,
    rng: &mut R,
    rectification: bool,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config(vec!["client count must be ≥ 1".into()]));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Config(vec![format!(
            "sampling rate must be in (0, 1], got {rate}"
        )]));
    }
    let m = sample_size(k, rate);
    if rectification && m < 2 {
        return Err(Error::Config(vec![format!(
            "path rectification needs ≥ 2 clients per round, rate {rate} × {k} clients gives {m}"
        )]));
    }
    let mut ids = sample(rng, k, m).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    #[test]
    fn full_and_half_participation() {
        let mut r = rng::stream(1, Stream::Selection);
        assert_eq!(sample_clients(10, 1.0, &mut r, true).unwrap(), (0..10).collect::<Vec<_>>());
        let s = sample_clients(10, 0.5, &mut r, true).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn deterministic_sequence() {
        let seq = |seed| {
            let mut r = rng::stream(seed, Stream::Selection);
            (0..5).map(|_| sample_clients(20, 0.25, &mut r, false).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(seq(4), seq(4));
    }

    #[test]
    fn rectification_needs_two() {
        let mut r = rng::stream(1, Stream::Selection);
        assert!(matches!(sample_clients(10, 0.1, &mut r, true), Err(Error::Config(_))));
        assert_eq!(sample_clients(10, 0.1, &mut r, false).unwrap().len(), 1);
        assert!(sample_clients(10, 0.0, &mut r, false).is_err());
    }
}
