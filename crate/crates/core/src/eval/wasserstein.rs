use crate::error::{Error, Result};

/// Exact 1-D Wasserstein-1 distance between two equal-size empirical
/// measures: the mean absolute difference of order statistics.
///
/// Inputs need not be sorted; copies are sorted internally.
pub fn w1_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("W1 needs non-empty samples".into()));
    }
    if a.len() != b.len() {
        return Err(Error::dims("W1 sample sizes", a.len(), b.len()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Mean over coordinates of the 1-D W1 between matching columns of two
/// row-sample sets.
pub fn w1_per_coordinate(a: &crate::nn::Matrix, b: &crate::nn::Matrix) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(Error::dims("W1 coordinate count", a.cols(), b.cols()));
    }
    let mut total = 0.0;
    for j in 0..a.cols() {
        let ca: Vec<f64> = (0..a.rows()).map(|i| a.get(i, j)).collect();
        let cb: Vec<f64> = (0..b.rows()).map(|i| b.get(i, j)).collect();
        total += w1_empirical_1d(&ca, &cb)?;
    }
    Ok(total / a.cols() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(w1_empirical_1d(&[0.3, 1.0], &[1.0, 0.3]).unwrap(), 0.0);
        assert_eq!(w1_empirical_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(w1_empirical_1d(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 2.0);
        assert!(w1_empirical_1d(&[], &[]).is_err());
        assert!(w1_empirical_1d(&[1.0], &[1.0, 2.0]).is_err());
    }
}
