//! Friedman test and Nemenyi post-hoc critical distance over algorithm ranks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Scores of `k` algorithms on `N` scenarios, with per-scenario ranks
/// (1 = best, ties share the average rank).
#[derive(Debug, Clone, PartialEq)]
pub struct RankMatrix {
    pub scores: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
}

impl RankMatrix {
    /// `scores[scenario][algorithm]`; higher scores rank better.
    pub fn from_scores(scores: Vec<Vec<f64>>) -> Result<Self> {
        let k = scores.first().map_or(0, Vec::len);
        if scores.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("ragged score matrix".into()));
        }
        if scores.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN score".into()));
        }
        let ranks = scores.iter().map(|row| rank_descending(row)).collect();
        Ok(RankMatrix { scores, ranks })
    }

    pub fn num_scenarios(&self) -> usize {
        self.ranks.len()
    }

    pub fn num_algorithms(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }

    pub fn average_ranks(&self) -> Vec<f64> {
        let n = self.num_scenarios() as f64;
        (0..self.num_algorithms())
            .map(|j| self.ranks.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect()
    }
}

/// Ranks with 1 for the largest value; tied values get their mean rank.
fn rank_descending(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub critical_value: f64,
    pub significant: bool,
}

/// `χ²_F = 12N / (k(k+1)) · [Σ_j R̄_j² - k(k+1)²/4]`, compared against the
/// χ²(k-1) quantile at `1 - alpha`.
pub fn friedman_statistic(ranks: &RankMatrix, alpha: f64) -> Result<FriedmanResult> {
    let n = ranks.num_scenarios();
    let k = ranks.num_algorithms();
    if n < 2 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "Friedman test needs N ≥ 2 and k ≥ 2, got N = {n}, k = {k}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = ranks.average_ranks().iter().map(|r| r * r).sum();
    let chi2 = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let dist = ChiSquared::new(kf - 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let critical_value = dist.inverse_cdf(1.0 - alpha);
    Ok(FriedmanResult {
        chi2,
        critical_value,
        significant: chi2 > critical_value,
    })
}

/// Two-tailed Nemenyi `q_α` for k = 2..=20 (studentized range at infinite
/// degrees of freedom divided by √2).
const Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    if !(2..=20).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "Nemenyi table covers 2 ≤ k ≤ 20, got k = {k}"
        )));
    }
    let table = if alpha == 0.05 {
        &Q_05
    } else if alpha == 0.10 {
        &Q_10
    } else {
        return Err(Error::InvalidArgument(format!(
            "Nemenyi table available for alpha 0.05 and 0.10, got {alpha}"
        )));
    };
    Ok(table[k - 2])
}

/// `CD = q_α(k) · sqrt(k(k+1) / (6N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Nemenyi test needs N ≥ 2, got {n}")));
    }
    let q = nemenyi_q(k, alpha)?;
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NemenyiResult {
    pub average_ranks: Vec<f64>,
    pub critical_distance: f64,
    /// `significant[a][b]`: average ranks of a and b differ by more than CD.
    pub significant: Vec<Vec<bool>>,
    pub friedman: FriedmanResult,
}

pub fn nemenyi_test(ranks: &RankMatrix, alpha: f64) -> Result<NemenyiResult> {
    let friedman = friedman_statistic(ranks, alpha)?;
    let k = ranks.num_algorithms();
    let cd = nemenyi_cd(k, ranks.num_scenarios(), alpha)?;
    let avg = ranks.average_ranks();
    let significant = (0..k)
        .map(|a| (0..k).map(|b| (avg[a] - avg[b]).abs() > cd).collect())
        .collect();
    Ok(NemenyiResult {
        average_ranks: avg,
        critical_distance: cd,
        significant,
        friedman,
    })
}

/// Square matrix of pairwise verdicts with average ranks in the first column.
pub fn write_nemenyi_csv<W: std::io::Write>(names: &[String], result: &NemenyiResult, w: W) -> Result<()> {
    if names.len() != result.average_ranks.len() {
        return Err(Error::dims("algorithm names", result.average_ranks.len(), names.len()));
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["algo".to_string(), "avg_rank".to_string()];
    header.extend(names.iter().cloned());
    out.write_record(&header)?;
    for (a, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone(), format!("{}", result.average_ranks[a])];
        for b in 0..names.len() {
            rec.push(if a == b {
                "-".into()
            } else if result.significant[a][b] {
                "significant".into()
            } else {
                "ns".into()
            });
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_averaging() {
        assert_eq!(rank_descending(&[0.9, 0.5, 0.9, 0.1]), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(rank_descending(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn dominance_gives_n() {
        let m = RankMatrix::from_scores(vec![vec![0.9, 0.1]; 5]).unwrap();
        let f = friedman_statistic(&m, 0.05).unwrap();
        assert!((f.chi2 - 5.0).abs() < 1e-12);
        assert!(f.significant); // χ²(1) critical ≈ 3.841
    }

    #[test]
    fn all_tied_is_zero() {
        let m = RankMatrix::from_scores(vec![vec![0.5, 0.5, 0.5]; 4]).unwrap();
        let f = friedman_statistic(&m, 0.05).unwrap();
        assert_eq!(f.chi2, 0.0);
        assert!(!f.significant);
    }

    #[test]
    fn cd_examples() {
        assert!((nemenyi_cd(2, 6, 0.05).unwrap() - 1.960 * (1.0f64 / 6.0).sqrt()).abs() < 1e-15);
        assert!((nemenyi_cd(2, 6, 0.05).unwrap() - 0.800).abs() < 1e-3);
        let a = nemenyi_cd(5, 10, 0.05).unwrap();
        let b = nemenyi_cd(5, 20, 0.05).unwrap();
        assert!((a / b - 2f64.sqrt()).abs() < 1e-12);
        assert!(nemenyi_cd(21, 10, 0.05).is_err());
        assert!(nemenyi_cd(1, 10, 0.05).is_err());
    }

    #[test]
    fn pairwise_csv() {
        let m = RankMatrix::from_scores(vec![vec![0.9, 0.5, 0.1]; 10]).unwrap();
        let r = nemenyi_test(&m, 0.05).unwrap();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut buf = Vec::new();
        write_nemenyi_csv(&names, &r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // CD = 2.343 * sqrt(12/60) ≈ 1.048: only a vs c (gap 2) is significant
        assert_eq!(text.lines().nth(1).unwrap(), "a,1,-,ns,significant");
    }
}
