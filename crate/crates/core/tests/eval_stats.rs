use fedgps_core::eval::{
    friedman_statistic, nemenyi_cd, nemenyi_q, nemenyi_test, w1_empirical_1d, RankMatrix,
};
use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// `P(range of k iid N(0,1) ≤ w) = k ∫ φ(z) [Φ(z+w) - Φ(z)]^{k-1} dz`, Simpson on [-9, 9].
fn range_cdf(k: usize, w: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let (a, b, steps) = (-9.0, 9.0, 2000);
    let h = (b - a) / steps as f64;
    let f = |z: f64| n.pdf(z) * (n.cdf(z + w) - n.cdf(z)).powi(k as i32 - 1);
    let mut s = f(a) + f(b);
    for i in 1..steps {
        let z = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z);
    }
    k as f64 * s * h / 3.0
}

fn q_from_quadrature(k: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if range_cdf(k, mid) < 1.0 - alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / 2f64.sqrt()
}

#[test]
fn q_table_matches_range_distribution() {
    for alpha in [0.05, 0.10] {
        for k in 2..=20 {
            let table = nemenyi_q(k, alpha).unwrap();
            let oracle = q_from_quadrature(k, alpha);
            // the published three-decimal table deviates from exact quantiles by up to 7e-4
            assert!((table - oracle).abs() < 1e-3, "alpha {alpha} k {k}: table {table}, oracle {oracle}");
        }
    }
    assert!(nemenyi_q(5, 0.01).is_err());
}

#[test]
fn cd_decreases_with_more_scenarios() {
    let mut prev = f64::INFINITY;
    for n in 2..50 {
        let cd = nemenyi_cd(4, n, 0.05).unwrap();
        assert!(cd < prev);
        prev = cd;
    }
}

#[test]
fn friedman_against_hand_computation() {
    // scores[scenario][algo]; ranks by hand:
    // s0: a=1 b=2 c=3   s1: a=1 b=3 c=2   s2: a=2 b=1 c=3   s3: a=1.5 b=1.5 c=3
    let scores = vec![
        vec![0.9, 0.8, 0.7],
        vec![0.9, 0.6, 0.7],
        vec![0.8, 0.85, 0.7],
        vec![0.75, 0.75, 0.5],
    ];
    let m = RankMatrix::from_scores(scores).unwrap();
    assert_eq!(m.ranks[3], vec![1.5, 1.5, 3.0]);
    let avg = m.average_ranks();
    let by_hand = [5.5 / 4.0, 7.5 / 4.0, 11.0 / 4.0];
    for (a, b) in avg.iter().zip(by_hand) {
        assert!((a - b).abs() < 1e-15);
    }
    // 12·4/(3·4) · (Σ R̄² − 3·16/4)
    let sum_sq: f64 = by_hand.iter().map(|r| r * r).sum();
    let chi2 = 4.0 * (sum_sq - 12.0);
    let f = friedman_statistic(&m, 0.05).unwrap();
    assert!((f.chi2 - chi2).abs() < 1e-12, "{} vs {chi2}", f.chi2);
    // χ²(2) 95% quantile = -2 ln 0.05
    assert!((f.critical_value - (-2.0 * 0.05f64.ln())).abs() < 1e-9);
    assert_eq!(f.significant, chi2 > f.critical_value);

    let r = nemenyi_test(&m, 0.05).unwrap();
    let cd = 2.343 * (3.0f64 * 4.0 / 24.0).sqrt();
    assert!((r.critical_distance - cd).abs() < 1e-12);
    assert_eq!(r.significant[0][2], (by_hand[2] - by_hand[0]) > cd);
    assert!(friedman_statistic(&RankMatrix::from_scores(vec![vec![1.0, 2.0]]).unwrap(), 0.05).is_err());
}

proptest! {
    #[test]
    fn rank_rows_sum_to_triangle_number(
        rows in proptest::collection::vec(proptest::collection::vec(0u8..5, 6), 1..8)
    ) {
        // few distinct values to force ties
        let scores: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let m = RankMatrix::from_scores(scores).unwrap();
        for r in &m.ranks {
            prop_assert!((r.iter().sum::<f64>() - 21.0).abs() < 1e-12);
            prop_assert!(r.iter().all(|&x| (1.0..=6.0).contains(&x)));
        }
    }

    #[test]
    fn w1_is_a_metric(
        a in proptest::collection::vec(-50.0f64..50.0, 1..20),
        seed_b in proptest::collection::vec(-50.0f64..50.0, 20),
        seed_c in proptest::collection::vec(-50.0f64..50.0, 20),
    ) {
        let n = a.len();
        let b = &seed_b[..n];
        let c = &seed_c[..n];
        let ab = w1_empirical_1d(&a, b).unwrap();
        let ba = w1_empirical_1d(b, &a).unwrap();
        let bc = w1_empirical_1d(b, c).unwrap();
        let ac = w1_empirical_1d(&a, c).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(w1_empirical_1d(&a, &a).unwrap(), 0.0);
        prop_assert!(ac <= ab + bc + 1e-9);
    }
}

#[test]
fn w1_examples() {
    assert_eq!(w1_empirical_1d(&[0.0], &[1.0]).unwrap(), 1.0);
    assert_eq!(w1_empirical_1d(&[0.0, 1.0], &[3.0, 2.0]).unwrap(), 2.0);
    assert!(w1_empirical_1d(&[], &[]).is_err());
}
