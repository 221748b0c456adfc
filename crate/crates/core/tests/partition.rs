use fedgps_core::data::{cn_partition, dirichlet_partition, Partition};
use proptest::prelude::*;

fn labels(classes: usize, per_class: usize) -> Vec<usize> {
    (0..classes * per_class).map(|i| i % classes).collect()
}

fn assert_disjoint_cover(p: &Partition, n: usize) {
    let mut all: Vec<usize> = p.shards.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..n).collect::<Vec<_>>());
    assert!(p.shards.iter().all(|s| !s.is_empty()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dirichlet_is_a_disjoint_cover(alpha in 0.05f64..100.0, k in 2usize..12, seed in any::<u64>()) {
        let y = labels(10, 60);
        let p = dirichlet_partition(&y, k, alpha, seed).unwrap();
        prop_assert_eq!(p.num_clients(), k);
        prop_assert!(p.validate(y.len()).is_ok());
        assert_disjoint_cover(&p, y.len());
    }

    #[test]
    fn cn_is_a_disjoint_cover(n in 1usize..=10, k in 1usize..12, seed in any::<u64>()) {
        prop_assume!(k * n >= 10);
        let y = labels(10, 30);
        let p = cn_partition(&y, k, n, seed).unwrap();
        assert_disjoint_cover(&p, y.len());
        for h in p.class_histograms(&y, 10) {
            prop_assert_eq!(h.iter().filter(|&&c| c > 0).count(), n);
        }
    }
}

#[test]
fn entropy_falls_with_alpha() {
    let y = labels(10, 400);
    let mean_entropy = |alpha: f64| {
        (0..10)
            .map(|s| {
                dirichlet_partition(&y, 10, alpha, s)
                    .unwrap()
                    .mean_label_entropy(&y, 10)
            })
            .sum::<f64>()
            / 10.0
    };
    let (a, b, c) = (mean_entropy(0.05), mean_entropy(0.1), mean_entropy(100.0));
    assert!(a <= b && b <= c, "{a} {b} {c}");
    // near-uniform label mix at alpha = 100
    assert!(c > 0.95 * 10f64.ln());
}

#[test]
fn different_seeds_give_different_partitions() {
    let y = labels(10, 50);
    let a = dirichlet_partition(&y, 5, 0.1, 0).unwrap();
    let b = dirichlet_partition(&y, 5, 0.1, 1).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, dirichlet_partition(&y, 5, 0.1, 0).unwrap());
}
