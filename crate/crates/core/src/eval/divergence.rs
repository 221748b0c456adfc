//! Distances between class-conditional embedding summaries.

use crate::algorithms::class_means;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{Architecture, Matrix, MlpModel, ParamVector};

/// Mean over classes of the L2 distance between matching prototype rows.
pub fn prototype_divergence(local: &Matrix, global: &Matrix) -> Result<f64> {
    if local.rows() != global.rows() || local.cols() != global.cols() {
        return Err(Error::dims(
            "prototype shapes",
            global.rows() * global.cols(),
            local.rows() * local.cols(),
        ));
    }
    if local.rows() == 0 {
        return Err(Error::InvalidArgument("no classes to compare".into()));
    }
    let total: f64 = (0..local.rows())
        .map(|c| l2(local.row(c), global.row(c)))
        .sum();
    Ok(total / local.rows() as f64)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean L2 distance between class rows, over classes with a positive count
/// on both sides (`None` counts mean every class is present).
pub fn class_mean_distance(
    a: &Matrix,
    a_counts: Option<&[usize]>,
    b: &Matrix,
    b_counts: Option<&[usize]>,
) -> f64 {
    let present = |counts: Option<&[usize]>, c: usize| counts.is_none_or(|n| n[c] > 0);
    let classes: Vec<usize> = (0..a.rows())
        .filter(|&c| present(a_counts, c) && present(b_counts, c))
        .collect();
    if classes.is_empty() {
        return 0.0;
    }
    classes.iter().map(|&c| l2(a.row(c), b.row(c))).sum::<f64>() / classes.len() as f64
}

/// A participant's view for the triangle check.
pub struct ClientProbe<'a> {
    pub client: usize,
    pub params: &'a ParamVector,
    pub local_prototypes: &'a Matrix,
    pub local_data: &'a LabeledDataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleReport {
    pub lhs: f64,
    pub kappa: f64,
    /// (client, ε1, ε2)
    pub per_client: Vec<(usize, f64, f64)>,
    pub min_bound: f64,
    pub violations: usize,
}

/// Empirical check of `D(global features, global prototypes) ≤ ε1 + ε2 + κ̂`.
///
/// Every `D` is a per-class mean-embedding distance:
/// * lhs: global-model class means on `probe` vs the global prototypes;
/// * ε1: local-model class means on the client's own data vs its surrogate prototypes;
/// * ε2: the client's surrogate prototypes vs the global prototypes;
/// * κ̂: max over clients of local- vs global-model class means on `probe`.
pub fn triangle_diagnostic(
    arch: &Architecture,
    global: &MlpModel,
    global_prototypes: &Matrix,
    clients: &[ClientProbe<'_>],
    probe: &LabeledDataset,
) -> Result<TriangleReport> {
    let c = arch.num_classes;
    let (g_probe, g_counts) = class_means(&global.embed(&probe.features)?, &probe.labels, c);
    let lhs = class_mean_distance(&g_probe, Some(&g_counts), global_prototypes, None);

    let mut scratch = MlpModel::zeros(arch);
    let mut kappa: f64 = 0.0;
    let mut per_client = Vec::with_capacity(clients.len());
    for p in clients {
        scratch.load_params(p.params)?;
        let (l_probe, _) = class_means(&scratch.embed(&probe.features)?, &probe.labels, c);
        kappa = kappa.max(class_mean_distance(&l_probe, Some(&g_counts), &g_probe, Some(&g_counts)));
        let (l_own, own_counts) =
            class_means(&scratch.embed(&p.local_data.features)?, &p.local_data.labels, c);
        let eps1 = class_mean_distance(&l_own, Some(&own_counts), p.local_prototypes, None);
        let eps2 = class_mean_distance(p.local_prototypes, None, global_prototypes, None);
        per_client.push((p.client, eps1, eps2));
    }
    let bounds: Vec<f64> = per_client.iter().map(|&(_, e1, e2)| e1 + e2 + kappa).collect();
    let min_bound = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = bounds.iter().filter(|&&b| lhs > b + 1e-12).count();
    Ok(TriangleReport {
        lhs,
        kappa,
        per_client,
        min_bound,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_examples() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(prototype_divergence(&a, &a).unwrap(), 0.0);
        assert_eq!(prototype_divergence(&a, &Matrix::zeros(2, 2)).unwrap(), 1.0);
        // rows: (3,4) vs (0,0) → 5; (1,1) vs (1,-1) → 2; mean 3.5
        let l = Matrix::from_rows(&[vec![3.0, 4.0], vec![1.0, 1.0]]).unwrap();
        let g = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, -1.0]]).unwrap();
        assert_eq!(prototype_divergence(&l, &g).unwrap(), 3.5);
        assert!(prototype_divergence(&l, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn absent_classes_skipped() {
        let a = Matrix::from_rows(&[vec![3.0, 4.0], vec![100.0, 0.0]]).unwrap();
        let b = Matrix::zeros(2, 2);
        assert_eq!(class_mean_distance(&a, Some(&[2, 0]), &b, None), 5.0);
        assert_eq!(class_mean_distance(&a, Some(&[0, 0]), &b, None), 0.0);
    }
}
