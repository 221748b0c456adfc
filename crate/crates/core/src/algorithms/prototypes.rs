use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{Matrix, MlpModel};

/// Per-class mean embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    /// `C × embed_dim`
    pub means: Matrix,
    pub counts: Vec<usize>,
}

/// Row-wise class means of `embeddings`; rows of absent classes stay zero.
pub fn class_means(embeddings: &Matrix, labels: &[usize], num_classes: usize) -> (Matrix, Vec<usize>) {
    let d = embeddings.cols();
    let mut means = Matrix::zeros(num_classes, d);
    let mut counts = vec![0usize; num_classes];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for (m, e) in means.row_mut(y).iter_mut().zip(embeddings.row(i)) {
            *m += e;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            let inv = 1.0 / n as f64;
            means.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    (means, counts)
}

/// Class-`c` prototype is the mean extractor embedding over surrogate points of class `c`.
pub fn compute_local_prototypes(model: &MlpModel, surrogate: &LabeledDataset) -> Result<PrototypeSet> {
    let emb = model.embed(&surrogate.features)?;
    let num_classes = model.num_classes();
    if surrogate.num_classes > num_classes {
        return Err(Error::dims("surrogate classes", num_classes, surrogate.num_classes));
    }
    let (means, counts) = class_means(&emb, &surrogate.labels, num_classes);
    if let Some(missing) = counts.iter().position(|&n| n == 0) {
        return Err(Error::InvalidArgument(format!(
            "surrogate dataset has no samples of class {missing}"
        )));
    }
    Ok(PrototypeSet { means, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_surrogate, SurrogateSpec};
    use crate::nn::{Activation, Architecture, Dense};

    fn identity_extractor(dim: usize, classes: usize) -> MlpModel {
        MlpModel {
            extractor: vec![Dense {
                weight: Matrix::identity(dim),
                bias: vec![0.0; dim],
            }],
            classifier: Dense::zeros(dim, classes),
            activation: Activation::Identity,
        }
    }

    #[test]
    fn degenerate_surrogate_recovers_means() {
        let mut spec = SurrogateSpec::random(3, 4, 3.0, 1.0, 5, 2).unwrap();
        spec.class_std = 1e-300;
        let s = gen_surrogate(&spec).unwrap();
        let p = compute_local_prototypes(&identity_extractor(4, 3), &s).unwrap();
        for (a, b) in p.means.as_slice().iter().zip(spec.class_means.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(p.counts, vec![5; 3]);
    }

    #[test]
    fn zero_extractor_gives_zero_prototypes() {
        let spec = SurrogateSpec::random(3, 4, 3.0, 1.0, 5, 2).unwrap();
        let s = gen_surrogate(&spec).unwrap();
        let model = MlpModel::zeros(&Architecture::desk(4, 6, 3));
        let p = compute_local_prototypes(&model, &s).unwrap();
        assert!(p.means.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_midpoint() {
        let feats = Matrix::from_rows(&[vec![0.0, 2.0], vec![4.0, 6.0], vec![1.0, 1.0], vec![3.0, -1.0]]).unwrap();
        let ds = LabeledDataset::new(feats, vec![0, 0, 1, 1], 2).unwrap();
        let p = compute_local_prototypes(&identity_extractor(2, 2), &ds).unwrap();
        assert_eq!(p.means.row(0), &[2.0, 4.0]);
        assert_eq!(p.means.row(1), &[2.0, 0.0]);
    }

    #[test]
    fn missing_class_rejected() {
        let ds = LabeledDataset::new(Matrix::zeros(2, 2), vec![0, 0], 1).unwrap();
        assert!(compute_local_prototypes(&identity_extractor(2, 2), &ds).is_err());
    }
}
