//! Synthetic Gaussian datasets: class blobs standing in for real data, and
//! the shared surrogate dataset.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{self, Stream};

/// Isotropic Gaussian blobs, one per class, with `n_per_class` points each.
///
/// Class centers are `separation * z_c` with `z_c ~ N(0, I)`; points are
/// `center + noise_std * N(0, I)`. Rows are grouped by class.
pub fn gen_blobs(
    num_classes: usize,
    input_dim: usize,
    n_per_class: usize,
    separation: f64,
    noise_std: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if num_classes == 0 || input_dim == 0 || n_per_class == 0 {
        return Err(Error::InvalidArgument("blob counts must be ≥ 1".into()));
    }
    if !(noise_std > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise_std must be positive, got {noise_std}"
        )));
    }
    let mut r = rng::stream(seed, Stream::Dataset);
    let mut centers = Matrix::zeros(num_classes, input_dim);
    for v in centers.as_mut_slice() {
        let z: f64 = r.sample(StandardNormal);
        *v = separation * z;
    }
    sample_gaussian_classes(&centers, noise_std, n_per_class, &mut r)
}

fn sample_gaussian_classes<R: Rng + ?Sized>(
    means: &Matrix,
    std: f64,
    n_per_class: usize,
    r: &mut R,
) -> Result<LabeledDataset> {
    let (c, d) = (means.rows(), means.cols());
    let mut data = Vec::with_capacity(c * n_per_class * d);
    let mut labels = Vec::with_capacity(c * n_per_class);
    for class in 0..c {
        let mean = means.row(class);
        for _ in 0..n_per_class {
            for &m in mean {
                let z: f64 = r.sample(StandardNormal);
                data.push(m + std * z);
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(Matrix::from_vec(c * n_per_class, d, data)?, labels, c)
}

/// Class-conditional Gaussian generator for the shared surrogate dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub num_classes: usize,
    pub input_dim: usize,
    pub class_means: Matrix,
    pub class_std: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

impl SurrogateSpec {
    /// Means drawn once as `mean_scale * N(0, I)` from the seed's mean stream.
    pub fn random(
        num_classes: usize,
        input_dim: usize,
        mean_scale: f64,
        class_std: f64,
        n_per_class: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut r = rng::stream(seed, Stream::SurrogateMeans);
        let mut class_means = Matrix::zeros(num_classes, input_dim);
        for v in class_means.as_mut_slice() {
            let z: f64 = r.sample(StandardNormal);
            *v = mean_scale * z;
        }
        let spec = SurrogateSpec {
            num_classes,
            input_dim,
            class_means,
            class_std,
            n_per_class,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.input_dim == 0 || self.n_per_class == 0 {
            return Err(Error::InvalidArgument("surrogate counts must be ≥ 1".into()));
        }
        if self.class_means.rows() != self.num_classes || self.class_means.cols() != self.input_dim
        {
            return Err(Error::dims(
                "surrogate class means",
                self.num_classes * self.input_dim,
                self.class_means.rows() * self.class_means.cols(),
            ));
        }
        if !(self.class_std > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "surrogate class_std must be positive, got {}",
                self.class_std
            )));
        }
        for a in 0..self.num_classes {
            for b in a + 1..self.num_classes {
                if self.class_means.row(a) == self.class_means.row(b) {
                    return Err(Error::InvalidArgument(format!(
                        "surrogate classes {a} and {b} share a mean"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Samples `n_per_class` points from `N(mean_c, std² I)` for every class.
/// Depends only on the spec, so every client sees the same dataset.
pub fn gen_surrogate(spec: &SurrogateSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut r = rng::stream(spec.seed, Stream::Surrogate);
    sample_gaussian_classes(&spec.class_means, spec.class_std, spec.n_per_class, &mut r)
}
