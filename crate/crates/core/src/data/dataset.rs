use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::dims("dataset labels", features.rows(), labels.len()));
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument("dataset must contain at least one row".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn batch(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        let (features, labels) = self.batch(idx);
        LabeledDataset {
            features,
            labels,
            num_classes: self.num_classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Row indices grouped by class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        indices_by_class(&self.labels, self.num_classes)
    }

    /// Stratified split holding out `fraction` of every class (rounded down,
    /// at least one row when the class has two or more). Returns (train, test).
    pub fn stratified_split<R: Rng + ?Sized>(
        &self,
        fraction: f64,
        rng: &mut R,
    ) -> Result<(LabeledDataset, LabeledDataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidArgument(format!(
                "holdout fraction must be in [0, 1), got {fraction}"
            )));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut idx in self.indices_by_class() {
            idx.shuffle(rng);
            let mut n_test = (idx.len() as f64 * fraction).floor() as usize;
            if fraction > 0.0 && n_test == 0 && idx.len() >= 2 {
                n_test = 1;
            }
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidArgument(
                "dataset too small for a train/test split".into(),
            ));
        }
        Ok((self.subset(&train), self.subset(&test)))
    }
}

pub fn indices_by_class(labels: &[usize], num_classes: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    by_class
}

/// Reads a CSV with header `f0,...,f{D-1},label`.
pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let dim = headers.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| {
        Error::InvalidArgument(format!("{}: need at least one feature column", path.display()))
    })?;
    if headers.get(dim) != Some("label") {
        return Err(Error::InvalidArgument(format!(
            "{}: last column must be `label`",
            path.display()
        )));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        for j in 0..dim {
            let v: f64 = record[j].trim().parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "{}: row {}: bad feature value {:?}",
                    path.display(),
                    line + 2,
                    &record[j]
                ))
            })?;
            data.push(v);
        }
        let y: usize = record[dim].trim().parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "{}: row {}: bad label {:?}",
                path.display(),
                line + 2,
                &record[dim]
            ))
        })?;
        labels.push(y);
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let n = labels.len();
    LabeledDataset::new(Matrix::from_vec(n, dim, data)?, labels, num_classes)
}
