use crate::data::LabeledDataset;
use crate::error::Result;
use crate::nn::{argmax_rows, MlpModel};

/// Fraction of `data` classified correctly by `model`.
pub fn accuracy(model: &MlpModel, data: &LabeledDataset) -> Result<f64> {
    let trace = model.forward(&data.features)?;
    let correct = argmax_rows(&trace.logits)
        .iter()
        .zip(&data.labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Index of the first entry reaching `target`, or `None` if it never does.
pub fn round_to_target(series: &[f64], target: f64) -> Option<usize> {
    series.iter().position(|&a| a >= target)
}

/// Ratio of the baseline's rounds to the algorithm's; defined only when both reached the target.
pub fn speedup(baseline_rounds: Option<usize>, algo_rounds: Option<usize>) -> Option<f64> {
    match (baseline_rounds, algo_rounds) {
        (Some(b), Some(a)) if a > 0 => Some(b as f64 / a as f64),
        _ => None,
    }
}

/// Best accuracy rounded down to a whole percent.
pub fn default_target(baseline_best: f64) -> f64 {
    (baseline_best * 100.0 + 1e-9).floor() / 100.0
}
