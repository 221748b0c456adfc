//! Per-run results folded into the scenario-by-algorithm accuracy table.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of one (algorithm, scenario, training seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub algo: String,
    pub scenario: String,
    pub seed: u64,
    /// Highest test accuracy seen during training.
    pub best_accuracy: f64,
    pub final_accuracy: f64,
    /// 1-based round at which the scenario target was first reached.
    pub round_to_target: Option<usize>,
    /// FedAvg's round count divided by this run's; set only when both reached the target.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Best,
    Final,
}

impl Metric {
    fn of(self, r: &ScenarioResult) -> f64 {
        match self {
            Metric::Best => r.best_accuracy,
            Metric::Final => r.final_accuracy,
        }
    }
}

/// One algorithm's row: a value per scenario (averaged over training seeds)
/// and the spread across scenarios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algo: String,
    pub per_scenario: BTreeMap<String, f64>,
    pub mean: f64,
    pub std: f64,
}

impl SummaryRow {
    /// `86.73 ± 3.23`, both in percentage points.
    pub fn display(&self) -> String {
        format!("{:.2} ± {:.2}", 100.0 * self.mean, 100.0 * self.std)
    }
}

/// Sample mean and sample standard deviation (N-1 denominator, 0 for N = 1).
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("mean of an empty sample".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Rows in first-seen algorithm order.
pub fn summarize(results: &[ScenarioResult], metric: Metric) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("nothing to summarize".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in results {
        if !order.contains(&r.algo.as_str()) {
            order.push(&r.algo);
        }
        cells
            .entry((r.algo.as_str(), r.scenario.as_str()))
            .or_default()
            .push(metric.of(r));
    }
    order
        .into_iter()
        .map(|algo| {
            let per_scenario: BTreeMap<String, f64> = cells
                .iter()
                .filter(|((a, _), _)| *a == algo)
                .map(|((_, s), v)| Ok((s.to_string(), mean_std(v)?.0)))
                .collect::<Result<_>>()?;
            let values: Vec<f64> = per_scenario.values().copied().collect();
            let (mean, std) = mean_std(&values)?;
            Ok(SummaryRow {
                algo: algo.to_string(),
                per_scenario,
                mean,
                std,
            })
        })
        .collect()
}

fn scenario_columns(rows: &[SummaryRow]) -> Vec<String> {
    let mut s: Vec<String> = rows.iter().flat_map(|r| r.per_scenario.keys().cloned()).collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// One line per algorithm, one column per scenario, then `mean ± std`.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], metric: Metric, w: W) -> Result<()> {
    let scenarios = scenario_columns(rows);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![format!("algo ({metric:?} accuracy %)").to_lowercase()];
    header.extend(scenarios.iter().cloned());
    header.push("mean ± std (sample, n-1)".into());
    out.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.algo.clone()];
        for s in &scenarios {
            rec.push(
                row.per_scenario
                    .get(s)
                    .map(|v| format!("{:.2}", 100.0 * v))
                    .unwrap_or_default(),
            );
        }
        rec.push(row.display());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// `scores[scenario][algorithm]` in `rows` order, for the rank tests.
/// Every algorithm must have a value for every scenario.
pub fn score_matrix(rows: &[SummaryRow]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let scenarios = scenario_columns(rows);
    let scores = scenarios
        .iter()
        .map(|s| {
            rows.iter()
                .map(|r| {
                    r.per_scenario.get(s).copied().ok_or_else(|| {
                        Error::InvalidArgument(format!("no result for {} in scenario {s}", r.algo))
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((scenarios, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(algo: &str, scenario: &str, seed: u64, acc: f64) -> ScenarioResult {
        ScenarioResult {
            algo: algo.into(),
            scenario: scenario.into(),
            seed,
            best_accuracy: acc,
            final_accuracy: acc - 0.01,
            round_to_target: None,
            speedup: None,
        }
    }

    #[test]
    fn sample_std_convention() {
        let (m, s) = mean_std(&[90.31, 88.45, 87.78, 85.06, 82.04]).unwrap();
        assert!((m - 86.728).abs() < 1e-9);
        assert_eq!(format!("{m:.2} ± {s:.2}"), "86.73 ± 3.23");
        assert_eq!(mean_std(&[0.7]).unwrap(), (0.7, 0.0));
        assert_eq!(mean_std(&[0.5, 0.5, 0.5]).unwrap().1, 0.0);
    }

    #[test]
    fn seeds_average_within_scenario() {
        let results = vec![
            res("fedavg", "s0", 0, 0.8),
            res("fedavg", "s0", 1, 0.9),
            res("fedavg", "s1", 0, 0.7),
            res("fedgps", "s0", 0, 0.95),
            res("fedgps", "s1", 0, 0.95),
        ];
        let rows = summarize(&results, Metric::Best).unwrap();
        assert_eq!(rows[0].algo, "fedavg");
        assert!((rows[0].per_scenario["s0"] - 0.85).abs() < 1e-12);
        assert!((rows[0].mean - 0.775).abs() < 1e-12);
        assert_eq!(rows[1].std, 0.0);

        let mut buf = Vec::new();
        write_summary_csv(&rows, Metric::Best, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "algo (best accuracy %),s0,s1,\"mean ± std (sample, n-1)\"");
        assert_eq!(lines[2], "fedgps,95.00,95.00,95.00 ± 0.00");

        let (scen, scores) = score_matrix(&rows).unwrap();
        assert_eq!(scen, vec!["s0", "s1"]);
        assert!((scores[1][0] - 0.7).abs() < 1e-12);
        assert_eq!(scores[1][1], 0.95);
    }

    #[test]
    fn final_metric_and_missing_cells() {
        let rows = summarize(&[res("a", "s0", 0, 0.5), res("b", "s1", 0, 0.6)], Metric::Final).unwrap();
        assert!((rows[0].mean - 0.49).abs() < 1e-12);
        assert!(score_matrix(&rows).is_err());
        assert!(summarize(&[], Metric::Best).is_err());
    }
}
