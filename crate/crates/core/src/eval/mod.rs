//! Accuracy, prototype divergence, statistical tests and result summaries.

mod divergence;
mod metrics;
mod stats;
mod summary;
mod wasserstein;

pub use divergence::{class_mean_distance, prototype_divergence, triangle_diagnostic, ClientProbe, TriangleReport};
pub use metrics::{accuracy, default_target, round_to_target, speedup};
pub use stats::{
    friedman_statistic, nemenyi_cd, nemenyi_q, nemenyi_test, write_nemenyi_csv, FriedmanResult, NemenyiResult,
    RankMatrix,
};
pub use summary::{mean_std, score_matrix, summarize, write_summary_csv, Metric, ScenarioResult, SummaryRow};
pub use wasserstein::{w1_empirical_1d, w1_per_coordinate};
