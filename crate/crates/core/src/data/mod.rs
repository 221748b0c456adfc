//! Datasets, heterogeneous partitioning, and the shared surrogate dataset.

mod dataset;
pub mod idx;
mod partition;
mod synth;

pub use dataset::{indices_by_class, load_csv, LabeledDataset};
pub use idx::load_idx;
pub use partition::{cn_partition, dirichlet_partition, Partition, MAX_PARTITION_ATTEMPTS};
pub use synth::{gen_blobs, gen_surrogate, SurrogateSpec};
