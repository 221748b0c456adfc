//! Shared fixtures for the benchmarks.

use fedgps_core::data::{dirichlet_partition, gen_blobs, gen_surrogate, SurrogateSpec};
use fedgps_core::nn::{Architecture, MlpModel, ParamVector};
use fedgps_core::protocol::ClientState;
use fedgps_core::rng::{stream, Stream};
use fedgps_core::{LabeledDataset, Partition};

pub struct Fixture {
    pub train: LabeledDataset,
    pub surrogate: LabeledDataset,
    pub partition: Partition,
    pub arch: Architecture,
    pub theta0: ParamVector,
}

/// Desk-sized problem: 10-class blobs in 16 dimensions, Dir(0.1) over 10 clients.
pub fn desk_fixture() -> Fixture {
    let train = gen_blobs(10, 16, 400, 1.0, 1.0, 0).expect("blobs");
    let surrogate = gen_surrogate(&SurrogateSpec::random(10, 16, 3.0, 1.0, 20, 0).expect("spec")).expect("surrogate");
    let partition = dirichlet_partition(&train.labels, 10, 0.1, 0).expect("partition");
    let arch = Architecture::desk(16, 32, 10);
    let theta0 = MlpModel::new(&arch, &mut stream(0, Stream::Init)).flatten();
    Fixture {
        train,
        surrogate,
        partition,
        arch,
        theta0,
    }
}

impl Fixture {
    /// Client holding the largest shard.
    pub fn busiest_client(&self) -> ClientState {
        let (id, shard) = self
            .partition
            .shards
            .iter()
            .enumerate()
            .max_by_key(|(_, s)| s.len())
            .expect("clients");
        ClientState::new(id, shard.clone(), self.theta0.len(), 0)
    }

    /// Deterministic pseudo non-self gradient with the model's shape.
    pub fn direction(&self) -> ParamVector {
        let n = self.theta0.len();
        ParamVector::from_vec((0..n).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect())
    }
}
