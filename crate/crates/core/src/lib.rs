//! Federated learning simulator with gradient-rectified local training
//! guided by surrogate-data prototypes, plus the FedAvg, FedAvgM, FedProx
//! and SCAFFOLD baselines.
//!
//! Data flows bottom-up: [`nn`] provides a small MLP with hand-written
//! backprop, [`data`] builds datasets and client partitions, [`algorithms`]
//! implements local training per method, [`protocol`] runs rounds, and
//! [`eval`] scores the results.

pub mod algorithms;
pub mod data;
mod error;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod protocol;
pub mod rng;

pub use algorithms::{Algo, FedGpsHyper, LocalHyper};
pub use data::{LabeledDataset, Partition};
pub use error::{Error, Result};
pub use nn::{Architecture, Matrix, MlpModel, ParamVector};
pub use protocol::{RoundRecord, Simulation, SimulationConfig};
