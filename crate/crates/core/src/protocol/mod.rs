//! The federated round loop: client sampling, broadcast, local training,
//! aggregation, non-self gradient distribution, prototype aggregation, and
//! communication accounting.

mod client;
mod comm;
mod nsg;
mod sampling;
mod server;
mod simulation;

pub use client::ClientState;
pub use comm::{per_client_units, CommMeter, RoundUnits};
pub use nsg::{non_self_gradient, non_self_gradient_cf};
pub use sampling::{sample_clients, sample_size};
pub use server::{combine_prototypes, PrototypeAgg, ServerState};
pub use simulation::{RoundRecord, Simulation, SimulationConfig, TriangleSummary};
