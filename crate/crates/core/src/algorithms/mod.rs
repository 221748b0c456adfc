//! Local training procedures and their server-side counterparts.
//!
//! Every algorithm produces a parameter delta `Δ_k = θ_end - θ^t` per
//! participating client. FedGPS additionally returns surrogate prototypes
//! and evaluates each step's gradient at a point shifted along the
//! non-self gradient.

mod baselines;
mod hyper;
mod local;
mod objective;
mod optimizer;
mod prototypes;
mod rectify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use baselines::{fedavgm_server_update, scaffold_server_update, ScaffoldServer};
pub use hyper::{CfOwnShare, FedGpsHyper, LocalHyper, FEDPROX_MU, SERVER_MOMENTUM};
pub use local::{
    fedavg_local_train, fedgps_local_train, fedprox_local_train, scaffold_local_train,
    FedGpsInputs, LocalOutcome,
};
pub use objective::{ce_loss_and_grad, fedgps_loss_and_grad, LossBreakdown};
pub use optimizer::SgdMomentum;
pub use prototypes::{class_means, compute_local_prototypes, PrototypeSet};
pub use rectify::{perturbed_gradient, rectified_gradient, unit_direction, DIRECTION_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedavgm")]
    FedAvgM,
    #[serde(rename = "fedprox")]
    FedProx,
    Scaffold,
    #[serde(rename = "fedgps")]
    FedGps,
    #[serde(rename = "fedgps_cf")]
    FedGpsCf,
}

impl Algo {
    pub const ALL: [Algo; 6] = [
        Algo::FedAvg,
        Algo::FedAvgM,
        Algo::FedProx,
        Algo::Scaffold,
        Algo::FedGps,
        Algo::FedGpsCf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::FedAvg => "fedavg",
            Algo::FedAvgM => "fedavgm",
            Algo::FedProx => "fedprox",
            Algo::Scaffold => "scaffold",
            Algo::FedGps => "fedgps",
            Algo::FedGpsCf => "fedgps_cf",
        }
    }

    pub fn is_fedgps(self) -> bool {
        matches!(self, Algo::FedGps | Algo::FedGpsCf)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}
