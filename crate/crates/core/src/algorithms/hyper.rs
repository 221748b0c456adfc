use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::PrototypeAgg;

/// Proximal coefficient μ for FedProx.
pub const FEDPROX_MU: f64 = 0.125;
/// Server momentum β for FedAvgM.
pub const SERVER_MOMENTUM: f64 = 0.9;

/// Local optimizer settings shared by every algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalHyper {
    pub eta_l: f64,
    pub momentum: f64,
    /// Adds `(weight_decay / 2) · ‖θ‖²` to every local objective.
    pub weight_decay: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
}

impl Default for LocalHyper {
    fn default() -> Self {
        LocalHyper {
            eta_l: 0.01,
            momentum: 0.9,
            weight_decay: 1e-5,
            local_epochs: 1,
            batch_size: 32,
        }
    }
}

impl LocalHyper {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.eta_l > 0.0) {
            v.push(format!("eta_l must be > 0, got {}", self.eta_l));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            v.push(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0) {
            v.push(format!("weight_decay must be ≥ 0, got {}", self.weight_decay));
        }
        if self.local_epochs == 0 {
            v.push("local_epochs must be ≥ 1".into());
        }
        if self.batch_size == 0 {
            v.push("batch_size must be ≥ 1".into());
        }
        v
    }
}

/// How a CF-mode client removes its own contribution from `θ^t - θ^{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfOwnShare {
    /// Subtract `η_g / |S_{t-1}|` times its own delta (its exact share under mean aggregation).
    #[default]
    Exact,
    /// Subtract its own delta unscaled.
    Literal,
}

/// FedGPS-specific weights on top of [`LocalHyper`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FedGpsHyper {
    /// Local-data vs local-surrogate alignment weight.
    pub lambda1: f64,
    /// Local-surrogate vs global-prototype alignment weight.
    pub lambda2: f64,
    /// Radius of the rectification shift.
    pub lambda_g: f64,
    /// Weight on surrogate cross-entropy; 0 disables it.
    pub surrogate_ce_weight: f64,
    /// Extra sign applied to the non-self gradient in either mode.
    pub nsg_sign: f64,
    pub cf_own_share: CfOwnShare,
    pub prototype_agg: PrototypeAgg,
}

impl Default for FedGpsHyper {
    fn default() -> Self {
        FedGpsHyper {
            lambda1: 0.1,
            lambda2: 0.2,
            lambda_g: 0.5,
            surrogate_ce_weight: 1.0,
            nsg_sign: 1.0,
            cf_own_share: CfOwnShare::Exact,
            prototype_agg: PrototypeAgg::Mean,
        }
    }
}

impl FedGpsHyper {
    /// FedGPS with every addition switched off; trains exactly like FedAvg.
    pub fn disabled() -> Self {
        FedGpsHyper {
            lambda1: 0.0,
            lambda2: 0.0,
            lambda_g: 0.0,
            surrogate_ce_weight: 0.0,
            ..FedGpsHyper::default()
        }
    }

    pub fn uses_surrogate(&self) -> bool {
        self.lambda1 > 0.0 || self.lambda2 > 0.0 || self.surrogate_ce_weight > 0.0
    }

    pub fn rectifies(&self) -> bool {
        self.lambda_g > 0.0
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda_g", self.lambda_g),
            ("surrogate_ce_weight", self.surrogate_ce_weight),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                v.push(format!("{name} must be ≥ 0, got {x}"));
            }
        }
        if self.nsg_sign != 1.0 && self.nsg_sign != -1.0 {
            v.push(format!("nsg_sign must be +1 or -1, got {}", self.nsg_sign));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}
