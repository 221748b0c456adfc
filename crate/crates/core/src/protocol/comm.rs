//! Communication accounting in abstract parameter units.
//!
//! `M` is the model's parameter count; a prototype upload or download costs
//! `C · embed_dim`. Multiply by 8 for bytes at `f64` precision.

use serde::{Deserialize, Serialize};

use crate::algorithms::Algo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoundUnits {
    pub down: u64,
    pub up: u64,
}

/// Per-client download/upload cost of one round.
pub fn per_client_units(algo: Algo, m: u64, num_classes: u64, embed_dim: u64) -> RoundUnits {
    let protos = num_classes * embed_dim;
    match algo {
        Algo::FedAvg | Algo::FedAvgM | Algo::FedProx => RoundUnits { down: m, up: m },
        // model plus control variate in both directions
        Algo::Scaffold => RoundUnits { down: 2 * m, up: 2 * m },
        Algo::FedGps => RoundUnits {
            down: 2 * m + protos,
            up: m + protos,
        },
        Algo::FedGpsCf => RoundUnits {
            down: m + protos,
            up: m + protos,
        },
    }
}

/// Running per-round and cumulative totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommMeter {
    pub rounds: Vec<RoundUnits>,
    pub total_down: u64,
    pub total_up: u64,
}

impl CommMeter {
    /// Records one round with `participants` clients and returns its totals.
    pub fn meter_round(
        &mut self,
        algo: Algo,
        m: u64,
        num_classes: u64,
        embed_dim: u64,
        participants: u64,
    ) -> RoundUnits {
        let per = per_client_units(algo, m, num_classes, embed_dim);
        let units = RoundUnits {
            down: per.down * participants,
            up: per.up * participants,
        };
        self.rounds.push(units);
        self.total_down += units.down;
        self.total_up += units.up;
        units
    }

    pub fn is_consistent(&self) -> bool {
        self.rounds.iter().map(|r| r.down).sum::<u64>() == self.total_down
            && self.rounds.iter().map(|r| r.up).sum::<u64>() == self.total_up
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        assert_eq!(
            per_client_units(Algo::FedGps, 1000, 10, 512),
            RoundUnits { down: 7120, up: 6120 }
        );
        assert_eq!(
            per_client_units(Algo::FedGpsCf, 1000, 10, 512),
            RoundUnits { down: 6120, up: 6120 }
        );
        assert_eq!(
            per_client_units(Algo::FedAvg, 1000, 10, 512),
            RoundUnits { down: 1000, up: 1000 }
        );
    }

    #[test]
    fn meter_totals() {
        let mut m = CommMeter::default();
        m.meter_round(Algo::FedGps, 10, 2, 3, 4);
        m.meter_round(Algo::FedGps, 10, 2, 3, 1);
        assert_eq!(m.total_down, 26 * 5);
        assert_eq!(m.total_up, 16 * 5);
        assert!(m.is_consistent());
    }
}
