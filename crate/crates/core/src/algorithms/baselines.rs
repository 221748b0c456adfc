use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::protocol::ServerState;

/// FedAvgM: `v ← β v + mean(Δ)`, `θ ← θ + η_g v`.
pub fn fedavgm_server_update(
    server: &mut ServerState,
    velocity: &mut ParamVector,
    deltas: BTreeMap<usize, ParamVector>,
    beta: f64,
) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("aggregation needs at least one delta".into()));
    }
    if velocity.len() != server.global_params.len() {
        return Err(Error::dims("server velocity", server.global_params.len(), velocity.len()));
    }
    let mean = ServerState::mean_delta(&deltas);
    velocity.scale(beta);
    velocity.add_assign(&mean);
    let step = velocity.scaled(server.eta_g);
    server.apply_step(deltas, step)?;
    Ok(())
}

/// Server half of SCAFFOLD.
#[derive(Debug, Clone)]
pub struct ScaffoldServer {
    pub control: ParamVector,
    pub num_clients: usize,
}

impl ScaffoldServer {
    pub fn new(num_params: usize, num_clients: usize) -> Self {
        ScaffoldServer {
            control: ParamVector::zeros(num_params),
            num_clients,
        }
    }
}

/// Model aggregation as usual, then `c ← c + (1/K) Σ_{k ∈ S} Δc_k`.
pub fn scaffold_server_update(
    server: &mut ServerState,
    scaffold: &mut ScaffoldServer,
    deltas: BTreeMap<usize, ParamVector>,
    control_deltas: &BTreeMap<usize, ParamVector>,
) -> Result<()> {
    server.aggregate(deltas)?;
    let inv_k = 1.0 / scaffold.num_clients as f64;
    for d in control_deltas.values() {
        if d.len() != scaffold.control.len() {
            return Err(Error::dims("control delta", scaffold.control.len(), d.len()));
        }
        scaffold.control.axpy(inv_k, d);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fedavgm_without_momentum_is_plain_aggregation() {
        let deltas: BTreeMap<_, _> = [
            (0, ParamVector::from_vec(vec![1.0, -1.0])),
            (3, ParamVector::from_vec(vec![0.5, 2.0])),
        ]
        .into_iter()
        .collect();
        let mut plain = ServerState::new(ParamVector::from_vec(vec![0.1, 0.2]), 1.0);
        let mut m = plain.clone();
        plain.aggregate(deltas.clone()).unwrap();
        let mut v = ParamVector::zeros(2);
        fedavgm_server_update(&mut m, &mut v, deltas, 0.0).unwrap();
        assert!(m.global_params.bit_eq(&plain.global_params));
    }

    #[test]
    fn fedavgm_accumulates_velocity() {
        let one: BTreeMap<_, _> = [(0, ParamVector::from_vec(vec![1.0]))].into_iter().collect();
        let mut s = ServerState::new(ParamVector::zeros(1), 1.0);
        let mut v = ParamVector::zeros(1);
        fedavgm_server_update(&mut s, &mut v, one.clone(), 0.9).unwrap();
        fedavgm_server_update(&mut s, &mut v, one, 0.9).unwrap();
        assert!((s.global_params[0] - 2.9).abs() < 1e-15);
    }
}
