use rand::seq::SliceRandom;

use super::hyper::{FedGpsHyper, LocalHyper};
use super::objective::{ce_loss_and_grad, fedgps_loss_and_grad};
use super::optimizer::SgdMomentum;
use super::prototypes::{compute_local_prototypes, PrototypeSet};
use super::rectify::rectified_gradient;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{Architecture, Matrix, MlpModel, ParamVector};
use crate::protocol::ClientState;
use crate::rng::SimRng;

/// What a client sends back after local training.
#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub delta: ParamVector,
    pub prototypes: Option<PrototypeSet>,
    /// SCAFFOLD control-variate change `c_k⁺ - c_k`.
    pub control_delta: Option<ParamVector>,
    pub steps: usize,
    pub last_loss: f64,
}

impl LocalOutcome {
    fn plain(delta: ParamVector, steps: usize, last_loss: f64) -> Self {
        LocalOutcome {
            delta,
            prototypes: None,
            control_delta: None,
            steps,
            last_loss,
        }
    }
}

struct SgdRun {
    params: ParamVector,
    steps: usize,
    last_loss: f64,
}

fn diverged(round: usize, client: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(detail) => Error::Diverged {
            round,
            client,
            detail,
        },
        other => other,
    }
}

/// Momentum SGD over shuffled minibatches of `shard` for `hyper.local_epochs`
/// epochs. `grad_fn` returns (loss, gradient) at the current parameters.
fn local_sgd<G>(
    theta0: &ParamVector,
    data: &LabeledDataset,
    shard: &[usize],
    rng: &mut SimRng,
    momentum_buffer: &mut ParamVector,
    hyper: &LocalHyper,
    mut grad_fn: G,
) -> Result<SgdRun>
where
    G: FnMut(&mut ParamVector, &Matrix, &[usize]) -> Result<(f64, ParamVector)>,
{
    if shard.is_empty() {
        return Err(Error::InvalidArgument("client shard is empty".into()));
    }
    *momentum_buffer = ParamVector::zeros(theta0.len());
    let mut opt = SgdMomentum::new(
        hyper.eta_l,
        hyper.momentum,
        std::mem::replace(momentum_buffer, ParamVector::zeros(0)),
    );
    let mut params = theta0.clone();
    let mut order = shard.to_vec();
    let mut steps = 0;
    let mut last_loss = f64::NAN;
    for _ in 0..hyper.local_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(hyper.batch_size) {
            let (x, y) = data.batch(chunk);
            let (loss, grad) = grad_fn(&mut params, &x, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss {loss} at local step {steps}")));
            }
            if !grad.is_finite() {
                return Err(Error::NonFinite(format!("gradient at local step {steps}")));
            }
            opt.step(&mut params, &grad);
            last_loss = loss;
            steps += 1;
        }
    }
    *momentum_buffer = opt.into_buffer();
    Ok(SgdRun {
        params,
        steps,
        last_loss,
    })
}

/// Plain momentum SGD on cross-entropy.
pub fn fedavg_local_train(
    arch: &Architecture,
    theta0: &ParamVector,
    data: &LabeledDataset,
    client: &mut ClientState,
    hyper: &LocalHyper,
    round: usize,
) -> Result<LocalOutcome> {
    let mut scratch = MlpModel::zeros(arch);
    let ClientState {
        id,
        shard,
        rng,
        momentum_buffer,
        ..
    } = client;
    let run = local_sgd(theta0, data, shard, rng, momentum_buffer, hyper, |p, x, y| {
        scratch.load_params(p)?;
        ce_loss_and_grad(&scratch, x, y, hyper.weight_decay)
    })
    .map_err(|e| diverged(round, *id, e))?;
    Ok(LocalOutcome::plain(run.params.sub(theta0), run.steps, run.last_loss))
}

/// Cross-entropy plus `(μ/2)‖θ - θ^t‖²`.
pub fn fedprox_local_train(
    arch: &Architecture,
    theta0: &ParamVector,
    data: &LabeledDataset,
    client: &mut ClientState,
    hyper: &LocalHyper,
    mu: f64,
    round: usize,
) -> Result<LocalOutcome> {
    let mut scratch = MlpModel::zeros(arch);
    let ClientState {
        id,
        shard,
        rng,
        momentum_buffer,
        ..
    } = client;
    let run = local_sgd(theta0, data, shard, rng, momentum_buffer, hyper, |p, x, y| {
        scratch.load_params(p)?;
        let (mut loss, mut grad) = ce_loss_and_grad(&scratch, x, y, hyper.weight_decay)?;
        if mu != 0.0 {
            let drift = p.sub(theta0);
            loss += 0.5 * mu * drift.norm_sq();
            grad.axpy(mu, &drift);
        }
        Ok((loss, grad))
    })
    .map_err(|e| diverged(round, *id, e))?;
    Ok(LocalOutcome::plain(run.params.sub(theta0), run.steps, run.last_loss))
}

/// Momentum SGD on the corrected gradient `g - c_k + c`, followed by the
/// control-variate refresh `c_k⁺ = c_k - c + (θ^t - θ_end) / (steps · η_l)`.
pub fn scaffold_local_train(
    arch: &Architecture,
    theta0: &ParamVector,
    data: &LabeledDataset,
    client: &mut ClientState,
    hyper: &LocalHyper,
    server_control: &ParamVector,
    round: usize,
) -> Result<LocalOutcome> {
    let mut scratch = MlpModel::zeros(arch);
    let c_k = client
        .control_variate
        .clone()
        .unwrap_or_else(|| ParamVector::zeros(theta0.len()));
    if c_k.len() != theta0.len() || server_control.len() != theta0.len() {
        return Err(Error::dims("control variate", theta0.len(), c_k.len()));
    }
    let mut correction = server_control.sub(&c_k);
    let ClientState {
        id,
        shard,
        rng,
        momentum_buffer,
        ..
    } = client;
    let run = local_sgd(theta0, data, shard, rng, momentum_buffer, hyper, |p, x, y| {
        scratch.load_params(p)?;
        let (loss, mut grad) = ce_loss_and_grad(&scratch, x, y, hyper.weight_decay)?;
        grad.add_assign(&correction);
        Ok((loss, grad))
    })
    .map_err(|e| diverged(round, *id, e))?;

    let delta = run.params.sub(theta0);
    // c_k⁺ - c_k = -c - Δ / (steps · η_l)
    correction = server_control.scaled(-1.0);
    correction.axpy(-1.0 / (run.steps as f64 * hyper.eta_l), &delta);
    let mut new_c_k = c_k;
    new_c_k.add_assign(&correction);
    client.control_variate = Some(new_c_k);
    Ok(LocalOutcome {
        control_delta: Some(correction),
        ..LocalOutcome::plain(delta, run.steps, run.last_loss)
    })
}

/// Read-only round inputs for FedGPS local training.
#[derive(Debug, Clone, Copy)]
pub struct FedGpsInputs<'a> {
    pub surrogate: Option<&'a LabeledDataset>,
    pub global_prototypes: Option<&'a Matrix>,
    /// Non-self gradient; `None` trains without rectification.
    pub nsg: Option<&'a ParamVector>,
    pub hyper: &'a FedGpsHyper,
}

/// Endless reshuffled pass over the surrogate dataset.
struct SurrogateCycler<'a> {
    order: Vec<usize>,
    pos: usize,
    rng: &'a mut SimRng,
}

impl<'a> SurrogateCycler<'a> {
    fn new(n: usize, rng: &'a mut SimRng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        SurrogateCycler { order, pos: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(self.rng);
                self.pos = 0;
            }
            let take = (size - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

/// Local training on the FedGPS objective with every gradient evaluated at
/// the rectified point `θ + λ_g δ/‖δ‖`. Returns the delta and the client's
/// fresh surrogate prototypes.
pub fn fedgps_local_train(
    arch: &Architecture,
    theta0: &ParamVector,
    data: &LabeledDataset,
    client: &mut ClientState,
    hyper: &LocalHyper,
    inputs: FedGpsInputs<'_>,
    round: usize,
) -> Result<LocalOutcome> {
    let gps = inputs.hyper;
    let surrogate = if gps.uses_surrogate() {
        Some(inputs.surrogate.ok_or_else(|| {
            Error::InvalidArgument("FedGPS alignment terms need a surrogate dataset".into())
        })?)
    } else {
        None
    };
    let nsg = inputs.nsg.filter(|_| gps.rectifies());
    let mut scratch = MlpModel::zeros(arch);
    let ClientState {
        id,
        shard,
        rng,
        surrogate_rng,
        momentum_buffer,
        ..
    } = client;
    let mut cycler = surrogate.map(|s| SurrogateCycler::new(s.len(), surrogate_rng));

    let run = local_sgd(theta0, data, shard, rng, momentum_buffer, hyper, |p, x, y| {
        let s_batch = match (&mut cycler, surrogate) {
            (Some(c), Some(s)) => Some(s.batch(&c.next_batch(hyper.batch_size))),
            _ => None,
        };
        rectified_gradient(p, nsg, gps.lambda_g, |q| {
            scratch.load_params(q)?;
            let (parts, grad) = fedgps_loss_and_grad(
                &scratch,
                (x, y),
                s_batch.as_ref().map(|(sx, sy)| (sx, sy.as_slice())),
                inputs.global_prototypes,
                gps,
                hyper.weight_decay,
            )?;
            Ok((parts.total, grad))
        })
    })
    .map_err(|e| diverged(round, *id, e))?;

    let prototypes = match inputs.surrogate {
        Some(s) => {
            scratch.load_params(&run.params)?;
            Some(compute_local_prototypes(&scratch, s)?)
        }
        None => None,
    };
    Ok(LocalOutcome {
        prototypes,
        ..LocalOutcome::plain(run.params.sub(theta0), run.steps, run.last_loss)
    })
}
