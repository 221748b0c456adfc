use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_clients, ClientState, CommMeter, ServerState};
use crate::algorithms::{
    compute_local_prototypes, fedavg_local_train, fedavgm_server_update, fedgps_local_train,
    fedprox_local_train, scaffold_local_train, scaffold_server_update, Algo, CfOwnShare,
    FedGpsHyper, FedGpsInputs, LocalHyper, LocalOutcome, ScaffoldServer, FEDPROX_MU,
    SERVER_MOMENTUM,
};
use crate::data::{LabeledDataset, Partition};
use crate::error::{Error, Result};
use crate::eval::{accuracy, prototype_divergence, triangle_diagnostic, ClientProbe};
use crate::nn::{Architecture, Matrix, MlpModel, ParamVector};
use crate::protocol::non_self_gradient_cf;
use crate::rng::{self, SimRng, Stream};

/// Everything that shapes a single simulated training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub algo: Algo,
    pub arch: Architecture,
    pub sample_rate: f64,
    pub eta_g: f64,
    pub rounds: usize,
    pub local: LocalHyper,
    pub fedgps: FedGpsHyper,
    pub fedprox_mu: f64,
    pub server_momentum: f64,
    /// Test accuracy is computed every `eval_every` rounds and at the last round.
    pub eval_every: usize,
    /// Prototype divergence and the triangle check run every `divergence_every` rounds; 0 disables.
    pub divergence_every: usize,
    pub training_seed: u64,
    /// Train selected clients on the rayon pool.
    pub parallel: bool,
}

impl SimulationConfig {
    pub fn new(algo: Algo, arch: Architecture) -> Self {
        SimulationConfig {
            algo,
            arch,
            sample_rate: 0.5,
            eta_g: 1.0,
            rounds: 1,
            local: LocalHyper::default(),
            fedgps: FedGpsHyper::default(),
            fedprox_mu: FEDPROX_MU,
            server_momentum: SERVER_MOMENTUM,
            eval_every: 1,
            divergence_every: 5,
            training_seed: 0,
            parallel: true,
        }
    }
}

/// Outcome of the local/global distance triangle check for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleSummary {
    /// Distance between global-model class embeddings and global prototypes.
    pub lhs: f64,
    pub kappa: f64,
    /// Smallest `ε1 + ε2 + κ̂` over participating clients.
    pub min_bound: f64,
    pub violations: usize,
}

/// One line of the round log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based count of completed rounds.
    pub round: usize,
    pub selected: Vec<usize>,
    pub test_acc: Option<f64>,
    pub comm_down: u64,
    pub comm_up: u64,
    /// Mean L2 distance between each participant's surrogate prototypes and the aggregate.
    pub divergence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangle: Option<TriangleSummary>,
    pub wallclock_ms: f64,
}

/// A federated training run over a fixed partition.
pub struct Simulation<'a> {
    pub cfg: SimulationConfig,
    train: &'a LabeledDataset,
    test: &'a LabeledDataset,
    surrogate: Option<&'a LabeledDataset>,
    pub server: ServerState,
    pub clients: Vec<ClientState>,
    pub meter: CommMeter,
    velocity: ParamVector,
    scaffold: Option<ScaffoldServer>,
    selection_rng: SimRng,
}

impl<'a> Simulation<'a> {
    pub fn new(
        cfg: SimulationConfig,
        train: &'a LabeledDataset,
        test: &'a LabeledDataset,
        partition: &Partition,
        surrogate: Option<&'a LabeledDataset>,
    ) -> Result<Self> {
        partition.validate(train.len())?;
        if train.input_dim() != cfg.arch.input_dim || test.input_dim() != cfg.arch.input_dim {
            return Err(Error::dims("dataset input dimension", cfg.arch.input_dim, train.input_dim()));
        }
        if let Some(s) = surrogate {
            if s.input_dim() != cfg.arch.input_dim {
                return Err(Error::dims("surrogate input dimension", cfg.arch.input_dim, s.input_dim()));
            }
        }
        cfg.fedgps.validate()?;
        let local_errors = cfg.local.violations();
        if !local_errors.is_empty() {
            return Err(Error::Config(local_errors));
        }
        let model = MlpModel::new(&cfg.arch, &mut rng::stream(cfg.training_seed, Stream::Init));
        let theta0 = model.flatten();
        let p = theta0.len();
        let mut server = ServerState::new(theta0, cfg.eta_g);
        server.prototype_agg = cfg.fedgps.prototype_agg;
        let clients = partition
            .shards
            .iter()
            .enumerate()
            .map(|(k, shard)| ClientState::new(k, shard.clone(), p, cfg.training_seed))
            .collect::<Vec<_>>();
        let scaffold = (cfg.algo == Algo::Scaffold).then(|| ScaffoldServer::new(p, clients.len()));
        Ok(Simulation {
            selection_rng: rng::stream(cfg.training_seed, Stream::Selection),
            cfg,
            train,
            test,
            surrogate,
            server,
            clients,
            meter: CommMeter::default(),
            velocity: ParamVector::zeros(p),
            scaffold,
        })
    }

    pub fn global_model(&self) -> Result<MlpModel> {
        MlpModel::from_params(&self.cfg.arch, &self.server.global_params)
    }

    fn rectification_active(&self) -> bool {
        self.cfg.algo.is_fedgps() && self.cfg.fedgps.rectifies()
    }

    /// Non-self gradient handed to `client` this round, if any.
    fn nsg_for(&self, client: &ClientState) -> Result<Option<ParamVector>> {
        let t = self.server.round;
        if !self.rectification_active() || t == 0 {
            return Ok(None);
        }
        let sign = self.cfg.fedgps.nsg_sign;
        let delta = match self.cfg.algo {
            Algo::FedGps => match self.server.non_self_gradient(client.id, self.cfg.local.eta_l) {
                Ok(d) => d,
                Err(Error::NoNonSelfHistory { .. }) => return Ok(None),
                Err(e) => return Err(e),
            },
            Algo::FedGpsCf => {
                let share = match self.cfg.fedgps.cf_own_share {
                    CfOwnShare::Exact => self.server.eta_g / self.server.prev_selected.len() as f64,
                    CfOwnShare::Literal => 1.0,
                };
                non_self_gradient_cf(
                    &self.server.prev_global_delta,
                    client.last_delta.as_ref(),
                    client.selected_in(t - 1),
                    share,
                )?
            }
            _ => return Ok(None),
        };
        Ok(Some(if sign == 1.0 { delta } else { delta.scaled(sign) }))
    }

    /// Runs one communication round.
    pub fn step(&mut self) -> Result<RoundRecord> {
        let started = Instant::now();
        let t = self.server.round;
        let rectifying = self.rectification_active();
        let selected = sample_clients(
            self.clients.len(),
            self.cfg.sample_rate,
            &mut self.selection_rng,
            rectifying,
        )?;
        let mut nsgs: BTreeMap<usize, Option<ParamVector>> = BTreeMap::new();
        for &k in &selected {
            nsgs.insert(k, self.nsg_for(&self.clients[k])?);
        }

        let theta = self.server.global_params.clone();
        let cfg = &self.cfg;
        let train = self.train;
        let surrogate = self.surrogate;
        let global_prototypes = self.server.global_prototypes.as_ref();
        let server_control = self.scaffold.as_ref().map(|s| &s.control);
        let train_one = |client: &mut ClientState| -> Result<(usize, LocalOutcome)> {
            let out = match cfg.algo {
                Algo::FedAvg | Algo::FedAvgM => {
                    fedavg_local_train(&cfg.arch, &theta, train, client, &cfg.local, t)
                }
                Algo::FedProx => fedprox_local_train(
                    &cfg.arch,
                    &theta,
                    train,
                    client,
                    &cfg.local,
                    cfg.fedprox_mu,
                    t,
                ),
                Algo::Scaffold => scaffold_local_train(
                    &cfg.arch,
                    &theta,
                    train,
                    client,
                    &cfg.local,
                    server_control.expect("scaffold server state"),
                    t,
                ),
                Algo::FedGps | Algo::FedGpsCf => fedgps_local_train(
                    &cfg.arch,
                    &theta,
                    train,
                    client,
                    &cfg.local,
                    FedGpsInputs {
                        surrogate,
                        global_prototypes,
                        nsg: nsgs[&client.id].as_ref(),
                        hyper: &cfg.fedgps,
                    },
                    t,
                ),
            }?;
            Ok((client.id, out))
        };
        let mut chosen: Vec<&mut ClientState> = self
            .clients
            .iter_mut()
            .filter(|c| selected.binary_search(&c.id).is_ok())
            .collect();
        let results: Vec<Result<(usize, LocalOutcome)>> = if cfg.parallel {
            chosen.par_iter_mut().map(|c| train_one(c)).collect()
        } else {
            chosen.iter_mut().map(|c| train_one(c)).collect()
        };
        let outcomes: BTreeMap<usize, LocalOutcome> = results.into_iter().collect::<Result<_>>()?;

        let deltas: BTreeMap<usize, ParamVector> =
            outcomes.iter().map(|(&k, o)| (k, o.delta.clone())).collect();
        let end_params: BTreeMap<usize, ParamVector> =
            deltas.iter().map(|(&k, d)| (k, theta.add(d))).collect();
        match self.cfg.algo {
            Algo::FedAvgM => fedavgm_server_update(
                &mut self.server,
                &mut self.velocity,
                deltas.clone(),
                self.cfg.server_momentum,
            )?,
            Algo::Scaffold => {
                let controls: BTreeMap<usize, ParamVector> = outcomes
                    .iter()
                    .filter_map(|(&k, o)| o.control_delta.clone().map(|c| (k, c)))
                    .collect();
                scaffold_server_update(
                    &mut self.server,
                    self.scaffold.as_mut().expect("scaffold server state"),
                    deltas.clone(),
                    &controls,
                )?;
            }
            _ => {
                self.server.aggregate(deltas.clone())?;
            }
        }
        let uploaded: BTreeMap<usize, Matrix> = outcomes
            .iter()
            .filter_map(|(&k, o)| o.prototypes.as_ref().map(|p| (k, p.means.clone())))
            .collect();
        if self.cfg.algo.is_fedgps() && !uploaded.is_empty() {
            self.server.aggregate_prototypes(&uploaded)?;
        }
        for (&k, d) in &deltas {
            self.clients[k].record_participation(t, d.clone());
        }

        let units = self.meter.meter_round(
            self.cfg.algo,
            self.cfg.arch.num_params() as u64,
            self.cfg.arch.num_classes as u64,
            self.cfg.arch.embed_dim() as u64,
            selected.len() as u64,
        );

        let completed = t + 1;
        let global = self.global_model()?;
        let test_acc = if completed.is_multiple_of(self.cfg.eval_every.max(1)) || completed == self.cfg.rounds {
            Some(accuracy(&global, self.test)?)
        } else {
            None
        };

        let (divergence, triangle) = match self.surrogate {
            Some(s) if self.cfg.divergence_every > 0 && completed.is_multiple_of(self.cfg.divergence_every) => {
                self.diagnostics(&global, s, &end_params, uploaded)?
            }
            _ => (None, None),
        };

        Ok(RoundRecord {
            round: completed,
            selected,
            test_acc,
            comm_down: units.down,
            comm_up: units.up,
            divergence,
            triangle,
            wallclock_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn diagnostics(
        &self,
        global: &MlpModel,
        surrogate: &LabeledDataset,
        end_params: &BTreeMap<usize, ParamVector>,
        mut local_protos: BTreeMap<usize, Matrix>,
    ) -> Result<(Option<f64>, Option<TriangleSummary>)> {
        let mut scratch = MlpModel::zeros(&self.cfg.arch);
        for (&k, p) in end_params {
            if !local_protos.contains_key(&k) {
                scratch.load_params(p)?;
                local_protos.insert(k, compute_local_prototypes(&scratch, surrogate)?.means);
            }
        }
        let global_protos = match (&self.server.global_prototypes, self.cfg.algo.is_fedgps()) {
            (Some(g), true) => g.clone(),
            _ => super::combine_prototypes(local_protos.values(), self.cfg.fedgps.prototype_agg)?,
        };
        let mut div = 0.0;
        for p in local_protos.values() {
            div += prototype_divergence(p, &global_protos)?;
        }
        div /= local_protos.len() as f64;

        let shards: Vec<LabeledDataset> = end_params
            .keys()
            .map(|&k| self.train.subset(&self.clients[k].shard))
            .collect();
        let probes: Vec<ClientProbe<'_>> = end_params
            .iter()
            .zip(&shards)
            .map(|((&k, p), shard)| ClientProbe {
                client: k,
                params: p,
                local_prototypes: &local_protos[&k],
                local_data: shard,
            })
            .collect();
        let report = triangle_diagnostic(&self.cfg.arch, global, &global_protos, &probes, self.test)?;
        if report.violations > 0 {
            log::warn!(
                "round {}: distance triangle bound violated for {} client(s) (lhs {:.4} > min bound {:.4})",
                self.server.round,
                report.violations,
                report.lhs,
                report.min_bound
            );
        }
        Ok((
            Some(div),
            Some(TriangleSummary {
                lhs: report.lhs,
                kappa: report.kappa,
                min_bound: report.min_bound,
                violations: report.violations,
            }),
        ))
    }

    /// Runs until `cfg.rounds` rounds have completed, feeding each record to `sink`.
    pub fn run<F: FnMut(&RoundRecord) -> Result<()>>(&mut self, mut sink: F) -> Result<Vec<RoundRecord>> {
        let mut out = Vec::with_capacity(self.cfg.rounds);
        while self.server.round < self.cfg.rounds {
            let rec = self.step()?;
            sink(&rec)?;
            out.push(rec);
        }
        Ok(out)
    }
}
