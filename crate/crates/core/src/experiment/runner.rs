//! Scenario × seed × algorithm sweeps and their on-disk artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! config.toml  config.sha1  results.csv  summary.csv  summary_final.csv
//! partitions/scenario_<s>.jsonl
//! <algo>/scenario_<s>/seed_<t>/{rounds.jsonl, checkpoint.bin, server.json}
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha1::{Digest, Sha1};

use super::config::{DatasetSpec, ExperimentConfig, PartitionSpec};
use crate::algorithms::Algo;
use crate::data::{
    cn_partition, dirichlet_partition, gen_blobs, gen_surrogate, load_csv, load_idx, LabeledDataset,
    Partition, SurrogateSpec,
};
use crate::error::{Error, Result};
use crate::eval::{default_target, summarize, write_summary_csv, Metric, ScenarioResult, SummaryRow};
use crate::nn::{checkpoint, Activation, Architecture, Matrix, MlpModel};
use crate::protocol::{RoundRecord, Simulation, SimulationConfig};
use crate::rng::{self, Stream};

/// Train/test split plus the shared surrogate set.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub surrogate: LabeledDataset,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (full, data_seed) = match &cfg.dataset {
        DatasetSpec::Blobs {
            num_classes,
            input_dim,
            n_per_class,
            separation,
            noise_std,
            seed,
        } => (
            gen_blobs(*num_classes, *input_dim, *n_per_class, *separation, *noise_std, *seed)?,
            *seed,
        ),
        DatasetSpec::Idx { images, labels } => (load_idx(images, labels)?, 0),
        DatasetSpec::Csv { path } => (load_csv(path)?, 0),
    };
    let (train, test) =
        full.stratified_split(cfg.holdout_fraction, &mut rng::stream(data_seed, Stream::Holdout))?;
    let s = &cfg.surrogate;
    let spec = SurrogateSpec::random(
        full.num_classes,
        full.input_dim(),
        s.mean_scale,
        s.std,
        s.n_per_class,
        s.seed,
    )?;
    let surrogate = gen_surrogate(&spec)?;
    Ok(PreparedData {
        train,
        test,
        surrogate,
    })
}

pub fn architecture(cfg: &ExperimentConfig, data: &PreparedData) -> Architecture {
    Architecture {
        input_dim: data.train.input_dim(),
        hidden: vec![cfg.model.hidden, cfg.model.embed_dim],
        num_classes: data.train.num_classes,
        activation: Activation::Relu,
    }
}

pub fn build_partition(cfg: &ExperimentConfig, labels: &[usize], num_classes: usize, seed: u64) -> Result<Partition> {
    match cfg.partition {
        PartitionSpec::Dirichlet { alpha } => dirichlet_partition(labels, cfg.clients, alpha, seed),
        PartitionSpec::Cn { classes_per_client } => {
            cn_partition(labels, cfg.clients, classes_per_client.min(num_classes), seed)
        }
    }
}

pub fn simulation_config(cfg: &ExperimentConfig, arch: Architecture, algo: Algo, training_seed: u64) -> SimulationConfig {
    SimulationConfig {
        algo,
        arch,
        sample_rate: cfg.sample_rate,
        eta_g: cfg.eta_g,
        rounds: cfg.rounds,
        local: cfg.local.clone(),
        fedgps: cfg.fedgps.clone(),
        fedprox_mu: cfg.fedprox_mu,
        server_momentum: cfg.server_momentum,
        eval_every: cfg.eval_every,
        divergence_every: cfg.divergence_every,
        training_seed,
        parallel: cfg.parallel,
    }
}

/// Everything one training run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algo: Algo,
    pub scenario_seed: u64,
    pub training_seed: u64,
    pub records: Vec<RoundRecord>,
    pub model: MlpModel,
    pub sidecar: ServerSidecar,
}

impl RunOutcome {
    pub fn best_accuracy(&self) -> f64 {
        self.records.iter().filter_map(|r| r.test_acc).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.records.iter().rev().find_map(|r| r.test_acc).unwrap_or(f64::NAN)
    }

    /// First logged round whose accuracy reaches `target`.
    pub fn round_to_target(&self, target: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.test_acc.is_some_and(|a| a >= target))
            .map(|r| r.round)
    }
}

/// Server state worth keeping next to the final checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerSidecar {
    pub rounds_completed: usize,
    pub eta_g: f64,
    pub last_selected: Vec<usize>,
    pub comm_total_down: u64,
    pub comm_total_up: u64,
    pub global_prototypes: Option<Matrix>,
}

/// Runs one algorithm on one partition, streaming records to `sink`.
pub fn run_single<F>(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    partition: &Partition,
    algo: Algo,
    scenario_seed: u64,
    training_seed: u64,
    sink: F,
) -> Result<RunOutcome>
where
    F: FnMut(&RoundRecord) -> Result<()>,
{
    let arch = architecture(cfg, data);
    let sim_cfg = simulation_config(cfg, arch, algo, training_seed);
    let mut sim = Simulation::new(sim_cfg, &data.train, &data.test, partition, Some(&data.surrogate))?;
    let records = sim.run(sink)?;
    let model = sim.global_model()?;
    let sidecar = ServerSidecar {
        rounds_completed: sim.server.round,
        eta_g: sim.server.eta_g,
        last_selected: sim.server.prev_selected.clone(),
        comm_total_down: sim.meter.total_down,
        comm_total_up: sim.meter.total_up,
        global_prototypes: sim.server.global_prototypes.clone(),
    };
    Ok(RunOutcome {
        algo,
        scenario_seed,
        training_seed,
        records,
        model,
        sidecar,
    })
}

/// Git's blob object id for `content`.
pub fn git_blob_sha1(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run_dir(out: &Path, algo: Algo, scenario_seed: u64, training_seed: u64) -> PathBuf {
    out.join(algo.as_str())
        .join(format!("scenario_{scenario_seed}"))
        .join(format!("seed_{training_seed}"))
}

/// Results of a full sweep, in (scenario, training seed, algorithm) order.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub results: Vec<ScenarioResult>,
    pub summary: Vec<SummaryRow>,
}

fn write_jsonl_records(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_jsonl_records(&dir.join("rounds.jsonl"), &outcome.records)?;
    checkpoint::save(&outcome.model, &dir.join("checkpoint.bin"))?;
    let side = BufWriter::new(File::create(dir.join("server.json"))?);
    serde_json::to_writer_pretty(side, &outcome.sidecar)?;
    Ok(())
}

/// Attaches round-to-target and speedup, using each scenario's FedAvg run
/// with the same training seed as the baseline.
pub fn scenario_results(cfg: &ExperimentConfig, outcomes: &[RunOutcome]) -> Vec<ScenarioResult> {
    let label = cfg.partition.label();
    outcomes
        .iter()
        .map(|o| {
            let baseline = outcomes.iter().find(|b| {
                b.algo == Algo::FedAvg
                    && b.scenario_seed == o.scenario_seed
                    && b.training_seed == o.training_seed
            });
            let (round_to_target, speedup) = match baseline {
                Some(b) => {
                    let target = default_target(b.best_accuracy());
                    let mine = o.round_to_target(target);
                    (mine, crate::eval::speedup(b.round_to_target(target), mine))
                }
                None => (None, None),
            };
            ScenarioResult {
                algo: o.algo.as_str().to_string(),
                scenario: format!("{label}_s{}", o.scenario_seed),
                seed: o.training_seed,
                best_accuracy: o.best_accuracy(),
                final_accuracy: o.final_accuracy(),
                round_to_target,
                speedup,
            }
        })
        .collect()
}

/// Runs every configured job and writes the full artifact tree.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out = cfg.resolved_output_dir();
    fs::create_dir_all(out.join("partitions"))?;
    let echo = cfg.to_toml();
    fs::write(out.join("config.toml"), &echo)?;
    fs::write(out.join("config.sha1"), format!("{}\n", git_blob_sha1(echo.as_bytes())))?;

    let data = prepare_data(cfg)?;
    let mut partitions = Vec::with_capacity(cfg.scenario_seeds.len());
    for &s in &cfg.scenario_seeds {
        let p = build_partition(cfg, &data.train.labels, data.train.num_classes, s)?;
        p.write_jsonl(BufWriter::new(File::create(
            out.join("partitions").join(format!("scenario_{s}.jsonl")),
        )?))?;
        partitions.push((s, p));
    }

    let jobs: Vec<(usize, u64, Algo)> = (0..partitions.len())
        .flat_map(|i| {
            cfg.training_seeds
                .iter()
                .flat_map(move |&t| cfg.algos.iter().map(move |&a| (i, t, a)))
        })
        .collect();
    let run_job = |&(i, t, algo): &(usize, u64, Algo)| -> Result<RunOutcome> {
        let (s, partition) = &partitions[i];
        log::info!("running {algo} scenario {s} seed {t}");
        let outcome = run_single(cfg, &data, partition, algo, *s, t, |r| {
            log::debug!("{algo} s{s} t{t} round {} acc {:?}", r.round, r.test_acc);
            Ok(())
        })?;
        write_run(&run_dir(&out, algo, *s, t), &outcome)?;
        Ok(outcome)
    };
    let outcomes: Vec<RunOutcome> = if cfg.parallel {
        jobs.par_iter().map(run_job).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run_job).collect::<Result<_>>()?
    };

    let results = scenario_results(cfg, &outcomes);
    let mut w = csv::Writer::from_path(out.join("results.csv"))?;
    for r in &results {
        w.serialize(r)?;
    }
    w.flush()?;
    let summary = summarize(&results, Metric::Best)?;
    write_summary_csv(&summary, Metric::Best, File::create(out.join("summary.csv"))?)?;
    let final_rows = summarize(&results, Metric::Final)?;
    write_summary_csv(&final_rows, Metric::Final, File::create(out.join("summary_final.csv"))?)?;
    Ok(ExperimentReport {
        output_dir: out,
        results,
        summary,
    })
}

/// Reads a `results.csv` written by [`run_experiment`].
pub fn read_results(path: &Path) -> Result<Vec<ScenarioResult>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
