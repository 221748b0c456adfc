//! TOML experiment configuration with dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algo, FedGpsHyper, LocalHyper, FEDPROX_MU, SERVER_MOMENTUM};
use crate::error::{Error, Result};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "FEDGPS_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        num_classes: usize,
        input_dim: usize,
        /// Points per class before the holdout split.
        #[serde(default = "default_n_per_class")]
        n_per_class: usize,
        #[serde(default = "one")]
        separation: f64,
        #[serde(default = "one")]
        noise_std: f64,
        #[serde(default)]
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_n_per_class() -> usize {
    500
}

fn one() -> f64 {
    1.0
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Blobs {
            num_classes: 10,
            input_dim: 16,
            n_per_class: 500,
            separation: 1.0,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PartitionSpec {
    Dirichlet { alpha: f64 },
    /// Every client holds exactly `classes_per_client` labels.
    Cn { classes_per_client: usize },
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec::Dirichlet { alpha: 0.1 }
    }
}

impl PartitionSpec {
    /// Column label used for this partition's scenarios.
    pub fn label(&self) -> String {
        match self {
            PartitionSpec::Dirichlet { alpha } => format!("dir{alpha}"),
            PartitionSpec::Cn { classes_per_client } => format!("cn{classes_per_client}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Class means are `mean_scale · N(0, I)`.
    pub mean_scale: f64,
    pub std: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            mean_scale: 3.0,
            std: 1.0,
            n_per_class: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub embed_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 64,
            embed_dim: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub output_dir: PathBuf,
    pub algos: Vec<Algo>,
    pub clients: usize,
    pub sample_rate: f64,
    pub rounds: usize,
    pub eta_g: f64,
    /// Each seed draws a different partition of the same training split.
    pub scenario_seeds: Vec<u64>,
    /// Each seed re-draws model init, client selection and minibatch order.
    pub training_seeds: Vec<u64>,
    pub holdout_fraction: f64,
    pub eval_every: usize,
    pub divergence_every: usize,
    pub fedprox_mu: f64,
    pub server_momentum: f64,
    /// Run independent jobs on the rayon pool.
    pub parallel: bool,
    pub dataset: DatasetSpec,
    pub partition: PartitionSpec,
    pub surrogate: SurrogateConfig,
    pub model: ModelConfig,
    pub local: LocalHyper,
    pub fedgps: FedGpsHyper,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            output_dir: PathBuf::from("runs"),
            algos: vec![Algo::FedAvg, Algo::FedGps],
            clients: 10,
            sample_rate: 0.5,
            rounds: 150,
            eta_g: 1.0,
            scenario_seeds: vec![0, 1, 2, 3, 4],
            training_seeds: vec![0],
            holdout_fraction: 0.2,
            eval_every: 1,
            divergence_every: 5,
            fedprox_mu: FEDPROX_MU,
            server_momentum: SERVER_MOMENTUM,
            parallel: true,
            dataset: DatasetSpec::default(),
            partition: PartitionSpec::default(),
            surrogate: SurrogateConfig::default(),
            model: ModelConfig::default(),
            local: LocalHyper::default(),
            fedgps: FedGpsHyper::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses `text`, applies `key=value` overrides, and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(vec![format!("parse error: {e}")]))?;
        // a dotted override into a section the file omits starts from that section's defaults
        let defaults = toml::Table::try_from(ExperimentConfig::default()).expect("defaults serialize");
        for o in overrides {
            if let Some((key, raw)) = o.split_once('=') {
                if let Some((section, field)) = key.trim().split_once('.') {
                    if let (false, Some(d)) = (value.contains_key(section), defaults.get(section)) {
                        value.insert(section.to_string(), d.clone());
                    }
                    // switching variant drops the old variant's fields
                    let kind = raw.trim().trim_matches('"');
                    if field == "kind" {
                        if let Some(t) = value.get_mut(section).and_then(|v| v.as_table_mut()) {
                            if t.get("kind").and_then(|k| k.as_str()) != Some(kind) {
                                t.clear();
                            }
                        }
                    }
                }
            }
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every problem with the config, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.algos.is_empty() {
            v.push("algos must name at least one algorithm".into());
        }
        if self.clients == 0 {
            v.push("clients must be ≥ 1".into());
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            v.push(format!("sample_rate must be in (0, 1], got {}", self.sample_rate));
        }
        if self.rounds == 0 {
            v.push("rounds must be ≥ 1".into());
        }
        if !(self.eta_g > 0.0) {
            v.push(format!("eta_g must be > 0, got {}", self.eta_g));
        }
        if self.scenario_seeds.is_empty() {
            v.push("scenario_seeds must not be empty".into());
        }
        if self.training_seeds.is_empty() {
            v.push("training_seeds must not be empty".into());
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            v.push(format!("holdout_fraction must be in (0, 1), got {}", self.holdout_fraction));
        }
        if self.eval_every == 0 {
            v.push("eval_every must be ≥ 1".into());
        }
        if !(self.fedprox_mu >= 0.0) {
            v.push(format!("fedprox_mu must be ≥ 0, got {}", self.fedprox_mu));
        }
        if !(0.0..1.0).contains(&self.server_momentum) {
            v.push(format!("server_momentum must be in [0, 1), got {}", self.server_momentum));
        }
        match &self.dataset {
            DatasetSpec::Blobs {
                num_classes,
                input_dim,
                n_per_class,
                noise_std,
                ..
            } => {
                if *num_classes < 2 {
                    v.push("dataset.num_classes must be ≥ 2".into());
                }
                if *input_dim == 0 || *n_per_class == 0 {
                    v.push("dataset.input_dim and dataset.n_per_class must be ≥ 1".into());
                }
                if !(*noise_std > 0.0) {
                    v.push(format!("dataset.noise_std must be > 0, got {noise_std}"));
                }
            }
            DatasetSpec::Idx { images, labels } => {
                for p in [images, labels] {
                    if !p.is_file() {
                        v.push(format!("dataset file {} does not exist", p.display()));
                    }
                }
            }
            DatasetSpec::Csv { path } => {
                if !path.is_file() {
                    v.push(format!("dataset file {} does not exist", path.display()));
                }
            }
        }
        match self.partition {
            PartitionSpec::Dirichlet { alpha } if !(alpha > 0.0) => {
                v.push(format!("partition.alpha must be > 0, got {alpha}"));
            }
            PartitionSpec::Cn { classes_per_client: 0 } => {
                v.push("partition.classes_per_client must be ≥ 1".into());
            }
            _ => {}
        }
        if !(self.surrogate.std > 0.0) || self.surrogate.n_per_class == 0 {
            v.push("surrogate.std must be > 0 and surrogate.n_per_class ≥ 1".into());
        }
        if self.model.hidden == 0 || self.model.embed_dim == 0 {
            v.push("model.hidden and model.embed_dim must be ≥ 1".into());
        }
        v.extend(self.local.violations().into_iter().map(|e| format!("local.{e}")));
        v.extend(self.fedgps.violations().into_iter().map(|e| format!("fedgps.{e}")));
        let rectifies = self.algos.iter().any(|a| a.is_fedgps()) && self.fedgps.rectifies();
        if rectifies && self.clients > 0 && crate::protocol::sample_size(self.clients, self.sample_rate) < 2 {
            v.push("FedGPS rectification needs at least 2 clients per round".into());
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

    /// `output_dir`, placed under the env override root when it is relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => Path::new(&root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}

/// Sets `a.b.c = value`, creating tables as needed. The value is parsed as
/// TOML when possible and kept as a string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(vec![format!("override `{assignment}` is not key=value")]))?;
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(vec![format!("override `{key}`: `{p}` is not a table")]))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn override_into_missing_section_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml_str("", &["dataset.n_per_class=40".into()]).unwrap();
        match cfg.dataset {
            DatasetSpec::Blobs { n_per_class, num_classes, .. } => {
                assert_eq!((n_per_class, num_classes), (40, 10));
            }
            other => panic!("unexpected dataset {other:?}"),
        }
    }

    #[test]
    fn overrides_win_over_file() {
        let text = "rounds = 5\n[local]\neta_l = 0.1\n";
        let cfg = ExperimentConfig::from_toml_str(
            text,
            &[
                "rounds=7".into(),
                "local.eta_l = 0.05".into(),
                "algos=[\"scaffold\"]".into(),
                "partition.kind=cn".into(),
                "partition.classes_per_client=2".into(),
                "name=sweep".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.rounds, 7);
        assert_eq!(cfg.local.eta_l, 0.05);
        assert_eq!(cfg.algos, vec![Algo::Scaffold]);
        assert_eq!(cfg.partition, PartitionSpec::Cn { classes_per_client: 2 });
        assert_eq!(cfg.name, "sweep");
    }

    #[test]
    fn all_violations_reported() {
        let err = ExperimentConfig::from_toml_str(
            "rounds = 0\neval_every = 0\nsample_rate = 2.0\n[local]\nbatch_size = 0\n",
            &[],
        )
        .unwrap_err();
        match err {
            Error::Config(v) => {
                assert_eq!(v.len(), 4, "{v:?}");
                assert!(v.iter().any(|m| m.contains("local.batch_size")));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_files_rejected() {
        assert!(ExperimentConfig::from_toml_str("roundz = 3", &[]).is_err());
        let err = ExperimentConfig::from_toml_str(
            "[dataset]\nkind = \"csv\"\npath = \"/nonexistent/x.csv\"\n",
            &[],
        )
        .unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn lone_client_cannot_rectify() {
        let err = ExperimentConfig::from_toml_str("clients = 2\nsample_rate = 0.5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("at least 2 clients"));
    }
}
