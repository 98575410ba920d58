//! JSON experiment configuration.
//!
//! Every block rejects unknown keys and every omitted field takes its
//! documented default, so a parsed config serializes back to a complete,
//! self-describing file.

use crate::adaptation::{AdaptOptions, BetaMode};
use crate::classifier::PRIOR_FLOOR;
use crate::datagen::{self, build_federation, ClientShard, FederatedDataConfig, SyntheticTask, SyntheticTaskSpec};
use crate::error::{Error, Result};
use crate::federation::{AlgorithmKind, FederationConfig};
use crate::gauss::CovOptions;
use crate::mlp::TrainHyper;
use crate::rng::{stream, Purpose};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetBlock,
    pub federation: FederationBlock,
    #[serde(default)]
    pub pfedfda: PfedfdaBlock,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_eval_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetBlock {
    /// Synthetic task; used when `csv_path` is absent.
    #[serde(default)]
    pub synthetic: SyntheticTaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_clients")]
    pub clients: usize,
    /// Absent: no covariate shift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftBlock>,
    /// Fraction of each client's training data kept.
    #[serde(default = "one")]
    pub scarcity: f64,
    /// Seeds partitioning, splitting and corruption; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default = "default_min_client_samples")]
    pub min_client_samples: usize,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_clients() -> usize {
    20
}

fn one() -> f64 {
    1.0
}

fn default_min_client_samples() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftBlock {
    /// Leading clients to corrupt; defaults to half the federation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifted_clients: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationBlock {
    pub algorithm: AlgorithmKind,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_epochs")]
    pub local_epochs: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
}

fn default_rounds() -> usize {
    200
}
fn default_epochs() -> usize {
    5
}
fn default_q() -> f64 {
    0.3
}
fn default_lr() -> f64 {
    0.01
}
fn default_momentum() -> f64 {
    0.5
}
fn default_weight_decay() -> f64 {
    5e-4
}
fn default_batch_size() -> usize {
    50
}
fn default_hidden() -> Vec<usize> {
    vec![32]
}
fn default_feature_dim() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PfedfdaBlock {
    #[serde(default)]
    pub beta_mode: BetaMode,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_min_corr_eig")]
    pub min_corr_eig: f64,
    #[serde(default = "default_prior_floor")]
    pub prior_floor: f64,
}

fn default_k() -> usize {
    2
}
fn default_epsilon() -> f64 {
    CovOptions::default().epsilon
}
fn default_min_corr_eig() -> f64 {
    CovOptions::default().min_corr_eig
}
fn default_prior_floor() -> f64 {
    PRIOR_FLOOR
}

impl Default for PfedfdaBlock {
    fn default() -> Self {
        Self {
            beta_mode: BetaMode::default(),
            k: default_k(),
            epsilon: default_epsilon(),
            min_corr_eig: default_min_corr_eig(),
            prior_floor: default_prior_floor(),
        }
    }
}

impl Default for DatasetBlock {
    fn default() -> Self {
        Self {
            synthetic: SyntheticTaskSpec::default(),
            csv_path: None,
            alpha: default_alpha(),
            clients: default_clients(),
            shift: None,
            scarcity: 1.0,
            split_seed: None,
            min_client_samples: default_min_client_samples(),
        }
    }
}

impl FederationBlock {
    pub fn new(algorithm: AlgorithmKind) -> Self {
        Self {
            algorithm,
            rounds: default_rounds(),
            local_epochs: default_epochs(),
            q: default_q(),
            lr: default_lr(),
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            batch_size: default_batch_size(),
            hidden_dims: default_hidden(),
            feature_dim: default_feature_dim(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults everywhere except the algorithm.
    pub fn new(algorithm: AlgorithmKind) -> Self {
        Self {
            dataset: DatasetBlock::default(),
            federation: FederationBlock::new(algorithm),
            pfedfda: PfedfdaBlock::default(),
            seed: 0,
            output_dir: default_output_dir(),
            eval_every: default_eval_every(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let f = &self.federation;
        if !(f.q > 0.0 && f.q <= 1.0) {
            return bad("q out of (0,1]");
        }
        if !(f.lr >= 0.0 && f.lr.is_finite()) {
            return bad("lr must be a finite nonnegative number");
        }
        if !(0.0..1.0).contains(&f.momentum) {
            return bad("momentum out of [0,1)");
        }
        if !(f.weight_decay >= 0.0) {
            return bad("weight_decay must be nonnegative");
        }
        if f.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if f.feature_dim == 0 || f.hidden_dims.contains(&0) {
            return bad("hidden_dims and feature_dim must be positive");
        }
        let d = &self.dataset;
        if !(d.alpha > 0.0 && d.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if d.clients == 0 {
            return bad("clients must be at least 1");
        }
        if !(d.scarcity > 0.0 && d.scarcity <= 1.0) {
            return bad("scarcity out of (0,1]");
        }
        if let Some(ShiftBlock { shifted_clients: Some(s) }) = &d.shift {
            if *s > d.clients {
                return bad("shift.shifted_clients exceeds clients");
            }
        }
        if d.csv_path.is_none() {
            d.synthetic.validate().map_err(|e| Error::Config(format!("dataset.synthetic: {e}")))?;
        }
        let p = &self.pfedfda;
        if p.k < 2 {
            return bad("k must be at least 2");
        }
        if !(p.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(p.min_corr_eig > 0.0) {
            return bad("min_corr_eig must be positive");
        }
        if !(p.prior_floor > 0.0 && p.prior_floor < 1.0) {
            return bad("prior_floor out of (0,1)");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1");
        }
        Ok(())
    }

    pub fn shifted_clients(&self) -> usize {
        match &self.dataset.shift {
            None => 0,
            Some(s) => s.shifted_clients.unwrap_or(self.dataset.clients / 2),
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.dataset.split_seed.unwrap_or(self.seed)
    }

    /// The round-loop settings this config describes.
    pub fn federation_config(&self) -> FederationConfig {
        let f = &self.federation;
        let p = &self.pfedfda;
        FederationConfig {
            algorithm: f.algorithm,
            rounds: f.rounds,
            participation: f.q,
            hyper: TrainHyper {
                lr: f.lr,
                momentum: f.momentum,
                weight_decay: f.weight_decay,
                batch_size: f.batch_size,
                epochs: f.local_epochs,
            },
            hidden_dims: f.hidden_dims.clone(),
            feature_dim: f.feature_dim,
            adapt: AdaptOptions {
                mode: p.beta_mode,
                folds: p.k,
                cov: CovOptions { epsilon: p.epsilon, min_corr_eig: p.min_corr_eig },
                prior_floor: p.prior_floor,
            },
            seed: self.seed,
            eval_every: self.eval_every,
            threads: None,
        }
    }

    /// Generates (or loads) the base data and cuts it into client shards.
    pub fn build_shards(&self) -> Result<Vec<ClientShard>> {
        let d = &self.dataset;
        let seed = self.split_seed();
        let base = match &d.csv_path {
            Some(path) => datagen::load_csv_dataset(path)?,
            None => SyntheticTask::new(&d.synthetic)?.sample(&mut stream(seed, Purpose::BaseSamples, 0, 0))?,
        };
        build_federation(
            &base,
            &FederatedDataConfig {
                clients: d.clients,
                alpha: d.alpha,
                shifted_clients: self.shifted_clients(),
                train_fraction: d.scarcity,
                min_client_samples: d.min_client_samples,
                seed,
            },
        )
    }
}

/// Reads and validates a JSON config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"dataset": {}, "federation": {"algorithm": "pfedfda"}}"#;

    #[test]
    fn minimal_config_takes_training_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let f = &cfg.federation;
        assert_eq!((f.rounds, f.local_epochs), (200, 5));
        assert_eq!((f.lr, f.momentum, f.weight_decay, f.q), (0.01, 0.5, 5e-4, 0.3));
        assert_eq!(cfg.pfedfda.k, 2);
        assert_eq!(cfg.eval_every, 10);
    }

    #[test]
    fn q_out_of_range() {
        let text = r#"{"dataset": {}, "federation": {"algorithm": "fedavg", "q": 1.5}}"#;
        assert_eq!(ExperimentConfig::from_json(text).unwrap_err().to_string(), "config error: q out of (0,1]");
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = r#"{"dataset": {}, "federation": {"algorithm": "fedavg"}, "foo": 1}"#;
        assert!(ExperimentConfig::from_json(text).unwrap_err().to_string().contains("foo"));
        let nested = r#"{"dataset": {"bar": 2}, "federation": {"algorithm": "fedavg"}}"#;
        assert!(ExperimentConfig::from_json(nested).unwrap_err().to_string().contains("bar"));
    }

    #[test]
    fn missing_algorithm_is_an_error() {
        let text = r#"{"dataset": {}, "federation": {}}"#;
        assert!(ExperimentConfig::from_json(text).unwrap_err().to_string().contains("algorithm"));
    }

    #[test]
    fn missing_file_is_a_config_error() {
        assert!(matches!(parse_config(Path::new("/nonexistent/cfg.json")), Err(Error::Config(_))));
    }

    #[test]
    fn reserialized_config_is_a_fixed_point() {
        let once = ExperimentConfig::from_json(MINIMAL).unwrap();
        let twice = ExperimentConfig::from_json(&once.to_json()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.to_json(), twice.to_json());
    }

    #[test]
    fn shift_block_defaults_to_half() {
        let text = r#"{"dataset": {"clients": 9, "shift": {}}, "federation": {"algorithm": "fedavg"}}"#;
        assert_eq!(ExperimentConfig::from_json(text).unwrap().shifted_clients(), 4);
    }
}
