//! The standard synthetic comparison: 20 clients, 5 classes, Dirichlet(0.5)
//! label skew, half the clients corrupted, optional training-set scarcity.
//!
//! The task is deliberately hard (overlapping classes in a full-rank 24-dim
//! latent space) so that label skew and client-specific shifts matter.

use crate::adaptation::BetaMode;
use crate::config::{ExperimentConfig, ShiftBlock};
use crate::error::Result;
use crate::federation::{run_federation, AlgorithmKind, FederationOutcome};

/// Knobs that vary between benchmark arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub algorithm: AlgorithmKind,
    pub beta_mode: BetaMode,
    /// Fraction of training data kept per client.
    pub scarcity: f64,
}

impl Arm {
    pub fn new(algorithm: AlgorithmKind, scarcity: f64) -> Self {
        Self { algorithm, beta_mode: BetaMode::Single, scarcity }
    }

    pub fn with_beta_mode(mut self, mode: BetaMode) -> Self {
        self.beta_mode = mode;
        self
    }

    pub fn label(&self) -> String {
        let mut s = self.algorithm.name().to_string();
        if self.algorithm == AlgorithmKind::Pfedfda {
            s += match self.beta_mode {
                BetaMode::None => "/none",
                BetaMode::Single => "/single",
                BetaMode::Multi => "/multi",
            };
        }
        format!("{s}@{:.0}%", self.scarcity * 100.0)
    }
}

pub const BENCHMARK_ROUNDS: usize = 200;

/// Benchmark config for one arm and seed.
pub fn benchmark_config(arm: &Arm, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(arm.algorithm);
    cfg.seed = seed;
    cfg.dataset.synthetic.separation = 0.5;
    cfg.dataset.synthetic.latent_dim = 24;
    cfg.dataset.synthetic.samples_per_class = 1200;
    cfg.dataset.clients = 20;
    cfg.dataset.alpha = 0.5;
    cfg.dataset.scarcity = arm.scarcity;
    cfg.dataset.shift = Some(ShiftBlock { shifted_clients: Some(10) });
    cfg.federation.rounds = BENCHMARK_ROUNDS;
    cfg.pfedfda.beta_mode = arm.beta_mode;
    cfg.eval_every = BENCHMARK_ROUNDS;
    cfg
}

/// Final-round summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub mean_acc: f64,
    /// Mean β over corrupted / clean clients (pFedFDA only).
    pub beta_shifted: Option<f64>,
    pub beta_clean: Option<f64>,
}

pub fn summarize(outcome: &FederationOutcome) -> ArmResult {
    let last = outcome.reports.last().expect("at least one evaluation");
    let group = |shifted: bool| {
        let betas: Vec<f64> =
            outcome.clients.iter().filter(|c| c.corruption.is_some() == shifted).filter_map(|c| c.beta).collect();
        (!betas.is_empty()).then(|| betas.iter().sum::<f64>() / betas.len() as f64)
    };
    ArmResult { mean_acc: last.mean_acc, beta_shifted: group(true), beta_clean: group(false) }
}

pub fn run_arm(cfg: &ExperimentConfig) -> Result<ArmResult> {
    let shards = cfg.build_shards()?;
    Ok(summarize(&run_federation(&cfg.federation_config(), &shards)?))
}
