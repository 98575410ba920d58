//! The three commands behind the `fedfda` binary, usable as a library.

use crate::config::ExperimentConfig;
use crate::datagen::{dirichlet_partition, ClientShard};
use crate::error::{Error, Result};
use crate::federation::{run_federation, ClientSummary, FederationOutcome, RoundReport};
use crate::rng::{stream, Purpose};
use crate::theory::{beta_sweep, unit_grid, SweepRow, TheoremScenario};
use std::path::{Path, PathBuf};

/// Process exit status for a failure of this kind.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        _ => 2,
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    csv::Writer::from_path(path).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv output: {other:?}")),
    }
}

pub fn write_rounds_csv(path: &Path, reports: &[RoundReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["round", "mean_acc", "std_acc", "mean_beta", "active_clients"]).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.round.to_string(),
            fmt6(r.mean_acc),
            fmt6(r.std_acc),
            fmt_opt(r.mean_beta),
            r.active_clients.len().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_clients_csv(path: &Path, clients: &[ClientSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["client_id", "n_train", "corruption_kind", "severity", "beta", "test_acc"]).map_err(csv_err)?;
    for c in clients {
        let (kind, severity) = match c.corruption {
            Some(s) => (s.kind.name(), s.severity),
            None => ("none", 0),
        };
        w.write_record([
            c.client_id.to_string(),
            c.n_train.to_string(),
            kind.to_string(),
            severity.to_string(),
            fmt_opt(c.beta),
            fmt_opt(c.test_acc),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_theory_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["beta", "mc_mean_error", "bound", "coverage"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([fmt6(r.beta), fmt6(r.mc_mean_error), fmt6(r.bound), fmt6(r.coverage)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-client class counts, `client_id,class_id,count`, zeros included.
pub fn write_partition_csv(path: &Path, counts: &[Vec<usize>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["client_id", "class_id", "count"]).map_err(csv_err)?;
    for (i, row) in counts.iter().enumerate() {
        for (c, n) in row.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string(), n.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Command-line overrides for `run`; set values win over the file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunOverrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
    }
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub rounds_csv: PathBuf,
    pub clients_csv: PathBuf,
    pub outcome: FederationOutcome,
}

/// Builds the shards, runs the federation and writes `rounds.csv` and
/// `clients.csv` into the config's output directory.
pub fn cmd_run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunArtifacts> {
    cfg.validate()?;
    let shards: Vec<ClientShard> = cfg.build_shards()?;
    let mut fed = cfg.federation_config();
    fed.threads = threads;
    let outcome = run_federation(&fed, &shards)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let rounds_csv = dir.join("rounds.csv");
    let clients_csv = dir.join("clients.csv");
    write_rounds_csv(&rounds_csv, &outcome.reports)?;
    write_clients_csv(&clients_csv, &outcome.clients)?;
    Ok(RunArtifacts { rounds_csv, clients_csv, outcome })
}

#[derive(Debug, Clone)]
pub struct TheoryArgs {
    pub scenario: TheoremScenario,
    pub client: usize,
    pub trials: usize,
    pub grid_points: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for TheoryArgs {
    fn default() -> Self {
        Self {
            scenario: TheoremScenario::default(),
            client: 0,
            trials: 10_000,
            grid_points: 21,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

/// Sweeps β over an even grid and writes `theory.csv`.
pub fn cmd_theory(args: &TheoryArgs) -> Result<(PathBuf, Vec<SweepRow>)> {
    args.scenario.validate().map_err(|e| Error::Config(e.to_string()))?;
    if args.client >= args.scenario.clients() {
        return Err(Error::Config(format!("client {} out of range", args.client)));
    }
    if args.trials == 0 || args.grid_points < 2 {
        return Err(Error::Config("trials must be positive and the grid needs at least 2 points".into()));
    }
    let rows = beta_sweep(&args.scenario, args.client, args.trials, &unit_grid(args.grid_points), args.seed)?;
    let path = args.out.join("theory.csv");
    write_theory_csv(&path, &rows)?;
    Ok((path, rows))
}

#[derive(Debug, Clone)]
pub struct PreviewArgs {
    pub class_counts: Vec<usize>,
    pub clients: usize,
    pub alpha: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl PreviewArgs {
    /// Label totals and partition settings taken from an experiment config.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let d = &cfg.dataset;
        let class_counts = match &d.csv_path {
            Some(path) => {
                let data = crate::datagen::load_csv_dataset(path)?;
                let mut counts = vec![0; data.num_classes()];
                for &y in &data.y {
                    counts[y] += 1;
                }
                counts
            }
            None => vec![d.synthetic.samples_per_class; d.synthetic.num_classes],
        };
        Ok(Self {
            class_counts,
            clients: d.clients,
            alpha: d.alpha,
            seed: cfg.split_seed(),
            out: cfg.output_dir.clone(),
        })
    }
}

/// Draws one Dirichlet partition and writes `partition.csv`. Returns the
/// per-client class counts.
pub fn cmd_partition_preview(args: &PreviewArgs) -> Result<(PathBuf, Vec<Vec<usize>>)> {
    if args.clients == 0 || !(args.alpha > 0.0) || args.class_counts.is_empty() {
        return Err(Error::Config("need at least one client and class, and alpha > 0".into()));
    }
    let labels: Vec<usize> =
        args.class_counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    let mut rng = stream(args.seed, Purpose::Partition, 0, 0);
    let parts = dirichlet_partition(&labels, args.clients, args.alpha, &mut rng)?;
    let counts: Vec<Vec<usize>> = parts
        .iter()
        .map(|idx| {
            let mut row = vec![0; args.class_counts.len()];
            for &j in idx {
                row[labels[j]] += 1;
            }
            row
        })
        .collect();
    let path = args.out.join("partition.csv");
    write_partition_csv(&path, &counts)?;
    Ok((path, counts))
}
