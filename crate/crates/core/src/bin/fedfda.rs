use clap::{Parser, Subcommand};
use fedfda::cli::{self, PreviewArgs, RunOverrides, TheoryArgs};
use fedfda::{parse_config, Error, TheoremScenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fedfda", version, about = "Personalized federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one federated experiment and write rounds.csv and clients.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Sweep β for the mean-estimation bound and write theory.csv.
    Theory {
        /// JSON scenario; defaults to the built-in ten-client scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        client: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Draw one Dirichlet partition and write partition.csv.
    PartitionPreview {
        /// Take classes, clients, alpha and seed from an experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to 20.
        #[arg(long)]
        clients: Option<usize>,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 600)]
        samples_per_class: usize,
        /// Defaults to 0.5.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> fedfda::Result<()> {
    match command {
        Command::Run { config, seed, out, threads } => {
            let mut cfg = parse_config(&config)?;
            RunOverrides { seed, out, threads }.apply(&mut cfg);
            let art = cli::cmd_run(&cfg, threads)?;
            if let Some(last) = art.outcome.reports.last() {
                println!("round {}: mean_acc {:.4} std_acc {:.4}", last.round, last.mean_acc, last.std_acc);
            }
            println!("wrote {} and {}", art.rounds_csv.display(), art.clients_csv.display());
        }
        Command::Theory { scenario, client, trials, grid, delta, seed, out } => {
            let mut scenario = match scenario {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                    serde_json::from_str::<TheoremScenario>(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => TheoremScenario::default(),
            };
            if let Some(d) = delta {
                scenario.delta = d;
            }
            let (path, _) = cli::cmd_theory(&TheoryArgs { scenario, client, trials, grid_points: grid, seed, out })?;
            println!("wrote {}", path.display());
        }
        Command::PartitionPreview { config, clients, classes, samples_per_class, alpha, seed, out } => {
            let mut args = match config {
                Some(path) => PreviewArgs::from_config(&parse_config(&path)?)?,
                None => PreviewArgs {
                    class_counts: vec![samples_per_class; classes],
                    clients: 20,
                    alpha: 0.5,
                    seed: 0,
                    out: PathBuf::from("out"),
                },
            };
            if let Some(m) = clients {
                args.clients = m;
            }
            if let Some(a) = alpha {
                args.alpha = a;
            }
            if let Some(s) = seed {
                args.seed = s;
            }
            if let Some(o) = out {
                args.out = o;
            }
            let (path, _) = cli::cmd_partition_preview(&args)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are configuration errors (exit 1); help and version exit 0.
    let args = match Cli::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
