//! Compares pFedFDA against the baselines on the synthetic benchmark.
//!
//! cargo run --release --example benchmark -- [seeds] [rounds]

use fedfda::benchmark::{benchmark_config, run_arm, Arm};
use fedfda::{AlgorithmKind, BetaMode};
use std::time::Instant;

fn main() -> fedfda::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let rounds: Option<usize> = args.get(2).and_then(|s| s.parse().ok());

    let arms = [
        Arm::new(AlgorithmKind::Pfedfda, 0.25),
        Arm::new(AlgorithmKind::Pfedfda, 0.25).with_beta_mode(BetaMode::None),
        Arm::new(AlgorithmKind::Pfedfda, 0.25).with_beta_mode(BetaMode::Multi),
        Arm::new(AlgorithmKind::LocalOnly, 0.25),
        Arm::new(AlgorithmKind::Fedavg, 0.25),
        Arm::new(AlgorithmKind::FedavgFt, 0.25),
        Arm::new(AlgorithmKind::Pfedfda, 1.0),
        Arm::new(AlgorithmKind::FedavgFt, 1.0),
    ];
    for arm in &arms {
        let start = Instant::now();
        let (mut acc, mut shifted, mut clean) = (0.0, 0.0, 0.0);
        for seed in 0..seeds {
            let mut cfg = benchmark_config(arm, seed);
            if let Some(r) = rounds {
                cfg.federation.rounds = r;
                cfg.eval_every = r;
            }
            let res = run_arm(&cfg)?;
            acc += res.mean_acc / seeds as f64;
            shifted += res.beta_shifted.unwrap_or(f64::NAN) / seeds as f64;
            clean += res.beta_clean.unwrap_or(f64::NAN) / seeds as f64;
        }
        print!("{:<22} acc {acc:.4}", arm.label());
        if arm.algorithm == AlgorithmKind::Pfedfda {
            print!("  beta shifted {shifted:.3} clean {clean:.3}");
        }
        println!("  ({:.1}s)", start.elapsed().as_secs_f64());
    }
    Ok(())
}
