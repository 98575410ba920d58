//! Mean interpolation weight per corruption kind on the benchmark.
//!
//! cargo run --release --example beta_by_corruption -- [seeds]

use fedfda::benchmark::{benchmark_config, Arm};
use fedfda::{run_federation, AlgorithmKind};
use std::collections::BTreeMap;

fn main() -> fedfda::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mut by_kind: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for seed in 0..seeds {
        let cfg = benchmark_config(&Arm::new(AlgorithmKind::Pfedfda, 0.25), seed);
        let out = run_federation(&cfg.federation_config(), &cfg.build_shards()?)?;
        for c in &out.clients {
            let kind = c.corruption.map_or("clean", |s| s.kind.name());
            by_kind.entry(kind).or_default().extend(c.beta);
        }
    }
    for (kind, betas) in by_kind {
        let mean = betas.iter().sum::<f64>() / betas.len() as f64;
        println!("{kind:<16} clients {:>3}  mean beta {mean:.3}", betas.len());
    }
    Ok(())
}
