// Builds a federated benchmark: label skew, covariate shift and scarcity.
//
// cargo run --example federated_data

use fedfda::datagen::{build_federation, FederatedDataConfig};
use fedfda::rng::{stream, Purpose};
use fedfda::{SyntheticTask, SyntheticTaskSpec};

pub fn main() -> fedfda::Result<()> {
    let task = SyntheticTask::new(&SyntheticTaskSpec::default())?;
    let base = task.sample(&mut stream(0, Purpose::BaseSamples, 0, 0))?;
    let cfg = FederatedDataConfig {
        clients: 10,
        alpha: 0.5,
        shifted_clients: 5,
        train_fraction: 0.25,
        min_client_samples: 10,
        seed: 0,
    };
    let shards = build_federation(&base, &cfg)?;
    println!("{} samples, {} features, {} clients", base.len(), base.dim(), shards.len());
    for s in &shards {
        let mut counts = vec![0; base.num_classes()];
        s.train.y.iter().for_each(|&y| counts[y] += 1);
        let corruption = s.corruption.map_or("clean".to_string(), |c| format!("{} s{}", c.kind.name(), c.severity));
        println!(
            "client {:>2}: train {:>3} test {:>3} {:<20} classes {counts:?}",
            s.id,
            s.n_train(),
            s.test.len(),
            corruption
        );
    }
    Ok(())
}
