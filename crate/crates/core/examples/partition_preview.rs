// How the Dirichlet concentration controls label skew across clients.
//
// cargo run --example partition_preview

use fedfda::datagen::dirichlet_partition;
use fedfda::rng::{stream, Purpose};

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

pub fn main() -> fedfda::Result<()> {
    let (classes, per_class, clients) = (5, 600, 10);
    let labels: Vec<usize> = (0..classes).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
    for alpha in [0.1, 0.5, 1.0, 100.0] {
        let parts = dirichlet_partition(&labels, clients, alpha, &mut stream(0, Purpose::Partition, 0, 0))?;
        let counts: Vec<Vec<usize>> = parts
            .iter()
            .map(|p| {
                let mut row = vec![0; classes];
                p.iter().for_each(|&j| row[labels[j]] += 1);
                row
            })
            .collect();
        let mean_h = counts.iter().map(|r| entropy(r)).sum::<f64>() / clients as f64;
        println!("alpha {alpha:>5}: mean class entropy {mean_h:.3} (max {:.3})", (classes as f64).ln());
        println!("  client 0 {:?}  client 1 {:?}", counts[0], counts[1]);
    }
    Ok(())
}
