// Monte Carlo check of the interpolated mean estimator's error bound.
//
// cargo run --release --example theory_lab

use fedfda::theory::{beta_sweep, empirical_optimal_beta, theorem_bound, unit_grid};
use fedfda::TheoremScenario;

pub fn main() -> fedfda::Result<()> {
    let s = TheoremScenario::default();
    println!("client 0: n = {}, total N = {}, delta = {}", s.counts[0], s.total(), s.delta);
    println!("{:>5} {:>10} {:>10} {:>9}", "beta", "mc error", "bound", "coverage");
    for row in beta_sweep(&s, 0, 5000, &unit_grid(11), 7)? {
        println!("{:>5.2} {:>10.5} {:>10.5} {:>9.3}", row.beta, row.mc_mean_error, row.bound, row.coverage);
    }
    println!("bound at the scenario's beta {}: {:.5}", s.beta, theorem_bound(&s, 0)?);

    // More local data shifts the best weight toward the local estimate.
    for n in [10, 100, 1000] {
        let mut t = s.clone();
        t.counts[0] = n;
        let beta = empirical_optimal_beta(&t, 0, 2000, &unit_grid(21), 11)?;
        println!("n_0 = {n:>4}: empirical best beta {beta:.2}");
    }
    Ok(())
}
