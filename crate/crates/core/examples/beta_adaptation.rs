// Chooses the local-global interpolation weight by cross-validation and
// shows how it grows with the amount of local data.
//
// cargo run --release --example beta_adaptation

use fedfda::adaptation::{adapt, AdaptOptions};
use fedfda::mlp::FeatureLog;
use fedfda::rng::{stream, Purpose};
use fedfda::{BetaMode, ClassGaussian, LabeledFeatures, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

/// `n` samples per class from a client whose class means sit `shift` away
/// from the global ones along every axis.
fn client_log(n: usize, shift: f64, seed: u64) -> fedfda::Result<FeatureLog> {
    let mut rng = stream(seed, Purpose::Custom(1), 0, 0);
    let d = 4;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..2 {
        for _ in 0..n {
            for k in 0..d {
                let center = if k == 0 { 2.0 * c as f64 - 1.0 } else { 0.0 };
                rows.push(center + shift + rng.sample::<f64, _>(StandardNormal));
            }
            labels.push(c);
        }
    }
    Ok(FeatureLog(LabeledFeatures::new(Mat::from_vec(2 * n, d, rows)?, labels)?))
}

pub fn main() -> fedfda::Result<()> {
    let global = ClassGaussian {
        means: Mat::from_rows(&[[-1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]]),
        cov: Mat::identity(4),
        priors: vec![0.5, 0.5],
    };
    println!("{:>6} {:>8} {:>8} {:>8}", "n", "shift 0", "0.5", "1.0");
    for n in [5, 20, 100, 500] {
        let mut line = format!("{n:>6}");
        for shift in [0.0, 0.5, 1.0] {
            let mut total = 0.0;
            for seed in 0..20 {
                let log = client_log(n, shift, seed)?;
                let (_, beta) = adapt(
                    &log,
                    &global,
                    &[0.5, 0.5],
                    &AdaptOptions::default(),
                    &mut stream(seed, Purpose::Folds, 0, 0),
                )?;
                total += beta.beta_mu;
            }
            line += &format!(" {:>8.3}", total / 20.0);
        }
        println!("{line}");
    }

    let log = client_log(100, 0.5, 0)?;
    let opts = AdaptOptions { mode: BetaMode::Multi, ..AdaptOptions::default() };
    let (_, beta) = adapt(&log, &global, &[0.5, 0.5], &opts, &mut stream(0, Purpose::Folds, 0, 0))?;
    println!("separate weights at n=100, shift 0.5: means {:.3}, covariance {:.3}", beta.beta_mu, beta.beta_sigma);
    Ok(())
}
