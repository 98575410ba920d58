// Trains an MLP body through a frozen generative head and reports how well
// the resulting features separate.
//
// cargo run --release --example train_extractor

use fedfda::classifier::build_classifier;
use fedfda::gauss::LocalStats;
use fedfda::mlp::{features, init_mlp, train_local, TrainHyper};
use fedfda::rng::{stream, Purpose};
use fedfda::{ClassGaussian, CovOptions, Mat, SyntheticTask, SyntheticTaskSpec};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn main() -> fedfda::Result<()> {
    let spec = SyntheticTaskSpec { samples_per_class: 200, ..SyntheticTaskSpec::default() };
    let data = SyntheticTask::new(&spec)?.sample(&mut stream(1, Purpose::BaseSamples, 0, 0))?;
    let (c, d) = (spec.num_classes, 16);

    let mut rng = stream(1, Purpose::ModelInit, 0, 0);
    let phi = init_mlp(&[spec.input_dim, 32, d], &mut rng)?;
    let means =
        Mat::from_vec(c, d, (0..c * d).map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt()).collect())?;
    let head = ClassGaussian { means, cov: Mat::identity(d), priors: vec![1.0 / c as f64; c] };
    let clf = build_classifier(&head)?;

    let accuracy =
        |z: &Mat| (0..data.len()).filter(|&j| clf.predict(z.row(j)) == data.y[j]).count() as f64 / data.len() as f64;
    println!(
        "before: accuracy {:.3}, nll {:.3}",
        accuracy(&features(&phi, &data.x)?),
        clf.mean_nll(&features(&phi, &data.x)?, &data.y)
    );

    let hyper = TrainHyper { epochs: 20, ..TrainHyper::default() };
    let (trained, log) = train_local(&phi, &clf, &data, &hyper, &mut stream(1, Purpose::LocalShuffle, 0, 0))?;
    let z = features(&trained, &data.x)?;
    println!("after:  accuracy {:.3}, nll {:.3}", accuracy(&z), clf.mean_nll(&z, &data.y));

    // The logged final-epoch features give the local Gaussian estimate.
    let stats = LocalStats::estimate(&log.0, c, &CovOptions::default())?;
    println!("logged {} feature rows; class counts {:?}", log.0.len(), stats.counts);
    Ok(())
}
