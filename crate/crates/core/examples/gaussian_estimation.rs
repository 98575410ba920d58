// Class means, tied covariance and the positive-definite repair.
//
// cargo run --example gaussian_estimation

use fedfda::gauss::{
    center_features, estimate_class_means, estimate_priors, estimate_shared_covariance, regularize_covariance,
};
use fedfda::linalg::sym_eigen;
use fedfda::rng::{stream, Purpose};
use fedfda::{CovOptions, LabeledFeatures, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn main() -> fedfda::Result<()> {
    let mut rng = stream(3, Purpose::Custom(0), 0, 0);

    // Two classes in 3-D, 40 samples each, class 1 shifted along x.
    let (n, d) = (80, 3);
    let labels: Vec<usize> = (0..n).map(|j| j % 2).collect();
    let data: Vec<f64> = (0..n * d)
        .map(|k| {
            let shift = if k % d == 0 && labels[k / d] == 1 { 3.0 } else { 0.0 };
            shift + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let batch = LabeledFeatures::new(Mat::from_vec(n, d, data)?, labels)?;

    let (means, counts) = estimate_class_means(&batch, 2)?;
    let cov = estimate_shared_covariance(&center_features(&batch, &means)?, batch.len())?;
    println!("counts {counts:?}, priors {:?}", estimate_priors(&batch.labels, 2)?);
    for c in 0..2 {
        println!("mean[{c}] = {:.3?}", means.row(c));
    }
    println!("trace(cov) = {:.3} (true 3)", cov.trace());

    // Far fewer samples than dimensions: the raw estimate is singular.
    let few = LabeledFeatures::new(
        Mat::from_vec(3, 16, (0..48).map(|_| rng.sample(StandardNormal)).collect())?,
        vec![0, 0, 0],
    )?;
    let (m, _) = estimate_class_means(&few, 1)?;
    let raw = estimate_shared_covariance(&center_features(&few, &m)?, 3)?;
    let repaired = regularize_covariance(&raw, &CovOptions::default())?;
    println!(
        "n=3, d=16: min eigenvalue {:.2e} -> {:.2e}",
        sym_eigen(&raw)?.min_value(),
        sym_eigen(&repaired)?.min_value()
    );
    let drift = (0..16).map(|i| (repaired[(i, i)] - raw[(i, i)] - 1e-4).abs()).fold(0.0, f64::max);
    println!("largest diagonal change beyond the 1e-4 loading: {drift:.1e}");
    Ok(())
}
