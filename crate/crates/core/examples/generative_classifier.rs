// A tied-covariance Gaussian model read as a linear classifier.
//
// cargo run --example generative_classifier

use fedfda::classifier::build_classifier;
use fedfda::{ClassGaussian, Mat};

pub fn main() -> fedfda::Result<()> {
    let g = ClassGaussian {
        means: Mat::from_rows(&[[2.0, 0.0], [-2.0, 0.0], [0.0, 2.0]]),
        cov: Mat::from_rows(&[[1.0, 0.3], [0.3, 1.0]]),
        priors: vec![0.5, 0.3, 0.2],
    };
    let clf = build_classifier(&g)?;
    for c in 0..3 {
        println!("class {c}: w = {:.3?}, b = {:.3}", clf.weights.row(c), clf.biases[c]);
    }
    for z in [[1.5, 0.2], [-0.3, 0.1], [0.2, 1.8]] {
        let p: Vec<f64> = clf.log_posterior(&z).iter().map(|l| l.exp()).collect();
        println!("z = {z:?}: posterior {p:.3?}, predict {}", clf.predict(&z));
    }

    // Spherical covariance and flat priors reduce to nearest-mean.
    let plain = build_classifier(&ClassGaussian { cov: Mat::identity(2), priors: vec![1.0 / 3.0; 3], ..g })?;
    println!("nearest-mean check at (0.9, 1.2): class {}", plain.predict(&[0.9, 1.2]));
    Ok(())
}
