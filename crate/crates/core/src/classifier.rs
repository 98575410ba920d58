//! Bayes classifier of a tied-covariance Gaussian model.
//!
//! Scores are `zᵀΣ⁻¹μ^c − ½ μ^cᵀΣ⁻¹μ^c + log π^c`, i.e. a linear layer with
//! weights `w^c = Σ⁻¹μ^c`. The posterior is the softmax over those scores.

use crate::error::{Error, Result};
use crate::gauss::ClassGaussian;
use crate::linalg::{dot, Cholesky, Mat};

/// Replaces `log 0` for classes a client has never seen.
pub const PRIOR_FLOOR: f64 = 1e-8;

/// Linear scoring layer derived from a [`ClassGaussian`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeClassifier {
    pub weights: Mat,
    pub biases: Vec<f64>,
}

/// Solves `Σ w = μ` for PD `Σ`.
pub fn solve_sigma_inv_mu(cov: &Mat, mu: &[f64]) -> Result<Vec<f64>> {
    if cov.rows() != mu.len() {
        return Err(Error::Dimension(format!("covariance is {}x{}, mean has {}", cov.rows(), cov.cols(), mu.len())));
    }
    Ok(Cholesky::new(cov)?.solve(mu))
}

pub fn build_classifier(g: &ClassGaussian) -> Result<GenerativeClassifier> {
    build_classifier_with_floor(g, PRIOR_FLOOR)
}

pub fn build_classifier_with_floor(g: &ClassGaussian, prior_floor: f64) -> Result<GenerativeClassifier> {
    if g.priors.len() != g.num_classes() {
        return Err(Error::Dimension("one prior per class required".into()));
    }
    if g.cov.rows() != g.dim() || !g.cov.is_square() {
        return Err(Error::Dimension("covariance does not match the mean dimension".into()));
    }
    let chol = Cholesky::new(&g.cov)?;
    let (c, d) = (g.num_classes(), g.dim());
    let mut weights = Mat::zeros(c, d);
    let mut biases = Vec::with_capacity(c);
    for k in 0..c {
        let mu = g.means.row(k);
        let w = chol.solve(mu);
        biases.push(-0.5 * dot(mu, &w) + g.priors[k].max(prior_floor).ln());
        weights.row_mut(k).copy_from_slice(&w);
    }
    Ok(GenerativeClassifier { weights, biases })
}

impl GenerativeClassifier {
    pub fn num_classes(&self) -> usize {
        self.biases.len()
    }

    pub fn scores(&self, z: &[f64]) -> Vec<f64> {
        linear_scores(&self.weights, &self.biases, z)
    }

    pub fn log_posterior(&self, z: &[f64]) -> Vec<f64> {
        log_softmax(&self.scores(z))
    }

    pub fn nll(&self, z: &[f64], y: usize) -> f64 {
        -self.log_posterior(z)[y]
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        argmax(&self.scores(z))
    }

    /// Mean NLL over the rows of `features`.
    pub fn mean_nll(&self, features: &Mat, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let total: f64 = labels.iter().enumerate().map(|(j, &y)| self.nll(features.row(j), y)).sum();
        total / labels.len() as f64
    }
}

pub fn log_posterior(clf: &GenerativeClassifier, z: &[f64]) -> Vec<f64> {
    clf.log_posterior(z)
}

pub fn nll_loss(clf: &GenerativeClassifier, z: &[f64], y: usize) -> f64 {
    clf.nll(z, y)
}

pub fn predict(clf: &GenerativeClassifier, z: &[f64]) -> usize {
    clf.predict(z)
}

pub(crate) fn linear_scores(weights: &Mat, biases: &[f64], z: &[f64]) -> Vec<f64> {
    biases.iter().enumerate().map(|(c, &b)| dot(weights.row(c), z) + b).collect()
}

/// Max-shifted log-softmax.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> GenerativeClassifier {
        GenerativeClassifier { weights: Mat::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]), biases: vec![0.0, 0.0] }
    }

    #[test]
    fn identity_and_diagonal_solves() {
        assert_eq!(solve_sigma_inv_mu(&Mat::identity(2), &[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
        let w = solve_sigma_inv_mu(&Mat::diag(&[2.0, 1.0]), &[2.0, 1.0]).unwrap();
        assert!(w.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn solve_rejects_non_pd() {
        let err = solve_sigma_inv_mu(&Mat::diag(&[1.0, 0.0]), &[1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("call regularize_covariance first"));
    }

    #[test]
    fn hand_built_classifier() {
        let g = ClassGaussian {
            means: Mat::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]),
            cov: Mat::identity(2),
            priors: vec![0.5, 0.5],
        };
        let clf = build_classifier(&g).unwrap();
        assert_eq!(clf.weights, Mat::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]));
        let b = -0.5 + 0.5f64.ln();
        assert!((clf.biases[0] - b).abs() < 1e-15 && (clf.biases[1] - b).abs() < 1e-15);
    }

    #[test]
    fn zero_prior_is_floored() {
        let g = ClassGaussian { means: Mat::from_rows(&[[1.0], [2.0]]), cov: Mat::identity(1), priors: vec![1.0, 0.0] };
        let clf = build_classifier(&g).unwrap();
        assert!(clf.biases.iter().all(|b| b.is_finite()));
        assert!((clf.biases[1] - (-2.0 + PRIOR_FLOOR.ln())).abs() < 1e-12);
    }

    #[test]
    fn symmetric_posterior_at_origin() {
        let lp = two_class().log_posterior(&[0.0, 0.0]);
        assert!((lp[0] - 0.5f64.ln()).abs() < 1e-15);
        assert!((lp[1] - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn posterior_is_logistic_of_score_gap() {
        // scores (1, -1): p0 = 1 / (1 + e^{-2})
        let p0 = two_class().log_posterior(&[1.0, 0.0])[0].exp();
        assert!((p0 - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p0 - 0.88080).abs() < 1e-5);
    }

    #[test]
    fn nll_at_half_is_ln2() {
        assert!((two_class().nll(&[0.0, 0.0], 1) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn nll_vanishes_when_confident() {
        assert!(two_class().nll(&[100.0, 0.0], 0) < 1e-80);
    }

    #[test]
    fn argmax_and_ties() {
        assert_eq!(argmax(&[2.0, 1.0]), 0);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn log_softmax_handles_huge_scores() {
        let lp = log_softmax(&[1e300, 0.0]);
        assert!(lp.iter().all(|v| !v.is_nan()));
        assert_eq!(lp[0], 0.0);
    }
}
