//! Class-conditional Gaussian statistics with a tied covariance.
//!
//! Means are maximum-likelihood class averages, the shared covariance is the
//! unbiased estimator over class-centered features, and degenerate estimates
//! are repaired by diagonal loading followed by eigenvalue clipping in
//! correlation space (which keeps the variances intact).

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Cholesky, Mat};
use serde::{Deserialize, Serialize};

/// Feature rows with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub features: Mat,
    pub labels: Vec<usize>,
}

impl LabeledFeatures {
    pub fn new(features: Mat, labels: Vec<usize>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Dimension(format!("{} feature rows but {} labels", features.rows(), labels.len())));
        }
        if features.cols() == 0 {
            return Err(Error::Dimension("feature dimension must be at least 1".into()));
        }
        if !features.all_finite() {
            return Err(Error::InvalidArgument("features must be finite".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows selected by `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledFeatures {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        LabeledFeatures { features: Mat::from_vec(indices.len(), d, data).expect("shape by construction"), labels }
    }
}

/// Per-class means, one shared covariance and class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGaussian {
    pub means: Mat,
    pub cov: Mat,
    pub priors: Vec<f64>,
}

impl ClassGaussian {
    pub fn num_classes(&self) -> usize {
        self.means.rows()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// Checks shapes, symmetry, positive definiteness and the prior simplex.
    pub fn validate(&self) -> Result<()> {
        let (c, d) = (self.means.rows(), self.means.cols());
        if self.cov.rows() != d || self.cov.cols() != d {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, expected {d}x{d}",
                self.cov.rows(),
                self.cov.cols()
            )));
        }
        if self.priors.len() != c {
            return Err(Error::Dimension(format!("{} priors for {c} classes", self.priors.len())));
        }
        let asym = self.cov.max_asymmetry();
        if asym > 1e-10 {
            return Err(Error::NotSymmetric(asym));
        }
        Cholesky::new(&self.cov)?;
        if self.priors.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidArgument("priors must be nonnegative".into()));
        }
        let total: f64 = self.priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("priors sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Regularization knobs for covariance repair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovOptions {
    /// Diagonal loading added to every estimate.
    pub epsilon: f64,
    /// Eigenvalue floor applied in correlation space.
    pub min_corr_eig: f64,
}

impl Default for CovOptions {
    fn default() -> Self {
        Self { epsilon: 1e-4, min_corr_eig: 1e-6 }
    }
}

impl CovOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.min_corr_eig > 0.0) {
            return Err(Error::InvalidArgument("epsilon and min_corr_eig must be strictly positive".into()));
        }
        Ok(())
    }
}

fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    match labels.iter().find(|&&y| y >= num_classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes: num_classes }),
        None => Ok(()),
    }
}

/// Class averages and counts. Classes without samples get a zero row and a
/// zero count.
pub fn estimate_class_means(batch: &LabeledFeatures, num_classes: usize) -> Result<(Mat, Vec<usize>)> {
    if batch.is_empty() {
        return Err(Error::NoSamples);
    }
    check_labels(&batch.labels, num_classes)?;
    let d = batch.dim();
    let mut sums = Mat::zeros(num_classes, d);
    let mut counts = vec![0usize; num_classes];
    for (j, &y) in batch.labels.iter().enumerate() {
        counts[y] += 1;
        for (s, &v) in sums.row_mut(y).iter_mut().zip(batch.features.row(j)) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            let inv = 1.0 / n as f64;
            sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    Ok((sums, counts))
}

/// Subtracts each row's class mean.
pub fn center_features(batch: &LabeledFeatures, means: &Mat) -> Result<Mat> {
    if means.cols() != batch.dim() {
        return Err(Error::Dimension(format!("means have dimension {}, features have {}", means.cols(), batch.dim())));
    }
    check_labels(&batch.labels, means.rows())?;
    let mut out = batch.features.clone();
    for (j, &y) in batch.labels.iter().enumerate() {
        for (v, &m) in out.row_mut(j).iter_mut().zip(means.row(y)) {
            *v -= m;
        }
    }
    Ok(out)
}

/// Unbiased shared covariance `Z̄ᵀZ̄ / (n − 1)` of centered features.
pub fn estimate_shared_covariance(centered: &Mat, n: usize) -> Result<Mat> {
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    if centered.rows() != n {
        return Err(Error::Dimension(format!("{} centered rows but n = {n}", centered.rows())));
    }
    Ok(centered.gram().scale(1.0 / (n as f64 - 1.0)))
}

/// Loads the diagonal with `epsilon` and, if the result is not safely positive
/// definite, replaces it with the nearest PD matrix that has the same
/// variances: clip the correlation-matrix spectrum at `min_corr_eig`, rescale
/// to unit diagonal, then map back with the original standard deviations.
pub fn regularize_covariance(cov: &Mat, opts: &CovOptions) -> Result<Mat> {
    opts.validate()?;
    if !cov.is_square() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    if !cov.all_finite() {
        return Err(Error::InvalidArgument("covariance must be finite".into()));
    }
    let scale = cov.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let asym = cov.max_asymmetry();
    if asym > 1e-8 * scale {
        return Err(Error::NotSymmetric(asym));
    }

    let mut loaded = cov.clone();
    loaded.symmetrize();
    loaded.add_diag(opts.epsilon);

    let d = loaded.rows();
    let std: Vec<f64> =
        loaded.diagonal().iter().map(|&v| if v > 0.0 { v.sqrt() } else { opts.epsilon.sqrt() }).collect();
    let mut corr = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            corr[(i, j)] = loaded[(i, j)] / (std[i] * std[j]);
        }
    }

    let eig = sym_eigen(&corr)?;
    let diag_ok = loaded.diagonal().iter().all(|&v| v > 0.0);
    if diag_ok && eig.min_value() > opts.min_corr_eig && Cholesky::new(&loaded).is_ok() {
        return Ok(loaded);
    }

    let mut floor = opts.min_corr_eig;
    for _ in 0..8 {
        let clipped: Vec<f64> = eig.values.iter().map(|&v| v.max(floor)).collect();
        let mut repaired = eig.reconstruct_with(&clipped);
        let unit: Vec<f64> = repaired.diagonal().iter().map(|v| v.sqrt()).collect();
        let mut out = Mat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                repaired[(i, j)] /= unit[i] * unit[j];
                out[(i, j)] = repaired[(i, j)] * std[i] * std[j];
            }
        }
        for i in 0..d {
            out[(i, i)] = std[i] * std[i];
        }
        out.symmetrize();
        if Cholesky::new(&out).is_ok() {
            return Ok(out);
        }
        floor *= 10.0;
    }
    Err(Error::NotPositiveDefinite)
}

/// Empirical class frequencies `n^c / n`.
pub fn estimate_priors(labels: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::NoSamples);
    }
    check_labels(labels, num_classes)?;
    let mut counts = vec![0usize; num_classes];
    for &y in labels {
        counts[y] += 1;
    }
    let n = labels.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Raw local statistics before any fallback to global knowledge.
#[derive(Debug, Clone)]
pub struct LocalStats {
    pub means: Mat,
    pub counts: Vec<usize>,
    /// Regularized shared covariance, absent when fewer than two samples.
    pub cov: Option<Mat>,
}

impl LocalStats {
    pub fn estimate(batch: &LabeledFeatures, num_classes: usize, opts: &CovOptions) -> Result<Self> {
        let (means, counts) = estimate_class_means(batch, num_classes)?;
        let cov = if batch.len() >= 2 {
            let centered = center_features(batch, &means)?;
            let raw = estimate_shared_covariance(&centered, batch.len())?;
            Some(regularize_covariance(&raw, opts)?)
        } else {
            None
        };
        Ok(Self { means, counts, cov })
    }

    /// Means with empty classes replaced by `fallback` rows.
    pub fn means_or(&self, fallback: &ClassGaussian) -> Mat {
        let mut means = self.means.clone();
        for (c, &n) in self.counts.iter().enumerate() {
            if n == 0 {
                means.row_mut(c).copy_from_slice(fallback.means.row(c));
            }
        }
        means
    }

    pub fn cov_or<'a>(&'a self, fallback: &'a ClassGaussian) -> &'a Mat {
        self.cov.as_ref().unwrap_or(&fallback.cov)
    }
}
