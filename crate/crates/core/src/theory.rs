//! Monte Carlo laboratory for the interpolated-mean bias/variance bound.
//!
//! Single class. Client `j` holds `n_j` independent draws from
//! `N(θ_j, Σ_j)`; client `i` estimates its mean as
//! `β·μ_i + (1 − β)·μ_g` where `μ_g` pools all `N` samples. The closed-form
//! high-probability bound on the squared error is compared against
//! simulated errors.

use crate::error::{Error, Result};
use crate::linalg::{dot, sym_eigen, Mat};
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremScenario {
    pub counts: Vec<usize>,
    pub means: Vec<Vec<f64>>,
    pub covs: Vec<Mat>,
    pub beta: f64,
    pub delta: f64,
    /// The absolute constant of the concentration inequality.
    pub c: f64,
}

impl Default for TheoremScenario {
    /// Ten clients with 100 samples each in `d = 4`, identity covariances, and
    /// client 0 displaced by 0.25 along the first axis.
    fn default() -> Self {
        let d = 4;
        let m = 10;
        let mut means = vec![vec![0.0; d]; m];
        means[0][0] = 0.25;
        Self { counts: vec![100; m], means, covs: vec![Mat::identity(d); m], beta: 0.5, delta: 0.1, c: 1.0 / 8.0 }
    }
}

impl TheoremScenario {
    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn clients(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d) = (self.clients(), self.dim());
        if m == 0 || d == 0 {
            return Err(Error::InvalidArgument("scenario needs at least one client and d ≥ 1".into()));
        }
        if self.means.len() != m || self.covs.len() != m {
            return Err(Error::Dimension("one mean and one covariance per client".into()));
        }
        if self.counts.contains(&0) {
            return Err(Error::InvalidArgument("every client needs at least one sample".into()));
        }
        for (mu, cov) in self.means.iter().zip(&self.covs) {
            if mu.len() != d || cov.rows() != d || cov.cols() != d {
                return Err(Error::Dimension("client statistics disagree on dimension".into()));
            }
            if cov.max_asymmetry() > 1e-12 {
                return Err(Error::NotSymmetric(cov.max_asymmetry()));
            }
            if sym_eigen(cov)?.min_value() < -1e-12 {
                return Err(Error::InvalidArgument("client covariance must be PSD".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument("β must lie in [0, 1]".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument("δ must lie in (0, 1)".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument("c must be positive".into()));
        }
        Ok(())
    }

    /// `θ_g = Σ n_j θ_j / N`.
    pub fn global_mean(&self) -> Vec<f64> {
        let n = self.total() as f64;
        let mut out = vec![0.0; self.dim()];
        for (mu, &nj) in self.means.iter().zip(&self.counts) {
            for (o, &v) in out.iter_mut().zip(mu) {
                *o += nj as f64 * v / n;
            }
        }
        out
    }

    /// `Σ_g = Σ n_j² Σ_j / N²`.
    pub fn global_cov(&self) -> Mat {
        let n = self.total() as f64;
        let d = self.dim();
        self.covs
            .iter()
            .zip(&self.counts)
            .fold(Mat::zeros(d, d), |acc, (cov, &nj)| acc.lerp_with(1.0, cov, (nj as f64 / n).powi(2)))
    }
}

/// Closed-form bound for client `i`:
/// `(1−β)²‖θ_g−θ_i‖² + [1 + 4(√L + L)]·(2β/n_i·Tr Σ_i + (1−β)²/N·Tr Σ_g)`
/// with `L = log(1/δ)/c`.
pub fn theorem_bound(s: &TheoremScenario, i: usize) -> Result<f64> {
    s.validate()?;
    if i >= s.clients() {
        return Err(Error::InvalidArgument(format!("client {i} out of range")));
    }
    let beta = s.beta;
    let theta_g = s.global_mean();
    let bias_sq: f64 = theta_g.iter().zip(&s.means[i]).map(|(g, t)| (g - t).powi(2)).sum();
    let l = (1.0 / s.delta).ln() / s.c;
    let factor = 1.0 + 4.0 * (l.sqrt() + l);
    let local = 2.0 * beta / s.counts[i] as f64 * s.covs[i].trace();
    let global = (1.0 - beta).powi(2) / s.total() as f64 * s.global_cov().trace();
    Ok((1.0 - beta).powi(2) * bias_sq + factor * (local + global))
}

/// Per-trial local and pooled sample means for client `i`.
#[derive(Debug, Clone)]
pub struct MeanDraws {
    target: Vec<f64>,
    local: Vec<Vec<f64>>,
    pooled: Vec<Vec<f64>>,
}

impl MeanDraws {
    pub fn trials(&self) -> usize {
        self.local.len()
    }

    /// `‖β μ_i + (1−β) μ_g − θ_i‖²` for every trial.
    pub fn errors(&self, beta: f64) -> Vec<f64> {
        self.local
            .iter()
            .zip(&self.pooled)
            .map(|(l, g)| {
                l.iter().zip(g).zip(&self.target).map(|((a, b), t)| (beta * a + (1.0 - beta) * b - t).powi(2)).sum()
            })
            .collect()
    }
}

/// Symmetric square root through the eigendecomposition; tolerates PSD
/// (including zero) covariances.
fn sqrt_psd(cov: &Mat) -> Result<Mat> {
    let eig = sym_eigen(cov)?;
    let roots: Vec<f64> = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(eig.reconstruct_with(&roots))
}

/// Draws every client's samples `trials` times. Trial `t` uses its own
/// stream, and trials are reduced in index order.
pub fn simulate_means(s: &TheoremScenario, i: usize, trials: usize, seed: u64) -> Result<MeanDraws> {
    s.validate()?;
    if i >= s.clients() || trials == 0 {
        return Err(Error::InvalidArgument("client out of range or zero trials".into()));
    }
    let d = s.dim();
    let roots: Vec<Mat> = s.covs.iter().map(sqrt_psd).collect::<Result<_>>()?;
    let n_total = s.total() as f64;
    let (local, pooled): (Vec<_>, Vec<_>) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, Purpose::Theory, t as u64, i as u64);
            let mut pooled = vec![0.0; d];
            let mut local = vec![0.0; d];
            let mut g = vec![0.0; d];
            for (j, (&nj, root)) in s.counts.iter().zip(&roots).enumerate() {
                let mut sum = vec![0.0; d];
                for _ in 0..nj {
                    g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    for (k, sk) in sum.iter_mut().enumerate() {
                        *sk += s.means[j][k] + dot(root.row(k), &g);
                    }
                }
                for (p, v) in pooled.iter_mut().zip(&sum) {
                    *p += v / n_total;
                }
                if j == i {
                    local = sum.iter().map(|v| v / nj as f64).collect();
                }
            }
            (local, pooled)
        })
        .unzip();
    Ok(MeanDraws { target: s.means[i].clone(), local, pooled })
}

/// Squared estimation errors at the scenario's β.
pub fn simulate_estimation_error(s: &TheoremScenario, i: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(simulate_means(s, i, trials, seed)?.errors(s.beta))
}

/// Fraction of trials whose error stays within the bound.
pub fn coverage_check(s: &TheoremScenario, i: usize, trials: usize, seed: u64) -> Result<f64> {
    let bound = theorem_bound(s, i)?;
    let errors = simulate_estimation_error(s, i, trials, seed)?;
    Ok(coverage_of(&errors, bound))
}

/// Fraction of errors at or below `bound`, with a relative slack of 1e-12
/// so that an error equal to the bound up to rounding counts as covered.
pub fn coverage_of(errors: &[f64], bound: f64) -> f64 {
    let limit = bound + 1e-12 * bound.abs().max(f64::MIN_POSITIVE);
    errors.iter().filter(|&&e| e <= limit).count() as f64 / errors.len() as f64
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Grid point with the smallest Monte Carlo mean error (ties to the smaller β).
pub fn empirical_optimal_beta(
    s: &TheoremScenario,
    i: usize,
    trials: usize,
    beta_grid: &[f64],
    seed: u64,
) -> Result<f64> {
    if beta_grid.is_empty() || beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::InvalidArgument("β grid must be a non-empty subset of [0, 1]".into()));
    }
    let draws = simulate_means(s, i, trials, seed)?;
    let mut best = (beta_grid[0], f64::INFINITY);
    for &b in beta_grid {
        let e = mean(&draws.errors(b));
        if e < best.1 || (e == best.1 && b < best.0) {
            best = (b, e);
        }
    }
    Ok(best.0)
}

/// `n` evenly spaced points covering [0, 1].
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
    }
}

/// One row of a β sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub mc_mean_error: f64,
    pub bound: f64,
    pub coverage: f64,
}

/// Mean error, bound and coverage at each β, sharing one set of draws.
pub fn beta_sweep(s: &TheoremScenario, i: usize, trials: usize, grid: &[f64], seed: u64) -> Result<Vec<SweepRow>> {
    let draws = simulate_means(s, i, trials, seed)?;
    grid.iter()
        .map(|&beta| {
            let errors = draws.errors(beta);
            let bound = theorem_bound(&s.with_beta(beta), i)?;
            Ok(SweepRow { beta, mc_mean_error: mean(&errors), bound, coverage: coverage_of(&errors, bound) })
        })
        .collect()
}
