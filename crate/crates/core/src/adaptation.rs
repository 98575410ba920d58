//! Local/global interpolation of feature-distribution estimates.
//!
//! A client blends its own Gaussian estimate with the server's using a
//! coefficient β in [0, 1] chosen to minimize the k-fold held-out NLL of the
//! resulting generative classifier.

use crate::classifier::{build_classifier_with_floor, PRIOR_FLOOR};
use crate::error::{Error, Result};
use crate::gauss::{ClassGaussian, CovOptions, LabeledFeatures, LocalStats};
use crate::linalg::Mat;
use crate::mlp::FeatureLog;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// β = 1: local estimates only.
    None,
    /// One β shared by the means and the covariance.
    #[default]
    Single,
    /// Separate β for the means and for the covariance.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub beta_mu: f64,
    pub beta_sigma: f64,
    /// Cross-validated NLL at the returned point, when one was computed.
    pub objective: Option<f64>,
}

impl BetaResult {
    pub fn fixed(beta: f64) -> Self {
        Self { beta_mu: beta, beta_sigma: beta, objective: None }
    }

    /// Single summary value; the mean of the two coefficients.
    pub fn mean(&self) -> f64 {
        0.5 * (self.beta_mu + self.beta_sigma)
    }
}

/// Stratified k-fold assignment. Each class's samples are shuffled and dealt
/// round-robin, with the dealing position carried over between classes so
/// that fold sizes also stay within one of each other.
pub fn kfold_split<R: Rng + ?Sized>(labels: &[usize], k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    if labels.len() < k {
        return Err(Error::InsufficientSamples { needed: k, got: labels.len() });
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Fold statistics cached for repeated objective evaluations.
#[derive(Debug, Clone)]
pub struct CvProblem<'a> {
    global: &'a ClassGaussian,
    priors: Vec<f64>,
    prior_floor: f64,
    folds: Vec<CvFold>,
}

#[derive(Debug, Clone)]
struct CvFold {
    means: Mat,
    cov: Mat,
    held_out: LabeledFeatures,
}

impl<'a> CvProblem<'a> {
    pub fn new(
        log: &FeatureLog,
        folds: &[Vec<usize>],
        global: &'a ClassGaussian,
        priors_local: &[f64],
        opts: &CovOptions,
    ) -> Result<Self> {
        let data = &log.0;
        let classes = global.num_classes();
        if data.dim() != global.dim() {
            return Err(Error::Dimension("feature log and global Gaussian disagree on dimension".into()));
        }
        if priors_local.len() != classes {
            return Err(Error::Dimension("one local prior per class required".into()));
        }
        if folds.len() < 2 {
            return Err(Error::InvalidArgument("need at least two folds".into()));
        }
        let mut cached = Vec::with_capacity(folds.len());
        for (t, held) in folds.iter().enumerate() {
            let train_idx: Vec<usize> =
                folds.iter().enumerate().filter(|&(s, _)| s != t).flat_map(|(_, f)| f.iter().copied()).collect();
            let mut train_idx = train_idx;
            train_idx.sort_unstable();
            let (means, cov) = if train_idx.is_empty() {
                (global.means.clone(), global.cov.clone())
            } else {
                let stats = LocalStats::estimate(&data.select(&train_idx), classes, opts)?;
                (stats.means_or(global), stats.cov_or(global).clone())
            };
            cached.push(CvFold { means, cov, held_out: data.select(held) });
        }
        Ok(Self { global, priors: priors_local.to_vec(), prior_floor: PRIOR_FLOOR, folds: cached })
    }

    pub fn with_prior_floor(mut self, floor: f64) -> Self {
        self.prior_floor = floor;
        self
    }

    /// Mean over folds of the average held-out NLL.
    pub fn objective(&self, beta_mu: f64, beta_sigma: f64) -> Result<f64> {
        let mut total = 0.0;
        for fold in &self.folds {
            let g = ClassGaussian {
                means: fold.means.lerp_with(beta_mu, &self.global.means, 1.0 - beta_mu),
                cov: fold.cov.lerp_with(beta_sigma, &self.global.cov, 1.0 - beta_sigma),
                priors: self.priors.clone(),
            };
            let clf = build_classifier_with_floor(&g, self.prior_floor)?;
            total += clf.mean_nll(&fold.held_out.features, &fold.held_out.labels);
        }
        Ok(total / self.folds.len() as f64)
    }
}

/// Cross-validated NLL of the interpolated classifier.
pub fn cv_objective(
    beta_mu: f64,
    beta_sigma: f64,
    log: &FeatureLog,
    folds: &[Vec<usize>],
    global: &ClassGaussian,
    priors_local: &[f64],
    opts: &CovOptions,
) -> Result<f64> {
    CvProblem::new(log, folds, global, priors_local, opts)?.objective(beta_mu, beta_sigma)
}

const GRID_POINTS: usize = 21;
const GOLDEN_WIDTH: f64 = 1e-4;
const TIE_TOL: f64 = 1e-9;

/// Bounded 1-D minimization over [0, 1]: a 21-point grid, then golden-section
/// refinement around the best grid point. Among all evaluated points within
/// 1e-9 of the minimum the smallest argument wins.
pub fn minimize_unit_interval<F>(mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut seen: Vec<(f64, f64)> = Vec::with_capacity(GRID_POINTS + 32);
    let step = 1.0 / (GRID_POINTS - 1) as f64;
    for i in 0..GRID_POINTS {
        let x = i as f64 * step;
        seen.push((x, f(x)?));
    }
    let best_grid = pick(&seen);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_grid.0 - step).max(0.0), (best_grid.0 + step).min(1.0));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    seen.push((c, fc));
    seen.push((d, fd));
    while b - a > GOLDEN_WIDTH {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
            seen.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
            seen.push((d, fd));
        }
    }
    Ok(pick(&seen))
}

fn pick(points: &[(f64, f64)]) -> (f64, f64) {
    let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    points
        .iter()
        .filter(|p| p.1 <= min + TIE_TOL)
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((0.0, f64::INFINITY))
}

/// Picks β for the given mode. `BetaMode::None` returns β = 1 without
/// touching the objective.
pub fn optimize_beta(problem: &CvProblem<'_>, mode: BetaMode) -> Result<BetaResult> {
    match mode {
        BetaMode::None => Ok(BetaResult::fixed(1.0)),
        BetaMode::Single => {
            let (beta, value) = minimize_unit_interval(|b| problem.objective(b, b))?;
            Ok(BetaResult { beta_mu: beta, beta_sigma: beta, objective: Some(value) })
        }
        BetaMode::Multi => {
            // Coordinate descent from the shared-β optimum.
            let (start, mut value) = minimize_unit_interval(|b| problem.objective(b, b))?;
            let (mut beta_mu, mut beta_sigma) = (start, start);
            for _ in 0..2 {
                let (bm, v) = minimize_unit_interval(|b| problem.objective(b, beta_sigma))?;
                if v < value - TIE_TOL || (v <= value + TIE_TOL && bm < beta_mu) {
                    beta_mu = bm;
                    value = v;
                }
                let (bs, v) = minimize_unit_interval(|b| problem.objective(beta_mu, b))?;
                if v < value - TIE_TOL || (v <= value + TIE_TOL && bs < beta_sigma) {
                    beta_sigma = bs;
                    value = v;
                }
            }
            Ok(BetaResult { beta_mu, beta_sigma, objective: Some(value) })
        }
    }
}

/// Convex combination of local and global statistics; priors stay local.
pub fn interpolate(local: &ClassGaussian, global: &ClassGaussian, r: &BetaResult) -> Result<ClassGaussian> {
    if local.means.rows() != global.means.rows()
        || local.means.cols() != global.means.cols()
        || local.cov.rows() != global.cov.rows()
    {
        return Err(Error::Dimension("local and global Gaussians differ in shape".into()));
    }
    let check = |b: f64| (0.0..=1.0).contains(&b);
    if !check(r.beta_mu) || !check(r.beta_sigma) {
        return Err(Error::InvalidArgument("β must lie in [0, 1]".into()));
    }
    Ok(ClassGaussian {
        means: local.means.lerp_with(r.beta_mu, &global.means, 1.0 - r.beta_mu),
        cov: local.cov.lerp_with(r.beta_sigma, &global.cov, 1.0 - r.beta_sigma),
        priors: local.priors.clone(),
    })
}

/// Settings for [`adapt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOptions {
    pub mode: BetaMode,
    pub folds: usize,
    pub cov: CovOptions,
    pub prior_floor: f64,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self { mode: BetaMode::Single, folds: 2, cov: CovOptions::default(), prior_floor: PRIOR_FLOOR }
    }
}

/// Full local adaptation: estimate the local Gaussian from the log, choose β
/// and return the interpolated Gaussian. Logs too small for k folds fall back
/// to β = 0.
pub fn adapt<R: Rng + ?Sized>(
    log: &FeatureLog,
    global: &ClassGaussian,
    priors_local: &[f64],
    opts: &AdaptOptions,
    rng: &mut R,
) -> Result<(ClassGaussian, BetaResult)> {
    let stats = LocalStats::estimate(&log.0, global.num_classes(), &opts.cov)?;
    let local = ClassGaussian {
        means: stats.means_or(global),
        cov: stats.cov_or(global).clone(),
        priors: priors_local.to_vec(),
    };
    let result = match opts.mode {
        BetaMode::None => BetaResult::fixed(1.0),
        mode => match kfold_split(&log.0.labels, opts.folds, rng) {
            Ok(folds) => {
                let problem =
                    CvProblem::new(log, &folds, global, priors_local, &opts.cov)?.with_prior_floor(opts.prior_floor);
                optimize_beta(&problem, mode)?
            }
            Err(Error::InsufficientSamples { .. }) => BetaResult::fixed(0.0),
            Err(e) => return Err(e),
        },
    };
    Ok((interpolate(&local, global, &result)?, result))
}
