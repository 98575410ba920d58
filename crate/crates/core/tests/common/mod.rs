//! Independent oracles and random instance generators shared by the
//! integration tests and the acceptance run. Nothing here calls into the
//! routine it checks.
#![allow(dead_code, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use fedfda::adaptation::CvProblem;
use fedfda::gauss::{regularize_covariance, CovOptions};
use fedfda::mlp::{FeatureLog, MlpParams};
use fedfda::{ClassGaussian, LabeledFeatures, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| scale * normal(rng)).collect()).unwrap()
}

/// A random labeled batch; every label is drawn uniformly from `0..classes`.
pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: usize) -> LabeledFeatures {
    let scale = 1.0 + 2.0 * rng.random::<f64>();
    let x = random_mat(rng, n, d, scale);
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    LabeledFeatures::new(x, labels).unwrap()
}

/// `A Aᵀ / d + shift·I`: symmetric positive definite for `shift > 0`.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize, shift: f64) -> Mat {
    let a = random_mat(rng, d, d, 1.0);
    let mut out = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[(i, k)] * a[(j, k)];
            }
            out.as_mut_slice()[i * d + j] = s / d as f64 + if i == j { shift } else { 0.0 };
        }
    }
    out
}

pub fn random_gaussian(rng: &mut ChaCha8Rng, classes: usize, d: usize) -> ClassGaussian {
    let means = random_mat(rng, classes, d, 1.5);
    let raw: Vec<f64> = (0..classes).map(|_| 0.05 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    ClassGaussian { means, cov: random_spd(rng, d, 0.3), priors: raw.iter().map(|p| p / total).collect() }
}

// ---------------------------------------------------------------- estimators

pub fn naive_means(batch: &LabeledFeatures, classes: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let d = batch.dim();
    let mut sums = vec![vec![0.0; d]; classes];
    let mut counts = vec![0usize; classes];
    for j in 0..batch.len() {
        let y = batch.labels[j];
        counts[y] += 1;
        for k in 0..d {
            sums[y][k] += batch.features[(j, k)];
        }
    }
    for c in 0..classes {
        if counts[c] > 0 {
            for v in &mut sums[c] {
                *v /= counts[c] as f64;
            }
        }
    }
    (sums, counts)
}

/// Σ_j (z_j − μ_{y_j})(z_j − μ_{y_j})ᵀ / (n − 1), one entry at a time.
pub fn naive_cov(batch: &LabeledFeatures, means: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, d) = (batch.len(), batch.dim());
    let mut out = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for j in 0..n {
                let mu = &means[batch.labels[j]];
                s += (batch.features[(j, a)] - mu[a]) * (batch.features[(j, b)] - mu[b]);
            }
            out[a][b] = s / (n as f64 - 1.0);
        }
    }
    out
}

// ------------------------------------------------------------ linear algebra

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(m: &Mat) -> Vec<Vec<f64>> {
    let d = m.rows();
    let mut a: Vec<Vec<f64>> = (0..d).map(|i| m.row(i).to_vec()).collect();
    let mut inv: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..d {
        let pivot = (col..d).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for j in 0..d {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                for j in 0..d {
                    a[r][j] -= f * a[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

/// log det through LU without pivoting on an SPD matrix (all pivots > 0).
pub fn log_det_spd(m: &Mat) -> f64 {
    let d = m.rows();
    let mut a: Vec<Vec<f64>> = (0..d).map(|i| m.row(i).to_vec()).collect();
    let mut acc = 0.0;
    for k in 0..d {
        acc += a[k][k].ln();
        for i in k + 1..d {
            let f = a[i][k] / a[k][k];
            for j in k..d {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    acc
}

/// Plain Cholesky attempt; `true` certifies positive definiteness.
pub fn is_positive_definite(m: &Mat) -> bool {
    let d = m.rows();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

// --------------------------------------------------------------- classifiers

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// log N(z | μ^c, Σ) + log π^c normalized over classes, straight from the
/// density formula.
pub fn explicit_log_posterior(g: &ClassGaussian, z: &[f64]) -> Vec<f64> {
    let d = g.dim();
    let inv = inverse(&g.cov);
    let log_det = log_det_spd(&g.cov);
    let joint: Vec<f64> = (0..g.num_classes())
        .map(|c| {
            let diff: Vec<f64> = (0..d).map(|k| z[k] - g.means[(c, k)]).collect();
            let mut quad = 0.0;
            for a in 0..d {
                for b in 0..d {
                    quad += diff[a] * inv[a][b] * diff[b];
                }
            }
            let log_density = -0.5 * quad - 0.5 * log_det - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
            log_density + g.priors[c].max(1e-8).ln()
        })
        .collect();
    let norm = logsumexp(&joint);
    joint.iter().map(|j| j - norm).collect()
}

pub fn nearest_mean(means: &Mat, z: &[f64]) -> usize {
    (0..means.rows())
        .map(|c| (c, (0..z.len()).map(|k| (z[k] - means[(c, k)]).powi(2)).sum::<f64>()))
        .fold((0, f64::INFINITY), |best, (c, dist)| if dist < best.1 { (c, dist) } else { best })
        .0
}

/// Mean held-out NLL of a Gaussian, evaluated from densities.
pub fn explicit_mean_nll(g: &ClassGaussian, batch: &LabeledFeatures) -> f64 {
    (0..batch.len()).map(|j| -explicit_log_posterior(g, batch.features.row(j))[batch.labels[j]]).sum::<f64>()
        / batch.len() as f64
}

// ------------------------------------------------------------------ networks

/// Forward pass by explicit loops: ReLU on hidden layers, identity on the last.
pub fn naive_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let layers = p.weights.len();
    for l in 0..layers {
        let w = &p.weights[l];
        let mut next = vec![0.0; w.rows()];
        for o in 0..w.rows() {
            let mut s = p.biases[l][o];
            for i in 0..w.cols() {
                s += w[(o, i)] * h[i];
            }
            next[o] = if l + 1 < layers { s.max(0.0) } else { s };
        }
        h = next;
    }
    h
}

/// Smallest |pre-activation| over all hidden ReLU units and samples. Central
/// differences are only meaningful when this exceeds the step size.
pub fn min_hidden_preactivation(p: &MlpParams, x: &Mat) -> f64 {
    let mut worst = f64::INFINITY;
    for j in 0..x.rows() {
        let mut h = x.row(j).to_vec();
        for l in 0..p.weights.len() - 1 {
            let w = &p.weights[l];
            let pre: Vec<f64> =
                (0..w.rows()).map(|o| p.biases[l][o] + (0..w.cols()).map(|i| w[(o, i)] * h[i]).sum::<f64>()).collect();
            worst = pre.iter().fold(worst, |m, v| m.min(v.abs()));
            h = pre.iter().map(|v| v.max(0.0)).collect();
        }
    }
    worst
}

/// Mean softmax cross-entropy of `W z + b` over a batch.
pub fn naive_loss(p: &MlpParams, w: &Mat, b: &[f64], x: &Mat, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for j in 0..x.rows() {
        let z = naive_forward(p, x.row(j));
        let scores: Vec<f64> =
            (0..b.len()).map(|c| b[c] + (0..z.len()).map(|k| w[(c, k)] * z[k]).sum::<f64>()).collect();
        total += logsumexp(&scores) - scores[y[j]];
    }
    total / x.rows() as f64
}

/// Largest relative error between analytic gradients and central finite
/// differences of [`naive_loss`] over every body parameter.
pub fn max_gradient_error(
    p: &MlpParams,
    grads: &MlpParams,
    w: &Mat,
    b: &[f64],
    x: &Mat,
    y: &[usize],
    step: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = p.clone();
    let tensors = p.tensors().count();
    for t in 0..tensors {
        let len = p.tensors().nth(t).unwrap().len();
        for k in 0..len {
            let orig = probe.tensors().nth(t).unwrap()[k];
            probe.tensors_mut().nth(t).unwrap()[k] = orig + step;
            let up = naive_loss(&probe, w, b, x, y);
            probe.tensors_mut().nth(t).unwrap()[k] = orig - step;
            let down = naive_loss(&probe, w, b, x, y);
            probe.tensors_mut().nth(t).unwrap()[k] = orig;
            let fd = (up - down) / (2.0 * step);
            let an = grads.tensors().nth(t).unwrap()[k];
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
        }
    }
    worst
}

// ------------------------------------------------------------------- β search

/// A client whose class means sit `shift` away from the global ones; returns
/// the log and a matching global Gaussian.
pub fn random_beta_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    classes: usize,
) -> (FeatureLog, ClassGaussian, Vec<f64>) {
    let global = ClassGaussian {
        means: random_mat(rng, classes, d, 1.0),
        cov: random_spd(rng, d, 0.5),
        priors: vec![1.0 / classes as f64; classes],
    };
    let shift = 1.5 * rng.random::<f64>();
    let offsets = random_mat(rng, classes, d, shift);
    let scale = 0.5 + rng.random::<f64>();
    let mut rows = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let c = j % classes;
        for k in 0..d {
            rows.push(global.means[(c, k)] + offsets[(c, k)] + scale * normal(rng));
        }
        labels.push(c);
    }
    let log = FeatureLog(LabeledFeatures::new(Mat::from_vec(n, d, rows).unwrap(), labels.clone()).unwrap());
    let mut priors = vec![0.0; classes];
    labels.iter().for_each(|&y| priors[y] += 1.0 / n as f64);
    (log, global, priors)
}

/// The cross-validated objective rebuilt from naive means, naive covariance
/// and density-based NLL. Only the positive-definite repair is shared.
pub fn naive_cv_objective(
    bm: f64,
    bs: f64,
    log: &FeatureLog,
    folds: &[Vec<usize>],
    global: &ClassGaussian,
    priors: &[f64],
    opts: &CovOptions,
) -> f64 {
    let classes = global.num_classes();
    let d = global.dim();
    let mut total = 0.0;
    for (t, held) in folds.iter().enumerate() {
        let mut train: Vec<usize> =
            folds.iter().enumerate().filter(|&(s, _)| s != t).flat_map(|(_, f)| f.clone()).collect();
        train.sort_unstable();
        let tr = log.0.select(&train);
        let (means, counts) = naive_means(&tr, classes);
        let cov_local = if tr.len() >= 2 {
            let raw = naive_cov(&tr, &means);
            let flat: Vec<f64> = raw.into_iter().flatten().collect();
            regularize_covariance(&Mat::from_vec(d, d, flat).unwrap(), opts).unwrap()
        } else {
            global.cov.clone()
        };
        let mut m = Mat::zeros(classes, d);
        let mut cov = Mat::zeros(d, d);
        for c in 0..classes {
            for k in 0..d {
                let local = if counts[c] > 0 { means[c][k] } else { global.means[(c, k)] };
                m.as_mut_slice()[c * d + k] = bm * local + (1.0 - bm) * global.means[(c, k)];
            }
        }
        for a in 0..d {
            for b in 0..d {
                cov.as_mut_slice()[a * d + b] = bs * cov_local[(a, b)] + (1.0 - bs) * global.cov[(a, b)];
            }
        }
        let g = ClassGaussian { means: m, cov, priors: priors.to_vec() };
        total += explicit_mean_nll(&g, &log.0.select(held));
    }
    total / folds.len() as f64
}

/// Exhaustive argmin of the objective on the 0.001 grid.
pub fn grid_argmin(problem: &CvProblem<'_>) -> (f64, f64) {
    (0..=1000)
        .map(|k| {
            let b = k as f64 / 1000.0;
            (b, problem.objective(b, b).unwrap())
        })
        .fold((0.0, f64::INFINITY), |best, (b, v)| if v < best.1 { (b, v) } else { best })
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
