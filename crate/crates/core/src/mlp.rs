//! The shared feature extractor: a ReLU multilayer perceptron with a linear
//! output layer, trained by minibatch SGD through a linear scoring head.
//!
//! For pFedFDA the head is the generative classifier and stays frozen; the
//! discriminative baselines train a [`LinearHead`] jointly with the body.

use crate::classifier::{linear_scores, log_softmax, GenerativeClassifier};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::gauss::LabeledFeatures;
use crate::linalg::Mat;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Weights are stored `out × in`; hidden layers use ReLU, the last layer is
/// linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

/// Trainable linear classifier used by the FedAvg family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Mat,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self { lr: 0.01, momentum: 0.5, weight_decay: 5e-4, batch_size: 50, epochs: 5 }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidArgument("lr must be a finite nonnegative number".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("weight_decay must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feature/label pairs captured during the final local epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLog(pub LabeledFeatures);

impl FeatureLog {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pre-activations and layer inputs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is what layer `l` consumed.
    inputs: Vec<Mat>,
    preacts: Vec<Mat>,
}

impl MlpParams {
    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn feature_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least two dims")
    }

    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layer_dims: self.layer_dims.clone(),
            weights: self.weights.iter().map(|w| Mat::zeros(w.rows(), w.cols())).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Every scalar, layer by layer, weights before biases.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl LinearHead {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self { weights: Mat::zeros(classes, dim), biases: vec![0.0; classes] }
    }

    pub fn init<R: Rng + ?Sized>(classes: usize, dim: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).expect("valid std");
        let data = (0..classes * dim).map(|_| normal.sample(rng)).collect();
        Self { weights: Mat::from_vec(classes, dim, data).expect("shape by construction"), biases: vec![0.0; classes] }
    }

    pub fn predict(&self, z: &[f64]) -> usize {
        crate::classifier::argmax(&linear_scores(&self.weights, &self.biases, z))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        [self.weights.as_mut_slice(), self.biases.as_mut_slice()].into_iter()
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        [self.weights.as_slice(), self.biases.as_slice()].into_iter()
    }
}

/// He-style Gaussian initialization: `N(0, 2/fan_in)` on hidden layers,
/// `N(0, 1/fan_in)` on the linear output layer, zero biases.
pub fn init_mlp<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<MlpParams> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::InvalidArgument("an MLP needs at least two positive layer dims".into()));
    }
    let layers = layer_dims.len() - 1;
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
        let gain = if l + 1 < layers { 2.0 } else { 1.0 };
        let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("valid std");
        let data = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
        weights.push(Mat::from_vec(fan_out, fan_in, data)?);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpParams { layer_dims: layer_dims.to_vec(), weights, biases })
}

fn affine(input: &Mat, w: &Mat, b: &[f64]) -> Mat {
    let n = input.rows();
    let mut out = Mat::zeros(n, w.rows());
    for j in 0..n {
        let x = input.row(j);
        for (o, v) in out.row_mut(j).iter_mut().enumerate() {
            *v = b[o] + crate::linalg::dot(w.row(o), x);
        }
    }
    out
}

pub fn forward(params: &MlpParams, x: &Mat) -> Result<(Mat, ForwardCache)> {
    if x.cols() != params.input_dim() {
        return Err(Error::Dimension(format!(
            "input has {} columns, network expects {}",
            x.cols(),
            params.input_dim()
        )));
    }
    let layers = params.num_layers();
    let mut inputs = Vec::with_capacity(layers);
    let mut preacts = Vec::with_capacity(layers);
    let mut current = x.clone();
    for l in 0..layers {
        let pre = affine(&current, &params.weights[l], &params.biases[l]);
        let mut act = pre.clone();
        if l + 1 < layers {
            act.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        inputs.push(current);
        preacts.push(pre);
        current = act;
    }
    Ok((current, ForwardCache { inputs, preacts }))
}

/// Features only.
pub fn features(params: &MlpParams, x: &Mat) -> Result<Mat> {
    forward(params, x).map(|(z, _)| z)
}

/// Gradients of the mean softmax cross-entropy of `head(z)` with respect to
/// the body and the head.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub body: MlpParams,
    pub head: LinearHead,
    pub loss: f64,
}

pub fn backward_linear(
    params: &MlpParams,
    cache: &ForwardCache,
    head_weights: &Mat,
    head_biases: &[f64],
    labels: &[usize],
) -> Result<Gradients> {
    let layers = params.num_layers();
    let z = match cache.preacts.last() {
        Some(z) => z,
        None => return Err(Error::InvalidArgument("empty forward cache".into())),
    };
    let n = z.rows();
    if labels.len() != n || n == 0 {
        return Err(Error::Dimension(format!("{} labels for {n} feature rows", labels.len())));
    }
    let classes = head_biases.len();
    if head_weights.rows() != classes || head_weights.cols() != z.cols() {
        return Err(Error::Dimension("head does not match feature dimension".into()));
    }
    let inv_n = 1.0 / n as f64;

    // dL/dscores = (softmax − onehot) / n
    let mut dscores = Mat::zeros(n, classes);
    let mut loss = 0.0;
    for j in 0..n {
        let y = labels[j];
        if y >= classes {
            return Err(Error::LabelOutOfRange { label: y, classes });
        }
        let lp = log_softmax(&linear_scores(head_weights, head_biases, z.row(j)));
        loss -= lp[y];
        for (c, g) in dscores.row_mut(j).iter_mut().enumerate() {
            *g = (lp[c].exp() - if c == y { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    loss *= inv_n;

    let mut head = LinearHead::zeros(classes, z.cols());
    head.weights = dscores.transpose().matmul(z);
    for j in 0..n {
        for (b, &g) in head.biases.iter_mut().zip(dscores.row(j)) {
            *b += g;
        }
    }

    let mut body = params.zeros_like();
    let mut upstream = dscores.matmul(head_weights);
    for l in (0..layers).rev() {
        if l + 1 < layers {
            let pre = &cache.preacts[l];
            for (g, &p) in upstream.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if p <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        body.weights[l] = upstream.transpose().matmul(&cache.inputs[l]);
        let bias = &mut body.biases[l];
        for j in 0..n {
            for (b, &g) in bias.iter_mut().zip(upstream.row(j)) {
                *b += g;
            }
        }
        if l > 0 {
            upstream = upstream.matmul(&params.weights[l]);
        }
    }
    Ok(Gradients { body, head, loss })
}

/// Body gradients of the mean NLL under a frozen generative classifier.
pub fn backward_ce(
    params: &MlpParams,
    cache: &ForwardCache,
    clf: &GenerativeClassifier,
    labels: &[usize],
) -> Result<MlpParams> {
    backward_linear(params, cache, &clf.weights, &clf.biases, labels).map(|g| g.body)
}

fn sgd_update<'a>(
    params: impl Iterator<Item = &'a mut [f64]>,
    grads: impl Iterator<Item = &'a [f64]>,
    velocity: impl Iterator<Item = &'a mut [f64]>,
    hyper: &TrainHyper,
) {
    for ((p, g), v) in params.zip(grads).zip(velocity) {
        for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = hyper.momentum * *vi + gi + hyper.weight_decay * *pi;
            *pi -= hyper.lr * *vi;
        }
    }
}

/// `v ← momentum·v + (g + weight_decay·p)`, `p ← p − lr·v`.
pub fn sgd_step(params: &mut MlpParams, grads: &MlpParams, velocity: &mut MlpParams, hyper: &TrainHyper) {
    sgd_update(params.tensors_mut(), grads.tensors(), velocity.tensors_mut(), hyper);
}

pub fn sgd_step_head(head: &mut LinearHead, grads: &LinearHead, velocity: &mut LinearHead, hyper: &TrainHyper) {
    sgd_update(head.tensors_mut(), grads.tensors(), velocity.tensors_mut(), hyper);
}

fn check_shard(params: &MlpParams, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::NoSamples);
    }
    if data.x.cols() != params.input_dim() {
        return Err(Error::Dimension(format!(
            "shard has {} features, network expects {}",
            data.x.cols(),
            params.input_dim()
        )));
    }
    Ok(())
}

fn batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Trains the body for `hyper.epochs` epochs through the frozen classifier,
/// continuing from `velocity`. The log holds the post-step features of every
/// batch of the final epoch; with zero epochs it is a plain forward pass.
pub fn train_local_with_velocity<R: Rng + ?Sized>(
    params: &MlpParams,
    velocity: &mut MlpParams,
    clf: &GenerativeClassifier,
    data: &Dataset,
    hyper: &TrainHyper,
    rng: &mut R,
) -> Result<(MlpParams, FeatureLog)> {
    check_shard(params, data)?;
    hyper.validate()?;
    let mut params = params.clone();
    if hyper.epochs == 0 {
        let z = features(&params, &data.x)?;
        return Ok((params, FeatureLog(LabeledFeatures::new(z, data.y.clone())?)));
    }
    let d = params.feature_dim();
    let mut log_rows: Vec<f64> = Vec::new();
    let mut log_labels = Vec::new();
    for epoch in 0..hyper.epochs {
        let last = epoch + 1 == hyper.epochs;
        for idx in batches(data.len(), hyper.batch_size, rng) {
            let batch = data.select(&idx);
            let (_, cache) = forward(&params, &batch.x)?;
            let grads = backward_ce(&params, &cache, clf, &batch.y)?;
            sgd_step(&mut params, &grads, velocity, hyper);
            if last {
                let z = features(&params, &batch.x)?;
                log_rows.extend_from_slice(z.as_slice());
                log_labels.extend_from_slice(&batch.y);
            }
        }
    }
    let z = Mat::from_vec(log_labels.len(), d, log_rows)?;
    Ok((params, FeatureLog(LabeledFeatures::new(z, log_labels)?)))
}

/// [`train_local_with_velocity`] from a zero momentum buffer.
pub fn train_local<R: Rng + ?Sized>(
    params: &MlpParams,
    clf: &GenerativeClassifier,
    data: &Dataset,
    hyper: &TrainHyper,
    rng: &mut R,
) -> Result<(MlpParams, FeatureLog)> {
    let mut velocity = params.zeros_like();
    train_local_with_velocity(params, &mut velocity, clf, data, hyper, rng)
}

/// Joint body + head training with softmax cross-entropy (FedAvg-style).
pub fn train_discriminative<R: Rng + ?Sized>(
    params: &mut MlpParams,
    head: &mut LinearHead,
    velocity: &mut (MlpParams, LinearHead),
    data: &Dataset,
    hyper: &TrainHyper,
    rng: &mut R,
) -> Result<()> {
    check_shard(params, data)?;
    hyper.validate()?;
    for _ in 0..hyper.epochs {
        for idx in batches(data.len(), hyper.batch_size, rng) {
            let batch = data.select(&idx);
            let (_, cache) = forward(params, &batch.x)?;
            let g = backward_linear(params, &cache, &head.weights, &head.biases, &batch.y)?;
            sgd_step(params, &g.body, &mut velocity.0, hyper);
            sgd_step_head(head, &g.head, &mut velocity.1, hyper);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn rng() -> crate::rng::SimRng {
        stream(3, Purpose::Custom(0), 0, 0)
    }

    #[test]
    fn init_is_reproducible() {
        let a = init_mlp(&[4, 4], &mut rng()).unwrap();
        let b = init_mlp(&[4, 4], &mut rng()).unwrap();
        assert_eq!(a, b);
        assert!(a.biases.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn init_rejects_short_dims() {
        assert!(init_mlp(&[4], &mut rng()).is_err());
    }

    #[test]
    fn zero_weights_give_zero_features() {
        let p = init_mlp(&[3, 5, 2], &mut rng()).unwrap().zeros_like();
        let z = features(&p, &Mat::from_rows(&[[1.0, -2.0, 3.0]])).unwrap();
        assert_eq!(z, Mat::zeros(1, 2));
    }

    #[test]
    fn single_linear_layer_by_hand() {
        let p = MlpParams {
            layer_dims: vec![2, 2],
            weights: vec![Mat::from_rows(&[[1.0, 2.0], [0.0, -1.0]])],
            biases: vec![vec![0.5, 1.0]],
        };
        let z = features(&p, &Mat::from_rows(&[[3.0, 4.0]])).unwrap();
        assert_eq!(z, Mat::from_rows(&[[11.5, -3.0]]));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = init_mlp(&[3, 2], &mut rng()).unwrap();
        assert!(matches!(forward(&p, &Mat::zeros(1, 4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn plain_sgd_step() {
        let mut p =
            MlpParams { layer_dims: vec![1, 1], weights: vec![Mat::from_rows(&[[1.0]])], biases: vec![vec![2.0]] };
        let g = MlpParams { layer_dims: vec![1, 1], weights: vec![Mat::from_rows(&[[0.5]])], biases: vec![vec![-1.0]] };
        let mut v = p.zeros_like();
        let hyper = TrainHyper { lr: 0.1, momentum: 0.0, weight_decay: 0.0, ..Default::default() };
        sgd_step(&mut p, &g, &mut v, &hyper);
        assert!((p.weights[0][(0, 0)] - 0.95).abs() < 1e-15);
        assert!((p.biases[0][0] - 2.1).abs() < 1e-15);
    }

    #[test]
    fn zero_grad_zero_velocity_is_noop() {
        let mut p = init_mlp(&[3, 4, 2], &mut rng()).unwrap();
        let before = p.clone();
        let g = p.zeros_like();
        let mut v = p.zeros_like();
        let hyper = TrainHyper { weight_decay: 0.0, ..Default::default() };
        sgd_step(&mut p, &g, &mut v, &hyper);
        assert_eq!(p, before);
    }

    #[test]
    fn two_momentum_steps_match_recurrence() {
        // v1 = g1 + wd p0, p1 = p0 − lr v1
        // v2 = m v1 + g2 + wd p1, p2 = p1 − lr v2
        let (p0, g1, g2, lr, m, wd) = (1.5, 0.4, -0.2, 0.1, 0.5, 0.01);
        let v1 = g1 + wd * p0;
        let p1 = p0 - lr * v1;
        let v2 = m * v1 + g2 + wd * p1;
        let p2 = p1 - lr * v2;

        let mk = |w: f64| MlpParams {
            layer_dims: vec![1, 1],
            weights: vec![Mat::from_rows(&[[w]])],
            biases: vec![vec![0.0]],
        };
        let mut p = mk(p0);
        let mut v = p.zeros_like();
        let hyper = TrainHyper { lr, momentum: m, weight_decay: wd, ..Default::default() };
        sgd_step(&mut p, &mk(g1), &mut v, &hyper);
        sgd_step(&mut p, &mk(g2), &mut v, &hyper);
        assert!((p.weights[0][(0, 0)] - p2).abs() < 1e-15);
        assert!((v.weights[0][(0, 0)] - v2).abs() < 1e-15);
    }

    #[test]
    fn lr_zero_keeps_params_but_logs() {
        let p = init_mlp(&[2, 4, 3], &mut rng()).unwrap();
        let data = Dataset::new(Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), vec![0, 1, 0]).unwrap();
        let clf = GenerativeClassifier {
            weights: Mat::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            biases: vec![0.0, 0.0],
        };
        let hyper = TrainHyper { lr: 0.0, batch_size: 2, epochs: 2, ..Default::default() };
        let (out, log) = train_local(&p, &clf, &data, &hyper, &mut rng()).unwrap();
        assert_eq!(out, p);
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn empty_shard_is_an_error() {
        let p = init_mlp(&[2, 3], &mut rng()).unwrap();
        let data = Dataset::new(Mat::zeros(0, 2), vec![]).unwrap();
        let clf = GenerativeClassifier { weights: Mat::zeros(2, 3), biases: vec![0.0; 2] };
        assert!(train_local(&p, &clf, &data, &TrainHyper::default(), &mut rng()).is_err());
    }
}
