//! The server loop: broadcast, parallel client updates, weighted aggregation
//! and evaluation, for pFedFDA and the Local / FedAvg / FedAvgFT baselines.
//!
//! Client updates inside a round run on a rayon pool. Each client draws only
//! from its own `(seed, purpose, round, client)` streams and the server folds
//! results in ascending client id, so the output does not depend on the
//! number of worker threads.

use crate::adaptation::{adapt, AdaptOptions, BetaResult};
use crate::classifier::build_classifier_with_floor;
use crate::datagen::{ClientShard, CorruptionSpec, Dataset};
use crate::error::{Error, Result};
use crate::gauss::{estimate_priors, ClassGaussian};
use crate::linalg::{Cholesky, Mat};
use crate::mlp::{self, init_mlp, LinearHead, MlpParams, TrainHyper};
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Pfedfda,
    Fedavg,
    FedavgFt,
    LocalOnly,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Pfedfda => "pfedfda",
            AlgorithmKind::Fedavg => "fedavg",
            AlgorithmKind::FedavgFt => "fedavg_ft",
            AlgorithmKind::LocalOnly => "local_only",
        }
    }
}

/// Everything the round loop needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub algorithm: AlgorithmKind,
    pub rounds: usize,
    pub participation: f64,
    pub hyper: TrainHyper,
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
    pub adapt: AdaptOptions,
    pub seed: u64,
    pub eval_every: usize,
    /// Worker threads; `None` reads `FEDFDA_THREADS`, then falls back to rayon's default.
    pub threads: Option<usize>,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            algorithm: AlgorithmKind::Pfedfda,
            rounds: 200,
            participation: 0.3,
            hyper: TrainHyper::default(),
            hidden_dims: vec![32],
            feature_dim: 16,
            adapt: AdaptOptions::default(),
            seed: 0,
            eval_every: 10,
            threads: None,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Config("q out of (0,1]".into()));
        }
        if self.feature_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.adapt.folds < 2 {
            return Err(Error::Config("k must be at least 2".into()));
        }
        if !(self.adapt.prior_floor > 0.0) {
            return Err(Error::Config("prior_floor must be positive".into()));
        }
        self.adapt.cov.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.hyper.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.feature_dim);
        dims
    }
}

/// State a client keeps between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub gaussian: ClassGaussian,
    pub beta: BetaResult,
    pub velocity: MlpParams,
    pub head_velocity: LinearHead,
    /// Private model for the local-only baseline.
    pub local_model: Option<(MlpParams, LinearHead)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationState {
    pub phi_g: MlpParams,
    pub gaussian_g: ClassGaussian,
    /// Global linear head (FedAvg family only).
    pub head_g: LinearHead,
    pub round: usize,
    pub clients: Vec<ClientState>,
}

/// Server and client initialization: Gaussian network weights, random
/// spherical class Gaussians (`μ^c ~ N(0, I/d)`, `Σ = I`, uniform priors)
/// and β = 0.5 on every client.
pub fn init_state(
    config: &FederationConfig,
    num_clients: usize,
    num_classes: usize,
    input_dim: usize,
) -> Result<FederationState> {
    let dims = config.layer_dims(input_dim);
    let d = config.feature_dim;
    let phi_g = init_mlp(&dims, &mut stream(config.seed, Purpose::ModelInit, 0, 0))?;
    let head_g = LinearHead::init(num_classes, d, &mut stream(config.seed, Purpose::ModelInit, 0, 1));

    let mut rng = stream(config.seed, Purpose::GaussianInit, 0, 0);
    let scale = (1.0 / d as f64).sqrt();
    let means: Vec<f64> = (0..num_classes * d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let gaussian_g = ClassGaussian {
        means: Mat::from_vec(num_classes, d, means)?,
        cov: Mat::identity(d),
        priors: vec![1.0 / num_classes as f64; num_classes],
    };

    let clients = (0..num_clients)
        .map(|id| -> Result<ClientState> {
            let local_model = if config.algorithm == AlgorithmKind::LocalOnly {
                let mut rng = stream(config.seed, Purpose::LocalInit, 0, id as u64);
                let body = init_mlp(&dims, &mut rng)?;
                Some((body, LinearHead::init(num_classes, d, &mut rng)))
            } else {
                None
            };
            Ok(ClientState {
                gaussian: gaussian_g.clone(),
                beta: BetaResult::fixed(0.5),
                velocity: phi_g.zeros_like(),
                head_velocity: LinearHead::zeros(num_classes, d),
                local_model,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FederationState { phi_g, gaussian_g, head_g, round: 0, clients })
}

/// Independent Bernoulli(q) participation, redrawn when nobody joins. The
/// final round (`round == rounds − 1`) always includes every client.
pub fn sample_active_clients<R: Rng + ?Sized>(
    num_clients: usize,
    q: f64,
    rng: &mut R,
    round: usize,
    rounds: usize,
) -> Vec<usize> {
    if q >= 1.0 || round + 1 == rounds || num_clients == 0 {
        return (0..num_clients).collect();
    }
    loop {
        let active: Vec<usize> = (0..num_clients).filter(|_| rng.random::<f64>() < q).collect();
        if !active.is_empty() {
            return active;
        }
    }
}

/// What a participating client sends back.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientResult {
    pub client: usize,
    pub phi: MlpParams,
    pub gaussian: ClassGaussian,
    pub beta: BetaResult,
    pub n: usize,
    /// Per-class training counts, used to weight the class means.
    pub class_counts: Vec<usize>,
    pub velocity: MlpParams,
}

fn class_counts(labels: &[usize], classes: usize) -> Vec<usize> {
    let mut counts = vec![0; classes];
    for &y in labels {
        if y < classes {
            counts[y] += 1;
        }
    }
    counts
}

/// One pFedFDA local update: train φ through the global generative
/// classifier (with local priors), estimate the local Gaussian from the
/// logged features, choose β and interpolate.
pub fn client_update_pfedfda(
    phi_g: &MlpParams,
    gaussian_g: &ClassGaussian,
    shard: &ClientShard,
    velocity: &MlpParams,
    config: &FederationConfig,
    round: usize,
) -> Result<ClientResult> {
    if shard.train.is_empty() {
        return Err(Error::NoSamples);
    }
    let classes = gaussian_g.num_classes();
    let priors = estimate_priors(&shard.train.y, classes)?;
    let broadcast = ClassGaussian { priors: priors.clone(), ..gaussian_g.clone() };
    let clf = build_classifier_with_floor(&broadcast, config.adapt.prior_floor)?;

    let mut velocity = velocity.clone();
    let mut shuffle = stream(config.seed, Purpose::LocalShuffle, round as u64, shard.id as u64);
    let (phi, log) =
        mlp::train_local_with_velocity(phi_g, &mut velocity, &clf, &shard.train, &config.hyper, &mut shuffle)?;

    let mut folds = stream(config.seed, Purpose::Folds, round as u64, shard.id as u64);
    let (gaussian, beta) = adapt(&log, gaussian_g, &priors, &config.adapt, &mut folds)?;
    Ok(ClientResult {
        client: shard.id,
        phi,
        gaussian,
        beta,
        n: shard.n_train(),
        class_counts: class_counts(&shard.train.y, classes),
        velocity,
    })
}

/// One FedAvg local update: joint body + head SGD on a copy of the global
/// model. Returns the trained model and the updated momentum buffers.
pub fn client_update_fedavg(
    phi_g: &MlpParams,
    head_g: &LinearHead,
    shard: &ClientShard,
    velocity: (&MlpParams, &LinearHead),
    config: &FederationConfig,
    round: usize,
) -> Result<(MlpParams, LinearHead, (MlpParams, LinearHead))> {
    let mut phi = phi_g.clone();
    let mut head = head_g.clone();
    let mut vel = (velocity.0.clone(), velocity.1.clone());
    let mut rng = stream(config.seed, Purpose::LocalShuffle, round as u64, shard.id as u64);
    mlp::train_discriminative(&mut phi, &mut head, &mut vel, &shard.train, &config.hyper, &mut rng)?;
    Ok((phi, head, vel))
}

/// Weighted parameter average in ascending list order. Weights are
/// normalized to sum to one.
pub fn weighted_average<'a, I>(models: I, weights: &[f64]) -> Result<Vec<Vec<f64>>>
where
    I: IntoIterator<Item = Vec<&'a [f64]>>,
{
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("aggregation weights sum to zero".into()));
    }
    let mut acc: Option<Vec<Vec<f64>>> = None;
    for (tensors, &w) in models.into_iter().zip(weights) {
        let w = w / total;
        let acc = acc.get_or_insert_with(|| tensors.iter().map(|t| vec![0.0; t.len()]).collect());
        for (a, t) in acc.iter_mut().zip(&tensors) {
            for (ai, &ti) in a.iter_mut().zip(t.iter()) {
                *ai += w * ti;
            }
        }
    }
    acc.ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))
}

fn average_mlp(models: &[&MlpParams], weights: &[f64]) -> Result<MlpParams> {
    let first = models.first().ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    let flat = weighted_average(models.iter().map(|m| m.tensors().collect()), weights)?;
    let mut out = first.zeros_like();
    for (dst, src) in out.tensors_mut().zip(flat) {
        dst.copy_from_slice(&src);
    }
    Ok(out)
}

fn average_head(heads: &[&LinearHead], weights: &[f64]) -> Result<LinearHead> {
    let first = heads.first().ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    let flat = weighted_average(heads.iter().map(|h| h.tensors().collect()), weights)?;
    let mut out = LinearHead::zeros(first.weights.rows(), first.weights.cols());
    for (dst, src) in out.tensors_mut().zip(flat) {
        dst.copy_from_slice(&src);
    }
    Ok(out)
}

/// Server update. φ, Σ and the priors are averaged with weights `n_i / Σ n_j`;
/// each class mean with weights proportional to the clients' counts of that
/// class, keeping `previous`'s mean for classes nobody holds. The averaged
/// covariance is repaired only if it has lost positive definiteness.
pub fn aggregate(
    results: &[ClientResult],
    previous: &ClassGaussian,
    cov: &crate::gauss::CovOptions,
) -> Result<(MlpParams, ClassGaussian)> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate an empty round".into()));
    }
    let weights: Vec<f64> = results.iter().map(|r| r.n as f64).collect();
    let phis: Vec<&MlpParams> = results.iter().map(|r| &r.phi).collect();
    let phi = average_mlp(&phis, &weights)?;

    let (classes, d) = (previous.num_classes(), previous.dim());
    let total: f64 = weights.iter().sum();
    let mut cov_acc = Mat::zeros(d, d);
    let mut priors = vec![0.0; classes];
    for (r, &w) in results.iter().zip(&weights) {
        let w = w / total;
        cov_acc = cov_acc.lerp_with(1.0, &r.gaussian.cov, w);
        for (p, &q) in priors.iter_mut().zip(&r.gaussian.priors) {
            *p += w * q;
        }
    }
    let mut means = previous.means.clone();
    for c in 0..classes {
        let class_total: usize = results.iter().map(|r| r.class_counts[c]).sum();
        if class_total == 0 {
            continue;
        }
        let row = means.row_mut(c);
        row.iter_mut().for_each(|v| *v = 0.0);
        for r in results {
            let w = r.class_counts[c] as f64 / class_total as f64;
            if w == 0.0 {
                continue;
            }
            for (v, &m) in row.iter_mut().zip(r.gaussian.means.row(c)) {
                *v += w * m;
            }
        }
    }
    cov_acc.symmetrize();
    if Cholesky::new(&cov_acc).is_err() {
        cov_acc = crate::gauss::regularize_covariance(&cov_acc, cov)?;
    }
    Ok((phi, ClassGaussian { means, cov: cov_acc, priors }))
}

/// Which split to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSplit {
    Train,
    Test,
}

fn accuracy(pred: impl Iterator<Item = usize>, labels: &[usize]) -> f64 {
    let correct = pred.zip(labels).filter(|(p, y)| p == *y).count();
    correct as f64 / labels.len() as f64
}

fn model_accuracy(body: &MlpParams, head: &LinearHead, data: &Dataset) -> Result<f64> {
    let z = mlp::features(body, &data.x)?;
    Ok(accuracy((0..data.len()).map(|j| head.predict(z.row(j))), &data.y))
}

/// Accuracy of one client's model on one split; `None` when the split is empty.
pub fn evaluate_client(
    state: &FederationState,
    shard: &ClientShard,
    config: &FederationConfig,
    split: EvalSplit,
) -> Result<Option<f64>> {
    let data = match split {
        EvalSplit::Train => &shard.train,
        EvalSplit::Test => &shard.test,
    };
    if data.is_empty() {
        return Ok(None);
    }
    let client = &state.clients[shard.id];
    let acc = match config.algorithm {
        AlgorithmKind::Pfedfda => {
            let clf = build_classifier_with_floor(&client.gaussian, config.adapt.prior_floor)?;
            let z = mlp::features(&state.phi_g, &data.x)?;
            accuracy((0..data.len()).map(|j| clf.predict(z.row(j))), &data.y)
        }
        AlgorithmKind::Fedavg => model_accuracy(&state.phi_g, &state.head_g, data)?,
        AlgorithmKind::FedavgFt => {
            let mut body = state.phi_g.clone();
            let mut head = state.head_g.clone();
            let mut vel = (body.zeros_like(), LinearHead::zeros(head.weights.rows(), head.weights.cols()));
            let mut rng = stream(config.seed, Purpose::FineTune, state.round as u64, shard.id as u64);
            if !shard.train.is_empty() {
                mlp::train_discriminative(&mut body, &mut head, &mut vel, &shard.train, &config.hyper, &mut rng)?;
            }
            model_accuracy(&body, &head, data)?
        }
        AlgorithmKind::LocalOnly => {
            let (body, head) = client
                .local_model
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("local-only state without local models".into()))?;
            model_accuracy(body, head, data)?
        }
    };
    Ok(Some(acc))
}

/// Per-client accuracy on the held-out split; clients with empty test data
/// come back as `None`.
pub fn evaluate_clients(
    state: &FederationState,
    shards: &[ClientShard],
    config: &FederationConfig,
) -> Result<Vec<Option<f64>>> {
    evaluate_split(state, shards, config, EvalSplit::Test)
}

pub fn evaluate_split(
    state: &FederationState,
    shards: &[ClientShard],
    config: &FederationConfig,
    split: EvalSplit,
) -> Result<Vec<Option<f64>>> {
    shards.par_iter().map(|s| evaluate_client(state, s, config, split)).collect()
}

/// Mean and population standard deviation of the available accuracies.
pub fn mean_std(values: &[Option<f64>]) -> (f64, f64) {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    /// Number of completed rounds.
    pub round: usize,
    pub active_clients: Vec<usize>,
    pub mean_acc: f64,
    pub std_acc: f64,
    /// Mean β of this round's participants (pFedFDA only).
    pub mean_beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientSummary {
    pub client_id: usize,
    pub n_train: usize,
    pub corruption: Option<CorruptionSpec>,
    /// Last chosen β (pFedFDA only).
    pub beta: Option<f64>,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub reports: Vec<RoundReport>,
    pub clients: Vec<ClientSummary>,
    pub state: FederationState,
}

fn worker_threads(config: &FederationConfig) -> usize {
    config
        .threads
        .or_else(|| std::env::var("FEDFDA_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn check_shards(shards: &[ClientShard]) -> Result<(usize, usize)> {
    let first = shards.first().ok_or_else(|| Error::Config("no clients".into()))?;
    let input_dim = first.train.dim();
    for (i, s) in shards.iter().enumerate() {
        if s.id != i {
            return Err(Error::Config(format!("shard {i} carries id {}", s.id)));
        }
        if s.train.dim() != input_dim || (!s.test.is_empty() && s.test.dim() != input_dim) {
            return Err(Error::Config(format!("client {i} has inconsistent input width")));
        }
    }
    let classes = shards.iter().flat_map(|s| s.train.y.iter().chain(&s.test.y)).max().map_or(0, |&m| m + 1);
    if classes == 0 {
        return Err(Error::Config("dataset has no labels".into()));
    }
    Ok((input_dim, classes))
}

/// Runs `config.rounds` rounds over `shards` and evaluates every
/// `eval_every` rounds plus the last one.
pub fn run_federation(config: &FederationConfig, shards: &[ClientShard]) -> Result<FederationOutcome> {
    config.validate()?;
    let (input_dim, classes) = check_shards(shards)?;
    run_federation_with_classes(config, shards, input_dim, classes)
}

pub(crate) fn run_federation_with_classes(
    config: &FederationConfig,
    shards: &[ClientShard],
    input_dim: usize,
    classes: usize,
) -> Result<FederationOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads(config))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_rounds(config, shards, input_dim, classes))
}

fn run_rounds(
    config: &FederationConfig,
    shards: &[ClientShard],
    input_dim: usize,
    classes: usize,
) -> Result<FederationOutcome> {
    let m = shards.len();
    let mut state = init_state(config, m, classes, input_dim)?;
    let mut reports = Vec::new();
    let mut last_eval: Option<Vec<Option<f64>>> = None;

    for r in 0..config.rounds {
        let mut rng = stream(config.seed, Purpose::Participation, r as u64, 0);
        let active = sample_active_clients(m, config.participation, &mut rng, r, config.rounds);
        let mut round_betas = Vec::new();

        match config.algorithm {
            AlgorithmKind::Pfedfda => {
                let results: Vec<ClientResult> = active
                    .par_iter()
                    .map(|&i| {
                        client_update_pfedfda(
                            &state.phi_g,
                            &state.gaussian_g,
                            &shards[i],
                            &state.clients[i].velocity,
                            config,
                            r,
                        )
                    })
                    .collect::<Result<_>>()?;
                let (phi, gaussian) = aggregate(&results, &state.gaussian_g, &config.adapt.cov)?;
                for res in results {
                    round_betas.push(res.beta.mean());
                    let client = &mut state.clients[res.client];
                    client.gaussian = res.gaussian;
                    client.beta = res.beta;
                    client.velocity = res.velocity;
                }
                state.phi_g = phi;
                state.gaussian_g = gaussian;
            }
            AlgorithmKind::Fedavg | AlgorithmKind::FedavgFt => {
                let updates: Vec<_> = active
                    .par_iter()
                    .map(|&i| {
                        let c = &state.clients[i];
                        client_update_fedavg(
                            &state.phi_g,
                            &state.head_g,
                            &shards[i],
                            (&c.velocity, &c.head_velocity),
                            config,
                            r,
                        )
                    })
                    .collect::<Result<_>>()?;
                let weights: Vec<f64> = active.iter().map(|&i| shards[i].n_train() as f64).collect();
                let phis: Vec<&MlpParams> = updates.iter().map(|u| &u.0).collect();
                let heads: Vec<&LinearHead> = updates.iter().map(|u| &u.1).collect();
                let phi = average_mlp(&phis, &weights)?;
                let head = average_head(&heads, &weights)?;
                for (&i, (_, _, vel)) in active.iter().zip(updates) {
                    state.clients[i].velocity = vel.0;
                    state.clients[i].head_velocity = vel.1;
                }
                state.phi_g = phi;
                state.head_g = head;
            }
            AlgorithmKind::LocalOnly => {
                let updates: Vec<_> = active
                    .par_iter()
                    .map(|&i| {
                        let c = &state.clients[i];
                        let (body, head) = c.local_model.as_ref().expect("initialized for local_only");
                        client_update_fedavg(body, head, &shards[i], (&c.velocity, &c.head_velocity), config, r)
                    })
                    .collect::<Result<_>>()?;
                for (&i, (body, head, vel)) in active.iter().zip(updates) {
                    let c = &mut state.clients[i];
                    c.local_model = Some((body, head));
                    c.velocity = vel.0;
                    c.head_velocity = vel.1;
                }
            }
        }
        state.round = r + 1;

        if (r + 1) % config.eval_every == 0 || r + 1 == config.rounds {
            let accs = evaluate_clients(&state, shards, config)?;
            let (mean_acc, std_acc) = mean_std(&accs);
            let mean_beta = (config.algorithm == AlgorithmKind::Pfedfda && !round_betas.is_empty())
                .then(|| round_betas.iter().sum::<f64>() / round_betas.len() as f64);
            reports.push(RoundReport { round: r + 1, active_clients: active, mean_acc, std_acc, mean_beta });
            last_eval = Some(accs);
        }
    }

    let final_accs = match last_eval {
        Some(a) => a,
        None => evaluate_clients(&state, shards, config)?,
    };
    let clients = shards
        .iter()
        .zip(final_accs)
        .map(|(s, acc)| ClientSummary {
            client_id: s.id,
            n_train: s.n_train(),
            corruption: s.corruption,
            beta: (config.algorithm == AlgorithmKind::Pfedfda).then(|| state.clients[s.id].beta.mean()),
            test_acc: acc,
        })
        .collect();
    Ok(FederationOutcome { reports, clients, state })
}

/// Parameters a client uploads for the classifier part of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommOverhead {
    /// `C·(d + 1)`
    pub linear_params: u64,
    /// `C·d + (d² + d)/2`
    pub gaussian_params: u64,
    /// `(gaussian − linear) / (backbone + linear)`
    pub overhead_fraction: f64,
}

pub fn compute_comm_overhead(classes: u64, dim: u64, backbone_params: u64) -> CommOverhead {
    let linear = classes * (dim + 1);
    let gaussian = classes * dim + (dim * dim + dim) / 2;
    let overhead = (gaussian as f64 - linear as f64) / (backbone_params + linear) as f64;
    CommOverhead { linear_params: linear, gaussian_params: gaussian, overhead_fraction: overhead }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let e = compute_comm_overhead(62, 128, 115_776);
        assert_eq!((e.linear_params, e.gaussian_params), (7998, 16192));
        assert!((100.0 * e.overhead_fraction - 6.620).abs() < 1e-3);
        let c = compute_comm_overhead(100, 128, 106_400);
        assert_eq!((c.linear_params, c.gaussian_params), (12900, 21056));
        assert!((100.0 * c.overhead_fraction - 6.837).abs() < 1e-3);
        let t = compute_comm_overhead(1, 1, 0);
        assert_eq!((t.linear_params, t.gaussian_params, t.overhead_fraction), (2, 2, 0.0));
    }

    #[test]
    fn full_participation_cases() {
        let mut rng = stream(1, Purpose::Participation, 0, 0);
        assert_eq!(sample_active_clients(5, 1.0, &mut rng, 0, 10), vec![0, 1, 2, 3, 4]);
        assert_eq!(sample_active_clients(5, 0.01, &mut rng, 9, 10), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn participation_never_empty() {
        for r in 0..200u64 {
            let mut rng = stream(2, Purpose::Participation, r, 0);
            assert!(!sample_active_clients(3, 0.05, &mut rng, 0, 10).is_empty());
        }
    }

    #[test]
    fn mean_std_skips_missing() {
        let (m, s) = mean_std(&[Some(1.0), None, Some(0.0)]);
        assert_eq!((m, s), (0.5, 0.5));
    }

    #[test]
    fn invalid_q_is_rejected() {
        let cfg = FederationConfig { participation: 1.5, ..Default::default() };
        assert_eq!(cfg.validate().unwrap_err().to_string(), "config error: q out of (0,1]");
    }
}
