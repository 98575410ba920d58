//! Synthetic heterogeneous federated datasets.
//!
//! Three heterogeneity axes are available: label skew through Dirichlet
//! partitioning, covariate shift through deterministic vector corruptions,
//! and data scarcity through training-set subsampling.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{stream, Purpose, SimRng};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Inputs with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Mat,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Mat, y: Vec<usize>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dimension(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        let m = self.dim();
        let mut data = Vec::with_capacity(indices.len() * m);
        for &i in indices {
            data.extend_from_slice(self.x.row(i));
        }
        Dataset {
            x: Mat::from_vec(indices.len(), m, data).expect("shape by construction"),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.y.iter().max().map_or(0, |&m| m + 1)
    }
}

/// Shape of the synthetic classification task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTaskSpec {
    pub num_classes: usize,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub samples_per_class: usize,
    /// Scale of the class centers in latent space (unit within-class noise).
    pub separation: f64,
    /// Seeds the class centers and the lifting map, i.e. the task itself.
    pub lift_seed: u64,
    /// Skip the nonlinear lift; requires `input_dim == latent_dim`.
    pub identity_lift: bool,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        Self {
            num_classes: 5,
            input_dim: 24,
            latent_dim: 8,
            samples_per_class: 600,
            separation: 1.6,
            lift_seed: 17,
            identity_lift: false,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.input_dim == 0 || self.latent_dim == 0 || self.samples_per_class == 0 {
            return Err(Error::InvalidArgument("task sizes must be positive".into()));
        }
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return Err(Error::InvalidArgument("separation must be finite and nonnegative".into()));
        }
        if self.identity_lift && self.input_dim != self.latent_dim {
            return Err(Error::InvalidArgument("identity lift needs input_dim == latent_dim".into()));
        }
        Ok(())
    }
}

/// The fixed parts of a synthetic task: class centers and the lift.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub spec: SyntheticTaskSpec,
    pub centers: Mat,
    lift_weights: Mat,
    lift_bias: Vec<f64>,
}

impl SyntheticTask {
    pub fn new(spec: &SyntheticTaskSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = stream(spec.lift_seed, Purpose::TaskDefinition, 0, 0);
        let (c, k, m) = (spec.num_classes, spec.latent_dim, spec.input_dim);
        let centers: Vec<f64> = (0..c * k).map(|_| spec.separation * rng.sample::<f64, _>(StandardNormal)).collect();
        let w_scale = (1.0 / k as f64).sqrt();
        let lift: Vec<f64> = (0..m * k).map(|_| w_scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let lift_bias = (0..m).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        Ok(Self {
            spec: spec.clone(),
            centers: Mat::from_vec(c, k, centers)?,
            lift_weights: Mat::from_vec(m, k, lift)?,
            lift_bias,
        })
    }

    /// Maps one latent point into input space.
    pub fn lift(&self, latent: &[f64]) -> Vec<f64> {
        if self.spec.identity_lift {
            return latent.to_vec();
        }
        self.lift_weights.matvec(latent).iter().zip(&self.lift_bias).map(|(v, b)| (v + b).tanh()).collect()
    }

    /// `samples_per_class` draws per class, class-major order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        let (c, k, m) = (self.spec.num_classes, self.spec.latent_dim, self.spec.input_dim);
        let per = self.spec.samples_per_class;
        let mut x = Vec::with_capacity(c * per * m);
        let mut y = Vec::with_capacity(c * per);
        let mut latent = vec![0.0; k];
        for class in 0..c {
            for _ in 0..per {
                for (l, &mu) in latent.iter_mut().zip(self.centers.row(class)) {
                    *l = mu + rng.sample::<f64, _>(StandardNormal);
                }
                x.extend(self.lift(&latent));
                y.push(class);
            }
        }
        Dataset::new(Mat::from_vec(c * per, m, x)?, y)
    }
}

/// Class-conditional latent blobs lifted through a fixed random affine map and
/// an elementwise tanh.
pub fn generate_base_dataset<R: Rng + ?Sized>(spec: &SyntheticTaskSpec, rng: &mut R) -> Result<Dataset> {
    SyntheticTask::new(spec)?.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    Rotate,
    Scale,
    AdditiveNoise,
    FeatureDropout,
    Translate,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 5] = [
        CorruptionKind::Rotate,
        CorruptionKind::Scale,
        CorruptionKind::AdditiveNoise,
        CorruptionKind::FeatureDropout,
        CorruptionKind::Translate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::Rotate => "rotate",
            CorruptionKind::Scale => "scale",
            CorruptionKind::AdditiveNoise => "additive_noise",
            CorruptionKind::FeatureDropout => "feature_dropout",
            CorruptionKind::Translate => "translate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// 1 (mild) to 5 (strong).
    pub severity: u8,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8) -> Result<Self> {
        if !(1..=5).contains(&severity) {
            return Err(Error::InvalidArgument(format!("severity {severity} outside 1..=5")));
        }
        Ok(Self { kind, severity })
    }

    fn level(&self) -> f64 {
        self.severity as f64 / 5.0
    }

    /// Rotation angle in radians (up to 45°).
    pub fn angle(&self) -> f64 {
        self.level() * std::f64::consts::FRAC_PI_4
    }

    /// The `(kind, severity)` pair assigned to shifted client `i`. Walks the
    /// 5×5 grid so that consecutive clients differ in both coordinates and
    /// the first 25 pairs are distinct.
    pub fn for_client(i: usize) -> Self {
        let kind = CorruptionKind::ALL[i % 5];
        let severity = ((i % 5 + i / 5) % 5 + 1) as u8;
        Self { kind, severity }
    }
}

fn rotate_pairs(x: &mut Mat, angle: f64) {
    let (s, c) = angle.sin_cos();
    for j in 0..x.rows() {
        let row = x.row_mut(j);
        for pair in row.chunks_exact_mut(2) {
            let (a, b) = (pair[0], pair[1]);
            pair[0] = c * a - s * b;
            pair[1] = s * a + c * b;
        }
    }
}

/// Applies a corruption to every row. Noise-free kinds ignore `rng`.
///
/// | kind | severity s |
/// |---|---|
/// | rotate | consecutive coordinate pairs rotated by 9°·s |
/// | scale | multiplied by 1 + 0.2·s |
/// | additive_noise | Gaussian noise with σ = 0.2·s |
/// | feature_dropout | each entry zeroed with probability 0.1·s |
/// | translate | every coordinate shifted by 0.2·s |
pub fn apply_covariate_shift<R: Rng + ?Sized>(x: &Mat, spec: &CorruptionSpec, rng: &mut R) -> Result<Mat> {
    let spec = CorruptionSpec::new(spec.kind, spec.severity)?;
    let mut out = x.clone();
    let level = spec.level();
    match spec.kind {
        CorruptionKind::Rotate => rotate_pairs(&mut out, spec.angle()),
        CorruptionKind::Scale => out.as_mut_slice().iter_mut().for_each(|v| *v *= 1.0 + level),
        CorruptionKind::AdditiveNoise => {
            let noise = Normal::new(0.0, level).expect("positive sigma");
            out.as_mut_slice().iter_mut().for_each(|v| *v += noise.sample(rng));
        }
        CorruptionKind::FeatureDropout => {
            let rate = 0.5 * level;
            out.as_mut_slice().iter_mut().for_each(|v| {
                if rng.random::<f64>() < rate {
                    *v = 0.0;
                }
            });
        }
        CorruptionKind::Translate => out.as_mut_slice().iter_mut().for_each(|v| *v += level),
    }
    Ok(out)
}

/// Undoes a noise-free corruption.
pub fn invert_covariate_shift(x: &Mat, spec: &CorruptionSpec) -> Result<Mat> {
    let level = spec.level();
    let mut out = x.clone();
    match spec.kind {
        CorruptionKind::Rotate => rotate_pairs(&mut out, -spec.angle()),
        CorruptionKind::Scale => out.as_mut_slice().iter_mut().for_each(|v| *v /= 1.0 + level),
        CorruptionKind::Translate => out.as_mut_slice().iter_mut().for_each(|v| *v -= level),
        CorruptionKind::AdditiveNoise | CorruptionKind::FeatureDropout => {
            return Err(Error::InvalidArgument(format!("{} is not invertible", spec.kind.name())))
        }
    }
    Ok(out)
}

/// Draws `Dir(α·1)` over `m` components via normalized Gamma variates.
fn dirichlet<R: Rng + ?Sized>(alpha: f64, m: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    let draws: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|g| g / total).collect()
    } else {
        vec![1.0 / m as f64; m]
    }
}

/// Largest-remainder allocation of `total` items by `shares`; ties in the
/// remainder go to the lower index.
fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// For each class, splits its (shuffled) indices across `clients` by
/// `Dir(α)` proportions. Every index lands in exactly one list; lists are
/// sorted ascending.
pub fn dirichlet_partition<R: Rng + ?Sized>(
    labels: &[usize],
    clients: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if clients == 0 {
        return Err(Error::InvalidArgument("need at least one client".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be positive and finite".into()));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut parts = vec![Vec::new(); clients];
    for class in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let shares = dirichlet(alpha, clients, rng);
        let counts = largest_remainder(idx.len(), &shares);
        let mut start = 0;
        for (part, n) in parts.iter_mut().zip(counts) {
            part.extend_from_slice(&idx[start..start + n]);
            start += n;
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

/// Splits `indices` 80/20 with `⌈0.8·n⌉` training samples, stratified by
/// label: each class contributes `⌈0.8·n_c⌉` or `⌊0.8·n_c⌋` samples so the
/// total matches exactly.
pub fn train_test_split<R: Rng + ?Sized>(
    indices: &[usize],
    labels: &[usize],
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = indices.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let n_train = (0.8 * n as f64 - 1e-9).ceil() as usize;
    let classes = indices.iter().map(|&i| labels[i]).max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for &i in indices {
        by_class[labels[i]].push(i);
    }
    for group in &mut by_class {
        group.shuffle(rng);
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let shares: Vec<f64> = sizes.iter().map(|&s| s as f64 / n as f64).collect();
    let mut take = largest_remainder(n_train, &shares);
    // Never ask a class for more than it has; hand the excess elsewhere.
    let mut excess = 0;
    for (t, &s) in take.iter_mut().zip(&sizes) {
        if *t > s {
            excess += *t - s;
            *t = s;
        }
    }
    for (t, &s) in take.iter_mut().zip(&sizes) {
        let room = s - *t;
        let give = room.min(excess);
        *t += give;
        excess -= give;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (group, t) in by_class.iter().zip(take) {
        train.extend_from_slice(&group[..t]);
        test.extend_from_slice(&group[t..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// One client's local data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub id: usize,
    pub train: Dataset,
    pub test: Dataset,
    pub corruption: Option<CorruptionSpec>,
}

impl ClientShard {
    pub fn n_train(&self) -> usize {
        self.train.len()
    }
}

/// Keeps `⌈fraction·n⌉` (at least one) training samples drawn uniformly
/// without replacement, in their original order. Test data is untouched.
pub fn subsample<R: Rng + ?Sized>(shard: &ClientShard, fraction: f64, rng: &mut R) -> Result<ClientShard> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1]")));
    }
    let n = shard.train.len();
    let keep = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1.min(n), n);
    let mut idx: Vec<usize> = rand::seq::index::sample(rng, n, keep).into_vec();
    idx.sort_unstable();
    Ok(ClientShard { train: shard.train.select(&idx), ..shard.clone() })
}

/// Everything needed to assemble a federated benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataConfig {
    pub clients: usize,
    pub alpha: f64,
    /// Number of leading clients that receive a corruption.
    pub shifted_clients: usize,
    pub train_fraction: f64,
    /// Partitions are redrawn until every client has this many samples.
    pub min_client_samples: usize,
    pub seed: u64,
}

/// Dirichlet-partitions `base`, splits each client 80/20, corrupts the first
/// `shifted_clients` clients (train and test) and subsamples training data.
pub fn build_federation(base: &Dataset, cfg: &FederatedDataConfig) -> Result<Vec<ClientShard>> {
    if cfg.shifted_clients > cfg.clients {
        return Err(Error::InvalidArgument("more shifted clients than clients".into()));
    }
    let min = cfg.min_client_samples.max(2);
    if base.len() < min * cfg.clients {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot give {} clients {min} samples each",
            base.len(),
            cfg.clients
        )));
    }
    let mut parts = None;
    for attempt in 0..1000u64 {
        let mut rng = stream(cfg.seed, Purpose::Partition, attempt, 0);
        let p = dirichlet_partition(&base.y, cfg.clients, cfg.alpha, &mut rng)?;
        if p.iter().all(|c| c.len() >= min) {
            parts = Some(p);
            break;
        }
    }
    let parts = parts
        .ok_or_else(|| Error::InvalidArgument(format!("no Dirichlet partition gave every client {min} samples")))?;

    parts
        .iter()
        .enumerate()
        .map(|(id, idx)| {
            let mut rng: SimRng = stream(cfg.seed, Purpose::Split, 0, id as u64);
            let (tr, te) = train_test_split(idx, &base.y, &mut rng)?;
            let mut train = base.select(&tr);
            let mut test = base.select(&te);
            let corruption = (id < cfg.shifted_clients).then(|| CorruptionSpec::for_client(id));
            if let Some(spec) = &corruption {
                let mut rng = stream(cfg.seed, Purpose::Corruption, 0, id as u64);
                train.x = apply_covariate_shift(&train.x, spec, &mut rng)?;
                test.x = apply_covariate_shift(&test.x, spec, &mut rng)?;
            }
            let shard = ClientShard { id, train, test, corruption };
            let mut rng = stream(cfg.seed, Purpose::Subsample, 0, id as u64);
            subsample(&shard, cfg.train_fraction, &mut rng)
        })
        .collect()
}

/// Reads `f0,…,f{m−1},label` CSV with a header row.
pub fn load_csv_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Csv { line: 1, msg: format!("{other:?}") },
    })?;
    let headers = reader.headers().map_err(|e| Error::Csv { line: 1, msg: e.to_string() })?.clone();
    let width = headers.len();
    if width < 2 || headers.get(width - 1) != Some("label") {
        return Err(Error::Csv { line: 1, msg: "header must end with a `label` column".into() });
    }
    for (i, h) in headers.iter().take(width - 1).enumerate() {
        if h != format!("f{i}") {
            return Err(Error::Csv { line: 1, msg: format!("expected column f{i}, found `{h}`") });
        }
    }
    let m = width - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Csv { line, msg: e.to_string() })?;
        if record.len() != width {
            return Err(Error::Csv { line, msg: format!("expected {width} fields, found {}", record.len()) });
        }
        for field in record.iter().take(m) {
            let v: f64 =
                field.trim().parse().map_err(|_| Error::Csv { line, msg: format!("`{field}` is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Csv { line, msg: format!("non-finite value `{field}`") });
            }
            x.push(v);
        }
        let label = &record[m];
        let label: usize =
            label.trim().parse().map_err(|_| Error::Csv { line, msg: format!("`{label}` is not a class id") })?;
        y.push(label);
    }
    Dataset::new(Mat::from_vec(y.len(), m, x)?, y)
}

/// Writes the format [`load_csv_dataset`] reads. Values use Rust's
/// shortest round-trip formatting.
pub fn write_csv_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (0..data.dim()).map(|i| format!("f{i}")).chain(["label".into()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for j in 0..data.len() {
        let fields: Vec<String> = data.x.row(j).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{},{}", fields.join(","), data.y[j])?;
    }
    out.flush()?;
    Ok(())
}
