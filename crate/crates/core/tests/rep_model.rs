#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use fedfda::classifier::build_classifier;
use fedfda::datagen::Dataset;
use fedfda::mlp::{backward_ce, backward_linear, features, forward, init_mlp, sgd_step, train_local, TrainHyper};
use fedfda::rng::{stream, Purpose};
use fedfda::{ClassGaussian, Mat};
use proptest::prelude::*;

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[test]
fn hidden_layer_init_variance_is_he() {
    let p = init_mlp(&[100, 100, 16], &mut stream(1, Purpose::ModelInit, 0, 0)).unwrap();
    let v = variance(p.weights[0].as_slice());
    assert!((v / 0.02 - 1.0).abs() < 0.1, "variance {v}");
    assert!(p.biases.iter().flatten().all(|&b| b == 0.0));
    // The linear output layer uses 1/fan_in.
    let out = init_mlp(&[100, 100], &mut stream(1, Purpose::ModelInit, 0, 0)).unwrap();
    assert!((variance(out.weights[0].as_slice()) / 0.01 - 1.0).abs() < 0.1);
}

// A single draw of 16 output rows has a sizable spread in row norms, so the
// per-component check averages the variance over independent nets.
#[test]
fn fresh_features_have_unit_scale() {
    let mut r = rng(4);
    let x = random_mat(&mut r, 10_000, 24, 1.0);
    let nets = 20;
    let mut avg = [0.0; 16];
    for seed in 0..nets {
        let p = init_mlp(&[24, 32, 16], &mut stream(seed, Purpose::ModelInit, 0, 0)).unwrap();
        let z = features(&p, &x).unwrap();
        for (k, a) in avg.iter_mut().enumerate() {
            let col: Vec<f64> = (0..z.rows()).map(|j| z[(j, k)]).collect();
            *a += variance(&col) / nets as f64;
        }
    }
    for (k, v) in avg.iter().enumerate() {
        assert!((0.5..=2.0).contains(v), "feature {k} variance {v}");
    }
}

#[test]
fn forward_is_pure() {
    let mut r = rng(6);
    let p = init_mlp(&[6, 10, 4], &mut stream(3, Purpose::ModelInit, 0, 0)).unwrap();
    let x = random_mat(&mut r, 20, 6, 1.0);
    let a = features(&p, &x).unwrap();
    assert_eq!(a, features(&p, &x).unwrap());
    for j in 0..20 {
        let want = naive_forward(&p, x.row(j));
        for k in 0..4 {
            assert!((a[(j, k)] - want[k]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backprop_matches_finite_differences(seed in any::<u64>(), m in 2usize..7, h in 2usize..9, d in 2usize..6, c in 2usize..4) {
        let mut r = rng(seed);
        let p = init_mlp(&[m, h, d], &mut stream(seed, Purpose::ModelInit, 0, 0)).unwrap();
        let g = random_gaussian(&mut r, c, d);
        let clf = build_classifier(&g).unwrap();
        let x = random_mat(&mut r, 7, m, 1.0);
        prop_assume!(min_hidden_preactivation(&p, &x) >= 1e-3);
        let y: Vec<usize> = (0..7).map(|j| j % c).collect();
        let (_, cache) = forward(&p, &x).unwrap();
        let grads = backward_ce(&p, &cache, &clf, &y).unwrap();
        let err = max_gradient_error(&p, &grads, &clf.weights, &clf.biases, &x, &y, 1e-5);
        prop_assert!(err < 1e-4, "relative error {}", err);
    }
}

#[test]
fn head_gradients_match_finite_differences() {
    let mut r = rng(12);
    let p = init_mlp(&[5, 8, 4], &mut stream(12, Purpose::ModelInit, 0, 0)).unwrap();
    let w = random_mat(&mut r, 3, 4, 1.0);
    let b: Vec<f64> = (0..3).map(|_| normal(&mut r)).collect();
    let x = random_mat(&mut r, 9, 5, 1.0);
    let y: Vec<usize> = (0..9).map(|j| j % 3).collect();
    let (_, cache) = forward(&p, &x).unwrap();
    let g = backward_linear(&p, &cache, &w, &b, &y).unwrap();
    let h = 1e-5;
    for k in 0..w.as_slice().len() {
        let mut up = w.clone();
        up.as_mut_slice()[k] += h;
        let mut down = w.clone();
        down.as_mut_slice()[k] -= h;
        let fd = (naive_loss(&p, &up, &b, &x, &y) - naive_loss(&p, &down, &b, &x, &y)) / (2.0 * h);
        let an = g.head.weights.as_slice()[k];
        assert!((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6) < 1e-4);
    }
    for k in 0..3 {
        let mut up = b.clone();
        up[k] += h;
        let mut down = b.clone();
        down[k] -= h;
        let fd = (naive_loss(&p, &w, &up, &x, &y) - naive_loss(&p, &w, &down, &x, &y)) / (2.0 * h);
        assert!((fd - g.head.biases[k]).abs() / fd.abs().max(1e-6) < 1e-4);
    }
}

#[test]
fn saturated_batch_has_tiny_gradient() {
    let p = init_mlp(&[2, 4, 2], &mut stream(0, Purpose::ModelInit, 0, 0)).unwrap();
    let x = Mat::from_rows(&[[1.0, 0.5], [-0.3, 2.0]]);
    let z = features(&p, &x).unwrap();
    // Means placed far along each sample's own feature direction.
    let means = Mat::from_rows(&[[z[(0, 0)] * 400.0, z[(0, 1)] * 400.0], [-z[(0, 0)] * 400.0, -z[(0, 1)] * 400.0]]);
    let clf = build_classifier(&ClassGaussian { means, cov: Mat::identity(2), priors: vec![0.5, 0.5] }).unwrap();
    let y = [0, 0];
    let x1 = Mat::from_rows(&[[1.0, 0.5]]);
    let (_, cache) = forward(&p, &x1).unwrap();
    let g = backward_ce(&p, &cache, &clf, &y[..1]).unwrap();
    let norm: f64 = g.tensors().flatten().map(|v| v * v).sum::<f64>().sqrt();
    assert!(clf.log_posterior(z.row(0))[0].exp() > 1.0 - 1e-12);
    assert!(norm < 1e-3, "gradient norm {norm}");
}

#[test]
fn duplicated_batch_has_same_gradient() {
    let mut r = rng(21);
    let p = init_mlp(&[4, 6, 3], &mut stream(21, Purpose::ModelInit, 0, 0)).unwrap();
    let clf = build_classifier(&random_gaussian(&mut r, 3, 3)).unwrap();
    let x = random_mat(&mut r, 5, 4, 1.0);
    let y = vec![0, 1, 2, 0, 1];
    let mut rows = x.as_slice().to_vec();
    rows.extend_from_slice(x.as_slice());
    let x2 = Mat::from_vec(10, 4, rows).unwrap();
    let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
    let g1 = backward_ce(&p, &forward(&p, &x).unwrap().1, &clf, &y).unwrap();
    let g2 = backward_ce(&p, &forward(&p, &x2).unwrap().1, &clf, &y2).unwrap();
    for (a, b) in g1.tensors().flatten().zip(g2.tensors().flatten()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

fn blobs(seed: u64, n: usize) -> Dataset {
    let mut r = rng(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for j in 0..n {
        let c = j % 2;
        let center = if c == 0 { -3.0 } else { 3.0 };
        rows.push(center + 0.5 * normal(&mut r));
        rows.push(0.5 * normal(&mut r));
        y.push(c);
    }
    Dataset::new(Mat::from_vec(n, 2, rows).unwrap(), y).unwrap()
}

#[test]
fn separable_blobs_train_to_high_accuracy() {
    let data = blobs(3, 200);
    let p = init_mlp(&[2, 16, 4], &mut stream(3, Purpose::ModelInit, 0, 0)).unwrap();
    let mut r = rng(30);
    let g = ClassGaussian { means: random_mat(&mut r, 2, 4, 0.5), cov: Mat::identity(4), priors: vec![0.5, 0.5] };
    let clf = build_classifier(&g).unwrap();
    let before = clf.clone();
    let (trained, log) =
        train_local(&p, &clf, &data, &TrainHyper::default(), &mut stream(3, Purpose::LocalShuffle, 0, 0)).unwrap();
    let z = features(&trained, &data.x).unwrap();
    let acc = (0..data.len()).filter(|&j| clf.predict(z.row(j)) == data.y[j]).count() as f64 / data.len() as f64;
    assert!(acc >= 0.95, "accuracy {acc}");
    assert_eq!(log.0.len(), data.len());
    assert_eq!(clf, before);
}

#[test]
fn full_batch_descent_does_not_increase_loss() {
    let data = blobs(4, 60);
    let p0 = init_mlp(&[2, 8, 3], &mut stream(4, Purpose::ModelInit, 0, 0)).unwrap();
    let mut r = rng(40);
    let clf = build_classifier(&ClassGaussian {
        means: random_mat(&mut r, 2, 3, 1.0),
        cov: Mat::identity(3),
        priors: vec![0.5, 0.5],
    })
    .unwrap();
    let hyper = TrainHyper { lr: 1e-3, momentum: 0.0, weight_decay: 0.0, batch_size: 60, epochs: 1 };
    let mut p = p0.clone();
    let mut v = p.zeros_like();
    let mut last = f64::INFINITY;
    for _ in 0..20 {
        let z = features(&p, &data.x).unwrap();
        let loss = clf.mean_nll(&z, &data.y);
        assert!(loss <= last + 1e-9);
        last = loss;
        let (_, cache) = forward(&p, &data.x).unwrap();
        let g = backward_ce(&p, &cache, &clf, &data.y).unwrap();
        sgd_step(&mut p, &g, &mut v, &hyper);
    }
}

#[test]
fn training_is_identical_across_thread_pools() {
    let data = blobs(5, 120);
    let p = init_mlp(&[2, 8, 3], &mut stream(5, Purpose::ModelInit, 0, 0)).unwrap();
    let mut r = rng(50);
    let clf = build_classifier(&ClassGaussian {
        means: random_mat(&mut r, 2, 3, 1.0),
        cov: Mat::identity(3),
        priors: vec![0.5, 0.5],
    })
    .unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            train_local(&p, &clf, &data, &TrainHyper::default(), &mut stream(5, Purpose::LocalShuffle, 0, 0)).unwrap()
        })
    };
    let (a, la) = run(1);
    let (b, lb) = run(8);
    assert_eq!(a, b);
    assert_eq!(la.0.features, lb.0.features);
}
