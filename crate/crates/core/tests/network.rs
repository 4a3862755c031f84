mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use siseg::network::{
    forward, forward_line, forward_line_trace, forward_trace, forward_values, init, load_network,
    load_network_with, save_network, LayerSpec, LoadOptions, NetworkSpec, PiecewiseLinearActivation,
    SmoothKind,
};
use siseg::{Error, ImageVector};

fn write_blob(dir: &Path, name: &str, values: &[f64]) {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(dir.join(name), bytes).unwrap();
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn reference_cnn_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let net = init::cnn4(8, 8, 3).unwrap();
    let path = save_network(&net, dir.path(), "cnn", BTreeMap::new()).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("si-seg-weights/1"));

    let loaded = load_network(&path).unwrap();
    assert_eq!(loaded.layers().len(), 6);
    let kinds: Vec<&str> = loaded.layers().iter().map(LayerSpec::kind).collect();
    assert_eq!(
        kinds,
        ["conv2d", "activation", "maxpool2x2", "upsample2x", "conv2d", "output_sign"]
    );
    match &loaded.layers()[0] {
        LayerSpec::Conv2d(c) => {
            assert_eq!(
                (c.filter_height, c.filter_width, c.in_channels, c.out_channels),
                (3, 3, 1, 4)
            );
            assert_eq!(c.kernel.len(), 36);
        }
        other => panic!("first layer is {}", other.kind()),
    }
    assert_eq!(loaded.input_len(), 64);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let x = ImageVector::new(gaussian_vec(&mut rng, 64), 8, 8).unwrap();
        assert_eq!(forward_trace(&net, x.values()).unwrap(), forward_trace(&loaded, x.values()).unwrap());
    }
}

const IDENTITY_MANIFEST: &str = r#"
format = "si-seg-weights/1"
input_height = 2
input_width = 2

[metadata]
note = "identity"

[[layers]]
kind = "dense"
in_features = 4
out_features = 4
weight = { path = "w.f64", count = 16 }
bias = { path = "b.f64", count = 4 }

[[layers]]
kind = "output_sign"
threshold = 0.0
source = "sigmoid"
"#;

fn identity_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let w: Vec<f64> = (0..16).map(|k| if k / 4 == k % 4 { 1.0 } else { 0.0 }).collect();
    write_blob(dir.path(), "w.f64", &w);
    write_blob(dir.path(), "b.f64", &[0.0; 4]);
    fs::write(dir.path().join("net.toml"), IDENTITY_MANIFEST).unwrap();
    dir
}

#[test]
fn identity_manifest() {
    let dir = identity_dir();
    let net = load_network(dir.path().join("net.toml")).unwrap();
    assert_eq!(net.layers().len(), 2);
    let x = ImageVector::new(vec![1.0, -1.0, 2.0, -2.0], 2, 2).unwrap();
    assert_eq!(forward(&net, &x).unwrap().labels(), &[true, false, true, false]);
}

#[test]
fn malformed_manifests() {
    let dir = identity_dir();
    let path = dir.path().join("bad.toml");

    fs::write(&path, IDENTITY_MANIFEST.replace("si-seg-weights/1", "si-seg-weights/9")).unwrap();
    assert!(matches!(load_network(&path), Err(Error::Format(_))));

    fs::write(&path, IDENTITY_MANIFEST.replace("count = 16", "count = 15")).unwrap();
    assert!(matches!(load_network(&path), Err(Error::Validation { layer: 0, .. })));

    fs::write(&path, IDENTITY_MANIFEST.replace("kind = \"dense\"", "kind = \"lstm\"")).unwrap();
    assert!(matches!(load_network(&path), Err(Error::Format(_))));

    write_blob(dir.path(), "w.f64", &[1.0; 12]);
    assert!(matches!(load_network(dir.path().join("net.toml")), Err(Error::Format(_))));

    assert!(matches!(load_network(dir.path().join("missing.toml")), Err(Error::Io { .. })));
}

#[test]
fn channel_mismatch_names_the_layer() {
    let dir = tempfile::tempdir().unwrap();
    write_blob(dir.path(), "k0.f64", &[0.1; 36]);
    write_blob(dir.path(), "b0.f64", &[0.0; 4]);
    write_blob(dir.path(), "k1.f64", &[0.1; 18]);
    write_blob(dir.path(), "b1.f64", &[0.0; 1]);
    let manifest = r#"
format = "si-seg-weights/1"
input_height = 4
input_width = 4

[[layers]]
kind = "conv2d"
filter_height = 3
filter_width = 3
in_channels = 1
out_channels = 4
kernel = { path = "k0.f64", count = 36 }
bias = { path = "b0.f64", count = 4 }

[[layers]]
kind = "conv2d"
filter_height = 3
filter_width = 3
in_channels = 2
out_channels = 1
kernel = { path = "k1.f64", count = 18 }
bias = { path = "b1.f64", count = 1 }

[[layers]]
kind = "output_sign"
"#;
    let path = dir.path().join("net.toml");
    fs::write(&path, manifest).unwrap();
    match load_network(&path) {
        Err(Error::Validation { layer, .. }) => assert_eq!(layer, 1),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn smooth_activations_need_a_cut_count() {
    let dir = tempfile::tempdir().unwrap();
    write_blob(dir.path(), "w0.f64", &[0.5; 16]);
    write_blob(dir.path(), "b0.f64", &[0.0; 4]);
    let manifest = r#"
format = "si-seg-weights/1"
input_height = 2
input_width = 2

[[layers]]
kind = "dense"
in_features = 4
out_features = 4
weight = { path = "w0.f64", count = 16 }
bias = { path = "b0.f64", count = 4 }

[[layers]]
kind = "activation"
function = "sigmoid"

[[layers]]
kind = "dense"
in_features = 4
out_features = 4
weight = { path = "w0.f64", count = 16 }
bias = { path = "b0.f64", count = 4 }

[[layers]]
kind = "output_sign"
threshold = -1.0
"#;
    let path = dir.path().join("net.toml");
    fs::write(&path, manifest).unwrap();
    assert!(load_network(&path).is_err());
    let net = load_network_with(&path, LoadOptions { smooth_cuts: Some(3) }).unwrap();
    match &net.layers()[1] {
        LayerSpec::Activation(f) => assert_eq!(f, &PiecewiseLinearActivation::approximate(SmoothKind::Sigmoid, 3).unwrap()),
        other => panic!("{}", other.kind()),
    }
    fs::write(&path, manifest.replace("function = \"sigmoid\"", "function = \"sigmoid\"\ncuts = 5")).unwrap();
    let net = load_network(&path).unwrap();
    match &net.layers()[1] {
        LayerSpec::Activation(f) => assert_eq!(f.piece_count(), 5),
        other => panic!("{}", other.kind()),
    }
}

#[test]
fn dense_manifest_round_trip_keeps_activation() {
    let dir = tempfile::tempdir().unwrap();
    let act = PiecewiseLinearActivation::approximate(SmoothKind::Tanh, 5).unwrap();
    let net = init::dense3(2, 4, 16, act.clone(), 9).unwrap();
    let meta = BTreeMap::from([("origin".to_string(), "test".to_string())]);
    let path = save_network(&net, dir.path(), "dense", meta).unwrap();
    let loaded = load_network(&path).unwrap();
    match &loaded.layers()[1] {
        LayerSpec::Activation(f) => assert_eq!(f, &act),
        other => panic!("{}", other.kind()),
    }
    let x: Vec<f64> = (0..8).map(|k| k as f64 - 3.5).collect();
    assert_eq!(forward_values(&net, &x).unwrap(), forward_values(&loaded, &x).unwrap());
}

fn max_trace_gap(net: &NetworkSpec, a: &[f64], b: &[f64], z: f64) -> f64 {
    let x: Vec<f64> = a.iter().zip(b).map(|(a, b)| a + b * z).collect();
    let direct = forward_trace(net, &x).unwrap();
    let (eval, line) = forward_line_trace(net, a, b, z).unwrap();
    assert_eq!(eval.mask, forward_values(net, &x).unwrap());
    assert_eq!(direct.len(), line.len());
    direct
        .iter()
        .zip(&line)
        .flat_map(|(d, (i, s))| {
            assert_eq!(d.len(), i.len());
            d.iter().zip(i.iter().zip(s)).map(move |(d, (i, s))| (d - (i + s * z)).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn line_propagation_matches_plain_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for seed in 0..5 {
        for side in [4, 8, 16] {
            let net = init::cnn4(side, side, seed).unwrap();
            let n = side * side;
            let a = gaussian_vec(&mut rng, n);
            let b = gaussian_vec(&mut rng, n);
            for z in [0.37, -2.5, 11.0] {
                let gap = max_trace_gap(&net, &a, &b, z);
                assert!(gap <= 1e-8, "seed {seed} side {side} z {z}: {gap}");
            }
        }
    }
    for kind in [SmoothKind::Sigmoid, SmoothKind::Tanh] {
        for cuts in [3, 5, 7] {
            let act = PiecewiseLinearActivation::approximate(kind, cuts).unwrap();
            let net = init::dense3(2, 4, 16, act, cuts as u64).unwrap();
            let a = gaussian_vec(&mut rng, 8);
            let b = gaussian_vec(&mut rng, 8);
            assert!(max_trace_gap(&net, &a, &b, 0.37) <= 1e-8);
        }
    }
}

#[test]
fn three_cut_approximations_are_exact_ramps() {
    let s = PiecewiseLinearActivation::approximate(SmoothKind::Sigmoid, 3).unwrap();
    assert_eq!(s.knots(), &[-4.0, 4.0]);
    assert_eq!(s.slopes()[1], 0.125);
    assert_eq!(s.intercepts()[1], 0.5);
    assert_eq!((s.eval(-9.0), s.eval(9.0)), (0.0, 1.0));
    let t = PiecewiseLinearActivation::approximate(SmoothKind::Tanh, 3).unwrap();
    assert_eq!(t.knots(), &[-2.0, 2.0]);
    assert_eq!(t.slopes()[1], 0.5);
    assert_eq!((t.eval(-9.0), t.eval(9.0)), (-1.0, 1.0));
    let s5 = PiecewiseLinearActivation::approximate(SmoothKind::Sigmoid, 5).unwrap();
    for &k in s5.knots() {
        let exact = 1.0 / (1.0 + (-k).exp());
        assert!((s5.eval(k) - exact).abs() < 1e-12, "knot {k}");
    }
    assert!(PiecewiseLinearActivation::approximate(SmoothKind::Sigmoid, 4).is_err());
    assert!(PiecewiseLinearActivation::approximate(SmoothKind::Tanh, 1).is_err());
}

#[test]
fn zero_network_labels_everything_object() {
    let net = common::single_unit_net(PiecewiseLinearActivation::relu(), 0.0);
    let zero = match &net.layers()[2] {
        LayerSpec::Dense(d) => {
            let mut d = d.clone();
            d.weight.iter_mut().for_each(|w| *w = 0.0);
            d
        }
        _ => unreachable!(),
    };
    let mut layers = net.layers().to_vec();
    layers[2] = LayerSpec::Dense(zero);
    let net = NetworkSpec::new(2, 2, layers).unwrap();
    let x = ImageVector::new(vec![3.0, -1.0, 0.5, 7.0], 2, 2).unwrap();
    assert!(forward(&net, &x).unwrap().labels().iter().all(|&l| l));
}

fn random_case() -> impl Strategy<Value = (u64, Vec<f64>, Vec<f64>, f64)> {
    (0u64..1000, prop::collection::vec(-3.0f64..3.0, 16), prop::collection::vec(-3.0f64..3.0, 16), -10.0f64..10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constraints_hold_at_the_query((seed, a, b, z) in random_case()) {
        let net = init::cnn4(4, 4, seed).unwrap();
        let eval = forward_line(&net, &a, &b, z).unwrap();
        for c in &eval.constraints {
            prop_assert!(c.value(z) <= 1e-10, "{c:?} at {z}");
        }
    }

    #[test]
    fn signature_constant_up_to_nearest_root((seed, a, b, z) in random_case(), frac in 0.05f64..0.95, up in any::<bool>()) {
        let net = init::cnn4(4, 4, seed).unwrap();
        let eval = forward_line(&net, &a, &b, z).unwrap();
        let reach = eval
            .constraints
            .iter()
            .filter_map(|c| {
                let r = c.root()?;
                let ahead = if up { r > z } else { r < z };
                ahead.then(|| (r - z).abs())
            })
            .fold(5.0, f64::min);
        prop_assume!(reach > 1e-9);
        let z2 = if up { z + frac * reach } else { z - frac * reach };
        let other = forward_line(&net, &a, &b, z2).unwrap();
        prop_assert_eq!(&eval.signature, &other.signature);
        prop_assert_eq!(eval.mask, other.mask);
    }

    #[test]
    fn pwl_activations_are_continuous(kind in prop_oneof![Just(SmoothKind::Sigmoid), Just(SmoothKind::Tanh)], half in 1usize..6) {
        let f = PiecewiseLinearActivation::approximate(kind, 2 * half + 1).unwrap();
        for &k in f.knots() {
            let left = f.eval(k - 1e-9);
            let right = f.eval(k);
            prop_assert!((left - right).abs() < 1e-8);
        }
    }
}
