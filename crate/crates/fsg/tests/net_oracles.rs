//! Network-level oracles: the hand-chained backward pass against central
//! finite differences, overfit behaviour on a real rendered scene, the
//! loss-trend invariant over several seeds, and exact equivalence of the
//! identity-initialized DO-Conv network with a plain-convolution rebuild
//! read back out of its own checkpoint file.

mod common;

use fsg::dataset::encode_labels;
use fsg::extract::best_grasp;
use fsg::net::checkpoint::save_checkpoint;
use fsg::net::{
    build_network, train, train_with, InputMode, LayerSpec, NetworkConfig, TrainSample,
};
use fsg::preprocess::{preprocess, PreprocessParams};
use fsg::sim::{generate_scene, make_sample, CatalogParams};
use fsg::tensor::{conv2d, mse_channels, relu, ConvSpec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_config(seed: u64) -> NetworkConfig {
    let mut layers = vec![
        LayerSpec {
            in_channels: 4,
            out_channels: 6,
            kernel: 3,
            dilation: 1,
            upsample_before: false,
            pool_after: true,
        },
        LayerSpec {
            in_channels: 6,
            out_channels: 8,
            kernel: 3,
            dilation: 2,
            upsample_before: false,
            pool_after: false,
        },
        LayerSpec {
            in_channels: 8,
            out_channels: 6,
            kernel: 3,
            dilation: 1,
            upsample_before: true,
            pool_after: false,
        },
    ];
    layers[2].upsample_before = true;
    NetworkConfig {
        layers,
        learning_rate: 1e-3,
        batch_size: 2,
        epochs: 0,
        seed,
    }
}

fn rand_input(side: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn([1, 4, side, side], |_| rng.gen_range(-0.5..0.5f32))
}

fn smooth_target(side: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (
        rng.gen_range(3.0..side as f64 - 3.0),
        rng.gen_range(3.0..side as f64 - 3.0),
    );
    let mut t = Tensor::zeros([1, 5, side, side]);
    for ch in 0..5 {
        let level = rng.gen_range(0.1..0.9) as f32;
        for y in 0..side {
            for x in 0..side {
                let r2 = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / side as f64;
                *t.at_mut(0, ch, y, x) = if ch == 0 { (-r2).exp() as f32 } else { level };
            }
        }
    }
    t
}

/// The full backward chain — heads, fold, conv, ReLU, pool, upsample —
/// probed against central differences of the actual f32 loss. Operator
/// gradients are verified exactly elsewhere in 64-bit; this test checks the
/// chaining, so the tolerance is loose and a small quota of probes near
/// ReLU kinks is allowed to miss it.
#[test]
fn backward_chain_matches_finite_differences() {
    let mut net = build_network(&tiny_config(31), InputMode::Fsg).unwrap();
    let input = rand_input(10, 8);
    let target = smooth_target(10, 9);
    let channels: Vec<usize> = (0..5).collect();

    let (cache, raw) = net.forward_cached(&input).unwrap();
    let (_, grad_raw) = mse_channels(&raw, &target, &channels).unwrap();
    let analytic = net.backward(&cache, &grad_raw).unwrap();

    let mut probes = Vec::new();
    for (ti, t) in analytic.iter().enumerate() {
        // first, middle and last element of every registry tensor
        for ei in [0, t.len() / 2, t.len() - 1] {
            probes.push((ti, ei));
        }
    }
    probes.dedup();

    let h = 1e-2f32;
    let loss_at = |net: &fsg::net::Network| {
        let raw = net.forward_raw(&input).unwrap();
        mse_channels(&raw, &target, &channels).unwrap().0 as f64
    };
    let mut misses = Vec::new();
    for &(ti, ei) in &probes {
        let orig = net.params()[ti].data()[ei];
        net.params_mut()[ti].data_mut()[ei] = orig + h;
        let lp = loss_at(&net);
        net.params_mut()[ti].data_mut()[ei] = orig - h;
        let lm = loss_at(&net);
        net.params_mut()[ti].data_mut()[ei] = orig;
        let fd = (lp - lm) / (2.0 * h as f64);
        let an = analytic[ti].data()[ei] as f64;
        let rel = (an - fd).abs() / 1e-3f64.max(an.abs()).max(fd.abs());
        if rel > 0.08 {
            misses.push((ti, ei, an, fd, rel));
        }
    }
    assert!(
        misses.len() * 20 <= probes.len(),
        "{} of {} gradient probes disagree with finite differences: {misses:?}",
        misses.len(),
        probes.len()
    );
}

/// Overfitting a single rendered scene must localize the grasp: the decoded
/// best-grasp pixel lands inside the labeled center-strip mask.
#[test]
fn overfit_on_one_rendered_scene_localizes_the_grasp() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let catalog = CatalogParams {
        material_mix: [1.0, 0.0, 0.0, 0.0],
        ..CatalogParams::default()
    };
    let scene = generate_scene(&mut rng, &catalog).unwrap();
    let (sample, _) = make_sample(scene, 300, &mut rng, "overfit0".into()).unwrap();
    assert!(!sample.grasps.is_empty(), "scene must be graspable");

    let (input, _crop) = preprocess(&sample.frame, None, None, &PreprocessParams::default()).unwrap();
    let target = encode_labels(&sample).unwrap().into_tensor();

    let mut layers = vec![
        LayerSpec {
            in_channels: 4,
            out_channels: 8,
            kernel: 7,
            dilation: 1,
            upsample_before: false,
            pool_after: false,
        },
        LayerSpec {
            in_channels: 8,
            out_channels: 8,
            kernel: 5,
            dilation: 1,
            upsample_before: false,
            pool_after: true,
        },
        LayerSpec {
            in_channels: 8,
            out_channels: 12,
            kernel: 5,
            dilation: 1,
            upsample_before: false,
            pool_after: true,
        },
        LayerSpec {
            in_channels: 12,
            out_channels: 16,
            kernel: 5,
            dilation: 2,
            upsample_before: false,
            pool_after: false,
        },
        LayerSpec {
            in_channels: 16,
            out_channels: 8,
            kernel: 5,
            dilation: 1,
            upsample_before: true,
            pool_after: false,
        },
        LayerSpec {
            in_channels: 8,
            out_channels: 8,
            kernel: 7,
            dilation: 1,
            upsample_before: true,
            pool_after: false,
        },
    ];
    layers[0].pool_after = false;
    let config = NetworkConfig {
        layers,
        learning_rate: 1e-3,
        batch_size: 1,
        epochs: 400,
        seed: 5,
    };
    let mut net = build_network(&config, InputMode::Fsg).unwrap();
    let samples = vec![TrainSample {
        input: input.clone(),
        target: target.clone(),
    }];
    let report = train_with(&mut net, &samples, &[], &config, |s| {
        if s.epoch % 50 == 0 {
            eprintln!("epoch {:3}  loss {:.6}", s.epoch, s.train_loss);
        }
    })
    .unwrap();
    let first = report.epochs.first().unwrap().train_loss;
    let last = report.epochs.last().unwrap().train_loss;
    assert!(last < 0.5 * first, "overfit stalled: {first} → {last}");

    let maps = net.forward(&input).unwrap();
    let g = best_grasp(&maps, 2.0, 1e-4).unwrap();
    let q_target = target.at(0, 0, g.y_p, g.x_p);
    assert_eq!(
        q_target, 1.0,
        "best grasp ({}, {}) fell outside the labeled mask",
        g.x_p, g.y_p
    );
}

/// Train-fold loss is non-increasing across epochs in at least 90% of
/// transitions, measured over five seeds.
#[test]
fn train_loss_trend_is_overwhelmingly_non_increasing() {
    let mut total = 0usize;
    let mut non_increasing = 0usize;
    for seed in 0..5u64 {
        let config = NetworkConfig {
            epochs: 12,
            batch_size: 2,
            ..tiny_config(seed)
        };
        let mut net = build_network(&config, InputMode::Fsg).unwrap();
        let samples: Vec<TrainSample> = (0..3)
            .map(|i| TrainSample {
                input: rand_input(16, 100 + seed * 10 + i),
                target: smooth_target(16, 200 + seed * 10 + i),
            })
            .collect();
        let report = train(&mut net, &samples, &[], &config).unwrap();
        for w in report.epochs.windows(2) {
            total += 1;
            if w[1].train_loss <= w[0].train_loss * (1.0 + 1e-9) {
                non_increasing += 1;
            }
        }
    }
    assert!(
        non_increasing * 10 >= total * 9,
        "loss rose too often: {non_increasing}/{total} transitions non-increasing"
    );
}

fn manifest_tensor(manifest: &serde_json::Value, payload: &[u8], layer: &str, tensor: &str) -> Tensor {
    let entry = manifest
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["layer"] == layer && e["tensor"] == tensor)
        .unwrap_or_else(|| panic!("manifest lacks {layer}/{tensor}"));
    let shape: Vec<usize> = entry["shape"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    let off = entry["byte_offset"].as_u64().unwrap() as usize;
    let count: usize = shape.iter().product();
    let data: Vec<f32> = payload[off..off + 4 * count]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new([shape[0], shape[1], shape[2], shape[3]], data).unwrap()
}

/// With identity DO-Conv factors (the initialization), the network must act
/// exactly — bit for bit — like plain convolutions. The plain rebuild reads
/// its kernels back out of the checkpoint file, so this also pins the
/// documented file layout: magic, u32 header length, JSON manifest,
/// little-endian f32 blobs.
#[test]
fn identity_doconv_network_equals_plain_convolutions() {
    let config = NetworkConfig {
        layers: vec![LayerSpec {
            in_channels: 4,
            out_channels: 6,
            kernel: 3,
            dilation: 1,
            upsample_before: false,
            pool_after: false,
        }],
        learning_rate: 1e-3,
        batch_size: 1,
        epochs: 0,
        seed: 77,
    };
    let net = build_network(&config, InputMode::Fsg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.fsg");
    save_checkpoint(&net, &path).unwrap();

    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"FSG1");
    let hlen = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let manifest: serde_json::Value = serde_json::from_slice(&bytes[8..8 + hlen]).unwrap();
    let payload = &bytes[8 + hlen..];

    let x = rand_input(9, 3);
    let w1 = manifest_tensor(&manifest, payload, "conv1", "w");
    let b1 = manifest_tensor(&manifest, payload, "conv1", "b");
    let y = conv2d(&x, &w1, b1.data(), &ConvSpec::same(3, 1).unwrap()).unwrap();
    let a = relu(&y).unwrap();

    let head_names = ["head_q", "head_sin2t", "head_cos2t", "head_wn", "head_hn"];
    let mut manual = Tensor::zeros([1, 5, 9, 9]);
    for (ci, name) in head_names.iter().enumerate() {
        let w = manifest_tensor(&manifest, payload, name, "w");
        let b = manifest_tensor(&manifest, payload, name, "b");
        let out = conv2d(&a, &w, b.data(), &ConvSpec::same(1, 1).unwrap()).unwrap();
        manual.plane_mut(0, ci).copy_from_slice(out.plane(0, 0));
    }

    let raw = net.forward_raw(&x).unwrap();
    assert_eq!(raw.data(), manual.data(), "identity fold must be exact");
}
