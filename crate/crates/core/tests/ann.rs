use nicknet_core::ann::{
    self, compare_modes, infer, quantize_network, run_layer, surrogate, surrogate_derivative, ChemistrySettings,
    Dataset, ExecutionMode, FloatNetwork, InferenceOptions, Layer, NetworkSpec, Readout, TrainConfig,
};
use nicknet_core::chem::ChemistryMode;
use nicknet_core::device::{DeviceConfig, Geometry, TimingConstants};
use nicknet_core::rng;
use proptest::prelude::*;
use rand::Rng;

fn layer(weights: Vec<f64>, inputs: usize, outputs: usize, theta: f64) -> Layer {
    Layer {
        inputs,
        outputs,
        weights,
        thresholds: vec![theta; outputs],
        scale: 1.0,
    }
}

fn random_layer(r: &mut rng::Rng, k: usize, m: usize) -> Layer {
    Layer {
        inputs: k,
        outputs: m,
        weights: (0..k * m).map(|_| r.random::<f64>()).collect(),
        thresholds: (0..m).map(|_| 0.05 + 0.4 * r.random::<f64>()).collect(),
        scale: 1.0,
    }
}

const SETTINGS: ChemistrySettings = ChemistrySettings {
    err: nicknet_core::chem::ChemistryErrorModel::IDEAL,
    output_cap: 1.0,
    replenishment_excess: true,
    gain: 1e3,
};

#[test]
fn all_ones_layer_saturates() {
    let l = layer(vec![1.0; 9], 3, 3, 0.5);
    for mode in [ExecutionMode::FloatReference, ExecutionMode::IdealChemistry] {
        let out = run_layer(&[1.0; 3], &l, &mode, &SETTINGS).unwrap();
        assert!(out.pre_activations.iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert_eq!(out.outputs, vec![1.0; 3]);
    }
}

#[test]
fn unit_weights_average_the_inputs() {
    let l = layer(vec![1.0; 4], 4, 1, 0.5);
    let x = [0.2, 0.0, 0.4, 0.2];
    for mode in [
        ExecutionMode::FloatReference,
        ExecutionMode::IdealChemistry,
        ExecutionMode::FullFluidics {
            molecules: 1_000_000,
            seed: 0,
            chemistry: ChemistryMode::Ideal,
        },
    ] {
        let out = run_layer(&x, &l, &mode, &SETTINGS).unwrap();
        // (1/k) * sum x_j
        assert!((out.pre_activations[0] - 0.8 / 4.0).abs() < 1e-12, "{mode:?}");
    }
}

#[test]
fn shape_mismatch_is_an_argument_error() {
    let l = layer(vec![1.0; 4], 4, 1, 0.5);
    assert!(run_layer(&[0.5; 3], &l, &ExecutionMode::FloatReference, &SETTINGS).is_err());
}

#[test]
fn sampled_layer_stays_within_the_binomial_bound() {
    let mut r = rng::seeded(21);
    let l = random_layer(&mut r, 8, 8);
    let x: Vec<f64> = (0..8).map(|_| r.random()).collect();
    let t = 1_000_000;
    let ideal = run_layer(&x, &l, &ExecutionMode::IdealChemistry, &SETTINGS).unwrap();
    let sampled = run_layer(&x, &l, &ExecutionMode::SampledChemistry { molecules: t, seed: 4 }, &SETTINGS).unwrap();
    let bound = 4.0 * (0.25 / t as f64).sqrt();
    for (a, b) in ideal.pre_activations.iter().zip(&sampled.pre_activations) {
        assert!((a - b).abs() <= bound, "{a} vs {b}");
    }
}

#[test]
fn float_and_ideal_agree_on_random_networks() {
    let mut r = rng::seeded(5);
    let net = FloatNetwork {
        layer_sizes: vec![16, 16],
        weights: vec![(0..256).map(|_| r.random::<f64>() * 3.0).collect()],
        thresholds: vec![(0..16).map(|_| 4.0 + 8.0 * r.random::<f64>()).collect()],
    };
    let spec = quantize_network(&net, 1.0).unwrap();
    let opts = InferenceOptions::default();
    for _ in 0..100 {
        let x: Vec<f64> = (0..16).map(|_| r.random()).collect();
        let f = infer(&spec, &x, &ExecutionMode::FloatReference, &opts).unwrap();
        let i = infer(&spec, &x, &ExecutionMode::IdealChemistry, &opts).unwrap();
        assert_eq!(f.class, i.class);
        assert_eq!(f.outputs, i.outputs);
        for (a, b) in f.pre_activations[0].iter().zip(&i.pre_activations[0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // Scaling keeps every firing decision of the float network.
        let sums = &net.sums(&x)[0];
        for (s, (o, t)) in sums.iter().zip(f.outputs[0].iter().zip(&net.thresholds[0])) {
            assert_eq!(*o == 1.0, s > t);
        }
    }
}

#[test]
fn zero_image_is_class_zero() {
    let mut r = rng::seeded(6);
    let spec = NetworkSpec::new(vec![random_layer(&mut r, 8, 6), random_layer(&mut r, 6, 4)], 1.0).unwrap();
    for readout in [Readout::PreActivation, Readout::Step] {
        let opts = InferenceOptions {
            readout,
            ..Default::default()
        };
        let res = infer(&spec, &[0.0; 8], &ExecutionMode::IdealChemistry, &opts).unwrap();
        assert!(res.pre_activations.iter().flatten().all(|&p| p == 0.0));
        assert_eq!(res.class, 0);
    }
}

#[test]
fn latency_rows_follow_layer_sizes() {
    let spec = NetworkSpec::new(
        vec![layer(vec![0.5; 784 * 784], 784, 784, 0.5), layer(vec![0.5; 7840], 784, 10, 0.5)],
        1.0,
    )
    .unwrap();
    let opts = InferenceOptions {
        device: Some(DeviceConfig::new(196, Geometry::PESSIMISTIC, TimingConstants::DEFAULT).unwrap()),
        ..Default::default()
    };
    let res = infer(&spec, &vec![0.0; 784], &ExecutionMode::FloatReference, &opts).unwrap();
    let lat = res.latency_hours.unwrap();
    assert_eq!(lat.len(), 3);
    assert!((lat[1] - 14.17).abs() < 0.1);
}

#[test]
fn fluidics_inference_matches_ideal_and_validates() {
    let mut r = rng::seeded(8);
    let spec = NetworkSpec::new(vec![random_layer(&mut r, 4, 3), random_layer(&mut r, 3, 2)], 1.0).unwrap();
    let x = [0.9, 0.4, 0.7, 1.0];
    let opts = InferenceOptions::default();
    let ideal = infer(&spec, &x, &ExecutionMode::IdealChemistry, &opts).unwrap();
    let mode = ExecutionMode::FullFluidics {
        molecules: 100_000,
        seed: 1,
        chemistry: ChemistryMode::Ideal,
    };
    let fl = infer(&spec, &x, &mode, &opts).unwrap();
    assert_eq!(ideal.class, fl.class);
    for (a, b) in ideal.pre_activations.iter().flatten().zip(fl.pre_activations.iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
    let summary = nicknet_core::fluidics::validate(fl.events.as_ref().unwrap()).unwrap();
    assert_eq!(summary.layers, 2);
}

#[test]
fn compare_reports_every_pair() {
    let mut r = rng::seeded(10);
    let spec = NetworkSpec::new(vec![random_layer(&mut r, 6, 3)], 1.0).unwrap();
    let inputs: Vec<f64> = (0..60).map(|_| r.random()).collect();
    let data = Dataset::new(6, inputs, vec![0; 10]).unwrap();
    let modes = [
        ExecutionMode::FloatReference,
        ExecutionMode::IdealChemistry,
        ExecutionMode::SampledChemistry { molecules: 1000, seed: 1 },
    ];
    let rep = compare_modes(&spec, &data, &modes, &InferenceOptions::default()).unwrap();
    assert_eq!(rep.pairs.len(), 3);
    assert_eq!(rep.pairs[0].agreement, 1.0);
    assert!(rep.pairs[0].max_abs_diff[0] < 1e-12);
    assert_eq!(rep.pairs[2].mode_b, "sampled(t=1000,seed=1)");
    assert!(compare_modes(&spec, &data, &modes[..1], &InferenceOptions::default()).is_err());
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut r = rng::seeded(12);
    let sizes = [5, 4, 3];
    let cfg = TrainConfig {
        surrogate_slope: 4.0,
        ..TrainConfig::default()
    };
    let inputs: Vec<f64> = (0..40).map(|_| r.random()).collect();
    let data = Dataset::new(5, inputs, vec![0, 1, 2, 1, 0, 2, 1, 0]).unwrap();
    let batch: Vec<usize> = (0..8).collect();
    let mut net = FloatNetwork::zeros(&sizes).unwrap();
    for w in net.weights.iter_mut().flatten() {
        *w = r.random::<f64>() * 0.5;
    }
    for t in net.thresholds.iter_mut().flatten() {
        *t = r.random::<f64>();
    }
    let (_, g) = net.loss_and_gradient(&data, &batch, &cfg).unwrap();
    let h = 1e-6;
    for (l, gw) in g.weights.iter().enumerate() {
        for (j, &analytic) in gw.iter().enumerate() {
            let mut p = net.clone();
            p.weights[l][j] += h;
            let up = p.surrogate_loss(&data, &batch, &cfg).unwrap();
            p.weights[l][j] -= 2.0 * h;
            let down = p.surrogate_loss(&data, &batch, &cfg).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!((fd - analytic).abs() <= 1e-6 * fd.abs().max(1e-3), "w[{l}][{j}]: {analytic} vs {fd}");
        }
    }
    for (j, &analytic) in g.thresholds[0].iter().enumerate() {
        let mut p = net.clone();
        p.thresholds[0][j] += h;
        let up = p.surrogate_loss(&data, &batch, &cfg).unwrap();
        p.thresholds[0][j] -= 2.0 * h;
        let down = p.surrogate_loss(&data, &batch, &cfg).unwrap();
        let fd = (up - down) / (2.0 * h);
        assert!((fd - analytic).abs() <= 1e-6 * fd.abs().max(1e-3), "theta[{j}]: {analytic} vs {fd}");
    }
}

proptest! {
    #[test]
    fn surrogate_derivative_is_consistent(z in -2.0f64..2.0, theta in 0.0f64..1.0, slope in 1.0f64..20.0) {
        let h = 1e-4;
        // Difference whichever tail is near zero, so the subtraction does not cancel.
        let fd = if z < theta {
            (surrogate(z + h, theta, slope) - surrogate(z - h, theta, slope)) / (2.0 * h)
        } else {
            (surrogate(theta, z - h, slope) - surrogate(theta, z + h, slope)) / (2.0 * h)
        };
        let d = surrogate_derivative(z, theta, slope);
        prop_assert!((fd - d).abs() <= 1e-4 * d.abs().max(1e-9));
    }

    #[test]
    fn step_outputs_are_zero_or_cap(x in proptest::collection::vec(0.0f64..=1.0, 5), seed in 0u64..1000) {
        let mut r = rng::seeded(seed);
        let l = random_layer(&mut r, 5, 4);
        let settings = ChemistrySettings { output_cap: 0.8, ..SETTINGS };
        let out = run_layer(&x, &l, &ExecutionMode::IdealChemistry, &settings).unwrap();
        prop_assert!(out.outputs.iter().all(|&y| y == 0.0 || y == 0.8));
    }
}

#[test]
fn argmax_takes_the_first_maximum() {
    assert_eq!(ann::argmax(&[0.1, 0.3, 0.3]), 1);
    assert_eq!(ann::argmax(&[0.0, 0.0]), 0);
}
