//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Every check computes its reference independently of the code under
//! test (truth tables, direct chemistry composition, closed-form areas).

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nicknet::dataset::builtin_digits;
use nicknet_core::ann::{
    self, compare_modes, quantize_network, ChemistrySettings, Dataset, ExecutionMode, FloatNetwork,
    InferenceOptions, Layer, TrainConfig,
};
use nicknet_core::chem::{
    self, ActivationParams, ChemistryErrorModel, ChemistryMode, EnzymeDose, SolutionState,
};
use nicknet_core::device::{self, ExploreSettings, LayerPlan, NamedConfig, TimingConstants};
use nicknet_core::fluidics::{self, FaultPlan, LayerJob, Rule};
use nicknet_core::rng::{self, derive_seed};
use nicknet_core::stochastic::{bitstream_encode, bitstream_gate_apply, gate_eval, GateKind};
use nicknet_core::FractionalValue;
use rand::Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn frac(v: f64) -> FractionalValue {
    FractionalValue::new(v).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gate_algebra() -> Check {
    let mut r = rng::seeded(101);
    let mut worst = 0.0f64;
    for gate in GateKind::ALL {
        for _ in 0..1000 {
            let (x, y) = (r.random::<f64>(), r.random::<f64>());
            // Expectation of the truth table over independent Bernoulli inputs.
            let mut expect = 0.0;
            for a in [false, true] {
                for b in [false, true] {
                    let pa = if a { x } else { 1.0 - x };
                    let pb = if gate.arity() == 1 {
                        if b { 0.0 } else { 1.0 }
                    } else if b {
                        y
                    } else {
                        1.0 - y
                    };
                    if gate.truth(a, b) {
                        expect += pa * pb;
                    }
                }
            }
            let second = (gate.arity() == 2).then(|| frac(y));
            let got = gate_eval(gate, frac(x), second).map_err(|e| e.to_string())?.get();
            worst = worst.max((got - expect).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e} from truth tables"))?;

    let n = 100_000;
    let mut misses = 0;
    let mut runs = 0;
    for (g, gate) in GateKind::ALL.into_iter().enumerate() {
        for i in 0..10u64 {
            let (x, y) = (r.random::<f64>(), r.random::<f64>());
            let s1 = bitstream_encode(frac(x), n, derive_seed(7, &[g as u64, i, 0])).unwrap();
            let s2 = bitstream_encode(frac(y), n, derive_seed(7, &[g as u64, i, 1])).unwrap();
            let second = (gate.arity() == 2).then_some(&s2);
            let out = bitstream_gate_apply(gate, &s1, second).map_err(|e| e.to_string())?;
            let p = gate_eval(gate, frac(x), (gate.arity() == 2).then(|| frac(y))).unwrap().get();
            let bound = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
            runs += 1;
            if (out.mean() - p).abs() > bound.max(1e-12) {
                misses += 1;
            }
        }
    }
    ensure(misses == 0, || format!("{misses}/{runs} bitstream means outside 4 sigma"))?;
    Ok(format!("max truth-table deviation {worst:.1e}; {runs} bitstreams of 1e5 bits within 4 sigma"))
}

fn multiply(a: f64, b: f64, t: u64, mode: ChemistryMode, seed: u64) -> f64 {
    let s = chem::encode_fraction(frac(a), t, mode, seed).unwrap();
    let s = chem::nick_site_b(&s, &EnzymeDose::for_weight(frac(b), t, 1).unwrap(), 1).unwrap();
    chem::probe_readout(&s, &ChemistryErrorModel::IDEAL).fraction()
}

fn multiplication() -> Check {
    let mut r = rng::seeded(202);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (a, b) = (r.random::<f64>(), r.random::<f64>());
        worst = worst.max((multiply(a, b, 1_000_000, ChemistryMode::Ideal, 0) - a * b).abs());
    }
    ensure(worst <= 1e-12, || format!("ideal product off by {worst:e}"))?;

    let t = 1_000_000u64;
    let (a, b) = (0.6, 0.7);
    let ab = a * b;
    let bound = 4.0 * (ab * (1.0 - ab) / t as f64).sqrt();
    let within = (0..20u64)
        .filter(|&seed| (multiply(a, b, t, ChemistryMode::Sampled, seed) - ab).abs() <= bound)
        .count();
    ensure(within >= 19, || format!("only {within}/20 sampled runs within 4 sigma"))?;
    Ok(format!("ideal max error {worst:.1e} over 1000 pairs; sampled {within}/20 within 4 sigma at t=1e6"))
}

fn table_reproduction() -> Check {
    let rows = device::explore(&NamedConfig::standard_configs(), &[784, 784, 10], &ExploreSettings::default())
        .map_err(|e| e.to_string())?;
    let expected = [
        (553.19, 3.84, 0.01, 14.17, 4),
        (34.57, 0.24, 0.01, 38.6, 16),
        (3.69, 0.03, 0.01, 105.6, 49),
        (0.23, 0.002, 0.001, 404.6, 196),
    ];
    for (row, (pess, opt, tol_opt, hours, ser)) in rows.iter().zip(expected) {
        let name = &row.config_name;
        ensure((row.area_pessimistic_cm2 - pess).abs() <= 0.01, || {
            format!("{name} pessimistic area {}", row.area_pessimistic_cm2)
        })?;
        ensure((row.area_optimistic_cm2 - opt).abs() <= tol_opt, || {
            format!("{name} optimistic area {}", row.area_optimistic_cm2)
        })?;
        ensure((row.exec_time_per_layer_hr - hours).abs() <= 0.1, || {
            format!("{name} latency {} h", row.exec_time_per_layer_hr)
        })?;
        ensure(row.serialization_hidden == ser && row.serialization_input == ser, || {
            format!("{name} serialization {}", row.serialization_hidden)
        })?;
    }
    ensure(rows[3].serialization_output == 3, || {
        format!("Config-4 output serialization {}", rows[3].serialization_output)
    })?;
    let single = device::layer_latency(&LayerPlan::new(784, 784).unwrap(), &TimingConstants::DEFAULT);
    ensure((single - 8.07).abs() <= 0.01, || format!("784x784 single layer {single} h"))?;
    Ok("12 area/latency cells, serialization factors and the 8.07 h single layer match".into())
}

/// Neuron pre-activations by composing the chemistry directly.
fn chem_oracle(x: &[f64], w: &[f64], t: u64, mode: ChemistryMode, seed: u64) -> Vec<f64> {
    let k = x.len();
    w.chunks(k)
        .enumerate()
        .map(|(row, ws)| {
            let parts: Vec<SolutionState> = x
                .iter()
                .zip(ws)
                .enumerate()
                .map(|(col, (&xi, &wi))| {
                    let s = chem::encode_fraction(frac(xi), t, mode, derive_seed(seed, &[1, row as u64, col as u64]))
                        .unwrap();
                    chem::nick_site_b(&s, &EnzymeDose::for_weight(frac(wi), t, k).unwrap(), k).unwrap()
                })
                .collect();
            let merged = chem::merge_solutions(&parts).unwrap();
            chem::probe_readout(&merged, &ChemistryErrorModel::IDEAL).fraction()
        })
        .collect()
}

fn fluidics_job(k: usize, seed: u64, mode: ChemistryMode) -> (LayerJob, Vec<f64>, Vec<f64>) {
    let mut r = rng::seeded(seed);
    let x: Vec<f64> = (0..k).map(|_| r.random()).collect();
    let w: Vec<f64> = (0..k * k).map(|_| r.random()).collect();
    let acts = (0..k)
        .map(|_| ActivationParams::new(0.05 + 0.4 * r.random::<f64>()).unwrap())
        .collect();
    let mut job = LayerJob::new(
        x.iter().map(|&v| frac(v)).collect(),
        w.iter().map(|&v| frac(v)).collect(),
        acts,
        100_000,
        mode,
    );
    job.seed = seed;
    (job, x, w)
}

fn fluidics_protocol() -> Check {
    let faults = [
        (FaultPlan { skip_valve_step: Some((0, 0)), ..Default::default() }, &[Rule::MicrocellGrammar][..]),
        (
            FaultPlan { double_occupy: Some((0, 0)), ..Default::default() },
            &[Rule::MicrocellGrammar, Rule::MutualExclusion][..],
        ),
        (FaultPlan { merge_z_before_y: Some(0), ..Default::default() }, &[Rule::MergeGrammar][..]),
        (FaultPlan { skew_merge_arrival: Some(0), ..Default::default() }, &[Rule::MergeEqualArrival][..]),
        (FaultPlan { skip_pipeline_stage: Some(0), ..Default::default() }, &[Rule::PipelineGrammar][..]),
    ];
    let timing = TimingConstants::DEFAULT;
    let mut worst = 0.0f64;
    for k in [1usize, 2, 4, 8] {
        for mode in [ChemistryMode::Ideal, ChemistryMode::Sampled] {
            let (job, x, w) = fluidics_job(k, 30 + k as u64, mode);
            let run = fluidics::run_layer(&job, timing, FaultPlan::default()).map_err(|e| e.to_string())?;
            fluidics::validate(&run.events).map_err(|v| format!("k={k} {mode:?}: {v}"))?;
            let oracle = chem_oracle(&x, &w, job.molecules, mode, job.seed);
            for (a, b) in run.pre_activations().iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
            let again = fluidics::run_layer(&job, timing, FaultPlan::default()).unwrap();
            ensure(fluidics::render_trace(&run.events) == fluidics::render_trace(&again.events), || {
                format!("k={k} {mode:?}: traces differ between identical runs")
            })?;
        }
        let (job, _, _) = fluidics_job(k, 30 + k as u64, ChemistryMode::Ideal);
        for (plan, rules) in &faults {
            let run = fluidics::run_layer(&job, timing, *plan).map_err(|e| e.to_string())?;
            match fluidics::validate(&run.events) {
                Ok(_) => return Err(format!("k={k}: fault {plan:?} passed validation")),
                Err(v) if !rules.contains(&v.rule) => {
                    return Err(format!("k={k}: fault {plan:?} flagged as {}", v.rule.name()))
                }
                Err(_) => {}
            }
        }
    }
    ensure(worst <= 1e-12, || format!("payload differs from chemistry by {worst:e}"))?;
    Ok(format!(
        "k in {{1,2,4,8}} valid and deterministic, 5 faults caught each, payload deviation {worst:.1e}"
    ))
}

fn activation() -> Check {
    let mut r = rng::seeded(505);
    let err = ChemistryErrorModel::IDEAL;
    let eps = 1e-9;
    for _ in 0..100 {
        let theta = 0.01 + 0.98 * r.random::<f64>();
        let p = ActivationParams::new(theta).unwrap();
        for (x, fires) in [(0.0, false), (theta - eps, false), (theta, false), (theta + eps, true), (1.0, true)] {
            let y = chem::seesaw_activation(x, &p, &err).get();
            let want = if fires { p.output_cap } else { 0.0 };
            ensure(y == want, || format!("theta {theta}, x {x}: output {y}, expected {want}"))?;
            let twice = chem::seesaw_activation(y, &p, &err).get();
            ensure(twice == y, || format!("theta {theta}, x {x}: not idempotent ({y} then {twice})"))?;
        }
    }
    Ok("100 thresholds at 0, theta-eps, theta, theta+eps, 1; f(f(x)) = f(x)".into())
}

fn end_to_end() -> Check {
    let data = builtin_digits();
    let (train_set, held_out) = data.split(360, 0).map_err(|e| e.to_string())?;
    let net = ann::train(&train_set, &[64, 64, 10], &TrainConfig::default()).map_err(|e| e.to_string())?;
    let acc = ann::accuracy(&net, &held_out);
    ensure(net.min_weight() >= 0.0, || format!("negative weight {}", net.min_weight()))?;
    let spec = quantize_network(&net, 1.0).map_err(|e| e.to_string())?;
    ensure(spec.layers.iter().flat_map(|l| &l.weights).all(|&w| w >= 0.0), || {
        "negative weight after scaling".into()
    })?;
    let opts = InferenceOptions::default();
    let float_ideal = compare_modes(
        &spec,
        &held_out,
        &[ExecutionMode::FloatReference, ExecutionMode::IdealChemistry],
        &opts,
    )
    .map_err(|e| e.to_string())?;
    let chem_acc = float_ideal.accuracy[1];
    let fi = float_ideal.pairs[0].agreement;

    let first: Vec<usize> = (0..200).collect();
    let sub: Dataset = held_out.subset(&first);
    let ideal_sampled = compare_modes(
        &spec,
        &sub,
        &[
            ExecutionMode::IdealChemistry,
            ExecutionMode::SampledChemistry { molecules: 100_000, seed: 17 },
        ],
        &opts,
    )
    .map_err(|e| e.to_string())?;
    let is = ideal_sampled.pairs[0].agreement;

    ensure(acc >= 0.90, || format!("held-out accuracy {acc:.4}"))?;
    ensure(fi == 1.0, || format!("float vs ideal agreement {fi:.4}"))?;
    ensure(is >= 0.95, || format!("ideal vs sampled agreement {is:.4}"))?;
    Ok(format!(
        "held-out accuracy {acc:.4} (chemistry {chem_acc:.4}), float/ideal {fi:.4}, ideal/sampled(1e5) {is:.4}"
    ))
}

fn convergence_slope() -> Check {
    let mut r = rng::seeded(707);
    let k = 8;
    let layer = Layer {
        inputs: k,
        outputs: 4,
        weights: (0..k * 4).map(|_| r.random()).collect(),
        thresholds: vec![0.5; 4],
        scale: 1.0,
    };
    let x: Vec<f64> = (0..k).map(|_| r.random()).collect();
    let settings = ChemistrySettings::default();
    let ideal = ann::run_layer(&x, &layer, &ExecutionMode::IdealChemistry, &settings)
        .map_err(|e| e.to_string())?
        .pre_activations;
    let ts = [1e3f64, 1e4, 1e5, 1e6];
    let mut points = Vec::new();
    for &t in &ts {
        let mut sq = 0.0;
        let mut n = 0;
        for seed in 0..200u64 {
            let mode = ExecutionMode::SampledChemistry { molecules: t as u64, seed };
            let got = ann::run_layer(&x, &layer, &mode, &settings).map_err(|e| e.to_string())?;
            for (a, b) in got.pre_activations.iter().zip(&ideal) {
                sq += (a - b).powi(2);
                n += 1;
            }
        }
        points.push((t.ln(), (sq / n as f64).sqrt().ln()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    ensure((slope + 0.5).abs() <= 0.1, || format!("slope {slope:.4}"))?;
    Ok(format!("log-log slope {slope:.4} over t = 1e3..1e6"))
}

fn gradient_check() -> Check {
    let mut r = rng::seeded(808);
    let sizes = [6, 5, 3];
    let cfg = TrainConfig {
        surrogate_slope: 4.0,
        ..TrainConfig::default()
    };
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let inputs: Vec<f64> = (0..6 * 8).map(|_| r.random()).collect();
        let labels: Vec<u8> = (0..8).map(|_| r.random_range(0..3)).collect();
        let data = Dataset::new(6, inputs, labels).unwrap();
        let batch: Vec<usize> = (0..8).collect();
        let mut net = FloatNetwork::zeros(&sizes).unwrap();
        for w in net.weights.iter_mut().flatten() {
            *w = r.random::<f64>() * 0.5;
        }
        for t in net.thresholds.iter_mut().flatten() {
            *t = r.random::<f64>() * 1.5;
        }
        let (_, g) = net.loss_and_gradient(&data, &batch, &cfg).map_err(|e| e.to_string())?;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let loss = |p: &FloatNetwork| p.surrogate_loss(&data, &batch, &cfg).unwrap();
        for l in 0..net.depth() {
            for j in 0..net.weights[l].len() {
                let mut p = net.clone();
                p.weights[l][j] += h;
                let up = loss(&p);
                p.weights[l][j] -= 2.0 * h;
                numeric.push((up - loss(&p)) / (2.0 * h));
                analytic.push(g.weights[l][j]);
            }
            for j in 0..net.thresholds[l].len() {
                let mut p = net.clone();
                p.thresholds[l][j] += h;
                let up = loss(&p);
                p.thresholds[l][j] -= 2.0 * h;
                numeric.push((up - loss(&p)) / (2.0 * h));
                analytic.push(g.thresholds[l][j]);
            }
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1e-12));
    }
    ensure(worst <= 1e-4, || format!("relative gradient error {worst:e}"))?;
    Ok(format!("100 points, worst relative error {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("gate algebra", gate_algebra, Duration::from_secs(10)),
        ("multiplication", multiplication, Duration::from_secs(60)),
        ("device table", table_reproduction, Duration::from_secs(1)),
        ("fluidics protocol", fluidics_protocol, Duration::from_secs(30)),
        ("activation", activation, Duration::from_secs(5)),
        ("end-to-end digits", end_to_end, Duration::from_secs(600)),
        ("convergence slope", convergence_slope, Duration::from_secs(300)),
        ("gradient check", gradient_check, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = match result {
            Ok(msg) if took > budget => Err(format!("{msg}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(msg) => println!("PASS {name}: {msg} ({took:.2?})"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg} ({took:.2?})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
