//! Feedforward networks with nonnegative weights, run on the chemistry.
//!
//! A layer with `k` inputs computes, per neuron `i`, the merged-droplet
//! fraction `(1/k) * sum_j x_j * w_ij` and thresholds it with the seesaw
//! step. Weights and thresholds live in a [`NetworkSpec`] already scaled
//! into `[0, 1]`; [`quantize_network`] produces one from a trained
//! [`FloatNetwork`].

use alloc::vec::Vec;

use crate::chem::{self, ActivationParams, ChemistryErrorModel, ChemistryMode, EnzymeDose};
use crate::device::{self, DeviceConfig};
use crate::fluidics::{self, Event, FaultPlan, LayerJob};
use crate::rng::derive_seed;
use crate::{Error, FractionalValue, Result};

mod compare;
mod float;
mod train;

pub use compare::{compare_modes, ComparePair, CompareReport};
pub use float::{quantize_network, quantize_network_with_fallback, FloatNetwork};
pub use train::{accuracy, surrogate, surrogate_derivative, train, Dataset, Gradient, TrainConfig};

/// Molecules per droplet used by [`ExecutionMode::IdealChemistry`]. Ideal
/// fractions do not depend on it beyond rounding.
pub const IDEAL_MOLECULES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`, each in `[0, 1]`.
    pub weights: Vec<f64>,
    /// One per neuron, each in `(0, 1)`.
    pub thresholds: Vec<f64>,
    /// Max float weight the stored weights were divided by.
    pub scale: f64,
}

impl Layer {
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.weights[row * self.inputs..(row + 1) * self.inputs]
    }

    fn check(&self, index: usize) -> Result<()> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(Error::arg(alloc::format!("layer {index} has a zero dimension")));
        }
        if self.weights.len() != self.inputs * self.outputs {
            return Err(Error::LengthMismatch {
                left: self.weights.len(),
                right: self.inputs * self.outputs,
            });
        }
        if self.thresholds.len() != self.outputs {
            return Err(Error::LengthMismatch {
                left: self.thresholds.len(),
                right: self.outputs,
            });
        }
        if let Some(w) = self.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::OutOfRange {
                what: "weight",
                value: *w,
                range: "[0, 1]",
            });
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::OutOfRange {
                what: "threshold",
                value: *t,
                range: "(0, 1)",
            });
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::OutOfRange {
                what: "scale",
                value: self.scale,
                range: "(0, inf)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<Layer>,
    /// Scale the raw inputs were divided by.
    pub input_scale: f64,
}

impl NetworkSpec {
    pub fn new(layers: Vec<Layer>, input_scale: f64) -> Result<Self> {
        let spec = Self { layers, input_scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::arg("a network needs at least one layer"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.check(i)?;
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::arg(alloc::format!(
                    "layer {i} expects {} inputs but layer {} has {} outputs",
                    l.inputs,
                    i - 1,
                    self.layers[i - 1].outputs
                )));
            }
        }
        if !(self.input_scale > 0.0) || !self.input_scale.is_finite() {
            return Err(Error::OutOfRange {
                what: "input_scale",
                value: self.input_scale,
                range: "(0, inf)",
            });
        }
        Ok(())
    }

    /// Input width followed by each layer's width, e.g. `[64, 64, 10]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.layers.len() + 1);
        sizes.push(self.layers[0].inputs);
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }
}

/// Chemistry parameters shared by every neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChemistrySettings {
    pub err: ChemistryErrorModel,
    pub output_cap: f64,
    pub replenishment_excess: bool,
    pub gain: f64,
}

impl Default for ChemistrySettings {
    fn default() -> Self {
        Self {
            err: ChemistryErrorModel::IDEAL,
            output_cap: 1.0,
            replenishment_excess: true,
            gain: ActivationParams::DEFAULT_GAIN,
        }
    }
}

impl ChemistrySettings {
    fn activation(&self, threshold: f64) -> Result<ActivationParams> {
        ActivationParams {
            threshold,
            output_cap: self.output_cap,
            replenishment_excess: self.replenishment_excess,
            gain: self.gain,
        }
        .validated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExecutionMode {
    /// The layer algebra in plain floating point.
    FloatReference,
    /// Exact fractions through the chemistry functions.
    IdealChemistry,
    /// Every product drawn with `molecules` molecules per droplet.
    SampledChemistry { molecules: u64, seed: u64 },
    /// Each layer run on the simulated microcell array.
    FullFluidics { molecules: u64, seed: u64, chemistry: ChemistryMode },
}

impl ExecutionMode {
    pub fn name(&self) -> &'static str {
        match self {
            ExecutionMode::FloatReference => "float",
            ExecutionMode::IdealChemistry => "ideal",
            ExecutionMode::SampledChemistry { .. } => "sampled",
            ExecutionMode::FullFluidics { .. } => "fluidics",
        }
    }

    /// The same mode with its seed replaced, for per-sample runs.
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            ExecutionMode::SampledChemistry { molecules, .. } => ExecutionMode::SampledChemistry { molecules, seed },
            ExecutionMode::FullFluidics { molecules, chemistry, .. } => ExecutionMode::FullFluidics {
                molecules,
                seed,
                chemistry,
            },
            m => m,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ExecutionMode::SampledChemistry { seed, .. } | ExecutionMode::FullFluidics { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            ExecutionMode::SampledChemistry { molecules: 0, .. } | ExecutionMode::FullFluidics { molecules: 0, .. } => {
                Err(Error::arg("molecules must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

/// How the output layer is turned into a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// Argmax of the output layer's merged fractions.
    #[default]
    PreActivation,
    /// Argmax of the output layer's step outputs.
    Step,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    pub pre_activations: Vec<f64>,
    /// Seesaw outputs.
    pub outputs: Vec<f64>,
    /// Site A fractions of the freshly nicked droplets passed on.
    pub next_inputs: Vec<f64>,
}

fn check_inputs(inputs: &[f64], layer: &Layer) -> Result<()> {
    if inputs.len() != layer.inputs {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: layer.inputs,
        });
    }
    if let Some(x) = inputs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutOfRange {
            what: "input",
            value: *x,
            range: "[0, 1]",
        });
    }
    Ok(())
}

fn float_layer(inputs: &[f64], layer: &Layer, settings: &ChemistrySettings) -> Result<LayerOutput> {
    let k = layer.inputs as f64;
    let mut out = LayerOutput {
        pre_activations: Vec::with_capacity(layer.outputs),
        outputs: Vec::with_capacity(layer.outputs),
        next_inputs: Vec::with_capacity(layer.outputs),
    };
    for i in 0..layer.outputs {
        let pre = layer.row(i).iter().zip(inputs).map(|(w, x)| w * x).sum::<f64>() / k;
        let act = settings.activation(layer.thresholds[i])?;
        let y = chem::seesaw_activation(pre, &act, &ChemistryErrorModel::IDEAL).get();
        out.pre_activations.push(pre);
        out.outputs.push(y);
        out.next_inputs.push(y);
    }
    Ok(out)
}

fn chem_layer(
    inputs: &[f64],
    layer: &Layer,
    settings: &ChemistrySettings,
    mode: ChemistryMode,
    molecules: u64,
    seed: u64,
) -> Result<LayerOutput> {
    let k = layer.inputs;
    let mut out = LayerOutput {
        pre_activations: Vec::with_capacity(layer.outputs),
        outputs: Vec::with_capacity(layer.outputs),
        next_inputs: Vec::with_capacity(layer.outputs),
    };
    let xs: Vec<FractionalValue> = inputs.iter().map(|&x| FractionalValue::saturating(x)).collect();
    let mut states = Vec::with_capacity(k);
    for i in 0..layer.outputs {
        states.clear();
        for (j, x) in xs.iter().enumerate() {
            let s = chem::encode_fraction(*x, molecules, mode, derive_seed(seed, &[i as u64, j as u64]))?;
            let dose = EnzymeDose::for_weight(FractionalValue::saturating(layer.weight(i, j)), molecules, k)?;
            states.push(chem::nick_site_b(&s, &dose, k)?);
        }
        let merged = chem::merge_solutions(&states)?;
        let pool = chem::probe_readout(&merged, &settings.err);
        let pre = pool.fraction();
        let y = chem::seesaw_activation(pre, &settings.activation(layer.thresholds[i])?, &settings.err);
        let dose = chem::translate_to_enzyme(y, pool.reference_total, &settings.err);
        let fresh = chem::nick_fresh_site_a(
            &dose,
            pool.reference_total,
            molecules,
            mode,
            derive_seed(seed, &[i as u64, u64::MAX]),
        )?;
        out.pre_activations.push(pre);
        out.outputs.push(y.get());
        out.next_inputs.push(fresh.site_a());
    }
    Ok(out)
}

struct FluidicsState {
    clock: f64,
    next_id: u64,
    events: Vec<Event>,
}

#[allow(clippy::too_many_arguments)]
fn fluidics_layer(
    inputs: &[f64],
    layer: &Layer,
    settings: &ChemistrySettings,
    chemistry: ChemistryMode,
    molecules: u64,
    seed: u64,
    index: usize,
    fanout: usize,
    state: &mut FluidicsState,
) -> Result<LayerOutput> {
    let activations = layer
        .thresholds
        .iter()
        .map(|&t| settings.activation(t))
        .collect::<Result<Vec<_>>>()?;
    let mut job = LayerJob::new(
        inputs.iter().map(|&x| FractionalValue::saturating(x)).collect(),
        layer.weights.iter().map(|&w| FractionalValue::saturating(w)).collect(),
        activations,
        molecules,
        chemistry,
    );
    job.err = settings.err;
    job.seed = seed;
    job.fanout = fanout;
    job.layer = index;
    job.start_s = state.clock;
    job.first_droplet_id = state.next_id;
    let run = fluidics::run_layer(&job, device::TimingConstants::DEFAULT, FaultPlan::default())?;
    state.clock = run.end_s;
    state.next_id = run.next_droplet_id;
    let next_inputs = run
        .outputs
        .iter()
        .map(|o| o.droplet.payload.as_dna().map_or(0.0, |s| s.site_a()))
        .collect();
    let out = LayerOutput {
        pre_activations: run.pre_activations(),
        outputs: run.output_values().iter().map(|v| v.get()).collect(),
        next_inputs,
    };
    state.events.extend(run.events);
    Ok(out)
}

/// Runs one layer on its own.
pub fn run_layer(inputs: &[f64], layer: &Layer, mode: &ExecutionMode, settings: &ChemistrySettings) -> Result<LayerOutput> {
    layer.check(0)?;
    mode.check()?;
    check_inputs(inputs, layer)?;
    match *mode {
        ExecutionMode::FloatReference => float_layer(inputs, layer, settings),
        ExecutionMode::IdealChemistry => {
            chem_layer(inputs, layer, settings, ChemistryMode::Ideal, IDEAL_MOLECULES, 0)
        }
        ExecutionMode::SampledChemistry { molecules, seed } => {
            chem_layer(inputs, layer, settings, ChemistryMode::Sampled, molecules, seed)
        }
        ExecutionMode::FullFluidics { molecules, seed, chemistry } => {
            let mut state = FluidicsState {
                clock: 0.0,
                next_id: 0,
                events: Vec::new(),
            };
            fluidics_layer(inputs, layer, settings, chemistry, molecules, seed, 0, 1, &mut state)
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct InferenceOptions {
    pub chemistry: ChemistrySettings,
    pub readout: Readout,
    /// When set, per-layer latency is computed for this device.
    pub device: Option<DeviceConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub pre_activations: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// Argmax of the readout vector; ties go to the lowest index.
    pub class: usize,
    /// Hours per entry of `layer_sizes`, when a device was given.
    pub latency_hours: Option<Vec<f64>>,
    /// Full event trace in fluidics mode.
    pub events: Option<Vec<Event>>,
}

impl InferenceResult {
    pub fn readout(&self, readout: Readout) -> &[f64] {
        match readout {
            Readout::PreActivation => self.pre_activations.last().expect("at least one layer"),
            Readout::Step => self.outputs.last().expect("at least one layer"),
        }
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Runs the whole network on one input vector.
pub fn infer(net: &NetworkSpec, input: &[f64], mode: &ExecutionMode, options: &InferenceOptions) -> Result<InferenceResult> {
    net.validate()?;
    mode.check()?;
    check_inputs(input, &net.layers[0])?;
    let settings = &options.chemistry;
    let mut x: Vec<f64> = input.to_vec();
    let mut pre_activations = Vec::with_capacity(net.layers.len());
    let mut outputs = Vec::with_capacity(net.layers.len());
    let mut fl = FluidicsState {
        clock: 0.0,
        next_id: 0,
        events: Vec::new(),
    };
    for (l, layer) in net.layers.iter().enumerate() {
        let out = match *mode {
            ExecutionMode::FloatReference => float_layer(&x, layer, settings)?,
            ExecutionMode::IdealChemistry => chem_layer(&x, layer, settings, ChemistryMode::Ideal, IDEAL_MOLECULES, 0)?,
            ExecutionMode::SampledChemistry { molecules, seed } => chem_layer(
                &x,
                layer,
                settings,
                ChemistryMode::Sampled,
                molecules,
                derive_seed(seed, &[l as u64]),
            )?,
            ExecutionMode::FullFluidics { molecules, seed, chemistry } => {
                let fanout = net.layers.get(l + 1).map_or(1, |n| n.outputs);
                fluidics_layer(
                    &x,
                    layer,
                    settings,
                    chemistry,
                    molecules,
                    derive_seed(seed, &[l as u64]),
                    l,
                    fanout,
                    &mut fl,
                )?
            }
        };
        x = out.next_inputs;
        pre_activations.push(out.pre_activations);
        outputs.push(out.outputs);
    }
    let last = match options.readout {
        Readout::PreActivation => pre_activations.last(),
        Readout::Step => outputs.last(),
    };
    let class = argmax(last.expect("at least one layer"));
    let latency_hours = match &options.device {
        Some(cfg) => Some(device::network_latency(&net.layer_sizes(), cfg)?),
        None => None,
    };
    let events = matches!(mode, ExecutionMode::FullFluidics { .. }).then_some(fl.events);
    Ok(InferenceResult {
        pre_activations,
        outputs,
        class,
        latency_hours,
        events,
    })
}
