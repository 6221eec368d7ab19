use alloc::vec::Vec;

use super::{Droplet, Event, FaultPlan, MicrocellArray, Payload, PipelineOutput, PipelineParams};
use crate::chem::{self, ActivationParams, ChemistryErrorModel, ChemistryMode, EnzymeDose};
use crate::device::TimingConstants;
use crate::rng::derive_seed;
use crate::{Error, FractionalValue, Result};

/// One neural-network layer to run on a `rows × cols` array.
///
/// Row `r` computes neuron `r`; column `c` carries input `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerJob {
    pub inputs: Vec<FractionalValue>,
    /// Row-major, `rows * inputs.len()` entries.
    pub weights: Vec<FractionalValue>,
    /// One per row.
    pub activations: Vec<ActivationParams>,
    pub molecules: u64,
    pub mode: ChemistryMode,
    pub err: ChemistryErrorModel,
    pub seed: u64,
    /// Droplets each output is pinched into for the next layer.
    pub fanout: usize,
    /// Layer index written to the `layer_begin` record.
    pub layer: usize,
    pub start_s: f64,
    pub first_droplet_id: u64,
}

impl LayerJob {
    pub fn new(
        inputs: Vec<FractionalValue>,
        weights: Vec<FractionalValue>,
        activations: Vec<ActivationParams>,
        molecules: u64,
        mode: ChemistryMode,
    ) -> Self {
        let fanout = activations.len().max(1);
        Self {
            inputs,
            weights,
            activations,
            molecules,
            mode,
            err: ChemistryErrorModel::IDEAL,
            seed: 0,
            fanout,
            layer: 0,
            start_s: 0.0,
            first_droplet_id: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.activations.len()
    }

    pub fn cols(&self) -> usize {
        self.inputs.len()
    }

    fn check(&self) -> Result<()> {
        if self.rows() == 0 || self.cols() == 0 {
            return Err(Error::arg("a layer needs at least one input and one neuron"));
        }
        if self.weights.len() != self.rows() * self.cols() {
            return Err(Error::LengthMismatch {
                left: self.weights.len(),
                right: self.rows() * self.cols(),
            });
        }
        if self.molecules == 0 {
            return Err(Error::arg("molecules must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn dna_seed(&self, row: usize, col: usize) -> u64 {
        derive_seed(self.seed, &[1, row as u64, col as u64])
    }

    pub(crate) fn pipeline_params(&self) -> PipelineParams {
        PipelineParams {
            err: self.err,
            fresh_total: self.molecules,
            mode: self.mode,
            seed: derive_seed(self.seed, &[3]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRun {
    pub outputs: Vec<PipelineOutput>,
    /// Per row, the droplets handed to the next layer.
    pub separated: Vec<Vec<Droplet>>,
    pub events: Vec<Event>,
    pub end_s: f64,
    pub next_droplet_id: u64,
}

impl LayerRun {
    pub fn pre_activations(&self) -> Vec<f64> {
        self.outputs.iter().map(|o| o.pre_activation).collect()
    }

    pub fn output_values(&self) -> Vec<FractionalValue> {
        self.outputs.iter().map(|o| o.output).collect()
    }
}

/// Load, mix, merge, pipeline and separate one full layer.
pub fn run_layer(job: &LayerJob, timing: TimingConstants, faults: FaultPlan) -> Result<LayerRun> {
    job.check()?;
    let (rows, cols) = (job.rows(), job.cols());
    let mut array = MicrocellArray::with_fanout(rows, cols, job.fanout, timing)?
        .resume(job.start_s, job.first_droplet_id)
        .with_faults(faults);
    array.begin_layer(job.layer);

    let mut dna = Vec::with_capacity(rows * cols);
    let mut enzymes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let state = chem::encode_fraction(job.inputs[c], job.molecules, job.mode, job.dna_seed(r, c))?;
            dna.push(array.new_droplet(Payload::Dna(state)));
        }
    }
    for w in &job.weights {
        let dose = EnzymeDose::for_weight(*w, job.molecules, cols)?;
        enzymes.push(array.new_droplet(Payload::Enzyme(dose)));
    }

    array.load_array(dna, enzymes)?;
    array.release_and_mix()?;
    array.merge_rows()?;
    let outputs = array.run_pipelines(&job.activations, &job.pipeline_params())?;
    let separated = array.separate_all(job.fanout, derive_seed(job.seed, &[4]))?;
    let end_s = array.clock();
    let next_droplet_id = array.next_droplet_id();
    Ok(LayerRun {
        outputs,
        separated,
        events: array.into_events(),
        end_s,
        next_droplet_id,
    })
}
