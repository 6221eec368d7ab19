use alloc::string::String;
use alloc::vec::Vec;

use super::{infer, Dataset, ExecutionMode, InferenceOptions, NetworkSpec};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComparePair {
    pub mode_a: String,
    pub mode_b: String,
    pub samples: usize,
    /// Fraction of samples with the same predicted class.
    pub agreement: f64,
    /// Per layer, the largest pre-activation difference seen.
    pub max_abs_diff: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub modes: Vec<String>,
    /// Per mode, the fraction of samples classified correctly.
    pub accuracy: Vec<f64>,
    pub pairs: Vec<ComparePair>,
}

impl ExecutionMode {
    /// Name with the parameters that distinguish runs, e.g. `sampled(t=1000,seed=3)`.
    pub fn label(&self) -> String {
        match self {
            ExecutionMode::FloatReference | ExecutionMode::IdealChemistry => self.name().into(),
            ExecutionMode::SampledChemistry { molecules, seed } => {
                alloc::format!("sampled(t={molecules},seed={seed})")
            }
            ExecutionMode::FullFluidics { molecules, seed, chemistry } => {
                alloc::format!("fluidics(t={molecules},seed={seed},{chemistry:?})")
            }
        }
    }
}

/// Runs every sample under every mode and compares each pair of modes.
///
/// Sample `i` under a seeded mode uses a seed derived from the mode's seed
/// and `i`, so runs are reproducible and samples independent.
pub fn compare_modes(
    net: &NetworkSpec,
    data: &Dataset,
    modes: &[ExecutionMode],
    options: &InferenceOptions,
) -> Result<CompareReport> {
    if modes.len() < 2 {
        return Err(Error::arg("comparison needs at least two modes"));
    }
    if data.is_empty() {
        return Err(Error::arg("comparison needs at least one sample"));
    }
    let depth = net.layers.len();
    // runs[m][i] = (class, pre-activations)
    let mut runs = Vec::with_capacity(modes.len());
    let mut accuracy = Vec::with_capacity(modes.len());
    for mode in modes {
        let mut per = Vec::with_capacity(data.len());
        let mut correct = 0;
        for i in 0..data.len() {
            let m = match mode.seed() {
                Some(s) => mode.reseeded(derive_seed(s, &[i as u64])),
                None => *mode,
            };
            let r = infer(net, data.sample(i), &m, options)?;
            correct += usize::from(r.class == data.label(i));
            per.push((r.class, r.pre_activations));
        }
        accuracy.push(correct as f64 / data.len() as f64);
        runs.push(per);
    }

    let mut pairs = Vec::new();
    for a in 0..modes.len() {
        for b in a + 1..modes.len() {
            let mut agree = 0;
            let mut max_abs_diff = alloc::vec![0.0f64; depth];
            for (ra, rb) in runs[a].iter().zip(&runs[b]) {
                agree += usize::from(ra.0 == rb.0);
                for (l, (pa, pb)) in ra.1.iter().zip(&rb.1).enumerate() {
                    for (x, y) in pa.iter().zip(pb) {
                        max_abs_diff[l] = max_abs_diff[l].max((x - y).abs());
                    }
                }
            }
            pairs.push(ComparePair {
                mode_a: modes[a].label(),
                mode_b: modes[b].label(),
                samples: data.len(),
                agreement: agree as f64 / data.len() as f64,
                max_abs_diff,
            });
        }
    }
    Ok(CompareReport {
        modes: modes.iter().map(ExecutionMode::label).collect(),
        accuracy,
        pairs,
    })
}
