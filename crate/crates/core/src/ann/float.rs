use alloc::vec::Vec;

use super::{Layer, NetworkSpec};
use crate::{Error, Result};

/// Unscaled network as trained: neuron `i` of layer `l` fires when
/// `sum_j w_ij x_j > theta_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatNetwork {
    /// Input width followed by each layer's width.
    pub layer_sizes: Vec<usize>,
    /// Row-major `layer_sizes[l + 1] × layer_sizes[l]`.
    pub weights: Vec<Vec<f64>>,
    pub thresholds: Vec<Vec<f64>>,
}

impl FloatNetwork {
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::arg("need at least two positive layer sizes"));
        }
        let pairs = layer_sizes.windows(2);
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: pairs.clone().map(|p| alloc::vec![0.0; p[0] * p[1]]).collect(),
            thresholds: pairs.map(|p| alloc::vec![0.0; p[1]]).collect(),
        })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    fn check(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.thresholds.len() != n - 1 {
            return Err(Error::arg("layer_sizes, weights and thresholds disagree"));
        }
        for l in 0..n - 1 {
            let (k, m) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if self.weights[l].len() != k * m || self.thresholds[l].len() != m {
                return Err(Error::arg(alloc::format!("layer {l} has the wrong shape")));
            }
        }
        Ok(())
    }
}

/// Scales a float network into `[0, 1]` weights and `(0, 1)` thresholds.
///
/// Layer `l` is divided by its largest weight `s_l`. A neuron sees
/// `(1/k) * sum (x / s_x)(w / s_l)`, which is the float sum divided by
/// `k * s_l * s_x`, so the threshold is divided by the same amount and
/// every firing decision is preserved. Hidden outputs are step values in
/// `[0, 1]`, so only the first layer's inputs carry a scale.
pub fn quantize_network(net: &FloatNetwork, input_scale: f64) -> Result<NetworkSpec> {
    quantize(net, input_scale, false)
}

/// As [`quantize_network`], but an all-zero layer gets scale 1 instead of
/// an error.
pub fn quantize_network_with_fallback(net: &FloatNetwork, input_scale: f64) -> Result<NetworkSpec> {
    quantize(net, input_scale, true)
}

fn quantize(net: &FloatNetwork, input_scale: f64, fallback: bool) -> Result<NetworkSpec> {
    net.check()?;
    if !(input_scale > 0.0) || !input_scale.is_finite() {
        return Err(Error::OutOfRange {
            what: "input_scale",
            value: input_scale,
            range: "(0, inf)",
        });
    }
    let mut layers = Vec::with_capacity(net.depth());
    for l in 0..net.depth() {
        let (k, m) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
        let w = &net.weights[l];
        if let Some(bad) = w.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Constraint(alloc::format!(
                "layer {l} has weight {bad}; weights must be finite and nonnegative"
            )));
        }
        let max = w.iter().copied().fold(0.0, f64::max);
        let scale = if max > 0.0 {
            max
        } else if fallback {
            1.0
        } else {
            return Err(Error::Quantization {
                layer: l,
                reason: "all weights are zero, so the scale is undefined".into(),
            });
        };
        let sx = if l == 0 { input_scale } else { 1.0 };
        let denom = k as f64 * scale * sx;
        let mut thresholds = Vec::with_capacity(m);
        for (i, &t) in net.thresholds[l].iter().enumerate() {
            let q = t / denom;
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Quantization {
                    layer: l,
                    reason: alloc::format!("neuron {i} threshold {t} scales to {q}, outside (0, 1)"),
                });
            }
            thresholds.push(q);
        }
        layers.push(Layer {
            inputs: k,
            outputs: m,
            weights: w.iter().map(|v| (v / scale).min(1.0)).collect(),
            thresholds,
            scale,
        });
    }
    NetworkSpec::new(layers, input_scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(weights: Vec<f64>, k: usize, m: usize, theta: f64) -> FloatNetwork {
        FloatNetwork {
            layer_sizes: alloc::vec![k, m],
            weights: alloc::vec![weights],
            thresholds: alloc::vec![alloc::vec![theta; m]],
        }
    }

    #[test]
    fn equal_weights_normalize_to_one() {
        // k = 4, s = 0.5: theta_chem = theta / (4 * 0.5) = 0.5.
        let spec = quantize_network(&single(alloc::vec![0.5; 8], 4, 2, 1.0), 1.0).unwrap();
        let l = &spec.layers[0];
        assert_eq!(l.scale, 0.5);
        assert!(l.weights.iter().all(|&w| w == 1.0));
        assert_eq!(l.thresholds, alloc::vec![0.5, 0.5]);
    }

    #[test]
    fn zero_matrix_needs_the_fallback() {
        let net = single(alloc::vec![0.0; 4], 2, 2, 0.5);
        assert!(matches!(quantize_network(&net, 1.0), Err(Error::Quantization { layer: 0, .. })));
        let spec = quantize_network_with_fallback(&net, 1.0).unwrap();
        assert_eq!(spec.layers[0].scale, 1.0);
        assert_eq!(spec.layers[0].thresholds, alloc::vec![0.25, 0.25]);
    }

    #[test]
    fn negative_weight_is_a_constraint_error() {
        let net = single(alloc::vec![0.5, -0.1, 0.2, 0.3], 2, 2, 0.1);
        assert!(matches!(quantize_network(&net, 1.0), Err(Error::Constraint(_))));
    }

    #[test]
    fn unreachable_threshold_is_a_quantization_error() {
        let net = single(alloc::vec![0.5; 4], 2, 2, 1.0);
        assert!(matches!(quantize_network(&net, 1.0), Err(Error::Quantization { .. })));
    }
}
