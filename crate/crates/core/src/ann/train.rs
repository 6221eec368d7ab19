//! Projected mini-batch gradient descent for the float network.
//!
//! Hidden neurons use a steep sigmoid around their threshold in place of the
//! step. The last layer's raw sums go through a softmax cross-entropy. After
//! every update weights are clipped at zero and thresholds at a small
//! positive floor.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{argmax, FloatNetwork};
use crate::rng;
use crate::{Error, Result};

/// Labelled samples, inputs in `[0, 1]`, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(dim: usize, inputs: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("sample dimension must be positive"));
        }
        if inputs.len() != dim * labels.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: dim * labels.len(),
            });
        }
        if let Some(x) = inputs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::arg(alloc::format!("input value {x} is not normalized to [0, 1]")));
        }
        Ok(Self { dim, inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            inputs.extend_from_slice(self.sample(i));
        }
        Self {
            dim: self.dim,
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Seeded shuffle, then the last `holdout` samples become the second set.
    pub fn split(&self, holdout: usize, seed: u64) -> Result<(Self, Self)> {
        if holdout >= self.len() {
            return Err(Error::arg(alloc::format!(
                "cannot hold out {holdout} of {} samples",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng::seeded(seed));
        let cut = self.len() - holdout;
        Ok((self.subset(&order[..cut]), self.subset(&order[cut..])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate multiplier applied after every epoch.
    pub lr_decay: f64,
    /// Slope of the sigmoid standing in for the step.
    pub surrogate_slope: f64,
    /// Multiplier on the output sums before the softmax.
    pub logit_scale: f64,
    /// Initial weights are uniform on `[0, init_max)`.
    pub init_max: f64,
    /// Initial hidden threshold as a fraction of the neuron's weight sum.
    pub threshold_init: f64,
    pub min_threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 0.1,
            lr_decay: 0.97,
            surrogate_slope: 10.0,
            logit_scale: 5.0,
            init_max: 0.2,
            threshold_init: 0.3,
            min_threshold: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validated(self) -> Result<Self> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("lr_decay", self.lr_decay),
            ("surrogate_slope", self.surrogate_slope),
            ("logit_scale", self.logit_scale),
            ("init_max", self.init_max),
            ("min_threshold", self.min_threshold),
        ];
        for (what, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::OutOfRange {
                    what,
                    value: v,
                    range: "(0, inf)",
                });
            }
        }
        if !(0.0..=1.0).contains(&self.threshold_init) {
            return Err(Error::OutOfRange {
                what: "threshold_init",
                value: self.threshold_init,
                range: "[0, 1]",
            });
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch_size must be at least 1"));
        }
        Ok(self)
    }
}

/// Steep sigmoid standing in for `z > theta`.
pub fn surrogate(z: f64, theta: f64, slope: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-slope * (z - theta)))
}

/// Derivative of [`surrogate`] with respect to `z`.
pub fn surrogate_derivative(z: f64, theta: f64, slope: f64) -> f64 {
    // s(1 - s) = e / (1 + e)^2 with e = exp(-|u|), which keeps the tails exact.
    let e = libm::exp(-libm::fabs(slope * (z - theta)));
    slope * e / ((1.0 + e) * (1.0 + e))
}

/// Same shape as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub thresholds: Vec<Vec<f64>>,
}

fn matvec(w: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(w.chunks_exact(x.len()).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()));
}

impl FloatNetwork {
    /// Layer sums with hard steps in the hidden layers.
    pub fn sums(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut a = x.to_vec();
        let mut out = Vec::with_capacity(self.depth());
        for l in 0..self.depth() {
            let mut z = Vec::new();
            matvec(&self.weights[l], &a, &mut z);
            a = z
                .iter()
                .zip(&self.thresholds[l])
                .map(|(z, t)| if z > t { 1.0 } else { 0.0 })
                .collect();
            out.push(z);
        }
        out
    }

    /// Class from the last layer's sums, ties to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(self.sums(x).last().expect("at least one layer"))
    }

    fn forward_smooth(&self, x: &[f64], slope: f64, zs: &mut Vec<Vec<f64>>, acts: &mut Vec<Vec<f64>>) {
        zs.clear();
        acts.clear();
        acts.push(x.to_vec());
        let last = self.depth() - 1;
        for l in 0..self.depth() {
            let mut z = Vec::new();
            matvec(&self.weights[l], acts.last().expect("pushed"), &mut z);
            if l < last {
                acts.push(
                    z.iter()
                        .zip(&self.thresholds[l])
                        .map(|(&z, &t)| surrogate(z, t, slope))
                        .collect(),
                );
            }
            zs.push(z);
        }
    }

    fn check_batch(&self, data: &Dataset, batch: &[usize]) -> Result<()> {
        if data.dim != self.layer_sizes[0] {
            return Err(Error::LengthMismatch {
                left: data.dim,
                right: self.layer_sizes[0],
            });
        }
        if data.classes() > *self.layer_sizes.last().expect("checked") {
            return Err(Error::arg("more classes than output neurons"));
        }
        if batch.is_empty() || batch.iter().any(|&i| i >= data.len()) {
            return Err(Error::arg("batch indices are empty or out of range"));
        }
        Ok(())
    }

    /// Mean surrogate cross-entropy over `batch`.
    pub fn surrogate_loss(&self, data: &Dataset, batch: &[usize], cfg: &TrainConfig) -> Result<f64> {
        Ok(self.loss_and_gradient(data, batch, cfg)?.0)
    }

    /// Mean surrogate cross-entropy over `batch` and its gradient.
    pub fn loss_and_gradient(&self, data: &Dataset, batch: &[usize], cfg: &TrainConfig) -> Result<(f64, Gradient)> {
        self.check_batch(data, batch)?;
        let depth = self.depth();
        let mut grad = Gradient {
            weights: self.weights.iter().map(|w| alloc::vec![0.0; w.len()]).collect(),
            thresholds: self.thresholds.iter().map(|t| alloc::vec![0.0; t.len()]).collect(),
        };
        let (mut zs, mut acts) = (Vec::new(), Vec::new());
        let mut loss = 0.0;
        let n = batch.len() as f64;
        for &i in batch {
            self.forward_smooth(data.sample(i), cfg.surrogate_slope, &mut zs, &mut acts);
            let label = data.label(i);

            let logits: Vec<f64> = zs[depth - 1].iter().map(|z| cfg.logit_scale * z).collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
            let sum: f64 = exps.iter().sum();
            loss += (max + libm::log(sum) - logits[label]) / n;

            // d loss / d z for the current layer.
            let mut dz: Vec<f64> = exps
                .iter()
                .enumerate()
                .map(|(j, e)| cfg.logit_scale * (e / sum - f64::from(j == label)) / n)
                .collect();
            for l in (0..depth).rev() {
                let a = &acts[l];
                let k = a.len();
                let gw = &mut grad.weights[l];
                for (row, d) in dz.iter().enumerate() {
                    if *d != 0.0 {
                        for (g, x) in gw[row * k..(row + 1) * k].iter_mut().zip(a) {
                            *g += d * x;
                        }
                    }
                }
                if l == 0 {
                    break;
                }
                // Back through the weights, then through the previous layer's surrogate.
                let w = &self.weights[l];
                let mut da = alloc::vec![0.0; k];
                for (row, d) in dz.iter().enumerate() {
                    for (acc, wv) in da.iter_mut().zip(&w[row * k..(row + 1) * k]) {
                        *acc += d * wv;
                    }
                }
                let (zp, tp) = (&zs[l - 1], &self.thresholds[l - 1]);
                dz = (0..k)
                    .map(|j| da[j] * surrogate_derivative(zp[j], tp[j], cfg.surrogate_slope))
                    .collect();
                for (g, d) in grad.thresholds[l - 1].iter_mut().zip(&dz) {
                    *g -= d;
                }
            }
        }
        Ok((loss, grad))
    }

    fn project(&mut self, min_threshold: f64) {
        for w in self.weights.iter_mut().flatten() {
            *w = w.max(0.0);
        }
        let last = self.depth() - 1;
        for t in self.thresholds[..last].iter_mut().flatten() {
            *t = t.max(min_threshold);
        }
    }

    /// Makes every threshold representable after scaling.
    ///
    /// A hidden neuron whose threshold is at or above its weight sum can never
    /// fire on inputs in `[0, 1]`; its threshold is pulled down to that sum so
    /// the scaled value stays below 1. Output thresholds are set to half the
    /// largest reachable sum.
    fn finalize(&mut self) {
        let last = self.depth() - 1;
        for l in 0..self.depth() {
            let k = self.layer_sizes[l];
            let scale = self.weights[l].iter().copied().fold(0.0, f64::max);
            let full = k as f64 * scale;
            for (i, t) in self.thresholds[l].iter_mut().enumerate() {
                if l == last {
                    *t = 0.5 * full;
                    continue;
                }
                let rowsum: f64 = self.weights[l][i * k..(i + 1) * k].iter().sum();
                if rowsum <= 0.0 {
                    *t = 0.5 * full;
                } else if *t >= rowsum {
                    *t = rowsum.min(full * (1.0 - 1e-9));
                }
            }
        }
    }
}

/// Trains a nonnegative network of the given shape on `data`.
pub fn train(data: &Dataset, layer_sizes: &[usize], cfg: &TrainConfig) -> Result<FloatNetwork> {
    let cfg = cfg.validated()?;
    if data.is_empty() {
        return Err(Error::arg("cannot train on an empty dataset"));
    }
    let mut net = FloatNetwork::zeros(layer_sizes)?;
    let mut rng = rng::seeded(cfg.seed);
    for l in 0..net.depth() {
        let k = layer_sizes[l];
        for w in net.weights[l].iter_mut() {
            *w = rng.random::<f64>() * cfg.init_max;
        }
        if l + 1 < net.depth() {
            for i in 0..layer_sizes[l + 1] {
                let rowsum: f64 = net.weights[l][i * k..(i + 1) * k].iter().sum();
                net.thresholds[l][i] = (cfg.threshold_init * rowsum).max(cfg.min_threshold);
            }
        }
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut lr = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, g) = net.loss_and_gradient(data, batch, &cfg)?;
            for (w, gw) in net.weights.iter_mut().zip(&g.weights) {
                for (v, d) in w.iter_mut().zip(gw) {
                    *v -= lr * d;
                }
            }
            for (t, gt) in net.thresholds.iter_mut().zip(&g.thresholds) {
                for (v, d) in t.iter_mut().zip(gt) {
                    *v -= lr * d;
                }
            }
            net.project(cfg.min_threshold);
        }
        lr *= cfg.lr_decay;
    }
    net.finalize();
    Ok(net)
}

/// Fraction of samples the float network classifies correctly.
pub fn accuracy(net: &FloatNetwork, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = (0..data.len()).filter(|&i| net.predict(data.sample(i)) == data.label(i)).count();
    correct as f64 / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, label: u8) -> Dataset {
        let mut r = rng::seeded(3);
        let inputs = (0..n * 4).map(|_| r.random::<f64>()).collect();
        Dataset::new(4, inputs, alloc::vec![label; n]).unwrap()
    }

    #[test]
    fn single_class_is_learned_perfectly() {
        let data = toy(50, 0);
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let net = train(&data, &[4, 6, 3], &cfg).unwrap();
        assert_eq!(accuracy(&net, &data), 1.0);
        assert!(net.min_weight() >= 0.0);
    }

    #[test]
    fn unnormalized_data_is_rejected() {
        assert!(matches!(
            Dataset::new(2, alloc::vec![0.5, 1.5], alloc::vec![0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy(40, 1);
        let cfg = TrainConfig {
            epochs: 3,
            seed: 9,
            ..TrainConfig::default()
        };
        assert_eq!(train(&data, &[4, 5, 2], &cfg).unwrap(), train(&data, &[4, 5, 2], &cfg).unwrap());
    }

    #[test]
    fn split_partitions_the_samples() {
        let data = toy(30, 0);
        let (a, b) = data.split(10, 1).unwrap();
        assert_eq!((a.len(), b.len()), (20, 10));
        let mut all: Vec<_> = a.inputs.chunks(4).chain(b.inputs.chunks(4)).map(|c| c[0].to_bits()).collect();
        let mut orig: Vec<_> = data.inputs.chunks(4).map(|c| c[0].to_bits()).collect();
        all.sort_unstable();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }
}
