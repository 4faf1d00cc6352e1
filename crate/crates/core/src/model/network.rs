//! Dense networks over flat parameter vectors, with hand-written backprop.
//!
//! Parameters are stored in one `Vec<f64>`: for each layer the row-major
//! weight matrix (`outputs × inputs`) followed by the bias vector. The output
//! layer has one unit for two-class problems (sigmoid + binary cross-entropy)
//! and one unit per class otherwise (softmax + categorical cross-entropy).

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Logistic,
    OneHidden { hidden_units: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl LayerShape {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    fn end(&self) -> usize {
        self.bias().end
    }
}

/// Layer geometry of a network; the parameters live elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layers: Vec<LayerShape>,
}

impl Architecture {
    pub fn new(kind: ModelKind, input_dim: usize, classes: usize) -> Self {
        let outputs = output_units(classes);
        let sizes = match kind {
            ModelKind::Logistic => vec![(input_dim, outputs)],
            ModelKind::OneHidden { hidden_units } => {
                vec![(input_dim, hidden_units), (hidden_units, outputs)]
            }
        };
        let mut offset = 0;
        let layers = sizes
            .into_iter()
            .map(|(inputs, outputs)| {
                let shape = LayerShape {
                    inputs,
                    outputs,
                    offset,
                };
                offset = shape.end();
                shape
            })
            .collect();
        Architecture { layers }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.last().map_or(0, LayerShape::end)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_units(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn is_binary(&self) -> bool {
        self.output_units() == 1
    }

    /// Uniform in `±1/sqrt(fan_in)` for weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.parameter_count()];
        for layer in &self.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut params[layer.weights()] {
                *w = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        params
    }

    /// Output logits for one input.
    pub fn logits(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut activ = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = dense(params, layer, &activ);
            if i + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activ = z;
        }
        activ
    }

    /// Class probabilities for one input.
    pub fn probabilities(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let z = self.logits(params, x);
        if self.is_binary() {
            let p = sigmoid(z[0]);
            vec![1.0 - p, p]
        } else {
            softmax(&z)
        }
    }

    /// Loss for one sample and its gradient accumulated into `grad`.
    pub fn accumulate_gradient(&self, params: &[f64], x: &[f64], target: usize, grad: &mut [f64]) -> f64 {
        // Forward, keeping every layer's input.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut activ = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = dense(params, layer, &activ);
            if i + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut activ, z));
        }
        let (loss, mut delta) = loss_and_delta(&activ, target);

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &inputs[i];
            let (w_range, b_range) = (layer.weights(), layer.bias());
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[w_range.start + o * layer.inputs..w_range.start + (o + 1) * layer.inputs];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[b_range.start + o] += d;
            }
            if i == 0 {
                break;
            }
            // Back through the weights, then the rectifier of the previous layer.
            let weights = &params[w_range];
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        loss
    }

    /// Loss for one sample, no gradient.
    pub fn loss(&self, params: &[f64], x: &[f64], target: usize) -> f64 {
        loss_and_delta(&self.logits(params, x), target).0
    }

    /// Permute output units of a softmax head: new unit `i` is old unit `order[i]`.
    pub fn permute_outputs(&self, params: &[f64], order: &[usize]) -> Vec<f64> {
        let mut out = params.to_vec();
        let last = self.layers.last().expect("at least one layer");
        let (w, b) = (last.weights(), last.bias());
        for (new, &old) in order.iter().enumerate() {
            let src = w.start + old * last.inputs;
            let dst = w.start + new * last.inputs;
            out[dst..dst + last.inputs].copy_from_slice(&params[src..src + last.inputs]);
            out[b.start + new] = params[b.start + old];
        }
        out
    }
}

pub fn output_units(classes: usize) -> usize {
    if classes == 2 {
        1
    } else {
        classes
    }
}

fn dense(params: &[f64], layer: &LayerShape, x: &[f64]) -> Vec<f64> {
    let weights = &params[layer.weights()];
    let bias = &params[layer.bias()];
    weights
        .chunks_exact(layer.inputs)
        .zip(bias)
        .map(|(row, &b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy and its derivative with respect to the logits.
fn loss_and_delta(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    if logits.len() == 1 {
        let z = logits[0];
        let y = if target == 1 { 1.0 } else { 0.0 };
        // log(1 + e^z) - y z, computed stably
        let loss = z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
        (loss, vec![sigmoid(z) - y])
    } else {
        let p = softmax(logits);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - logits[target];
        let delta = p
            .into_iter()
            .enumerate()
            .map(|(i, pi)| if i == target { pi - 1.0 } else { pi })
            .collect();
        (loss, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn layouts() {
        let a = Architecture::new(ModelKind::Logistic, 10, 2);
        assert_eq!(a.parameter_count(), 11);
        assert!(a.is_binary());
        let a = Architecture::new(ModelKind::OneHidden { hidden_units: 4 }, 10, 3);
        assert_eq!(a.parameter_count(), 10 * 4 + 4 + 4 * 3 + 3);
        assert_eq!(a.output_units(), 3);
    }

    #[test]
    fn zero_params_give_uniform_probabilities() {
        let a = Architecture::new(ModelKind::OneHidden { hidden_units: 3 }, 5, 3);
        let p = a.probabilities(&vec![0.0; a.parameter_count()], &[1.0; 5]);
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let a = Architecture::new(ModelKind::Logistic, 5, 2);
        assert_eq!(a.probabilities(&vec![0.0; a.parameter_count()], &[1.0; 5]), vec![0.5, 0.5]);
    }

    #[test]
    fn stable_losses() {
        let (l, d) = loss_and_delta(&[800.0], 1);
        assert!(l.abs() < 1e-12 && d[0].abs() < 1e-12);
        let (l, _) = loss_and_delta(&[800.0], 0);
        assert!((l - 800.0).abs() < 1e-9);
        let (l, _) = loss_and_delta(&[1000.0, 0.0, -1000.0], 2);
        assert!((l - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn init_bounds() {
        let a = Architecture::new(ModelKind::OneHidden { hidden_units: 8 }, 100, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let p = a.init(&mut rng);
        assert!(p.iter().all(|v| v.abs() <= 1.0 / 8f64.sqrt() + 1e-12));
        assert!(p[..800].iter().all(|v| v.abs() <= 0.1 + 1e-12));
        assert!(p.iter().any(|v| *v != 0.0));
    }
}
