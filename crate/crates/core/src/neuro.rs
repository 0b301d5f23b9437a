//! Minimal fully connected network: tanh hidden layers, identity output.
//!
//! Parameters flatten layer by layer; within a layer the weight matrix comes
//! first in row-major order (one row per output unit), then the biases.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub layer_sizes: Vec<usize>,
}

impl NetworkTopology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(SimError::InvalidTopology("need at least an input and an output layer".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(SimError::InvalidTopology("layer sizes must be >= 1".into()));
        }
        Ok(Self { layer_sizes })
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        param_count(self)
    }
}

/// Σ over layers of `(in + 1)·out`.
pub fn param_count(topology: &NetworkTopology) -> usize {
    topology
        .layer_sizes
        .windows(2)
        .map(|w| (w[0] + 1) * w[1])
        .sum()
}

/// Flattened parameter vector Θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionVector(pub Vec<f64>);

impl SolutionVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    topology: NetworkTopology,
    layers: Vec<Layer>,
}

impl Network {
    pub fn zeros(topology: &NetworkTopology) -> Self {
        unflatten(topology, &SolutionVector::zeros(topology.param_count()))
            .expect("zero vector has matching length")
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        forward(self, input)
    }

    /// Forward pass keeping every layer's activations (input first).
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let x = acts.last().unwrap();
            let y: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + layer.biases[o];
                    if li == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(y);
        }
        acts
    }

    /// `θ ← θ − lr·g` for a gradient in flattened layout.
    pub fn apply_gradient(&mut self, grad: &[f64], lr: f64) -> Result<()> {
        let n = self.topology.param_count();
        if grad.len() != n {
            return Err(SimError::DimensionMismatch {
                expected: n,
                actual: grad.len(),
            });
        }
        let mut k = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w -= lr * grad[k];
                k += 1;
            }
        }
        Ok(())
    }
}

pub fn flatten(network: &Network) -> SolutionVector {
    let mut out = Vec::with_capacity(network.topology.param_count());
    for layer in &network.layers {
        out.extend_from_slice(&layer.weights);
        out.extend_from_slice(&layer.biases);
    }
    SolutionVector(out)
}

pub fn unflatten(topology: &NetworkTopology, theta: &SolutionVector) -> Result<Network> {
    let n = topology.param_count();
    if theta.len() != n {
        return Err(SimError::DimensionMismatch {
            expected: n,
            actual: theta.len(),
        });
    }
    let mut k = 0;
    let layers = topology
        .layer_sizes
        .windows(2)
        .map(|w| {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = theta.0[k..k + inputs * outputs].to_vec();
            k += inputs * outputs;
            let biases = theta.0[k..k + outputs].to_vec();
            k += outputs;
            Layer {
                inputs,
                outputs,
                weights,
                biases,
            }
        })
        .collect();
    Ok(Network {
        topology: topology.clone(),
        layers,
    })
}

pub fn forward(network: &Network, input: &[f64]) -> Result<Vec<f64>> {
    let expected = network.topology.inputs();
    if input.len() != expected {
        return Err(SimError::DimensionMismatch {
            expected,
            actual: input.len(),
        });
    }
    Ok(network.activations(input).pop().unwrap())
}

/// Reverse-mode gradient of `⟨output_grad, forward(input)⟩` with respect to
/// every parameter, in flattened layout.
pub fn backward(network: &Network, input: &[f64], output_grad: &[f64]) -> Result<Vec<f64>> {
    let topo = &network.topology;
    if input.len() != topo.inputs() {
        return Err(SimError::DimensionMismatch {
            expected: topo.inputs(),
            actual: input.len(),
        });
    }
    if output_grad.len() != topo.outputs() {
        return Err(SimError::DimensionMismatch {
            expected: topo.outputs(),
            actual: output_grad.len(),
        });
    }
    let acts = network.activations(input);
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(network.layers.len());
    // Gradient w.r.t. the current layer's pre-activation.
    let mut delta = output_grad.to_vec();
    for (li, layer) in network.layers.iter().enumerate().rev() {
        let x = &acts[li];
        let mut g = vec![0.0; layer.outputs * layer.inputs + layer.outputs];
        for o in 0..layer.outputs {
            for i in 0..layer.inputs {
                g[o * layer.inputs + i] = delta[o] * x[i];
            }
            g[layer.outputs * layer.inputs + o] = delta[o];
        }
        grads.push(g);
        if li > 0 {
            // x = tanh(z_prev) for hidden layers.
            delta = (0..layer.inputs)
                .map(|i| {
                    let back: f64 = (0..layer.outputs)
                        .map(|o| layer.weights[o * layer.inputs + i] * delta[o])
                        .sum();
                    back * (1.0 - x[i] * x[i])
                })
                .collect();
        }
    }
    grads.reverse();
    Ok(grads.concat())
}
