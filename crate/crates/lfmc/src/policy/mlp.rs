//! Dense feedforward network with hand-rolled reverse-mode gradients.
//!
//! Parameters live in one flat vector so the optimizer can treat the whole
//! network as a single coordinate list. Layout per layer: the weight matrix
//! row-major (rows = outputs), then the bias vector. Hidden activations are
//! tanh, the output is linear.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Post-activation values per layer from one forward pass, input included.
/// Reused across calls to avoid per-sample allocation.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache filled by forward")
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Xavier-uniform initialization; biases zero. `final_scale` multiplies
    /// the last layer so the network can start near a constant output.
    pub fn init(dims: &[usize], final_scale: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("bad layer dimensions {dims:?}")));
        }
        let mut params = Vec::with_capacity(param_count(dims));
        for (l, w) in dims.windows(2).enumerate() {
            let (nin, nout) = (w[0], w[1]);
            let limit = (6.0 / (nin + nout) as f64).sqrt();
            let scale = if l == dims.len() - 2 {
                final_scale
            } else {
                1.0
            };
            for _ in 0..nin * nout {
                params.push(scale * rng.random_range(-limit..=limit));
            }
            params.extend(std::iter::repeat_n(0.0, nout));
        }
        Ok(Self {
            dims: dims.to_vec(),
            params,
        })
    }

    /// Network from an existing flat parameter vector (checkpoint load).
    pub fn from_params(dims: &[usize], params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("bad layer dimensions {dims:?}")));
        }
        let expect = param_count(dims);
        if params.len() != expect {
            return Err(Error::Contract(format!(
                "parameter vector has {} entries, layout needs {expect}",
                params.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            params,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    /// Flat offset of layer `l`'s weight block; biases follow the weights.
    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.dims[..=l])
    }

    /// Forward pass filling `cache` with every layer's post-activation
    /// output; returns a view of the network output.
    pub fn forward<'c>(&self, x: &[f64], cache: &'c mut ForwardCache) -> &'c [f64] {
        assert_eq!(x.len(), self.dims[0], "input dimension mismatch");
        let layers = self.layer_count();
        cache.activations.resize(layers + 1, Vec::new());
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(x);
        for l in 0..layers {
            let (nin, nout) = (self.dims[l], self.dims[l + 1]);
            let base = self.layer_offset(l);
            let bias = base + nin * nout;
            let (before, after) = cache.activations.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            out.resize(nout, 0.0);
            for i in 0..nout {
                let row = &self.params[base + i * nin..base + (i + 1) * nin];
                let mut z = self.params[bias + i];
                for j in 0..nin {
                    z += row[j] * input[j];
                }
                out[i] = if l + 1 < layers { z.tanh() } else { z };
            }
        }
        cache.output()
    }

    /// Convenience forward pass with a throwaway cache.
    pub fn forward_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        self.forward(x, &mut cache);
        cache.output().to_vec()
    }

    /// Reverse pass for the forward stored in `cache`.
    ///
    /// `grad_output` is dL/d(output). Parameter gradients are ADDED into
    /// `grad_params` (caller zeroes between batches); dL/d(input) is written
    /// to `grad_input` when given.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grad_params: &mut [f64],
        mut grad_input: Option<&mut [f64]>,
    ) {
        assert_eq!(grad_output.len(), self.output_dim());
        assert_eq!(grad_params.len(), self.params.len());
        let layers = self.layer_count();
        let mut delta = grad_output.to_vec();
        for l in (0..layers).rev() {
            let (nin, nout) = (self.dims[l], self.dims[l + 1]);
            let base = self.layer_offset(l);
            let bias = base + nin * nout;
            if l + 1 < layers {
                // Hidden layer: activation was tanh, a' = 1 - a^2.
                let act = &cache.activations[l + 1];
                for i in 0..nout {
                    delta[i] *= 1.0 - act[i] * act[i];
                }
            }
            let input = &cache.activations[l];
            for i in 0..nout {
                let d = delta[i];
                let row = &mut grad_params[base + i * nin..base + (i + 1) * nin];
                for j in 0..nin {
                    row[j] += d * input[j];
                }
                grad_params[bias + i] += d;
            }
            if l > 0 || grad_input.is_some() {
                let mut next = vec![0.0; nin];
                for i in 0..nout {
                    let d = delta[i];
                    let row = &self.params[base + i * nin..base + (i + 1) * nin];
                    for j in 0..nin {
                        next[j] += row[j] * d;
                    }
                }
                if l == 0 {
                    if let Some(gi) = grad_input.as_deref_mut() {
                        gi.copy_from_slice(&next);
                    }
                }
                delta = next;
            }
        }
    }
}
