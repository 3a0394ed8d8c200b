//! Small dense networks with batched reverse-mode gradients.
//!
//! Parameters live in one flat vector so the optimizer, soft updates and
//! checkpoints can treat a network as a single array. Layer `k` stores its
//! weights row-major as `out × in`, followed by `out` biases.

mod adam;
#[cfg(test)]
pub(crate) mod fdcheck;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use adam::{Adam, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Identity,
    Tanh,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    head: Head,
    params: Vec<f64>,
    #[serde(skip)]
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.head == other.head && self.params == other.params
    }
}

/// Forward intermediates for one batch.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    version: u64,
    /// `acts[0]` is the input; `acts[k+1]` the post-activation of layer k.
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has an input")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// `c (m×n) = α·a·b + β·c` with arbitrary strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    debug_assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    debug_assert!(k == 0 || n == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    debug_assert!(m == 0 || n == 0 || (m - 1) * rsc + (n - 1) * csc < c.len());
    // SAFETY: extents checked above; all three slices are distinct borrows.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialization of weights and biases.
    pub fn new(sizes: &[usize], head: Head, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes, head)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[1] * (w[0] + 1)] {
                *p = rng.random_range(-bound..bound);
            }
            off += w[1] * (w[0] + 1);
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], head: Head) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Architecture(sizes.to_vec(), vec![]));
        }
        let n = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Mlp {
            sizes: sizes.to_vec(),
            head,
            params: vec![0.0; n],
            version: 0,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access; invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let o = off;
            off += w[1] * (w[0] + 1);
            (o, w[0], w[1])
        })
    }

    fn same_shape(&self, other: &Mlp) -> Result<()> {
        if self.sizes != other.sizes || self.head != other.head {
            return Err(Error::Architecture(self.sizes.clone(), other.sizes.clone()));
        }
        Ok(())
    }

    /// Batched forward pass; `input` is `batch × input_dim` row-major.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<Tape> {
        if input.len() != batch * self.input_dim() {
            return Err(Error::Dimension {
                expected: batch * self.input_dim(),
                got: input.len(),
            });
        }
        let last = self.sizes.len() - 2;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for (k, (off, n_in, n_out)) in self.layers().enumerate() {
            let (w, b) = self.params[off..off + n_out * (n_in + 1)].split_at(n_out * n_in);
            let mut y = Vec::with_capacity(batch * n_out);
            for _ in 0..batch {
                y.extend_from_slice(b);
            }
            gemm(batch, n_in, n_out, 1.0, &acts[k], (n_in, 1), w, (1, n_in), 1.0, &mut y, (n_out, 1));
            if k < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.head == Head::Tanh {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        Ok(Tape {
            batch,
            version: self.version,
            acts,
        })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(input, 1)?.acts.pop().unwrap())
    }

    /// Reverse pass. Accumulates parameter gradients into `grads` and
    /// returns the gradient with respect to the input batch.
    pub fn backward(&self, tape: &Tape, seed: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if tape.version != self.version || tape.acts.len() != self.sizes.len() {
            return Err(Error::StaleTape);
        }
        let batch = tape.batch;
        if seed.len() != batch * self.output_dim() {
            return Err(Error::Dimension {
                expected: batch * self.output_dim(),
                got: seed.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let layers: Vec<_> = self.layers().collect();
        let last = layers.len() - 1;
        let mut delta = seed.to_vec();
        for (k, &(off, n_in, n_out)) in layers.iter().enumerate().rev() {
            let out = &tape.acts[k + 1];
            if k < last {
                for (d, &y) in delta.iter_mut().zip(out) {
                    if y <= 0.0 {
                        *d = 0.0;
                    }
                }
            } else if self.head == Head::Tanh {
                for (d, &y) in delta.iter_mut().zip(out) {
                    *d *= 1.0 - y * y;
                }
            }
            let x = &tape.acts[k];
            let (gw, gb) = grads[off..off + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
            gemm(n_out, batch, n_in, 1.0, &delta, (1, n_out), x, (n_in, 1), 1.0, gw, (n_in, 1));
            for row in delta.chunks_exact(n_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let w = &self.params[off..off + n_out * n_in];
            let mut dx = vec![0.0; batch * n_in];
            gemm(batch, n_out, n_in, 1.0, &delta, (n_out, 1), w, (n_in, 1), 0.0, &mut dx, (n_in, 1));
            delta = dx;
        }
        Ok(delta)
    }

    /// `self ← τ·online + (1 − τ)·self`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        self.same_shape(online)?;
        for (t, o) in self.params_mut().iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }

    pub fn copy_from(&mut self, online: &Mlp) -> Result<()> {
        self.same_shape(online)?;
        self.params_mut().copy_from_slice(&online.params);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Set every parameter of layer `k` (weights then biases).
    pub fn set_layer(&mut self, k: usize, weights: &[f64], biases: &[f64]) -> Result<()> {
        let (off, n_in, n_out) = self
            .layers()
            .nth(k)
            .ok_or(Error::Dimension { expected: self.sizes.len() - 1, got: k })?;
        if weights.len() != n_in * n_out || biases.len() != n_out {
            return Err(Error::Dimension {
                expected: n_out * (n_in + 1),
                got: weights.len() + biases.len(),
            });
        }
        let p = &mut self.params_mut()[off..off + n_out * (n_in + 1)];
        p[..n_in * n_out].copy_from_slice(weights);
        p[n_in * n_out..].copy_from_slice(biases);
        Ok(())
    }
}

/// Named networks plus optimizer state, saved as JSON with exact float
/// round-trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub kind: String,
    pub nets: Vec<(String, Mlp)>,
    pub optimizers: Vec<(String, AdamState)>,
    pub scalars: Vec<(String, f64)>,
}

pub const CHECKPOINT_FORMAT: u32 = 1;

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            kind: kind.to_string(),
            nets: Vec::new(),
            optimizers: Vec::new(),
            scalars: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format {}", c.format)));
        }
        Ok(c)
    }

    pub fn net(&self, name: &str) -> Result<&Mlp> {
        self.nets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Checkpoint(format!("missing network {name}")))
    }

    pub fn optimizer(&self, name: &str) -> Result<&AdamState> {
        self.optimizers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Checkpoint(format!("missing optimizer {name}")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        self.scalars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Checkpoint(format!("missing scalar {name}")))
    }
}

/// Load `stored` into `net`, checking the architecture.
pub fn restore(net: &mut Mlp, stored: &Mlp) -> Result<()> {
    net.copy_from(stored)
}
