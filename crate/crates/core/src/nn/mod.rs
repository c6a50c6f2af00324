//! Differentiable building blocks for the multiscale CNN, all in f64.
//!
//! Layers are plain structs holding their parameters. `forward` returns the
//! output; `backward` takes whatever forward state it needs explicitly and
//! returns gradients, so a single layer instance can serve many samples
//! concurrently.

mod adam;
mod checkpoint;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod pool;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{Conv1d, ConvGrads};
pub use dense::{Dense, DenseGrads};
pub use dropout::{dropout, Dropout, DropoutMask};
pub use gradcheck::{central_differences, grad_check, relative_error, GradCheck};
pub use loss::{softmax, softmax_xent, SoftmaxXent};
pub use pool::{maxpool1d, maxpool1d_backward, Pooled};
pub use tensor::Tensor;

use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::None => v,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub(crate) fn grad_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::None => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Kaiming-normal weights, std = sqrt(2 / fan_in).
pub(crate) fn kaiming(count: usize, fan_in: usize, seed: u64) -> Vec<f64> {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut rng = crate::rng::stream(seed);
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * std
        })
        .collect()
}

/// Dot product with four independent accumulators, summed in a fixed order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}
