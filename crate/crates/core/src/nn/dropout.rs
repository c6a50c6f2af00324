use rand::Rng;

use super::{Mode, Tensor};

/// Per-unit multipliers: `1/(1-rate)` for kept units, `0` for dropped ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0, 1)");
        Self { rate }
    }

    /// Inverted dropout. Returns `None` for the mask when the layer is the
    /// identity (inference, or rate 0).
    pub fn forward(&self, x: &[f64], mode: Mode, seed: u64) -> (Vec<f64>, Option<DropoutMask>) {
        if mode == Mode::Infer || self.rate == 0.0 {
            return (x.to_vec(), None);
        }
        let scale = 1.0 / (1.0 - self.rate);
        let mut rng = crate::rng::stream(seed);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.random::<f64>() >= self.rate { scale } else { 0.0 })
            .collect();
        let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
        (out, Some(DropoutMask(mask)))
    }

    pub fn backward(grad_out: &[f64], mask: Option<&DropoutMask>) -> Vec<f64> {
        match mask {
            Some(m) => grad_out.iter().zip(&m.0).map(|(g, m)| g * m).collect(),
            None => grad_out.to_vec(),
        }
    }
}

/// Tensor convenience wrapper around [`Dropout::forward`].
pub fn dropout(x: &Tensor, rate: f64, mode: Mode, seed: u64) -> (Tensor, Option<DropoutMask>) {
    let (data, mask) = Dropout::new(rate).forward(&x.data, mode, seed);
    (Tensor { data, channels: x.channels, len: x.len }, mask)
}
