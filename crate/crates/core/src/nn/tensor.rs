use crate::error::{Error, Result};

/// Row-major `(channels, length)` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: Vec<f64>,
    pub channels: usize,
    pub len: usize,
}

impl Tensor {
    pub fn new(data: Vec<f64>, channels: usize, len: usize) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::Shape(format!("{} values for shape ({channels}, {len})", data.len())));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { data, channels, len })
    }

    pub fn zeros(channels: usize, len: usize) -> Self {
        Self { data: vec![0.0; channels * len], channels, len }
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }
}
