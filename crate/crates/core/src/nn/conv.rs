use super::{axpy, dot, kaiming, Activation, Tensor};
use crate::error::{Error, Result};

/// Valid (unpadded) stride-1 cross-correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub out_channels: usize,
    pub in_channels: usize,
    pub width: usize,
    /// `[out][in][width]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(out_channels: usize, in_channels: usize, width: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != out_channels * in_channels * width || bias.len() != out_channels {
            return Err(Error::Shape(format!(
                "conv weights {} / bias {} for ({out_channels}, {in_channels}, {width})",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self { out_channels, in_channels, width, weight, bias })
    }

    pub fn kaiming(out_channels: usize, in_channels: usize, width: usize, seed: u64) -> Self {
        let weight = kaiming(out_channels * in_channels * width, in_channels * width, seed);
        Self { out_channels, in_channels, width, weight, bias: vec![0.0; out_channels] }
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        input_len.checked_sub(self.width - 1).filter(|&l| l > 0)
    }

    fn kernel(&self, o: usize, i: usize) -> &[f64] {
        let start = (o * self.in_channels + i) * self.width;
        &self.weight[start..start + self.width]
    }

    pub fn forward(&self, x: &Tensor, act: Activation) -> Result<Tensor> {
        if x.channels != self.in_channels {
            return Err(Error::Shape(format!("conv expects {} channels, got {}", self.in_channels, x.channels)));
        }
        let out_len = self
            .output_len(x.len)
            .ok_or_else(|| Error::Shape(format!("input length {} is shorter than kernel width {}", x.len, self.width)))?;
        let mut y = Tensor::zeros(self.out_channels, out_len);
        for o in 0..self.out_channels {
            let row = y.row_mut(o);
            row.fill(self.bias[o]);
            for i in 0..self.in_channels {
                let xi = x.row(i);
                for (k, &w) in self.kernel(o, i).iter().enumerate() {
                    axpy(w, &xi[k..k + out_len], row);
                }
            }
            if act == Activation::Relu {
                row.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(y)
    }

    /// Gradients from the forward input `x`, forward output `y` (after
    /// activation) and `grad_out` with respect to `y`.
    pub fn backward(&self, x: &Tensor, y: &Tensor, act: Activation, grad_out: &Tensor, need_input: bool) -> ConvGrads {
        let out_len = y.len;
        let mut grad_pre = grad_out.clone();
        if act == Activation::Relu {
            for (g, &v) in grad_pre.data.iter_mut().zip(&y.data) {
                *g *= act.grad_from_output(v);
            }
        }
        let mut weight = vec![0.0; self.weight.len()];
        let mut bias = vec![0.0; self.out_channels];
        let mut input = need_input.then(|| Tensor::zeros(x.channels, x.len));
        for o in 0..self.out_channels {
            let g = grad_pre.row(o);
            bias[o] = g.iter().sum();
            for i in 0..self.in_channels {
                let xi = x.row(i);
                let base = (o * self.in_channels + i) * self.width;
                for k in 0..self.width {
                    weight[base + k] = dot(g, &xi[k..k + out_len]);
                }
                if let Some(gx) = input.as_mut() {
                    let gxi = gx.row_mut(i);
                    for (k, &w) in self.kernel(o, i).iter().enumerate() {
                        axpy(w, g, &mut gxi[k..k + out_len]);
                    }
                }
            }
        }
        ConvGrads { input, weight, bias }
    }
}
