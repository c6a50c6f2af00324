use super::{axpy, dot, kaiming, Activation};
use crate::error::{Error, Result};

/// Fully connected layer, weights stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::Shape(format!(
                "dense weights {} / bias {} for {inputs} -> {outputs}",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self { inputs, outputs, weight, bias })
    }

    pub fn kaiming(inputs: usize, outputs: usize, seed: u64) -> Self {
        Self { inputs, outputs, weight: kaiming(inputs * outputs, inputs, seed), bias: vec![0.0; outputs] }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weight[j * self.inputs..(j + 1) * self.inputs]
    }

    pub fn forward(&self, x: &[f64], act: Activation) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::Shape(format!("dense expects {} inputs, got {}", self.inputs, x.len())));
        }
        Ok((0..self.outputs).map(|j| act.apply(dot(self.row(j), x) + self.bias[j])).collect())
    }

    /// Gradient with respect to the pre-activation, from the output `y`.
    pub fn delta(&self, y: &[f64], act: Activation, grad_out: &[f64]) -> Vec<f64> {
        grad_out.iter().zip(y).map(|(g, &v)| g * act.grad_from_output(v)).collect()
    }

    pub fn input_grad(&self, delta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.inputs];
        for (j, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                axpy(d, self.row(j), &mut g);
            }
        }
        g
    }

    /// `grad_w += scale * delta ⊗ x`
    pub fn accumulate_weight_grad(&self, delta: &[f64], x: &[f64], scale: f64, grad_w: &mut [f64]) {
        for (j, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                axpy(scale * d, x, &mut grad_w[j * self.inputs..(j + 1) * self.inputs]);
            }
        }
    }

    pub fn backward(&self, x: &[f64], y: &[f64], act: Activation, grad_out: &[f64]) -> DenseGrads {
        let delta = self.delta(y, act, grad_out);
        let mut weight = vec![0.0; self.weight.len()];
        self.accumulate_weight_grad(&delta, x, 1.0, &mut weight);
        DenseGrads { input: self.input_grad(&delta), weight, bias: delta }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::grad_check;

    #[test]
    fn identity_layer() {
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let d = Dense::new(3, 3, w, vec![0.0; 3]).unwrap();
        assert_eq!(d.forward(&[1.5, -2.0, 0.25], Activation::None).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn relu_clamps_negative_preactivations() {
        let d = Dense::new(2, 2, vec![-1.0, -1.0, -2.0, -0.5], vec![-0.1, -0.2]).unwrap();
        assert_eq!(d.forward(&[1.0, 2.0], Activation::Relu).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch() {
        assert!(Dense::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(Dense::kaiming(3, 2, 0).forward(&[1.0], Activation::None).is_err());
    }

    fn check(act: Activation) -> f64 {
        let layer = Dense::kaiming(8, 4, 21);
        let probe = crate::rng::gaussian_noise(4, 1.0, 22);
        let mut flat = layer.weight.clone();
        flat.extend(&layer.bias);
        flat.extend(crate::rng::gaussian_noise(8, 1.0, 23));
        let f = |p: &[f64]| {
            let d = Dense::new(8, 4, p[..32].to_vec(), p[32..36].to_vec()).unwrap();
            let x = &p[36..];
            let y = d.forward(x, act).unwrap();
            let g = d.backward(x, &y, act, &probe);
            let mut grad = g.weight;
            grad.extend(g.bias);
            grad.extend(g.input);
            (dot(&y, &probe), grad)
        };
        grad_check(&flat, f, 1e-5).max_rel_error
    }

    #[test]
    fn gradients_match_central_differences() {
        assert!(check(Activation::None) < 1e-6);
        assert!(check(Activation::Relu) < 1e-4);
    }
}
