use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub output: Tensor,
    /// Input offset (within its channel row) that produced each output.
    pub argmax: Vec<usize>,
    pub input_len: usize,
}

/// Non-overlapping max pooling; a trailing partial window is dropped and
/// ties go to the lowest index.
pub fn maxpool1d(x: &Tensor, width: usize) -> Result<Pooled> {
    if width == 0 || x.len < width {
        return Err(Error::Shape(format!("pool width {width} does not fit length {}", x.len)));
    }
    let out_len = x.len / width;
    let mut output = Tensor::zeros(x.channels, out_len);
    let mut argmax = Vec::with_capacity(x.channels * out_len);
    for c in 0..x.channels {
        let row = x.row(c);
        let out = output.row_mut(c);
        for (j, win) in row.chunks_exact(width).enumerate() {
            let mut best = 0;
            for k in 1..width {
                if win[k] > win[best] {
                    best = k;
                }
            }
            out[j] = win[best];
            argmax.push(j * width + best);
        }
    }
    Ok(Pooled { output, argmax, input_len: x.len })
}

pub fn maxpool1d_backward(pooled: &Pooled, grad_out: &Tensor) -> Tensor {
    let mut g = Tensor::zeros(grad_out.channels, pooled.input_len);
    let out_len = grad_out.len;
    for c in 0..grad_out.channels {
        let go = grad_out.row(c);
        let gi = g.row_mut(c);
        for j in 0..out_len {
            gi[pooled.argmax[c * out_len + j]] += go[j];
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::grad_check;

    fn t(v: &[f64]) -> Tensor {
        Tensor::new(v.to_vec(), 1, v.len()).unwrap()
    }

    #[test]
    fn pools_pairs() {
        assert_eq!(maxpool1d(&t(&[1.0, 3.0, 2.0, 5.0]), 2).unwrap().output.data, vec![3.0, 5.0]);
        assert_eq!(maxpool1d(&t(&[1.0, 2.0, 3.0]), 2).unwrap().output.data, vec![2.0]);
        assert!(maxpool1d(&t(&[1.0]), 2).is_err());
    }

    #[test]
    fn ties_route_to_first() {
        let p = maxpool1d(&t(&[4.0, 4.0, 1.0, 1.0]), 2).unwrap();
        assert_eq!(p.argmax, vec![0, 2]);
        let g = maxpool1d_backward(&p, &t(&[1.0, 2.0]));
        assert_eq!(g.data, vec![1.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn output_equals_window_max() {
        let x = Tensor::new(crate::rng::gaussian_noise(3 * 21, 1.0, 2), 3, 21).unwrap();
        let p = maxpool1d(&x, 2).unwrap();
        for c in 0..3 {
            for j in 0..10 {
                let brute = x.row(c)[2 * j].max(x.row(c)[2 * j + 1]);
                assert_eq!(p.output.row(c)[j], brute);
            }
        }
    }

    #[test]
    fn gradient_check_away_from_ties() {
        let x = crate::rng::gaussian_noise(16, 1.0, 9);
        let probe = crate::rng::gaussian_noise(8, 1.0, 10);
        let f = |p: &[f64]| {
            let pooled = maxpool1d(&t(p), 2).unwrap();
            let loss = pooled.output.data.iter().zip(&probe).map(|(a, b)| a * b).sum();
            (loss, maxpool1d_backward(&pooled, &t(&probe)).data)
        };
        assert!(grad_check(&x, f, 1e-5).max_rel_error < 1e-4);
    }
}
