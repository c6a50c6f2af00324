//! Interpolants used for sifting envelopes.

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivative at each knot; zero at both ends.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    /// Panics unless there are at least two knots with strictly increasing `xs`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len());
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations
            //   h[i-1] m[i-1] + 2(h[i-1]+h[i]) m[i] + h[i] m[i+1] = rhs[i]
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let inner = n - 2;
            let mut c_prime = vec![0.0; inner];
            let mut d_prime = vec![0.0; inner];
            for k in 0..inner {
                let i = k + 1;
                let a = h[i - 1];
                let b = 2.0 * (h[i - 1] + h[i]);
                let c = h[i];
                let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
                if k == 0 {
                    c_prime[k] = c / b;
                    d_prime[k] = rhs / b;
                } else {
                    let denom = b - a * c_prime[k - 1];
                    c_prime[k] = c / denom;
                    d_prime[k] = (rhs - a * d_prime[k - 1]) / denom;
                }
            }
            for k in (0..inner).rev() {
                let next = if k + 1 < inner { m[k + 2] } else { 0.0 };
                m[k + 1] = d_prime[k] - c_prime[k] * next;
            }
        }
        Self { xs, ys, m }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let seg = match self.xs.partition_point(|&x| x <= t) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        };
        self.eval_segment(seg, t)
    }

    fn eval_segment(&self, i: usize, t: f64) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Evaluates on the integer grid `0..n`, walking the segments once.
    pub fn eval_grid(&self, n: usize) -> Vec<f64> {
        let last_seg = self.xs.len() - 2;
        let mut seg = 0;
        (0..n)
            .map(|i| {
                let t = i as f64;
                while seg < last_seg && self.xs[seg + 1] <= t {
                    seg += 1;
                }
                self.eval_segment(seg, t)
            })
            .collect()
    }
}

/// Piecewise-linear interpolation on `0..n`, extrapolating the end segments.
/// A single knot yields a constant.
pub fn linear_grid(xs: &[f64], ys: &[f64], n: usize) -> Vec<f64> {
    assert!(!xs.is_empty() && xs.len() == ys.len());
    if xs.len() == 1 {
        return vec![ys[0]; n];
    }
    let last_seg = xs.len() - 2;
    let mut seg = 0;
    (0..n)
        .map(|i| {
            let t = i as f64;
            while seg < last_seg && xs[seg + 1] <= t {
                seg += 1;
            }
            let (x0, x1) = (xs[seg], xs[seg + 1]);
            ys[seg] + (ys[seg + 1] - ys[seg]) * (t - x0) / (x1 - x0)
        })
        .collect()
}
