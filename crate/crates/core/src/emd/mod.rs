//! Empirical mode decomposition: extrema detection, spline envelopes,
//! sifting and the full decomposition of a single signal.

mod spline;

pub use spline::{linear_grid, NaturalCubicSpline};

use crate::error::{Error, Result};

/// One channel of uniformly sampled data.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("signal has no samples".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!("sample rate {sample_rate_hz} must be positive")));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftConfig {
    /// Cauchy-type stop threshold on the normalized squared change.
    pub sd_threshold: f64,
    pub max_sifts_per_imf: usize,
    /// A signal with fewer interior extrema than this is a residual.
    pub min_extrema: usize,
    pub max_total_imfs: usize,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self { sd_threshold: 0.2, max_sifts_per_imf: 50, min_extrema: 4, max_total_imfs: 12 }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd_threshold.is_finite() && self.sd_threshold > 0.0) {
            return Err(Error::InvalidConfig("sd_threshold must be > 0".into()));
        }
        if self.max_sifts_per_imf == 0 || self.min_extrema == 0 || self.max_total_imfs == 0 {
            return Err(Error::InvalidConfig(
                "max_sifts_per_imf, min_extrema and max_total_imfs must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extrema {
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
}

impl Extrema {
    pub fn total(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// Strictly interior local extrema. A flat run bounded by a rise and a fall
/// (or a fall and a rise) counts once, at the run's midpoint.
pub fn find_extrema(x: &[f64]) -> Extrema {
    let n = x.len();
    let mut out = Extrema::default();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        let rising = x[i] > x[i - 1];
        let falling = x[i] < x[i - 1];
        if !(rising || falling) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 < n {
            let mid = (i + j) / 2;
            if rising && x[j + 1] < x[j] {
                out.maxima.push(mid);
            } else if falling && x[j + 1] > x[j] {
                out.minima.push(mid);
            }
        }
        i = j + 1;
    }
    out
}

/// Envelope through the samples at `indices` (one side's extrema).
///
/// Natural cubic spline with the two nearest extrema mirrored across each
/// end of the signal. With fewer than three extrema the envelope is the
/// straight line through them (a constant for one).
pub fn envelope(x: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::InvalidInput("envelope needs at least one extremum".into()));
    }
    let n = x.len();
    let k = indices.len();
    if k < 3 {
        let xs: Vec<f64> = indices.iter().map(|&i| i as f64).collect();
        let ys: Vec<f64> = indices.iter().map(|&i| x[i]).collect();
        return Ok(linear_grid(&xs, &ys, n));
    }
    let right = 2.0 * (n - 1) as f64;
    let mut xs = Vec::with_capacity(k + 4);
    let mut ys = Vec::with_capacity(k + 4);
    for &i in [indices[1], indices[0]].iter() {
        xs.push(-(i as f64));
        ys.push(x[i]);
    }
    for &i in indices {
        xs.push(i as f64);
        ys.push(x[i]);
    }
    for &i in [indices[k - 1], indices[k - 2]].iter() {
        xs.push(right - i as f64);
        ys.push(x[i]);
    }
    Ok(NaturalCubicSpline::new(xs, ys).eval_grid(n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiftOutcome {
    pub imf: Vec<f64>,
    pub sift_count: usize,
}

/// Extracts one IMF candidate by repeated envelope-mean subtraction.
pub fn sift(x: &[f64], cfg: &SiftConfig) -> Result<SiftOutcome> {
    cfg.validate()?;
    let total = find_extrema(x).total();
    if total < cfg.min_extrema {
        return Err(Error::InvalidInput(format!(
            "{total} interior extrema, sifting needs {}",
            cfg.min_extrema
        )));
    }
    let mut h = x.to_vec();
    let mut sift_count = 0;
    while sift_count < cfg.max_sifts_per_imf {
        let ext = find_extrema(&h);
        if ext.maxima.is_empty() || ext.minima.is_empty() {
            break;
        }
        let upper = envelope(&h, &ext.maxima)?;
        let lower = envelope(&h, &ext.minima)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for ((hv, u), l) in h.iter_mut().zip(&upper).zip(&lower) {
            let mean = 0.5 * (u + l);
            num += mean * mean;
            den += *hv * *hv;
            *hv -= mean;
        }
        sift_count += 1;
        let sd = if den > 0.0 { num / den } else { 0.0 };
        if sd < cfg.sd_threshold {
            break;
        }
    }
    if sift_count == 0 {
        return Err(Error::InvalidInput("signal has maxima or minima only".into()));
    }
    Ok(SiftOutcome { imf: h, sift_count })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl Decomposition {
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

/// Plain EMD: sift out IMFs until the residual runs out of extrema.
pub fn emd(signal: &Signal, cfg: &SiftConfig) -> Result<Decomposition> {
    cfg.validate()?;
    let mut residual = signal.samples().to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < cfg.max_total_imfs {
        if find_extrema(&residual).total() < cfg.min_extrema {
            break;
        }
        let imf = match sift(&residual, cfg) {
            Ok(out) => out.imf,
            Err(_) => break,
        };
        for (r, v) in residual.iter_mut().zip(&imf) {
            *r -= v;
        }
        imfs.push(imf);
    }
    Ok(Decomposition { imfs, residual })
}

/// Sign changes between consecutive samples; zeros carry the previous sign.
pub fn zero_crossings(x: &[f64]) -> usize {
    let mut prev: Option<bool> = None;
    let mut count = 0;
    for &v in x {
        if v == 0.0 {
            continue;
        }
        let pos = v > 0.0;
        if let Some(p) = prev {
            if p != pos {
                count += 1;
            }
        }
        prev = Some(pos);
    }
    count
}
