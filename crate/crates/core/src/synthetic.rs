//! Synthetic gearbox-like vibration records.
//!
//! Healthy records are a few sinusoids plus Gaussian noise. Damaged records
//! add a periodic train of decaying resonance bursts, the usual signature of
//! a localized tooth or bearing defect.

use std::f64::consts::TAU;

use rand::Rng;

use crate::dataset::{Condition, RawRecord};
use crate::emd::Signal;
use crate::error::Result;
use crate::rng::{derive_seed, gaussian_noise, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct FaultBenchmark {
    pub sample_rate_hz: f64,
    /// `(frequency Hz, amplitude)` of the shaft and mesh tones.
    pub tones: Vec<(f64, f64)>,
    pub noise_std: f64,
    /// Bursts per second in damaged records.
    pub impulse_rate_hz: f64,
    pub impulse_amplitude: f64,
    pub resonance_hz: f64,
    pub decay_secs: f64,
}

impl Default for FaultBenchmark {
    fn default() -> Self {
        Self {
            sample_rate_hz: 40_000.0,
            tones: vec![(30.0, 1.0), (120.0, 0.6), (410.0, 0.3)],
            noise_std: 0.3,
            impulse_rate_hz: 95.0,
            impulse_amplitude: 1.5,
            resonance_hz: 3_000.0,
            decay_secs: 6e-4,
        }
    }
}

impl FaultBenchmark {
    /// Tones with random phases plus noise.
    pub fn healthy(&self, len: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(derive_seed(seed, &[0]));
        let fs = self.sample_rate_hz;
        let mut x = gaussian_noise(len, self.noise_std, derive_seed(seed, &[1]));
        for &(f, a) in &self.tones {
            let phase = rng.random::<f64>() * TAU;
            for (i, v) in x.iter_mut().enumerate() {
                *v += a * (TAU * f * i as f64 / fs + phase).sin();
            }
        }
        x
    }

    /// A healthy signal plus the impulse train, starting at a random offset.
    pub fn damaged(&self, len: usize, seed: u64) -> Vec<f64> {
        let mut x = self.healthy(len, seed);
        let fs = self.sample_rate_hz;
        let period = fs / self.impulse_rate_hz;
        let burst = (8.0 * self.decay_secs * fs).ceil() as usize;
        let mut t0 = stream(derive_seed(seed, &[2])).random::<f64>() * period;
        while t0 < len as f64 {
            let start = t0.ceil() as usize;
            for i in start..(start + burst).min(len) {
                let t = (i as f64 - t0) / fs;
                x[i] += self.impulse_amplitude * (-t / self.decay_secs).exp() * (TAU * self.resonance_hz * t).sin();
            }
            t0 += period;
        }
        x
    }

    pub fn record(&self, condition: Condition, len: usize, seed: u64) -> Vec<f64> {
        match condition {
            Condition::Healthy => self.healthy(len, seed),
            Condition::Damaged => self.damaged(len, seed),
        }
    }

    /// `per_class` healthy and `per_class` damaged records of `len` samples.
    pub fn records(&self, per_class: usize, len: usize, seed: u64) -> Result<Vec<RawRecord>> {
        let mut out = Vec::with_capacity(2 * per_class);
        for condition in [Condition::Healthy, Condition::Damaged] {
            for r in 0..per_class {
                let s = derive_seed(seed, &[condition.label() as u64, r as u64]);
                out.push(RawRecord {
                    source: format!("synthetic-{condition}-{r}"),
                    channel_id: "AN3".into(),
                    condition,
                    signal: Signal::new(self.record(condition, len, s), self.sample_rate_hz)?,
                });
            }
        }
        Ok(out)
    }
}
