//! Noise-assisted ensemble decomposition into a fixed number of IMFs.
//!
//! Stage 1 averages the first IMF of `x + σ·w_r` over the realizations.
//! Each later stage k sifts the mixture
//! `r_{k-1} + ε·(IMF_1 + … + IMF_{k-1}) + σ_k·w_r`, averages the first IMFs
//! over the realizations and subtracts the average from the residual.
//! The noise standard deviation σ_k is `ε·std(r_{k-1})` in adaptive mode
//! (`snr_flag = 1`) and `ε·std(x)` otherwise.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::emd::{find_extrema, sift, Signal, SiftConfig};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::{derive_seed, gaussian_noise};

pub const MIN_SIGNAL_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeemdanConfig {
    /// Number of noise realizations per stage.
    pub nr: usize,
    /// Sift-iteration budget for one realization across all stages.
    pub max_iter: usize,
    /// 1 = noise scaled to the current residual, 0 = scaled to the input.
    pub snr_flag: u8,
    pub epsilon: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for CeemdanConfig {
    fn default() -> Self {
        Self { nr: 50, max_iter: 250, snr_flag: 1, epsilon: 0.2, k: 10, seed: 0 }
    }
}

impl CeemdanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nr == 0 || self.k == 0 || self.max_iter == 0 {
            return Err(Error::InvalidConfig("nr, k and max_iter must be >= 1".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if self.snr_flag > 1 {
            return Err(Error::InvalidConfig(format!("snr_flag {} must be 0 or 1", self.snr_flag)));
        }
        Ok(())
    }

    /// Per-IMF sift cap: the budget split evenly over the K stages.
    pub fn sift_cap(&self, sift_cfg: &SiftConfig) -> usize {
        sift_cfg.max_sifts_per_imf.min((self.max_iter / self.k).max(1))
    }
}

/// K IMF rows plus the residual for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    /// Configuration that produced the set; `seed` is the effective seed.
    pub config: CeemdanConfig,
}

impl ImfSet {
    pub fn k(&self) -> usize {
        self.imfs.len()
    }

    pub fn source_length(&self) -> usize {
        self.residual.len()
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.residual.len();
        if self.imfs.len() != self.config.k {
            return Err(Error::Shape(format!("{} IMF rows, expected {}", self.imfs.len(), self.config.k)));
        }
        if let Some(i) = self.imfs.iter().position(|r| r.len() != len) {
            return Err(Error::Shape(format!("IMF {} has {} samples, expected {len}", i + 1, self.imfs[i].len())));
        }
        Ok(())
    }

    /// Element-wise sum of every IMF and the residual.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for row in &self.imfs {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn header(&self) -> String {
        let c = &self.config;
        format!(
            "# k={} len={} seed={} nr={} max_iter={} snr_flag={} epsilon={}",
            self.k(),
            self.source_length(),
            c.seed,
            c.nr,
            c.max_iter,
            c.snr_flag,
            c.epsilon
        )
    }

    /// CSV: header line, then IMF_1..IMF_K and the residual, one row each.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header())?;
        let mut line = String::new();
        for row in self.imfs.iter().chain(std::iter::once(&self.residual)) {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                write!(line, "{v}").unwrap();
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {line}"),
            message,
        };
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(path, e))?,
            None => return Err(parse_err(1, "empty file".into())),
        };
        let (k, len, config) = parse_header(&header).map_err(|m| parse_err(1, m))?;
        let mut rows = Vec::with_capacity(k + 1);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .enumerate()
                .map(|(col, s)| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(i + 2, format!("column {}: {e}", col + 1)))
                })
                .collect::<Result<_>>()?;
            if row.len() != len {
                return Err(parse_err(i + 2, format!("{} columns, expected {len}", row.len())));
            }
            rows.push(row);
        }
        if rows.len() != k + 1 {
            return Err(parse_err(1, format!("{} rows, expected {}", rows.len(), k + 1)));
        }
        let residual = rows.pop().unwrap();
        let set = ImfSet { imfs: rows, residual, config };
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), path)
    }
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize, CeemdanConfig), String> {
    let body = line.strip_prefix('#').ok_or("header must start with '#'")?;
    let mut k = None;
    let mut len = None;
    let mut cfg = CeemdanConfig::default();
    for field in body.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| format!("bad header field {field:?}"))?;
        let bad = |e: &dyn std::fmt::Display| format!("header field {key}: {e}");
        match key {
            "k" => k = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "len" => len = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "seed" => cfg.seed = value.parse().map_err(|e| bad(&e))?,
            "nr" => cfg.nr = value.parse().map_err(|e| bad(&e))?,
            "max_iter" => cfg.max_iter = value.parse().map_err(|e| bad(&e))?,
            "snr_flag" => cfg.snr_flag = value.parse().map_err(|e| bad(&e))?,
            "epsilon" => cfg.epsilon = value.parse().map_err(|e| bad(&e))?,
            _ => return Err(format!("unknown header field {key:?}")),
        }
    }
    let k = k.ok_or("header lacks k")?;
    let len = len.ok_or("header lacks len")?;
    cfg.k = k;
    Ok((k, len, cfg))
}

/// Per-stage diagnostics from one decomposition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CeemdanStats {
    /// `sift_counts[stage][realization]`; empty for zero-filled stages.
    pub sift_counts: Vec<Vec<usize>>,
    /// Noise standard deviation used at each executed stage.
    pub noise_std: Vec<f64>,
}

impl CeemdanStats {
    pub fn total_sifts(&self) -> usize {
        self.sift_counts.iter().flatten().sum()
    }

    /// Largest number of sifts any single realization spent across all stages.
    pub fn max_sifts_per_realization(&self) -> usize {
        let nr = self.sift_counts.iter().map(Vec::len).max().unwrap_or(0);
        (0..nr)
            .map(|r| self.sift_counts.iter().filter_map(|s| s.get(r)).sum())
            .max()
            .unwrap_or(0)
    }
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

pub fn ceemdan(signal: &Signal, cfg: &CeemdanConfig, sift_cfg: &SiftConfig) -> Result<ImfSet> {
    ceemdan_with(signal, cfg, sift_cfg, Exec::default()).map(|(set, _)| set)
}

/// Full decomposition with an explicit execution policy. Realizations of a
/// stage run under `exec`; their IMFs are summed in ascending realization
/// order, so the result does not depend on the policy.
pub fn ceemdan_with(
    signal: &Signal,
    cfg: &CeemdanConfig,
    sift_cfg: &SiftConfig,
    exec: Exec,
) -> Result<(ImfSet, CeemdanStats)> {
    cfg.validate()?;
    sift_cfg.validate()?;
    let x = signal.samples();
    let n = x.len();
    if n < MIN_SIGNAL_LEN {
        return Err(Error::InvalidInput(format!(
            "signal has {n} samples, decomposition needs at least {MIN_SIGNAL_LEN}"
        )));
    }
    let stage_cfg = SiftConfig { max_sifts_per_imf: cfg.sift_cap(sift_cfg), ..*sift_cfg };
    let input_std = std_dev(x);

    let mut imfs: Vec<Vec<f64>> = Vec::with_capacity(cfg.k);
    let mut residual = x.to_vec();
    // running Σ IMF_j, scaled by ε when mixed into the next stage
    let mut imf_sum = vec![0.0; n];
    let mut stats = CeemdanStats::default();

    for stage in 1..=cfg.k {
        if find_extrema(&residual).total() < stage_cfg.min_extrema {
            break;
        }
        let sigma = cfg.epsilon * if cfg.snr_flag == 1 { std_dev(&residual) } else { input_std };
        let base: Vec<f64> = residual
            .iter()
            .zip(&imf_sum)
            .map(|(r, s)| r + cfg.epsilon * s)
            .collect();

        let realizations = exec.map_range(cfg.nr, |r| {
            let stream = derive_seed(cfg.seed, &[stage as u64, r as u64 + 1]);
            let mut mixture = gaussian_noise(n, 1.0, stream);
            for (m, b) in mixture.iter_mut().zip(&base) {
                *m = b + sigma * *m;
            }
            sift(&mixture, &stage_cfg).ok()
        });

        let mut mean = vec![0.0; n];
        let mut counts = Vec::with_capacity(cfg.nr);
        for out in &realizations {
            match out {
                Some(o) => {
                    for (m, v) in mean.iter_mut().zip(&o.imf) {
                        *m += v;
                    }
                    counts.push(o.sift_count);
                }
                None => counts.push(0),
            }
        }
        let inv = 1.0 / cfg.nr as f64;
        for m in mean.iter_mut() {
            *m *= inv;
        }
        for ((r, s), m) in residual.iter_mut().zip(imf_sum.iter_mut()).zip(&mean) {
            *r -= m;
            *s += m;
        }
        stats.sift_counts.push(counts);
        stats.noise_std.push(sigma);
        imfs.push(mean);
    }
    imfs.resize_with(cfg.k, || vec![0.0; n]);
    Ok((ImfSet { imfs, residual, config: *cfg }, stats))
}

#[cfg(test)]
mod tests;
