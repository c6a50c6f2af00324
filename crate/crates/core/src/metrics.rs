//! Binary classification scores with damaged (label 1) as the positive class.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timing {
    pub train_seconds_per_epoch: f64,
    pub test_ms_per_sample: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub train_seconds_per_epoch: f64,
    pub test_ms_per_sample: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Scores from confusion counts; undefined ratios are 0.
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize, timing: Timing) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1,
            train_seconds_per_epoch: timing.train_seconds_per_epoch,
            test_ms_per_sample: timing.test_ms_per_sample,
        }
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn compute_metrics(predicted: &[u8], actual: &[u8], timing: Timing) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predicted.len(), actual.len())));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidInput("no predictions".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (i, (&p, &a)) in predicted.iter().zip(actual).enumerate() {
        match (p, a) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            (0, 1) => fn_ += 1,
            _ => return Err(Error::InvalidInput(format!("label pair ({p}, {a}) at {i} is not binary"))),
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_, timing))
}

pub const METRICS_HEADER: &str = "tp,fp,tn,fn,accuracy,precision,recall,f1,train_seconds_per_epoch,test_ms_per_sample";

impl Metrics {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{METRICS_HEADER}")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            self.tp,
            self.fp,
            self.tn,
            self.fn_,
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.train_seconds_per_epoch,
            self.test_ms_per_sample
        )
    }

    pub fn read_csv<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {line}"),
            message,
        };
        let mut lines = r.lines();
        let mut next = |n: usize| -> Result<String> {
            lines.next().ok_or_else(|| err(n, "unexpected end of file".into()))?.map_err(|e| Error::io(path, e))
        };
        if next(1)?.trim() != METRICS_HEADER {
            return Err(err(1, format!("expected header `{METRICS_HEADER}`")));
        }
        let row = next(2)?;
        let f: Vec<&str> = row.trim().split(',').collect();
        if f.len() != 10 {
            return Err(err(2, format!("expected 10 fields, found {}", f.len())));
        }
        let count = |i: usize| f[i].parse::<usize>().map_err(|_| err(2, format!("bad count `{}`", f[i])));
        let real = |i: usize| f[i].parse::<f64>().map_err(|_| err(2, format!("bad number `{}`", f[i])));
        Ok(Self {
            tp: count(0)?,
            fp: count(1)?,
            tn: count(2)?,
            fn_: count(3)?,
            accuracy: real(4)?,
            precision: real(5)?,
            recall: real(6)?,
            f1: real(7)?,
            train_seconds_per_epoch: real(8)?,
            test_ms_per_sample: real(9)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), path)
    }
}
