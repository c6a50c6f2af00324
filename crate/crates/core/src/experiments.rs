//! End-to-end pipeline and the two experiment sweeps: CEEMDAN parameter
//! grid and input duration.

use std::path::Path;

use crate::ceemdan::CeemdanConfig;
use crate::dataset::{build_dataset, decompose_all, split, RawRecord, WindowedDataset};
use crate::emd::SiftConfig;
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, Metrics, Timing};
use crate::mscnn::{fit, predict, ModelSpec, Mscnn, Predictions, TrainConfig, TrainHistory};
use crate::par::Exec;
use crate::report::{LinePlot, Series};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window_len: usize,
    pub windows_per_record: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub ceemdan: CeemdanConfig,
    pub sift: SiftConfig,
    pub train: TrainConfig,
    /// Drives the window shuffle and CEEMDAN noise; training uses `train.seed`.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_len: 20_000,
            windows_per_record: 10,
            train_frac: 0.7,
            val_frac: 0.1,
            ceemdan: CeemdanConfig::default(),
            sift: SiftConfig::default(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub model: Mscnn,
    pub history: TrainHistory,
    pub metrics: Metrics,
    pub predictions: Predictions,
    pub test_labels: Vec<u8>,
}

/// Windows, shuffles and decomposes `records` into a dataset ready for training.
pub fn prepare(records: &[RawRecord], cfg: &PipelineConfig, exec: Exec) -> Result<WindowedDataset> {
    let raw = build_dataset(records, cfg.window_len, cfg.windows_per_record, cfg.seed)?;
    decompose_all(&raw, &CeemdanConfig { seed: cfg.seed, ..cfg.ceemdan }, &cfg.sift, exec)
}

/// Splits a decomposed dataset, trains on the first part, validates on the
/// second and scores the held-out remainder.
pub fn train_and_evaluate(ds: &WindowedDataset, cfg: &PipelineConfig, exec: Exec) -> Result<PipelineOutcome> {
    let parts = split(ds, cfg.train_frac, cfg.val_frac)?;
    let spec = ModelSpec::new(cfg.ceemdan.k, ds.window_len);
    let (model, history) = fit(&parts.train, &parts.val, spec, &cfg.train, exec)?;
    let predictions = predict(&model, &parts.test, exec)?;
    let test_labels = parts.test.labels();
    let timing = Timing {
        train_seconds_per_epoch: history.seconds_per_epoch(),
        test_ms_per_sample: predictions.seconds_per_sample * 1e3,
    };
    let metrics = compute_metrics(&predictions.labels, &test_labels, timing)?;
    Ok(PipelineOutcome { model, history, metrics, predictions, test_labels })
}

pub fn run_pipeline(records: &[RawRecord], cfg: &PipelineConfig, exec: Exec) -> Result<PipelineOutcome> {
    train_and_evaluate(&prepare(records, cfg, exec)?, cfg, exec)
}

/// The eight CEEMDAN settings of the parameter study, in table order.
pub fn default_grid() -> Vec<CeemdanConfig> {
    let c = |nr, max_iter, snr_flag| CeemdanConfig { nr, max_iter, snr_flag, ..CeemdanConfig::default() };
    vec![
        c(25, 250, 1),
        c(50, 250, 1),
        c(75, 250, 1),
        c(100, 250, 1),
        c(50, 100, 1),
        c(50, 250, 1),
        c(50, 500, 1),
        c(50, 250, 0),
    ]
}

/// Reads `nr,max_iter,snr_flag[,epsilon[,k]]` rows; missing columns take defaults.
pub fn read_grid(path: &Path) -> Result<Vec<CeemdanConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut grid = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { path: path.to_path_buf(), location: format!("line {}", i + 1), message };
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if !header_seen {
            header_seen = true;
            if f.first() == Some(&"nr") {
                let expected = ["nr", "max_iter", "snr_flag", "epsilon", "k"];
                if f.len() < 3 || f.len() > 5 || f[..] != expected[..f.len()] {
                    return Err(err(format!("header must be a prefix of `{}`", expected.join(","))));
                }
                continue;
            }
        }
        if !(3..=5).contains(&f.len()) {
            return Err(err(format!("{} fields, expected 3 to 5", f.len())));
        }
        let int = |j: usize| f[j].parse::<usize>().map_err(|_| err(format!("bad integer `{}`", f[j])));
        let mut c = CeemdanConfig { nr: int(0)?, max_iter: int(1)?, snr_flag: int(2)? as u8, ..CeemdanConfig::default() };
        if f.len() > 3 {
            c.epsilon = f[3].parse().map_err(|_| err(format!("bad epsilon `{}`", f[3])))?;
        }
        if f.len() > 4 {
            c.k = int(4)?;
        }
        c.validate().map_err(|e| err(e.to_string()))?;
        grid.push(c);
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput(format!("{}: empty grid", path.display())));
    }
    Ok(grid)
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

fn opt_num(s: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| format!("bad number `{s}`"))
    }
}

fn show(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRow {
    pub cell: usize,
    pub nr: usize,
    pub max_iter: usize,
    pub snr_flag: u8,
    /// Best validation accuracy; `None` when the cell failed.
    pub val_accuracy: Option<f64>,
    pub error: Option<String>,
}

pub const PARAM_HEADER: &str = "cell,nr,max_iter,snr_flag,val_accuracy,error";

impl ParamRow {
    fn matches(&self, cell: usize, c: &CeemdanConfig) -> bool {
        self.cell == cell && self.nr == c.nr && self.max_iter == c.max_iter && self.snr_flag == c.snr_flag
    }
}

pub fn write_param_rows(path: &Path, rows: &[ParamRow]) -> Result<()> {
    let mut s = format!("{PARAM_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cell,
            r.nr,
            r.max_iter,
            r.snr_flag,
            show(r.val_accuracy),
            r.error.as_deref().map(sanitize).unwrap_or_default()
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_param_rows(path: &Path) -> Result<Vec<ParamRow>> {
    read_rows(path, PARAM_HEADER, 6, |f| {
        let int = |j: usize| f[j].parse::<usize>().map_err(|_| format!("bad integer `{}`", f[j]));
        Ok(ParamRow {
            cell: int(0)?,
            nr: int(1)?,
            max_iter: int(2)?,
            snr_flag: int(3)? as u8,
            val_accuracy: opt_num(f[4])?,
            error: (!f[5].is_empty()).then(|| f[5].to_string()),
        })
    })
}

fn read_rows<T>(
    path: &Path,
    header: &str,
    width: usize,
    parse: impl Fn(&[&str]) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let err = |i: usize, message: String| Error::Parse { path: path.to_path_buf(), location: format!("line {}", i + 1), message };
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(err(0, format!("expected header `{header}`"))),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != width {
                return Err(err(i, format!("{} fields, expected {width}", f.len())));
            }
            parse(&f).map_err(|m| err(i, m))
        })
        .collect()
}

fn load_previous<T>(path: Option<&Path>, read: impl Fn(&Path) -> Result<Vec<T>>) -> Result<Vec<T>> {
    match path {
        Some(p) if p.exists() => read(p),
        _ => Ok(Vec::new()),
    }
}

/// Decomposes, trains and validates once per grid cell. Completed cells in an
/// existing `results` file are reused; a failing cell is recorded and the
/// sweep moves on. `results` is rewritten after every cell.
pub fn param_sweep(
    records: &[RawRecord],
    grid: &[CeemdanConfig],
    base: &PipelineConfig,
    results: Option<&Path>,
    exec: Exec,
) -> Result<Vec<ParamRow>> {
    let previous = load_previous(results, read_param_rows)?;
    let mut rows = Vec::with_capacity(grid.len());
    for (cell, c) in grid.iter().enumerate() {
        if let Some(done) = previous.iter().find(|r| r.matches(cell, c) && r.error.is_none()) {
            rows.push(done.clone());
            continue;
        }
        let cfg = PipelineConfig { ceemdan: *c, ..base.clone() };
        let outcome = prepare(records, &cfg, exec).and_then(|ds| {
            let parts = split(&ds, cfg.train_frac, cfg.val_frac)?;
            let spec = ModelSpec::new(c.k, ds.window_len);
            fit(&parts.train, &parts.val, spec, &cfg.train, exec)
        });
        let (val_accuracy, error) = match outcome {
            Ok((_, h)) => (h.best().map(|b| b.val_acc), None),
            Err(e) => (None, Some(sanitize(&e.to_string()))),
        };
        rows.push(ParamRow { cell, nr: c.nr, max_iter: c.max_iter, snr_flag: c.snr_flag, val_accuracy, error });
        if let Some(p) = results {
            write_param_rows(p, &rows)?;
        }
    }
    Ok(rows)
}

pub fn param_plot(rows: &[ParamRow]) -> LinePlot {
    LinePlot {
        title: "Validation accuracy per CEEMDAN setting".into(),
        x_label: "grid cell".into(),
        y_label: "validation accuracy".into(),
        series: vec![Series {
            name: "val accuracy".into(),
            points: rows.iter().filter_map(|r| r.val_accuracy.map(|a| ((r.cell + 1) as f64, a))).collect(),
        }],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationRow {
    pub duration_s: f64,
    pub window_len: usize,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub error: Option<String>,
}

pub const DURATION_HEADER: &str = "duration_s,window_len,accuracy,f1,error";

/// `duration * rate` when it is a whole number of at least 24 samples.
pub fn window_len_for(duration_s: f64, sample_rate_hz: f64) -> Result<usize> {
    let exact = duration_s * sample_rate_hz;
    let len = exact.round();
    if !(duration_s > 0.0) || (exact - len).abs() > 1e-6 * len.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "duration {duration_s} s at {sample_rate_hz} Hz is not a whole number of samples"
        )));
    }
    if (len as usize) < crate::mscnn::MIN_INPUT_LEN {
        return Err(Error::InvalidConfig(format!(
            "duration {duration_s} s gives {len} samples, below {}",
            crate::mscnn::MIN_INPUT_LEN
        )));
    }
    Ok(len as usize)
}

pub fn write_duration_rows(path: &Path, rows: &[DurationRow]) -> Result<()> {
    let mut s = format!("{DURATION_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.duration_s,
            r.window_len,
            show(r.accuracy),
            show(r.f1),
            r.error.as_deref().map(sanitize).unwrap_or_default()
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_duration_rows(path: &Path) -> Result<Vec<DurationRow>> {
    read_rows(path, DURATION_HEADER, 5, |f| {
        Ok(DurationRow {
            duration_s: f[0].parse().map_err(|_| format!("bad duration `{}`", f[0]))?,
            window_len: f[1].parse().map_err(|_| format!("bad window length `{}`", f[1]))?,
            accuracy: opt_num(f[2])?,
            f1: opt_num(f[3])?,
            error: (!f[4].is_empty()).then(|| f[4].to_string()),
        })
    })
}

/// Re-windows the records at each duration and trains a fresh model per
/// window length, scoring it on that length's held-out split.
pub fn duration_sweep(
    records: &[RawRecord],
    durations: &[f64],
    base: &PipelineConfig,
    results: Option<&Path>,
    exec: Exec,
) -> Result<Vec<DurationRow>> {
    let rate = records.first().ok_or_else(|| Error::InvalidInput("no records".into()))?.signal.sample_rate_hz();
    let previous = load_previous(results, read_duration_rows)?;
    let mut rows = Vec::with_capacity(durations.len());
    for &d in durations {
        let len = window_len_for(d, rate);
        if let Some(done) = previous
            .iter()
            .find(|r| r.duration_s.to_bits() == d.to_bits() && len.as_ref().ok() == Some(&r.window_len) && r.error.is_none())
        {
            rows.push(done.clone());
            continue;
        }
        let outcome = len.and_then(|window_len| {
            run_pipeline(records, &PipelineConfig { window_len, ..base.clone() }, exec).map(|o| (window_len, o))
        });
        rows.push(match outcome {
            Ok((window_len, o)) => DurationRow {
                duration_s: d,
                window_len,
                accuracy: Some(o.metrics.accuracy),
                f1: Some(o.metrics.f1),
                error: None,
            },
            Err(e) => DurationRow {
                duration_s: d,
                window_len: (d * rate).round().max(0.0) as usize,
                accuracy: None,
                f1: None,
                error: Some(sanitize(&e.to_string())),
            },
        });
        if let Some(p) = results {
            write_duration_rows(p, &rows)?;
        }
    }
    Ok(rows)
}

pub fn duration_plot(rows: &[DurationRow]) -> LinePlot {
    let pts = |f: fn(&DurationRow) -> Option<f64>| rows.iter().filter_map(|r| f(r).map(|v| (r.duration_s, v))).collect();
    LinePlot {
        title: "Accuracy and F1 versus input duration".into(),
        x_label: "duration (s)".into(),
        y_label: "score".into(),
        series: vec![
            Series { name: "accuracy".into(), points: pts(|r| r.accuracy) },
            Series { name: "F1".into(), points: pts(|r| r.f1) },
        ],
    }
}
