//! Recording ingestion, windowing, labeling, shuffling, splitting and batch
//! decomposition into network-ready samples.

use std::fmt;
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::ceemdan::{ceemdan_with, CeemdanConfig, ImfSet};
use crate::emd::{Signal, SiftConfig};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::{derive_seed, fnv1a, stream};

pub const DEFAULT_SAMPLE_RATE: f64 = 40_000.0;
pub const F64LE_MAGIC: &[u8; 4] = b"VIB1";
const F64LE_HEADER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Healthy,
    Damaged,
}

impl Condition {
    pub fn label(self) -> u8 {
        match self {
            Condition::Healthy => 0,
            Condition::Damaged => 1,
        }
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "healthy" | "0" => Ok(Condition::Healthy),
            "damaged" | "1" => Ok(Condition::Damaged),
            other => Err(format!("unknown condition {other:?}")),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Healthy => "healthy",
            Condition::Damaged => "damaged",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelFormat {
    Csv,
    F64Le,
}

impl ChannelFormat {
    /// `.csv` files are text, anything else is taken as `VIB1` binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ChannelFormat::Csv,
            _ => ChannelFormat::F64Le,
        }
    }
}

impl FromStr for ChannelFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ChannelFormat::Csv),
            "f64le" => Ok(ChannelFormat::F64Le),
            other => Err(format!("unknown format {other:?} (expected csv or f64le)")),
        }
    }
}

/// Reads one channel. CSV carries one sample per line and takes its rate
/// from `csv_sample_rate`; binary files carry their own rate.
pub fn load_channel(path: &Path, format: ChannelFormat, csv_sample_rate: f64) -> Result<Signal> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        ChannelFormat::Csv => read_csv_channel(std::io::BufReader::new(file), path, csv_sample_rate),
        ChannelFormat::F64Le => {
            let mut bytes = Vec::new();
            std::io::BufReader::new(file).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
            decode_f64le(&bytes, path)
        }
    }
}

fn read_csv_channel<R: BufRead>(r: R, path: &Path, sample_rate: f64) -> Result<Signal> {
    let mut samples = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t.parse().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {}", i + 1),
            message: format!("{t:?}: {e}"),
        })?;
        samples.push(v);
    }
    Signal::new(samples, sample_rate).map_err(|e| e.context(path.display().to_string()))
}

pub fn decode_f64le(bytes: &[u8], path: &Path) -> Result<Signal> {
    let err = |offset: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        location: format!("offset {offset}"),
        message,
    };
    if bytes.len() < F64LE_HEADER {
        return Err(err(0, format!("{} bytes, header needs {F64LE_HEADER}", bytes.len())));
    }
    if &bytes[..4] != F64LE_MAGIC {
        return Err(err(0, "bad magic, expected VIB1".into()));
    }
    let rate = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[F64LE_HEADER..];
    if body.len() != count * 8 {
        return Err(err(F64LE_HEADER, format!("header declares {count} samples, body holds {} bytes", body.len())));
    }
    let samples = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Signal::new(samples, rate as f64).map_err(|e| e.context(path.display().to_string()))
}

pub fn encode_f64le(signal: &Signal) -> Result<Vec<u8>> {
    let rate = signal.sample_rate_hz();
    if rate.fract() != 0.0 || rate > u32::MAX as f64 {
        return Err(Error::InvalidInput(format!("sample rate {rate} does not fit the u32 header field")));
    }
    let count = u32::try_from(signal.len())
        .map_err(|_| Error::InvalidInput("too many samples for the u32 header field".into()))?;
    let mut out = Vec::with_capacity(F64LE_HEADER + 8 * signal.len());
    out.extend_from_slice(F64LE_MAGIC);
    out.extend_from_slice(&(rate as u32).to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for v in signal.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_f64le(path: &Path, signal: &Signal) -> Result<()> {
    let bytes = encode_f64le(signal)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_csv_channel(path: &Path, signal: &Signal) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    signal
        .samples()
        .iter()
        .try_for_each(|v| writeln!(w, "{v}"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// First `count` contiguous non-overlapping windows of `window_len` samples.
pub fn window(signal: &[f64], window_len: usize, count: usize) -> Result<Vec<&[f64]>> {
    if window_len == 0 || count == 0 {
        return Err(Error::InvalidInput("window length and count must be >= 1".into()));
    }
    let need = window_len * count;
    if signal.len() < need {
        return Err(Error::InvalidInput(format!(
            "{} samples, {count} windows of {window_len} need {need}",
            signal.len()
        )));
    }
    Ok(signal.chunks_exact(window_len).take(count).collect())
}

#[derive(Debug, Clone)]
pub struct RawRecord {
    /// Source identity used in provenance and cache names (file stem).
    pub source: String,
    pub channel_id: String,
    pub condition: Condition,
    pub signal: Signal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub source: String,
    pub channel_id: String,
    pub window_index: usize,
}

impl Provenance {
    pub fn cache_name(&self, label: u8) -> String {
        format!("{}_{}_{}_{}.csv", self.source, self.channel_id, self.window_index, label)
    }

    /// Inverse of [`Provenance::cache_name`]; fields are split from the right
    /// so source names may contain underscores.
    pub fn parse_cache_name(name: &str) -> Option<(Provenance, u8)> {
        let stem = name.strip_suffix(".csv")?;
        let mut parts = stem.rsplitn(4, '_');
        let label = parts.next()?.parse().ok()?;
        let window_index = parts.next()?.parse().ok()?;
        let channel_id = parts.next()?.to_string();
        let source = parts.next()?.to_string();
        Some((Provenance { source, channel_id, window_index }, label))
    }

    pub fn seed(&self, root: u64) -> u64 {
        derive_seed(
            root,
            &[fnv1a(self.source.as_bytes()), fnv1a(self.channel_id.as_bytes()), self.window_index as u64],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleData {
    Raw(Vec<f64>),
    Decomposed(ImfSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub data: SampleData,
    pub label: u8,
    pub provenance: Provenance,
}

impl Sample {
    pub fn imfs(&self) -> Option<&ImfSet> {
        match &self.data {
            SampleData::Decomposed(s) => Some(s),
            SampleData::Raw(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub samples: Vec<Sample>,
    pub window_len: usize,
    pub sample_rate_hz: f64,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// True when every sample is an IMF set (vacuously true when empty).
    pub fn decomposed(&self) -> bool {
        self.samples.iter().all(|s| matches!(s.data, SampleData::Decomposed(_)))
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for s in &self.samples {
            c[s.label as usize] += 1;
        }
        c
    }

    fn subset(&self, range: std::ops::Range<usize>) -> Self {
        Self { samples: self.samples[range].to_vec(), window_len: self.window_len, sample_rate_hz: self.sample_rate_hz }
    }
}

/// Windows every record, labels the windows from the record's condition and
/// shuffles the result with a seeded Fisher-Yates pass.
pub fn build_dataset(
    records: &[RawRecord],
    window_len: usize,
    windows_per_record: usize,
    seed: u64,
) -> Result<WindowedDataset> {
    let first = records.first().ok_or_else(|| Error::InvalidInput("no records".into()))?;
    let sample_rate_hz = first.signal.sample_rate_hz();
    let mut samples = Vec::with_capacity(records.len() * windows_per_record);
    for rec in records {
        let ctx = || format!("record {} / {}", rec.source, rec.channel_id);
        if rec.signal.sample_rate_hz() != sample_rate_hz {
            return Err(Error::InvalidInput(format!(
                "sample rate {} differs from {sample_rate_hz}",
                rec.signal.sample_rate_hz()
            ))
            .context(ctx()));
        }
        let windows = window(rec.signal.samples(), window_len, windows_per_record).map_err(|e| e.context(ctx()))?;
        for (window_index, w) in windows.into_iter().enumerate() {
            samples.push(Sample {
                data: SampleData::Raw(w.to_vec()),
                label: rec.condition.label(),
                provenance: Provenance {
                    source: rec.source.clone(),
                    channel_id: rec.channel_id.clone(),
                    window_index,
                },
            });
        }
    }
    samples.shuffle(&mut stream(seed));
    Ok(WindowedDataset { samples, window_len, sample_rate_hz })
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
}

/// Contiguous split of an already shuffled dataset:
/// `floor(n*train_frac)`, `floor(n*val_frac)` and the remainder.
pub fn split(ds: &WindowedDataset, train_frac: f64, val_frac: f64) -> Result<Split> {
    let in_unit = |f: f64| f > 0.0 && f < 1.0;
    if !in_unit(train_frac) || !in_unit(val_frac) || train_frac + val_frac >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "fractions train {train_frac}, val {val_frac} must lie in (0,1) and sum below 1"
        )));
    }
    let n = ds.len();
    // the epsilon absorbs representation error, e.g. 1400 * 0.7 = 979.99...
    let floor = |f: f64| (n as f64 * f + 1e-9).floor() as usize;
    let n_train = floor(train_frac);
    let n_val = floor(val_frac);
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidInput(format!(
            "{n} samples leave an empty partition ({n_train} / {n_val} / {})",
            n.saturating_sub(n_train + n_val)
        )));
    }
    Ok(Split {
        train: ds.subset(0..n_train),
        val: ds.subset(n_train..n_train + n_val),
        test: ds.subset(n_train + n_val..n),
    })
}

/// Replaces every raw window by its CEEMDAN decomposition. Window seeds are
/// derived from `cfg.seed` and the window's provenance, so the output does
/// not depend on processing order or `exec`.
pub fn decompose_all(
    ds: &WindowedDataset,
    cfg: &CeemdanConfig,
    sift_cfg: &SiftConfig,
    exec: Exec,
) -> Result<WindowedDataset> {
    cfg.validate()?;
    let results = exec.map_slice(&ds.samples, |sample| -> Result<Sample> {
        let raw = match &sample.data {
            SampleData::Raw(w) => w,
            SampleData::Decomposed(_) => {
                return Err(Error::InvalidInput("dataset is already decomposed".into()))
            }
        };
        let ctx = || format!("window {:?}", sample.provenance);
        let signal = Signal::new(raw.clone(), ds.sample_rate_hz).map_err(|e| e.context(ctx()))?;
        let window_cfg = CeemdanConfig { seed: sample.provenance.seed(cfg.seed), ..*cfg };
        // realizations stay serial; the fan-out is across windows
        let (set, _) = ceemdan_with(&signal, &window_cfg, sift_cfg, Exec::Serial).map_err(|e| e.context(ctx()))?;
        Ok(Sample { data: SampleData::Decomposed(set), label: sample.label, provenance: sample.provenance.clone() })
    });
    let samples = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(WindowedDataset { samples, window_len: ds.window_len, sample_rate_hz: ds.sample_rate_hz })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub channel_id: String,
    pub condition: Condition,
}

/// `path,channel_id,condition` per line; blank lines and `#` comments are
/// skipped. Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {}", i + 1),
            message,
        };
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!("{} fields, expected path,channel_id,condition", fields.len())));
        }
        if fields[..2].iter().any(|f| f.is_empty()) {
            return Err(err("empty path or channel id".into()));
        }
        if fields[0..2] == ["path", "channel_id"] {
            continue;
        }
        let condition = fields[2].parse().map_err(err)?;
        let p = PathBuf::from(fields[0]);
        out.push(ManifestEntry {
            path: if p.is_absolute() { p } else { base.join(p) },
            channel_id: fields[1].to_string(),
            condition,
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("{}: manifest lists no recordings", path.display())));
    }
    Ok(out)
}

pub fn load_records(
    entries: &[ManifestEntry],
    format: Option<ChannelFormat>,
    csv_sample_rate: f64,
) -> Result<Vec<RawRecord>> {
    entries
        .iter()
        .map(|e| {
            let fmt = format.unwrap_or_else(|| ChannelFormat::from_path(&e.path));
            let signal = load_channel(&e.path, fmt, csv_sample_rate)?;
            let source = e
                .path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("record")
                .to_string();
            Ok(RawRecord { source, channel_id: e.channel_id.clone(), condition: e.condition, signal })
        })
        .collect()
}

pub const CACHE_INDEX: &str = "index.csv";

/// Writes one IMF-set CSV per sample plus `index.csv`, which records the
/// dataset order.
pub fn write_cache(ds: &WindowedDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = format!("file,label,sample_rate_hz={}\n", ds.sample_rate_hz);
    for s in &ds.samples {
        let set = s
            .imfs()
            .ok_or_else(|| Error::InvalidInput("cache holds decomposed samples only".into()))?;
        let name = s.provenance.cache_name(s.label);
        set.save(&dir.join(&name))?;
        index.push_str(&format!("{name},{}\n", s.label));
    }
    let p = dir.join(CACHE_INDEX);
    std::fs::write(&p, index).map_err(|e| Error::io(&p, e))
}

/// Loads a cache directory in `index.csv` order (sorted file names when
/// the index is absent).
pub fn read_cache(dir: &Path) -> Result<WindowedDataset> {
    let index_path = dir.join(CACHE_INDEX);
    let mut sample_rate_hz = DEFAULT_SAMPLE_RATE;
    let names: Vec<String> = if index_path.exists() {
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let mut lines = text.lines();
        if let Some(rate) = lines.next().and_then(|h| h.split("sample_rate_hz=").nth(1)) {
            sample_rate_hz = rate.trim().parse().map_err(|e| Error::Parse {
                path: index_path.clone(),
                location: "line 1".into(),
                message: format!("sample rate: {e}"),
            })?;
        }
        lines.filter(|l| !l.trim().is_empty()).map(|l| l.split(',').next().unwrap().to_string()).collect()
    } else {
        let mut v: Vec<String> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(".csv") && Provenance::parse_cache_name(n).is_some())
            .collect();
        v.sort();
        v
    };
    if names.is_empty() {
        return Err(Error::InvalidInput(format!("{}: cache holds no samples", dir.display())));
    }
    let mut samples = Vec::with_capacity(names.len());
    let mut window_len = None;
    for name in names {
        let (provenance, label) = Provenance::parse_cache_name(&name)
            .ok_or_else(|| Error::InvalidInput(format!("cache file name {name:?} is not <file>_<channel>_<window>_<label>.csv")))?;
        if label > 1 {
            return Err(Error::InvalidInput(format!("{name}: label {label} is not 0 or 1")));
        }
        let set = ImfSet::load(&dir.join(&name))?;
        match window_len {
            None => window_len = Some(set.source_length()),
            Some(l) if l != set.source_length() => {
                return Err(Error::Shape(format!("{name}: {} samples, cache uses {l}", set.source_length())))
            }
            _ => {}
        }
        samples.push(Sample { data: SampleData::Decomposed(set), label, provenance });
    }
    Ok(WindowedDataset { samples, window_len: window_len.unwrap(), sample_rate_hz })
}

#[cfg(test)]
mod tests;
