//! Ten-branch multiscale CNN over IMF sets, and its training loop.
//!
//! Branch `k` sees IMF `k` only:
//! conv(8, 5) → ReLU → pool(2) → dropout → conv(16, 5) → ReLU → pool(2) → dropout → flatten.
//! The flattened branch features are concatenated and classified by
//! dense(32, ReLU) → dropout → dense(2) → softmax.

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::ceemdan::ImfSet;
use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::nn::{
    axpy, maxpool1d, maxpool1d_backward, softmax, softmax_xent, Activation, AdamState, Checkpoint, Conv1d, Dense,
    Dropout, DropoutMask, Mode, NamedTensor, Pooled, Tensor,
};
use crate::par::Exec;
use crate::rng::{derive_seed, stream};

pub const MIN_INPUT_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub k_branches: usize,
    pub input_len: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel_width: usize,
    pub pool_width: usize,
    pub drop_branch: f64,
    pub hidden: usize,
    pub drop_head: f64,
    pub classes: usize,
}

impl ModelSpec {
    pub fn new(k_branches: usize, input_len: usize) -> Self {
        Self {
            k_branches,
            input_len,
            conv1_filters: 8,
            conv2_filters: 16,
            kernel_width: 5,
            pool_width: 2,
            drop_branch: 0.6,
            hidden: 32,
            drop_head: 0.7,
            classes: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.input_len < MIN_INPUT_LEN {
            return bad(format!("input length {} is below the minimum {MIN_INPUT_LEN}", self.input_len));
        }
        if self.k_branches == 0 || self.conv1_filters == 0 || self.conv2_filters == 0 || self.hidden == 0 {
            return bad("layer sizes must be positive".into());
        }
        if self.kernel_width == 0 || self.pool_width == 0 {
            return bad("kernel and pool widths must be positive".into());
        }
        if self.classes != 2 {
            return bad(format!("only binary classification is supported, got {} classes", self.classes));
        }
        for (name, r) in [("branch", self.drop_branch), ("head", self.drop_head)] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} dropout {r} outside [0, 1)"));
            }
        }
        if self.pooled_lens().is_none() {
            return bad(format!("input length {} is too short for the branch layers", self.input_len));
        }
        Ok(())
    }

    /// Row lengths after the first and second pooling stages.
    fn pooled_lens(&self) -> Option<(usize, usize)> {
        let w = self.kernel_width;
        let c1 = self.input_len.checked_sub(w - 1).filter(|&l| l > 0)?;
        let p1 = c1 / self.pool_width;
        let c2 = p1.checked_sub(w - 1).filter(|&l| l > 0)?;
        let p2 = c2 / self.pool_width;
        (p1 > 0 && p2 > 0).then_some((p1, p2))
    }

    pub fn branch_flatten_len(&self) -> usize {
        self.pooled_lens().map_or(0, |(_, p2)| p2 * self.conv2_filters)
    }

    pub fn concat_len(&self) -> usize {
        self.k_branches * self.branch_flatten_len()
    }

    pub fn tensor_sizes(&self) -> Vec<usize> {
        let w = self.kernel_width;
        let mut sizes = Vec::with_capacity(4 * self.k_branches + 4);
        for _ in 0..self.k_branches {
            sizes.extend([self.conv1_filters * w, self.conv1_filters]);
            sizes.extend([self.conv2_filters * self.conv1_filters * w, self.conv2_filters]);
        }
        sizes.extend([self.hidden * self.concat_len(), self.hidden, self.classes * self.hidden, self.classes]);
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.tensor_sizes().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mscnn {
    pub spec: ModelSpec,
    pub branches: Vec<Branch>,
    pub hidden: Dense,
    pub output: Dense,
}

struct BranchCache {
    input: Tensor,
    act1: Tensor,
    pool1: Pooled,
    mask1: Option<DropoutMask>,
    drop1: Tensor,
    act2: Tensor,
    pool2: Pooled,
    mask2: Option<DropoutMask>,
}

/// Forward-pass state consumed by [`Mscnn::backward`].
pub struct ForwardCache {
    branches: Vec<BranchCache>,
    pub features: Vec<f64>,
    hidden: Vec<f64>,
    hidden_mask: Option<DropoutMask>,
    hidden_dropped: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// One sample's gradient in compact form. The large hidden-layer weight
/// gradient is kept as the outer product `hidden_delta ⊗ features` and only
/// expanded when accumulated into [`Grads`].
pub struct SampleGrad {
    pub loss: f64,
    pub branch: Vec<[Vec<f64>; 4]>,
    pub features: Vec<f64>,
    pub hidden_delta: Vec<f64>,
    pub output_weight: Vec<f64>,
    pub output_bias: Vec<f64>,
}

/// Gradient buffers laid out like [`Mscnn::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self { tensors: spec.tensor_sizes().into_iter().map(|n| vec![0.0; n]).collect() }
    }

    pub fn clear(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn accumulate(&mut self, g: &SampleGrad, scale: f64) {
        for (k, parts) in g.branch.iter().enumerate() {
            for (j, part) in parts.iter().enumerate() {
                axpy(scale, part, &mut self.tensors[4 * k + j]);
            }
        }
        let base = 4 * g.branch.len();
        let width = g.features.len();
        for (j, &d) in g.hidden_delta.iter().enumerate() {
            if d != 0.0 {
                axpy(scale * d, &g.features, &mut self.tensors[base][j * width..(j + 1) * width]);
            }
        }
        axpy(scale, &g.hidden_delta, &mut self.tensors[base + 1]);
        axpy(scale, &g.output_weight, &mut self.tensors[base + 2]);
        axpy(scale, &g.output_bias, &mut self.tensors[base + 3]);
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.concat()
    }
}

/// Zero-mean, unit-variance copy of every IMF row (std floored at 1e-12).
pub fn standardize(imfs: &ImfSet, spec: &ModelSpec) -> Result<Vec<Tensor>> {
    if imfs.k() != spec.k_branches {
        return Err(Error::Shape(format!("model has {} branches, sample has {} IMFs", spec.k_branches, imfs.k())));
    }
    imfs.imfs
        .iter()
        .map(|row| {
            if row.len() != spec.input_len {
                return Err(Error::Shape(format!("model expects length {}, IMF has {}", spec.input_len, row.len())));
            }
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let std = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
            Tensor::new(row.iter().map(|v| (v - mean) / std).collect(), 1, row.len())
        })
        .collect()
}

impl Mscnn {
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let w = spec.kernel_width;
        let branches = (0..spec.k_branches as u64)
            .map(|k| Branch {
                conv1: Conv1d::kaiming(spec.conv1_filters, 1, w, derive_seed(seed, &[k, 0])),
                conv2: Conv1d::kaiming(spec.conv2_filters, spec.conv1_filters, w, derive_seed(seed, &[k, 1])),
            })
            .collect();
        Ok(Self {
            spec,
            branches,
            hidden: Dense::kaiming(spec.concat_len(), spec.hidden, derive_seed(seed, &[1000])),
            output: Dense::kaiming(spec.hidden, spec.classes, derive_seed(seed, &[1001])),
        })
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(4 * self.branches.len() + 4);
        for b in &self.branches {
            out.extend([&b.conv1.weight[..], &b.conv1.bias, &b.conv2.weight, &b.conv2.bias]);
        }
        out.extend([&self.hidden.weight[..], &self.hidden.bias, &self.output.weight, &self.output.bias]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(4 * self.branches.len() + 4);
        for b in &mut self.branches {
            out.push(&mut b.conv1.weight);
            out.push(&mut b.conv1.bias);
            out.push(&mut b.conv2.weight);
            out.push(&mut b.conv2.bias);
        }
        out.push(&mut self.hidden.weight);
        out.push(&mut self.hidden.bias);
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for k in 0..self.branches.len() {
            for part in ["conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"] {
                names.push(format!("branch{k}.{part}"));
            }
        }
        names.extend(["hidden.weight", "hidden.bias", "output.weight", "output.bias"].map(String::from));
        names
    }

    /// Runs the network on one IMF set. Dropout masks are drawn from streams
    /// derived from `seed`; in inference mode the seed is unused.
    pub fn forward(&self, sample: &ImfSet, mode: Mode, seed: u64) -> Result<ForwardCache> {
        let inputs = standardize(sample, &self.spec)?;
        let drop_b = Dropout::new(self.spec.drop_branch);
        let mut branches = Vec::with_capacity(inputs.len());
        let mut features = Vec::with_capacity(self.spec.concat_len());
        for (k, (input, br)) in inputs.into_iter().zip(&self.branches).enumerate() {
            let k = k as u64;
            let act1 = br.conv1.forward(&input, Activation::Relu)?;
            let pool1 = maxpool1d(&act1, self.spec.pool_width)?;
            let (d1, mask1) = drop_b.forward(&pool1.output.data, mode, derive_seed(seed, &[k, 0]));
            let drop1 = Tensor { data: d1, channels: pool1.output.channels, len: pool1.output.len };
            let act2 = br.conv2.forward(&drop1, Activation::Relu)?;
            let pool2 = maxpool1d(&act2, self.spec.pool_width)?;
            let (d2, mask2) = drop_b.forward(&pool2.output.data, mode, derive_seed(seed, &[k, 1]));
            features.extend(d2);
            branches.push(BranchCache { input, act1, pool1, mask1, drop1, act2, pool2, mask2 });
        }
        let hidden = self.hidden.forward(&features, Activation::Relu)?;
        let (hidden_dropped, hidden_mask) =
            Dropout::new(self.spec.drop_head).forward(&hidden, mode, derive_seed(seed, &[1000]));
        let logits = self.output.forward(&hidden_dropped, Activation::None)?;
        let probs = softmax(&logits);
        Ok(ForwardCache { branches, features, hidden, hidden_mask, hidden_dropped, logits, probs })
    }

    /// Inference-mode class probabilities.
    pub fn probs(&self, sample: &ImfSet) -> Result<Vec<f64>> {
        Ok(self.forward(sample, Mode::Infer, 0)?.probs)
    }

    /// Cross-entropy gradient of one sample with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, label: u8) -> SampleGrad {
        let xent = softmax_xent(&cache.logits, label as usize);
        let g_logits = &xent.grad_logits;
        let mut output_weight = vec![0.0; self.output.weight.len()];
        self.output.accumulate_weight_grad(g_logits, &cache.hidden_dropped, 1.0, &mut output_weight);
        let g_dropped = self.output.input_grad(g_logits);
        let g_hidden = Dropout::backward(&g_dropped, cache.hidden_mask.as_ref());
        let hidden_delta = self.hidden.delta(&cache.hidden, Activation::Relu, &g_hidden);
        let g_features = self.hidden.input_grad(&hidden_delta);

        let flat = self.spec.branch_flatten_len();
        let branch = cache
            .branches
            .iter()
            .zip(&self.branches)
            .enumerate()
            .map(|(k, (bc, br))| {
                let g = Dropout::backward(&g_features[k * flat..(k + 1) * flat], bc.mask2.as_ref());
                let g = Tensor { data: g, channels: bc.pool2.output.channels, len: bc.pool2.output.len };
                let g_act2 = maxpool1d_backward(&bc.pool2, &g);
                let c2 = br.conv2.backward(&bc.drop1, &bc.act2, Activation::Relu, &g_act2, true);
                let g_drop1 = c2.input.expect("input gradient requested");
                let g = Dropout::backward(&g_drop1.data, bc.mask1.as_ref());
                let g = Tensor { data: g, channels: g_drop1.channels, len: g_drop1.len };
                let g_act1 = maxpool1d_backward(&bc.pool1, &g);
                let c1 = br.conv1.backward(&bc.input, &bc.act1, Activation::Relu, &g_act1, false);
                [c1.weight, c1.bias, c2.weight, c2.bias]
            })
            .collect();
        SampleGrad {
            loss: xent.loss,
            branch,
            features: cache.features.clone(),
            hidden_delta,
            output_weight,
            output_bias: xent.grad_logits,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let s = &self.spec;
        let meta = vec![
            ("k_branches".into(), s.k_branches as u64),
            ("input_len".into(), s.input_len as u64),
            ("conv1_filters".into(), s.conv1_filters as u64),
            ("conv2_filters".into(), s.conv2_filters as u64),
            ("kernel_width".into(), s.kernel_width as u64),
            ("pool_width".into(), s.pool_width as u64),
            ("drop_branch_bits".into(), s.drop_branch.to_bits()),
            ("hidden".into(), s.hidden as u64),
            ("drop_head_bits".into(), s.drop_head.to_bits()),
            ("classes".into(), s.classes as u64),
        ];
        let tensors = self
            .tensor_names()
            .into_iter()
            .zip(self.tensors())
            .map(|(name, t)| NamedTensor { name, shape: vec![t.len()], values: t.to_vec() })
            .collect();
        Checkpoint { meta, tensors }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let get = |key: &str| ck.meta(key).ok_or_else(|| Error::InvalidInput(format!("checkpoint lacks `{key}`")));
        let spec = ModelSpec {
            k_branches: get("k_branches")? as usize,
            input_len: get("input_len")? as usize,
            conv1_filters: get("conv1_filters")? as usize,
            conv2_filters: get("conv2_filters")? as usize,
            kernel_width: get("kernel_width")? as usize,
            pool_width: get("pool_width")? as usize,
            drop_branch: f64::from_bits(get("drop_branch_bits")?),
            hidden: get("hidden")? as usize,
            drop_head: f64::from_bits(get("drop_head_bits")?),
            classes: get("classes")? as usize,
        };
        let mut model = Self::build(spec, 0)?;
        let names = model.tensor_names();
        if ck.tensors.len() != names.len() {
            return Err(Error::Shape(format!("checkpoint has {} tensors, model needs {}", ck.tensors.len(), names.len())));
        }
        for ((dst, src), name) in model.tensors_mut().into_iter().zip(&ck.tensors).zip(&names) {
            if &src.name != name || src.values.len() != dst.len() {
                return Err(Error::Shape(format!(
                    "checkpoint tensor `{}` ({} values) does not match `{name}` ({})",
                    src.name,
                    src.values.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(&src.values);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?).map_err(|e| e.context(format!("loading {}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Validation loss must drop by more than this to reset patience.
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-5, batch_size: 16, max_epochs: 100, patience: 15, seed: 0, min_delta: 1e-6 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch size, max epochs and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience exceeds max epochs");
        }
        if !(self.min_delta >= 0.0) {
            return bad("min_delta must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_loss,val_acc,seconds";

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// Equality of everything except wall-clock timings.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        self.best_epoch == other.best_epoch
            && self.stopped_early == other.stopped_early
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.val_loss.to_bits() == b.val_loss.to_bits()
                    && a.val_acc.to_bits() == b.val_acc.to_bits()
            })
    }

    /// Median epoch duration.
    pub fn seconds_per_epoch(&self) -> f64 {
        let mut s: Vec<f64> = self.epochs.iter().map(|e| e.seconds).collect();
        if s.is_empty() {
            return 0.0;
        }
        s.sort_by(f64::total_cmp);
        let m = s.len() / 2;
        if s.len() % 2 == 1 {
            s[m]
        } else {
            0.5 * (s[m - 1] + s[m])
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# best_epoch={} stopped_early={}", self.best_epoch, self.stopped_early)?;
        writeln!(w, "{HISTORY_HEADER}")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_acc, e.seconds)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {line}"),
            message,
        };
        let mut h = TrainHistory::default();
        let mut saw_header = false;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            let n = i + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("best_epoch", v)) => {
                            h.best_epoch = v.parse().map_err(|_| parse_err(n, format!("bad best_epoch `{v}`")))?
                        }
                        Some(("stopped_early", v)) => {
                            h.stopped_early = v.parse().map_err(|_| parse_err(n, format!("bad stopped_early `{v}`")))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if line != HISTORY_HEADER {
                    return Err(parse_err(n, format!("expected header `{HISTORY_HEADER}`")));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(parse_err(n, format!("expected 5 fields, found {}", fields.len())));
            }
            let num = |j: usize| fields[j].parse::<f64>().map_err(|_| parse_err(n, format!("bad number `{}`", fields[j])));
            h.epochs.push(EpochRecord {
                epoch: fields[0].parse().map_err(|_| parse_err(n, format!("bad epoch `{}`", fields[0])))?,
                train_loss: num(1)?,
                val_loss: num(2)?,
                val_acc: num(3)?,
                seconds: num(4)?,
            });
        }
        if !saw_header {
            return Err(parse_err(0, "missing header".into()));
        }
        Ok(h)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValScore {
    pub loss: f64,
    pub accuracy: f64,
}

fn sample_imfs(ds: &WindowedDataset, i: usize) -> Result<&ImfSet> {
    ds.samples[i]
        .imfs()
        .ok_or_else(|| Error::InvalidInput(format!("sample {i} has not been decomposed")))
}

/// Mean infer-mode cross-entropy and accuracy over `ds`.
pub fn evaluate(model: &Mscnn, ds: &WindowedDataset, exec: Exec) -> Result<ValScore> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let per = exec.map_range(ds.len(), |i| -> Result<(f64, bool)> {
        let cache = model.forward(sample_imfs(ds, i)?, Mode::Infer, 0)?;
        let label = ds.samples[i].label;
        Ok((softmax_xent(&cache.logits, label as usize).loss, argmax(&cache.probs) == label))
    });
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in per {
        let (l, ok) = r?;
        loss += l;
        correct += ok as usize;
    }
    let n = ds.len() as f64;
    Ok(ValScore { loss: loss / n, accuracy: correct as f64 / n })
}

/// Trains a fresh model, validating on `val` after every epoch.
pub fn fit(
    train: &WindowedDataset,
    val: &WindowedDataset,
    spec: ModelSpec,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(Mscnn, TrainHistory)> {
    if val.is_empty() {
        return Err(Error::InvalidInput("empty validation set".into()));
    }
    fit_with(train, spec, cfg, exec, |model, _| evaluate(model, val, exec))
}

/// [`fit`] with a caller-supplied validation function, called with the
/// current model and the 1-based epoch.
pub fn fit_with<V>(
    train: &WindowedDataset,
    spec: ModelSpec,
    cfg: &TrainConfig,
    exec: Exec,
    mut validate: V,
) -> Result<(Mscnn, TrainHistory)>
where
    V: FnMut(&Mscnn, usize) -> Result<ValScore>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    for i in 0..train.len() {
        sample_imfs(train, i)?;
    }
    let mut model = Mscnn::build(spec, derive_seed(cfg.seed, &[0]))?;
    let mut adam = AdamState::new(&spec.tensor_sizes(), cfg.lr);
    let mut grads = Grads::zeros(&spec);
    let mut history = TrainHistory::default();
    let mut best_model = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut reference = f64::INFINITY;
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut stream(derive_seed(cfg.seed, &[1, epoch as u64])));
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let per = exec.map_slice(batch, |&i| -> Result<SampleGrad> {
                let seed = derive_seed(cfg.seed, &[2, epoch as u64, i as u64]);
                let cache = model.forward(sample_imfs(train, i)?, Mode::Train, seed)?;
                Ok(model.backward(&cache, train.samples[i].label))
            });
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            for g in per {
                let g = g?;
                if !g.loss.is_finite() {
                    return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}")));
                }
                loss_sum += g.loss;
                grads.accumulate(&g, scale);
            }
            let refs: Vec<&[f64]> = grads.tensors.iter().map(|t| &t[..]).collect();
            adam.update(&mut model.tensors_mut(), &refs)?;
        }
        let score = validate(&model, epoch)?;
        if !score.loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite validation loss at epoch {epoch}")));
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss: score.loss,
            val_acc: score.accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });
        if score.loss < best_loss {
            best_loss = score.loss;
            best_model.clone_from(&model);
            history.best_epoch = epoch;
        }
        if score.loss < reference - cfg.min_delta {
            reference = score.loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    Ok((best_model, history))
}

/// Index of the larger probability; exact ties go to label 0.
pub fn argmax(probs: &[f64]) -> u8 {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    best as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<u8>,
    pub probs: Vec<Vec<f64>>,
    pub seconds_per_sample: f64,
}

pub fn predict(model: &Mscnn, ds: &WindowedDataset, exec: Exec) -> Result<Predictions> {
    if ds.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let started = Instant::now();
    let probs = exec
        .map_range(ds.len(), |i| model.probs(sample_imfs(ds, i)?))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let seconds_per_sample = started.elapsed().as_secs_f64() / ds.len() as f64;
    Ok(Predictions { labels: probs.iter().map(|p| argmax(p)).collect(), probs, seconds_per_sample })
}
