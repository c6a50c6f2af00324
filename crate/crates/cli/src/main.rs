use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imfdiag_core::ceemdan::{ceemdan, CeemdanConfig};
use imfdiag_core::dataset::{
    build_dataset, decompose_all, load_channel, load_records, read_cache, read_manifest, split, write_cache,
    ChannelFormat, WindowedDataset, DEFAULT_SAMPLE_RATE,
};
use imfdiag_core::emd::SiftConfig;
use imfdiag_core::experiments::{
    duration_plot, duration_sweep, default_grid, param_plot, param_sweep, read_grid, PipelineConfig,
};
use imfdiag_core::metrics::{compute_metrics, Metrics, Timing};
use imfdiag_core::mscnn::{fit, predict, ModelSpec, Mscnn, TrainConfig, TrainHistory};
use imfdiag_core::report::report;
use imfdiag_core::{Error, Exec};

/// CEEMDAN + multiscale CNN gearbox fault detection.
#[derive(Parser, Debug)]
#[command(name = "imfdiag", version)]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose one channel file into IMFs.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input file extension.
        #[arg(long)]
        format: Option<ChannelFormat>,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sample_rate: f64,
        #[command(flatten)]
        ceemdan: CeemdanArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Window, shuffle and decompose a manifest of recordings into a cache.
    Preprocess {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ceemdan: CeemdanArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        cache_dir: PathBuf,
    },
    /// Train on a decomposed cache and score the held-out split.
    Train {
        #[arg(long)]
        cache_dir: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Score a trained checkpoint on a cache.
    Evaluate {
        #[arg(long)]
        cache_dir: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        /// Score every cached window instead of the test split.
        #[arg(long)]
        all: bool,
    },
    /// Experiment sweeps.
    #[command(subcommand)]
    Sweep(Sweep),
}

#[derive(Subcommand, Debug)]
enum Sweep {
    /// One decompose/train/validate run per CEEMDAN setting.
    Params {
        #[command(flatten)]
        data: DataArgs,
        /// CSV of `nr,max_iter,snr_flag[,epsilon[,k]]`; defaults to the eight-row study grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        report: PathBuf,
    },
    /// Retrain and score at several input durations.
    Duration {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.10,0.15,0.20,0.25")]
        durations: Vec<f64>,
        #[command(flatten)]
        ceemdan: CeemdanArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    window_len: usize,
    #[arg(long, default_value_t = 10)]
    windows_per_record: usize,
    /// Sample rate for CSV channels.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    sample_rate: f64,
    /// Channel format; defaults to each file's extension.
    #[arg(long)]
    format: Option<ChannelFormat>,
}

#[derive(Args, Debug)]
struct CeemdanArgs {
    #[arg(long, default_value_t = 50)]
    nr: usize,
    #[arg(long, default_value_t = 250)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    snr_flag: u8,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

impl CeemdanArgs {
    fn config(&self, seed: u64) -> CeemdanConfig {
        CeemdanConfig { nr: self.nr, max_iter: self.max_iter, snr_flag: self.snr_flag, epsilon: self.epsilon, k: self.k, seed }
    }
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, default_value_t = 1e-5)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 100)]
    max_epochs: usize,
    #[arg(long, default_value_t = 15)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Core(Error::Io { path: path.to_path_buf(), source: e })
}

fn load_model(path: &Path) -> Result<Mscnn, Failure> {
    Ok(Mscnn::load(path)?)
}

fn print_metrics(m: &Metrics) {
    println!(
        "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  (tp {} fp {} tn {} fn {})",
        m.accuracy, m.precision, m.recall, m.f1, m.tp, m.fp, m.tn, m.fn_
    );
}

fn score(model: &Mscnn, ds: &WindowedDataset, history: &TrainHistory, exec: Exec, out: &Path) -> Outcome {
    let pred = predict(model, ds, exec)?;
    let timing = Timing {
        train_seconds_per_epoch: history.seconds_per_epoch(),
        test_ms_per_sample: pred.seconds_per_sample * 1e3,
    };
    let m = compute_metrics(&pred.labels, &ds.labels(), timing)?;
    print_metrics(&m);
    for p in report(history, &m, None, out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn records(data: &DataArgs) -> Result<Vec<imfdiag_core::dataset::RawRecord>, Failure> {
    let entries = read_manifest(&data.manifest)?;
    Ok(load_records(&entries, data.format, data.sample_rate)?)
}

fn pipeline(data: &DataArgs, ceemdan: CeemdanConfig, split: &SplitArgs, train: &TrainArgs) -> PipelineConfig {
    PipelineConfig {
        window_len: data.window_len,
        windows_per_record: data.windows_per_record,
        train_frac: split.train_frac,
        val_frac: split.val_frac,
        ceemdan,
        sift: SiftConfig::default(),
        train: train.config(),
        seed: train.seed,
    }
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn run(cli: Cli) -> Outcome {
    let exec = if cli.serial { Exec::Serial } else { Exec::default() };
    match cli.command {
        Command::Decompose { input, format, sample_rate, ceemdan: c, seed, output } => {
            let format = format.unwrap_or_else(|| ChannelFormat::from_path(&input));
            let signal = load_channel(&input, format, sample_rate)?;
            let set = ceemdan(&signal, &c.config(seed), &SiftConfig::default())?;
            set.save(&output)?;
            eprintln!("wrote {} IMFs of {} samples to {}", set.k(), set.source_length(), output.display());
        }
        Command::Preprocess { data, ceemdan: c, seed, cache_dir } => {
            let recs = records(&data)?;
            let raw = build_dataset(&recs, data.window_len, data.windows_per_record, seed)?;
            eprintln!("decomposing {} windows of {} samples", raw.len(), raw.window_len);
            let ds = decompose_all(&raw, &c.config(seed), &SiftConfig::default(), exec)?;
            write_cache(&ds, &cache_dir)?;
            let [h, d] = ds.class_counts();
            eprintln!("cached {} windows ({h} healthy, {d} damaged) in {}", ds.len(), cache_dir.display());
        }
        Command::Train { cache_dir, split: s, train, checkpoint, report: out } => {
            let ds = read_cache(&cache_dir)?;
            let k = ds.samples.first().and_then(|x| x.imfs()).map_or(10, |set| set.k());
            let parts = split(&ds, s.train_frac, s.val_frac)?;
            eprintln!("training on {} windows, validating on {}", parts.train.len(), parts.val.len());
            let (model, history) = fit(&parts.train, &parts.val, ModelSpec::new(k, ds.window_len), &train.config(), exec)?;
            if let Some(b) = history.best() {
                eprintln!(
                    "{} epochs, best epoch {} (val loss {:.5}, val accuracy {:.4}){}",
                    history.epochs.len(),
                    b.epoch,
                    b.val_loss,
                    b.val_acc,
                    if history.stopped_early { ", stopped early" } else { "" }
                );
            }
            if let Some(dir) = checkpoint.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            model.save(&checkpoint)?;
            eprintln!("wrote {}", checkpoint.display());
            score(&model, &parts.test, &history, exec, &out)?;
        }
        Command::Evaluate { cache_dir, checkpoint, report: out, split: s, all } => {
            let ds = read_cache(&cache_dir)?;
            let model = load_model(&checkpoint)?;
            let target = if all { ds } else { split(&ds, s.train_frac, s.val_frac)?.test };
            score(&model, &target, &TrainHistory::default(), exec, &out)?;
        }
        Command::Sweep(Sweep::Params { data, grid, split: s, train, report: out }) => {
            let grid = match grid {
                Some(p) => read_grid(&p)?,
                None => default_grid(),
            };
            let recs = records(&data)?;
            create_dir(&out)?;
            let results = out.join("params.csv");
            let cfg = pipeline(&data, CeemdanConfig::default(), &s, &train);
            let rows = param_sweep(&recs, &grid, &cfg, Some(&results), exec)?;
            println!("nr,max_iter,snr_flag,val_accuracy");
            for r in &rows {
                match (&r.val_accuracy, &r.error) {
                    (Some(a), _) => println!("{},{},{},{a:.4}", r.nr, r.max_iter, r.snr_flag),
                    (None, e) => println!("{},{},{},failed: {}", r.nr, r.max_iter, r.snr_flag, e.clone().unwrap_or_default()),
                }
            }
            let svg = out.join("sweep.svg");
            std::fs::write(&svg, param_plot(&rows).to_svg()).map_err(|e| io_err(&svg, e))?;
            eprintln!("wrote {} and {}", results.display(), svg.display());
        }
        Command::Sweep(Sweep::Duration { data, durations, ceemdan: c, split: s, train, report: out }) => {
            if durations.is_empty() {
                return Err(Failure::Usage("--durations needs at least one value".into()));
            }
            let recs = records(&data)?;
            create_dir(&out)?;
            let results = out.join("durations.csv");
            let cfg = pipeline(&data, c.config(train.seed), &s, &train);
            let rows = duration_sweep(&recs, &durations, &cfg, Some(&results), exec)?;
            println!("duration_s,window_len,accuracy,f1");
            for r in &rows {
                match (r.accuracy, r.f1) {
                    (Some(a), Some(f)) => println!("{},{},{a:.4},{f:.4}", r.duration_s, r.window_len),
                    _ => println!("{},{},failed: {}", r.duration_s, r.window_len, r.error.clone().unwrap_or_default()),
                }
            }
            let svg = out.join("sweep.svg");
            std::fs::write(&svg, duration_plot(&rows).to_svg()).map_err(|e| io_err(&svg, e))?;
            eprintln!("wrote {} and {}", results.display(), svg.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.root() {
                Error::Numeric(_) => 3,
                Error::InvalidConfig(_) => 1,
                _ => 2,
            })
        }
    }
}
