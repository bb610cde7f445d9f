use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimalloc::MiMalloc;
use urpca::dataset::{self, load_split, DatasetManifest, Split, SplitCounts};
use urpca::error::{Error, Result};
use urpca::evaluate::{bench, report_text, table_header, table_row, write_report, MethodSpec};
use urpca::pipeline::{evaluate_on_dir, sweep_depth, train_to_file};
use urpca::spectrum_io::{plot_spectra, read_signal, spectrum_text, write_signal};
use urpca_core::rpca::BlockVariant;
use urpca_core::scenario::GenerationRanges;
use urpca_core::signal::RadarConfig;
use urpca_core::spectrum::{range_matrix, Window};
use urpca_core::train::TrainConfig;

#[global_allocator]
static GLOBAL: MiMalloc = MiMalloc;

const DATA_ENV: &str = "URPCA_DATA";

/// Unfolded robust PCA for FMCW radar interference mitigation.
#[derive(Parser)]
#[command(name = "urpca", version)]
struct Cli {
    /// Worker threads (0 = all cores, 1 = strict deterministic mode).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Window applied before every transform: `rect` or `hann`.
    #[arg(long, global = true, default_value = "rect", value_parser = parse_window)]
    window: Window,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset directory.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4000)]
        train: usize,
        #[arg(long, default_value_t = 1000)]
        val: usize,
        #[arg(long, default_value_t = 1000)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file overriding the generation ranges.
        #[arg(long)]
        ranges: Option<PathBuf>,
    },
    /// Train a model and write its best-validation checkpoint.
    Train {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "roc-ae")]
        variant: BlockVariant,
        #[arg(long, default_value_t = 8)]
        layers: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opt: OptimArgs,
        /// Epoch log file (default: `<out>.log`).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a method on a split.
    Eval {
        #[command(flatten)]
        data: DataArg,
        /// `ckpt:FILE`, `zeroing`, `oracle` or `identity`.
        #[arg(long)]
        method: MethodSpec,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Report path; `.txt` and `.json` files are written.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Mitigate one text signal file and write its spectrum.
    Mitigate {
        #[arg(long)]
        method: MethodSpec,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Clean reference signal, needed by the oracle.
        #[arg(long)]
        clean: Option<PathBuf>,
        /// SVG comparison of input and mitigated spectra.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Time a method, single-threaded, from signal to spectrum.
    Bench {
        #[arg(long)]
        method: Vec<MethodSpec>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Seed of the generated benchmark signals.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one model per depth and tabulate phase MAE.
    SweepDepth {
        #[command(flatten)]
        data: DataArg,
        /// Depths as `A..B` (inclusive) or a comma list.
        #[arg(long, default_value = "1..13")]
        layers: String,
        #[arg(long, default_value = "roc-ae")]
        variant: BlockVariant,
        #[arg(long, default_value = "val")]
        split: Split,
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        opt: OptimArgs,
    },
    /// Write one stored signal as a text file.
    Export {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Export the clean signal instead of the interfered one.
        #[arg(long)]
        clean: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArg {
    /// Dataset directory.
    #[arg(long = "data", env = DATA_ENV)]
    dir: PathBuf,
}

#[derive(Args)]
struct OptimArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 20)]
    batch: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl OptimArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch,
            learning_rate: self.lr,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }
}

fn parse_window(s: &str) -> std::result::Result<Window, String> {
    match s {
        "rect" | "rectangular" => Ok(Window::Rectangular),
        "hann" => Ok(Window::Hann),
        _ => Err(format!("unknown window `{s}`; use rect or hann")),
    }
}

fn parse_depths(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Usage(format!("bad depth list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a == 0 || a > b {
            return Err(bad());
        }
        Ok((a..=b).collect())
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    let window = cli.window;
    match cli.command {
        Command::Gen { out, train, val, test, seed, ranges } => {
            let ranges = match ranges {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
                    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?
                }
                None => GenerationRanges::default(),
            };
            let manifest =
                DatasetManifest::new(seed, SplitCounts { train, val, test }, ranges, RadarConfig::default());
            dataset::generate(&manifest, &out, threads)?;
            println!("wrote {} / {} / {} records to {}", train, val, test, out.display());
        }
        Command::Train { data, variant, layers, out, opt, log } => {
            let log_path = log.unwrap_or_else(|| out.with_extension("log"));
            let mut log = fs::File::create(&log_path).map_err(Error::io(&log_path))?;
            let mut log_err = None;
            let outcome = train_to_file(&data.dir, &out, variant, layers, opt.config(), window, threads, |r| {
                println!("{}", r.log_line());
                if let Err(e) = writeln!(log, "{}", r.log_line()) {
                    log_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = log_err {
                return Err(Error::io(&log_path)(e));
            }
            println!("best epoch {}; checkpoint {}", outcome.best_epoch, out.display());
        }
        Command::Eval { data, method, split, report } => {
            let method = method.load()?;
            let r = evaluate_on_dir(&data.dir, &method, split, window, threads)?;
            println!("{}\n{}", table_header(), table_row(&r));
            if let Some(path) = report {
                write_report(&path, &report_text(&r), &r)?;
            }
        }
        Command::Mitigate { method, input, out, clean, plot } => {
            let method = method.load()?;
            let signal = read_signal(&input)?;
            let clean = clean.map(|p| read_signal(&p)).transpose()?;
            let spectrum = method.spectrum(&signal, clean.as_deref(), window)?;
            fs::write(&out, spectrum_text(&spectrum)).map_err(Error::io(&out))?;
            if let Some(path) = plot {
                plot_spectra(&path, &range_matrix(&signal, window)?, &spectrum, &method.to_string())?;
            }
        }
        Command::Bench { method, n, seed } => {
            if method.is_empty() {
                return Err(Error::Usage("give at least one --method".into()));
            }
            let manifest = DatasetManifest::new(
                seed,
                SplitCounts { train: 0, val: 0, test: n },
                GenerationRanges::default(),
                RadarConfig::default(),
            );
            let signals = (0..n)
                .map(|i| manifest.generate_record(Split::Test, i).map(|p| p.interfered))
                .collect::<Result<Vec<_>>>()?;
            println!("{:<28} {:>10} {:>10}", "method", "mean ms", "p95 ms");
            for spec in &method {
                let r = bench(&spec.load()?, &signals, window)?;
                println!("{:<28} {:>10.3} {:>10.3}", r.method, r.mean_ms, r.p95_ms);
            }
        }
        Command::SweepDepth { data, layers, variant, split, report, opt } => {
            let depths = parse_depths(&layers)?;
            let points = sweep_depth(&data.dir, variant, &depths, opt.config(), split, window, threads, |k, r| {
                println!("K={k} {}", r.log_line());
            })?;
            let mut text = format!("{:>3} {:>14} {:>12} {:>8}\n", "K", "phase_mae_deg", "amp_mae_db", "auc");
            for p in &points {
                text += &format!("{:>3} {:>14.4} {:>12.4} {:>8.4}\n", p.layers, p.phase_mae_deg, p.amp_mae_db, p.auc);
            }
            print!("{text}");
            write_report(&report, &text, &points)?;
        }
        Command::Export { data, split, index, clean, out } => {
            let pairs = load_split(&data.dir, split)?;
            let pair = pairs
                .get(index)
                .ok_or_else(|| Error::Usage(format!("{split} has {} records", pairs.len())))?;
            write_signal(&out, if clean { &pair.clean } else { &pair.interfered })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

