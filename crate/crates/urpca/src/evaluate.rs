//! Running a mitigation method over a split: metrics, timing and reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use urpca_core::baseline::{oracle, zeroing_mitigate};
use urpca_core::metrics::{MetricsAccumulator, MetricsReport};
use urpca_core::rpca::UnfoldedModel;
use urpca_core::scenario::SamplePair;
use urpca_core::spectrum::{range_matrix, RangeMatrix, Window};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;

/// How a method is named on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MethodSpec {
    Checkpoint(PathBuf),
    Zeroing,
    Oracle,
    /// The unmitigated spectrum.
    Identity,
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zeroing" => Ok(MethodSpec::Zeroing),
            "oracle" => Ok(MethodSpec::Oracle),
            "identity" => Ok(MethodSpec::Identity),
            _ => match s.strip_prefix("ckpt:") {
                Some(path) if !path.is_empty() => Ok(MethodSpec::Checkpoint(path.into())),
                _ => Err(Error::Usage(format!("unknown method `{s}`; use ckpt:FILE, zeroing, oracle or identity"))),
            },
        }
    }
}

impl MethodSpec {
    pub fn load(&self) -> Result<Method> {
        Ok(match self {
            MethodSpec::Checkpoint(path) => {
                let (model, _) = checkpoint::load(path)?;
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Method::Model { name, model }
            }
            MethodSpec::Zeroing => Method::Zeroing,
            MethodSpec::Oracle => Method::Oracle,
            MethodSpec::Identity => Method::Identity,
        })
    }
}

/// A loaded mitigation method.
#[derive(Debug, Clone)]
pub enum Method {
    Model { name: String, model: UnfoldedModel<f32> },
    Zeroing,
    Oracle,
    Identity,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Model { name, model } => write!(f, "{name} ({} K={})", model.config().variant, model.config().layers),
            Method::Zeroing => f.write_str("zeroing"),
            Method::Oracle => f.write_str("oracle"),
            Method::Identity => f.write_str("identity"),
        }
    }
}

impl Method {
    /// Spectrum produced from the time-domain signal. `clean` is only read
    /// by the oracle.
    pub fn spectrum(&self, interfered: &[Complex64], clean: Option<&[Complex64]>, window: Window) -> Result<RangeMatrix> {
        Ok(match self {
            Method::Model { model, .. } => model.mitigate(&range_matrix(interfered, window)?)?,
            Method::Zeroing => zeroing_mitigate(interfered, window)?,
            Method::Oracle => {
                let clean = clean.ok_or_else(|| Error::Usage("the oracle needs the clean signal".into()))?;
                oracle(clean, window)?
            }
            Method::Identity => range_matrix(interfered, window)?,
        })
    }
}

/// Runs `method` over `pairs` and computes every metric. The timing is the
/// mean per-signal wall-clock of the method alone.
pub fn evaluate(method: &Method, pairs: &[SamplePair], split: &str, window: Window, threads: usize) -> Result<MetricsReport> {
    let n = pairs.first().map(|p| p.clean.len()).unwrap_or(0);
    let per_signal = map_indexed(pairs.len(), threads, |i| -> Result<(MetricsAccumulator, f64)> {
        let p = &pairs[i];
        let start = Instant::now();
        let pred = method.spectrum(&p.interfered, Some(&p.clean), window)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        let truth = range_matrix(&p.clean, window)?;
        let interfered = range_matrix(&p.interfered, window)?;
        let bins = p.scenario.target_bins(n);
        let strongest = p.scenario.strongest().map(|t| t.bin(n)).unwrap_or(0);
        let mut acc = MetricsAccumulator::new();
        acc.push(&pred, &truth, &interfered, &bins, strongest)?;
        Ok((acc, ms))
    });
    let mut acc = MetricsAccumulator::new();
    let mut total_ms = 0.0;
    for r in per_signal {
        let (a, ms) = r?;
        acc.merge(a);
        total_ms += ms;
    }
    Ok(acc.finish(&method.to_string(), split, total_ms / pairs.len().max(1) as f64)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: String,
    pub n_signals: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

/// Single-threaded timing of `method` from time-domain signal to spectrum.
pub fn bench(method: &Method, signals: &[Vec<Complex64>], window: Window) -> Result<BenchReport> {
    let mut times = Vec::with_capacity(signals.len());
    for s in signals {
        let start = Instant::now();
        let out = method.spectrum(s, Some(s), window)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(out);
    }
    times.sort_by(f64::total_cmp);
    let mean_ms = times.iter().sum::<f64>() / times.len().max(1) as f64;
    let p95_ms = times.get(((times.len() as f64 * 0.95).ceil() as usize).saturating_sub(1)).copied().unwrap_or(0.0);
    Ok(BenchReport { method: method.to_string(), n_signals: signals.len(), mean_ms, p95_ms })
}

/// Column header matching [`table_row`].
pub fn table_header() -> String {
    format!("{:<28} {:>9} {:>7} {:>8} {:>9} {:>9}", "method", "dSNR dB", "AUC", "MAE dB", "MAE deg", "ms/sig")
}

pub fn table_row(r: &MetricsReport) -> String {
    format!(
        "{:<28} {:>9.2} {:>7.4} {:>8.3} {:>9.3} {:>9.3}",
        r.method, r.mean_delta_snr_db, r.auc, r.amp_mae_db, r.phase_mae_deg, r.ms_per_signal
    )
}

/// `key: value` rendering of a report, field names as in the struct.
pub fn report_text(r: &MetricsReport) -> String {
    format!(
        "method: {}\nsplit: {}\nauc: {}\namp_mae_db: {}\nphase_mae_deg: {}\nmean_delta_snr_db: {}\nn_samples: {}\nms_per_signal: {}\n",
        r.method, r.split, r.auc, r.amp_mae_db, r.phase_mae_deg, r.mean_delta_snr_db, r.n_samples, r.ms_per_signal
    )
}

/// Writes `<path>.txt` and `<path>.json` (any extension on `path` is
/// replaced) and returns both paths.
pub fn write_report<T: Serialize>(path: &Path, text: &str, value: &T) -> Result<(PathBuf, PathBuf)> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let txt = path.with_extension("txt");
    let json = path.with_extension("json");
    fs::write(&txt, text).map_err(Error::io(&txt))?;
    let body = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    fs::write(&json, body).map_err(Error::io(&json))?;
    Ok((txt, json))
}
