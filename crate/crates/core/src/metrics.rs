//! Detection AUC, target amplitude/phase errors and SNR improvement.
//!
//! Target bins are the nearest FFT bins of the ground-truth beat
//! frequencies; there is no tolerance window.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{amplitude_db_of, phase_deg_of, RangeMatrix};

/// Amplitude assigned to an exactly zero bin.
pub const AMPLITUDE_FLOOR_DB: f64 = -120.0;
/// Phase error charged when the predicted bin is zero.
pub const UNDEFINED_PHASE_PENALTY_DEG: f64 = 90.0;
/// Half-width of the guard excluded around each target in the noise floor.
pub const NOISE_GUARD_BINS: usize = 5;

fn floored_db(m: &RangeMatrix, bin: usize) -> Result<f64> {
    Ok(m.amplitude_db(bin)?.max(AMPLITUDE_FLOOR_DB))
}

/// Area under the ROC curve via the Mann-Whitney statistic, ties counted 0.5.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: scores.len(), got: labels.len() });
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; a tie group shares its mean rank
        let rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        pos_rank_sum += rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Per-bin detection scores of one profile: amplitude in dB relative to the
/// profile's strongest bin.
pub fn profile_scores(profile: &RangeMatrix) -> Vec<f64> {
    let db: Vec<f64> = profile.amplitudes_db().into_iter().map(|a| a.max(AMPLITUDE_FLOOR_DB)).collect();
    let peak = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    db.into_iter().map(|a| a - peak).collect()
}

/// Bin labels of one profile: positive at every target bin.
pub fn profile_labels(n: usize, target_bins: &[usize]) -> Vec<bool> {
    let mut labels = alloc::vec![false; n];
    for &b in target_bins {
        if b < n {
            labels[b] = true;
        }
    }
    labels
}

/// Mean over targets of `|dB(pred) - dB(truth)|` with a floor for zero bins.
pub fn amplitude_mae_db(pred: &RangeMatrix, truth: &RangeMatrix, target_bins: &[usize]) -> Result<f64> {
    Ok(amplitude_errors_db(pred, truth, target_bins)?.iter().sum::<f64>() / target_bins.len().max(1) as f64)
}

fn amplitude_errors_db(pred: &RangeMatrix, truth: &RangeMatrix, target_bins: &[usize]) -> Result<Vec<f64>> {
    target_bins.iter().map(|&b| Ok((floored_db(pred, b)? - floored_db(truth, b)?).abs())).collect()
}

/// Wrapped angular distance in degrees, in `[0, 180]`.
pub fn angular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn phase_errors_deg(pred: &RangeMatrix, truth: &RangeMatrix, target_bins: &[usize]) -> Result<Vec<f64>> {
    target_bins
        .iter()
        .map(|&b| {
            let (pr, pi) = pred.row(b)?;
            let (tr, ti) = truth.row(b)?;
            Ok(match (phase_deg_of(pr, pi), phase_deg_of(tr, ti)) {
                (Some(p), Some(t)) => angular_distance_deg(p, t),
                _ => UNDEFINED_PHASE_PENALTY_DEG,
            })
        })
        .collect()
}

/// Mean wrapped phase error over targets; a zero predicted bin costs 90 degrees.
pub fn phase_mae_deg(pred: &RangeMatrix, truth: &RangeMatrix, target_bins: &[usize]) -> Result<f64> {
    Ok(phase_errors_deg(pred, truth, target_bins)?.iter().sum::<f64>() / target_bins.len().max(1) as f64)
}

/// Median amplitude (dB, floored) over bins outside `+-5` of every target.
pub fn noise_floor_db(profile: &RangeMatrix, target_bins: &[usize]) -> f64 {
    let n = profile.rows();
    let mut excluded = alloc::vec![false; n];
    for &b in target_bins {
        for d in 0..=2 * NOISE_GUARD_BINS {
            let idx = (b + n + d - NOISE_GUARD_BINS) % n;
            excluded[idx] = true;
        }
    }
    let rows = profile.as_rows();
    let mut db: Vec<f64> = (0..n)
        .filter(|&m| !excluded[m])
        .map(|m| amplitude_db_of(rows[2 * m], rows[2 * m + 1]).max(AMPLITUDE_FLOOR_DB))
        .collect();
    if db.is_empty() {
        return AMPLITUDE_FLOOR_DB;
    }
    db.sort_unstable_by(f64::total_cmp);
    let mid = db.len() / 2;
    if db.len() % 2 == 1 {
        db[mid]
    } else {
        0.5 * (db[mid - 1] + db[mid])
    }
}

/// Peak-to-floor SNR of the strongest target.
pub fn profile_snr_db(profile: &RangeMatrix, target_bins: &[usize], strongest_bin: usize) -> Result<f64> {
    Ok(floored_db(profile, strongest_bin)? - noise_floor_db(profile, target_bins))
}

/// SNR of the strongest target after mitigation minus before.
pub fn delta_snr(
    pred: &RangeMatrix,
    interfered: &RangeMatrix,
    target_bins: &[usize],
    strongest_bin: usize,
) -> Result<f64> {
    Ok(profile_snr_db(pred, target_bins, strongest_bin)? - profile_snr_db(interfered, target_bins, strongest_bin)?)
}

/// Evaluation summary for one method on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub split: String,
    pub auc: f64,
    pub amp_mae_db: f64,
    pub phase_mae_deg: f64,
    pub mean_delta_snr_db: f64,
    pub n_samples: usize,
    /// Mean wall-clock time per signal, milliseconds.
    pub ms_per_signal: f64,
}

impl MetricsReport {
    /// Checks the documented ranges; NaN anywhere is rejected.
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.auc)
            && self.amp_mae_db >= 0.0
            && (0.0..=180.0).contains(&self.phase_mae_deg)
            && self.mean_delta_snr_db.is_finite()
            && self.ms_per_signal >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("metrics out of range or NaN"))
        }
    }
}

/// Accumulates per-signal results; pooled AUC lists are merged in any order.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    scores: Vec<f64>,
    labels: Vec<bool>,
    amp_err_sum: f64,
    phase_err_sum: f64,
    targets: usize,
    delta_snr_sum: f64,
    signals: usize,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one signal: the method's spectrum, the clean label spectrum and
    /// the unmitigated spectrum, all on the raw (unnormalized) scale.
    pub fn push(
        &mut self,
        pred: &RangeMatrix,
        truth: &RangeMatrix,
        interfered: &RangeMatrix,
        target_bins: &[usize],
        strongest_bin: usize,
    ) -> Result<()> {
        let n = pred.rows();
        if truth.rows() != n || interfered.rows() != n {
            return Err(Error::LengthMismatch { expected: n, got: truth.rows().min(interfered.rows()) });
        }
        self.scores.extend(profile_scores(pred));
        self.labels.extend(profile_labels(n, target_bins));
        self.amp_err_sum += amplitude_errors_db(pred, truth, target_bins)?.iter().sum::<f64>();
        self.phase_err_sum += phase_errors_deg(pred, truth, target_bins)?.iter().sum::<f64>();
        self.targets += target_bins.len();
        self.delta_snr_sum += delta_snr(pred, interfered, target_bins, strongest_bin)?;
        self.signals += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: MetricsAccumulator) {
        self.scores.extend(other.scores);
        self.labels.extend(other.labels);
        self.amp_err_sum += other.amp_err_sum;
        self.phase_err_sum += other.phase_err_sum;
        self.targets += other.targets;
        self.delta_snr_sum += other.delta_snr_sum;
        self.signals += other.signals;
    }

    pub fn signals(&self) -> usize {
        self.signals
    }

    pub fn finish(&self, method: &str, split: &str, ms_per_signal: f64) -> Result<MetricsReport> {
        let report = MetricsReport {
            method: method.into(),
            split: split.into(),
            auc: roc_auc(&self.scores, &self.labels)?,
            amp_mae_db: self.amp_err_sum / self.targets.max(1) as f64,
            phase_mae_deg: self.phase_err_sum / self.targets.max(1) as f64,
            mean_delta_snr_db: self.delta_snr_sum / self.signals.max(1) as f64,
            n_samples: self.signals,
            ms_per_signal,
        };
        report.validate()?;
        Ok(report)
    }
}
