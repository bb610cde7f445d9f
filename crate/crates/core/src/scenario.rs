//! Random scenario draws and clean/interfered sample pairs.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    amplitude_for_snr, interference_scale, mix, synth_clean, synth_interference, Interference, RadarConfig, Scenario,
    Target,
};

/// Ranges every scenario parameter is drawn from, uniformly and independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRanges {
    pub max_targets: usize,
    pub snr_db: (f64, f64),
    pub sir_db: (f64, f64),
    /// Interferer-to-own slope ratio; a draw within `1e-3` of 1 is redrawn.
    pub relative_slope: (f64, f64),
    /// Active interference duration as a fraction of the frame.
    pub window_fraction: (f64, f64),
    /// Level of every non-strongest target relative to the strongest, dB.
    pub secondary_level_db: (f64, f64),
    /// Lowest usable target bin.
    pub min_bin: usize,
    /// Minimum spacing between two target bins.
    pub min_bin_separation: usize,
}

impl Default for GenerationRanges {
    fn default() -> Self {
        Self {
            max_targets: 5,
            snr_db: (10.0, 40.0),
            // SIR is a per-sample ratio while SNR is measured after the FFT, so
            // milder interference than about -10 dB hides under the noise floor.
            sir_db: (-40.0, -10.0),
            relative_slope: (0.2, 3.0),
            window_fraction: (0.3, 1.0),
            secondary_level_db: (-15.0, 0.0),
            min_bin: 4,
            min_bin_separation: 3,
        }
    }
}

impl GenerationRanges {
    pub fn validate(&self, config: &RadarConfig) -> Result<()> {
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if self.max_targets == 0 {
            return Err(Error::InvalidConfig("max_targets must be at least 1"));
        }
        if ![self.snr_db, self.sir_db, self.relative_slope, self.window_fraction, self.secondary_level_db]
            .into_iter()
            .all(ordered)
        {
            return Err(Error::InvalidConfig("generation range is empty or not finite"));
        }
        if !(self.window_fraction.0 > 0.0 && self.window_fraction.1 <= 1.0) {
            return Err(Error::InvalidConfig("window fraction must lie in (0, 1]"));
        }
        if self.secondary_level_db.1 > 0.0 {
            return Err(Error::InvalidConfig("secondary targets cannot exceed the strongest"));
        }
        let usable = band_bins(config).saturating_sub(self.min_bin);
        if usable < self.max_targets * self.min_bin_separation.max(1) {
            return Err(Error::InvalidConfig("retained band too narrow for max_targets"));
        }
        Ok(())
    }
}

/// Number of non-negative FFT bins strictly inside the retained band.
fn band_bins(config: &RadarConfig) -> usize {
    libm::ceil(config.band_edge() * config.n_samples as f64) as usize
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Draws a scenario. Targets sit on FFT bins in `[min_bin, band)` with
/// pairwise spacing of at least `min_bin_separation`; the first target is the
/// strongest and its post-FFT SNR equals the drawn `snr_db`.
pub fn sample_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &GenerationRanges,
    config: &RadarConfig,
    seed: u64,
) -> Result<Scenario> {
    config.validate()?;
    ranges.validate(config)?;
    let n = config.n_samples;
    let noise_sigma = 1.0;
    let n_targets = rng.gen_range(1..=ranges.max_targets);
    let snr_db = uniform(rng, ranges.snr_db);
    let sir_db = uniform(rng, ranges.sir_db);
    let strongest = amplitude_for_snr(snr_db, n, noise_sigma);

    let mut bins: Vec<usize> = Vec::with_capacity(n_targets);
    let mut targets = Vec::with_capacity(n_targets);
    while targets.len() < n_targets {
        let bin = rng.gen_range(ranges.min_bin..band_bins(config));
        if bins.iter().any(|&b| b.abs_diff(bin) < ranges.min_bin_separation) {
            continue;
        }
        let level_db = if targets.is_empty() { 0.0 } else { uniform(rng, ranges.secondary_level_db) };
        let phase = rng.gen_range(0.0..2.0 * PI);
        bins.push(bin);
        targets.push(Target {
            amplitude: strongest * libm::pow(10.0, level_db / 20.0),
            phase,
            beat_freq: bin as f64 / n as f64,
        });
    }

    let relative_slope = loop {
        let r = uniform(rng, ranges.relative_slope);
        if (r - 1.0).abs() >= 1e-3 {
            break r;
        }
    };
    let start_freq = rng.gen_range(-0.5..0.5);
    let len = libm::round(uniform(rng, ranges.window_fraction) * n as f64).clamp(1.0, n as f64) as usize;
    let start = rng.gen_range(0..=n - len);
    let interference = Interference {
        amplitude: interference_scale(strongest, sir_db),
        relative_slope,
        start_freq,
        window: (start, start + len),
    };
    Ok(Scenario { seed, targets, interference, snr_db, sir_db, noise_sigma })
}

/// A generated training/evaluation example with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub interfered: Vec<Complex64>,
    pub clean: Vec<Complex64>,
    pub scenario: Scenario,
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Mixes a 64-bit value (splitmix64 finalizer).
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of record `index` in split `split` of a dataset with master `seed`.
pub fn record_seed(seed: u64, split: u64, index: u64) -> u64 {
    mix_seed(mix_seed(mix_seed(seed) ^ split) ^ index)
}

/// Rebuilds both signals of a scenario; the noise stream comes from its seed.
pub fn realize(scenario: &Scenario, config: &RadarConfig) -> Result<SamplePair> {
    let clean = synth_clean(scenario, config, &mut noise_rng(scenario.seed))?;
    let burst = synth_interference(&scenario.interference, config)?;
    let interfered = mix(
        &clean,
        &burst,
        scenario.interference.amplitude,
        scenario.strongest_amplitude(),
        scenario.sir_db,
    )?;
    Ok(SamplePair { interfered, clean, scenario: scenario.clone() })
}

/// Draws and realizes the sample identified by `seed`.
pub fn generate_pair(seed: u64, ranges: &GenerationRanges, config: &RadarConfig) -> Result<SamplePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scenario = sample_scenario(&mut rng, ranges, config, seed)?;
    realize(&scenario, config)
}
