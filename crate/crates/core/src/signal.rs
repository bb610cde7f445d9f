//! Complex beat-signal synthesis: target sinusoids, AWGN and a chirp
//! interferer gated by the receive low-pass filter.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radar front-end parameters shared by every generated signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Samples per chirp; also the FFT size.
    pub n_samples: usize,
    /// Sampling rate in Hz.
    pub sample_rate: f64,
    /// Transmitted chirp slope in Hz/s.
    pub chirp_slope: f64,
    /// Fraction of Nyquist kept by the receive low-pass, in `(0, 0.5]`.
    pub lowpass_fraction: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self { n_samples: 2048, sample_rate: 20e6, chirp_slope: 1e12, lowpass_fraction: 0.5 }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || !self.n_samples.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.n_samples));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig("sample rate must be positive"));
        }
        if !(self.chirp_slope > 0.0) {
            return Err(Error::InvalidConfig("chirp slope must be positive"));
        }
        if !(self.lowpass_fraction > 0.0 && self.lowpass_fraction <= 0.5) {
            return Err(Error::InvalidConfig("lowpass fraction must lie in (0, 0.5]"));
        }
        Ok(())
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Edge of the retained band in cycles/sample.
    pub fn band_edge(&self) -> f64 {
        0.5 * self.lowpass_fraction
    }

    /// Beat frequency (cycles/sample) of a reflector at round-trip `delay` seconds.
    pub fn beat_frequency(&self, delay: f64) -> f64 {
        self.chirp_slope * delay * self.sample_period()
    }
}

/// One point reflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub amplitude: f64,
    /// Radians in `[0, 2 pi)`.
    pub phase: f64,
    /// Cycles/sample.
    pub beat_freq: f64,
}

impl Target {
    pub fn from_delay(amplitude: f64, phase: f64, delay: f64, config: &RadarConfig) -> Self {
        Self { amplitude, phase, beat_freq: config.beat_frequency(delay) }
    }

    /// Nearest FFT bin of the beat frequency.
    pub fn bin(&self, n: usize) -> usize {
        let b = libm::round(self.beat_freq * n as f64) as i64;
        b.rem_euclid(n as i64) as usize
    }
}

/// A single uncorrelated FMCW interferer, as seen after dechirping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interference {
    pub amplitude: f64,
    /// Interferer slope divided by the own slope; never 1.
    pub relative_slope: f64,
    /// Instantaneous frequency at `n = 0`, cycles/sample.
    pub start_freq: f64,
    /// Active samples `[start, end)`.
    pub window: (usize, usize),
}

impl Interference {
    pub fn silent() -> Self {
        Self { amplitude: 0.0, relative_slope: 2.0, start_freq: 0.0, window: (0, 0) }
    }

    /// Chirp rate of the beat-domain interference in cycles/sample².
    pub fn chirp_rate(&self, config: &RadarConfig) -> f64 {
        let ts = config.sample_period();
        (self.relative_slope - 1.0) * config.chirp_slope * ts * ts
    }
}

/// Ground truth for one generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Seed of the noise stream; regenerates the clean signal exactly.
    pub seed: u64,
    pub targets: Vec<Target>,
    pub interference: Interference,
    pub snr_db: f64,
    pub sir_db: f64,
    pub noise_sigma: f64,
}

impl Scenario {
    pub fn strongest_amplitude(&self) -> f64 {
        self.targets.iter().map(|t| t.amplitude).fold(0.0, f64::max)
    }

    /// Index of the strongest target, if any.
    pub fn strongest(&self) -> Option<&Target> {
        self.targets.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
    }

    pub fn target_bins(&self, n: usize) -> Vec<usize> {
        self.targets.iter().map(|t| t.bin(n)).collect()
    }
}

/// Amplitude whose noise-free FFT peak sits `snr_db` above the median
/// magnitude of the complex-Gaussian noise spectrum.
///
/// The noise bins are Rayleigh with `E|W|^2 = N sigma^2`, whose median is
/// `sigma sqrt(N ln 2)`; a unit-amplitude on-grid tone peaks at `N`.
pub fn amplitude_for_snr(snr_db: f64, n: usize, noise_sigma: f64) -> f64 {
    let floor = noise_sigma * libm::sqrt(n as f64 * core::f64::consts::LN_2);
    libm::pow(10.0, snr_db / 20.0) * floor / n as f64
}

/// Noise-free sum of target sinusoids.
pub fn synth_targets(targets: &[Target], config: &RadarConfig) -> Result<Vec<Complex64>> {
    config.validate()?;
    let edge = config.band_edge();
    for t in targets {
        if !(t.beat_freq >= 0.0 && t.beat_freq < edge) {
            return Err(Error::TargetOutOfBand { freq: t.beat_freq, edge });
        }
        if !(t.amplitude > 0.0) {
            return Err(Error::InvalidConfig("target amplitude must be positive"));
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); config.n_samples];
    for t in targets {
        for (i, s) in out.iter_mut().enumerate() {
            // reduce the phase before the trig call to keep large n exact
            let cycles = (t.beat_freq * i as f64).fract();
            *s += Complex64::from_polar(t.amplitude, 2.0 * PI * cycles + t.phase);
        }
    }
    Ok(out)
}

/// Targets plus complex AWGN with per-component std `noise_sigma / sqrt(2)`.
pub fn synth_clean<R: Rng + ?Sized>(
    scenario: &Scenario,
    config: &RadarConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let mut out = synth_targets(&scenario.targets, config)?;
    let sd = scenario.noise_sigma / core::f64::consts::SQRT_2;
    if sd > 0.0 {
        for s in out.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *s += Complex64::new(sd * re, sd * im);
        }
    }
    Ok(out)
}

/// Wraps a frequency in cycles/sample into `[-0.5, 0.5)`.
pub fn wrap_frequency(f: f64) -> f64 {
    let w = (f + 0.5).rem_euclid(1.0) - 0.5;
    if w >= 0.5 {
        -0.5
    } else {
        w
    }
}

/// Beat-domain chirp `A exp(2 pi j (f_c n + beta n^2 / 2))` over the active
/// window, zeroed wherever its wrapped instantaneous frequency leaves the
/// retained band.
pub fn synth_interference(interference: &Interference, config: &RadarConfig) -> Result<Vec<Complex64>> {
    config.validate()?;
    if interference.relative_slope == 1.0 {
        return Err(Error::InvalidConfig("relative interference slope must differ from 1"));
    }
    let (start, end) = interference.window;
    if start > end || end > config.n_samples {
        return Err(Error::InvalidConfig("interference window outside the frame"));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); config.n_samples];
    if interference.amplitude == 0.0 {
        return Ok(out);
    }
    let beta = interference.chirp_rate(config);
    let fc = interference.start_freq;
    let edge = config.band_edge();
    for (n, s) in out.iter_mut().enumerate().take(end).skip(start) {
        let nf = n as f64;
        let inst = wrap_frequency(fc + beta * nf);
        if inst.abs() > edge {
            continue;
        }
        let cycles = (fc * nf).fract() + (0.5 * beta * nf * nf).fract();
        *s = Complex64::from_polar(interference.amplitude, 2.0 * PI * cycles.fract());
    }
    Ok(out)
}

/// Adds the interference rescaled so that `20 log10(strongest / A_I') = sir_db`.
///
/// `interference_amplitude` is the amplitude the burst was synthesized with.
/// An all-zero burst leaves `clean` untouched.
pub fn mix(
    clean: &[Complex64],
    interference: &[Complex64],
    interference_amplitude: f64,
    strongest_target: f64,
    sir_db: f64,
) -> Result<Vec<Complex64>> {
    if clean.len() != interference.len() {
        return Err(Error::LengthMismatch { expected: clean.len(), got: interference.len() });
    }
    if interference_amplitude == 0.0 || interference.iter().all(|c| c.re == 0.0 && c.im == 0.0) {
        return Ok(clean.to_vec());
    }
    let gain = interference_scale(strongest_target, sir_db) / interference_amplitude;
    Ok(clean.iter().zip(interference).map(|(c, i)| c + i * gain).collect())
}

/// `A_I'` for the given strongest-target amplitude and SIR.
pub fn interference_scale(strongest_target: f64, sir_db: f64) -> f64 {
    strongest_target * libm::pow(10.0, -sir_db / 20.0)
}
