//! Zeroing mitigation and the ground-truth oracle.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::Result;
use crate::spectrum::{range_matrix, RangeMatrix, Window};

/// Detection threshold in robust standard deviations above the median.
pub const MAD_MULTIPLIER: f64 = 4.0;
/// Converts a MAD into a Gaussian-consistent standard deviation.
pub const MAD_TO_SIGMA: f64 = 1.4826;
pub const MAD_FLOOR: f64 = 1e-12;

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Flags samples whose magnitude exceeds `median + 4 * 1.4826 * MAD`.
pub fn detect_interference(signal: &[Complex64]) -> Vec<bool> {
    let mags: Vec<f64> = signal.iter().map(|s| s.norm()).collect();
    let mut scratch = mags.clone();
    let med = median(&mut scratch);
    scratch.iter_mut().zip(&mags).for_each(|(d, m)| *d = (m - med).abs());
    let mad = median(&mut scratch).max(MAD_FLOOR);
    let threshold = med + MAD_MULTIPLIER * MAD_TO_SIGMA * mad;
    mags.iter().map(|&m| m > threshold).collect()
}

/// Copy of `signal` with every masked sample set to zero.
pub fn zero_samples(signal: &[Complex64], mask: &[bool]) -> Vec<Complex64> {
    signal
        .iter()
        .zip(mask)
        .map(|(&s, &hit)| if hit { Complex64::new(0.0, 0.0) } else { s })
        .collect()
}

/// Detect, zero, transform.
pub fn zeroing_mitigate(signal: &[Complex64], window: Window) -> Result<RangeMatrix> {
    let mask = detect_interference(signal);
    range_matrix(&zero_samples(signal, &mask), window)
}

/// Spectrum of the clean (targets + noise) label signal.
pub fn oracle(clean: &[Complex64], window: Window) -> Result<RangeMatrix> {
    range_matrix(clean, window)
}
