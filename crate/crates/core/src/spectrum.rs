//! Radix-2 FFT and the `N x 2` real matrix packing of a complex spectrum.
//!
//! A [`RangeMatrix`] stores bin `m` as row `m = (re, im)`. The network
//! consumes the same data channel-major (`[re_0..re_N, im_0..im_N]`), which
//! [`RangeMatrix::to_channels`] and [`RangeMatrix::from_channels`] convert.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};

/// Amplitude reported for an exactly-zero bin.
pub const ZERO_BIN_DB: f64 = f64::NEG_INFINITY;

/// Window applied before the transform. Every pipeline must share the same one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn apply(self, signal: &mut [Complex64]) {
        if let Window::Hann = self {
            let n = signal.len() as f64;
            for (i, s) in signal.iter_mut().enumerate() {
                *s *= 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n);
            }
        }
    }
}

/// Precomputed in-place iterative radix-2 transform.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X[m] = sum x[n] exp(-2 pi j m n / N)`.
    pub fn forward(&self, buf: &mut [Complex64]) -> Result<()> {
        self.transform(buf, false)
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) -> Result<()> {
        self.transform(buf, true)?;
        let inv = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|x| *x *= inv);
        Ok(())
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) -> Result<()> {
        if buf.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: buf.len() });
        }
        for i in 0..self.n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.n {
            let stride = self.n / (2 * half);
            for start in (0..self.n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
        Ok(())
    }
}

/// Forward DFT of a power-of-two-length signal.
pub fn dft(signal: &[Complex64]) -> Result<Vec<Complex64>> {
    let fft = Fft::new(signal.len())?;
    let mut out = signal.to_vec();
    fft.forward(&mut out)?;
    Ok(out)
}

/// Inverse DFT (with `1/N`).
pub fn idft(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    let fft = Fft::new(spectrum.len())?;
    let mut out = spectrum.to_vec();
    fft.inverse(&mut out)?;
    Ok(out)
}

/// Amplitude in dB of a complex value; `-inf` for an exact zero.
pub fn amplitude_db_of(re: f64, im: f64) -> f64 {
    let mag = libm::hypot(re, im);
    if mag == 0.0 {
        ZERO_BIN_DB
    } else {
        20.0 * libm::log10(mag)
    }
}

/// Phase in degrees, in `(-180, 180]`.
pub fn phase_deg_of(re: f64, im: f64) -> Option<f64> {
    if re == 0.0 && im == 0.0 {
        return None;
    }
    let deg = libm::atan2(im, re).to_degrees();
    Some(if deg <= -180.0 { deg + 360.0 } else { deg })
}

/// A spectrum packed as an `N x 2` real matrix (row `m` = `(re, im)` of bin `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeMatrix {
    data: Vec<f64>,
    scale: f64,
}

impl RangeMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; 2 * n], scale: 1.0 }
    }

    /// Builds a matrix from row-major `(re, im)` pairs.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * n {
            return Err(Error::LengthMismatch { expected: 2 * n, got: data.len() });
        }
        Ok(Self { data, scale: 1.0 })
    }

    pub fn from_spectrum(spectrum: &[Complex64]) -> Self {
        let data = spectrum.iter().flat_map(|c| [c.re, c.im]).collect();
        Self { data, scale: 1.0 }
    }

    pub fn to_spectrum(&self) -> Vec<Complex64> {
        self.data.chunks_exact(2).map(|r| Complex64::new(r[0], r[1])).collect()
    }

    /// Number of rows (FFT bins).
    pub fn rows(&self) -> usize {
        self.data.len() / 2
    }

    pub fn as_rows(&self) -> &[f64] {
        &self.data
    }

    /// Linear factor the entries were multiplied by (1.0 if unnormalized).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn row(&self, bin: usize) -> Result<(f64, f64)> {
        if bin >= self.rows() {
            return Err(Error::BinOutOfRange { bin, len: self.rows() });
        }
        Ok((self.data[2 * bin], self.data[2 * bin + 1]))
    }

    pub fn magnitude(&self, bin: usize) -> Result<f64> {
        let (re, im) = self.row(bin)?;
        Ok(libm::hypot(re, im))
    }

    /// `20 log10 |X[bin]|`; an exactly zero bin yields [`ZERO_BIN_DB`].
    pub fn amplitude_db(&self, bin: usize) -> Result<f64> {
        let (re, im) = self.row(bin)?;
        Ok(amplitude_db_of(re, im))
    }

    /// `atan2(im, re)` in degrees, `(-180, 180]`.
    pub fn phase_deg(&self, bin: usize) -> Result<f64> {
        let (re, im) = self.row(bin)?;
        phase_deg_of(re, im).ok_or(Error::ZeroMagnitude(bin))
    }

    pub fn amplitudes_db(&self) -> Vec<f64> {
        self.data.chunks_exact(2).map(|r| amplitude_db_of(r[0], r[1])).collect()
    }

    /// Divides by the peak row magnitude; the factor is kept in [`Self::scale`].
    pub fn normalized(&self) -> Self {
        let peak = self
            .data
            .chunks_exact(2)
            .map(|r| libm::hypot(r[0], r[1]))
            .fold(0.0, f64::max);
        let factor = if peak > 0.0 { 1.0 / peak } else { 1.0 };
        self.scaled_by(factor)
    }

    /// Multiplies all entries by `factor`, accumulating it into the stored scale.
    pub fn scaled_by(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            scale: self.scale * factor,
        }
    }

    /// Undoes any normalization so amplitudes are back on the raw scale.
    pub fn denormalized(&self) -> Self {
        let inv = 1.0 / self.scale;
        Self { data: self.data.iter().map(|v| v * inv).collect(), scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn sub(&self, other: &RangeMatrix) -> Result<RangeMatrix> {
        if self.data.len() != other.data.len() {
            return Err(Error::LengthMismatch { expected: self.data.len(), got: other.data.len() });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, scale: self.scale })
    }

    /// Channel-major copy (`re` column then `im` column) for the network.
    pub fn to_channels<T: Float>(&self) -> Vec<T> {
        let n = self.rows();
        let mut out = vec![T::zero(); 2 * n];
        for (m, r) in self.data.chunks_exact(2).enumerate() {
            out[m] = T::from(r[0]).unwrap();
            out[n + m] = T::from(r[1]).unwrap();
        }
        out
    }

    pub fn from_channels<T: Float>(channels: &[T], scale: f64) -> Result<Self> {
        if channels.len() % 2 != 0 {
            return Err(Error::ShapeMismatch { op: "from_channels", detail: "odd length" });
        }
        let n = channels.len() / 2;
        let mut data = vec![0.0; 2 * n];
        for m in 0..n {
            data[2 * m] = channels[m].to_f64().unwrap();
            data[2 * m + 1] = channels[n + m].to_f64().unwrap();
        }
        Ok(Self { data, scale })
    }
}

/// Window, transform and pack a time-domain signal.
pub fn range_matrix(signal: &[Complex64], window: Window) -> Result<RangeMatrix> {
    let mut buf = signal.to_vec();
    window.apply(&mut buf);
    let fft = Fft::new(buf.len())?;
    fft.forward(&mut buf)?;
    Ok(RangeMatrix::from_spectrum(&buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(dft(&[Complex64::new(1.0, 0.0); 6]).unwrap_err(), Error::NotPowerOfTwo(6));
        assert!(Fft::new(0).is_err());
    }

    #[test]
    fn length_one_is_identity() {
        let x = [Complex64::new(2.0, -1.0)];
        assert_eq!(dft(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn matches_naive_dft() {
        let n = 16;
        let x: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(libm::sin(i as f64 * 0.7), (i * i % 5) as f64)).collect();
        let fast = dft(&x).unwrap();
        for m in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in x.iter().enumerate() {
                acc += v * Complex64::from_polar(1.0, -2.0 * PI * (m * k) as f64 / n as f64);
            }
            assert_abs_diff_eq!(fast[m].re, acc.re, epsilon = 1e-12);
            assert_abs_diff_eq!(fast[m].im, acc.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn matrix_packing_examples() {
        let ones = vec![Complex64::new(1.0, 0.0); 8];
        let m = RangeMatrix::from_spectrum(&ones);
        for b in 0..8 {
            assert_eq!(m.row(b).unwrap(), (1.0, 0.0));
        }
        let mut x = vec![Complex64::new(0.0, 0.0); 8];
        x[3] = Complex64::new(0.0, 1.0);
        assert_eq!(RangeMatrix::from_spectrum(&x).row(3).unwrap(), (0.0, 1.0));
        assert!(RangeMatrix::from_rows(4, vec![0.0; 7]).is_err());
    }

    #[test]
    fn amplitude_and_phase_examples() {
        let m = RangeMatrix::from_rows(4, vec![1.0, 0.0, 0.0, 10.0, -1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.amplitude_db(0).unwrap(), 0.0);
        assert_eq!(m.phase_deg(0).unwrap(), 0.0);
        assert_abs_diff_eq!(m.amplitude_db(1).unwrap(), 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.phase_deg(1).unwrap(), 90.0, epsilon = 1e-12);
        assert_eq!(m.amplitude_db(2).unwrap(), 0.0);
        assert_eq!(m.phase_deg(2).unwrap(), 180.0);
        assert_eq!(m.amplitude_db(3).unwrap(), ZERO_BIN_DB);
        assert_eq!(m.phase_deg(3).unwrap_err(), Error::ZeroMagnitude(3));
        assert!(m.amplitude_db(4).is_err());
        // -0.0 imaginary still maps into (-180, 180]
        assert_eq!(phase_deg_of(-1.0, -0.0), Some(180.0));
    }

    #[test]
    fn normalization_roundtrip() {
        let m = RangeMatrix::from_rows(2, vec![3.0, 4.0, 0.5, 0.0]).unwrap();
        let n = m.normalized();
        assert_abs_diff_eq!(n.magnitude(0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n.scale(), 0.2, epsilon = 1e-15);
        let back = n.denormalized();
        for (a, b) in back.as_rows().iter().zip(m.as_rows()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn channel_layout() {
        let m = RangeMatrix::from_rows(3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let ch: Vec<f64> = m.to_channels();
        assert_eq!(ch, vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        assert_eq!(RangeMatrix::from_channels(&ch, 1.0).unwrap(), m);
    }

    #[test]
    fn hann_tapers_edges() {
        let mut x = vec![Complex64::new(1.0, 0.0); 8];
        Window::Hann.apply(&mut x);
        assert_eq!(x[0].re, 0.0);
        assert_abs_diff_eq!(x[4].re, 1.0, epsilon = 1e-15);
    }
}
