//! im2col/col2im convolution kernels backed by GEMM.

use alloc::vec;
use alloc::vec::Vec;

use super::{ConvGeometry, Scalar};

pub fn conv_output_len(len: usize, geom: ConvGeometry) -> Option<usize> {
    let padded = len + 2 * geom.pad;
    if geom.stride == 0 || geom.kernel == 0 || geom.kernel > padded {
        return None;
    }
    Some((padded - geom.kernel) / geom.stride + 1)
}

pub struct ConvGrads<T> {
    pub dx: Vec<T>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

/// Rows `(channel, tap)`, columns output positions:
/// `cols[(c, kk)][t] = x[c][t * stride + kk - pad]` (zero outside).
fn im2col<T: Scalar>(x: &[T], channels: usize, len: usize, cols_len: usize, geom: ConvGeometry) -> Vec<T> {
    let k = geom.kernel;
    let mut cols = vec![T::zero(); channels * k * cols_len];
    for c in 0..channels {
        let src = &x[c * len..(c + 1) * len];
        for kk in 0..k {
            let row = &mut cols[(c * k + kk) * cols_len..(c * k + kk + 1) * cols_len];
            let offset = kk as isize - geom.pad as isize;
            if geom.stride == 1 {
                let t0 = (-offset).max(0) as usize;
                let t1 = ((len as isize - offset).min(cols_len as isize)).max(0) as usize;
                if t0 < t1 {
                    let s0 = (t0 as isize + offset) as usize;
                    row[t0..t1].copy_from_slice(&src[s0..s0 + (t1 - t0)]);
                }
            } else {
                for (t, r) in row.iter_mut().enumerate() {
                    let s = (t * geom.stride) as isize + offset;
                    if s >= 0 && (s as usize) < len {
                        *r = src[s as usize];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters `cols` back onto a `(channels, len)` buffer.
fn col2im<T: Scalar>(cols: &[T], channels: usize, len: usize, cols_len: usize, geom: ConvGeometry, out: &mut [T]) {
    let k = geom.kernel;
    for c in 0..channels {
        let dst = &mut out[c * len..(c + 1) * len];
        for kk in 0..k {
            let row = &cols[(c * k + kk) * cols_len..(c * k + kk + 1) * cols_len];
            let offset = kk as isize - geom.pad as isize;
            if geom.stride == 1 {
                let t0 = (-offset).max(0) as usize;
                let t1 = ((len as isize - offset).min(cols_len as isize)).max(0) as usize;
                if t0 < t1 {
                    let s0 = (t0 as isize + offset) as usize;
                    dst[s0..s0 + (t1 - t0)].iter_mut().zip(&row[t0..t1]).for_each(|(d, &v)| *d += v);
                }
            } else {
                for (t, &v) in row.iter().enumerate() {
                    let s = (t * geom.stride) as isize + offset;
                    if s >= 0 && (s as usize) < len {
                        dst[s as usize] += v;
                    }
                }
            }
        }
    }
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T], len: usize) {
    for (row, &b) in out.chunks_exact_mut(len).zip(bias) {
        row.iter_mut().for_each(|v| *v += b);
    }
}

fn row_sums<T: Scalar>(g: &[T], len: usize) -> Vec<T> {
    g.chunks_exact(len).map(|r| r.iter().copied().sum()).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn forward<T: Scalar>(
    x: &[T],
    w: &[T],
    b: Option<&[T]>,
    c_in: usize,
    len: usize,
    c_out: usize,
    out_len: usize,
    geom: ConvGeometry,
) -> Vec<T> {
    let rows = c_in * geom.kernel;
    let cols = im2col(x, c_in, len, out_len, geom);
    let mut out = vec![T::zero(); c_out * out_len];
    if let Some(b) = b {
        add_bias(&mut out, b, out_len);
    }
    T::gemm(c_out, rows, out_len, w, (rows, 1), &cols, (out_len, 1), &mut out, true);
    out
}

#[allow(clippy::too_many_arguments)]
pub fn backward<T: Scalar>(
    x: &[T],
    w: &[T],
    gy: &[T],
    c_in: usize,
    len: usize,
    c_out: usize,
    out_len: usize,
    geom: ConvGeometry,
) -> ConvGrads<T> {
    let rows = c_in * geom.kernel;
    let cols = im2col(x, c_in, len, out_len, geom);
    let mut dw = vec![T::zero(); c_out * rows];
    T::gemm(c_out, out_len, rows, gy, (out_len, 1), &cols, (1, out_len), &mut dw, false);
    let mut dcols = cols;
    T::gemm(rows, c_out, out_len, w, (1, rows), gy, (out_len, 1), &mut dcols, false);
    let mut dx = vec![T::zero(); c_in * len];
    col2im(&dcols, c_in, len, out_len, geom, &mut dx);
    ConvGrads { dx, dw, db: row_sums(gy, out_len) }
}

#[allow(clippy::too_many_arguments)]
pub fn transpose_forward<T: Scalar>(
    x: &[T],
    w: &[T],
    b: Option<&[T]>,
    c_in: usize,
    len: usize,
    c_out: usize,
    out_len: usize,
    geom: ConvGeometry,
) -> Vec<T> {
    let rows = c_out * geom.kernel;
    let mut cols = vec![T::zero(); rows * len];
    T::gemm(rows, c_in, len, w, (1, rows), x, (len, 1), &mut cols, false);
    let mut out = vec![T::zero(); c_out * out_len];
    if let Some(b) = b {
        add_bias(&mut out, b, out_len);
    }
    col2im(&cols, c_out, out_len, len, geom, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
pub fn transpose_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    gy: &[T],
    c_in: usize,
    len: usize,
    c_out: usize,
    out_len: usize,
    geom: ConvGeometry,
) -> ConvGrads<T> {
    let rows = c_out * geom.kernel;
    let dcols = im2col(gy, c_out, out_len, len, geom);
    let mut dx = vec![T::zero(); c_in * len];
    T::gemm(c_in, rows, len, w, (rows, 1), &dcols, (len, 1), &mut dx, false);
    let mut dw = vec![T::zero(); c_in * rows];
    T::gemm(c_in, len, rows, x, (len, 1), &dcols, (1, len), &mut dw, false);
    ConvGrads { dx, dw, db: row_sums(gy, out_len) }
}
