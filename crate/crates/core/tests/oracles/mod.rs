//! Reference implementations used only to check the library: finite
//! differences, a Jacobi SVD, a direct DFT and a hand-written unfolded layer.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|a - b| / max(|a|, |b|)`, norm-wise; 0 when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` at `x` along the coordinates in `which`.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], which: &[usize], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    which
        .iter()
        .map(|&i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Singular triplets of an `n x 2` matrix given by its two columns, by
/// one-sided Jacobi rotations.
pub struct Svd2 {
    pub sigma: [f64; 2],
    /// Left singular vectors, one column each (zero where sigma is zero).
    pub u: [Vec<f64>; 2],
    /// Right singular vectors as columns of a 2x2 rotation.
    pub v: [[f64; 2]; 2],
}

pub fn jacobi_svd(col0: &[f64], col1: &[f64]) -> Svd2 {
    let mut a = col0.to_vec();
    let mut b = col1.to_vec();
    let mut v = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..60 {
        let alpha: f64 = a.iter().map(|x| x * x).sum();
        let beta: f64 = b.iter().map(|x| x * x).sum();
        let gamma: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        if gamma.abs() <= 1e-300 || gamma.abs() <= 1e-17 * (alpha * beta).sqrt() {
            break;
        }
        let zeta = (beta - alpha) / (2.0 * gamma);
        let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = c * t;
        for i in 0..a.len() {
            let (p, q) = (a[i], b[i]);
            a[i] = c * p - s * q;
            b[i] = s * p + c * q;
        }
        for row in &mut v {
            let (p, q) = (row[0], row[1]);
            row[0] = c * p - s * q;
            row[1] = s * p + c * q;
        }
    }
    let s0 = norm(&a);
    let s1 = norm(&b);
    let unit = |c: Vec<f64>, s: f64| if s > 0.0 { c.iter().map(|x| x / s).collect() } else { vec![0.0; c.len()] };
    Svd2 { sigma: [s0, s1], u: [unit(a, s0), unit(b, s1)], v }
}

/// `U (Sigma - lambda)_+ V^T` from [`jacobi_svd`], as two columns.
pub fn reference_svt(col0: &[f64], col1: &[f64], lambda: f64) -> [Vec<f64>; 2] {
    let svd = jacobi_svd(col0, col1);
    let n = col0.len();
    let mut out = [vec![0.0; n], vec![0.0; n]];
    for k in 0..2 {
        let s = (svd.sigma[k] - lambda).max(0.0);
        for (j, col) in out.iter_mut().enumerate() {
            for i in 0..n {
                col[i] += s * svd.u[k][i] * svd.v[j][k];
            }
        }
    }
    out
}

/// Direct `O(N^2)` DFT.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|m| {
            x.iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ((m * k) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Zero-padded cross-correlation, `x: [c_in][len]`, `w: [c_out][c_in][k]`.
pub fn direct_conv(x: &[Vec<f64>], w: &[Vec<Vec<f64>>], b: Option<&[f64]>, pad: usize) -> Vec<Vec<f64>> {
    let len = x[0].len();
    let k = w[0][0].len();
    let out_len = len + 2 * pad + 1 - k;
    w.iter()
        .enumerate()
        .map(|(o, wo)| {
            (0..out_len)
                .map(|t| {
                    let mut acc = b.map_or(0.0, |b| b[o]);
                    for (ci, wc) in wo.iter().enumerate() {
                        for (j, wv) in wc.iter().enumerate() {
                            let pos = t as isize + j as isize - pad as isize;
                            if pos >= 0 && (pos as usize) < len {
                                acc += wv * x[ci][pos as usize];
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Row-wise complex soft threshold with the same epsilon guard.
pub fn reference_soft(x: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let n = x[0].len();
    let mut out = vec![vec![0.0; n]; 2];
    for i in 0..n {
        let m = x[0][i].hypot(x[1][i]);
        let g = (1.0 - lambda / (m + 1e-12)).max(0.0);
        out[0][i] = x[0][i] * g;
        out[1][i] = x[1][i] * g;
    }
    out
}
pub mod checks;
