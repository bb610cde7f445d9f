//! Closed-form `2 x 2` symmetric eigendecomposition and the spectral
//! function used by singular value thresholding.

use super::{Scalar, SHRINK_EPS};

/// `G = V diag(e) V^T` with `V = [[cos, -sin], [sin, cos]]`, `e[0] >= e[1]`.
#[derive(Debug, Clone, Copy)]
pub struct Eigen2<T> {
    cos: T,
    sin: T,
    e: [T; 2],
}

fn half<T: Scalar>() -> T {
    T::from_f64(0.5)
}

/// `max(sqrt(e) - lambda, 0) / (sqrt(e) + eps)`: maps an eigenvalue of
/// `X^T X` to the factor its singular direction is scaled by.
pub fn svt_gain<T: Scalar>(e: T, lambda: T) -> T {
    let s = e.max(T::zero()).sqrt();
    (s - lambda).max(T::zero()) / (s + T::from_f64(SHRINK_EPS))
}

fn svt_gain_de<T: Scalar>(e: T, lambda: T) -> T {
    let s = e.max(T::zero()).sqrt();
    if s > lambda && s > T::zero() {
        let d = s + T::from_f64(SHRINK_EPS);
        (lambda + T::from_f64(SHRINK_EPS)) / (d * d * (s + s))
    } else {
        T::zero()
    }
}

fn svt_gain_dlambda<T: Scalar>(e: T, lambda: T) -> T {
    let s = e.max(T::zero()).sqrt();
    if s > lambda {
        -T::one() / (s + T::from_f64(SHRINK_EPS))
    } else {
        T::zero()
    }
}

impl<T: Scalar> Eigen2<T> {
    /// Decomposes `[[a, b], [b, c]]`.
    pub fn of_symmetric(a: T, b: T, c: T) -> Self {
        let two = T::one() + T::one();
        let theta = half::<T>() * (two * b).atan2(a - c);
        let mean = half::<T>() * (a + c);
        let radius = (half::<T>() * (a - c)).hypot(b);
        Self { cos: theta.cos(), sin: theta.sin(), e: [mean + radius, mean - radius] }
    }

    #[cfg(test)]
    pub fn values(&self) -> [T; 2] {
        self.e
    }

    /// Column `i` of `V`.
    fn vector(&self, i: usize) -> [T; 2] {
        if i == 0 {
            [self.cos, self.sin]
        } else {
            [-self.sin, self.cos]
        }
    }

    /// `V diag(f(e)) V^T`, row-major.
    pub fn reconstruct(&self, f: impl Fn(T) -> T) -> [T; 4] {
        let mut m = [T::zero(); 4];
        for i in 0..2 {
            let v = self.vector(i);
            let fe = f(self.e[i]);
            m[0] += fe * v[0] * v[0];
            m[1] += fe * v[0] * v[1];
            m[2] += fe * v[1] * v[0];
            m[3] += fe * v[1] * v[1];
        }
        m
    }

    /// Pulls `dL/dM` back through `M = V diag(gain(e)) V^T` using the
    /// divided-difference (Daleckii-Krein) formula. Returns `(dL/dG, dL/dlambda)`.
    pub fn backward(&self, dm: &[T], lambda: T) -> ([T; 4], T) {
        let off = half::<T>() * (dm[1] + dm[2]);
        let sym = [dm[0], off, off, dm[3]];
        let v = [self.vector(0), self.vector(1)];
        // P = V^T sym V
        let mut p = [[T::zero(); 2]; 2];
        for (i, vi) in v.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                p[i][j] = vi[0] * (sym[0] * vj[0] + sym[1] * vj[1]) + vi[1] * (sym[2] * vj[0] + sym[3] * vj[1]);
            }
        }
        let [e0, e1] = self.e;
        let d0 = svt_gain_de(e0, lambda);
        let d1 = svt_gain_de(e1, lambda);
        let gap = e0 - e1;
        let tol = T::epsilon().sqrt() * (e0.abs() + e1.abs());
        let cross = if gap > tol {
            (svt_gain(e0, lambda) - svt_gain(e1, lambda)) / gap
        } else {
            half::<T>() * (d0 + d1)
        };
        let q = [[d0 * p[0][0], cross * p[0][1]], [cross * p[1][0], d1 * p[1][1]]];
        let mut dg = [T::zero(); 4];
        for r in 0..2 {
            for c in 0..2 {
                let mut acc = T::zero();
                for i in 0..2 {
                    for j in 0..2 {
                        acc += v[i][r] * q[i][j] * v[j][c];
                    }
                }
                dg[r * 2 + c] = acc;
            }
        }
        let dlam = p[0][0] * svt_gain_dlambda(e0, lambda) + p[1][1] * svt_gain_dlambda(e1, lambda);
        (dg, dlam)
    }
}
