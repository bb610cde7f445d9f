//! Reverse-mode differentiation over the handful of tensor primitives the
//! unfolded network needs.
//!
//! Operations append nodes to a [`Tape`]; node order is a topological order,
//! so [`Tape::backward`] is a single reverse sweep. Activations are stored
//! channel-major: a `(channels, length)` tensor keeps each channel contiguous.
//! An `N x 2` spectrum matrix is therefore the `(2, N)` tensor whose channel
//! `c` is matrix column `c`.

mod conv;
mod scalar;
mod shrink;

use alloc::vec;
use alloc::vec::Vec;

pub use conv::conv_output_len;
pub use scalar::Scalar;

use crate::error::{Error, Result};

/// Regularizer in the SVT and soft-threshold denominators.
pub const SHRINK_EPS: f64 = 1e-12;

/// Up to three dimensions, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    dims: [usize; 3],
    rank: usize,
}

impl Shape {
    pub fn scalar() -> Self {
        Self { dims: [1, 1, 1], rank: 0 }
    }

    pub fn vector(n: usize) -> Self {
        Self { dims: [n, 1, 1], rank: 1 }
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Self { dims: [rows, cols, 1], rank: 2 }
    }

    pub fn cube(a: usize, b: usize, c: usize) -> Self {
        Self { dims: [a, b, c], rank: 3 }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.rank]
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Geometry shared by the convolution primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Conv1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeometry },
    ConvTranspose1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeometry },
    Relu(Var),
    Add(Var, Var),
    Scale(Var, T),
    Mse(Var, Var),
    Gram(Var),
    ChannelMix { x: Var, m: Var },
    SpectralShrink { g: Var, lambda: Var, eig: shrink::Eigen2<T> },
    SoftThreshold { x: Var, lambda: Var },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Vec<T>,
    shape: Shape,
    op: Op<T>,
}

/// Ordered record of executed primitives. Single-owner; build one per sample.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar loss with respect to the leaves it depends on.
/// Interior gradients are released during the sweep.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` if the node does not influence the loss.
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

fn mismatch(op: &'static str, detail: &'static str) -> Error {
    Error::ShapeMismatch { op, detail }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, shape: Shape, op: Op<T>) -> Var {
        debug_assert_eq!(value.len(), shape.len());
        self.nodes.push(Node { value, shape, op });
        Var(self.nodes.len() - 1)
    }

    /// Registers an input or parameter.
    pub fn leaf(&mut self, value: Vec<T>, shape: Shape) -> Result<Var> {
        if value.len() != shape.len() {
            return Err(Error::LengthMismatch { expected: shape.len(), got: value.len() });
        }
        Ok(self.push(value, shape, Op::Leaf))
    }

    pub fn value(&self, var: Var) -> &[T] {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> Shape {
        self.nodes[var.0].shape
    }

    pub fn scalar_value(&self, var: Var) -> T {
        self.nodes[var.0].value[0]
    }

    /// Cross-correlation `x: (C_in, L)`, `w: (C_out, C_in, k)`, optional
    /// `b: (C_out)`, with zero padding; output length
    /// `floor((L + 2 pad - k) / stride) + 1`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        let bias_ok = b.map_or(true, |b| self.shape(b).len() == ws.dim(0));
        if xs.rank != 2 || ws.rank != 3 || !bias_ok {
            return Err(mismatch("conv1d", "expected x (C, L), w (C_out, C_in, k), b (C_out)"));
        }
        if ws.dim(1) != xs.dim(0) {
            return Err(mismatch("conv1d", "input channels differ from weight"));
        }
        let geom = ConvGeometry { kernel: ws.dim(2), stride, pad };
        let out_len = conv_output_len(xs.dim(1), geom)
            .ok_or_else(|| mismatch("conv1d", "kernel longer than padded input"))?;
        let value = conv::forward(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
            xs.dim(0),
            xs.dim(1),
            ws.dim(0),
            out_len,
            geom,
        );
        Ok(self.push(value, Shape::matrix(ws.dim(0), out_len), Op::Conv1d { x, w, b, geom }))
    }

    /// Transposed convolution `x: (C_in, L)`, `w: (C_in, C_out, k)`;
    /// output length `(L - 1) stride + k - 2 pad`.
    pub fn conv_transpose1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        let bias_ok = b.map_or(true, |b| self.shape(b).len() == ws.dim(1));
        if xs.rank != 2 || ws.rank != 3 || !bias_ok {
            return Err(mismatch("conv_transpose1d", "expected x (C, L), w (C_in, C_out, k), b (C_out)"));
        }
        if ws.dim(0) != xs.dim(0) {
            return Err(mismatch("conv_transpose1d", "input channels differ from weight"));
        }
        let geom = ConvGeometry { kernel: ws.dim(2), stride, pad };
        let full = (xs.dim(1) - 1) * stride + geom.kernel;
        if xs.dim(1) == 0 || stride == 0 || full <= 2 * pad {
            return Err(mismatch("conv_transpose1d", "empty output"));
        }
        let out_len = full - 2 * pad;
        let value = conv::transpose_forward(
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
            xs.dim(0),
            xs.dim(1),
            ws.dim(1),
            out_len,
            geom,
        );
        Ok(self.push(value, Shape::matrix(ws.dim(1), out_len), Op::ConvTranspose1d { x, w, b, geom }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
        let shape = self.shape(x);
        self.push(value, shape, Op::Relu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("add", "operands differ in shape"));
        }
        let value = self.value(a).iter().zip(self.value(b)).map(|(&p, &q)| p + q).collect();
        let shape = self.shape(a);
        Ok(self.push(value, shape, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value = self.value(x).iter().map(|&v| v * c).collect();
        let shape = self.shape(x);
        self.push(value, shape, Op::Scale(x, c))
    }

    /// Mean of squared differences over all entries; a scalar node.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("mse", "operands differ in shape"));
        }
        let n = self.shape(a).len();
        let sum: T = self.value(a).iter().zip(self.value(b)).map(|(&p, &q)| (p - q) * (p - q)).sum();
        let value = vec![sum / T::from_f64(n.max(1) as f64)];
        Ok(self.push(value, Shape::scalar(), Op::Mse(a, b)))
    }

    /// `X^T X` for a channel-major `(C, N)` tensor, i.e. the `C x C` Gram
    /// matrix of the `N x C` matrix view.
    pub fn gram(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        if xs.rank != 2 {
            return Err(mismatch("gram", "expected a (C, N) tensor"));
        }
        let (c, n) = (xs.dim(0), xs.dim(1));
        let mut g = vec![T::zero(); c * c];
        T::gemm(c, n, c, self.value(x), (n, 1), self.value(x), (1, n), &mut g, false);
        Ok(self.push(g, Shape::matrix(c, c), Op::Gram(x)))
    }

    /// `X M` in the `N x C` matrix view: output channel `c` is
    /// `sum_j M[j][c] X_j`.
    pub fn channel_mix(&mut self, x: Var, m: Var) -> Result<Var> {
        let (xs, ms) = (self.shape(x), self.shape(m));
        let c = xs.dim(0);
        if xs.rank != 2 || ms != Shape::matrix(c, c) {
            return Err(mismatch("channel_mix", "expected x (C, N) and m (C, C)"));
        }
        let n = xs.dim(1);
        let mut y = vec![T::zero(); c * n];
        // Y (C x N) = M^T (C x C) * X (C x N)
        T::gemm(c, c, n, self.value(m), (1, c), self.value(x), (n, 1), &mut y, false);
        Ok(self.push(y, xs, Op::ChannelMix { x, m }))
    }

    /// Spectral function of a symmetric `2 x 2` matrix: replaces each
    /// eigenvalue `e` by `max(sqrt(e) - lambda, 0) / (sqrt(e) + eps)`.
    pub fn spectral_shrink(&mut self, g: Var, lambda: Var) -> Result<Var> {
        if self.shape(g) != Shape::matrix(2, 2) || self.shape(lambda).len() != 1 {
            return Err(mismatch("spectral_shrink", "expected g (2, 2) and scalar lambda"));
        }
        let gv = self.value(g);
        let eig = shrink::Eigen2::of_symmetric(gv[0], T::from_f64(0.5) * (gv[1] + gv[2]), gv[3]);
        let lam = self.scalar_value(lambda);
        let value = eig.reconstruct(|e| shrink::svt_gain(e, lam)).to_vec();
        Ok(self.push(value, Shape::matrix(2, 2), Op::SpectralShrink { g, lambda, eig }))
    }

    /// Singular value thresholding of the `N x 2` matrix view of `x: (2, N)`,
    /// `U (Sigma - lambda)_+ V^T`, computed as `X V diag(gain) V^T` from the
    /// eigendecomposition of `X^T X` so no left singular vectors are formed.
    pub fn svt(&mut self, x: Var, lambda: Var) -> Result<Var> {
        if self.shape(x).rank != 2 || self.shape(x).dim(0) != 2 {
            return Err(mismatch("svt", "expected a (2, N) tensor"));
        }
        let g = self.gram(x)?;
        let m = self.spectral_shrink(g, lambda)?;
        self.channel_mix(x, m)
    }

    /// Row-wise complex soft threshold of the `N x 2` view of `x: (2, N)`:
    /// each `(re, im)` row is multiplied by `max(1 - lambda / (|row| + eps), 0)`.
    pub fn complex_soft_threshold(&mut self, x: Var, lambda: Var) -> Result<Var> {
        let xs = self.shape(x);
        if xs.rank != 2 || xs.dim(0) != 2 || self.shape(lambda).len() != 1 {
            return Err(mismatch("complex_soft_threshold", "expected x (2, N) and scalar lambda"));
        }
        let n = xs.dim(1);
        let lam = self.scalar_value(lambda);
        let eps = T::from_f64(SHRINK_EPS);
        let xv = self.value(x);
        let (re, im) = xv.split_at(n);
        let mut out = vec![T::zero(); 2 * n];
        for i in 0..n {
            let mag = re[i].hypot(im[i]);
            let gain = (T::one() - lam / (mag + eps)).max(T::zero());
            out[i] = re[i] * gain;
            out[n + i] = im[i] * gain;
        }
        Ok(self.push(out, xs, Op::SoftThreshold { x, lambda }))
    }

    /// Reverse sweep from a scalar node. Gradients accumulate additively where
    /// a node feeds several consumers.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let len = self.shape(loss).len();
        if len != 1 {
            return Err(Error::NonScalarLoss(len));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[idx].take() else { continue };
            self.propagate(node, gy, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, gy: Vec<T>, grads: &mut [Option<Vec<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, geom } => {
                let (xs, ws) = (self.shape(*x), self.shape(*w));
                let g = conv::backward(
                    self.value(*x),
                    self.value(*w),
                    &gy,
                    xs.dim(0),
                    xs.dim(1),
                    ws.dim(0),
                    node.shape.dim(1),
                    *geom,
                );
                accumulate(grads, *x, g.dx);
                accumulate(grads, *w, g.dw);
                if let Some(b) = b {
                    accumulate(grads, *b, g.db);
                }
            }
            Op::ConvTranspose1d { x, w, b, geom } => {
                let (xs, ws) = (self.shape(*x), self.shape(*w));
                let g = conv::transpose_backward(
                    self.value(*x),
                    self.value(*w),
                    &gy,
                    xs.dim(0),
                    xs.dim(1),
                    ws.dim(1),
                    node.shape.dim(1),
                    *geom,
                );
                accumulate(grads, *x, g.dx);
                accumulate(grads, *w, g.dw);
                if let Some(b) = b {
                    accumulate(grads, *b, g.db);
                }
            }
            Op::Relu(x) => {
                let mut g = gy;
                for (g, &v) in g.iter_mut().zip(self.value(*x)) {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                }
                accumulate(grads, *x, g);
            }
            Op::Add(a, b) => {
                if a == b {
                    accumulate(grads, *a, gy.iter().map(|&g| g + g).collect());
                } else {
                    accumulate_slice(grads, *a, &gy);
                    accumulate(grads, *b, gy);
                }
            }
            Op::Scale(x, c) => {
                let mut g = gy;
                g.iter_mut().for_each(|v| *v *= *c);
                accumulate(grads, *x, g);
            }
            Op::Mse(a, b) => {
                let n = T::from_f64(self.shape(*a).len().max(1) as f64);
                let k = (T::one() + T::one()) * gy[0] / n;
                let da: Vec<T> =
                    self.value(*a).iter().zip(self.value(*b)).map(|(&p, &q)| k * (p - q)).collect();
                let db = da.iter().map(|&v| -v).collect();
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::Gram(x) => {
                let xs = self.shape(*x);
                let (c, n) = (xs.dim(0), xs.dim(1));
                // dX = (dG + dG^T) X in channel-major form
                let mut sym = vec![T::zero(); c * c];
                for i in 0..c {
                    for j in 0..c {
                        sym[i * c + j] = gy[i * c + j] + gy[j * c + i];
                    }
                }
                let mut dx = vec![T::zero(); c * n];
                T::gemm(c, c, n, &sym, (c, 1), self.value(*x), (n, 1), &mut dx, false);
                accumulate(grads, *x, dx);
            }
            Op::ChannelMix { x, m } => {
                let xs = self.shape(*x);
                let (c, n) = (xs.dim(0), xs.dim(1));
                let mut dx = vec![T::zero(); c * n];
                T::gemm(c, c, n, self.value(*m), (c, 1), &gy, (n, 1), &mut dx, false);
                let mut dm = vec![T::zero(); c * c];
                T::gemm(c, n, c, self.value(*x), (n, 1), &gy, (1, n), &mut dm, false);
                accumulate(grads, *x, dx);
                accumulate(grads, *m, dm);
            }
            Op::SpectralShrink { g, lambda, eig } => {
                let lam = self.scalar_value(*lambda);
                let (dg, dlam) = eig.backward(&gy, lam);
                accumulate(grads, *g, dg.to_vec());
                accumulate(grads, *lambda, vec![dlam]);
            }
            Op::SoftThreshold { x, lambda } => {
                let n = self.shape(*x).dim(1);
                let lam = self.scalar_value(*lambda);
                let eps = T::from_f64(SHRINK_EPS);
                let xv = self.value(*x);
                let mut dx = vec![T::zero(); 2 * n];
                let mut dlam = T::zero();
                for i in 0..n {
                    let (re, im) = (xv[i], xv[n + i]);
                    let mag = re.hypot(im);
                    let denom = mag + eps;
                    let gain = T::one() - lam / denom;
                    if gain <= T::zero() {
                        continue;
                    }
                    let (gr, gi) = (gy[i], gy[n + i]);
                    let proj = gr * re + gi * im;
                    // d gain / d row = lambda / denom^2 * row / |row|
                    let coef = if mag > T::zero() { lam / (denom * denom * mag) * proj } else { T::zero() };
                    dx[i] = gr * gain + coef * re;
                    dx[n + i] = gi * gain + coef * im;
                    dlam -= proj / denom;
                }
                accumulate(grads, *x, dx);
                accumulate(grads, *lambda, vec![dlam]);
            }
        }
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], var: Var, g: Vec<T>) {
    match &mut grads[var.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, v)| *a += v),
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_slice<T: Scalar>(grads: &mut [Option<Vec<T>>], var: Var, g: &[T]) {
    match &mut grads[var.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &v)| *a += v),
        slot @ None => *slot = Some(g.to_vec()),
    }
}
