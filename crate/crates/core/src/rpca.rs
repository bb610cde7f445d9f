//! The unfolded robust-PCA network.
//!
//! Layer `k` maps `(L, S)` to
//!
//! ```text
//! L' = SVT_{l1}( g5(L) + g3(S) + g1(D) )
//! S' = soft_{l2}( g6(L) + g4(S) + g2(D) )
//! ```
//!
//! starting from `L = S = 0`. Every `g_i` is a block of the model's
//! [`BlockVariant`] with its own parameters, and each layer learns its own
//! thresholds. All parameters live in one flat vector described by a
//! [`ParamLayout`], which is also the checkpoint order.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::autodiff::{Scalar, Shape, Tape, Var};
use crate::error::{Error, Result};
use crate::spectrum::RangeMatrix;

/// Lower bound enforced on every learned threshold.
pub const MIN_LAMBDA: f64 = 1e-6;
/// Thresholds of a freshly initialized model.
pub const INIT_LAMBDA: f64 = 0.1;
/// Deepest model accepted.
pub const MAX_LAYERS: usize = 13;
/// Transformations per layer (`g1..g6`).
pub const BLOCKS_PER_LAYER: usize = 6;
/// Width of the overcomplete hidden layers.
pub const ROC_AE_WIDTH: usize = 32;
/// Channels and stride of the undercomplete bottleneck.
pub const RUC_AE_WIDTH: usize = 4;
pub const RUC_AE_STRIDE: usize = 4;

/// Form of each `g_i` transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockVariant {
    /// One 2 -> 2 convolution.
    PlainConv,
    /// Residual overcomplete auto-encoder: 2 -> 32 -> 32 -> 2, skip added to
    /// the output. Only the output convolution carries a bias.
    RocAe,
    /// Residual undercomplete auto-encoder: stride-4 conv 2 -> 4, conv 4 -> 4,
    /// stride-4 transposed conv 4 -> 2, skip added to the output.
    RucAe,
}

impl BlockVariant {
    pub fn name(self) -> &'static str {
        match self {
            BlockVariant::PlainConv => "conv",
            BlockVariant::RocAe => "roc-ae",
            BlockVariant::RucAe => "ruc-ae",
        }
    }
}

impl fmt::Display for BlockVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conv" | "plain" | "plain-conv" => Ok(BlockVariant::PlainConv),
            "roc-ae" | "roc" => Ok(BlockVariant::RocAe),
            "ruc-ae" | "ruc" => Ok(BlockVariant::RucAe),
            _ => Err(Error::InvalidConfig("unknown block variant")),
        }
    }
}

/// One convolution inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub transposed: bool,
    pub bias: bool,
}

impl ConvSpec {
    fn same(c_in: usize, c_out: usize, kernel: usize) -> Self {
        Self { c_in, c_out, kernel, stride: 1, pad: (kernel - 1) / 2, transposed: false, bias: true }
    }

    fn without_bias(self) -> Self {
        Self { bias: false, ..self }
    }

    pub fn weight_shape(&self) -> Shape {
        if self.transposed {
            Shape::cube(self.c_in, self.c_out, self.kernel)
        } else {
            Shape::cube(self.c_out, self.c_in, self.kernel)
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape().len() + if self.bias { self.c_out } else { 0 }
    }
}

/// Architecture hyperparameters; fixed for the lifetime of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub variant: BlockVariant,
    pub layers: usize,
    pub n_fft: usize,
    /// Kernel of the stride-1 convolutions (odd, padded to preserve length).
    pub kernel: usize,
}

impl ModelConfig {
    pub fn new(variant: BlockVariant, layers: usize, n_fft: usize) -> Self {
        Self { variant, layers, n_fft, kernel: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LAYERS).contains(&self.layers) {
            return Err(Error::InvalidConfig("layer count must lie in 1..=13"));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::InvalidConfig("kernel size must be odd"));
        }
        if self.n_fft == 0 || self.n_fft % RUC_AE_STRIDE != 0 {
            return Err(Error::InvalidConfig("n_fft must be a positive multiple of 4"));
        }
        Ok(())
    }

    /// Convolutions of one block, in execution order.
    pub fn block_convs(&self) -> Vec<ConvSpec> {
        let k = self.kernel;
        match self.variant {
            BlockVariant::PlainConv => vec![ConvSpec::same(2, 2, k)],
            BlockVariant::RocAe => vec![
                ConvSpec::same(2, ROC_AE_WIDTH, k).without_bias(),
                ConvSpec::same(ROC_AE_WIDTH, ROC_AE_WIDTH, k).without_bias(),
                ConvSpec::same(ROC_AE_WIDTH, 2, k),
            ],
            BlockVariant::RucAe => vec![
                ConvSpec {
                    c_in: 2,
                    c_out: RUC_AE_WIDTH,
                    kernel: RUC_AE_STRIDE,
                    stride: RUC_AE_STRIDE,
                    pad: 0,
                    transposed: false,
                    bias: false,
                },
                ConvSpec::same(RUC_AE_WIDTH, RUC_AE_WIDTH, k).without_bias(),
                ConvSpec {
                    c_in: RUC_AE_WIDTH,
                    c_out: 2,
                    kernel: RUC_AE_STRIDE,
                    stride: RUC_AE_STRIDE,
                    pad: 0,
                    transposed: true,
                    bias: true,
                },
            ],
        }
    }

    pub fn block_param_count(&self) -> usize {
        self.block_convs().iter().map(ConvSpec::param_count).sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers * (BLOCKS_PER_LAYER * self.block_param_count() + 2)
    }
}

/// What a parameter segment is, which decides how the optimizer treats it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub offset: usize,
    pub shape: Shape,
    pub kind: ParamKind,
}

impl Segment {
    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.shape.len()
    }
}

/// Flat parameter order: for each layer, blocks `g1..g6` (each conv's weight
/// then its bias, if it has one), then `lambda1`, `lambda2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    segments: Vec<Segment>,
    /// Per conv of a block: segment offset of its weight within the block
    /// and whether a bias segment follows.
    conv_slots: Vec<(usize, bool)>,
    segments_per_block: usize,
    len: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig) -> Self {
        let convs = config.block_convs();
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |shape: Shape, kind| {
            segments.push(Segment { offset, shape, kind });
            offset += shape.len();
        };
        for _ in 0..config.layers {
            for _ in 0..BLOCKS_PER_LAYER {
                for c in &convs {
                    push(c.weight_shape(), ParamKind::Weight);
                    if c.bias {
                        push(Shape::vector(c.c_out), ParamKind::Bias);
                    }
                }
            }
            push(Shape::scalar(), ParamKind::Lambda);
            push(Shape::scalar(), ParamKind::Lambda);
        }
        let mut conv_slots = Vec::new();
        let mut slot = 0;
        for c in &convs {
            conv_slots.push((slot, c.bias));
            slot += 1 + usize::from(c.bias);
        }
        Self { segments, conv_slots, segments_per_block: slot, len: offset }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn per_layer(&self) -> usize {
        BLOCKS_PER_LAYER * self.segments_per_block + 2
    }

    /// Segment indices of `(weight, bias)` for conv `conv` of block `g`
    /// (0-based) in `layer`.
    pub fn conv_segments(&self, layer: usize, g: usize, conv: usize) -> (usize, Option<usize>) {
        let (slot, bias) = self.conv_slots[conv];
        let w = layer * self.per_layer() + g * self.segments_per_block + slot;
        (w, bias.then_some(w + 1))
    }

    /// Segment indices of `(lambda1, lambda2)` in `layer`.
    pub fn lambda_segments(&self, layer: usize) -> (usize, usize) {
        let base = (layer + 1) * self.per_layer() - 2;
        (base, base + 1)
    }

    /// Mask of entries receiving weight decay (convolution weights only).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len];
        for s in &self.segments {
            if s.kind == ParamKind::Weight {
                mask[s.range()].iter_mut().for_each(|m| *m = true);
            }
        }
        mask
    }
}

/// `L_K` and `S_K` on the tape plus the leaf of every parameter segment.
#[derive(Debug, Clone)]
pub struct TapeForward {
    pub low_rank: Var,
    pub sparse: Var,
    pub params: Vec<Var>,
}

/// A model's configuration and all of its learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedModel<T> {
    config: ModelConfig,
    layout: ParamLayout,
    params: Vec<T>,
}

impl<T: Scalar> UnfoldedModel<T> {
    /// Uniform `(-a, a)` weights with `a = sqrt(1 / (C_in k))`, zero biases,
    /// thresholds at [`INIT_LAMBDA`].
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let convs = config.block_convs();
        let mut params = vec![T::zero(); layout.len()];
        let mut conv_idx = 0;
        for seg in layout.segments() {
            match seg.kind {
                ParamKind::Weight => {
                    let c = &convs[conv_idx % convs.len()];
                    conv_idx += 1;
                    let a = libm::sqrt(1.0 / (c.c_in * c.kernel) as f64);
                    for p in &mut params[seg.range()] {
                        *p = T::from_f64(rng.gen_range(-a..a));
                    }
                }
                ParamKind::Bias => {}
                ParamKind::Lambda => params[seg.offset] = T::from_f64(INIT_LAMBDA),
            }
        }
        Ok(Self { config, layout, params })
    }

    /// Wraps an existing parameter vector laid out per [`ParamLayout`].
    pub fn from_params(config: ModelConfig, params: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.len() {
            return Err(Error::LengthMismatch { expected: layout.len(), got: params.len() });
        }
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Converts the parameters to another precision.
    pub fn cast<U: Scalar>(&self) -> UnfoldedModel<U> {
        UnfoldedModel {
            config: self.config,
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::from_f64(p.as_f64())).collect(),
        }
    }

    /// `(lambda1, lambda2)` of `layer`.
    pub fn lambdas(&self, layer: usize) -> (T, T) {
        let (a, b) = self.layout.lambda_segments(layer);
        let segs = self.layout.segments();
        (self.params[segs[a].offset], self.params[segs[b].offset])
    }

    /// Raises every threshold to at least [`MIN_LAMBDA`].
    pub fn clamp_lambdas(&mut self) {
        let floor = T::from_f64(MIN_LAMBDA);
        for s in self.layout.segments() {
            if s.kind == ParamKind::Lambda && !(self.params[s.offset] >= floor) {
                self.params[s.offset] = floor;
            }
        }
    }

    /// Registers every parameter segment as a tape leaf.
    pub fn register(&self, tape: &mut Tape<T>) -> Result<Vec<Var>> {
        self.layout
            .segments()
            .iter()
            .map(|s| tape.leaf(self.params[s.range()].to_vec(), s.shape))
            .collect()
    }

    /// Applies block `g` (0-based, `g1` = 0) of `layer` to `x: (2, N)`.
    pub fn block_forward(&self, tape: &mut Tape<T>, params: &[Var], layer: usize, g: usize, x: Var) -> Result<Var> {
        let convs = self.config.block_convs();
        let conv = |tape: &mut Tape<T>, i: usize, input: Var| -> Result<Var> {
            let (w, b) = self.layout.conv_segments(layer, g, i);
            let b = b.map(|b| params[b]);
            let c = &convs[i];
            if c.transposed {
                tape.conv_transpose1d(input, params[w], b, c.stride, c.pad)
            } else {
                tape.conv1d(input, params[w], b, c.stride, c.pad)
            }
        };
        match self.config.variant {
            BlockVariant::PlainConv => conv(tape, 0, x),
            BlockVariant::RocAe | BlockVariant::RucAe => {
                let h = conv(tape, 0, x)?;
                let h = tape.relu(h);
                let h = conv(tape, 1, h)?;
                let h = tape.relu(h);
                let y = conv(tape, 2, h)?;
                tape.add(x, y)
            }
        }
    }

    /// One unfolded iteration.
    pub fn layer_forward(
        &self,
        tape: &mut Tape<T>,
        params: &[Var],
        layer: usize,
        low_rank: Var,
        sparse: Var,
        data: Var,
    ) -> Result<(Var, Var)> {
        let expect = Shape::matrix(2, self.config.n_fft);
        for v in [low_rank, sparse, data] {
            if tape.shape(v) != expect {
                return Err(Error::ShapeMismatch { op: "layer_forward", detail: "inputs must be (2, n_fft)" });
            }
        }
        let (l1, l2) = self.layout.lambda_segments(layer);
        let g = |tape: &mut Tape<T>, i: usize, x: Var| self.block_forward(tape, params, layer, i - 1, x);

        let a = g(tape, 5, low_rank)?;
        let b = g(tape, 3, sparse)?;
        let c = g(tape, 1, data)?;
        let sum = tape.add(a, b)?;
        let sum = tape.add(sum, c)?;
        let next_low_rank = tape.svt(sum, params[l1])?;

        let a = g(tape, 6, low_rank)?;
        let b = g(tape, 4, sparse)?;
        let c = g(tape, 2, data)?;
        let sum = tape.add(a, b)?;
        let sum = tape.add(sum, c)?;
        let next_sparse = tape.complex_soft_threshold(sum, params[l2])?;
        Ok((next_low_rank, next_sparse))
    }

    /// Runs all layers on `data: (2, N)` already on the tape, from `L = S = 0`.
    pub fn forward_on_tape(&self, tape: &mut Tape<T>, data: Var) -> Result<TapeForward> {
        let shape = Shape::matrix(2, self.config.n_fft);
        if tape.shape(data) != shape {
            return Err(Error::LengthMismatch { expected: shape.len(), got: tape.shape(data).len() });
        }
        let params = self.register(tape)?;
        let mut low_rank = tape.leaf(vec![T::zero(); shape.len()], shape)?;
        let mut sparse = tape.leaf(vec![T::zero(); shape.len()], shape)?;
        for layer in 0..self.config.layers {
            (low_rank, sparse) = self.layer_forward(tape, &params, layer, low_rank, sparse, data)?;
        }
        Ok(TapeForward { low_rank, sparse, params })
    }

    /// Decomposes a (normalized) spectrum into `(L_K, S_K)`, both carrying
    /// the input's scale.
    pub fn decompose(&self, data: &RangeMatrix) -> Result<(RangeMatrix, RangeMatrix)> {
        if data.rows() != self.config.n_fft {
            return Err(Error::LengthMismatch { expected: self.config.n_fft, got: data.rows() });
        }
        let mut tape = Tape::new();
        let d = tape.leaf(data.to_channels(), Shape::matrix(2, self.config.n_fft))?;
        let out = self.forward_on_tape(&mut tape, d)?;
        Ok((
            RangeMatrix::from_channels(tape.value(out.low_rank), data.scale())?,
            RangeMatrix::from_channels(tape.value(out.sparse), data.scale())?,
        ))
    }

    /// Mitigated target spectrum for a raw (unnormalized) spectrum: normalizes,
    /// runs the network and returns `S_K` on the raw scale.
    pub fn mitigate(&self, spectrum: &RangeMatrix) -> Result<RangeMatrix> {
        let (_, sparse) = self.decompose(&spectrum.normalized())?;
        Ok(sparse.denormalized())
    }
}
