//! Measurements behind the headline properties, shared by the core test
//! suite and the acceptance runner. Each returns numbers; callers compare
//! them to their own tolerances.

use num_complex::Complex64;
use rand::Rng;
use urpca_core::autodiff::{Shape, Tape, Var};
use urpca_core::rpca::{BlockVariant, ModelConfig, UnfoldedModel};
use urpca_core::spectrum::{dft, idft};
use urpca_core::train::{example_gradient, example_loss, LossWeights, TrainingExample};

use super::{central_diff, jacobi_svd, reference_svt, rel_error, rng, uniform_vec};

pub const FD_STEP: f64 = 1e-5;

pub struct Input {
    pub value: Vec<f64>,
    pub shape: Shape,
}

impl Input {
    pub fn random(r: &mut impl Rng, shape: Shape, lo: f64, hi: f64) -> Self {
        Self { value: uniform_vec(r, shape.len(), lo, hi), shape }
    }
}

type Build<'a> = &'a dyn Fn(&mut Tape<f64>, &[Var]) -> Var;

fn evaluate(inputs: &[Input], values: &[&[f64]], build: Build) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().zip(values).map(|(i, v)| tape.leaf(v.to_vec(), i.shape).unwrap()).collect();
    let loss = build(&mut tape, &vars);
    tape.scalar_value(loss)
}

/// Worst norm-wise relative error, over the inputs, between the tape
/// gradient and central differences.
pub fn gradient_error(inputs: &[Input], build: Build) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|i| tape.leaf(i.value.clone(), i.shape).unwrap()).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; input.value.len()]);
        let mut f = |x: &[f64]| {
            let values: Vec<&[f64]> =
                inputs.iter().enumerate().map(|(j, i)| if j == k { x } else { i.value.as_slice() }).collect();
            evaluate(inputs, &values, build)
        };
        let all: Vec<usize> = (0..input.value.len()).collect();
        let numeric = central_diff(&mut f, &input.value, &all, FD_STEP);
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

fn mse_to(tape: &mut Tape<f64>, y: Var, target: Var) -> Var {
    tape.mse(y, target).unwrap()
}

/// `(2, n)` input whose singular values are separated by at least `gap` and
/// stay at least `margin` away from `lambda`.
pub fn svt_input(r: &mut impl Rng, n: usize, lambda: f64, gap: f64, margin: f64) -> Vec<f64> {
    loop {
        let x = uniform_vec(r, 2 * n, -1.0, 1.0);
        let s = jacobi_svd(&x[..n], &x[n..]).sigma;
        if (s[0] - s[1]).abs() >= gap && s.iter().all(|v| (v - lambda).abs() >= margin) {
            return x;
        }
    }
}

/// `(2, n)` input whose every row magnitude stays `margin` away from `lambda`.
pub fn soft_input(r: &mut impl Rng, n: usize, lambda: f64, margin: f64) -> Vec<f64> {
    loop {
        let x = uniform_vec(r, 2 * n, -1.0, 1.0);
        if (0..n).all(|i| (x[i].hypot(x[n + i]) - lambda).abs() >= margin) {
            return x;
        }
    }
}

/// `(name, relative error)` for every differentiable primitive.
pub fn primitive_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let r = &mut rng(seed);
    let mut out = Vec::new();
    let m = Shape::matrix;
    let c = Shape::cube;

    let inputs = [
        Input::random(r, m(3, 11), -1.0, 1.0),
        Input::random(r, c(4, 3, 3), -1.0, 1.0),
        Input::random(r, Shape::vector(4), -1.0, 1.0),
        Input::random(r, m(4, 11), -1.0, 1.0),
    ];
    out.push((
        "conv1d (stride 1, pad 1, bias)",
        gradient_error(&inputs, &|t, v| {
            let y = t.conv1d(v[0], v[1], Some(v[2]), 1, 1).unwrap();
            mse_to(t, y, v[3])
        }),
    ));

    let inputs = [
        Input::random(r, m(2, 13), -1.0, 1.0),
        Input::random(r, c(3, 2, 4), -1.0, 1.0),
        Input::random(r, m(3, 5), -1.0, 1.0),
    ];
    out.push((
        "conv1d (stride 2, no bias)",
        gradient_error(&inputs, &|t, v| {
            let y = t.conv1d(v[0], v[1], None, 2, 0).unwrap();
            mse_to(t, y, v[2])
        }),
    ));

    let inputs = [
        Input::random(r, m(4, 5), -1.0, 1.0),
        Input::random(r, c(4, 2, 4), -1.0, 1.0),
        Input::random(r, Shape::vector(2), -1.0, 1.0),
        Input::random(r, m(2, 20), -1.0, 1.0),
    ];
    out.push((
        "conv_transpose1d (stride 4, bias)",
        gradient_error(&inputs, &|t, v| {
            let y = t.conv_transpose1d(v[0], v[1], Some(v[2]), 4, 0).unwrap();
            mse_to(t, y, v[3])
        }),
    ));

    let inputs = [
        Input::random(r, m(3, 6), -1.0, 1.0),
        Input::random(r, c(3, 2, 3), -1.0, 1.0),
        Input::random(r, m(2, 11), -1.0, 1.0),
    ];
    out.push((
        "conv_transpose1d (stride 2, pad 1)",
        gradient_error(&inputs, &|t, v| {
            let y = t.conv_transpose1d(v[0], v[1], None, 2, 1).unwrap();
            mse_to(t, y, v[2])
        }),
    ));

    let mut x = uniform_vec(r, 32, -1.0, 1.0);
    x.iter_mut().for_each(|v| *v = v.signum() * (v.abs() + 0.05));
    let inputs = [Input { value: x, shape: m(2, 16) }, Input::random(r, m(2, 16), -1.0, 1.0)];
    out.push((
        "relu",
        gradient_error(&inputs, &|t, v| {
            let y = t.relu(v[0]);
            mse_to(t, y, v[1])
        }),
    ));

    let inputs = [
        Input::random(r, m(2, 9), -1.0, 1.0),
        Input::random(r, m(2, 9), -1.0, 1.0),
        Input::random(r, m(2, 9), -1.0, 1.0),
    ];
    out.push((
        "add",
        gradient_error(&inputs, &|t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            mse_to(t, y, v[2])
        }),
    ));
    out.push((
        "scale",
        gradient_error(&inputs[..2], &|t, v| {
            let y = t.scale(v[0], -1.7);
            mse_to(t, y, v[1])
        }),
    ));
    out.push(("mse", gradient_error(&inputs[..2], &|t, v| t.mse(v[0], v[1]).unwrap())));

    let inputs = [Input::random(r, m(2, 12), -1.0, 1.0), Input::random(r, m(2, 2), -1.0, 1.0)];
    out.push((
        "gram",
        gradient_error(&inputs, &|t, v| {
            let g = t.gram(v[0]).unwrap();
            mse_to(t, g, v[1])
        }),
    ));

    let inputs = [
        Input::random(r, m(2, 12), -1.0, 1.0),
        Input::random(r, m(2, 2), -1.0, 1.0),
        Input::random(r, m(2, 12), -1.0, 1.0),
    ];
    out.push((
        "channel_mix",
        gradient_error(&inputs, &|t, v| {
            let y = t.channel_mix(v[0], v[1]).unwrap();
            mse_to(t, y, v[2])
        }),
    ));

    // Symmetric PSD with eigenvalues whose square roots sit away from lambda.
    let theta: f64 = r.gen_range(0.0..std::f64::consts::PI);
    let (e0, e1) = (r.gen_range(1.2..2.5f64), r.gen_range(0.05..0.5f64));
    let (cs, sn) = (theta.cos(), theta.sin());
    let g = vec![e0 * cs * cs + e1 * sn * sn, (e0 - e1) * cs * sn, (e0 - e1) * cs * sn, e0 * sn * sn + e1 * cs * cs];
    let inputs = [
        Input { value: g, shape: m(2, 2) },
        Input { value: vec![0.6], shape: Shape::scalar() },
        Input::random(r, m(2, 2), -1.0, 1.0),
    ];
    out.push((
        "spectral_shrink",
        gradient_error(&inputs, &|t, v| {
            let y = t.spectral_shrink(v[0], v[1]).unwrap();
            mse_to(t, y, v[2])
        }),
    ));

    let lambda = 0.7;
    let inputs = [
        Input { value: svt_input(r, 16, lambda, 1e-3, 1e-3), shape: m(2, 16) },
        Input { value: vec![lambda], shape: Shape::scalar() },
        Input::random(r, m(2, 16), -1.0, 1.0),
    ];
    out.push((
        "svt",
        gradient_error(&inputs, &|t, v| {
            let y = t.svt(v[0], v[1]).unwrap();
            mse_to(t, y, v[2])
        }),
    ));

    let lambda = 0.5;
    let inputs = [
        Input { value: soft_input(r, 16, lambda, 1e-3), shape: m(2, 16) },
        Input { value: vec![lambda], shape: Shape::scalar() },
        Input::random(r, m(2, 16), -1.0, 1.0),
    ];
    out.push((
        "complex_soft_threshold",
        gradient_error(&inputs, &|t, v| {
            let y = t.complex_soft_threshold(v[0], v[1]).unwrap();
            mse_to(t, y, v[2])
        }),
    ));
    out
}

/// Relative gradient error of the full training loss of a one-layer model
/// on length-`n` inputs, over every threshold and `extra` random weights.
pub fn model_gradient_error(variant: BlockVariant, n: usize, extra: usize, seed: u64) -> f64 {
    let r = &mut rng(seed);
    let model = UnfoldedModel::<f64>::init(ModelConfig::new(variant, 1, n), r).unwrap();
    let mut params = model.params().to_vec();
    // Move biases off zero so their gradients are exercised at a generic point.
    params.iter_mut().for_each(|p| *p += r.gen_range(-0.05..0.05));
    let (l1, l2) = model.layout().lambda_segments(0);
    for s in [l1, l2] {
        params[model.layout().segments()[s].offset] = r.gen_range(0.05..0.2);
    }
    let model = UnfoldedModel::from_params(*model.config(), params.clone()).unwrap();
    let data = uniform_vec(r, 2 * n, -1.0, 1.0);
    let sparse = uniform_vec(r, 2 * n, -0.5, 0.5);
    let low_rank: Vec<f64> = data.iter().zip(&sparse).map(|(d, s)| d - s).collect();
    let example = TrainingExample { data, sparse, low_rank, scale: 1.0 };
    let weights = LossWeights::default();
    let (_, grad) = example_gradient(&model, &example, weights).unwrap();
    let mut which: Vec<usize> = vec![model.layout().segments()[l1].offset, model.layout().segments()[l2].offset];
    which.extend((0..extra).map(|_| r.gen_range(0..params.len())));
    let config = *model.config();
    let mut f = |p: &[f64]| example_loss(&UnfoldedModel::from_params(config, p.to_vec()).unwrap(), &example, weights).unwrap();
    let numeric = central_diff(&mut f, &params, &which, FD_STEP);
    let analytic: Vec<f64> = which.iter().map(|&i| grad[i]).collect();
    rel_error(&analytic, &numeric)
}

/// Max abs difference between the tape SVT and the Jacobi-SVD reference
/// over `count` random `16 x 2` matrices and thresholds.
pub fn svt_oracle_error(count: usize, seed: u64) -> f64 {
    let r = &mut rng(seed);
    let n = 16;
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let x = uniform_vec(r, 2 * n, -1.0, 1.0);
        let lambda = r.gen_range(0.0..2.0);
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone(), Shape::matrix(2, n)).unwrap();
        let lv = tape.leaf(vec![lambda], Shape::scalar()).unwrap();
        let y = tape.svt(xv, lv).unwrap();
        let reference = reference_svt(&x[..n], &x[n..], lambda);
        let got = tape.value(y);
        for i in 0..n {
            worst = worst.max((got[i] - reference[0][i]).abs()).max((got[n + i] - reference[1][i]).abs());
        }
    }
    worst
}

/// `(name, error, tolerance)` for the transform identities.
pub fn spectral_identity_errors(n: usize, seed: u64) -> Vec<(&'static str, f64, f64)> {
    let r = &mut rng(seed);
    let nf = n as f64;
    let mut out = Vec::new();

    let mut impulse = vec![Complex64::new(0.0, 0.0); n];
    impulse[0] = Complex64::new(1.0, 0.0);
    let x = dft(&impulse).unwrap();
    out.push(("impulse -> flat", x.iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max), 1e-9 * nf));

    let tone: Vec<Complex64> =
        (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (5 * k) as f64 / nf)).collect();
    let x = dft(&tone).unwrap();
    let err = x
        .iter()
        .enumerate()
        .map(|(m, v)| (v - if m == 5 { Complex64::new(nf, 0.0) } else { Complex64::new(0.0, 0.0) }).norm())
        .fold(0.0, f64::max);
    out.push(("exponential -> single bin", err, 1e-9 * nf));

    let sig: Vec<Complex64> = (0..n).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
    let x = dft(&sig).unwrap();
    let time: f64 = sig.iter().map(|v| v.norm_sqr()).sum();
    let freq: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / nf;
    out.push(("Parseval", (time - freq).abs() / time, 1e-9));

    let back = idft(&x).unwrap();
    let diff: f64 = back.iter().zip(&sig).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    out.push(("inverse roundtrip", diff / time.sqrt(), 1e-9));
    out
}

/// `(L_{k+1}, S_{k+1})` of layer 0 for explicit inputs, all `(2, n)`.
pub fn layer_outputs(model: &UnfoldedModel<f64>, low_rank: &[f64], sparse: &[f64], data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let shape = Shape::matrix(2, model.config().n_fft);
    let mut tape = Tape::new();
    let params = model.register(&mut tape).unwrap();
    let l = tape.leaf(low_rank.to_vec(), shape).unwrap();
    let s = tape.leaf(sparse.to_vec(), shape).unwrap();
    let d = tape.leaf(data.to_vec(), shape).unwrap();
    let (l1, s1) = model.layer_forward(&mut tape, &params, 0, l, s, d).unwrap();
    (tape.value(l1).to_vec(), tape.value(s1).to_vec())
}

/// Copy of `model` with every parameter of block `g` (0-based) of layer 0
/// moved by a random amount.
pub fn perturb_block(model: &UnfoldedModel<f64>, g: usize, r: &mut impl Rng) -> UnfoldedModel<f64> {
    let mut params = model.params().to_vec();
    let layout = model.layout();
    for conv in 0..model.config().block_convs().len() {
        let (w, b) = layout.conv_segments(0, g, conv);
        for seg in std::iter::once(w).chain(b) {
            for p in &mut params[layout.segments()[seg].range()] {
                *p += r.gen_range(0.1..0.5);
            }
        }
    }
    UnfoldedModel::from_params(*model.config(), params).unwrap()
}

pub struct StructuralReport {
    /// Perturbing `g2` left `L_{k+1}` bit-identical.
    pub low_rank_ignores_g2: bool,
    /// Perturbing `g1` left `S_{k+1}` bit-identical.
    pub sparse_ignores_g1: bool,
    /// The perturbations were not no-ops on the other output.
    pub perturbations_effective: bool,
}

pub fn structural_report(variant: BlockVariant, n: usize, seed: u64) -> StructuralReport {
    let r = &mut rng(seed);
    let model = UnfoldedModel::<f64>::init(ModelConfig::new(variant, 1, n), r).unwrap();
    let l = uniform_vec(r, 2 * n, -1.0, 1.0);
    let s = uniform_vec(r, 2 * n, -1.0, 1.0);
    let d = uniform_vec(r, 2 * n, -1.0, 1.0);
    let (l0, s0) = layer_outputs(&model, &l, &s, &d);
    let (l2, s2) = layer_outputs(&perturb_block(&model, 1, r), &l, &s, &d);
    let (l1, s1) = layer_outputs(&perturb_block(&model, 0, r), &l, &s, &d);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    StructuralReport {
        low_rank_ignores_g2: bits(&l2) == bits(&l0),
        sparse_ignores_g1: bits(&s1) == bits(&s0),
        perturbations_effective: s2 != s0 && l1 != l0,
    }
}

/// Whether a block whose every weight and bias is zero returns its input
/// bit for bit.
pub fn zero_block_is_identity(variant: BlockVariant, n: usize, seed: u64) -> bool {
    let r = &mut rng(seed);
    let config = ModelConfig::new(variant, 1, n);
    let model = UnfoldedModel::<f64>::from_params(config, vec![0.0; config.param_count()]).unwrap();
    let x = uniform_vec(r, 2 * n, -1.0, 1.0);
    let mut tape = Tape::new();
    let params = model.register(&mut tape).unwrap();
    let xv = tape.leaf(x.clone(), Shape::matrix(2, n)).unwrap();
    (0..6).all(|g| {
        let y = model.block_forward(&mut tape, &params, 0, g, xv).unwrap();
        tape.value(y).iter().zip(&x).all(|(a, b)| a.to_bits() == b.to_bits())
    })
}
