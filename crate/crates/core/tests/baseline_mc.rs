mod oracles;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use urpca_core::baseline::{detect_interference, zero_samples, zeroing_mitigate};
use urpca_core::metrics::amplitude_mae_db;
use urpca_core::scenario::{generate_pair, record_seed, GenerationRanges};
use urpca_core::signal::{mix, synth_interference, synth_targets, Interference, RadarConfig, Target};
use urpca_core::spectrum::{range_matrix, Window};

#[test]
fn clean_signals_are_rarely_flagged() {
    let cfg = RadarConfig::default();
    let ranges = GenerationRanges::default();
    let mut flagged = 0usize;
    for i in 0..500 {
        let p = generate_pair(record_seed(21, 0, i), &ranges, &cfg).unwrap();
        flagged += detect_interference(&p.clean).iter().filter(|&&m| m).count();
    }
    let rate = flagged as f64 / (500 * cfg.n_samples) as f64;
    assert!(rate < 0.01, "false-flag rate {rate}");
}

#[test]
fn strong_half_frame_burst_is_mostly_flagged() {
    // One unit target at 20 dB per-sample SNR with a -10 dB SIR burst over the
    // first half of the frame.
    let cfg = RadarConfig::default();
    let n = cfg.n_samples;
    let r = &mut oracles::rng(22);
    let sigma = 0.1;
    let (mut hit, mut total) = (0usize, 0usize);
    for _ in 0..200 {
        let target = Target { amplitude: 1.0, phase: r.gen_range(0.0..6.28), beat_freq: r.gen_range(4.0..500.0) / n as f64 };
        let noise = |r: &mut ChaCha8Rng| {
            let (a, b): (f64, f64) = (r.sample(StandardNormal), r.sample(StandardNormal));
            Complex64::new(a, b) * (sigma / 2f64.sqrt())
        };
        let clean: Vec<Complex64> = synth_targets(&[target], &cfg).unwrap().into_iter().map(|s| s + noise(r)).collect();
        let interference = Interference {
            amplitude: 1.0,
            relative_slope: r.gen_range(0.2..3.0),
            start_freq: r.gen_range(-0.25..0.25),
            window: (0, n / 2),
        };
        let burst = synth_interference(&interference, &cfg).unwrap();
        let mask = detect_interference(&mix(&clean, &burst, 1.0, 1.0, -10.0).unwrap());
        for (b, m) in burst.iter().zip(&mask) {
            if b.norm() > 0.0 {
                total += 1;
                hit += usize::from(*m);
            }
        }
    }
    let rate = hit as f64 / total as f64;
    assert!(rate >= 0.8, "burst detection rate {rate}");
}

#[test]
fn zeroing_error_grows_with_masked_fraction() {
    let cfg = RadarConfig::default();
    let ranges = GenerationRanges { snr_db: (35.0, 35.0), ..Default::default() };
    let p = generate_pair(record_seed(23, 0, 0), &ranges, &cfg).unwrap();
    let truth = range_matrix(&p.clean, Window::Rectangular).unwrap();
    let bins = p.scenario.target_bins(cfg.n_samples);
    let mut last = -1.0;
    for tenth in 0..=9 {
        let cut = cfg.n_samples * tenth / 10;
        let mask: Vec<bool> = (0..cfg.n_samples).map(|n| n < cut).collect();
        let pred = range_matrix(&zero_samples(&p.clean, &mask), Window::Rectangular).unwrap();
        let err = amplitude_mae_db(&pred, &truth, &bins).unwrap();
        assert!(err >= last, "fraction {tenth}/10: {err} < {last}");
        last = err;
    }
    assert!(last > 15.0);
}

#[test]
fn zeroing_leaves_clean_targets_nearly_untouched() {
    let cfg = RadarConfig::default();
    let ranges = GenerationRanges::default();
    let mut sum = 0.0;
    for i in 0..300 {
        let p = generate_pair(record_seed(24, 0, i), &ranges, &cfg).unwrap();
        let truth = range_matrix(&p.clean, Window::Rectangular).unwrap();
        let pred = zeroing_mitigate(&p.clean, Window::Rectangular).unwrap();
        sum += amplitude_mae_db(&pred, &truth, &p.scenario.target_bins(cfg.n_samples)).unwrap();
    }
    let mean = sum / 300.0;
    assert!(mean < 0.2, "mean change {mean} dB");
}

#[test]
fn zeroing_never_adds_nonzero_samples() {
    let cfg = RadarConfig::default();
    let ranges = GenerationRanges { sir_db: (-30.0, 0.0), ..Default::default() };
    for i in 0..50 {
        let p = generate_pair(record_seed(25, 0, i), &ranges, &cfg).unwrap();
        let zeroed = zero_samples(&p.interfered, &detect_interference(&p.interfered));
        let nonzero = |v: &[Complex64]| v.iter().filter(|z| z.norm() > 0.0).count();
        assert!(nonzero(&zeroed) <= nonzero(&p.interfered));
    }
}
