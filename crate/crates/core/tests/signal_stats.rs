mod oracles;

use num_complex::Complex64;
use urpca_core::scenario::{generate_pair, record_seed, sample_scenario, GenerationRanges};
use urpca_core::signal::{synth_interference, synth_targets, Interference, RadarConfig};
use urpca_core::spectrum::dft;

#[test]
fn generated_targets_concentrate_within_two_bins() {
    let cfg = RadarConfig::default();
    let ranges = GenerationRanges::default();
    let n = cfg.n_samples;
    let r = &mut oracles::rng(11);
    for i in 0..200 {
        let scenario = sample_scenario(r, &ranges, &cfg, i).unwrap();
        for t in &scenario.targets {
            let x = dft(&synth_targets(&[*t], &cfg).unwrap()).unwrap();
            let total: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let centre = t.bin(n) as isize;
            let near: f64 = (-2..=2).map(|d| x[(centre + d).rem_euclid(n as isize) as usize].norm_sqr()).sum();
            assert!(near >= 0.995 * total, "target {t:?}: {:.5}", near / total);
        }
    }
}

/// Distinct short-time frequency cells, over all frames, holding energy
/// within 20 dB of the strongest cell.
fn spectrogram_cells(x: &[Complex64], win: usize) -> Vec<usize> {
    let mut energy = vec![0.0f64; win];
    for frame in x.chunks_exact(win) {
        for (m, z) in dft(frame).unwrap().iter().enumerate() {
            energy[m] = energy[m].max(z.norm_sqr());
        }
    }
    let peak = energy.iter().cloned().fold(0.0, f64::max);
    (0..win).filter(|&m| energy[m] >= peak * 1e-2).collect()
}

#[test]
fn chirp_spreads_while_target_stays_narrow() {
    let cfg = RadarConfig::default();
    let win = 64;
    let band_cells = (2.0 * cfg.band_edge() * win as f64) as usize;
    for (slope, start) in [(0.5, -0.2), (1.6, 0.1), (2.8, 0.0)] {
        let i = Interference { amplitude: 1.0, relative_slope: slope, start_freq: start, window: (0, cfg.n_samples) };
        let cells = spectrogram_cells(&synth_interference(&i, &cfg).unwrap(), win);
        assert!(cells.len() * 4 > band_cells, "slope {slope}: {} of {band_cells} cells", cells.len());
    }
    let target = urpca_core::signal::Target { amplitude: 1.0, phase: 0.3, beat_freq: 10.0 / win as f64 };
    let cells = spectrogram_cells(&synth_targets(&[target], &cfg).unwrap(), win);
    assert!(cells.len() <= 2, "{cells:?}");
}

#[test]
fn every_generated_signal_is_finite() {
    let cfg = RadarConfig::default();
    for ranges in [GenerationRanges::default(), GenerationRanges { sir_db: (-5.0, 30.0), ..Default::default() }] {
        for i in 0..200 {
            let p = generate_pair(record_seed(3, 0, i), &ranges, &cfg).unwrap();
            assert!(p.interfered.iter().chain(&p.clean).all(|z| z.re.is_finite() && z.im.is_finite()));
        }
    }
}

#[test]
fn scenario_draws_cover_the_ranges() {
    let cfg = RadarConfig::default();
    let ranges = GenerationRanges::default();
    let r = &mut oracles::rng(12);
    let mut seen = [false; 6];
    for i in 0..10_000 {
        let s = sample_scenario(r, &ranges, &cfg, i).unwrap();
        seen[s.targets.len()] = true;
        assert!(s.targets.iter().all(|t| t.beat_freq >= 0.0 && t.beat_freq < cfg.band_edge()));
        assert!((ranges.snr_db.0..=ranges.snr_db.1).contains(&s.snr_db));
        assert!((ranges.sir_db.0..=ranges.sir_db.1).contains(&s.sir_db));
        assert!(s.interference.relative_slope != 1.0);
    }
    assert_eq!(seen, [false, true, true, true, true, true]);
}
