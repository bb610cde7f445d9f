//! Text signal and spectrum files, and the static comparison plot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use plotters::prelude::*;
use urpca_core::spectrum::{RangeMatrix, ZERO_BIN_DB};

use crate::error::{Error, Result};

/// Reads a time-domain signal: one `re im` pair per line, `#` starts a comment.
pub fn read_signal(path: &Path) -> Result<Vec<Complex64>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace().map(str::parse::<f64>);
        match (fields.next(), fields.next(), fields.next()) {
            (Some(Ok(re)), Some(Ok(im)), None) => out.push(Complex64::new(re, im)),
            _ => return Err(Error::format(path, format!("line {}: expected `re im`", i + 1))),
        }
    }
    Ok(out)
}

pub fn write_signal(path: &Path, signal: &[Complex64]) -> Result<()> {
    let mut text = String::from("# re im\n");
    for z in signal {
        writeln!(text, "{:e} {:e}", z.re, z.im).unwrap();
    }
    fs::write(path, text).map_err(Error::io(path))
}

/// Spectrum table: `bin re im amp_db phase_deg`; an undefined phase is `nan`.
pub fn spectrum_text(m: &RangeMatrix) -> String {
    let mut text = String::from("# bin re im amp_db phase_deg\n");
    for bin in 0..m.rows() {
        let (re, im) = m.row(bin).expect("bin in range");
        let amp = m.amplitude_db(bin).expect("bin in range");
        let phase = m.phase_deg(bin).unwrap_or(f64::NAN);
        writeln!(text, "{bin} {re:e} {im:e} {amp:.6} {phase:.6}").unwrap();
    }
    text
}

/// Parses [`spectrum_text`] output back into a matrix.
pub fn parse_spectrum(path: &Path, text: &str) -> Result<RangeMatrix> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::format(path, format!("line {}: expected `bin re im amp_db phase_deg`", i + 1));
        if f.len() != 5 || f[0].parse::<usize>().ok() != Some(rows.len() / 2) {
            return Err(bad());
        }
        rows.push(f[1].parse::<f64>().map_err(|_| bad())?);
        rows.push(f[2].parse::<f64>().map_err(|_| bad())?);
    }
    RangeMatrix::from_rows(rows.len() / 2, rows).map_err(|e| Error::format(path, e.to_string()))
}

/// Floor used when drawing exactly-zero bins.
const PLOT_FLOOR_DB: f64 = -120.0;

/// SVG of the input and mitigated amplitude spectra over the bins.
pub fn plot_spectra(path: &Path, input: &RangeMatrix, mitigated: &RangeMatrix, label: &str) -> Result<()> {
    let curve = |m: &RangeMatrix| -> Vec<(f64, f64)> {
        m.amplitudes_db()
            .into_iter()
            .enumerate()
            .map(|(b, db)| (b as f64, if db == ZERO_BIN_DB { PLOT_FLOOR_DB } else { db.max(PLOT_FLOOR_DB) }))
            .collect()
    };
    let a = curve(input);
    let b = curve(mitigated);
    let hi = a.iter().chain(&b).map(|p| p.1).fold(PLOT_FLOOR_DB, f64::max) + 5.0;
    let lo = a.iter().chain(&b).map(|p| p.1).fold(hi, f64::min).max(hi - 100.0) - 5.0;
    let draw = || -> std::result::Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (1000, 500)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..input.rows() as f64, lo..hi)?;
        chart.configure_mesh().x_desc("range bin").y_desc("amplitude (dB)").draw()?;
        chart.draw_series(LineSeries::new(a, &RED))?.label("interfered").legend(|(x, y)| {
            PathElement::new(vec![(x, y), (x + 20, y)], RED)
        });
        chart.draw_series(LineSeries::new(b, &BLUE))?.label(label.to_string()).legend(|(x, y)| {
            PathElement::new(vec![(x, y), (x + 20, y)], BLUE)
        });
        chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| Error::format(path, format!("plot: {e}")))
}
