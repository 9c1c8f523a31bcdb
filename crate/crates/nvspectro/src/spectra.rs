//! Spectrum and data-series ingestion, peak extraction, and the CSV
//! formats used for interchange.
//!
//! Spectrum CSV: optional `# key: value` metadata lines (the key
//! `temperature_K` is recognized), a header of `wavelength_nm,intensity`
//! or `frequency_MHz,signal`, then two numeric columns. Data-series CSV:
//! header `x,y` or `x,y,sigma`. All floats are written with 17 significant
//! digits. Frequency axes are stored in Hz in memory and in MHz on disk.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::wavelength_to_energy;
use crate::fit::{DataPoint, DataSeries};

/// Serialize a float with 17 significant digits (full f64 round trip).
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    WavelengthNm,
    FrequencyHz,
}

/// A measured or synthesized spectrum with strictly increasing axis values.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub axis_kind: AxisKind,
    pub samples: Vec<(f64, f64)>,
    pub temperature_k: Option<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn new(
        axis_kind: AxisKind,
        mut samples: Vec<(f64, f64)>,
        temperature_k: Option<f64>,
    ) -> Result<Self, SpectraError> {
        if samples.is_empty() {
            return Err(SpectraError::Empty);
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in samples.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(SpectraError::DuplicateAxis { value: pair[0].0 });
            }
        }
        if samples.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(SpectraError::NonFinite);
        }
        Ok(Self { axis_kind, samples, temperature_k, metadata: BTreeMap::new() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeakMethod {
    /// Three-point parabolic refinement around the extremal sample.
    Parabolic,
    /// Centroid of the unrefined candidate set (edge peaks, flat plateaus).
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeakWarning {
    /// Extremum sits on the window edge; no refinement applied.
    EdgePeak,
    /// Several equal extrema; the lowest-axis one was taken.
    TieBrokenTowardLowerAxis,
}

/// A located peak (or dip) with the refinement method and the index window
/// that was searched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub position: f64,
    pub height: f64,
    pub method: PeakMethod,
    pub window: (usize, usize),
    pub warnings: Vec<PeakWarning>,
}

/// Dip extraction outcome; `complete` is false when fewer dips than
/// requested cleared the prominence threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipSearch {
    pub dips: Vec<PeakEstimate>,
    pub complete: bool,
}

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("empty spectrum")]
    Empty,
    #[error("duplicate axis value {value}")]
    DuplicateAxis { value: f64 },
    #[error("spectrum contains non-finite values")]
    NonFinite,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("window [{lo}, {hi}] holds {got} samples; at least {needed} required")]
    WindowTooSmall { lo: f64, hi: f64, got: usize, needed: usize },
    #[error("expected a {expected:?} axis, got {got:?}")]
    AxisKind { expected: AxisKind, got: AxisKind },
    #[error("no spectrum within {tolerance} K of the reference temperature {reference} K")]
    MissingReference { reference: f64, tolerance: f64 },
    #[error("spectrum at index {0} carries no temperature")]
    MissingTemperature(usize),
    #[error(transparent)]
    Units(#[from] crate::constants::UnitsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const WAVELENGTH_HEADER: &str = "wavelength_nm,intensity";
const FREQUENCY_HEADER: &str = "frequency_MHz,signal";

/// Parse a spectrum from CSV; rows are sorted and duplicate axis values
/// rejected.
pub fn read_spectrum<R: BufRead>(reader: R) -> Result<Spectrum, SpectraError> {
    let mut axis_kind = None;
    let mut samples = Vec::new();
    let mut temperature = None;
    let mut metadata = BTreeMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                let key = key.trim().to_string();
                let value = value.trim().to_string();
                if key == "temperature_K" {
                    temperature = Some(value.parse().map_err(|_| SpectraError::Parse {
                        line: lineno,
                        message: format!("bad temperature '{value}'"),
                    })?);
                } else {
                    metadata.insert(key, value);
                }
            }
            continue;
        }
        if axis_kind.is_none() {
            axis_kind = Some(match trimmed {
                WAVELENGTH_HEADER => AxisKind::WavelengthNm,
                FREQUENCY_HEADER => AxisKind::FrequencyHz,
                other => {
                    return Err(SpectraError::Parse {
                        line: lineno,
                        message: format!(
                            "expected header '{WAVELENGTH_HEADER}' or '{FREQUENCY_HEADER}', got '{other}'"
                        ),
                    })
                }
            });
            continue;
        }
        let mut cols = trimmed.split(',');
        let x: f64 = parse_col(cols.next(), lineno)?;
        let y: f64 = parse_col(cols.next(), lineno)?;
        if cols.next().is_some() {
            return Err(SpectraError::Parse {
                line: lineno,
                message: "expected exactly two columns".into(),
            });
        }
        let x = match axis_kind.unwrap() {
            AxisKind::WavelengthNm => x,
            AxisKind::FrequencyHz => x * 1e6,
        };
        samples.push((x, y));
    }
    let axis_kind = axis_kind.ok_or(SpectraError::Empty)?;
    let mut spectrum = Spectrum::new(axis_kind, samples, temperature)?;
    spectrum.metadata = metadata;
    Ok(spectrum)
}

fn parse_col(tok: Option<&str>, lineno: usize) -> Result<f64, SpectraError> {
    let tok = tok
        .ok_or(SpectraError::Parse { line: lineno, message: "missing column".into() })?
        .trim();
    tok.parse().map_err(|_| SpectraError::Parse {
        line: lineno,
        message: format!("bad number '{tok}'"),
    })
}

pub fn load_spectrum(path: &Path) -> Result<Spectrum, SpectraError> {
    let file = std::fs::File::open(path)?;
    read_spectrum(std::io::BufReader::new(file))
}

pub fn write_spectrum<W: Write>(mut w: W, s: &Spectrum) -> Result<(), SpectraError> {
    if let Some(t) = s.temperature_k {
        writeln!(w, "# temperature_K: {}", format_float(t))?;
    }
    for (key, value) in &s.metadata {
        writeln!(w, "# {key}: {value}")?;
    }
    let header = match s.axis_kind {
        AxisKind::WavelengthNm => WAVELENGTH_HEADER,
        AxisKind::FrequencyHz => FREQUENCY_HEADER,
    };
    writeln!(w, "{header}")?;
    for &(x, y) in &s.samples {
        let x_out = match s.axis_kind {
            AxisKind::WavelengthNm => x,
            AxisKind::FrequencyHz => x / 1e6,
        };
        writeln!(w, "{},{}", format_float(x_out), format_float(y))?;
    }
    Ok(())
}

pub fn save_spectrum(path: &Path, s: &Spectrum) -> Result<(), SpectraError> {
    let file = std::fs::File::create(path)?;
    write_spectrum(std::io::BufWriter::new(file), s)
}

/// Indices of samples inside the closed axis interval.
fn window_indices(s: &Spectrum, window: (f64, f64)) -> (usize, usize) {
    let lo = s.samples.partition_point(|&(x, _)| x < window.0);
    let hi = s.samples.partition_point(|&(x, _)| x <= window.1);
    (lo, hi)
}

/// Locate the maximum in `window` and refine it with a parabola through
/// the three samples around it. Ties break toward the lower axis value;
/// a maximum on the window edge is returned unrefined with a warning.
pub fn find_peak(s: &Spectrum, window: (f64, f64)) -> Result<PeakEstimate, SpectraError> {
    let (lo, hi) = window_indices(s, window);
    if hi - lo < 3 {
        return Err(SpectraError::WindowTooSmall {
            lo: window.0,
            hi: window.1,
            got: hi - lo,
            needed: 3,
        });
    }
    let mut best = lo;
    let mut tie = false;
    for i in (lo + 1)..hi {
        if s.samples[i].1 > s.samples[best].1 {
            best = i;
            tie = false;
        } else if s.samples[i].1 == s.samples[best].1 {
            tie = true;
        }
    }
    let mut warnings = Vec::new();
    if tie {
        warnings.push(PeakWarning::TieBrokenTowardLowerAxis);
    }
    Ok(refine_extremum(s, best, (lo, hi), Extremum::Maximum, warnings))
}

enum Extremum {
    Maximum,
    Minimum,
}

fn refine_extremum(
    s: &Spectrum,
    index: usize,
    window: (usize, usize),
    kind: Extremum,
    mut warnings: Vec<PeakWarning>,
) -> PeakEstimate {
    let (lo, hi) = window;
    if index == lo || index + 1 == hi {
        warnings.push(PeakWarning::EdgePeak);
        return PeakEstimate {
            position: s.samples[index].0,
            height: s.samples[index].1,
            method: PeakMethod::Centroid,
            window,
            warnings,
        };
    }
    let (x0, y0) = s.samples[index - 1];
    let (x1, y1) = s.samples[index];
    let (x2, y2) = s.samples[index + 1];
    // Newton form through the three samples; c2 is the curvature sign.
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let c2 = (d2 - d1) / (x2 - x0);
    let curvature_ok = match kind {
        Extremum::Maximum => c2 < 0.0,
        Extremum::Minimum => c2 > 0.0,
    };
    if !curvature_ok {
        // Flat plateau: centroid of the contiguous equal-value run.
        let mut a = index;
        while a > lo && s.samples[a - 1].1 == y1 {
            a -= 1;
        }
        let mut b = index;
        while b + 1 < hi && s.samples[b + 1].1 == y1 {
            b += 1;
        }
        let position =
            s.samples[a..=b].iter().map(|&(x, _)| x).sum::<f64>() / ((b - a + 1) as f64);
        return PeakEstimate {
            position,
            height: y1,
            method: PeakMethod::Centroid,
            window,
            warnings,
        };
    }
    let vertex = 0.5 * (x0 + x1) - d1 / (2.0 * c2);
    let vertex = vertex.clamp(x0, x2);
    let height = y0 + d1 * (vertex - x0) + c2 * (vertex - x0) * (vertex - x1);
    PeakEstimate {
        position: vertex,
        height,
        method: PeakMethod::Parabolic,
        window,
        warnings,
    }
}

/// Convert per-temperature peak positions to energy shifts against the
/// spectrum nearest `reference_t_k` (within 2 K): (T, Delta E in meV).
pub fn peak_shift_series(
    spectra: &[Spectrum],
    reference_t_k: f64,
    window: (f64, f64),
) -> Result<DataSeries, SpectraError> {
    const REFERENCE_TOL_K: f64 = 2.0;
    for (i, s) in spectra.iter().enumerate() {
        if s.axis_kind != AxisKind::WavelengthNm {
            return Err(SpectraError::AxisKind {
                expected: AxisKind::WavelengthNm,
                got: s.axis_kind,
            });
        }
        if s.temperature_k.is_none() {
            return Err(SpectraError::MissingTemperature(i));
        }
    }
    let reference = spectra
        .iter()
        .filter(|s| (s.temperature_k.unwrap() - reference_t_k).abs() <= REFERENCE_TOL_K)
        .min_by(|a, b| {
            let da = (a.temperature_k.unwrap() - reference_t_k).abs();
            let db = (b.temperature_k.unwrap() - reference_t_k).abs();
            da.partial_cmp(&db).unwrap()
        })
        .ok_or(SpectraError::MissingReference {
            reference: reference_t_k,
            tolerance: REFERENCE_TOL_K,
        })?;
    let ref_peak = find_peak(reference, window)?;
    let ref_energy = wavelength_to_energy(ref_peak.position)?;

    let mut points = Vec::with_capacity(spectra.len());
    for s in spectra {
        let peak = find_peak(s, window)?;
        let energy = wavelength_to_energy(peak.position)?;
        points.push(DataPoint {
            x: s.temperature_k.unwrap(),
            y: (energy - ref_energy) * 1e3,
            sigma: None,
        });
    }
    points.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    Ok(DataSeries { points })
}

/// Detect local minima with topographic prominence above `threshold`,
/// refine each parabolically, and return up to `expected` dips sorted by
/// frequency. `complete` is false when fewer were found.
pub fn find_odmr_dips(
    s: &Spectrum,
    expected: usize,
    prominence_threshold: f64,
) -> Result<DipSearch, SpectraError> {
    if s.axis_kind != AxisKind::FrequencyHz {
        return Err(SpectraError::AxisKind {
            expected: AxisKind::FrequencyHz,
            got: s.axis_kind,
        });
    }
    let n = s.samples.len();
    let y = |i: usize| s.samples[i].1;
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if y(i) <= y(i - 1) && y(i) <= y(i + 1) && (y(i) < y(i - 1) || y(i) < y(i + 1)) {
            // Highest barrier on each side before the signal drops below
            // this minimum again; prominence is the lower barrier.
            let mut left_bar = f64::NEG_INFINITY;
            let mut j = i;
            while j > 0 {
                j -= 1;
                if y(j) < y(i) {
                    break;
                }
                left_bar = left_bar.max(y(j));
            }
            let mut right_bar = f64::NEG_INFINITY;
            let mut j = i;
            while j + 1 < n {
                j += 1;
                if y(j) < y(i) {
                    break;
                }
                right_bar = right_bar.max(y(j));
            }
            let prominence = left_bar.min(right_bar) - y(i);
            if prominence >= prominence_threshold {
                candidates.push((i, prominence));
            }
        }
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    candidates.truncate(expected);
    let mut dips: Vec<PeakEstimate> = candidates
        .into_iter()
        .map(|(i, _)| refine_extremum(s, i, (0, n), Extremum::Minimum, Vec::new()))
        .collect();
    dips.sort_by(|a, b| a.position.partial_cmp(&b.position).unwrap());
    let complete = dips.len() == expected;
    Ok(DipSearch { dips, complete })
}

/// Parse a data series from `x,y[,sigma]` CSV.
pub fn read_data_series<R: BufRead>(reader: R) -> Result<DataSeries, SpectraError> {
    let mut points = Vec::new();
    let mut saw_header = false;
    let mut has_sigma = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            has_sigma = match trimmed {
                "x,y" => false,
                "x,y,sigma" => true,
                other => {
                    return Err(SpectraError::Parse {
                        line: lineno,
                        message: format!("expected header 'x,y' or 'x,y,sigma', got '{other}'"),
                    })
                }
            };
            saw_header = true;
            continue;
        }
        let mut cols = trimmed.split(',');
        let x = parse_col(cols.next(), lineno)?;
        let y = parse_col(cols.next(), lineno)?;
        let sigma = if has_sigma { Some(parse_col(cols.next(), lineno)?) } else { None };
        if cols.next().is_some() {
            return Err(SpectraError::Parse {
                line: lineno,
                message: "too many columns".into(),
            });
        }
        points.push(DataPoint { x, y, sigma });
    }
    if !saw_header || points.is_empty() {
        return Err(SpectraError::Empty);
    }
    Ok(DataSeries { points })
}

pub fn load_data_series(path: &Path) -> Result<DataSeries, SpectraError> {
    let file = std::fs::File::open(path)?;
    read_data_series(std::io::BufReader::new(file))
}

pub fn write_data_series<W: Write>(mut w: W, series: &DataSeries) -> Result<(), SpectraError> {
    let has_sigma = series.points.iter().any(|p| p.sigma.is_some());
    writeln!(w, "{}", if has_sigma { "x,y,sigma" } else { "x,y" })?;
    for p in &series.points {
        match (has_sigma, p.sigma) {
            (true, Some(s)) => writeln!(
                w,
                "{},{},{}",
                format_float(p.x),
                format_float(p.y),
                format_float(s)
            )?,
            (true, None) => writeln!(
                w,
                "{},{},{}",
                format_float(p.x),
                format_float(p.y),
                format_float(1.0)
            )?,
            (false, _) => writeln!(w, "{},{}", format_float(p.x), format_float(p.y))?,
        }
    }
    Ok(())
}

pub fn save_data_series(path: &Path, series: &DataSeries) -> Result<(), SpectraError> {
    let file = std::fs::File::create(path)?;
    write_data_series(std::io::BufWriter::new(file), series)
}
