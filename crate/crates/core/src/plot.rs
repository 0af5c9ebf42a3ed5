//! Data behind the overflow, limit-cycle and pole-zero plots.
//!
//! Nothing is rendered here. Each plot is a set of named point series plus
//! annotations, written as CSV (`series,x,y`, one file per series) and as a
//! single JSON document.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counterexample::Counterexample;
use crate::fixed_point::{FixedPointFormat, RoundingMode};
use crate::polynomial::roots_of_coeffs;
use crate::realization::{OverflowEvent, SimulationTrace};
use crate::system::{DigitalSystem, RealizationKind};
use crate::validators::{extract_oscillation, fwl_roots, overflow_events_of, ValidatorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    OverflowTrace,
    LcoTrace,
    PoleZeroMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Annotation {
    HorizontalLine { label: String, y: f64 },
    Marker { label: String, x: f64, y: f64 },
    UnitCircle,
    Period { period: usize, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub kind: PlotKind,
    pub title: String,
    pub series: Vec<Series>,
    pub annotations: Vec<Annotation>,
}

impl PlotSeries {
    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn markers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.annotations.iter().filter_map(|a| match a {
            Annotation::Marker { x, y, .. } => Some((*x, *y)),
            _ => None,
        })
    }

    /// All series in one CSV body.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,x,y\n");
        for s in &self.series {
            write_rows(&mut out, s);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plot data serializes")
    }

    /// Writes `<stem>_<series>.csv` for each series and `<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for s in &self.series {
            let mut body = String::from("series,x,y\n");
            write_rows(&mut body, s);
            let path = dir.join(format!("{stem}_{}.csv", s.name));
            std::fs::write(&path, body)?;
            written.push(path);
        }
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, self.to_json() + "\n")?;
        written.push(path);
        Ok(written)
    }
}

fn write_rows(out: &mut String, s: &Series) {
    for [x, y] in &s.points {
        let _ = writeln!(out, "{},{x},{y}", s.name);
    }
}

fn indexed(values: &[f64]) -> Vec<[f64; 2]> {
    values
        .iter()
        .enumerate()
        .map(|(n, &y)| [n as f64, y])
        .collect()
}

fn range_lines(fmt: FixedPointFormat) -> [Annotation; 2] {
    [
        Annotation::HorizontalLine {
            label: "min".into(),
            y: fmt.min_value(),
        },
        Annotation::HorizontalLine {
            label: "max".into(),
            y: fmt.max_value(),
        },
    ]
}

/// Raw outputs against the range limits, with a marker at every step that
/// overflowed.
pub fn overflow_series(ce: &Counterexample, trace: &SimulationTrace) -> PlotSeries {
    let events: Vec<OverflowEvent> = overflow_events_of(trace);
    let mut series = vec![Series {
        name: "output".into(),
        points: indexed(&trace.outputs_raw),
    }];
    if !ce.claimed_outputs.is_empty() {
        series.push(Series {
            name: "claimed".into(),
            points: indexed(&ce.claimed_outputs),
        });
    }
    let mut annotations = range_lines(ce.implementation.format).to_vec();
    let mut steps: Vec<usize> = events.iter().map(|e| e.step).collect();
    steps.sort_unstable();
    steps.dedup();
    for n in steps {
        annotations.push(Annotation::Marker {
            label: "overflow".into(),
            x: n as f64,
            y: trace.outputs_raw[n],
        });
    }
    PlotSeries {
        kind: PlotKind::OverflowTrace,
        title: format!("{} overflow", ce.id()),
        series,
        annotations,
    }
}

/// Replayed outputs, annotated with the period when they oscillate.
pub fn lco_series(ce: &Counterexample, trace: &SimulationTrace) -> PlotSeries {
    let outputs = trace.outputs();
    let mut annotations = range_lines(ce.implementation.format).to_vec();
    if let Some((period, amplitude)) = extract_oscillation(&outputs) {
        if period >= 2 && amplitude > 0.0 {
            annotations.push(Annotation::Period { period, amplitude });
        }
    }
    PlotSeries {
        kind: PlotKind::LcoTrace,
        title: format!("{} limit cycle", ce.id()),
        series: vec![Series {
            name: "output".into(),
            points: indexed(&outputs),
        }],
        annotations,
    }
}

/// Poles and zeros with and without quantization of the coefficients.
///
/// The FWL sets come from the same computation the stability and
/// minimum-phase checks use.
pub fn pole_zero_series(
    system: &DigitalSystem,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    realization: RealizationKind,
    delta: Option<f64>,
) -> Result<PlotSeries, ValidatorError> {
    let (num, den) = system.normalized();
    let a0 = system.denominator()[0];
    let points = |roots: &[num_complex::Complex64]| roots.iter().map(|r| [r.re, r.im]).collect();
    let (_, fwl_zeros, _) = fwl_roots(system.numerator(), a0, fmt, rmode, realization, delta)?;
    let (_, fwl_poles, _) = fwl_roots(system.denominator(), a0, fmt, rmode, realization, delta)?;
    let zeros = roots_of_coeffs(&num)?;
    let poles = roots_of_coeffs(&den)?;
    Ok(PlotSeries {
        kind: PlotKind::PoleZeroMap,
        title: system.transfer_function_text(),
        series: vec![
            Series {
                name: "poles_ideal".into(),
                points: points(&poles.roots),
            },
            Series {
                name: "poles_fwl".into(),
                points: points(&fwl_poles),
            },
            Series {
                name: "zeros_ideal".into(),
                points: points(&zeros.roots),
            },
            Series {
                name: "zeros_fwl".into(),
                points: points(&fwl_zeros),
            },
        ],
        annotations: vec![Annotation::UnitCircle],
    })
}
