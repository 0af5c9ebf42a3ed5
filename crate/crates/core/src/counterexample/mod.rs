//! Verifier counterexamples: the `.out` text format, directory scans, and the
//! JSON results file.

mod parse;
mod results;
mod scan;

use std::fmt::Write as _;

pub use parse::{
    parse_counterexample, parse_counterexample_with_notes, sniff_property, ParseError,
};
pub use results::{
    read_results, write_results, CounterexampleGroup, DigitalSystemGroup, ImplementationGroup,
    InputsGroup, OutputsGroup, ResultRecord, ResultsError, ValidationOutcome, ValidationStatus,
    SCHEMA_VERSION,
};
pub use scan::{scan_directory, Scan, ScanEntry, ScanError};

use crate::fixed_point::{fwl_values, pow2, RoundingMode};
use crate::system::{DigitalSystem, ImplementationSpec, PropertyKind};

/// One parsed verifier violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub property: PropertyKind,
    pub system: DigitalSystem,
    pub implementation: ImplementationSpec,
    /// Verification bound k.
    pub x_size: Option<usize>,
    /// Coefficients as printed on the `(fixed-point)` lines; empty when absent.
    pub quantized_numerator: Vec<f64>,
    pub quantized_denominator: Vec<f64>,
    pub initial_states: Vec<f64>,
    pub inputs: Vec<f64>,
    pub claimed_outputs: Vec<f64>,
    pub source_path: String,
}

/// Where the coefficients used for replay came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientSource {
    /// No fixed-point lines; the real coefficients are quantized on replay.
    Real,
    /// Fixed-point lines used as real values.
    FixedPoint,
    /// Fixed-point lines read as scaled integers `s * 2^-frac_bits`.
    ScaledInteger { frac_bits: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoefficients {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub source: CoefficientSource,
    pub notes: Vec<String>,
}

impl Counterexample {
    /// File stem of the source path, or the whole path when it has none.
    pub fn id(&self) -> String {
        std::path::Path::new(&self.source_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.source_path.clone())
    }

    /// Coefficients the verifier actually worked with.
    ///
    /// Fixed-point lines win over the real ones when present. Some verifier
    /// builds print them as scaled integers rather than real values; that case
    /// is detected when they are integer-valued and disagree with the FWL
    /// image of the real coefficients. The scale is then taken from the
    /// leading denominator entry (a power of two standing for a normalized
    /// `a0 = 1`), falling back to the best least-absolute fit.
    pub fn effective_coefficients(&self, rmode: RoundingMode) -> EffectiveCoefficients {
        let real_num = self.system.numerator();
        let real_den = self.system.denominator();
        let mut notes = Vec::new();
        if self.quantized_numerator.is_empty() || self.quantized_denominator.is_empty() {
            return EffectiveCoefficients {
                numerator: real_num.to_vec(),
                denominator: real_den.to_vec(),
                source: CoefficientSource::Real,
                notes,
            };
        }
        let fmt = self.implementation.format;
        let fx_num = &self.quantized_numerator;
        let fx_den = &self.quantized_denominator;

        let consistent = [rmode, RoundingMode::Round, RoundingMode::Floor]
            .into_iter()
            .any(|mode| {
                fwl_values(real_num, fmt, mode).ok().as_deref() == Some(fx_num.as_slice())
                    && fwl_values(real_den, fmt, mode).ok().as_deref() == Some(fx_den.as_slice())
            });
        if consistent {
            return EffectiveCoefficients {
                numerator: fx_num.clone(),
                denominator: fx_den.clone(),
                source: CoefficientSource::FixedPoint,
                notes,
            };
        }

        let integer_valued = fx_num.iter().chain(fx_den).all(|v| v.fract() == 0.0);
        let leading = fx_den[0];
        let by_leading = (integer_valued && leading > 1.0 && leading.fract() == 0.0)
            .then(|| leading.log2())
            .filter(|e| e.fract() == 0.0 && *e <= 62.0)
            .map(|e| e as u32);
        let frac_bits = by_leading.or_else(|| {
            integer_valued
                .then(|| best_fit_scale(fx_num, fx_den, real_num, real_den))
                .filter(|&l| l > 0)
        });

        match frac_bits {
            Some(l) => {
                let scale = pow2(-(l as i32));
                let numerator: Vec<f64> = fx_num.iter().map(|v| v * scale).collect();
                let denominator: Vec<f64> = fx_den.iter().map(|v| v * scale).collect();
                notes.push(format!(
                    "fixed-point coefficients read as scaled integers with {l} fractional bits: \
                     numerator {numerator:?}, denominator {denominator:?}"
                ));
                if numerator != real_num || denominator != real_den {
                    notes.push(format!(
                        "real coefficients {real_num:?} / {real_den:?} disagree with the \
                         fixed-point lines; replaying the fixed-point values"
                    ));
                }
                EffectiveCoefficients {
                    numerator,
                    denominator,
                    source: CoefficientSource::ScaledInteger { frac_bits: l },
                    notes,
                }
            }
            None => {
                notes.push(format!(
                    "fixed-point coefficients differ from the FWL image of the real \
                     coefficients under {fmt}; replaying the fixed-point values"
                ));
                EffectiveCoefficients {
                    numerator: fx_num.clone(),
                    denominator: fx_den.clone(),
                    source: CoefficientSource::FixedPoint,
                    notes,
                }
            }
        }
    }

    /// Renders the record back into the `.out` key/value grammar.
    pub fn to_out_text(&self) -> String {
        let list = |v: &[f64]| {
            let items: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            format!("{{ {} }}", items.join(", "))
        };
        let imp = &self.implementation;
        let mut out = String::new();
        let _ = writeln!(out, "Property = {}", self.property);
        let _ = writeln!(out, "Numerator = {}", list(self.system.numerator()));
        let _ = writeln!(out, "Denominator = {}", list(self.system.denominator()));
        if let Some(k) = self.x_size {
            let _ = writeln!(out, "X_Size = {k}");
        }
        if let Some(t) = self.system.sample_time() {
            let _ = writeln!(out, "Sample_Time = {t}");
        }
        let _ = writeln!(
            out,
            "Implementation = <{},{}>",
            imp.format.int_bits(),
            imp.format.frac_bits()
        );
        if !self.quantized_numerator.is_empty() {
            let _ = writeln!(
                out,
                "Numerator (fixed-point) = {}",
                list(&self.quantized_numerator)
            );
        }
        if !self.quantized_denominator.is_empty() {
            let _ = writeln!(
                out,
                "Denominator (fixed-point) = {}",
                list(&self.quantized_denominator)
            );
        }
        let _ = writeln!(out, "Realization = {}", imp.realization);
        if let Some(d) = imp.delta {
            let _ = writeln!(out, "Delta = {d}");
        }
        let _ = writeln!(
            out,
            "Dynamical_Range = {}",
            list(&[imp.dyn_min, imp.dyn_max])
        );
        if !self.initial_states.is_empty() {
            let _ = writeln!(out, "Initial_States = {}", list(&self.initial_states));
        }
        if !self.inputs.is_empty() {
            let _ = writeln!(out, "Inputs = {}", list(&self.inputs));
        }
        if !self.claimed_outputs.is_empty() {
            let _ = writeln!(out, "Outputs = {}", list(&self.claimed_outputs));
        }
        out
    }
}

fn best_fit_scale(fx_num: &[f64], fx_den: &[f64], real_num: &[f64], real_den: &[f64]) -> u32 {
    let cost = |l: u32| -> f64 {
        let s = pow2(-(l as i32));
        fx_num
            .iter()
            .zip(real_num)
            .chain(fx_den.iter().zip(real_den))
            .map(|(f, r)| (f * s - r).abs())
            .sum()
    };
    (0..=62)
        .min_by(|&a, &b| cost(a).total_cmp(&cost(b)))
        .unwrap_or(0)
}
