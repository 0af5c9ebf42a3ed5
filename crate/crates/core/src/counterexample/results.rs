//! The `cxval-1` JSON results file.
//!
//! The document is a top-level array with one record per counterexample. Each
//! record carries five groups (`counterexample`, `digital_system`, `inputs`,
//! `implementation`, `outputs`) plus a `schema` tag. Groups describing the
//! input file are `null` when the file could not be parsed.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Counterexample;
use crate::fixed_point::{FixedPointFormat, OverflowMode, RoundingMode};
use crate::system::{DigitalSystem, ImplementationSpec, PropertyKind, RealizationKind};

pub const SCHEMA_VERSION: &str = "cxval-1";

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("{0} outcomes but {1} counterexample slots")]
    LengthMismatch(usize, usize),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed results file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema `{0}`")]
    Schema(String),
    #[error("record {index} cannot be rebuilt: {message}")]
    Record { index: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Reproducible,
    Irreproducible,
    Error,
}

impl fmt::Display for ValidationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationStatus::Reproducible => "reproducible",
            ValidationStatus::Irreproducible => "irreproducible",
            ValidationStatus::Error => "error",
        })
    }
}

/// Verdict on one counterexample together with the replay evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub counterexample_id: String,
    pub property: Option<PropertyKind>,
    pub status: ValidationStatus,
    pub simulated_outputs: Vec<f64>,
    /// Zero-based steps whose arithmetic left the representable range.
    pub overflow_steps: Vec<usize>,
    pub lco_period: Option<usize>,
    pub lco_amplitude: Option<f64>,
    pub cpu_time: f64,
    pub diagnostics: Vec<String>,
    pub rounding_mode: RoundingMode,
    pub overflow_mode: OverflowMode,
}

impl ValidationOutcome {
    /// An `Error` outcome; `message` becomes the first diagnostic.
    pub fn error(id: impl Into<String>, property: Option<PropertyKind>, message: String) -> Self {
        Self {
            counterexample_id: id.into(),
            property,
            status: ValidationStatus::Error,
            simulated_outputs: Vec::new(),
            overflow_steps: Vec::new(),
            lco_period: None,
            lco_amplitude: None,
            cpu_time: 0.0,
            diagnostics: vec![message],
            rounding_mode: RoundingMode::default(),
            overflow_mode: OverflowMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: String,
    pub counterexample: CounterexampleGroup,
    pub digital_system: Option<DigitalSystemGroup>,
    pub inputs: Option<InputsGroup>,
    pub implementation: Option<ImplementationGroup>,
    pub outputs: OutputsGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleGroup {
    pub id: String,
    pub property: Option<PropertyKind>,
    pub source_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalSystemGroup {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub numerator_fixed_point: Vec<f64>,
    pub denominator_fixed_point: Vec<f64>,
    pub transfer_function: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputsGroup {
    pub inputs: Vec<f64>,
    pub initial_states: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplementationGroup {
    pub int_bits: u32,
    pub frac_bits: u32,
    pub dynamical_range: [f64; 2],
    pub delta: Option<f64>,
    pub sample_time: Option<f64>,
    pub bound: Option<usize>,
    pub realization: RealizationKind,
    pub rounding_mode: RoundingMode,
    pub overflow_mode: OverflowMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputsGroup {
    pub verifier_outputs: Vec<f64>,
    pub simulated_outputs: Vec<f64>,
    pub overflow_steps: Vec<usize>,
    pub lco_period: Option<usize>,
    pub lco_amplitude: Option<f64>,
    pub cpu_time: f64,
    pub status: ValidationStatus,
    pub diagnostics: Vec<String>,
}

impl ResultRecord {
    pub fn new(outcome: &ValidationOutcome, ce: Option<&Counterexample>) -> Self {
        let counterexample = CounterexampleGroup {
            id: outcome.counterexample_id.clone(),
            property: outcome.property.or(ce.map(|c| c.property)),
            source_path: ce.map(|c| c.source_path.clone()),
        };
        let digital_system = ce.map(|c| DigitalSystemGroup {
            numerator: c.system.numerator().to_vec(),
            denominator: c.system.denominator().to_vec(),
            numerator_fixed_point: c.quantized_numerator.clone(),
            denominator_fixed_point: c.quantized_denominator.clone(),
            transfer_function: c.system.transfer_function_text(),
        });
        let inputs = ce.map(|c| InputsGroup {
            inputs: c.inputs.clone(),
            initial_states: c.initial_states.clone(),
        });
        let implementation = ce.map(|c| {
            let imp = &c.implementation;
            ImplementationGroup {
                int_bits: imp.format.int_bits(),
                frac_bits: imp.format.frac_bits(),
                dynamical_range: [imp.dyn_min, imp.dyn_max],
                delta: imp.delta,
                sample_time: c.system.sample_time(),
                bound: c.x_size,
                realization: imp.realization,
                rounding_mode: outcome.rounding_mode,
                overflow_mode: outcome.overflow_mode,
            }
        });
        let outputs = OutputsGroup {
            verifier_outputs: ce.map(|c| c.claimed_outputs.clone()).unwrap_or_default(),
            simulated_outputs: outcome.simulated_outputs.clone(),
            overflow_steps: outcome.overflow_steps.clone(),
            lco_period: outcome.lco_period,
            lco_amplitude: outcome.lco_amplitude,
            cpu_time: outcome.cpu_time,
            status: outcome.status,
            diagnostics: outcome.diagnostics.clone(),
        };
        Self {
            schema: SCHEMA_VERSION.to_string(),
            counterexample,
            digital_system,
            inputs,
            implementation,
            outputs,
        }
    }

    /// Rebuilds the counterexample this record was written from.
    ///
    /// Returns `None` for records of files that failed to parse.
    pub fn to_counterexample(&self) -> Option<Result<Counterexample, String>> {
        let ds = self.digital_system.as_ref()?;
        let inp = self.inputs.as_ref()?;
        let imp = self.implementation.as_ref()?;
        let property = self.counterexample.property?;
        Some((|| {
            let system = DigitalSystem::new(
                ds.numerator.clone(),
                ds.denominator.clone(),
                imp.sample_time,
            )
            .map_err(|e| e.to_string())?;
            let format =
                FixedPointFormat::new(imp.int_bits, imp.frac_bits).map_err(|e| e.to_string())?;
            let implementation = ImplementationSpec::new(
                format,
                (imp.dynamical_range[0], imp.dynamical_range[1]),
                imp.delta,
                imp.realization,
            )
            .map_err(|e| e.to_string())?;
            Ok(Counterexample {
                property,
                system,
                implementation,
                x_size: imp.bound,
                quantized_numerator: ds.numerator_fixed_point.clone(),
                quantized_denominator: ds.denominator_fixed_point.clone(),
                initial_states: inp.initial_states.clone(),
                inputs: inp.inputs.clone(),
                claimed_outputs: self.outputs.verifier_outputs.clone(),
                source_path: self.counterexample.source_path.clone().unwrap_or_default(),
            })
        })())
    }

    /// Rebuilds the outcome part of the record.
    pub fn to_outcome(&self) -> ValidationOutcome {
        let (rounding_mode, overflow_mode) = self
            .implementation
            .as_ref()
            .map(|i| (i.rounding_mode, i.overflow_mode))
            .unwrap_or_default();
        ValidationOutcome {
            counterexample_id: self.counterexample.id.clone(),
            property: self.counterexample.property,
            status: self.outputs.status,
            simulated_outputs: self.outputs.simulated_outputs.clone(),
            overflow_steps: self.outputs.overflow_steps.clone(),
            lco_period: self.outputs.lco_period,
            lco_amplitude: self.outputs.lco_amplitude,
            cpu_time: self.outputs.cpu_time,
            diagnostics: self.outputs.diagnostics.clone(),
            rounding_mode,
            overflow_mode,
        }
    }
}

/// Writes parallel outcome/counterexample lists as one JSON array.
pub fn write_results(
    outcomes: &[ValidationOutcome],
    ces: &[Option<Counterexample>],
    path: &Path,
) -> Result<(), ResultsError> {
    if outcomes.len() != ces.len() {
        return Err(ResultsError::LengthMismatch(outcomes.len(), ces.len()));
    }
    let records: Vec<ResultRecord> = outcomes
        .iter()
        .zip(ces)
        .map(|(o, c)| ResultRecord::new(o, c.as_ref()))
        .collect();
    let mut text = serde_json::to_string_pretty(&records)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ResultsError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, ResultsError> {
    let text = std::fs::read_to_string(path).map_err(|source| ResultsError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let records: Vec<ResultRecord> = serde_json::from_str(&text)?;
    if let Some(r) = records.iter().find(|r| r.schema != SCHEMA_VERSION) {
        return Err(ResultsError::Schema(r.schema.clone()));
    }
    Ok(records)
}
