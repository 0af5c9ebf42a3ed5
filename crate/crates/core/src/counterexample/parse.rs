//! Line parser for `.out` counterexample files.
//!
//! The grammar is a sequence of `Key = Value` lines. Values are a bare token,
//! a format token `<n,l>`, or a brace-delimited list whose items are separated
//! by commas and/or whitespace. Lines without `=` (banners such as
//! `VERIFICATION FAILED`) are skipped. Keys are matched case-insensitively
//! with `_` and spaces treated alike, so `X_Size` and `X Size` are the same.

use thiserror::Error;

use super::Counterexample;
use crate::fixed_point::FixedPointFormat;
use crate::system::{DigitalSystem, ImplementationSpec, PropertyKind, RealizationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: `{key}`: {message}")]
    Syntax {
        line: usize,
        key: String,
        message: String,
    },
    #[error("line {line}: missing mandatory key `{key}` for property {property}")]
    MissingKey {
        line: usize,
        key: &'static str,
        property: String,
    },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Key {
    Property,
    Numerator,
    Denominator,
    XSize,
    SampleTime,
    Implementation,
    NumeratorFixed,
    DenominatorFixed,
    Realization,
    DynamicalRange,
    InitialStates,
    Inputs,
    Outputs,
    Delta,
}

impl Key {
    fn from_normalized(key: &str) -> Option<Self> {
        Some(match key {
            "property" => Key::Property,
            "numerator" => Key::Numerator,
            "denominator" => Key::Denominator,
            "x size" => Key::XSize,
            "sample time" => Key::SampleTime,
            "implementation" => Key::Implementation,
            "numerator (fixed-point)" | "numerator (fixed point)" => Key::NumeratorFixed,
            "denominator (fixed-point)" | "denominator (fixed point)" => Key::DenominatorFixed,
            "realization" => Key::Realization,
            "dynamical range" | "dynamic range" => Key::DynamicalRange,
            "initial states" => Key::InitialStates,
            "inputs" => Key::Inputs,
            "outputs" => Key::Outputs,
            "delta" => Key::Delta,
            _ => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Key::Property => "Property",
            Key::Numerator => "Numerator",
            Key::Denominator => "Denominator",
            Key::XSize => "X_Size",
            Key::SampleTime => "Sample_Time",
            Key::Implementation => "Implementation",
            Key::NumeratorFixed => "Numerator (fixed-point)",
            Key::DenominatorFixed => "Denominator (fixed-point)",
            Key::Realization => "Realization",
            Key::DynamicalRange => "Dynamical_Range",
            Key::InitialStates => "Initial_States",
            Key::Inputs => "Inputs",
            Key::Outputs => "Outputs",
            Key::Delta => "Delta",
        }
    }
}

fn normalize_key(raw: &str) -> String {
    raw.replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_lowercase()
}

#[derive(Default)]
struct Fields {
    property: Option<(usize, PropertyKind)>,
    numerator: Option<Vec<f64>>,
    denominator: Option<Vec<f64>>,
    x_size: Option<usize>,
    sample_time: Option<f64>,
    format: Option<FixedPointFormat>,
    numerator_fixed: Option<Vec<f64>>,
    denominator_fixed: Option<Vec<f64>>,
    realization: Option<RealizationKind>,
    dyn_range: Option<(f64, f64)>,
    initial_states: Option<Vec<f64>>,
    inputs: Option<Vec<f64>>,
    outputs: Option<Vec<f64>>,
    delta: Option<f64>,
}

/// Parses a complete `.out` body.
pub fn parse_counterexample(bytes: &[u8]) -> Result<Counterexample, ParseError> {
    parse_counterexample_with_notes(bytes).map(|(ce, _)| ce)
}

/// Parses a `.out` body and also returns non-fatal notes (unknown keys,
/// defaulted fields, values outside the dynamical range).
pub fn parse_counterexample_with_notes(
    bytes: &[u8],
) -> Result<(Counterexample, Vec<String>), ParseError> {
    let text = String::from_utf8_lossy(bytes);
    let mut fields = Fields::default();
    let mut seen: Vec<Key> = Vec::new();
    let mut notes = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        let Some((raw_key, value)) = line.split_once('=') else {
            continue;
        };
        let norm = normalize_key(raw_key);
        let Some(key) = Key::from_normalized(&norm) else {
            notes.push(format!(
                "line {line_no}: ignored unknown key `{}`",
                raw_key.trim()
            ));
            continue;
        };
        if seen.contains(&key) {
            return Err(syntax(line_no, key, "duplicate key"));
        }
        seen.push(key);
        let value = value.trim();
        match key {
            Key::Property => {
                let p = value
                    .parse::<PropertyKind>()
                    .map_err(|e| syntax(line_no, key, e.to_string()))?;
                fields.property = Some((line_no, p));
            }
            Key::Numerator => fields.numerator = Some(parse_list(value, line_no, key)?),
            Key::Denominator => fields.denominator = Some(parse_list(value, line_no, key)?),
            Key::NumeratorFixed => fields.numerator_fixed = Some(parse_list(value, line_no, key)?),
            Key::DenominatorFixed => {
                fields.denominator_fixed = Some(parse_list(value, line_no, key)?)
            }
            Key::InitialStates => fields.initial_states = Some(parse_list(value, line_no, key)?),
            Key::Inputs => fields.inputs = Some(parse_list(value, line_no, key)?),
            Key::Outputs => fields.outputs = Some(parse_list(value, line_no, key)?),
            Key::XSize => {
                let k = value
                    .parse::<usize>()
                    .ok()
                    .filter(|&k| k > 0)
                    .ok_or_else(|| syntax(line_no, key, "expected a positive integer"))?;
                fields.x_size = Some(k);
            }
            Key::SampleTime => {
                let t = parse_number(value, line_no, key)?;
                if t <= 0.0 {
                    return Err(syntax(line_no, key, "sample time must be positive"));
                }
                fields.sample_time = Some(t);
            }
            Key::Delta => {
                let d = parse_number(value, line_no, key)?;
                if d <= 0.0 {
                    return Err(syntax(line_no, key, "delta must be positive"));
                }
                fields.delta = Some(d);
            }
            Key::Implementation => fields.format = Some(parse_format(value, line_no, key)?),
            Key::Realization => {
                let r = value
                    .parse::<RealizationKind>()
                    .map_err(|e| syntax(line_no, key, e.to_string()))?;
                fields.realization = Some(r);
            }
            Key::DynamicalRange => {
                let v = parse_list(value, line_no, key)?;
                let [lo, hi] = v[..] else {
                    return Err(syntax(line_no, key, "expected exactly two values"));
                };
                fields.dyn_range = Some((lo, hi));
            }
        }
    }

    assemble(fields, &mut notes).map(|ce| (ce, notes))
}

fn assemble(f: Fields, notes: &mut Vec<String>) -> Result<Counterexample, ParseError> {
    let Some((prop_line, property)) = f.property else {
        return Err(ParseError::MissingKey {
            line: 0,
            key: "Property",
            property: "<unknown>".into(),
        });
    };
    let missing = |key: &'static str| ParseError::MissingKey {
        line: prop_line,
        key,
        property: property.to_string(),
    };
    let numerator = f.numerator.ok_or_else(|| missing(Key::Numerator.name()))?;
    let denominator = f
        .denominator
        .ok_or_else(|| missing(Key::Denominator.name()))?;
    let format = f
        .format
        .ok_or_else(|| missing(Key::Implementation.name()))?;
    let realization = f
        .realization
        .ok_or_else(|| missing(Key::Realization.name()))?;
    if property.is_time_domain() {
        if f.x_size.is_none() {
            return Err(missing(Key::XSize.name()));
        }
        if f.inputs.is_none() {
            return Err(missing(Key::Inputs.name()));
        }
        if f.outputs.is_none() {
            return Err(missing(Key::Outputs.name()));
        }
    }

    let system = DigitalSystem::new(numerator, denominator, f.sample_time)
        .map_err(|e| ParseError::Structural(e.to_string()))?;
    let dyn_range = f.dyn_range.unwrap_or_else(|| {
        notes.push("no dynamical range given; assuming [-1, 1]".into());
        (-1.0, 1.0)
    });
    let implementation = ImplementationSpec::new(format, dyn_range, f.delta, realization)
        .map_err(|e| ParseError::Structural(e.to_string()))?;

    let quantized_numerator = f.numerator_fixed.unwrap_or_default();
    let quantized_denominator = f.denominator_fixed.unwrap_or_default();
    for (name, fixed, real) in [
        ("numerator", &quantized_numerator, system.numerator()),
        ("denominator", &quantized_denominator, system.denominator()),
    ] {
        if !fixed.is_empty() && fixed.len() != real.len() {
            return Err(ParseError::Structural(format!(
                "fixed-point {name} has {} coefficients, real {name} has {}",
                fixed.len(),
                real.len()
            )));
        }
    }

    let inputs = f.inputs.unwrap_or_default();
    let claimed_outputs = f.outputs.unwrap_or_default();
    if let Some(k) = f.x_size {
        if (property.is_time_domain() || !inputs.is_empty()) && inputs.len() != k {
            return Err(ParseError::Structural(format!(
                "X_Size is {k} but {} inputs were given",
                inputs.len()
            )));
        }
        if (property.is_time_domain() || !claimed_outputs.is_empty()) && claimed_outputs.len() != k
        {
            return Err(ParseError::Structural(format!(
                "X_Size is {k} but {} outputs were given",
                claimed_outputs.len()
            )));
        }
    }
    let outside = inputs
        .iter()
        .filter(|&&x| x < implementation.dyn_min || x > implementation.dyn_max)
        .count();
    if outside > 0 {
        notes.push(format!(
            "{outside} input(s) lie outside the dynamical range [{}, {}]",
            implementation.dyn_min, implementation.dyn_max
        ));
    }

    Ok(Counterexample {
        property,
        system,
        implementation,
        x_size: f.x_size,
        quantized_numerator,
        quantized_denominator,
        initial_states: f.initial_states.unwrap_or_default(),
        inputs,
        claimed_outputs,
        source_path: String::new(),
    })
}

/// Reads just the `Property` line, for filtering files that fail to parse.
pub fn sniff_property(bytes: &[u8]) -> Option<PropertyKind> {
    String::from_utf8_lossy(bytes).lines().find_map(|line| {
        let (k, v) = line.split_once('=')?;
        (normalize_key(k) == "property")
            .then(|| v.parse().ok())
            .flatten()
    })
}

fn syntax(line: usize, key: Key, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        key: key.name().to_string(),
        message: message.into(),
    }
}

fn parse_number(token: &str, line: usize, key: Key) -> Result<f64, ParseError> {
    let v = token
        .parse::<f64>()
        .map_err(|_| syntax(line, key, format!("`{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(syntax(line, key, format!("`{token}` is not finite")));
    }
    Ok(v)
}

fn parse_list(value: &str, line: usize, key: Key) -> Result<Vec<f64>, ParseError> {
    let inner = value
        .strip_prefix('{')
        .and_then(|v| v.strip_suffix('}'))
        .ok_or_else(|| syntax(line, key, "expected a `{ ... }` list"))?;
    inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_number(t, line, key))
        .collect()
}

fn parse_format(value: &str, line: usize, key: Key) -> Result<FixedPointFormat, ParseError> {
    let bad = || {
        syntax(
            line,
            key,
            format!("malformed format `{value}`, expected <n,l>"),
        )
    };
    let inner = value
        .strip_prefix('<')
        .and_then(|v| v.strip_suffix('>'))
        .ok_or_else(bad)?;
    let (n, l) = inner.split_once(',').ok_or_else(bad)?;
    let n = n.trim().parse::<u32>().map_err(|_| bad())?;
    let l = l.trim().parse::<u32>().map_err(|_| bad())?;
    FixedPointFormat::new(n, l).map_err(|e| syntax(line, key, e.to_string()))
}
