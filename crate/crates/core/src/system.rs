//! Transfer-function systems and their implementation parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed_point::FixedPointFormat;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("{0} coefficient vector is empty")]
    EmptyCoefficients(&'static str),
    #[error("{0} coefficients must be finite")]
    NonFinite(&'static str),
    #[error("leading denominator coefficient a0 must be nonzero")]
    ZeroLeadingDenominator,
    #[error("sample time must be a positive finite number, got {0}")]
    InvalidSampleTime(f64),
    #[error("dynamical range [{0}, {1}] is empty or non-finite")]
    InvalidDynamicalRange(f64, f64),
    #[error("realization {0} requires a positive delta")]
    MissingDelta(RealizationKind),
    #[error("delta given for non-delta realization {0}")]
    UnexpectedDelta(RealizationKind),
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("unknown realization `{0}`")]
    UnknownRealization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PropertyKind {
    Stability,
    MinimumPhase,
    Overflow,
    LimitCycle,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 4] = [
        PropertyKind::Stability,
        PropertyKind::MinimumPhase,
        PropertyKind::Overflow,
        PropertyKind::LimitCycle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PropertyKind::Stability => "STABILITY",
            PropertyKind::MinimumPhase => "MINIMUM_PHASE",
            PropertyKind::Overflow => "OVERFLOW",
            PropertyKind::LimitCycle => "LIMIT_CYCLE",
        }
    }

    /// Short command-line code: `s`, `m`, `o` or `lc`.
    pub fn letter(&self) -> &'static str {
        match self {
            PropertyKind::Stability => "s",
            PropertyKind::MinimumPhase => "m",
            PropertyKind::Overflow => "o",
            PropertyKind::LimitCycle => "lc",
        }
    }

    pub fn from_letter(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.letter() == code)
    }

    /// Whether replay needs inputs and claimed outputs.
    pub fn is_time_domain(&self) -> bool {
        matches!(self, PropertyKind::Overflow | PropertyKind::LimitCycle)
    }
}

impl FromStr for PropertyKind {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == upper)
            .ok_or_else(|| SystemError::UnknownProperty(s.trim().to_string()))
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RealizationKind {
    DFI,
    DFII,
    TDFII,
    DDFI,
    DDFII,
    TDDFII,
}

impl RealizationKind {
    pub const ALL: [RealizationKind; 6] = [
        RealizationKind::DFI,
        RealizationKind::DFII,
        RealizationKind::TDFII,
        RealizationKind::DDFI,
        RealizationKind::DDFII,
        RealizationKind::TDDFII,
    ];

    pub fn is_delta(&self) -> bool {
        matches!(
            self,
            RealizationKind::DDFI | RealizationKind::DDFII | RealizationKind::TDDFII
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RealizationKind::DFI => "DFI",
            RealizationKind::DFII => "DFII",
            RealizationKind::TDFII => "TDFII",
            RealizationKind::DDFI => "DDFI",
            RealizationKind::DDFII => "DDFII",
            RealizationKind::TDDFII => "TDDFII",
        }
    }
}

impl FromStr for RealizationKind {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == upper)
            .ok_or_else(|| SystemError::UnknownRealization(s.trim().to_string()))
    }
}

impl fmt::Display for RealizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `H(z) = (b0 + b1 z^-1 + ... + bM z^-M) / (a0 + a1 z^-1 + ... + aN z^-N)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalSystem {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    sample_time: Option<f64>,
}

impl DigitalSystem {
    pub fn new(
        numerator: Vec<f64>,
        denominator: Vec<f64>,
        sample_time: Option<f64>,
    ) -> Result<Self, SystemError> {
        if numerator.is_empty() {
            return Err(SystemError::EmptyCoefficients("numerator"));
        }
        if denominator.is_empty() {
            return Err(SystemError::EmptyCoefficients("denominator"));
        }
        if numerator.iter().any(|c| !c.is_finite()) {
            return Err(SystemError::NonFinite("numerator"));
        }
        if denominator.iter().any(|c| !c.is_finite()) {
            return Err(SystemError::NonFinite("denominator"));
        }
        if denominator[0] == 0.0 {
            return Err(SystemError::ZeroLeadingDenominator);
        }
        if let Some(t) = sample_time {
            if !(t.is_finite() && t > 0.0) {
                return Err(SystemError::InvalidSampleTime(t));
            }
        }
        Ok(Self {
            numerator,
            denominator,
            sample_time,
        })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn sample_time(&self) -> Option<f64> {
        self.sample_time
    }

    /// Denominator order N.
    pub fn den_order(&self) -> usize {
        self.denominator.len() - 1
    }

    /// Numerator order M.
    pub fn num_order(&self) -> usize {
        self.numerator.len() - 1
    }

    /// Both coefficient vectors divided by `a0`.
    pub fn normalized(&self) -> (Vec<f64>, Vec<f64>) {
        let a0 = self.denominator[0];
        (
            self.numerator.iter().map(|b| b / a0).collect(),
            self.denominator.iter().map(|a| a / a0).collect(),
        )
    }

    /// Human-readable `H(z)` in powers of `z^-1`.
    pub fn transfer_function_text(&self) -> String {
        format!(
            "H(z) = ({}) / ({})",
            poly_text(&self.numerator),
            poly_text(&self.denominator)
        )
    }
}

fn poly_text(coeffs: &[f64]) -> String {
    let mut out = String::new();
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 && coeffs.len() > 1 {
            continue;
        }
        let term = match k {
            0 => format!("{}", c.abs()),
            1 if c.abs() == 1.0 => "z^-1".to_string(),
            1 => format!("{} z^-1", c.abs()),
            _ if c.abs() == 1.0 => format!("z^-{k}"),
            _ => format!("{} z^-{k}", c.abs()),
        };
        if out.is_empty() {
            if c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if c < 0.0 { " - " } else { " + " });
        }
        out.push_str(&term);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Word length, signal range, and realization chosen for an implementation.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplementationSpec {
    pub format: FixedPointFormat,
    pub dyn_min: f64,
    pub dyn_max: f64,
    pub delta: Option<f64>,
    pub realization: RealizationKind,
}

impl ImplementationSpec {
    pub fn new(
        format: FixedPointFormat,
        (dyn_min, dyn_max): (f64, f64),
        delta: Option<f64>,
        realization: RealizationKind,
    ) -> Result<Self, SystemError> {
        if !(dyn_min.is_finite() && dyn_max.is_finite() && dyn_min < dyn_max) {
            return Err(SystemError::InvalidDynamicalRange(dyn_min, dyn_max));
        }
        match (realization.is_delta(), delta) {
            (true, None) => return Err(SystemError::MissingDelta(realization)),
            (true, Some(d)) if !(d.is_finite() && d > 0.0) => {
                return Err(SystemError::MissingDelta(realization))
            }
            (false, Some(_)) => return Err(SystemError::UnexpectedDelta(realization)),
            _ => {}
        }
        Ok(Self {
            format,
            dyn_min,
            dyn_max,
            delta,
            realization,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_names_and_letters() {
        assert_eq!(
            "limit_cycle".parse::<PropertyKind>().unwrap(),
            PropertyKind::LimitCycle
        );
        assert_eq!(
            "Minimum_Phase".parse::<PropertyKind>().unwrap(),
            PropertyKind::MinimumPhase
        );
        assert!("LIMIT CYCLE".parse::<PropertyKind>().is_err());
        assert_eq!(
            PropertyKind::from_letter("lc"),
            Some(PropertyKind::LimitCycle)
        );
        assert_eq!(
            PropertyKind::from_letter("m"),
            Some(PropertyKind::MinimumPhase)
        );
        assert_eq!(PropertyKind::from_letter("x"), None);
    }

    #[test]
    fn realization_parsing() {
        assert_eq!(
            "tdfii".parse::<RealizationKind>().unwrap(),
            RealizationKind::TDFII
        );
        assert!(RealizationKind::DDFII.is_delta());
        assert!(!RealizationKind::DFII.is_delta());
        assert!("DFIII".parse::<RealizationKind>().is_err());
    }

    #[test]
    fn system_invariants() {
        assert!(DigitalSystem::new(vec![1.0], vec![0.0, 1.0], None).is_err());
        assert!(DigitalSystem::new(vec![], vec![1.0], None).is_err());
        assert!(DigitalSystem::new(vec![1.0], vec![1.0], Some(0.0)).is_err());
        let s = DigitalSystem::new(vec![2.0, 1.0], vec![2.0, -1.0], Some(0.1)).unwrap();
        assert_eq!(s.normalized(), (vec![1.0, 0.5], vec![1.0, -0.5]));
    }

    #[test]
    fn transfer_function_text() {
        let s =
            DigitalSystem::new(vec![2002.0, -4000.0, 1998.0], vec![1.0, 0.0, -1.0], None).unwrap();
        assert_eq!(
            s.transfer_function_text(),
            "H(z) = (2002 - 4000 z^-1 + 1998 z^-2) / (1 - z^-2)"
        );
    }

    #[test]
    fn implementation_delta_rules() {
        let f = FixedPointFormat::new(4, 4).unwrap();
        assert!(ImplementationSpec::new(f, (-1.0, 1.0), None, RealizationKind::DDFI).is_err());
        assert!(ImplementationSpec::new(f, (-1.0, 1.0), Some(0.5), RealizationKind::DFI).is_err());
        assert!(ImplementationSpec::new(f, (1.0, -1.0), None, RealizationKind::DFI).is_err());
        assert!(
            ImplementationSpec::new(f, (-1.0, 1.0), Some(0.5), RealizationKind::TDDFII).is_ok()
        );
    }
}
