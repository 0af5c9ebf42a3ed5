//! Finite word-length arithmetic on a signed `<n,l>` grid.
//!
//! A value in format `<n,l>` is stored as a scaled integer `s` with real
//! value `s * 2^-l`. The sign bit is counted inside `n`, so the total word
//! length is `n + l` bits and the representable range is
//! `[-2^(n-1), 2^(n-1) - 2^-l]`.
//!
//! Every operation is carried out exactly on scaled integers (`i128` holds any
//! product of two 64-bit words) and rounded once to the target grid before the
//! overflow mode is applied.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported total word length `n + l`.
pub const MAX_WORD_LENGTH: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixedPointError {
    #[error("invalid fixed-point format <{int_bits},{frac_bits}>: {reason}")]
    InvalidFormat {
        int_bits: u32,
        frac_bits: u32,
        reason: &'static str,
    },
    #[error("non-finite value")]
    NonFinite,
    #[error("empty polynomial")]
    EmptyPolynomial,
    #[error("division by zero")]
    DivisionByZero,
    #[error("format mismatch: {left} vs {right}")]
    FormatMismatch {
        left: FixedPointFormat,
        right: FixedPointFormat,
    },
}

/// Integer/fraction bit split `<n,l>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFormat", into = "RawFormat")]
pub struct FixedPointFormat {
    int_bits: u32,
    frac_bits: u32,
}

#[derive(Serialize, Deserialize)]
struct RawFormat {
    int_bits: u32,
    frac_bits: u32,
}

impl TryFrom<RawFormat> for FixedPointFormat {
    type Error = FixedPointError;

    fn try_from(raw: RawFormat) -> Result<Self, Self::Error> {
        FixedPointFormat::new(raw.int_bits, raw.frac_bits)
    }
}

impl From<FixedPointFormat> for RawFormat {
    fn from(fmt: FixedPointFormat) -> Self {
        RawFormat {
            int_bits: fmt.int_bits,
            frac_bits: fmt.frac_bits,
        }
    }
}

impl FixedPointFormat {
    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self, FixedPointError> {
        let invalid = |reason| FixedPointError::InvalidFormat {
            int_bits,
            frac_bits,
            reason,
        };
        if int_bits == 0 {
            return Err(invalid("integer bits must include the sign bit"));
        }
        if int_bits
            .checked_add(frac_bits)
            .is_none_or(|n| n > MAX_WORD_LENGTH)
        {
            return Err(invalid("word length exceeds 64 bits"));
        }
        Ok(Self {
            int_bits,
            frac_bits,
        })
    }

    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn word_length(&self) -> u32 {
        self.int_bits + self.frac_bits
    }

    /// Grid spacing `2^-l`.
    pub fn quantum(&self) -> f64 {
        pow2(-(self.frac_bits as i32))
    }

    /// `2^(n-1) - 2^-l`
    pub fn max_value(&self) -> f64 {
        scaled_to_f64(self.max_scaled(), self.frac_bits)
    }

    /// `-2^(n-1)`
    pub fn min_value(&self) -> f64 {
        scaled_to_f64(self.min_scaled(), self.frac_bits)
    }

    pub(crate) fn max_scaled(&self) -> i128 {
        (1i128 << (self.word_length() - 1)) - 1
    }

    pub(crate) fn min_scaled(&self) -> i128 {
        -(1i128 << (self.word_length() - 1))
    }

    /// Whether a real value lies in the closed representable range.
    pub fn contains(&self, x: f64) -> bool {
        x >= self.min_value() && x <= self.max_value()
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.int_bits, self.frac_bits)
    }
}

/// Representable range `(min, max)` of a format.
pub fn range_of(fmt: FixedPointFormat) -> (f64, f64) {
    (fmt.min_value(), fmt.max_value())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundingMode {
    /// Round half away from zero on the scaled integer.
    #[default]
    Round,
    /// Truncate toward negative infinity on the scaled integer.
    Floor,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverflowMode {
    /// Two's-complement modular wrap on `n + l` bits.
    #[default]
    #[serde(rename = "wrap")]
    WrapAround,
    /// Clamp to `[min_value, max_value]`.
    Saturate,
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoundingMode::Round => "round",
            RoundingMode::Floor => "floor",
        })
    }
}

impl fmt::Display for OverflowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverflowMode::WrapAround => "wrap",
            OverflowMode::Saturate => "saturate",
        })
    }
}

/// A quantized real: `scaled * 2^-l`, always inside the format's range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FxNum {
    scaled: i64,
    format: FixedPointFormat,
}

impl FxNum {
    pub fn zero(format: FixedPointFormat) -> Self {
        Self { scaled: 0, format }
    }

    /// Builds a value from its scaled integer; `None` if out of range.
    pub fn from_scaled(scaled: i64, format: FixedPointFormat) -> Option<Self> {
        let s = scaled as i128;
        (s >= format.min_scaled() && s <= format.max_scaled()).then_some(Self { scaled, format })
    }

    pub fn scaled(&self) -> i64 {
        self.scaled
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    /// Real value. Exact whenever the word length is at most 53 bits.
    pub fn to_f64(&self) -> f64 {
        scaled_to_f64(self.scaled as i128, self.format.frac_bits)
    }

    pub fn is_zero(&self) -> bool {
        self.scaled == 0
    }
}

impl fmt::Display for FxNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

/// Result of an operation together with its pre-handling value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FxOutcome {
    pub value: FxNum,
    /// The exact result on the grid exceeded the representable range.
    pub overflowed: bool,
    raw_scaled: i128,
}

impl FxOutcome {
    /// Grid value before overflow handling (may lie outside the range).
    pub fn raw(&self) -> f64 {
        scaled_to_f64(self.raw_scaled, self.value.format.frac_bits)
    }

    pub fn raw_scaled(&self) -> i128 {
        self.raw_scaled
    }
}

/// Quantizes a real onto the grid, then applies the overflow mode.
pub fn quantize(
    x: f64,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> Result<FxNum, FixedPointError> {
    quantize_flagged(x, fmt, rmode, omode).map(|o| o.value)
}

/// Like [`quantize`], also reporting whether overflow handling kicked in.
pub fn quantize_flagged(
    x: f64,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> Result<FxOutcome, FixedPointError> {
    if !x.is_finite() {
        return Err(FixedPointError::NonFinite);
    }
    Ok(match scale_exact(x, fmt.frac_bits, rmode) {
        Scaled::Finite(raw) => handle_overflow(raw, fmt, omode),
        Scaled::Huge { negative } => {
            // |x * 2^l| >= 2^64 is a multiple of 2^N; the raw value is pinned
            // far outside any range since it does not fit the accumulator.
            let raw = if negative {
                -(1i128 << 120)
            } else {
                1i128 << 120
            };
            let mut out = handle_overflow(raw, fmt, omode);
            if omode == OverflowMode::WrapAround {
                out.value.scaled = 0;
            }
            out
        }
    })
}

/// Element-wise coefficient quantization. Coefficients always saturate.
pub fn fwl(
    poly: &[f64],
    fmt: FixedPointFormat,
    rmode: RoundingMode,
) -> Result<Vec<FxNum>, FixedPointError> {
    if poly.is_empty() {
        return Err(FixedPointError::EmptyPolynomial);
    }
    poly.iter()
        .map(|&c| quantize(c, fmt, rmode, OverflowMode::Saturate))
        .collect()
}

/// Convenience: [`fwl`] mapped back to reals.
pub fn fwl_values(
    poly: &[f64],
    fmt: FixedPointFormat,
    rmode: RoundingMode,
) -> Result<Vec<f64>, FixedPointError> {
    Ok(fwl(poly, fmt, rmode)?.iter().map(FxNum::to_f64).collect())
}

fn same_format(a: &FxNum, b: &FxNum) -> Result<FixedPointFormat, FixedPointError> {
    if a.format != b.format {
        return Err(FixedPointError::FormatMismatch {
            left: a.format,
            right: b.format,
        });
    }
    Ok(a.format)
}

pub fn fx_add(
    a: FxNum,
    b: FxNum,
    omode: OverflowMode,
    _rmode: RoundingMode,
) -> Result<FxOutcome, FixedPointError> {
    let fmt = same_format(&a, &b)?;
    Ok(handle_overflow(
        a.scaled as i128 + b.scaled as i128,
        fmt,
        omode,
    ))
}

pub fn fx_sub(
    a: FxNum,
    b: FxNum,
    omode: OverflowMode,
    _rmode: RoundingMode,
) -> Result<FxOutcome, FixedPointError> {
    let fmt = same_format(&a, &b)?;
    Ok(handle_overflow(
        a.scaled as i128 - b.scaled as i128,
        fmt,
        omode,
    ))
}

pub fn fx_mul(
    a: FxNum,
    b: FxNum,
    omode: OverflowMode,
    rmode: RoundingMode,
) -> Result<FxOutcome, FixedPointError> {
    let fmt = same_format(&a, &b)?;
    let product = a.scaled as i128 * b.scaled as i128;
    Ok(handle_overflow(
        shift_round(product, fmt.frac_bits, rmode),
        fmt,
        omode,
    ))
}

pub fn fx_div(
    a: FxNum,
    b: FxNum,
    omode: OverflowMode,
    rmode: RoundingMode,
) -> Result<FxOutcome, FixedPointError> {
    let fmt = same_format(&a, &b)?;
    if b.scaled == 0 {
        return Err(FixedPointError::DivisionByZero);
    }
    let num = (a.scaled as i128) << fmt.frac_bits;
    Ok(handle_overflow(
        div_round(num, b.scaled as i128, rmode),
        fmt,
        omode,
    ))
}

/// Exact running sum of grid values, overflow-handled once at the end.
#[derive(Debug, Clone, Copy)]
pub struct Accumulator {
    format: FixedPointFormat,
    sum: i128,
}

impl Accumulator {
    pub fn new(format: FixedPointFormat) -> Self {
        Self { format, sum: 0 }
    }

    pub fn add(&mut self, v: FxNum) {
        debug_assert_eq!(v.format, self.format);
        self.sum += v.scaled as i128;
    }

    pub fn sub(&mut self, v: FxNum) {
        debug_assert_eq!(v.format, self.format);
        self.sum -= v.scaled as i128;
    }

    pub fn raw(&self) -> f64 {
        scaled_to_f64(self.sum, self.format.frac_bits)
    }

    pub fn raw_scaled(&self) -> i128 {
        self.sum
    }

    pub fn finish(self, omode: OverflowMode) -> FxOutcome {
        handle_overflow(self.sum, self.format, omode)
    }

    /// Divides the exact sum by `divisor`, rounding once, then handles overflow.
    pub fn finish_div(
        self,
        divisor: FxNum,
        omode: OverflowMode,
        rmode: RoundingMode,
    ) -> Result<FxOutcome, FixedPointError> {
        if divisor.scaled == 0 {
            return Err(FixedPointError::DivisionByZero);
        }
        let num = self.sum << self.format.frac_bits;
        Ok(handle_overflow(
            div_round(num, divisor.scaled as i128, rmode),
            self.format,
            omode,
        ))
    }
}

/// Applies the overflow mode to an exact scaled integer.
pub(crate) fn handle_overflow(raw: i128, fmt: FixedPointFormat, omode: OverflowMode) -> FxOutcome {
    let (lo, hi) = (fmt.min_scaled(), fmt.max_scaled());
    let overflowed = raw < lo || raw > hi;
    let scaled = if !overflowed {
        raw
    } else {
        match omode {
            OverflowMode::Saturate => raw.clamp(lo, hi),
            OverflowMode::WrapAround => {
                let modulus = 1i128 << fmt.word_length();
                (raw - lo).rem_euclid(modulus) + lo
            }
        }
    };
    FxOutcome {
        value: FxNum {
            scaled: scaled as i64,
            format: fmt,
        },
        overflowed,
        raw_scaled: raw,
    }
}

enum Scaled {
    Finite(i128),
    Huge { negative: bool },
}

/// `rmode(x * 2^l)` computed exactly from the binary expansion of `x`.
fn scale_exact(x: f64, frac_bits: u32, rmode: RoundingMode) -> Scaled {
    let (mantissa, exp) = decompose(x);
    if mantissa == 0 {
        return Scaled::Finite(0);
    }
    let shift = exp + frac_bits as i32;
    if shift >= 64 {
        return Scaled::Huge {
            negative: mantissa < 0,
        };
    }
    if shift >= 0 {
        return Scaled::Finite((mantissa as i128) << shift);
    }
    let k = (-shift) as u32;
    if k >= 100 {
        // |mantissa| < 2^53, far below half a unit.
        return Scaled::Finite(match rmode {
            RoundingMode::Floor if mantissa < 0 => -1,
            _ => 0,
        });
    }
    Scaled::Finite(shift_round(mantissa as i128, k, rmode))
}

/// `x = mantissa * 2^exp` exactly.
fn decompose(x: f64) -> (i64, i32) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    if exp_bits == 0 {
        (sign * frac, -1074)
    } else {
        (sign * (frac | (1i64 << 52)), exp_bits - 1075)
    }
}

/// `rmode(v / 2^k)`.
fn shift_round(v: i128, k: u32, rmode: RoundingMode) -> i128 {
    if k == 0 {
        return v;
    }
    match rmode {
        RoundingMode::Floor => v >> k,
        RoundingMode::Round => {
            let half = 1i128 << (k - 1);
            if v >= 0 {
                (v + half) >> k
            } else {
                -((-v + half) >> k)
            }
        }
    }
}

/// `rmode(num / den)` for `den != 0`.
fn div_round(num: i128, den: i128, rmode: RoundingMode) -> i128 {
    let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
    match rmode {
        RoundingMode::Floor => num.div_euclid(den),
        RoundingMode::Round => {
            let (q, r) = (num.abs() / den, num.abs() % den);
            let q = if 2 * r >= den { q + 1 } else { q };
            if num < 0 {
                -q
            } else {
                q
            }
        }
    }
}

pub(crate) fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((1023 + e) as u64) << 52)
}

pub(crate) fn scaled_to_f64(s: i128, frac_bits: u32) -> f64 {
    s as f64 * pow2(-(frac_bits as i32))
}
