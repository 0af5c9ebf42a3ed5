//! Reproducibility checks for the four verifier properties, plus an
//! exhaustive zero-input search for limit cycles.

use std::collections::{HashMap, HashSet};

use num_complex::Complex64;
use thiserror::Error;

use crate::counterexample::Counterexample;
use crate::fixed_point::{
    fwl_values, FixedPointError, FixedPointFormat, FxNum, OverflowMode, RoundingMode,
};
use crate::polynomial::{delta_roots_to_z, delta_transform, roots_of, PolyError, Polynomial};
use crate::realization::{
    prepare, simulate, Engine, InputHistory, OverflowEvent, SimError, SimulationConfig,
    SimulationTrace, Stage, StateLayout,
};
use crate::system::{DigitalSystem, PropertyKind, RealizationKind};

/// Distance from the unit circle below which a root counts as on it.
pub const MARGINAL_TOLERANCE: f64 = 1e-8;
/// Default cap on the number of enumerated states in [`bauer_lco_free`].
pub const DEFAULT_STATE_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidatorError {
    #[error("LCO requires constant input")]
    NonConstantInput,
    #[error("expected a {expected} counterexample, got {got}")]
    WrongProperty {
        expected: PropertyKind,
        got: PropertyKind,
    },
    #[error("realization {0} needs a delta value")]
    MissingDelta(RealizationKind),
    #[error("every coefficient quantizes to zero under {0}")]
    QuantizedToZero(FixedPointFormat),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Polynomial(#[from] PolyError),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcoKind {
    /// Sustained by rounding alone.
    Granular,
    /// Sustained with overflow inside the final window.
    Overflow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evidence {
    Roots {
        /// Coefficients actually analysed (after FWL, in the z or delta domain).
        quantized: Vec<f64>,
        roots: Vec<Complex64>,
        max_modulus: f64,
    },
    Overflow {
        events: Vec<OverflowEvent>,
        trace: SimulationTrace,
    },
    Lco {
        period: Option<usize>,
        amplitude: Option<f64>,
        /// Final `2p` outputs backing the detected period.
        window: Vec<f64>,
        kind: Option<LcoKind>,
        trace: SimulationTrace,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyVerdict {
    pub property: PropertyKind,
    pub violated: bool,
    /// A root lies within [`MARGINAL_TOLERANCE`] of the unit circle.
    pub marginal: bool,
    pub evidence: Evidence,
    pub notes: Vec<String>,
}

/// Quantized coefficients and z-plane roots of `A(z)` or `B(z)`.
///
/// The polynomial is divided by `a0` before quantization. For delta
/// realizations it is first rewritten in the delta operator, and the roots
/// of the quantized delta polynomial are mapped back with `z = 1 + delta q`.
pub fn fwl_roots(
    coeffs: &[f64],
    a0: f64,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    realization: RealizationKind,
    delta: Option<f64>,
) -> Result<(Vec<f64>, Vec<Complex64>, f64), ValidatorError> {
    let normalized: Vec<f64> = coeffs.iter().map(|c| c / a0).collect();
    let (poly_coeffs, delta) = if realization.is_delta() {
        let d = delta.ok_or(ValidatorError::MissingDelta(realization))?;
        let p = Polynomial::new(&normalized)?;
        (delta_transform(&p, d)?.coeffs().to_vec(), Some(d))
    } else {
        (normalized, None)
    };
    let quantized = fwl_values(&poly_coeffs, fmt, rmode)?;
    let p = Polynomial::new(&quantized).map_err(|e| match e {
        PolyError::ZeroPolynomial => ValidatorError::QuantizedToZero(fmt),
        e => e.into(),
    })?;
    let mut roots = roots_of(&p)?;
    if let Some(d) = delta {
        roots = delta_roots_to_z(&roots, d);
    }
    Ok((quantized, roots.roots, roots.max_modulus))
}

fn root_verdict(
    property: PropertyKind,
    coeffs: &[f64],
    system: &DigitalSystem,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    realization: RealizationKind,
    delta: Option<f64>,
) -> Result<PropertyVerdict, ValidatorError> {
    let a0 = system.denominator()[0];
    let (quantized, roots, max_modulus) = fwl_roots(coeffs, a0, fmt, rmode, realization, delta)?;
    let marginal = (max_modulus - 1.0).abs() <= MARGINAL_TOLERANCE;
    let mut notes = Vec::new();
    if marginal {
        notes.push(format!(
            "largest root modulus {max_modulus} is on the unit circle within {MARGINAL_TOLERANCE}"
        ));
    }
    if quantized.first() == Some(&0.0) {
        notes.push("leading coefficient quantizes to zero; polynomial order drops".into());
    }
    Ok(PropertyVerdict {
        property,
        violated: max_modulus >= 1.0 || marginal,
        marginal,
        evidence: Evidence::Roots {
            quantized,
            roots,
            max_modulus,
        },
        notes,
    })
}

/// Violated when some root of the quantized denominator has modulus ≥ 1.
pub fn check_stability(
    system: &DigitalSystem,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    realization: RealizationKind,
    delta: Option<f64>,
) -> Result<PropertyVerdict, ValidatorError> {
    root_verdict(
        PropertyKind::Stability,
        system.denominator(),
        system,
        fmt,
        rmode,
        realization,
        delta,
    )
}

/// Violated when some root of the quantized numerator has modulus ≥ 1.
pub fn check_minimum_phase(
    system: &DigitalSystem,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    realization: RealizationKind,
    delta: Option<f64>,
) -> Result<PropertyVerdict, ValidatorError> {
    root_verdict(
        PropertyKind::MinimumPhase,
        system.numerator(),
        system,
        fmt,
        rmode,
        realization,
        delta,
    )
}

fn expect_property(ce: &Counterexample, expected: PropertyKind) -> Result<(), ValidatorError> {
    if ce.property != expected {
        return Err(ValidatorError::WrongProperty {
            expected,
            got: ce.property,
        });
    }
    Ok(())
}

/// The counterexample's system with the coefficients the verifier used.
pub fn effective_system(ce: &Counterexample, rmode: RoundingMode) -> (DigitalSystem, Vec<String>) {
    let eff = ce.effective_coefficients(rmode);
    let system = DigitalSystem::new(eff.numerator, eff.denominator, ce.system.sample_time())
        .unwrap_or_else(|_| ce.system.clone());
    (system, eff.notes)
}

fn replay(
    ce: &Counterexample,
    rmode: RoundingMode,
    omode: OverflowMode,
    history: InputHistory,
) -> Result<(SimulationTrace, Vec<String>), ValidatorError> {
    let (system, mut notes) = effective_system(ce, rmode);
    let mut cfg = SimulationConfig::new(
        system,
        ce.implementation.clone(),
        rmode,
        omode,
        ce.inputs.len(),
    );
    cfg.layout = StateLayout::Verifier;
    cfg.input_history = history;
    let trace = simulate(&cfg, &ce.inputs, &ce.initial_states)?;
    notes.extend(trace.notes.iter().cloned());
    Ok((trace, notes))
}

/// Replays the inputs and reports every stage whose value leaves the range.
///
/// An output landing exactly on a range bound also counts, since the
/// no-overflow condition uses strict inequalities.
pub fn check_overflow(
    ce: &Counterexample,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> Result<PropertyVerdict, ValidatorError> {
    expect_property(ce, PropertyKind::Overflow)?;
    let (trace, mut notes) = replay(ce, rmode, omode, InputHistory::Zero)?;
    for &n in &trace.boundary_hits {
        notes.push(format!(
            "output at step {n} equals the range bound {}; counted as overflow",
            trace.outputs_raw[n]
        ));
    }
    let events = overflow_events_of(&trace);
    Ok(PropertyVerdict {
        property: PropertyKind::Overflow,
        violated: !events.is_empty(),
        marginal: false,
        evidence: Evidence::Overflow { events, trace },
        notes,
    })
}

/// Overflow events of a trace plus its boundary hits, ordered by step.
pub fn overflow_events_of(trace: &SimulationTrace) -> Vec<OverflowEvent> {
    let mut events = trace.overflow_events.clone();
    events.extend(trace.boundary_hits.iter().map(|&n| OverflowEvent {
        step: n,
        stage: Stage::Output,
        raw: trace.outputs_raw[n],
    }));
    events.sort_by_key(|e| e.step);
    events
}

/// Smallest period `p` such that the last `2p` samples repeat with period
/// `p`, together with the peak-to-peak amplitude over one period.
pub fn extract_oscillation(outputs: &[f64]) -> Option<(usize, f64)> {
    let len = outputs.len();
    (1..=len / 2).find_map(|p| {
        let periodic = (len - 2 * p..len - p).all(|k| outputs[k] == outputs[k + p]);
        periodic.then(|| {
            let tail = &outputs[len - p..];
            let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
            (p, max - min)
        })
    })
}

/// Replays a constant-input counterexample and looks for a sustained
/// oscillation in the output.
///
/// A period of two or more is a limit cycle. A period-one output is one only
/// when it sits at a nonzero value more than one quantum away from the
/// linear steady state `u * sum(b) / sum(a)`.
pub fn check_limit_cycle(
    ce: &Counterexample,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> Result<PropertyVerdict, ValidatorError> {
    expect_property(ce, PropertyKind::LimitCycle)?;
    if ce.inputs.windows(2).any(|w| w[0] != w[1]) {
        return Err(ValidatorError::NonConstantInput);
    }
    let (trace, mut notes) = replay(ce, rmode, omode, InputHistory::HoldFirst)?;
    let outputs = trace.outputs();
    let osc = extract_oscillation(&outputs);
    let quantum = ce.implementation.format.quantum();

    let violated = match osc {
        None => {
            notes.push("no periodic tail found in the replayed outputs".into());
            false
        }
        Some((p, amplitude)) if p >= 2 => amplitude > 0.0,
        Some((_, _)) => {
            let locked = *outputs.last().expect("non-empty");
            let (system, _) = effective_system(ce, rmode);
            let q = prepare(&system, ce.implementation.format, rmode)?;
            let sum = |v: &[FxNum]| v.iter().map(FxNum::to_f64).sum::<f64>();
            let (sb, sa) = (sum(&q.numerator), sum(&q.denominator));
            if locked == 0.0 {
                false
            } else if sa == 0.0 {
                notes.push("denominator has a pole at z = 1; no finite steady state".into());
                false
            } else {
                let u = ce.inputs.first().copied().unwrap_or(0.0);
                let steady = u * sb / sa;
                let off = (locked - steady).abs() > quantum;
                if off {
                    notes.push(format!(
                        "output locked at {locked}, linear steady state is {steady}"
                    ));
                }
                off
            }
        }
    };

    let (period, amplitude, window, kind) = match osc {
        Some((p, amp)) => {
            let start = outputs.len() - 2 * p;
            let overflow_in_window = trace.overflow_events.iter().any(|e| e.step >= start);
            let kind = violated.then_some(if overflow_in_window {
                LcoKind::Overflow
            } else {
                LcoKind::Granular
            });
            (Some(p), Some(amp), outputs[start..].to_vec(), kind)
        }
        None => (None, None, Vec::new(), None),
    };
    Ok(PropertyVerdict {
        property: PropertyKind::LimitCycle,
        violated,
        marginal: false,
        evidence: Evidence::Lco {
            period,
            amplitude,
            window,
            kind,
            trace,
        },
        notes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcoWitness {
    /// Starting state of the first trajectory that cycles.
    pub start: Vec<f64>,
    /// States on the cycle, in visiting order.
    pub cycle: Vec<Vec<f64>>,
    /// Outputs produced around the cycle.
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BauerResult {
    LcoFree,
    LcoPossible(LcoWitness),
    Undecided(String),
}

/// Exhaustive zero-input search over the whole format range.
pub fn bauer_lco_free(
    system: &DigitalSystem,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    omode: OverflowMode,
    realization: RealizationKind,
    state_cap: u64,
) -> BauerResult {
    bauer_lco_free_in_range(system, fmt, rmode, omode, realization, state_cap, None)
}

/// Like [`bauer_lco_free`], with starting states restricted to `range`
/// (intersected with the format range) in every coordinate.
///
/// Each autonomous state is run with zero input until it reaches the zero
/// state or revisits a state. Outcomes are memoized across starts, and
/// starts are visited in lexicographic order of their scaled integers, so
/// the reported witness is always the lowest cycling start.
pub fn bauer_lco_free_in_range(
    system: &DigitalSystem,
    fmt: FixedPointFormat,
    rmode: RoundingMode,
    omode: OverflowMode,
    realization: RealizationKind,
    state_cap: u64,
    range: Option<(f64, f64)>,
) -> BauerResult {
    if realization.is_delta() {
        return BauerResult::Undecided(format!("realization {realization} is not simulable"));
    }
    match check_stability(system, fmt, rmode, realization, None) {
        Ok(v) if !v.violated => {}
        Ok(_) => return BauerResult::Undecided("not linearly stable".into()),
        Err(e) => return BauerResult::Undecided(format!("stability check failed: {e}")),
    }
    let q = match prepare(system, fmt, rmode) {
        Ok(q) => q,
        Err(e) => return BauerResult::Undecided(e.to_string()),
    };
    let engine = match Engine::new(&q, realization, rmode, omode) {
        Ok(e) => e,
        Err(e) => return BauerResult::Undecided(e.to_string()),
    };
    let dim = engine.autonomous_len();
    let state_len = engine.state_len();
    if dim == 0 {
        return BauerResult::LcoFree;
    }

    let (mut lo, mut hi) = (fmt.min_scaled(), fmt.max_scaled());
    if let Some((rmin, rmax)) = range {
        let scale = (fmt.frac_bits() as f64).exp2();
        lo = lo.max((rmin * scale).ceil() as i128);
        hi = hi.min((rmax * scale).floor() as i128);
    }
    if lo > hi {
        return BauerResult::LcoFree;
    }
    let per_dim = (hi - lo + 1) as u128;
    let total = (0..dim).try_fold(1u128, |acc, _| acc.checked_mul(per_dim));
    match total {
        Some(t) if t <= state_cap as u128 => {}
        _ => return BauerResult::Undecided("state space too large".into()),
    }
    let total = total.expect("checked above") as u64;
    // Each state is expanded at most once, so this bounds the whole search.
    let step_limit = total.saturating_mul(4).saturating_add(1 << 16);

    let zero_input = FxNum::zero(fmt);
    // States already known to decay to zero. The search stops at the first
    // cycle, so nothing else needs remembering.
    let mut dies: HashSet<Vec<i64>> = HashSet::new();
    let mut expanded: u64 = 0;
    let to_fx = |s: &[i64]| -> Vec<FxNum> {
        s.iter()
            .map(|&v| FxNum::from_scaled(v, fmt).expect("state stays in range"))
            .collect()
    };
    let to_real =
        |s: &[i64]| -> Vec<f64> { s[..dim].iter().map(|&v| to_fx(&[v])[0].to_f64()).collect() };

    let mut digits = vec![0u128; dim];
    for _ in 0..total {
        let start: Vec<i64> = (0..state_len)
            .map(|i| {
                if i < dim {
                    (lo + digits[i] as i128) as i64
                } else {
                    0
                }
            })
            .collect();
        // Advance the odometer, last coordinate fastest.
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < per_dim {
                break;
            }
            *d = 0;
        }

        let mut path: Vec<Vec<i64>> = Vec::new();
        let mut on_path: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut current = start.clone();
        loop {
            if current.iter().all(|&v| v == 0) || dies.contains(&current) {
                break;
            }
            if let Some(&pos) = on_path.get(&current) {
                let cycle = &path[pos..];
                let mut outputs = Vec::with_capacity(cycle.len());
                for s in cycle {
                    let mut fx = to_fx(s);
                    outputs.push(
                        engine
                            .step(&mut fx, zero_input, &mut |_, _| {})
                            .value
                            .to_f64(),
                    );
                }
                return BauerResult::LcoPossible(LcoWitness {
                    start: to_real(&start),
                    cycle: cycle.iter().map(|s| to_real(s)).collect(),
                    outputs,
                });
            }
            expanded += 1;
            if expanded > step_limit {
                return BauerResult::Undecided("step limit exceeded".into());
            }
            on_path.insert(current.clone(), path.len());
            path.push(current.clone());
            let mut fx = to_fx(&current);
            engine.step(&mut fx, zero_input, &mut |_, _| {});
            current = fx.iter().map(FxNum::scaled).collect();
        }
        dies.extend(path);
    }
    BauerResult::LcoFree
}
