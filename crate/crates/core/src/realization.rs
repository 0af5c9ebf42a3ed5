//! Fixed-point replay of a transfer function under DFI, DFII or TDFII.
//!
//! Arithmetic policy: every coefficient product is rounded to the grid and
//! overflow-handled on its own (stage [`Stage::Product`]). Products and
//! delayed values are then summed exactly and the sum is rounded and
//! overflow-handled once at the stage boundary (a DFII/TDFII state update, or
//! the output). Every stage whose exact value leaves the representable range
//! is reported as an [`OverflowEvent`].

use std::fmt;

use thiserror::Error;

use crate::fixed_point::{
    fwl, fx_mul, quantize_flagged, scaled_to_f64, Accumulator, FixedPointError, FixedPointFormat,
    FxNum, FxOutcome, OverflowMode, RoundingMode,
};
use crate::system::{DigitalSystem, ImplementationSpec, RealizationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("realization {0} is not simulable in the time domain")]
    NotSimulable(RealizationKind),
    #[error("state dimension mismatch: at most {max} initial states accepted, got {got}")]
    StateDimensionMismatch { max: usize, got: usize },
    #[error("{inputs} inputs given for {steps} steps")]
    StepsMismatch { steps: usize, inputs: usize },
    #[error("at least one step is required")]
    NoSteps,
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
}

/// Coefficients after `a0` normalization and FWL quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSystem {
    pub numerator: Vec<FxNum>,
    pub denominator: Vec<FxNum>,
    pub format: FixedPointFormat,
    pub notes: Vec<String>,
}

impl QuantizedSystem {
    /// Denominator order N.
    pub fn den_order(&self) -> usize {
        self.denominator.len() - 1
    }

    /// Numerator order M.
    pub fn num_order(&self) -> usize {
        self.numerator.len() - 1
    }

    fn b(&self, k: usize) -> Option<FxNum> {
        self.numerator.get(k).copied().filter(|c| !c.is_zero())
    }

    fn a(&self, k: usize) -> Option<FxNum> {
        self.denominator.get(k).copied().filter(|c| !c.is_zero())
    }
}

/// Divides by `a0` when needed, then quantizes every coefficient (saturating).
pub fn prepare(
    system: &DigitalSystem,
    format: FixedPointFormat,
    rmode: RoundingMode,
) -> Result<QuantizedSystem, FixedPointError> {
    let mut notes = Vec::new();
    let (num, den) = if system.denominator()[0] != 1.0 {
        notes.push(format!(
            "coefficients divided by a0 = {} before quantization",
            system.denominator()[0]
        ));
        system.normalized()
    } else {
        (system.numerator().to_vec(), system.denominator().to_vec())
    };
    let numerator = fwl(&num, format, rmode)?;
    let denominator = fwl(&den, format, rmode)?;
    let saturated = num
        .iter()
        .zip(&numerator)
        .chain(den.iter().zip(&denominator))
        .filter(|(c, q)| (*c - q.to_f64()).abs() > format.quantum())
        .count();
    if saturated > 0 {
        notes.push(format!(
            "{saturated} coefficient(s) saturated to the range of {format}"
        ));
    }
    if denominator[0].to_f64() != 1.0 {
        notes.push(format!(
            "a0 quantizes to {}; outputs are divided by it",
            denominator[0]
        ));
    }
    Ok(QuantizedSystem {
        numerator,
        denominator,
        format,
        notes,
    })
}

/// Number of delay elements of a realization.
pub fn state_dimension(
    realization: RealizationKind,
    n: usize,
    m: usize,
) -> Result<usize, SimError> {
    match realization {
        RealizationKind::DFI => Ok(n + m),
        RealizationKind::DFII | RealizationKind::TDFII => Ok(n.max(m)),
        r => Err(SimError::NotSimulable(r)),
    }
}

/// How an `Initial_States` vector maps onto the delay elements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum StateLayout {
    /// The verifier's own buffers. DFI: past outputs oldest first, one more
    /// slot than the denominator order and right-aligned so the last entry is
    /// `y(-1)`; the first slot never feeds back. DFII: `w(-1), w(-2), ...`
    /// over `K + 1` slots, the last unused. TDFII: `s1, s2, ...` over `K + 1`
    /// slots, the last unused.
    #[default]
    Verifier,
    /// DFI: `y(-1), ..., y(-N)` then `x(-1), ..., x(-M)`. DFII: `w(-1), ...`.
    /// TDFII: `s1, ...`. At most the state dimension.
    OutputsThenInputs,
}

/// Contents of the DFI input delay line before the first step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum InputHistory {
    #[default]
    Zero,
    /// Past inputs equal the first input, as for a constant input that has
    /// been applied forever.
    HoldFirst,
}

/// One arithmetic stage inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Quantizing the input sample.
    Input,
    /// A single coefficient product.
    Product,
    /// Update of delay element `k` (DFII: `w(n)` is `State(0)`; TDFII: `s_k`).
    State(usize),
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Input => f.write_str("input"),
            Stage::Product => f.write_str("product"),
            Stage::State(k) => write!(f, "state[{k}]"),
            Stage::Output => f.write_str("output"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverflowEvent {
    pub step: usize,
    pub stage: Stage,
    /// Exact grid value before overflow handling.
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub system: DigitalSystem,
    pub implementation: ImplementationSpec,
    pub rmode: RoundingMode,
    pub omode: OverflowMode,
    pub steps: usize,
    pub layout: StateLayout,
    pub input_history: InputHistory,
}

impl SimulationConfig {
    pub fn new(
        system: DigitalSystem,
        implementation: ImplementationSpec,
        rmode: RoundingMode,
        omode: OverflowMode,
        steps: usize,
    ) -> Self {
        Self {
            system,
            implementation,
            rmode,
            omode,
            steps,
            layout: StateLayout::default(),
            input_history: InputHistory::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    /// Output of each step before overflow handling.
    pub outputs_raw: Vec<f64>,
    pub outputs_fx: Vec<FxNum>,
    pub overflow_events: Vec<OverflowEvent>,
    /// Steps whose output landed exactly on the range bounds.
    pub boundary_hits: Vec<usize>,
    pub states_final: Vec<f64>,
    pub notes: Vec<String>,
}

impl SimulationTrace {
    pub fn outputs(&self) -> Vec<f64> {
        self.outputs_fx.iter().map(FxNum::to_f64).collect()
    }

    /// Distinct steps with at least one overflow event, ascending.
    pub fn overflow_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = self.overflow_events.iter().map(|e| e.step).collect();
        steps.dedup();
        steps
    }
}

/// Runs the realization for `cfg.steps` steps.
pub fn simulate(
    cfg: &SimulationConfig,
    inputs: &[f64],
    initial_states: &[f64],
) -> Result<SimulationTrace, SimError> {
    if cfg.steps == 0 {
        return Err(SimError::NoSteps);
    }
    if inputs.len() != cfg.steps {
        return Err(SimError::StepsMismatch {
            steps: cfg.steps,
            inputs: inputs.len(),
        });
    }
    let realization = cfg.implementation.realization;
    let format = cfg.implementation.format;
    let q = prepare(&cfg.system, format, cfg.rmode)?;
    let engine = Engine::new(&q, realization, cfg.rmode, cfg.omode)?;
    let mut notes = q.notes.clone();

    let mut xs = Vec::with_capacity(inputs.len());
    let mut input_events = Vec::new();
    for (n, &x) in inputs.iter().enumerate() {
        let o = quantize_flagged(x, format, cfg.rmode, cfg.omode)?;
        if o.overflowed {
            input_events.push(OverflowEvent {
                step: n,
                stage: Stage::Input,
                raw: o.raw(),
            });
        }
        xs.push(o.value);
    }

    let mut state = engine.initial_state(
        initial_states,
        cfg.layout,
        cfg.input_history,
        xs[0],
        cfg.rmode,
        cfg.omode,
        &mut notes,
    )?;

    let mut trace = SimulationTrace {
        outputs_raw: Vec::with_capacity(cfg.steps),
        outputs_fx: Vec::with_capacity(cfg.steps),
        overflow_events: Vec::new(),
        boundary_hits: Vec::new(),
        states_final: Vec::new(),
        notes,
    };
    let (lo, hi) = (format.min_scaled(), format.max_scaled());
    for (n, &x) in xs.iter().enumerate() {
        trace
            .overflow_events
            .extend(input_events.iter().filter(|e| e.step == n));
        let y = engine.step(&mut state, x, &mut |stage, raw| {
            trace.overflow_events.push(OverflowEvent {
                step: n,
                stage,
                raw: scaled_to_f64(raw, format.frac_bits()),
            })
        });
        if y.raw_scaled() == lo || y.raw_scaled() == hi {
            trace.boundary_hits.push(n);
        }
        trace.outputs_raw.push(y.raw());
        trace.outputs_fx.push(y.value);
    }
    trace.states_final = state.iter().map(FxNum::to_f64).collect();
    Ok(trace)
}

/// One realization's per-step arithmetic over a flat state vector.
///
/// State layout: DFI holds `[y(n-1) .. y(n-N), x(n-1) .. x(n-M)]`, DFII holds
/// `[w(n-1) .. w(n-K)]` and TDFII holds `[s1 .. sK]`.
#[derive(Debug, Clone)]
pub(crate) struct Engine<'a> {
    q: &'a QuantizedSystem,
    realization: RealizationKind,
    rmode: RoundingMode,
    omode: OverflowMode,
    n: usize,
    m: usize,
    unit_a0: bool,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(
        q: &'a QuantizedSystem,
        realization: RealizationKind,
        rmode: RoundingMode,
        omode: OverflowMode,
    ) -> Result<Self, SimError> {
        let (n, m) = (q.den_order(), q.num_order());
        state_dimension(realization, n, m)?;
        let one = 1i64 << q.format.frac_bits();
        Ok(Self {
            q,
            realization,
            rmode,
            omode,
            n,
            m,
            unit_a0: q.denominator[0].scaled() == one,
        })
    }

    pub(crate) fn state_len(&self) -> usize {
        match self.realization {
            RealizationKind::DFI => self.n + self.m,
            _ => self.n.max(self.m),
        }
    }

    /// Leading state entries that evolve under zero input; the rest stay zero.
    pub(crate) fn autonomous_len(&self) -> usize {
        match self.realization {
            RealizationKind::DFI => self.n,
            _ => self.n.max(self.m),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_state(
        &self,
        values: &[f64],
        layout: StateLayout,
        history: InputHistory,
        first_input: FxNum,
        rmode: RoundingMode,
        omode: OverflowMode,
        notes: &mut Vec<String>,
    ) -> Result<Vec<FxNum>, SimError> {
        let fmt = self.q.format;
        let len = self.state_len();
        let max = match (layout, self.realization) {
            (StateLayout::Verifier, RealizationKind::DFI) => self.n + 1,
            (StateLayout::Verifier, _) => len + 1,
            (StateLayout::OutputsThenInputs, _) => len,
        };
        if values.len() > max {
            return Err(SimError::StateDimensionMismatch {
                max,
                got: values.len(),
            });
        }
        let mut quantized = Vec::with_capacity(values.len());
        for &v in values {
            let o = quantize_flagged(v, fmt, rmode, omode)?;
            if o.overflowed {
                notes.push(format!("initial state {v} lies outside the range of {fmt}"));
            }
            quantized.push(o.value);
        }

        let mut state = vec![FxNum::zero(fmt); len];
        match (layout, self.realization) {
            (StateLayout::Verifier, RealizationKind::DFI) => {
                // values[len-1-i] is y(-1-i).
                for i in 0..self.n.min(quantized.len()) {
                    state[i] = quantized[quantized.len() - 1 - i];
                }
                if quantized.len() == self.n + 1 && !quantized[0].is_zero() {
                    notes.push(format!(
                        "initial state {} falls outside the output delay line and is unused",
                        quantized[0]
                    ));
                }
            }
            (StateLayout::Verifier, _) => {
                for (slot, &v) in state.iter_mut().zip(&quantized) {
                    *slot = v;
                }
                if quantized.len() == len + 1 && !quantized[len].is_zero() {
                    notes.push(format!(
                        "initial state {} falls outside the delay line and is unused",
                        quantized[len]
                    ));
                }
            }
            (StateLayout::OutputsThenInputs, _) => {
                state[..quantized.len()].copy_from_slice(&quantized);
            }
        }
        if self.realization == RealizationKind::DFI && history == InputHistory::HoldFirst {
            let supplied = match layout {
                StateLayout::OutputsThenInputs => quantized.len().saturating_sub(self.n),
                StateLayout::Verifier => 0,
            };
            for slot in state[self.n + supplied..].iter_mut() {
                *slot = first_input;
            }
        }
        Ok(state)
    }

    fn product(&self, c: FxNum, v: FxNum, sink: &mut impl FnMut(Stage, i128)) -> FxNum {
        // Formats match by construction.
        let o = fx_mul(c, v, self.omode, self.rmode).expect("same format");
        if o.overflowed {
            sink(Stage::Product, o.raw_scaled());
        }
        o.value
    }

    fn finish(
        &self,
        acc: Accumulator,
        stage: Stage,
        sink: &mut impl FnMut(Stage, i128),
    ) -> FxOutcome {
        let o = if self.unit_a0 {
            acc.finish(self.omode)
        } else {
            acc.finish_div(self.q.denominator[0], self.omode, self.rmode)
                .expect("a0 is nonzero after quantization")
        };
        if o.overflowed {
            sink(stage, o.raw_scaled());
        }
        o
    }

    /// Advances `state` by one sample and returns the output.
    pub(crate) fn step(
        &self,
        state: &mut [FxNum],
        x: FxNum,
        sink: &mut impl FnMut(Stage, i128),
    ) -> FxOutcome {
        let fmt = self.q.format;
        let (n, m) = (self.n, self.m);
        match self.realization {
            RealizationKind::DFI => {
                let mut acc = Accumulator::new(fmt);
                if let Some(b0) = self.q.b(0) {
                    acc.add(self.product(b0, x, sink));
                }
                for k in 1..=m {
                    if let Some(bk) = self.q.b(k) {
                        acc.add(self.product(bk, state[n + k - 1], sink));
                    }
                }
                for k in 1..=n {
                    if let Some(ak) = self.q.a(k) {
                        acc.sub(self.product(ak, state[k - 1], sink));
                    }
                }
                let y = self.finish(acc, Stage::Output, sink);
                if n > 0 {
                    state.copy_within(0..n - 1, 1);
                    state[0] = y.value;
                }
                if m > 0 {
                    state.copy_within(n..n + m - 1, n + 1);
                    state[n] = x;
                }
                y
            }
            RealizationKind::DFII => {
                let k_len = n.max(m);
                let mut acc = Accumulator::new(fmt);
                acc.add(x);
                for k in 1..=n {
                    if let Some(ak) = self.q.a(k) {
                        acc.sub(self.product(ak, state[k - 1], sink));
                    }
                }
                let w0 = self.finish(acc, Stage::State(0), sink).value;
                let mut acc = Accumulator::new(fmt);
                if let Some(b0) = self.q.b(0) {
                    acc.add(self.product(b0, w0, sink));
                }
                for k in 1..=m {
                    if let Some(bk) = self.q.b(k) {
                        acc.add(self.product(bk, state[k - 1], sink));
                    }
                }
                let o = acc.finish(self.omode);
                if o.overflowed {
                    sink(Stage::Output, o.raw_scaled());
                }
                if k_len > 0 {
                    state.copy_within(0..k_len - 1, 1);
                    state[0] = w0;
                }
                o
            }
            RealizationKind::TDFII => {
                let k_len = n.max(m);
                let mut acc = Accumulator::new(fmt);
                if let Some(b0) = self.q.b(0) {
                    acc.add(self.product(b0, x, sink));
                }
                if k_len > 0 {
                    acc.add(state[0]);
                }
                let y = self.finish(acc, Stage::Output, sink);
                for k in 1..=k_len {
                    let mut acc = Accumulator::new(fmt);
                    if k < k_len {
                        acc.add(state[k]);
                    }
                    if let Some(bk) = self.q.b(k) {
                        acc.add(self.product(bk, x, sink));
                    }
                    if let Some(ak) = self.q.a(k) {
                        acc.sub(self.product(ak, y.value, sink));
                    }
                    let o = acc.finish(self.omode);
                    if o.overflowed {
                        sink(Stage::State(k), o.raw_scaled());
                    }
                    state[k - 1] = o.value;
                }
                y
            }
            _ => unreachable!("checked in Engine::new"),
        }
    }
}
