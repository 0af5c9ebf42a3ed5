//! Shared test helpers: an exact rational fixed-point oracle, random system
//! generators, and counterexample synthesis from the simulator.

#![allow(dead_code)]

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use cxval::counterexample::Counterexample;
use cxval::fixed_point::{
    fwl, fwl_values, fx_mul, Accumulator, FixedPointFormat, FxNum, OverflowMode, RoundingMode,
};
use cxval::realization::{simulate, InputHistory, SimulationConfig, StateLayout};
use cxval::system::{DigitalSystem, ImplementationSpec, PropertyKind, RealizationKind};
use cxval::validators::{check_limit_cycle, check_minimum_phase, check_stability};

pub const LCO_FIXTURE: &str = include_str!("../fixtures/limit_cycle/second_order_DFI.out");
pub const OVERFLOW_FIXTURE: &str = include_str!("../fixtures/overflow/ds1_impl1_DFI.out");

pub fn fixture_dir(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

// ---------------------------------------------------------------------------
// Exact oracle

/// Scaled-integer result: `(value, overflowed, raw)`.
pub type OracleOut = (i128, bool, BigInt);

fn pow2(e: u32) -> BigInt {
    BigInt::one() << e as usize
}

pub fn round_rational(x: &BigRational, rmode: RoundingMode) -> BigInt {
    match rmode {
        RoundingMode::Floor => x.floor().to_integer(),
        RoundingMode::Round => {
            // Half away from zero.
            let half = BigRational::new(BigInt::one(), BigInt::from(2));
            if x.is_negative() {
                -((-x) + half).floor().to_integer()
            } else {
                (x + half).floor().to_integer()
            }
        }
    }
}

pub fn handle(raw: BigInt, fmt: FixedPointFormat, omode: OverflowMode) -> OracleOut {
    let n = fmt.word_length();
    let lo = -pow2(n - 1);
    let hi = pow2(n - 1) - 1;
    let over = raw < lo || raw > hi;
    let v = if !over {
        raw.clone()
    } else {
        match omode {
            OverflowMode::Saturate => {
                if raw < lo {
                    lo.clone()
                } else {
                    hi.clone()
                }
            }
            OverflowMode::WrapAround => {
                let m = pow2(n);
                let mut r = (&raw - &lo) % &m;
                if r.is_negative() {
                    r += &m;
                }
                r + lo
            }
        }
    };
    (v.to_i128().unwrap(), over, raw)
}

pub fn oracle_quantize(
    x: f64,
    fmt: FixedPointFormat,
    r: RoundingMode,
    o: OverflowMode,
) -> OracleOut {
    let exact =
        BigRational::from_float(x).unwrap() * BigRational::from_integer(pow2(fmt.frac_bits()));
    handle(round_rational(&exact, r), fmt, o)
}

pub fn oracle_mul(
    a: i64,
    b: i64,
    fmt: FixedPointFormat,
    r: RoundingMode,
    o: OverflowMode,
) -> OracleOut {
    let p = BigRational::new(BigInt::from(a) * BigInt::from(b), pow2(fmt.frac_bits()));
    handle(round_rational(&p, r), fmt, o)
}

pub fn oracle_div(
    a: i64,
    b: i64,
    fmt: FixedPointFormat,
    r: RoundingMode,
    o: OverflowMode,
) -> OracleOut {
    let q = BigRational::new(BigInt::from(a) * pow2(fmt.frac_bits()), BigInt::from(b));
    handle(round_rational(&q, r), fmt, o)
}

pub fn oracle_add(a: i64, b: i64, fmt: FixedPointFormat, o: OverflowMode) -> OracleOut {
    handle(BigInt::from(a) + BigInt::from(b), fmt, o)
}

pub fn oracle_sub(a: i64, b: i64, fmt: FixedPointFormat, o: OverflowMode) -> OracleOut {
    handle(BigInt::from(a) - BigInt::from(b), fmt, o)
}

pub fn big_to_i128(b: &BigInt) -> Option<i128> {
    b.to_i128()
}

pub fn is_zero(b: &BigInt) -> bool {
    b.is_zero()
}

// ---------------------------------------------------------------------------
// Random systems

pub fn fmt(n: u32, l: u32) -> FixedPointFormat {
    FixedPointFormat::new(n, l).unwrap()
}

pub fn random_format<R: Rng>(rng: &mut R) -> FixedPointFormat {
    fmt(rng.gen_range(4..=16), rng.gen_range(2..=14))
}

/// Monic polynomial (descending powers) with the given real roots and
/// complex-conjugate pairs `(re, im)`.
pub fn poly_from_roots(real: &[f64], pairs: &[(f64, f64)]) -> Vec<f64> {
    let mut p = vec![1.0];
    let mul = |p: &[f64], q: &[f64]| {
        let mut out = vec![0.0; p.len() + q.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for &r in real {
        p = mul(&p, &[1.0, -r]);
    }
    for &(re, im) in pairs {
        p = mul(&p, &[1.0, -2.0 * re, re * re + im * im]);
    }
    p
}

/// Random root layout of the given order inside radius `max_r`.
pub fn random_roots<R: Rng>(rng: &mut R, order: usize, max_r: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    let mut real = Vec::new();
    let mut pairs = Vec::new();
    let mut left = order;
    while left > 0 {
        if left >= 2 && rng.gen_bool(0.5) {
            let r = rng.gen_range(0.05..max_r);
            let th = rng.gen_range(0.1..std::f64::consts::PI - 0.1);
            pairs.push((r * th.cos(), r * th.sin()));
            left -= 2;
        } else {
            real.push(rng.gen_range(-max_r..max_r));
            left -= 1;
        }
    }
    (real, pairs)
}

pub fn random_stable_system<R: Rng>(rng: &mut R, order: usize, max_r: f64) -> DigitalSystem {
    let (pr, pp) = random_roots(rng, order, max_r);
    let den = poly_from_roots(&pr, &pp);
    let m = rng.gen_range(0..=order);
    let mut num: Vec<f64> = (0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if num.iter().all(|&b| b == 0.0) {
        num[0] = 1.0;
    }
    DigitalSystem::new(num, den, None).unwrap()
}

pub const SIMULABLE: [RealizationKind; 3] = [
    RealizationKind::DFI,
    RealizationKind::DFII,
    RealizationKind::TDFII,
];

pub fn random_modes<R: Rng>(rng: &mut R) -> (RoundingMode, OverflowMode) {
    (
        if rng.gen_bool(0.5) {
            RoundingMode::Round
        } else {
            RoundingMode::Floor
        },
        if rng.gen_bool(0.5) {
            OverflowMode::WrapAround
        } else {
            OverflowMode::Saturate
        },
    )
}

// ---------------------------------------------------------------------------
// Counterexample synthesis

pub struct Synth {
    pub ce: Counterexample,
    pub rmode: RoundingMode,
    pub omode: OverflowMode,
}

fn grid_value<R: Rng>(rng: &mut R, f: FixedPointFormat, lo: f64, hi: f64) -> f64 {
    let q = f.quantum();
    let lo = (lo.max(f.min_value()) / q).ceil() as i64;
    let hi = (hi.min(f.max_value()) / q).floor() as i64;
    rng.gen_range(lo..=hi) as f64 * q
}

fn base_ce(
    property: PropertyKind,
    system: &DigitalSystem,
    f: FixedPointFormat,
    realization: RealizationKind,
    rmode: RoundingMode,
    with_fixed_lines: bool,
) -> Counterexample {
    let (qn, qd) = if with_fixed_lines {
        (
            fwl_values(system.numerator(), f, rmode).unwrap(),
            fwl_values(system.denominator(), f, rmode).unwrap(),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    Counterexample {
        property,
        system: system.clone(),
        implementation: ImplementationSpec::new(
            f,
            (f.min_value(), f.max_value()),
            None,
            realization,
        )
        .unwrap(),
        x_size: None,
        quantized_numerator: qn,
        quantized_denominator: qd,
        initial_states: Vec::new(),
        inputs: Vec::new(),
        claimed_outputs: Vec::new(),
        source_path: String::new(),
    }
}

/// Overflow counterexample whose claimed outputs come from the simulator.
pub fn synth_overflow<R: Rng>(
    rng: &mut R,
    system: &DigitalSystem,
    f: FixedPointFormat,
    realization: RealizationKind,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> Option<Synth> {
    let steps = rng.gen_range(4..=12);
    let mut cfg = SimulationConfig::new(
        system.clone(),
        ImplementationSpec::new(f, (f.min_value(), f.max_value()), None, realization).unwrap(),
        rmode,
        omode,
        steps,
    );
    cfg.layout = StateLayout::Verifier;
    for _ in 0..20 {
        let inputs: Vec<f64> = (0..steps)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    if rng.gen_bool(0.5) {
                        f.max_value()
                    } else {
                        f.min_value()
                    }
                } else {
                    grid_value(rng, f, f.min_value(), f.max_value())
                }
            })
            .collect();
        let trace = simulate(&cfg, &inputs, &[]).ok()?;
        if trace.overflow_events.is_empty() && trace.boundary_hits.is_empty() {
            continue;
        }
        let mut ce = base_ce(
            PropertyKind::Overflow,
            system,
            f,
            realization,
            rmode,
            rng.gen_bool(0.5),
        );
        ce.x_size = Some(steps);
        ce.inputs = inputs;
        ce.claimed_outputs = trace.outputs_raw.clone();
        return Some(Synth { ce, rmode, omode });
    }
    None
}

/// Limit-cycle counterexample from a constant input and random initial states.
pub fn synth_limit_cycle<R: Rng>(
    rng: &mut R,
    system: &DigitalSystem,
    f: FixedPointFormat,
    realization: RealizationKind,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> Option<Synth> {
    let n = system.den_order();
    let k = n.max(system.num_order());
    let n_states = if realization == RealizationKind::DFI {
        n
    } else {
        k
    };
    for _ in 0..20 {
        let steps = rng.gen_range(16..=40);
        let u = if rng.gen_bool(0.5) {
            0.0
        } else {
            grid_value(rng, f, -1.0, 1.0)
        };
        let states: Vec<f64> = (0..n_states)
            .map(|_| grid_value(rng, f, f.min_value(), f.max_value()))
            .collect();
        let mut ce = base_ce(
            PropertyKind::LimitCycle,
            system,
            f,
            realization,
            rmode,
            rng.gen_bool(0.5),
        );
        ce.x_size = Some(steps);
        ce.inputs = vec![u; steps];
        ce.initial_states = states.clone();
        let mut cfg = SimulationConfig::new(
            system.clone(),
            ce.implementation.clone(),
            rmode,
            omode,
            steps,
        );
        cfg.layout = StateLayout::Verifier;
        cfg.input_history = InputHistory::HoldFirst;
        let trace = simulate(&cfg, &ce.inputs, &states).ok()?;
        ce.claimed_outputs = trace.outputs();
        match check_limit_cycle(&ce, rmode, omode) {
            Ok(v) if v.violated => return Some(Synth { ce, rmode, omode }),
            _ => continue,
        }
    }
    None
}

/// Stability or minimum-phase counterexample, when the quantized system
/// really violates the property.
pub fn synth_roots<R: Rng>(
    rng: &mut R,
    property: PropertyKind,
    system: &DigitalSystem,
    f: FixedPointFormat,
    realization: RealizationKind,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> Option<Synth> {
    let check = if property == PropertyKind::Stability {
        check_stability
    } else {
        check_minimum_phase
    };
    let v = check(system, f, rmode, realization, None).ok()?;
    v.violated.then(|| Synth {
        ce: base_ce(property, system, f, realization, rmode, rng.gen_bool(0.5)),
        rmode,
        omode,
    })
}

/// Random system with coefficients drawn broadly, so that overflow, limit
/// cycles and unstable or non-minimum-phase cases all occur.
pub fn random_system<R: Rng>(rng: &mut R) -> DigitalSystem {
    let order = rng.gen_range(1..=4);
    let max_r = if rng.gen_bool(0.5) { 0.999 } else { 1.3 };
    let (pr, pp) = random_roots(rng, order, max_r);
    let den = poly_from_roots(&pr, &pp);
    let m = rng.gen_range(0..=order);
    let (zr, zp) = random_roots(rng, m, 1.5);
    let gain = rng.gen_range(0.25..4.0);
    let num: Vec<f64> = poly_from_roots(&zr, &zp).iter().map(|c| c * gain).collect();
    DigitalSystem::new(num, den, None).unwrap()
}

/// One synthesized counterexample per call, trying the preferred property
/// first and falling back to the others.
pub fn synthesize<R: Rng>(rng: &mut R, preferred: usize) -> Synth {
    loop {
        let system = random_system(rng);
        let f = random_format(rng);
        let realization = SIMULABLE[rng.gen_range(0..3)];
        let (rmode, omode) = random_modes(rng);
        for i in 0..4 {
            let property = PropertyKind::ALL[(preferred + i) % 4];
            let s = match property {
                PropertyKind::Overflow => {
                    synth_overflow(rng, &system, f, realization, rmode, omode)
                }
                PropertyKind::LimitCycle => {
                    synth_limit_cycle(rng, &system, f, realization, rmode, omode)
                }
                p => synth_roots(rng, p, &system, f, realization, rmode, omode),
            };
            if let Some(s) = s {
                return s;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force limit-cycle oracle

/// Zero-input successor of an autonomous state, re-derived from the
/// difference equations of a monic system.
pub fn zero_input_successor(
    num: &[FxNum],
    den: &[FxNum],
    realization: RealizationKind,
    rmode: RoundingMode,
    omode: OverflowMode,
    state: &[FxNum],
) -> Vec<FxNum> {
    let f = den[0].format();
    let mul = |a: FxNum, b: FxNum| fx_mul(a, b, omode, rmode).unwrap().value;
    let n = den.len() - 1;
    let k_len = n.max(num.len() - 1);
    match realization {
        RealizationKind::DFI => {
            // state = [y(-1) .. y(-N)]
            let mut acc = Accumulator::new(f);
            for k in 1..=n {
                acc.sub(mul(den[k], state[k - 1]));
            }
            let y = acc.finish(omode).value;
            let mut next = vec![y];
            next.extend_from_slice(&state[..n - 1]);
            next
        }
        RealizationKind::DFII => {
            // state = [w(-1) .. w(-K)]
            let mut acc = Accumulator::new(f);
            for k in 1..=n {
                acc.sub(mul(den[k], state[k - 1]));
            }
            let w = acc.finish(omode).value;
            let mut next = vec![w];
            next.extend_from_slice(&state[..k_len - 1]);
            next
        }
        RealizationKind::TDFII => {
            // state = [s1 .. sK], y = s1 under zero input
            let y = state[0];
            (1..=k_len)
                .map(|k| {
                    let mut acc = Accumulator::new(f);
                    if k < k_len {
                        acc.add(state[k]);
                    }
                    if k <= n {
                        acc.sub(mul(den[k], y));
                    }
                    acc.finish(omode).value
                })
                .collect()
        }
        r => panic!("{r} has no zero-input recursion here"),
    }
}

/// Whether any nonzero state of the autonomous system lies on a cycle,
/// found by iterating the full successor map to its periodic points.
pub fn brute_force_has_cycle(
    system: &DigitalSystem,
    f: FixedPointFormat,
    realization: RealizationKind,
    rmode: RoundingMode,
    omode: OverflowMode,
) -> bool {
    let num = fwl(system.numerator(), f, rmode).unwrap();
    let den = fwl(system.denominator(), f, rmode).unwrap();
    assert_eq!(den[0].to_f64(), 1.0, "oracle expects a monic denominator");
    let n = den.len() - 1;
    let dim = if realization == RealizationKind::DFI {
        n
    } else {
        n.max(num.len() - 1)
    };
    let (lo, hi) = (f.min_value(), f.max_value());
    let per = ((hi - lo) / f.quantum()) as usize + 1;
    let total = per.pow(dim as u32);
    let decode = |mut i: usize| -> Vec<FxNum> {
        let mut s = vec![FxNum::zero(f); dim];
        for slot in s.iter_mut().rev() {
            let scaled = (lo / f.quantum()) as i64 + (i % per) as i64;
            *slot = FxNum::from_scaled(scaled, f).unwrap();
            i /= per;
        }
        s
    };
    let encode = |s: &[FxNum]| -> usize {
        s.iter().fold(0, |acc, v| {
            acc * per + (v.scaled() - (lo / f.quantum()) as i64) as usize
        })
    };
    let succ: Vec<usize> = (0..total)
        .map(|i| {
            encode(&zero_input_successor(
                &num,
                &den,
                realization,
                rmode,
                omode,
                &decode(i),
            ))
        })
        .collect();
    // After `total` applications every state sits on its terminal cycle.
    let mut on_cycle: Vec<usize> = (0..total).collect();
    let mut steps = total;
    let mut power = succ.clone();
    while steps > 0 {
        if steps & 1 == 1 {
            on_cycle = on_cycle.iter().map(|&i| power[i]).collect();
        }
        power = power.iter().map(|&i| power[i]).collect();
        steps >>= 1;
    }
    let zero = encode(&vec![FxNum::zero(f); dim]);
    on_cycle.iter().any(|&i| i != zero)
}

// ---------------------------------------------------------------------------
// Parser fuzzing

const FUZZ_TOKENS: &[&str] = &[
    "{",
    "}",
    "<",
    ">",
    ",",
    "=",
    "\n",
    " ",
    "-",
    ".",
    "e",
    "1e308",
    "NaN",
    "inf",
    "-0",
    "<0,0>",
    "<64,64>",
    "{}",
    "DFI",
    "TDDFII",
    "Property",
    "Inputs",
    "x_size = 0",
    "Delta = 0",
    "\u{feff}",
    "\t",
    "9999999999999999999999",
];

/// One random textual mutation of `seed`: byte flips, token splices, line
/// drops, duplications and truncation, sometimes stacked.
pub fn mutate_text<R: Rng>(rng: &mut R, seed: &str) -> Vec<u8> {
    let mut bytes = seed.as_bytes().to_vec();
    for _ in 0..rng.gen_range(1..=4) {
        if bytes.is_empty() {
            bytes.extend_from_slice(FUZZ_TOKENS[rng.gen_range(0..FUZZ_TOKENS.len())].as_bytes());
            continue;
        }
        let at = rng.gen_range(0..bytes.len());
        match rng.gen_range(0..7) {
            0 => bytes[at] = rng.gen(),
            1 => {
                let tok = FUZZ_TOKENS[rng.gen_range(0..FUZZ_TOKENS.len())];
                bytes.splice(at..at, tok.bytes());
            }
            2 => {
                let end = (at + rng.gen_range(1..16)).min(bytes.len());
                bytes.drain(at..end);
            }
            3 => bytes.truncate(at),
            4 => {
                // Drop or duplicate a whole line.
                let text = String::from_utf8_lossy(&bytes).into_owned();
                let mut lines: Vec<&str> = text.lines().collect();
                if !lines.is_empty() {
                    let i = rng.gen_range(0..lines.len());
                    if rng.gen_bool(0.5) {
                        lines.remove(i);
                    } else {
                        lines.insert(i, lines[i]);
                    }
                }
                bytes = lines.join("\n").into_bytes();
            }
            5 => {
                // Swap a digit for another.
                if bytes[at].is_ascii_digit() {
                    bytes[at] = b'0' + rng.gen_range(0..10);
                }
            }
            _ => {
                let len = rng.gen_range(1..8).min(bytes.len() - at);
                let chunk = bytes[at..at + len].to_vec();
                bytes.splice(at..at, chunk);
            }
        }
    }
    bytes
}
