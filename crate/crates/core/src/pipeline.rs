//! Directory-level validation: parse, replay, compare, persist, report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::counterexample::{
    scan_directory, write_results, Counterexample, ResultsError, ScanError, ValidationOutcome,
    ValidationStatus,
};
use crate::fixed_point::{OverflowMode, RoundingMode};
use crate::system::PropertyKind;
use crate::validators::{
    bauer_lco_free_in_range, check_limit_cycle, check_minimum_phase, check_overflow,
    check_stability, effective_system, extract_oscillation, BauerResult, Evidence, PropertyVerdict,
    DEFAULT_STATE_CAP,
};

/// Environment variable overriding the exhaustive-search state cap.
pub const STATE_CAP_ENV: &str = "CXVAL_STATE_CAP";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Results(#[from] ResultsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub path: PathBuf,
    pub property: PropertyKind,
    pub omode: OverflowMode,
    pub rmode: RoundingMode,
    /// Results file; `None` skips writing.
    pub out_path: Option<PathBuf>,
    /// Overflow output comparison slack, in quanta.
    pub tolerance_quanta: u64,
    pub state_cap: u64,
}

impl RunConfig {
    /// Wrap-around, round, results in `digital_system.json`, exact comparison.
    pub fn new(path: impl Into<PathBuf>, property: PropertyKind) -> Self {
        let state_cap = std::env::var(STATE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_STATE_CAP);
        Self {
            path: path.into(),
            property,
            omode: OverflowMode::WrapAround,
            rmode: RoundingMode::Round,
            out_path: Some(results_path("digital_system")),
            tolerance_quanta: 0,
            state_cap,
        }
    }
}

/// `name` with a `.json` extension added unless it already has one.
pub fn results_path(name: &str) -> PathBuf {
    let p = PathBuf::from(name);
    if p.extension().is_some_and(|e| e == "json") {
        p
    } else {
        PathBuf::from(format!("{name}.json"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeReport {
    pub id: String,
    pub cpu_time: f64,
    pub status: ValidationStatus,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub per_ce: Vec<CeReport>,
    pub reproducible: usize,
    pub irreproducible: usize,
    pub errors: usize,
    pub total: usize,
    pub total_time: f64,
    /// Skipped files and per-file notes, for stderr.
    pub diagnostics: Vec<String>,
    pub outcomes: Vec<ValidationOutcome>,
    pub counterexamples: Vec<Option<Counterexample>>,
}

impl RunReport {
    fn push(&mut self, outcome: ValidationOutcome, ce: Option<Counterexample>) {
        match outcome.status {
            ValidationStatus::Reproducible => self.reproducible += 1,
            ValidationStatus::Irreproducible => self.irreproducible += 1,
            ValidationStatus::Error => self.errors += 1,
        }
        self.total += 1;
        self.total_time += outcome.cpu_time;
        self.per_ce.push(CeReport {
            id: outcome.counterexample_id.clone(),
            cpu_time: outcome.cpu_time,
            status: outcome.status,
        });
        self.outcomes.push(outcome);
        self.counterexamples.push(ce);
    }

    /// True when nothing was irreproducible or failed.
    pub fn all_reproducible(&self) -> bool {
        self.irreproducible == 0 && self.errors == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Comparison {
    Reproducible,
    Irreproducible(String),
}

/// Validates every matching `.out` file under `cfg.path`, in filename order.
pub fn validate_all(cfg: &RunConfig) -> Result<RunReport, PipelineError> {
    let scan = scan_directory(&cfg.path)?;
    let mut report = RunReport {
        diagnostics: scan.diagnostics,
        ..RunReport::default()
    };
    for entry in scan.entries {
        let name = entry.path.display().to_string();
        let id = file_stem(&entry.path);
        if let Some(p) = entry.property {
            if p != cfg.property {
                report.diagnostics.push(format!(
                    "skipped {name}: property {p} is not {}",
                    cfg.property
                ));
                continue;
            }
        }
        match entry.result {
            Ok(ce) => {
                for note in &entry.notes {
                    report.diagnostics.push(format!("{name}: {note}"));
                }
                let outcome = validate_counterexample(&ce, cfg);
                report.push(outcome, Some(ce));
            }
            Err(e) => {
                let outcome =
                    ValidationOutcome::error(id, entry.property, format!("parse error: {e}"));
                report.diagnostics.push(format!("{name}: {e}"));
                report.push(outcome, None);
            }
        }
    }
    if let Some(path) = &cfg.out_path {
        write_results(&report.outcomes, &report.counterexamples, path)?;
    }
    Ok(report)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Runs the property check for one counterexample and compares it with
/// the verifier's claim. Never fails: problems become `Error` outcomes.
pub fn validate_counterexample(ce: &Counterexample, cfg: &RunConfig) -> ValidationOutcome {
    let started = cpu_time();
    let (rmode, omode) = (cfg.rmode, cfg.omode);
    let imp = &ce.implementation;
    let verdict = match ce.property {
        PropertyKind::Stability | PropertyKind::MinimumPhase => {
            let (system, notes) = effective_system(ce, rmode);
            let check = if ce.property == PropertyKind::Stability {
                check_stability
            } else {
                check_minimum_phase
            };
            check(&system, imp.format, rmode, imp.realization, imp.delta).map(|mut v| {
                v.notes.splice(0..0, notes);
                v
            })
        }
        PropertyKind::Overflow => check_overflow(ce, rmode, omode),
        PropertyKind::LimitCycle => check_limit_cycle(ce, rmode, omode),
    };

    let mut outcome = ValidationOutcome {
        counterexample_id: ce.id(),
        property: Some(ce.property),
        status: ValidationStatus::Error,
        simulated_outputs: Vec::new(),
        overflow_steps: Vec::new(),
        lco_period: None,
        lco_amplitude: None,
        cpu_time: 0.0,
        diagnostics: Vec::new(),
        rounding_mode: rmode,
        overflow_mode: omode,
    };
    match verdict {
        Err(e) => outcome.diagnostics.push(e.to_string()),
        Ok(verdict) => {
            outcome.diagnostics.extend(verdict.notes.iter().cloned());
            match &verdict.evidence {
                Evidence::Roots { max_modulus, .. } => {
                    outcome
                        .diagnostics
                        .push(format!("largest root modulus {max_modulus:.6}"));
                }
                Evidence::Overflow { events, trace } => {
                    outcome.simulated_outputs = trace.outputs_raw.clone();
                    outcome.overflow_steps = trace.overflow_steps();
                    outcome.overflow_steps.extend(events.iter().map(|e| e.step));
                    outcome.overflow_steps.sort_unstable();
                    outcome.overflow_steps.dedup();
                    for e in events {
                        outcome.diagnostics.push(format!(
                            "overflow at step {} ({}): {}",
                            e.step, e.stage, e.raw
                        ));
                    }
                }
                Evidence::Lco {
                    period,
                    amplitude,
                    kind,
                    trace,
                    ..
                } => {
                    outcome.simulated_outputs = trace.outputs();
                    outcome.overflow_steps = trace.overflow_steps();
                    outcome.lco_period = *period;
                    outcome.lco_amplitude = *amplitude;
                    if let Some(kind) = kind {
                        outcome.diagnostics.push(format!("{kind:?} limit cycle"));
                    }
                }
            }
            match compare_outcome(ce, &verdict, cfg.tolerance_quanta) {
                Comparison::Reproducible => outcome.status = ValidationStatus::Reproducible,
                Comparison::Irreproducible(reason) => {
                    outcome.status = ValidationStatus::Irreproducible;
                    outcome.diagnostics.push(reason);
                    if ce.property == PropertyKind::LimitCycle {
                        outcome.diagnostics.push(bauer_diagnostic(ce, cfg));
                    }
                }
            }
        }
    }
    outcome.cpu_time = (cpu_time() - started).max(0.0);
    outcome
}

fn bauer_diagnostic(ce: &Counterexample, cfg: &RunConfig) -> String {
    let (system, _) = effective_system(ce, cfg.rmode);
    let imp = &ce.implementation;
    let res = bauer_lco_free_in_range(
        &system,
        imp.format,
        cfg.rmode,
        cfg.omode,
        imp.realization,
        cfg.state_cap,
        Some((imp.dyn_min, imp.dyn_max)),
    );
    match res {
        BauerResult::LcoFree => "exhaustive search: no zero-input limit cycle exists".into(),
        BauerResult::LcoPossible(w) => format!(
            "exhaustive search: zero-input limit cycle of length {} from state {:?}",
            w.cycle.len(),
            w.start
        ),
        BauerResult::Undecided(why) => format!("exhaustive search undecided: {why}"),
    }
}

/// Grid index of `x` under `frac_bits`, without range handling.
fn grid(x: f64, frac_bits: u32) -> f64 {
    (x * (frac_bits as f64).exp2()).round()
}

/// Decides whether the replay matches what the verifier claimed.
///
/// Stability and minimum phase only need the violation to recur. Overflow
/// also needs the replayed outputs (before overflow handling) to equal the
/// claimed ones on the grid, within `tolerance_quanta`. Limit cycles compare
/// period and amplitude only.
pub fn compare_outcome(
    ce: &Counterexample,
    verdict: &PropertyVerdict,
    tolerance_quanta: u64,
) -> Comparison {
    let l = ce.implementation.format.frac_bits();
    match (&verdict.evidence, ce.property) {
        (Evidence::Roots { max_modulus, .. }, _) => {
            if verdict.violated {
                Comparison::Reproducible
            } else {
                let what = if ce.property == PropertyKind::Stability {
                    "poles"
                } else {
                    "zeros"
                };
                Comparison::Irreproducible(format!(
                    "all quantized {what} lie inside the unit circle (max modulus {max_modulus:.6})"
                ))
            }
        }
        (Evidence::Overflow { trace, .. }, _) => {
            if !verdict.violated {
                return Comparison::Irreproducible("no overflow in simulation".into());
            }
            let tol = tolerance_quanta as f64;
            let diverged = ce
                .claimed_outputs
                .iter()
                .zip(&trace.outputs_raw)
                .position(|(&c, &s)| (grid(c, l) - grid(s, l)).abs() > tol);
            match diverged {
                None => Comparison::Reproducible,
                Some(n) => Comparison::Irreproducible(format!(
                    "outputs diverge at step {n}: expected {}, got {}",
                    ce.claimed_outputs[n], trace.outputs_raw[n]
                )),
            }
        }
        (
            Evidence::Lco {
                period, amplitude, ..
            },
            _,
        ) => {
            if !verdict.violated {
                return Comparison::Irreproducible("no oscillation in simulation".into());
            }
            let q = ce.implementation.format.quantum();
            let claimed: Vec<f64> = ce.claimed_outputs.iter().map(|&c| grid(c, l) * q).collect();
            match extract_oscillation(&claimed) {
                None => Comparison::Irreproducible("claimed outputs show no periodic tail".into()),
                Some((cp, ca)) if Some(cp) == *period && Some(ca) == *amplitude => {
                    Comparison::Reproducible
                }
                Some((cp, ca)) => Comparison::Irreproducible(format!(
                    "oscillation differs: expected period {cp} amplitude {ca}, got period {} amplitude {}",
                    period.map_or("-".into(), |p| p.to_string()),
                    amplitude.map_or("-".into(), |a| a.to_string()),
                )),
            }
        }
    }
}

/// The textual run report.
pub fn render_report(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Running Automatic Validation...");
    let _ = writeln!(out, "Counterexamples (CE) Validation Report...");
    for (i, ce) in report.per_ce.iter().enumerate() {
        let _ = writeln!(
            out,
            "CE {} time: {} status: {}",
            i + 1,
            format_g5(ce.cpu_time),
            ce.status
        );
    }
    let _ = writeln!(out, "General Report:");
    let _ = writeln!(
        out,
        "Total Counterexamples Reproducible: {}",
        report.reproducible
    );
    let _ = writeln!(
        out,
        "Total Counterexamples Irreproducible: {}",
        report.irreproducible
    );
    if report.errors > 0 {
        let _ = writeln!(out, "Total Counterexamples Error: {}", report.errors);
    }
    let _ = writeln!(out, "Total Counterexamples: {}", report.total);
    let _ = writeln!(
        out,
        "Total Execution Time: {}",
        format_g5(report.total_time)
    );
    out
}

/// Five significant digits, trailing zeros dropped, like C's `%.5g`.
pub fn format_g5(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.4e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-4..5).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa.to_string()), exp.abs())
    } else {
        trim(format!("{x:.*}", (4 - exp) as usize))
    }
}

/// Process CPU time in seconds.
pub fn cpu_time() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}
