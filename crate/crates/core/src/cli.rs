//! Command-line front end. All logic lives in [`run_with`] so it can be driven
//! from tests with in-memory streams.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::counterexample::{read_results, Counterexample, ResultRecord};
use crate::fixed_point::{fwl_values, FixedPointFormat, OverflowMode, RoundingMode};
use crate::pipeline::{render_report, results_path, validate_all, RunConfig};
use crate::plot::{lco_series, overflow_series, pole_zero_series, PlotSeries};
use crate::system::{DigitalSystem, PropertyKind, RealizationKind};
use crate::validators::{
    check_limit_cycle, check_minimum_phase, check_overflow, check_stability, effective_system,
    Evidence, PropertyVerdict,
};

#[derive(Debug, Parser)]
#[command(
    name = "cxval",
    version,
    about = "Replay and validate fixed-point counterexamples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate every counterexample of one property in a directory.
    Validate(ValidateArgs),
    /// Check stability of a transfer function after quantization.
    SimulateStability(RootArgs),
    /// Check minimum phase of a transfer function after quantization.
    SimulateMinimumPhase(RootArgs),
    /// Quantize a coefficient vector.
    Fwl(FwlArgs),
    /// Emit overflow plot data for one record of a results file.
    PlotOverflow(PlotArgs),
    /// Emit limit-cycle plot data for one record of a results file.
    PlotLimitCycle(PlotArgs),
    /// Emit pole-zero plot data for one record of a results file.
    PlotZeroPole(PlotArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Directory holding the `.out` files.
    #[arg(long)]
    pub path: PathBuf,
    /// m (minimum phase), s (stability), o (overflow) or lc (limit cycle).
    #[arg(long, value_parser = parse_property)]
    pub property: PropertyKind,
    /// wrap or saturate; empty means the default (wrap).
    #[arg(long, value_parser = parse_overflow_mode, default_value = "wrap")]
    pub overflow_mode: OverflowMode,
    /// round or floor; empty means the default (round).
    #[arg(long, value_parser = parse_rounding, default_value = "round")]
    pub rounding: RoundingMode,
    /// Results file name; `.json` is appended when missing.
    #[arg(long, default_value = "digital_system")]
    pub out: String,
    /// Allowed overflow output mismatch, in quanta.
    #[arg(long, default_value_t = 0)]
    pub tolerance: u64,
}

#[derive(Debug, Args)]
pub struct FormatArgs {
    #[arg(long)]
    pub frac_bits: u32,
    /// Defaults to min(32, 64 - frac_bits).
    #[arg(long)]
    pub int_bits: Option<u32>,
    #[arg(long, value_parser = parse_rounding, default_value = "round")]
    pub rounding: RoundingMode,
}

impl FormatArgs {
    fn format(&self) -> Result<FixedPointFormat, String> {
        let n = self
            .int_bits
            .unwrap_or_else(|| 32.min(64u32.saturating_sub(self.frac_bits)));
        FixedPointFormat::new(n, self.frac_bits).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Args)]
pub struct FwlArgs {
    /// Comma- or space-separated coefficients.
    #[arg(long, allow_hyphen_values = true)]
    pub coeffs: String,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct RootArgs {
    /// Numerator coefficients b0, b1, ... in powers of z^-1.
    #[arg(long, allow_hyphen_values = true)]
    pub num: String,
    /// Denominator coefficients a0, a1, ... in powers of z^-1.
    #[arg(long, allow_hyphen_values = true)]
    pub den: String,
    #[command(flatten)]
    pub format: FormatArgs,
    #[arg(long, default_value = "DFI", value_parser = parse_realization)]
    pub realization: RealizationKind,
    /// Delta operator step, required by delta realizations.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Results file written by `validate`.
    #[arg(long)]
    pub report: PathBuf,
    /// 1-based record number.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub index: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn parse_property(s: &str) -> Result<PropertyKind, String> {
    PropertyKind::from_letter(s)
        .or_else(|| s.parse().ok())
        .ok_or_else(|| format!("unknown property `{s}` (expected m, s, o or lc)"))
}

fn parse_overflow_mode(s: &str) -> Result<OverflowMode, String> {
    match s {
        "" | "wrap" => Ok(OverflowMode::WrapAround),
        "saturate" => Ok(OverflowMode::Saturate),
        _ => Err(format!(
            "unknown overflow mode `{s}` (expected wrap or saturate)"
        )),
    }
}

fn parse_rounding(s: &str) -> Result<RoundingMode, String> {
    match s {
        "" | "round" => Ok(RoundingMode::Round),
        "floor" => Ok(RoundingMode::Floor),
        _ => Err(format!(
            "unknown rounding mode `{s}` (expected round or floor)"
        )),
    }
}

fn parse_realization(s: &str) -> Result<RealizationKind, String> {
    s.parse()
        .map_err(|e: crate::system::SystemError| e.to_string())
}

/// Parses `1,1.8,1.14`, `1 1.8 1.14` or `[1 1.8 1.14]`.
pub fn parse_coeffs(s: &str) -> Result<Vec<f64>, String> {
    let inner = s
        .trim()
        .trim_start_matches(['[', '{'])
        .trim_end_matches([']', '}']);
    let values: Vec<f64> = inner
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err("no coefficients given".into());
    }
    Ok(values)
}

/// Four-decimal display used for human-readable vectors.
pub fn format_vector(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

enum Failure {
    Usage(String),
    Io(String),
}

/// Parses `args` (program name first) and runs the command.
///
/// Exit codes: 0 on success, 1 when validation found irreproducible or
/// failed counterexamples or on I/O errors, 2 on usage errors.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
        Err(Failure::Io(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let io = |e: std::io::Error| Failure::Io(e.to_string());
    match cmd {
        Command::Validate(a) => {
            let mut cfg = RunConfig::new(&a.path, a.property);
            cfg.omode = a.overflow_mode;
            cfg.rmode = a.rounding;
            cfg.out_path = Some(results_path(&a.out));
            cfg.tolerance_quanta = a.tolerance;
            let report = validate_all(&cfg).map_err(|e| Failure::Io(e.to_string()))?;
            for d in &report.diagnostics {
                writeln!(err, "{d}").map_err(io)?;
            }
            for o in &report.outcomes {
                if o.status != crate::counterexample::ValidationStatus::Reproducible {
                    for d in &o.diagnostics {
                        writeln!(err, "{}: {d}", o.counterexample_id).map_err(io)?;
                    }
                }
            }
            write!(out, "{}", render_report(&report)).map_err(io)?;
            Ok(if report.all_reproducible() { 0 } else { 1 })
        }
        Command::Fwl(a) => {
            let coeffs = parse_coeffs(&a.coeffs).map_err(Failure::Usage)?;
            let fmt = a.format.format().map_err(Failure::Usage)?;
            let q = fwl_values(&coeffs, fmt, a.format.rounding)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            writeln!(out, "{}", format_vector(&q)).map_err(io)?;
            Ok(0)
        }
        Command::SimulateStability(a) => roots_command(&a, true, out),
        Command::SimulateMinimumPhase(a) => roots_command(&a, false, out),
        Command::PlotOverflow(a) => plot_command(&a, PlotWhich::Overflow, out),
        Command::PlotLimitCycle(a) => plot_command(&a, PlotWhich::LimitCycle, out),
        Command::PlotZeroPole(a) => plot_command(&a, PlotWhich::ZeroPole, out),
    }
}

fn roots_command(a: &RootArgs, stability: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let io = |e: std::io::Error| Failure::Io(e.to_string());
    let num = parse_coeffs(&a.num).map_err(Failure::Usage)?;
    let den = parse_coeffs(&a.den).map_err(Failure::Usage)?;
    let system = DigitalSystem::new(num, den, None).map_err(|e| Failure::Usage(e.to_string()))?;
    let fmt = a.format.format().map_err(Failure::Usage)?;
    let check = if stability {
        check_stability
    } else {
        check_minimum_phase
    };
    let verdict = check(&system, fmt, a.format.rounding, a.realization, a.delta)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    print_root_verdict(&verdict, out).map_err(io)?;
    Ok(0)
}

fn print_root_verdict(v: &PropertyVerdict, out: &mut dyn Write) -> std::io::Result<()> {
    if let Evidence::Roots {
        quantized,
        roots,
        max_modulus,
    } = &v.evidence
    {
        writeln!(out, "quantized: {}", format_vector(quantized))?;
        for r in roots {
            writeln!(out, "root: {:.4} {:+.4}i |{:.4}|", r.re, r.im, r.norm())?;
        }
        writeln!(out, "max modulus: {max_modulus:.4}")?;
    }
    for n in &v.notes {
        writeln!(out, "note: {n}")?;
    }
    writeln!(out, "{}", if v.violated { "failed" } else { "successful" })
}

#[derive(Clone, Copy)]
enum PlotWhich {
    Overflow,
    LimitCycle,
    ZeroPole,
}

fn load_record(report: &Path, index: u64) -> Result<(ResultRecord, Counterexample), Failure> {
    let records = read_results(report).map_err(|e| Failure::Io(e.to_string()))?;
    let i = usize::try_from(index - 1).unwrap_or(usize::MAX);
    let record = records.get(i).cloned().ok_or_else(|| {
        Failure::Usage(format!(
            "index {index} out of range: {} record(s)",
            records.len()
        ))
    })?;
    let ce = match record.to_counterexample() {
        Some(Ok(ce)) => ce,
        Some(Err(e)) => return Err(Failure::Io(format!("record {index}: {e}"))),
        None => {
            return Err(Failure::Usage(format!(
                "record {index} has no counterexample data (the file failed to parse)"
            )))
        }
    };
    Ok((record, ce))
}

fn plot_command(a: &PlotArgs, which: PlotWhich, out: &mut dyn Write) -> Result<i32, Failure> {
    let (record, ce) = load_record(&a.report, a.index)?;
    let outcome = record.to_outcome();
    let (rmode, omode) = (outcome.rounding_mode, outcome.overflow_mode);
    let val = |e: crate::validators::ValidatorError| Failure::Usage(e.to_string());
    let plot: PlotSeries = match which {
        PlotWhich::Overflow => match check_overflow(&ce, rmode, omode).map_err(val)?.evidence {
            Evidence::Overflow { trace, .. } => overflow_series(&ce, &trace),
            _ => unreachable!("overflow check yields overflow evidence"),
        },
        PlotWhich::LimitCycle => {
            match check_limit_cycle(&ce, rmode, omode).map_err(val)?.evidence {
                Evidence::Lco { trace, .. } => lco_series(&ce, &trace),
                _ => unreachable!("limit-cycle check yields LCO evidence"),
            }
        }
        PlotWhich::ZeroPole => {
            let (system, _) = effective_system(&ce, rmode);
            let imp = &ce.implementation;
            pole_zero_series(&system, imp.format, rmode, imp.realization, imp.delta).map_err(val)?
        }
    };
    let stem = match which {
        PlotWhich::Overflow => "overflow",
        PlotWhich::LimitCycle => "limit_cycle",
        PlotWhich::ZeroPole => "zero_pole",
    };
    let stem = format!("{}_{stem}", ce.id());
    let files = plot
        .write(&a.out_dir, &stem)
        .map_err(|e| Failure::Io(e.to_string()))?;
    for f in files {
        writeln!(out, "{}", f.display()).map_err(|e| Failure::Io(e.to_string()))?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(
            std::iter::once("cxval").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn fwl_floor_transcript() {
        let (code, out, _) = run(&[
            "fwl",
            "--coeffs",
            "1,1.8,1.14,0.272",
            "--frac-bits",
            "13",
            "--rounding",
            "floor",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out, "1.0000 1.7999 1.1399 0.2720\n");
    }

    #[test]
    fn coefficient_lists() {
        assert_eq!(
            parse_coeffs("[1 1.8 1.14 0.272]").unwrap(),
            [1.0, 1.8, 1.14, 0.272]
        );
        assert_eq!(parse_coeffs("1, -2").unwrap(), [1.0, -2.0]);
        assert!(parse_coeffs("1,x").is_err());
        assert!(parse_coeffs("").is_err());
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(run(&["validate", "--path", ".", "--property", "q"]).0, 2);
        assert_eq!(
            run(&["fwl", "--coeffs", "1", "--frac-bits", "13", "--bogus"]).0,
            2
        );
        assert_eq!(run(&["fwl", "--coeffs", "1", "--frac-bits", "70"]).0, 2);
        assert_eq!(run(&[]).0, 2);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("validate"));
    }

    #[test]
    fn missing_directory_exits_one() {
        let (code, _, err) = run(&[
            "validate",
            "--path",
            "/nonexistent/cxval",
            "--property",
            "s",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("not a directory"));
    }

    #[test]
    fn empty_mode_strings_mean_defaults() {
        assert_eq!(parse_overflow_mode(""), Ok(OverflowMode::WrapAround));
        assert_eq!(parse_rounding(""), Ok(RoundingMode::Round));
        assert_eq!(parse_property("lc"), Ok(PropertyKind::LimitCycle));
        assert_eq!(parse_property("OVERFLOW"), Ok(PropertyKind::Overflow));
    }
}
