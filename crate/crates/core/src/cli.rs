//! `flexquant` command-line front end.
//!
//! Exit codes: 0 success, 2 input error, 3 unsupported operation,
//! 4 internal invariant violation.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::codec::{fp_encode, Code};
use crate::datapath::{self, OperandFormat};
use crate::error::DatapathError;
use crate::error_model::{error_breakdown, ErrorBreakdown};
use crate::formats::{
    builtin_formats, enumerate_values, max_normal, max_subnormal, min_normal, subnormal_step,
    FpFormatSpec, NumberSystem,
};
use crate::quantizer::{calibrate_minmax, quantize_tensor, sample_calibration_rows};
use crate::search::{run_search, Criterion, Layer, MixPolicy, SearchSpace};
use crate::synthetic::{layer_suite, LayerShape};
use crate::tensorio::{read_tensor, write_tensor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "FLEXQUANT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "flexquant",
    version,
    about = "Flexible 8-bit/6-bit quantization toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    MixedFp,
    AllMixed,
    LimitedMix,
    Nia,
    Int,
}

impl From<PolicyArg> for MixPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::MixedFp => MixPolicy::MixedFp,
            PolicyArg::AllMixed => MixPolicy::AllMixed,
            PolicyArg::LimitedMix => MixPolicy::LimitedMix,
            PolicyArg::Nia => MixPolicy::NiaOnly,
            PolicyArg::Int => MixPolicy::IntOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Mse,
    TensorMse,
    Resolution,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Mse => Criterion::OutputMse,
            CriterionArg::TensorMse => Criterion::TensorMse,
            CriterionArg::Resolution => Criterion::Resolution,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List every built-in format with its bias and extreme values.
    Formats {
        #[arg(long = "table-format", value_enum, default_value = "text")]
        table_format: TableFormat,
    },
    /// MinMax-calibrate and quantize one tensor file.
    Quantize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        format: String,
        /// Where to write the simulated (dequantized) tensor.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the error report; stdout always gets a copy.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long = "report-format", value_enum, default_value = "json")]
        report_format: ReportFormat,
    },
    /// Choose weight/activation formats for a list of layers.
    Search {
        #[arg(long, num_args = 1.., required = true)]
        weights: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        activations: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "all-mixed")]
        policy: PolicyArg,
        #[arg(long, value_enum, default_value = "mse")]
        criterion: CriterionArg,
        #[arg(long, default_value_t = 8)]
        bits: u8,
        /// Explicit comma-separated candidate list replacing the policy's.
        #[arg(long)]
        candidates: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Calibration rows kept per activation tensor.
        #[arg(long = "calib-samples", default_value_t = 256)]
        calib_samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-format selection counts as CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
        /// Omit timing fields so identical runs give identical bytes.
        #[arg(long = "no-meta")]
        no_meta: bool,
    },
    /// Run one dot product through the datapath model and print its trace.
    Dot {
        /// Comma-separated operand values (integers for int8, reals otherwise).
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long = "a-format", default_value = "int8")]
        a_format: String,
        #[arg(long = "b-format", default_value = "int8")]
        b_format: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f32,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        bias: f64,
        /// Treat operand values as raw codes (decimal or 0x-prefixed hex).
        #[arg(long)]
        raw: bool,
    },
    /// Write a seeded synthetic layer suite as tensor files.
    Synth {
        #[arg(long, default_value_t = 10)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        #[arg(long = "out-features", default_value_t = 64)]
        out_features: usize,
        #[arg(long = "in-features", default_value_t = 64)]
        in_features: usize,
        #[arg(long, default_value_t = 256)]
        batch: usize,
    },
}

/// A failed command: exit code, human message, optional machine-readable body.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    pub body: Option<serde_json::Value>,
}

impl CliError {
    fn input(message: impl ToString) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.to_string(),
            body: None,
        }
    }

    fn internal(message: impl ToString) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.to_string(),
            body: None,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

/// Runs a parsed command, writing its primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Formats { table_format } => {
            let table = formats_table(table_format);
            out.write_all(table.as_bytes()).map_err(CliError::internal)
        }
        Command::Quantize {
            input,
            format,
            out: out_path,
            report,
            report_format,
        } => cmd_quantize(
            &input,
            &format,
            out_path.as_deref(),
            report.as_deref(),
            report_format,
            out,
        ),
        Command::Search {
            weights,
            activations,
            policy,
            criterion,
            bits,
            candidates,
            seed,
            calib_samples,
            out: out_path,
            histogram,
            no_meta,
        } => {
            let opts = SearchArgs {
                policy: policy.into(),
                criterion: criterion.into(),
                bits,
                candidates,
                seed,
                calib_samples,
            };
            cmd_search(
                &weights,
                &activations,
                &opts,
                out_path.as_deref(),
                histogram.as_deref(),
                no_meta,
                out,
            )
        }
        Command::Dot {
            a,
            b,
            a_format,
            b_format,
            scale,
            bias,
            raw,
        } => cmd_dot(&a, &b, &a_format, &b_format, scale, bias, raw, out),
        Command::Synth {
            layers,
            seed,
            out_dir,
            out_features,
            in_features,
            batch,
        } => {
            let shape = LayerShape {
                out_features,
                in_features,
                batch,
            };
            cmd_synth(layers, seed, shape, &out_dir, out)
        }
    }
}

#[derive(Serialize)]
struct FormatRow {
    name: String,
    exponent_bits: u8,
    mantissa_bits: u8,
    bias: i32,
    max_normal: f64,
    min_normal: f64,
    max_subnormal: f64,
    min_subnormal: f64,
    finite_values: usize,
    reserved_codes: u16,
}

fn format_rows() -> Vec<FormatRow> {
    let mut specs: Vec<FpFormatSpec> = [8u8, 6]
        .iter()
        .flat_map(|&b| builtin_formats(b).expect("builtin widths"))
        .filter_map(|f| match f {
            NumberSystem::Fp(s) => Some(s),
            NumberSystem::Int { .. } => None,
        })
        .collect();
    specs.extend([
        FpFormatSpec::E4M3_NIA,
        FpFormatSpec::E5M2_NIA,
        FpFormatSpec::E4M3_IEEE,
        FpFormatSpec::E5M2_IEEE,
    ]);
    specs
        .iter()
        .map(|s| FormatRow {
            name: s.name(),
            exponent_bits: s.exponent_bits(),
            mantissa_bits: s.mantissa_bits(),
            bias: s.bias(),
            max_normal: max_normal(s),
            min_normal: min_normal(s),
            max_subnormal: max_subnormal(s),
            min_subnormal: subnormal_step(s),
            finite_values: enumerate_values(s).len(),
            reserved_codes: s.reserved_code_count(),
        })
        .collect()
}

/// The built-in format table as aligned text or CSV.
pub fn formats_table(kind: TableFormat) -> String {
    let header = [
        "format",
        "e",
        "m",
        "bias",
        "max_normal",
        "min_normal",
        "max_subnormal",
        "min_subnormal",
        "values",
        "reserved",
    ];
    let rows: Vec<[String; 10]> = format_rows()
        .into_iter()
        .map(|r| {
            [
                r.name,
                r.exponent_bits.to_string(),
                r.mantissa_bits.to_string(),
                r.bias.to_string(),
                r.max_normal.to_string(),
                r.min_normal.to_string(),
                r.max_subnormal.to_string(),
                r.min_subnormal.to_string(),
                r.finite_values.to_string(),
                r.reserved_codes.to_string(),
            ]
        })
        .collect();
    let mut s = String::new();
    match kind {
        TableFormat::Csv => {
            s.push_str(&header.join(","));
            s.push('\n');
            for r in &rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
        }
        TableFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|i| {
                    rows.iter()
                        .map(|r| r[i].len())
                        .chain([header[i].len()])
                        .max()
                        .unwrap()
                })
                .collect();
            let mut line = |cells: Vec<&str>| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect();
                let _ = writeln!(s, "{}", padded.join("  ").trim_end());
            };
            line(header.to_vec());
            for r in &rows {
                line(r.iter().map(String::as_str).collect());
            }
        }
    }
    s
}

#[derive(Serialize)]
struct QuantizeReport {
    format: NumberSystem,
    scale: f64,
    clip_bound: f64,
    degenerate: bool,
    #[serde(flatten)]
    breakdown: ErrorBreakdown,
}

fn check_breakdown(b: &ErrorBreakdown) -> Result<(), CliError> {
    let sum = b.clip + b.round;
    if (b.total - sum).abs() > 1e-12 * b.total.max(sum) || b.round > b.resolution_bound {
        return Err(CliError::internal(format!(
            "error decomposition invariant violated: {b:?}"
        )));
    }
    Ok(())
}

fn cmd_quantize(
    input: &Path,
    format: &str,
    out_path: Option<&Path>,
    report: Option<&Path>,
    report_format: ReportFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let system: NumberSystem = format.parse().map_err(CliError::input)?;
    let t = read_tensor(input).map_err(CliError::input)?;
    let cfg = calibrate_minmax(&t, system);
    if cfg.is_degenerate() {
        eprintln!("warning: {} is all zeros; using scale 1", input.display());
    }
    let q = quantize_tensor(&t, &cfg).map_err(CliError::internal)?;
    let breakdown = error_breakdown(&t, &cfg);
    check_breakdown(&breakdown)?;
    if let Some(p) = out_path {
        write_tensor(p, &q.values).map_err(CliError::input)?;
    }
    let rep = QuantizeReport {
        format: system,
        scale: cfg.scale(),
        clip_bound: cfg.clip_bound(),
        degenerate: cfg.is_degenerate(),
        breakdown,
    };
    let text = match report_format {
        ReportFormat::Json => serde_json::to_string_pretty(&rep).expect("serializable") + "\n",
        ReportFormat::Csv => format!(
            "format,scale,clip_bound,degenerate,total,clip,round,count,resolution_bound\n{},{},{},{},{},{},{},{},{}\n",
            rep.format, rep.scale, rep.clip_bound, rep.degenerate, breakdown.total, breakdown.clip,
            breakdown.round, breakdown.count, breakdown.resolution_bound
        ),
    };
    if let Some(p) = report {
        std::fs::write(p, &text).map_err(|e| io_err(p, e))?;
    }
    out.write_all(text.as_bytes()).map_err(CliError::internal)
}

struct SearchArgs {
    policy: MixPolicy,
    criterion: Criterion,
    bits: u8,
    candidates: Option<String>,
    seed: u64,
    calib_samples: usize,
}

fn layer_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_search(
    weights: &[PathBuf],
    activations: &[PathBuf],
    opts: &SearchArgs,
    out_path: Option<&Path>,
    histogram: Option<&Path>,
    no_meta: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if weights.len() != activations.len() {
        return Err(CliError::input(format!(
            "{} weight files but {} activation files",
            weights.len(),
            activations.len()
        )));
    }
    let mut space = SearchSpace::from_policy(opts.policy, opts.bits).map_err(CliError::input)?;
    if let Some(list) = &opts.candidates {
        let cands = list
            .split(',')
            .map(str::parse::<NumberSystem>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::input)?;
        space = space.with_candidates(cands).map_err(CliError::input)?;
    }
    let layers = weights
        .iter()
        .zip(activations)
        .enumerate()
        .map(|(i, (w, x))| {
            let w_t = read_tensor(w).map_err(CliError::input)?;
            let x_t = read_tensor(x).map_err(CliError::input)?;
            let x_t =
                sample_calibration_rows(&x_t, opts.calib_samples, opts.seed.wrapping_add(i as u64))
                    .map_err(CliError::input)?;
            Ok(Layer::new(layer_name(w), w_t, x_t))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = run_search(&layers, &space, opts.criterion).map_err(CliError::input)?;
    let counted: usize = report
        .histogram
        .iter()
        .map(|r| r.weight_count + r.input_count)
        .sum();
    if counted != 2 * layers.len() {
        return Err(CliError::internal("histogram does not cover every layer"));
    }
    let text = report.to_json(!no_meta) + "\n";
    if let Some(p) = histogram {
        std::fs::write(p, report.histogram_csv()).map_err(|e| io_err(p, e))?;
    }
    match out_path {
        Some(p) => std::fs::write(p, &text).map_err(|e| io_err(p, e)),
        None => out.write_all(text.as_bytes()).map_err(CliError::internal),
    }
}

fn parse_raw(s: &str) -> Result<u8, CliError> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x") {
        Some(hex) => u8::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| CliError::input(format!("bad raw code {s:?}")))
}

fn operand_codes(list: &str, format: &str, raw: bool) -> Result<Vec<Code>, CliError> {
    let source: OperandFormat = format.parse().map_err(CliError::input)?;
    let system = match source {
        OperandFormat::Int8 => NumberSystem::INT8,
        OperandFormat::Minifloat(spec) => NumberSystem::Fp(spec),
        other => {
            return Err(CliError {
                code: EXIT_UNSUPPORTED,
                message: format!("{other} operands have no dot-product path in this model"),
                body: Some(
                    json!({"error": "unsupported_source_format", "format": other.to_string()}),
                ),
            })
        }
    };
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            if raw {
                return Code::new(parse_raw(item)?, system).map_err(CliError::input);
            }
            match system {
                NumberSystem::Int { bits } => {
                    let q: i32 = item
                        .trim()
                        .parse()
                        .map_err(|_| CliError::input(format!("bad integer {item:?}")))?;
                    Code::from_int(q, bits).map_err(CliError::input)
                }
                NumberSystem::Fp(spec) => {
                    let x: f64 = item
                        .trim()
                        .parse()
                        .map_err(|_| CliError::input(format!("bad number {item:?}")))?;
                    fp_encode(x, &spec).map_err(CliError::input)
                }
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_dot(
    a: &str,
    b: &str,
    a_format: &str,
    b_format: &str,
    scale: f32,
    bias: f64,
    raw: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let a = operand_codes(a, a_format, raw)?;
    let b = operand_codes(b, b_format, raw)?;
    match datapath::dot(&a, &b, scale, bias) {
        Ok(output) => {
            let text = serde_json::to_string_pretty(&output).expect("serializable") + "\n";
            out.write_all(text.as_bytes()).map_err(CliError::internal)
        }
        Err(DatapathError::UnsupportedMixedOperands) => Err(CliError {
            code: EXIT_UNSUPPORTED,
            message: DatapathError::UnsupportedMixedOperands.to_string(),
            body: Some(json!({
                "error": "unsupported_mixed_operands",
                "a_format": a_format,
                "b_format": b_format,
            })),
        }),
        Err(e) => Err(CliError::input(e)),
    }
}

fn cmd_synth(
    count: usize,
    seed: u64,
    shape: LayerShape,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (w_dir, x_dir) = (dir.join("weights"), dir.join("activations"));
    for d in [&w_dir, &x_dir] {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    for layer in layer_suite(count, shape, seed) {
        let w = w_dir.join(format!("{}.fxqt", layer.name));
        let x = x_dir.join(format!("{}.fxqt", layer.name));
        write_tensor(&w, &layer.weights).map_err(CliError::input)?;
        write_tensor(&x, &layer.inputs).map_err(CliError::input)?;
        writeln!(out, "{} {}", w.display(), x.display()).map_err(CliError::internal)?;
    }
    Ok(())
}

/// Entry point used by the binary: parses arguments, honours
/// `FLEXQUANT_THREADS`, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return EXIT_INPUT;
            }
        },
        Err(_) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INTERNAL;
        }
    };
    let stdout = std::io::stdout();
    let result = pool.install(|| run(cli, &mut stdout.lock()));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            if let Some(body) = &e.body {
                println!("{body}");
            }
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
