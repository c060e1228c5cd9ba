//! Command-line front end: `simulate`, `sweep`, `codebook`, `verify`, `toy`.

mod config;
mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::json;

use vlq_core::battery::{run_battery, BatteryConfig};
use vlq_core::codebook::{write_codebook_csv, CodebookStream};
use vlq_core::quantizer::{kraft_sum, LengthScheme};
use vlq_core::simulate::{sweep, Mode, SimConfig, SimRecord};
use vlq_core::toy_sources::{flq_min_distortion, vlq_rate_bracket};
use vlq_core::SystemParams64;

use config::{parse_grid, ConfigFile};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "vlq", version, about = "Limited-feedback beamforming outage simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one Monte Carlo configuration
    Simulate(SimArgs),
    /// Run a power sweep, one row per grid point
    Sweep(SimArgs),
    /// Export the layered direction codebook as CSV
    Codebook(CodebookArgs),
    /// Run the invariant battery and emit a JSON report
    Verify(VerifyArgs),
    /// Tabulate the infinite-alphabet source: rate brackets, Kraft sums,
    /// fixed-length distortions
    Toy(ToyArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Transmit antennas (flag or config file)
    #[arg(long)]
    t: Option<usize>,
    /// Target rate in bits per channel use [default: 1]
    #[arg(long)]
    rho: Option<f64>,
    /// Single power value (simulate)
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated power grid (sweep)
    #[arg(long, value_name = "P1,P2,…")]
    p_grid: Option<String>,
    /// Deepest codebook layer to scan [default: 4]
    #[arg(long)]
    ell_max: Option<usize>,
    /// Channel draws per configuration [default: 100000]
    #[arg(long)]
    samples: Option<u64>,
    /// Master seed; sample i draws from substream (seed, i) [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker partitions; does not affect results [default: all cores]
    #[arg(long)]
    shards: Option<usize>,
    /// vlq, flq(N), precoding, open, or full [default: vlq]
    #[arg(long)]
    mode: Option<String>,
    /// Re-derive encoding-cell membership per sample (slow, debug)
    #[arg(long)]
    verify_cells: bool,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json [default: csv]
    #[arg(long)]
    format: Option<String>,
    /// Flat key = value file providing defaults for the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CodebookArgs {
    /// Transmit antennas
    #[arg(long)]
    t: Option<usize>,
    /// Deepest layer to export [default: 2]
    #[arg(long, default_value_t = 2)]
    ell_max: usize,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Transmit antennas
    #[arg(long)]
    t: Option<usize>,
    /// Samples per statistical check [default: 100000]
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Master seed [default: 7]
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Report path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    /// Truncation point for the rate bracket [default: 1000000]
    #[arg(long, default_value_t = 1_000_000)]
    n_trunc: u64,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Simulate(args) => run_sim(args, false),
        Cmd::Sweep(args) => run_sim(args, true),
        Cmd::Codebook(args) => run_codebook(args),
        Cmd::Verify(args) => run_verify(args),
        Cmd::Toy(args) => run_toy(args),
    };
    match outcome {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn missing_t() -> ! {
    Cli::command()
        .error(
            ErrorKind::MissingRequiredArgument,
            "--t is required (set it on the command line or in --config)",
        )
        .exit()
}

/// Effective settings for simulate/sweep after merging flags over config.
struct Effective {
    t: usize,
    rho: f64,
    p_values: Vec<f64>,
    ell_max: usize,
    samples: u64,
    seed: u64,
    shards: usize,
    mode: Mode,
    verify_cells: bool,
    format: OutputFormat,
}

#[derive(Clone, Copy, PartialEq)]
enum OutputFormat {
    Csv,
    Json,
}

fn merge_effective(args: &SimArgs, sweep_mode: bool) -> Result<Effective, String> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };
    let t = match args.t.or(file.get::<usize>("t")?) {
        Some(t) => t,
        None => missing_t(),
    };
    let rho = args.rho.or(file.get::<f64>("rho")?).unwrap_or(1.0);
    let p_single = args.p.or(file.get::<f64>("p")?);
    let p_grid_raw = args
        .p_grid
        .clone()
        .or(file.get_raw("p-grid").map(str::to_string));
    let p_values = match (p_single, p_grid_raw) {
        (Some(_), Some(_)) => return Err("--p and --p-grid are mutually exclusive".into()),
        (Some(p), None) => vec![p],
        (None, Some(raw)) => parse_grid(&raw)?,
        (None, None) => return Err("a power value is required (--p or --p-grid)".into()),
    };
    if !sweep_mode && p_values.len() != 1 {
        return Err("simulate takes exactly one power value; use sweep for grids".into());
    }
    let mode: Mode = args
        .mode
        .clone()
        .or(file.get_raw("mode").map(str::to_string))
        .unwrap_or_else(|| "vlq".into())
        .parse()
        .map_err(|e| format!("{e}"))?;
    let format = match args
        .format
        .clone()
        .or(file.get_raw("format").map(str::to_string))
        .unwrap_or_else(|| "csv".into())
        .as_str()
    {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => return Err(format!("unknown format {other:?} (expected csv or json)")),
    };
    Ok(Effective {
        t,
        rho,
        p_values,
        ell_max: args.ell_max.or(file.get::<usize>("ell-max")?).unwrap_or(4),
        samples: args.samples.or(file.get::<u64>("samples")?).unwrap_or(100_000),
        seed: args.seed.or(file.get::<u64>("seed")?).unwrap_or(0),
        shards: args
            .shards
            .or(file.get::<usize>("shards")?)
            .unwrap_or_else(default_shards),
        mode,
        verify_cells: args.verify_cells || file.get::<bool>("verify-cells")?.unwrap_or(false),
        format,
    })
}

fn default_shards() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run_sim(args: SimArgs, sweep_mode: bool) -> Result<ExitCode, String> {
    let eff = merge_effective(&args, sweep_mode)?;
    let configs: Vec<SimConfig> = eff
        .p_values
        .iter()
        .map(|&p| {
            Ok(SimConfig {
                params: SystemParams64::new(eff.t, eff.rho, p).map_err(|e| e.to_string())?,
                ell_max: eff.ell_max,
                n_samples: eff.samples,
                seed: eff.seed,
                shards: eff.shards,
                mode: eff.mode,
                verify_cells: eff.verify_cells,
            })
        })
        .collect::<Result<_, String>>()?;

    let mut records = Vec::new();
    for (config, outcome) in sweep(&configs) {
        let result = outcome.map_err(|e| format!("P={}: {e}", config.params.power()))?;
        records.push(SimRecord::new(&config, &result));
    }

    let body = match eff.format {
        OutputFormat::Csv => vlq_core::simulate::to_csv(&records),
        OutputFormat::Json => {
            let mut s = vlq_core::simulate::to_json(&records).map_err(|e| e.to_string())?;
            s.push('\n');
            s
        }
    };
    let echo = json!({
        "t": eff.t,
        "rho": eff.rho,
        "p_values": eff.p_values,
        "ell_max": eff.ell_max,
        "samples": eff.samples,
        "seed": eff.seed,
        "shards": eff.shards,
        "mode": eff.mode.to_string(),
        "verify_cells": eff.verify_cells,
        "format": if eff.format == OutputFormat::Csv { "csv" } else { "json" },
    });
    let command = if sweep_mode { "sweep" } else { "simulate" };
    emit(&body, args.out.as_deref(), || {
        RunManifest::new(command, Some(eff.seed), echo.clone())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn run_codebook(args: CodebookArgs) -> Result<ExitCode, String> {
    let Some(t) = args.t else { missing_t() };
    let stream = CodebookStream::new(t, args.ell_max).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_codebook_csv(&stream, &mut buf).map_err(|e| e.to_string())?;
    let body = String::from_utf8(buf).expect("csv is utf8");
    let echo = json!({ "t": t, "ell_max": args.ell_max });
    emit(&body, args.out.as_deref(), || RunManifest::new("codebook", None, echo.clone()))?;
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let Some(t) = args.t else { missing_t() };
    let report = run_battery(&BatteryConfig { t, samples: args.samples, seed: args.seed })
        .map_err(|e| e.to_string())?;
    let mut body = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    body.push('\n');
    let echo = json!({ "t": t, "samples": args.samples, "seed": args.seed });
    emit(&body, args.out.as_deref(), || {
        RunManifest::new("verify", Some(args.seed), echo.clone())
    })?;
    for check in &report.checks {
        eprintln!(
            "{} {} (margin {:.3e})",
            if check.pass { "pass" } else { "FAIL" },
            check.name,
            check.margin
        );
    }
    Ok(if report.all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run_toy(args: ToyArgs) -> Result<ExitCode, String> {
    let mut body = String::from("quantity,n,lower,upper\n");
    for &n in &[1u64, 10, 100, 10_000, 1_000_000] {
        let (partial, tail) = kraft_sum::<f64>(LengthScheme::PrefixFree, n).map_err(|e| e.to_string())?;
        body.push_str(&format!("kraft_prefix_free,{n},{partial},{}\n", partial + tail));
    }
    for &n in &[100u64, 1_000, 10_000, 100_000] {
        if n >= args.n_trunc {
            continue;
        }
        let (lo, hi) = vlq_rate_bracket::<f64>(n).map_err(|e| e.to_string())?;
        body.push_str(&format!("vlq_rate,{n},{lo},{hi}\n"));
    }
    let (lo, hi) = vlq_rate_bracket::<f64>(args.n_trunc).map_err(|e| e.to_string())?;
    body.push_str(&format!("vlq_rate,{},{lo},{hi}\n", args.n_trunc));
    for &n in &[1u64, 2, 5, 10, 100, 1_000, 10_000, 100_000, 1_000_000] {
        let d = flq_min_distortion::<f64>(n).map_err(|e| e.to_string())?;
        body.push_str(&format!("flq_distortion,{n},{d},{d}\n"));
    }
    let echo = json!({ "n_trunc": args.n_trunc });
    emit(&body, args.out.as_deref(), || RunManifest::new("toy", None, echo.clone()))?;
    Ok(ExitCode::SUCCESS)
}

fn emit(
    body: &str,
    out: Option<&Path>,
    manifest: impl Fn() -> RunManifest,
) -> Result<(), String> {
    match out {
        None => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| format!("stdout write failed: {e}"))?;
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            manifest().write_for(path)
        }
    }
}
