use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ckstab_core::io::{canonical_to_json, load_model};
use ckstab_core::lmi::{validate_certificate, LmiMode, MultiplierStructure};
use ckstab_core::reproduce::{self, ReproduceOptions};
use ckstab_core::simulate::{skeleton_stability_scan, MethodReport, ScanVerdict};
use ckstab_core::{
    simulate_cksvar, simulate_skeleton, system_verdict, RegimeSystem, SpectralBound, Trajectory,
    VerdictOptions, VerdictStatus, Witness,
};

const SCHEMA: u32 = 1;
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "ckstab", version, about = "Stability bounds for censored and kinked SVARs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bounds and an ergodicity verdict. Exit 0 certified, 2 explosive, 3 inconclusive.
    Analyze(AnalyzeArgs),
    /// Simulate the stochastic model.
    Simulate(SimulateArgs),
    /// Iterate the deterministic skeleton.
    Skeleton(SkeletonArgs),
    /// Write the canonical form, with the transforms relating it to the input.
    Canonicalize(CanonicalizeArgs),
    /// Recompute a reference table as CSV.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Table1,
    Table2,
    Example3,
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "jsr,cjsr,rjsr", value_parser = parse_mode)]
    method: Vec<LmiMode>,
    #[arg(long, default_value_t = 2, value_parser = parse_degree)]
    degree: usize,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = parse_tol)]
    tol: f64,
    /// Multiplier shape for rjsr: full or block-diagonal.
    #[arg(long, default_value = "full", value_parser = parse_multipliers)]
    multipliers: MultiplierStructure,
    /// Also run a skeleton scan and sample-validate the certificates.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    horizon: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SkeletonArgs {
    #[arg(long)]
    model: PathBuf,
    /// Seeds the rotation of the scan grid.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    grid: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Comma-separated canonical state `(y, x)` at lags 1..k; with
    /// `--horizon` the path from it is written instead of the scan.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init: Option<Vec<f64>>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CanonicalizeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Rescale so that the canonical `y` equals the observed one.
    #[arg(long)]
    partially_observed: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    which: Table,
    #[arg(long, value_parser = parse_degree)]
    degree: Option<usize>,
    #[arg(long, default_value_t = 1e-4, value_parser = parse_tol)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

fn parse_mode(s: &str) -> Result<LmiMode, String> {
    s.parse().map_err(|e: ckstab_core::Error| e.to_string())
}

fn parse_multipliers(s: &str) -> Result<MultiplierStructure, String> {
    s.parse().map_err(|e: ckstab_core::Error| e.to_string())
}

fn parse_degree(s: &str) -> Result<usize, String> {
    match s {
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("degree must be 2 or 4, got `{s}`")),
    }
}

fn parse_tol(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("tolerance must be positive, got `{s}`"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Analyze(a) => analyze(a),
        Command::Simulate(a) => simulate(a).map(|_| 0),
        Command::Skeleton(a) => skeleton(a).map(|_| 0),
        Command::Canonicalize(a) => canonicalize(a).map(|_| 0),
        Command::Reproduce(a) => reproduce(a).map(|_| 0),
    }
}

fn emit(out: &Output, text: &str) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> anyhow::Result<ckstab_core::ModelFile> {
    Ok(load_model(path)?)
}

/// 0 certified, 2 explosive, 3 inconclusive.
fn exit_code(status: VerdictStatus) -> u8 {
    match status {
        VerdictStatus::ErgodicCertified => 0,
        VerdictStatus::ExplosiveEvidence => 2,
        VerdictStatus::Inconclusive => 3,
    }
}

fn sequence(sys: &RegimeSystem, b: &SpectralBound) -> Value {
    match &b.witness {
        Some(Witness::Sequence(s)) => json!(s.iter().map(|&i| sys.labels[i].as_str()).collect::<Vec<_>>()),
        Some(Witness::Certificate(id)) => json!(id),
        None => Value::Null,
    }
}

fn method_json(sys: &RegimeSystem, m: &MethodReport, depth: usize) -> anyhow::Result<Value> {
    let value = |b: &Option<SpectralBound>| b.as_ref().map(|b| b.value);
    let certificate = serde_json::to_value(&m.certificate)?;
    Ok(json!({
        "lower": value(&m.lower),
        "upper_norm": value(&m.upper_norm),
        "upper_certified": m.upper_certified.value,
        "depth": m.lower.as_ref().or(m.upper_norm.as_ref()).map(|b| b.depth_or_degree).unwrap_or(depth),
        "degree": m.certificate.degree,
        "truncated": m.lower.as_ref().is_some_and(|b| b.truncated)
            || m.upper_norm.as_ref().is_some_and(|b| b.truncated),
        "witness": {
            "lower": m.lower.as_ref().map(|b| sequence(sys, b)),
            "upper_norm": m.upper_norm.as_ref().map(|b| sequence(sys, b)),
            "certificate": certificate,
        },
    }))
}

fn analyze(a: AnalyzeArgs) -> anyhow::Result<u8> {
    let file = read(&a.model)?;
    let coherence = file.model.shift_threshold().check_coherence()?;
    if !coherence.coherent {
        bail!(
            "model is not coherent: det(Phi0+) = {:.6e}, det(Phi0-) = {:.6e}",
            coherence.det_plus,
            coherence.det_minus
        );
    }
    let cm = file.model.canonicalize(false)?;
    let sys = RegimeSystem::from_canonical(&cm);
    let opts = VerdictOptions {
        methods: a.method.clone(),
        degree: a.degree,
        depth: a.depth,
        tol: a.tol,
        multipliers: a.multipliers,
        scan: a.seed.map(|s| (2000, 200, 0.5, s)),
    };
    let verdict = system_verdict(&sys, &opts)?;
    let code = exit_code(verdict.status);

    let mut methods = serde_json::Map::new();
    for m in &verdict.methods {
        methods.insert(m.method.name().into(), method_json(&sys, m, a.depth)?);
    }
    let validation = match a.seed {
        Some(seed) => Some(
            verdict
                .methods
                .iter()
                .map(|m| {
                    let r = validate_certificate(&sys, &m.certificate, 10_000, seed)?;
                    Ok((m.method.name().to_string(), serde_json::to_value(r)?))
                })
                .collect::<anyhow::Result<serde_json::Map<_, _>>>()?,
        ),
        None => None,
    };
    let report = json!({
        "schema": SCHEMA,
        "model": a.model.display().to_string(),
        "coherence": coherence,
        "states": sys.labels,
        "methods": methods,
        "validation": validation,
        "verdict": {
            "status": verdict.status,
            "exit_code": code,
            "tol": a.tol,
            "evidence": verdict.evidence,
        },
    });
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => analyze_csv(&report)?,
    };
    emit(&a.output, &text)?;
    Ok(code)
}

fn analyze_csv(report: &Value) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "lower", "upper_norm", "upper_certified", "depth", "degree", "verdict"])?;
    let status = report["verdict"]["status"].as_str().unwrap_or_default();
    let cell = |v: &Value| match v {
        Value::Null => String::new(),
        v => v.to_string(),
    };
    for (name, m) in report["methods"].as_object().ok_or_else(|| anyhow!("no methods"))? {
        w.write_record([
            name.clone(),
            cell(&m["lower"]),
            cell(&m["upper_norm"]),
            cell(&m["upper_certified"]),
            cell(&m["depth"]),
            cell(&m["degree"]),
            status.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn trajectory_json(tr: &Trajectory) -> Value {
    json!({
        "schema": SCHEMA,
        "horizon": tr.horizon,
        "seed": tr.seed,
        "values": tr.values.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "regimes": tr.regimes.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        "sign_changes": tr.sign_changes(),
        "max_norm": tr.max_norm(),
    })
}

fn write_trajectory(tr: &Trajectory, format: Format, out: &Output) -> anyhow::Result<()> {
    let text = match format {
        Format::Csv => tr.to_csv(),
        Format::Json => serde_json::to_string_pretty(&trajectory_json(tr))? + "\n",
    };
    emit(out, &text)
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let file = read(&a.model)?;
    let tr = simulate_cksvar(&file.model, a.horizon, a.seed, None)?;
    write_trajectory(&tr, a.format, &a.output)
}

fn skeleton(a: SkeletonArgs) -> anyhow::Result<()> {
    let file = read(&a.model)?;
    let cm = file.model.canonicalize(false)?;
    if let (Some(init), Some(horizon)) = (&a.init, a.horizon) {
        let (k, p) = (cm.k, cm.p);
        if init.len() != k * p {
            bail!("--init: expected {} values (k = {k} lags of p = {p}), got {}", k * p, init.len());
        }
        let init = nalgebra::DMatrix::from_row_slice(k, p, init);
        let tr = simulate_skeleton(&cm, &init, horizon)?;
        return write_trajectory(&tr, a.format, &a.output);
    }
    if a.init.is_some() || a.horizon.is_some() {
        bail!("--init and --horizon go together");
    }
    let sys = RegimeSystem::from_canonical(&cm);
    let scan = skeleton_stability_scan(&sys, a.grid, a.steps, a.ratio, a.seed)?;
    let text = match a.format {
        Format::Json => {
            serde_json::to_string_pretty(&json!({"schema": SCHEMA, "seed": a.seed, "scan": scan}))? + "\n"
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["grid_size", "steps", "points", "contraction_ratio", "max_terminal_ratio", "verdict"])?;
            let verdict = match scan.verdict {
                ScanVerdict::Contracting => "contracting",
                ScanVerdict::NotContractingAtM => "not_contracting_at_M",
                ScanVerdict::Diverging => "diverging",
            };
            w.write_record([
                scan.grid_size.to_string(),
                scan.steps.to_string(),
                scan.points.to_string(),
                scan.contraction_ratio.to_string(),
                scan.max_terminal_ratio.to_string(),
                verdict.to_string(),
            ])?;
            String::from_utf8(w.into_inner()?)?
        }
    };
    emit(&a.output, &text)
}

fn canonicalize(a: CanonicalizeArgs) -> anyhow::Result<()> {
    let file = read(&a.model)?;
    let cm = file.model.canonicalize(a.partially_observed)?;
    emit(&a.output, &(serde_json::to_string_pretty(&canonical_to_json(&cm))? + "\n"))
}

fn reproduce(a: ReproduceArgs) -> anyhow::Result<()> {
    let opts = ReproduceOptions {
        degree: a.degree,
        tol: a.tol,
    };
    let text = match a.which {
        Table::Table1 => reproduce::table1_csv(&reproduce::table1(&opts)?),
        Table::Table2 => reproduce::table2_csv(&reproduce::table2(&opts)?),
        Table::Example3 => reproduce::example3_csv(&reproduce::example3(&opts)?),
    };
    emit(&a.output, &text)
}
