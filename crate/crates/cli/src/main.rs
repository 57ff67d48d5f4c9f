use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use awn_core::adversary::{run_attack, AttackError, AttackScript};
use awn_core::bench::{
    check_ordering, emit_report, load_config, preset, preset_names, preset_source, run_campaign, summarize,
    transcripts_json_lines, BenchError, ReportFormat, ScenarioConfig,
};
use awn_core::goals::{goal_report, render_static_markdown, static_matrix, Column, GoalReport};
use awn_core::netsim::CryptoCostModel;
use awn_core::ProtocolKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "awnbench", version, about = "Secure-channel benchmarks, attacks and goal reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark campaign and emit a report.
    Run(RunArgs),
    /// Print the goal comparison matrix or one protocol's goal report.
    Goals(GoalsArgs),
    /// Run one attack script against one protocol.
    Attack(AttackArgs),
    /// Time the crypto primitives on this machine.
    Calibrate(CalibrateArgs),
    /// List bundled presets or print one.
    Presets(PresetsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Md,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dump_transcript: Option<PathBuf>,
    #[arg(long)]
    allow_insecure: bool,
    /// Exit with status 3 unless the family ordering holds.
    #[arg(long)]
    check_ordering: bool,
}

#[derive(Args)]
struct GoalsArgs {
    /// Column id (wep, wpa-psk, ipsec, symmetric-tkdf, asymmetric-tkdf, ssh, ssl) or protocol name.
    #[arg(long, required_unless_present_any = ["all", "check"])]
    protocol: Option<String>,
    /// The full claimed matrix.
    #[arg(long)]
    all: bool,
    /// Evaluate every column; exit with status 3 on any hard contradiction.
    #[arg(long)]
    check: bool,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    #[arg(long, value_delimiter = ',', default_values_t = [1u64])]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    protocol: ProtocolKind,
    #[arg(long)]
    script: AttackScript,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    dump_evidence: Option<PathBuf>,
    #[arg(long)]
    allow_insecure: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 200)]
    iterations: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PresetsArgs {
    #[arg(long)]
    show: Option<String>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Check(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io { .. } | BenchError::Report(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn write_out(out: &mut dyn Write, path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => out.write_all(bytes).map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn run(args: RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg: ScenarioConfig = match (&args.config, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(CliError::Validation("one of --config or --preset is required".into())),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let errors = cfg.violations();
    if !errors.is_empty() {
        return Err(BenchError::Validation(errors).into());
    }
    cfg.check_insecure(args.allow_insecure)?;
    let runs = run_campaign(&cfg);
    let records: Vec<_> = runs.iter().map(|r| r.record.clone()).collect();
    let format = match args.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
        Format::Md => ReportFormat::Md,
    };
    write_out(out, args.out.as_deref(), &emit_report(&records, format)?)?;
    if let Some(p) = &args.dump_transcript {
        write_out(out, Some(p), transcripts_json_lines(&runs).as_bytes())?;
    }
    if args.check_ordering {
        let check = check_ordering(&summarize(&records))?;
        if !check.pass {
            return Err(CliError::Check(format!("ordering check failed: {}", check.broken.join("; "))));
        }
        eprintln!("ordering check passed");
    }
    Ok(())
}

fn goals(args: GoalsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.all {
        let m = static_matrix();
        let body = match args.format {
            Format::Json => {
                let rows: Vec<serde_json::Value> = awn_core::goals::Goal::ALL
                    .iter()
                    .map(|g| {
                        let cells: serde_json::Map<String, serde_json::Value> =
                            Column::ALL.iter().map(|c| (c.id().to_string(), m[g.index()][c.index()].as_str().into())).collect();
                        serde_json::json!({ "goal": g, "title": g.title(), "verdicts": cells })
                    })
                    .collect();
                json(&rows)?
            }
            _ => render_static_markdown(&m).into_bytes(),
        };
        return write_out(out, None, &body);
    }
    let columns: Vec<Column> = match &args.protocol {
        Some(p) => vec![Column::parse(p).ok_or_else(|| CliError::Validation(format!("unknown protocol column {p:?}")))?],
        None => Column::ALL.to_vec(),
    };
    let reports: Vec<GoalReport> =
        columns.iter().map(|&c| goal_report(c, &args.seeds)).collect::<Result<_, _>>().map_err(|e| CliError::Runtime(e.to_string()))?;
    let body = match args.format {
        Format::Json if reports.len() == 1 => json(&reports[0])?,
        Format::Json => json(&reports)?,
        _ => reports.iter().map(GoalReport::to_markdown).collect::<Vec<_>>().join("\n").into_bytes(),
    };
    write_out(out, None, &body)?;
    let conflicts: Vec<String> = reports
        .iter()
        .flat_map(|r| r.discrepancies.iter().map(move |d| format!("{} {}: claimed {}, observed {}", r.column.header(), d.goal, d.claimed, d.observed)))
        .collect();
    if args.check && !conflicts.is_empty() {
        return Err(CliError::Check(format!("hard contradictions: {}", conflicts.join("; "))));
    }
    Ok(())
}

fn attack(args: AttackArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !args.allow_insecure && !ProtocolKind::SECURE.contains(&args.protocol) {
        return Err(CliError::Validation(format!("{} is an insecure variant; pass --allow-insecure", args.protocol.name())));
    }
    let outcome = run_attack(args.protocol, &args.script, args.seed)?;
    writeln!(
        out,
        "{} vs {} (seed {}): {}",
        args.script,
        args.protocol.name(),
        args.seed,
        if outcome.success { "attack succeeded" } else { "attack failed" }
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(p) = &args.dump_evidence {
        write_out(out, Some(p), &json(&outcome)?)?;
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = CryptoCostModel::calibrate(args.iterations);
    write_out(out, args.out.as_deref(), &json(&model)?)
}

fn presets(args: PresetsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    match args.show {
        Some(name) => {
            let src = preset_source(&name).ok_or_else(|| CliError::Validation(format!("unknown preset {name:?}")))?;
            write_out(out, None, src.as_bytes())
        }
        None => {
            let list: String = preset_names().map(|n| format!("{n}\n")).collect();
            write_out(out, None, list.as_bytes())
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => run(a, out),
        Command::Goals(a) => goals(a, out),
        Command::Attack(a) => attack(a, out),
        Command::Calibrate(a) => calibrate(a, out),
        Command::Presets(a) => presets(a, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = dispatch(cli, &mut std::io::stdout().lock());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("awnbench: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests;
