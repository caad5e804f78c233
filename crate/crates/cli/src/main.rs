use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drmcost_core::scenario::{OutputFormat, RenderedFile};
use drmcost_core::{
    execute_scenario, render_report, AlgorithmId, ArchVariant, CostModel, OpTrace, Phase, Scenario, ScenarioRun,
    DEFAULT_CLOCK_HZ,
};
use std::fs;
use std::io::Write as _;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;
use std::time::Instant;

/// Runs DRM content lifecycles and prices their cryptographic work in
/// cycles.
#[derive(Parser)]
#[command(name = "drmcost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute scenarios end to end and report modeled cost.
    Run(RunArgs),
    /// Execute one scenario and write its operation trace.
    Trace(TraceArgs),
    /// Price an operation trace read from a file.
    Price(PriceArgs),
    /// Print the rate tables as TOML.
    Profile,
}

#[derive(Args)]
struct Pricing {
    /// sw, mixed, hw or all.
    #[arg(long, default_value = "all")]
    variant: String,
    #[arg(long, default_value_t = DEFAULT_CLOCK_HZ)]
    clock_hz: u64,
    /// TOML file overriding the software and/or hardware rate tables.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// table, csv, json or plotdata.
    #[arg(long, default_value = "table")]
    format: String,
    /// Directory for report files. Reports go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// music_player, ringtone, all or custom:SIZE:N. Repeatable.
    #[arg(long, default_value = "all")]
    scenario: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Restrict the rights object to N plays instead of unlimited.
    #[arg(long)]
    limit_plays: Option<NonZeroU32>,
    #[command(flatten)]
    pricing: Pricing,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    limit_plays: Option<NonZeroU32>,
    /// Output file. Written to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long)]
    trace: PathBuf,
    #[command(flatten)]
    pricing: Pricing,
}

fn parse_scenarios(names: &[String], limit: Option<NonZeroU32>) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(Scenario::builtins());
        } else {
            out.push(name.parse()?);
        }
    }
    if let Some(n) = limit {
        out = out.into_iter().map(|s| s.with_play_limit(n)).collect();
    }
    Ok(out)
}

fn parse_variants(name: &str) -> Result<Vec<ArchVariant>> {
    if name == "all" {
        Ok(ArchVariant::presets().to_vec())
    } else {
        Ok(vec![name.parse()?])
    }
}

impl Pricing {
    fn model(&self) -> Result<CostModel> {
        match &self.profile {
            None => Ok(CostModel::default()),
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                CostModel::from_toml(&text).with_context(|| format!("loading profile {}", path.display()))
            }
        }
    }

    fn emit(&self, runs: &[ScenarioRun]) -> Result<()> {
        let format: OutputFormat = self.format.parse()?;
        let files = render_report(runs, format)?;
        match &self.out {
            Some(dir) => write_files(dir, &files),
            None => {
                let mut stdout = std::io::stdout().lock();
                for f in &files {
                    if files.len() > 1 {
                        writeln!(stdout, "# {}", f.name)?;
                    }
                    stdout.write_all(f.contents.as_bytes())?;
                }
                Ok(())
            }
        }
    }
}

fn write_files(dir: &Path, files: &[RenderedFile]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for f in files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.contents).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let scenarios = parse_scenarios(&args.scenario, args.limit_plays)?;
    let variants = parse_variants(&args.pricing.variant)?;
    let model = args.pricing.model()?;
    let started = Instant::now();

    // Each scenario gets its own actors and trace; pricing is cheap and
    // shares the trace across variants.
    let executed = thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|sc| s.spawn(move || execute_scenario(sc, args.seed).with_context(|| format!("scenario {sc}"))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect::<Result<Vec<_>>>()
    })?;

    let mut runs = Vec::new();
    for exec in &executed {
        if !exec.round_trip_verified {
            bail!("scenario {}: content round trip not verified", exec.scenario);
        }
        for v in &variants {
            runs.push(exec.price(&model, v, args.pricing.clock_hz)?);
        }
    }
    eprintln!("host wall time: {:.3} s", started.elapsed().as_secs_f64());
    args.pricing.emit(&runs)
}

fn trace(args: TraceArgs) -> Result<()> {
    let scenario = parse_scenarios(std::slice::from_ref(&args.scenario), args.limit_plays)?.remove(0);
    let started = Instant::now();
    let exec = execute_scenario(&scenario, args.seed).with_context(|| format!("scenario {scenario}"))?;
    eprintln!("host wall time: {:.3} s", started.elapsed().as_secs_f64());
    let text = exec.trace.to_text();
    match args.out {
        Some(path) => {
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} events to {}", exec.trace.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn price(args: PriceArgs) -> Result<()> {
    let path = &args.trace;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = OpTrace::from_text(&text).with_context(|| format!("parsing {}", path.display()))?;
    if trace.is_empty() {
        bail!("{}: trace has no events", path.display());
    }
    let model = args.pricing.model()?;
    let accesses =
        trace.phase_events(Phase::Consumption).filter(|e| e.algorithm() == AlgorithmId::HmacSha1).count() as u32;
    let name = path.file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
    let scenario = Scenario {
        name,
        content_size_bytes: 0,
        access_count: NonZeroU32::new(accesses.max(1)).expect("nonzero"),
        permissions: drmcost_core::Permissions::unlimited(),
    };
    let mut runs = Vec::new();
    for v in parse_variants(&args.pricing.variant)? {
        runs.push(ScenarioRun {
            scenario: scenario.clone(),
            variant: v.name().to_string(),
            clock_hz: args.pricing.clock_hz,
            seed: 0,
            report: model.estimate(&trace, &v, args.pricing.clock_hz)?,
            trace: trace.clone(),
            round_trip_verified: false,
        });
    }
    args.pricing.emit(&runs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Trace(a) => trace(a),
        Command::Price(a) => price(a),
        Command::Profile => {
            print!("{}", CostModel::default().to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
