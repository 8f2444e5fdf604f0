use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mtlab::flow::{lemma4_check, smooth_path_state, write_flow_csv};
use mtlab::harness::families::generate;
use mtlab::harness::fit::fit_constants;
use mtlab::harness::plots::emit_plots;
use mtlab::harness::verify::standard_family;
use mtlab::harness::{
    run_sweep, verify_suite, FamilyKind, FamilySpec, SweepConfig, SweepReport, VerificationConstants,
    VerifyConfig,
};
use mtlab::path::{chebyshev_t_grid, trace_path, PathConfig, PathTrace};
use mtlab::sphere::{FieldRecord, PotentialField, SphereGrid};
use mtlab::{Error, Result};

#[derive(Parser)]
#[command(name = "mtlab", version, about = "Moser-Trudinger experiments on the round 2-sphere")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "MTLAB_OUT")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a family sweep and write rows.csv, flow_samples.csv, report.json.
    Sweep(SweepArgs),
    /// Trace the continuity path of a potential.
    Path(PathArgs),
    /// Smooth one path state with the flow and export the flow checks.
    Flow(FlowArgs),
    /// Run the verification suite and print a JSON verdict.
    Verify,
    /// Envelope scatter CSV and gnuplot script from a sweep report.
    Plots(PlotsArgs),
    /// Write one family row as a field record.
    Potential(PotentialArgs),
    /// Refit the empirical constants on the standard family.
    FitConstants(FitArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "even_legendre")]
    family: FamilyKind,
    #[arg(long, default_value_t = 200)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    grid: Option<usize>,
    /// J target range for the even and bump families.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    target_j: Option<Vec<f64>>,
    /// Dilation factors for the dilation family.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    dilations: Vec<f64>,
    /// Functionals only: no path traces or flows.
    #[arg(long)]
    no_certificates: bool,
}

#[derive(Args)]
struct PathArgs {
    /// Field record (JSON).
    #[arg(long)]
    phi: PathBuf,
    #[arg(long, default_value_t = 65)]
    tgrid: usize,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long)]
    phi: PathBuf,
    /// Path parameter; snapped to the nearest traced state.
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 65)]
    tgrid: usize,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct PlotsArgs {
    /// Sweep report (report.json).
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct PotentialArgs {
    #[arg(long, default_value = "even_legendre")]
    family: FamilyKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    row: usize,
    #[arg(long, default_value_t = 128)]
    grid: usize,
    /// Target J, or the dilation factor for the dilation family.
    #[arg(long, default_value_t = 0.1)]
    value: f64,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, default_value_t = 40)]
    size: usize,
}

/// Contents of `--config`; every section is optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct Config {
    sweep: SweepConfig,
    verify: VerifyConfig,
    out: Option<PathBuf>,
    constants: Option<PathBuf>,
}

struct Context {
    config: Config,
    out: PathBuf,
    constants: VerificationConstants,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let config: Config = match &cli.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => Config::default(),
        };
        let out = cli
            .out
            .clone()
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("mtlab-out"));
        let constants = match &config.constants {
            Some(path) => VerificationConstants::load(path)?,
            None => VerificationConstants::frozen(),
        };
        Ok(Context { config, out, constants })
    }
}

fn read_potential(path: &Path, grid: Option<usize>) -> Result<(PotentialField, SphereGrid)> {
    let record: FieldRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let grid = SphereGrid::new(grid.unwrap_or(record.n))?;
    Ok((PotentialField::from_record(&grid, &record)?, grid))
}

fn trace(ctx: &Context, phi: &PotentialField, grid: &SphereGrid, tgrid: usize) -> Result<PathTrace> {
    let mut config = PathConfig::new(chebyshev_t_grid(tgrid), ctx.constants.holder()?);
    config.solver = ctx.config.sweep.solver;
    Ok(trace_path(phi, grid, &config)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn sweep(ctx: &Context, args: &SweepArgs) -> Result<bool> {
    let mut config = ctx.config.sweep.clone();
    if let Some(n) = args.grid {
        config.grid = n;
    }
    if args.no_certificates {
        config.certificates = false;
    }
    let range = |default: (f64, f64)| match &args.target_j {
        Some(v) => (v[0], v[1]),
        None => default,
    };
    let spec = match args.family {
        FamilyKind::EvenLegendre => FamilySpec::even_legendre(args.seed, args.size, range((0.1, 10.0))),
        FamilyKind::Bump => FamilySpec::bump(args.seed, args.size, args.target_j.as_ref().map(|_| range((0.0, 0.0)))),
        FamilyKind::Mobius => FamilySpec::mobius(args.dilations.clone()),
    };
    let report = run_sweep(&spec, &config, &ctx.constants)?;
    report.write_dir(&ctx.out)?;
    eprintln!(
        "{} rows, {} errors; written to {}",
        report.rows.len(),
        report.error_count,
        ctx.out.display()
    );
    for (name, ok) in &report.flags {
        eprintln!("  {name}: {}", if *ok { "pass" } else { "FAIL" });
    }
    report.ensure_ok()?;
    Ok(report.flags.iter().all(|(_, ok)| *ok))
}

fn path(ctx: &Context, args: &PathArgs) -> Result<bool> {
    let (phi, grid) = read_potential(&args.phi, args.grid)?;
    let trace = trace(ctx, &phi, &grid, args.tgrid)?;
    std::fs::create_dir_all(&ctx.out)?;
    let file = ctx.out.join("path.csv");
    trace.write_csv(std::fs::File::create(&file)?)?;
    eprintln!(
        "{} states, max residual {:e}, t0 {:?}; written to {}",
        trace.states.len(),
        trace.max_residual(),
        trace.t0,
        file.display()
    );
    Ok(true)
}

fn flow(ctx: &Context, args: &FlowArgs) -> Result<bool> {
    if !(0.0..1.0).contains(&args.t) {
        return Err(Error::Config(format!("t = {} must lie in [0, 1)", args.t)));
    }
    let (phi, grid) = read_potential(&args.phi, args.grid)?;
    let trace = trace(ctx, &phi, &grid, args.tgrid)?;
    let state = trace
        .states
        .iter()
        .filter(|s| s.t < 1.0)
        .min_by(|a, b| (a.t - args.t).abs().total_cmp(&(b.t - args.t).abs()))
        .ok_or_else(|| Error::Config("trace has no state below t = 1".into()))?;
    let (smoothed, flow) = smooth_path_state(&phi, state, trace.phi1(), &grid, &ctx.config.sweep.flow)?;
    let rows = lemma4_check(&flow, &grid)?;
    std::fs::create_dir_all(&ctx.out)?;
    write_flow_csv(state.t, &flow, &rows, std::fs::File::create(ctx.out.join("flow.csv"))?)?;
    write_json(&ctx.out.join(format!("smoothed_t{:.6}.json", state.t)), &smoothed.summary())?;
    eprintln!("flow at t = {}: {} steps; written to {}", state.t, flow.s.len() - 1, ctx.out.display());
    Ok(true)
}

fn verify(ctx: &Context) -> Result<bool> {
    let mut config = ctx.config.verify.clone();
    if config.constants.is_none() {
        config.constants = ctx.config.constants.clone();
    }
    let verdict = verify_suite(&config)?;
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    if let Some(f) = &verdict.first_failure {
        eprintln!("first failure: {f}");
    }
    Ok(verdict.passed)
}

fn plots(ctx: &Context, args: &PlotsArgs) -> Result<bool> {
    let report = SweepReport::load(&args.input)?;
    for file in emit_plots(&report, &ctx.out)? {
        eprintln!("wrote {}", file.display());
    }
    Ok(true)
}

fn potential(ctx: &Context, args: &PotentialArgs) -> Result<bool> {
    let grid = SphereGrid::new(args.grid)?;
    let mut spec = match args.family {
        FamilyKind::EvenLegendre => FamilySpec::even_legendre(args.seed, args.row + 1, (args.value, args.value)),
        FamilyKind::Bump => FamilySpec::bump(args.seed, args.row + 1, Some((args.value, args.value))),
        FamilyKind::Mobius => FamilySpec::mobius(vec![args.value; args.row + 1]),
    };
    spec.size = args.row + 1;
    let phi = generate(&spec, &grid)?.swap_remove(args.row)?;
    std::fs::create_dir_all(&ctx.out)?;
    let file = ctx.out.join(format!("{}_{}_{}.json", args.family, args.seed, args.row));
    write_json(&file, &phi.to_record(&grid))?;
    eprintln!("wrote {}", file.display());
    Ok(true)
}

fn fit(ctx: &Context, args: &FitArgs) -> Result<bool> {
    let base = &ctx.constants;
    let config = SweepConfig { grid: base.grid, ..ctx.config.sweep.clone() };
    let even = run_sweep(&standard_family(args.size), &config, base)?;
    even.ensure_ok()?;
    let mobius = run_sweep(
        &FamilySpec::mobius(vec![1.0, 2.0, 4.0, 8.0]),
        &SweepConfig { certificates: false, ..config },
        base,
    )?;
    // C₁ depends on t₀, which depends on the fitted D: refit once on the
    // certificates recomputed with the first fit
    let first = fit_constants(&even, Some(&mobius), base)?;
    let even = run_sweep(&standard_family(args.size), &SweepConfig { grid: base.grid, ..ctx.config.sweep.clone() }, &first)?;
    let fitted = fit_constants(&even, Some(&mobius), &first)?;
    std::fs::create_dir_all(&ctx.out)?;
    let file = ctx.out.join("constants.json");
    fitted.save(&file)?;
    eprintln!("wrote {}", file.display());
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Path(a) => path(&ctx, a),
        Command::Flow(a) => flow(&ctx, a),
        Command::Verify => verify(&ctx),
        Command::Plots(a) => plots(&ctx, a),
        Command::Potential(a) => potential(&ctx, a),
        Command::FitConstants(a) => fit(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
