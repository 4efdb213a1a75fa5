use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use falsitav::covering::{generate_with, verify_coverage, CoveringArray, GenerateOptions};
use falsitav::experiment::{
    run_experiment, sign_test_less, write_artifacts, write_results_csv, ExperimentConfig, ExperimentReport,
    ExternalCommand,
};
use falsitav::falsify::{Mode, Strategy};
use falsitav::par::{with_jobs, Execution};
use falsitav::sim::perception::PerceptionParams;
use falsitav::sim::scenario::{collision_spec_text, urban_parameter_space, urban_scenario, ScenarioConfig};
use falsitav::sim::{box_avoidance_spec_text, signal_names, simulate, simulate_ode_example, OdeBoxes};
use falsitav::stl::{eval_boolean, format_robustness, parse, parse_formula, Monitor};
use falsitav::trace::{ParamValuation, ParameterSpace, Trace};

#[derive(Parser)]
#[command(name = "falsitav", version, about = "Requirement falsification for closed-loop driving simulations")]
struct Cli {
    /// Master seed (overrides the seed of an experiment config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robustness of a formula over a trace CSV.
    Monitor(MonitorArgs),
    /// Run the driving simulator once and write its trace.
    Simulate(SimulateArgs),
    /// Generate or verify a covering array.
    Cagen(CagenArgs),
    /// Search a parameter space with one or more strategies.
    Falsify(FalsifyArgs),
    /// Run a full campaign described by a JSON config.
    Experiment(ExperimentArgs),
    /// Robustness landscape of the box-avoidance requirement for the 2D ODE.
    OdeBench(OdeArgs),
}

#[derive(Args)]
struct MonitorArgs {
    /// Formula text, or a file containing it.
    #[arg(long)]
    formula: String,
    #[arg(long)]
    trace: PathBuf,
    /// Sample index to evaluate at.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Also print the Boolean verdict.
    #[arg(long)]
    boolean: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON; the built-in scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Perception parameters JSON.
    #[arg(long)]
    perception: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 30.0)]
    horizon: f64,
    /// Trace CSV destination; `-` writes to stdout.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Read a parameter valuation (JSON) from stdin and bind it to the scenario first.
    #[arg(long)]
    bind_stdin: bool,
    /// Parameter space JSON used with --bind-stdin.
    #[arg(long)]
    space: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct CagenArgs {
    #[command(subcommand)]
    verify: Option<CagenCommand>,
    #[arg(long, default_value_t = 2)]
    strength: usize,
    /// Comma-separated domain sizes.
    #[arg(long, value_delimiter = ',')]
    domains: Vec<usize>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    candidates: usize,
}

#[derive(Subcommand)]
enum CagenCommand {
    /// Check t-way coverage of an existing array.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        strength: usize,
        /// Domain sizes; inferred from the largest level in each column when omitted.
        #[arg(long, value_delimiter = ',')]
        domains: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Glancing,
    Falsify,
}

#[derive(Args)]
struct FalsifyArgs {
    /// Strategies to run (repeatable).
    #[arg(long = "strategy", value_parser = parse_strategy, default_values_t = vec![Strategy::CaSa.label().to_string()])]
    strategies: Vec<String>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    space: Option<PathBuf>,
    /// Requirement text or file; the built-in collision requirement when omitted.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    perception: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 50)]
    per_case_cap: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Glancing)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    sut_seed: u64,
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, default_value_t = 30.0)]
    horizon: f64,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    /// Results CSV; `<out-dir>/results.csv` when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// External simulator reading a valuation on stdin and writing a trace CSV on stdout.
    #[arg(long)]
    sut_exec: Option<PathBuf>,
    /// Argument passed to the external simulator (repeatable).
    #[arg(long = "sut-arg", allow_hyphen_values = true)]
    sut_args: Vec<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    /// Simulate a single initial condition `x1,x2` and write its trace.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
}

fn parse_strategy(s: &str) -> Result<String, String> {
    Strategy::parse(s).map(|_| s.to_string()).ok_or_else(|| format!("unknown strategy '{s}' (ur, ca-ur, ca-sa)"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("{}: at {}: {}", path.display(), e.path(), e.inner()))
}

/// A formula argument is read from a file when it names one.
fn formula_text(arg: &str) -> Result<String> {
    let p = Path::new(arg);
    if p.is_file() {
        return fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    }
    Ok(arg.to_string())
}

fn execution() -> Execution {
    if cfg!(feature = "parallel") {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FALSITAV_LOG", "warn")).init();
    let cli = Cli::parse();
    let jobs = cli.jobs;
    match with_jobs(jobs, || run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Monitor(a) => monitor(a),
        Command::Simulate(a) => simulate_cmd(a, cli.seed.unwrap_or(0), &cli.out_dir),
        Command::Cagen(a) => cagen(a, cli.seed.unwrap_or(0)),
        Command::Falsify(a) => falsify(a, cli.seed.unwrap_or(0), &cli.out_dir),
        Command::Experiment(a) => experiment(a, cli.seed, &cli.out_dir),
        Command::OdeBench(a) => ode_bench(a, &cli.out_dir),
    }
}

fn monitor(a: MonitorArgs) -> Result<ExitCode> {
    let trace = Trace::read_csv_file(&a.trace).with_context(|| format!("reading {}", a.trace.display()))?;
    let text = formula_text(&a.formula)?;
    let phi = parse_formula(&text, trace.signal_names())?;
    let r = Monitor::new(&phi).robustness_at(&trace, a.index)?;
    println!("{}", format_robustness(r));
    if a.boolean {
        println!("{}", eval_boolean(&phi, &trace, a.index)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate_cmd(a: SimulateArgs, seed: u64, out_dir: &Path) -> Result<ExitCode> {
    let mut scenario = match &a.scenario {
        Some(p) => read_json::<ScenarioConfig>(p)?,
        None => urban_scenario(),
    };
    let perception = match &a.perception {
        Some(p) => read_json::<PerceptionParams>(p)?,
        None => PerceptionParams::default(),
    };
    if a.bind_stdin {
        let space = match &a.space {
            Some(p) => read_json::<ParameterSpace>(p)?,
            None => urban_parameter_space(),
        };
        let mut input = String::new();
        io::stdin().read_to_string(&mut input)?;
        let valuation: ParamValuation = serde_json::from_str(&input).context("parsing valuation from stdin")?;
        scenario = scenario.bind(&space, &valuation)?;
    }
    let out = simulate(&scenario, &perception, a.dt, a.horizon, seed)?;
    let to_stdout = a.trace_out.as_deref() == Some(Path::new("-"));
    if to_stdout {
        let stdout = io::stdout();
        out.trace.write_csv(stdout.lock())?;
        return Ok(ExitCode::SUCCESS);
    }
    let path = a.trace_out.unwrap_or_else(|| out_dir.join("trace.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    out.trace.write_csv_file(&path)?;
    let phi = parse(&collision_spec_text(scenario.agents.len(), 0.5, 0.5))?;
    let r = Monitor::new(&phi).robustness_at(&out.trace, 0)?;
    println!(
        "samples={} collision={} collision_speed={} robustness={} trace={}",
        out.trace.len(),
        out.collision,
        format_robustness(out.collision_speed),
        format_robustness(r),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cagen(a: CagenArgs, seed: u64) -> Result<ExitCode> {
    if let Some(CagenCommand::Verify { input, strength, domains }) = a.verify {
        let file = fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
        let domains = (!domains.is_empty()).then_some(domains);
        let ca = CoveringArray::read_csv(file, strength, domains)?;
        return Ok(match verify_coverage(&ca) {
            Ok(()) => {
                println!("COVERED");
                ExitCode::SUCCESS
            }
            Err(missing) => {
                for m in &missing {
                    println!("{m}");
                }
                eprintln!("{} combinations missing", missing.len());
                ExitCode::from(3)
            }
        });
    }
    if a.domains.is_empty() {
        bail!("--domains is required");
    }
    let opts = GenerateOptions { candidates: a.candidates, execution: execution() };
    let ca = generate_with(a.strength, &a.domains, seed, opts)?;
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            ca.write_csv(f)?;
            eprintln!("{} rows written to {}", ca.len(), p.display());
        }
        None => ca.write_csv(io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn print_report(report: &ExperimentReport) {
    println!("strategy,trials,mean,std,fit_mean,fit_std,violations");
    for s in &report.summaries {
        let (fm, fs) = s.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.mean, f.std));
        println!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{}",
            s.strategy.label(),
            s.minima.len(),
            s.mean,
            s.std,
            fm,
            fs,
            s.violations
        );
    }
    let ca_sa = report.summary(Strategy::CaSa);
    let ur = report.summary(Strategy::GlobalUr);
    if let (Some(a), Some(b)) = (ca_sa, ur) {
        if let Ok(t) = sign_test_less(&a.minima, &b.minima) {
            println!("sign test ca-sa < ur: wins={} losses={} ties={} p={:.6}", t.wins, t.losses, t.ties, t.p_value);
        }
    }
}

fn exit_for(report: &ExperimentReport) -> ExitCode {
    if report.mode == Mode::Falsify && report.any_violation() {
        eprintln!("requirement violated");
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn falsify(a: FalsifyArgs, seed: u64, out_dir: &Path) -> Result<ExitCode> {
    let mut strategies: Vec<Strategy> = Vec::new();
    for s in &a.strategies {
        let s = Strategy::parse(s).expect("validated by clap");
        if !strategies.contains(&s) {
            strategies.push(s);
        }
    }
    let cfg = ExperimentConfig {
        mode: match a.mode {
            ModeArg::Glancing => Mode::Glancing,
            ModeArg::Falsify => Mode::Falsify,
        },
        strategies,
        trials: a.trials,
        budget: a.budget,
        per_case_cap: a.per_case_cap,
        seed,
        scenario: a.scenario.as_deref().map(read_json).transpose()?,
        space: a.space.as_deref().map(read_json).transpose()?,
        spec: a.spec.as_deref().map(formula_text).transpose()?,
        perception: a.perception.as_deref().map(read_json).transpose()?,
        dt: a.dt,
        horizon: a.horizon,
        sut_seed: a.sut_seed,
        bins: a.bins,
        sut_exec: a.sut_exec.map(|program| ExternalCommand { program, args: a.sut_args }),
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    if cfg.sut_exec.is_none() {
        let n = cfg.scenario_or_default().agents.len();
        parse_formula(&cfg.spec_text(), &signal_names(n))?;
    }
    let report = run_experiment(&cfg, execution())?;
    let path = a.out.unwrap_or_else(|| out_dir.join("results.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_results_csv(&report, f, true)?;
    print_report(&report);
    Ok(exit_for(&report))
}

fn experiment(a: ExperimentArgs, seed: Option<u64>, out_dir: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text).with_context(|| format!("in {}", a.config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = run_experiment(&cfg, execution())?;
    write_artifacts(&report, out_dir, cfg.histogram_bins)?;
    print_report(&report);
    Ok(exit_for(&report))
}

fn ode_bench(a: OdeArgs, out_dir: &Path) -> Result<ExitCode> {
    let phi = parse(&box_avoidance_spec_text())?;
    let monitor = Monitor::new(&phi);
    fs::create_dir_all(out_dir)?;
    if let Some(x0) = a.x0 {
        if x0.len() != 2 {
            bail!("--x0 takes two values, got {}", x0.len());
        }
        let trace = simulate_ode_example((x0[0], x0[1]), a.duration, a.dt)?;
        let path = out_dir.join("ode_trace.csv");
        trace.write_csv_file(&path)?;
        println!("{}", format_robustness(monitor.robustness_at(&trace, 0)?));
        return Ok(ExitCode::SUCCESS);
    }
    if !(a.grid_step > 0.0) {
        bail!("--grid-step must be positive");
    }
    let n = (2.0 / a.grid_step).round() as usize + 1;
    let points: Vec<(f64, f64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (-1.0 + i as f64 * a.grid_step, -1.0 + j as f64 * a.grid_step))
        .collect();
    let rows = execution().map_slice(&points, |&(x1, x2)| -> Result<(f64, f64, f64, bool)> {
        let trace = simulate_ode_example((x1, x2), a.duration, a.dt)?;
        let r = monitor.robustness_at(&trace, 0)?;
        let s1 = trace.signal("x1")?;
        let s2 = trace.signal("x2")?;
        let enters = s1.iter().zip(s2).any(|(&a, &b)| OdeBoxes::strictly_inside(a, b));
        Ok((x1, x2, r, enters))
    });
    let path = out_dir.join("ode_landscape.csv");
    let mut w = io::BufWriter::new(fs::File::create(&path)?);
    writeln!(w, "x1_0,x2_0,robustness,enters_box")?;
    let mut negative = 0;
    let mut entering = 0;
    for row in rows {
        let (x1, x2, r, enters) = row?;
        negative += usize::from(r < 0.0);
        entering += usize::from(enters);
        writeln!(w, "{x1},{x2},{},{}", format_robustness(r), u8::from(enters))?;
    }
    w.flush()?;
    println!("points={} negative={} entering={} landscape={}", points.len(), negative, entering, path.display());
    Ok(ExitCode::SUCCESS)
}
