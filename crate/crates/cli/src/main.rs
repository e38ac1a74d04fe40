//! `caltest`: long-run default rate calibration tests from the command line.
//!
//! Exit codes: 0 passed, 1 failed, 2 input or configuration error.

mod report;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lrdr_core::simulator::{cdf_curve, write_samples_csv, Simulation};
use lrdr_core::{
    acceptance_range, convergence_heuristic, grade_test, grade_variance, portfolio_test, read_panel_csv, sigma_alt,
    sigma_min, MasterScale64, Method, Panel64, Scenario, TestConfig64,
};
use report::{Comparison, ConfigEcho, InputDigest, Report, SimulationReport, TestReport};

#[derive(Parser)]
#[command(
    name = "caltest",
    version,
    about = "Calibration tests for long-run default rates on overlapping windows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test one rating grade against its PD.
    Grade(GradeArgs),
    /// Test a portfolio against its long-run central tendency.
    Portfolio(PortfolioArgs),
    /// Simulate the long-run default rate of a scenario.
    Simulate(SimulateArgs),
    /// Check the rule of thumb for the normal approximation.
    Check(CheckArgs),
}

#[derive(Args)]
struct PanelArgs {
    /// Panel CSV: date_index,obligor_id,pd_estimate,defaulted
    #[arg(long)]
    input: PathBuf,
    /// Reference dates per year.
    #[arg(long, default_value_t = 4)]
    q: usize,
    /// Number of reference dates; defaults to the largest date index in the file.
    #[arg(long)]
    n_dates: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// Print an aligned text summary instead of JSON.
    #[arg(long)]
    human: bool,
    /// Write plot data as CSV to this path.
    #[arg(long)]
    emit_curves: Option<PathBuf>,
}

#[derive(Args)]
struct GradeArgs {
    #[command(flatten)]
    panel: PanelArgs,
    /// PD of the grade under the null hypothesis.
    #[arg(long)]
    pd_grade: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Grade,
    LpId,
    LpPdmax,
    LpPdbar,
    Alt,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Grade => Method::Grade,
            MethodArg::LpId => Method::LpIdentity,
            MethodArg::LpPdmax => Method::LpPdMax,
            MethodArg::LpPdbar => Method::LpPdBar,
            MethodArg::Alt => Method::AltBound,
        }
    }
}

#[derive(Args)]
struct PortfolioArgs {
    #[command(flatten)]
    panel: PanelArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::LpId)]
    method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    pd_min: Option<f64>,
    #[arg(long)]
    pd_max: Option<f64>,
    /// Master scale CSV (grade,pd); supplies PD_min/PD_max when not given.
    #[arg(long)]
    master_scale: Option<PathBuf>,
    /// Number of worst grades averaged into PD-bar (lp-pdbar).
    #[arg(long)]
    n_worst: Option<usize>,
    /// Persisting-to-portfolio risk ratio (alt).
    #[arg(long)]
    gamma: Option<f64>,
    /// Cap on the mean PD of the first q-1 dates (alt).
    #[arg(long)]
    mu_old: Option<f64>,
    /// Also run this method and report the ratio of range widths.
    #[arg(long, value_enum)]
    compare: Option<MethodArg>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Samples CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CheckArgs {
    /// Panel CSV to check.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    input: Option<PathBuf>,
    /// Scenario JSON to check instead of a panel.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    q: usize,
    #[arg(long)]
    n_dates: Option<usize>,
    #[arg(long)]
    human: bool,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn load_panel(args: &PanelArgs) -> Result<Panel64> {
    read_panel_csv(open(&args.input)?, args.n_dates, args.q)
        .with_context(|| format!("reading {}", args.input.display()))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

fn check_warnings(counts: &[usize]) -> Vec<String> {
    convergence_heuristic(counts)
        .reasons()
        .into_iter()
        .map(|r| format!("normal approximation may be poor: {r}"))
        .collect()
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    writeln!(w, "{header}")?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| format!("{x:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
}

fn cmd_grade(args: &GradeArgs) -> Result<(Report, bool)> {
    let panel = load_panel(&args.panel)?;
    let cfg = TestConfig64::new(args.alpha, Method::Grade);
    let result = grade_test(&panel, args.pd_grade, &cfg)?;
    if let Some(path) = &args.output.emit_curves {
        // acceptance range as a function of the grade PD
        let (lo, hi) = ((args.pd_grade / 4.0).max(1e-6), (args.pd_grade * 4.0).min(0.999));
        let rows = grid(lo, hi, 101)
            .map(|pd| {
                let s = grade_variance(pd, &panel).sqrt();
                let r = acceptance_range(pd, s, args.alpha)?;
                Ok(vec![pd, s, r.lower, r.upper])
            })
            .collect::<Result<Vec<_>>>()?;
        write_csv(path, "pd_grade,sigma,lower_k,upper_k", rows)?;
    }
    let passed = result.passed;
    let report = Report {
        command: "grade".into(),
        input: Some(InputDigest::new(&args.panel.input.display().to_string(), &panel)),
        config: ConfigEcho {
            alpha: Some(args.alpha),
            q: Some(args.panel.q),
            method: Some(Method::Grade.name().into()),
            pd_grade: Some(args.pd_grade),
            ..Default::default()
        },
        test: Some(TestReport::from(&result)),
        comparison: None,
        simulation: None,
        convergence: None,
        warnings: check_warnings(&panel.counts()),
    };
    Ok((report, passed))
}

fn portfolio_config(args: &PortfolioArgs, method: Method) -> Result<TestConfig64> {
    let mut cfg = TestConfig64::new(args.alpha, method);
    cfg.pd_min = args.pd_min;
    cfg.pd_max = args.pd_max;
    cfg.n_worst = args.n_worst;
    cfg.gamma = args.gamma;
    cfg.mu_old = args.mu_old;
    if let Some(path) = &args.master_scale {
        let scale = MasterScale64::from_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?;
        cfg.master_scale = Some(scale);
    }
    Ok(cfg)
}

/// `(μ, σ, k, K)` over the admissible range of μ for the configured method.
fn portfolio_curve(panel: &Panel64, cfg: &TestConfig64) -> Result<Vec<Vec<f64>>> {
    let q = panel.windows_per_year();
    let sigma_at = |mu: f64| -> Result<f64> {
        Ok(match cfg.method {
            Method::Grade => grade_variance(mu, panel).sqrt(),
            Method::AltBound => {
                let pd_max = cfg
                    .pd_max
                    .or(cfg.master_scale.as_ref().map(|s| s.pd_max()))
                    .ok_or(anyhow!("pd_max"))?;
                sigma_alt(panel, mu, pd_max, cfg.gamma.unwrap_or(1.0), cfg.mu_old.unwrap_or(0.0))
                    .map(|a| a.variance.sqrt())
                    .unwrap_or(f64::NAN)
            }
            _ => {
                let lin = cfg.linearization(q)?.expect("LP method");
                sigma_min(panel, &lin, mu)?.variance.sqrt()
            }
        })
    };
    let (lo, hi) = match cfg.linearization(q)? {
        Some(lin) => (lin.pd_lo, lin.pd_hi),
        None => (1e-4, 0.2),
    };
    grid(lo, hi, 101)
        .map(|mu| {
            let s = sigma_at(mu)?;
            if s.is_nan() {
                return Ok(vec![mu, s, f64::NAN, f64::NAN]);
            }
            let r = acceptance_range(mu, s, cfg.alpha)?;
            Ok(vec![mu, s, r.lower, r.upper])
        })
        .collect()
}

fn cmd_portfolio(args: &PortfolioArgs) -> Result<(Report, bool)> {
    let panel = load_panel(&args.panel)?;
    let method = Method::from(args.method);
    let cfg = portfolio_config(args, method)?;
    let result = portfolio_test(&panel, &cfg)?;
    let comparison = match args.compare {
        Some(other) => {
            let other_cfg = portfolio_config(args, other.into())?;
            let r = portfolio_test(&panel, &other_cfg)?;
            Some(Comparison {
                method: r.method.name().into(),
                sigma: r.sigma,
                lower_k: r.range.lower,
                upper_k: r.range.upper,
                passed: r.passed,
                width_ratio: result.range.width() / r.range.width(),
            })
        }
        None => None,
    };
    if let Some(path) = &args.output.emit_curves {
        write_csv(path, "mu,sigma,lower_k,upper_k", portfolio_curve(&panel, &cfg)?)?;
    }
    let mut warnings = check_warnings(&panel.counts());
    if result.range.lower_raw < 0.0 {
        warnings.push("lower bound below 0 clamped for reporting".into());
    }
    let passed = result.passed;
    let report = Report {
        command: "portfolio".into(),
        input: Some(InputDigest::new(&args.panel.input.display().to_string(), &panel)),
        config: ConfigEcho {
            alpha: Some(args.alpha),
            q: Some(args.panel.q),
            method: Some(method.name().into()),
            pd_min: cfg.pd_min.or(cfg.master_scale.as_ref().map(|s| s.pd_min())),
            pd_max: cfg.pd_max.or(cfg.master_scale.as_ref().map(|s| s.pd_max())),
            n_worst: args.n_worst,
            gamma: args.gamma,
            mu_old: args.mu_old,
            ..Default::default()
        },
        test: Some(TestReport::from(&result)),
        comparison,
        simulation: None,
        convergence: None,
        warnings,
    };
    Ok((report, passed))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(Report, bool)> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(reps) = args.reps {
        scenario.replications = reps;
    }
    scenario.validate()?;
    let sim = Simulation::new(&scenario)?;
    let summary = sim.run()?;
    if let Some(path) = &args.out {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(f);
        write_samples_csv(&summary.samples, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.output.emit_curves {
        let rows = cdf_curve(&summary, 201)?.into_iter().map(|(x, e, n)| vec![x, e, n]);
        write_csv(path, "z,empirical_cdf,normal_cdf", rows)?;
    }
    let convergence = convergence_heuristic(&scenario.customers_per_date);
    let mut warnings = check_warnings(&scenario.customers_per_date);
    if summary.ks_distance > report::KS_THRESHOLD {
        warnings.push(format!(
            "KS distance {:.4} exceeds {} (threshold is a calibration choice)",
            summary.ks_distance,
            report::KS_THRESHOLD
        ));
    }
    let report = Report {
        command: "simulate".into(),
        input: None,
        config: ConfigEcho {
            q: Some(scenario.windows_per_year),
            scenario: Some(scenario),
            ..Default::default()
        },
        test: None,
        comparison: None,
        simulation: Some(SimulationReport::new(
            &summary,
            args.out.as_ref().map(|p| p.display().to_string()),
        )),
        convergence: Some(convergence),
        warnings,
    };
    Ok((report, true))
}

fn cmd_check(args: &CheckArgs) -> Result<(Report, bool)> {
    let (counts, input, config) = match (&args.input, &args.scenario) {
        (Some(path), _) => {
            let pa = PanelArgs {
                input: path.clone(),
                q: args.q,
                n_dates: args.n_dates,
            };
            let panel = load_panel(&pa)?;
            let digest = InputDigest::new(&path.display().to_string(), &panel);
            let config = ConfigEcho {
                q: Some(args.q),
                ..Default::default()
            };
            (panel.counts(), Some(digest), config)
        }
        (None, Some(path)) => {
            let s = load_scenario(path)?;
            let config = ConfigEcho {
                q: Some(s.windows_per_year),
                scenario: Some(s.clone()),
                ..Default::default()
            };
            (s.customers_per_date, None, config)
        }
        (None, None) => bail!("either --input or --scenario is required"),
    };
    let conv = convergence_heuristic(&counts);
    let passed = conv.passed;
    let report = Report {
        command: "check".into(),
        input,
        config,
        test: None,
        comparison: None,
        simulation: None,
        warnings: conv.reasons(),
        convergence: Some(conv),
    };
    Ok((report, passed))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CALTEST_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("CALTEST_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(Report, bool, bool)> {
    configure_threads()?;
    let (report, passed) = match &cli.command {
        Command::Grade(a) => cmd_grade(a)?,
        Command::Portfolio(a) => cmd_portfolio(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Check(a) => cmd_check(a)?,
    };
    let human = match &cli.command {
        Command::Grade(a) => a.output.human,
        Command::Portfolio(a) => a.output.human,
        Command::Simulate(a) => a.output.human,
        Command::Check(a) => a.human,
    };
    Ok((report, passed, human))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok((report, passed, human)) => {
            let text = if human {
                report::to_human(&report)
            } else {
                match report::to_json(&report) {
                    Ok(t) => t,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            };
            print!("{text}");
            ExitCode::from(if passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
