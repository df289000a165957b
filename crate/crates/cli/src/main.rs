//! `vlp`: command-line front end for CRLB evaluation, power allocation and
//! Monte Carlo experiments.
//!
//! Exit status: 0 success, 2 infeasible, 1 error, 64 usage.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use vlp_core::conic::{self, AllocationResult, DeltaSpec};
use vlp_core::experiments::{self, MonteCarloOptions, Strategy, SweepAxis, SweepBase};
use vlp_core::feasible::{self, build_feasible_set, IlluminationMode};
use vlp_core::minmax::{self, MinMaxParams, PoseModel, UncertaintyModel, WorstCaseOptions};
use vlp_core::scenario;
use vlp_core::solver::{BarrierSolver, ConicBackend, SolveStatus, SolverOptions};
use vlp_core::{channel, fisher, Scenario, Vec3};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "vlp", version, about = "CRLB-optimal LED power allocation for visible light positioning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Scenario file (TOML). Defaults to the built-in reference scenario.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Illumination constraint handling.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for result, table and manifest files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Worker threads for parallel evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Absolute spectral-norm radius δ on Γ.
    #[arg(long, global = true, conflicts_with = "delta_relative")]
    delta: Option<f64>,
    /// Radius on Γ as a fraction of ‖Γ̂‖₂.
    #[arg(long, global = true)]
    delta_relative: Option<f64>,
    /// Total electrical power budget P_T in W (overrides the scenario).
    #[arg(long, global = true)]
    total_power: Option<f64>,
    /// Power vector in W: one value per LED, or one value for all.
    #[arg(long, global = true, value_delimiter = ',')]
    power: Option<Vec<f64>>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Relaxed,
}

impl From<Mode> for IlluminationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => IlluminationMode::Exact,
            Mode::Relaxed => IlluminationMode::Relaxed,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Human,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Protocol {
    Compare,
    Cdf,
    Sweep,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CRLB of a power vector at the scenario's receiver.
    Crlb,
    /// Check a power vector against the power and illumination constraints.
    Check,
    /// Minimize the CRLB subject to the power and illumination constraints.
    Solve,
    /// Minimize the worst-case CRLB over ‖Γ_Δ‖₂ ≤ δ.
    RobustGamma,
    /// Min-max allocation over a ball of receiver location errors.
    RobustLocation {
        /// Radius δ_l in m.
        #[arg(long)]
        delta_l: f64,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Min-max allocation over a box of receiver orientation errors.
    RobustOrientation {
        /// Polar half-width in degrees.
        #[arg(long)]
        delta_theta: f64,
        /// Azimuth half-width in degrees.
        #[arg(long)]
        delta_phi: f64,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Minimize total power subject to CRLB ≤ ε.
    MinPower {
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Minimize total power subject to worst-case CRLB ≤ ε over ‖Γ_Δ‖₂ ≤ δ.
    RobustMinPower {
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Worst-case CRLB of a fixed power vector.
    WorstCase {
        #[arg(long)]
        delta_l: Option<f64>,
        /// Degrees.
        #[arg(long, requires = "delta_phi")]
        delta_theta: Option<f64>,
        /// Degrees.
        #[arg(long, requires = "delta_theta")]
        delta_phi: Option<f64>,
    },
    /// Illuminance over a horizontal plane for a power vector.
    IlluminanceMap {
        /// Plane height in m.
        #[arg(long, default_value_t = 1.0)]
        height: f64,
        /// Grid cells along x and y.
        #[arg(long, value_delimiter = ',', default_values_t = [50usize, 50])]
        grid: Vec<usize>,
    },
    /// Monte Carlo comparison, CRLB distribution or parameter sweep.
    Experiment {
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// Feasible realizations per strategy.
        #[arg(long, default_value_t = 100)]
        n_feasible: usize,
        #[arg(long, default_value_t = 1_000_000)]
        max_draws: u64,
        /// Strategies (optimal, robust, non_robust, uniform).
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
        /// √ε in m for the cdf protocol and as the sweep base.
        #[arg(long)]
        sqrt_eps: Option<f64>,
        /// Sweep axis: total_power, delta, delta_l, delta_theta or eps.
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Sweep values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Base δ_l (m) for sweeps.
        #[arg(long, default_value_t = 0.0)]
        delta_l: f64,
        /// Base polar half-width (degrees) for sweeps.
        #[arg(long, default_value_t = 0.0)]
        delta_theta: f64,
        /// Base azimuth half-width (degrees) for sweeps.
        #[arg(long, default_value_t = 0.0)]
        delta_phi: f64,
    },
}

#[derive(Args, Debug, Clone, Copy)]
#[group(required = true, multiple = false)]
struct EpsArg {
    /// Accuracy target ε in m².
    #[arg(long)]
    eps: Option<f64>,
    /// Accuracy target as √ε in m.
    #[arg(long)]
    sqrt_eps: Option<f64>,
}

impl EpsArg {
    fn value(&self) -> f64 {
        match (self.eps, self.sqrt_eps) {
            (Some(e), _) => e,
            (None, Some(s)) => s * s,
            (None, None) => unreachable!("clap enforces one of --eps/--sqrt-eps"),
        }
    }
}

#[derive(Serialize)]
struct BackendInfo {
    id: &'static str,
    options: SolverOptions,
}

#[derive(Serialize)]
struct RunManifest {
    argv: Vec<String>,
    scenario: String,
    scenario_sha256: String,
    backend: BackendInfo,
    seed: u64,
    version: &'static str,
    wall_time_s: f64,
}

/// What a command produced.
struct Output {
    /// Machine-readable record, written as result.json.
    record: serde_json::Value,
    /// Optional table, written as result.csv.
    table: Option<String>,
    /// Extra CSV files (name, contents).
    extra: Vec<(String, String)>,
    human: String,
    infeasible: bool,
}

impl Output {
    fn new(record: impl Serialize, human: String) -> Self {
        Output {
            record: serde_json::to_value(record).unwrap_or(serde_json::Value::Null),
            table: None,
            extra: Vec::new(),
            human,
            infeasible: false,
        }
    }
}

struct Context {
    scenario: Scenario,
    source: String,
    digest: String,
    global: Global,
}

#[derive(Debug)]
struct CliError(String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    match run(cli, &argv, start) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.0);
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli, argv: &[String], start: Instant) -> Result<u8, CliError> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let (scenario, source, bytes) = match &cli.global.scenario {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
            let text = String::from_utf8(bytes.clone()).map_err(|_| CliError(format!("{} is not UTF-8", path.display())))?;
            (scenario::from_toml_str(&text)?, path.display().to_string(), bytes)
        }
        None => (scenario::reference_scenario(), "builtin:reference".to_string(), scenario::REFERENCE_SCENARIO.as_bytes().to_vec()),
    };
    let digest = hex(&Sha256::digest(&bytes));
    let mut scenario = scenario;
    if let Some(t) = cli.global.total_power {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError(format!("--total-power must be a non-negative number (got {t})")));
        }
        scenario.power.p_total = Some(t);
    }
    let ctx = Context { scenario, source, digest, global: cli.global.clone() };
    let out = dispatch(&cli.command, &ctx)?;

    let manifest = RunManifest {
        argv: argv.to_vec(),
        scenario: ctx.source.clone(),
        scenario_sha256: ctx.digest.clone(),
        backend: BackendInfo { id: BarrierSolver::default().id(), options: SolverOptions::default() },
        seed: ctx.global.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    match &ctx.global.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write(dir, "result.json", &serde_json::to_string_pretty(&out.record)?)?;
            if let Some(t) = &out.table {
                write(dir, "result.csv", t)?;
            }
            for (name, body) in &out.extra {
                write(dir, name, body)?;
            }
            write(dir, "manifest.json", &manifest_json)?;
            print!("{}", out.human);
        }
        None => {
            match (ctx.global.format, &out.table) {
                (Format::Csv, Some(t)) => print!("{t}"),
                (Format::Csv, None) => println!("{}", serde_json::to_string(&out.record)?),
                (Format::Human, _) => print!("{}", out.human),
            }
            eprintln!("{manifest_json}");
        }
    }
    Ok(if out.infeasible { EXIT_INFEASIBLE } else { 0 })
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| CliError(format!("cannot write {}: {e}", path.display())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn power_vector(ctx: &Context) -> Result<Vec<f64>, CliError> {
    let nl = ctx.scenario.num_leds();
    match &ctx.global.power {
        Some(v) if v.len() == 1 => Ok(vec![v[0]; nl]),
        Some(v) if v.len() == nl => Ok(v.clone()),
        Some(v) => Err(CliError(format!("--power has {} entries but the scenario has {nl} LEDs", v.len()))),
        None => match ctx.scenario.power.p_total {
            Some(t) => Ok(feasible::uniform_allocation_for_budget(t, nl)),
            None => Err(CliError("a power vector is required (--power or a total budget)".into())),
        },
    }
}

fn resolve_delta(ctx: &Context, gamma: &vlp_core::GammaMatrix) -> Result<f64, CliError> {
    let spec = match (ctx.global.delta, ctx.global.delta_relative) {
        (Some(d), _) => DeltaSpec::Absolute(d),
        (None, Some(r)) => DeltaSpec::Relative(r),
        (None, None) => return Err(CliError("a Γ radius is required (--delta or --delta-relative)".into())),
    };
    Ok(spec.resolve(gamma))
}

fn fmt_p(p: &[f64]) -> String {
    let v: Vec<String> = p.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", v.join(", "))
}

fn allocation_output(r: &AllocationResult, unit: &str) -> Output {
    let mut h = String::new();
    let _ = writeln!(h, "problem: {:?}", r.provenance);
    let _ = writeln!(h, "status: {}", r.status);
    if !r.p_star.is_empty() {
        let _ = writeln!(h, "p* (W): {}", fmt_p(&r.p_star));
        let _ = writeln!(h, "total power (W): {:.6}", r.p_star.iter().sum::<f64>());
    }
    let _ = writeln!(h, "objective ({unit}): {:.9e}", r.objective);
    if unit == "m^2" && r.objective.is_finite() {
        let _ = writeln!(h, "sqrt objective (m): {:.9e}", r.objective.sqrt());
    }
    if let Some(c) = r.aux.nominal_crlb {
        let _ = writeln!(h, "nominal CRLB (m^2): {c:.9e}");
    }
    let _ = writeln!(h, "duality gap: {:.3e}", r.duality_gap);
    let _ = writeln!(h, "backend: {} ({} Newton steps)", r.backend, r.newton_steps);
    let mut o = Output::new(r, h);
    o.infeasible = r.status == SolveStatus::Infeasible;
    o
}

fn dispatch(cmd: &Command, ctx: &Context) -> Result<Output, CliError> {
    let s = &ctx.scenario;
    let mode: IlluminationMode = ctx.global.mode.into();
    match cmd {
        Command::Crlb => {
            let p = power_vector(ctx)?;
            let gamma = fisher::assemble_gamma(s)?;
            let c = fisher::crlb(&fisher::fim(&gamma, &p)?)?;
            #[derive(Serialize)]
            struct Rec {
                p: Vec<f64>,
                crlb: f64,
                rmse: f64,
                per_axis: [f64; 3],
            }
            let human = format!(
                "p (W): {}\nCRLB (m^2): {:.9e}\nsqrt CRLB (m): {:.9e}\nper axis (m^2): [{:.6e}, {:.6e}, {:.6e}]\n",
                fmt_p(&p),
                c.total,
                c.rmse(),
                c.per_axis[0],
                c.per_axis[1],
                c.per_axis[2]
            );
            let mut o = Output::new(Rec { p: p.clone(), crlb: c.total, rmse: c.rmse(), per_axis: c.per_axis }, human);
            o.table = Some(format!("crlb_m2,sqrt_crlb_m\n{},{}\n", c.total, c.rmse()));
            Ok(o)
        }
        Command::Check => {
            let p = power_vector(ctx)?;
            let set = build_feasible_set(s, mode)?;
            let r = set.is_feasible(&p);
            let mut h = format!("feasible: {}\n", r.feasible);
            let mut t = String::from("constraint,family,slack,tolerance,satisfied\n");
            #[derive(Serialize)]
            struct Slack {
                constraint: String,
                family: &'static str,
                slack: f64,
                satisfied: bool,
            }
            let mut rec = Vec::new();
            for sl in &r.slacks {
                let ok = sl.slack >= -sl.tolerance;
                let _ = writeln!(t, "{},{},{},{},{}", sl.id, sl.id.family(), sl.slack, sl.tolerance, ok);
                if !ok {
                    let _ = writeln!(h, "violated: {} (slack {:.6e})", sl.id, sl.slack);
                }
                rec.push(Slack { constraint: sl.id.to_string(), family: sl.id.family(), slack: sl.slack, satisfied: ok });
            }
            let mut o = Output::new(serde_json::json!({ "feasible": r.feasible, "p": p, "constraints": rec }), h);
            o.table = Some(t);
            o.infeasible = !r.feasible;
            Ok(o)
        }
        Command::Solve => {
            let gamma = fisher::assemble_gamma(s)?;
            let r = conic::solve_nominal_crlb(s, &gamma, mode)?;
            Ok(allocation_output(&r, "m^2"))
        }
        Command::RobustGamma => {
            let gamma = fisher::assemble_gamma(s)?;
            let delta = resolve_delta(ctx, &gamma)?;
            let r = conic::solve_robust_gamma(s, &gamma, delta, mode)?;
            Ok(allocation_output(&r, "m^2"))
        }
        Command::MinPower { eps } => {
            let gamma = fisher::assemble_gamma(s)?;
            let r = conic::solve_min_power(s, &gamma, eps.value(), mode)?;
            Ok(allocation_output(&r, "W"))
        }
        Command::RobustMinPower { eps } => {
            let gamma = fisher::assemble_gamma(s)?;
            let delta = resolve_delta(ctx, &gamma)?;
            let r = conic::solve_robust_min_power(s, &gamma, delta, eps.value(), mode)?;
            Ok(allocation_output(&r, "W"))
        }
        Command::RobustLocation { delta_l, max_iter } => minmax_output(ctx, UncertaintyModel::LocationBall { radius: *delta_l }, *max_iter),
        Command::RobustOrientation { delta_theta, delta_phi, max_iter } => minmax_output(
            ctx,
            UncertaintyModel::OrientationBox { delta_theta: delta_theta.to_radians(), delta_phi: delta_phi.to_radians() },
            *max_iter,
        ),
        Command::WorstCase { delta_l, delta_theta, delta_phi } => {
            let p = power_vector(ctx)?;
            let model = match (delta_l, delta_theta, delta_phi) {
                (Some(r), None, None) => Some(UncertaintyModel::LocationBall { radius: *r }),
                (None, Some(t), Some(f)) => {
                    Some(UncertaintyModel::OrientationBox { delta_theta: t.to_radians(), delta_phi: f.to_radians() })
                }
                (None, None, None) => None,
                _ => return Err(CliError("choose either --delta-l or --delta-theta/--delta-phi".into())),
            };
            match model {
                Some(m) => {
                    let pose = PoseModel::new(s, m)?;
                    let wc = minmax::worst_case_eval(&p, &pose, &WorstCaseOptions::for_model(&m));
                    let human = format!(
                        "p (W): {}\nworst-case CRLB (m^2): {:.9e}\nargmax e: {:?}\nevaluations: {}\n",
                        fmt_p(&p),
                        wc.value,
                        wc.argmax,
                        wc.evaluations
                    );
                    let mut o = Output::new(&wc, human);
                    o.infeasible = !wc.value.is_finite();
                    Ok(o)
                }
                None => {
                    let gamma = fisher::assemble_gamma(s)?;
                    let delta = resolve_delta(ctx, &gamma)?;
                    let r = conic::worst_case_crlb_fixed_p(&p, &gamma, delta)?;
                    Ok(allocation_output(&r, "m^2"))
                }
            }
        }
        Command::IlluminanceMap { height, grid } => {
            let p = power_vector(ctx)?;
            if grid.len() != 2 || grid.contains(&0) {
                return Err(CliError("--grid takes two positive counts, e.g. 50,50".into()));
            }
            let base = feasible::base_optical_powers(s)?;
            let region = match &s.illumination.average {
                Some(a) => a.region,
                None => scenario::Rect { x: [0.0, 10.0], y: [0.0, 10.0], z: *height },
            };
            let (nx, ny) = (grid[0], grid[1]);
            let mut t = String::from("x,y,z,illuminance_lx\n");
            let mut vals = Vec::with_capacity(nx * ny);
            for ix in 0..nx {
                for iy in 0..ny {
                    let x = region.x[0] + (ix as f64 + 0.5) * (region.x[1] - region.x[0]) / nx as f64;
                    let y = region.y[0] + (iy as f64 + 0.5) * (region.y[1] - region.y[0]) / ny as f64;
                    let e = channel::total_illuminance(&s.leds, Vec3::new(x, y, *height), &p, &base)?;
                    let _ = writeln!(t, "{x},{y},{height},{e}");
                    vals.push(e);
                }
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let human = format!("grid: {nx}x{ny} at z = {height} m\nmean (lx): {mean:.4}\nmin (lx): {min:.4}\nmax (lx): {max:.4}\n");
            let mut o =
                Output::new(serde_json::json!({ "p": p, "height": height, "grid": [nx, ny], "mean": mean, "min": min, "max": max }), human);
            o.table = Some(t);
            Ok(o)
        }
        Command::Experiment { protocol, n_feasible, max_draws, strategies, sqrt_eps, axis, grid, delta_l, delta_theta, delta_phi } => {
            let opts = MonteCarloOptions {
                n_feasible: *n_feasible,
                seed: ctx.global.seed,
                max_draws: *max_draws,
                mode,
                ..MonteCarloOptions::default()
            };
            let gamma = fisher::assemble_gamma(s)?;
            match protocol {
                Protocol::Compare | Protocol::Cdf => {
                    let strategies = strategies.clone().unwrap_or_else(|| Strategy::COMPARED.to_vec());
                    let delta = resolve_delta(ctx, &gamma)?;
                    let report = if *protocol == Protocol::Compare {
                        experiments::run_strategy_comparison(s, &strategies, delta, &opts)?
                    } else {
                        let se = sqrt_eps.ok_or_else(|| CliError("the cdf protocol needs --sqrt-eps".into()))?;
                        experiments::run_cdf_experiment(s, &strategies, se * se, delta, &opts)?
                    };
                    let mut h = format!("delta: {delta}\ndraws: {}\n", report.total_draws);
                    h.push_str(&report.summary_csv());
                    if let Some(w) = &report.warning {
                        let _ = writeln!(h, "warning: {w}");
                        eprintln!("warning: {w}");
                    }
                    let summary = report.summary_csv();
                    let rows = report.rows_csv();
                    let mut o = Output::new(&report, h);
                    o.table = Some(rows);
                    o.extra.push(("summary.csv".into(), summary));
                    Ok(o)
                }
                Protocol::Sweep => {
                    let axis = axis.ok_or_else(|| CliError("the sweep protocol needs --axis".into()))?;
                    let grid = grid.clone().filter(|g| !g.is_empty()).ok_or_else(|| CliError("the sweep protocol needs --grid".into()))?;
                    let strategies = strategies.clone().unwrap_or_else(|| match axis {
                        SweepAxis::TotalPower | SweepAxis::Eps => vec![Strategy::Optimal, Strategy::Uniform],
                        _ => Strategy::COMPARED.to_vec(),
                    });
                    let delta = match (ctx.global.delta, ctx.global.delta_relative) {
                        (None, None) => 0.0,
                        _ => resolve_delta(ctx, &gamma)?,
                    };
                    let base = SweepBase {
                        total_power: s.power.p_total,
                        delta,
                        delta_l: *delta_l,
                        delta_theta: *delta_theta,
                        delta_phi: *delta_phi,
                        sqrt_eps: sqrt_eps.unwrap_or(0.1),
                        mode,
                    };
                    let rows = experiments::sweep(s, axis, &grid, &strategies, &base);
                    let csv = experiments::sweep_csv(&rows);
                    let mut o = Output::new(&rows, csv.clone());
                    o.table = Some(csv);
                    Ok(o)
                }
            }
        }
    }
}

fn minmax_output(ctx: &Context, model: UncertaintyModel, max_iter: Option<usize>) -> Result<Output, CliError> {
    let mut params = MinMaxParams::for_model(&model);
    if let Some(m) = max_iter {
        params.max_iter = m;
    }
    let r = minmax::solve_minmax(&ctx.scenario, model, ctx.global.mode.into(), &params)?;
    let mut o = allocation_output(&r.allocation, "m^2");
    let _ = writeln!(o.human, "iterations: {}, candidates: {}, converged: {}", r.trace.len(), r.candidates.len(), r.converged);
    if let Some(w) = &r.warning {
        let _ = writeln!(o.human, "warning: {w}");
        eprintln!("warning: {w}");
    }
    let mut t = String::from("k,n,rho,smoothed,inner_max\n");
    for row in &r.trace {
        let _ = writeln!(t, "{},{},{},{},{}", row.k, row.n, row.rho, row.smoothed, row.inner_max);
    }
    o.record = serde_json::to_value(&r)?;
    o.table = Some(t);
    Ok(o)
}
