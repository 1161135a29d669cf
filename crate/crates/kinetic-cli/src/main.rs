//! Command-line front end for the kinetic-core diagnostics: trajectory
//! connection and criticality audits, the cylinder experiments, and the
//! Moser iteration constants.
//!
//! Exit codes: 0 on success, 1 when a measured quantity violates its
//! configured bound (the offending quantity is named on stderr), 2 on
//! usage or configuration errors.

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kinetic_core::audit::{audit, audit_forcing_pair, PowerExpansion};
use kinetic_core::geometry::PhasePoint;
use kinetic_core::iteration::{
    moser_constant_stopped, moser_constant_unbounded, moser_smallp, Gamma0Reading, IterationParams,
};
use kinetic_core::oracles::{sharpness_integral, EllipticityPair};
use kinetic_core::pde::{
    gain_of_integrability_experiment, harnack_experiment, log_estimate_experiment,
    sobolev_scaling_experiment, ExperimentReport, GainConfig, HarnackConfig, LogEstimateConfig,
    LogMember, Provenance, SobolevConfig,
};
use kinetic_core::trajectory::{connect_with, criticality_profile, trajectory_csv, ForcingPair};
use kinetic_core::KineticError;

use config::{pick, pick_opt, require, RunConfig};

/// Why a run failed, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum RunError {
    /// A measured quantity violated its configured bound; exit code 1.
    Bound(String),
    /// Bad flags, a bad config file, or invalid parameters; exit code 2.
    Usage(String),
}

impl From<KineticError> for RunError {
    fn from(e: KineticError) -> Self {
        RunError::Usage(e.to_string())
    }
}

/// Connection and criticality diagnostics for the kinetic Kolmogorov
/// geometry, with the associated regularity experiments.
#[derive(Parser)]
#[command(name = "kinetic", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Connect phase points and audit forcing families.
    #[command(subcommand)]
    Trajectory(TrajectoryCmd),
    /// Run a regularity experiment and write its JSON report.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Evaluate the Moser iteration constants.
    #[command(subcommand)]
    Constants(ConstantsCmd),
}

#[derive(Subcommand)]
enum TrajectoryCmd {
    /// Solve the two-point connection problem and sample the trajectory.
    Connect(ConnectArgs),
    /// Audit a forcing family for criticality of the endpoint map.
    Audit(AuditArgs),
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Two-cylinder oscillation ladder probed by a family of poles.
    Harnack(HarnackArgs),
    /// One-sided logarithmic integrals held under a single constant.
    Log(LogArgs),
    /// Kinetic Sobolev norm scaling across dyadic cylinders.
    Sobolev(SobolevArgs),
    /// Nested-cylinder gain of integrability for solver outputs.
    Gain(GainArgs),
    /// Divergence of the one-sided integral above the critical exponent.
    WeakHarnackSharpness(SharpnessArgs),
}

#[derive(Subcommand)]
enum ConstantsCmd {
    /// Constant pair (M, gamma-tilde) of the unbounded iteration chain.
    MoserE1(ConstArgs),
    /// Constant pair (M, gamma0) of the small-exponent chain.
    MoserE2(ConstArgs),
    /// Constant pair (M, gamma0) of the stopped chain; needs --p0.
    MoserE3(ConstArgs),
}

#[derive(Args)]
struct ConnectArgs {
    /// Start point as `t,x1..xn,v1..vn`.
    #[arg(long)]
    from: Option<String>,
    /// End point in the same layout; its time must differ from the start.
    #[arg(long)]
    to: Option<String>,
    /// critical-log-oscillation | action-minimizer | power:<e1>:<e2>
    #[arg(long)]
    family: Option<String>,
    /// Number of sample rows in the CSV.
    #[arg(long)]
    samples: Option<usize>,
    /// CSV target; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// When set, also writes the criticality profile JSON to this path.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// critical-log-oscillation | action-minimizer | power:<e1>:<e2>
    #[arg(long)]
    family: Option<String>,
    /// Power expansion `b:e,b:e,...[;L]` audited symbolically.
    #[arg(long)]
    expansion: Option<String>,
    /// Report JSON target; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct HarnackArgs {
    /// Lower ellipticity bound of the anisotropic endpoint check.
    #[arg(long)]
    lambda: Option<f64>,
    /// Upper ellipticity bound; must come with --lambda.
    #[arg(long = "Lambda")]
    lambda_max: Option<f64>,
    /// Cylinder center `t,x,v`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    center: Option<Vec<f64>>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Shrink factor in (0, 1]; 1 collapses the waiting gaps.
    #[arg(long)]
    delta: Option<f64>,
    /// Pole distances below the admissible floor, farthest first.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Quadrature nodes per axis.
    #[arg(long)]
    nodes: Option<usize>,
    /// Report JSON target; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LogArgs {
    /// Cylinder center `t,x,v`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    center: Option<Vec<f64>>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Fraction of the time window at which the weighted mean is taken.
    #[arg(long)]
    eta: Option<f64>,
    /// Gap fraction; must stay below min(eta, 1 - eta).
    #[arg(long)]
    iota: Option<f64>,
    /// Spatial shrink of the one-sided boxes, in (0, 1].
    #[arg(long)]
    delta: Option<f64>,
    /// Fundamental-solution levels populating the member family.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Quadrature nodes per axis.
    #[arg(long)]
    nodes: Option<usize>,
    /// Nodes for the weighted-mean slice.
    #[arg(long)]
    slice_nodes: Option<usize>,
    /// The one constant every normalized integral is held under.
    #[arg(long)]
    bound: Option<f64>,
    /// Re-run each member at twice the node count and require stability.
    #[arg(long)]
    refine: bool,
    /// Report JSON target; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SobolevArgs {
    /// Dyadic cylinder scales.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Norm exponents reported next to the invariant one.
    #[arg(long = "q", value_delimiter = ',')]
    qs: Option<Vec<f64>>,
    /// Nodes per axis, one entry per scale or a single shared entry.
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Finite-difference step of the transport-identity check.
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    fd_tolerance: Option<f64>,
    /// Report JSON target; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GainArgs {
    /// Radius of the inner backward cylinder.
    #[arg(long)]
    r1: Option<f64>,
    /// Radius of the outer backward cylinder; must exceed r1.
    #[arg(long)]
    r2: Option<f64>,
    /// Constant the gap-weighted ratio is held under.
    #[arg(long)]
    bound: Option<f64>,
    /// Hosting grid as `nt,nx,nv`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    resolution: Option<Vec<usize>>,
    /// Number of sampled coefficient families.
    #[arg(long)]
    families: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON target; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SharpnessArgs {
    /// Integrability exponents to probe, on both sides of the critical one.
    #[arg(long = "p", value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Velocity dimension n.
    #[arg(long)]
    n: Option<usize>,
    /// Upper integration endpoint.
    #[arg(long)]
    t0: Option<f64>,
    /// Cutoff points k, strictly increasing; the range starts at 1/k.
    #[arg(long = "k", value_delimiter = ',')]
    k: Option<Vec<f64>>,
    /// Report JSON target; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ConstArgs {
    /// Reverse-Hölder constant, at least 1.
    #[arg(long = "C")]
    c: Option<f64>,
    /// Blow-up exponent gamma1.
    #[arg(long)]
    g1: Option<f64>,
    /// Blow-up exponent gamma2.
    #[arg(long)]
    g2: Option<f64>,
    /// Lebesgue-exponent ratio, strictly above 1.
    #[arg(long)]
    kappa: Option<f64>,
    /// Ellipticity aggregate, at least 1.
    #[arg(long)]
    mu: Option<f64>,
    /// Starting exponent.
    #[arg(long)]
    p: Option<f64>,
    /// Target exponent of the stopped chain, in (0, kappa).
    #[arg(long)]
    p0: Option<f64>,
    /// Reading of the stopped-chain exponent: exponent | displayed.
    #[arg(long)]
    reading: Option<String>,
    /// Concrete shrink gap for the displayed reading.
    #[arg(long)]
    delta: Option<f64>,
    /// Report JSON target; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with run-configuration values; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Bound(what)) => {
            eprintln!("bound violated: {what}");
            ExitCode::from(1)
        }
        Err(RunError::Usage(what)) => {
            eprintln!("error: {what}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Trajectory(TrajectoryCmd::Connect(args)) => run_connect(args),
        Command::Trajectory(TrajectoryCmd::Audit(args)) => run_audit(args),
        Command::Experiment(ExperimentCmd::Harnack(args)) => run_harnack(args),
        Command::Experiment(ExperimentCmd::Log(args)) => run_log(args),
        Command::Experiment(ExperimentCmd::Sobolev(args)) => run_sobolev(args),
        Command::Experiment(ExperimentCmd::Gain(args)) => run_gain(args),
        Command::Experiment(ExperimentCmd::WeakHarnackSharpness(args)) => run_sharpness(args),
        Command::Constants(ConstantsCmd::MoserE1(args)) => run_constants(MoserLemma::E1, args),
        Command::Constants(ConstantsCmd::MoserE2(args)) => run_constants(MoserLemma::E2, args),
        Command::Constants(ConstantsCmd::MoserE3(args)) => run_constants(MoserLemma::E3, args),
    }
}

fn parse_point(text: &str, what: &str) -> Result<PhasePoint, RunError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| RunError::Usage(format!("{what}: {e} in {text:?}")))?;
    if values.len() < 3 || values.len() % 2 == 0 {
        return Err(RunError::Usage(format!(
            "{what} needs t,x1..xn,v1..vn (an odd count of at least 3), got {} values",
            values.len()
        )));
    }
    let n = (values.len() - 1) / 2;
    PhasePoint::new(values[0], values[1..1 + n].to_vec(), values[1 + n..].to_vec())
        .map_err(RunError::from)
}

fn parse_family(text: &str) -> Result<ForcingPair, RunError> {
    match text {
        "critical-log-oscillation" => Ok(ForcingPair::CriticalLogOscillation),
        "action-minimizer" => Ok(ForcingPair::ActionMinimizer),
        other => {
            let Some(rest) = other.strip_prefix("power:") else {
                return Err(RunError::Usage(format!(
                    "unknown family {other:?}; expected critical-log-oscillation, \
                     action-minimizer, or power:<e1>:<e2>"
                )));
            };
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                return Err(RunError::Usage(format!(
                    "power family needs two exponents as power:<e1>:<e2>, got {other:?}"
                )));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| RunError::Usage(format!("power exponent {s:?}: {e}")))
            };
            Ok(ForcingPair::PowerPair {
                e1: parse(parts[0])?,
                e2: parse(parts[1])?,
            })
        }
    }
}

fn center_triple(values: Option<Vec<f64>>, what: &str) -> Result<(f64, f64, f64), RunError> {
    match values {
        None => Ok((0.0, 0.0, 0.0)),
        Some(v) if v.len() == 3 => Ok((v[0], v[1], v[2])),
        Some(v) => Err(RunError::Usage(format!(
            "{what} needs exactly 3 components, got {}",
            v.len()
        ))),
    }
}

/// Writes to the path when given, otherwise to stdout.
fn emit(target: Option<&PathBuf>, text: &str) -> Result<(), RunError> {
    match target {
        Some(path) => fs::write(path, text)
            .map_err(|e| RunError::Usage(format!("write {}: {e}", path.display()))),
        None => {
            if text.ends_with('\n') {
                print!("{text}");
            } else {
                println!("{text}");
            }
            Ok(())
        }
    }
}

/// Emits the report JSON, then maps failed checks onto exit code 1.
fn finish_report(report: &ExperimentReport, out: Option<&PathBuf>) -> Result<(), RunError> {
    let json = report.to_json().map_err(RunError::from)?;
    emit(out, &json)?;
    if report.passed {
        Ok(())
    } else {
        let failing: Vec<&str> = report
            .notes
            .iter()
            .filter_map(|n| n.strip_suffix(": fail"))
            .collect();
        Err(RunError::Bound(failing.join(", ")))
    }
}

fn run_connect(args: ConnectArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let from_text = require(pick_opt(args.from, cfg.from), "--from")?;
    let to_text = require(pick_opt(args.to, cfg.to), "--to")?;
    let from = parse_point(&from_text, "--from")?;
    let to = parse_point(&to_text, "--to")?;
    if let Some(n) = cfg.dimension {
        if from.dim() != n {
            return Err(RunError::Usage(format!(
                "configured dimension {n} does not match the {}-dimensional endpoints",
                from.dim()
            )));
        }
    }
    let family_text = pick(args.family, cfg.family, "critical-log-oscillation".to_string());
    let family = parse_family(&family_text)?;
    let samples = pick(args.samples, cfg.samples, 200);

    let traj = connect_with(family, &from, &to)?;
    let csv = trajectory_csv(&traj, samples)?;
    emit(pick_opt(args.csv, cfg.csv).as_ref(), &csv)?;

    let delta = traj.p1.t - traj.p0.t;
    let g = traj.forcing.eval(1.0)?;
    let mut residual = 0.0f64;
    for i in 0..from.dim() {
        let x = traj.p0.x[i] + delta * (traj.p0.v[i] + g.g1 * traj.m1[i] + g.g2 * traj.m2[i]);
        let v = traj.p0.v[i] + g.dg1 * traj.m1[i] + g.dg2 * traj.m2[i];
        residual = residual
            .max((x - traj.p1.x[i]).abs())
            .max((v - traj.p1.v[i]).abs());
    }
    eprintln!("endpoint residual {residual:.3e}");

    if let Some(path) = pick_opt(args.profile, cfg.profile) {
        let report = criticality_profile(&traj.forcing, delta, from.dim())?;
        let json = serde_json::to_string_pretty(&report).map_err(KineticError::from)?;
        emit(Some(&path), &json)?;
    }
    if residual > 1e-8 {
        return Err(RunError::Bound(format!(
            "endpoint_residual = {residual:.3e} exceeds 1e-8"
        )));
    }
    Ok(())
}

fn run_audit(args: AuditArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let family = pick_opt(args.family, cfg.family);
    let expansion = pick_opt(args.expansion, cfg.expansion);
    let report = match (family, expansion) {
        (Some(_), Some(_)) => {
            return Err(RunError::Usage(
                "--family and --expansion are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(RunError::Usage("audit needs --family or --expansion".into()))
        }
        (Some(f), None) => audit(&parse_family(&f)?)?,
        (None, Some(e)) => {
            let expansion: PowerExpansion = e.parse()?;
            audit_forcing_pair(&expansion)?
        }
    };
    let json = serde_json::to_string_pretty(&report).map_err(KineticError::from)?;
    emit(pick_opt(args.out, cfg.out).as_ref(), &json)
}

fn run_harnack(args: HarnackArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let moser_pair = match (
        pick_opt(args.lambda, cfg.lambda),
        pick_opt(args.lambda_max, cfg.lambda_max),
    ) {
        (Some(l), Some(b)) => Some(EllipticityPair::new(l, b)?),
        (None, None) => None,
        _ => {
            return Err(RunError::Usage(
                "--lambda and --Lambda must be given together".into(),
            ))
        }
    };
    let config = HarnackConfig {
        center: center_triple(pick_opt(args.center, cfg.center), "--center")?,
        tau: pick(args.tau, cfg.tau, 1.0),
        r: pick(args.r, cfg.r, 1.0),
        delta: pick(args.delta, cfg.delta, 1.0),
        pole_epsilons: pick(args.epsilons, cfg.epsilons, vec![0.2, 0.1, 0.05, 0.025]),
        pole_offsets: cfg.offsets.unwrap_or_else(|| vec![(0.0, 0.0)]),
        nodes_per_axis: pick(args.nodes, cfg.nodes, 21),
        moser_pair,
    };
    finish_report(
        &harnack_experiment(&config)?,
        pick_opt(args.out, cfg.out).as_ref(),
    )
}

fn run_log(args: LogArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let center = center_triple(pick_opt(args.center, cfg.center), "--center")?;
    let r = pick(args.r, cfg.r, 1.0);
    let levels = pick(args.levels, cfg.levels, vec![1.0, 2.0, 5.0]);
    let members = levels
        .iter()
        .map(|&level| LogMember::gamma_level(level, center, r))
        .collect::<kinetic_core::Result<Vec<_>>>()?;
    let config = LogEstimateConfig {
        center,
        r,
        tau: pick(args.tau, cfg.tau, 1.0),
        eta: pick(args.eta, cfg.eta, 0.5),
        iota: pick(args.iota, cfg.iota, 1.0 / 6.0),
        delta: pick(args.delta, cfg.delta, 0.9),
        members,
        nodes_per_axis: pick(args.nodes, cfg.nodes, 24),
        slice_nodes: pick(args.slice_nodes, cfg.slice_nodes, 48),
        bound_constant: pick(args.bound, cfg.bound, 5.0),
        refine_check: pick(args.refine.then_some(true), cfg.refine, false),
        measure_connection_radius: false,
    };
    finish_report(
        &log_estimate_experiment(&config)?,
        pick_opt(args.out, cfg.out).as_ref(),
    )
}

fn run_sobolev(args: SobolevArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let config = SobolevConfig {
        scales: pick(args.scales, cfg.scales, vec![0.5, 1.0, 2.0]),
        qs: pick(args.qs, cfg.qs, vec![2.5, 3.5]),
        nodes: pick(args.nodes, cfg.node_counts, vec![96, 112, 128]),
        amplitude: pick(args.amplitude, cfg.amplitude, 1.0),
        fd_step: pick(args.fd_step, cfg.fd_step, 1e-4),
        fd_tolerance: pick(args.fd_tolerance, cfg.fd_tolerance, 1e-5),
    };
    finish_report(
        &sobolev_scaling_experiment(&config)?,
        pick_opt(args.out, cfg.out).as_ref(),
    )
}

fn run_gain(args: GainArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let resolution = match pick_opt(args.resolution, cfg.resolution) {
        None => (24, 48, 48),
        Some(v) if v.len() == 3 => (v[0], v[1], v[2]),
        Some(v) => {
            return Err(RunError::Usage(format!(
                "--resolution needs nt,nx,nv, got {} values",
                v.len()
            )))
        }
    };
    let config = GainConfig {
        r1: pick(args.r1, cfg.r1, 0.5),
        r2: pick(args.r2, cfg.r2, 1.0),
        bound_constant: pick(args.bound, cfg.bound, 4.0),
        resolution,
        families: pick(args.families, cfg.families, 2),
        seed: pick(args.seed, cfg.seed, 9),
    };
    finish_report(
        &gain_of_integrability_experiment(&config)?,
        pick_opt(args.out, cfg.out).as_ref(),
    )
}

fn run_sharpness(args: SharpnessArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let ps = pick(args.p, cfg.p_values, vec![1.25, 1.4, 1.5, 1.75]);
    let ks = pick(args.k, cfg.k_values, vec![1e3, 1e4, 1e5, 1e6]);
    let n = pick(args.n, cfg.dimension, 1);
    let t0 = pick(args.t0, cfg.t0, 1.0);
    if ks.len() < 2 || ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RunError::Usage(
            "--k needs at least two strictly increasing cutoffs".into(),
        ));
    }
    if n == 0 {
        return Err(RunError::Usage("--n must be at least 1".into()));
    }
    let threshold = 1.0 + 1.0 / (2.0 * n as f64);
    let mut report = ExperimentReport::new("weak-harnack-sharpness");
    report.record_bound("critical_exponent", threshold, Provenance::Configured);
    for &p in &ps {
        let values = ks
            .iter()
            .map(|&k| sharpness_integral(k, p, n, t0))
            .collect::<kinetic_core::Result<Vec<f64>>>()?;
        for (k, value) in ks.iter().zip(&values) {
            report.record(&format!("integral_p{p}_k{k}"), *value);
        }
        if p < threshold {
            let a = 2.0 * n as f64 * (1.0 - p);
            let limit = t0.powf(a + 1.0) / (a + 1.0);
            report.record_bound(&format!("limit_p{p}"), limit, Provenance::Measured);
            report.record(
                &format!("relative_variation_p{p}"),
                (values[values.len() - 1] - values[0]) / values[0],
            );
            report.check(
                &format!("integral_p{p}_bounded_by_limit"),
                values.iter().all(|v| *v <= limit * (1.0 + 1e-12)),
            );
        } else {
            let mut min_rate = f64::INFINITY;
            for w in 0..values.len() - 1 {
                let decades = (ks[w + 1] / ks[w]).log10();
                min_rate = min_rate.min((values[w + 1] - values[w]) / decades);
            }
            report.record(&format!("min_decade_growth_p{p}"), min_rate);
            report.check(
                &format!("integral_p{p}_grows_by_ln10_per_decade"),
                min_rate >= std::f64::consts::LN_10 * (1.0 - 1e-9),
            );
        }
    }
    finish_report(&report, pick_opt(args.out, cfg.out).as_ref())
}

#[derive(Clone, Copy)]
enum MoserLemma {
    E1,
    E2,
    E3,
}

fn parse_reading(reading: Option<String>, delta: Option<f64>) -> Result<Gamma0Reading, RunError> {
    match reading.as_deref() {
        None | Some("exponent") => {
            if delta.is_some() {
                return Err(RunError::Usage(
                    "--delta only applies to --reading displayed".into(),
                ));
            }
            Ok(Gamma0Reading::Exponent)
        }
        Some("displayed") => Ok(Gamma0Reading::Displayed {
            delta: require(delta, "--delta")?,
        }),
        Some(other) => Err(RunError::Usage(format!(
            "unknown reading {other:?}; expected exponent or displayed"
        ))),
    }
}

fn run_constants(lemma: MoserLemma, args: ConstArgs) -> Result<(), RunError> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let default_p = match lemma {
        MoserLemma::E1 => 1.0,
        MoserLemma::E2 | MoserLemma::E3 => 0.5,
    };
    let params = IterationParams {
        c: pick(args.c, cfg.c, 1.0),
        gamma1: pick(args.g1, cfg.g1, 1.0),
        gamma2: pick(args.g2, cfg.g2, 1.0),
        kappa: pick(args.kappa, cfg.kappa, 2.0),
        mu: pick(args.mu, cfg.mu, 1.0),
        p: pick(args.p, cfg.p, default_p),
        p0: pick_opt(args.p0, cfg.p0),
    };
    let reading = pick_opt(args.reading, cfg.reading);
    let reading_delta = pick_opt(args.delta, cfg.reading_delta);
    let (label, m, exponent_name, exponent) = match lemma {
        MoserLemma::E1 | MoserLemma::E2 if reading.is_some() || reading_delta.is_some() => {
            return Err(RunError::Usage(
                "--reading and --delta apply to moser-e3 only".into(),
            ))
        }
        MoserLemma::E1 => {
            let (m, g) = moser_constant_unbounded(&params)?;
            ("moser-e1", m, "gamma_tilde", g)
        }
        MoserLemma::E2 => {
            let (m, g) = moser_smallp(&params)?;
            ("moser-e2", m, "gamma0", g)
        }
        MoserLemma::E3 => {
            let (m, g) = moser_constant_stopped(&params, parse_reading(reading, reading_delta)?)?;
            ("moser-e3", m, "gamma0", g)
        }
    };
    let mut object = serde_json::Map::new();
    object.insert("lemma".into(), label.into());
    object.insert("m".into(), m.into());
    object.insert(exponent_name.into(), exponent.into());
    object.insert(
        "params".into(),
        serde_json::to_value(&params).map_err(KineticError::from)?,
    );
    let json = serde_json::to_string_pretty(&serde_json::Value::Object(object))
        .map_err(KineticError::from)?;
    emit(pick_opt(args.out, cfg.out).as_ref(), &json)
}
