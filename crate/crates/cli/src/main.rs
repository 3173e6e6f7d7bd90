//! `mems`: command-line front end for singular MEMS solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mems_singular::analyzer;
use mems_singular::cylinder::{self, CylinderConfig, FarBoundary, ThetaProfile};
use mems_singular::modes::{self, Forcing, RefinedParams};
use mems_singular::phase_plane::{self, PhaseParams};
use mems_singular::radial::{self, ProblemSpec};
use serde::Serialize;
use serde_json::{json, Value};

use output::Outputs;

#[derive(Parser, Serialize)]
#[command(name = "mems", version, about = "Singular solutions of Δu = λ|x|^α/u² + P near the origin")]
struct Cli {
    /// Directory receiving the outputs and manifest.json
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for all random sampling
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Isotropic/anisotropic classification of the singularity (alpha > -2; alpha < 4 when P > 0)
    Classify(ClassifyArgs),
    /// Half period L(τ) of the stationary ODE on a log grid of τ > 1
    PeriodCurve(PeriodArgs),
    /// Periodic stationary profile w_j (requires j inside (√3A, 2A))
    Orbit(OrbitArgs),
    /// Minimal radial solution on the unit ball (alpha >= 0)
    RadialSolve(RadialArgs),
    /// λ-continuation to the pull-in threshold with the existence bounds
    Pullin(PullinArgs),
    /// Pull-in thresholds over a grid of pressures
    Sweep(SweepArgs),
    /// Emden-transformed problem on a finite cylinder
    Cylinder(CylinderArgs),
    /// Linear mode dynamics, predicted decay and rate dominance
    Modes(ModesArgs),
    /// Cylinder solve followed by decay fits and the forced limit coefficient
    Analyze(AnalyzeArgs),
    /// Empirical Łojasiewicz exponent around a stationary profile
    Loj(LojArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Pressure {
    Zero,
    Positive,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    /// Exponent of f(x) = |x|^α; must exceed -2
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "zero")]
    pressure: Pressure,
}

#[derive(Args, Serialize)]
struct PeriodArgs {
    #[arg(long, allow_hyphen_values = true, conflicts_with = "a")]
    alpha: Option<f64>,
    /// A = (2+α)/3 given directly
    #[arg(long = "A")]
    a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// lo:hi:n, log-spaced, lo > 1
    #[arg(long, default_value = "1.01:100:64")]
    tau_grid: String,
}

#[derive(Args, Serialize)]
struct OrbitArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    j: u32,
    #[arg(long, default_value_t = 512)]
    samples: usize,
}

#[derive(Args, Serialize, Clone)]
struct RadialCommon {
    /// Exponent of f(x) = |x|^α; radial solves need alpha >= 0
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    alpha: f64,
    /// Dimension N of the ball
    #[arg(long = "N", default_value_t = 2)]
    dim: u32,
    /// Grid intervals on [0, 1]
    #[arg(long, default_value_t = 256)]
    n_grid: usize,
}

#[derive(Args, Serialize)]
struct RadialArgs {
    #[command(flatten)]
    common: RadialCommon,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    /// Pressure; solutions need P < 2N
    #[arg(long = "P", allow_hyphen_values = true, default_value_t = 0.0)]
    p: f64,
}

#[derive(Args, Serialize)]
struct PullinArgs {
    #[command(flatten)]
    common: RadialCommon,
    #[arg(long = "P", allow_hyphen_values = true, default_value_t = 0.0)]
    p: f64,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    common: RadialCommon,
    /// lo:hi:n, linearly spaced pressures
    #[arg(long = "P-grid", default_value = "0:3.9:14")]
    p_grid: String,
}

#[derive(Args, Serialize, Clone)]
struct CylinderArgs {
    /// JSON document with every CylinderConfig field; overrides the flags below
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "P", allow_hyphen_values = true, default_value_t = 0.0)]
    p: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    t0: f64,
    #[arg(long = "T", allow_hyphen_values = true, default_value_t = 30.0)]
    t_end: f64,
    /// Grid points in t (at least 128)
    #[arg(long, default_value_t = 301)]
    n_t: usize,
    /// Fourier modes in θ (at least 8)
    #[arg(long = "K", default_value_t = 32)]
    k_modes: usize,
    /// Amplitude of the sin(kθ) perturbation of m at t0
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    perturb_amplitude: f64,
    #[arg(long, default_value_t = 2)]
    perturb_k: u32,
    /// Use the stationary orbit w_j as data at T instead of m
    #[arg(long)]
    far_orbit: Option<u32>,
}

#[derive(Args, Serialize)]
struct ModesArgs {
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "P", allow_hyphen_values = true, default_value_t = 0.0)]
    p: f64,
    /// Also tabulate the bounded solution of mode k (k = 0 is forced by the pressure)
    #[arg(long, allow_hyphen_values = true)]
    k: Option<i32>,
    /// lo:hi:n, linearly spaced
    #[arg(long, default_value = "0:10:101")]
    t_grid: String,
    /// a_k(t0) for supercritical modes
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    a_t0: f64,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    cylinder: CylinderArgs,
    /// Comma-separated modes to fit; defaults to 0 and the leading supercritical mode
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    fit_modes: Vec<i64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Reference {
    Equilibrium,
    Orbit,
}

#[derive(Args, Serialize)]
struct LojArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// H² radius of the perturbations (at most 0.05 min w)
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, value_enum, default_value = "equilibrium")]
    reference: Reference,
    #[arg(long, default_value_t = 2)]
    j: u32,
    /// Samples of the reference profile
    #[arg(long, default_value_t = 1024)]
    n_theta: usize,
}

enum CliError {
    Validation(Vec<String>),
    Module(String),
}

impl CliError {
    fn module<E: std::fmt::Display>(e: E) -> Self {
        CliError::Module(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Module(format!("io: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn ensure(violations: Vec<String>) -> CliResult<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(violations))
    }
}

struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

fn parse_grid(name: &str, s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("{name} must look like lo:hi:n (got {s:?})");
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n < 2 || !(hi > lo) {
        return Err(format!("{name} needs hi > lo and n >= 2 (got {s:?})"));
    }
    Ok(Grid { lo, hi, n })
}

impl Grid {
    fn linear(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64).collect()
    }

    fn log(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..self.n).map(|i| (a + (b - a) * i as f64 / (self.n - 1) as f64).exp()).collect()
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn classify(a: &ClassifyArgs, out: &mut Outputs) -> CliResult<()> {
    let positive = matches!(a.pressure, Pressure::Positive);
    let c = phase_plane::classify_alpha(a.alpha, positive).map_err(|e| CliError::Validation(vec![reason(&e)]))?;
    println!("{}", serde_json::to_string(&c).map_err(CliError::module)?);
    out.json("classification.json", to_value(&c))?;
    Ok(())
}

fn reason(e: &phase_plane::PhaseError) -> String {
    match e {
        phase_plane::PhaseError::InadmissibleAlpha { reason, .. } => reason.clone(),
        other => other.to_string(),
    }
}

fn period_curve(a: &PeriodArgs, out: &mut Outputs) -> CliResult<()> {
    let mut v = Vec::new();
    let big_a = match (a.alpha, a.a) {
        (Some(alpha), None) => {
            if let Err(e) = phase_plane::check_alpha(alpha, false) {
                v.push(reason(&e));
            }
            (2.0 + alpha) / 3.0
        }
        (None, Some(x)) => x,
        _ => {
            v.push("exactly one of --alpha or --A is required".into());
            f64::NAN
        }
    };
    if !(a.lambda > 0.0) {
        v.push("lambda must be positive".into());
    }
    let grid = parse_grid("tau-grid", &a.tau_grid).map_err(|e| v.push(e)).ok();
    if let Some(g) = &grid {
        if !(g.lo > 1.0) {
            v.push("tau-grid must start above 1".into());
        }
    }
    ensure(v)?;
    let params = PhaseParams::new(big_a, a.lambda).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
    let taus = grid.expect("validated").log();
    let curve = phase_plane::period_curve(&params, &taus).map_err(CliError::module)?;
    out.csv("period_curve.csv", |w| {
        use std::io::Write;
        writeln!(w, "tau,L")?;
        for (t, l) in &curve {
            writeln!(w, "{}", mems_singular::export::row(&[*t, *l]))?;
        }
        Ok(())
    })?;
    let decreasing = curve.windows(2).all(|p| p[1].1 < p[0].1);
    out.json(
        "period_curve.json",
        json!({
            "A": big_a,
            "lambda": a.lambda,
            "points": curve.len(),
            "strictly_decreasing": decreasing,
            "limit_tau_to_1": PI / (3f64.sqrt() * big_a),
            "limit_tau_to_infinity": PI / (2.0 * big_a),
        }),
    )?;
    Ok(())
}

fn orbit(a: &OrbitArgs, out: &mut Outputs) -> CliResult<()> {
    let mut v = Vec::new();
    if let Err(e) = phase_plane::check_alpha(a.alpha, false) {
        v.push(reason(&e));
    }
    if !(a.lambda > 0.0) {
        v.push("lambda must be positive".into());
    }
    if a.samples < 16 {
        v.push("samples must be at least 16".into());
    }
    let big_a = (2.0 + a.alpha) / 3.0;
    let (window, _) = phase_plane::mode_window(big_a);
    if !window.contains(&a.j) {
        v.push(format!("j = {} is not an integer in (sqrt(3)A, 2A) = ({}, {}); available: {window:?}", a.j, 3f64.sqrt() * big_a, 2.0 * big_a));
    }
    ensure(v)?;
    let params = PhaseParams::from_alpha(a.alpha, a.lambda).map_err(CliError::module)?;
    let o = phase_plane::construct_orbit(&params, a.j, a.samples).map_err(CliError::module)?;
    let residual = o.residual_max().map_err(CliError::module)?;
    out.csv("orbit.csv", |w| o.write_csv(w))?;
    out.json(
        "orbit.json",
        json!({
            "alpha": a.alpha,
            "lambda": a.lambda,
            "j": a.j,
            "tau": o.level.tau,
            "energy": o.level.energy,
            "half_period": o.half_period,
            "minimal_period": 2.0 * o.half_period,
            "residual_max": residual,
            "first_integral_drift": o.first_integral_drift(),
            "samples": a.samples,
        }),
    )?;
    Ok(())
}

fn radial_spec(c: &RadialCommon, lambda: f64, p: f64) -> ProblemSpec {
    ProblemSpec { lambda, p, alpha: c.alpha, dim: c.dim, n_grid: c.n_grid }
}

fn radial_solve(a: &RadialArgs, out: &mut Outputs) -> CliResult<()> {
    let spec = radial_spec(&a.common, a.lambda, a.p);
    ensure(spec.violations())?;
    let sol = radial::solve_minimal(&spec).map_err(CliError::module)?;
    out.csv("radial.csv", |w| {
        use std::io::Write;
        writeln!(w, "r,u")?;
        for (r, u) in sol.r_grid.iter().zip(&sol.u) {
            writeln!(w, "{}", mems_singular::export::row(&[*r, *u]))?;
        }
        Ok(())
    })?;
    out.json(
        "radial.json",
        json!({
            "spec": to_value(&spec),
            "converged": sol.converged,
            "newton_iters": sol.newton_iters,
            "residual_norm": sol.residual_norm,
            "min_u": sol.min_u(),
        }),
    )?;
    Ok(())
}

fn pullin(a: &PullinArgs, out: &mut Outputs) -> CliResult<()> {
    let spec = radial_spec(&a.common, 0.0, a.p);
    ensure(spec.violations())?;
    let trace = radial::continue_in_lambda(&spec).map_err(CliError::module)?;
    out.csv("continuation.csv", |w| {
        use std::io::Write;
        writeln!(w, "lambda,min_u,converged")?;
        for s in &trace.steps {
            writeln!(w, "{},{},{}", mems_singular::export::fmt(s.lambda), mems_singular::export::fmt(s.min_u), s.converged)?;
        }
        Ok(())
    })?;
    let b = trace.bounds;
    out.json(
        "pullin.json",
        json!({
            "spec": to_value(&spec),
            "lambda_star": trace.lambda_star_estimate,
            "bracket": [trace.bracket.0, trace.bracket.1],
            "bounds": to_value(&b),
            "within_bounds": trace.lambda_star_estimate >= b.lower && trace.lambda_star_estimate <= b.upper,
            "steps": trace.steps.len(),
        }),
    )?;
    Ok(())
}

fn sweep(a: &SweepArgs, out: &mut Outputs) -> CliResult<()> {
    let spec = radial_spec(&a.common, 0.0, 0.0);
    let mut v = spec.violations();
    let grid = parse_grid("P-grid", &a.p_grid).map_err(|e| v.push(e)).ok();
    if let Some(g) = &grid {
        if g.lo < 0.0 {
            v.push("P must be nonnegative".into());
        }
    }
    ensure(v)?;
    let ps = grid.expect("validated").linear();
    let rows = radial::pullin_sweep(&spec, &ps).map_err(CliError::module)?;
    out.csv("sweep.csv", |w| radial::write_sweep_csv(&rows, w))?;
    let nonincreasing = rows.windows(2).all(|p| p[1].lambda_star <= p[0].lambda_star);
    out.json("sweep.json", json!({ "rows": to_value(&rows), "nonincreasing_in_P": nonincreasing }))?;
    Ok(())
}

fn cylinder_config(a: &CylinderArgs) -> CliResult<CylinderConfig> {
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(vec![format!("cannot read {}: {e}", path.display())]))?;
        return serde_json::from_str(&text).map_err(|e| CliError::Validation(vec![format!("bad cylinder config: {e}")]));
    }
    let mut c = CylinderConfig::new(a.alpha, a.lambda, a.p);
    c.t0 = a.t0;
    c.t_end = a.t_end;
    c.n_t = a.n_t;
    c.k_modes = a.k_modes;
    if a.perturb_amplitude != 0.0 {
        c.boundary_t0 = ThetaProfile::Perturbed { amplitude: a.perturb_amplitude, k: a.perturb_k, phase: 0.0 };
    }
    if let Some(j) = a.far_orbit {
        c.boundary_t_end = FarBoundary::Orbit { j, shift: 0.0 };
    }
    Ok(c)
}

fn run_cylinder(a: &CylinderArgs, out: &mut Outputs) -> CliResult<(CylinderConfig, cylinder::CylinderField)> {
    let config = cylinder_config(a)?;
    ensure(config.violations())?;
    let field = cylinder::solve_cylinder(&config).map_err(CliError::module)?;
    let series = cylinder::lyapunov_series(&field, None).map_err(CliError::module)?;
    let check = cylinder::check_lyapunov(&series);
    let convergence = cylinder::convergence_profile(&field);
    let advisory = cylinder::ball_average_advisory(&field, 2.0 / 3.0);
    out.csv("cylinder_modes.csv", |w| field.write_modes_csv(w))?;
    out.csv("cylinder_diagnostics.csv", |w| field.write_diagnostics_csv(&series, w))?;
    out.json(
        "cylinder.json",
        json!({
            "config": to_value(&config),
            "report": to_value(&field.report),
            "epsilon": series.first().map(|r| r.epsilon_used),
            "lyapunov": to_value(&check),
            "convergence": match &convergence {
                Ok(c) => json!({
                    "limit": to_value(&c.limit),
                    "final_distance": c.distance.last(),
                    "eventually_monotone": c.eventually_monotone,
                    "algebraic_slope": c.algebraic_slope,
                }),
                Err(e) => json!({ "error": e.to_string() }),
            },
            "ball_average_advisory": to_value(&advisory),
        }),
    )?;
    Ok((config, field))
}

fn modes_cmd(a: &ModesArgs, out: &mut Outputs) -> CliResult<()> {
    let params = RefinedParams::new(a.alpha, a.lambda, a.p).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
    let grid = parse_grid("t-grid", &a.t_grid).map_err(|e| CliError::Validation(vec![e]))?;
    let prediction = modes::predicted_decay(&params);
    let rates = modes::exponent_dominance(&params);
    let mut body = json!({
        "params": to_value(&params),
        "dominance": to_value(&rates),
        "tie": modes::is_tie(&rates, 1e-9),
        "forced_limit_coefficient": modes::forced_limit_coefficient(a.alpha, a.p),
    });
    body["prediction"] = match &prediction {
        Ok(p) => to_value(p),
        Err(e) => json!({ "error": e.to_string() }),
    };
    if let Some(k) = a.k {
        let t = grid.linear();
        let amp = modes::pressure_forcing_amplitude(a.p);
        let beta = params.beta();
        let g = move |s: f64| amp * (-beta * s).exp();
        let forcing = if k == 0 && a.p > 0.0 { Forcing { g: &g, decay_rate: beta } } else { Forcing::zero() };
        let sol = modes::bounded_mode_solution(k, params.mu, &forcing, &t, a.a_t0).map_err(CliError::module)?;
        out.csv(&format!("mode_k{k}.csv"), |w| sol.write_csv(w))?;
        body["mode"] = json!({ "k": k, "regime": to_value(&sol.regime), "d_k_mu": sol.d_k_mu, "near_degenerate": sol.near_degenerate });
    }
    out.json("modes.json", body)?;
    Ok(())
}

fn analyze(a: &AnalyzeArgs, out: &mut Outputs) -> CliResult<()> {
    let (config, field) = run_cylinder(&a.cylinder, out)?;
    let eq = config.equation();
    let mut ks = a.fit_modes.clone();
    if ks.is_empty() {
        ks.push(0);
        ks.push((3f64.sqrt() * eq.mu).floor() as i64 + 1);
    }
    let mut fits = Vec::new();
    for &k in &ks {
        let amp = if k == 0 { field.mean_deviation(eq.m) } else { field.mode_amplitude(k) };
        out.csv(&format!("log_amplitude_k{k}.csv"), |w| analyzer::write_log_amplitude_csv(&field.t_grid, &amp, w))?;
        fits.push(match analyzer::fit_mode_decay(&field, k, None) {
            Ok(f) => to_value(&f),
            Err(e) => json!({ "k": k, "error": e.to_string() }),
        });
    }
    let limit = match RefinedParams::new(eq.alpha, eq.lambda, eq.p) {
        Ok(p) if analyzer::in_forced_regime(eq.alpha) => match analyzer::limit_coefficient(&field, &p) {
            Ok(l) => to_value(&l),
            Err(e) => json!({ "error": e.to_string() }),
        },
        _ => Value::Null,
    };
    out.json("analysis.json", json!({ "fits": fits, "limit_coefficient": limit }))?;
    Ok(())
}

fn loj(a: &LojArgs, seed: u64, out: &mut Outputs) -> CliResult<()> {
    let mut v = Vec::new();
    if let Err(e) = phase_plane::check_alpha(a.alpha, false) {
        v.push(reason(&e));
    }
    if !(a.lambda > 0.0) {
        v.push("lambda must be positive".into());
    }
    if a.samples == 0 {
        v.push("samples must be positive".into());
    }
    if a.n_theta < 32 {
        v.push("n-theta must be at least 32".into());
    }
    ensure(v)?;
    let params = PhaseParams::from_alpha(a.alpha, a.lambda).map_err(CliError::module)?;
    let w = match a.reference {
        Reference::Equilibrium => vec![phase_plane::equilibrium(&params); a.n_theta],
        Reference::Orbit => {
            let o = phase_plane::construct_orbit(&params, a.j, a.n_theta).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
            o.w
        }
    };
    let est = analyzer::loj_estimate(&params, &w, a.sigma, a.samples, seed).map_err(|e| match e {
        analyzer::AnalyzerError::InvalidInput(s) => CliError::Validation(vec![s]),
        other => CliError::module(other),
    })?;
    out.json("loj.json", to_value(&est))?;
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify(_) => "classify",
        Command::PeriodCurve(_) => "period-curve",
        Command::Orbit(_) => "orbit",
        Command::RadialSolve(_) => "radial-solve",
        Command::Pullin(_) => "pullin",
        Command::Sweep(_) => "sweep",
        Command::Cylinder(_) => "cylinder",
        Command::Modes(_) => "modes",
        Command::Analyze(_) => "analyze",
        Command::Loj(_) => "loj",
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let start = Instant::now();
    let mut out = Outputs::create(&cli.out, cli.seed)?;
    match &cli.command {
        Command::Classify(a) => classify(a, &mut out)?,
        Command::PeriodCurve(a) => period_curve(a, &mut out)?,
        Command::Orbit(a) => orbit(a, &mut out)?,
        Command::RadialSolve(a) => radial_solve(a, &mut out)?,
        Command::Pullin(a) => pullin(a, &mut out)?,
        Command::Sweep(a) => sweep(a, &mut out)?,
        Command::Cylinder(a) => {
            run_cylinder(a, &mut out)?;
        }
        Command::Modes(a) => modes_cmd(a, &mut out)?,
        Command::Analyze(a) => analyze(a, &mut out)?,
        Command::Loj(a) => loj(a, cli.seed, &mut out)?,
    }
    out.finish(command_name(&cli.command), to_value(&cli.command), start.elapsed().as_secs_f64())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(violations)) => {
            eprintln!("{}", json!({ "error": "validation", "subcommand": command_name(&cli.command), "violations": violations }));
            ExitCode::from(2)
        }
        Err(CliError::Module(message)) => {
            eprintln!("{}", json!({ "error": "module", "subcommand": command_name(&cli.command), "message": message }));
            ExitCode::from(1)
        }
    }
}
