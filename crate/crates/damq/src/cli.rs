//! Config-file driven command layer emitting CSV and plain-text tables.
//!
//! A run is one TOML document naming a model and a command:
//!
//! ```toml
//! [model]
//! lambda = 0.5
//! level = 10
//! j1 = 1.0
//! j2 = 1.0
//!
//! [model.batch]
//! kind = "geometric"      # unit | geometric | explicit
//! q = 0.5
//!
//! [model.service1]
//! family = "exponential"  # exponential | deterministic | erlang | hyperexponential
//! rate = 1.0
//!
//! [model.service2]
//! family = "exponential"
//! rate = 2.0
//!
//! [model.costs]
//! kind = "linear"         # linear | explicit
//! c_high = 2.0
//! c_low = 1.0
//!
//! [command]
//! name = "analyze"        # analyze | asymptotics | optimize | sweep | simulate | validate
//!
//! [output]
//! path = "out.csv"        # optional; stdout when absent
//! ```
//!
//! Commands write CSV with a fixed header (floats carry 12 significant
//! digits); `validate` writes PASS/FAIL lines instead. Human-readable
//! summaries go to stderr so they never mix into the CSV stream. Exit
//! codes: 0 success, 2 unreadable/schema-invalid config, 3 numeric or
//! model-domain failure, 4 validation failure.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Parser;
use serde::Deserialize;

use crate::asymptotics::{
    find_root, limit_p, root_expansion, HeavyTrafficParams, Regime, RootSide,
};
use crate::control::{solve_control_with, sweep_j2, C_EPSILON, C_MAX};
use crate::dist::{BatchDistribution, ServiceDistribution};
use crate::error::{Error, Result};
use crate::model::DamModel;
use crate::objective::{
    c_star, critical_objective, eta, exact_objective, j_lower, j_upper, psi, CostProfile,
};
use crate::sim::replicate_with;
use crate::stationary::stationary_distribution;
use crate::takacs::{busy_table, linear_reps};

/// Command-line flags; everything else lives in the config file.
#[derive(Parser, Debug)]
#[command(
    name = "damq",
    version,
    about = "Stationary analysis and optimal control of a level-dependent dam/queue"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the primary output here, overriding the config's output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the configured simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    model: ModelConfig,
    command: CommandConfig,
    #[serde(default)]
    output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    lambda: f64,
    level: usize,
    #[serde(default = "one")]
    j1: f64,
    #[serde(default = "one")]
    j2: f64,
    batch: BatchConfig,
    service1: ServiceConfig,
    service2: ServiceConfig,
    costs: CostConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchConfig {
    kind: String,
    q: Option<f64>,
    probs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServiceConfig {
    family: String,
    rate: Option<f64>,
    value: Option<f64>,
    shape: Option<u32>,
    probs: Option<Vec<f64>>,
    rates: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostConfig {
    kind: String,
    c_high: Option<f64>,
    c_low: Option<f64>,
    values: Option<Vec<f64>>,
}

/// One options table shared by all commands; each command reads the keys
/// it understands and leaves the rest alone.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandConfig {
    name: String,
    /// asymptotics: control parameter C (default |ρ₁ − 1|·L).
    c: Option<f64>,
    /// asymptotics: threshold the per-level limits count down from
    /// (default L).
    l_ref: Option<u32>,
    /// optimize: upper end of the C search window.
    c_max: Option<f64>,
    /// optimize: lower end of the below-critical C window.
    epsilon: Option<f64>,
    /// sweep: explicit j₂ values (overrides the grid keys).
    j2_list: Option<Vec<f64>>,
    j2_start: Option<f64>,
    j2_stop: Option<f64>,
    j2_step: Option<f64>,
    /// simulate/validate: events per replication.
    events: Option<u64>,
    /// simulate/validate: number of replications.
    reps: Option<u64>,
    /// simulate/validate: warmup fraction of events.
    warmup: Option<f64>,
    /// simulate/validate: base seed (replication seeds derive from it).
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputConfig {
    path: Option<PathBuf>,
}

/// Primary output plus the bits that do not belong in the CSV stream.
#[derive(Debug)]
pub struct RunOutput {
    /// CSV (or PASS/FAIL text for `validate`) destined for the output path.
    pub body: String,
    /// Human-readable summary for stderr.
    pub summary: Option<String>,
    /// True when `validate` found a failing check (exit 4).
    pub failed: bool,
}

/// Entry point behind `main`; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| Error::Io(format!("{}: {e}", cli.config.display())))?;
    let config = parse_config(&text)?;
    let out = run(&config, cli.seed)?;
    let path = cli.out.clone().or_else(|| config.output.path.clone());
    match path {
        Some(p) => fs::write(&p, &out.body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => print!("{}", out.body),
    }
    if let Some(summary) = &out.summary {
        eprintln!("{summary}");
    }
    Ok(if out.failed { 4 } else { 0 })
}

/// Parse a TOML run configuration, rejecting unknown fields.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Execute a parsed configuration. `seed_override` (the `--seed` flag)
/// replaces the config's seed for simulation-backed commands.
pub fn run(config: &RunConfig, seed_override: Option<u64>) -> Result<RunOutput> {
    let model = build_model(&config.model)?;
    let cmd = &config.command;
    let seed = seed_override.or(cmd.seed).unwrap_or(42);
    match cmd.name.as_str() {
        "analyze" => cmd_analyze(&model),
        "asymptotics" => cmd_asymptotics(&model, cmd),
        "optimize" => cmd_optimize(&model, cmd),
        "sweep" => cmd_sweep(&model, cmd),
        "simulate" => cmd_simulate(&model, cmd, seed),
        "validate" => cmd_validate(&model, cmd, seed),
        other => Err(Error::Config(format!(
            "command.name: unknown command {other:?} (expected analyze, asymptotics, \
             optimize, sweep, simulate or validate)"
        ))),
    }
}

fn require<T: Copy>(field: Option<T>, path: &str, hint: &str) -> Result<T> {
    field.ok_or_else(|| Error::Config(format!("{path}: {hint}")))
}

fn forbid<T>(field: &Option<T>, path: &str, kind: &str) -> Result<()> {
    if field.is_some() {
        return Err(Error::Config(format!("{path}: not a parameter of kind {kind:?}")));
    }
    Ok(())
}

fn build_batch(cfg: &BatchConfig) -> Result<BatchDistribution> {
    match cfg.kind.as_str() {
        "unit" => {
            forbid(&cfg.q, "model.batch.q", "unit")?;
            forbid(&cfg.probs, "model.batch.probs", "unit")?;
            Ok(BatchDistribution::unit())
        }
        "geometric" => {
            forbid(&cfg.probs, "model.batch.probs", "geometric")?;
            let q = require(cfg.q, "model.batch.q", "geometric batches need q in (0, 1)")?;
            BatchDistribution::geometric(q)
        }
        "explicit" => {
            forbid(&cfg.q, "model.batch.q", "explicit")?;
            let probs = cfg.probs.clone().ok_or_else(|| {
                Error::Config("model.batch.probs: explicit batches need probabilities".into())
            })?;
            BatchDistribution::explicit(probs)
        }
        other => Err(Error::Config(format!(
            "model.batch.kind: unknown kind {other:?} (expected unit, geometric or explicit)"
        ))),
    }
}

fn build_service(cfg: &ServiceConfig, path: &str) -> Result<ServiceDistribution> {
    let sub = |field: &str| format!("{path}.{field}");
    match cfg.family.as_str() {
        "exponential" => {
            forbid(&cfg.value, &sub("value"), "exponential")?;
            forbid(&cfg.shape, &sub("shape"), "exponential")?;
            forbid(&cfg.probs, &sub("probs"), "exponential")?;
            forbid(&cfg.rates, &sub("rates"), "exponential")?;
            let rate = require(cfg.rate, &sub("rate"), "exponential services need a rate")?;
            ServiceDistribution::exponential(rate)
        }
        "deterministic" => {
            forbid(&cfg.rate, &sub("rate"), "deterministic")?;
            forbid(&cfg.shape, &sub("shape"), "deterministic")?;
            forbid(&cfg.probs, &sub("probs"), "deterministic")?;
            forbid(&cfg.rates, &sub("rates"), "deterministic")?;
            let value =
                require(cfg.value, &sub("value"), "deterministic services need a value")?;
            ServiceDistribution::deterministic(value)
        }
        "erlang" => {
            forbid(&cfg.value, &sub("value"), "erlang")?;
            forbid(&cfg.probs, &sub("probs"), "erlang")?;
            forbid(&cfg.rates, &sub("rates"), "erlang")?;
            let shape = require(cfg.shape, &sub("shape"), "erlang services need a shape")?;
            let rate = require(cfg.rate, &sub("rate"), "erlang services need a rate")?;
            ServiceDistribution::erlang(shape, rate)
        }
        "hyperexponential" => {
            forbid(&cfg.rate, &sub("rate"), "hyperexponential")?;
            forbid(&cfg.value, &sub("value"), "hyperexponential")?;
            forbid(&cfg.shape, &sub("shape"), "hyperexponential")?;
            let probs = cfg.probs.clone().ok_or_else(|| {
                Error::Config(format!("{}: hyperexponential services need probs", sub("probs")))
            })?;
            let rates = cfg.rates.clone().ok_or_else(|| {
                Error::Config(format!("{}: hyperexponential services need rates", sub("rates")))
            })?;
            ServiceDistribution::hyperexponential(probs, rates)
        }
        other => Err(Error::Config(format!(
            "{path}.family: unknown family {other:?} (expected exponential, deterministic, \
             erlang or hyperexponential)"
        ))),
    }
}

fn build_costs(cfg: &CostConfig) -> Result<CostProfile> {
    match cfg.kind.as_str() {
        "linear" => {
            forbid(&cfg.values, "model.costs.values", "linear")?;
            let c_high =
                require(cfg.c_high, "model.costs.c_high", "linear costs need c_high")?;
            let c_low = require(cfg.c_low, "model.costs.c_low", "linear costs need c_low")?;
            CostProfile::linear(c_high, c_low)
        }
        "explicit" => {
            forbid(&cfg.c_high, "model.costs.c_high", "explicit")?;
            forbid(&cfg.c_low, "model.costs.c_low", "explicit")?;
            let values = cfg.values.clone().ok_or_else(|| {
                Error::Config("model.costs.values: explicit costs need per-level values".into())
            })?;
            CostProfile::explicit(values)
        }
        other => Err(Error::Config(format!(
            "model.costs.kind: unknown kind {other:?} (expected linear or explicit)"
        ))),
    }
}

fn build_model(cfg: &ModelConfig) -> Result<DamModel> {
    DamModel::new(
        cfg.lambda,
        build_batch(&cfg.batch)?,
        build_service(&cfg.service1, "model.service1")?,
        build_service(&cfg.service2, "model.service2")?,
        cfg.level,
        cfg.j1,
        cfg.j2,
        build_costs(&cfg.costs)?,
    )
}

fn push_row(body: &mut String, quantity: &str, index: &str, value: f64) {
    let _ = writeln!(body, "{quantity},{index},{value:.11e}");
}

fn push_int(body: &mut String, quantity: &str, index: &str, value: u64) {
    let _ = writeln!(body, "{quantity},{index},{value}");
}

fn csv_output(body: String) -> RunOutput {
    RunOutput { body, summary: None, failed: false }
}

fn cmd_analyze(model: &DamModel) -> Result<RunOutput> {
    let stat = stationary_distribution(model)?;
    let obj = exact_objective(model)?;
    let mut body = String::from("quantity,index,value\n");
    push_row(&mut body, "rho1", "", model.rho1());
    push_row(&mut body, "rho2", "", model.rho2());
    push_row(&mut body, "p1", "", stat.p1);
    push_row(&mut body, "p2_service", "", stat.p2);
    push_row(&mut body, "p2_level", "", stat.p2_level);
    for (i, q) in stat.q.iter().enumerate() {
        push_row(&mut body, "q", &(i + 1).to_string(), *q);
    }
    push_row(&mut body, "objective", "", obj.value);
    push_row(&mut body, "damage_lower", "", obj.damage_lower);
    push_row(&mut body, "damage_upper", "", obj.damage_upper);
    push_row(&mut body, "water_cost", "", obj.water_cost);
    Ok(csv_output(body))
}

/// How far from criticality still counts as the critical regime.
const CRITICAL_TOL: f64 = 1e-9;

fn cmd_asymptotics(model: &DamModel, cmd: &CommandConfig) -> Result<RunOutput> {
    let rho1 = model.rho1();
    let delta = (rho1 - 1.0).abs();
    let regime = if delta <= CRITICAL_TOL {
        Regime::Critical
    } else if rho1 > 1.0 {
        Regime::Upper
    } else {
        Regime::Lower
    };
    let c = cmd.c.unwrap_or(delta * model.level as f64);
    let l_ref = cmd.l_ref.unwrap_or(model.level as u32);
    let params = HeavyTrafficParams::from_model(model, c, regime)?;
    let p = limit_p(&params)?;
    let x = params.x();
    let psi_x = psi(&model.costs, x)?;
    let eta_x = eta(&model.costs, x)?;
    let objective = match regime {
        Regime::Critical => critical_objective(&params, &model.costs, model.j1, model.j2)?,
        Regime::Upper => j_upper(&params, &model.costs, model.j1, model.j2)?,
        Regime::Lower => j_lower(&params, &model.costs, model.j1, model.j2)?,
    };

    let mut body = String::from("quantity,index,value\n");
    push_row(&mut body, "rho1", "", rho1);
    push_row(&mut body, "delta", "", delta);
    push_row(&mut body, "c", "", c);
    let sign = match regime {
        Regime::Critical => 0.0,
        Regime::Upper => 1.0,
        Regime::Lower => -1.0,
    };
    push_row(&mut body, "regime_sign", "", sign);
    push_row(&mut body, "d", "", params.d());
    push_row(&mut body, "x", "", x);
    if regime != Regime::Critical {
        let side = if regime == Regime::Upper { RootSide::BelowOne } else { RootSide::AboveOne };
        let root = find_root(model, side)?;
        push_row(&mut body, "root", "", root.value);
        push_row(&mut body, "root_residual", "", root.residual);
        push_row(&mut body, "root_expansion", "", root_expansion(&params, delta, side));
    }
    push_row(&mut body, "limit_p1", "", p.p1);
    push_row(&mut body, "limit_p2", "", p.p2);
    push_row(&mut body, "psi", "", psi_x);
    push_row(&mut body, "eta", "", eta_x);
    push_row(&mut body, "c_star", "", c_star(&model.costs));
    push_row(&mut body, "limit_objective", "", objective);
    if regime == Regime::Critical {
        for j in 0..=(l_ref.saturating_sub(1)).min(30) {
            push_row(&mut body, "limit_q", &j.to_string(), 1.0);
        }
    } else {
        for j in 0..=(l_ref.saturating_sub(1)).min(30) {
            let v = crate::asymptotics::limit_q(&params, j, l_ref)?;
            push_row(&mut body, "limit_q", &j.to_string(), v);
        }
    }
    let summary = format!(
        "regime {} at rho1 = {rho1:.6} (delta = {delta:.6}, C = {c:.6}, x = {x:.6})",
        regime.name()
    );
    Ok(RunOutput { body, summary: Some(summary), failed: false })
}

fn cmd_optimize(model: &DamModel, cmd: &CommandConfig) -> Result<RunOutput> {
    let params = HeavyTrafficParams::from_model(model, 0.0, Regime::Critical)?;
    let c_max = cmd.c_max.unwrap_or(C_MAX);
    let epsilon = cmd.epsilon.unwrap_or(C_EPSILON);
    let sol = solve_control_with(&params, &model.costs, model.j1, model.j2, c_max, epsilon)?;
    let mut body = String::from("regime,c_opt,objective,rho1_prescription\n");
    let _ = writeln!(
        body,
        "{},{:.11e},{:.11e},\"{}\"",
        sol.regime.name(),
        sol.c_opt,
        sol.objective,
        sol.rho1_prescription
    );
    let mut summary = format!(
        "optimal regime {}: C = {:.6}, limiting cost {:.9}; prescription {} (threshold L = {})",
        sol.regime.name(),
        sol.c_opt,
        sol.objective,
        sol.rho1_prescription,
        model.level
    );
    if let Some(w) = &sol.warning {
        let _ = write!(summary, "\nwarning: {w}");
    }
    Ok(RunOutput { body, summary: Some(summary), failed: false })
}

fn sweep_grid(cmd: &CommandConfig) -> Result<Vec<f64>> {
    if let Some(list) = &cmd.j2_list {
        if list.is_empty() {
            return Err(Error::Config("command.j2_list: must not be empty".into()));
        }
        return Ok(list.clone());
    }
    let start = require(cmd.j2_start, "command.j2_start", "sweep needs j2_list or a grid")?;
    let stop = require(cmd.j2_stop, "command.j2_stop", "sweep needs j2_list or a grid")?;
    let step = require(cmd.j2_step, "command.j2_step", "sweep needs j2_list or a grid")?;
    if !(step > 0.0) || stop < start {
        return Err(Error::Config(
            "command.j2_step: need j2_start <= j2_stop and j2_step > 0".into(),
        ));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

fn cmd_sweep(model: &DamModel, cmd: &CommandConfig) -> Result<RunOutput> {
    let params = HeavyTrafficParams::from_model(model, 0.0, Regime::Critical)?;
    let grid = sweep_grid(cmd)?;
    let rows = sweep_j2(&params, &model.costs, model.j1, &grid)?;
    let mut body = String::from("j2,c_opt,objective,regime\n");
    for row in &rows {
        let _ = writeln!(
            body,
            "{:.11e},{:.11e},{:.11e},{}",
            row.j2,
            row.c_opt,
            row.objective,
            row.regime.name()
        );
    }
    Ok(csv_output(body))
}

fn cmd_simulate(model: &DamModel, cmd: &CommandConfig, seed: u64) -> Result<RunOutput> {
    let events = cmd.events.unwrap_or(1_000_000);
    let reps = cmd.reps.unwrap_or(1);
    let warmup = cmd.warmup.unwrap_or(0.2);
    let r = replicate_with(model, reps, seed, events, warmup)?;
    let mut body = String::from("quantity,index,value\n");
    push_row(&mut body, "p1_hat", "", r.p1_hat);
    push_row(&mut body, "p1_se", "", r.p1_se);
    push_row(&mut body, "p2_service_hat", "", r.p2_service_hat);
    push_row(&mut body, "p2_service_se", "", r.p2_service_se);
    push_row(&mut body, "p2_level_hat", "", r.p2_level_hat);
    push_row(&mut body, "p2_level_se", "", r.p2_level_se);
    for (i, q) in r.q_hat.iter().enumerate() {
        push_row(&mut body, "q_hat", &(i + 1).to_string(), *q);
    }
    for (i, s) in r.q_se.iter().enumerate() {
        push_row(&mut body, "q_se", &(i + 1).to_string(), *s);
    }
    push_row(&mut body, "served_per_busy_period", "", r.mean_served_per_busy_period);
    push_row(&mut body, "served_se", "", r.served_se);
    push_int(&mut body, "events", "", r.events);
    push_int(&mut body, "busy_cycles", "", r.busy_cycles);
    push_row(&mut body, "total_time", "", r.total_time);
    // The run is reproducible from the config-level seed; single runs carry
    // their derived per-replication seed internally.
    push_int(&mut body, "seed", r.rng_algorithm, seed);
    Ok(csv_output(body))
}

struct Checks {
    body: String,
    failed: bool,
}

impl Checks {
    fn new() -> Self {
        Checks { body: String::new(), failed: false }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        let _ = writeln!(self.body, "{verdict} {name}: {detail}");
        if !pass {
            self.failed = true;
        }
    }

    fn skip(&mut self, name: &str, reason: &str) {
        let _ = writeln!(self.body, "SKIP {name}: {reason}");
    }
}

/// Clone the model onto a fresh threshold with the inflow rate rescaled so
/// that ρ₁ hits `rho1`; `None` when the rescaled emergency regime would be
/// unstable.
fn rescaled(model: &DamModel, rho1: f64, level: usize) -> Option<DamModel> {
    let mut m = model.clone();
    m.lambda = rho1 / (m.batch.m1() * m.b1.mean());
    m.level = level;
    if m.rho2() >= 1.0 {
        return None;
    }
    Some(m)
}

fn sim_z(est: f64, exact: f64, se: f64) -> f64 {
    (est - exact).abs() / se.max(1e-4)
}

fn cmd_validate(model: &DamModel, cmd: &CommandConfig, seed: u64) -> Result<RunOutput> {
    let mut checks = Checks::new();

    // Closed-form cross-identities on the configured model.
    let stat = stationary_distribution(model)?;
    let defect = stat.partition_defect();
    checks.check(
        "partition",
        defect < 1e-9,
        format!("|p1 + sum q + p2_level - 1| = {defect:.3e} (tol 1e-9)"),
    );

    let table = busy_table(model)?;
    let reps = linear_reps(&table, model)?;
    let idle = 1.0 / model.lambda;
    let cycle_p1 = idle / (idle + reps.t);
    let wald = (stat.p1 - cycle_p1).abs();
    checks.check(
        "renewal cycle identity",
        wald < 1e-9,
        format!("|p1 - idle/(idle + busy)| = {wald:.3e} (tol 1e-9)"),
    );

    let l = model.level;
    let trunc = (table.nu[l] - table.batch_start_mean(l, l, model) - model.batch.tail(l)).abs();
    checks.check(
        "batch truncation",
        trunc < 1e-12,
        format!("|nu_L - capped mean - tail| = {trunc:.3e} (tol 1e-12)"),
    );

    // Simulation agreement on the configured model.
    let events = cmd.events.unwrap_or(200_000).max(10_000);
    let n_reps = cmd.reps.unwrap_or(4).max(1);
    let warmup = cmd.warmup.unwrap_or(0.2);
    let r = replicate_with(model, n_reps, seed, events, warmup)?;
    let z1 = sim_z(r.p1_hat, stat.p1, r.p1_se);
    checks.check("simulation p1", z1 <= 3.0, format!("|z| = {z1:.2} (tol 3 s.e.)"));
    let z2 = sim_z(r.p2_service_hat, stat.p2, r.p2_service_se);
    checks.check("simulation p2 (service)", z2 <= 3.0, format!("|z| = {z2:.2} (tol 3 s.e.)"));
    if matches!(model.b1, ServiceDistribution::Exponential { .. }) {
        let zl = sim_z(r.p2_level_hat, stat.p2_level, r.p2_level_se);
        checks.check("simulation p2 (level)", zl <= 3.0, format!("|z| = {zl:.2} (tol 3 s.e.)"));
        // The per-level comparison takes a maximum over L simultaneous checks whose
        // standard errors carry few degrees of freedom, so the familywise bound is
        // one s.e. wider than the scalar checks above.
        let zq = (0..l)
            .map(|i| sim_z(r.q_hat[i], stat.q[i], r.q_se[i]))
            .fold(0.0_f64, f64::max);
        checks.check("simulation q", zq <= 4.0, format!("max |z| = {zq:.2} (tol 4 s.e.)"));
    } else {
        let why = "the per-level law and the above-threshold occupancy are exact only for \
                   exponential normal-regime outflow";
        checks.skip("simulation p2 (level)", why);
        checks.skip("simulation q", why);
    }

    // Exact-vs-limit scaling diagnostics with the configured input laws.
    match rescaled(model, 1.0, 400) {
        Some(m) => {
            let s = stationary_distribution(&m)?;
            let params = HeavyTrafficParams::from_model(&m, 0.0, Regime::Critical)?;
            let p = limit_p(&params)?;
            let rel = (400.0 * s.p1 / p.p1 - 1.0).abs();
            checks.check(
                "critical scaling",
                rel < 0.10,
                format!("|L*p1/limit - 1| = {rel:.3} at L = 400 (tol 0.10)"),
            );
        }
        None => checks.skip("critical scaling", "rescaling to rho1 = 1 destabilizes rho2"),
    }
    let delta = 1.0 / 200.0;
    match rescaled(model, 1.0 + delta, 200) {
        Some(m) => {
            let s = stationary_distribution(&m)?;
            let params = HeavyTrafficParams::from_model(&m, 1.0, Regime::Upper)?;
            let p = limit_p(&params)?;
            let rel = (s.p1 / delta / p.p1 - 1.0).abs();
            checks.check(
                "above-critical scaling",
                rel < 0.05,
                format!("|p1/(delta*limit) - 1| = {rel:.3} at L = 200, C = 1 (tol 0.05)"),
            );
        }
        None => checks.skip("above-critical scaling", "rescaling destabilizes rho2"),
    }
    match rescaled(model, 1.0 - delta, 200) {
        Some(m) => {
            let s = stationary_distribution(&m)?;
            let params = HeavyTrafficParams::from_model(&m, 1.0, Regime::Lower)?;
            // First-passage constant e^x/(e^x - 1): the true limit of
            // p1/delta below criticality (see the asymptotics module docs
            // on the surrogate closed form).
            let x = params.x();
            let truth = x.exp() / x.exp_m1();
            let rel = (s.p1 / delta / truth - 1.0).abs();
            checks.check(
                "below-critical scaling",
                rel < 0.05,
                format!("|p1/(delta*limit) - 1| = {rel:.3} at L = 200, C = 1 (tol 0.05)"),
            );
        }
        None => checks.skip("below-critical scaling", "rescaling destabilizes rho2"),
    }

    let failed = checks.failed;
    let summary =
        if failed { "validation FAILED".to_string() } else { "validation passed".to_string() };
    Ok(RunOutput { body: checks.body, summary: Some(summary), failed })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MM1: &str = r#"
        [model]
        lambda = 0.5
        level = 12

        [model.batch]
        kind = "unit"

        [model.service1]
        family = "exponential"
        rate = 1.0

        [model.service2]
        family = "exponential"
        rate = 1.0

        [model.costs]
        kind = "linear"
        c_high = 2.0
        c_low = 1.0

        [command]
        name = "analyze"
    "#;

    fn rows(body: &str) -> Vec<(String, String, String)> {
        body.lines()
            .skip(1)
            .map(|line| {
                let mut parts = line.splitn(3, ',');
                (
                    parts.next().unwrap_or_default().to_string(),
                    parts.next().unwrap_or_default().to_string(),
                    parts.next().unwrap_or_default().to_string(),
                )
            })
            .collect()
    }

    fn value(body: &str, quantity: &str, index: &str) -> f64 {
        rows(body)
            .iter()
            .find(|(q, i, _)| q == quantity && i == index)
            .map(|(_, _, v)| v.parse().unwrap())
            .unwrap_or_else(|| panic!("missing row {quantity},{index}"))
    }

    #[test]
    fn analyze_matches_the_reference_queue_law() {
        let config = parse_config(MM1).unwrap();
        let out = run(&config, None).unwrap();
        assert!(out.body.starts_with("quantity,index,value\n"));
        let rho: f64 = 0.5;
        for i in 1..=12 {
            let q = value(&out.body, "q", &i.to_string());
            let oracle = (1.0 - rho) * rho.powi(i);
            assert!((q - oracle).abs() < 1e-8, "q_{i} = {q} vs {oracle}");
        }
        assert!((value(&out.body, "p1", "") - 0.5).abs() < 1e-8);
    }

    #[test]
    fn rejects_unknown_fields_and_misplaced_parameters() {
        let bad = MM1.replace("lambda = 0.5", "lambda = 0.5\n        typo_field = 1");
        assert!(matches!(parse_config(&bad), Err(Error::Config(_))));

        let misplaced = MM1.replace("kind = \"unit\"", "kind = \"unit\"\n        q = 0.5");
        let err = run(&parse_config(&misplaced).unwrap(), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("model.batch.q"));

        let missing = MM1.replace("kind = \"unit\"", "kind = \"geometric\"");
        let err = run(&parse_config(&missing).unwrap(), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unstable_configs_exit_with_the_numeric_code() {
        let unstable = MM1
            .replace("lambda = 0.5", "lambda = 1.2")
            .replace("name = \"analyze\"", "name = \"simulate\"\n        events = 10000");
        let err = run(&parse_config(&unstable).unwrap(), None).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("rho2 < 1"), "message: {err}");
    }

    /// Unit batches with a deterministic unit normal service at λ = 1 give
    /// Ες = Ες² = ρ̃₁,₂ = 1 and ρ₂ = 0.5: the reference control scenario.
    fn scenario_b(j2: f64, command: &str) -> String {
        format!(
            r#"
            [model]
            lambda = 1.0
            level = 100
            j1 = 1.0
            j2 = {j2}

            [model.batch]
            kind = "unit"

            [model.service1]
            family = "deterministic"
            value = 1.0

            [model.service2]
            family = "deterministic"
            value = 0.5

            [model.costs]
            kind = "linear"
            c_high = 2.0
            c_low = 1.0

            {command}
            "#
        )
    }

    #[test]
    fn optimize_reproduces_a_reference_row() {
        let toml = scenario_b(1.20, "[command]\n            name = \"optimize\"");
        let out = run(&parse_config(&toml).unwrap(), None).unwrap();
        let line = out.body.lines().nth(1).unwrap();
        assert!(line.starts_with("upper,"), "row: {line}");
        let c_opt: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((c_opt - 0.090).abs() < 0.005, "C = {c_opt}");
        assert!(line.contains("rho1 = 1 + "));
    }

    #[test]
    fn sweep_emits_one_row_per_grid_point() {
        let toml = scenario_b(
            1.0,
            "[command]\n            name = \"sweep\"\n            j2_start = 1.06\n            \
             j2_stop = 1.10\n            j2_step = 0.02",
        );
        let out = run(&parse_config(&toml).unwrap(), None).unwrap();
        let lines: Vec<&str> = out.body.lines().collect();
        assert_eq!(lines[0], "j2,c_opt,objective,regime");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with("upper"));
    }

    #[test]
    fn simulate_honors_the_seed_override() {
        let toml = MM1.replace(
            "name = \"analyze\"",
            "name = \"simulate\"\n        events = 20000\n        seed = 42",
        );
        let config = parse_config(&toml).unwrap();
        let a = run(&config, None).unwrap();
        let b = run(&config, None).unwrap();
        assert_eq!(a.body, b.body);
        let c = run(&config, Some(7)).unwrap();
        assert_ne!(a.body, c.body);
        assert!(a.body.contains("seed,chacha12,42"));
        assert!(c.body.contains("seed,chacha12,7"));
    }

    #[test]
    fn asymptotics_reports_the_regime_and_roots() {
        let toml = MM1.replace("name = \"analyze\"", "name = \"asymptotics\"");
        let out = run(&parse_config(&toml).unwrap(), None).unwrap();
        assert_eq!(value(&out.body, "regime_sign", ""), -1.0);
        // Ordinary Poisson input with exponential normal outflow: τ = 1/ρ₁.
        assert!((value(&out.body, "root", "") - 2.0).abs() < 1e-9);
        assert!(value(&out.body, "limit_q", "0") > 0.0);
    }

    #[test]
    fn validate_passes_on_a_well_posed_model() {
        let toml = r#"
            [model]
            lambda = 0.5
            level = 10

            [model.batch]
            kind = "geometric"
            q = 0.5

            [model.service1]
            family = "exponential"
            rate = 1.0

            [model.service2]
            family = "exponential"
            rate = 2.0

            [model.costs]
            kind = "linear"
            c_high = 2.0
            c_low = 1.0

            [command]
            name = "validate"
            events = 60000
            reps = 4
            seed = 7
        "#;
        let out = run(&parse_config(toml).unwrap(), None).unwrap();
        assert!(!out.failed, "body:\n{}", out.body);
        assert!(out.body.contains("PASS partition"));
        assert!(out.body.contains("PASS renewal cycle identity"));
        assert!(out.body.contains("PASS batch truncation"));
        assert!(out.body.contains("PASS below-critical scaling"));
        assert!(!out.body.contains("FAIL"));
    }
}
