//! End-to-end acceptance gate: seven criteria, one PASS/FAIL line each on
//! stdout, exiting nonzero only when an outcome deviates from the analysis
//! documented inline.
//!
//! Two sub-checks compare computed optima and limits against quoted
//! reference constants that the exact computation contradicts (the
//! near-threshold sweep entry C(1.33) = 0.010 and the below-critical
//! limiting constant e^(1/x)). Their criteria print FAIL with the
//! contradiction spelled out, and the gate expects exactly that verdict —
//! a silent flip in either direction fails the build just like any other
//! regression.

use std::process::ExitCode;
use std::time::Instant;

use damq::asymptotics::{
    find_root, limit_p, limit_q, root_expansion, HeavyTrafficParams, Regime, RootSide,
};
use damq::control::sweep_j2;
use damq::dist::{BatchDistribution, ServiceDistribution};
use damq::objective::{c_star, eta, exact_objective, j_upper, psi, CostProfile};
use damq::sim::replicate;
use damq::stationary::stationary_distribution;
use damq::takacs::{busy_table, linear_reps};
use damq::{DamModel, Result};

const SIM_SEED: u64 = 67;

fn main() -> ExitCode {
    let mut divergent: Vec<&str> = Vec::new();
    let criteria: [(&str, fn() -> Result<Verdict>); 7] = [
        ("criterion 1 (reference control sweep)", reference_control_sweep),
        ("criterion 2 (first-order threshold)", first_order_threshold),
        ("criterion 3 (exact law versus simulation)", exact_law_versus_simulation),
        ("criterion 4 (limit-theorem convergence)", limit_theorem_convergence),
        ("criterion 5 (characteristic roots)", characteristic_roots),
        ("criterion 6 (water-cost limit identities)", water_cost_identities),
        ("criterion 7 (structural invariants)", structural_invariants),
    ];
    for (name, criterion) in criteria {
        match criterion() {
            Ok(v) => {
                println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
                for note in &v.notes {
                    println!("    {note}");
                }
                if !v.as_documented {
                    divergent.push(name);
                }
            }
            Err(e) => {
                println!("FAIL {name}: did not complete: {e}");
                divergent.push(name);
            }
        }
    }
    if divergent.is_empty() {
        println!("acceptance gate: every criterion matches its documented outcome");
        ExitCode::SUCCESS
    } else {
        println!("acceptance gate: unexpected outcome in {}", divergent.join(", "));
        ExitCode::FAILURE
    }
}

struct Verdict {
    /// Did every comparison inside the criterion hold at its tolerance?
    pass: bool,
    /// Does the outcome match the documented analysis? Differs from `pass`
    /// only for the two comparisons whose quoted constants are themselves
    /// wrong, where the expected outcome is a specific near-miss.
    as_documented: bool,
    detail: String,
    notes: Vec<String>,
}

impl Verdict {
    fn plain(pass: bool, detail: String) -> Self {
        Verdict { pass, as_documented: pass, detail, notes: Vec::new() }
    }
}

/// Limit moments shared by the sweep scenario: Eς = Eς² = ρ̃₁,₂ = 1 (so
/// D = 1 and x = 2C), ρ₂ = 1/2; carrier C/regime are overridden per call.
fn scenario_b() -> HeavyTrafficParams {
    HeavyTrafficParams::new(1.0, 1.0, 1.0, 0.5, 0.0, Regime::Critical).unwrap()
}

/// A finite dam realizing the sweep scenario's limit moments at ρ₁ = 1 + c/L:
/// single-unit batches, deterministic unit normal outflow (so λ²ΕB₁² = λ² → 1),
/// deterministic emergency outflow with ρ₂ → 1/2.
fn scenario_b_model(level: usize, c: f64) -> Result<DamModel> {
    DamModel::new(
        1.0 + c / level as f64,
        BatchDistribution::unit(),
        ServiceDistribution::deterministic(1.0)?,
        ServiceDistribution::deterministic(0.5)?,
        level,
        1.0,
        1.2,
        CostProfile::linear(2.0, 1.0)?,
    )
}

/// Geometric(1/2) batches, Exponential(1) normal outflow, Exponential(2)
/// emergency outflow, λ = 1/2: ρ₁ = 1 and ρ₂ = 1/2.
fn geometric_model(level: usize) -> Result<DamModel> {
    DamModel::new(
        0.5,
        BatchDistribution::geometric(0.5)?,
        ServiceDistribution::exponential(1.0)?,
        ServiceDistribution::exponential(2.0)?,
        level,
        1.0,
        1.0,
        CostProfile::linear(2.0, 1.0)?,
    )
}

/// Single-unit batches with Exponential(1) normal outflow: ρ₁ = λ = `rho1`
/// and ρ₂ = rho1/2.
fn unit_model(rho1: f64, level: usize) -> Result<DamModel> {
    DamModel::new(
        rho1,
        BatchDistribution::unit(),
        ServiceDistribution::exponential(1.0)?,
        ServiceDistribution::exponential(2.0)?,
        level,
        1.0,
        1.0,
        CostProfile::linear(2.0, 1.0)?,
    )
}

/// Smallest j₂ on the 0.01 grid over [1.30, 1.40] whose optimal control
/// parameter is exactly zero (i.e. the Critical regime wins).
fn smallest_zero_crossing(costs: &CostProfile) -> Result<Option<f64>> {
    let grid: Vec<f64> = (130..=140).map(|k| f64::from(k) / 100.0).collect();
    let rows = sweep_j2(&scenario_b(), costs, 1.0, &grid)?;
    Ok(rows.iter().find(|r| r.c_opt == 0.0).map(|r| r.j2))
}

/// The limiting objective of the sweep scenario at control parameter `c`.
fn scenario_b_objective(c: f64, j2: f64) -> Result<f64> {
    let costs = CostProfile::linear(2.0, 1.0)?;
    j_upper(&HeavyTrafficParams { c, ..scenario_b() }, &costs, 1.0, j2)
}

fn reference_control_sweep() -> Result<Verdict> {
    let start = Instant::now();
    let costs = CostProfile::linear(2.0, 1.0)?;
    let table = [
        (1.06, 0.200),
        (1.08, 0.182),
        (1.10, 0.165),
        (1.12, 0.149),
        (1.14, 0.134),
        (1.16, 0.120),
        (1.18, 0.104),
        (1.20, 0.090),
        (1.25, 0.055),
        (1.30, 0.022),
        (1.33, 0.010),
    ];
    let j2s: Vec<f64> = table.iter().map(|&(j2, _)| j2).collect();
    let rows = sweep_j2(&scenario_b(), &costs, 1.0, &j2s)?;
    let misses: Vec<String> = rows
        .iter()
        .zip(&table)
        .filter(|(row, &(_, c_ref))| (row.c_opt - c_ref).abs() > 0.005)
        .map(|(row, &(_, c_ref))| format!("j2 = {}: C = {:.6} vs {c_ref}", row.j2, row.c_opt))
        .collect();
    let crossing = smallest_zero_crossing(&costs)?;
    let elapsed = start.elapsed().as_secs_f64();

    // Every miss must be the 1.33 entry, whose solver value is pinned below.
    let others_ok = misses.len() == 1 && misses[0].starts_with("j2 = 1.33");
    let c133 = rows.last().map_or(f64::NAN, |r| r.c_opt);
    let c133_documented = (c133 - 0.002146).abs() < 5e-4;
    let cross_ok = crossing.is_some_and(|j2| (1.33..=1.35).contains(&j2));
    let time_ok = elapsed < 10.0;
    let crossing_text = crossing.map_or_else(|| "none".to_string(), |j2| format!("{j2:.2}"));

    Ok(Verdict {
        pass: misses.is_empty() && cross_ok && time_ok,
        as_documented: others_ok && c133_documented && cross_ok && time_ok,
        detail: format!(
            "{}/11 reference optima within ±0.005 [{}]; smallest j2 with C = 0 is {crossing_text} \
             (want within [1.33, 1.35]); {elapsed:.1} s (budget 10 s)",
            11 - misses.len(),
            misses.join("; "),
        ),
        notes: vec![format!(
            "the quoted entry C(1.33) = 0.010 is not a minimizer of the limiting objective it \
             belongs to: J(0.010) = {:.7} exceeds the critical value J(0) = {:.7}; the computed \
             argmin is C = {c133:.6}, improving on critical by under 2e-6 because j2 = 1.33 sits \
             only 0.0033 below the first-order threshold j1 + (c_high - c_low)/3 = 4/3 where the \
             objective goes flat",
            scenario_b_objective(0.010, 1.33)?,
            scenario_b_objective(0.0, 1.33)?,
        )],
    })
}

fn first_order_threshold() -> Result<Verdict> {
    let costs = CostProfile::linear(2.0, 1.0)?;
    let j2_star = 1.0 + (2.0 - 1.0) / 3.0;
    Ok(match smallest_zero_crossing(&costs)? {
        Some(j2) => Verdict::plain(
            (j2 - j2_star).abs() <= 0.01 + 1e-12,
            format!(
                "analytic threshold j1 + (c_high - c_low)/3 = {j2_star:.4}; the sweep's zero \
                 crossing is {j2:.2}; |difference| = {:.4} (tol 0.01 grid)",
                (j2 - j2_star).abs()
            ),
        ),
        None => {
            Verdict::plain(false, "no zero crossing on the 0.01 grid in [1.30, 1.40]".to_string())
        }
    })
}

fn exact_law_versus_simulation() -> Result<Verdict> {
    let start = Instant::now();
    let model = geometric_model(10)?;
    let stat = stationary_distribution(&model)?;
    let r = replicate(&model, 8, SIM_SEED, 1_000_000)?;
    let mut worst = (0.0_f64, String::new());
    {
        let mut push = |name: String, diff: f64, se: f64| {
            let z = diff.abs() / se;
            if z > worst.0 {
                worst = (z, name);
            }
        };
        push("p1".to_string(), r.p1_hat - stat.p1, r.p1_se);
        push("p2".to_string(), r.p2_service_hat - stat.p2, r.p2_service_se);
        for i in 0..model.level {
            push(format!("q{}", i + 1), r.q_hat[i] - stat.q[i], r.q_se[i]);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(Verdict::plain(
        worst.0 <= 3.0 && elapsed < 60.0,
        format!(
            "12 exact-vs-simulated comparisons over 8x10^6 events: worst |z| = {:.2} ({}) \
             against 3 pooled s.e.; {elapsed:.1} s (budget 60 s)",
            worst.0, worst.1
        ),
    ))
}

fn limit_theorem_convergence() -> Result<Verdict> {
    // (a), (b): critical scaling of the empty-dam mass and the near-top levels.
    let m = geometric_model(400)?;
    let stat = stationary_distribution(&m)?;
    let crit = HeavyTrafficParams::from_model(&m, 0.0, Regime::Critical)?;
    let rel_a = (400.0 * stat.p1 / limit_p(&crit)?.p1 - 1.0).abs();
    let mut rel_b = 0.0_f64;
    for j in 0..3_u32 {
        let lim = limit_q(&crit, j, 400)?;
        rel_b = rel_b.max((400.0 * stat.q[399 - j as usize] / lim - 1.0).abs());
    }

    // (c): δ-scaled empty-dam mass at C = 1, L = 200 in both off-critical regimes.
    let delta = 1.0 / 200.0;
    let up = unit_model(1.0 + delta, 200)?;
    let p_up = HeavyTrafficParams::from_model(&up, 1.0, Regime::Upper)?;
    let scaled_up = stationary_distribution(&up)?.p1 / delta;
    let rel_c_upper = (scaled_up / limit_p(&p_up)?.p1 - 1.0).abs();

    let low = unit_model(1.0 - delta, 200)?;
    let p_low = HeavyTrafficParams::from_model(&low, 1.0, Regime::Lower)?;
    let scaled_low = stationary_distribution(&low)?.p1 / delta;
    let stated = limit_p(&p_low)?.p1;
    let rel_c_lower = (scaled_low / stated - 1.0).abs();
    let x = p_low.x();
    let true_constant = x.exp() / x.exp_m1();
    let rel_c_true = (scaled_low / true_constant - 1.0).abs();

    // (d): exact long-run cost against the limiting objective at C = 0.2.
    let bm = scenario_b_model(400, 0.2)?;
    let exact = exact_objective(&bm)?.value;
    let lim =
        j_upper(&HeavyTrafficParams::from_model(&bm, 0.2, Regime::Upper)?, &bm.costs, bm.j1, bm.j2)?;
    let rel_d = (exact / lim - 1.0).abs();

    let a_ok = rel_a <= 0.10;
    let b_ok = rel_b <= 0.10;
    let c_upper_ok = rel_c_upper <= 0.05;
    let c_lower_stated = rel_c_lower <= 0.05;
    let d_ok = rel_d <= 0.05;
    Ok(Verdict {
        pass: a_ok && b_ok && c_upper_ok && c_lower_stated && d_ok,
        as_documented: a_ok
            && b_ok
            && c_upper_ok
            && !c_lower_stated
            && rel_c_true <= 0.05
            && d_ok,
        detail: format!(
            "(a) L*p1 off by {rel_a:.3} (tol 0.10); (b) L*q off by {rel_b:.3} (tol 0.10); \
             (c) p1/delta off by {rel_c_upper:.3} above / {rel_c_lower:.3} below (tol 0.05); \
             (d) exact cost off by {rel_d:.3} from its limit (tol 0.05)"
        ),
        notes: vec![format!(
            "the below-critical comparison constant e^(1/x) = {stated:.4} is not the limit of \
             this family: the exact scaled mass is {scaled_low:.4} at L = 200 and converges to \
             e^x/(e^x - 1) = {true_constant:.4} (relative gap {rel_c_true:.3}); the above-critical \
             form and the occupancy limits are genuine limits and hold comfortably"
        )],
    })
}

fn characteristic_roots() -> Result<Verdict> {
    // With Exponential(μ) normal outflow and single-unit batches the root
    // equation is a quadratic whose non-unit root is exactly 1/ρ₁ on both
    // sides of criticality.
    let phi = find_root(&unit_model(1.25, 8)?, RootSide::BelowOne)?;
    let tau = find_root(&unit_model(0.8, 8)?, RootSide::AboveOne)?;
    let err_phi = (phi.value - 1.0 / 1.25).abs();
    let err_tau = (tau.value - 1.0 / 0.8).abs();

    let mut worst = 0.0_f64;
    for &delta in &[0.04, 0.02, 0.01] {
        for (rho1, side) in [(1.0 + delta, RootSide::BelowOne), (1.0 - delta, RootSide::AboveOne)]
        {
            let m = unit_model(rho1, 8)?;
            let params = HeavyTrafficParams::from_model(&m, 0.0, Regime::Critical)?;
            let numeric = find_root(&m, side)?.value;
            worst = worst.max((numeric - root_expansion(&params, delta, side)).abs() / delta / delta);
        }
    }
    Ok(Verdict::plain(
        err_phi <= 1e-10 && err_tau <= 1e-10 && worst <= 5.0,
        format!(
            "reciprocal-load roots off by {err_phi:.1e} / {err_tau:.1e} (tol 1e-10); worst \
             |root - expansion| / delta^2 = {worst:.2} over both sides (tol 5)"
        ),
    ))
}

fn water_cost_identities() -> Result<Verdict> {
    let costs = CostProfile::linear(2.0, 1.0)?;
    let mut worst_sum = 0.0_f64;
    for &x in &[0.5, 1.0, 2.0, 5.0] {
        worst_sum = worst_sum.max((psi(&costs, x)? + eta(&costs, x)? - 3.0).abs());
    }
    let grid: Vec<f64> = (0..=40).map(|k| f64::from(k) * 0.125).collect();
    let mut monotone = true;
    for w in grid.windows(2) {
        monotone &= psi(&costs, w[1])? < psi(&costs, w[0])?;
        monotone &= eta(&costs, w[1])? > eta(&costs, w[0])?;
    }
    let mid = c_star(&costs);
    let err0 = (psi(&costs, 0.0)? - mid).abs().max((eta(&costs, 0.0)? - mid).abs());
    Ok(Verdict::plain(
        worst_sum <= 1e-10 && monotone && err0 <= 1e-10,
        format!(
            "psi + eta off from c_high + c_low by {worst_sum:.1e} (tol 1e-10); psi strictly \
             decreasing and eta strictly increasing across [0, 5]: {monotone}; psi(0) and eta(0) \
             off from c* by {err0:.1e} (tol 1e-10)"
        ),
    ))
}

fn structural_invariants() -> Result<Verdict> {
    let batches = [
        BatchDistribution::unit(),
        BatchDistribution::explicit(vec![0.6, 0.3, 0.1])?,
        BatchDistribution::geometric(0.5)?,
    ];
    let services = [ServiceDistribution::exponential(1.0)?, ServiceDistribution::erlang(2, 2.0)?];
    let level = 40;
    let mut models = 0;
    let (mut worst_partition, mut worst_wald, mut worst_truncation) = (0.0_f64, 0.0_f64, 0.0_f64);
    for batch in &batches {
        for b1 in &services {
            for rho1 in [0.95, 1.15] {
                let lambda = rho1 / (batch.m1() * b1.mean());
                // Emergency outflow pinned at ρ₂ = 0.6 in every cell.
                let b2 = ServiceDistribution::exponential(lambda * batch.m1() / 0.6)?;
                let model = DamModel::new(
                    lambda,
                    batch.clone(),
                    b1.clone(),
                    b2,
                    level,
                    1.0,
                    1.0,
                    CostProfile::linear(2.0, 1.0)?,
                )?;
                let stat = stationary_distribution(&model)?;
                worst_partition = worst_partition.max(stat.partition_defect());
                let table = busy_table(&model)?;
                let reps = linear_reps(&table, &model)?;
                let idle = 1.0 / lambda;
                worst_wald = worst_wald.max((stat.p1 - idle / (idle + reps.t)).abs());
                let conditioned = table.batch_start_mean(level, level, &model);
                worst_truncation = worst_truncation
                    .max((table.nu[level] - conditioned - model.batch.tail(level)).abs());
                models += 1;
            }
        }
    }
    Ok(Verdict::plain(
        models == 12 && worst_partition <= 1e-9 && worst_wald <= 1e-9 && worst_truncation <= 1e-12,
        format!(
            "{models} models (3 batch laws x 2 outflow families x 2 loads): worst partition \
             defect {worst_partition:.1e} (tol 1e-9); worst renewal-reward gap {worst_wald:.1e} \
             (tol 1e-9); worst batch-truncation gap {worst_truncation:.1e} (tol 1e-12)"
        ),
    ))
}
