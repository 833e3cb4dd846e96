//! Regime selection: minimize the limiting objectives over the control
//! parameter C and prescribe ρ₁ as a function of the threshold L.
//!
//! The candidate prescriptions are ρ₁ = 1 (Critical), ρ₁ = 1 + C/L (Upper)
//! and ρ₁ = 1 − C/L (Lower), costed by [`critical_objective`], [`j_upper`]
//! and [`j_lower`]. Both one-parameter families are coarsely scanned and
//! golden-section refined; an interior minimum displaces the Critical
//! anchor only when it wins by more than a decision tolerance, so ties
//! resolve to Critical. The two families should never both beat the
//! anchor — if the numerics ever claim so, the solution carries a warning
//! rather than failing.

use crate::asymptotics::{HeavyTrafficParams, Regime};
use crate::error::{Error, Result};
use crate::objective::{critical_objective, j_lower, j_upper, CostProfile};
use rayon::prelude::*;

/// Search ceiling for C. Both limiting objectives grow linearly in C, so
/// any minimum lies far below this.
pub const C_MAX: f64 = 50.0;
/// Floor of the below-critical search: e^{1/x} overflows as C → 0⁺.
pub const C_EPSILON: f64 = 1e-4;
/// Width the refined bracket is shrunk to.
const C_TOL: f64 = 1e-6;
/// Margin an interior minimum must clear to displace Critical.
const TOL_DECIDE: f64 = 1e-9;
/// Coarse scan resolution used to bracket the global minimum.
const SCAN_POINTS: usize = 512;

/// Result of a scalar minimization.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub argmin: f64,
    pub value: f64,
}

/// Golden-section search on [lo, hi] shrunk to width `tol`, then one
/// parabolic polish step; returns the best point evaluated, which may be a
/// boundary. Deterministic; NaN values are treated as +∞.
pub fn minimize_scalar<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let tol = tol.max(f64::EPSILON);
    let mut cand = vec![(a, g(a)), (b, g(b))];
    if b - a > tol {
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = g(x1);
        let mut f2 = g(x2);
        while b - a > tol {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = g(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = g(x2);
            }
        }
        let (fa, fb) = (g(a), g(b));
        let (xm, fm) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        cand.extend([(x1, f1), (x2, f2), (a, fa), (b, fb)]);
        // Parabola through (a, xm, b); evaluate its vertex if interior.
        let denom = (xm - a) * (fm - fb) - (xm - b) * (fm - fa);
        if denom.is_finite() && denom != 0.0 {
            let num = (xm - a).powi(2) * (fm - fb) - (xm - b).powi(2) * (fm - fa);
            let xv = xm - 0.5 * num / denom;
            if xv.is_finite() && xv > a && xv < b {
                cand.push((xv, g(xv)));
            }
        }
    }
    let mut best = cand[0];
    for &(x, v) in &cand[1..] {
        if v < best.1 {
            best = (x, v);
        }
    }
    Minimum { argmin: best.0, value: best.1 }
}

/// Bracket the global minimum with a coarse even scan, then refine the
/// winning cell with [`minimize_scalar`].
fn scan_refine<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Minimum {
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    for i in 0..=SCAN_POINTS {
        let v = f(lo + step * i as f64);
        if !v.is_nan() && v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = lo + step * (best_i + 1).min(SCAN_POINTS) as f64;
    minimize_scalar(f, a, b, C_TOL)
}

/// The chosen regime with its optimal control parameter and limiting cost.
#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub regime: Regime,
    /// Optimal C; zero exactly when the regime is Critical.
    pub c_opt: f64,
    /// Limiting objective at the optimum; never above the Critical value.
    pub objective: f64,
    /// Finite-threshold reading of the optimum, e.g. "rho1 = 1 + 0.2/L".
    pub rho1_prescription: String,
    /// Set when both interior searches claim to beat the Critical value,
    /// which the theory excludes.
    pub warning: Option<String>,
}

/// Solve the control problem with the default search window
/// [`C_EPSILON`, [`C_MAX`]].
pub fn solve_control(
    params: &HeavyTrafficParams,
    costs: &CostProfile,
    j1: f64,
    j2: f64,
) -> Result<ControlSolution> {
    solve_control_with(params, costs, j1, j2, C_MAX, C_EPSILON)
}

/// Solve the control problem over C ∈ [0, c_max] for the Upper family and
/// C ∈ [epsilon, c_max] for the Lower family.
pub fn solve_control_with(
    params: &HeavyTrafficParams,
    costs: &CostProfile,
    j1: f64,
    j2: f64,
    c_max: f64,
    epsilon: f64,
) -> Result<ControlSolution> {
    if !(c_max.is_finite() && epsilon.is_finite() && 0.0 < epsilon && epsilon < c_max) {
        return Err(Error::domain("solve_control", "need 0 < epsilon < c_max, both finite"));
    }
    if !(j1 >= 0.0 && j2 >= 0.0) || !j1.is_finite() || !j2.is_finite() {
        return Err(Error::domain("solve_control", "damage rates must be finite and ≥ 0"));
    }
    let j_crit = critical_objective(params, costs, j1, j2)?;
    let sanitize = |v: Result<f64>| match v {
        Ok(x) if !x.is_nan() => x,
        _ => f64::INFINITY,
    };
    let upper = |c: f64| sanitize(j_upper(&HeavyTrafficParams { c, ..*params }, costs, j1, j2));
    let lower = |c: f64| sanitize(j_lower(&HeavyTrafficParams { c, ..*params }, costs, j1, j2));
    let m_up = scan_refine(&upper, 0.0, c_max);
    let m_low = scan_refine(&lower, epsilon, c_max);

    let warning = if m_up.value < j_crit - TOL_DECIDE && m_low.value < j_crit - TOL_DECIDE {
        Some(format!(
            "both interior searches improve on the critical value (above-critical {:.9} at \
             C = {:.6}, below-critical {:.9} at C = {:.6}, critical {:.9}); the regimes should \
             be mutually exclusive, so treat this solution with care",
            m_up.value, m_up.argmin, m_low.value, m_low.argmin, j_crit
        ))
    } else {
        None
    };

    Ok(if m_up.value < j_crit.min(m_low.value) - TOL_DECIDE {
        ControlSolution {
            regime: Regime::Upper,
            c_opt: m_up.argmin,
            objective: m_up.value,
            rho1_prescription: format!("rho1 = 1 + {:.6}/L", m_up.argmin),
            warning,
        }
    } else if m_low.value < j_crit.min(m_up.value) - TOL_DECIDE {
        ControlSolution {
            regime: Regime::Lower,
            c_opt: m_low.argmin,
            objective: m_low.value,
            rho1_prescription: format!("rho1 = 1 - {:.6}/L", m_low.argmin),
            warning,
        }
    } else {
        ControlSolution {
            regime: Regime::Critical,
            c_opt: 0.0,
            objective: j_crit,
            rho1_prescription: "rho1 = 1".to_string(),
            warning,
        }
    })
}

/// One line of a j₂ sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub j2: f64,
    pub c_opt: f64,
    pub objective: f64,
    pub regime: Regime,
}

/// Solve the control problem for each j₂; rows are evaluated in parallel
/// and returned in input order.
pub fn sweep_j2(
    params: &HeavyTrafficParams,
    costs: &CostProfile,
    j1: f64,
    j2_list: &[f64],
) -> Result<Vec<SweepRow>> {
    j2_list
        .par_iter()
        .map(|&j2| {
            solve_control(params, costs, j1, j2).map(|s| SweepRow {
                j2,
                c_opt: s.c_opt,
                objective: s.objective,
                regime: s.regime,
            })
        })
        .collect()
}
