//! Cost functionals: the exact finite-threshold objective and its
//! heavy-traffic limits.
//!
//! The running cost has three parts: damage j₁L paid while the dam sits
//! empty, damage j₂L paid while the emergency outflow works, and a water
//! cost cᵢ per unit time at level i. Costs are non-increasing in the level
//! (water near the bottom is precious). In the scaled regimes the water
//! term collapses to ψ(x) (Upper) or η(x) (Lower) — weighted averages of
//! the cost profile near the top of the dam with geometric weights — and
//! the whole objective becomes a one-variable function of the control
//! parameter C through x = 2CΕς/D.

use crate::asymptotics::{limit_p, HeavyTrafficParams, Regime};
use crate::error::{Error, Result};
use crate::model::DamModel;
use crate::stationary::stationary_distribution;

/// Internal resolution for the limit sums behind ψ/η on explicit profiles;
/// the value is Richardson-extrapolated from sums at `L_INT` and `2·L_INT`.
const L_INT: usize = 100_000;
/// Beyond this exponent the geometric weights are supported entirely on one
/// end of the profile and the sums return the endpoint cost directly.
const X_ENDPOINT: f64 = 1.0e3;

/// Per-level water cost: either the two-point linear family recalculated to
/// any threshold, or an explicit per-level table.
#[derive(Debug, Clone, PartialEq)]
pub enum CostProfile {
    Linear { c_high: f64, c_low: f64 },
    Explicit(Vec<f64>),
}

impl CostProfile {
    /// Linear profile from c̄ at the lowest level down to c̲ at the top.
    pub fn linear(c_high: f64, c_low: f64) -> Result<Self> {
        if !c_high.is_finite() || !c_low.is_finite() || c_low < 0.0 || c_high < c_low {
            return Err(Error::domain(
                "cost_profile",
                "linear costs need finite c_high ≥ c_low ≥ 0",
            ));
        }
        Ok(CostProfile::Linear { c_high, c_low })
    }

    /// Explicit per-level costs c₁..c_L, non-increasing and non-negative.
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("cost_profile", "explicit costs need at least one level"));
        }
        if values.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::domain("cost_profile", "costs must be finite and non-negative"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::domain("cost_profile", "costs must be non-increasing in the level"));
        }
        Ok(CostProfile::Explicit(values))
    }

    /// Check the profile against a concrete threshold size.
    pub fn validate(&self, level: usize) -> Result<()> {
        match self {
            CostProfile::Linear { .. } => Ok(()),
            CostProfile::Explicit(values) if values.len() == level => Ok(()),
            CostProfile::Explicit(values) => Err(Error::domain(
                "cost_profile",
                format!("explicit costs list {} levels but the model has {}", values.len(), level),
            )),
        }
    }

    /// Concrete per-level costs c₁..c_L. The linear family is recalculated
    /// as cᵢ = c̄ − ((i−1)/(L−1))(c̄ − c̲); a single level gets the average.
    #[must_use]
    pub fn instantiate(&self, level: usize) -> Vec<f64> {
        match self {
            CostProfile::Linear { c_high, c_low } => {
                if level == 1 {
                    return vec![0.5 * (c_high + c_low)];
                }
                (0..level)
                    .map(|i| c_high - (i as f64 / (level - 1) as f64) * (c_high - c_low))
                    .collect()
            }
            CostProfile::Explicit(values) => values.clone(),
        }
    }

    /// The profile as a function of relative depth u ∈ [0, 1] (0 = lowest
    /// level, 1 = top), linearly interpolated between explicit nodes.
    fn at(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            CostProfile::Linear { c_high, c_low } => c_high - u * (c_high - c_low),
            CostProfile::Explicit(values) => {
                let n = values.len();
                if n == 1 {
                    return values[0];
                }
                let pos = u * (n - 1) as f64;
                let k = (pos.floor() as usize).min(n - 2);
                let frac = pos - k as f64;
                values[k] + frac * (values[k + 1] - values[k])
            }
        }
    }

    fn top(&self) -> f64 {
        self.at(1.0)
    }

    fn bottom(&self) -> f64 {
        self.at(0.0)
    }
}

/// The Cesàro limit c* = lim (1/L) Σ cᵢ: the midpoint for linear profiles.
/// Explicit profiles scale to large L by linear interpolation of the nodes,
/// so their Cesàro limit is the integral of the interpolant — the trapezoid
/// average, which endpoint-weighting distinguishes from the plain node
/// mean. This keeps ψ(0) = η(0) = c* exact.
#[must_use]
pub fn c_star(costs: &CostProfile) -> f64 {
    match costs {
        CostProfile::Linear { c_high, c_low } => 0.5 * (c_high + c_low),
        CostProfile::Explicit(values) => {
            let n = values.len();
            if n == 1 {
                return values[0];
            }
            let inner: f64 = values[1..n - 1].iter().sum();
            (0.5 * (values[0] + values[n - 1]) + inner) / (n - 1) as f64
        }
    }
}

/// Numerically stable (eˣ − 1 − x)/(x(eˣ − 1)), the linear ψ-fraction.
fn psi_fraction(x: f64) -> f64 {
    if x < 1e-3 {
        return 0.5 - x / 12.0;
    }
    // Written in e⁻ˣ terms so nothing overflows for large x.
    let em = -(-x).exp_m1(); // 1 − e⁻ˣ
    (em - x * (-x).exp()) / (x * em)
}

/// Numerically stable (x − 1 + e⁻ˣ)/(x(1 − e⁻ˣ)), the linear η-fraction.
fn eta_fraction(x: f64) -> f64 {
    if x < 1e-3 {
        return 0.5 + x / 12.0;
    }
    let em = -(-x).exp_m1();
    (x - em) / (x * em)
}

fn check_exponent(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain("cost_limit", "the exponent x = 2CΕς/D must be finite and ≥ 0"));
    }
    Ok(())
}

/// Geometric-weight average of the profile from the top of the dam:
/// Σ c_{L−j}·ωʲ / Σ ωʲ with ω = 1 ∓ x/L, the finite-L form of ψ/η.
fn profile_limit_sum(costs: &CostProfile, x: f64, towards_top: bool, l: usize) -> f64 {
    let omega = if towards_top { 1.0 - x / l as f64 } else { 1.0 + x / l as f64 };
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w = 1.0;
    for j in 0..l {
        // c_{L−j} sits at relative depth (L − j − 1)/(L − 1).
        let u = (l - j - 1) as f64 / (l - 1) as f64;
        num += costs.at(u) * w;
        den += w;
        w *= omega;
    }
    num / den
}

/// Richardson-extrapolated limit sum: the finite-L error is O(1/L), so
/// 2·S(2L) − S(L) removes the leading term.
fn extrapolated_limit_sum(costs: &CostProfile, x: f64, towards_top: bool) -> f64 {
    let s1 = profile_limit_sum(costs, x, towards_top, L_INT);
    let s2 = profile_limit_sum(costs, x, towards_top, 2 * L_INT);
    2.0 * s2 - s1
}

/// Limiting water cost ψ(x) under the Upper regime: the profile near the
/// top averaged with weights (1 − x/L)ʲ. Closed form for linear profiles;
/// internal limit sums (Richardson-checked) otherwise. ψ(0) = c*.
pub fn psi(costs: &CostProfile, x: f64) -> Result<f64> {
    check_exponent(x)?;
    match costs {
        CostProfile::Linear { c_high, c_low } => {
            Ok(c_low + (c_high - c_low) * psi_fraction(x))
        }
        CostProfile::Explicit(_) => {
            if x == 0.0 {
                return Ok(c_star(costs));
            }
            if x > X_ENDPOINT {
                return Ok(costs.top());
            }
            Ok(extrapolated_limit_sum(costs, x, true))
        }
    }
}

/// Limiting water cost η(x) under the Lower regime, with weights
/// (1 + x/L)ʲ tilting towards the bottom of the dam. η(0) = c*.
pub fn eta(costs: &CostProfile, x: f64) -> Result<f64> {
    check_exponent(x)?;
    match costs {
        CostProfile::Linear { c_high, c_low } => {
            Ok(c_low + (c_high - c_low) * eta_fraction(x))
        }
        CostProfile::Explicit(_) => {
            if x == 0.0 {
                return Ok(c_star(costs));
            }
            if x > X_ENDPOINT {
                return Ok(costs.bottom());
            }
            Ok(extrapolated_limit_sum(costs, x, false))
        }
    }
}

/// The exact objective split into its three components.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveValue {
    pub value: f64,
    pub damage_lower: f64,
    pub damage_upper: f64,
    pub water_cost: f64,
}

/// Exact long-run cost rate at finite L:
/// J = p₁·j₁·L + p₂·j₂·L + Σ cᵢqᵢ, with p₂ the emergency-service time
/// fraction (the reading whose limit matches the Upper/Lower objectives).
pub fn exact_objective(model: &DamModel) -> Result<ObjectiveValue> {
    let stat = stationary_distribution(model)?;
    let l = model.level as f64;
    let costs = model.costs.instantiate(model.level);
    let damage_lower = stat.p1 * model.j1 * l;
    let damage_upper = stat.p2 * model.j2 * l;
    let water_cost: f64 = costs.iter().zip(&stat.q).map(|(c, q)| c * q).sum();
    Ok(ObjectiveValue {
        value: damage_lower + damage_upper + water_cost,
        damage_lower,
        damage_upper,
        water_cost,
    })
}

/// The Critical-regime limit objective
/// (j₁ + j₂ρ₂/(1−ρ₂))·D/(2Ες) + c*, which is also j_upper at C = 0.
pub fn critical_objective(
    params: &HeavyTrafficParams,
    costs: &CostProfile,
    j1: f64,
    j2: f64,
) -> Result<f64> {
    let crit = HeavyTrafficParams { regime: Regime::Critical, ..*params };
    let p = limit_p(&crit)?;
    Ok(j1 * p.p1 + j2 * p.p2 + c_star(costs))
}

/// Limiting objective under ρ₁ = 1 + C/L:
/// J = C·[j₁/(eˣ−1) + j₂ρ₂eˣ/((1−ρ₂)(eˣ−1))] + ψ(x), continuous at C = 0
/// where it equals the Critical value.
pub fn j_upper(
    params: &HeavyTrafficParams,
    costs: &CostProfile,
    j1: f64,
    j2: f64,
) -> Result<f64> {
    if params.c == 0.0 {
        return critical_objective(params, costs, j1, j2);
    }
    let up = HeavyTrafficParams { regime: Regime::Upper, ..*params };
    let p = limit_p(&up)?;
    Ok(up.c * (j1 * p.p1 + j2 * p.p2) + psi(costs, up.x())?)
}

/// Limiting objective under ρ₁ = 1 − C/L:
/// J = C·[j₁e^{1/x} + j₂(ρ₂/(1−ρ₂))(e^{1/x}−1)] + η(x). Diverges as
/// C → 0⁺, so C ≤ 0 is a domain error; the Critical value is compared
/// directly by the control solver instead.
pub fn j_lower(
    params: &HeavyTrafficParams,
    costs: &CostProfile,
    j1: f64,
    j2: f64,
) -> Result<f64> {
    if params.c <= 0.0 {
        return Err(Error::domain("j_lower", "the Lower-regime objective requires C > 0"));
    }
    let low = HeavyTrafficParams { regime: Regime::Lower, ..*params };
    let p = limit_p(&low)?;
    Ok(low.c * (j1 * p.p1 + j2 * p.p2) + eta(costs, low.x())?)
}
