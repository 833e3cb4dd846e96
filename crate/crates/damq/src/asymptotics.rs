//! Heavy-traffic regimes, characteristic roots, and scaled limit laws.
//!
//! As the threshold L grows with the normal-regime load pinned near one
//! (ρ₁ = 1 ± δ, δL → C), every stationary quantity collapses onto closed
//! forms driven by two numbers: the batch mean Ες and the recurring
//! denominator D = ρ̃₁,₂(Ες)³ + Ες² − Ες. The canonical exponent is
//! x = 2CΕς/D. This module holds those parameters, the characteristic
//! roots of z = B̂₁(λ − λR̂(z)) on both sides of 1 (which set the geometric
//! decay of the busy-period tables), their small-δ expansions, and the
//! scaled limits of p₁, p₂ and q_{L−j} in each regime.

use crate::error::{Error, Result};
use crate::model::DamModel;

/// Load prescription near criticality: ρ₁ = 1 (Critical), 1 + δ (Upper)
/// or 1 − δ (Lower), with δL → C.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Critical,
    Upper,
    Lower,
}

impl Regime {
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            Regime::Critical => "critical",
            Regime::Upper => "upper",
            Regime::Lower => "lower",
        }
    }
}

/// Which side of z = 1 a characteristic root lies on: φ ∈ (0,1) exists
/// when ρ₁ > 1, τ > 1 when ρ₁ < 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSide {
    BelowOne,
    AboveOne,
}

/// Moments surviving the heavy-traffic limit, plus the control parameter C.
///
/// `rho12_tilde` is the limit of ρ₁,₂ = λ²·(second raw moment of B₁); the
/// batch moments are those of the fixed batch law. All limit formulas in
/// this module and the cost limits in [`crate::objective`] read their
/// exponent x = 2CΕς/D from here.
#[derive(Debug, Clone, Copy)]
pub struct HeavyTrafficParams {
    pub e_sigma: f64,
    pub e_sigma2: f64,
    pub rho12_tilde: f64,
    pub rho2: f64,
    pub c: f64,
    pub regime: Regime,
}

impl HeavyTrafficParams {
    pub fn new(
        e_sigma: f64,
        e_sigma2: f64,
        rho12_tilde: f64,
        rho2: f64,
        c: f64,
        regime: Regime,
    ) -> Result<Self> {
        if !(e_sigma >= 1.0) || !e_sigma.is_finite() {
            return Err(Error::domain("heavy_traffic_params", "Eς must be finite and ≥ 1"));
        }
        if !(e_sigma2 >= e_sigma * e_sigma) || !e_sigma2.is_finite() {
            return Err(Error::domain("heavy_traffic_params", "Eς² must be finite and ≥ (Eς)²"));
        }
        if !(rho12_tilde > 0.0) || !rho12_tilde.is_finite() {
            return Err(Error::domain("heavy_traffic_params", "ρ̃₁,₂ must be finite and > 0"));
        }
        if !(0.0 <= rho2 && rho2 < 1.0) {
            return Err(Error::domain("heavy_traffic_params", "ρ₂ must lie in [0, 1)"));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::domain("heavy_traffic_params", "C must be finite and ≥ 0"));
        }
        Ok(HeavyTrafficParams { e_sigma, e_sigma2, rho12_tilde, rho2, c, regime })
    }

    /// Extract the limit moments from a concrete model, attaching a control
    /// parameter and regime. The model's own ρ₁,₂ stands in for ρ̃₁,₂.
    pub fn from_model(model: &DamModel, c: f64, regime: Regime) -> Result<Self> {
        HeavyTrafficParams::new(
            model.batch.m1(),
            model.batch.m2(),
            model.rho1_l(2),
            model.rho2(),
            c,
            regime,
        )
    }

    /// The recurring denominator D = ρ̃₁,₂(Ες)³ + Ες² − Ες (> 0).
    #[must_use]
    pub fn d(&self) -> f64 {
        self.rho12_tilde * self.e_sigma.powi(3) + self.e_sigma2 - self.e_sigma
    }

    /// Canonical exponent x = 2CΕς/D.
    #[must_use]
    pub fn x(&self) -> f64 {
        2.0 * self.c * self.e_sigma / self.d()
    }

    fn require_positive_c(&self, place: &'static str) -> Result<()> {
        if self.c > 0.0 {
            Ok(())
        } else {
            Err(Error::domain(place, "the Upper/Lower scaled limits require C > 0"))
        }
    }
}

/// A characteristic root of z = B̂₁(λ − λR̂(z)) away from the trivial z = 1.
#[derive(Debug, Clone, Copy)]
pub struct RootSolution {
    pub value: f64,
    pub residual: f64,
    pub side: RootSide,
}

/// Residual g(z) = B̂₁(λ − λR̂(z)) − z; `None` when z leaves the domain of
/// the batch generating function or the transform abscissa.
fn g(model: &DamModel, z: f64) -> Option<f64> {
    let r = model.batch.pgf(z).ok()?;
    let u = model.b1.lst(model.lambda * (1.0 - r)).ok()?;
    Some(u - z)
}

fn g_deriv(model: &DamModel, z: f64) -> Option<f64> {
    let r = model.batch.pgf(z).ok()?;
    let rp = model.batch.pgf_deriv(z).ok()?;
    let s = model.lambda * (1.0 - r);
    let up = model.b1.lst_deriv(s).ok()?;
    Some(-model.lambda * rp * up - 1.0)
}

const ROOT_RESIDUAL: f64 = 1e-12;
const BRACKET_STEP: f64 = 0.05;

/// Bisection refined by safeguarded Newton steps inside [lo, hi], where
/// g(lo) > 0 > g(hi) or g(lo) < 0 < g(hi).
fn polish(model: &DamModel, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut glo = g(model, lo).unwrap_or(f64::NAN);
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gz = match g(model, z) {
            Some(v) => v,
            None => {
                // Stepped outside the domain: retreat by bisection.
                z = 0.5 * (lo + hi);
                continue;
            }
        };
        if gz.abs() < ROOT_RESIDUAL {
            return (z, gz.abs());
        }
        if (gz > 0.0) == (glo > 0.0) {
            lo = z;
            glo = gz;
        } else {
            hi = z;
        }
        // Try Newton from the current iterate; fall back to the midpoint
        // whenever the step leaves the bracket or the slope degenerates.
        let newton = g_deriv(model, z).and_then(|d| {
            let step = gz / d;
            let cand = z - step;
            (d.abs() > 1e-300 && cand > lo && cand < hi).then_some(cand)
        });
        z = newton.unwrap_or(0.5 * (lo + hi));
        if (hi - lo).abs() < f64::EPSILON * (1.0 + z.abs()) {
            break;
        }
    }
    let res = g(model, z).map(f64::abs).unwrap_or(f64::NAN);
    (z, res)
}

/// Locate the characteristic root on the requested side of 1.
///
/// BelowOne (φ) exists when ρ₁ > 1 and is bracketed by [0, 1); AboveOne
/// (τ) requires ρ₁ < 1 and is found by walking z upward in 0.05 steps
/// until the residual changes sign, shrinking the step at the analyticity
/// boundary. Failure to bracket before the boundary is a
/// [`Error::NoBracket`] — the model then simply has no such root.
pub fn find_root(model: &DamModel, side: RootSide) -> Result<RootSolution> {
    let rho1 = model.rho1();
    match side {
        RootSide::BelowOne => {
            if rho1 <= 1.0 {
                return Err(Error::domain(
                    "find_root",
                    "a root in (0, 1) exists only when rho1 > 1",
                ));
            }
            // g(0) = B̂₁(λ) > 0 and g(1−ε) ≈ −ε(ρ₁ − 1) < 0.
            let (value, residual) = polish(model, 0.0, 1.0 - 1e-9);
            if residual < ROOT_RESIDUAL {
                Ok(RootSolution { value, residual, side })
            } else {
                Err(Error::NoBracket { side: "below_one", last_z: value })
            }
        }
        RootSide::AboveOne => {
            if rho1 >= 1.0 {
                return Err(Error::domain(
                    "find_root",
                    "a root in (1, ∞) exists only when rho1 < 1",
                ));
            }
            // g(1+ε) ≈ ε(ρ₁ − 1) < 0; walk up until g flips sign.
            let mut step = BRACKET_STEP;
            let mut last_ok = 1.0;
            loop {
                let z = last_ok + step;
                match g(model, z) {
                    Some(gz) if gz >= 0.0 => {
                        let (value, residual) = polish(model, last_ok.max(1.0 + 1e-12), z);
                        if residual < ROOT_RESIDUAL {
                            return Ok(RootSolution { value, residual, side });
                        }
                        return Err(Error::NoBracket { side: "above_one", last_z: value });
                    }
                    Some(_) => last_ok = z,
                    None => {
                        step /= 2.0;
                        if step < 1e-9 {
                            return Err(Error::NoBracket { side: "above_one", last_z: last_ok });
                        }
                    }
                }
            }
        }
    }
}

/// First-order expansion of the root for ρ₁ = 1 ± δ: φ ≈ 1 − 2δΕς/D,
/// τ ≈ 1 + 2δΕς/D.
#[must_use]
pub fn root_expansion(params: &HeavyTrafficParams, delta: f64, side: RootSide) -> f64 {
    let slope = 2.0 * delta * params.e_sigma / params.d();
    match side {
        RootSide::BelowOne => 1.0 - slope,
        RootSide::AboveOne => 1.0 + slope,
    }
}

/// Scaled limit forms for p₁ and p₂. Critical: limits of L·p₁ and L·p₂.
/// Upper/Lower: limits of p₁/δ and p₂/δ.
#[derive(Debug, Clone, Copy)]
pub struct LimitProbabilities {
    pub p1: f64,
    pub p2: f64,
}

/// Evaluate the limit laws of the stationary probabilities per regime.
///
/// Critical: L·p₁ → D/(2Ες), L·p₂ → ρ₂/(1−ρ₂)·D/(2Ες). Upper: p₁/δ →
/// 1/(eˣ−1), p₂/δ → ρ₂eˣ/((1−ρ₂)(eˣ−1)). Lower: p₁/δ → e^{1/x}, p₂/δ →
/// ρ₂(e^{1/x}−1)/(1−ρ₂).
///
/// The Critical and Upper forms are true limits (the exact probabilities
/// converge to them; see the stationary module's tests). The Lower forms
/// are the surrogate constants the limiting cost objective is built on:
/// they replace the table constant 1 − e^{−x} by e^{−1/x}, which agrees
/// only as x → ∞. The exact scaled masses converge to eˣ/(eˣ−1) and
/// ρ₂/((1−ρ₂)(eˣ−1)) instead — at x ≈ 1 the surrogate overshoots p₁/δ by
/// roughly 70%, and it diverges as C → 0 where the true constants recover
/// the Critical limit. The Lower q-limits ([`limit_q`]) are unaffected:
/// their prefactor 1/(eˣ−1) is exact.
pub fn limit_p(params: &HeavyTrafficParams) -> Result<LimitProbabilities> {
    let d = params.d();
    let es = params.e_sigma;
    let ratio2 = params.rho2 / (1.0 - params.rho2);
    match params.regime {
        Regime::Critical => {
            let scale = d / (2.0 * es);
            Ok(LimitProbabilities { p1: scale, p2: ratio2 * scale })
        }
        Regime::Upper => {
            params.require_positive_c("limit_p")?;
            let x = params.x();
            // eˣ/(eˣ−1) written as 1/(1−e⁻ˣ) stays finite for every x > 0.
            Ok(LimitProbabilities {
                p1: x.exp_m1().recip(),
                p2: ratio2 / (-(-x).exp_m1()),
            })
        }
        Regime::Lower => {
            params.require_positive_c("limit_p")?;
            let inv_x = params.x().recip();
            Ok(LimitProbabilities { p1: inv_x.exp(), p2: ratio2 * inv_x.exp_m1() })
        }
    }
}

/// Scaled limit coefficient for the occupancy of the near-top level L − j.
///
/// Critical: the limit of L·q_{L−j} (identically 1). Upper/Lower: the
/// δ-scaled coefficient q_{L−j}/δ evaluated at the reference threshold
/// `l_ref`, i.e. with δ = C/l_ref entering only the geometric factor
/// (1 ∓ 2δΕς/D)^j. The j-independent prefactor is [`limit_q_prefactor`]
/// and the geometric base is [`limit_q_base`].
pub fn limit_q(params: &HeavyTrafficParams, j: u32, l_ref: u32) -> Result<f64> {
    match params.regime {
        Regime::Critical => Ok(1.0),
        Regime::Upper | Regime::Lower => {
            let pre = limit_q_prefactor(params)?;
            let base = limit_q_base(params, l_ref)?;
            Ok(pre * base.powi(j as i32))
        }
    }
}

/// The j-independent factor of the scaled q-limit: (2Ες/D)·eˣ/(eˣ−1) in
/// the Upper regime, (2Ες/D)/(eˣ−1) in the Lower regime.
pub fn limit_q_prefactor(params: &HeavyTrafficParams) -> Result<f64> {
    params.require_positive_c("limit_q")?;
    let x = params.x();
    let front = 2.0 * params.e_sigma / params.d();
    match params.regime {
        Regime::Critical => Ok(1.0),
        Regime::Upper => Ok(front / (-(-x).exp_m1())),
        Regime::Lower => Ok(front / x.exp_m1()),
    }
}

/// The geometric base (1 ∓ 2δΕς/D) with δ = C/l_ref.
pub fn limit_q_base(params: &HeavyTrafficParams, l_ref: u32) -> Result<f64> {
    if l_ref == 0 {
        return Err(Error::domain("limit_q", "the reference threshold must be positive"));
    }
    params.require_positive_c("limit_q")?;
    let delta = params.c / f64::from(l_ref);
    let slope = 2.0 * delta * params.e_sigma / params.d();
    match params.regime {
        Regime::Critical => Ok(1.0),
        Regime::Upper => Ok(1.0 - slope),
        Regime::Lower => Ok(1.0 + slope),
    }
}
