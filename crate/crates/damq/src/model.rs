//! The dam model: one struct gathering every primitive parameter.

use crate::dist::{BatchDistribution, ServiceDistribution};
use crate::error::{Error, Result};
use crate::objective::CostProfile;

/// Largest admissible threshold; the busy-period tables are O(L) in memory
/// and O(L · support) in time, so this bound keeps a single model run in
/// the tens-of-megabytes / seconds range.
pub const MAX_LEVEL: usize = 1_000_000;

/// Level-dependent dam with compound Poisson inflow.
///
/// `lambda` is the batch arrival rate, `batch` the law of the batch size ς,
/// `b1`/`b2` the normal and emergency outflow laws, and `level` the
/// threshold L separating them: a service starting with more than `level`
/// units in the dam uses `b2`. `j1`/`j2` are the damage rates charged while
/// the dam sits empty or above the threshold, and `costs` prices the water
/// at each intermediate level.
#[derive(Debug, Clone, PartialEq)]
pub struct DamModel {
    pub lambda: f64,
    pub batch: BatchDistribution,
    pub b1: ServiceDistribution,
    pub b2: ServiceDistribution,
    pub level: usize,
    pub j1: f64,
    pub j2: f64,
    pub costs: CostProfile,
}

impl DamModel {
    /// Validate parameter ranges; `j1`, `j2` default to 1 and the cost
    /// profile to a constant 1 when a caller only needs the stationary law.
    pub fn new(
        lambda: f64,
        batch: BatchDistribution,
        b1: ServiceDistribution,
        b2: ServiceDistribution,
        level: usize,
        j1: f64,
        j2: f64,
        costs: CostProfile,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain("DamModel", format!("lambda = {lambda} must be positive")));
        }
        if level == 0 || level > MAX_LEVEL {
            return Err(Error::domain(
                "DamModel",
                format!("level = {level} outside 1..={MAX_LEVEL}"),
            ));
        }
        if !(j1 >= 0.0) || !(j2 >= 0.0) {
            return Err(Error::domain("DamModel", "damage rates must be non-negative"));
        }
        costs.validate(level)?;
        Ok(DamModel { lambda, batch, b1, b2, level, j1, j2, costs })
    }

    /// Expected units arriving per normal-regime service: ρ₁ = λ·Ες·ΕB₁.
    #[must_use]
    pub fn rho1(&self) -> f64 {
        self.lambda * self.batch.m1() * self.b1.mean()
    }

    /// Expected units arriving per emergency service: ρ₂ = λ·Ες·ΕB₂.
    #[must_use]
    pub fn rho2(&self) -> f64 {
        self.lambda * self.batch.m1() * self.b2.mean()
    }

    /// ρ₁,ₗ = λˡ·∫xˡdB₁ for l = 1, 2, 3 (ρ₁,₂ drives the variance constant
    /// D = ρ₁,₂(Ες)³ + Ες² − Ες).
    #[must_use]
    pub fn rho1_l(&self, l: u32) -> f64 {
        self.lambda.powi(l as i32) * self.b1.raw_moment(l)
    }

    /// Require a stable emergency regime (ρ₂ < 1), the standing assumption
    /// behind every stationary formula.
    pub fn require_stable(&self) -> Result<()> {
        let rho2 = self.rho2();
        if rho2 >= 1.0 {
            return Err(Error::Stability { rho2 });
        }
        Ok(())
    }
}
