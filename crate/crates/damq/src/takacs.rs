//! The backward recurrence of Takács type and the busy-period tables.
//!
//! Everything in this crate ultimately rests on one linear recurrence: for
//! a coefficient sequence {fᵢ} with f₀ > 0, the table Q₀, Q₁, ... defined by
//!
//! ```text
//! Qₙ = Σ_{i=0..n} Qₙ₋ᵢ₊₁ · fᵢ ,
//! ```
//!
//! advanced in the forward rearrangement
//!
//! ```text
//! Qₙ₊₁ = (Qₙ − Σ_{i=1..n} fᵢ · Qₙ₋ᵢ₊₁) / f₀ .
//! ```
//!
//! With fᵢ = Pr{i units arrive during one normal service} and Q₀ = 1, the
//! entry Qⱼ is Εν̃ⱼ — the expected number of normal-regime services during
//! an excursion of the dam from level L−j+1 down to L−j (equivalently, a
//! busy period begun by a single unit with j levels of headroom). The
//! generating function identity Σ Qₙzⁿ = Q₀·F(z)/(F(z) − z) with
//! F(z) = Σ fᵢzⁱ pins the table uniquely and doubles as a test oracle via
//! power-series long division.
//!
//! A busy period begun by a whole batch is assembled from the Εν̃ table by
//! conditioning on the initial batch size truncated at the headroom,
//!
//! ```text
//! Ενⱼ = Σ_{i=1..j+1} Pr{ς∧(j+1) = i} · Σ_{k=1..i} Εν̃_{j−k+1} ,
//! ```
//!
//! and the emergency-side count follows from the linear representation
//! Εν⁽²⁾ = Ες/(1−ρ₂) − (1−ρ₁)/(1−ρ₂)·Εν⁽¹⁾ together with Wald's identity
//! ΕT⁽ᵏ⁾ = Εν⁽ᵏ⁾·ΕBₖ.

use crate::dist::{arrivals_per_service_coeffs, CoeffSeq};
use crate::error::{Error, Result};
use crate::model::DamModel;

/// Neumaier-compensated accumulator: the recurrence subtracts partial sums
/// of nearly equal magnitude, so plain summation loses digits first.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Solve the recurrence forward from `q0`, returning the table Q₀..Q_n
/// (n+1 entries). Fails with [`Error::Singular`] when f₀ ≤ 0.
pub fn solve_takacs(f: &CoeffSeq, q0: f64, n: usize) -> Result<Vec<f64>> {
    let f0 = f.get(0);
    if !(f0 > 0.0) {
        return Err(Error::Singular { f0 });
    }
    let mut q = Vec::with_capacity(n + 1);
    q.push(q0);
    for m in 0..n {
        // Qₘ₊₁ = (Qₘ − Σ_{i=1..m} fᵢ Qₘ₋ᵢ₊₁)/f₀; fᵢ vanishes beyond the
        // stored support, which truncates the sum naturally.
        let mut acc = Kahan::default();
        acc.add(q[m]);
        let top = m.min(f.len().saturating_sub(1));
        for i in 1..=top {
            acc.add(-f.get(i) * q[m - i + 1]);
        }
        q.push(acc.value() / f0);
    }
    Ok(q)
}

/// Busy-period tables of the dam over thresholds 0..=L.
///
/// `nu_tilde[j]` = Εν̃ⱼ (single-unit start, j levels of headroom) and
/// `nu[j]` = Ενⱼ (batch start, threshold j); both count normal-regime
/// services only. `coeffs` is the fᵢ sequence the tables were built from.
#[derive(Debug, Clone)]
pub struct BusyTable {
    pub nu_tilde: Vec<f64>,
    pub nu: Vec<f64>,
    pub coeffs: CoeffSeq,
    /// Prefix sums S[j] = Σ_{m=0..j} nu_tilde[m], kept for the conditioned
    /// forms Ε{Ε(ν|ς∧L)} used by truncation estimates.
    prefix: Vec<f64>,
}

impl BusyTable {
    /// Σ_{m=a..=b} Εν̃ₘ via the prefix table (zero when a > b).
    fn tilde_sum(&self, a: usize, b: usize) -> f64 {
        if a > b {
            return 0.0;
        }
        if a == 0 {
            self.prefix[b]
        } else {
            self.prefix[b] - self.prefix[a - 1]
        }
    }

    /// Εν for a batch start conditioned at headroom `j` with the batch
    /// truncated at `cap`: Σ_{i=1..cap} Pr{ς∧cap = i} Σ_{k=1..i} Εν̃_{j−k+1}.
    ///
    /// With `cap = j+1` this is the table entry `nu[j]`; with `cap = j` it
    /// is the conditioned mean Ε{Ε(ν⁽¹⁾|ς∧j)} whose distance from `nu[j]`
    /// is exactly the batch tail Pr{ς > j}.
    #[must_use]
    pub fn batch_start_mean(&self, j: usize, cap: usize, model: &DamModel) -> f64 {
        debug_assert!(cap >= 1 && cap <= j + 1);
        let mut acc = Kahan::default();
        for i in 1..=cap {
            let p = if i == cap { model.batch.tail(cap - 1) } else { model.batch.prob(i) };
            if p == 0.0 {
                continue;
            }
            // Σ_{k=1..i} Εν̃_{j−k+1} = Σ_{m=j−i+1..j} Εν̃ₘ.
            acc.add(p * self.tilde_sum(j + 1 - i, j));
        }
        acc.value()
    }
}

/// Build the busy-period tables for thresholds 0..=model.level.
pub fn busy_table(model: &DamModel) -> Result<BusyTable> {
    let l = model.level;
    let coeffs = arrivals_per_service_coeffs(&model.b1, &model.batch, model.lambda, 2, l + 2)?;
    let nu_tilde = solve_takacs(&coeffs, 1.0, l)?;
    let mut prefix = Vec::with_capacity(l + 1);
    let mut run = Kahan::default();
    for &v in &nu_tilde {
        run.add(v);
        prefix.push(run.value());
    }
    let mut table = BusyTable { nu_tilde, nu: Vec::new(), coeffs, prefix };
    let mut nu = Vec::with_capacity(l + 1);
    for j in 0..=l {
        nu.push(table.batch_start_mean(j, j + 1, model));
    }
    table.nu = nu;
    Ok(table)
}

/// Expected service counts and durations over one busy period of the dam
/// with threshold L, split by regime.
///
/// `nu1`/`nu2` are the normal/emergency service counts, `t1`/`t2` their
/// cumulative expected durations via Wald's identity, and `nu`/`t` the
/// totals. The totals satisfy λ·Ες·t + Ες = nu.
#[derive(Debug, Clone, Copy)]
pub struct LinearReps {
    pub nu1: f64,
    pub nu2: f64,
    pub nu: f64,
    pub t1: f64,
    pub t2: f64,
    pub t: f64,
}

/// Combine the busy table with the emergency-side linear representation.
pub fn linear_reps(table: &BusyTable, model: &DamModel) -> Result<LinearReps> {
    model.require_stable()?;
    let rho1 = model.rho1();
    let rho2 = model.rho2();
    let e_sigma = model.batch.m1();
    let nu1 = table.nu[model.level];
    let nu2 = e_sigma / (1.0 - rho2) - (1.0 - rho1) / (1.0 - rho2) * nu1;
    let t1 = nu1 * model.b1.mean();
    let t2 = nu2 * model.b2.mean();
    Ok(LinearReps { nu1, nu2, nu: nu1 + nu2, t1, t2, t: t1 + t2 })
}
