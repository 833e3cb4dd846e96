//! Input laws of the dam: batch sizes, service durations, and the
//! coefficient sequence coupling them.
//!
//! Three objects are produced here and consumed by every later stage:
//!
//! * [`BatchDistribution`] — the law {rᵢ} of the batch size ς ≥ 1 with its
//!   first three moments and probability generating function
//!   R̂(z) = Σ rᵢ zⁱ;
//! * [`ServiceDistribution`] — a service-time family B(x) with raw moments
//!   and Laplace–Stieltjes transform B̂(s) = ∫ e^{−sx} dB(x);
//! * [`CoeffSeq`] — fᵢ = Pr{i units arrive during one normal-regime
//!   service} = ∫ e^{−λx} coefficients of the compound Poisson stream,
//!   whose generating function is U(z) = B̂₁(λ − λR̂(z)).
//!
//! The compound Poisson probability mass function over a fixed horizon t
//! follows the Panjer recursion
//!
//! ```text
//! p₀ = e^{−λt},   pₙ = (λt/n) · Σ_{j=1..n} j·rⱼ·pₙ₋ⱼ
//! ```
//!
//! and for exponential services the fᵢ satisfy the geometric-mixture
//! recursion f₀ = μ/(μ+λ), fᵢ = (λ/(μ+λ)) Σ_{j=1..i} rⱼ fᵢ₋ⱼ, both of
//! which exhaust all mass without any numerical integration.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Truncation tolerance for internally generated probability vectors: tails
/// holding less than this mass are dropped.
const TAIL_TOL: f64 = 1e-14;

/// Adaptive stopping rule for coefficient sequences: extension stops once
/// the un-accumulated mass falls below this bound (unless the caller needs
/// more entries positionally).
const COEFF_MASS_TOL: f64 = 1e-10;

// ============================================================================
// Batch size law
// ============================================================================

/// Law of the batch size ς (number of water units per arrival), ς ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchDistribution {
    /// Finite support: `probs[i]` = Pr{ς = i+1}; must sum to one.
    Explicit { probs: Vec<f64> },
    /// Geometric on {1, 2, ...}: Pr{ς = k} = (1−q)·q^{k−1}.
    Geometric { q: f64 },
}

impl BatchDistribution {
    /// Finite-support batch law; `probs[i]` is Pr{ς = i+1}.
    pub fn explicit(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("BatchDistribution", "empty support"));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite()) {
            return Err(Error::domain("BatchDistribution", "probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(
                "BatchDistribution",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        Ok(BatchDistribution::Explicit { probs })
    }

    /// Geometric batch law with failure parameter `q` in [0, 1).
    pub fn geometric(q: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q) || !q.is_finite() {
            return Err(Error::domain("BatchDistribution", format!("q = {q} outside [0, 1)")));
        }
        Ok(BatchDistribution::Geometric { q })
    }

    /// Degenerate single-unit batches (ordinary Poisson input).
    #[must_use]
    pub fn unit() -> Self {
        BatchDistribution::Explicit { probs: vec![1.0] }
    }

    /// Pr{ς = i} for i ≥ 1.
    #[must_use]
    pub fn prob(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match self {
            BatchDistribution::Explicit { probs } => probs.get(i - 1).copied().unwrap_or(0.0),
            BatchDistribution::Geometric { q } => (1.0 - q) * q.powi(i as i32 - 1),
        }
    }

    /// Tail Pr{ς > i}, exact in closed form (no truncation error).
    #[must_use]
    pub fn tail(&self, i: usize) -> f64 {
        match self {
            BatchDistribution::Explicit { probs } => {
                if i >= probs.len() {
                    0.0
                } else {
                    // Backward suffix sum keeps the small tail accurate.
                    probs[i..].iter().rev().sum()
                }
            }
            BatchDistribution::Geometric { q } => q.powi(i as i32),
        }
    }

    /// Ες.
    #[must_use]
    pub fn m1(&self) -> f64 {
        match self {
            BatchDistribution::Explicit { probs } => {
                probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
            }
            BatchDistribution::Geometric { q } => 1.0 / (1.0 - q),
        }
    }

    /// Ες².
    #[must_use]
    pub fn m2(&self) -> f64 {
        match self {
            BatchDistribution::Explicit { probs } => {
                probs.iter().enumerate().map(|(i, p)| ((i + 1) as f64).powi(2) * p).sum()
            }
            BatchDistribution::Geometric { q } => (1.0 + q) / (1.0 - q).powi(2),
        }
    }

    /// Ες³.
    #[must_use]
    pub fn m3(&self) -> f64 {
        match self {
            BatchDistribution::Explicit { probs } => {
                probs.iter().enumerate().map(|(i, p)| ((i + 1) as f64).powi(3) * p).sum()
            }
            BatchDistribution::Geometric { q } => (1.0 + 4.0 * q + q * q) / (1.0 - q).powi(3),
        }
    }

    /// Generating function R̂(z) = Σ rᵢ zⁱ. For the geometric law the series
    /// only converges for |z| < 1/q.
    pub fn pgf(&self, z: f64) -> Result<f64> {
        match self {
            BatchDistribution::Explicit { probs } => {
                // Horner evaluation of z·(r₁ + r₂z + ...).
                let inner = probs.iter().rev().fold(0.0, |acc, &p| acc * z + p);
                Ok(z * inner)
            }
            BatchDistribution::Geometric { q } => {
                if z.abs() * q >= 1.0 {
                    return Err(Error::domain(
                        "BatchDistribution::pgf",
                        format!("|z| = {} outside radius of convergence 1/q = {}", z.abs(), 1.0 / q),
                    ));
                }
                Ok((1.0 - q) * z / (1.0 - q * z))
            }
        }
    }

    /// Derivative R̂′(z) of the generating function, same domain as [`Self::pgf`].
    pub fn pgf_deriv(&self, z: f64) -> Result<f64> {
        match self {
            BatchDistribution::Explicit { probs } => Ok(probs
                .iter()
                .enumerate()
                .map(|(i, &p)| (i + 1) as f64 * p * z.powi(i as i32))
                .sum()),
            BatchDistribution::Geometric { q } => {
                if z.abs() * q >= 1.0 {
                    return Err(Error::domain(
                        "BatchDistribution::pgf_deriv",
                        format!("|z| = {} outside radius of convergence 1/q = {}", z.abs(), 1.0 / q),
                    ));
                }
                Ok((1.0 - q) / (1.0 - q * z).powi(2))
            }
        }
    }

    /// Probability vector r₁, r₂, ... truncated so the dropped tail holds
    /// less than `TAIL_TOL` mass. Index 0 of the result is r₁.
    #[must_use]
    pub fn truncated_probs(&self) -> Vec<f64> {
        match self {
            BatchDistribution::Explicit { probs } => probs.clone(),
            BatchDistribution::Geometric { q } => {
                if *q == 0.0 {
                    return vec![1.0];
                }
                let n = (TAIL_TOL.ln() / q.ln()).ceil() as usize + 1;
                (1..=n).map(|k| self.prob(k)).collect()
            }
        }
    }

    /// Draw one batch size.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            BatchDistribution::Explicit { probs } => {
                let mut u: f64 = rng.random();
                for (i, &p) in probs.iter().enumerate() {
                    if u < p {
                        return (i + 1) as u64;
                    }
                    u -= p;
                }
                probs.len() as u64
            }
            BatchDistribution::Geometric { q } => {
                if *q == 0.0 {
                    return 1;
                }
                // Inverse transform on the tail: Pr{ς > i} = q^i.
                let u: f64 = rng.random();
                1 + ((-u).ln_1p() / q.ln()).floor() as u64
            }
        }
    }
}

// ============================================================================
// Service time law
// ============================================================================

/// Service-time family used for either outflow regime.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceDistribution {
    /// Unit mass at `d`.
    Deterministic { d: f64 },
    /// Exponential with the given rate (mean 1/rate).
    Exponential { rate: f64 },
    /// Sum of `k` independent exponential stages of the given rate.
    Erlang { k: u32, rate: f64 },
    /// Mixture of exponentials: component `m` has weight `weights[m]` and
    /// rate `rates[m]`.
    Hyperexponential { weights: Vec<f64>, rates: Vec<f64> },
}

impl ServiceDistribution {
    pub fn deterministic(d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::domain("ServiceDistribution", format!("d = {d} must be positive")));
        }
        Ok(ServiceDistribution::Deterministic { d })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::domain("ServiceDistribution", format!("rate = {rate} must be positive")));
        }
        Ok(ServiceDistribution::Exponential { rate })
    }

    pub fn erlang(k: u32, rate: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("ServiceDistribution", "erlang needs k >= 1"));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::domain("ServiceDistribution", format!("rate = {rate} must be positive")));
        }
        Ok(ServiceDistribution::Erlang { k, rate })
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != rates.len() {
            return Err(Error::domain(
                "ServiceDistribution",
                "weights and rates must be non-empty and of equal length",
            ));
        }
        if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::domain("ServiceDistribution", "weights must lie in [0, 1]"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(
                "ServiceDistribution",
                format!("weights sum to {total}, not 1"),
            ));
        }
        if rates.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::domain("ServiceDistribution", "rates must be positive"));
        }
        Ok(ServiceDistribution::Hyperexponential { weights, rates })
    }

    /// Mean service time ∫ x dB(x).
    #[must_use]
    pub fn mean(&self) -> f64 {
        match self {
            ServiceDistribution::Deterministic { d } => *d,
            ServiceDistribution::Exponential { rate } => 1.0 / rate,
            ServiceDistribution::Erlang { k, rate } => f64::from(*k) / rate,
            ServiceDistribution::Hyperexponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
        }
    }

    /// Raw moment ∫ xˡ dB(x) for l = 1, 2, 3.
    #[must_use]
    pub fn raw_moment(&self, l: u32) -> f64 {
        assert!((1..=3).contains(&l), "raw moments implemented for l = 1, 2, 3");
        match self {
            ServiceDistribution::Deterministic { d } => d.powi(l as i32),
            ServiceDistribution::Exponential { rate } => {
                factorial(l) / rate.powi(l as i32)
            }
            ServiceDistribution::Erlang { k, rate } => {
                // E Xˡ = k(k+1)...(k+l−1) / rateˡ.
                let k = f64::from(*k);
                (0..l).map(|j| k + f64::from(j)).product::<f64>() / rate.powi(l as i32)
            }
            ServiceDistribution::Hyperexponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * factorial(l) / r.powi(l as i32))
                .sum(),
        }
    }

    /// Laplace–Stieltjes transform B̂(s). For exponential-type families the
    /// transform is analytic only for s greater than minus the smallest
    /// rate; arguments at or beyond that abscissa are a domain error.
    pub fn lst(&self, s: f64) -> Result<f64> {
        match self {
            ServiceDistribution::Deterministic { d } => Ok((-s * d).exp()),
            ServiceDistribution::Exponential { rate } => {
                if s <= -rate {
                    return Err(lst_domain(s, *rate));
                }
                Ok(rate / (rate + s))
            }
            ServiceDistribution::Erlang { k, rate } => {
                if s <= -rate {
                    return Err(lst_domain(s, *rate));
                }
                Ok((rate / (rate + s)).powi(*k as i32))
            }
            ServiceDistribution::Hyperexponential { weights, rates } => {
                let min_rate = rates.iter().cloned().fold(f64::INFINITY, f64::min);
                if s <= -min_rate {
                    return Err(lst_domain(s, min_rate));
                }
                Ok(weights.iter().zip(rates).map(|(w, r)| w * r / (r + s)).sum())
            }
        }
    }

    /// Derivative B̂′(s) of the transform, same domain as [`Self::lst`].
    pub fn lst_deriv(&self, s: f64) -> Result<f64> {
        match self {
            ServiceDistribution::Deterministic { d } => Ok(-d * (-s * d).exp()),
            ServiceDistribution::Exponential { rate } => {
                if s <= -rate {
                    return Err(lst_domain(s, *rate));
                }
                Ok(-rate / (rate + s).powi(2))
            }
            ServiceDistribution::Erlang { k, rate } => {
                if s <= -rate {
                    return Err(lst_domain(s, *rate));
                }
                let k = *k as i32;
                Ok(-f64::from(k) * rate.powi(k) / (rate + s).powi(k + 1))
            }
            ServiceDistribution::Hyperexponential { weights, rates } => {
                let min_rate = rates.iter().cloned().fold(f64::INFINITY, f64::min);
                if s <= -min_rate {
                    return Err(lst_domain(s, min_rate));
                }
                Ok(weights.iter().zip(rates).map(|(w, r)| -w * r / (r + s).powi(2)).sum())
            }
        }
    }

    /// Draw one service duration.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceDistribution::Deterministic { d } => *d,
            ServiceDistribution::Exponential { rate } => {
                Exp::new(*rate).expect("validated rate").sample(rng)
            }
            ServiceDistribution::Erlang { k, rate } => {
                let exp = Exp::new(*rate).expect("validated rate");
                (0..*k).map(|_| exp.sample(rng)).sum()
            }
            ServiceDistribution::Hyperexponential { weights, rates } => {
                let mut u: f64 = rng.random();
                let mut idx = weights.len() - 1;
                for (i, &w) in weights.iter().enumerate() {
                    if u < w {
                        idx = i;
                        break;
                    }
                    u -= w;
                }
                Exp::new(rates[idx]).expect("validated rate").sample(rng)
            }
        }
    }
}

fn lst_domain(s: f64, abscissa: f64) -> Error {
    Error::domain(
        "ServiceDistribution::lst",
        format!("s = {s} at or beyond the abscissa of convergence -{abscissa}"),
    )
}

fn factorial(l: u32) -> f64 {
    (1..=l).map(f64::from).product()
}

// ============================================================================
// Coefficient sequences
// ============================================================================

/// Probability coefficients fᵢ together with the mass left in the dropped
/// tail; entries beyond `values.len()` are treated as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSeq {
    pub values: Vec<f64>,
    /// 1 − Σ values: mass beyond the stored horizon.
    pub truncated_mass: f64,
}

impl CoeffSeq {
    fn new(values: Vec<f64>) -> Self {
        let mass: f64 = values.iter().sum();
        CoeffSeq { values, truncated_mass: (1.0 - mass).max(0.0) }
    }

    #[must_use]
    pub fn get(&self, i: usize) -> f64 {
        self.values.get(i).copied().unwrap_or(0.0)
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Σ i·fᵢ over the stored horizon.
    #[must_use]
    pub fn first_moment(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, &f)| i as f64 * f).sum()
    }

    /// Σ i(i−1)·fᵢ over the stored horizon.
    #[must_use]
    pub fn second_factorial_moment(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &f)| (i * i.saturating_sub(1)) as f64 * f)
            .sum()
    }
}

/// Compound Poisson probability mass function over a fixed horizon:
/// pₙ = Pr{n units arrive in time t} for n = 0..len−1, via the Panjer
/// recursion. `lambda_t` is λ·t.
pub fn compound_poisson_pmf(batch: &BatchDistribution, lambda_t: f64, len: usize) -> Result<Vec<f64>> {
    if !(lambda_t >= 0.0) || !lambda_t.is_finite() {
        return Err(Error::domain("compound_poisson_pmf", format!("lambda_t = {lambda_t}")));
    }
    let r = batch.truncated_probs();
    let mut p = Vec::with_capacity(len);
    if len == 0 {
        return Ok(p);
    }
    p.push((-lambda_t).exp());
    for n in 1..len {
        let mut acc = 0.0;
        for (j, &rj) in r.iter().enumerate().take(n).map(|(j, rj)| (j + 1, rj)) {
            acc += j as f64 * rj * p[n - j];
        }
        p.push(lambda_t / n as f64 * acc);
    }
    Ok(p)
}

/// Coefficients fᵢ = Pr{i units arrive during one service drawn from `b1`}
/// under compound Poisson input (`lambda`, `batch`).
///
/// The sequence is extended until the un-accumulated mass drops below
/// 1e-10, but never beyond `max_len` entries (the positional needs of the
/// recurrence consumers); at least `min_len` entries are always produced.
pub fn arrivals_per_service_coeffs(
    b1: &ServiceDistribution,
    batch: &BatchDistribution,
    lambda: f64,
    min_len: usize,
    max_len: usize,
) -> Result<CoeffSeq> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain("arrivals_per_service_coeffs", format!("lambda = {lambda}")));
    }
    let max_len = max_len.max(min_len).max(2);
    let values = match b1 {
        ServiceDistribution::Deterministic { d } => {
            let mut v = compound_poisson_pmf(batch, lambda * d, max_len)?;
            shrink_to_mass(&mut v, min_len);
            v
        }
        ServiceDistribution::Exponential { rate } => {
            exp_coeffs(*rate, batch, lambda, min_len, max_len)
        }
        ServiceDistribution::Erlang { k, rate } => {
            let stage = exp_coeffs(*rate, batch, lambda, min_len, max_len);
            let mut v = stage.clone();
            for _ in 1..*k {
                v = convolve_truncated(&v, &stage, max_len);
            }
            shrink_to_mass(&mut v, min_len);
            v
        }
        ServiceDistribution::Hyperexponential { weights, rates } => {
            let mut v = vec![0.0; 2];
            for (w, r) in weights.iter().zip(rates) {
                let comp = exp_coeffs(*r, batch, lambda, min_len, max_len);
                if comp.len() > v.len() {
                    v.resize(comp.len(), 0.0);
                }
                for (vi, ci) in v.iter_mut().zip(comp.iter()) {
                    *vi += w * ci;
                }
            }
            shrink_to_mass(&mut v, min_len);
            v
        }
    };
    Ok(CoeffSeq::new(values))
}

/// fᵢ for an exponential service of the given rate: condition on whether
/// the first event is the service completion (rate μ) or a batch arrival
/// (rate λ), giving f₀ = μ/(μ+λ) and fᵢ = (λ/(μ+λ)) Σ rⱼ fᵢ₋ⱼ.
fn exp_coeffs(
    rate: f64,
    batch: &BatchDistribution,
    lambda: f64,
    min_len: usize,
    max_len: usize,
) -> Vec<f64> {
    let r = batch.truncated_probs();
    let a = lambda / (lambda + rate);
    let mut f = Vec::with_capacity(min_len.max(64));
    f.push(rate / (rate + lambda));
    let mut mass = f[0];
    let mut i = 1;
    while i < max_len && (i < min_len || 1.0 - mass > COEFF_MASS_TOL) {
        let mut acc = 0.0;
        for (j, &rj) in r.iter().enumerate().take(i).map(|(j, rj)| (j + 1, rj)) {
            acc += rj * f[i - j];
        }
        let fi = a * acc;
        mass += fi;
        f.push(fi);
        i += 1;
    }
    f
}

/// Truncated convolution of two coefficient sequences (used for the Erlang
/// stages), keeping at most `max_len` entries.
fn convolve_truncated(a: &[f64], b: &[f64], max_len: usize) -> Vec<f64> {
    let n = (a.len() + b.len() - 1).min(max_len);
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 || i >= n {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if i + j >= n {
                break;
            }
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Drop trailing entries once the kept mass is within `COEFF_MASS_TOL` of
/// one, but never below `min_len` entries.
fn shrink_to_mass(v: &mut Vec<f64>, min_len: usize) {
    let mut mass: f64 = v.iter().sum();
    while v.len() > min_len.max(2) {
        let last = *v.last().expect("non-empty");
        if 1.0 - (mass - last) > COEFF_MASS_TOL {
            break;
        }
        mass -= last;
        v.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    /// Adaptive Simpson quadrature, used only as an independent oracle.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let coarse = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = (m - a) / 6.0 * (f(a) + 4.0 * f(lm) + f(m));
        let right = (b - m) / 6.0 * (f(m) + 4.0 * f(rm) + f(b));
        let fine = left + right;
        if depth == 0 || (fine - coarse).abs() < 15.0 * tol {
            fine + (fine - coarse) / 15.0
        } else {
            simpson(f, a, m, 0.5 * tol, depth - 1) + simpson(f, m, b, 0.5 * tol, depth - 1)
        }
    }

    #[test]
    fn geometric_moments_match_series() {
        let q = 0.5;
        let b = BatchDistribution::geometric(q).unwrap();
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        for k in 1..400 {
            let p = b.prob(k);
            let kf = k as f64;
            s1 += kf * p;
            s2 += kf * kf * p;
            s3 += kf * kf * kf * p;
        }
        assert!(close(b.m1(), s1, 1e-12), "m1 {} vs {s1}", b.m1());
        assert!(close(b.m2(), s2, 1e-12), "m2 {} vs {s2}", b.m2());
        assert!(close(b.m3(), s3, 1e-12), "m3 {} vs {s3}", b.m3());
        assert!(close(b.m1(), 2.0, 1e-15));
        assert!(close(b.m2(), 6.0, 1e-15));
    }

    #[test]
    fn explicit_tail_and_pgf() {
        let b = BatchDistribution::explicit(vec![0.6, 0.3, 0.1]).unwrap();
        assert!(close(b.tail(0), 1.0, 1e-15));
        assert!(close(b.tail(1), 0.4, 1e-15));
        assert!(close(b.tail(2), 0.1, 1e-15));
        assert_eq!(b.tail(3), 0.0);
        let z = 0.7;
        let direct = 0.6 * z + 0.3 * z * z + 0.1 * z * z * z;
        assert!(close(b.pgf(z).unwrap(), direct, 1e-15));
        let h = 1e-6;
        let fd = (b.pgf(z + h).unwrap() - b.pgf(z - h).unwrap()) / (2.0 * h);
        assert!(close(b.pgf_deriv(z).unwrap(), fd, 1e-8));
    }

    #[test]
    fn geometric_pgf_outside_radius_is_domain_error() {
        let b = BatchDistribution::geometric(0.5).unwrap();
        assert!(b.pgf(1.9).is_ok());
        assert!(matches!(b.pgf(2.0), Err(Error::Domain { .. })));
        assert!(matches!(b.pgf(2.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn panjer_matches_brute_force_convolution() {
        // Oracle: pₙ = Σ_k e^{−λt}(λt)^k/k! · r^{*k}ₙ summed far past the mass.
        let batch = BatchDistribution::explicit(vec![0.6, 0.3, 0.1]).unwrap();
        let lambda_t = 0.7;
        let n_max = 12;
        let mut oracle = vec![0.0; n_max];
        let r = [0.6, 0.3, 0.1];
        let mut conv = vec![0.0; n_max];
        conv[0] = 1.0; // r^{*0}
        let mut pois = (-lambda_t as f64).exp();
        for n in 0..n_max {
            oracle[n] += pois * conv[n];
        }
        for k in 1..40 {
            let mut next = vec![0.0; n_max];
            for (i, &c) in conv.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for (j, &rj) in r.iter().enumerate() {
                    if i + j + 1 < n_max {
                        next[i + j + 1] += c * rj;
                    }
                }
            }
            conv = next;
            pois *= lambda_t / k as f64;
            for n in 0..n_max {
                oracle[n] += pois * conv[n];
            }
        }
        let pmf = compound_poisson_pmf(&batch, lambda_t, n_max).unwrap();
        for n in 0..n_max {
            assert!(
                (pmf[n] - oracle[n]).abs() < 1e-12,
                "n = {n}: panjer {} vs oracle {}",
                pmf[n],
                oracle[n]
            );
        }
    }

    #[test]
    fn unit_batch_panjer_is_poisson() {
        let batch = BatchDistribution::unit();
        let lt = 1.3;
        let pmf = compound_poisson_pmf(&batch, lt, 20).unwrap();
        let mut term = (-lt as f64).exp();
        for (n, &p) in pmf.iter().enumerate() {
            if n > 0 {
                term *= lt / n as f64;
            }
            assert!((p - term).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn exponential_unit_batch_coeffs_are_geometric() {
        // μ = λ = 1, single-unit batches: fᵢ = (1/2)^{i+1}.
        let b1 = ServiceDistribution::exponential(1.0).unwrap();
        let f = arrivals_per_service_coeffs(&b1, &BatchDistribution::unit(), 1.0, 30, 100).unwrap();
        for i in 0..30 {
            let expect = 0.5f64.powi(i as i32 + 1);
            assert!((f.get(i) - expect).abs() < 1e-12, "i = {i}: {} vs {expect}", f.get(i));
        }
    }

    #[test]
    fn deterministic_coeffs_equal_compound_poisson_pmf() {
        let batch = BatchDistribution::geometric(0.4).unwrap();
        let b1 = ServiceDistribution::deterministic(0.8).unwrap();
        let f = arrivals_per_service_coeffs(&b1, &batch, 1.25, 16, 400).unwrap();
        let pmf = compound_poisson_pmf(&batch, 1.0, f.len()).unwrap();
        for i in 0..f.len() {
            assert!((f.get(i) - pmf[i]).abs() < 1e-12, "i = {i}");
        }
    }

    #[test]
    fn erlang_coeffs_match_quadrature_oracle() {
        // fᵢ = ∫ Pr{N(x) = i} dB₁(x) with B₁ = Erlang(2, 2) and geometric
        // batches; the integrand is evaluated through an independent Panjer
        // call per point and integrated by adaptive Simpson.
        let batch = BatchDistribution::geometric(0.3).unwrap();
        let b1 = ServiceDistribution::erlang(2, 2.0).unwrap();
        let lambda = 0.9;
        let f = arrivals_per_service_coeffs(&b1, &batch, lambda, 8, 200).unwrap();
        for i in 0..8 {
            let integrand = |x: f64| {
                let pmf = compound_poisson_pmf(&batch, lambda * x, i + 1).unwrap();
                // Erlang(2, 2) density: 4·x·e^{−2x}.
                pmf[i] * 4.0 * x * (-2.0 * x).exp()
            };
            let oracle = simpson(&integrand, 0.0, 40.0, 1e-12, 24);
            assert!(
                (f.get(i) - oracle).abs() < 1e-9,
                "i = {i}: coeffs {} vs quadrature {oracle}",
                f.get(i)
            );
        }
    }

    #[test]
    fn first_moment_identity_across_families() {
        // Σ i·fᵢ = ρ₁ = λ·Ες·(mean of B₁) for every family.
        let batch = BatchDistribution::geometric(0.5).unwrap();
        let lambda = 0.25;
        let families = [
            ServiceDistribution::exponential(0.55).unwrap(),
            ServiceDistribution::erlang(3, 1.8).unwrap(),
            ServiceDistribution::deterministic(1.7).unwrap(),
            ServiceDistribution::hyperexponential(vec![0.35, 0.65], vec![0.8, 2.4]).unwrap(),
        ];
        for b1 in families {
            let rho1 = lambda * batch.m1() * b1.mean();
            let f = arrivals_per_service_coeffs(&b1, &batch, lambda, 2, 4000).unwrap();
            assert!(
                (f.first_moment() - rho1).abs() < 1e-8,
                "{b1:?}: Σi·fᵢ = {} vs ρ₁ = {rho1}",
                f.first_moment()
            );
        }
    }

    #[test]
    fn second_factorial_moment_matches_gamma2_at_critical_load() {
        // At ρ₁ = 1: U″(1) = Ες²/Ες − 1 + ρ₁₂·(Ες)² with ρ₁₂ = λ²·ΕB₁².
        let batch = BatchDistribution::geometric(0.5).unwrap();
        let e1 = batch.m1();
        let lambda = 0.4;
        let rate = lambda * e1; // ρ₁ = 1
        let b1 = ServiceDistribution::exponential(rate).unwrap();
        let rho12 = lambda * lambda * b1.raw_moment(2);
        let gamma2 = batch.m2() / e1 - 1.0 + rho12 * e1 * e1;
        let f = arrivals_per_service_coeffs(&b1, &batch, lambda, 2, 100_000).unwrap();
        assert!(
            (f.second_factorial_moment() - gamma2).abs() < 1e-6,
            "Σi(i−1)fᵢ = {} vs γ₂ = {gamma2}",
            f.second_factorial_moment()
        );
    }

    #[test]
    fn coeff_pgf_matches_lst_composition() {
        // Σ fᵢ zⁱ = B̂₁(λ − λR̂(z)) on |z| ≤ 1.
        let batch = BatchDistribution::explicit(vec![0.5, 0.25, 0.25]).unwrap();
        let b1 = ServiceDistribution::hyperexponential(vec![0.4, 0.6], vec![1.0, 3.0]).unwrap();
        let lambda = 0.8;
        let f = arrivals_per_service_coeffs(&b1, &batch, lambda, 2, 4000).unwrap();
        for &z in &[0.2_f64, 0.5, 0.9, 1.0] {
            let series: f64 =
                f.values.iter().enumerate().map(|(i, &fi)| fi * z.powi(i as i32)).sum();
            let composed = b1.lst(lambda - lambda * batch.pgf(z).unwrap()).unwrap();
            assert!(
                (series - composed).abs() < 1e-9,
                "z = {z}: series {series} vs U(z) {composed}"
            );
        }
    }

    #[test]
    fn lst_domain_errors() {
        let exp = ServiceDistribution::exponential(2.0).unwrap();
        assert!(exp.lst(-1.9).is_ok());
        assert!(matches!(exp.lst(-2.0), Err(Error::Domain { .. })));
        let hyper = ServiceDistribution::hyperexponential(vec![0.5, 0.5], vec![1.0, 4.0]).unwrap();
        assert!(hyper.lst(-0.5).is_ok());
        assert!(matches!(hyper.lst(-1.0), Err(Error::Domain { .. })));
        let det = ServiceDistribution::deterministic(1.0).unwrap();
        assert!(det.lst(-50.0).is_ok());
    }

    #[test]
    fn service_moments_match_quadrature() {
        let b = ServiceDistribution::erlang(3, 2.0).unwrap();
        for l in 1..=3 {
            let integrand = |x: f64| {
                // Erlang(3, 2) density: 2³x²e^{−2x}/2!.
                x.powi(l as i32) * 8.0 * x * x * (-2.0 * x).exp() / 2.0
            };
            let oracle = simpson(&integrand, 0.0, 60.0, 1e-12, 24);
            assert!(
                close(b.raw_moment(l), oracle, 1e-9),
                "l = {l}: {} vs {oracle}",
                b.raw_moment(l)
            );
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(BatchDistribution::explicit(vec![0.5, 0.4]).is_err());
        assert!(BatchDistribution::explicit(vec![]).is_err());
        assert!(BatchDistribution::geometric(1.0).is_err());
        assert!(ServiceDistribution::exponential(0.0).is_err());
        assert!(ServiceDistribution::erlang(0, 1.0).is_err());
        assert!(ServiceDistribution::hyperexponential(vec![0.7, 0.7], vec![1.0, 2.0]).is_err());
        assert!(ServiceDistribution::deterministic(-1.0).is_err());
    }
}
