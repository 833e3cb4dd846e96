//! Discrete-event simulation oracle for the level-dependent dam.
//!
//! The simulator realizes the model literally: compound-Poisson batch
//! inflow, one unit drained per service completion, the service law picked
//! by the level seen at each service start (B₂ strictly above L, B₁
//! otherwise, with no preemption when the level crosses L mid-service),
//! idle when empty. After an idle stretch the first service starts at the
//! arrival instant of the batch that ended it. It produces time-weighted
//! estimates of the idle fraction, the two above-threshold readings, and
//! the per-level occupancies, each with a standard error, plus the mean
//! number of services per busy period for cross-checking the analytic
//! tables.
//!
//! Standard errors of a single run come from 32 batch-means segments laid
//! over the post-warmup events; replicated runs report between-replication
//! errors instead. Identical inputs give bit-identical results: the
//! generator is ChaCha12 seeded from the 64-bit `seed`, and replication k
//! of [`replicate`] runs with [`derived_seed`]`(base_seed, k)`.

use crate::error::{Error, Result};
use crate::model::DamModel;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

/// Batch-means segments per run.
const SEGMENTS: usize = 32;
/// Smallest run the estimators are calibrated for.
const MIN_EVENTS: u64 = 10_000;
/// Warmup used by [`replicate`], as a fraction of events.
const DEFAULT_WARMUP: f64 = 0.2;
/// Per-level standard errors are tracked up to this threshold; beyond it
/// `q_se` is reported as zeros (the point estimates are unaffected).
const MAX_SE_LEVELS: usize = 65_536;
/// Identifier of the generator behind the reproducibility contract.
pub const RNG_ALGORITHM: &str = "chacha12";

/// Time-weighted estimates from one run or a pooled set of replications.
///
/// `q_hat[i-1]` estimates the fraction of time at level i (i = 1..=L)
/// regardless of which service law is in progress; `p2_service_hat` is the
/// fraction of time a B₂ service is running while `p2_level_hat` is the
/// fraction of time the level exceeds L. A B₂ service only ever runs above
/// L, so `p2_level_hat ≥ p2_service_hat` holds pathwise, with the gap made
/// of B₁ services that were pushed past the threshold by arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub p1_hat: f64,
    pub p1_se: f64,
    pub p2_service_hat: f64,
    pub p2_service_se: f64,
    pub p2_level_hat: f64,
    pub p2_level_se: f64,
    pub q_hat: Vec<f64>,
    pub q_se: Vec<f64>,
    /// Mean services per busy period over completed post-warmup cycles.
    pub mean_served_per_busy_period: f64,
    pub served_se: f64,
    pub events: u64,
    pub busy_cycles: u64,
    /// Observed (post-warmup) time; for pooled results, summed over runs.
    pub total_time: f64,
    /// The seed this result is reproducible from (base seed for pools).
    pub seed: u64,
    pub rng_algorithm: &'static str,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Idle,
    B1,
    B2,
}

struct Tally {
    t0: f64,
    idle: f64,
    b1: f64,
    b2: f64,
    above: f64,
    level: Vec<f64>,
    seg_dur: Vec<f64>,
    seg_idle: Vec<f64>,
    seg_b2: Vec<f64>,
    seg_above: Vec<f64>,
    /// SEGMENTS rows × L columns; empty when L > MAX_SE_LEVELS.
    seg_level: Vec<f64>,
}

impl Tally {
    fn new(level: usize) -> Self {
        let seg_level =
            if level <= MAX_SE_LEVELS { vec![0.0; SEGMENTS * level] } else { Vec::new() };
        Tally {
            t0: 0.0,
            idle: 0.0,
            b1: 0.0,
            b2: 0.0,
            above: 0.0,
            level: vec![0.0; level],
            seg_dur: vec![0.0; SEGMENTS],
            seg_idle: vec![0.0; SEGMENTS],
            seg_b2: vec![0.0; SEGMENTS],
            seg_above: vec![0.0; SEGMENTS],
            seg_level,
        }
    }

    fn add(&mut self, dt: f64, n: u64, kind: Kind, seg: usize) {
        match kind {
            Kind::Idle => self.idle += dt,
            Kind::B1 => self.b1 += dt,
            Kind::B2 => self.b2 += dt,
        }
        self.seg_dur[seg] += dt;
        if kind == Kind::Idle {
            self.seg_idle[seg] += dt;
        }
        if kind == Kind::B2 {
            self.seg_b2[seg] += dt;
        }
        let l = self.level.len() as u64;
        if n > l {
            self.above += dt;
            self.seg_above[seg] += dt;
        } else if n >= 1 {
            self.level[(n - 1) as usize] += dt;
            if !self.seg_level.is_empty() {
                self.seg_level[seg * self.level.len() + (n - 1) as usize] += dt;
            }
        }
    }
}

/// Standard error of a time-weighted mean from batch-means segments.
fn batch_se(seg_x: &[f64], seg_dur: &[f64]) -> f64 {
    let means: Vec<f64> = seg_x
        .iter()
        .zip(seg_dur)
        .filter(|&(_, &d)| d > 0.0)
        .map(|(&x, &d)| x / d)
        .collect();
    let m = means.len();
    if m < 2 {
        return 0.0;
    }
    let mean = means.iter().sum::<f64>() / m as f64;
    let var = means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    (var / m as f64).sqrt()
}

/// Run one seeded simulation of at least `min_events` events (arrivals and
/// completions both count), discarding the first `warmup_fraction` of them.
pub fn simulate(
    model: &DamModel,
    min_events: u64,
    warmup_fraction: f64,
    seed: u64,
) -> Result<SimulationResult> {
    if min_events < MIN_EVENTS {
        return Err(Error::domain("simulate", "min_events must be at least 10000"));
    }
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::domain("simulate", "warmup_fraction must lie in [0, 1)"));
    }
    model.require_stable()?;

    let l = model.level;
    let l_u64 = l as u64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let arrival =
        Exp::new(model.lambda).map_err(|_| Error::domain("simulate", "bad arrival rate"))?;

    let warm = (min_events as f64 * warmup_fraction).floor() as u64;
    let seg_len = ((min_events - warm) / SEGMENTS as u64).max(1);

    let mut t = 0.0_f64;
    let mut n: u64 = 0;
    let mut next_arrival = arrival.sample(&mut rng);
    let mut events: u64 = 0;
    let mut measuring = warm == 0;

    let mut acc = Tally::new(l);
    let mut cycle_live = false;
    let mut served_in_cycle: u64 = 0;
    let mut cycles: u64 = 0;
    let mut served_sum = 0.0_f64;
    let mut served_sumsq = 0.0_f64;

    macro_rules! seg {
        () => {
            (((events - warm) / seg_len) as usize).min(SEGMENTS - 1)
        };
    }

    while events < min_events {
        if n == 0 {
            if measuring {
                let seg = seg!();
                acc.add(next_arrival - t, 0, Kind::Idle, seg);
            }
            t = next_arrival;
            n = model.batch.sample(&mut rng);
            next_arrival = t + arrival.sample(&mut rng);
            events += 1;
            cycle_live = measuring;
            served_in_cycle = 0;
            if !measuring && events >= warm {
                measuring = true;
                acc.t0 = t;
            }
        } else {
            // The service law is fixed by the level at the start and keeps
            // running even if arrivals push the level across the threshold.
            let kind = if n > l_u64 { Kind::B2 } else { Kind::B1 };
            let end = t + match kind {
                Kind::B2 => model.b2.sample(&mut rng),
                _ => model.b1.sample(&mut rng),
            };
            while next_arrival < end {
                if measuring {
                    let seg = seg!();
                    acc.add(next_arrival - t, n, kind, seg);
                }
                t = next_arrival;
                n += model.batch.sample(&mut rng);
                next_arrival = t + arrival.sample(&mut rng);
                events += 1;
                if !measuring && events >= warm {
                    measuring = true;
                    acc.t0 = t;
                }
            }
            if measuring {
                let seg = seg!();
                acc.add(end - t, n, kind, seg);
            }
            t = end;
            n -= 1;
            events += 1;
            served_in_cycle += 1;
            if n == 0 {
                if cycle_live && measuring {
                    cycles += 1;
                    served_sum += served_in_cycle as f64;
                    served_sumsq += (served_in_cycle as f64) * (served_in_cycle as f64);
                }
                cycle_live = false;
            }
            if !measuring && events >= warm {
                measuring = true;
                acc.t0 = t;
            }
        }
    }

    let total = t - acc.t0;
    if !(total > 0.0) {
        return Err(Error::domain("simulate", "no post-warmup time was observed"));
    }
    let q_hat: Vec<f64> = acc.level.iter().map(|v| v / total).collect();
    let q_se: Vec<f64> = if acc.seg_level.is_empty() {
        vec![0.0; l]
    } else {
        (0..l)
            .map(|i| {
                let col: Vec<f64> =
                    (0..SEGMENTS).map(|k| acc.seg_level[k * l + i]).collect();
                batch_se(&col, &acc.seg_dur)
            })
            .collect()
    };
    let (served_mean, served_se) = if cycles >= 1 {
        let mean = served_sum / cycles as f64;
        let se = if cycles >= 2 {
            let var = (served_sumsq - served_sum * mean).max(0.0) / (cycles - 1) as f64;
            (var / cycles as f64).sqrt()
        } else {
            0.0
        };
        (mean, se)
    } else {
        (f64::NAN, 0.0)
    };

    Ok(SimulationResult {
        p1_hat: acc.idle / total,
        p1_se: batch_se(&acc.seg_idle, &acc.seg_dur),
        p2_service_hat: acc.b2 / total,
        p2_service_se: batch_se(&acc.seg_b2, &acc.seg_dur),
        p2_level_hat: acc.above / total,
        p2_level_se: batch_se(&acc.seg_above, &acc.seg_dur),
        q_hat,
        q_se,
        mean_served_per_busy_period: served_mean,
        served_se,
        events,
        busy_cycles: cycles,
        total_time: total,
        seed,
        rng_algorithm: RNG_ALGORITHM,
    })
}

/// Seed of replication `rep` derived from `base_seed` (a splitmix64 mix,
/// so replications are decorrelated while remaining reproducible).
#[must_use]
pub fn derived_seed(base_seed: u64, rep: u64) -> u64 {
    let mut z = base_seed.wrapping_add((rep + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run `n_reps` independent replications of `min_events` events each
/// (warmup 20%) and pool them: point estimates are means over runs and
/// standard errors are between-replication. Runs execute in parallel and
/// merge in replication order; `n_reps = 1` returns the single run itself.
pub fn replicate(
    model: &DamModel,
    n_reps: u64,
    base_seed: u64,
    min_events: u64,
) -> Result<SimulationResult> {
    replicate_with(model, n_reps, base_seed, min_events, DEFAULT_WARMUP)
}

/// [`replicate`] with an explicit warmup fraction.
pub fn replicate_with(
    model: &DamModel,
    n_reps: u64,
    base_seed: u64,
    min_events: u64,
    warmup_fraction: f64,
) -> Result<SimulationResult> {
    if n_reps < 1 {
        return Err(Error::domain("replicate", "n_reps must be at least 1"));
    }
    let runs: Result<Vec<SimulationResult>> = (0..n_reps)
        .into_par_iter()
        .map(|k| simulate(model, min_events, warmup_fraction, derived_seed(base_seed, k)))
        .collect();
    let runs = runs?;
    if runs.len() == 1 {
        return Ok(runs.into_iter().next().expect("one run"));
    }

    let r = runs.len() as f64;
    let mean_se = |pick: &dyn Fn(&SimulationResult) -> f64| -> (f64, f64) {
        let vals: Vec<f64> = runs.iter().map(|run| pick(run)).collect();
        let mean = vals.iter().sum::<f64>() / r;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
        (mean, (var / r).sqrt())
    };
    let (p1_hat, p1_se) = mean_se(&|run| run.p1_hat);
    let (p2_service_hat, p2_service_se) = mean_se(&|run| run.p2_service_hat);
    let (p2_level_hat, p2_level_se) = mean_se(&|run| run.p2_level_hat);
    let level = model.level;
    let mut q_hat = vec![0.0; level];
    let mut q_se = vec![0.0; level];
    for i in 0..level {
        let (m, s) = mean_se(&|run| run.q_hat[i]);
        q_hat[i] = m;
        q_se[i] = s;
    }
    // Cycle stats pool over the runs that saw at least one complete cycle.
    let with_cycles: Vec<f64> = runs
        .iter()
        .filter(|run| run.busy_cycles > 0)
        .map(|run| run.mean_served_per_busy_period)
        .collect();
    let (served_mean, served_se) = if with_cycles.is_empty() {
        (f64::NAN, 0.0)
    } else {
        let m = with_cycles.len() as f64;
        let mean = with_cycles.iter().sum::<f64>() / m;
        let se = if with_cycles.len() >= 2 {
            let var =
                with_cycles.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        (mean, se)
    };

    Ok(SimulationResult {
        p1_hat,
        p1_se,
        p2_service_hat,
        p2_service_se,
        p2_level_hat,
        p2_level_se,
        q_hat,
        q_se,
        mean_served_per_busy_period: served_mean,
        served_se,
        events: runs.iter().map(|run| run.events).sum(),
        busy_cycles: runs.iter().map(|run| run.busy_cycles).sum(),
        total_time: runs.iter().map(|run| run.total_time).sum(),
        seed: base_seed,
        rng_algorithm: RNG_ALGORITHM,
    })
}
