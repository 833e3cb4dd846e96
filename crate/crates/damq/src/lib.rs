//! Stationary analysis and optimal control of a level-dependent dam/queue.
//!
//! The model is a single-server queue fed by a compound Poisson stream:
//! batches ("water units") of random size ς arrive at rate λ. Service is
//! level-dependent with a threshold `L`: a service that begins while the
//! queue length is at most `L` uses the *normal* outflow law B₁, and one
//! that begins while the queue length exceeds `L` uses the *emergency*
//! outflow law B₂. The server idles when the queue is empty.
//!
//! With ρ₁ = λ·Ες·(mean of B₁) and ρ₂ = λ·Ες·(mean of B₂) < 1, the chain
//! of modules computes:
//!
//! * [`dist`] — input laws, their moments and transforms, and the
//!   coefficient sequence fᵢ = Pr{i units arrive during one B₁ service};
//! * [`takacs`] — the backward recurrence Qₙ = Σ Qₙ₋ᵢ₊₁fᵢ and the busy
//!   period tables built from it;
//! * [`stationary`] — exact stationary probabilities (empty dam, levels
//!   1..L, level above L / emergency service);
//! * [`asymptotics`] — roots of z = B̂₁(λ−λR̂(z)) and the closed-form
//!   heavy-traffic limits of the stationary law in the three regimes
//!   ρ₁ = 1, ρ₁ = 1 + δ, ρ₁ = 1 − δ with δ·L → C;
//! * [`objective`] — the long-run cost functional (passage damage at the
//!   boundary levels plus level-dependent water cost) and its limiting
//!   upper/lower forms;
//! * [`control`] — minimization of the limiting objectives over C and the
//!   resulting prescription for the normal-regime output rate;
//! * [`sim`] — a discrete-event simulation of the same dam used as an
//!   independent cross-check of every exact and asymptotic quantity;
//! * [`cli`] — config-file driven entry points emitting CSV.

pub mod asymptotics;
pub mod cli;
pub mod control;
pub mod dist;
pub mod error;
pub mod model;
pub mod objective;
pub mod sim;
pub mod stationary;
pub mod takacs;

pub use error::{Error, Result};
pub use model::DamModel;
