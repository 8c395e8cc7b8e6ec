//! Numerical laboratory for self-interacting diffusions (SIDs).
//!
//! A SID moves in a confinement potential `V` while being pulled (or pushed)
//! by the time-averaged occupation measure of its own past through an
//! interaction potential `F`:
//!
//! ```text
//! dX_t = -∇V(X_t) dt - (∇F * μ_t)(X_t) dt + σ dW_t
//! μ_t  = t₀/(t₀+t) μ₀ + 1/(t₀+t) ∫₀ᵗ δ_{X_s} ds
//! ```
//!
//! The crate is split along the objects that matter for the small-noise exit
//! problem:
//!
//! - [`landscape`]: potential pairs `(V, F)`, presets and regularity checkers.
//! - [`geometry`]: exit domains, crossing detection, sublevel-set checks.
//! - [`measures`]: occupation measures, `∇F`-convolution, Wasserstein queries.
//! - [`dynamics`]: Euler–Maruyama and deterministic integrators.
//! - [`action`]: discretized rate functionals, minimum action paths, barrier `H`.
//! - [`harness`]: exit-time campaigns, Kramers statistics, the 1D mean exit
//!   time oracle, configuration and persistence.

pub mod action;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod landscape;
pub mod measures;
pub mod rng;

pub use error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
