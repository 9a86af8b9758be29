//! Optimal investment-consumption under regime-switching liquidity freezes.
//!
//! A single risky asset follows geometric Brownian motion while the market is
//! liquid; a two-state Markov chain switches the market into a freeze during
//! which the stock cannot be traded, grows at a deterministic rate, and drops
//! by a fixed fraction at the freeze onset. Consumption is financed from cash
//! only, so a frozen investor can run into a cash crunch.
//!
//! The crate solves the associated stochastic control problem for HARA/CRRA
//! utilities on infinite and finite horizons:
//!
//! * [`merton`] — classical unconstrained benchmarks,
//! * [`log_infinite`] — closed-form log-utility solution with both asymptotic
//!   regimes (rare freezes, large Sharpe ratio),
//! * [`hara`] — power-utility solver: generic quadrature for the frozen-regime
//!   value profile plus closed forms for γ = −1 and γ = ±1/2,
//! * [`coupled`] — Picard iteration for the fully coupled two-regime system,
//! * [`homogenized`] — fast-switching limits,
//! * [`finite_horizon`] — finite-horizon log problem (upwind PDE scheme) and
//!   the terminal-wealth variant in [`dks`],
//! * [`mc`] — Monte Carlo policy evaluation used as an independent check.

pub mod coupled;
pub mod dks;
pub mod error;
pub mod finite_horizon;
pub mod hara;
pub mod homogenized;
pub mod log_infinite;
pub mod mc;
pub mod merton;
pub mod numerics;
pub mod params;
pub mod presets;

pub use error::{ModelError, Result};
pub use params::ModelParams;
