//! Named parameter sets used across examples, tests and the CLI.
//!
//! The base market has `rho = r = 0.05`, `sigma = 1/6`, `alpha = r`,
//! `lambda01 = 0.1`, `lambda10 = 2`, `L = 0`, and the stock drift is chosen
//! per utility so that the unconstrained Merton fraction is 0.9:
//! `mu = r + 0.9 sigma^2 (1 - gamma)`.
//!
//! `sigma` is exactly 1/6 (not the rounded 0.167): the target fraction 0.9
//! with `mu - r = 0.025` forces `sigma^2 = 1/36`.

use crate::params::ModelParams;

/// Exact volatility of all bundled presets.
pub const SIGMA: f64 = 1.0 / 6.0;

/// Base market with the drift set for a given risk-aversion exponent.
pub fn base_with_gamma(gamma: f64) -> ModelParams {
    ModelParams {
        mu: 0.05 + 0.9 * SIGMA * SIGMA * (1.0 - gamma),
        sigma: SIGMA,
        r: 0.05,
        alpha: 0.05,
        rho: 0.05,
        gamma,
        lambda01: 0.1,
        lambda10: 2.0,
        l_jump: 0.0,
    }
}

/// Log utility base set (`mu = 0.075`).
pub fn base_log() -> ModelParams {
    base_with_gamma(0.0)
}

/// Hyperbolic utility base set (`gamma = -1`, `mu = 0.1`).
pub fn base_hyperbolic() -> ModelParams {
    base_with_gamma(-1.0)
}

/// Square-root utility base set (`gamma = 0.5`, `mu = 0.0625`).
pub fn base_sqrt() -> ModelParams {
    base_with_gamma(0.5)
}

/// One row of the benchmark table: a label plus the parameter overrides.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub utility: &'static str,
    pub case: &'static str,
    pub params: ModelParams,
}

/// The six benchmark cases for one utility.
fn variants(gamma: f64, utility: &'static str) -> Vec<TableRow> {
    let base = base_with_gamma(gamma);
    vec![
        TableRow {
            utility,
            case: "base",
            params: base,
        },
        TableRow {
            utility,
            case: "lambda01=0.05",
            params: ModelParams {
                lambda01: 0.05,
                ..base
            },
        },
        TableRow {
            utility,
            case: "lambda01=0.02",
            params: ModelParams {
                lambda01: 0.02,
                ..base
            },
        },
        TableRow {
            utility,
            case: "lambda10=4",
            params: ModelParams {
                lambda10: 4.0,
                ..base
            },
        },
        TableRow {
            utility,
            case: "L=0.1",
            params: ModelParams {
                l_jump: 0.1,
                ..base
            },
        },
        TableRow {
            utility,
            case: "lambda01=0.5,lambda10=10",
            params: ModelParams {
                lambda01: 0.5,
                lambda10: 10.0,
                ..base
            },
        },
    ]
}

/// All 18 benchmark rows: log, hyperbolic, square-root utilities.
pub fn table1_rows() -> Vec<TableRow> {
    let mut rows = variants(0.0, "log");
    rows.extend(variants(-1.0, "hyperbolic"));
    rows.extend(variants(0.5, "sqrt"));
    rows
}

/// Consumption-schedule figure: `mu` fixed across utilities, short freezes.
pub fn fig1_params(gamma: f64) -> ModelParams {
    ModelParams {
        mu: 0.0625,
        sigma: SIGMA,
        r: 0.05,
        alpha: 0.05,
        rho: 0.05,
        gamma,
        lambda01: 0.1,
        lambda10: 1.0,
        l_jump: 0.0,
    }
}

/// Finite-horizon loss-surface figure (T = 2 years).
///
/// The switching intensities are not pinned by the figure itself; the preset
/// records the base values `lambda01 = 0.1`, `lambda10 = 2` (the loss surface
/// does not depend on `lambda01`).
pub fn fig2_params() -> ModelParams {
    base_log()
}

/// Horizon of the loss-surface figure.
pub const FIG2_HORIZON: f64 = 2.0;
