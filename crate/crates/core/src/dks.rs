//! Terminal-wealth variant: no consumption, but an `L%` haircut on wealth if
//! the market is frozen at the horizon. The log-utility solution is closed
//! form; this module evaluates it together with its rare-freeze expansion
//! and fast-switching limit.

use crate::error::{ModelError, Result};
use crate::merton::merton_log;
use crate::numerics::{adaptive_simpson, brent_root};
use crate::params::{jump_map, validate_params, ModelParams};
use serde::Serialize;

/// Closed-form terminal-wealth solution.
#[derive(Debug, Clone, Serialize)]
pub struct DksSolution {
    pub horizon: f64,
    /// Constant optimal fraction: root of
    /// `0 = (mu - r) - sigma^2 pi - lambda01 L/(1 - L pi)`.
    pub pi_star: f64,
    params: ModelParams,
}

/// Solves the terminal-wealth problem (`alpha = r`).
pub fn dks_solve(p: &ModelParams, horizon: f64) -> Result<DksSolution> {
    let p = validate_params(*p)?;
    if (p.alpha - p.r).abs() > 1e-12 {
        return Err(ModelError::UnsupportedModel(
            "terminal-wealth closed form requires alpha = r".into(),
        ));
    }
    if horizon <= 0.0 {
        return Err(ModelError::Domain("horizon must be positive".into()));
    }
    let s2 = p.sigma * p.sigma;
    let pi_hat = (p.mu - p.r) / s2;
    if !(0.0..1.0).contains(&pi_hat) {
        return Err(ModelError::WrongRegime(format!(
            "closed root derivation needs 0 < (mu-r)/sigma^2 < 1, got {pi_hat}"
        )));
    }
    let l = p.l_jump;
    let pi_star = if l == 0.0 {
        pi_hat
    } else {
        // quadratic root of (mu-r)(1-L pi) - sigma^2 pi (1-L pi) = lambda01 L
        let b = s2 + (p.mu - p.r) * l;
        let disc = (s2 - (p.mu - p.r) * l).powi(2) + 4.0 * s2 * l * l * p.lambda01;
        (b - disc.sqrt()) / (2.0 * s2 * l)
    };
    Ok(DksSolution {
        horizon,
        pi_star,
        params: p,
    })
}

impl DksSolution {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// First-order condition whose root is the optimal fraction.
    pub fn first_order_condition(&self, pi: f64) -> f64 {
        let p = &self.params;
        (p.mu - p.r) - p.sigma * p.sigma * pi
            - p.lambda01 * p.l_jump / (1.0 - p.l_jump * pi)
    }

    /// Liquid value component `f0(t)` (`J0(t,x) = log x + f0(t)`).
    pub fn f0(&self, t: f64) -> f64 {
        let p = &self.params;
        let tau = self.horizon - t;
        let (l01, l10) = (p.lambda01, p.lambda10);
        let pi = self.pi_star;
        let s2 = p.sigma * p.sigma;
        let k = p.r + (p.mu - p.r) * pi - 0.5 * s2 * pi * pi
            + l01 / l10 * (p.r + l10 * (1.0 - pi * p.l_jump).ln());
        let lsum = l01 + l10;
        let e_sum = (-lsum * tau).exp();
        let e_10 = (-l10 * tau).exp();
        let first = (k * (1.0 - e_sum) / lsum - p.r / l10 * (e_10 - e_sum)) * l01 / lsum;
        let second = (l01 * p.r / (l10 * l10) * (-1.0 + e_10) + k * tau) * l10 / lsum;
        first + second
    }

    /// Frozen value component
    /// `f1(t, pi) = int_t^T (lambda10 f0(s) + r + lambda10 log(1-pi L))
    ///   e^(-lambda10 (s-t)) ds + log(1-pi L) e^(-lambda10 (T-t))`.
    ///
    /// Together with [`DksSolution::f0`] and the constant optimal fraction
    /// this solves the variant in which every freeze carries the haircut
    /// (an `lambda10 log(1-pi L)` flux in the frozen equation), which is
    /// what makes the optimal fraction time-independent.
    pub fn f1(&self, t: f64, pi: f64) -> f64 {
        let p = &self.params;
        let l10 = p.lambda10;
        let haircut = (1.0 - pi * p.l_jump).ln();
        let integrand =
            |s: f64| (l10 * self.f0(s) + p.r + l10 * haircut) * (-l10 * (s - t)).exp();
        adaptive_simpson(&integrand, t, self.horizon, 1e-12)
            + haircut * (-l10 * (self.horizon - t)).exp()
    }

    /// Frictionless terminal-wealth value component `(r + theta^2/2)(T-t)`.
    pub fn f0_merton(&self, t: f64) -> f64 {
        let p = &self.params;
        let theta = p.sharpe();
        (p.r + theta * theta / 2.0) * (self.horizon - t)
    }

    /// Efficiency loss profile `Theta(t) = 1 - exp(f0(t) - f0_merton(t))`
    /// (unit terminal log-wealth coefficient fixes the scale).
    pub fn loss(&self, t: f64) -> f64 {
        1.0 - (self.f0(t) - self.f0_merton(t)).exp()
    }
}

/// Rare-freeze expansion and fast-switching limit of the terminal-wealth
/// problem.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DksAsymptotics {
    pub horizon: f64,
    /// `pi* ~ pi_hat - lambda01 L/(sigma^2 - (mu-r) L)`.
    pub pi1: f64,
    pub pi_hat: f64,
    theta2: f64,
    lambda10: f64,
    log_drag: f64,
}

impl DksAsymptotics {
    pub fn fraction(&self, lambda01: f64) -> f64 {
        self.pi_hat - lambda01 * self.pi1
    }

    /// First-order loss coefficient
    /// `Theta1(t) = theta^2/(2 lambda10^2) (e^(-lambda10 (T-t)) + lambda10 (T-t) - 1)
    ///   - log(1 - (mu-r) L / sigma^2) (T-t)`; both terms are nonnegative
    /// and vanish at the horizon.
    pub fn theta1(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        let l10 = self.lambda10;
        self.theta2 / (2.0 * l10 * l10) * ((-l10 * tau).exp() + l10 * tau - 1.0)
            + self.log_drag * tau
    }
}

pub fn dks_asymptotics(p: &ModelParams, horizon: f64) -> Result<DksAsymptotics> {
    let p = validate_params(*p)?;
    let s2 = p.sigma * p.sigma;
    let pi_hat = (p.mu - p.r) / s2;
    if !(0.0..1.0).contains(&pi_hat) {
        return Err(ModelError::WrongRegime(format!(
            "expansion needs 0 < (mu-r)/sigma^2 < 1, got {pi_hat}"
        )));
    }
    let theta = p.sharpe();
    Ok(DksAsymptotics {
        horizon,
        pi1: p.l_jump / (s2 - (p.mu - p.r) * p.l_jump),
        pi_hat,
        theta2: theta * theta,
        lambda10: p.lambda10,
        log_drag: -(1.0 - (p.mu - p.r) * p.l_jump / s2).ln(),
    })
}

/// Fast-switching limit of the terminal-wealth problem.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DksHomogenized {
    pub horizon: f64,
    /// Limiting fraction `(mu - r - lambda01 L_bar)/sigma^2`.
    pub pi_star: f64,
    pub lambda_bar: f64,
    theta2: f64,
    theta_tilde2: f64,
    pub r: f64,
}

impl DksHomogenized {
    /// Limiting liquid value component `(T-t)(r + lambda_bar theta_tilde^2/2)`.
    pub fn f0(&self, t: f64) -> f64 {
        (self.horizon - t) * (self.r + self.lambda_bar * self.theta_tilde2 / 2.0)
    }

    /// Limiting loss `1 - exp((T-t)(lambda_bar theta_tilde^2 - theta^2)/2)`.
    pub fn loss(&self, t: f64) -> f64 {
        1.0 - ((self.horizon - t) * 0.5 * (self.lambda_bar * self.theta_tilde2 - self.theta2))
            .exp()
    }
}

pub fn dks_homogenized(p: &ModelParams, horizon: f64, l_bar: f64) -> Result<DksHomogenized> {
    let p = validate_params(*p)?;
    let s2 = p.sigma * p.sigma;
    let theta = p.sharpe();
    let theta_tilde = (p.mu - p.r - p.lambda01 * l_bar) / p.sigma;
    Ok(DksHomogenized {
        horizon,
        pi_star: (p.mu - p.r - p.lambda01 * l_bar) / s2,
        lambda_bar: p.liquid_time_fraction(),
        theta2: theta * theta,
        theta_tilde2: theta_tilde * theta_tilde,
        r: p.r,
    })
}

/// Combined expansion + fast-switching record.
pub fn dks_asymptotics_and_hom(
    p: &ModelParams,
    horizon: f64,
    l_bar: f64,
) -> Result<(DksAsymptotics, DksHomogenized)> {
    Ok((dks_asymptotics(p, horizon)?, dks_homogenized(p, horizon, l_bar)?))
}

/// First-order coefficient of the gap between the terminal-wealth fraction
/// and the consumption-problem fraction:
/// `pi*_terminal - pi*_consumption ~ lambda01 (1-L)/(sigma^2 (1-pi_hat L)^2)
///   * g(pi_hat)^(lambda10/rho) / (1 - g(pi_hat)^(1+lambda10/rho))`.
///
/// The cash-crunch channel is absent from the terminal-wealth problem, so
/// its optimal fraction sits above the consumption one by exactly the
/// crunch term of the consumption expansion.
pub fn consumption_gap_coeff(p: &ModelParams) -> Result<f64> {
    let p = validate_params(*p)?;
    let m = merton_log(&p);
    if m.pi_hat >= 1.0 {
        return Err(ModelError::WrongRegime("needs pi_hat < 1".into()));
    }
    let g = jump_map(m.pi_hat, p.l_jump)?;
    let a = 1.0 + p.lambda10 / p.rho;
    let g_pow = if g > 0.0 { ((a - 1.0) * g.ln()).exp() } else { 0.0 };
    let s2 = p.sigma * p.sigma;
    Ok((1.0 - p.l_jump) / (s2 * (1.0 - m.pi_hat * p.l_jump).powi(2)) * g_pow
        / (1.0 - g_pow * g))
}
