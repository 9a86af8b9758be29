//! Picard iteration for the fully coupled two-regime system: alternate
//! (i) solving the frozen-regime shape given the liquid constant and
//! (ii) re-solving the liquid constant and fraction given the shape.
//!
//! Covers every utility exponent. Log utility integrates the frozen-regime
//! ODE numerically in `z = -log pi` (the route that also covers
//! `alpha < r`, where no closed form exists); power utilities reuse the
//! quadrature profile with the anchor replaced by the current liquid
//! constant.

use crate::error::{ModelError, Result};
use crate::hara::{
    efficiency_loss_hara, solve_liquid_hara, solve_phi_anchored, FrozenProfile, PhiProfile, ZGrid,
};
use crate::log_infinite::merton_benchmark;
use crate::merton::merton_hara;
use crate::numerics::{brent_root, golden_max, HermiteSpline};
use crate::params::validate_params;
use crate::ModelParams;
use serde::Serialize;

/// Solver controls. The defaults match the shipped experiment presets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoupledConfig {
    /// Stop when successive liquid constants change by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Damping on plain fixed-point updates (secant steps bypass it).
    pub damping: f64,
    /// Node count of the log-utility frozen-regime integration.
    pub log_steps: usize,
    /// Innermost `z` of the frozen-regime integration.
    pub z_min: f64,
    /// Outermost `z`; the shape has converged to its flat level there.
    pub z_max: f64,
    /// Grid for the power-utility quadrature profile.
    pub hara_grid: ZGrid,
}

impl Default for CoupledConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            damping: 0.5,
            log_steps: 4000,
            z_min: 1e-6,
            z_max: 20.0,
            hara_grid: ZGrid::default(),
        }
    }
}

/// Frozen-regime shape of a converged coupled solution.
#[derive(Debug, Clone, Serialize)]
pub enum CoupledShape {
    Log(LogShape),
    Hara(PhiProfile),
}

/// Numerically integrated log-utility frozen shape: the component `u(z)` of
/// `h(pi) = lambda10 b/(rho+lambda10) + u(-log pi)`, which does not depend
/// on the liquid constant.
#[derive(Debug, Clone, Serialize)]
pub struct LogShape {
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    /// `u'(z)` at the nodes.
    pub psi: Vec<f64>,
    /// Flat level `u(inf) = (r/rho - 1 + log rho)/(rho + lambda10)`.
    pub u_inf: f64,
    /// Crunch constant: `u(z) ~ (log z + c0)/(rho+lambda10)` as `z -> 0`.
    pub c0: f64,
    /// Linear crunch correction coefficient.
    pub v1: f64,
    rho: f64,
    lambda10: f64,
    #[serde(skip)]
    spline: HermiteSpline,
}

impl LogShape {
    /// `u(z)` with the crunch asymptotic below the grid and the flat level
    /// above it.
    pub fn u_at(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if z < self.grid[0] {
            return (z.ln() + self.c0) / (self.rho + self.lambda10) + self.v1 * z;
        }
        if z >= *self.grid.last().unwrap() {
            return *self.u.last().unwrap();
        }
        self.spline.value(z)
    }

    /// `u'(z)`.
    pub fn psi_at(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return f64::INFINITY;
        }
        if z < self.grid[0] {
            return 1.0 / ((self.rho + self.lambda10) * z) + self.v1;
        }
        if z >= *self.grid.last().unwrap() {
            return 0.0;
        }
        self.spline.deriv(z)
    }

    /// Frozen value shape `h(pi)` for a given liquid constant.
    pub fn h(&self, pi: f64, b: f64) -> f64 {
        if pi <= 0.0 {
            return self.lambda10 * b / (self.rho + self.lambda10) + self.u_inf;
        }
        if pi >= 1.0 {
            return f64::NEG_INFINITY;
        }
        self.lambda10 * b / (self.rho + self.lambda10) + self.u_at(-pi.ln())
    }

    /// `h'(pi) = -psi(-log pi)/pi`.
    pub fn h_prime(&self, pi: f64) -> f64 {
        if pi <= 0.0 {
            return 0.0;
        }
        if pi >= 1.0 {
            return f64::NEG_INFINITY;
        }
        -self.psi_at(-pi.ln()) / pi
    }
}

/// Converged coupled solution.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledSolution {
    pub gamma: f64,
    /// Liquid value constant (`b` additively for log, multiplier otherwise).
    pub v0_coeff: f64,
    /// Optimal liquid fraction.
    pub pi_star: f64,
    /// Efficiency loss against the frictionless benchmark.
    pub theta: f64,
    pub iterations: usize,
    /// Maximum absolute residual of the two equations on the default grid.
    pub residual: f64,
    pub shape: CoupledShape,
    params: ModelParams,
}

impl CoupledSolution {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Frozen-regime value shape at a grid of fractions.
    pub fn v1_values(&self, pis: &[f64]) -> Vec<f64> {
        match &self.shape {
            CoupledShape::Log(s) => pis.iter().map(|&pi| s.h(pi, self.v0_coeff)).collect(),
            CoupledShape::Hara(profile) => pis.iter().map(|&pi| profile.f(pi)).collect(),
        }
    }

    /// Frozen-regime consumption per unit wealth.
    pub fn c1_rate(&self, pi: f64) -> f64 {
        match &self.shape {
            CoupledShape::Log(s) => {
                if pi >= 1.0 {
                    0.0
                } else {
                    1.0 / (1.0 / self.params.rho + s.psi_at(-pi.max(1e-300).ln()))
                }
            }
            CoupledShape::Hara(profile) => profile.consumption_rate(pi),
        }
    }

    /// Liquid consumption per unit wealth.
    pub fn c0_rate(&self) -> f64 {
        if self.params.is_log() {
            self.params.rho
        } else {
            self.v0_coeff.powf(1.0 / (self.params.gamma - 1.0))
        }
    }
}

// ---------------------------------------------------------------------------
// log-utility frozen shape by direct integration
// ---------------------------------------------------------------------------

/// Crunch constants of the `u` equation: `u ~ (log z + c0)/(rho+lambda10) + v1 z`.
fn crunch_constants(p: &ModelParams) -> (f64, f64) {
    let rl = p.rho + p.lambda10;
    let ar = p.alpha - p.r;
    let c0 = p.alpha / p.rho - 1.0 - ar / rl + rl.ln();
    let v1 = -(ar / p.rho - ar / (2.0 * rl) + rl / p.rho) / (2.0 * rl + ar);
    (c0, v1)
}

/// Solves `-(rho+lambda10) u + (r + (alpha-r)e^-z)/rho - 1
///   - (1-e^-z)(alpha-r) psi - log(1/rho + psi) = 0` for `psi` given `(z, u)`.
fn solve_psi(p: &ModelParams, z: f64, u: f64) -> Result<f64> {
    let rl = p.rho + p.lambda10;
    let ar = p.alpha - p.r;
    let lead = -rl * u + (p.r + ar * (-z).exp()) / p.rho - 1.0;
    let c1 = (1.0 - (-z).exp()) * ar; // <= 0 since alpha <= r
    if c1.abs() < 1e-14 {
        // separable case: closed-form consumption slope
        return Ok(lead.exp() - 1.0 / p.rho);
    }
    let f = |psi: f64| lead - c1 * psi - (1.0 / p.rho + psi).ln();
    // physical branch: the smaller root, left of the minimum of f
    let psi_min = -1.0 / c1 - 1.0 / p.rho;
    let lo = -1.0 / p.rho + 1e-14;
    if f(psi_min) > 0.0 {
        return Err(ModelError::NoConvergence(format!(
            "frozen-regime slope equation has no root at z = {z}"
        )));
    }
    brent_root(f, lo, psi_min, 1e-14, 200)
}

/// Sensitivity `d psi / d u`, used to keep the explicit sweep inside its
/// stability region.
fn psi_sensitivity(p: &ModelParams, z: f64, psi: f64) -> f64 {
    let rl = p.rho + p.lambda10;
    let c1 = (1.0 - (-z).exp()) * (p.alpha - p.r);
    let denom = -c1 - 1.0 / (1.0 / p.rho + psi);
    if denom.abs() < 1e-12 {
        return -1e12;
    }
    rl / denom
}

/// Integrates the `b`-independent frozen-regime component `u(z)` from the
/// cash-crunch asymptotic start out to the flat region. RK4 in `log z`.
pub fn integrate_log_shape(p: &ModelParams, cfg: &CoupledConfig) -> Result<LogShape> {
    let rl = p.rho + p.lambda10;
    let (c0, v1) = crunch_constants(p);
    let n = cfg.log_steps.max(100);
    let l_min = cfg.z_min.ln();
    let l_max = cfg.z_max.ln();
    let dl = (l_max - l_min) / (n - 1) as f64;

    let mut grid = Vec::with_capacity(n);
    let mut us = Vec::with_capacity(n);
    let mut psis = Vec::with_capacity(n);

    let mut u = (cfg.z_min.ln() + c0) / rl + v1 * cfg.z_min;
    grid.push(cfg.z_min);
    us.push(u);
    psis.push(solve_psi(p, cfg.z_min, u)?);

    let rhs = |l: f64, u: f64| -> Result<f64> {
        let z = l.exp();
        Ok(z * solve_psi(p, z, u)?)
    };
    for k in 1..n {
        let l0 = l_min + dl * (k - 1) as f64;
        // the contraction toward the flat level stiffens as z grows; keep
        // the explicit stages inside their stability region by sub-stepping
        let z_end = (l0 + dl).exp();
        let jac = z_end * psi_sensitivity(p, z_end, *psis.last().unwrap()).abs();
        let sub = ((jac * dl / 1.5).ceil() as usize).clamp(1, 20_000);
        let h = dl / sub as f64;
        for s in 0..sub {
            let l = l0 + h * s as f64;
            let k1 = rhs(l, u)?;
            let k2 = rhs(l + 0.5 * h, u + 0.5 * h * k1)?;
            let k3 = rhs(l + 0.5 * h, u + 0.5 * h * k2)?;
            let k4 = rhs(l + h, u + h * k3)?;
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let z = (l_min + dl * k as f64).exp();
        grid.push(z);
        us.push(u);
        psis.push(solve_psi(p, z, u)?);
    }
    let u_inf = (p.r / p.rho - 1.0 + p.rho.ln()) / rl;
    let spline = HermiteSpline::new(grid.clone(), us.clone(), psis.clone());
    Ok(LogShape {
        grid,
        u: us,
        psi: psis,
        u_inf,
        c0,
        v1,
        rho: p.rho,
        lambda10: p.lambda10,
        spline,
    })
}

// ---------------------------------------------------------------------------
// Picard iterations
// ---------------------------------------------------------------------------

fn solve_coupled_log(p: &ModelParams, cfg: &CoupledConfig) -> Result<CoupledSolution> {
    if p.alpha <= p.r - p.rho {
        // the consumption slope equation folds there; the smooth branch
        // tracked by this solver no longer spans the whole domain
        return Err(ModelError::UnsupportedModel(format!(
            "frozen growth alpha = {} requires alpha > r - rho = {}",
            p.alpha,
            p.r - p.rho
        )));
    }
    let shape = integrate_log_shape(p, cfg)?;
    let big_a = p.r / p.rho - 1.0 + p.rho.ln();
    let s2 = p.sigma * p.sigma;
    let rl = p.rho + p.lambda10;

    // liquid bracket without the b-offset (the offset is pi-free)
    let objective = |pi: f64| {
        let g = pi * (1.0 - p.l_jump) / (1.0 - pi * p.l_jump);
        ((p.mu - p.r) * pi - 0.5 * s2 * pi * pi) / p.rho
            + p.lambda01 * ((1.0 - pi * p.l_jump).ln() / p.rho + shape.u_at(-g.max(1e-300).ln()))
    };
    let (pi_star, sup) = golden_max(objective, 0.0, 1.0 - 1e-9, 1024, 1e-12);

    // b <- (A + lambda01 lambda10 b/(rho+lambda10) + sup)/(rho+lambda01)
    let m = merton_benchmark(p);
    let mut b = m.value_coeff;
    let mut prev: Option<(f64, f64)> = None;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > cfg.max_iter {
            return Err(ModelError::NoConvergence(format!(
                "log Picard iteration stalled at b = {b}"
            )));
        }
        let next = (big_a + p.lambda01 * (p.lambda10 * b / rl) + sup) / (p.rho + p.lambda01);
        let residual = next - b;
        if residual.abs() < cfg.tol * b.abs().max(1.0) {
            b = next;
            break;
        }
        let step = match prev {
            Some((b0, r0)) if (residual - r0).abs() > 1e-300 => {
                let s = b - residual * (b - b0) / (residual - r0);
                if s.is_finite() {
                    s
                } else {
                    b + cfg.damping * residual
                }
            }
            _ => b + cfg.damping * residual,
        };
        prev = Some((b, residual));
        b = step;
    }

    let theta = 1.0 - (p.rho * (b - m.value_coeff)).exp();
    let mut sol = CoupledSolution {
        gamma: 0.0,
        v0_coeff: b,
        pi_star,
        theta,
        iterations,
        residual: f64::NAN,
        shape: CoupledShape::Log(shape),
        params: *p,
    };
    sol.residual = hjb_residual(&sol, p, &default_residual_grid()).max_abs();
    Ok(sol)
}

fn solve_coupled_hara(p: &ModelParams, cfg: &CoupledConfig) -> Result<CoupledSolution> {
    if (p.alpha - p.r).abs() > 1e-12 {
        return Err(ModelError::UnsupportedModel(
            "coupled power-utility solver requires alpha = r".into(),
        ));
    }
    let m = merton_hara(p)?;
    let f_hat = m.value_coeff_checked()?;
    let mut anchor = f_hat;
    let mut prev: Option<(f64, f64)> = None;
    let mut iterations = 0;
    let (profile, liquid) = loop {
        iterations += 1;
        if iterations > cfg.max_iter {
            return Err(ModelError::NoConvergence(format!(
                "power Picard iteration stalled at anchor = {anchor}"
            )));
        }
        let profile = solve_phi_anchored(p, anchor, cfg.hara_grid)?;
        let liquid = solve_liquid_hara(p, &profile)?;
        let residual = liquid.b - anchor;
        if residual.abs() < cfg.tol * anchor.abs().max(1.0) {
            break (profile, liquid);
        }
        let step = match prev {
            Some((a0, r0)) if (residual - r0).abs() > 1e-300 => {
                let s = anchor - residual * (anchor - a0) / (residual - r0);
                if s.is_finite() && s > 0.0 {
                    s
                } else {
                    anchor + cfg.damping * residual
                }
            }
            _ => anchor + cfg.damping * residual,
        };
        prev = Some((anchor, residual));
        anchor = step;
    };

    let mut sol = CoupledSolution {
        gamma: p.gamma,
        v0_coeff: liquid.b,
        pi_star: liquid.pi_star,
        theta: efficiency_loss_hara(liquid.b, f_hat, p.gamma),
        iterations,
        residual: f64::NAN,
        shape: CoupledShape::Hara(profile),
        params: *p,
    };
    sol.residual = hjb_residual(&sol, p, &default_residual_grid()).max_abs();
    Ok(sol)
}

/// Solves the coupled system for the parameter set's own utility.
pub fn solve_coupled(p: &ModelParams, cfg: &CoupledConfig) -> Result<CoupledSolution> {
    let p = validate_params(*p)?;
    if p.is_log() {
        solve_coupled_log(&p, cfg)
    } else {
        solve_coupled_hara(&p, cfg)
    }
}

// ---------------------------------------------------------------------------
// residuals
// ---------------------------------------------------------------------------

/// Residuals of the two coupled equations under a candidate solution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualReport {
    /// Max absolute residual of the frozen-regime equation over the grid.
    pub frozen_max: f64,
    /// Mean absolute residual of the frozen-regime equation.
    pub frozen_mean: f64,
    /// Residual of the liquid equation at the candidate maximizer.
    pub liquid_at_pi_star: f64,
    /// Largest amount by which the liquid bracket beats the candidate
    /// maximizer on the grid (`<= 0` up to tolerance when `pi_star` is the
    /// argmax).
    pub liquid_max_gain: f64,
}

impl ResidualReport {
    pub fn max_abs(&self) -> f64 {
        self.frozen_max
            .max(self.liquid_at_pi_star.abs())
            .max(self.liquid_max_gain.max(0.0))
    }
}

/// Default residual grid: 1000 fractions, excluding the crunch sliver
/// `pi > 1 - 1e-4`.
pub fn default_residual_grid() -> Vec<f64> {
    let n = 1000;
    (0..=n)
        .map(|i| i as f64 / n as f64 * (1.0 - 1e-4))
        .collect()
}

/// Residuals for a log-utility candidate `(b, pi_star, h, h')`.
pub fn hjb_residual_log(
    p: &ModelParams,
    b: f64,
    pi_star: f64,
    h: &dyn Fn(f64) -> f64,
    h_prime: &dyn Fn(f64) -> f64,
    grid: &[f64],
) -> ResidualReport {
    let big_a = p.r / p.rho - 1.0 + p.rho.ln();
    let s2 = p.sigma * p.sigma;
    let ar = p.alpha - p.r;

    let mut frozen_max = 0.0f64;
    let mut frozen_sum = 0.0f64;
    let mut count = 0usize;
    for &pi in grid {
        let hp = h_prime(pi);
        let arg = 1.0 / p.rho - pi * hp;
        if !arg.is_finite() || arg <= 0.0 {
            continue;
        }
        let res = -(p.rho + p.lambda10) * h(pi) + (p.r + ar * pi) / p.rho - 1.0
            + p.lambda10 * b
            + pi * (1.0 - pi) * ar * hp
            - arg.ln();
        if res.is_finite() {
            frozen_max = frozen_max.max(res.abs());
            frozen_sum += res.abs();
            count += 1;
        }
    }

    let bracket = |pi: f64| {
        let g = pi * (1.0 - p.l_jump) / (1.0 - pi * p.l_jump);
        ((p.mu - p.r) * pi - 0.5 * s2 * pi * pi) / p.rho
            + p.lambda01 * ((1.0 - pi * p.l_jump).ln() / p.rho + h(g) - b)
    };
    let liquid_at_pi_star = -p.rho * b + big_a + bracket(pi_star);
    let at_star = bracket(pi_star);
    let mut gain = f64::NEG_INFINITY;
    for &pi in grid {
        let v = bracket(pi);
        if v.is_finite() {
            gain = gain.max(v - at_star);
        }
    }
    ResidualReport {
        frozen_max,
        frozen_mean: frozen_sum / count.max(1) as f64,
        liquid_at_pi_star,
        liquid_max_gain: gain,
    }
}

/// Residuals for a power-utility candidate `(b, pi_star, profile)`
/// (`alpha = r` form).
pub fn hjb_residual_hara<P: FrozenProfile>(
    p: &ModelParams,
    b: f64,
    pi_star: f64,
    profile: &P,
    grid: &[f64],
) -> ResidualReport {
    let g = p.gamma;
    let s2 = p.sigma * p.sigma;
    let mut frozen_max = 0.0f64;
    let mut frozen_sum = 0.0f64;
    let mut count = 0usize;
    for &pi in grid {
        let f = profile.value(pi);
        let fp = profile.value_deriv(pi);
        if !f.is_finite() || !fp.is_finite() {
            continue;
        }
        let core = f - pi * fp / g;
        if core <= 0.0 {
            continue;
        }
        let res = (-p.rho + g * p.r) * f
            + (1.0 - g) * core.powf(g / (g - 1.0))
            + p.lambda10 * (b - f);
        if res.is_finite() {
            frozen_max = frozen_max.max(res.abs());
            frozen_sum += res.abs();
            count += 1;
        }
    }

    let bracket = |pi: f64| {
        (p.mu - p.r) * pi * b - 0.5 * (1.0 - g) * s2 * pi * pi * b
            + p.lambda01 * profile.jump_value(pi, p.l_jump) / g
    };
    let liquid_at_pi_star = (-p.rho + g * p.r - p.lambda01) / g * b
        + (1.0 - g) / g * b.powf(g / (g - 1.0))
        + bracket(pi_star);
    let at_star = bracket(pi_star);
    let mut gain = f64::NEG_INFINITY;
    for &pi in grid {
        let v = bracket(pi);
        if v.is_finite() {
            gain = gain.max(v - at_star);
        }
    }
    ResidualReport {
        frozen_max,
        frozen_mean: frozen_sum / count.max(1) as f64,
        liquid_at_pi_star,
        liquid_max_gain: gain,
    }
}

/// Residuals of a converged coupled solution (or any candidate) on a grid.
pub fn hjb_residual(sol: &CoupledSolution, p: &ModelParams, grid: &[f64]) -> ResidualReport {
    match &sol.shape {
        CoupledShape::Log(s) => {
            let b = sol.v0_coeff;
            hjb_residual_log(
                p,
                b,
                sol.pi_star,
                &|pi| s.h(pi, b),
                &|pi| s.h_prime(pi),
                grid,
            )
        }
        CoupledShape::Hara(profile) => {
            hjb_residual_hara(p, sol.v0_coeff, sol.pi_star, profile, grid)
        }
    }
}
