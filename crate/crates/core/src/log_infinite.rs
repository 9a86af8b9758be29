//! Closed-form infinite-horizon solution for log utility (`alpha = r`),
//! its efficiency loss, and the two asymptotic regimes.

use crate::error::{ModelError, Result};
use crate::merton::{merton_log, MertonSolution};
use crate::numerics::{brent_root, golden_max, ln_one_minus_pow, rk4_path};
use crate::params::{jump_map, jump_map_deriv, validate_params, ModelParams};
use serde::Serialize;

/// Clamp guard: `pi` this close to 1 is treated as the cash-crunch boundary.
const PI_ONE_GUARD: f64 = 1e-12;

/// Closed-form solution of the two-regime log-utility model.
///
/// `V1(pi, x) = log(x)/rho + h(pi)` and `V0(x) = log(x)/rho + b`.
#[derive(Debug, Clone, Serialize)]
pub struct LogSolution {
    /// Liquid-regime value constant.
    pub b: f64,
    /// Optimal liquid stock fraction (argmax of `zeta` over [0,1)).
    pub pi_star: f64,
    /// Liquid consumption per unit wealth (`= rho`).
    pub c0_rate: f64,
    /// Optimized value of `zeta`.
    pub zeta_star: f64,
    /// Exponent `1 + lambda10 / rho` of the frozen-regime value shape.
    pub shape_exponent: f64,
    /// Constant part of `h`: `h(pi) = h_offset + log(1 - pi^a) / (rho + lambda10)`.
    pub h_offset: f64,
    params: ModelParams,
}

impl LogSolution {
    /// Frozen-regime value shape `h(pi)`; `-inf` at the cash crunch.
    pub fn h(&self, pi: f64) -> f64 {
        if pi >= 1.0 - PI_ONE_GUARD {
            return f64::NEG_INFINITY;
        }
        self.h_offset
            + ln_one_minus_pow(pi, self.shape_exponent) / (self.params.rho + self.params.lambda10)
    }

    /// `h'(pi) = -pi^(a-1) a / ((rho+lambda10)(1 - pi^a))`, negative on (0,1).
    pub fn h_deriv(&self, pi: f64) -> f64 {
        let a = self.shape_exponent;
        if pi <= 0.0 {
            return 0.0;
        }
        if pi >= 1.0 - PI_ONE_GUARD {
            return f64::NEG_INFINITY;
        }
        let pa = (a * pi.ln()).exp();
        -a * pa / pi / ((self.params.rho + self.params.lambda10) * (1.0 - pa))
    }

    /// Frozen-regime consumption per unit wealth,
    /// `c1(pi) = rho (1 - pi^(1 + lambda10/rho))`.
    pub fn c1_rate(&self, pi: f64) -> f64 {
        let pi = pi.clamp(0.0, 1.0);
        self.params.rho * (-(self.shape_exponent * pi.ln()).exp_m1())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
}

/// The bracketed integrand of the liquid-regime optimization at fraction `pi`.
///
/// `zeta(pi) = ((mu-r) pi - pi^2 sigma^2/2)/rho
///   + lambda01/(rho+lambda10) * log(1 - g(pi)^(1+lambda10/rho))
///   + lambda01/rho * log(1 - pi L)`.
pub fn zeta(pi: f64, p: &ModelParams) -> Result<f64> {
    if !(0.0..1.0).contains(&pi) {
        return Err(ModelError::Domain(format!(
            "zeta requires pi in [0,1), got {pi}"
        )));
    }
    Ok(zeta_unchecked(pi, p))
}

fn zeta_unchecked(pi: f64, p: &ModelParams) -> f64 {
    let a = 1.0 + p.lambda10 / p.rho;
    let g = pi * (1.0 - p.l_jump) / (1.0 - pi * p.l_jump);
    ((p.mu - p.r) * pi - pi * pi * p.sigma * p.sigma / 2.0) / p.rho
        + p.lambda01 / (p.rho + p.lambda10) * ln_one_minus_pow(g, a)
        + p.lambda01 / p.rho * (1.0 - pi * p.l_jump).ln()
}

/// First derivative of `zeta`, used to bracket the maximizer.
fn zeta_deriv(pi: f64, p: &ModelParams) -> f64 {
    let a = 1.0 + p.lambda10 / p.rho;
    let g = pi * (1.0 - p.l_jump) / (1.0 - pi * p.l_jump);
    let gp = jump_map_deriv(pi, p.l_jump);
    let log_term = if g <= 0.0 {
        0.0
    } else {
        let ga = (a * g.ln()).exp();
        -a * ga / g / (1.0 - ga)
    };
    ((p.mu - p.r) - pi * p.sigma * p.sigma) / p.rho
        + p.lambda01 / (p.rho + p.lambda10) * log_term * gp
        - p.lambda01 / p.rho * p.l_jump / (1.0 - pi * p.l_jump)
}

/// Solves the infinite-horizon log model in closed form. Requires `alpha = r`;
/// other growth rates have no closed form and go through the coupled solver.
pub fn solve_log(p: &ModelParams) -> Result<LogSolution> {
    let p = validate_params(*p)?;
    if !p.is_log() {
        return Err(ModelError::Domain(
            "solve_log requires gamma = 0; use the power-utility solvers".into(),
        ));
    }
    if (p.alpha - p.r).abs() > 1e-12 {
        return Err(ModelError::UnsupportedModel(
            "closed-form log solution requires alpha = r; use the coupled solver".into(),
        ));
    }
    let a = 1.0 + p.lambda10 / p.rho;
    let big_a = p.r / p.rho - 1.0 + p.rho.ln();

    let pi_star = maximize_zeta(&p)?;
    let zeta_star = zeta_unchecked(pi_star, &p);
    let b = big_a / p.rho
        + zeta_star * (p.rho + p.lambda10) / (p.rho * (p.rho + p.lambda01 + p.lambda10));
    let h_offset = (big_a + p.lambda10 * b) / (p.rho + p.lambda10);

    Ok(LogSolution {
        b,
        pi_star,
        c0_rate: p.rho,
        zeta_star,
        shape_exponent: a,
        h_offset,
        params: p,
    })
}

/// Argmax of `zeta` over [0,1): sign-change bracket of the first-order
/// condition refined by Brent, with a golden-section fallback.
fn maximize_zeta(p: &ModelParams) -> Result<f64> {
    let hi = 1.0 - PI_ONE_GUARD;
    if p.lambda01 == 0.0 {
        // unperturbed Merton problem on the constrained interval
        let m = merton_log(p);
        return Ok(m.pi_hat.clamp(0.0, 1.0));
    }
    if zeta_deriv(0.0, p) <= 0.0 {
        return Ok(0.0);
    }
    // scan for the first sign change of zeta'
    let n = 2048;
    let mut lo = 0.0;
    for i in 1..=n {
        let x = hi * i as f64 / n as f64;
        if zeta_deriv(x, p) <= 0.0 {
            let root = brent_root(|t| zeta_deriv(t, p), lo, x, 1e-14, 200)?;
            return Ok(root);
        }
        lo = x;
    }
    // derivative positive all the way: maximum at the boundary guard
    let (x, _) = golden_max(|t| zeta_unchecked(t, p), 0.0, hi, 512, 1e-12);
    Ok(x)
}

/// Efficiency loss `Theta = 1 - exp(rho (b - h_hat))`: the fraction of initial
/// wealth a frictionless investor would give up to be indifferent to freezes.
pub fn efficiency_loss_log(sol: &LogSolution, p: &ModelParams) -> f64 {
    let m = merton_log(p);
    1.0 - (p.rho * (sol.b - m.value_coeff)).exp()
}

/// Which expansion produced an asymptotic record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpansionRegime {
    /// `pi_hat < 1`: regular perturbation around the Merton solution.
    Interior,
    /// `pi_hat >= 1`: the no-leverage constraint binds as `lambda01 -> 0`.
    LargeSharpe,
}

/// First-order small-`lambda01` expansion for log utility.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogAsymptotics {
    pub regime: ExpansionRegime,
    /// Downward fraction coefficient, `>= 0`:
    /// interior `pi* ~ pi_hat - lambda01 pi1`; large Sharpe `1 - pi* ~ lambda01 pi1`.
    pub pi1: f64,
    /// Value coefficient: interior `b ~ h_hat + lambda01 b1`;
    /// large Sharpe the `lambda01 log lambda01` coefficient of the value.
    pub b1: f64,
    /// Loss coefficient `Theta ~ lambda01 theta1` (interior; `-rho b1`).
    pub theta1: f64,
    /// Short-freeze simplification `theta^2/(2 lambda10) - log(1-pi_hat L)/rho`,
    /// reported as a diagnostic next to the exact bracket.
    pub theta1_simplified: f64,
    /// Zeroth-order value constant (`h_hat`, or the all-in-stock value for
    /// the large-Sharpe regime).
    pub b0: f64,
    /// Unconstrained Merton fraction the interior expansion is anchored to.
    pub pi_hat: f64,
}

impl LogAsymptotics {
    /// First-order fraction at a given freeze intensity.
    pub fn fraction(&self, lambda01: f64) -> f64 {
        match self.regime {
            ExpansionRegime::Interior => self.pi_hat - lambda01 * self.pi1,
            ExpansionRegime::LargeSharpe => 1.0 - lambda01 * self.pi1,
        }
    }

    /// First-order loss at a given freeze intensity. Uses the exact loss map
    /// on the first-order value, `1 - exp(rho lambda01 b1)`.
    pub fn loss(&self, rho: f64, lambda01: f64) -> f64 {
        1.0 - (rho * lambda01 * self.b1).exp()
    }
}

/// Interior small-`lambda01` asymptotics (`pi_hat < 1`).
///
/// `pi1 = (L/(1-pi_hat L) + (1-L)/(1-pi_hat L)^2
///        * g(pi_hat)^(lambda10/rho)/(1-g(pi_hat)^(1+lambda10/rho))) / sigma^2`,
/// `b1` from the exact bracket, `theta1 = -rho b1`.
pub fn asymptotic_log(p: &ModelParams) -> Result<LogAsymptotics> {
    let p = validate_params(*p)?;
    let m = merton_log(&p);
    if m.pi_hat >= 1.0 {
        return Err(ModelError::WrongRegime(format!(
            "pi_hat = {} >= 1: use the large-Sharpe expansion",
            m.pi_hat
        )));
    }
    let pi_hat = m.pi_hat;
    let a = 1.0 + p.lambda10 / p.rho;
    let g = jump_map(pi_hat, p.l_jump)?;
    let g_pow = if g > 0.0 {
        ((a - 1.0) * g.ln()).exp()
    } else {
        0.0
    };
    let g_pow_a = g_pow * g;
    let s2 = p.sigma * p.sigma;
    let pi1 = (p.l_jump / (1.0 - pi_hat * p.l_jump)
        + (1.0 - p.l_jump) / (1.0 - pi_hat * p.l_jump).powi(2) * g_pow / (1.0 - g_pow_a))
        / s2;

    let big_a = p.r / p.rho - 1.0 + p.rho.ln();
    let h_hat = m.value_coeff;
    let b1 = ((big_a + p.lambda10 * h_hat) / (p.rho + p.lambda10) - h_hat
        + (1.0 - pi_hat * p.l_jump).ln() / p.rho
        + ln_one_minus_pow(g, a) / (p.rho + p.lambda10))
        / p.rho;
    let theta1 = -p.rho * b1;
    let theta1_simplified =
        m.theta * m.theta / (2.0 * p.lambda10) - (1.0 - pi_hat * p.l_jump).ln() / p.rho;
    Ok(LogAsymptotics {
        regime: ExpansionRegime::Interior,
        pi1,
        b1,
        theta1,
        theta1_simplified,
        b0: h_hat,
        pi_hat,
    })
}

/// Large-Sharpe expansion (`pi_hat >= 1`, `mu - r > sigma^2`):
/// `1 - pi* ~ lambda01 rho / ((mu - r - sigma^2)(rho + lambda10))` and the
/// value carries a `lambda01 log lambda01` term with coefficient
/// `1/(rho (rho + lambda10))`.
pub fn large_sharpe_log(p: &ModelParams) -> Result<LogAsymptotics> {
    let p = validate_params(*p)?;
    let m = merton_log(&p);
    let s2 = p.sigma * p.sigma;
    if m.pi_hat < 1.0 || p.mu - p.r <= s2 {
        return Err(ModelError::WrongRegime(format!(
            "large-Sharpe expansion needs mu - r > sigma^2 (pi_hat = {})",
            m.pi_hat
        )));
    }
    let pi1 = p.rho / ((p.mu - p.r - s2) * (p.rho + p.lambda10));
    let log_coeff = 1.0 / (p.rho * (p.rho + p.lambda10));
    // value of the constrained pi = 1 Merton strategy
    let b0 = (p.r / p.rho - 1.0 + p.rho.ln()) / p.rho + (p.mu - p.r - s2 / 2.0) / (p.rho * p.rho);
    Ok(LogAsymptotics {
        regime: ExpansionRegime::LargeSharpe,
        pi1,
        b1: log_coeff,
        theta1: f64::NAN,
        theta1_simplified: f64::NAN,
        b0,
        pi_hat: m.pi_hat,
    })
}

/// Deterministic frozen-regime fraction path:
/// `dPi = rho Pi (1 - Pi^(1+lambda10/rho)) dt` from `pi0`, sampled on `t_grid`.
pub fn illiquid_fraction_path(pi0: f64, p: &ModelParams, t_grid: &[f64]) -> Vec<f64> {
    let a = 1.0 + p.lambda10 / p.rho;
    let rho = p.rho;
    let rhs = move |_t: f64, y: f64| {
        let y = y.clamp(0.0, 1.0);
        if y <= 0.0 || y >= 1.0 {
            0.0
        } else {
            rho * y * (-(a * y.ln()).exp_m1())
        }
    };
    // step-halved RK4: refine until the endpoint moves by < 1e-10
    let mut sub = 4usize;
    let mut path = rk4_path(rhs, pi0.clamp(0.0, 1.0), t_grid, sub);
    loop {
        sub *= 2;
        let finer = rk4_path(rhs, pi0.clamp(0.0, 1.0), t_grid, sub);
        let diff = path
            .iter()
            .zip(&finer)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        path = finer;
        if diff < 1e-10 || sub >= 512 {
            break;
        }
    }
    for v in &mut path {
        *v = v.clamp(0.0, 1.0);
    }
    path
}

/// Convenience: the Merton benchmark used by the expansions.
pub fn merton_benchmark(p: &ModelParams) -> MertonSolution {
    merton_log(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn base() -> ModelParams {
        presets::base_log()
    }

    #[test]
    fn zeta_reduces_to_merton_quadratic_without_freezes() {
        let p = ModelParams {
            lambda01: 0.0,
            ..base()
        };
        for pi in [0.0, 0.3, 0.6, 0.9] {
            let expect = ((p.mu - p.r) * pi - pi * pi * p.sigma * p.sigma / 2.0) / p.rho;
            assert!((zeta(pi, &p).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn zeta_vanishes_at_zero() {
        assert_eq!(zeta(0.0, &base()).unwrap(), 0.0);
        assert!(zeta(1.0, &base()).is_err());
        assert!(zeta(-0.1, &base()).is_err());
    }

    #[test]
    fn zeta_argmax_matches_fine_scan() {
        // independent oracle: brute-force scan at step 1e-6 over [0, 1)
        let p = base();
        let mut best = (0.0, f64::NEG_INFINITY);
        let n = 1_000_000;
        for i in 0..n {
            let x = i as f64 * 1e-6;
            let v = zeta_unchecked(x, &p);
            if v > best.1 {
                best = (x, v);
            }
        }
        let sol = solve_log(&p).unwrap();
        assert!(
            (sol.pi_star - best.0).abs() < 2e-6,
            "solver {} vs scan {}",
            sol.pi_star,
            best.0
        );
        assert!((sol.zeta_star - best.1).abs() < 1e-9);
    }

    #[test]
    fn base_row_matches_published_fraction() {
        let sol = solve_log(&base()).unwrap();
        assert!((sol.pi_star - 0.879).abs() < 1e-3, "pi* = {}", sol.pi_star);
    }

    #[test]
    fn jump_loss_row_matches_published_fraction() {
        let p = ModelParams {
            l_jump: 0.1,
            ..base()
        };
        let sol = solve_log(&p).unwrap();
        assert!((sol.pi_star - 0.521).abs() < 1e-3, "pi* = {}", sol.pi_star);
    }

    #[test]
    fn no_freezes_recovers_merton() {
        let p = ModelParams {
            lambda01: 0.0,
            ..base()
        };
        let sol = solve_log(&p).unwrap();
        let m = merton_log(&p);
        assert!((sol.pi_star - m.pi_hat).abs() < 1e-12);
        assert!((sol.b - m.value_coeff).abs() < 1e-12);
        assert!(efficiency_loss_log(&sol, &p).abs() < 1e-12);
    }

    #[test]
    fn alpha_below_r_has_no_closed_form() {
        let p = ModelParams {
            alpha: 0.03,
            ..base()
        };
        assert!(matches!(
            solve_log(&p),
            Err(ModelError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn base_efficiency_loss_matches_published_value() {
        let sol = solve_log(&base()).unwrap();
        let theta = efficiency_loss_log(&sol, &base());
        assert!((theta - 0.0108).abs() < 3e-4, "Theta = {theta}");
    }

    #[test]
    fn fast_freeze_row_loss() {
        let p = ModelParams {
            lambda01: 0.5,
            lambda10: 10.0,
            ..base()
        };
        let sol = solve_log(&p).unwrap();
        let theta = efficiency_loss_log(&sol, &p);
        assert!((theta - 0.0106).abs() < 3e-4, "Theta = {theta}");
    }

    #[test]
    fn asymptotic_base_row() {
        let p = base();
        let asy = asymptotic_log(&p).unwrap();
        assert!((asy.fraction(p.lambda01) - 0.846).abs() < 1e-3);
        let loss = asy.loss(p.rho, p.lambda01);
        assert!((loss - 0.0115).abs() < 3e-4, "loss = {loss}");
    }

    #[test]
    fn asymptotic_short_freeze_row() {
        let p = ModelParams {
            lambda10: 4.0,
            ..base()
        };
        let asy = asymptotic_log(&p).unwrap();
        assert!((asy.fraction(p.lambda01) - 0.899).abs() < 1e-3);
    }

    #[test]
    fn fraction_correction_vanishes_for_instant_recovery() {
        let p = ModelParams {
            lambda10: 1e6,
            ..base()
        };
        let asy = asymptotic_log(&p).unwrap();
        assert!(asy.pi1 >= 0.0);
        assert!(asy.pi1 < 1e-8, "pi1 = {}", asy.pi1);
    }

    #[test]
    fn asymptotics_require_interior_merton_fraction() {
        let p = ModelParams {
            mu: 0.09,
            ..base()
        }; // pi_hat = 1.44
        assert!(matches!(asymptotic_log(&p), Err(ModelError::WrongRegime(_))));
    }

    #[test]
    fn large_sharpe_limit_fraction() {
        // mu - r = 2 sigma^2, rho = lambda10: 1 - pi* = lambda01/(4 sigma^2) x rho/rho...
        let s2 = presets::SIGMA * presets::SIGMA;
        let p = ModelParams {
            mu: 0.05 + 2.0 * s2,
            lambda10: 0.05,
            ..base()
        };
        let asy = large_sharpe_log(&p).unwrap();
        // rho/((mu-r-sigma^2)(rho+lambda10)) = 1/(2 sigma^2) here
        let expect = 1.0 / (2.0 * s2);
        assert!((asy.pi1 - expect).abs() < 1e-12);
        // log-coefficient of the value expansion
        assert!((asy.b1 - 1.0 / (p.rho * (p.rho + p.lambda10))).abs() < 1e-12);

        // cross-check the coefficient against the exact argmax of zeta
        for lam in [1e-4, 1e-5] {
            let pl = ModelParams {
                lambda01: lam,
                ..p
            };
            let exact = maximize_zeta(&pl).unwrap();
            let ratio = (1.0 - exact) / (lam * asy.pi1);
            assert!(
                (ratio - 1.0).abs() < 0.05,
                "lambda01={lam}: ratio {ratio} (pi*={exact})"
            );
        }
    }

    #[test]
    fn large_sharpe_needs_high_excess_return() {
        assert!(matches!(
            large_sharpe_log(&base()),
            Err(ModelError::WrongRegime(_))
        ));
    }

    #[test]
    fn consumption_rules_ordered() {
        let sol = solve_log(&base()).unwrap();
        assert!((sol.c1_rate(0.0) - sol.c0_rate).abs() < 1e-15);
        for i in 1..100 {
            let pi = i as f64 / 100.0;
            assert!(sol.c1_rate(pi) <= sol.c0_rate);
            assert!(sol.c1_rate(pi) >= 0.0);
            if pi >= 0.5 {
                // pi^(1+lambda10/rho) is representable here: strict reduction
                assert!(sol.c1_rate(pi) < sol.c0_rate);
            }
        }
        assert!(sol.c1_rate(1.0) < 1e-15);
    }

    #[test]
    fn fraction_path_fixed_points() {
        let p = base();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        assert!(illiquid_fraction_path(0.0, &p, &grid)
            .iter()
            .all(|&v| v == 0.0));
        assert!(illiquid_fraction_path(1.0, &p, &grid)
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn fraction_path_matches_fixed_step_reference() {
        // reference: fixed-step RK4 with 1e-5 steps (independent of the
        // adaptive halving in the implementation path)
        let p = base();
        let grid = [0.0, 1.0];
        let path = illiquid_fraction_path(0.5, &p, &grid);
        let a = 1.0 + p.lambda10 / p.rho;
        let mut y = 0.5f64;
        let n = 100_000;
        let h = 1.0 / n as f64;
        for _ in 0..n {
            let f = |y: f64| p.rho * y * (1.0 - y.powf(a));
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((path[1] - y).abs() < 1e-8, "{} vs {}", path[1], y);
        // monotone nondecreasing
        assert!(path[1] >= path[0]);
    }

    #[test]
    fn asymptotic_consistency_second_order() {
        // |pi*(lam) - pi_hat + lam*pi1| / lam^2 stays bounded (ratio < 2x)
        let p = base();
        let asy = asymptotic_log(&p).unwrap();
        let mut ratios = Vec::new();
        for lam in [1e-2, 1e-3, 1e-4] {
            let pl = ModelParams {
                lambda01: lam,
                ..p
            };
            let sol = solve_log(&pl).unwrap();
            let err = (sol.pi_star - asy.fraction(lam)).abs();
            ratios.push(err / (lam * lam));
        }
        let (lo, hi) = (
            ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            ratios.iter().cloned().fold(0.0f64, f64::max),
        );
        assert!(hi / lo < 2.0, "ratios {ratios:?}");
    }

    #[test]
    fn exact_loss_below_first_order_loss_on_presets() {
        for row in presets::table1_rows().into_iter().filter(|r| r.utility == "log") {
            let sol = solve_log(&row.params).unwrap();
            let exact = efficiency_loss_log(&sol, &row.params);
            let asy = asymptotic_log(&row.params).unwrap();
            let first = asy.loss(row.params.rho, row.params.lambda01);
            assert!(
                exact <= first + 1e-12,
                "{}: exact {exact} vs first-order {first}",
                row.case
            );
        }
    }
}
