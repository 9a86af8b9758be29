//! Fast-switching limits: when both intensities are scaled by `1/eps` and
//! the jump loss by `eps`, the regime chain averages out and the limiting
//! problem is a frictionless one with a modified Sharpe ratio.

use crate::error::{ModelError, Result};
use crate::merton::{merton_hara, merton_log};
use crate::params::{validate_params, ModelParams};
use serde::Serialize;

/// Fast-switching limit of the two-regime model.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HomogenizedSolution {
    /// Stationary fraction of time in the liquid regime,
    /// `lambda_bar = lambda10/(lambda01+lambda10)`.
    pub lambda_bar: f64,
    /// Rescaled jump intensity-loss input `L_bar` (`L = eps L_bar`).
    pub l_bar: f64,
    /// Modified Sharpe ratio entering the limiting formulas.
    pub theta_hom: f64,
    /// Limiting stock fraction.
    pub pi_star: f64,
    /// Alternative fraction with the frictionless one-over-sigma scaling;
    /// for log utility the two published forms disagree by a factor two and
    /// both are reported (see the module notes), for power utility they
    /// coincide.
    pub pi_star_merton_form: f64,
    /// Leading value constant of the limit.
    pub b0: f64,
    /// Limiting efficiency loss.
    pub theta_loss: f64,
    /// Drift of the averaged asset `alpha + (mu - alpha - lambda01 L_bar) lambda_bar`.
    pub avg_drift: f64,
    /// Volatility of the averaged asset `sqrt(lambda_bar) sigma`.
    pub avg_vol: f64,
}

fn averaged_asset(p: &ModelParams, l_bar: f64) -> (f64, f64, f64) {
    let lambda_bar = p.lambda10 / (p.lambda01 + p.lambda10);
    let avg_drift = p.alpha + (p.mu - p.alpha - p.lambda01 * l_bar) * lambda_bar;
    let avg_vol = lambda_bar.sqrt() * p.sigma;
    (lambda_bar, avg_drift, avg_vol)
}

/// Log-utility fast-switching limit.
///
/// `theta_hom = (mu - r - lambda01 L_bar + (lambda01/lambda10)(alpha - r))/sigma`,
/// `B0 = (r/rho - 1 + log rho)/rho + lambda_bar theta_hom^2/(2 rho^2)`,
/// `Theta_hom = 1 - exp((lambda_bar theta_hom^2 - theta^2)/(2 rho))`.
///
/// The limiting fraction is reported both as printed in the source
/// derivation (`theta_hom/(2 sigma)`) and in the frictionless form
/// (`theta_hom/sigma`) recovered as `lambda01 -> 0`; the value and loss
/// formulas do not depend on this choice.
pub fn homogenize_log(p: &ModelParams, l_bar: f64) -> Result<HomogenizedSolution> {
    let p = validate_params(*p)?;
    let m = merton_log(&p);
    let (lambda_bar, avg_drift, avg_vol) = averaged_asset(&p, l_bar);
    let theta_hom =
        (p.mu - p.r - p.lambda01 * l_bar + p.lambda01 / p.lambda10 * (p.alpha - p.r)) / p.sigma;
    let b0 = (p.r / p.rho - 1.0 + p.rho.ln()) / p.rho
        + lambda_bar * theta_hom * theta_hom / (2.0 * p.rho * p.rho);
    let theta_loss =
        1.0 - ((lambda_bar * theta_hom * theta_hom - m.theta * m.theta) / (2.0 * p.rho)).exp();
    Ok(HomogenizedSolution {
        lambda_bar,
        l_bar,
        theta_hom,
        pi_star: theta_hom / (2.0 * p.sigma),
        pi_star_merton_form: theta_hom / p.sigma,
        b0,
        theta_loss,
        avg_drift,
        avg_vol,
    })
}

/// Power-utility fast-switching limit.
///
/// `theta_hom = (mu - r - lambda01 L_bar + (lambda01/(lambda10 gamma))(alpha - r))/sigma`,
/// `pi* = theta_hom / ((1-gamma) sigma)`,
/// `B0 = (1-gamma)^(1-gamma) (rho - gamma r - lambda_bar theta_hom^2 gamma/(2(1-gamma)))^(gamma-1)`,
/// `Theta_hom = 1 - (delta_hom/delta)^((gamma-1)/gamma)`.
pub fn homogenize_hara(p: &ModelParams, l_bar: f64) -> Result<HomogenizedSolution> {
    let p = validate_params(*p)?;
    let g = p.gamma;
    if g == 0.0 {
        return Err(ModelError::Domain(
            "homogenize_hara requires gamma != 0; use homogenize_log".into(),
        ));
    }
    let m = merton_hara(&p)?;
    let _ = m.value_coeff_checked()?;
    let (lambda_bar, avg_drift, avg_vol) = averaged_asset(&p, l_bar);
    let theta_hom = (p.mu - p.r - p.lambda01 * l_bar
        + p.lambda01 / (p.lambda10 * g) * (p.alpha - p.r))
        / p.sigma;
    let delta_hom = p.rho - g * p.r - lambda_bar * theta_hom * theta_hom * g / (2.0 * (1.0 - g));
    if g > 0.0 && delta_hom <= 0.0 {
        return Err(ModelError::InfiniteValue(format!(
            "homogenized discount margin {delta_hom} <= 0 with gamma > 0"
        )));
    }
    let b0 = (1.0 - g).powf(1.0 - g) * delta_hom.powf(g - 1.0);
    let theta_loss = 1.0 - (delta_hom / m.delta).powf((g - 1.0) / g);
    let pi_star = theta_hom / ((1.0 - g) * p.sigma);
    Ok(HomogenizedSolution {
        lambda_bar,
        l_bar,
        theta_hom,
        pi_star,
        pi_star_merton_form: pi_star,
        b0,
        theta_loss,
        avg_drift,
        avg_vol,
    })
}

/// Limit for the parameter set's own utility.
pub fn homogenize(p: &ModelParams, l_bar: f64) -> Result<HomogenizedSolution> {
    if p.is_log() {
        homogenize_log(p, l_bar)
    } else {
        homogenize_hara(p, l_bar)
    }
}

/// The model at switching scale `1/eps`: intensities `lambda/eps`, jump
/// `eps L_bar`. Used to drive the exact solvers toward the limit.
pub fn rescaled_params(p: &ModelParams, l_bar: f64, eps: f64) -> ModelParams {
    ModelParams {
        lambda01: p.lambda01 / eps,
        lambda10: p.lambda10 / eps,
        l_jump: eps * l_bar,
        ..*p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::ModelParams;

    #[test]
    fn log_limit_matches_reference_value() {
        let sol = homogenize_log(&presets::base_log(), 0.0).unwrap();
        assert!(
            (sol.theta_loss - 0.01066).abs() < 1e-5,
            "loss = {}",
            sol.theta_loss
        );
    }

    #[test]
    fn hyperbolic_limit_matches_reference_value() {
        let sol = homogenize_hara(&presets::base_hyperbolic(), 0.0).unwrap();
        assert!(
            (sol.theta_loss - 0.01742).abs() < 1e-5,
            "loss = {}",
            sol.theta_loss
        );
    }

    #[test]
    fn sqrt_limit_matches_reference_value() {
        let sol = homogenize_hara(&presets::base_sqrt(), 0.0).unwrap();
        assert!(
            (sol.theta_loss - 0.00600).abs() < 1e-5,
            "loss = {}",
            sol.theta_loss
        );
    }

    #[test]
    fn unperturbed_limit_loses_only_time_share() {
        // alpha = r, L_bar = 0: theta_hom = theta and
        // Theta = 1 - exp(theta^2 (lambda_bar - 1)/(2 rho))
        let p = presets::base_log();
        let sol = homogenize_log(&p, 0.0).unwrap();
        let m = merton_log(&p);
        assert!((sol.theta_hom - m.theta).abs() < 1e-14);
        let expect =
            1.0 - (m.theta * m.theta * (sol.lambda_bar - 1.0) / (2.0 * p.rho)).exp();
        assert!((sol.theta_loss - expect).abs() < 1e-14);
        assert!((sol.pi_star_merton_form - m.pi_hat).abs() < 1e-12);
    }

    #[test]
    fn no_freezes_no_loss() {
        let p = ModelParams {
            lambda01: 0.0,
            ..presets::base_log()
        };
        let sol = homogenize_log(&p, 0.0).unwrap();
        assert_eq!(sol.lambda_bar, 1.0);
        assert!(sol.theta_loss.abs() < 1e-15);

        let ph = ModelParams {
            lambda01: 0.0,
            ..presets::base_sqrt()
        };
        let sh = homogenize_hara(&ph, 0.0).unwrap();
        assert!(sh.theta_loss.abs() < 1e-14);
    }

    #[test]
    fn averaged_asset_moments() {
        let p = presets::base_log();
        let l_bar = 0.3;
        let sol = homogenize_log(&p, l_bar).unwrap();
        let lb = p.lambda10 / (p.lambda01 + p.lambda10);
        assert!((sol.avg_drift - (p.alpha + (p.mu - p.alpha - p.lambda01 * l_bar) * lb)).abs() < 1e-15);
        assert!((sol.avg_vol - lb.sqrt() * p.sigma).abs() < 1e-15);
    }

    #[test]
    fn recovery_rate_sensitivity_has_either_sign() {
        // fixtures found by scanning: the derivative of the limiting loss in
        // lambda10 changes sign across admissible parameter sets. A heavy
        // jump drag flips the modified Sharpe ratio negative, after which a
        // faster recovery *raises* the loss.
        let up = (
            ModelParams {
                mu: 0.075,
                alpha: 0.03,
                lambda01: 0.5,
                lambda10: 5.0,
                ..presets::base_log()
            },
            0.1, // L_bar
        );
        let down = (
            ModelParams {
                mu: 0.30,
                alpha: 0.03,
                lambda01: 0.5,
                lambda10: 5.0,
                ..presets::base_log()
            },
            0.0,
        );
        let dtheta = |p: &ModelParams, l_bar: f64| {
            let hi = homogenize_log(
                &ModelParams {
                    lambda10: p.lambda10 * 1.001,
                    ..*p
                },
                l_bar,
            )
            .unwrap()
            .theta_loss;
            let lo = homogenize_log(p, l_bar).unwrap().theta_loss;
            hi - lo
        };
        let d_up = dtheta(&up.0, up.1);
        let d_down = dtheta(&down.0, down.1);
        assert!(d_up > 0.0, "expected positive sensitivity, got {d_up}");
        assert!(d_down < 0.0, "expected negative sensitivity, got {d_down}");
    }
}
