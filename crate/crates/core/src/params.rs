//! Market and preference parameters plus the post-shock jump map.

use crate::error::{ModelError, Result};
use serde::{Deserialize, Serialize};

/// All market and preference constants of the two-regime model.
///
/// Rates are annualized. `gamma` is the risk-aversion exponent of the
/// CRRA utility `u(x) = x^gamma / gamma`; `gamma = 0` denotes `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Drift of the stock in the liquid regime (1/year).
    pub mu: f64,
    /// Volatility of the stock in the liquid regime (1/sqrt(year)).
    pub sigma: f64,
    /// Riskless rate (1/year).
    pub r: f64,
    /// Deterministic stock growth rate during a freeze (1/year), `alpha <= r`.
    pub alpha: f64,
    /// Intertemporal discount rate (1/year).
    pub rho: f64,
    /// Risk-aversion exponent, `gamma < 1`; `0` means log utility.
    pub gamma: f64,
    /// Freeze arrival intensity (1/year).
    pub lambda01: f64,
    /// Freeze expiry intensity (1/year).
    pub lambda10: f64,
    /// Fractional stock-price drop at a freeze onset, `0 <= L < 1`.
    pub l_jump: f64,
}

impl ModelParams {
    /// Sharpe ratio of the liquid regime, `theta = (mu - r) / sigma`.
    pub fn sharpe(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// True when the utility is logarithmic.
    pub fn is_log(&self) -> bool {
        self.gamma == 0.0
    }

    /// Stationary fraction of time spent in the liquid regime.
    pub fn liquid_time_fraction(&self) -> f64 {
        self.lambda10 / (self.lambda01 + self.lambda10)
    }

    pub fn validate(self) -> Result<Self> {
        validate_params(self)
    }
}

/// Checks the standing assumptions and returns the parameters unchanged.
pub fn validate_params(p: ModelParams) -> Result<ModelParams> {
    fn fail(name: &str, value: f64, constraint: &str) -> ModelError {
        ModelError::InvalidParams(format!("{name} = {value} violates {constraint}"))
    }
    for (name, v) in [
        ("mu", p.mu),
        ("sigma", p.sigma),
        ("r", p.r),
        ("alpha", p.alpha),
        ("rho", p.rho),
        ("gamma", p.gamma),
        ("lambda01", p.lambda01),
        ("lambda10", p.lambda10),
        ("L", p.l_jump),
    ] {
        if !v.is_finite() {
            return Err(fail(name, v, "finiteness"));
        }
    }
    if p.sigma <= 0.0 {
        return Err(fail("sigma", p.sigma, "sigma > 0"));
    }
    if p.rho <= 0.0 {
        return Err(fail("rho", p.rho, "rho > 0"));
    }
    if p.lambda01 < 0.0 {
        return Err(fail("lambda01", p.lambda01, "lambda01 >= 0"));
    }
    if p.lambda10 <= 0.0 {
        return Err(fail("lambda10", p.lambda10, "lambda10 > 0"));
    }
    if !(0.0..1.0).contains(&p.l_jump) {
        return Err(fail("L", p.l_jump, "0 <= L < 1"));
    }
    if p.gamma >= 1.0 {
        return Err(fail("gamma", p.gamma, "gamma < 1"));
    }
    if p.alpha > p.r {
        return Err(fail("alpha", p.alpha, "alpha <= r"));
    }
    Ok(p)
}

/// Post-shock stock fraction `g(pi) = pi (1 - L) / (1 - pi L)`.
///
/// Increasing and convex from [0,1] onto [0,1]; the identity when `L = 0`.
pub fn jump_map(pi: f64, l_jump: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(ModelError::Domain(format!(
            "jump map requires pi in [0,1], got {pi}"
        )));
    }
    Ok(pi * (1.0 - l_jump) / (1.0 - pi * l_jump))
}

/// Derivative of the jump map, `g'(pi) = (1 - L) / (1 - pi L)^2`.
pub fn jump_map_deriv(pi: f64, l_jump: f64) -> f64 {
    let d = 1.0 - pi * l_jump;
    (1.0 - l_jump) / (d * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    #[test]
    fn base_parameter_set_is_accepted() {
        let p = presets::base_log();
        assert!(validate_params(p).is_ok());
    }

    #[test]
    fn full_jump_loss_is_rejected() {
        let p = ModelParams {
            l_jump: 1.0,
            ..presets::base_log()
        };
        assert!(matches!(
            validate_params(p),
            Err(ModelError::InvalidParams(_))
        ));
    }

    #[test]
    fn zero_volatility_is_rejected() {
        let p = ModelParams {
            sigma: 0.0,
            ..presets::base_log()
        };
        assert!(matches!(
            validate_params(p),
            Err(ModelError::InvalidParams(_))
        ));
    }

    #[test]
    fn alpha_above_r_is_rejected() {
        let p = ModelParams {
            alpha: 0.06,
            ..presets::base_log()
        };
        assert!(validate_params(p).is_err());
    }

    #[test]
    fn jump_map_endpoints() {
        assert_eq!(jump_map(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(jump_map(1.0, 0.3).unwrap(), 1.0);
        assert_eq!(jump_map(0.7, 0.0).unwrap(), 0.7);
        assert!(jump_map(1.2, 0.0).is_err());
        assert!(jump_map(-0.1, 0.0).is_err());
    }

    proptest! {
        // Monotone increasing and convex on [0,1], checked by finite
        // differences on a grid.
        #[test]
        fn jump_map_monotone_convex(l in 0.0f64..0.99) {
            let n = 64;
            let g: Vec<f64> = (0..=n)
                .map(|i| jump_map(i as f64 / n as f64, l).unwrap())
                .collect();
            for w in g.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            for w in g.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-12);
            }
        }

        #[test]
        fn jump_map_identity_without_loss(pi in 0.0f64..=1.0) {
            prop_assert!((jump_map(pi, 0.0).unwrap() - pi).abs() < 1e-15);
        }
    }
}
