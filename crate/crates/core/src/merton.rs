//! Classical unconstrained Merton benchmarks that every solver corrects.

use crate::error::{ModelError, Result};
use crate::params::ModelParams;
use serde::Serialize;

/// Solution of the frictionless optimal investment-consumption problem.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MertonSolution {
    /// Optimal stock fraction (unconstrained; may exceed 1).
    pub pi_hat: f64,
    /// Optimal consumption per unit wealth (1/year).
    pub c_rate: f64,
    /// Sharpe ratio `theta = (mu - r) / sigma`.
    pub theta: f64,
    /// HARA discount margin `delta = rho - gamma r - theta^2 gamma / (2(1-gamma))`.
    pub delta: f64,
    /// Value coefficient: `h_hat` for log utility (additive, utility units),
    /// `f_hat` for power utility (multiplier of `x^gamma/gamma`).
    pub value_coeff: f64,
    /// False when `gamma > 0` and `delta <= 0`, i.e. the value is +infinity.
    pub finite: bool,
}

impl MertonSolution {
    /// The value coefficient, or an error when the value function is infinite.
    pub fn value_coeff_checked(&self) -> Result<f64> {
        if self.finite {
            Ok(self.value_coeff)
        } else {
            Err(ModelError::InfiniteValue(
                "gamma > 0 with delta <= 0: unbounded utility of consumption".into(),
            ))
        }
    }
}

/// Log-utility benchmark: `V(x) = log(x)/rho + h_hat`.
///
/// `h_hat = (r/rho - 1 + log rho)/rho + theta^2/(2 rho^2)`, `c = rho x`,
/// `pi_hat = theta / sigma`.
pub fn merton_log(p: &ModelParams) -> MertonSolution {
    let theta = p.sharpe();
    let h_hat = (p.r / p.rho - 1.0 + p.rho.ln()) / p.rho + theta * theta / (2.0 * p.rho * p.rho);
    MertonSolution {
        pi_hat: theta / p.sigma,
        c_rate: p.rho,
        theta,
        delta: p.rho,
        value_coeff: h_hat,
        finite: true,
    }
}

/// Power-utility benchmark: `V(x) = f_hat x^gamma / gamma` with
/// `f_hat = ((1-gamma)/delta)^(1-gamma)`; infinite when `gamma > 0` and
/// `delta <= 0`.
pub fn merton_hara(p: &ModelParams) -> Result<MertonSolution> {
    let g = p.gamma;
    if g == 0.0 {
        return Err(ModelError::Domain(
            "merton_hara requires gamma != 0; use merton_log".into(),
        ));
    }
    let theta = p.sharpe();
    let delta = p.rho - g * p.r - theta * theta * g / (2.0 * (1.0 - g));
    let finite = !(g > 0.0 && delta <= 0.0);
    let value_coeff = if finite {
        ((1.0 - g) / delta).powf(1.0 - g)
    } else {
        f64::INFINITY
    };
    Ok(MertonSolution {
        pi_hat: (p.mu - p.r) / ((1.0 - g) * p.sigma * p.sigma),
        c_rate: delta / (1.0 - g),
        theta,
        delta,
        value_coeff,
        finite,
    })
}

/// Benchmark for the parameter set's own utility exponent.
pub fn merton(p: &ModelParams) -> Result<MertonSolution> {
    if p.is_log() {
        Ok(merton_log(p))
    } else {
        merton_hara(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::ModelParams;

    #[test]
    fn log_fraction_matches_base_market() {
        let m = merton_log(&presets::base_log());
        assert!((m.pi_hat - 0.9).abs() < 1e-12);
        assert_eq!(m.c_rate, 0.05);
    }

    #[test]
    fn log_with_zero_excess_return() {
        let p = ModelParams {
            mu: 0.05,
            ..presets::base_log()
        };
        let m = merton_log(&p);
        assert_eq!(m.pi_hat, 0.0);
        let expect = (p.r / p.rho - 1.0 + p.rho.ln()) / p.rho;
        assert!((m.value_coeff - expect).abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_fraction_matches_base_market() {
        let m = merton_hara(&presets::base_hyperbolic()).unwrap();
        assert!((m.pi_hat - 0.9).abs() < 1e-12);
    }

    #[test]
    fn sqrt_delta_is_exact() {
        // delta = 0.05 - 0.5*0.05 - 0.005625*0.5/(2*0.5) = 71/3200.
        let m = merton_hara(&presets::base_sqrt()).unwrap();
        assert!((m.delta - 0.0221875).abs() < 1e-15);
        assert!(m.finite && m.value_coeff > 0.0);
    }

    #[test]
    fn positive_risk_aversion_can_blow_up() {
        let p = ModelParams {
            gamma: 0.5,
            mu: 0.5,
            rho: 1e-4,
            ..presets::base_sqrt()
        };
        let m = merton_hara(&p).unwrap();
        assert!(!m.finite);
        assert!(m.value_coeff_checked().is_err());
    }

    #[test]
    fn gamma_to_zero_recovers_log() {
        let log = merton_log(&presets::base_log());
        for g in [1e-6, -1e-6] {
            let p = ModelParams {
                gamma: g,
                ..presets::base_log()
            };
            let m = merton_hara(&p).unwrap();
            assert!((m.c_rate - log.c_rate).abs() / log.c_rate < 1e-4);
            assert!((m.pi_hat - log.pi_hat).abs() / log.pi_hat < 1e-4);
        }
    }

    #[test]
    fn value_coeff_positive_when_finite() {
        for gamma in [-2.0, -1.0, -0.5, 0.25, 0.5, 0.9] {
            let p = presets::base_with_gamma(gamma);
            let m = merton_hara(&p).unwrap();
            if m.finite {
                assert!(m.value_coeff > 0.0, "gamma={gamma}");
            }
        }
    }
}
