//! Finite-horizon log-utility problem: the frozen-regime correction
//! `h1(t, pi)` solves a first-order nonlinear PDE backward from the horizon,
//! with the cash-crunch asymptotic supplying a finite boundary condition one
//! grid cell away from `pi = 1`; the liquid correction `h0(t)` then follows
//! by a discounted time integral.

use crate::error::{ModelError, Result};
use crate::merton::merton_log;
use crate::numerics::golden_max;
use crate::params::{jump_map, jump_map_deriv, validate_params, ModelParams};
use serde::Serialize;

/// Frictionless finite-horizon benchmark:
/// `V(t, x) = k_hat(t) log x + h_hat(t)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MertonFinite {
    pub horizon: f64,
    rho: f64,
    r: f64,
    theta2: f64,
}

/// Closed-form finite-horizon log benchmark.
pub fn merton_finite_log(p: &ModelParams, horizon: f64) -> Result<MertonFinite> {
    let p = validate_params(*p)?;
    if horizon <= 0.0 {
        return Err(ModelError::Domain("horizon must be positive".into()));
    }
    let theta = p.sharpe();
    Ok(MertonFinite {
        horizon,
        rho: p.rho,
        r: p.r,
        theta2: theta * theta,
    })
}

impl MertonFinite {
    /// `k_hat(t) = (1 - e^(-rho (T-t)))/rho`.
    pub fn k_hat(&self, t: f64) -> f64 {
        (-(-self.rho * (self.horizon - t)).exp_m1()) / self.rho
    }

    /// `h_hat(t) = -k_hat log k_hat
    ///   + (theta^2/(2 rho^2) + (r-rho)/rho^2)(1 - e^(-rho(T-t))(1 + rho(T-t)))`.
    pub fn h_hat(&self, t: f64) -> f64 {
        let k = self.k_hat(t);
        let tau = self.horizon - t;
        let decay = 1.0 - (-self.rho * tau).exp() * (1.0 + self.rho * tau);
        let klogk = if k > 0.0 { k * k.ln() } else { 0.0 };
        -klogk + (self.theta2 / (2.0 * self.rho * self.rho)
            + (self.r - self.rho) / (self.rho * self.rho))
            * decay
    }

    /// Optimal consumption per unit wealth `rho/(1 - e^(-rho(T-t)))`.
    pub fn c_rate(&self, t: f64) -> f64 {
        1.0 / self.k_hat(t)
    }
}

/// Discretization controls for the frozen-regime PDE.
///
/// The fraction grid is uniform with step `d_pi` away from the crunch and
/// geometric in the cash share `1 - pi` inside the boundary layer, where the
/// solution behaves like `log(1 - pi)`; the relative layer spacing and the
/// innermost cash share are tied to `d_pi` so that halving `d_pi` refines
/// the whole grid consistently.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FhConfig {
    /// Bulk fraction step; also sets the layer density.
    pub d_pi: f64,
    /// Hard cap on the time step (`min(d_pi/5, 1e-3)` at the default grid).
    pub dt_cap: f64,
    /// CFL safety factor for the adaptive steps.
    pub cfl_safety: f64,
    /// Number of stored time levels (uniform in `t`, endpoints included).
    pub output_levels: usize,
}

impl Default for FhConfig {
    fn default() -> Self {
        let d_pi = 1.0 / 400.0;
        Self {
            d_pi,
            dt_cap: (d_pi / 5.0).min(1e-3),
            cfl_safety: 0.4,
            output_levels: 201,
        }
    }
}

impl FhConfig {
    /// The same discretization with both steps halved (convergence studies).
    pub fn halved(&self) -> Self {
        Self {
            d_pi: self.d_pi / 2.0,
            dt_cap: self.dt_cap / 2.0,
            ..*self
        }
    }

    /// Cash share where the geometric layer grading starts.
    fn layer_break(&self) -> f64 {
        0.2
    }

    /// Innermost resolved cash share.
    fn s_min(&self) -> f64 {
        self.d_pi / 10.0
    }

    /// Fraction grid: uniform below `1 - layer_break`, geometric in the
    /// cash share above it.
    fn build_grid(&self) -> Vec<f64> {
        let mut grid: Vec<f64> = Vec::new();
        let bulk_end = 1.0 - self.layer_break();
        let n_bulk = (bulk_end / self.d_pi).round() as usize;
        for j in 0..=n_bulk {
            grid.push(j as f64 * self.d_pi);
        }
        // matches the bulk cell width at the break point
        let dlns = self.d_pi / self.layer_break();
        let mut s = self.layer_break();
        loop {
            s *= (-dlns).exp();
            if s <= self.s_min() {
                grid.push(1.0 - self.s_min());
                break;
            }
            grid.push(1.0 - s);
        }
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        grid
    }
}

/// Frozen-regime correction surface `h1(t, pi)` on `[0, T] x [0, 1-d_pi]`.
#[derive(Debug, Clone, Serialize)]
pub struct H1Surface {
    pub horizon: f64,
    /// Ascending times, `t_grid[0] = 0`, last = `T`.
    pub t_grid: Vec<f64>,
    /// Ascending fractions `0, d_pi, ..., 1 - d_pi`.
    pub pi_grid: Vec<f64>,
    /// `h1[t_index][pi_index]`.
    pub h1: Vec<Vec<f64>>,
    /// Nodes where the log argument had to be floored (expected only next
    /// to the crunch boundary at small `T - t`).
    pub floored_nodes: usize,
    pub d_pi: f64,
}

impl H1Surface {
    fn t_segment(&self, t: f64) -> (usize, f64) {
        let n = self.t_grid.len();
        if t <= self.t_grid[0] {
            return (0, 0.0);
        }
        if t >= self.t_grid[n - 1] {
            return (n - 2, 1.0);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.t_grid[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (t - self.t_grid[lo]) / (self.t_grid[lo + 1] - self.t_grid[lo]);
        (lo, w)
    }

    fn pi_segment(&self, pi: f64) -> (usize, f64) {
        let n = self.pi_grid.len();
        if pi <= self.pi_grid[0] {
            return (0, 0.0);
        }
        if pi >= self.pi_grid[n - 1] {
            return (n - 2, 1.0);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.pi_grid[mid] <= pi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = (pi - self.pi_grid[lo]) / (self.pi_grid[lo + 1] - self.pi_grid[lo]);
        (lo, w.clamp(0.0, 1.0))
    }

    /// Bilinear interpolation of the surface.
    pub fn value(&self, t: f64, pi: f64) -> f64 {
        let (i, wt) = self.t_segment(t);
        let (j, wp) = self.pi_segment(pi);
        let v00 = self.h1[i][j];
        let v01 = self.h1[i][j + 1];
        let v10 = self.h1[i + 1][j];
        let v11 = self.h1[i + 1][j + 1];
        (1.0 - wt) * ((1.0 - wp) * v00 + wp * v01) + wt * ((1.0 - wp) * v10 + wp * v11)
    }

    /// Slope in the fraction at interpolated time (three-point nonuniform
    /// formula in the interior).
    pub fn slope(&self, t: f64, pi: f64) -> f64 {
        let (i, wt) = self.t_segment(t);
        let (j, _) = self.pi_segment(pi);
        let n = self.pi_grid.len();
        let g = &self.pi_grid;
        let row = |row: &Vec<f64>| -> f64 {
            if j == 0 {
                (row[1] - row[0]) / (g[1] - g[0])
            } else if j + 2 >= n {
                (row[n - 1] - row[n - 2]) / (g[n - 1] - g[n - 2])
            } else {
                let (h0, h1) = (g[j] - g[j - 1], g[j + 1] - g[j]);
                -h1 / (h0 * (h0 + h1)) * row[j - 1] + (h1 - h0) / (h0 * h1) * row[j]
                    + h0 / (h1 * (h0 + h1)) * row[j + 1]
            }
        };
        (1.0 - wt) * row(&self.h1[i]) + wt * row(&self.h1[i + 1])
    }
}

/// Cash-crunch shift of the frozen correction near `pi = 1`:
/// `h1(t, 1 - d*s) - h1(t, 1 - s) = (1 - e^(-(rho+lambda10)(T-t)))/(rho+lambda10) log d`.
pub fn cash_crunch_shift(t: f64, d: f64, p: &ModelParams, horizon: f64) -> f64 {
    let rl = p.rho + p.lambda10;
    (-(-rl * (horizon - t)).exp_m1()) / rl * d.ln()
}

/// Solves the frozen-regime PDE backward from the horizon with first-order
/// upwind differencing of the slope term and explicit time stepping. The
/// step size obeys both the configured cap and an adaptive CFL bound (the
/// transport speed grows like `1/(T-t)` at the horizon, where consumption
/// spikes to spend the remaining cash).
pub fn solve_h1(p: &ModelParams, horizon: f64, cfg: &FhConfig) -> Result<H1Surface> {
    let p = validate_params(*p)?;
    if !p.is_log() {
        return Err(ModelError::Domain(
            "the finite-horizon solver covers log utility".into(),
        ));
    }
    if (p.alpha - p.r).abs() > 1e-12 {
        return Err(ModelError::UnsupportedModel(
            "finite-horizon frozen equation is stated for alpha = r".into(),
        ));
    }
    if horizon <= 0.0 {
        return Err(ModelError::Domain("horizon must be positive".into()));
    }
    let bench = merton_finite_log(&p, horizon)?;
    let d_pi = cfg.d_pi;
    let pi_grid = cfg.build_grid();
    let n = pi_grid.len();
    if n < 8 {
        return Err(ModelError::GridTooCoarse("need at least 8 fraction nodes".into()));
    }
    let steps_pi: Vec<f64> = pi_grid.windows(2).map(|w| w[1] - w[0]).collect();
    // the boundary shift acts between the two innermost layer nodes
    let shift_ratio = (1.0 - pi_grid[n - 1]) / (1.0 - pi_grid[n - 2]);

    // output times, ascending in tau = T - t
    let levels = cfg.output_levels.max(2);
    let mut targets: Vec<f64> = (0..levels)
        .map(|i| horizon * i as f64 / (levels - 1) as f64)
        .collect();
    targets[levels - 1] = horizon;

    // start past the horizon singularity with the integrated asymptotic
    let tau0 = cfg.dt_cap.min(targets[1] / 2.0).min(1e-3);
    let mut tau = tau0;
    let mut row = vec![-tau0 * tau0.ln(); n];
    row[n - 1] = row[n - 2] + boundary_shift(&p, tau, shift_ratio);

    let mut snapshots: Vec<Vec<f64>> = vec![vec![0.0; n]]; // tau = 0 row
    let mut next_target = 1usize;
    let mut floored = 0usize;

    // upwind slope: second-order one-sided stencil in the interior, and a
    // two-point difference in log cash-share form at the boundary-adjacent
    // node (the solution is log-shaped there)
    let slope_at = |row: &[f64], j: usize| -> f64 {
        if j + 2 <= n - 1 {
            let h1 = steps_pi[j];
            let h2 = steps_pi[j + 1];
            -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * row[j]
                + (h1 + h2) / (h1 * h2) * row[j + 1]
                - h1 / (h2 * (h1 + h2)) * row[j + 2]
        } else {
            let s0 = 1.0 - pi_grid[j];
            let s1 = 1.0 - pi_grid[j + 1];
            (row[j + 1] - row[j]) / (s0 * (s0 / s1).ln())
        }
    };

    // one explicit stage: rate[j] = RHS of h_tau at time t for j < n-1
    let rate = |tau: f64, row: &[f64], out: &mut [f64], floored: &mut usize| {
        let t = horizon - tau;
        let k_hat = bench.k_hat(t);
        let h_hat = bench.h_hat(t);
        for j in 0..n - 1 {
            let mut arg = k_hat - pi_grid[j] * slope_at(row, j);
            if arg < 1e-12 {
                arg = 1e-12;
                *floored += 1;
            }
            out[j] =
                -p.rho * row[j] + p.r * k_hat - 1.0 + p.lambda10 * (h_hat - row[j]) - arg.ln();
        }
    };

    let mut k1 = vec![0.0f64; n];
    let mut k2 = vec![0.0f64; n];
    let mut predictor = vec![0.0f64; n];
    let max_steps = 100_000_000usize;
    let mut steps = 0usize;
    while tau < horizon - 1e-15 {
        steps += 1;
        if steps > max_steps {
            return Err(ModelError::NoConvergence(
                "finite-horizon sweep exceeded the step budget".into(),
            ));
        }
        let t = horizon - tau;
        let k_hat = bench.k_hat(t);

        // transport speed pi/(k_hat - pi D+h) against the local cell width
        // bounds the stable step
        let mut dt = cfg.dt_cap;
        for j in 0..n - 1 {
            let arg = k_hat - pi_grid[j] * slope_at(&row, j);
            if arg > 0.0 && pi_grid[j] > 0.0 {
                dt = dt.min(cfg.cfl_safety * steps_pi[j] * arg / pi_grid[j]);
            }
        }
        // land exactly on the next output time (and the horizon)
        let tau_target = targets[next_target.min(levels - 1)];
        if tau + dt >= tau_target - 1e-15 {
            dt = tau_target - tau;
        }

        // Heun: predictor at tau + dt, trapezoidal corrector
        rate(tau, &row, &mut k1, &mut floored);
        for j in 0..n - 1 {
            predictor[j] = row[j] + dt * k1[j];
        }
        predictor[n - 1] = predictor[n - 2] + boundary_shift(&p, tau + dt, shift_ratio);
        rate(tau + dt, &predictor, &mut k2, &mut floored);
        for j in 0..n - 1 {
            row[j] += 0.5 * dt * (k1[j] + k2[j]);
        }
        tau += dt;
        row[n - 1] = row[n - 2] + boundary_shift(&p, tau, shift_ratio);

        if (tau - targets[next_target.min(levels - 1)]).abs() < 1e-12 {
            snapshots.push(row.clone());
            next_target += 1;
            if next_target >= levels {
                break;
            }
        }
    }
    if snapshots.len() != levels {
        return Err(ModelError::NoConvergence(format!(
            "finite-horizon sweep produced {} of {} levels",
            snapshots.len(),
            levels
        )));
    }

    // store ascending in t: snapshot k is tau = targets[k], i.e. t = T - tau
    snapshots.reverse();
    let t_grid: Vec<f64> = targets.iter().rev().map(|tau| horizon - tau).collect();
    Ok(H1Surface {
        horizon,
        t_grid,
        pi_grid,
        h1: snapshots,
        floored_nodes: floored,
        d_pi,
    })
}

/// Value increment between the two innermost layer nodes supplied by the
/// crunch asymptotic: `c(tau) log(s_last/s_prev)`.
fn boundary_shift(p: &ModelParams, tau: f64, shift_ratio: f64) -> f64 {
    let rl = p.rho + p.lambda10;
    (-(-rl * tau).exp_m1()) / rl * shift_ratio.ln()
}

/// Liquid correction: `h0` and the optimal fraction path on the surface's
/// time grid.
#[derive(Debug, Clone, Serialize)]
pub struct H0Path {
    pub t_grid: Vec<f64>,
    pub h0: Vec<f64>,
    pub pi_star: Vec<f64>,
}

/// Liquid-regime one-period bracket at time `t` (the object whose supremum
/// defines `xi`).
fn xi_bracket(p: &ModelParams, bench: &MertonFinite, surface: &H1Surface, t: f64, pi: f64) -> f64 {
    let k = bench.k_hat(t);
    let g = pi * (1.0 - p.l_jump) / (1.0 - pi * p.l_jump);
    (p.mu - p.r) * pi * k - 0.5 * p.sigma * p.sigma * pi * pi * k
        + p.lambda01 * (k * (1.0 - pi * p.l_jump).ln() + surface.value(t, g))
}

fn xi_max(p: &ModelParams, bench: &MertonFinite, surface: &H1Surface, t: f64) -> (f64, f64) {
    let hi = 1.0 - surface.d_pi;
    golden_max(
        |pi| xi_bracket(p, bench, surface, t, pi),
        0.0,
        hi,
        256,
        1e-10,
    )
}

/// Integrates `h0(t) = int_t^T e^(-(rho+lambda01)(s-t)) [r k_hat - 1
///   - log k_hat + xi(s)] ds` backward alongside the stored surface and
/// maximizes the bracket for the fraction path.
pub fn solve_h0(p: &ModelParams, surface: &H1Surface) -> Result<H0Path> {
    let p = validate_params(*p)?;
    let horizon = surface.horizon;
    let bench = merton_finite_log(&p, horizon)?;
    let beta = p.rho + p.lambda01;

    // fine backward recurrence in tau = T - s: geometric start + uniform
    // body, with the surface's own sample times merged in so that reported
    // values land exactly on recurrence nodes
    let mut taus: Vec<f64> = Vec::new();
    let mut x = 1e-6;
    while x < (0.05f64).min(horizon / 2.0) {
        taus.push(x);
        x *= 1.02;
    }
    let body = ((horizon / 2e-3).ceil() as usize).clamp(200, 400_000);
    for i in 1..=body {
        taus.push(horizon * i as f64 / body as f64);
    }
    for &t in &surface.t_grid {
        let tau = horizon - t;
        if tau > 1e-9 {
            taus.push(tau);
        }
    }
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    // split the integrand into a smooth part and -log(tau): the latter is
    // integrated in closed form per segment (trapezoid breaks down on it)
    let smooth = |tau: f64| -> f64 {
        let t = horizon - tau;
        let k = bench.k_hat(t);
        let (_, xi) = xi_max(&p, &bench, surface, t);
        // -log k_hat = -log tau - log((1 - e^(-rho tau))/(rho tau))
        p.r * k - 1.0 - (k / tau).ln() + xi
    };
    let minus_log_int = |a: f64, b: f64| -> f64 {
        // int_a^b -log(u) du
        a * a.ln() - b * b.ln() + (b - a)
    };

    // I(tau) = h0(T - tau); the first segment uses the integrated
    // asymptotic of the full integrand
    let mut acc = -taus[0] * taus[0].ln();
    let mut values: Vec<(f64, f64)> = vec![(0.0, 0.0), (taus[0], acc)];
    let mut f_prev = smooth(taus[0]);
    for w in taus.windows(2) {
        let dt = w[1] - w[0];
        let f_next = smooth(w[1]);
        let decay = (-beta * dt).exp();
        let mid_decay = (-beta * 0.5 * dt).exp();
        acc = decay * acc
            + 0.5 * dt * (decay * f_prev + f_next)
            + mid_decay * minus_log_int(w[0], w[1]);
        values.push((w[1], acc));
        f_prev = f_next;
    }

    // sample at the surface's time grid
    let sample = |tau: f64| -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let idx = values.partition_point(|(x, _)| *x < tau);
        let hi = idx.min(values.len() - 1).max(1);
        let (x0, y0) = values[hi - 1];
        let (x1, y1) = values[hi];
        if x1 == x0 {
            y1
        } else {
            y0 + (y1 - y0) * (tau - x0) / (x1 - x0)
        }
    };
    let mut h0 = Vec::with_capacity(surface.t_grid.len());
    let mut pi_star = Vec::with_capacity(surface.t_grid.len());
    for &t in &surface.t_grid {
        h0.push(sample(horizon - t));
        let (pi, _) = xi_max(&p, &bench, surface, t);
        pi_star.push(pi);
    }
    Ok(H0Path {
        t_grid: surface.t_grid.clone(),
        h0,
        pi_star,
    })
}

/// Percent efficiency-loss surface:
/// `Theta(t, pi) = 1 - exp((h1(t,pi) - h_hat(t))/k_hat(t))`, zero at the
/// horizon by continuity.
pub fn loss_surface_value(
    p: &ModelParams,
    surface: &H1Surface,
    t: f64,
    pi: f64,
) -> Result<f64> {
    let bench = merton_finite_log(p, surface.horizon)?;
    let k = bench.k_hat(t);
    if k <= 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - ((surface.value(t, pi) - bench.h_hat(t)) / k).exp())
}

/// First-order rare-freeze expansion of the finite-horizon problem at a
/// given time: fraction and liquid-correction integrands built from the
/// frozen surface.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FiniteAsymptotics {
    pub t: f64,
    /// `pi*(t) ~ pi_hat + lambda01 pi1(t)`.
    pub pi1: f64,
    /// `h0(t) ~ h_hat(t) + lambda01 h01(t)`.
    pub h01: f64,
    pub pi_hat: f64,
}

impl FiniteAsymptotics {
    pub fn fraction(&self, lambda01: f64) -> f64 {
        self.pi_hat + lambda01 * self.pi1
    }
}

/// Evaluates the expansion at time `t` on a solved surface:
/// `pi1 = (-L/(1 - pi_hat L) + h1_pi(t, g(pi_hat)) g'(pi_hat)/k_hat)/sigma^2`,
/// `h01 = int_t^T e^(-rho(s-t)) (h1(s, g(pi_hat)) - h_hat(s)) ds
///        + log(1-pi_hat L) (1 - e^(-rho(T-t))(1+rho(T-t)))/rho^2`.
pub fn finite_asymptotics(
    p: &ModelParams,
    surface: &H1Surface,
    t: f64,
) -> Result<FiniteAsymptotics> {
    let p = validate_params(*p)?;
    let bench = merton_finite_log(&p, surface.horizon)?;
    let m = merton_log(&p);
    if m.pi_hat >= 1.0 {
        return Err(ModelError::WrongRegime(format!(
            "pi_hat = {} >= 1: expansion needs an interior benchmark",
            m.pi_hat
        )));
    }
    let g = jump_map(m.pi_hat, p.l_jump)?;
    let gp = jump_map_deriv(m.pi_hat, p.l_jump);
    let s2 = p.sigma * p.sigma;
    let pi1 = (-p.l_jump / (1.0 - m.pi_hat * p.l_jump)
        + surface.slope(t, g) * gp / bench.k_hat(t))
        / s2;

    // discounted integral of the frozen-vs-benchmark gap
    let mut acc = 0.0;
    let grid = &surface.t_grid;
    let idx0 = grid.partition_point(|&s| s < t);
    let mut prev_s = t;
    let mut prev_f = surface.value(t, g) - bench.h_hat(t);
    for &s in grid.iter().skip(idx0) {
        if s <= prev_s {
            continue;
        }
        let f = surface.value(s, g) - bench.h_hat(s);
        let ds = s - prev_s;
        acc += 0.5
            * ds
            * ((-p.rho * (prev_s - t)).exp() * prev_f + (-p.rho * (s - t)).exp() * f);
        prev_s = s;
        prev_f = f;
    }
    let tau = surface.horizon - t;
    let decay = (1.0 - (-p.rho * tau).exp() * (1.0 + p.rho * tau)) / (p.rho * p.rho);
    let h01 = acc + (1.0 - m.pi_hat * p.l_jump).ln() * decay;
    Ok(FiniteAsymptotics {
        t,
        pi1,
        h01,
        pi_hat: m.pi_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log_infinite::solve_log;
    use crate::presets;
    use crate::ModelParams;

    fn fig_params() -> ModelParams {
        presets::fig2_params()
    }

    #[test]
    fn merton_terminal_conditions() {
        let p = fig_params();
        let bench = merton_finite_log(&p, 2.0).unwrap();
        assert!(bench.k_hat(2.0).abs() < 1e-15);
        assert!(bench.h_hat(2.0).abs() < 1e-12);
        // consumption spends everything near the horizon
        assert!(bench.c_rate(1.999) > 100.0);
        let expect = p.rho / (1.0 - (-p.rho * 2.0f64).exp());
        assert!((bench.c_rate(0.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn merton_long_horizon_limits() {
        let p = fig_params();
        let bench = merton_finite_log(&p, 5000.0).unwrap();
        let m = merton_log(&p);
        assert!((bench.k_hat(0.0) - 1.0 / p.rho).abs() < 1e-10);
        assert!((bench.h_hat(0.0) - m.value_coeff).abs() < 1e-8);
    }

    #[test]
    fn h1_terminal_row_is_zero() {
        let p = fig_params();
        let surface = solve_h1(&p, 2.0, &FhConfig::default()).unwrap();
        let last = surface.h1.last().unwrap();
        assert!(last.iter().all(|&v| v == 0.0));
        // nonincreasing in pi away from the horizon
        let first = &surface.h1[0];
        for w in first.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn pi_zero_column_matches_quadrature() {
        // along pi = 0 the PDE loses its slope term; the exact solution is a
        // discounted integral computed here by fine trapezoid quadrature
        let p = fig_params();
        let horizon = 2.0;
        let surface = solve_h1(&p, horizon, &FhConfig::default()).unwrap();
        let bench = merton_finite_log(&p, horizon).unwrap();
        let rl = p.rho + p.lambda10;
        let oracle = |tau_end: f64| -> f64 {
            let n = 400_000usize;
            let dt = tau_end / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let tau = (i as f64 + 0.5) * dt;
                let t = horizon - tau;
                let f = p.r * bench.k_hat(t) - 1.0 + p.lambda10 * bench.h_hat(t)
                    - bench.k_hat(t).ln();
                acc += dt * (-rl * (tau_end - tau)).exp() * f;
            }
            acc
        };
        for (i, &t) in surface.t_grid.iter().enumerate() {
            if ![0usize, surface.t_grid.len() / 2].contains(&i) {
                continue;
            }
            let expect = oracle(horizon - t);
            let got = surface.h1[i][0];
            assert!(
                (got - expect).abs() < 1e-4,
                "t={t}: {got} vs oracle {expect}"
            );
        }
    }

    #[test]
    fn crunch_shift_formula_examples() {
        let p = fig_params();
        assert_eq!(cash_crunch_shift(0.5, 1.0, &p, 2.0), 0.0);
        assert!(cash_crunch_shift(2.0, 0.5, &p, 2.0).abs() < 1e-15);
        let expect = -(2.0f64.ln()) * (1.0 - (-4.1f64).exp()) / 2.05;
        assert!((cash_crunch_shift(0.0, 0.5, &p, 2.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn crunch_shift_matches_pde_near_boundary() {
        // measured shift h1(0, 1-s/2) - h1(0, 1-s) vs the asymptotic value,
        // on a fine grid so s = 1e-2 and 1e-3 are resolved
        let p = fig_params();
        let cfg = FhConfig {
            d_pi: 1.0 / 4000.0,
            dt_cap: (1.0f64 / 4000.0 / 5.0).min(1e-3),
            cfl_safety: 0.8,
            output_levels: 3,
        };
        let surface = solve_h1(&p, 2.0, &cfg).unwrap();
        let expect = cash_crunch_shift(0.0, 0.5, &p, 2.0);
        for s in [1e-2, 1e-3] {
            let got = surface.value(0.0, 1.0 - 0.5 * s) - surface.value(0.0, 1.0 - s);
            assert!(
                ((got - expect) / expect).abs() < 0.10,
                "s={s}: shift {got} vs {expect}"
            );
        }
    }

    #[test]
    fn h0_reduces_to_merton_without_freezes() {
        let p = ModelParams {
            lambda01: 0.0,
            ..fig_params()
        };
        let surface = solve_h1(&p, 2.0, &FhConfig::default()).unwrap();
        let path = solve_h0(&p, &surface).unwrap();
        let bench = merton_finite_log(&p, 2.0).unwrap();
        let m = merton_log(&p);
        for (&t, (&h0, &pi)) in path
            .t_grid
            .iter()
            .zip(path.h0.iter().zip(path.pi_star.iter()))
        {
            assert!(
                (h0 - bench.h_hat(t)).abs() < 2e-4,
                "t={t}: {h0} vs {}",
                bench.h_hat(t)
            );
            if t < 1.9 {
                assert!((pi - m.pi_hat).abs() < 1e-6, "t={t}: pi {pi}");
            }
        }
    }

    #[test]
    fn h0_correction_negative_and_shrinking() {
        let p = fig_params();
        let surface = solve_h1(&p, 2.0, &FhConfig::default()).unwrap();
        let path = solve_h0(&p, &surface).unwrap();
        let bench = merton_finite_log(&p, 2.0).unwrap();
        let mut last = f64::NEG_INFINITY;
        for (&t, &h0) in path.t_grid.iter().zip(path.h0.iter()) {
            let corr = h0 - bench.h_hat(t);
            assert!(corr <= 1e-7, "t={t}: correction {corr}");
            // monotone up to the quadrature noise floor of the recurrence
            assert!(corr >= last - 2e-7, "t={t}: magnitude grew toward T");
            last = corr;
        }
    }

    #[test]
    fn short_freeze_fraction_stays_near_benchmark() {
        // the frozen slope at moderate fractions is negligible only when the
        // remaining horizon is long (the layer exponent is
        // (rho+lambda10) k_hat(t), which needs k_hat near its flat level)
        let p = ModelParams {
            lambda10: 10.0,
            ..fig_params()
        };
        let surface = solve_h1(&p, 60.0, &FhConfig::default()).unwrap();
        let path = solve_h0(&p, &surface).unwrap();
        let m = merton_log(&p);
        for (&t, &pi) in path.t_grid.iter().zip(path.pi_star.iter()) {
            if t < 5.0 {
                assert!((pi - m.pi_hat).abs() < 5e-3, "t={t}: {pi}");
            }
        }
    }

    #[test]
    fn loss_surface_monotone_in_fraction() {
        let p = fig_params();
        let surface = solve_h1(&p, 2.0, &FhConfig::default()).unwrap();
        for &t in [0.0, 0.5, 1.0, 1.5].iter() {
            let mut last = -1.0;
            for j in 0..40 {
                let pi = j as f64 / 40.0 * (1.0 - surface.d_pi);
                let theta = loss_surface_value(&p, &surface, t, pi).unwrap();
                assert!(theta >= last - 1e-9, "t={t} pi={pi}");
                last = theta;
            }
        }
    }

    #[test]
    fn loss_linear_in_fraction_near_start() {
        // with little time left the loss is nearly linear in the fraction
        // (one minus the loss becomes proportional to the cash share)
        let p = fig_params();
        let surface = solve_h1(&p, 2.0, &FhConfig::default()).unwrap();
        let t_probe = 2.0 - 0.05;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for j in 0..=50 {
            let pi = j as f64 / 100.0;
            xs.push(pi);
            ys.push(loss_surface_value(&p, &surface, t_probe, pi).unwrap());
        }
        // least-squares line and R^2
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 > 0.99, "R^2 = {r2}");
    }

    #[test]
    fn grid_halving_changes_little() {
        let p = fig_params();
        let cfg = FhConfig {
            output_levels: 5,
            ..FhConfig::default()
        };
        let coarse = solve_h1(&p, 2.0, &cfg).unwrap();
        let fine = solve_h1(&p, 2.0, &cfg.halved()).unwrap();
        let mut sup = 0.0f64;
        for j in 0..coarse.pi_grid.len() {
            let pi = coarse.pi_grid[j];
            if pi > 0.95 {
                continue;
            }
            sup = sup.max((coarse.h1[0][j] - fine.value(0.0, pi)).abs());
        }
        assert!(sup < 1e-3, "sup-norm change {sup}");
    }

    #[test]
    fn long_horizon_matches_infinite_horizon_loss() {
        // T = 200: the loss at t=0, pi=g(pi_hat) approaches the stationary
        // frozen-regime loss of the rare-freeze closed form
        let p = fig_params();
        let surface = solve_h1(&p, 200.0, &FhConfig::default()).unwrap();
        let m = merton_log(&p);
        let pi_probe = jump_map(m.pi_hat, p.l_jump).unwrap();
        let got = loss_surface_value(&p, &surface, 0.0, pi_probe).unwrap();

        // stationary limit: h_unc(pi) anchored at the Merton constant
        let a = 1.0 + p.lambda10 / p.rho;
        let big_a = p.r / p.rho - 1.0 + p.rho.ln();
        let h_unc = (big_a
            + p.lambda10 * m.value_coeff
            + crate::numerics::ln_one_minus_pow(pi_probe, a))
            / (p.rho + p.lambda10);
        let expect = 1.0 - (p.rho * (h_unc - m.value_coeff)).exp();
        assert!(
            ((got - expect) / expect).abs() < 0.01,
            "loss {got} vs stationary {expect}"
        );
    }

    #[test]
    fn finite_expansion_matches_exact_at_second_order() {
        let p = fig_params();
        let surface = solve_h1(&p, 2.0, &FhConfig::default()).unwrap();
        let asy = finite_asymptotics(&p, &surface, 0.0).unwrap();
        let mut ratios = Vec::new();
        for lam in [1e-2, 1e-3] {
            let pl = ModelParams {
                lambda01: lam,
                ..p
            };
            let path = solve_h0(&pl, &surface).unwrap();
            let exact = path.pi_star[0];
            ratios.push((exact - asy.fraction(lam)).abs() / (lam * lam));
        }
        let (lo, hi) = (ratios[0].min(ratios[1]), ratios[0].max(ratios[1]));
        assert!(hi.is_finite() && hi / lo.max(1e-9) < 25.0, "ratios {ratios:?}");
    }

    #[test]
    fn expansion_trivial_cases() {
        let p = fig_params();
        let surface = solve_h1(&p, 2.0, &FhConfig::default()).unwrap();
        // at the horizon both corrections vanish
        let at_t = finite_asymptotics(&p, &surface, 2.0).unwrap();
        assert!(at_t.h01.abs() < 1e-8);
        // L = 0 and negligible slope: fraction stays at the benchmark
        let fast = ModelParams {
            lambda10: 50.0,
            ..p
        };
        let s2 = solve_h1(&fast, 2.0, &FhConfig::default()).unwrap();
        let asy = finite_asymptotics(&fast, &s2, 0.5).unwrap();
        assert!(asy.pi1.abs() < 0.05, "pi1 = {}", asy.pi1);
    }

    #[test]
    fn infinite_loss_consistency_against_closed_form() {
        // sanity anchor for the T -> infinity comparison: the closed-form
        // infinite-horizon solution exists for the same preset
        let p = fig_params();
        let sol = solve_log(&p).unwrap();
        assert!(sol.b.is_finite());
    }
}
