//! Small numerical toolbox: bracketed root finding, scalar maximization,
//! adaptive quadrature and Hermite interpolation.

use crate::error::{ModelError, Result};

/// `log(1 - pi^a)` evaluated stably for `pi` in [0,1).
pub fn ln_one_minus_pow(pi: f64, a: f64) -> f64 {
    if pi <= 0.0 {
        return 0.0;
    }
    if pi >= 1.0 {
        return f64::NEG_INFINITY;
    }
    // pi^a = exp(a ln pi); 1 - pi^a via expm1 keeps precision near pi = 1.
    (-(a * pi.ln()).exp_m1()).ln()
}

/// Root of `f` on a sign-changing bracket `[a, b]` by Brent's method.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(ModelError::NoConvergence(format!(
            "brent: no sign change on [{a}, {b}] (f: {fa}, {fb})"
        )));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() < tol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let cond = !(s > lo.min(b) && s < lo.max(b))
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            || (mflag && (b - c).abs() < tol)
            || (!mflag && (c - d).abs() < tol);
        if cond {
            s = (a + b) / 2.0;
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Err(ModelError::NoConvergence(format!(
        "brent: iteration limit, last bracket [{a}, {b}]"
    )))
}

/// Plain bisection on a sign-changing bracket; absolute tolerance on x.
pub fn bisect_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(ModelError::NoConvergence(format!(
            "bisection: no sign change on [{a}, {b}]"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() < tol {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

/// Expands a bracket geometrically from `start` in direction `dir` until the
/// sign of `f` flips. Returns `(lo, hi)` with a sign change.
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    dir: f64,
    scale: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut step = scale;
    let mut prev = start;
    for _ in 0..max_steps {
        let next = start + dir * step;
        let fn_ = f(next);
        if f0 * fn_ <= 0.0 {
            return Ok((prev.min(next), prev.max(next)));
        }
        prev = next;
        step *= 2.0;
    }
    Err(ModelError::NoConvergence(format!(
        "bracket expansion from {start} (dir {dir}) found no sign change"
    )))
}

/// Maximizes a unimodal-ish function on `[lo, hi]`: coarse scan followed by
/// golden-section refinement. Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    scan_points: usize,
    tol: f64,
) -> (f64, f64) {
    let n = scan_points.max(4);
    let mut best_i = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let step = (hi - lo) / n as f64;
    let mut a = (lo + step * best_i as f64 - step).max(lo);
    let mut b = (lo + step * best_i as f64 + step).min(hi);
    // golden-section on [a, b]
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v >= best_v {
        (x, v)
    } else {
        (lo + step * best_i as f64, best_v)
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Piecewise cubic Hermite interpolant on an ascending grid with values and
/// derivatives at the nodes.
#[derive(Debug, Clone)]
pub struct HermiteSpline {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl HermiteSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>, dy: Vec<f64>) -> Self {
        debug_assert!(x.len() == y.len() && y.len() == dy.len() && x.len() >= 2);
        debug_assert!(x.windows(2).all(|w| w[1] > w[0]));
        Self { x, y, dy }
    }

    fn segment(&self, x: f64) -> usize {
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite grid"))
        {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.clamp(1, self.x.len() - 1) - 1,
        }
    }

    /// Interpolated value; clamps to the end values outside the grid.
    pub fn value(&self, x: f64) -> f64 {
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= *self.x.last().unwrap() {
            return *self.y.last().unwrap();
        }
        let i = self.segment(x);
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.dy[i] + h01 * self.y[i + 1] + h11 * h * self.dy[i + 1]
    }

    /// Interpolated derivative; zero outside the grid.
    pub fn deriv(&self, x: f64) -> f64 {
        if x <= self.x[0] || x >= *self.x.last().unwrap() {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.y[i] + d10 * self.dy[i] + d01 * self.y[i + 1] + d11 * self.dy[i + 1]
    }
}

/// Geometric grid on `[lo, hi]` with `n` points (ascending, endpoints exact).
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

/// Classic RK4 sweep of `y' = f(t, y)` through the given time grid,
/// with `substeps` internal stages per grid interval.
pub fn rk4_path<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    y0: f64,
    t_grid: &[f64],
    substeps: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut y = y0;
    out.push(y);
    for w in t_grid.windows(2) {
        let n = substeps.max(1);
        let h = (w[1] - w[0]) / n as f64;
        let mut t = w[0];
        for _ in 0..n {
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
            let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
            let k4 = f(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        out.push(y);
    }
    out
}
