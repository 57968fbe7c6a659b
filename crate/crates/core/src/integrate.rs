//! Time integration of linear complex ODE systems `ẏ = A(t) y`.
//!
//! The default method is Dormand–Prince 5(4) with step-size control and
//! continuous output; results on the requested grid are interpolated rather
//! than forcing steps onto it. A fixed-step implicit trapezoid rule, solved
//! matrix-free with BiCGSTAB, is available for stiff problems.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dopri5,
    Trapezoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOptions {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_rtol")]
    pub rel_tol: f64,
    #[serde(default = "default_atol")]
    pub abs_tol: f64,
    /// Upper bound on the adaptive step; also the step of the trapezoid rule.
    #[serde(default = "default_max_step")]
    pub max_step: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_method() -> Method {
    Method::Dopri5
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_max_step() -> f64 {
    f64::INFINITY
}
fn default_max_steps() -> usize {
    10_000_000
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: default_method(),
            rel_tol: default_rtol(),
            abs_tol: default_atol(),
            max_step: default_max_step(),
            max_steps: default_max_steps(),
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step must be positive"));
        }
        if self.method == Method::Trapezoid && !self.max_step.is_finite() {
            return Err(Error::invalid("trapezoid method needs a finite max_step"));
        }
        Ok(())
    }
}

/// Linear homogeneous right-hand side `out = A(t) y`.
pub trait LinearSystem: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, t: f64, y: &[C64], out: &mut [C64]);
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Sum of the absolute local error estimates of accepted steps.
    pub error_estimate: f64,
}

/// Integrates from `t_out[0]` through every time in `t_out` (nondecreasing),
/// calling `observe(index, t, y)` at each output time.
pub fn integrate<S, F>(sys: &S, y0: Vec<C64>, t_out: &[f64], opts: &IntegratorOptions, mut observe: F) -> Result<IntegrationStats>
where
    S: LinearSystem + ?Sized,
    F: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    opts.validate()?;
    if y0.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), found: y0.len() });
    }
    if t_out.is_empty() {
        return Ok(IntegrationStats::default());
    }
    if t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("output times must be nondecreasing"));
    }
    match opts.method {
        Method::Dopri5 => dopri5(sys, y0, t_out, opts, &mut observe),
        Method::Trapezoid => trapezoid(sys, y0, t_out, opts, &mut observe),
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy_stage(y: &[C64], h: f64, ks: &[(&[C64], f64)], out: &mut [C64]) {
    for i in 0..y.len() {
        let mut acc = ZERO;
        for (k, a) in ks {
            acc += k[i] * *a;
        }
        out[i] = y[i] + acc * h;
    }
}

fn dopri5<S, F>(sys: &S, mut y: Vec<C64>, t_out: &[f64], opts: &IntegratorOptions, observe: &mut F) -> Result<IntegrationStats>
where
    S: LinearSystem + ?Sized,
    F: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    let mut t = t_out[0];
    let t_end = *t_out.last().unwrap();
    let mut next_out = 0;
    while next_out < t_out.len() && t_out[next_out] <= t {
        observe(next_out, t_out[next_out], &y)?;
        next_out += 1;
    }
    if next_out == t_out.len() {
        return Ok(stats);
    }

    let mut k1 = vec![ZERO; n];
    let mut k2 = vec![ZERO; n];
    let mut k3 = vec![ZERO; n];
    let mut k4 = vec![ZERO; n];
    let mut k5 = vec![ZERO; n];
    let mut k6 = vec![ZERO; n];
    let mut k7 = vec![ZERO; n];
    let mut ys = vec![ZERO; n];
    let mut y1 = vec![ZERO; n];
    let mut dense = vec![ZERO; n];

    sys.apply(t, &y, &mut k1);
    stats.rhs_evals += 1;

    let span = t_end - t;
    let mut h = initial_step(&y, &k1, opts).min(opts.max_step).min(span);
    let h_min = 1e-14 * span.max(t.abs()).max(1.0);
    let mut last_ratio = 1e-4f64;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration { t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        if h < h_min {
            return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:.3e})") });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        axpy_stage(&y, h, &[(&k1, A21)], &mut ys);
        sys.apply(t + C2 * h, &ys, &mut k2);
        axpy_stage(&y, h, &[(&k1, A31), (&k2, A32)], &mut ys);
        sys.apply(t + C3 * h, &ys, &mut k3);
        axpy_stage(&y, h, &[(&k1, A41), (&k2, A42), (&k3, A43)], &mut ys);
        sys.apply(t + C4 * h, &ys, &mut k4);
        axpy_stage(&y, h, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)], &mut ys);
        sys.apply(t + C5 * h, &ys, &mut k5);
        axpy_stage(&y, h, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)], &mut ys);
        sys.apply(t + h, &ys, &mut k6);
        axpy_stage(&y, h, &[(&k1, A71), (&k3, A73), (&k4, A74), (&k5, A75), (&k6, A76)], &mut y1);
        sys.apply(t + h, &y1, &mut k7);
        stats.rhs_evals += 6;

        let mut sum = 0.0;
        let mut abs_err: f64 = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = opts.abs_tol + opts.rel_tol * y[i].norm().max(y1[i].norm());
            let r = e.norm() / sc;
            sum += r * r;
            abs_err = abs_err.max(e.norm());
        }
        let err = (sum / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite error estimate".into() });
        }

        if err <= 1.0 {
            let t_new = t + h;
            while next_out < t_out.len() && t_out[next_out] <= t_new {
                let to = t_out[next_out];
                if to == t_new {
                    observe(next_out, to, &y1)?;
                } else {
                    let theta = (to - t) / h;
                    let theta1 = 1.0 - theta;
                    for i in 0..n {
                        let rc1 = y[i];
                        let ydiff = y1[i] - y[i];
                        let bspl = k1[i] * h - ydiff;
                        let rc4 = ydiff - k7[i] * h - bspl;
                        let rc5 = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                        dense[i] = rc1 + (ydiff + (bspl + (rc4 + rc5 * theta1) * theta) * theta1) * theta;
                    }
                    observe(next_out, to, &dense)?;
                }
                next_out += 1;
            }
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            stats.accepted += 1;
            stats.error_estimate += abs_err;
            let ratio = err.max(1e-10);
            // PI step control.
            let fac = 0.9 * ratio.powf(-0.7 / 5.0) * last_ratio.powf(0.4 / 5.0);
            h = (h * fac.clamp(0.2, 10.0)).min(opts.max_step);
            last_ratio = ratio;
            if last {
                break;
            }
        } else {
            stats.rejected += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
        }
    }
    while next_out < t_out.len() {
        observe(next_out, t_out[next_out], &y)?;
        next_out += 1;
    }
    Ok(stats)
}

fn initial_step(y: &[C64], f: &[C64], opts: &IntegratorOptions) -> f64 {
    let n = y.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (a, b) in y.iter().zip(f) {
        let sc = opts.abs_tol + opts.rel_tol * a.norm();
        d0 += (a.norm() / sc).powi(2);
        d1 += (b.norm() / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}

fn trapezoid<S, F>(sys: &S, mut y: Vec<C64>, t_out: &[f64], opts: &IntegratorOptions, observe: &mut F) -> Result<IntegrationStats>
where
    S: LinearSystem + ?Sized,
    F: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    let n = y.len();
    let mut stats = IntegrationStats::default();
    let mut t = t_out[0];
    let mut f0 = vec![ZERO; n];
    let mut rhs = vec![ZERO; n];
    observe(0, t, &y)?;
    for (idx, &to) in t_out.iter().enumerate().skip(1) {
        let span = to - t;
        if span > 0.0 {
            let steps = (span / opts.max_step).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                sys.apply(t, &y, &mut f0);
                for i in 0..n {
                    rhs[i] = y[i] + f0[i] * (0.5 * h);
                }
                let t1 = t + h;
                let op = |x: &[C64], out: &mut [C64]| {
                    sys.apply(t1, x, out);
                    for i in 0..n {
                        out[i] = x[i] - out[i] * (0.5 * h);
                    }
                };
                // Explicit Euler predictor as the starting guess.
                let guess: Vec<C64> = (0..n).map(|i| y[i] + f0[i] * h).collect();
                let (sol, iters, resid) = bicgstab(op, &rhs, guess, opts.rel_tol.min(1e-10), 10 * n.max(50))?;
                stats.rhs_evals += 1 + 2 * iters;
                stats.error_estimate += resid;
                y = sol;
                t = t1;
                stats.accepted += 1;
            }
        }
        t = to;
        observe(idx, to, &y)?;
    }
    Ok(stats)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `op(x) = b` by BiCGSTAB. Returns the solution, iteration count and
/// final residual norm.
pub fn bicgstab<Op>(op: Op, b: &[C64], mut x: Vec<C64>, tol: f64, max_iter: usize) -> Result<(Vec<C64>, usize, f64)>
where
    Op: Fn(&[C64], &mut [C64]),
{
    let n = b.len();
    let bnorm = norm(b).max(1e-300);
    let mut r = vec![ZERO; n];
    op(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let mut p = r.clone();
    let mut v = vec![ZERO; n];
    let mut s = vec![ZERO; n];
    let mut tv = vec![ZERO; n];
    let mut rho = dot(&r0, &r);
    if norm(&r) / bnorm <= tol {
        return Ok((x, 0, norm(&r)));
    }
    for it in 1..=max_iter {
        op(&p, &mut v);
        let denom = dot(&r0, &v);
        if denom.norm() == 0.0 {
            break;
        }
        let alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return Ok((x, it, norm(&s)));
        }
        op(&s, &mut tv);
        let tt = dot(&tv, &tv);
        if tt.norm() == 0.0 {
            break;
        }
        let omega = dot(&tv, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * tv[i];
        }
        let res = norm(&r);
        if res / bnorm <= tol {
            return Ok((x, it, res));
        }
        let rho_new = dot(&r0, &r);
        if rho_new.norm() == 0.0 || omega.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
    }
    Err(Error::Integration { t: f64::NAN, reason: "BiCGSTAB did not converge".into() })
}
