//! Trajectory integration (Dormand–Prince 5(4) with cubic Hermite dense
//! output), time averages, period detection and virial reports.

use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size; `None` means unbounded.
    pub max_step: Option<f64>,
    pub t_max: f64,
    pub dense_dt: f64,
    /// Abort with `StepSizeUnderflow` after this many step attempts.
    pub max_steps: u64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: None,
            t_max: 100.0,
            dense_dt: 0.01,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSettings(m));
        if !(self.rtol > 0.0 && self.rtol.is_finite()) {
            return bad(format!("rtol must be positive, got {}", self.rtol));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return bad(format!("atol must be positive, got {}", self.atol));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.dense_dt > 0.0 && self.dense_dt <= self.t_max / 100.0 * (1.0 + 1e-12)) {
            return bad(format!(
                "dense_dt must lie in (0, t_max/100] = (0, {}], got {}",
                self.t_max / 100.0,
                self.dense_dt
            ));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return bad(format!("max_step must be positive, got {h}"));
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }
}

/// Autonomous vector field on flat states.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64]) -> Result<Vec<f64>>;
    fn in_domain(&self, _y: &[f64]) -> bool {
        true
    }
}

impl VectorField for Dynamics {
    fn dim(&self) -> usize {
        Dynamics::dim(self)
    }

    fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.rhs(y)
    }

    fn in_domain(&self, y: &[f64]) -> bool {
        Dynamics::in_domain(self, y)
    }
}

/// Closure-backed field, mostly for tests.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(y))
    }
}

/// An accepted step end point with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Dense sample times `0, dt, 2dt, …` plus the final time.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub knots: Vec<Knot>,
    pub stats: IntegratorStats,
    /// Set when the run stopped early at a domain guard.
    pub guard_tripped: bool,
}

impl Trajectory {
    pub fn span(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    fn segment(&self, t: f64) -> usize {
        let k = self.knots.partition_point(|kn| kn.t <= t);
        k.clamp(1, self.knots.len().max(2) - 1)
    }

    /// Cubic Hermite interpolant between accepted steps.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        if self.knots.len() < 2 {
            return self.knots[0].y.clone();
        }
        let i = self.segment(t);
        let (a, b) = (&self.knots[i - 1], &self.knots[i]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (0..a.y.len())
            .map(|j| h00 * a.y[j] + h10 * h * a.f[j] + h01 * b.y[j] + h11 * h * b.f[j])
            .collect()
    }

    /// Time derivative of the interpolant.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        if self.knots.len() < 2 {
            return self.knots[0].f.clone();
        }
        let i = self.segment(t);
        let (a, b) = (&self.knots[i - 1], &self.knots[i]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let d00 = (6.0 * s * s - 6.0 * s) / h;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s * s - 2.0 * s;
        (0..a.y.len())
            .map(|j| d00 * a.y[j] + d10 * a.f[j] + d01 * b.y[j] + d11 * b.f[j])
            .collect()
    }
}

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    field: &'a dyn VectorField,
    rtol: f64,
    atol: f64,
    stats: IntegratorStats,
}

enum Attempt {
    Done { y: Vec<f64>, f: Vec<f64>, err: f64 },
    OutOfDomain,
}

impl Stepper<'_> {
    fn eval(&mut self, y: &[f64]) -> Result<Option<Vec<f64>>> {
        self.stats.evaluations += 1;
        if !self.field.in_domain(y) {
            return Ok(None);
        }
        match self.field.eval(y) {
            Ok(f) => Ok(Some(f)),
            Err(Error::OutOfChart { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn attempt(&mut self, y: &[f64], f0: &[f64], h: f64) -> Result<Attempt> {
        let n = y.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(f0.to_vec());
        let mut yi = vec![0.0; n];
        for s in 1..7 {
            for j in 0..n {
                let mut acc = 0.0;
                for (r, kr) in k.iter().enumerate() {
                    acc += A[s][r] * kr[j];
                }
                yi[j] = y[j] + h * acc;
            }
            match self.eval(&yi)? {
                Some(f) => k.push(f),
                None => return Ok(Attempt::OutOfDomain),
            }
        }
        // stage 7 is evaluated at the fifth-order solution (FSAL)
        let mut err = 0.0;
        for j in 0..n {
            let e: f64 = (0..7).map(|s| E[s] * k[s][j]).sum::<f64>() * h;
            let sc = self.atol + self.rtol * y[j].abs().max(yi[j].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n.max(1) as f64).sqrt();
        Ok(Attempt::Done {
            y: yi,
            f: k.pop().unwrap(),
            err,
        })
    }

    fn initial_step(&mut self, y0: &[f64], f0: &[f64], span: f64) -> Result<f64> {
        let n = y0.len().max(1) as f64;
        let sc: Vec<f64> = y0.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let d0 = (y0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
        let d2 = match self.eval(&y1)? {
            Some(f1) => {
                (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n).sqrt() / h0
            }
            None => return Ok(h0 * 1e-3),
        };
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        Ok((100.0 * h0).min(h1).min(span))
    }
}

/// Integrate `field` from `y0` over `[0, t_max]`, sampling the dense output
/// every `dense_dt`. Stops early with `guard_tripped` when the domain guard
/// cannot be satisfied.
pub fn integrate(field: &dyn VectorField, y0: &[f64], cfg: &IntegratorSettings) -> Result<Trajectory> {
    cfg.validate()?;
    if y0.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: field.dim(),
            got: y0.len(),
        });
    }
    let mut st = Stepper {
        field,
        rtol: cfg.rtol,
        atol: cfg.atol,
        stats: IntegratorStats::default(),
    };
    let f0 = st
        .eval(y0)?
        .ok_or_else(|| Error::OutOfChart { point: y0.to_vec() })?;
    let t_max = cfg.t_max;
    let max_step = cfg.max_step.unwrap_or(f64::INFINITY).min(t_max);
    let mut h = st.initial_step(y0, &f0, t_max)?.min(max_step);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y0.to_vec()],
        knots: vec![Knot {
            t: 0.0,
            y: y0.to_vec(),
            f: f0,
        }],
        stats: IntegratorStats::default(),
        guard_tripped: false,
    };
    let mut t = 0.0;
    let mut next_sample = 1usize;
    let mut last_rejected = false;
    let mut attempts: u64 = 0;
    while t < t_max {
        attempts += 1;
        if attempts > cfg.max_steps {
            return Err(Error::StepSizeUnderflow { t });
        }
        let last_step = t + h >= t_max * (1.0 - 1e-15);
        if last_step {
            h = t_max - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Err(Error::StepSizeUnderflow { t });
        }
        let knot = traj.knots.last().unwrap().clone();
        match st.attempt(&knot.y, &knot.f, h)? {
            Attempt::OutOfDomain => {
                // stop once the guard is resolved to a relative 1e-9 in time
                if h < 1e-9 * t.abs().max(1.0) {
                    traj.guard_tripped = true;
                    break;
                }
                h *= 0.5;
                last_rejected = true;
            }
            Attempt::Done { y, f, err } => {
                if err <= 1.0 {
                    st.stats.accepted += 1;
                    let t_new = if last_step { t_max } else { t + h };
                    traj.knots.push(Knot { t: t_new, y, f });
                    t = t_new;
                    loop {
                        let ts = next_sample as f64 * cfg.dense_dt;
                        if ts > t || ts >= t_max * (1.0 - 1e-12) {
                            break;
                        }
                        traj.times.push(ts);
                        traj.states.push(traj.interpolate(ts));
                        next_sample += 1;
                    }
                    let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                    fac = fac.clamp(0.2, if last_rejected { 1.0 } else { 5.0 });
                    h = (h * fac).min(max_step);
                    last_rejected = false;
                } else {
                    st.stats.rejected += 1;
                    h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                    last_rejected = true;
                }
            }
        }
    }
    let end = traj.knots.last().unwrap();
    if *traj.times.last().unwrap() < end.t {
        traj.times.push(end.t);
        traj.states.push(end.y.clone());
    }
    traj.stats = st.stats;
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Averages

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AverageMode {
    Cesaro,
    /// One period `τ` starting at `t = 0`.
    Periodic(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageResult {
    pub value: f64,
    /// Average over the first half of the interval (Cesàro mode only).
    pub half_value: Option<f64>,
    /// `(G(end) − G(start))/T` when filled in by the virial report.
    pub boundary_term: Option<f64>,
    pub converged: bool,
    pub bound_warning: bool,
    /// Length of the averaging interval.
    pub span: f64,
}

/// Trapezoid integral of sampled values.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Trapezoid average `(1/T)∫F`, accumulated as deviations from the first
/// sample so that constants average exactly.
pub fn average_samples(times: &[f64], values: &[f64]) -> f64 {
    if times.len() < 2 {
        return values.first().copied().unwrap_or(f64::NAN);
    }
    let f0 = values[0];
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, v) in times.windows(2).zip(values.windows(2)) {
        let dt = t[1] - t[0];
        num += 0.5 * dt * ((v[0] - f0) + (v[1] - f0));
        den += dt;
    }
    f0 + num / den
}

/// Running averages `(1/t_k)∫_0^{t_k} F` at every sample (first entry `F(0)`).
pub fn running_average(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let Some(&f0) = values.first() else {
        return out;
    };
    let mut acc = 0.0;
    out.push(f0);
    for k in 1..times.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * ((values[k] - f0) + (values[k - 1] - f0));
        out.push(f0 + acc / (times[k] - times[0]));
    }
    out
}

fn half_average(f: &dyn Fn(&[f64]) -> Result<f64>, traj: &Trajectory, values: &[f64]) -> Result<f64> {
    let half = 0.5 * traj.span();
    let n = traj.times.partition_point(|&t| t <= half);
    let mut times = traj.times[..n].to_vec();
    let mut vals = values[..n].to_vec();
    if *times.last().unwrap() < half {
        times.push(half);
        vals.push(f(&traj.interpolate(half))?);
    }
    Ok(average_samples(&times, &vals))
}

/// Uniform grid over one period with at least as many points as the dense samples.
fn period_grid(traj: &Trajectory, tau: f64) -> Vec<f64> {
    let dt = if traj.times.len() > 1 { traj.times[1] - traj.times[0] } else { tau };
    let n = ((tau / dt).ceil() as usize).max(16);
    (0..=n).map(|j| if j == n { tau } else { tau * j as f64 / n as f64 }).collect()
}

/// `⟨F⟩` over a trajectory. Cesàro mode uses the dense samples on `[0, T]`
/// and compares against `[0, T/2]`; periodic mode resamples one period on a
/// uniform grid through the dense output.
pub fn time_average(
    f: &dyn Fn(&[f64]) -> Result<f64>,
    traj: &Trajectory,
    mode: AverageMode,
    convergence_tol: f64,
) -> Result<AverageResult> {
    match mode {
        AverageMode::Cesaro => {
            let values = traj.states.iter().map(|s| f(s)).collect::<Result<Vec<_>>>()?;
            let value = average_samples(&traj.times, &values);
            let half = half_average(f, traj, &values)?;
            Ok(AverageResult {
                value,
                half_value: Some(half),
                boundary_term: None,
                converged: (value - half).abs() <= convergence_tol * (1.0 + value.abs()),
                bound_warning: false,
                span: traj.span(),
            })
        }
        AverageMode::Periodic(tau) => {
            let span = traj.span();
            if !(tau > 0.0) || tau > span * (1.0 + 1e-12) {
                return Err(Error::PeriodExceedsSpan { period: tau, span });
            }
            let grid = period_grid(traj, tau);
            let values = grid.iter().map(|&t| f(&traj.interpolate(t))).collect::<Result<Vec<_>>>()?;
            Ok(AverageResult {
                value: average_samples(&grid, &values),
                half_value: None,
                boundary_term: None,
                converged: true,
                bound_warning: false,
                span: tau,
            })
        }
    }
}

fn wrapped_diff(a: &[f64], b: &[f64], angular: &[usize]) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let d = x - y;
            if angular.contains(&i) {
                d - two_pi * (d / two_pi).round()
            } else {
                d
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// First return of the state to an `eps·(1 + |s0|)` ball around the initial
/// state after leaving it, refined by bisection on `(s(t) − s0)·ṡ(t)`.
/// Components listed in `angular` are compared modulo `2π`.
pub fn detect_period(traj: &Trajectory, eps: f64, angular: &[usize]) -> Option<f64> {
    if traj.times.len() < 3 {
        return None;
    }
    let s0 = &traj.states[0];
    let tol = eps * (1.0 + norm(s0));
    let dist = |s: &[f64]| norm(&wrapped_diff(s, s0, angular));
    let d: Vec<f64> = traj.states.iter().map(|s| dist(s)).collect();
    let departed = d.iter().position(|&x| x > 10.0 * tol)?;
    let g = |t: f64| {
        let diff = wrapped_diff(&traj.interpolate(t), s0, angular);
        diff.iter().zip(traj.derivative(t)).map(|(a, b)| a * b).sum::<f64>()
    };
    for k in departed.max(1)..traj.times.len() - 1 {
        if !(d[k] <= d[k - 1] && d[k] <= d[k + 1]) {
            continue;
        }
        let dt = traj.times[k + 1] - traj.times[k - 1];
        let speed = norm(&traj.derivative(traj.times[k]));
        if d[k] > speed * dt + 10.0 * tol {
            continue;
        }
        let (mut lo, mut hi) = (traj.times[k - 1], traj.times[k + 1]);
        if g(lo) > 0.0 || g(hi) < 0.0 {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        let t = 0.5 * (lo + hi);
        if dist(&traj.interpolate(t)) < tol {
            return Some(t);
        }
    }
    None
}

/// Windowed growth test on `max|G|` over thirds of the run.
pub fn bound_warning(values: &[f64]) -> bool {
    if values.len() < 3 {
        return false;
    }
    let n = values.len();
    let window = |a: usize, b: usize| values[a..b].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (m1, m2, m3) = (window(0, n / 3), window(n / 3, 2 * n / 3), window(2 * n / 3, n));
    m2 > 1.01 * m1 + 1e-12 && m3 > 1.01 * m2 + 1e-12
}

// ---------------------------------------------------------------------------
// Virial reports

#[derive(Debug, Clone, Serialize)]
pub struct VirialEntry {
    pub name: String,
    pub cesaro: AverageResult,
    /// Average over one detected (or given) period.
    pub periodic: Option<f64>,
    /// `(G(period) − G(0))/period` when a period is used.
    pub periodic_boundary_term: Option<f64>,
    pub boundary_term: f64,
    /// `|⟨integrand⟩_cesaro − boundary_term|`.
    pub residual: f64,
    /// Quadrature plus integration tolerance the residual is judged against.
    pub tolerance: f64,
    /// `residual ≤ 10 · tolerance`.
    pub consistent: bool,
    pub max_abs_g: f64,
    pub g_start: f64,
    pub g_end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Drift {
    pub name: String,
    pub initial: f64,
    pub max_abs_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VirialReport {
    pub span: f64,
    pub period: Option<f64>,
    pub entries: Vec<VirialEntry>,
    pub drifts: Vec<Drift>,
}

/// Quadrature and integration tolerance for the boundary-term identity:
/// `dt²/12 · max|F''| + (rtol + atol)(max|F| + N · 2 max|G|/T)` with `N`
/// accepted steps, so that per-step errors may accumulate linearly, plus a
/// summation roundoff floor.
pub fn identity_tolerance(times: &[f64], integrand: &[f64], max_abs_g: f64, rtol: f64, atol: f64, steps: u64) -> f64 {
    let span = *times.last().unwrap_or(&1.0);
    let mut f2: f64 = 0.0;
    for k in 1..times.len().saturating_sub(1) {
        let (h0, h1) = (times[k] - times[k - 1], times[k + 1] - times[k]);
        let second = 2.0 * (h0 * integrand[k + 1] - (h0 + h1) * integrand[k] + h1 * integrand[k - 1]) / (h0 * h1 * (h0 + h1));
        f2 = f2.max(second.abs());
    }
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let max_f = integrand.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let boundary = 2.0 * max_abs_g / span;
    let roundoff = times.len() as f64 * f64::EPSILON * (max_f + boundary);
    dt * dt / 12.0 * f2 + (rtol + atol) * (max_f + steps.max(1) as f64 * boundary) + roundoff
}

pub fn conserved_drifts(dynamics: &Dynamics, traj: &Trajectory) -> Result<Vec<Drift>> {
    dynamics
        .conserved
        .iter()
        .map(|c| {
            let q0 = (c.eval)(&dynamics.split(&traj.states[0])?);
            let mut worst: f64 = 0.0;
            for s in &traj.states {
                worst = worst.max(((c.eval)(&dynamics.split(s)?) - q0).abs());
            }
            Ok(Drift {
                name: c.name.clone(),
                initial: q0,
                max_abs_drift: worst,
            })
        })
        .collect()
}

/// Per registered virial function: Cesàro and periodic averages of the
/// integrand, boundary term, self-consistency residual and boundedness flag.
pub fn virial_report(
    dynamics: &Dynamics,
    names: &[String],
    traj: &Trajectory,
    period: Option<f64>,
    convergence_tol: f64,
    cfg: &IntegratorSettings,
) -> Result<VirialReport> {
    let span = traj.span();
    let mut entries = Vec::with_capacity(names.len());
    for name in names {
        let v = dynamics
            .virial(name)
            .ok_or_else(|| Error::Config(format!("unknown virial function `{name}`")))?;
        let integrand = |s: &[f64]| dynamics.virial_integrand(v, s);
        let g = |s: &[f64]| dynamics.virial_value(v, s);
        let f_vals = traj.states.iter().map(|s| integrand(s)).collect::<Result<Vec<_>>>()?;
        let g_vals = traj.states.iter().map(|s| g(s)).collect::<Result<Vec<_>>>()?;
        let g_start = g_vals[0];
        let g_end = *g_vals.last().unwrap();
        let boundary = (g_end - g_start) / span;
        let value = average_samples(&traj.times, &f_vals);
        let half = half_average(&integrand, traj, &f_vals)?;
        let warn = bound_warning(&g_vals);
        let cesaro = AverageResult {
            value,
            half_value: Some(half),
            boundary_term: Some(boundary),
            converged: (value - half).abs() <= convergence_tol * (1.0 + value.abs()),
            bound_warning: warn,
            span,
        };
        let (periodic, periodic_boundary_term) = match period {
            Some(tau) => {
                let avg = time_average(&integrand, traj, AverageMode::Periodic(tau), convergence_tol)?;
                let gt = g(&traj.interpolate(tau))?;
                (Some(avg.value), Some((gt - g_start) / tau))
            }
            None => (None, None),
        };
        let max_abs_g = g_vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tolerance = identity_tolerance(&traj.times, &f_vals, max_abs_g, cfg.rtol, cfg.atol, traj.stats.accepted);
        let residual = (value - boundary).abs();
        entries.push(VirialEntry {
            name: name.clone(),
            cesaro,
            periodic,
            periodic_boundary_term,
            boundary_term: boundary,
            residual,
            tolerance,
            consistent: residual <= 10.0 * tolerance,
            max_abs_g,
            g_start,
            g_end,
        });
    }
    Ok(VirialReport {
        span,
        period,
        entries,
        drifts: conserved_drifts(dynamics, traj)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator() -> FnField<impl Fn(&[f64]) -> Vec<f64>> {
        FnField {
            dim: 2,
            f: |y: &[f64]| vec![y[1], -y[0]],
        }
    }

    fn settings(t_max: f64, dense_dt: f64, rtol: f64) -> IntegratorSettings {
        IntegratorSettings {
            rtol,
            atol: rtol * 1e-2,
            t_max,
            dense_dt,
            ..Default::default()
        }
    }

    #[test]
    fn settings_validation() {
        assert!(IntegratorSettings::default().validate().is_ok());
        assert!(settings(1.0, 0.1, 1e-8).validate().is_err());
        assert!(settings(1.0, 0.01, 0.0).validate().is_err());
        let mut s = settings(1.0, 0.01, 1e-8);
        s.atol = -1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn constant_field() {
        let f = FnField { dim: 2, f: |_: &[f64]| vec![0.0, 0.0] };
        let tr = integrate(&f, &[3.0, -1.0], &settings(5.0, 0.05, 1e-8)).unwrap();
        assert!(tr.states.iter().all(|s| (s[0] - 3.0).abs() < 1e-15 && (s[1] + 1.0).abs() < 1e-15));
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(*tr.times.last().unwrap(), 5.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn oscillator_returns() {
        let tr = integrate(&oscillator(), &[1.0, 0.0], &settings(2.0 * PI, 0.01, 1e-12)).unwrap();
        let end = tr.states.last().unwrap();
        assert!((end[0] - 1.0).abs() < 1e-8 && end[1].abs() < 1e-8, "{end:?}");
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[0] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn oscillator_period() {
        let tr = integrate(&oscillator(), &[1.0, 0.0], &settings(15.0, 0.01, 1e-11)).unwrap();
        let tau = detect_period(&tr, 1e-6, &[]).unwrap();
        assert!((tau - 2.0 * PI).abs() < 1e-6, "{tau}");
    }

    #[test]
    fn drift_has_no_period() {
        let f = FnField { dim: 1, f: |_: &[f64]| vec![1.0] };
        let tr = integrate(&f, &[0.0], &settings(10.0, 0.01, 1e-8)).unwrap();
        assert_eq!(detect_period(&tr, 1e-6, &[]), None);
    }

    #[test]
    fn guard_trips() {
        struct Fall;
        impl VectorField for Fall {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, _y: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![-1.0])
            }
            fn in_domain(&self, y: &[f64]) -> bool {
                y[0] >= 0.5
            }
        }
        let tr = integrate(&Fall, &[1.0], &settings(2.0, 0.01, 1e-8)).unwrap();
        assert!(tr.guard_tripped);
        assert!(tr.span() < 0.5 + 1e-6 && tr.span() > 0.49);
    }

    #[test]
    fn averages() {
        let f = FnField { dim: 1, f: |_: &[f64]| vec![1.0] };
        let tr = integrate(&f, &[0.0], &settings(2.0 * PI, 2.0 * PI / 1000.0, 1e-10)).unwrap();
        let three = time_average(&|_| Ok(3.0), &tr, AverageMode::Cesaro, 1e-3).unwrap();
        assert_eq!(three.value, 3.0);
        assert!(three.converged);
        let sin = time_average(&|s| Ok(s[0].sin()), &tr, AverageMode::Periodic(2.0 * PI), 1e-3).unwrap();
        assert!(sin.value.abs() < 1e-6);
        assert!(matches!(
            time_average(&|s| Ok(s[0]), &tr, AverageMode::Periodic(10.0), 1e-3),
            Err(Error::PeriodExceedsSpan { .. })
        ));
        let lin = time_average(&|s| Ok(s[0]), &tr, AverageMode::Cesaro, 1e-3).unwrap();
        assert!((lin.value - PI).abs() < 1e-9);
        assert!(!lin.converged);
    }

    #[test]
    fn running_average_of_constant() {
        let t = [0.0, 0.5, 1.0, 2.0];
        assert_eq!(running_average(&t, &[2.0; 4]), vec![2.0; 4]);
    }

    #[test]
    fn bound_monitor() {
        let grow: Vec<f64> = (0..300).map(|i| i as f64).collect();
        assert!(bound_warning(&grow));
        let osc: Vec<f64> = (0..300).map(|i| (i as f64 * 0.3).sin()).collect();
        assert!(!bound_warning(&osc));
    }

    #[test]
    fn order_check() {
        let err = |rtol: f64| {
            let tr = integrate(&oscillator(), &[1.0, 0.0], &settings(10.0, 0.1, rtol)).unwrap();
            let e = tr.states.last().unwrap();
            ((e[0] - 10f64.cos()).powi(2) + (e[1] + 10f64.sin()).powi(2)).sqrt()
        };
        let (coarse, fine) = (err(1e-6), err(1e-8));
        assert!(coarse / fine >= 10f64.powf(1.5), "{coarse:e} {fine:e}");
    }
}
