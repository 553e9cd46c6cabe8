//! Adaptive Dormand-Prince 5(4) integration of scalar ODEs.
//!
//! Every breakpoint of the right-hand side inside the integration range is
//! a mandatory step end, so no step ever straddles a jump. At the upper end
//! of each inter-breakpoint segment the right-hand side is evaluated with
//! its left limit.
//!
//! Finite-time escape is detected against a caller-supplied bound `m`:
//! forward runs stop once `y < -(m + margin)`, backward runs once
//! `y > m + margin`. The threshold crossing is located on the dense output,
//! and the blow-up time itself is found by continuing `u = 1/y` through
//! `u = 0`.

use serde::Serialize;
use thiserror::Error;

use crate::coeffs::{normalize_times, PiecewisePath, ProblemSpec, Side};

/// The `epsilon` in `-m^2 + |q| m + |p| <= -epsilon`.
pub const ESCAPE_EPSILON: f64 = 0.76;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvpError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("invalid integrator parameters: {0}")]
    InvalidParams(String),
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
}

/// A scalar right-hand side `f(t, y)` with known jump times.
pub trait ScalarRhs: Sync {
    /// `f(t, y)`, using the one-sided coefficient value at a jump.
    fn eval(&self, t: f64, y: f64, side: Side) -> f64;

    /// Jump times strictly inside `(lo, hi)`.
    fn breakpoints(&self, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Right-hand side of `u = 1/y`, i.e. `-u^2 f(t, 1/u)`. The default
    /// assumes a leading `-y^2` term, so the value at `u = 0` is `1`.
    fn reciprocal(&self, t: f64, u: f64, side: Side) -> f64 {
        if u.abs() < 1e-100 {
            1.0
        } else {
            -u * u * self.eval(t, 1.0 / u, side)
        }
    }
}

impl ScalarRhs for ProblemSpec {
    #[inline]
    fn eval(&self, t: f64, y: f64, side: Side) -> f64 {
        self.rhs_value(t, y, side)
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = self.transition.path().breakpoints(lo, hi);
        out.extend(self.forcing.breakpoints(lo, hi));
        normalize_times(&mut out);
        out
    }

    fn reciprocal(&self, t: f64, u: f64, side: Side) -> f64 {
        let g = self.transition.path().eval_side(t, side);
        let p = self.forcing.eval_side(t, side) + self.offset;
        let a = 1.0 - g * u;
        a * a - p * u * u
    }
}

/// A closure right-hand side whose jumps are those of `jumps`.
pub struct FnRhs<F> {
    f: F,
    jumps: Vec<PiecewisePath>,
}

impl<F: Fn(f64, f64, Side) -> f64 + Sync> FnRhs<F> {
    pub fn new(f: F, jumps: Vec<PiecewisePath>) -> Self {
        FnRhs { f, jumps }
    }
}

impl<F: Fn(f64, f64, Side) -> f64 + Sync> ScalarRhs for FnRhs<F> {
    fn eval(&self, t: f64, y: f64, side: Side) -> f64 {
        (self.f)(t, y, side)
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.jumps.iter().flat_map(|p| p.breakpoints(lo, hi)).collect();
        normalize_times(&mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IvpParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub escape_margin: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IvpParams {
    fn default() -> Self {
        IvpParams {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            escape_margin: 0.1,
            max_step: 1.0,
            max_steps: 20_000_000,
        }
    }
}

impl IvpParams {
    pub fn validate(&self) -> Result<(), IvpError> {
        let bad = |m: &str| Err(IvpError::InvalidParams(m.to_string()));
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return bad("rel_tol must be positive");
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return bad("abs_tol must be positive");
        }
        if !(self.escape_margin >= 0.0 && self.escape_margin.is_finite()) {
            return bad("escape_margin must be nonnegative");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    /// Same settings with both tolerances scaled by `factor`.
    pub fn scaled_tolerances(&self, factor: f64) -> Self {
        IvpParams {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeDirection {
    /// `y -> -inf` forward in time.
    Below,
    /// `y -> +inf` backward in time.
    Above,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Escape {
    /// Blow-up time of the solution.
    pub t_escape: f64,
    /// First time the escape threshold `m + margin` was crossed.
    pub t_threshold: f64,
    pub direction: EscapeDirection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Terminal {
    Completed,
    Escaped(Escape),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct DenseStep {
    t0: f64,
    h: f64,
    r: [f64; 5],
}

impl DenseStep {
    #[inline]
    fn eval(&self, t: f64) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))
    }
}

/// A numerical solution with continuous dense output between nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    steps: Vec<DenseStep>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_completed(&self) -> bool {
        self.terminal == Terminal::Completed
    }

    pub fn escape(&self) -> Option<Escape> {
        match self.terminal {
            Terminal::Escaped(e) => Some(e),
            Terminal::Completed => None,
        }
    }

    pub fn is_forward(&self) -> bool {
        self.times.len() < 2 || self.times[1] > self.times[0]
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has a start node")
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("trajectory has a start node")
    }

    /// `(min, max)` of the covered time range.
    pub fn span(&self) -> (f64, f64) {
        let (a, b) = (self.t_start(), self.t_end());
        (a.min(b), a.max(b))
    }

    pub fn covers(&self, t: f64) -> bool {
        let (lo, hi) = self.span();
        t >= lo && t <= hi
    }

    /// Dense-output value at `t`, or `None` outside the covered range.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if !self.covers(t) {
            return None;
        }
        if self.steps.is_empty() {
            return Some(self.values[0]);
        }
        let forward = self.is_forward();
        // index of the first node strictly beyond t in the run direction
        let k = self.times.partition_point(|&s| if forward { s <= t } else { s >= t });
        if k == 0 {
            return Some(self.values[0]);
        }
        if k >= self.times.len() {
            return Some(self.last_value());
        }
        if self.times[k - 1] == t {
            return Some(self.values[k - 1]);
        }
        Some(self.steps[k - 1].eval(t))
    }
}

#[derive(Clone, Copy)]
struct StepOut {
    t0: f64,
    h: f64,
    y1: f64,
    dense: DenseStep,
}

enum Flow {
    Continue,
    Stop,
}

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
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrates through the mandatory `nodes` (ordered in the run direction,
/// the last one being the final time), handing each accepted step to `on_step`.
fn drive<F, G>(f: &F, t_start: f64, y_start: f64, nodes: &[f64], p: &IvpParams, mut on_step: G) -> Result<(), IvpError>
where
    F: Fn(f64, f64, Side) -> f64,
    G: FnMut(&StepOut) -> Flow,
{
    let dir = if nodes.last().copied().unwrap_or(t_start) >= t_start {
        1.0
    } else {
        -1.0
    };
    let mut t = t_start;
    let mut y = y_start;
    let mut n_steps = 0usize;

    for &b in nodes {
        let seg_hi = t.max(b);
        let side = |s: f64| if s >= seg_hi { Side::Left } else { Side::Right };
        // each segment is a fresh initial value problem, so a run through a
        // node matches two runs chained at it
        let mut k1 = f(t, y, side(t));
        let mut h_prop = initial_step(f, t, y, k1, dir, (b - t).abs(), p, side(t));
        let mut facold = 1e-4_f64;
        while t != b {
            let remaining = (b - t).abs();
            let mut h_abs = h_prop.min(p.max_step);
            let mut last = false;
            if h_abs >= remaining * 0.999_999 {
                h_abs = remaining;
                last = true;
            }
            let h = dir * h_abs;
            let t_new = if last { b } else { t + h };
            let h = t_new - t;

            let k2 = f(t + C2 * h, y + h * A21 * k1, side(t + C2 * h));
            let k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2), side(t + C3 * h));
            let k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3), side(t + C4 * h));
            let k5 = f(
                t + C5 * h,
                y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
                side(t + C5 * h),
            );
            let k6 = f(
                t_new,
                y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                side(t_new),
            );
            let y1 = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            let k7 = f(t_new, y1, side(t_new));
            let err_est = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let sk = p.abs_tol + p.rel_tol * y.abs().max(y1.abs());
            let mut err = (err_est / sk).abs();
            if !err.is_finite() || !y1.is_finite() {
                err = 1e10;
            }

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                facold = err.max(1e-4);
                let ydiff = y1 - y;
                let bspl = h * k1 - ydiff;
                let dense = DenseStep {
                    t0: t,
                    h,
                    r: [
                        y,
                        ydiff,
                        bspl,
                        ydiff - h * k7 - bspl,
                        h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                    ],
                };
                let out = StepOut { t0: t, h, y1, dense };
                n_steps += 1;
                if let Flow::Stop = on_step(&out) {
                    return Ok(());
                }
                if n_steps >= p.max_steps {
                    return Err(IvpError::TooManySteps {
                        t: t_new,
                        max_steps: p.max_steps,
                    });
                }
                h_prop = h.abs() / fac;
                t = t_new;
                y = y1;
                k1 = k7;
            } else {
                let shrink = (fac11 / SAFE).min(1.0 / FAC_MIN);
                h_prop = h.abs() / shrink;
                let floor = 1e3 * f64::EPSILON * t.abs().max(1.0);
                if h_prop < floor && h_prop < remaining {
                    return Err(IvpError::StepUnderflow { t, h: h_prop });
                }
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F: Fn(f64, f64, Side) -> f64>(
    f: &F,
    t: f64,
    y: f64,
    f0: f64,
    dir: f64,
    span: f64,
    p: &IvpParams,
    side: Side,
) -> f64 {
    let sk = p.abs_tol + p.rel_tol * y.abs();
    let dnf = (f0 / sk).abs();
    let dny = (y / sk).abs();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(p.max_step).min(span);
    let f1 = f(t + dir * h, y + dir * h * f0, side);
    let der2 = ((f1 - f0) / sk).abs() / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 {
        (1e-6_f64).max(h * 1e-3)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(p.max_step).max(1e-12)
}

/// Integrates `rhs` from `(t0, y0)` toward `t1`. Breakpoints of `rhs` and
/// the `extra_nodes` inside the range become step ends. With an escape
/// bound `m`, the run halts at the first crossing of `m + escape_margin`
/// in the divergent direction.
pub fn integrate<R: ScalarRhs + ?Sized>(
    rhs: &R,
    t0: f64,
    y0: f64,
    t1: f64,
    extra_nodes: &[f64],
    escape_bound: Option<f64>,
    params: &IvpParams,
) -> Result<Trajectory, IvpError> {
    params.validate()?;
    if !(t0.is_finite() && t1.is_finite() && y0.is_finite()) {
        return Err(IvpError::InvalidParams("initial data must be finite".into()));
    }
    if t0 == t1 {
        return Err(IvpError::InvalidParams("t0 and t1 coincide".into()));
    }
    let forward = t1 > t0;
    let (lo, hi) = if forward { (t0, t1) } else { (t1, t0) };
    let mut nodes = rhs.breakpoints(lo, hi);
    nodes.extend(extra_nodes.iter().copied().filter(|&s| s > lo && s < hi));
    normalize_times(&mut nodes);
    nodes.retain(|&s| s > lo && s < hi);
    if !forward {
        nodes.reverse();
    }
    nodes.push(t1);

    let threshold = escape_bound.map(|m| m + params.escape_margin);
    let beyond = |y: f64| match threshold {
        Some(thr) if forward => y < -thr,
        Some(thr) => y > thr,
        None => false,
    };

    let mut traj = Trajectory {
        times: vec![t0],
        values: vec![y0],
        steps: Vec::new(),
        terminal: Terminal::Completed,
    };
    let mut crossing: Option<(f64, f64)> = None;
    if beyond(y0) {
        crossing = Some((t0, y0));
    } else {
        let f = |t: f64, y: f64, s: Side| rhs.eval(t, y, s);
        drive(&f, t0, y0, &nodes, params, |st| {
            if beyond(st.y1) {
                let thr = threshold.expect("escape threshold set");
                let target = if forward { -thr } else { thr };
                let tc = bisect_time(&st.dense, st.t0, st.t0 + st.h, beyond, params);
                traj.times.push(tc);
                traj.values.push(target);
                traj.steps.push(st.dense);
                crossing = Some((tc, target));
                Flow::Stop
            } else {
                traj.times.push(st.t0 + st.h);
                traj.values.push(st.y1);
                traj.steps.push(st.dense);
                Flow::Continue
            }
        })?;
    }

    if let Some((tc, yc)) = crossing {
        let t_escape = blowup_time(rhs, tc, yc, forward, params)?.unwrap_or(tc);
        traj.terminal = Terminal::Escaped(Escape {
            t_escape,
            t_threshold: tc,
            direction: if forward {
                EscapeDirection::Below
            } else {
                EscapeDirection::Above
            },
        });
    }
    Ok(traj)
}

/// First time in `[a, b]` (run direction) where the dense output satisfies
/// `past`, assuming it holds at `b` and not at `a`.
fn bisect_time<P: Fn(f64) -> bool>(dense: &DenseStep, a: f64, b: f64, past: P, p: &IvpParams) -> f64 {
    let (mut inside, mut outside) = (a, b);
    let tol = p.abs_tol.min(1e-12).max(4.0 * f64::EPSILON * b.abs().max(1.0));
    for _ in 0..200 {
        if (outside - inside).abs() <= tol {
            break;
        }
        let mid = 0.5 * (inside + outside);
        if past(dense.eval(mid)) {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    outside
}

/// Continues `u = 1/y` from the threshold crossing until `u` changes sign.
fn blowup_time<R: ScalarRhs + ?Sized>(
    rhs: &R,
    tc: f64,
    yc: f64,
    forward: bool,
    params: &IvpParams,
) -> Result<Option<f64>, IvpError> {
    const HORIZON: f64 = 1e3;
    let u0 = 1.0 / yc;
    let t_end = if forward { tc + HORIZON } else { tc - HORIZON };
    let (lo, hi) = if forward { (tc, t_end) } else { (t_end, tc) };
    let mut nodes = rhs.breakpoints(lo, hi);
    if !forward {
        nodes.reverse();
    }
    nodes.push(t_end);
    let crossed = |u: f64| u.signum() != u0.signum() || u == 0.0;
    let g = |t: f64, u: f64, s: Side| rhs.reciprocal(t, u, s);
    let tight = IvpParams {
        rel_tol: params.rel_tol.min(1e-10),
        abs_tol: params.abs_tol.min(1e-12),
        escape_margin: 0.0,
        max_step: params.max_step.min(0.1),
        max_steps: params.max_steps,
    };
    let mut found = None;
    drive(&g, tc, u0, &nodes, &tight, |st| {
        if crossed(st.y1) {
            found = Some(bisect_time(&st.dense, st.t0, st.t0 + st.h, crossed, &tight));
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    Ok(found)
}

/// Smallest `m` with `-m^2 + q_norm m + p_eff_norm <= -epsilon`.
pub fn escape_bound(q_norm: f64, p_eff_norm: f64, epsilon: f64) -> f64 {
    0.5 * (q_norm + (q_norm * q_norm + 4.0 * (p_eff_norm + epsilon)).sqrt())
}
