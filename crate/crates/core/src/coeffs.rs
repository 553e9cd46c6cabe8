//! Bounded piecewise-uniformly-continuous coefficients.
//!
//! A [`PiecewisePath`] is a closed-form expression tree over a small set of
//! primitives (constants, arctan ramps, sinusoid sums, sample-and-hold,
//! steps) combined with sums, products, scalings, time dilations and time
//! shifts. Paths are evaluated exactly; discontinuities only come from
//! [`PiecewisePath::SampleHold`] and [`PiecewisePath::Step`] nodes and are
//! enumerated on demand by [`PiecewisePath::breakpoints`].
//!
//! Evaluation is right-continuous. [`PiecewisePath::eval_side`] with
//! [`Side::Left`] returns the left limit, which the integrator uses at the
//! upper end of every inter-breakpoint segment.

use std::f64::consts::FRAC_2_PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for "numerically constant" tails.
pub const DELTA_TAIL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("invalid coefficient: {0}")]
    InvalidPath(String),
    #[error("tails do not converge within {delta}: {reason}")]
    NonConvergentTails { delta: f64, reason: String },
}

/// Which one-sided value to take at a discontinuity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// One term `amplitude * sin(frequency * t + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

/// A real coefficient on the whole line, built from closed-form pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PiecewisePath {
    Constant {
        value: f64,
    },
    /// `intercept + slope * t`; only bounded when the slope is zero.
    Affine {
        intercept: f64,
        slope: f64,
    },
    /// `(2/pi) * arctan(rate * t)`.
    Arctan {
        #[serde(default = "one")]
        rate: f64,
    },
    SinusoidSum {
        #[serde(default)]
        offset: f64,
        terms: Vec<Sinusoid>,
    },
    Sum {
        terms: Vec<PiecewisePath>,
    },
    Product {
        factors: Vec<PiecewisePath>,
    },
    Scale {
        factor: f64,
        inner: Box<PiecewisePath>,
    },
    /// `inner(rate * t)`.
    Dilate {
        rate: f64,
        inner: Box<PiecewisePath>,
    },
    /// `inner(t + by)`.
    Shift {
        by: f64,
        inner: Box<PiecewisePath>,
    },
    /// `inner(rate * j * period)` on `[j * period, (j + 1) * period)`.
    SampleHold {
        period: f64,
        #[serde(default = "one")]
        rate: f64,
        inner: Box<PiecewisePath>,
    },
    /// `levels[k]` where `k` counts the thresholds `<= t`.
    Step {
        levels: Vec<f64>,
        thresholds: Vec<f64>,
    },
}

/// Relative snapping distance used to decide that a time sits on a jump.
fn snap(t: f64) -> f64 {
    8.0 * f64::EPSILON * t.abs().max(1.0)
}

impl PiecewisePath {
    pub fn constant(value: f64) -> Self {
        PiecewisePath::Constant { value }
    }

    pub fn arctan() -> Self {
        PiecewisePath::Arctan { rate: 1.0 }
    }

    pub fn sinusoid_sum(offset: f64, terms: Vec<Sinusoid>) -> Self {
        PiecewisePath::SinusoidSum { offset, terms }
    }

    pub fn sum(terms: Vec<PiecewisePath>) -> Self {
        PiecewisePath::Sum { terms }
    }

    pub fn product(factors: Vec<PiecewisePath>) -> Self {
        PiecewisePath::Product { factors }
    }

    pub fn step(levels: Vec<f64>, thresholds: Vec<f64>) -> Self {
        PiecewisePath::Step { levels, thresholds }
    }

    pub fn scaled(self, factor: f64) -> Self {
        PiecewisePath::Scale {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn dilated(self, rate: f64) -> Self {
        PiecewisePath::Dilate {
            rate,
            inner: Box::new(self),
        }
    }

    pub fn shifted(self, by: f64) -> Self {
        PiecewisePath::Shift {
            by,
            inner: Box::new(self),
        }
    }

    pub fn sample_hold(self, period: f64, rate: f64) -> Self {
        PiecewisePath::SampleHold {
            period,
            rate,
            inner: Box::new(self),
        }
    }

    pub fn squared(self) -> Self {
        PiecewisePath::product(vec![self.clone(), self])
    }

    /// Checks parameters, the disperse-breakpoint structure of steps and
    /// holds, and that the path is bounded.
    pub fn validate(&self) -> Result<(), CoeffError> {
        let bad = |msg: String| Err(CoeffError::InvalidPath(msg));
        match self {
            PiecewisePath::Constant { value } if !value.is_finite() => {
                bad(format!("constant value {value} is not finite"))
            }
            PiecewisePath::Affine { intercept, slope } => {
                if !intercept.is_finite() || !slope.is_finite() {
                    bad("affine parameters must be finite".into())
                } else if *slope != 0.0 {
                    bad("affine path with nonzero slope is unbounded".into())
                } else {
                    Ok(())
                }
            }
            PiecewisePath::Arctan { rate } if !rate.is_finite() => bad(format!("arctan rate {rate} is not finite")),
            PiecewisePath::SinusoidSum { offset, terms } => {
                let finite = offset.is_finite()
                    && terms
                        .iter()
                        .all(|s| s.amplitude.is_finite() && s.frequency.is_finite() && s.phase.is_finite());
                if finite {
                    Ok(())
                } else {
                    bad("sinusoid parameters must be finite".into())
                }
            }
            PiecewisePath::Sum { terms } => terms.iter().try_for_each(|p| p.validate()),
            PiecewisePath::Product { factors } => factors.iter().try_for_each(|p| p.validate()),
            PiecewisePath::Scale { factor, inner } => {
                if !factor.is_finite() {
                    return bad(format!("scale factor {factor} is not finite"));
                }
                inner.validate()
            }
            PiecewisePath::Dilate { rate, inner } => {
                if !rate.is_finite() {
                    return bad(format!("dilation rate {rate} is not finite"));
                }
                inner.validate()
            }
            PiecewisePath::Shift { by, inner } => {
                if !by.is_finite() {
                    return bad(format!("shift {by} is not finite"));
                }
                inner.validate()
            }
            PiecewisePath::SampleHold { period, rate, inner } => {
                if !(period.is_finite() && *period > 0.0) {
                    return bad(format!("hold period must be positive, got {period}"));
                }
                if !rate.is_finite() {
                    return bad(format!("hold rate {rate} is not finite"));
                }
                inner.validate()
            }
            PiecewisePath::Step { levels, thresholds } => {
                if levels.len() != thresholds.len() + 1 {
                    return bad(format!(
                        "step needs one more level than thresholds ({} vs {})",
                        levels.len(),
                        thresholds.len()
                    ));
                }
                if levels.iter().chain(thresholds).any(|v| !v.is_finite()) {
                    return bad("step levels and thresholds must be finite".into());
                }
                if thresholds.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("step thresholds must be strictly increasing".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Right-continuous value at `t`.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_side(t, Side::Right)
    }

    /// One-sided value at `t`. Away from breakpoints both sides agree.
    pub fn eval_side(&self, t: f64, side: Side) -> f64 {
        match self {
            PiecewisePath::Constant { value } => *value,
            PiecewisePath::Affine { intercept, slope } => intercept + slope * t,
            PiecewisePath::Arctan { rate } => FRAC_2_PI * (rate * t).atan(),
            PiecewisePath::SinusoidSum { offset, terms } => terms
                .iter()
                .fold(*offset, |acc, s| acc + s.amplitude * (s.frequency * t + s.phase).sin()),
            PiecewisePath::Sum { terms } => terms.iter().map(|p| p.eval_side(t, side)).sum(),
            PiecewisePath::Product { factors } => factors.iter().map(|p| p.eval_side(t, side)).product(),
            PiecewisePath::Scale { factor, inner } => factor * inner.eval_side(t, side),
            PiecewisePath::Dilate { rate, inner } => {
                let side = if *rate < 0.0 { side.flip() } else { side };
                inner.eval_side(rate * t, side)
            }
            PiecewisePath::Shift { by, inner } => inner.eval_side(t + by, side),
            PiecewisePath::SampleHold { period, rate, inner } => {
                let j = hold_index(t, *period, side);
                inner.eval(rate * (j as f64) * period)
            }
            PiecewisePath::Step { levels, thresholds } => {
                let eps = snap(t);
                let k = match side {
                    Side::Right => thresholds.iter().take_while(|&&th| th <= t + eps).count(),
                    Side::Left => thresholds.iter().take_while(|&&th| th < t - eps).count(),
                };
                levels[k]
            }
        }
    }

    /// Discontinuity times strictly inside `(lo, hi)`, sorted and deduplicated.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if hi > lo {
            self.collect_breakpoints(lo, hi, &mut out);
            normalize_times(&mut out);
            out.retain(|&b| b > lo + snap(lo) && b < hi - snap(hi));
        }
        out
    }

    fn collect_breakpoints(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match self {
            PiecewisePath::Sum { terms } => terms.iter().for_each(|p| p.collect_breakpoints(lo, hi, out)),
            PiecewisePath::Product { factors } => factors.iter().for_each(|p| p.collect_breakpoints(lo, hi, out)),
            PiecewisePath::Scale { inner, .. } => inner.collect_breakpoints(lo, hi, out),
            PiecewisePath::Dilate { rate, inner } => {
                if *rate != 0.0 {
                    let (a, b) = ordered(rate * lo, rate * hi);
                    let mut inner_bps = Vec::new();
                    inner.collect_breakpoints(a, b, &mut inner_bps);
                    out.extend(inner_bps.into_iter().map(|x| x / rate));
                }
            }
            PiecewisePath::Shift { by, inner } => {
                let mut inner_bps = Vec::new();
                inner.collect_breakpoints(lo + by, hi + by, &mut inner_bps);
                out.extend(inner_bps.into_iter().map(|x| x - by));
            }
            PiecewisePath::SampleHold { period, .. } => {
                let first = (lo / period).floor() as i64;
                let last = (hi / period).ceil() as i64;
                out.extend(
                    (first..=last)
                        .map(|j| j as f64 * period)
                        .filter(|&b| b >= lo && b <= hi),
                );
            }
            PiecewisePath::Step { thresholds, .. } => {
                out.extend(thresholds.iter().copied().filter(|&b| b >= lo && b <= hi))
            }
            _ => {}
        }
    }

    /// Smallest gap between consecutive breakpoints in `(lo, hi)`, if at
    /// least two exist. Positive by construction of [`Self::breakpoints`].
    pub fn min_breakpoint_gap(&self, lo: f64, hi: f64) -> Option<f64> {
        self.breakpoints(lo, hi)
            .windows(2)
            .map(|w| w[1] - w[0])
            .reduce(f64::min)
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    fn constant_value(&self) -> Option<f64> {
        match self {
            PiecewisePath::Constant { value } => Some(*value),
            PiecewisePath::Affine { intercept, slope } if *slope == 0.0 => Some(*intercept),
            PiecewisePath::Arctan { rate } if *rate == 0.0 => Some(0.0),
            PiecewisePath::SinusoidSum { offset, terms } => terms.iter().try_fold(*offset, |acc, s| {
                if s.amplitude == 0.0 {
                    Some(acc)
                } else if s.frequency == 0.0 {
                    Some(acc + s.amplitude * s.phase.sin())
                } else {
                    None
                }
            }),
            PiecewisePath::Sum { terms } => terms.iter().map(|p| p.constant_value()).sum(),
            PiecewisePath::Product { factors } => factors.iter().map(|p| p.constant_value()).product(),
            PiecewisePath::Scale { factor, inner } => {
                if *factor == 0.0 {
                    Some(0.0)
                } else {
                    inner.constant_value().map(|v| factor * v)
                }
            }
            PiecewisePath::Dilate { rate, inner } => {
                if *rate == 0.0 {
                    Some(inner.eval(0.0))
                } else {
                    inner.constant_value()
                }
            }
            PiecewisePath::Shift { inner, .. } => inner.constant_value(),
            PiecewisePath::SampleHold { rate, inner, .. } => {
                if *rate == 0.0 {
                    Some(inner.eval(0.0))
                } else {
                    inner.constant_value()
                }
            }
            PiecewisePath::Step { levels, .. } => {
                let first = levels[0];
                levels.iter().all(|&l| l == first).then_some(first)
            }
            _ => None,
        }
    }

    /// An upper bound `B` on `sup |path|`. Exact for the primitives; sums
    /// and products use the triangle inequality after folding constants.
    pub fn sup_norm_bound(&self) -> f64 {
        if let Some(v) = self.constant_value() {
            return v.abs();
        }
        match self {
            PiecewisePath::Constant { value } => value.abs(),
            PiecewisePath::Affine { .. } => f64::INFINITY,
            PiecewisePath::Arctan { .. } => 1.0,
            PiecewisePath::SinusoidSum { offset, terms } => {
                let (constant, amplitude) = terms.iter().fold((*offset, 0.0), |(c, a), s| {
                    if s.frequency == 0.0 {
                        (c + s.amplitude * s.phase.sin(), a)
                    } else {
                        (c, a + s.amplitude.abs())
                    }
                });
                constant.abs() + amplitude
            }
            PiecewisePath::Sum { terms } => {
                let constant: f64 = terms.iter().filter_map(|p| p.constant_value()).sum();
                let varying: f64 = terms
                    .iter()
                    .filter(|p| !p.is_constant())
                    .map(|p| p.sup_norm_bound())
                    .sum();
                constant.abs() + varying
            }
            PiecewisePath::Product { factors } => factors.iter().map(|p| p.sup_norm_bound()).product(),
            PiecewisePath::Scale { factor, inner } => factor.abs() * inner.sup_norm_bound(),
            PiecewisePath::Dilate { inner, .. }
            | PiecewisePath::Shift { inner, .. }
            | PiecewisePath::SampleHold { inner, .. } => inner.sup_norm_bound(),
            PiecewisePath::Step { levels, .. } => levels.iter().fold(0.0_f64, |m, l| m.max(l.abs())),
        }
    }

    /// Limits at `-inf` and `+inf`, when they exist in closed form.
    pub fn tail_limits(&self) -> Option<(f64, f64)> {
        if let Some(v) = self.constant_value() {
            return Some((v, v));
        }
        match self {
            PiecewisePath::Arctan { rate } => {
                let s = rate.signum();
                Some((-s, s))
            }
            PiecewisePath::Sum { terms } => terms
                .iter()
                .map(|p| p.tail_limits())
                .try_fold((0.0, 0.0), |(a, b), l| l.map(|(x, y)| (a + x, b + y))),
            PiecewisePath::Product { factors } => factors
                .iter()
                .map(|p| p.tail_limits())
                .try_fold((1.0, 1.0), |(a, b), l| l.map(|(x, y)| (a * x, b * y))),
            PiecewisePath::Scale { factor, inner } => inner.tail_limits().map(|(a, b)| (factor * a, factor * b)),
            PiecewisePath::Dilate { rate, inner } | PiecewisePath::SampleHold { rate, inner, .. } => {
                let (a, b) = inner.tail_limits()?;
                if *rate > 0.0 {
                    Some((a, b))
                } else {
                    Some((b, a))
                }
            }
            PiecewisePath::Shift { inner, .. } => inner.tail_limits(),
            PiecewisePath::Step { levels, .. } => Some((levels[0], levels[levels.len() - 1])),
            _ => None,
        }
    }

    /// Times `(t_lo, t_hi)` such that the path stays within `delta` of its
    /// lower limit for `t < t_lo` and of its upper limit for `t >= t_hi`.
    /// Infinite values mean "everywhere" (`t_lo = +inf`, `t_hi = -inf`).
    pub fn settle_times(&self, delta: f64) -> Option<(f64, f64)> {
        const EVERYWHERE: (f64, f64) = (f64::INFINITY, f64::NEG_INFINITY);
        if self.is_constant() {
            return Some(EVERYWHERE);
        }
        if !(delta > 0.0) {
            return None;
        }
        match self {
            PiecewisePath::Arctan { rate } => {
                if delta >= 2.0 {
                    return Some(EVERYWHERE);
                }
                let tau = (std::f64::consts::FRAC_PI_2 * (1.0 - delta)).tan() / rate.abs();
                Some((-tau, tau))
            }
            PiecewisePath::Sum { terms } => {
                let varying: Vec<_> = terms.iter().filter(|p| !p.is_constant()).collect();
                let share = delta / varying.len() as f64;
                varying.iter().try_fold(EVERYWHERE, |(lo, hi), p| {
                    let (a, b) = p.settle_times(share)?;
                    Some((lo.min(a), hi.max(b)))
                })
            }
            PiecewisePath::Product { factors } => {
                let n = factors.len() as f64;
                let m = factors.iter().map(|p| p.sup_norm_bound()).fold(1.0_f64, f64::max);
                let share = delta / (n * m.powf(n - 1.0));
                factors.iter().try_fold(EVERYWHERE, |(lo, hi), p| {
                    let (a, b) = p.settle_times(share)?;
                    Some((lo.min(a), hi.max(b)))
                })
            }
            PiecewisePath::Scale { factor, inner } => inner.settle_times(delta / factor.abs()),
            PiecewisePath::Dilate { rate, inner } => {
                let (a, b) = inner.settle_times(delta)?;
                if *rate > 0.0 {
                    Some((a / rate, b / rate))
                } else {
                    Some((b / rate, a / rate))
                }
            }
            PiecewisePath::Shift { by, inner } => {
                let (a, b) = inner.settle_times(delta)?;
                Some((a - by, b - by))
            }
            PiecewisePath::SampleHold { period, rate, inner } => {
                // The sample time j*period lies in (t - period, t].
                let (a, b) = inner.settle_times(delta)?;
                if *rate > 0.0 {
                    Some((a / rate, b / rate + period))
                } else {
                    Some((b / rate, a / rate + period))
                }
            }
            PiecewisePath::Step { levels, thresholds } => {
                let (first, last) = (levels[0], levels[levels.len() - 1]);
                let t_lo = thresholds
                    .iter()
                    .zip(&levels[1..])
                    .find(|(_, &l)| (l - first).abs() > delta)
                    .map(|(&th, _)| th)
                    .unwrap_or(f64::INFINITY);
                let t_hi = thresholds
                    .iter()
                    .zip(&levels[..levels.len() - 1])
                    .rev()
                    .find(|(_, &l)| (l - last).abs() > delta)
                    .map(|(&th, _)| th)
                    .unwrap_or(f64::NEG_INFINITY);
                Some((t_lo, t_hi))
            }
            _ => None,
        }
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Index `j` with `t` in `[j*period, (j+1)*period)` (right side) or in
/// `(j*period, (j+1)*period]` (left side), consistent with the breakpoint
/// values `j as f64 * period`.
fn hold_index(t: f64, period: f64, side: Side) -> i64 {
    let mut j = (t / period).floor() as i64;
    let eps = snap(t);
    if ((j + 1) as f64) * period <= t + eps {
        j += 1;
    }
    if (j as f64) * period > t + eps {
        j -= 1;
    }
    if side == Side::Left && ((j as f64) * period - t).abs() <= eps {
        j -= 1;
    }
    j
}

/// Sorts times and merges entries closer than the snapping distance.
pub(crate) fn normalize_times(times: &mut Vec<f64>) {
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup_by(|b, a| (*b - *a).abs() <= snap(*a));
}

/// Rate of a transition, including the two step limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    Finite(f64),
    PosInf,
    NegInf,
}

impl Rate {
    pub fn is_infinite(self) -> bool {
        !matches!(self, Rate::Finite(_))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Rate::Finite(c) => c,
            Rate::PosInf => f64::INFINITY,
            Rate::NegInf => f64::NEG_INFINITY,
        }
    }
}

impl From<f64> for Rate {
    fn from(c: f64) -> Self {
        if c == f64::INFINITY {
            Rate::PosInf
        } else if c == f64::NEG_INFINITY {
            Rate::NegInf
        } else {
            Rate::Finite(c)
        }
    }
}

impl std::fmt::Display for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rate::Finite(c) => write!(f, "{c}"),
            Rate::PosInf => f.write_str("inf"),
            Rate::NegInf => f.write_str("-inf"),
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Rate::Finite(c) => s.serialize_f64(*c),
            Rate::PosInf => s.serialize_str("inf"),
            Rate::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(c) => Ok(Rate::Finite(c)),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(Rate::PosInf),
                "-inf" | "-infinity" => Ok(Rate::NegInf),
                other => Err(serde::de::Error::custom(format!(
                    "rate must be a number, \"inf\" or \"-inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionConfig {
    base: PiecewisePath,
    rate: Rate,
    #[serde(default)]
    hold: f64,
}

/// The rate/hold family built on a base transition `Gamma`: the value at
/// `t` is `Gamma(c*j*h)` for `t` in `[j*h, (j+1)*h)`, `Gamma(c*t)` when
/// `h = 0`, and a two- or three-level step when the rate is infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionConfig", into = "TransitionConfig")]
pub struct TransitionSpec {
    base: PiecewisePath,
    gamma_minus: f64,
    gamma_zero: f64,
    gamma_plus: f64,
    rate: Rate,
    hold: f64,
    realized: PiecewisePath,
}

impl TryFrom<TransitionConfig> for TransitionSpec {
    type Error = CoeffError;
    fn try_from(c: TransitionConfig) -> Result<Self, Self::Error> {
        TransitionSpec::new(c.base, c.rate, c.hold)
    }
}

impl From<TransitionSpec> for TransitionConfig {
    fn from(s: TransitionSpec) -> Self {
        TransitionConfig {
            base: s.base,
            rate: s.rate,
            hold: s.hold,
        }
    }
}

impl TransitionSpec {
    pub fn new(base: PiecewisePath, rate: Rate, hold: f64) -> Result<Self, CoeffError> {
        base.validate()?;
        if !(hold.is_finite() && hold >= 0.0) {
            return Err(CoeffError::InvalidPath(format!(
                "hold must be finite and nonnegative, got {hold}"
            )));
        }
        if let Rate::Finite(c) = rate {
            if !c.is_finite() {
                return Err(CoeffError::InvalidPath(format!("rate {c} is not finite")));
            }
        }
        let (gamma_minus, gamma_plus) = limits_checked(&base, DELTA_TAIL)?;
        let gamma_zero = base.eval(0.0);
        let realized = match rate {
            Rate::Finite(0.0) => PiecewisePath::constant(gamma_zero),
            Rate::Finite(c) if hold == 0.0 => {
                if c == 1.0 {
                    base.clone()
                } else {
                    base.clone().dilated(c)
                }
            }
            Rate::Finite(c) => base.clone().sample_hold(hold, c),
            Rate::PosInf | Rate::NegInf => {
                let (from, to) = if rate == Rate::PosInf {
                    (gamma_minus, gamma_plus)
                } else {
                    (gamma_plus, gamma_minus)
                };
                if hold == 0.0 {
                    PiecewisePath::step(vec![from, to], vec![0.0])
                } else {
                    PiecewisePath::step(vec![from, gamma_zero, to], vec![0.0, hold])
                }
            }
        };
        Ok(TransitionSpec {
            base,
            gamma_minus,
            gamma_zero,
            gamma_plus,
            rate,
            hold,
            realized,
        })
    }

    /// Continuous transition `t -> base(t)` (rate 1, no hold).
    pub fn continuous(base: PiecewisePath) -> Result<Self, CoeffError> {
        TransitionSpec::new(base, Rate::Finite(1.0), 0.0)
    }

    pub fn with_rate_hold(&self, rate: Rate, hold: f64) -> Result<Self, CoeffError> {
        TransitionSpec::new(self.base.clone(), rate, hold)
    }

    pub fn base(&self) -> &PiecewisePath {
        &self.base
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    pub fn hold(&self) -> f64 {
        self.hold
    }

    /// The realized coefficient `t -> Gamma_c^h(t)`.
    pub fn path(&self) -> &PiecewisePath {
        &self.realized
    }

    /// `(gamma_minus, gamma_zero, gamma_plus)`.
    pub fn limits(&self) -> (f64, f64, f64) {
        (self.gamma_minus, self.gamma_zero, self.gamma_plus)
    }
}

fn limits_checked(base: &PiecewisePath, delta: f64) -> Result<(f64, f64), CoeffError> {
    let non_convergent = |reason: &str| CoeffError::NonConvergentTails {
        delta,
        reason: reason.to_string(),
    };
    let (lo, hi) = base
        .tail_limits()
        .ok_or_else(|| non_convergent("base has no closed-form limits at infinity"))?;
    let (t_lo, t_hi) = base
        .settle_times(delta)
        .ok_or_else(|| non_convergent("base does not settle"))?;
    // Numerical confirmation over the last 10% of a window past both settle times.
    let window = [t_lo.abs(), t_hi.abs(), 1.0]
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(1.0_f64, f64::max)
        * 1.5;
    for i in 0..=32 {
        let t = window * (0.9 + 0.1 * i as f64 / 32.0);
        if (base.eval(t) - hi).abs() > delta || (base.eval(-t) - lo).abs() > delta {
            return Err(non_convergent("tail oscillation exceeds tolerance"));
        }
    }
    Ok((lo, hi))
}

/// Value of the transition family at `t`.
#[inline]
pub fn eval_transition(spec: &TransitionSpec, t: f64) -> f64 {
    spec.path().eval(t)
}

/// `(gamma_minus, gamma_zero, gamma_plus)` of the base transition.
pub fn asymptotic_limits(spec: &TransitionSpec) -> Result<(f64, f64, f64), CoeffError> {
    let (lo, hi) = limits_checked(spec.base(), DELTA_TAIL)?;
    Ok((lo, spec.base().eval(0.0), hi))
}

pub fn sup_norm_bound(path: &PiecewisePath) -> f64 {
    path.sup_norm_bound()
}

/// `t -> path(t + s)`.
pub fn shift_forcing(path: &PiecewisePath, s: f64) -> PiecewisePath {
    if s == 0.0 {
        return path.clone();
    }
    match path {
        PiecewisePath::Constant { .. } => path.clone(),
        PiecewisePath::Shift { by, inner } if by + s == 0.0 => (**inner).clone(),
        _ => path.clone().shifted(s),
    }
}

/// One equation `y' = -(y - Gamma(t))^2 + p(t) + lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub transition: TransitionSpec,
    pub forcing: PiecewisePath,
    #[serde(default)]
    pub offset: f64,
}

impl ProblemSpec {
    pub fn new(transition: TransitionSpec, forcing: PiecewisePath, offset: f64) -> Result<Self, CoeffError> {
        forcing.validate()?;
        if !offset.is_finite() {
            return Err(CoeffError::InvalidPath(format!("offset {offset} is not finite")));
        }
        Ok(ProblemSpec {
            transition,
            forcing,
            offset,
        })
    }

    /// General-form constants: `x' = -x^2 + q x + p`, realized with the
    /// constant transition `q/2` and forcing `p + q^2/4`.
    pub fn from_constants(q: f64, p: f64) -> Self {
        let gamma = 0.5 * q;
        ProblemSpec {
            transition: TransitionSpec::continuous(PiecewisePath::constant(gamma))
                .expect("constant transition is valid"),
            forcing: PiecewisePath::constant(p + gamma * gamma),
            offset: 0.0,
        }
    }

    pub fn with_offset(&self, offset: f64) -> Self {
        ProblemSpec { offset, ..self.clone() }
    }

    #[inline]
    pub fn rhs_value(&self, t: f64, y: f64, side: Side) -> f64 {
        let d = y - self.transition.path().eval_side(t, side);
        -d * d + self.forcing.eval_side(t, side) + self.offset
    }

    /// Sup-norm bound of `q^2/4 + p_eff`, which equals `p + lambda`.
    pub fn lower_bracket_norm(&self) -> f64 {
        PiecewisePath::sum(vec![self.forcing.clone(), PiecewisePath::constant(self.offset)]).sup_norm_bound()
    }
}

/// `(q, p_eff)` with `q = 2 Gamma` and `p_eff = p - Gamma^2 + lambda`.
pub fn to_general_form(problem: &ProblemSpec) -> (PiecewisePath, PiecewisePath) {
    let gamma = problem.transition.path().clone();
    let q = gamma.clone().scaled(2.0);
    let p_eff = PiecewisePath::sum(vec![
        problem.forcing.clone(),
        gamma.squared().scaled(-1.0),
        PiecewisePath::constant(problem.offset),
    ]);
    (q, p_eff)
}

/// The transition `(2/pi) arctan(t)` used throughout the worked examples.
pub fn arctan_transition() -> PiecewisePath {
    PiecewisePath::arctan()
}

/// The quasiperiodic forcing `0.962 - sin(t/2) - sin(sqrt(5) t)`.
pub fn quasiperiodic_forcing() -> PiecewisePath {
    PiecewisePath::sinusoid_sum(
        0.962,
        vec![
            Sinusoid {
                amplitude: -1.0,
                frequency: 0.5,
                phase: 0.0,
            },
            Sinusoid {
                amplitude: -1.0,
                frequency: 5f64.sqrt(),
                phase: 0.0,
            },
        ],
    )
}
