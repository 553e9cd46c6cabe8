//! Pullback attractor and repeller, and the A/B/C dichotomy.
//!
//! The locally pullback attractive solution is approximated by a forward
//! run launched above every bounded solution at `-t_far`; the repulsive
//! one by a backward run launched below them at `+t_far`. Their order at
//! `t_match` decides whether bounded solutions exist.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{to_general_form, CoeffError, PiecewisePath, ProblemSpec, Side, TransitionSpec};
use crate::ivp::{escape_bound, integrate, FnRhs, IvpError, IvpParams, ScalarRhs, Trajectory, ESCAPE_EPSILON};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PullbackError {
    #[error(transparent)]
    Ivp(#[from] IvpError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("invalid horizons: {0}")]
    InvalidHorizons(String),
    #[error("window [{s}, {t}] not covered by trajectory span [{lo}, {hi}]")]
    WindowOutOfRange { s: f64, t: f64, lo: f64, hi: f64 },
    #[error("trajectory has {0} nodes, at least 3 needed")]
    DegenerateTrajectory(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonParams {
    pub t_match: f64,
    pub t_far: f64,
    #[serde(default = "default_tol_gap")]
    pub tol_gap: f64,
    #[serde(default = "default_delta_tail")]
    pub delta_tail: f64,
}

fn default_tol_gap() -> f64 {
    1e-4
}

fn default_delta_tail() -> f64 {
    0.1
}

/// Launch-to-window distance used by [`auto_horizons`] by default.
pub const DEFAULT_SETTLE: f64 = 1000.0;

impl HorizonParams {
    /// Comparison at +-35, launches at +-500.
    pub fn classic() -> Self {
        HorizonParams {
            t_match: 35.0,
            t_far: 500.0,
            tol_gap: default_tol_gap(),
            delta_tail: default_delta_tail(),
        }
    }

    pub fn validate(&self) -> Result<(), PullbackError> {
        if !(self.t_match > 0.0 && self.t_far > self.t_match && self.t_far.is_finite()) {
            return Err(PullbackError::InvalidHorizons(format!(
                "need t_far > t_match > 0, got t_match = {}, t_far = {}",
                self.t_match, self.t_far
            )));
        }
        if !(self.tol_gap > 0.0) {
            return Err(PullbackError::InvalidHorizons("tol_gap must be positive".into()));
        }
        Ok(())
    }

    pub fn with_t_far(&self, t_far: f64) -> Self {
        HorizonParams { t_far, ..self.clone() }
    }
}

/// Horizons for a transition: `t_match` is where the realized transition
/// is within `delta_tail` of its limits for good; `t_far = t_match + settle`.
pub fn auto_horizons(spec: &TransitionSpec, delta_tail: f64, settle: f64) -> Result<HorizonParams, PullbackError> {
    if !(settle > 0.0) {
        return Err(PullbackError::InvalidHorizons("settle must be positive".into()));
    }
    let (t_lo, t_hi) = spec
        .path()
        .settle_times(delta_tail)
        .ok_or_else(|| CoeffError::NonConvergentTails {
            delta: delta_tail,
            reason: "transition does not settle".into(),
        })?;
    let reach = [-t_lo, t_hi]
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let t_match = if reach > 0.0 { reach } else { 1.0 };
    Ok(HorizonParams {
        t_match,
        t_far: t_match + settle,
        tol_gap: default_tol_gap(),
        delta_tail,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CaseA,
    CaseB,
    CaseC,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::CaseA => "CaseA",
            Verdict::CaseB => "CaseB",
            Verdict::CaseC => "CaseC",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Attractor,
    Repeller,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EscapeWitness {
    pub branch: Branch,
    pub t_escape: f64,
}

/// Verdicts of the optional robustness reruns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub doubled_t_far: Verdict,
    pub halved_tolerances: Verdict,
    pub raised_launch: Verdict,
    pub ordering_holds: bool,
}

impl RobustnessReport {
    pub fn consistent_with(&self, v: Verdict) -> bool {
        self.doubled_t_far == v && self.halved_tolerances == v && self.raised_launch == v && self.ordering_holds
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    pub gap: Option<f64>,
    pub t_match: f64,
    pub escape: Option<EscapeWitness>,
    pub attractor_trace: Trajectory,
    pub repeller_trace: Trajectory,
    pub robustness: Option<RobustnessReport>,
}

impl Classification {
    /// Whether the pair is ordered at `t_match`, i.e. the equation has
    /// bounded solutions (`lambda >= lambda*`). Uses the sign of the gap
    /// rather than the Case B band.
    pub fn has_bounded_solutions(&self) -> bool {
        matches!(self.gap, Some(g) if g >= 0.0)
    }

    pub fn summary(&self) -> ClassificationSummary {
        ClassificationSummary {
            verdict: self.verdict,
            gap: self.gap,
            t_match: self.t_match,
            escape: self.escape,
            trace_summary: TracePair {
                attractor: TraceSummary::of(&self.attractor_trace, -self.t_match),
                repeller: TraceSummary::of(&self.repeller_trace, self.t_match),
            },
            robustness: self.robustness.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationSummary {
    pub verdict: Verdict,
    pub gap: Option<f64>,
    pub t_match: f64,
    pub escape: Option<EscapeWitness>,
    pub trace_summary: TracePair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePair {
    pub attractor: TraceSummary,
    pub repeller: TraceSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub nodes: usize,
    pub completed: bool,
    /// Value at the near edge of the comparison window, if reached.
    pub value_at_window_edge: Option<f64>,
    pub value_at_end: f64,
}

impl TraceSummary {
    fn of(tr: &Trajectory, edge: f64) -> Self {
        TraceSummary {
            t_start: tr.t_start(),
            t_end: tr.t_end(),
            nodes: tr.len(),
            completed: tr.is_completed(),
            value_at_window_edge: tr.value_at(edge),
            value_at_end: tr.last_value(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeparationDiagnostic {
    pub window: (f64, f64),
    pub exponent: f64,
    pub attractive: bool,
}

/// The trapping bound `m` of a quadratic problem.
pub fn m_bound(problem: &ProblemSpec) -> f64 {
    let (q, p_eff) = to_general_form(problem);
    escape_bound(q.sup_norm_bound(), p_eff.sup_norm_bound(), ESCAPE_EPSILON)
}

fn launch_offset(m: f64, ip: &IvpParams) -> f64 {
    m + ip.escape_margin
}

/// Forward run from `(-t_far, m + margin)` to `+t_far`.
pub fn pullback_attractor(
    problem: &ProblemSpec,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<Trajectory, PullbackError> {
    pullback_attractor_rhs(problem, m_bound(problem), hp, ip)
}

/// Backward run from `(t_far, -(m + margin))` to `-t_far`.
pub fn pullback_repeller(
    problem: &ProblemSpec,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<Trajectory, PullbackError> {
    pullback_repeller_rhs(problem, m_bound(problem), hp, ip)
}

/// [`pullback_attractor`] for any right-hand side trapped by `m`.
pub fn pullback_attractor_rhs<R: ScalarRhs + ?Sized>(
    rhs: &R,
    m: f64,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<Trajectory, PullbackError> {
    hp.validate()?;
    let y0 = launch_offset(m, ip);
    Ok(integrate(
        rhs,
        -hp.t_far,
        y0,
        hp.t_far,
        &[-hp.t_match, hp.t_match],
        Some(m),
        ip,
    )?)
}

/// [`pullback_repeller`] for any right-hand side trapped by `m`.
pub fn pullback_repeller_rhs<R: ScalarRhs + ?Sized>(
    rhs: &R,
    m: f64,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<Trajectory, PullbackError> {
    hp.validate()?;
    let y0 = -launch_offset(m, ip);
    Ok(integrate(
        rhs,
        hp.t_far,
        y0,
        -hp.t_far,
        &[hp.t_match, -hp.t_match],
        Some(m),
        ip,
    )?)
}

/// Classifies the problem; honours `TIPSCAN_SEED_CHECK=1`.
pub fn classify(problem: &ProblemSpec, hp: &HorizonParams, ip: &IvpParams) -> Result<Classification, PullbackError> {
    let mut c = classify_launch(problem, hp, ip, 0.0)?;
    if seed_check_enabled() {
        c.robustness = Some(robustness_checks(problem, hp, ip)?);
    }
    Ok(c)
}

pub fn seed_check_enabled() -> bool {
    std::env::var("TIPSCAN_SEED_CHECK").map(|v| v == "1").unwrap_or(false)
}

/// Classification with the launch values pushed `extra` further out.
pub fn classify_launch(
    problem: &ProblemSpec,
    hp: &HorizonParams,
    ip: &IvpParams,
    extra: f64,
) -> Result<Classification, PullbackError> {
    hp.validate()?;
    let m = m_bound(problem);
    let y0 = launch_offset(m, ip) + extra;
    let tm = hp.t_match;
    let attractor = integrate(problem, -hp.t_far, y0, tm, &[-tm], Some(m), ip)?;
    let repeller = integrate(problem, hp.t_far, -y0, -tm, &[tm], Some(m), ip)?;

    let attractor_escape = attractor.escape().map(|e| EscapeWitness {
        branch: Branch::Attractor,
        t_escape: e.t_escape,
    });
    // the repeller only needs to exist on [t_match, t_far]
    let repeller_escape = repeller.escape().filter(|e| e.t_threshold > tm).map(|e| EscapeWitness {
        branch: Branch::Repeller,
        t_escape: e.t_escape,
    });

    let (verdict, gap, escape) = match (attractor_escape, repeller_escape) {
        (Some(w), _) | (None, Some(w)) => (Verdict::CaseC, None, Some(w)),
        (None, None) => {
            let a = attractor.last_value();
            let r = repeller.value_at(tm).expect("repeller covers t_match");
            let gap = a - r;
            let v = if gap > hp.tol_gap {
                Verdict::CaseA
            } else if gap < -hp.tol_gap {
                Verdict::CaseC
            } else {
                Verdict::CaseB
            };
            (v, Some(gap), None)
        }
    };
    Ok(Classification {
        verdict,
        gap,
        t_match: tm,
        escape,
        attractor_trace: attractor,
        repeller_trace: repeller,
        robustness: None,
    })
}

/// Reruns with doubled `t_far`, halved tolerances and a raised launch, and
/// checks that launches outside the pair diverge.
pub fn robustness_checks(
    problem: &ProblemSpec,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<RobustnessReport, PullbackError> {
    let doubled = classify_launch(problem, &hp.with_t_far(2.0 * hp.t_far), ip, 0.0)?.verdict;
    let halved = classify_launch(problem, hp, &ip.scaled_tolerances(0.5), 0.0)?.verdict;
    let raised = classify_launch(problem, hp, ip, 0.5)?.verdict;

    let m = m_bound(problem);
    let y0 = launch_offset(m, ip) + 0.5;
    let above = integrate(problem, -hp.t_far, y0, -3.0 * hp.t_far, &[], Some(m), ip)?;
    let below = integrate(problem, hp.t_far, -y0, 3.0 * hp.t_far, &[], Some(m), ip)?;
    Ok(RobustnessReport {
        doubled_t_far: doubled,
        halved_tolerances: halved,
        raised_launch: raised,
        ordering_holds: above.escape().is_some() && below.escape().is_some(),
    })
}

/// Finite-window average of `-2 b + 2 Gamma` over `[s, t]`.
pub fn separation_exponent(
    problem: &ProblemSpec,
    b: &Trajectory,
    window: (f64, f64),
) -> Result<SeparationDiagnostic, PullbackError> {
    let (s, t) = window;
    let (lo, hi) = b.span();
    if !(t > s && s >= lo && t <= hi) {
        return Err(PullbackError::WindowOutOfRange { s, t, lo, hi });
    }
    let mut nodes: Vec<f64> = b.times.iter().copied().filter(|&u| u > s && u < t).collect();
    nodes.extend(problem.transition.path().breakpoints(s, t));
    nodes.push(s);
    nodes.push(t);
    crate::coeffs::normalize_times(&mut nodes);
    let gamma = problem.transition.path();
    let integrand = |u: f64, side: Side| -2.0 * b.value_at(u).expect("inside span") + 2.0 * gamma.eval_side(u, side);
    let integral: f64 = nodes
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (integrand(w[0], Side::Right) + integrand(w[1], Side::Left)))
        .sum();
    let exponent = integral / (t - s);
    Ok(SeparationDiagnostic {
        window,
        exponent,
        attractive: exponent < 0.0,
    })
}

/// Checks numerically that `b' <= f(t, b)` on a uniform grid of step
/// `grid_step`, with a slack of `10 abs_tol + g^2 max|b''| / 8`.
pub fn certify_with_subsolution(
    problem: &ProblemSpec,
    b: &Trajectory,
    grid_step: f64,
    abs_tol: f64,
) -> Result<bool, PullbackError> {
    if b.len() < 3 {
        return Err(PullbackError::DegenerateTrajectory(b.len()));
    }
    if !b.is_completed() {
        return Ok(false);
    }
    let (lo, hi) = b.span();
    let n = ((hi - lo) / grid_step).floor() as usize;
    if n < 2 {
        return Err(PullbackError::DegenerateTrajectory(n + 1));
    }
    let ts: Vec<f64> = (0..=n).map(|k| lo + k as f64 * grid_step).collect();
    let ys: Vec<f64> = ts.iter().map(|&t| b.value_at(t).expect("grid inside span")).collect();
    let jumps = problem.breakpoints(lo, hi);
    let straddles = |a: f64, c: f64| {
        let k = jumps.partition_point(|&j| j <= a);
        k < jumps.len() && jumps[k] < c
    };
    let g2 = grid_step * grid_step;
    let curvature = (1..n)
        .filter(|&k| !straddles(ts[k - 1], ts[k + 1]))
        .map(|k| ((ys[k + 1] - 2.0 * ys[k] + ys[k - 1]) / g2).abs())
        .fold(0.0_f64, f64::max);
    let slack = 10.0 * abs_tol + g2 * curvature / 8.0;
    Ok((1..n).filter(|&k| !straddles(ts[k - 1], ts[k + 1])).all(|k| {
        let slope = (ys[k + 1] - ys[k - 1]) / (2.0 * grid_step);
        slope <= problem.rhs_value(ts[k], ys[k], Side::Right) + slack
    }))
}

/// `x' = -x^2 - 0.2|x| - 0.011 + p(t)`, a strict sub-equation of
/// `y' = -(y - g)^2 + p(t)` for every constant `|g| <= 0.1`.
pub fn auxiliary_rhs(forcing: &PiecewisePath) -> FnRhs<impl Fn(f64, f64, Side) -> f64 + Sync + '_> {
    FnRhs::new(
        move |t, x, side| -x * x - 0.2 * x.abs() - 0.011 + forcing.eval_side(t, side),
        vec![forcing.clone()],
    )
}

/// The trapping bound for [`auxiliary_rhs`].
pub fn auxiliary_m_bound(forcing: &PiecewisePath) -> f64 {
    escape_bound(0.0, forcing.sup_norm_bound(), ESCAPE_EPSILON)
}
