//! Bifurcation values, tipping rates, step limits and parameter sweeps.
//!
//! `lambda*` is the unique value with bounded solutions exactly for
//! `lambda >= lambda*`. It is found by bisection on the sign of the
//! attractor/repeller gap, starting from the bracket
//! `[-sup|p + lambda0|, sup|p - Gamma^2 + lambda0|]`.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::{shift_forcing, CoeffError, PiecewisePath, ProblemSpec, Rate, TransitionSpec};
use crate::ivp::{escape_bound, integrate, IvpParams, ESCAPE_EPSILON};
use crate::pullback::{auto_horizons, classify, HorizonParams, PullbackError, Verdict, DEFAULT_SETTLE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BifurcationError {
    #[error(transparent)]
    Pullback(#[from] PullbackError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("bracket endpoint lambda = {lambda} classified {verdict} ({end} end)")]
    BracketFailure {
        lambda: f64,
        verdict: Verdict,
        end: &'static str,
    },
    #[error("no sign change of lambda* over the scanned rates")]
    NoSignChange { signs: Vec<(f64, i8)> },
    #[error("gap function has no sign change up to lambda = {hi} (g = {g})")]
    NoBracket { hi: f64, g: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<crate::ivp::IvpError> for BifurcationError {
    fn from(e: crate::ivp::IvpError) -> Self {
        BifurcationError::Pullback(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BisectionOptions {
    pub tol_lambda: f64,
    pub max_iter: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        BisectionOptions {
            tol_lambda: 1e-6,
            max_iter: 60,
        }
    }
}

impl BisectionOptions {
    pub fn validate(&self) -> Result<(), BifurcationError> {
        if !(self.tol_lambda > 0.0) || self.max_iter == 0 {
            return Err(BifurcationError::InvalidInput(
                "tol_lambda must be positive and max_iter nonzero".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EndpointVerdict {
    pub lambda: f64,
    pub verdict: Verdict,
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BifurcationResult {
    pub lambda_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub endpoint_verdicts: (EndpointVerdict, EndpointVerdict),
}

impl BifurcationResult {
    pub fn bracket_width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

/// `[-sup|p + lambda0|, sup|p - Gamma^2 + lambda0|]`, padded so that a
/// value sitting exactly on an end is still strictly inside.
pub fn initial_bracket(problem: &ProblemSpec) -> (f64, f64) {
    let (_, p_eff) = crate::coeffs::to_general_form(problem);
    let lo = -problem.lower_bracket_norm();
    let hi = p_eff.sup_norm_bound();
    let pad = 0.01 * (hi - lo) + 1e-3;
    (lo - pad, hi + pad)
}

/// Bisection for the `lambda` added to the problem's own offset.
pub fn lambda_star(
    problem: &ProblemSpec,
    opts: &BisectionOptions,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<BifurcationResult, BifurcationError> {
    opts.validate()?;
    let probe = |lambda: f64| -> Result<(bool, EndpointVerdict), BifurcationError> {
        let c = classify(&problem.with_offset(problem.offset + lambda), hp, ip)?;
        Ok((
            c.has_bounded_solutions(),
            EndpointVerdict {
                lambda,
                verdict: c.verdict,
                gap: c.gap,
            },
        ))
    };
    let (mut lo, mut hi) = initial_bracket(problem);
    let (bounded_lo, mut ev_lo) = probe(lo)?;
    if bounded_lo {
        return Err(BifurcationError::BracketFailure {
            lambda: lo,
            verdict: ev_lo.verdict,
            end: "lower",
        });
    }
    let (bounded_hi, mut ev_hi) = probe(hi)?;
    if !bounded_hi {
        return Err(BifurcationError::BracketFailure {
            lambda: hi,
            verdict: ev_hi.verdict,
            end: "upper",
        });
    }
    let mut iterations = 0;
    while hi - lo > opts.tol_lambda && iterations < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        let (bounded, ev) = probe(mid)?;
        if bounded {
            hi = mid;
            ev_hi = ev;
        } else {
            lo = mid;
            ev_lo = ev;
        }
        iterations += 1;
    }
    Ok(BifurcationResult {
        lambda_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        iterations,
        endpoint_verdicts: (ev_lo, ev_hi),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Transition `c * Gamma`, no hold.
    Size,
    /// Transition `Gamma_c^h`.
    Rate,
}

/// The second parameter of a surface or curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "value", rename_all = "snake_case")]
pub enum SecondAxis {
    Hold(f64),
    Shift(f64),
}

impl SecondAxis {
    pub fn value(self) -> f64 {
        match self {
            SecondAxis::Hold(v) | SecondAxis::Shift(v) => v,
        }
    }

    pub fn with_value(self, v: f64) -> Self {
        match self {
            SecondAxis::Hold(_) => SecondAxis::Hold(v),
            SecondAxis::Shift(_) => SecondAxis::Shift(v),
        }
    }
}

/// A base transition and forcing, from which one problem per `(c, axis2)`
/// cell is built.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub base: PiecewisePath,
    pub forcing: PiecewisePath,
    pub offset: f64,
}

impl Model {
    pub fn problem(&self, c: Rate, second: SecondAxis) -> Result<ProblemSpec, BifurcationError> {
        let (hold, shift) = match second {
            SecondAxis::Hold(h) => (h, 0.0),
            SecondAxis::Shift(s) => (0.0, s),
        };
        let transition = match self.kind {
            ModelKind::Size => {
                if hold != 0.0 {
                    return Err(BifurcationError::InvalidInput("the size model has no hold".into()));
                }
                let c = match c {
                    Rate::Finite(c) => c,
                    _ => return Err(BifurcationError::InvalidInput("the size model needs a finite c".into())),
                };
                TransitionSpec::continuous(self.base.clone().scaled(c))?
            }
            ModelKind::Rate => TransitionSpec::new(self.base.clone(), c, hold)?,
        };
        Ok(ProblemSpec::new(
            transition,
            shift_forcing(&self.forcing, shift),
            self.offset,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonPolicy {
    /// [`auto_horizons`] per transition.
    Auto {
        #[serde(default = "default_delta")]
        delta_tail: f64,
        #[serde(default = "default_settle")]
        settle: f64,
        #[serde(default = "default_tol_gap")]
        tol_gap: f64,
    },
    Fixed(HorizonParams),
}

fn default_delta() -> f64 {
    0.1
}

fn default_settle() -> f64 {
    DEFAULT_SETTLE
}

fn default_tol_gap() -> f64 {
    1e-4
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        HorizonPolicy::Auto {
            delta_tail: default_delta(),
            settle: default_settle(),
            tol_gap: default_tol_gap(),
        }
    }
}

impl HorizonPolicy {
    pub fn horizons(&self, spec: &TransitionSpec) -> Result<HorizonParams, PullbackError> {
        match self {
            HorizonPolicy::Auto {
                delta_tail,
                settle,
                tol_gap,
            } => {
                let mut hp = auto_horizons(spec, *delta_tail, *settle)?;
                hp.tol_gap = *tol_gap;
                Ok(hp)
            }
            HorizonPolicy::Fixed(hp) => Ok(hp.clone()),
        }
    }
}

/// `lambda*` of one cell with horizons chosen by `policy`.
pub fn lambda_star_with_policy(
    problem: &ProblemSpec,
    opts: &BisectionOptions,
    policy: &HorizonPolicy,
    ip: &IvpParams,
) -> Result<BifurcationResult, BifurcationError> {
    let hp = policy.horizons(&problem.transition)?;
    lambda_star(problem, opts, &hp, ip)
}

/// One computed surface cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub axis1: f64,
    pub axis2: f64,
    pub lambda_star: Option<f64>,
    /// Verdict of the equation itself (added `lambda = 0`).
    pub verdict: Option<Verdict>,
    pub bracket_width: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

pub fn compute_cell(
    model: &Model,
    c: f64,
    second: SecondAxis,
    opts: &BisectionOptions,
    policy: &HorizonPolicy,
    ip: &IvpParams,
) -> Cell {
    let mut cell = Cell {
        axis1: c,
        axis2: second.value(),
        lambda_star: None,
        verdict: None,
        bracket_width: None,
        iterations: 0,
        error: None,
    };
    let run = || -> Result<(BifurcationResult, Verdict), BifurcationError> {
        let problem = model.problem(Rate::from(c), second)?;
        let hp = policy.horizons(&problem.transition)?;
        let verdict = classify(&problem, &hp, ip)?.verdict;
        Ok((lambda_star(&problem, opts, &hp, ip)?, verdict))
    };
    match run() {
        Ok((res, verdict)) => {
            cell.lambda_star = Some(res.lambda_star);
            cell.bracket_width = Some(res.bracket_width());
            cell.iterations = res.iterations;
            cell.verdict = Some(verdict);
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// `lambda*` along `c_grid` with the second parameter fixed.
pub fn lambda_curve(
    model: &Model,
    fixed: SecondAxis,
    c_grid: &[f64],
    opts: &BisectionOptions,
    policy: &HorizonPolicy,
    ip: &IvpParams,
) -> Vec<Cell> {
    c_grid
        .par_iter()
        .map(|&c| compute_cell(model, c, fixed, opts, policy, ip))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Surface {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major: `cells[j * axis1.len() + i]` is `(axis1[i], axis2[j])`.
    pub cells: Vec<Cell>,
}

impl Surface {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[j * self.axis1.len() + i]
    }

    pub fn row(&self, j: usize) -> &[Cell] {
        let n = self.axis1.len();
        &self.cells[j * n..(j + 1) * n]
    }
}

/// `lambda*` over `axis1 x axis2`. Cells run on the current rayon pool;
/// results are ordered by cell index whatever the execution order.
/// `progress(done, total)` fires once per finished cell.
#[allow(clippy::too_many_arguments)]
pub fn sweep_surface(
    model: &Model,
    axis1: &[f64],
    axis2: &[f64],
    second: SecondAxis,
    opts: &BisectionOptions,
    policy: &HorizonPolicy,
    ip: &IvpParams,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Surface {
    let n = axis1.len() * axis2.len();
    let done = AtomicUsize::new(0);
    let cells = (0..n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % axis1.len(), k / axis1.len());
            let cell = compute_cell(model, axis1[i], second.with_value(axis2[j]), opts, policy, ip);
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, n);
            cell
        })
        .collect();
    Surface {
        axis1: axis1.to_vec(),
        axis2: axis2.to_vec(),
        cells,
    }
}

/// Linear spacing on `[0, 1)` with `n_linear` points, then `n_geometric`
/// geometric points from 1 to `c_max`.
pub fn default_c_grid(n_linear: usize, n_geometric: usize, c_max: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n_linear).map(|k| k as f64 / n_linear as f64).collect();
    if n_geometric == 1 {
        out.push(1.0);
    } else if n_geometric > 1 {
        let ratio = c_max.ln() / (n_geometric - 1) as f64;
        out.extend((0..n_geometric).map(|k| (ratio * k as f64).exp()));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    /// Bounded solutions below the root, none above (`lambda*` turns positive).
    TrackingToTipping,
    TippingToTracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TippingRoot {
    pub c: f64,
    pub bracket: (f64, f64),
    pub crossing: Crossing,
    pub transversal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TippingSearch {
    pub c_lo: f64,
    pub c_hi: f64,
    pub scan_points: usize,
    pub tol_c: f64,
}

/// Roots of `c -> lambda*(c)` in `[c_lo, c_hi]`: a sign scan at
/// `scan_points` rates, then bisection in `c` on each sign change.
pub fn tipping_rate(
    model: &Model,
    second: SecondAxis,
    search: &TippingSearch,
    policy: &HorizonPolicy,
    ip: &IvpParams,
) -> Result<Vec<TippingRoot>, BifurcationError> {
    if !(search.c_lo < search.c_hi) || search.scan_points < 2 || !(search.tol_c > 0.0) {
        return Err(BifurcationError::InvalidInput(
            "need c_lo < c_hi, scan_points >= 2 and tol_c > 0".into(),
        ));
    }
    let probe = |c: f64| -> Result<(bool, Verdict), BifurcationError> {
        let problem = model.problem(Rate::Finite(c), second)?;
        let hp = policy.horizons(&problem.transition)?;
        let cl = classify(&problem, &hp, ip)?;
        Ok((cl.has_bounded_solutions(), cl.verdict))
    };
    let n = search.scan_points;
    let grid: Vec<f64> = (0..n)
        .map(|k| search.c_lo + (search.c_hi - search.c_lo) * k as f64 / (n - 1) as f64)
        .collect();
    let scanned: Vec<(bool, Verdict)> = grid.par_iter().map(|&c| probe(c)).collect::<Result<_, _>>()?;

    let mut roots = Vec::new();
    for k in 0..n - 1 {
        let (b0, v0) = scanned[k];
        let (b1, v1) = scanned[k + 1];
        if b0 == b1 {
            continue;
        }
        let (mut lo, mut hi) = (grid[k], grid[k + 1]);
        while hi - lo > search.tol_c {
            let mid = 0.5 * (lo + hi);
            if probe(mid)?.0 == b0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let strict = |v: Verdict| v != Verdict::CaseB;
        roots.push(TippingRoot {
            c: 0.5 * (lo + hi),
            bracket: (lo, hi),
            crossing: if b0 {
                Crossing::TrackingToTipping
            } else {
                Crossing::TippingToTracking
            },
            transversal: strict(v0) && strict(v1) && v0 != v1,
        });
    }
    if roots.is_empty() {
        let signs = grid
            .iter()
            .zip(&scanned)
            .map(|(&c, &(b, _))| (c, if b { -1 } else { 1 }))
            .collect();
        return Err(BifurcationError::NoSignChange { signs });
    }
    Ok(roots)
}

/// Pullback attractor and repeller of `x' = -x^2 + p(t) + lambda` at `t`.
/// `None` when either fails to exist there.
pub fn untransitioned_pair_at(
    forcing: &PiecewisePath,
    lambda: f64,
    t: f64,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<Option<(f64, f64)>, BifurcationError> {
    let problem = untransitioned(forcing, lambda)?;
    let m = escape_bound(0.0, forcing.sup_norm_bound() + lambda.abs(), ESCAPE_EPSILON);
    let launch = m + ip.escape_margin;
    let a = integrate(&problem, t - hp.t_far, launch, t, &[], Some(m), ip)?;
    if !a.is_completed() {
        return Ok(None);
    }
    let r = integrate(&problem, t + hp.t_far, -launch, t, &[], Some(m), ip)?;
    if !r.is_completed() {
        return Ok(None);
    }
    Ok(Some((a.last_value(), r.last_value())))
}

fn untransitioned(forcing: &PiecewisePath, lambda: f64) -> Result<ProblemSpec, BifurcationError> {
    Ok(ProblemSpec::new(
        TransitionSpec::continuous(PiecewisePath::constant(0.0))?,
        forcing.clone(),
        lambda,
    )?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaInfinity {
    pub lambda: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Root of `g(lambda) = a(0) - r(0) - delta_gamma` for `x' = -x^2 + p + lambda`,
/// where a missing pair counts as `g = -inf`.
pub fn lambda_infinity_gap(
    forcing: &PiecewisePath,
    delta_gamma: f64,
    opts: &BisectionOptions,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<LambdaInfinity, BifurcationError> {
    opts.validate()?;
    let g = |lambda: f64| -> Result<f64, BifurcationError> {
        Ok(match untransitioned_pair_at(forcing, lambda, 0.0, hp, ip)? {
            Some((a, r)) => a - r - delta_gamma,
            None => f64::NEG_INFINITY,
        })
    };
    let norm = forcing.sup_norm_bound();
    let mut lo = -norm - 1.0;
    let mut hi = norm + 0.25 * delta_gamma * delta_gamma + 1.0;
    let g_hi = g(hi)?;
    if !(g_hi > 0.0) {
        return Err(BifurcationError::NoBracket { hi, g: g_hi });
    }
    if g(lo)? >= 0.0 {
        return Err(BifurcationError::NoBracket { hi: lo, g: 0.0 });
    }
    let mut iterations = 0;
    while hi - lo > opts.tol_lambda && iterations < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if g(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(LambdaInfinity {
        lambda: 0.5 * (lo + hi),
        bracket: (lo, hi),
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PlusInfinity,
    MinusInfinity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PredictedCase {
    CaseA,
    CaseC,
    Borderline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitPrediction {
    pub case: PredictedCase,
    /// `x(h, 0, a(0) + gamma_from - gamma_0)`, absent on escape.
    pub lhs: Option<f64>,
    /// `r(h) + gamma_to - gamma_0`.
    pub rhs: f64,
}

/// Predicts the case of the step limit `c -> +-inf` with hold `h` from the
/// untransitioned pair of `x' = -x^2 + p`.
pub fn limit_criterion(
    forcing: &PiecewisePath,
    spec: &TransitionSpec,
    h: f64,
    direction: Direction,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<LimitPrediction, BifurcationError> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(BifurcationError::InvalidInput(format!(
            "hold must be nonnegative, got {h}"
        )));
    }
    let (g_minus, g_zero, g_plus) = crate::coeffs::asymptotic_limits(spec)?;
    let (g_from, g_to) = match direction {
        Direction::PlusInfinity => (g_minus, g_plus),
        Direction::MinusInfinity => (g_plus, g_minus),
    };
    let a0 = untransitioned_pair_at(forcing, 0.0, 0.0, hp, ip)?;
    let rh = untransitioned_pair_at(forcing, 0.0, h, hp, ip)?;
    let (Some((a0, _)), Some((_, r_h))) = (a0, rh) else {
        return Err(BifurcationError::HypothesisViolated(
            "x' = -x^2 + p has no bounded solutions".into(),
        ));
    };
    let x0 = a0 + g_from - g_zero;
    let rhs = r_h + g_to - g_zero;
    let lhs = if h == 0.0 {
        Some(x0)
    } else {
        let problem = untransitioned(forcing, 0.0)?;
        let m = escape_bound(0.0, forcing.sup_norm_bound(), ESCAPE_EPSILON);
        // a start below -m escapes for sure; the run reports it immediately
        let tr = integrate(&problem, 0.0, x0, h, &[], Some(m), ip)?;
        tr.is_completed().then(|| tr.last_value())
    };
    let case = match lhs {
        None => PredictedCase::CaseC,
        Some(l) if l > rhs + hp.tol_gap => PredictedCase::CaseA,
        Some(l) if l < rhs - hp.tol_gap => PredictedCase::CaseC,
        Some(_) => PredictedCase::Borderline,
    };
    Ok(LimitPrediction { case, lhs, rhs })
}
