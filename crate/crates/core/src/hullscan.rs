//! Tipping along time shifts of the forcing.
//!
//! For the shifted forcings `p_s(t) = p(t + s)` the step limit of the
//! transition is decided by `d(s) = (gamma_+ - gamma_-) - a(s) + r(s)`,
//! where `a`, `r` are the pullback pair of `x' = -x^2 + p`. Its sign should
//! match the sign of `lambda*` for the step equation with forcing `p_s`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bifurcation::{
    compute_cell, BifurcationError, BisectionOptions, Cell, HorizonPolicy, Model, ModelKind, SecondAxis,
};
use crate::coeffs::{asymptotic_limits, PiecewisePath, ProblemSpec, Rate, TransitionSpec};
use crate::ivp::{escape_bound, integrate, IvpParams, ESCAPE_EPSILON};
use crate::pullback::{classify, HorizonParams, Verdict};

/// Default exclusion half-width around zero.
pub const DEFAULT_BAND: f64 = 1e-3;

/// `[-40, 40]` with step `0.5`.
pub fn default_s_grid() -> Vec<f64> {
    (0..=160).map(|k| -40.0 + 0.5 * k as f64).collect()
}

fn untransitioned(forcing: &PiecewisePath) -> Result<ProblemSpec, BifurcationError> {
    Ok(ProblemSpec::new(
        TransitionSpec::continuous(PiecewisePath::constant(0.0))?,
        forcing.clone(),
        0.0,
    )?)
}

/// `d(s)` on `s_grid` from a single attractor/repeller pair.
pub fn d_infinity_curve(
    forcing: &PiecewisePath,
    spec: &TransitionSpec,
    s_grid: &[f64],
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<Vec<f64>, BifurcationError> {
    if s_grid.is_empty() {
        return Ok(Vec::new());
    }
    let base = untransitioned(forcing)?;
    let verdict = classify(&base, hp, ip)?.verdict;
    if verdict != Verdict::CaseA {
        return Err(BifurcationError::HypothesisViolated(format!(
            "x' = -x^2 + p is {verdict}, not hyperbolic"
        )));
    }
    let (g_minus, _, g_plus) = asymptotic_limits(spec)?;
    let s_min = s_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = s_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = escape_bound(0.0, forcing.sup_norm_bound(), ESCAPE_EPSILON);
    let launch = m + ip.escape_margin;
    let a = integrate(&base, s_min - hp.t_far, launch, s_max + 1.0, s_grid, Some(m), ip)?;
    let r = integrate(&base, s_max + hp.t_far, -launch, s_min - 1.0, s_grid, Some(m), ip)?;
    if !(a.is_completed() && r.is_completed()) {
        return Err(BifurcationError::HypothesisViolated(
            "pullback pair does not cover the shift range".into(),
        ));
    }
    Ok(s_grid
        .iter()
        .map(|&s| {
            let a_s = a.value_at(s).expect("grid inside attractor span");
            let r_s = r.value_at(s).expect("grid inside repeller span");
            (g_plus - g_minus) - a_s + r_s
        })
        .collect())
}

/// `lambda*` of the `rate` transition (with `hold`) under each shifted forcing.
#[allow(clippy::too_many_arguments)]
pub fn lambda_shift_curve(
    forcing: &PiecewisePath,
    spec: &TransitionSpec,
    rate: Rate,
    hold: f64,
    s_grid: &[f64],
    opts: &BisectionOptions,
    policy: &HorizonPolicy,
    ip: &IvpParams,
) -> Vec<Cell> {
    let model = Model {
        kind: ModelKind::Rate,
        base: spec.base().clone(),
        forcing: forcing.clone(),
        offset: 0.0,
    };
    s_grid
        .par_iter()
        .map(|&s| {
            let mut cell = if hold == 0.0 {
                compute_cell(&model, rate.as_f64(), SecondAxis::Shift(s), opts, policy, ip)
            } else {
                // holds and shifts together: build the transition directly
                let model = Model {
                    forcing: crate::coeffs::shift_forcing(forcing, s),
                    ..model.clone()
                };
                compute_cell(&model, rate.as_f64(), SecondAxis::Hold(hold), opts, policy, ip)
            };
            cell.axis2 = s;
            cell
        })
        .collect()
}

/// `lambda*` of the `c = +inf`, `h = 0` step equation under each shifted forcing.
pub fn lambda_infinity_curve(
    forcing: &PiecewisePath,
    spec: &TransitionSpec,
    s_grid: &[f64],
    opts: &BisectionOptions,
    policy: &HorizonPolicy,
    ip: &IvpParams,
) -> Vec<Cell> {
    lambda_shift_curve(forcing, spec, Rate::PosInf, 0.0, s_grid, opts, policy, ip)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HullOutcome {
    TotalTracking,
    PartialTipping,
    TotalTipping,
    /// Every cell fell inside the exclusion band.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HullReport {
    pub c: String,
    pub band: f64,
    pub s_grid: Vec<f64>,
    pub d_inf: Vec<f64>,
    pub lambda_inf: Vec<Option<f64>>,
    pub lambda_c: Option<Vec<Option<f64>>>,
    pub outcome: HullOutcome,
    pub near_zero_cells: Vec<usize>,
}

impl HullReport {
    /// Indices outside the band where `d` and `lambda_inf` disagree in sign.
    pub fn sign_disagreements(&self) -> Vec<usize> {
        (0..self.s_grid.len())
            .filter(|&k| match self.lambda_inf[k] {
                Some(l) => {
                    let d = self.d_inf[k];
                    d.abs().min(l.abs()) >= self.band && (d > 0.0) != (l > 0.0)
                }
                None => false,
            })
            .collect()
    }
}

/// Votes over the non-excluded values.
pub fn hull_outcome(values: &[Option<f64>], band: f64) -> HullOutcome {
    let kept: Vec<f64> = values.iter().flatten().copied().filter(|v| v.abs() >= band).collect();
    if kept.is_empty() {
        HullOutcome::Inconclusive
    } else if kept.iter().all(|&v| v < 0.0) {
        HullOutcome::TotalTracking
    } else if kept.iter().all(|&v| v > 0.0) {
        HullOutcome::TotalTipping
    } else {
        HullOutcome::PartialTipping
    }
}

/// Both curves, plus `lambda*` at rate `c` when `c != +inf`, and the
/// outcome voted by the curve of rate `c`.
#[allow(clippy::too_many_arguments)]
pub fn hull_report(
    forcing: &PiecewisePath,
    spec: &TransitionSpec,
    s_grid: &[f64],
    c: Rate,
    band: f64,
    opts: &BisectionOptions,
    policy: &HorizonPolicy,
    hp: &HorizonParams,
    ip: &IvpParams,
) -> Result<HullReport, BifurcationError> {
    if !(band >= 0.0) {
        return Err(BifurcationError::InvalidInput("band must be nonnegative".into()));
    }
    let d_inf = d_infinity_curve(forcing, spec, s_grid, hp, ip)?;
    let lambda_inf: Vec<Option<f64>> = lambda_infinity_curve(forcing, spec, s_grid, opts, policy, ip)
        .into_iter()
        .map(|cell| cell.lambda_star)
        .collect();
    let lambda_c = (c != Rate::PosInf).then(|| {
        let hold = if c.is_infinite() { 0.0 } else { spec.hold() };
        lambda_shift_curve(forcing, spec, c, hold, s_grid, opts, policy, ip)
            .into_iter()
            .map(|cell| cell.lambda_star)
            .collect::<Vec<_>>()
    });
    let vote = lambda_c.as_ref().unwrap_or(&lambda_inf);
    let outcome = hull_outcome(vote, band);
    let near_zero_cells = (0..s_grid.len())
        .filter(|&k| {
            let small = |v: Option<f64>| v.is_none_or(|v| v.abs() < band);
            d_inf[k].abs() < band || small(lambda_inf[k]) || lambda_c.as_ref().is_some_and(|l| small(l[k]))
        })
        .collect();
    Ok(HullReport {
        c: c.to_string(),
        band,
        s_grid: s_grid.to_vec(),
        d_inf,
        lambda_inf,
        lambda_c,
        outcome,
        near_zero_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp() -> HorizonParams {
        HorizonParams {
            t_match: 1.0,
            t_far: 200.0,
            tol_gap: 1e-4,
            delta_tail: 0.1,
        }
    }

    #[test]
    fn constant_forcing_curves() {
        let ip = IvpParams::default();
        let one = PiecewisePath::constant(1.0);
        let grid = [-3.0, 0.0, 2.5];
        let full = TransitionSpec::continuous(PiecewisePath::arctan()).unwrap();
        for d in d_infinity_curve(&one, &full, &grid, &hp(), &ip).unwrap() {
            assert!(d.abs() < 1e-6, "{d}");
        }
        let half = TransitionSpec::continuous(PiecewisePath::arctan().scaled(0.5)).unwrap();
        for d in d_infinity_curve(&one, &half, &grid, &hp(), &ip).unwrap() {
            assert!((d + 1.0).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn hypothesis_is_checked() {
        let spec = TransitionSpec::continuous(PiecewisePath::arctan()).unwrap();
        let err = d_infinity_curve(
            &PiecewisePath::constant(-1.0),
            &spec,
            &[0.0],
            &hp(),
            &IvpParams::default(),
        );
        assert!(matches!(err, Err(BifurcationError::HypothesisViolated(_))));
    }

    #[test]
    fn outcome_vote() {
        assert_eq!(
            hull_outcome(&[Some(-1.0), Some(-0.5), Some(1e-4)], 1e-3),
            HullOutcome::TotalTracking
        );
        assert_eq!(hull_outcome(&[Some(1.0), None], 1e-3), HullOutcome::TotalTipping);
        assert_eq!(
            hull_outcome(&[Some(1.0), Some(-1.0)], 1e-3),
            HullOutcome::PartialTipping
        );
        assert_eq!(hull_outcome(&[Some(1e-5)], 1e-3), HullOutcome::Inconclusive);
    }

    #[test]
    fn default_grid() {
        let g = default_s_grid();
        assert_eq!(g.len(), 161);
        assert_eq!((g[0], g[80], g[160]), (-40.0, 0.0, 40.0));
    }
}
