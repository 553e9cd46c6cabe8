//! Browser bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. The plain functions behind them are
//! public so they can be exercised without a JavaScript host.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde_json::{json, Value};
use tipscan_core::bifurcation::{compute_cell, BisectionOptions, HorizonPolicy, Model, ModelKind, SecondAxis};
use tipscan_core::coeffs::{quasiperiodic_forcing, PiecewisePath, Rate, TransitionSpec};
use tipscan_core::hullscan::d_infinity_curve;
use tipscan_core::ivp::IvpParams;
use tipscan_core::pullback::{classify, HorizonParams};
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 2001;

fn rate_model() -> Model {
    Model {
        kind: ModelKind::Rate,
        base: PiecewisePath::arctan(),
        forcing: quasiperiodic_forcing(),
        offset: 0.0,
    }
}

fn rate(c: f64) -> Rate {
    if c.is_infinite() {
        if c > 0.0 {
            Rate::PosInf
        } else {
            Rate::NegInf
        }
    } else {
        Rate::Finite(c)
    }
}

fn finite_or_null(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, Value::from)
}

fn grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || !(2..=MAX_POINTS).contains(&n) {
        return Err(format!("bad grid {lo}..{hi} with {n} points"));
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

/// Attractor and repeller of the quasiperiodic model on `[-window, window]`.
pub fn pair_traces_json(c: f64, h: f64, lambda: f64, window: f64) -> Result<String, String> {
    let problem = rate_model()
        .problem(rate(c), SecondAxis::Hold(h))
        .map_err(|e| e.to_string())?
        .with_offset(lambda);
    let mut hp = HorizonPolicy::default()
        .horizons(&problem.transition)
        .map_err(|e| e.to_string())?;
    // keep the traces alive over the whole plotting window
    hp.t_match = hp.t_match.max(window);
    hp.t_far = hp.t_far.max(hp.t_match + 200.0);
    let ip = IvpParams::default();
    let cl = classify(&problem, &hp, &ip).map_err(|e| e.to_string())?;
    let ts = grid(-window, window, 401)?;
    let sample = |tr: &tipscan_core::ivp::Trajectory| -> Vec<Value> {
        ts.iter().map(|&t| finite_or_null(tr.value_at(t))).collect()
    };
    let gamma: Vec<f64> = ts.iter().map(|&t| problem.transition.path().eval(t)).collect();
    Ok(json!({
        "verdict": cl.verdict.label(),
        "gap": finite_or_null(cl.gap),
        "t": ts,
        "gamma": gamma,
        "attractor": sample(&cl.attractor_trace),
        "repeller": sample(&cl.repeller_trace),
    })
    .to_string())
}

/// `lambda*(c)` at hold `h` for `n` rates in `[0, c_max]`.
pub fn lambda_curve_json(h: f64, c_max: f64, n: usize, tol_lambda: f64) -> Result<String, String> {
    let cs = grid(0.0, c_max, n)?;
    let opts = BisectionOptions {
        tol_lambda,
        max_iter: 60,
    };
    opts.validate().map_err(|e| e.to_string())?;
    let model = rate_model();
    let ip = IvpParams::default();
    let cells: Vec<Value> = cs
        .iter()
        .map(|&c| {
            let cell = compute_cell(&model, c, SecondAxis::Hold(h), &opts, &HorizonPolicy::default(), &ip);
            json!({ "c": c, "lambda_star": finite_or_null(cell.lambda_star), "error": cell.error })
        })
        .collect();
    Ok(Value::from(cells).to_string())
}

/// `d(s)` for the transition `scale * arctan` against the quasiperiodic forcing.
pub fn d_curve_json(scale: f64, s_min: f64, s_max: f64, n: usize) -> Result<String, String> {
    let s = grid(s_min, s_max, n)?;
    let spec = TransitionSpec::continuous(PiecewisePath::arctan().scaled(scale)).map_err(|e| e.to_string())?;
    let hp = HorizonParams {
        t_match: 1.0,
        t_far: 1000.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    };
    let d =
        d_infinity_curve(&quasiperiodic_forcing(), &spec, &s, &hp, &IvpParams::default()).map_err(|e| e.to_string())?;
    Ok(json!({ "s": s, "d": d }).to_string())
}

#[wasm_bindgen]
pub fn pair_traces(c: f64, h: f64, lambda: f64, window: f64) -> Result<String, JsError> {
    pair_traces_json(c, h, lambda, window).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lambda_curve(h: f64, c_max: f64, n: usize, tol_lambda: f64) -> Result<String, JsError> {
    lambda_curve_json(h, c_max, n, tol_lambda).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn d_curve(scale: f64, s_min: f64, s_max: f64, n: usize) -> Result<String, JsError> {
    d_curve_json(scale, s_min, s_max, n).map_err(|e| JsError::new(&e))
}
