//! Closed-form checks run by `tipscan oracle-check`.

use std::io;
use std::path::Path;

use serde::Serialize;
use tipscan_core::bifurcation::{
    lambda_infinity_gap, lambda_star_with_policy, limit_criterion, BisectionOptions, Direction, HorizonPolicy,
    PredictedCase,
};
use tipscan_core::coeffs::{PiecewisePath, ProblemSpec, Side, TransitionSpec};
use tipscan_core::hullscan::d_infinity_curve;
use tipscan_core::ivp::{escape_bound, integrate, FnRhs, IvpParams};
use tipscan_core::pullback::{classify, HorizonParams, Verdict};

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn constant(gamma: f64, p: f64) -> ProblemSpec {
    ProblemSpec::new(
        TransitionSpec::continuous(PiecewisePath::constant(gamma)).expect("constant transition"),
        PiecewisePath::constant(p),
        0.0,
    )
    .expect("constant problem")
}

fn hp() -> HorizonParams {
    HorizonParams {
        t_match: 1.0,
        t_far: 1000.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    }
}

fn checks() -> Vec<Check> {
    let ip = IvpParams::default();
    let opts = BisectionOptions::default();
    let policy = HorizonPolicy::default();
    let mut out = Vec::new();

    let tanh = FnRhs::new(|_, y, _: Side| 1.0 - y * y, Vec::new());
    match integrate(&tanh, 0.0, 0.0, 5.0, &[], None, &ip) {
        Ok(tr) => {
            let err = (tr.last_value() - 5f64.tanh()).abs();
            out.push(check("tanh solution", err < 1e-8, format!("error {err:e}")));
        }
        Err(e) => out.push(check("tanh solution", false, e.to_string())),
    }

    let blow = FnRhs::new(|_, y, _: Side| -y * y, Vec::new());
    match integrate(&blow, 0.0, -1.0, 10.0, &[], Some(1.0), &ip) {
        Ok(tr) => {
            let t = tr.escape().map(|e| e.t_escape).unwrap_or(f64::NAN);
            out.push(check(
                "blow-up at t = 1",
                (t - 1.0).abs() < 1e-6,
                format!("t_escape {t}"),
            ));
        }
        Err(e) => out.push(check("blow-up at t = 1", false, e.to_string())),
    }

    let m = escape_bound(2.0, 4.0, 0.76);
    out.push(check("escape bound 3.4", (m - 3.4).abs() < 1e-12, format!("m {m}")));

    for (q, p) in [(0.0, 1.0), (2.0, 0.0), (-2.0, -1.0)] {
        let expected = -p - q * q / 4.0;
        let name = "constant lambda*";
        match lambda_star_with_policy(&ProblemSpec::from_constants(q, p), &opts, &policy, &ip) {
            Ok(r) => {
                let err = (r.lambda_star - expected).abs();
                out.push(check(
                    name,
                    err <= 1e-5,
                    format!("q={q} p={p} lambda*={} error {err:e}", r.lambda_star),
                ));
            }
            Err(e) => out.push(check(name, false, e.to_string())),
        }
    }

    for (p, want) in [(1.0, Verdict::CaseA), (-1.0, Verdict::CaseC)] {
        match classify(&constant(0.0, p), &hp(), &ip) {
            Ok(c) => out.push(check(
                "autonomous verdict",
                c.verdict == want,
                format!("p={p} {}", c.verdict),
            )),
            Err(e) => out.push(check("autonomous verdict", false, e.to_string())),
        }
    }

    match lambda_infinity_gap(&PiecewisePath::constant(0.0), 2.0, &opts, &hp(), &ip) {
        Ok(r) => {
            let err = (r.lambda - 1.0).abs();
            out.push(check(
                "gap root for p = 0",
                err <= 1e-5,
                format!("lambda {} error {err:e}", r.lambda),
            ));
        }
        Err(e) => out.push(check("gap root for p = 0", false, e.to_string())),
    }

    let spec = TransitionSpec::continuous(PiecewisePath::arctan()).expect("arctan transition");
    for (p, want) in [(1.5, PredictedCase::CaseA), (0.5, PredictedCase::CaseC)] {
        match limit_criterion(
            &PiecewisePath::constant(p),
            &spec,
            0.0,
            Direction::PlusInfinity,
            &hp(),
            &ip,
        ) {
            Ok(r) => out.push(check(
                "step-limit prediction",
                r.case == want,
                format!("p={p} {:?}", r.case),
            )),
            Err(e) => out.push(check("step-limit prediction", false, e.to_string())),
        }
    }

    match d_infinity_curve(&PiecewisePath::constant(1.0), &spec, &[-5.0, 0.0, 5.0], &hp(), &ip) {
        Ok(d) => {
            let worst = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            out.push(check("flat shift curve", worst < 1e-6, format!("max |d| {worst:e}")));
        }
        Err(e) => out.push(check("flat shift curve", false, e.to_string())),
    }
    out
}

pub fn run_suite(out_dir: Option<&Path>) -> io::Result<i32> {
    let results = checks();
    for c in &results {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} of {} oracle checks passed", results.len() - failed, results.len());
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut body = serde_json::to_string_pretty(&results).expect("serializable");
        body.push('\n');
        std::fs::write(dir.join("oracle.json"), body)?;
    }
    Ok(if failed == 0 { 0 } else { 1 })
}
