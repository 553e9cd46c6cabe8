//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test --release -p tipscan-cli --test acceptance`.

use std::f64::consts::FRAC_2_PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use tipscan_core::bifurcation::{
    compute_cell, lambda_infinity_gap, lambda_star_with_policy, BisectionOptions, HorizonPolicy, Model, ModelKind,
    SecondAxis,
};
use tipscan_core::coeffs::{quasiperiodic_forcing, PiecewisePath, ProblemSpec, Rate, Side, TransitionSpec};
use tipscan_core::hullscan::{d_infinity_curve, lambda_infinity_curve};
use tipscan_core::ivp::{integrate, FnRhs, IvpParams};
use tipscan_core::pullback::{
    auxiliary_m_bound, auxiliary_rhs, certify_with_subsolution, pullback_attractor, pullback_attractor_rhs,
    HorizonParams,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn opts() -> BisectionOptions {
    BisectionOptions::default()
}

fn policy() -> HorizonPolicy {
    HorizonPolicy::default()
}

fn ip() -> IvpParams {
    IvpParams::default()
}

fn model(kind: ModelKind, base: PiecewisePath) -> Model {
    Model {
        kind,
        base,
        forcing: quasiperiodic_forcing(),
        offset: 0.0,
    }
}

fn star(m: &Model, c: f64, h: f64) -> Result<f64, String> {
    let cell = compute_cell(m, c, SecondAxis::Hold(h), &opts(), &policy(), &ip());
    cell.lambda_star
        .ok_or_else(|| format!("c={c} h={h}: {}", cell.error.unwrap_or_default()))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn constant_oracle() -> Outcome {
    let mut worst = 0.0_f64;
    for q in [-2.0, 0.0, 2.0] {
        for p in [-1.0, 0.0, 1.0] {
            let r =
                lambda_star_with_policy(&ProblemSpec::from_constants(q, p), &opts(), &policy(), &ip()).map_err(err)?;
            worst = worst.max((r.lambda_star - (-p - q * q / 4.0)).abs());
        }
    }
    verdict(worst <= 1e-5, format!("max error {worst:.2e} (tol 1e-5)"))
}

fn shift_law() -> Outcome {
    let prob = model(ModelKind::Rate, PiecewisePath::arctan())
        .problem(Rate::Finite(0.2), SecondAxis::Hold(0.0))
        .map_err(err)?;
    let base = lambda_star_with_policy(&prob, &opts(), &policy(), &ip())
        .map_err(err)?
        .lambda_star;
    let moved = lambda_star_with_policy(&prob.with_offset(0.5), &opts(), &policy(), &ip())
        .map_err(err)?
        .lambda_star;
    let diff = (moved - (base - 0.5)).abs();
    verdict(diff <= 2e-6, format!("|difference| {diff:.2e} (tol 2e-6)"))
}

fn sign_region() -> Outcome {
    let m = model(ModelKind::Rate, PiecewisePath::arctan());
    let mut max = f64::NEG_INFINITY;
    for c in [0.05, 0.1, 0.15, 0.2, 0.25] {
        max = max.max(star(&m, c, 0.0)?);
    }
    verdict(max < -1e-4, format!("largest lambda* {max:.6} (need < -1e-4)"))
}

fn escape_time() -> Outcome {
    let rhs = FnRhs::new(|_, y, _: Side| -y * y, Vec::new());
    let tr = integrate(&rhs, 0.0, -1.0, 10.0, &[], Some(1.0), &ip()).map_err(err)?;
    let e = tr.escape().ok_or("no escape reported")?;
    let diff = (e.t_escape - 1.0).abs();
    verdict(diff <= 1e-6, format!("t_escape {:.10} (tol 1e-6)", e.t_escape))
}

fn size_model() -> Outcome {
    let m = model(ModelKind::Size, PiecewisePath::arctan());
    let tol = opts().tol_lambda;
    let cs = [0.0, 0.5, 1.0, 1.5, 2.0];
    let vals = cs.iter().map(|&c| star(&m, c, 0.0)).collect::<Result<Vec<_>, _>>()?;
    let mut ok = true;
    for k in 0..cs.len() - 1 {
        let d = vals[k + 1] - vals[k];
        ok &= d >= -2.0 * tol && d <= FRAC_2_PI * (cs[k + 1] - cs[k]) + 2.0 * tol;
    }
    let shown: Vec<String> = vals.iter().map(|v| format!("{v:.5}")).collect();
    verdict(ok, format!("lambda^ = [{}]", shown.join(", ")))
}

fn hull_signs() -> Outcome {
    let p = quasiperiodic_forcing();
    let spec = TransitionSpec::continuous(PiecewisePath::arctan()).map_err(err)?;
    let s: Vec<f64> = (0..=80).map(|k| -40.0 + k as f64).collect();
    let hp = HorizonParams {
        t_match: 1.0,
        t_far: 1000.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    };
    let d = d_infinity_curve(&p, &spec, &s, &hp, &ip()).map_err(err)?;
    let l = lambda_infinity_curve(&p, &spec, &s, &opts(), &policy(), &ip());
    let (mut kept, mut agree, mut failed) = (0, 0, 0);
    for k in 0..s.len() {
        let Some(lk) = l[k].lambda_star else {
            failed += 1;
            continue;
        };
        if d[k].abs().min(lk.abs()) < 1e-3 {
            continue;
        }
        kept += 1;
        if (d[k] > 0.0) == (lk > 0.0) {
            agree += 1;
        }
    }
    verdict(
        failed == 0 && kept > 0 && agree == kept,
        format!(
            "{agree}/{kept} cells agree, {} excluded, {failed} failed",
            s.len() - kept - failed
        ),
    )
}

fn doubled_cross_check() -> Outcome {
    let p = quasiperiodic_forcing();
    let step = ProblemSpec::new(
        TransitionSpec::new(PiecewisePath::arctan().scaled(2.0), Rate::PosInf, 0.0).map_err(err)?,
        p.clone(),
        0.0,
    )
    .map_err(err)?;
    let star = lambda_star_with_policy(&step, &opts(), &policy(), &ip())
        .map_err(err)?
        .lambda_star;
    let hp = HorizonParams {
        t_match: 1.0,
        t_far: 1000.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    };
    let gap = lambda_infinity_gap(&p, 4.0, &opts(), &hp, &ip()).map_err(err)?.lambda;
    let diff = (star - gap).abs();
    verdict(
        star > 0.0 && diff <= 1e-4,
        format!("step lambda* {star:.7}, gap root {gap:.7}, |difference| {diff:.2e} (tol 1e-4)"),
    )
}

fn certificate() -> Outcome {
    let p = quasiperiodic_forcing();
    let rhs = auxiliary_rhs(&p);
    let b = pullback_attractor_rhs(&rhs, auxiliary_m_bound(&p), &HorizonParams::classic(), &ip()).map_err(err)?;
    if !b.is_completed() {
        return Err("auxiliary solution escaped".into());
    }
    let mut ok = true;
    for g in [-0.1, 0.0, 0.1] {
        let prob = ProblemSpec::new(
            TransitionSpec::continuous(PiecewisePath::constant(g)).map_err(err)?,
            p.clone(),
            0.0,
        )
        .map_err(err)?;
        ok &= certify_with_subsolution(&prob, &b, 0.01, ip().abs_tol).map_err(err)?;
    }
    verdict(
        ok,
        format!(
            "certified on [{}, {}] for gamma in {{-0.1, 0, 0.1}}",
            b.t_start(),
            b.t_end()
        ),
    )
}

fn h_continuity() -> Outcome {
    let m = model(ModelKind::Rate, PiecewisePath::arctan());
    let base = star(&m, 1.0, 0.0)?;
    let diffs = [1.0, 0.5, 0.25, 0.125]
        .iter()
        .map(|&h| star(&m, 1.0, h).map(|v| (v - base).abs()))
        .collect::<Result<Vec<_>, _>>()?;
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    let last = diffs[3];
    let shown: Vec<String> = diffs.iter().map(|v| format!("{v:.6}")).collect();
    verdict(
        decreasing && last <= 5e-3,
        format!("|differences| [{}] (last <= 5e-3)", shown.join(", ")),
    )
}

fn collision() -> Outcome {
    let mut worst = 0.0_f64;
    for c in [0.5, 5.0, 50.0] {
        for h in [0.0, 1.0, 6.0] {
            let prob = model(ModelKind::Rate, PiecewisePath::arctan())
                .problem(Rate::Finite(c), SecondAxis::Hold(h))
                .map_err(err)?;
            let mut vals = Vec::new();
            for t_far in [85.0, 100.0, 500.0] {
                let tr = pullback_attractor(&prob, &HorizonParams::classic().with_t_far(t_far), &ip()).map_err(err)?;
                vals.push(tr.value_at(-35.0).ok_or(format!("c={c} h={h}: escaped before -35"))?);
            }
            for a in &vals {
                for b in &vals {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    verdict(worst <= 1e-6, format!("max pairwise difference {worst:.2e} (tol 1e-6)"))
}

fn determinism() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let cfg = root.join("configs/sweep_5x5.json");
    let dir = tempfile::tempdir().map_err(err)?;
    let mut csvs = Vec::new();
    let started = Instant::now();
    for jobs in ["1", "8"] {
        let out = dir.path().join(jobs);
        let status = Command::new(env!("CARGO_BIN_EXE_tipscan"))
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--jobs", jobs, "--format", "csv"])
            .stderr(std::process::Stdio::null())
            .status()
            .map_err(err)?;
        if !status.success() {
            return Err(format!("sweep --jobs {jobs} exited with {status}"));
        }
        csvs.push(std::fs::read(out.join("surface.csv")).map_err(err)?);
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        csvs[0] == csvs[1] && secs < 600.0,
        format!(
            "identical: {}, {} bytes, both runs {secs:.1}s",
            csvs[0] == csvs[1],
            csvs[0].len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("constant-coefficient lambda* oracle", constant_oracle),
        ("shift law at c = 0.2", shift_law),
        ("negative lambda* for c in [0.05, 0.25]", sign_region),
        ("escape time of x' = -x^2", escape_time),
        ("size model monotone and Lipschitz", size_model),
        ("d_inf and lambda_inf signs agree", hull_signs),
        ("doubled step lambda* equals gap root", doubled_cross_check),
        ("sub-solution certificate", certificate),
        ("continuity as h -> 0 at c = 1", h_continuity),
        ("attractor independent of launch time", collision),
        ("sweep CSV independent of --jobs", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{secs:.1}s]", k + 1);
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
