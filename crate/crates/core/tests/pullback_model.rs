use tipscan_core::coeffs::*;
use tipscan_core::ivp::IvpParams;
use tipscan_core::pullback::*;

fn model(c: Rate, h: f64, lambda: f64) -> ProblemSpec {
    let spec = TransitionSpec::new(PiecewisePath::arctan(), c, h).unwrap();
    ProblemSpec::new(spec, quasiperiodic_forcing(), lambda).unwrap()
}

fn constant(gamma: f64, p: f64) -> ProblemSpec {
    ProblemSpec::new(
        TransitionSpec::continuous(PiecewisePath::constant(gamma)).unwrap(),
        PiecewisePath::constant(p),
        0.0,
    )
    .unwrap()
}

#[test]
fn slow_rate_is_case_a_with_complete_pair() {
    let prob = model(Rate::Finite(0.1), 0.0, 0.0);
    let hp = HorizonParams::classic();
    let ip = IvpParams::default();
    let c = classify(&prob, &hp, &ip).unwrap();
    assert_eq!(c.verdict, Verdict::CaseA);
    assert!(c.gap.unwrap() > hp.tol_gap);
    assert!(c.escape.is_none());

    let a = pullback_attractor(&prob, &hp, &ip).unwrap();
    assert!(a.is_completed() && a.covers(35.0));
    let r = pullback_repeller(&prob, &hp, &ip).unwrap();
    assert!(r.is_completed() && r.covers(-35.0));
    assert!(a.value_at(0.0).unwrap() > r.value_at(0.0).unwrap());
}

#[test]
fn attractor_forgets_its_launch_time() {
    let ip = IvpParams::default();
    for c in [0.1, 0.5, 5.0] {
        for h in [0.0, 1.0] {
            let prob = model(Rate::Finite(c), h, 0.0);
            let values: Vec<f64> = [85.0, 100.0, 500.0]
                .iter()
                .map(|&t_far| {
                    let hp = HorizonParams::classic().with_t_far(t_far);
                    pullback_attractor(&prob, &hp, &ip).unwrap().value_at(-35.0).unwrap()
                })
                .collect();
            for x in &values {
                assert!((x - values[0]).abs() < 1e-6, "c={c} h={h} {values:?}");
            }
        }
    }
}

#[test]
fn repeller_is_the_attractor_of_the_reversed_equation() {
    // z(t) = -y(-t) solves the equation with Gamma*(t) = -Gamma(-t), p*(t) = p(-t)
    let ip = IvpParams::default();
    let hp = HorizonParams::classic();
    for (c, h) in [(0.1, 0.0), (2.0, 1.0), (1.0, 0.5)] {
        let prob = model(Rate::Finite(c), h, 0.0);
        let reversed = ProblemSpec::new(
            TransitionSpec::continuous(prob.transition.path().clone().dilated(-1.0).scaled(-1.0)).unwrap(),
            prob.forcing.clone().dilated(-1.0),
            0.0,
        )
        .unwrap();
        assert_eq!(m_bound(&prob), m_bound(&reversed));
        let r = pullback_repeller(&prob, &hp, &ip).unwrap();
        let a_rev = pullback_attractor(&reversed, &hp, &ip).unwrap();
        assert_eq!(r.is_completed(), a_rev.is_completed());
        if let (Some(e), Some(e_rev)) = (r.escape(), a_rev.escape()) {
            assert!((e.t_escape + e_rev.t_escape).abs() < 1e-6, "{e:?} {e_rev:?}");
        }
        assert!((r.t_end() + a_rev.t_end()).abs() < 1e-9);
        for t in [-35.0, -10.0, 0.0, 0.25, 7.5, 35.0] {
            let (Some(lhs), Some(rhs)) = (r.value_at(t), a_rev.value_at(-t)) else {
                continue;
            };
            assert!((lhs + rhs).abs() < 1e-8, "c={c} h={h} t={t}: {lhs} vs {}", -rhs);
        }
    }
}

#[test]
fn separation_exponents_have_the_right_signs() {
    let ip = IvpParams::default();
    let hp = HorizonParams::classic();
    for (c, h) in [(0.1, 0.0), (0.2, 0.0), (1.0, 1.0)] {
        let prob = model(Rate::Finite(c), h, 0.0);
        let cl = classify(&prob, &hp, &ip).unwrap();
        if cl.verdict != Verdict::CaseA {
            continue;
        }
        let a = pullback_attractor(&prob, &hp, &ip).unwrap();
        let r = pullback_repeller(&prob, &hp, &ip).unwrap();
        for window in [(-35.0, 35.0), (-30.0, -10.0), (5.0, 25.0)] {
            assert!(
                separation_exponent(&prob, &a, window).unwrap().attractive,
                "c={c} {window:?}"
            );
            assert!(
                !separation_exponent(&prob, &r, window).unwrap().attractive,
                "c={c} {window:?}"
            );
        }
    }
}

#[test]
fn separation_window_must_be_covered() {
    let prob = constant(0.0, 1.0);
    let hp = HorizonParams {
        t_match: 1.0,
        t_far: 20.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    };
    let a = pullback_attractor(&prob, &hp, &IvpParams::default()).unwrap();
    assert!(matches!(
        separation_exponent(&prob, &a, (-30.0, 0.0)),
        Err(PullbackError::WindowOutOfRange { .. })
    ));
    let d = separation_exponent(&prob, &a, (-5.0, 5.0)).unwrap();
    assert!((d.exponent + 2.0).abs() < 1e-6);
}

#[test]
fn verdicts_survive_the_robustness_reruns() {
    let ip = IvpParams::default();
    let hp = HorizonParams {
        t_match: 35.0,
        t_far: 200.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    };
    for prob in [
        model(Rate::Finite(0.1), 0.0, 0.0),
        model(Rate::PosInf, 0.0, 0.0),
        constant(0.5, 1.0),
    ] {
        let v = classify_launch(&prob, &hp, &ip, 0.0).unwrap().verdict;
        let report = robustness_checks(&prob, &hp, &ip).unwrap();
        assert!(report.consistent_with(v), "{v} {report:?}");
    }
}

#[test]
fn verdicts_either_side_of_the_constant_bifurcation() {
    let ip = IvpParams::default();
    let hp = HorizonParams {
        t_match: 1.0,
        t_far: 300.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    };
    for q in [-2.0, 0.0, 2.0] {
        for p in [-1.0, 0.0, 1.0] {
            let star = -p - q * q / 4.0;
            let prob = ProblemSpec::from_constants(q, p);
            let above = classify(&prob.with_offset(star + 0.1), &hp, &ip).unwrap();
            let below = classify(&prob.with_offset(star - 0.1), &hp, &ip).unwrap();
            assert_eq!(above.verdict, Verdict::CaseA, "q={q} p={p}");
            assert_eq!(below.verdict, Verdict::CaseC, "q={q} p={p}");
            assert!(below.escape.is_some());
        }
    }
}

#[test]
fn auxiliary_solution_certifies_small_constant_transitions() {
    let forcing = quasiperiodic_forcing();
    let ip = IvpParams::default();
    let hp = HorizonParams::classic();
    let rhs = auxiliary_rhs(&forcing);
    let b = pullback_attractor_rhs(&rhs, auxiliary_m_bound(&forcing), &hp, &ip).unwrap();
    assert!(b.is_completed());
    for g in [-0.1, 0.0, 0.1] {
        let prob = ProblemSpec::new(
            TransitionSpec::continuous(PiecewisePath::constant(g)).unwrap(),
            forcing.clone(),
            0.0,
        )
        .unwrap();
        assert!(
            certify_with_subsolution(&prob, &b, 0.01, ip.abs_tol).unwrap(),
            "gamma = {g}"
        );
    }
    // a large constant transition breaks the inequality somewhere
    let far = ProblemSpec::new(
        TransitionSpec::continuous(PiecewisePath::constant(3.0)).unwrap(),
        forcing.clone(),
        0.0,
    )
    .unwrap();
    assert!(!certify_with_subsolution(&far, &b, 0.01, ip.abs_tol).unwrap());
}

#[test]
fn summary_serializes() {
    let prob = constant(0.0, 1.0);
    let hp = HorizonParams {
        t_match: 1.0,
        t_far: 50.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    };
    let c = classify(&prob, &hp, &IvpParams::default()).unwrap();
    let json: serde_json::Value = serde_json::to_value(c.summary()).unwrap();
    assert_eq!(json["verdict"], "CaseA");
    assert!((json["gap"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(json["trace_summary"]["attractor"]["completed"].as_bool().unwrap());
}
