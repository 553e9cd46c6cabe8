use tipscan_core::bifurcation::*;
use tipscan_core::coeffs::*;
use tipscan_core::hullscan::*;
use tipscan_core::ivp::IvpParams;
use tipscan_core::pullback::HorizonParams;

fn hp() -> HorizonParams {
    HorizonParams {
        t_match: 1.0,
        t_far: 1000.0,
        tol_gap: 1e-4,
        delta_tail: 0.1,
    }
}

fn arctan() -> TransitionSpec {
    TransitionSpec::continuous(PiecewisePath::arctan()).unwrap()
}

fn scaled_arctan(k: f64) -> TransitionSpec {
    TransitionSpec::continuous(PiecewisePath::arctan().scaled(k)).unwrap()
}

fn grid(step: f64) -> Vec<f64> {
    let n = (80.0 / step).round() as usize;
    (0..=n).map(|k| -40.0 + step * k as f64).collect()
}

fn defaults() -> (BisectionOptions, HorizonPolicy, IvpParams) {
    (
        BisectionOptions::default(),
        HorizonPolicy::default(),
        IvpParams::default(),
    )
}

#[test]
fn constant_forcing_gives_a_flat_negative_curve() {
    let (opts, policy, ip) = defaults();
    let one = PiecewisePath::constant(1.0);
    let cells = lambda_infinity_curve(&one, &scaled_arctan(0.5), &[-7.0, 0.0, 12.5], &opts, &policy, &ip);
    let values: Vec<f64> = cells.iter().map(|c| c.lambda_star.unwrap()).collect();
    assert!(values[0] < 0.0);
    for v in &values {
        assert!((v - values[0]).abs() <= 2.0 * opts.tol_lambda, "{values:?}");
    }
    assert_eq!(cells[2].axis2, 12.5);
}

#[test]
fn zero_shift_is_the_unshifted_step_equation() {
    let (opts, policy, ip) = defaults();
    let p = quasiperiodic_forcing();
    let spec = arctan();
    let curve = lambda_infinity_curve(&p, &spec, &[0.0], &opts, &policy, &ip);
    let step = ProblemSpec::new(
        TransitionSpec::new(spec.base().clone(), Rate::PosInf, 0.0).unwrap(),
        p,
        0.0,
    )
    .unwrap();
    let direct = lambda_star_with_policy(&step, &opts, &policy, &ip).unwrap();
    assert_eq!(curve[0].lambda_star, Some(direct.lambda_star));
}

#[test]
fn arctan_d_curve_takes_both_signs() {
    let d = d_infinity_curve(
        &quasiperiodic_forcing(),
        &arctan(),
        &default_s_grid(),
        &hp(),
        &IvpParams::default(),
    )
    .unwrap();
    assert_eq!(d.len(), 161);
    assert!(d.iter().any(|&v| v > 1e-3));
    assert!(d.iter().any(|&v| v < -1e-3));
}

#[test]
fn d_curve_matches_fresh_pairs() {
    let p = quasiperiodic_forcing();
    let ip = IvpParams::default();
    let s_grid = [-33.0, -4.5, 0.0, 17.0, 40.0];
    let d = d_infinity_curve(&p, &arctan(), &s_grid, &hp(), &ip).unwrap();
    for (k, &s) in s_grid.iter().enumerate() {
        let (a, r) = untransitioned_pair_at(&p, 0.0, s, &hp(), &ip).unwrap().unwrap();
        let fresh = 2.0 - a + r;
        assert!((fresh - d[k]).abs() < 1e-6, "s={s}: {fresh} vs {}", d[k]);
    }
}

#[test]
fn limit_prediction_matches_the_d_sign() {
    let p = quasiperiodic_forcing();
    let ip = IvpParams::default();
    let spec = arctan();
    for s in [-10.0, 0.0, 6.0, 21.0] {
        let ps = shift_forcing(&p, s);
        let d = d_infinity_curve(&ps, &spec, &[0.0], &hp(), &ip).unwrap()[0];
        let pred = limit_criterion(&ps, &spec, 0.0, Direction::PlusInfinity, &hp(), &ip).unwrap();
        let expected = if d < -hp().tol_gap {
            PredictedCase::CaseA
        } else if d > hp().tol_gap {
            PredictedCase::CaseC
        } else {
            PredictedCase::Borderline
        };
        assert_eq!(pred.case, expected, "s={s} d={d}");
        assert!((pred.lhs.unwrap() - pred.rhs + d).abs() < 1e-12);
    }
}

#[test]
fn shifting_the_forcing_equals_shifting_the_transition() {
    let (opts, policy, ip) = defaults();
    let p = quasiperiodic_forcing();
    for s in [-6.0, 2.5] {
        for c in [Rate::PosInf, Rate::Finite(1.0)] {
            let step = TransitionSpec::new(PiecewisePath::arctan(), c, 0.0).unwrap();
            let via_forcing = ProblemSpec::new(step.clone(), shift_forcing(&p, s), 0.0).unwrap();
            let moved = TransitionSpec::continuous(step.path().clone().shifted(-s)).unwrap();
            let via_transition = ProblemSpec::new(moved, p.clone(), 0.0).unwrap();
            let a = lambda_star_with_policy(&via_forcing, &opts, &policy, &ip)
                .unwrap()
                .lambda_star;
            let b = lambda_star_with_policy(&via_transition, &opts, &policy, &ip)
                .unwrap()
                .lambda_star;
            assert!((a - b).abs() <= 2.0 * opts.tol_lambda, "s={s} c={c}: {a} vs {b}");
        }
    }
}

#[test]
fn hull_outcomes() {
    let (opts, policy, ip) = defaults();
    let p = quasiperiodic_forcing();
    let s = grid(4.0);
    let unit_step = hull_report(
        &p,
        &arctan(),
        &s,
        Rate::PosInf,
        DEFAULT_BAND,
        &opts,
        &policy,
        &hp(),
        &ip,
    )
    .unwrap();
    assert_eq!(unit_step.outcome, HullOutcome::PartialTipping);
    assert!(unit_step.lambda_c.is_none());
    assert!(
        unit_step.sign_disagreements().is_empty(),
        "{:?}",
        unit_step.sign_disagreements()
    );

    let doubled = hull_report(
        &p,
        &scaled_arctan(2.0),
        &s,
        Rate::PosInf,
        DEFAULT_BAND,
        &opts,
        &policy,
        &hp(),
        &ip,
    )
    .unwrap();
    assert_eq!(doubled.outcome, HullOutcome::TotalTipping);
    assert!(doubled.d_inf.iter().all(|&d| d > 0.0));

    let falling = hull_report(
        &p,
        &scaled_arctan(-1.0),
        &s,
        Rate::PosInf,
        DEFAULT_BAND,
        &opts,
        &policy,
        &hp(),
        &ip,
    )
    .unwrap();
    assert_eq!(falling.outcome, HullOutcome::TotalTracking);
}

#[test]
fn finite_rate_report_carries_its_own_curve() {
    let (opts, policy, ip) = defaults();
    let p = quasiperiodic_forcing();
    let s = [-20.0, 0.0, 20.0];
    let r = hull_report(
        &p,
        &arctan(),
        &s,
        Rate::Finite(0.1),
        DEFAULT_BAND,
        &opts,
        &policy,
        &hp(),
        &ip,
    )
    .unwrap();
    let lc = r.lambda_c.as_ref().unwrap();
    assert_eq!(lc.len(), 3);
    assert_eq!(r.c, Rate::Finite(0.1).to_string());
    // slow transitions track for every shift
    assert!(lc.iter().all(|v| v.unwrap() < 0.0), "{lc:?}");
    assert_eq!(r.outcome, HullOutcome::TotalTracking);
}

#[test]
fn doubled_step_matches_the_gap_root() {
    let (opts, policy, ip) = defaults();
    let p = quasiperiodic_forcing();
    let step = ProblemSpec::new(
        TransitionSpec::new(PiecewisePath::arctan().scaled(2.0), Rate::PosInf, 0.0).unwrap(),
        p.clone(),
        0.0,
    )
    .unwrap();
    let star = lambda_star_with_policy(&step, &opts, &policy, &ip).unwrap().lambda_star;
    assert!(star > 0.0);
    let gap_root = lambda_infinity_gap(&p, 4.0, &opts, &hp(), &ip).unwrap();
    assert!((star - gap_root.lambda).abs() <= 1e-4, "{star} vs {}", gap_root.lambda);
}
