use proptest::prelude::*;
use tipscan_core::coeffs::*;
use tipscan_core::ivp::*;

fn quasiperiodic(c: f64, h: f64, lambda: f64) -> ProblemSpec {
    let spec = TransitionSpec::new(PiecewisePath::arctan(), Rate::Finite(c), h).unwrap();
    ProblemSpec::new(spec, quasiperiodic_forcing(), lambda).unwrap()
}

#[test]
fn step_halving_self_consistency() {
    let prob = quasiperiodic(1.0, 0.0, 0.0);
    let ip = IvpParams::default();
    let coarse = integrate(&prob, -500.0, 3.5, -35.0, &[], None, &ip).unwrap();
    let fine = integrate(&prob, -500.0, 3.5, -35.0, &[], None, &ip.scaled_tolerances(0.5)).unwrap();
    assert!((coarse.last_value() - fine.last_value()).abs() < 1e-7);
}

#[test]
fn breakpoint_consistency() {
    for h in [0.3, 1.0, 2.5] {
        let prob = quasiperiodic(2.0, h, 0.1);
        let ip = IvpParams::default();
        let whole = integrate(&prob, 0.0, 0.7, 2.0 * h, &[], None, &ip).unwrap();
        let first = integrate(&prob, 0.0, 0.7, h, &[], None, &ip).unwrap();
        let second = integrate(&prob, h, first.last_value(), 2.0 * h, &[], None, &ip).unwrap();
        assert!((whole.last_value() - second.last_value()).abs() < 1e-10, "h = {h}");
        assert!(whole.times.contains(&h));
    }
}

#[test]
fn forward_trapping_below_the_bound() {
    let prob = quasiperiodic(1.0, 0.5, -1.0);
    let ip = IvpParams::default();
    // no escape bound: watch the trajectory dive, then stop before blow-up
    let m = escape_bound(2.0, 2.962 + 1.0 + 1.0, ESCAPE_EPSILON);
    let tr = integrate(&prob, 0.0, -m - 0.01, 0.05, &[], None, &ip).unwrap();
    assert!(tr.values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn escape_reported_for_divergent_start() {
    let prob = quasiperiodic(1.0, 0.0, 0.0);
    let tr = integrate(&prob, 0.0, -2.0, 50.0, &[], Some(3.4), &IvpParams::default()).unwrap();
    let e = tr.escape().expect("escapes");
    assert_eq!(e.direction, EscapeDirection::Below);
    assert!(e.t_threshold < e.t_escape);
    assert!((tr.last_value() + 3.5).abs() < 1e-12);
    // blow-up follows the threshold by roughly 1/3.5
    assert!(e.t_escape - e.t_threshold < 0.5);
}

#[test]
fn blow_up_time_via_general_rhs() {
    // y' = -y^2 - 1 from y(0) = 0: y = -tan(t), blows up at pi/2
    let rhs = FnRhs::new(|_, y, _: Side| -y * y - 1.0, Vec::new());
    let tr = integrate(
        &rhs,
        0.0,
        0.0,
        5.0,
        &[],
        Some(escape_bound(0.0, 1.0, 1.0)),
        &IvpParams::default(),
    )
    .unwrap();
    assert!((tr.escape().unwrap().t_escape - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
}

#[test]
fn dense_output_at_nodes_is_exact() {
    let prob = quasiperiodic(0.5, 0.0, 0.0);
    let tr = integrate(&prob, -10.0, 1.0, 10.0, &[], None, &IvpParams::default()).unwrap();
    for (t, y) in tr.times.iter().zip(&tr.values) {
        assert_eq!(tr.value_at(*t), Some(*y));
    }
    assert_eq!(tr.value_at(10.5), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn direction_symmetry(c in 0.1..5.0f64, h in prop_oneof![Just(0.0), 0.2..2.0f64], y0 in -0.5..0.5f64, span in 1.0..4.0f64) {
        let prob = quasiperiodic(c, h, 0.2);
        let ip = IvpParams::default();
        let t0 = 3.0;
        let back = integrate(&prob, t0, y0, t0 - span, &[], None, &ip).unwrap();
        let path = prob.transition.path().clone();
        let forcing = prob.forcing.clone();
        let reflected = FnRhs::new(
            move |t: f64, y: f64, side: Side| {
                let side = if side == Side::Left { Side::Right } else { Side::Left };
                let d = y - path.eval_side(-t, side);
                d * d - forcing.eval_side(-t, side) - 0.2
            },
            vec![prob.transition.path().clone().dilated(-1.0)],
        );
        let fwd = integrate(&reflected, -t0, y0, span - t0, &[], None, &ip).unwrap();
        prop_assert!((back.last_value() - fwd.last_value()).abs() < 1e-9,
            "{} vs {}", back.last_value(), fwd.last_value());
    }

    #[test]
    fn halving_tolerances_changes_little(c in 0.1..5.0f64, h in prop_oneof![Just(0.0), 0.2..2.0f64], y0 in 0.0..2.0f64) {
        let prob = quasiperiodic(c, h, 0.3);
        let ip = IvpParams::default();
        let a = integrate(&prob, -10.0, y0, 10.0, &[], None, &ip).unwrap();
        let b = integrate(&prob, -10.0, y0, 10.0, &[], None, &ip.scaled_tolerances(0.5)).unwrap();
        prop_assert!((a.last_value() - b.last_value()).abs() < 1e-7);
    }

    #[test]
    fn tanh_anywhere(t1 in 0.1..20.0f64, y0 in -0.9..0.9f64) {
        let rhs = FnRhs::new(|_, y, _: Side| 1.0 - y * y, Vec::new());
        let tr = integrate(&rhs, 0.0, y0, t1, &[], None, &IvpParams::default()).unwrap();
        let exact = (t1 + y0.atanh()).tanh();
        prop_assert!((tr.last_value() - exact).abs() < 1e-8);
    }

    #[test]
    fn times_never_straddle_breakpoints(c in 0.1..5.0f64, h in 0.05..1.0f64) {
        let prob = quasiperiodic(c, h, 0.0);
        let tr = integrate(&prob, -4.0, 1.0, 4.0, &[], Some(3.4), &IvpParams::default()).unwrap();
        for b in prob.transition.path().breakpoints(-4.0, tr.t_end()) {
            prop_assert!(tr.times.contains(&b), "breakpoint {} missing", b);
        }
    }
}
