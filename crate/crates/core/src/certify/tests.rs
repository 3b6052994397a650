use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::geometry::PolyhedralSet;
use crate::grid::GridSpec;
use crate::problem::{build_example, ExampleId, MinMaxProblem, Point, Smoothness};

fn example(id: ExampleId) -> MinMaxProblem {
    build_example(id, None).unwrap()
}

fn pt(x: f64, y: f64) -> Point {
    Point::new(vec![x], vec![y])
}

fn unit_square(name: &str, smoothness: Smoothness, f: fn(f64, f64) -> f64) -> MinMaxProblem {
    let b = PolyhedralSet::cube(1, -1.0, 1.0).unwrap();
    MinMaxProblem::new(name, b.clone(), b, smoothness, move |x: &[f64], y: &[f64]| f(x[0], y[0]))
}

fn first_order(problem: &MinMaxProblem, p: &Point) -> StationarityReport {
    verify(problem, p, &VerifyOptions { order: 1, ..Default::default() }, &CertifyConfig::default()).unwrap()
}

#[test]
fn quadratic_origin_passes_everything() {
    let p = example(ExampleId::Quadratic5xy);
    let r = verify(&p, &pt(0.0, 0.0), &VerifyOptions::default(), &CertifyConfig::default()).unwrap();
    for id in [GS2_1, GS2_2, GS6_1, GS6_2, FKKT, SKKT] {
        assert!(r.passed(id), "{id}: {:?}", r.outcome(id));
    }
    assert!(r.all_evaluated_pass());
    for id in [NONS1ST_1, NONS1ST_2, NONS2ED_1, NONS2ED_2] {
        assert!(matches!(r.outcome(id), Some(ConditionOutcome::Skipped { .. })));
    }
}

#[test]
fn xy_cos_global_minimax_fails_first_order() {
    let p = example(ExampleId::XyCos);
    let r = first_order(&p, &pt(0.0, PI));
    // ∇_x f = y = π at an interior x.
    assert!(r.outcome(GS2_1).unwrap().is_fail());
    assert!(r.residuals[GS2_1] >= PI - 1e-3);
    assert!(r.passed(GS2_2));
    assert!(!r.all_evaluated_pass());
}

#[test]
fn xy_cos_boundary_points_are_stationary() {
    let p = example(ExampleId::XyCos);
    for q in [pt(1.0, -PI / 2.0), pt(-1.0, PI / 2.0), pt(0.0, 0.0)] {
        let r = first_order(&p, &q);
        assert!(r.passed(GS2_1) && r.passed(GS2_2), "{q}: {:?}", r.conditions);
        assert!(r.passed(FKKT), "{q}");
    }
}

#[test]
fn convex_in_y_fails_second_order_in_y() {
    let p = unit_square("bowl", Smoothness::SmoothC2, |x, y| x * x + y * y);
    let r = verify(&p, &pt(0.0, 0.0), &VerifyOptions::default(), &CertifyConfig::default()).unwrap();
    assert!(r.passed(GS2_1) && r.passed(GS2_2));
    assert!(r.passed(GS6_1));
    match r.outcome(GS6_2).unwrap() {
        ConditionOutcome::Fail { value, .. } => assert!(*value > 0.0),
        o => panic!("expected gs6-2 failure, got {o:?}"),
    }
}

#[test]
fn quartic_second_order_forms_vanish() {
    let p = example(ExampleId::Quartic4x2y2);
    let (res, _) = check_second_order_smooth(&p, &pt(0.0, 0.0), &CertifyConfig::default()).unwrap();
    for r in &res {
        assert!(r.outcome.is_pass(), "{}: {:?}", r.id, r.outcome);
        assert!(r.samples.unwrap() > 0);
        assert!(r.residual.unwrap() <= 1e-8);
    }
}

#[test]
fn kkt_on_upper_bound() {
    // f = −3x + y² − y⁴ at x = 1: −∇_x f = 3 is balanced by the upper-bound row.
    let p = unit_square("ramp", Smoothness::SmoothC2, |x, y| -3.0 * x - y * y * y * y)
        .with_gradients(|_: &[f64], _: &[f64]| vec![-3.0], |_: &[f64], y: &[f64]| vec![-4.0 * y[0].powi(3)]);
    let fit = recover_kkt(&p, &pt(1.0, 0.0), &CertifyConfig::default()).unwrap();
    assert!(fit.accepted);
    assert_eq!(fit.alpha.len(), 2);
    assert_eq!(fit.alpha[0], 0.0);
    assert!((fit.alpha[1] - 3.0).abs() < 1e-10);
    assert!(fit.residual < 1e-10);
    // Moving the point inward breaks complementarity.
    let fit = recover_kkt(&p, &pt(0.5, 0.0), &CertifyConfig::default()).unwrap();
    assert!(!fit.accepted);
    assert!((fit.residual - 3.0).abs() < 1e-10);
    assert!(fit.witness.is_some());
}

#[test]
fn kkt_matches_normal_cone_route_on_boundary_fixtures() {
    let p = example(ExampleId::XyCos);
    let cfg = CertifyConfig::default();
    for q in [pt(1.0, -PI / 2.0), pt(0.0, PI), pt(0.3, 1.0), pt(-1.0, 5.0)] {
        let r = first_order(&p, &q);
        let kkt = recover_kkt(&p, &q, &cfg).unwrap();
        let both = r.passed(GS2_1) && r.passed(GS2_2);
        assert_eq!(both, kkt.accepted, "{q}");
    }
}

#[test]
fn locally_lipschitz_smooth_conditions_not_checkable() {
    let p = example(ExampleId::Nonsmooth935);
    let r = verify(&p, &pt(0.0, 0.0), &VerifyOptions { order: 1, ..Default::default() }, &CertifyConfig::default())
        .unwrap();
    assert!(matches!(r.outcome(GS2_1), Some(ConditionOutcome::NotCheckable { .. })));
    assert!(!r.all_evaluated_pass());
}

fn nonsmooth(problem: &MinMaxProblem, p: &Point) -> StationarityReport {
    let options = VerifyOptions { order: 2, nonsmooth: true, assume_smooth: false };
    verify(problem, p, &options, &CertifyConfig::default()).unwrap()
}

#[test]
fn d_stationarity_nonsmooth_fixture() {
    let p = example(ExampleId::Nonsmooth935);
    let r = nonsmooth(&p, &pt(0.0, 0.0));
    for id in [NONS1ST_1, NONS1ST_2, NONS2ED_1, NONS2ED_2] {
        assert!(r.passed(id), "{id}: {:?}", r.outcome(id));
    }
    assert!(r.direction_samples.counts[NONS1ST_1] >= 2);
}

#[test]
fn d_stationarity_of_abs_difference() {
    let good = unit_square("abs-diff", Smoothness::LocallyLipschitz, |x, y| x.abs() - y.abs());
    let r = nonsmooth(&good, &pt(0.0, 0.0));
    assert!(r.passed(NONS1ST_1) && r.passed(NONS1ST_2), "{:?}", r.conditions);

    let bad = unit_square("abs-diff-flipped", Smoothness::LocallyLipschitz, |x, y| -x.abs() + y.abs());
    let r = nonsmooth(&bad, &pt(0.0, 0.0));
    match r.outcome(NONS1ST_2).unwrap() {
        ConditionOutcome::Fail { value, .. } => assert!((value - 1.0).abs() < 1e-6),
        o => panic!("expected NonS1st-2 failure, got {o:?}"),
    }
    // The Clarke derivative of −|x| at 0 is |v|, so the x-side test cannot
    // detect the local maximum in x.
    assert!(r.passed(NONS1ST_1));
}

#[test]
fn report_records_requested_conditions_only() {
    let p = example(ExampleId::Quadratic5xy);
    let r = first_order(&p, &pt(0.0, 0.0));
    assert_eq!(r.conditions.len(), ALL_CONDITIONS.len());
    assert!(matches!(r.outcome(GS6_1), Some(ConditionOutcome::Skipped { .. })));
    assert!(r.multipliers.is_some());
}

#[test]
fn verify_rejects_bad_inputs() {
    let p = example(ExampleId::Quadratic5xy);
    let cfg = CertifyConfig::default();
    assert!(verify(&p, &pt(2.0, 0.0), &VerifyOptions::default(), &cfg).is_err());
    assert!(verify(&p, &Point::new(vec![0.0, 0.0], vec![0.0]), &VerifyOptions::default(), &cfg).is_err());
    assert!(verify(&p, &pt(0.0, 0.0), &VerifyOptions { order: 3, ..Default::default() }, &cfg).is_err());
}

#[test]
fn classify_quadratic_origin() {
    let p = example(ExampleId::Quadratic5xy);
    let c = classify_point(&p, &pt(0.0, 0.0), &ClassifyConfig::default()).unwrap();
    for l in [Label::GlobalMinimax, Label::LocalMinimax, Label::FirstOrderStationary, Label::SecondOrderStationary] {
        assert!(c.has(l), "missing {l:?}: {:?}", c.labels);
    }
    assert!(!c.has(Label::Saddle) && !c.has(Label::LocalSaddle));
    let fit = c.tau_fit.unwrap();
    // The inner maximizer is y = 2.5x.
    assert_eq!(fit.p, 1.0);
    assert!((fit.c - 2.5).abs() < 1e-6, "{fit:?}");
}

#[test]
fn classify_xy_cos() {
    let p = example(ExampleId::XyCos);
    let cfg = ClassifyConfig::default();
    let c = classify_point(&p, &pt(0.0, PI), &cfg).unwrap();
    assert!(c.has(Label::GlobalMinimax), "{:?}", c.labels);
    assert!(!c.has(Label::FirstOrderStationary));
    assert!(!c.evidence.inner_limit.holds);
    let c = classify_point(&p, &pt(0.0, 0.0), &cfg).unwrap();
    assert!(c.has(Label::FirstOrderStationary));
    assert!(!c.has(Label::LocalMinimax) && !c.has(Label::GlobalMinimax), "{:?}", c.labels);
}

#[test]
fn classify_saddle_of_separable_quadratic() {
    let p = unit_square("separable", Smoothness::SmoothC2, |x, y| x * x - y * y);
    let c = classify_point(&p, &pt(0.0, 0.0), &ClassifyConfig::default()).unwrap();
    for l in [Label::Saddle, Label::LocalSaddle, Label::GlobalMinimax, Label::LocalMinimax] {
        assert!(c.has(l), "missing {l:?}: {:?}", c.labels);
    }
    assert!(c.diagnostics.iter().all(|d| !d.contains("containment")));
}

#[test]
fn classify_rejects_non_decreasing_ladder() {
    let p = example(ExampleId::Quadratic5xy);
    let cfg = ClassifyConfig { ladder: vec![0.1, 0.2], ..Default::default() };
    assert!(classify_point(&p, &pt(0.0, 0.0), &cfg).is_err());
}

#[test]
fn global_search_on_fixtures() {
    let cfg = ClassifyConfig::default();
    let found = search_global_minimax(&example(ExampleId::Quadratic5xy), &cfg).unwrap();
    assert_eq!(found.len(), 1);
    assert!(found[0].x[0].abs() <= 1e-3 && found[0].y[0].abs() <= 1e-3, "{}", found[0]);

    let found = search_global_minimax(&example(ExampleId::XyCos), &cfg).unwrap();
    assert_eq!(found.len(), 2, "{found:?}");
    for q in &found {
        assert!(q.x[0].abs() <= 1e-3);
        assert!((q.y[0].abs() - PI).abs() <= 1e-3, "{q}");
    }
}

#[test]
fn maxmin_gap_values() {
    let p = example(ExampleId::Quadratic5xy);
    for d in [1.0, 0.5, 0.1] {
        let g = maxmin_gap(&p, &pt(0.0, 0.0), d, 201, GridSpec::default().refine_width).unwrap();
        assert!((g + d * d).abs() <= 1e-3, "delta {d}: {g}");
    }
    let s = unit_square("separable", Smoothness::SmoothC2, |x, y| x * x - y * y);
    let g = maxmin_gap(&s, &pt(0.0, 0.0), 0.5, 201, 1e-10).unwrap();
    assert!(g.abs() <= 1e-9, "{g}");
    assert!(maxmin_gap(&p, &pt(0.0, 0.0), 0.0, 201, 1e-10).is_err());
}

#[test]
fn first_order_scan_on_coarse_grid() {
    let p = example(ExampleId::Quadratic5xy);
    let hits = first_order_scan(&p, 21, &CertifyConfig::default()).unwrap();
    assert_eq!(hits, vec![pt(0.0, 0.0)]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Containments between the labels on random quadratics with a strictly
    /// concave inner problem, where the inner maximizer is unique.
    #[test]
    fn label_containments(a in -2.0f64..2.0, b in -3.0f64..3.0, c in -2.0f64..-0.2) {
        let b2 = PolyhedralSet::cube(1, -1.0, 1.0).unwrap();
        let p = MinMaxProblem::new("random-quadratic", b2.clone(), b2, Smoothness::SmoothC2,
            move |x: &[f64], y: &[f64]| a * x[0] * x[0] + b * x[0] * y[0] + c * y[0] * y[0]);
        let cfg = ClassifyConfig { grid: GridSpec::with_nodes(161), local_nodes: 21, ..Default::default() };
        let cl = classify_point(&p, &pt(0.0, 0.0), &cfg).unwrap();
        let has = |l| cl.has(l);
        prop_assert!(!has(Label::Saddle) || has(Label::GlobalMinimax));
        prop_assert!(!has(Label::LocalSaddle) || has(Label::LocalMinimax));
        prop_assert!(!has(Label::LocalMinimax) || has(Label::FirstOrderStationary));
        prop_assert!(!has(Label::SecondOrderStationary) || has(Label::FirstOrderStationary));
        prop_assert!(cl.evidence.inner_limit.inner_unique);
        // A unique inner maximizer makes global minimax points local.
        prop_assert!(!has(Label::GlobalMinimax) || has(Label::LocalMinimax), "{:?} {:?}", cl.labels, cl.diagnostics);
        prop_assert!(cl.diagnostics.iter().all(|d| !d.contains("containment")));
    }
}
