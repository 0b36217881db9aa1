use std::f64::consts::TAU;

use neumann_lab::checks::bochner::bochner_gamma2;
use neumann_lab::checks::isoperimetric::gaussian_profile;
use neumann_lab::checks::{kconst, verdict, Verdict};
use neumann_lab::semigroup::{summarize, SummaryRequest};
use neumann_lab::{ManifoldModel, Point, SimParams, TestFunction};
use proptest::prelude::*;

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => 0,
        Verdict::Inconclusive => 1,
        Verdict::Fail => 2,
    }
}

fn circle_point(r: f64, theta: f64) -> Point {
    Point::new(r * theta.cos(), r * theta.sin())
}

proptest! {
    #[test]
    fn normals_are_unit_and_inward(theta in 0.0..TAU, inner in prop::bool::ANY) {
        let m = ManifoldModel::annulus(0.5, 1.5).unwrap();
        let x = circle_point(if inner { 0.5 } else { 1.5 }, theta);
        let n = m.inward_normal(x).unwrap();
        prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        prop_assert!(m.signed_distance(x + 1e-3 * n) > 0.0);
    }

    #[test]
    fn second_fundamental_form_is_quadratic(theta in 0.0..TAU, c in -5.0f64..5.0) {
        for (m, r) in [(ManifoldModel::disk(1.0).unwrap(), 1.0), (ManifoldModel::annulus(0.5, 1.5).unwrap(), 0.5)] {
            let x = circle_point(r, theta);
            let v = x.perp();
            let base = m.second_fundamental_form(x, v).unwrap();
            let scaled = m.second_fundamental_form(x, c * v).unwrap();
            prop_assert!((scaled - c * c * base).abs() <= 1e-12 * (1.0 + c * c));
        }
    }

    #[test]
    fn projection_lands_in_the_domain(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        for m in [ManifoldModel::disk(1.0).unwrap(), ManifoldModel::annulus(0.5, 1.5).unwrap(), ManifoldModel::rectangle(2.0, 1.0).unwrap()] {
            if let Some(p) = m.project(Point::new(x, y)) {
                prop_assert!(m.signed_distance(p) >= -1e-12, "{} -> {}", Point::new(x, y), p);
                if m.contains(Point::new(x, y)) {
                    prop_assert_eq!(p, Point::new(x, y));
                }
            }
        }
    }

    #[test]
    fn kconst_positive_and_continuous(k in -3.0f64..3.0, t in 0.01f64..5.0) {
        let (a, b, c) = kconst(k, t);
        prop_assert!(a > 0.0 && b > 0.0 && c > 0.0);
        let (a2, b2, c2) = kconst(k + 1e-9, t);
        prop_assert!((a - a2).abs() <= 1e-6 * a && (b - b2).abs() <= 1e-6 * b && (c - c2).abs() <= 1e-6 * c);
    }

    #[test]
    fn larger_lhs_never_improves_the_verdict(lhs in -2.0f64..2.0, bump in 0.0f64..1.0, rhs in -2.0f64..2.0, se in 0.0f64..0.2, margin in 0.0f64..0.2) {
        prop_assert!(rank(verdict(lhs, rhs, se, margin)) <= rank(verdict(lhs + bump, rhs, se, margin)));
        prop_assert!(rank(verdict(lhs, rhs, se, margin + bump)) <= rank(verdict(lhs, rhs, se, margin)));
        if lhs <= rhs {
            prop_assert_eq!(verdict(lhs, rhs, se, margin), Verdict::Pass);
        }
    }

    #[test]
    fn profile_is_symmetric(v in 0.0f64..1.0) {
        let (a, b) = (gaussian_profile(v), gaussian_profile(1.0 - v));
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0 && a <= 1.0 / TAU.sqrt() + 1e-15);
    }

    #[test]
    fn bochner_holds_at_random_points(r in 0.05f64..0.95, theta in 0.0..TAU, a in -2.0f64..2.0) {
        let m = ManifoldModel::disk(1.0).unwrap().with_linear_drift(a).unwrap();
        let x = circle_point(r, theta);
        for f in TestFunction::registry(&m) {
            if let Ok(g) = bochner_gamma2(&m, &f, x) {
                prop_assert!(g.holds(1e-5), "{} {}: {:?}", f, x, g);
                prop_assert!((g.gamma2 - g.symbolic).abs() < 1e-6, "{} {}: {:?}", f, x, g);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn path_results_do_not_depend_on_batch_size(n in 1usize..40, extra in 0usize..2000, seed in any::<u64>()) {
        let m = ManifoldModel::annulus(0.5, 1.5).unwrap();
        let x = Point::new(0.55, 0.0);
        let req = SummaryRequest::constants(2.0, 0.0);
        let small = summarize(&m, x, 0.05, &SimParams::new(1e-3, n, seed), &req).unwrap();
        let big = summarize(&m, x, 0.05, &SimParams::new(1e-3, n + extra, seed), &req).unwrap();
        prop_assert_eq!(&small[..], &big[..n]);
        for s in &small {
            prop_assert!(s.l_t >= 0.0 && m.contains(s.x_t));
        }
    }
}
