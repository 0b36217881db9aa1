//! Fast oracle checks run by `neumann-lab selftest`.

use std::f64::consts::PI;

use crate::checks::bochner::bochner_gamma2;
use crate::checks::isoperimetric::{gaussian_profile, gaussian_profile_derivatives};
use crate::checks::statements::{CheckContext, CheckOptions, LhsOracle};
use crate::checks::{check_statement, kconst, StatementId, Verdict};
use crate::geometry::ManifoldModel;
use crate::pde::{solve_neumann_heat, GridResolution};
use crate::point::Point;
use crate::sde::SimParams;
use crate::semigroup::{estimate_pt, summarize, SummaryRequest, TestFunction};
use crate::stats::{mean_se, FRAC_1_SQRT_2PI};

type Check = (&'static str, fn() -> Result<(), String>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kconst_limits() -> Result<(), String> {
    ensure(kconst(0.0, 2.0) == (4.0, 0.5, 0.125), || format!("{:?}", kconst(0.0, 2.0)))?;
    let (a, b, c) = kconst(1e-12, 1.0);
    ensure((a / 2.0 - 1.0).abs() < 1e-6 && (b - 1.0).abs() < 1e-6 && (c / 0.5 - 1.0).abs() < 1e-6, || {
        format!("({a}, {b}, {c})")
    })
}

fn profile() -> Result<(), String> {
    ensure(gaussian_profile(0.0) == 0.0 && gaussian_profile(1.0) == 0.0, || "endpoints".into())?;
    ensure((gaussian_profile(0.5) - FRAC_1_SQRT_2PI).abs() < 1e-10, || "U(1/2)".into())?;
    for i in 1..10 {
        let (u, _, d2) = gaussian_profile_derivatives(i as f64 / 10.0);
        ensure((u * d2 + 1.0).abs() < 1e-8, || format!("UU'' at {}", i as f64 / 10.0))?;
    }
    Ok(())
}

fn interval_pde() -> Result<(), String> {
    let m = ManifoldModel::interval(0.0, PI).map_err(|e| e.to_string())?;
    let f = TestFunction::Cosine { amplitude: 1.0, offset: 0.0 };
    let u = solve_neumann_heat(&m, &f, 0.5, &GridResolution::for_model(&m)).map_err(|e| e.to_string())?;
    for x in [PI / 2.0 - 0.5, PI / 2.0 + 0.5] {
        let got = u.value_at(Point::on_line(x));
        let want = (-0.5f64).exp() * x.cos();
        ensure((got - want).abs() < 1e-4, || format!("P_0.5 cos({x}) = {got}, want {want}"))?;
    }
    Ok(())
}

fn interval_mc() -> Result<(), String> {
    let m = ManifoldModel::interval(0.0, PI).map_err(|e| e.to_string())?;
    let f = TestFunction::Cosine { amplitude: 1.0, offset: 0.0 };
    let x = PI / 2.0 + 0.5;
    let e = estimate_pt(&m, &f, Point::on_line(x), 0.5, &SimParams::new(1e-3, 20_000, 7)).map_err(|e| e.to_string())?;
    let want = (-0.5f64).exp() * x.cos();
    ensure((e.mean - want).abs() <= 3.0 * e.std_error + 1e-3, || format!("{} ± {} vs {want}", e.mean, e.std_error))
}

fn local_time_mean() -> Result<(), String> {
    let m = ManifoldModel::half_line();
    let s = summarize(&m, Point::ZERO, 0.1, &SimParams::new(1e-5, 5_000, 11), &SummaryRequest::default())
        .map_err(|e| e.to_string())?;
    let l: Vec<f64> = s.iter().map(|p| p.l_t).collect();
    let (mean, se) = mean_se(&l);
    let want = 2.0 * (0.1 / PI).sqrt();
    ensure((mean - want).abs() <= (3.0 * se).max(0.03 * want), || format!("{mean} ± {se} vs {want}"))
}

fn bochner_points() -> Result<(), String> {
    for m in [
        ManifoldModel::disk(1.0).unwrap().with_linear_drift(-1.0).unwrap(),
        ManifoldModel::annulus(0.5, 1.5).unwrap().with_linear_drift(1.0).unwrap(),
    ] {
        for f in TestFunction::registry(&m) {
            for x in [Point::new(0.3, 0.55), Point::new(-0.7, 0.2)] {
                if !m.contains(x) {
                    continue;
                }
                if let Ok(g) = bochner_gamma2(&m, &f, x) {
                    ensure(g.holds(1e-5), || format!("{m} {f} {x}: {g:?}"))?;
                    ensure((g.gamma2 - g.symbolic).abs() < 1e-6, || format!("{m} {f} {x}: {g:?}"))?;
                }
            }
        }
    }
    Ok(())
}

fn poincare_is_half_log_sobolev() -> Result<(), String> {
    let m = ManifoldModel::annulus(0.5, 1.5).map_err(|e| e.to_string())?;
    let f = TestFunction::RadialPoly;
    let x = Point::new(1.0, 0.0);
    let ctx = CheckContext::new(&m, x, 0.05, &SimParams::new(1e-3, 2_000, 3), &CheckOptions::default())
        .map_err(|e| e.to_string())?;
    let lhs = LhsOracle::exact(&m, &f, x);
    let r4 = ctx.check(StatementId::S4, &f, &lhs).map_err(|e| e.to_string())?;
    let r5 = ctx.check(StatementId::S5, &f, &lhs).map_err(|e| e.to_string())?;
    ensure(r5.rhs == r4.rhs / 2.0, || format!("{} vs {}", r5.rhs, r4.rhs))
}

fn flat_gradient_bound() -> Result<(), String> {
    let m = ManifoldModel::disk(1.0).map_err(|e| e.to_string())?;
    let r = check_statement(
        StatementId::S3,
        &m,
        &TestFunction::Coordinate { axis: 0 },
        Point::ZERO,
        0.1,
        &SimParams::new(1e-3, 2_000, 5),
        &CheckOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(r.verdict == Verdict::Pass, || format!("{r:?}"))
}

pub const CHECKS: &[Check] = &[
    ("kconst limits", kconst_limits),
    ("gaussian profile", profile),
    ("interval cosine, PDE", interval_pde),
    ("interval cosine, Monte Carlo", interval_mc),
    ("half-line local time mean", local_time_mean),
    ("Bochner inequality at sample points", bochner_points),
    ("Poincaré right side is half the log-Sobolev one", poincare_is_half_log_sobolev),
    ("flat disk gradient bound", flat_gradient_bound),
];

/// Runs every check, printing one line each; exit code 0 iff all pass.
pub fn run() -> i32 {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    i32::from(failed > 0)
}
