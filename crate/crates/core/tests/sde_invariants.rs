use std::f64::consts::PI;

use neumann_lab::checks::LOCAL_TIME_SHORTFALL;
use neumann_lab::sde::{exit_time, simulate_batch, simulate_reflected_path};
use neumann_lab::semigroup::{estimate_pt, summarize, SummaryRequest};
use neumann_lab::stats::{ks_critical, ks_statistic, linear_fit, mean_se, normal_cdf};
use neumann_lab::{ManifoldModel, Point, SimParams, TestFunction};

fn models() -> Vec<(ManifoldModel, Point)> {
    vec![
        (ManifoldModel::half_line(), Point::on_line(0.2)),
        (ManifoldModel::interval(0.0, 1.0).unwrap(), Point::on_line(0.2)),
        (ManifoldModel::disk(1.0).unwrap().with_linear_drift(-1.0).unwrap(), Point::new(0.3, 0.1)),
        (ManifoldModel::annulus(0.5, 1.5).unwrap(), Point::new(1.0, 0.0)),
        (ManifoldModel::rectangle(2.0, 1.0).unwrap().with_linear_drift(1.0).unwrap(), Point::new(0.3, 0.1)),
    ]
}

#[test]
fn paths_stay_in_domain_and_local_time_grows_only_on_boundary() {
    for (m, x0) in models() {
        let params = SimParams::new(1e-3, 200, 3);
        let paths = simulate_batch(&m, x0, 0.5, &params).unwrap();
        let tol = 1e-12 * m.shape.diameter().min(1e3);
        for p in &paths {
            assert_eq!(p.positions.len(), p.n_steps() + 1);
            for (i, x) in p.positions.iter().enumerate() {
                assert!(m.signed_distance(*x) >= -tol, "{m}: {x} left the domain");
                if i > 0 {
                    let dl = p.local_time[i] - p.local_time[i - 1];
                    assert!(dl >= 0.0, "{m}: local time decreased");
                    if dl > 0.0 {
                        assert!(m.signed_distance(*x) <= tol, "{m}: dl > 0 at interior point {x}");
                    }
                }
            }
        }
    }
}

#[test]
fn free_motion_is_gaussian_away_from_the_boundary() {
    let m = ManifoldModel::disk(1.0).unwrap();
    let t = 0.005;
    let s = summarize(&m, Point::ZERO, t, &SimParams::new(1e-4, 4000, 21), &SummaryRequest::default()).unwrap();
    let sd = (2.0 * t).sqrt();
    for axis in 0..2 {
        let mut xs: Vec<f64> = s.iter().map(|p| p.x_t.component(axis)).collect();
        let d = ks_statistic(&mut xs, |v| normal_cdf(v / sd));
        assert!(d < ks_critical(xs.len(), 0.001), "axis {axis}: KS {d}");
    }
    assert!(s.iter().all(|p| p.l_t == 0.0));
}

#[test]
fn reruns_are_identical_and_single_path_matches_batch() {
    let m = ManifoldModel::annulus(0.5, 1.5).unwrap().with_linear_drift(1.0).unwrap();
    let params = SimParams::new(1e-3, 50, 9);
    let a = simulate_batch(&m, Point::new(0.6, 0.0), 0.2, &params).unwrap();
    let b = simulate_batch(&m, Point::new(0.6, 0.0), 0.2, &params).unwrap();
    assert_eq!(a, b);
    let one = simulate_batch(&m, Point::new(0.6, 0.0), 0.2, &SimParams { n_paths: 1, ..params }).unwrap();
    assert_eq!(one[0], simulate_reflected_path(&m, Point::new(0.6, 0.0), 0.2, &params, 0).unwrap());
    assert_eq!(one[0], a[0]);
}

#[test]
fn half_line_coordinate_mean() {
    let m = ManifoldModel::half_line();
    let dt = 1e-4;
    let e = estimate_pt(&m, &TestFunction::Coordinate { axis: 0 }, Point::ZERO, 1.0, &SimParams::new(dt, 4_000, 4))
        .unwrap();
    let want = 2.0 / PI.sqrt();
    // E X_t = E l_t here, so the local-time shortfall is the bias
    let bias = LOCAL_TIME_SHORTFALL * (2.0 * dt).sqrt();
    assert!((e.mean - want).abs() <= 3.0 * e.std_error + bias, "{} ± {} vs {want}", e.mean, e.std_error);
}

#[test]
fn local_time_bias_shrinks_like_root_dt() {
    let m = ManifoldModel::half_line();
    let t = 0.1;
    let want = 2.0 * (t / PI).sqrt();
    let dts = [1e-2, 1e-3, 1e-4];
    let mut log_err = Vec::new();
    for (i, &dt) in dts.iter().enumerate() {
        let s = summarize(&m, Point::ZERO, t, &SimParams::new(dt, 40_000, 100 + i as u64), &SummaryRequest::default())
            .unwrap();
        let l: Vec<f64> = s.iter().map(|p| p.l_t).collect();
        let (mean, _) = mean_se(&l);
        log_err.push((want - mean).abs().ln());
    }
    let log_dt: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let (_, slope, _) = linear_fit(&log_dt, &log_err);
    assert!((0.3..=0.7).contains(&slope), "slope {slope}");
}

#[test]
fn disk_centre_rarely_reaches_the_boundary_quickly() {
    let m = ManifoldModel::disk(1.0).unwrap();
    let (t, delta) = (0.01, 0.5);
    let paths = simulate_batch(&m, Point::ZERO, t, &SimParams::new(1e-4, 20_000, 17)).unwrap();
    let n = paths.len() as f64;
    let exits = paths.iter().filter(|p| exit_time(p, Point::ZERO, delta).is_some()).count() as f64 / n;
    let touched = paths.iter().filter(|p| p.final_local_time() > 0.0).count();
    assert_eq!(touched, 0);
    // |X_t| >= delta forces an exit; the union bound over both axes caps it
    let lower = (-delta * delta / (4.0 * t)).exp();
    let upper = 8.0 * (1.0 - normal_cdf(delta / (2.0 * t.sqrt())));
    let se = (lower / n).sqrt();
    assert!(exits >= lower - 3.0 * se, "{exits} < {lower}");
    assert!(exits <= upper, "{exits} > {upper}");
    assert!(exits < 0.05);
}
