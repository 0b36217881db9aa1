//! Browser bindings for three small experiments. Each export has a plain
//! Rust counterpart so the logic is testable off-wasm.

use neumann_lab::checks::{check_statement, CheckOptions, StatementId};
use neumann_lab::pde::GridResolution;
use neumann_lab::sde::simulate_reflected_path;
use neumann_lab::semigroup::{summarize, SummaryRequest};
use neumann_lab::stats::mean_se;
use neumann_lab::{ManifoldModel, Point, SimParams, TestFunction};
use wasm_bindgen::prelude::*;

const MAX_PATHS: u32 = 200_000;

fn params(dt: f64, n_paths: u32, seed: u32) -> Result<SimParams, String> {
    if n_paths == 0 || n_paths > MAX_PATHS {
        return Err(format!("paths must be in 1..={MAX_PATHS}"));
    }
    let p = SimParams::new(dt, n_paths as usize, seed as u64);
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn model(shape: &str, drift: f64) -> Result<ManifoldModel, String> {
    let base = match shape {
        "half_line" => ManifoldModel::half_line(),
        "interval" => ManifoldModel::interval(0.0, 1.0).map_err(|e| e.to_string())?,
        "disk" => ManifoldModel::disk(1.0).map_err(|e| e.to_string())?,
        "annulus" => ManifoldModel::annulus(0.5, 1.5).map_err(|e| e.to_string())?,
        "rectangle" => ManifoldModel::rectangle(2.0, 1.0).map_err(|e| e.to_string())?,
        other => return Err(format!("unknown shape {other}")),
    };
    base.with_linear_drift(drift).map_err(|e| e.to_string())
}

/// `[mean l_t, standard error, 2√(t/π)]` for reflected Brownian motion on
/// the half-line started at 0.
pub fn local_time_stats(t: f64, n_paths: u32, dt: f64, seed: u32) -> Result<Vec<f64>, String> {
    let p = params(dt, n_paths, seed)?;
    let s = summarize(&ManifoldModel::half_line(), Point::ZERO, t, &p, &SummaryRequest::default())
        .map_err(|e| e.to_string())?;
    let l: Vec<f64> = s.iter().map(|x| x.l_t).collect();
    let (m, se) = mean_se(&l);
    Ok(vec![m, se, 2.0 * (t / std::f64::consts::PI).sqrt()])
}

/// Flattened `[x, y, l]` triples for every step of every path, path after
/// path; each path has `round(t / dt) + 1` entries.
pub fn path_samples(shape: &str, drift: f64, n_paths: u32, t: f64, dt: f64, seed: u32) -> Result<Vec<f64>, String> {
    let m = model(shape, drift)?;
    let p = params(dt, n_paths.min(64), seed)?;
    let x0 = match m.shape {
        neumann_lab::Shape::Annulus { inner, outer } => Point::new(0.5 * (inner + outer), 0.0),
        neumann_lab::Shape::HalfLine => Point::on_line(0.5),
        neumann_lab::Shape::Interval { a, b } => Point::on_line(0.5 * (a + b)),
        _ => Point::ZERO,
    };
    let mut out = Vec::new();
    for i in 0..p.n_paths as u64 {
        let path = simulate_reflected_path(&m, x0, t, &p, i).map_err(|e| e.to_string())?;
        for (x, l) in path.positions.iter().zip(&path.local_time) {
            out.extend([x.x, x.y, *l]);
        }
    }
    Ok(out)
}

/// S2 or S3 at the inner boundary of the annulus `0.5 <= |x| <= 1.5` for
/// a tangential test function, with `σ` chosen by the caller (the true
/// value is 2). Returns the report as JSON.
pub fn annulus_gradient_check(statement: &str, sigma: f64, t: f64, n_paths: u32, seed: u32) -> Result<String, String> {
    let stmt = match statement {
        "S2" => StatementId::S2,
        "S3" => StatementId::S3,
        other => return Err(format!("statement must be S2 or S3, got {other}")),
    };
    let m = model("annulus", 0.0)?;
    let x = Point::new(0.5, 0.0);
    let f = TestFunction::tangential_at(&m, x, Point::new(0.0, 1.0)).map_err(|e| e.to_string())?;
    let opts = CheckOptions {
        sigma: Some(sigma),
        grid: Some(GridResolution { n_space: 128, n_theta: 16, steps_per_unit_time: None, extent: None }),
        ..Default::default()
    };
    let p = params(1e-4_f64.min(t / 100.0), n_paths, seed)?;
    let r = check_statement(stmt, &m, &f, x, t, &p, &opts).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = localTimeStats)]
pub fn local_time_stats_js(t: f64, n_paths: u32, dt: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    local_time_stats(t, n_paths, dt, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pathSamples)]
pub fn path_samples_js(shape: &str, drift: f64, n_paths: u32, t: f64, dt: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    path_samples(shape, drift, n_paths, t, dt, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = annulusGradientCheck)]
pub fn annulus_gradient_check_js(
    statement: &str,
    sigma: f64,
    t: f64,
    n_paths: u32,
    seed: u32,
) -> Result<String, JsError> {
    annulus_gradient_check(statement, sigma, t, n_paths, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_time_close_to_law() {
        let v = local_time_stats(0.1, 4000, 1e-4, 1).unwrap();
        assert!((v[0] - v[2]).abs() < 4.0 * v[1] + 0.03 * v[2], "{v:?}");
    }

    #[test]
    fn path_layout() {
        let v = path_samples("disk", -1.0, 3, 0.01, 1e-3, 2).unwrap();
        assert_eq!(v.len(), 3 * 11 * 3);
        assert!(path_samples("sphere", 0.0, 3, 0.01, 1e-3, 2).is_err());
    }

    #[test]
    fn understated_sigma_is_not_a_pass() {
        let ok = annulus_gradient_check("S2", 2.0, 0.01, 4000, 3).unwrap();
        let bad = annulus_gradient_check("S2", 0.0, 0.01, 4000, 3).unwrap();
        assert!(ok.contains("\"verdict\":\"PASS\""), "{ok}");
        assert!(!bad.contains("\"verdict\":\"PASS\""), "{bad}");
    }
}
