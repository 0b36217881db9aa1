//! Second fundamental form from short-time semigroup asymptotics:
//!
//! `II(v, v) = lim_{t→0} (√π/2) |v|² t^{-1/2} log((P_t|∇f|^p)^{1/p}(x) / |∇P_t f|(x))`
//!
//! for a Neumann-compatible `f` with `∇f(x) = v`. The finite-`t` values
//! behave like `II + c √t`, so the limit comes from a least-squares line
//! in `√t`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ManifoldModel;
use crate::pde::{self, GridResolution};
use crate::point::Point;
use crate::sde::SimParams;
use crate::semigroup::{grad_pt, summarize, SummaryRequest, TestFunction};
use crate::stats::{linear_fit, mean_se};

/// Horizons used when the caller has no preference.
pub const DEFAULT_TIMES: [f64; 4] = [0.04, 0.02, 0.01, 0.005];

/// Monte Carlo steps per horizon; the boundary layer has width `√t` so
/// the step must shrink with `t`.
pub const STEPS_PER_HORIZON: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IIEstimate {
    pub x: Point,
    pub v: Point,
    pub p: f64,
    /// Extrapolated limit.
    pub ii: f64,
    pub slope: f64,
    pub residual: f64,
    pub times: Vec<f64>,
    pub raw: Vec<f64>,
    pub raw_se: Vec<f64>,
    /// Closed-form value from the geometry.
    pub exact: f64,
}

impl IIEstimate {
    pub fn relative_error(&self) -> f64 {
        (self.ii - self.exact).abs() / self.exact.abs().max(f64::MIN_POSITIVE)
    }
}

/// Radial grid dense enough to resolve a boundary layer of width `√t`.
fn ii_grid(model: &ManifoldModel) -> GridResolution {
    GridResolution { n_space: 2048, n_theta: 16, ..GridResolution::for_model(model) }
}

pub fn estimate_ii(
    model: &ManifoldModel,
    x: Point,
    v: Point,
    p: f64,
    times: &[f64],
    params: &SimParams,
) -> Result<IIEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must be in [1, ∞), got {p}")));
    }
    let exact = model.second_fundamental_form(x, v)?;
    let f = TestFunction::tangential_at(model, x, v)?;
    let mut out = IIEstimate {
        x,
        v,
        p,
        ii: 0.0,
        slope: 0.0,
        residual: 0.0,
        times: times.to_vec(),
        raw: Vec::new(),
        raw_se: Vec::new(),
        exact,
    };
    if times.len() < 4 || times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter(format!("need at least four positive times, got {times:?}")));
    }
    if model.dimension() == 1 || v.norm() == 0.0 {
        // no tangent directions: the form vanishes identically
        out.raw = vec![0.0; times.len()];
        out.raw_se = vec![0.0; times.len()];
        return Ok(out);
    }
    let scale = 0.5 * std::f64::consts::PI.sqrt() * v.norm_sq();
    for &t in times {
        let grad = if pde::supports(model) {
            pde::solve_neumann_heat(model, &f, t, &ii_grid(model))?.value_and_gradient(x).1.norm()
        } else {
            grad_pt(model, &f, x, t, params)?.value.norm()
        };
        let mc = SimParams { dt: params.dt.min(t / STEPS_PER_HORIZON), ..*params };
        let ends = summarize(model, x, t, &mc, &SummaryRequest::default())?;
        let vals: Vec<f64> = ends.iter().map(|s| f.gradient(s.x_t).norm().powf(p)).collect();
        let (m, se) = mean_se(&vals);
        let pre = scale / t.sqrt();
        out.raw.push(pre * (m.ln() / p - grad.ln()));
        out.raw_se.push(pre * se / (p * m));
    }
    let sq: Vec<f64> = times.iter().map(|t| t.sqrt()).collect();
    let (a, b, resid) = linear_fit(&sq, &out.raw);
    out.ii = a;
    out.slope = b;
    out.residual = resid;
    // residual floor keeps flat boundaries (II = 0) from always tripping
    if resid > 0.25 * a.abs().max(0.1 * v.norm_sq()) {
        return Err(Error::NoisyLimit { residual: resid, value: a });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_boundary_has_no_form() {
        let m = ManifoldModel::half_line();
        let e = estimate_ii(&m, Point::ZERO, Point::ZERO, 2.0, &DEFAULT_TIMES, &SimParams::default()).unwrap();
        assert_eq!(e.ii, 0.0);
        assert_eq!(e.exact, 0.0);
    }

    #[test]
    fn rejects_interior_points_and_normal_vectors() {
        let m = ManifoldModel::disk(1.0).unwrap();
        let p = SimParams::new(1e-4, 100, 1);
        assert!(matches!(
            estimate_ii(&m, Point::new(0.5, 0.0), Point::new(0.0, 1.0), 2.0, &DEFAULT_TIMES, &p),
            Err(Error::NotOnBoundary { .. })
        ));
        assert!(matches!(
            estimate_ii(&m, Point::new(1.0, 0.0), Point::new(1.0, 0.0), 2.0, &DEFAULT_TIMES, &p),
            Err(Error::NotTangent { .. })
        ));
        assert!(estimate_ii(&m, Point::new(1.0, 0.0), Point::new(0.0, 1.0), 0.5, &DEFAULT_TIMES, &p).is_err());
    }

    #[test]
    fn disk_sign_and_rough_size() {
        let m = ManifoldModel::disk(1.0).unwrap();
        let p = SimParams::new(1e-4, 40_000, 9);
        let e = estimate_ii(&m, Point::new(1.0, 0.0), Point::new(0.0, 1.0), 2.0, &DEFAULT_TIMES, &p).unwrap();
        assert!((e.ii - 1.0).abs() < 0.3, "{e:?}");
    }
}
