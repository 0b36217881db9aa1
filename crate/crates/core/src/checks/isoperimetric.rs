//! Lévy–Gromov type isoperimetric bounds with the Gaussian profile
//! `U = φ ∘ Φ⁻¹`, and the submartingale behind them.

use serde::Serialize;

use crate::checks::{kconst, local_time_factor, report, CheckOptions, InequalityReport, Source, StatementId};
use crate::error::{Error, Result};
use crate::geometry::{DriftSpec, ManifoldModel, Shape};
use crate::pde::{self, GridField, GridResolution};
use crate::point::Point;
use crate::sde::{map_paths, time_grid, SimParams, Stepper};
use crate::semigroup::{summarize, SummaryRequest, TestFunction};
use crate::stats::{column_means, delta_se, mean_se, normal_pdf, normal_quantile};

/// `U(v) = φ(Φ⁻¹(v))` on `[0, 1]`, zero at both ends; NaN outside.
pub fn gaussian_profile(v: f64) -> f64 {
    if !(0.0..=1.0).contains(&v) {
        return f64::NAN;
    }
    if v == 0.0 || v == 1.0 {
        return 0.0;
    }
    normal_pdf(normal_quantile(v))
}

/// `(U, U', U'')` with `U' = −Φ⁻¹` and `U'' = −1/U`.
pub fn gaussian_profile_derivatives(v: f64) -> (f64, f64, f64) {
    let u = gaussian_profile(v);
    (u, -normal_quantile(v), -1.0 / u)
}

fn unit_range(model: &ManifoldModel, f: &TestFunction) -> Result<()> {
    let (lo, hi) = f.range_on(model);
    if lo < 0.0 || hi > 1.0 {
        return Err(Error::InvalidParameter(format!("{f} must take values in [0, 1] on {model}, range [{lo}, {hi}]")));
    }
    Ok(())
}

/// `U(P_t f) <= E √(U²(f)(X_t) + |∇f|²(X_t) (e^{2Kt} − 1)/K · e^{2σ l_t})`.
pub fn check_levy_gromov(
    model: &ManifoldModel,
    f: &TestFunction,
    x: Point,
    t: f64,
    params: &SimParams,
    opts: &CheckOptions,
) -> Result<InequalityReport> {
    unit_range(model, f)?;
    let bounds = model.curvature_bounds()?;
    let k = opts.k.unwrap_or(bounds.k);
    let sigma = opts.sigma.unwrap_or(bounds.sigma);
    let c = kconst(k, t).0;
    let s = summarize(model, x, t, params, &SummaryRequest::default())?;
    let rows: Vec<[f64; 2]> = s
        .iter()
        .map(|p| {
            let v = f.value(p.x_t).clamp(0.0, 1.0);
            let g2 = f.gradient_on(model, p.x_t).norm_sq();
            [v, (gaussian_profile(v).powi(2) + g2 * c * (2.0 * sigma * p.l_t).exp()).sqrt()]
        })
        .collect();
    let [m0, m1] = column_means(&rows);
    let (u, du, _) = gaussian_profile_derivatives(m0);
    let se = if t == 0.0 { 0.0 } else { delta_se(&rows, &[du, -1.0]) };
    let dt = time_grid(t, params.dt).1;
    let source = if t == 0.0 { Source::Exact } else { Source::MonteCarlo };
    let fs = f.to_string();
    let x = model.restrict(x);
    Ok(report(
        StatementId::LG43,
        model,
        &fs,
        x,
        t,
        u,
        m1,
        se,
        m1 * local_time_factor(2.0 * sigma, dt),
        0.0,
        source,
        k,
        sigma,
    ))
}

/// Stationary form `U(μ(f)) <= ∫ √(U²(f) + |∇f|²/R) dμ` for models with
/// `K = −R < 0` and convex boundary, by quadrature against the invariant
/// measure. Returns `(lhs, rhs)`.
pub fn levy_gromov_limit(model: &ManifoldModel, f: &TestFunction) -> Result<(f64, f64)> {
    unit_range(model, f)?;
    let b = model.curvature_bounds()?;
    if !(b.k < 0.0) || b.sigma != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "stationary bound needs K < 0 and a convex boundary, {model} has K={}, σ={}",
            b.k, b.sigma
        )));
    }
    let r = -b.k;
    let mut res = GridResolution::for_model(model);
    if let (Shape::HalfLine, DriftSpec::Linear { a }) = (model.shape, model.drift) {
        res.n_space = 1 << 15;
        res = res.with_extent(16.0 / (-a).sqrt());
    }
    let mean = pde::invariant_average(model, &res, |x| f.value(x))?;
    let rhs = pde::invariant_average(model, &res, |x| {
        (gaussian_profile(f.value(x).clamp(0.0, 1.0)).powi(2) + f.gradient_on(model, x).norm_sq() / r).sqrt()
    })?;
    Ok((gaussian_profile(mean), rhs))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubmartingaleReport {
    pub s: Vec<f64>,
    /// `E η_s^{1/2}`.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Grid-plus-step allowance per `s`.
    pub margin: Vec<f64>,
    /// Mean and standard error of paired increments between neighbours.
    pub diff_mean: Vec<f64>,
    pub diff_se: Vec<f64>,
    pub monotone: bool,
}

/// `η_s = U²(P_{t−s} f)(X_s) + |∇P_{t−s} f|²(X_s) (e^{2Ks} − 1)/K e^{2σ l_s}`,
/// whose square root should have non-decreasing mean in `s`. `P_{t−s} f`
/// comes from PDE snapshots; `s` is snapped to the simulation grid.
pub fn submartingale_diagnostic(
    model: &ManifoldModel,
    f: &TestFunction,
    x: Point,
    t: f64,
    n_s: usize,
    params: &SimParams,
) -> Result<SubmartingaleReport> {
    unit_range(model, f)?;
    if !pde::supports(model) {
        return Err(Error::UnsupportedDrift(format!("submartingale diagnostic needs the PDE oracle, {model}")));
    }
    if !(t > 0.0) || n_s < 2 {
        return Err(Error::InvalidParameter(format!("need t > 0 and at least two s values (t={t}, n={n_s})")));
    }
    let bounds = model.curvature_bounds()?;
    let (k, sigma) = (bounds.k, bounds.sigma);
    let x = model.restrict(x);
    let (n, dt) = time_grid(t, params.dt);
    let idx: Vec<usize> = (0..n_s).map(|j| (j * n + (n_s - 1) / 2) / (n_s - 1)).collect();
    let s: Vec<f64> = idx.iter().map(|&j| if j == n { t } else { j as f64 * dt }).collect();
    // snapshot times t − s in increasing order
    let taus: Vec<f64> = s.iter().rev().map(|&sj| (t - sj).max(0.0)).collect();
    let mut res = GridResolution::for_model(model);
    if let Shape::HalfLine = model.shape {
        let a = if let DriftSpec::Linear { a } = model.drift { a } else { 0.0 };
        res = res.with_extent(pde::half_line_extent(x.x, t, a));
    }
    let solve = |r: &GridResolution| -> Result<Vec<GridField>> {
        let mut v = pde::solve_neumann_heat_snapshots(model, f, &taus, r)?;
        v.reverse();
        Ok(v)
    };
    let fine = solve(&res)?;
    let coarse = solve(&res.coarsened())?;
    let eta = |fields: &[GridField], j: usize, y: Point, l: f64| -> f64 {
        let (u, g) =
            if j + 1 == s.len() { (f.value(y), f.gradient_on(model, y)) } else { fields[j].value_and_gradient(y) };
        let c = kconst(k, s[j]).0;
        (gaussian_profile(u.clamp(0.0, 1.0)).powi(2) + g.norm_sq() * c * (2.0 * sigma * l).exp()).sqrt()
    };
    let rows = map_paths(params.n_paths, |i| {
        let mut st = Stepper::new(model, x, dt, params.base_seed, i);
        let mut out = Vec::with_capacity(2 * s.len());
        for (j, &target) in idx.iter().enumerate() {
            while st.step < target {
                st.advance()?;
            }
            out.push(eta(&fine, j, st.x, st.l));
            out.push(eta(&coarse, j, st.x, st.l));
        }
        Ok(out)
    })?;
    let col = |c: usize| -> Vec<f64> { rows.iter().map(|r| r[c]).collect() };
    let lt = local_time_factor(2.0 * sigma, dt);
    let mut rep = SubmartingaleReport {
        s: s.clone(),
        mean: Vec::new(),
        se: Vec::new(),
        margin: Vec::new(),
        diff_mean: Vec::new(),
        diff_se: Vec::new(),
        monotone: true,
    };
    for j in 0..s.len() {
        let (m, se) = mean_se(&col(2 * j));
        let mc = mean_se(&col(2 * j + 1)).0;
        rep.mean.push(m);
        rep.se.push(se);
        rep.margin.push((m - mc).abs() + m * lt);
    }
    for j in 1..s.len() {
        let d: Vec<f64> = rows.iter().map(|r| r[2 * j] - r[2 * j - 2]).collect();
        let (dm, dse) = mean_se(&d);
        rep.diff_mean.push(dm);
        rep.diff_se.push(dse);
        if dm < -(3.0 * dse + rep.margin[j] + rep.margin[j - 1]) {
            rep.monotone = false;
        }
    }
    Ok(rep)
}
