//! Gradient, log-Sobolev and Poincaré type bounds with constant or
//! variable curvature weights.

use crate::checks::{kconst, local_time_factor, report, InequalityReport, Source, StatementId};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, ScalarField};
use crate::pde::{self, GridResolution, MomentFields};
use crate::point::Point;
use crate::sde::{time_grid, SimParams};
use crate::semigroup::{grad_pt, summarize, xlogx, PathSummary, SummaryRequest, TestFunction};
use crate::stats::{column_means, delta_se, mean_se};

#[derive(Clone, Debug, Default)]
pub struct CheckOptions {
    /// Replaces the model's lower Bakry–Émery bound `K`.
    pub k: Option<f64>,
    /// Replaces the model's boundary bound `σ`.
    pub sigma: Option<f64>,
    /// PDE grid for the left-hand side; defaults per model.
    pub grid: Option<GridResolution>,
    /// Estimate the left-hand side by Monte Carlo even when the PDE
    /// oracle applies.
    pub monte_carlo_lhs: bool,
}

/// Pair of fine/coarse evaluations. For Monte Carlo both entries agree and
/// the spread is carried by `se` instead.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub fine: f64,
    pub coarse: f64,
}

impl Bracket {
    fn exact(v: f64) -> Self {
        Self { fine: v, coarse: v }
    }

    fn margin(&self) -> f64 {
        (self.fine - self.coarse).abs()
    }

    fn squared(&self) -> Self {
        Self { fine: self.fine * self.fine, coarse: self.coarse * self.coarse }
    }
}

/// Left-hand side quantities at one point: `|∇P_t f|`, `Ent(f²)` and
/// `Var(f)` under `P_t`. Entropy and variance are `None` when they have
/// to come from the path batch itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LhsOracle {
    pub source: Source,
    pub grad_norm: Bracket,
    pub grad_se: f64,
    pub ent_sq: Option<Bracket>,
    pub var: Option<Bracket>,
}

impl LhsOracle {
    /// Time zero: everything is read off `f`.
    pub fn exact(model: &ManifoldModel, f: &TestFunction, x: Point) -> Self {
        Self {
            source: Source::Exact,
            grad_norm: Bracket::exact(f.gradient_on(model, x).norm()),
            grad_se: 0.0,
            ent_sq: Some(Bracket::exact(0.0)),
            var: Some(Bracket::exact(0.0)),
        }
    }

    /// PDE values at every point in `xs`, solved once at `res` and once
    /// on the coarsened grid.
    pub fn pde(
        model: &ManifoldModel,
        f: &TestFunction,
        xs: &[Point],
        t: f64,
        res: &GridResolution,
    ) -> Result<Vec<Self>> {
        if t == 0.0 {
            return Ok(xs.iter().map(|&x| Self::exact(model, f, model.restrict(x))).collect());
        }
        let res = fit_extent(model, xs, t, res);
        let fine = MomentFields::solve(model, f, t, &res)?;
        let coarse = MomentFields::solve(model, f, t, &res.coarsened())?;
        Ok(xs
            .iter()
            .map(|&x| {
                let x = model.restrict(x);
                let b = |g: &dyn Fn(&MomentFields) -> f64| Bracket { fine: g(&fine), coarse: g(&coarse) };
                Self {
                    source: Source::Pde,
                    grad_norm: b(&|m| m.f.value_and_gradient(x).1.norm()),
                    grad_se: 0.0,
                    ent_sq: Some(b(&|m| m.entropy_sq(x))),
                    var: Some(b(&|m| m.variance(x))),
                }
            })
            .collect())
    }

    /// Finite-difference gradient with common random numbers; entropy and
    /// variance are left to the batch.
    pub fn monte_carlo(model: &ManifoldModel, f: &TestFunction, x: Point, t: f64, params: &SimParams) -> Result<Self> {
        if t == 0.0 {
            return Ok(Self::exact(model, f, model.restrict(x)));
        }
        let g = grad_pt(model, f, x, t, params)?;
        let norm = g.value.norm();
        // standard error of |g| by linearisation along g
        let se = if norm > 0.0 {
            ((g.value.x * g.std_error.x).powi(2) + (g.value.y * g.std_error.y).powi(2)).sqrt() / norm
        } else {
            g.std_error.norm()
        };
        Ok(Self { source: Source::MonteCarlo, grad_norm: Bracket::exact(norm), grad_se: se, ent_sq: None, var: None })
    }

    /// PDE when the model allows it, Monte Carlo otherwise.
    pub fn for_point(
        model: &ManifoldModel,
        f: &TestFunction,
        x: Point,
        t: f64,
        params: &SimParams,
        opts: &CheckOptions,
    ) -> Result<Self> {
        if !opts.monte_carlo_lhs && pde::supports(model) {
            let res = opts.grid.unwrap_or_else(|| GridResolution::for_model(model));
            Ok(Self::pde(model, f, &[x], t, &res)?.remove(0))
        } else {
            Self::monte_carlo(model, f, x, t, params)
        }
    }
}

/// Truncates the half-line far enough out for every point in `xs`.
fn fit_extent(model: &ManifoldModel, xs: &[Point], t: f64, res: &GridResolution) -> GridResolution {
    if res.extent.is_some() || !matches!(model.shape, crate::geometry::Shape::HalfLine) {
        return *res;
    }
    let x_max = xs.iter().map(|p| p.x).fold(0.0, f64::max);
    let a = match model.drift {
        crate::geometry::DriftSpec::Linear { a } => a,
        _ => 0.0,
    };
    (*res).with_extent(pde::half_line_extent(x_max, t, a))
}

/// One batch of paths from `x` reused by every statement at `(x, t)`.
pub struct CheckContext {
    pub model: ManifoldModel,
    pub x: Point,
    pub t: f64,
    pub k: f64,
    pub sigma: f64,
    /// Effective step after rounding `t / dt` up to an integer.
    pub dt: f64,
    summaries: Vec<PathSummary>,
}

impl CheckContext {
    pub fn new(model: &ManifoldModel, x: Point, t: f64, params: &SimParams, opts: &CheckOptions) -> Result<Self> {
        let bounds = model.curvature_bounds()?;
        let k = opts.k.unwrap_or(bounds.k);
        let sigma = opts.sigma.unwrap_or(bounds.sigma);
        let summaries = summarize(model, x, t, params, &SummaryRequest::constants(sigma, k))?;
        Ok(Self { model: *model, x: model.restrict(x), t, k, sigma, dt: time_grid(t, params.dt).1, summaries })
    }

    pub fn summaries(&self) -> &[PathSummary] {
        &self.summaries
    }

    pub fn check(&self, stmt: StatementId, f: &TestFunction, lhs: &LhsOracle) -> Result<InequalityReport> {
        let (model, t, k, sigma) = (&self.model, self.t, self.k, self.sigma);
        let s = &self.summaries;
        let grad_sq = |p: &PathSummary| f.gradient_on(model, p.x_t).norm_sq();
        let lt2 = local_time_factor(2.0 * sigma, self.dt);
        let g = lhs.grad_norm;
        let g2 = g.squared();
        let g2_se = 2.0 * g.fine * lhs.grad_se;
        let combine = |a: f64, b: f64| a.hypot(b);
        let out = |lhs_v: f64, rhs: f64, se: f64, dt_m: f64, h_m: f64| {
            report(stmt, model, &f.to_string(), self.x, t, lhs_v, rhs, se, dt_m, h_m, lhs.source, k, sigma)
        };
        Ok(match stmt {
            StatementId::S2 => {
                let vals: Vec<f64> =
                    s.iter().map(|p| f.gradient_on(model, p.x_t).norm() * (sigma * p.l_t).exp()).collect();
                let (m, se) = mean_se(&vals);
                let c = (k * t).exp();
                let rhs = c * m;
                out(g.fine, rhs, combine(c * se, lhs.grad_se), rhs * local_time_factor(sigma, self.dt), g.margin())
            }
            StatementId::S3 => {
                let rows: Vec<[f64; 2]> = s.iter().map(|p| [grad_sq(p), (2.0 * sigma * p.l_t).exp()]).collect();
                let [m0, m1] = column_means(&rows);
                let c = (2.0 * k * t).exp();
                let rhs = c * m0 * m1;
                let se = delta_se(&rows, &[c * m1, c * m0]);
                out(g2.fine, rhs, combine(se, g2_se), rhs * lt2, g2.margin())
            }
            StatementId::S4 | StatementId::S5 => {
                let factor = if stmt == StatementId::S4 { 4.0 } else { 2.0 };
                let pde_side = if stmt == StatementId::S4 { lhs.ent_sq } else { lhs.var };
                match pde_side {
                    Some(b) => {
                        let vals: Vec<f64> = s.iter().map(|p| grad_sq(p) * p.int_a).collect();
                        let (m, se) = mean_se(&vals);
                        let rhs = factor * m;
                        out(b.fine, rhs, factor * se, rhs * lt2, b.margin())
                    }
                    None => {
                        let rows: Vec<[f64; 3]> = s
                            .iter()
                            .map(|p| {
                                let v = f.value(p.x_t);
                                let w = grad_sq(p) * p.int_a;
                                if stmt == StatementId::S4 {
                                    [v * v, xlogx(v * v), w]
                                } else {
                                    [v, v * v, w]
                                }
                            })
                            .collect();
                        let [m0, m1, m2] = column_means(&rows);
                        let (lhs_v, d0) = if stmt == StatementId::S4 {
                            (m1 - xlogx(m0), if m0 > 0.0 { -(m0.ln() + 1.0) } else { 0.0 })
                        } else {
                            (m1 - m0 * m0, -2.0 * m0)
                        };
                        let rhs = factor * m2;
                        let se = delta_se(&rows, &[d0, 1.0, -factor]);
                        out(lhs_v, rhs, se, rhs * lt2, 0.0)
                    }
                }
            }
            StatementId::S6 | StatementId::S7 => {
                if t <= 0.0 {
                    return Err(Error::InvalidParameter(format!("{stmt} needs t > 0")));
                }
                let (_, c2, c3) = kconst(k, t);
                let (rhs, se) = if stmt == StatementId::S6 {
                    if !f.is_nonnegative_on(model) {
                        return Err(Error::InvalidParameter(format!("{stmt} needs f >= 0, {f} changes sign")));
                    }
                    let rows: Vec<[f64; 3]> = s
                        .iter()
                        .map(|p| {
                            let v = f.value(p.x_t);
                            [v, xlogx(v), v * p.int_b]
                        })
                        .collect();
                    let [m0, m1, m2] = column_means(&rows);
                    let ent = m1 - xlogx(m0);
                    let c = c2 * c2;
                    let dlog = if m0 > 0.0 { m0.ln() + 1.0 } else { 0.0 };
                    (c * ent * m2, delta_se(&rows, &[-c * dlog * m2, c * m2, c * ent]))
                } else {
                    let rows: Vec<[f64; 3]> = s
                        .iter()
                        .map(|p| {
                            let v = f.value(p.x_t);
                            [v, v * v, p.int_b]
                        })
                        .collect();
                    let [m0, m1, m2] = column_means(&rows);
                    let var = m1 - m0 * m0;
                    (c3 * var * m2, delta_se(&rows, &[-2.0 * c3 * m0 * m2, c3 * m2, c3 * var]))
                };
                out(g2.fine, rhs, combine(se, g2_se), rhs.abs() * lt2, g2.margin())
            }
            other => {
                return Err(Error::InvalidParameter(format!("{other} is not a constant-curvature statement")));
            }
        })
    }
}

/// Single statement at a single point: simulates, builds the left-hand
/// side and compares.
pub fn check_statement(
    stmt: StatementId,
    model: &ManifoldModel,
    f: &TestFunction,
    x: Point,
    t: f64,
    params: &SimParams,
    opts: &CheckOptions,
) -> Result<InequalityReport> {
    let ctx = CheckContext::new(model, x, t, params, opts)?;
    let lhs = LhsOracle::for_point(model, f, x, t, params, opts)?;
    ctx.check(stmt, f, &lhs)
}

/// Variable-curvature gradient bounds:
/// `G2: |∇P_t f| <= E[|∇f|(X_t) e^{∫K₁ ds + ∫K₂ dl}]` and
/// `G3: |∇P_t f|² <= P_t|∇f|² · E[e^{2(∫K₁ ds + ∫K₂ dl)}]`.
#[allow(clippy::too_many_arguments)]
pub fn check_variable_bounds(
    stmt: StatementId,
    model: &ManifoldModel,
    f: &TestFunction,
    x: Point,
    t: f64,
    k1: ScalarField,
    k2: ScalarField,
    params: &SimParams,
    opts: &CheckOptions,
) -> Result<InequalityReport> {
    if !matches!(stmt, StatementId::G2 | StatementId::G3) {
        return Err(Error::InvalidParameter(format!("{stmt} is not a variable-curvature statement")));
    }
    let bounds = model.curvature_bounds()?;
    let req = SummaryRequest { a: None, b: None, var: Some((k1, k2)) };
    let s = summarize(model, x, t, params, &req)?;
    let lhs = LhsOracle::for_point(model, f, x, t, params, opts)?;
    let dt = time_grid(t, params.dt).1;
    // the dl part of the exponent inherits the scheme's local-time shortfall
    let k2_max = model.boundary_samples(256).iter().map(|&b| k2.eval(model, b).abs()).fold(0.0, f64::max);
    let g = lhs.grad_norm;
    let x = model.restrict(x);
    let fs = f.to_string();
    Ok(if stmt == StatementId::G2 {
        let vals: Vec<f64> = s.iter().map(|p| f.gradient_on(model, p.x_t).norm() * p.int_var.exp()).collect();
        let (rhs, se) = mean_se(&vals);
        let dt_m = rhs * local_time_factor(k2_max, dt);
        report(
            stmt,
            model,
            &fs,
            x,
            t,
            g.fine,
            rhs,
            se.hypot(lhs.grad_se),
            dt_m,
            g.margin(),
            lhs.source,
            bounds.k,
            bounds.sigma,
        )
    } else {
        let rows: Vec<[f64; 2]> =
            s.iter().map(|p| [f.gradient_on(model, p.x_t).norm_sq(), (2.0 * p.int_var).exp()]).collect();
        let [m0, m1] = column_means(&rows);
        let rhs = m0 * m1;
        let se = delta_se(&rows, &[m1, m0]).hypot(2.0 * g.fine * lhs.grad_se);
        let dt_m = rhs * local_time_factor(2.0 * k2_max, dt);
        let g2 = g.squared();
        report(stmt, model, &fs, x, t, g2.fine, rhs, se, dt_m, g2.margin(), lhs.source, bounds.k, bounds.sigma)
    })
}
