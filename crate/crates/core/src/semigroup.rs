//! Monte Carlo estimation of `P_t f` and of path-weighted functionals of
//! the reflected diffusion and its local time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ManifoldModel, ScalarField, Shape};
use crate::point::{Point, Sym2};
use crate::sde::{map_paths, time_grid, SimParams, Stepper};
use crate::stats::{mean_se, normal_cdf, normal_pdf};

/// Largest per-path weight accepted before the estimate is abandoned.
pub const WEIGHT_GUARD: f64 = 1e300;

/// Radial factor `g` of a tangential test function `f(x) = <x, v> g(|x|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialProfile {
    /// `g(r) = (3R² − r²) / (2R²)`: `∂_r f = 0` at `r = R`, `g(R) = 1`.
    DiskCubic { radius: f64 },
    /// `g(r) = anchor · c(r) / r` with `c(r) = (1 + cos(π(r − anchor)/(outer − inner)))/2`;
    /// `∂_r f = 0` on both circles and `g(anchor) = 1`.
    AnnulusCosine { inner: f64, outer: f64, anchor: f64 },
}

impl RadialProfile {
    fn g(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::DiskCubic { radius } => (3.0 * radius * radius - r * r) / (2.0 * radius * radius),
            RadialProfile::AnnulusCosine { inner, outer, anchor } => {
                let k = std::f64::consts::PI / (outer - inner);
                anchor * 0.5 * (1.0 + (k * (r - anchor)).cos()) / r
            }
        }
    }

    /// `(G, G'/r)` with `G = g'(r)/r`; these are what the Hessian needs
    /// and stay bounded at the origin for the disk profile.
    fn g_derivs(&self, r: f64) -> (f64, f64) {
        match *self {
            RadialProfile::DiskCubic { radius } => (-1.0 / (radius * radius), 0.0),
            RadialProfile::AnnulusCosine { inner, outer, anchor } => {
                let k = std::f64::consts::PI / (outer - inner);
                let th = k * (r - anchor);
                let c = 0.5 * (1.0 + th.cos());
                let c1 = -0.5 * k * th.sin();
                let c2 = -0.5 * k * k * th.cos();
                // g = anchor c / r
                let g1 = anchor * (c1 / r - c / (r * r));
                let g2 = anchor * (c2 / r - 2.0 * c1 / (r * r) + 2.0 * c / (r * r * r));
                let big_g = g1 / r;
                let big_g1 = (g2 * r - g1) / (r * r);
                (big_g, big_g1 / r)
            }
        }
    }
}

/// Closed-form test functions with exact gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `f = x_axis`
    Coordinate {
        #[serde(default)]
        axis: usize,
    },
    /// `f = |x|²`
    RadialPoly,
    /// `exp(1 − 1/(1 − q))` for `q = |x − center|²/width² < 1`, else 0.
    Bump {
        center: Point,
        width: f64,
    },
    /// `f = 1 + eps · x₁`
    AffinePositive {
        eps: f64,
    },
    /// `Φ((x₁ − center)/width)`; a negative width flips the orientation.
    SmoothedIndicator {
        center: f64,
        width: f64,
    },
    /// `f = offset + amplitude · cos(x₁)`
    Cosine {
        amplitude: f64,
        offset: f64,
    },
    /// `f = <x, direction> g(|x|)`, tangential and Neumann-compatible.
    Tangential {
        direction: Point,
        profile: RadialProfile,
    },
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TestFunction::Constant { .. } => "constant",
            TestFunction::Coordinate { .. } => "coordinate",
            TestFunction::RadialPoly => "radial_poly",
            TestFunction::Bump { .. } => "bump",
            TestFunction::AffinePositive { .. } => "affine_positive",
            TestFunction::SmoothedIndicator { .. } => "smoothed_indicator",
            TestFunction::Cosine { .. } => "cosine",
            TestFunction::Tangential { .. } => "tangential",
        };
        f.write_str(name)
    }
}

fn bump_profile(q: f64) -> (f64, f64, f64) {
    if q >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 / (1.0 - q);
    let phi = (1.0 - u).exp();
    let d1 = -phi * u * u;
    let d2 = phi * (u.powi(4) - 2.0 * u.powi(3));
    (phi, d1, d2)
}

impl TestFunction {
    pub fn value(&self, x: Point) -> f64 {
        match *self {
            TestFunction::Constant { value } => value,
            TestFunction::Coordinate { axis } => x.component(axis),
            TestFunction::RadialPoly => x.norm_sq(),
            TestFunction::Bump { center, width } => bump_profile((x - center).norm_sq() / (width * width)).0,
            TestFunction::AffinePositive { eps } => 1.0 + eps * x.x,
            TestFunction::SmoothedIndicator { center, width } => normal_cdf((x.x - center) / width),
            TestFunction::Cosine { amplitude, offset } => offset + amplitude * x.x.cos(),
            TestFunction::Tangential { direction, profile } => x.dot(direction) * profile.g(x.norm()),
        }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match *self {
            TestFunction::Constant { .. } => Point::ZERO,
            TestFunction::Coordinate { axis } => Point::ZERO.with_component(axis, 1.0),
            TestFunction::RadialPoly => 2.0 * x,
            TestFunction::Bump { center, width } => {
                let w2 = width * width;
                let d = x - center;
                let (_, d1, _) = bump_profile(d.norm_sq() / w2);
                (2.0 * d1 / w2) * d
            }
            TestFunction::AffinePositive { eps } => Point::new(eps, 0.0),
            TestFunction::SmoothedIndicator { center, width } => {
                Point::new(normal_pdf((x.x - center) / width) / width, 0.0)
            }
            TestFunction::Cosine { amplitude, .. } => Point::new(-amplitude * x.x.sin(), 0.0),
            TestFunction::Tangential { direction, profile } => {
                let (big_g, _) = profile.g_derivs(x.norm());
                profile.g(x.norm()) * direction + (x.dot(direction) * big_g) * x
            }
        }
    }

    pub fn hessian(&self, x: Point) -> Sym2 {
        match *self {
            TestFunction::Constant { .. } | TestFunction::Coordinate { .. } | TestFunction::AffinePositive { .. } => {
                Sym2::ZERO
            }
            TestFunction::RadialPoly => Sym2::scalar(2.0),
            TestFunction::Bump { center, width } => {
                let w2 = width * width;
                let d = x - center;
                let (_, d1, d2) = bump_profile(d.norm_sq() / w2);
                Sym2::outer(d, 4.0 * d2 / (w2 * w2)) + Sym2::scalar(2.0 * d1 / w2)
            }
            TestFunction::SmoothedIndicator { center, width } => {
                let z = (x.x - center) / width;
                Sym2::new(-z * normal_pdf(z) / (width * width), 0.0, 0.0)
            }
            TestFunction::Cosine { amplitude, .. } => Sym2::new(-amplitude * x.x.cos(), 0.0, 0.0),
            TestFunction::Tangential { direction, profile } => {
                let s = x.dot(direction);
                let (big_g, big_g1_over_r) = profile.g_derivs(x.norm());
                Sym2::sym_outer(direction, x, big_g) + Sym2::scalar(s * big_g) + Sym2::outer(x, s * big_g1_over_r)
            }
        }
    }

    pub fn gradient_on(&self, model: &ManifoldModel, x: Point) -> Point {
        model.restrict(self.gradient(x))
    }

    pub fn hessian_on(&self, model: &ManifoldModel, x: Point) -> Sym2 {
        let h = self.hessian(x);
        if model.dimension() == 1 {
            h.first_axis_only()
        } else {
            h
        }
    }

    /// Closed-form `(inf f, sup f)` over the model's domain.
    pub fn range_on(&self, model: &ManifoldModel) -> (f64, f64) {
        let (lo0, hi0) = model.shape.axis_range(0);
        match *self {
            TestFunction::Constant { value } => (value, value),
            TestFunction::Coordinate { axis } => model.shape.axis_range(axis),
            TestFunction::RadialPoly => match model.shape {
                Shape::Annulus { inner, outer } => (inner * inner, outer * outer),
                Shape::Interval { a, b } if a > 0.0 || b < 0.0 => ((a * a).min(b * b), (a * a).max(b * b)),
                Shape::Interval { a, b } => (0.0, (a * a).max(b * b)),
                Shape::HalfLine => (0.0, f64::INFINITY),
                Shape::Disk { radius } => (0.0, radius * radius),
                Shape::Rectangle { width, height } => (0.0, 0.25 * (width * width + height * height)),
            },
            TestFunction::Bump { .. } | TestFunction::SmoothedIndicator { .. } => (0.0, 1.0),
            TestFunction::AffinePositive { eps } => {
                let (a, b) = (1.0 + eps * lo0, 1.0 + eps * hi0);
                (a.min(b), a.max(b))
            }
            TestFunction::Cosine { amplitude, offset } => (offset - amplitude.abs(), offset + amplitude.abs()),
            TestFunction::Tangential { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn is_nonnegative_on(&self, model: &ManifoldModel) -> bool {
        self.range_on(model).0 >= 0.0
    }

    /// Tangential Neumann-compatible function with gradient `v` at the
    /// boundary point `x` of a disk or annulus.
    pub fn tangential_at(model: &ManifoldModel, x: Point, v: Point) -> Result<TestFunction> {
        let normal = model.inward_normal(x)?;
        if normal.dot(v).abs() > 1e-9 * v.norm().max(1.0) {
            return Err(Error::NotTangent { point: x, vector: v });
        }
        let profile = match model.shape {
            Shape::Disk { radius } => RadialProfile::DiskCubic { radius },
            Shape::Annulus { inner, outer } => RadialProfile::AnnulusCosine { inner, outer, anchor: x.norm() },
            Shape::HalfLine | Shape::Interval { .. } => {
                // zero-dimensional boundary: only v = 0 is tangent
                return Ok(TestFunction::Constant { value: 0.0 });
            }
            Shape::Rectangle { .. } => {
                return Err(Error::UnsupportedShape("tangential test function on a rectangle".into()))
            }
        };
        Ok(TestFunction::Tangential { direction: v, profile })
    }

    /// The standard family used by the positive inequality suite.
    pub fn registry(model: &ManifoldModel) -> Vec<TestFunction> {
        let (bump_center, bump_width, step_center) = match model.shape {
            Shape::HalfLine => (Point::on_line(0.5), 1.0, 0.5),
            Shape::Interval { a, b } => (Point::on_line(0.5 * (a + b)), 0.5 * (b - a), 0.5 * (a + b)),
            Shape::Disk { radius } => (Point::new(0.2 * radius, 0.1 * radius), 0.8 * radius, 0.1 * radius),
            Shape::Annulus { inner, outer } => (Point::new(0.5 * (inner + outer), 0.0), 0.6 * (outer - inner), 0.0),
            Shape::Rectangle { width, height } => (Point::ZERO, 0.5 * width.min(height), 0.0),
        };
        vec![
            TestFunction::Coordinate { axis: 0 },
            TestFunction::RadialPoly,
            TestFunction::Bump { center: bump_center, width: bump_width },
            TestFunction::AffinePositive { eps: 0.5 },
            TestFunction::SmoothedIndicator { center: step_center, width: 0.3 },
        ]
    }
}

/// Function of `X_t` whose expectation is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    F,
    FSquared,
    GradSq,
    GradNorm,
    /// `f log f` with `0 log 0 = 0`.
    FLogF,
    /// `f² log f²` with `0 log 0 = 0`.
    F2LogF2,
    One,
}

pub fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

impl Terminal {
    pub fn eval(&self, f: &TestFunction, model: &ManifoldModel, x: Point) -> f64 {
        match self {
            Terminal::F => f.value(x),
            Terminal::FSquared => f.value(x).powi(2),
            Terminal::GradSq => f.gradient_on(model, x).norm_sq(),
            Terminal::GradNorm => f.gradient_on(model, x).norm(),
            Terminal::FLogF => xlogx(f.value(x)),
            Terminal::F2LogF2 => xlogx(f.value(x).powi(2)),
            Terminal::One => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeIntegral {
    None,
    /// `∫₀ᵗ exp(2σ(l_t − l_{t−s}) + 2Ks) ds`
    A {
        sigma: f64,
        k: f64,
    },
    /// `∫₀ᵗ exp(2σ l_s − 2Ks) ds`
    B {
        sigma: f64,
        k: f64,
    },
    /// `exp(scale · (∫₀ᵗ K₁(X_s) ds + ∫₀ᵗ K₂(X_s) dl_s))`
    Var {
        k1: ScalarField,
        k2: ScalarField,
        scale: f64,
    },
}

/// `E[terminal(X_t) · exp(lt_coeff · l_t) · time_integral]`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedFunctional {
    pub terminal: Terminal,
    pub lt_coeff: f64,
    pub time_integral: TimeIntegral,
}

impl WeightedFunctional {
    pub fn terminal(terminal: Terminal) -> Self {
        Self { terminal, lt_coeff: 0.0, time_integral: TimeIntegral::None }
    }

    pub fn with_lt_weight(mut self, c: f64) -> Self {
        self.lt_coeff = c;
        self
    }

    pub fn with_integral(mut self, integral: TimeIntegral) -> Self {
        self.time_integral = integral;
        self
    }

    fn validate(&self) -> Result<()> {
        let finite = self.lt_coeff.is_finite()
            && match self.time_integral {
                TimeIntegral::None => true,
                TimeIntegral::A { sigma, k } | TimeIntegral::B { sigma, k } => sigma.is_finite() && k.is_finite(),
                TimeIntegral::Var { scale, .. } => scale.is_finite(),
            };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("non-finite functional coefficients: {self:?}")))
        }
    }

    /// Per-path weight (everything except the terminal factor).
    pub fn path_weight(&self, s: &PathSummary) -> f64 {
        let lt = if self.lt_coeff == 0.0 { 1.0 } else { (self.lt_coeff * s.l_t).exp() };
        let integral = match self.time_integral {
            TimeIntegral::None => 1.0,
            TimeIntegral::A { .. } => s.int_a,
            TimeIntegral::B { .. } => s.int_b,
            TimeIntegral::Var { scale, .. } => (scale * s.int_var).exp(),
        };
        lt * integral
    }

    fn request(&self) -> SummaryRequest {
        let mut req = SummaryRequest::default();
        match self.time_integral {
            TimeIntegral::None => {}
            TimeIntegral::A { sigma, k } => req.a = Some((sigma, k)),
            TimeIntegral::B { sigma, k } => req.b = Some((sigma, k)),
            TimeIntegral::Var { k1, k2, .. } => req.var = Some((k1, k2)),
        }
        req
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub dt: f64,
}

impl EstimateWithError {
    pub fn exact(mean: f64) -> Self {
        Self { mean, std_error: 0.0, n_paths: 0, dt: 0.0 }
    }

    fn from_values(values: &[f64], dt: f64) -> Self {
        let (mean, std_error) = mean_se(values);
        Self { mean, std_error, n_paths: values.len(), dt }
    }
}

/// Which path integrals to accumulate while stepping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SummaryRequest {
    /// `(σ, K)` for the integral A.
    pub a: Option<(f64, f64)>,
    /// `(σ, K)` for the integral B.
    pub b: Option<(f64, f64)>,
    pub var: Option<(ScalarField, ScalarField)>,
}

impl SummaryRequest {
    pub fn constants(sigma: f64, k: f64) -> Self {
        Self { a: Some((sigma, k)), b: Some((sigma, k)), var: None }
    }
}

/// What a path contributes to every estimator: its endpoint, its local
/// time, and the requested path integrals (0 when not requested).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PathSummary {
    pub x_t: Point,
    pub l_t: f64,
    pub int_a: f64,
    pub int_b: f64,
    pub int_var: f64,
}

/// Simulates `params.n_paths` paths from `x0` and reduces each one to a
/// [`PathSummary`]. The integral A is accumulated online through
/// `e^{2σ l_t} ∫₀ᵗ e^{−2σ l_u + 2K(t−u)} du`, which equals the definition
/// after substituting `u = t − s`.
pub fn summarize(
    model: &ManifoldModel,
    x0: Point,
    t: f64,
    params: &SimParams,
    req: &SummaryRequest,
) -> Result<Vec<PathSummary>> {
    params.validate()?;
    let x0 = model.restrict(x0);
    if !(t >= 0.0) || !model.contains(x0) {
        return Err(Error::InvalidParameter(format!("need t >= 0 and x in the domain (t={t}, x={x0})")));
    }
    let (n, dt) = time_grid(t, params.dt);
    let table = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (0..=n).map(|j| f(j as f64 * dt)).collect() };
    let (sa, ea) = match req.a {
        Some((sigma, k)) => (sigma, table(&|u| (2.0 * k * (t - u)).exp())),
        None => (0.0, Vec::new()),
    };
    let (sb, eb) = match req.b {
        Some((sigma, k)) => (sigma, table(&|u| (-2.0 * k * u).exp())),
        None => (0.0, Vec::new()),
    };
    map_paths(params.n_paths, |i| {
        let mut st = Stepper::new(model, x0, dt, params.base_seed, i);
        if n == 0 {
            return Ok(PathSummary { x_t: x0, ..Default::default() });
        }
        if req.a.is_none() && req.b.is_none() && req.var.is_none() {
            st.advance_n(n)?;
            return Ok(PathSummary { x_t: st.x, l_t: st.l, ..Default::default() });
        }
        let (mut acc_a, mut acc_b, mut acc_k1, mut acc_k2) = (0.0, 0.0, 0.0, 0.0);
        let (mut em, mut ep) = (1.0, 1.0);
        if req.a.is_some() {
            acc_a = 0.5 * ea[0];
        }
        if req.b.is_some() {
            acc_b = 0.5 * eb[0];
        }
        if let Some((k1, _)) = req.var {
            acc_k1 = 0.5 * k1.eval(model, st.x);
        }
        for j in 1..=n {
            let dl = st.advance()?;
            if dl > 0.0 {
                em = (-2.0 * sa * st.l).exp();
                ep = (2.0 * sb * st.l).exp();
            }
            let w = if j == n { 0.5 } else { 1.0 };
            if req.a.is_some() {
                acc_a += w * ea[j] * em;
            }
            if req.b.is_some() {
                acc_b += w * eb[j] * ep;
            }
            if let Some((k1, k2)) = req.var {
                acc_k1 += w * k1.eval(model, st.x);
                if dl > 0.0 {
                    acc_k2 += k2.eval(model, st.x) * dl;
                }
            }
        }
        let int_a = if req.a.is_some() { dt * acc_a * (2.0 * sa * st.l).exp() } else { 0.0 };
        let summary = PathSummary { x_t: st.x, l_t: st.l, int_a, int_b: dt * acc_b, int_var: dt * acc_k1 + acc_k2 };
        if !(int_a <= WEIGHT_GUARD && summary.int_b <= WEIGHT_GUARD) {
            return Err(Error::OverflowGuard { path_index: i, weight: int_a.max(summary.int_b) });
        }
        Ok(summary)
    })
}

/// `P_t f(x) = E^x f(X_t)`.
pub fn estimate_pt(
    model: &ManifoldModel,
    f: &TestFunction,
    x: Point,
    t: f64,
    params: &SimParams,
) -> Result<EstimateWithError> {
    estimate_weighted(model, &WeightedFunctional::terminal(Terminal::F), f, x, t, params)
}

pub fn estimate_weighted(
    model: &ManifoldModel,
    w: &WeightedFunctional,
    f: &TestFunction,
    x: Point,
    t: f64,
    params: &SimParams,
) -> Result<EstimateWithError> {
    w.validate()?;
    if t == 0.0 {
        let s = PathSummary { x_t: model.restrict(x), ..Default::default() };
        return Ok(EstimateWithError::exact(w.terminal.eval(f, model, s.x_t) * w.path_weight(&s)));
    }
    let summaries = summarize(model, x, t, params, &w.request())?;
    let values = weighted_values(model, w, f, &summaries)?;
    Ok(EstimateWithError::from_values(&values, time_grid(t, params.dt).1))
}

/// Per-path values of a weighted functional on an existing batch.
pub fn weighted_values(
    model: &ManifoldModel,
    w: &WeightedFunctional,
    f: &TestFunction,
    summaries: &[PathSummary],
) -> Result<Vec<f64>> {
    summaries
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let weight = w.path_weight(s);
            if !(weight <= WEIGHT_GUARD) {
                return Err(Error::OverflowGuard { path_index: i as u64, weight });
            }
            Ok(w.terminal.eval(f, model, s.x_t) * weight)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradientEstimate {
    pub value: Point,
    pub std_error: Point,
    pub step: f64,
    /// Set when a displaced evaluation point had to be pulled back into
    /// the domain, so the difference quotient is one-sided or shortened.
    pub step_clipped: bool,
}

/// `∇P_t f(x)` by finite differences of `P_t f` with common random
/// numbers. Displaced points outside the domain are projected back in
/// and the gradient is recovered from the actual displacement vectors.
pub fn grad_pt(
    model: &ManifoldModel,
    f: &TestFunction,
    x: Point,
    t: f64,
    params: &SimParams,
) -> Result<GradientEstimate> {
    params.validate()?;
    let x = model.restrict(x);
    let h = 1e-3f64.max(params.dt.sqrt());
    let dim = model.dimension();
    let mut clipped = false;
    let mut pairs = Vec::with_capacity(dim);
    for axis in 0..dim {
        let e = Point::ZERO.with_component(axis, h);
        let mut displaced = |p: Point| -> Result<Point> {
            if model.signed_distance(p) >= 0.0 {
                return Ok(p);
            }
            clipped = true;
            model.project(p).ok_or_else(|| Error::InvalidParameter(format!("cannot displace {x} inside {model}")))
        };
        let plus = displaced(x + e)?;
        let minus = displaced(x + (-1.0) * e)?;
        pairs.push((plus, minus));
    }
    // D g = Δ, with rows D_k = p⁺_k − p⁻_k
    let rows: Vec<Point> = pairs.iter().map(|(p, m)| *p - *m).collect();
    let solve = |delta: &[f64]| -> Point {
        if dim == 1 {
            Point::on_line(delta[0] / rows[0].x)
        } else {
            let (a, b, c, d) = (rows[0].x, rows[0].y, rows[1].x, rows[1].y);
            let det = a * d - b * c;
            Point::new((d * delta[0] - b * delta[1]) / det, (a * delta[1] - c * delta[0]) / det)
        }
    };
    if t == 0.0 {
        let delta: Vec<f64> = pairs.iter().map(|(p, m)| f.value(*p) - f.value(*m)).collect();
        return Ok(GradientEstimate { value: solve(&delta), std_error: Point::ZERO, step: h, step_clipped: clipped });
    }
    let (n, dt) = time_grid(t, params.dt);
    let per_path = map_paths(params.n_paths, |i| {
        let mut delta = [0.0; 2];
        for (k, (p, m)) in pairs.iter().enumerate() {
            let mut sp = Stepper::new(model, *p, dt, params.base_seed, i);
            let mut sm = Stepper::new(model, *m, dt, params.base_seed, i);
            for _ in 0..n {
                sp.advance()?;
                sm.advance()?;
            }
            delta[k] = f.value(sp.x) - f.value(sm.x);
        }
        Ok(solve(&delta[..dim]))
    })?;
    let xs: Vec<f64> = per_path.iter().map(|g| g.x).collect();
    let ys: Vec<f64> = per_path.iter().map(|g| g.y).collect();
    let (gx, sx) = mean_se(&xs);
    let (gy, sy) = mean_se(&ys);
    Ok(GradientEstimate { value: Point::new(gx, gy), std_error: Point::new(sx, sy), step: h, step_clipped: clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fd_gradient(f: &TestFunction, x: Point) -> Point {
        let h = 1e-6;
        let dx = (f.value(x + Point::new(h, 0.0)) - f.value(x - Point::new(h, 0.0))) / (2.0 * h);
        let dy = (f.value(x + Point::new(0.0, h)) - f.value(x - Point::new(0.0, h))) / (2.0 * h);
        Point::new(dx, dy)
    }

    fn fd_hessian(f: &TestFunction, x: Point) -> Sym2 {
        let h = 1e-5;
        let gx = (f.gradient(x + Point::new(h, 0.0)) - f.gradient(x - Point::new(h, 0.0))).x / (2.0 * h);
        let gxy = (f.gradient(x + Point::new(0.0, h)) - f.gradient(x - Point::new(0.0, h))).x / (2.0 * h);
        let gy = (f.gradient(x + Point::new(0.0, h)) - f.gradient(x - Point::new(0.0, h))).y / (2.0 * h);
        Sym2::new(gx, gxy, gy)
    }

    fn all_functions() -> Vec<TestFunction> {
        let disk = ManifoldModel::disk(1.0).unwrap();
        let ann = ManifoldModel::annulus(0.5, 1.5).unwrap();
        let mut fs = TestFunction::registry(&disk);
        fs.push(TestFunction::Cosine { amplitude: 0.5, offset: 1.0 });
        fs.push(TestFunction::tangential_at(&disk, Point::new(1.0, 0.0), Point::new(0.0, 1.0)).unwrap());
        fs.push(TestFunction::tangential_at(&ann, Point::new(0.0, 0.5), Point::new(-2.0, 0.0)).unwrap());
        fs
    }

    #[test]
    fn closed_form_derivatives_match_differences() {
        let pts = [Point::new(0.3, -0.2), Point::new(0.7, 0.6), Point::new(-0.1, 0.9)];
        for f in all_functions() {
            for &x in &pts {
                let g = f.gradient(x);
                let fd = fd_gradient(&f, x);
                assert!((g - fd).norm() < 1e-7, "{f} gradient at {x}");
                let hs = f.hessian(x);
                let hfd = fd_hessian(&f, x);
                let err = (hs.xx - hfd.xx).abs() + (hs.xy - hfd.xy).abs() + (hs.yy - hfd.yy).abs();
                assert!(err < 1e-5, "{f} hessian at {x}: {hs:?} vs {hfd:?}");
            }
        }
    }

    #[test]
    fn tangential_functions_are_neumann_with_prescribed_gradient() {
        let disk = ManifoldModel::disk(1.0).unwrap();
        let b = Point::new(0.6, 0.8);
        let v = Point::new(-0.8, 0.6);
        let f = TestFunction::tangential_at(&disk, b, v).unwrap();
        assert!((f.gradient(b) - v).norm() < 1e-14);
        for k in 0..16 {
            let th = k as f64 * 0.4;
            let p = Point::new(th.cos(), th.sin());
            assert_abs_diff_eq!(f.gradient(p).dot(p), 0.0, epsilon = 1e-14);
        }
        let ann = ManifoldModel::annulus(0.5, 1.5).unwrap();
        let b = Point::new(0.5, 0.0);
        let f = TestFunction::tangential_at(&ann, b, Point::new(0.0, 1.0)).unwrap();
        assert!((f.gradient(b) - Point::new(0.0, 1.0)).norm() < 1e-14);
        for &r in &[0.5, 1.5] {
            for k in 0..16 {
                let th = k as f64 * 0.4;
                let p = Point::new(r * th.cos(), r * th.sin());
                assert_abs_diff_eq!(f.gradient(p).dot(p), 0.0, epsilon = 1e-12);
            }
        }
        assert!(TestFunction::tangential_at(&disk, Point::new(1.0, 0.0), Point::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn constant_function_is_exactly_one() {
        let m = ManifoldModel::annulus(0.5, 1.5).unwrap();
        let p = SimParams::new(1e-3, 200, 3);
        let e = estimate_pt(&m, &TestFunction::Constant { value: 1.0 }, Point::new(0.5, 0.0), 0.1, &p).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn zero_time_is_pointwise() {
        let m = ManifoldModel::disk(1.0).unwrap();
        let f = TestFunction::RadialPoly;
        let e = estimate_pt(&m, &f, Point::new(0.3, 0.4), 0.0, &SimParams::default()).unwrap();
        assert_eq!((e.mean, e.std_error), (0.25, 0.0));
        let g = grad_pt(&m, &f, Point::new(0.3, 0.4), 0.0, &SimParams::default()).unwrap();
        assert!((g.value - Point::new(0.6, 0.8)).norm() < 1e-9);
    }

    #[test]
    fn integral_a_without_weights_is_t() {
        let m = ManifoldModel::half_line();
        let p = SimParams::new(1e-3, 50, 1);
        let w = WeightedFunctional::terminal(Terminal::One).with_integral(TimeIntegral::A { sigma: 0.0, k: 0.0 });
        let vals = weighted_values(
            &m,
            &w,
            &TestFunction::Constant { value: 1.0 },
            &summarize(&m, Point::ZERO, 0.25, &p, &w.request()).unwrap(),
        )
        .unwrap();
        for v in vals {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn online_integrals_match_stored_paths() {
        let m = ManifoldModel::annulus(0.5, 1.5).unwrap().with_linear_drift(0.5).unwrap();
        let p = SimParams::new(1e-3, 20, 9);
        let x0 = Point::new(0.5, 0.0);
        let k1 = ScalarField::DriftCurvature;
        let k2 = ScalarField::BoundaryCurvature;
        let req = SummaryRequest { a: Some((2.0, 0.5)), b: Some((2.0, 0.5)), var: Some((k1, k2)) };
        let sums = summarize(&m, x0, 0.2, &p, &req).unwrap();
        for (i, s) in sums.iter().enumerate() {
            let path = crate::sde::simulate_reflected_path(&m, x0, 0.2, &p, i as u64).unwrap();
            assert_eq!(s.x_t, path.final_position());
            assert_eq!(s.l_t, path.final_local_time());
            assert!((s.int_a - path.integral_a(2.0, 0.5)).abs() < 1e-10 * s.int_a);
            assert!((s.int_b - path.integral_b(2.0, 0.5)).abs() < 1e-10 * s.int_b);
            assert!((s.int_var - path.integral_var(&m, &k1, &k2)).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_terminal_handles_zero() {
        assert_eq!(xlogx(0.0), 0.0);
        let m = ManifoldModel::half_line();
        let f = TestFunction::Coordinate { axis: 0 };
        assert_eq!(Terminal::FLogF.eval(&f, &m, Point::ZERO), 0.0);
    }

    #[test]
    fn registry_ranges() {
        let m = ManifoldModel::annulus(0.5, 1.5).unwrap();
        for f in TestFunction::registry(&m) {
            let (lo, hi) = f.range_on(&m);
            assert!(lo <= hi);
        }
        assert!(!TestFunction::Coordinate { axis: 0 }.is_nonnegative_on(&m));
        assert!(TestFunction::Coordinate { axis: 0 }.is_nonnegative_on(&ManifoldModel::half_line()));
        assert!(TestFunction::AffinePositive { eps: 0.5 }.is_nonnegative_on(&m));
    }
}
