//! Flat domains with boundary, drift fields, and their exact curvature
//! constants.
//!
//! Every domain lives in the plane (or on the line) with the Euclidean
//! metric, so `Ric = 0` and the curvature condition `Ric - ∇Z >= -K`
//! only constrains the symmetric drift Jacobian. Boundary curvature is
//! carried entirely by the shape: circles with the domain on the inside
//! are convex (`II = 1/r`), circles with the domain on the outside are
//! concave (`II = -1/r`), straight edges are flat.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{Point, Sym2};
use crate::sde::EPS_PROJ;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `[0, ∞)`.
    HalfLine,
    /// `[a, b]`.
    Interval { a: f64, b: f64 },
    /// Disk of the given radius centred at the origin.
    Disk { radius: f64 },
    /// `inner <= |x| <= outer`.
    Annulus { inner: f64, outer: f64 },
    /// `[-width/2, width/2] x [-height/2, height/2]`.
    Rectangle { width: f64, height: f64 },
}

/// Closed-form potentials `V` with `Z = ∇V`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `V = (a1 x² + a2 y²) / 2`
    Quadratic { a1: f64, a2: f64 },
    /// `V = b1 x + b2 y`
    Tilt { b1: f64, b2: f64 },
    /// `V = -c |x|⁴ / 4`
    Quartic { c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    /// `Z(x) = a x`
    Linear {
        a: f64,
    },
    GradientPotential {
        potential: Potential,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ManifoldModel {
    pub shape: Shape,
    pub drift: DriftSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    shape: Shape,
    #[serde(default = "zero_drift")]
    drift: DriftSpec,
}

fn zero_drift() -> DriftSpec {
    DriftSpec::Zero
}

impl<'de> Deserialize<'de> for ManifoldModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawModel::deserialize(d)?;
        ManifoldModel::new(raw.shape, raw.drift).map_err(serde::de::Error::custom)
    }
}

/// Scalar fields used as variable curvature bounds `K₁` (on M) and
/// `K₂` (on ∂M).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarField {
    Constant {
        value: f64,
    },
    /// Largest eigenvalue of the symmetric drift Jacobian at `x`: the
    /// pointwise optimal `K₁`.
    DriftCurvature,
    /// `-min II(v, v)` over unit tangents at the boundary point closest
    /// to `x`: the pointwise optimal `K₂`.
    BoundaryCurvature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub k: f64,
    pub sigma: f64,
    pub k1: Option<ScalarField>,
    pub k2: Option<ScalarField>,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::HalfLine => write!(f, "halfline"),
            Shape::Interval { a, b } => write!(f, "interval({a};{b})"),
            Shape::Disk { radius } => write!(f, "disk({radius})"),
            Shape::Annulus { inner, outer } => write!(f, "annulus({inner};{outer})"),
            Shape::Rectangle { width, height } => write!(f, "rectangle({width};{height})"),
        }
    }
}

impl fmt::Display for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DriftSpec::Zero => write!(f, "zero"),
            DriftSpec::Linear { a } => write!(f, "linear({a})"),
            DriftSpec::GradientPotential { potential } => match potential {
                Potential::Quadratic { a1, a2 } => write!(f, "quadratic({a1};{a2})"),
                Potential::Tilt { b1, b2 } => write!(f, "tilt({b1};{b2})"),
                Potential::Quartic { c } => write!(f, "quartic({c})"),
            },
        }
    }
}

impl fmt::Display for ManifoldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.shape, self.drift)
    }
}

impl Shape {
    pub fn dimension(&self) -> usize {
        match self {
            Shape::HalfLine | Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::HalfLine => true,
            Shape::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Shape::Disk { radius } => radius.is_finite() && radius > 0.0,
            Shape::Annulus { inner, outer } => inner.is_finite() && outer.is_finite() && 0.0 < inner && inner < outer,
            Shape::Rectangle { width, height } => {
                width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("invalid shape parameters: {self:?}")))
        }
    }

    /// Extent used to scale tolerances; the half-line uses 1.
    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::HalfLine => 1.0,
            Shape::Interval { a, b } => b - a,
            Shape::Disk { radius } => 2.0 * radius,
            Shape::Annulus { outer, .. } => 2.0 * outer,
            Shape::Rectangle { width, height } => width.hypot(height),
        }
    }

    /// Range of coordinate `axis` over the closed domain.
    pub fn axis_range(&self, axis: usize) -> (f64, f64) {
        match (*self, axis) {
            (Shape::HalfLine, 0) => (0.0, f64::INFINITY),
            (Shape::Interval { a, b }, 0) => (a, b),
            (Shape::HalfLine | Shape::Interval { .. }, _) => (0.0, 0.0),
            (Shape::Disk { radius }, _) => (-radius, radius),
            (Shape::Annulus { outer, .. }, _) => (-outer, outer),
            (Shape::Rectangle { width, .. }, 0) => (-0.5 * width, 0.5 * width),
            (Shape::Rectangle { height, .. }, _) => (-0.5 * height, 0.5 * height),
        }
    }

    /// `(min |x|², max |x|²)` over the closed domain.
    fn squared_radius_range(&self) -> (f64, f64) {
        match *self {
            Shape::HalfLine => (0.0, f64::INFINITY),
            Shape::Interval { a, b } => {
                let lo = if a <= 0.0 && 0.0 <= b { 0.0 } else { (a * a).min(b * b) };
                (lo, (a * a).max(b * b))
            }
            Shape::Disk { radius } => (0.0, radius * radius),
            Shape::Annulus { inner, outer } => (inner * inner, outer * outer),
            Shape::Rectangle { width, height } => (0.0, 0.25 * (width * width + height * height)),
        }
    }
}

impl Potential {
    fn value(&self, x: Point) -> f64 {
        match *self {
            Potential::Quadratic { a1, a2 } => 0.5 * (a1 * x.x * x.x + a2 * x.y * x.y),
            Potential::Tilt { b1, b2 } => b1 * x.x + b2 * x.y,
            Potential::Quartic { c } => -0.25 * c * x.norm_sq() * x.norm_sq(),
        }
    }

    fn gradient(&self, x: Point) -> Point {
        match *self {
            Potential::Quadratic { a1, a2 } => Point::new(a1 * x.x, a2 * x.y),
            Potential::Tilt { b1, b2 } => Point::new(b1, b2),
            Potential::Quartic { c } => (-c * x.norm_sq()) * x,
        }
    }

    fn hessian(&self, x: Point) -> Sym2 {
        match *self {
            Potential::Quadratic { a1, a2 } => Sym2::new(a1, 0.0, a2),
            Potential::Tilt { .. } => Sym2::ZERO,
            Potential::Quartic { c } => (-c) * (Sym2::scalar(x.norm_sq()) + Sym2::outer(x, 2.0)),
        }
    }

    /// Closed-form `sup_M λ_max(Hess V)`.
    fn hessian_bound(&self, shape: &Shape) -> Result<f64> {
        let dim = shape.dimension();
        let bound = match *self {
            Potential::Quadratic { a1, a2 } => {
                if dim == 1 {
                    a1
                } else {
                    a1.max(a2)
                }
            }
            Potential::Tilt { .. } => 0.0,
            Potential::Quartic { c } => {
                let (lo, hi) = shape.squared_radius_range();
                // radial eigenvalue -3c|x|², tangential -c|x|² (2D only)
                if c >= 0.0 {
                    let factor = if dim == 1 { 3.0 } else { 1.0 };
                    -factor * c * lo
                } else {
                    -3.0 * c * hi
                }
            }
        };
        if bound.is_finite() {
            Ok(bound)
        } else {
            Err(Error::UnsupportedDrift(format!("Hessian of {self:?} is unbounded above on {shape}")))
        }
    }
}

impl ManifoldModel {
    pub fn new(shape: Shape, drift: DriftSpec) -> Result<Self> {
        shape.validate()?;
        let finite = match drift {
            DriftSpec::Zero => true,
            DriftSpec::Linear { a } => a.is_finite(),
            DriftSpec::GradientPotential { potential } => match potential {
                Potential::Quadratic { a1, a2 } => a1.is_finite() && a2.is_finite(),
                Potential::Tilt { b1, b2 } => b1.is_finite() && b2.is_finite(),
                Potential::Quartic { c } => c.is_finite(),
            },
        };
        if !finite {
            return Err(Error::InvalidModel(format!("non-finite drift parameters: {drift:?}")));
        }
        Ok(Self { shape, drift })
    }

    pub fn half_line() -> Self {
        Self { shape: Shape::HalfLine, drift: DriftSpec::Zero }
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(Shape::Interval { a, b }, DriftSpec::Zero)
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(Shape::Disk { radius }, DriftSpec::Zero)
    }

    pub fn annulus(inner: f64, outer: f64) -> Result<Self> {
        Self::new(Shape::Annulus { inner, outer }, DriftSpec::Zero)
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        Self::new(Shape::Rectangle { width, height }, DriftSpec::Zero)
    }

    pub fn with_drift(self, drift: DriftSpec) -> Result<Self> {
        Self::new(self.shape, drift)
    }

    pub fn with_linear_drift(self, a: f64) -> Result<Self> {
        self.with_drift(DriftSpec::Linear { a })
    }

    pub fn dimension(&self) -> usize {
        self.shape.dimension()
    }

    /// Drops the second coordinate on one-dimensional domains.
    pub fn restrict(&self, x: Point) -> Point {
        if self.dimension() == 1 {
            Point::on_line(x.x)
        } else {
            x
        }
    }

    pub fn signed_distance(&self, x: Point) -> f64 {
        match self.shape {
            Shape::HalfLine => x.x,
            Shape::Interval { a, b } => (x.x - a).min(b - x.x),
            Shape::Disk { radius } => radius - x.norm(),
            Shape::Annulus { inner, outer } => {
                let r = x.norm();
                (r - inner).min(outer - r)
            }
            Shape::Rectangle { width, height } => {
                let dx = x.x.abs() - 0.5 * width;
                let dy = x.y.abs() - 0.5 * height;
                if dx <= 0.0 && dy <= 0.0 {
                    -(dx.max(dy))
                } else {
                    -(dx.max(0.0).hypot(dy.max(0.0)))
                }
            }
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        self.signed_distance(x) >= -EPS_PROJ
    }

    /// Nearest point of the closed domain. `None` when the nearest point
    /// is not unique (only the centre of an annulus).
    pub fn project(&self, y: Point) -> Option<Point> {
        Some(match self.shape {
            Shape::HalfLine => Point::on_line(y.x.max(0.0)),
            Shape::Interval { a, b } => Point::on_line(y.x.clamp(a, b)),
            Shape::Disk { radius } => {
                let r2 = y.norm_sq();
                if r2 <= radius * radius {
                    y
                } else {
                    (radius / r2.sqrt()) * y
                }
            }
            Shape::Annulus { inner, outer } => {
                let r2 = y.norm_sq();
                if r2 > outer * outer {
                    (outer / r2.sqrt()) * y
                } else if r2 < inner * inner {
                    if r2 == 0.0 {
                        return None;
                    }
                    (inner / r2.sqrt()) * y
                } else {
                    y
                }
            }
            Shape::Rectangle { width, height } => {
                Point::new(y.x.clamp(-0.5 * width, 0.5 * width), y.y.clamp(-0.5 * height, 0.5 * height))
            }
        })
    }

    fn require_boundary(&self, x: Point) -> Result<()> {
        let d = self.signed_distance(x);
        if d.abs() > EPS_PROJ * self.shape.diameter().max(1.0) {
            return Err(Error::NotOnBoundary { point: x, distance: d });
        }
        if let Shape::Rectangle { width, height } = self.shape {
            let near_x = (x.x.abs() - 0.5 * width).abs() <= EPS_PROJ;
            let near_y = (x.y.abs() - 0.5 * height).abs() <= EPS_PROJ;
            if near_x && near_y {
                return Err(Error::RectangleCorner(x));
            }
        }
        Ok(())
    }

    /// Whether `x` is on the inner circle of an annulus (as opposed to
    /// the outer one).
    fn on_inner_circle(&self, x: Point) -> bool {
        match self.shape {
            Shape::Annulus { inner, outer } => {
                let r = x.norm();
                (r - inner).abs() < (outer - r).abs()
            }
            _ => false,
        }
    }

    pub fn inward_normal(&self, x: Point) -> Result<Point> {
        self.require_boundary(x)?;
        Ok(match self.shape {
            Shape::HalfLine => Point::on_line(1.0),
            Shape::Interval { a, b } => {
                if (x.x - a).abs() <= (b - x.x).abs() {
                    Point::on_line(1.0)
                } else {
                    Point::on_line(-1.0)
                }
            }
            Shape::Disk { .. } => (-1.0 / x.norm()) * x,
            Shape::Annulus { .. } => {
                let radial = (1.0 / x.norm()) * x;
                if self.on_inner_circle(x) {
                    radial
                } else {
                    -radial
                }
            }
            Shape::Rectangle { width, height } => {
                let gap_x = 0.5 * width - x.x.abs();
                let gap_y = 0.5 * height - x.y.abs();
                if gap_x <= gap_y {
                    Point::new(-x.x.signum(), 0.0)
                } else {
                    Point::new(0.0, -x.y.signum())
                }
            }
        })
    }

    /// `II(v, v) = -<∇_v N, v>` at a boundary point.
    pub fn second_fundamental_form(&self, x: Point, v: Point) -> Result<f64> {
        if self.dimension() == 1 {
            self.require_boundary(x)?;
            return Ok(0.0);
        }
        let normal = self.inward_normal(x)?;
        if normal.dot(v).abs() > 1e-9 * v.norm().max(1.0) {
            return Err(Error::NotTangent { point: x, vector: v });
        }
        Ok(match self.shape {
            Shape::Disk { radius } => v.norm_sq() / radius,
            Shape::Annulus { inner, outer } => {
                if self.on_inner_circle(x) {
                    -v.norm_sq() / inner
                } else {
                    v.norm_sq() / outer
                }
            }
            _ => 0.0,
        })
    }

    /// `-min II(v, v)` over unit tangents at `x` (0 on 0-dimensional
    /// boundaries).
    pub fn boundary_curvature_bound(&self, x: Point) -> Result<f64> {
        if self.dimension() == 1 {
            self.require_boundary(x)?;
            return Ok(0.0);
        }
        let tangent = self.inward_normal(x)?.perp();
        Ok(-self.second_fundamental_form(x, tangent)?)
    }

    pub fn drift(&self, x: Point) -> Point {
        let z = match self.drift {
            DriftSpec::Zero => Point::ZERO,
            DriftSpec::Linear { a } => a * x,
            DriftSpec::GradientPotential { potential } => potential.gradient(x),
        };
        self.restrict(z)
    }

    /// Symmetric Jacobian `∇Z` (all drifts here are gradients, so it is
    /// symmetric).
    pub fn drift_jacobian(&self, x: Point) -> Sym2 {
        let j = match self.drift {
            DriftSpec::Zero => Sym2::ZERO,
            DriftSpec::Linear { a } => Sym2::scalar(a),
            DriftSpec::GradientPotential { potential } => potential.hessian(x),
        };
        if self.dimension() == 1 {
            j.first_axis_only()
        } else {
            j
        }
    }

    /// Potential `V` with `Z = ∇V`; the invariant measure is `e^V dx`.
    pub fn potential(&self, x: Point) -> f64 {
        let x = self.restrict(x);
        match self.drift {
            DriftSpec::Zero => 0.0,
            DriftSpec::Linear { a } => 0.5 * a * x.norm_sq(),
            DriftSpec::GradientPotential { potential } => potential.value(x),
        }
    }

    /// Tightest constants `(K, σ)` with `Ric - ∇Z >= -K` and `II >= -σ`.
    pub fn curvature_bounds(&self) -> Result<CurvatureBounds> {
        let k = match self.drift {
            DriftSpec::Zero => 0.0,
            DriftSpec::Linear { a } => a,
            DriftSpec::GradientPotential { potential } => potential.hessian_bound(&self.shape)?,
        };
        let sigma = match self.shape {
            Shape::Annulus { inner, outer } => (1.0 / inner).max(-1.0 / outer).max(0.0),
            Shape::Disk { radius } => (-1.0 / radius).max(0.0),
            _ => 0.0,
        };
        Ok(CurvatureBounds {
            k,
            sigma,
            k1: Some(ScalarField::DriftCurvature),
            k2: Some(ScalarField::BoundaryCurvature),
        })
    }

    /// Evenly spread boundary points, skipping rectangle corners. One
    /// dimensional shapes return their (one or two) endpoints.
    pub fn boundary_samples(&self, n: usize) -> Vec<Point> {
        let n = n.max(1);
        match self.shape {
            Shape::HalfLine => vec![Point::ZERO],
            Shape::Interval { a, b } => vec![Point::on_line(a), Point::on_line(b)],
            Shape::Disk { radius } => circle_points(radius, n),
            Shape::Annulus { inner, outer } => {
                let mut pts = circle_points(inner, n / 2 + 1);
                pts.extend(circle_points(outer, n - n / 2));
                pts
            }
            Shape::Rectangle { width, height } => {
                let per_edge = (n / 4).max(1);
                let mut pts = Vec::with_capacity(4 * per_edge);
                for i in 0..per_edge {
                    // open interval along each edge, away from corners
                    let s = (i as f64 + 0.5) / per_edge as f64 - 0.5;
                    pts.push(Point::new(s * width, 0.5 * height));
                    pts.push(Point::new(s * width, -0.5 * height));
                    pts.push(Point::new(0.5 * width, s * height));
                    pts.push(Point::new(-0.5 * width, s * height));
                }
                pts
            }
        }
    }
}

fn circle_points(radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let theta = std::f64::consts::TAU * (i as f64 + 0.25) / n as f64;
            Point::new(radius * theta.cos(), radius * theta.sin())
        })
        .collect()
}

impl ScalarField {
    pub fn eval(&self, model: &ManifoldModel, x: Point) -> f64 {
        match *self {
            ScalarField::Constant { value } => value,
            ScalarField::DriftCurvature => model.drift_jacobian(x).max_eigenvalue(),
            ScalarField::BoundaryCurvature => {
                let on_boundary = model.project(x).unwrap_or(x);
                let b = nearest_boundary_point(model, on_boundary);
                model.boundary_curvature_bound(b).unwrap_or(0.0)
            }
        }
    }
}

/// Closest boundary point (ties broken towards the inner circle).
fn nearest_boundary_point(model: &ManifoldModel, x: Point) -> Point {
    match model.shape {
        Shape::HalfLine => Point::ZERO,
        Shape::Interval { a, b } => {
            if x.x - a <= b - x.x {
                Point::on_line(a)
            } else {
                Point::on_line(b)
            }
        }
        Shape::Disk { radius } => {
            let r = x.norm();
            if r == 0.0 {
                Point::new(radius, 0.0)
            } else {
                (radius / r) * x
            }
        }
        Shape::Annulus { inner, outer } => {
            let r = x.norm().max(f64::MIN_POSITIVE);
            let target = if r - inner <= outer - r { inner } else { outer };
            (target / r) * x
        }
        Shape::Rectangle { width, height } => {
            let gap_x = 0.5 * width - x.x.abs();
            let gap_y = 0.5 * height - x.y.abs();
            if gap_x <= gap_y {
                Point::new(0.5 * width * sign_or_one(x.x), x.y)
            } else {
                Point::new(x.x, 0.5 * height * sign_or_one(x.y))
            }
        }
    }
}

fn sign_or_one(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn signed_distance_examples() {
        let disk = ManifoldModel::disk(1.0).unwrap();
        assert_eq!(disk.signed_distance(Point::ZERO), 1.0);
        let ann = ManifoldModel::annulus(0.5, 1.5).unwrap();
        assert_eq!(ann.signed_distance(Point::new(1.0, 0.0)), 0.5);
        assert_eq!(ManifoldModel::half_line().signed_distance(Point::on_line(-0.2)), -0.2);
    }

    #[test]
    fn rectangle_distance_outside_corner() {
        let rect = ManifoldModel::rectangle(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(rect.signed_distance(Point::new(1.3, 0.9)), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rect.signed_distance(Point::new(0.0, 0.0)), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn normals() {
        let disk = ManifoldModel::disk(1.0).unwrap();
        assert_eq!(disk.inward_normal(Point::new(1.0, 0.0)).unwrap(), Point::new(-1.0, 0.0));
        let ann = ManifoldModel::annulus(0.5, 1.5).unwrap();
        assert_eq!(ann.inward_normal(Point::new(0.5, 0.0)).unwrap(), Point::new(1.0, 0.0));
        assert_eq!(ManifoldModel::half_line().inward_normal(Point::ZERO).unwrap(), Point::on_line(1.0));
    }

    #[test]
    fn normal_requires_boundary_point() {
        let disk = ManifoldModel::disk(1.0).unwrap();
        assert!(matches!(disk.inward_normal(Point::new(0.5, 0.0)), Err(Error::NotOnBoundary { .. })));
    }

    #[test]
    fn rectangle_corner_rejected() {
        let rect = ManifoldModel::rectangle(2.0, 2.0).unwrap();
        assert!(matches!(rect.inward_normal(Point::new(1.0, 1.0)), Err(Error::RectangleCorner(_))));
        assert_eq!(rect.inward_normal(Point::new(1.0, 0.3)).unwrap(), Point::new(-1.0, 0.0));
    }

    #[test]
    fn second_fundamental_form_examples() {
        let disk = ManifoldModel::disk(1.0).unwrap();
        assert_abs_diff_eq!(disk.second_fundamental_form(Point::new(1.0, 0.0), Point::new(0.0, 1.0)).unwrap(), 1.0);
        let ann = ManifoldModel::annulus(0.5, 1.5).unwrap();
        assert_abs_diff_eq!(ann.second_fundamental_form(Point::new(0.5, 0.0), Point::new(0.0, 1.0)).unwrap(), -2.0);
        let interval = ManifoldModel::interval(0.0, 1.0).unwrap();
        assert_eq!(interval.second_fundamental_form(Point::on_line(1.0), Point::ZERO).unwrap(), 0.0);
    }

    #[test]
    fn normal_vector_is_not_tangent() {
        let disk = ManifoldModel::disk(1.0).unwrap();
        assert!(matches!(
            disk.second_fundamental_form(Point::new(1.0, 0.0), Point::new(1.0, 0.0)),
            Err(Error::NotTangent { .. })
        ));
    }

    #[test]
    fn curvature_bound_examples() {
        let b = ManifoldModel::disk(1.0).unwrap().curvature_bounds().unwrap();
        assert_eq!((b.k, b.sigma), (0.0, 0.0));
        let b = ManifoldModel::annulus(0.5, 1.5).unwrap().curvature_bounds().unwrap();
        assert_eq!((b.k, b.sigma), (0.0, 2.0));
        let b = ManifoldModel::half_line().with_linear_drift(-1.0).unwrap().curvature_bounds().unwrap();
        assert_eq!((b.k, b.sigma), (-1.0, 0.0));
    }

    #[test]
    fn potential_bounds() {
        let quad = DriftSpec::GradientPotential { potential: Potential::Quadratic { a1: -1.0, a2: 0.5 } };
        let m = ManifoldModel::new(Shape::Disk { radius: 1.0 }, quad).unwrap();
        assert_eq!(m.curvature_bounds().unwrap().k, 0.5);
        let quartic = DriftSpec::GradientPotential { potential: Potential::Quartic { c: 1.0 } };
        let m = ManifoldModel::new(Shape::Annulus { inner: 0.5, outer: 1.0 }, quartic).unwrap();
        assert_abs_diff_eq!(m.curvature_bounds().unwrap().k, -0.25);
        let unbounded = DriftSpec::GradientPotential { potential: Potential::Quartic { c: -1.0 } };
        let m = ManifoldModel::new(Shape::HalfLine, unbounded).unwrap();
        assert!(matches!(m.curvature_bounds(), Err(Error::UnsupportedDrift(_))));
    }

    #[test]
    fn drift_examples() {
        let m = ManifoldModel::disk(1.0).unwrap();
        assert_eq!(m.drift(Point::new(0.3, 0.2)), Point::ZERO);
        let m = m.with_linear_drift(2.0).unwrap();
        assert_eq!(m.drift(Point::new(0.5, 0.0)), Point::new(1.0, 0.0));
        let h = ManifoldModel::half_line().with_linear_drift(-1.0).unwrap();
        assert_eq!(h.drift(Point::on_line(0.3)).x, -0.3);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ManifoldModel::disk(0.0).is_err());
        assert!(ManifoldModel::annulus(1.0, 0.5).is_err());
        assert!(ManifoldModel::interval(1.0, 1.0).is_err());
        assert!(ManifoldModel::rectangle(1.0, -1.0).is_err());
    }

    #[test]
    fn annulus_centre_projection_is_ambiguous() {
        let ann = ManifoldModel::annulus(0.5, 1.5).unwrap();
        assert!(ann.project(Point::ZERO).is_none());
        assert_eq!(ann.project(Point::new(0.1, 0.0)).unwrap(), Point::new(0.5, 0.0));
    }

    #[test]
    fn scalar_fields() {
        let ann = ManifoldModel::annulus(0.5, 1.5).unwrap();
        let k2 = ScalarField::BoundaryCurvature;
        assert_abs_diff_eq!(k2.eval(&ann, Point::new(0.0, 0.5)), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(k2.eval(&ann, Point::new(-1.5, 0.0)), -1.0 / 1.5, epsilon = 1e-12);
        let lin = ann.with_linear_drift(0.7).unwrap();
        assert_abs_diff_eq!(ScalarField::DriftCurvature.eval(&lin, Point::new(1.0, 0.0)), 0.7);
    }

    #[test]
    fn model_json_roundtrip_and_validation() {
        let json = r#"{"shape":{"kind":"annulus","inner":0.5,"outer":1.5},"drift":{"kind":"linear","a":1.0}}"#;
        let m: ManifoldModel = serde_json::from_str(json).unwrap();
        assert_eq!(m.to_string(), "annulus(0.5;1.5)/linear(1)");
        let bad = r#"{"shape":{"kind":"disk","radius":-1.0}}"#;
        assert!(serde_json::from_str::<ManifoldModel>(bad).is_err());
    }
}
