//! Planar points and vectors. One-dimensional domains use the first
//! coordinate only and keep the second at zero.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub const fn on_line(x: f64) -> Self {
        Self { x, y: 0.0 }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise rotation by a quarter turn.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            _ => self.y,
        }
    }

    pub fn with_component(mut self, axis: usize, value: f64) -> Point {
        match axis {
            0 => self.x = value,
            _ => self.y = value,
        }
        self
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, rhs: Point) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, rhs: Point) -> Point {
        Point::new(self * rhs.x, self * rhs.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Symmetric 2x2 matrix, used for Hessians and drift Jacobians.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn scalar(a: f64) -> Self {
        Self { xx: a, xy: 0.0, yy: a }
    }

    /// `a * u u^T`
    pub fn outer(u: Point, a: f64) -> Self {
        Self::new(a * u.x * u.x, a * u.x * u.y, a * u.y * u.y)
    }

    /// `a * (u v^T + v u^T)`
    pub fn sym_outer(u: Point, v: Point, a: f64) -> Self {
        Self::new(2.0 * a * u.x * v.x, a * (u.x * v.y + u.y * v.x), 2.0 * a * u.y * v.y)
    }

    pub fn apply(self, v: Point) -> Point {
        Point::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    pub fn quad(self, v: Point) -> f64 {
        v.dot(self.apply(v))
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    pub fn frobenius_sq(self) -> f64 {
        self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy
    }

    pub fn max_eigenvalue(self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let half_gap = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        mean + half_gap
    }

    pub fn min_eigenvalue(self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let half_gap = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        mean - half_gap
    }

    /// Restriction to the first axis, for one-dimensional domains.
    pub fn first_axis_only(self) -> Sym2 {
        Sym2::new(self.xx, 0.0, 0.0)
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self.xx + rhs.xx, self.xy + rhs.xy, self.yy + rhs.yy)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, rhs: Sym2) -> Sym2 {
        Sym2::new(self * rhs.xx, self * rhs.xy, self * rhs.yy)
    }
}

// Points serialize as `[x]` or `[x, y]` so configs stay readable.
impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(deserializer)?;
        match coords.as_slice() {
            [x] => Ok(Point::on_line(*x)),
            [x, y] => Ok(Point::new(*x, *y)),
            other => Err(serde::de::Error::invalid_length(other.len(), &"a point with one or two coordinates")),
        }
    }
}
