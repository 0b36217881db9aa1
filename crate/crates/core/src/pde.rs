//! Deterministic Neumann heat solver for `∂_t u = Δu + Z·∇u` on grid
//! friendly shapes.
//!
//! Space: cell-centred finite volumes for `e^{-V} div(e^{V} ∇u)` with
//! `Z = ∇V`, so the weighted mass `Σ e^{V} u vol` is conserved exactly and
//! the zero-flux boundary faces impose the Neumann condition. Disks and
//! annuli use polar cells; the angular direction is treated spectrally
//! (radial potentials decouple the Fourier modes) and the origin needs no
//! special stencil because the face at `r = 0` has zero area.
//!
//! Time: implicit Euler with one Richardson extrapolation (`2u_{2N} − u_N`),
//! second order in the step.

use std::f64::consts::TAU;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DriftSpec, ManifoldModel, Shape};
use crate::point::Point;
use crate::semigroup::{xlogx, TestFunction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridResolution {
    /// Cells along the line, the radius, or each Cartesian axis.
    pub n_space: usize,
    /// Angular samples on polar grids (Fourier modes up to `n_theta/2`).
    #[serde(default = "default_theta")]
    pub n_theta: usize,
    /// Implicit Euler steps per unit time for the coarse pass; `None`
    /// picks `2 / h` so the temporal error stays below the spatial one.
    #[serde(default)]
    pub steps_per_unit_time: Option<f64>,
    /// Length of the truncated half-line; `None` uses
    /// [`half_line_extent`] with the origin as the evaluation point.
    #[serde(default)]
    pub extent: Option<f64>,
}

fn default_theta() -> usize {
    128
}

impl GridResolution {
    pub fn for_model(model: &ManifoldModel) -> Self {
        let n_space = match model.shape {
            Shape::HalfLine | Shape::Interval { .. } => 2048,
            _ => 256,
        };
        Self { n_space, n_theta: default_theta(), steps_per_unit_time: None, extent: None }
    }

    /// Same grid family at half the spatial resolution.
    pub fn coarsened(&self) -> Self {
        Self {
            n_space: (self.n_space / 2).max(4),
            n_theta: (self.n_theta / 2).max(8),
            steps_per_unit_time: self.steps_per_unit_time.map(|s| s / 2.0),
            extent: self.extent,
        }
    }

    pub fn with_extent(mut self, extent: f64) -> Self {
        self.extent = Some(extent);
        self
    }
}

/// Truncation length `L_max` for the half-line so that paths started at
/// `x <= x_max` reach the artificial far wall before time `t` only with
/// Gaussian-tail probability (ten standard deviations). A repulsive
/// linear drift `a > 0` is accounted for through the exact OU mean and
/// variance.
pub fn half_line_extent(x_max: f64, t: f64, a: f64) -> f64 {
    let t = t.max(1e-6);
    if a > 0.0 {
        x_max * (a * t).exp() + 10.0 * (((2.0 * a * t).exp() - 1.0) / a).sqrt()
    } else {
        x_max + 10.0 * (2.0 * t).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Grid {
    /// Cell centres `a + (j + ½) h`.
    Line {
        a: f64,
        b: f64,
        n: usize,
    },
    /// Radial cells on `[r_in, r_out]` (`r_in = 0` for a disk) times
    /// `n_theta` equispaced angles starting at `θ = 0`.
    Polar {
        r_in: f64,
        r_out: f64,
        nr: usize,
        n_theta: usize,
    },
    Cartesian {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
    },
}

impl Grid {
    pub fn len(&self) -> usize {
        match *self {
            Grid::Line { n, .. } => n,
            Grid::Polar { nr, n_theta, .. } => nr * n_theta,
            Grid::Cartesian { nx, ny, .. } => nx * ny,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell centres in storage order.
    pub fn centres(&self) -> Vec<Point> {
        match *self {
            Grid::Line { a, b, n } => {
                let h = (b - a) / n as f64;
                (0..n).map(|j| Point::on_line(a + (j as f64 + 0.5) * h)).collect()
            }
            Grid::Polar { r_in, r_out, nr, n_theta } => {
                let dr = (r_out - r_in) / nr as f64;
                let mut out = Vec::with_capacity(nr * n_theta);
                for i in 0..nr {
                    let r = r_in + (i as f64 + 0.5) * dr;
                    for k in 0..n_theta {
                        let th = TAU * k as f64 / n_theta as f64;
                        out.push(Point::new(r * th.cos(), r * th.sin()));
                    }
                }
                out
            }
            Grid::Cartesian { x0, x1, y0, y1, nx, ny } => {
                let (hx, hy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
                let mut out = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        out.push(Point::new(x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy));
                    }
                }
                out
            }
        }
    }

    /// Smallest spacing, used to pick the time step.
    fn spacing(&self) -> f64 {
        match *self {
            Grid::Line { a, b, n } => (b - a) / n as f64,
            Grid::Polar { r_in, r_out, nr, .. } => (r_out - r_in) / nr as f64,
            Grid::Cartesian { x0, x1, y0, y1, nx, ny } => ((x1 - x0) / nx as f64).min((y1 - y0) / ny as f64),
        }
    }
}

/// Solution values on a grid at a given time.
#[derive(Clone, Debug)]
pub struct GridField {
    pub model: ManifoldModel,
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
    /// Per-ring angular Fourier coefficients (polar grids only).
    modal: Vec<Complex64>,
}

/// Symmetric tridiagonal finite-volume operator in one direction:
/// `(A u)_i = [k_{i+½}(u_{i+1} − u_i) − k_{i−½}(u_i − u_{i−1})]/m_i − c_i u_i`.
#[derive(Clone, Debug)]
struct Tridiag {
    m: Vec<f64>,
    k: Vec<f64>,
    c: Vec<f64>,
}

/// Thomas factorisation of `M − τ(K − C)` for a fixed step `τ`.
struct Factored {
    m: Vec<f64>,
    off: Vec<f64>,
    cp: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl Tridiag {
    /// One-dimensional cells on `[a, b]` with weight `e^{V(x)}` and a
    /// geometric factor `jac(x)` (1 on lines, `r` on radial lines).
    fn new(a: f64, b: f64, n: usize, v: impl Fn(f64) -> f64, jac: impl Fn(f64) -> f64) -> Self {
        let h = (b - a) / n as f64;
        let m = (0..n)
            .map(|i| {
                let x = a + (i as f64 + 0.5) * h;
                v(x).exp() * jac(x) * h
            })
            .collect();
        let k = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    0.0
                } else {
                    let x = a + i as f64 * h;
                    v(x).exp() * jac(x) / h
                }
            })
            .collect();
        Self { m, k, c: vec![0.0; n] }
    }

    fn with_reaction(&self, c: Vec<f64>) -> Self {
        Self { m: self.m.clone(), k: self.k.clone(), c }
    }

    fn factor(&self, tau: f64) -> Factored {
        let n = self.m.len();
        let diag: Vec<f64> =
            (0..n).map(|i| self.m[i] * (1.0 + tau * self.c[i]) + tau * (self.k[i] + self.k[i + 1])).collect();
        let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| -tau * self.k[i + 1]).collect();
        let mut cp = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        for i in 0..n {
            let denom = if i == 0 { diag[0] } else { diag[i] - off[i - 1] * cp[i - 1] };
            inv_denom[i] = 1.0 / denom;
            if i + 1 < n {
                cp[i] = off[i] * inv_denom[i];
            }
        }
        Factored { m: self.m.clone(), off, cp, inv_denom }
    }
}

impl Factored {
    /// One implicit Euler step in place.
    fn step(&self, u: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let b = self.m[i] * u[i];
            u[i] = if i == 0 { b * self.inv_denom[0] } else { (b - self.off[i - 1] * u[i - 1]) * self.inv_denom[i] };
        }
        for i in (0..n.saturating_sub(1)).rev() {
            u[i] -= self.cp[i] * u[i + 1];
        }
    }

    /// Same step on a strided view (`u[offset + i*stride]`).
    fn step_strided(&self, u: &mut [f64], offset: usize, stride: usize, scratch: &mut Vec<f64>) {
        let n = self.m.len();
        scratch.clear();
        scratch.extend((0..n).map(|i| u[offset + i * stride]));
        self.step(scratch);
        for i in 0..n {
            u[offset + i * stride] = scratch[i];
        }
    }
}

fn radial_potential(model: &ManifoldModel) -> Result<f64> {
    match model.drift {
        DriftSpec::Zero => Ok(0.0),
        DriftSpec::Linear { a } => Ok(a),
        other => Err(Error::UnsupportedDrift(format!("PDE oracle supports zero or linear drift, got {other}"))),
    }
}

/// Builds the grid for `model` at resolution `res`.
pub fn grid_for(model: &ManifoldModel, res: &GridResolution, t: f64) -> Result<Grid> {
    if res.n_space < 4 || res.n_theta < 8 {
        return Err(Error::InvalidParameter(format!("grid too small: {res:?}")));
    }
    let a = radial_potential(model)?;
    Ok(match model.shape {
        Shape::HalfLine => {
            Grid::Line { a: 0.0, b: res.extent.unwrap_or_else(|| half_line_extent(0.0, t, a)), n: res.n_space }
        }
        Shape::Interval { a, b } => Grid::Line { a, b, n: res.n_space },
        Shape::Disk { radius } => Grid::Polar { r_in: 0.0, r_out: radius, nr: res.n_space, n_theta: res.n_theta },
        Shape::Annulus { inner, outer } => {
            Grid::Polar { r_in: inner, r_out: outer, nr: res.n_space, n_theta: res.n_theta }
        }
        Shape::Rectangle { width, height } => Grid::Cartesian {
            x0: -0.5 * width,
            x1: 0.5 * width,
            y0: -0.5 * height,
            y1: 0.5 * height,
            nx: res.n_space,
            ny: res.n_space,
        },
    })
}

/// Evolves `initial` (sampled at cell centres) through the requested
/// times; `times` must be non-decreasing and non-negative.
fn evolve(
    model: &ManifoldModel,
    grid: Grid,
    initial: Vec<f64>,
    times: &[f64],
    res: &GridResolution,
) -> Result<Vec<GridField>> {
    let a = radial_potential(model)?;
    let v = move |x: f64| 0.5 * a * x * x;
    let steps_per_unit = res.steps_per_unit_time.unwrap_or(2.0 / grid.spacing());
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("snapshot times must be non-decreasing and >= 0: {times:?}")));
        }
        prev = t;
    }
    let weights = cell_weights(&grid, a);
    let mass0: f64 = weights.iter().zip(&initial).map(|(w, u)| w * u).sum();
    let scale0: f64 = weights.iter().zip(&initial).map(|(w, u)| w * u.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(times.len());

    let segments: Vec<f64> = times
        .iter()
        .scan(0.0, |last, &t| {
            let d = t - *last;
            *last = t;
            Some(d)
        })
        .collect();
    let n_steps = |d: f64| ((d * steps_per_unit).ceil() as usize).max(64);

    match grid {
        Grid::Line { a: lo, b: hi, n } => {
            let op = Tridiag::new(lo, hi, n, v, |_| 1.0);
            let mut u = initial;
            for (seg, &t) in segments.iter().zip(times) {
                if *seg > 0.0 {
                    richardson(&mut u, *seg, n_steps(*seg), |tau| {
                        let f = op.factor(tau);
                        move |w: &mut [f64]| f.step(w)
                    });
                }
                out.push(GridField::new(*model, grid, u.clone(), t));
            }
        }
        Grid::Polar { r_in, r_out, nr, n_theta } => {
            let base = Tridiag::new(r_in, r_out, nr, v, |r| r);
            let dr = (r_out - r_in) / nr as f64;
            let mut modal = to_modal(&initial, nr, n_theta);
            let ops: Vec<Tridiag> = (0..n_theta)
                .map(|mb| {
                    let m = signed_mode(mb, n_theta) as f64;
                    let c = (0..nr)
                        .map(|i| {
                            let r = r_in + (i as f64 + 0.5) * dr;
                            m * m / (r * r)
                        })
                        .collect();
                    base.with_reaction(c)
                })
                .collect();
            for (seg, &t) in segments.iter().zip(times) {
                if *seg > 0.0 {
                    let steps = n_steps(*seg);
                    for (mb, op) in ops.iter().enumerate() {
                        let mut re: Vec<f64> = (0..nr).map(|i| modal[i * n_theta + mb].re).collect();
                        let mut im: Vec<f64> = (0..nr).map(|i| modal[i * n_theta + mb].im).collect();
                        for part in [&mut re, &mut im] {
                            if part.iter().all(|&x| x == 0.0) {
                                continue;
                            }
                            richardson(part, *seg, steps, |tau| {
                                let f = op.factor(tau);
                                move |w: &mut [f64]| f.step(w)
                            });
                        }
                        for i in 0..nr {
                            modal[i * n_theta + mb] = Complex64::new(re[i], im[i]);
                        }
                    }
                }
                let values = from_modal(&modal, nr, n_theta);
                out.push(GridField { model: *model, grid, values, time: t, modal: modal.clone() });
            }
        }
        Grid::Cartesian { x0, x1, y0, y1, nx, ny } => {
            let opx = Tridiag::new(x0, x1, nx, v, |_| 1.0);
            let opy = Tridiag::new(y0, y1, ny, v, |_| 1.0);
            let mut u = initial;
            for (seg, &t) in segments.iter().zip(times) {
                if *seg > 0.0 {
                    richardson(&mut u, *seg, n_steps(*seg), |tau| {
                        let fx = opx.factor(tau);
                        let fy = opy.factor(tau);
                        let mut scratch = Vec::new();
                        move |w: &mut [f64]| {
                            for j in 0..ny {
                                fx.step(&mut w[j * nx..(j + 1) * nx]);
                            }
                            for i in 0..nx {
                                fy.step_strided(w, i, nx, &mut scratch);
                            }
                        }
                    });
                }
                out.push(GridField::new(*model, grid, u.clone(), t));
            }
        }
    }

    for field in &out {
        if field.time > 0.0 {
            let mass: f64 = weights.iter().zip(&field.values).map(|(w, u)| w * u).sum();
            let drift = (mass - mass0).abs() / scale0 / field.time;
            if drift > 1e-6 {
                return Err(Error::ResolutionTooCoarse { drift });
            }
        }
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ResolutionTooCoarse { drift: f64::INFINITY });
        }
    }
    Ok(out)
}

/// `2 E_{2N} u − E_N u` where `E_N` is `N` implicit Euler steps of size
/// `d/N`; `make(τ)` returns the single-step map.
fn richardson<S: FnMut(&mut [f64])>(u: &mut [f64], d: f64, n: usize, make: impl Fn(f64) -> S) {
    let mut coarse = u.to_vec();
    let mut step = make(d / n as f64);
    for _ in 0..n {
        step(&mut coarse);
    }
    let mut step = make(d / (2 * n) as f64);
    for _ in 0..2 * n {
        step(u);
    }
    for (f, c) in u.iter_mut().zip(&coarse) {
        *f = 2.0 * *f - c;
    }
}

fn signed_mode(mb: usize, n_theta: usize) -> i64 {
    if mb <= n_theta / 2 {
        mb as i64
    } else {
        mb as i64 - n_theta as i64
    }
}

fn to_modal(values: &[f64], nr: usize, n_theta: usize) -> Vec<Complex64> {
    let fft = FftPlanner::new().plan_fft_forward(n_theta);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for ring in buf.chunks_mut(n_theta).take(nr) {
        fft.process(ring);
    }
    let inv = 1.0 / n_theta as f64;
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

fn from_modal(modal: &[Complex64], nr: usize, n_theta: usize) -> Vec<f64> {
    let ifft = FftPlanner::new().plan_fft_inverse(n_theta);
    let mut buf = modal.to_vec();
    for ring in buf.chunks_mut(n_theta).take(nr) {
        ifft.process(ring);
    }
    buf.iter().map(|c| c.re).collect()
}

/// Weighted cell volumes `e^{V} vol`, the conserved mass density.
fn cell_weights(grid: &Grid, a: f64) -> Vec<f64> {
    grid.centres()
        .iter()
        .map(|p| {
            let vol = match *grid {
                Grid::Line { a, b, n } => (b - a) / n as f64,
                Grid::Polar { r_in, r_out, nr, n_theta } => {
                    p.norm() * (r_out - r_in) / nr as f64 * TAU / n_theta as f64
                }
                Grid::Cartesian { x0, x1, y0, y1, nx, ny } => (x1 - x0) / nx as f64 * (y1 - y0) / ny as f64,
            };
            (0.5 * a * p.norm_sq()).exp() * vol
        })
        .collect()
}

/// Cubic Lagrange weights and derivative weights on nodes `-1, 0, 1, 2`
/// at offset `s` from node 0.
fn lagrange4(s: f64) -> ([f64; 4], [f64; 4]) {
    let w = [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ];
    let d = [
        -(3.0 * s * s - 6.0 * s + 2.0) / 6.0,
        (3.0 * s * s - 4.0 * s - 1.0) / 2.0,
        -(3.0 * s * s - 2.0 * s - 2.0) / 2.0,
        (3.0 * s * s - 1.0) / 6.0,
    ];
    (w, d)
}

/// Stencil for coordinate `x` on cells of width `h` starting at `lo`:
/// the four cell indices (possibly ghosts) and the offset `s`.
fn stencil(x: f64, lo: f64, h: f64, n: usize) -> ([i64; 4], f64) {
    let u = (x - lo) / h - 0.5;
    let i0 = u.floor().clamp(-1.0, n as f64 - 1.0) as i64;
    let s = u - i0 as f64;
    ([i0 - 1, i0, i0 + 1, i0 + 2], s)
}

/// Even reflection of a ghost index into `0..n`.
fn mirror(j: i64, n: usize) -> usize {
    let n = n as i64;
    let mut j = j;
    if j < 0 {
        j = -1 - j;
    }
    if j >= n {
        j = 2 * n - 1 - j;
    }
    j.clamp(0, n - 1) as usize
}

impl GridField {
    fn new(model: ManifoldModel, grid: Grid, values: Vec<f64>, time: f64) -> Self {
        let modal = match grid {
            Grid::Polar { nr, n_theta, .. } => to_modal(&values, nr, n_theta),
            _ => Vec::new(),
        };
        Self { model, grid, values, time, modal }
    }

    /// Interpolated `(u(x), ∇u(x))`; Neumann ghosts mirror the cells.
    pub fn value_and_gradient(&self, x: Point) -> (f64, Point) {
        match self.grid {
            Grid::Line { a, b, n } => {
                let h = (b - a) / n as f64;
                let (idx, s) = stencil(x.x, a, h, n);
                let (w, d) = lagrange4(s);
                let mut val = 0.0;
                let mut der = 0.0;
                for k in 0..4 {
                    let u = self.values[mirror(idx[k], n)];
                    val += w[k] * u;
                    der += d[k] * u;
                }
                (val, Point::on_line(der / h))
            }
            Grid::Cartesian { x0, x1, y0, y1, nx, ny } => {
                let (hx, hy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
                let (ix, sx) = stencil(x.x, x0, hx, nx);
                let (iy, sy) = stencil(x.y, y0, hy, ny);
                let (wx, dx) = lagrange4(sx);
                let (wy, dy) = lagrange4(sy);
                let (mut val, mut gx, mut gy) = (0.0, 0.0, 0.0);
                for (q, &j) in iy.iter().enumerate() {
                    for (p, &i) in ix.iter().enumerate() {
                        let u = self.values[mirror(j, ny) * nx + mirror(i, nx)];
                        val += wx[p] * wy[q] * u;
                        gx += dx[p] * wy[q] * u;
                        gy += wx[p] * dy[q] * u;
                    }
                }
                (val, Point::new(gx / hx, gy / hy))
            }
            Grid::Polar { r_in, r_out, nr, n_theta } => self.polar_eval(x, r_in, r_out, nr, n_theta),
        }
    }

    fn polar_eval(&self, x: Point, r_in: f64, r_out: f64, nr: usize, n_theta: usize) -> (f64, Point) {
        let dr = (r_out - r_in) / nr as f64;
        let (r, th) = {
            let r = x.norm();
            if r < 1e-9 * dr {
                (1e-9 * dr, 0.0)
            } else {
                (r, x.y.atan2(x.x))
            }
        };
        let (idx, s) = stencil(r, r_in, dr, nr);
        let (w, d) = lagrange4(s);
        let disk = r_in == 0.0;
        let (mut u, mut u_r, mut u_th) = (0.0, 0.0, 0.0);
        for mb in 0..n_theta {
            let m = signed_mode(mb, n_theta);
            let mut c = Complex64::new(0.0, 0.0);
            let mut cd = Complex64::new(0.0, 0.0);
            for k in 0..4 {
                let j = idx[k];
                let mut coef = self.modal[mirror(j, nr) * n_theta + mb];
                // through the origin: u(−ρ, θ) = u(ρ, θ + π)
                if disk && j < 0 && m % 2 != 0 {
                    coef = -coef;
                }
                c += w[k] * coef;
                cd += d[k] * coef;
            }
            let e = Complex64::from_polar(1.0, m as f64 * th);
            u += (c * e).re;
            u_r += (cd * e).re / dr;
            u_th += (c * e * Complex64::new(0.0, m as f64)).re;
        }
        let (cos, sin) = (th.cos(), th.sin());
        let grad = Point::new(u_r * cos - u_th / r * sin, u_r * sin + u_th / r * cos);
        (u, grad)
    }

    pub fn value_at(&self, x: Point) -> f64 {
        self.value_and_gradient(x).0
    }

    /// Weighted integral `Σ e^{V} u vol` (the conserved mass).
    pub fn mass(&self) -> f64 {
        let a = radial_potential(&self.model).unwrap_or(0.0);
        cell_weights(&self.grid, a).iter().zip(&self.values).map(|(w, u)| w * u).sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// CSV dump: polar grids as `r,theta,value`, others as `x,y,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let polar = matches!(self.grid, Grid::Polar { .. });
        if polar {
            w.write_record(["r", "theta", "value"])?;
        } else {
            w.write_record(["x", "y", "value"])?;
        }
        for (p, v) in self.grid.centres().iter().zip(&self.values) {
            let (a, b) = if polar { (p.norm(), p.y.atan2(p.x).rem_euclid(TAU)) } else { (p.x, p.y) };
            w.write_record(&[format!("{a}"), format!("{b}"), format!("{v}")])?;
        }
        w.flush()
    }
}

/// `P_t f` on the model's grid.
pub fn solve_neumann_heat(model: &ManifoldModel, f: &TestFunction, t: f64, res: &GridResolution) -> Result<GridField> {
    solve_initial(model, |x| f.value(x), &[t], res).map(|mut v| v.remove(0))
}

/// `P_s f` for every `s` in `times` (non-decreasing).
pub fn solve_neumann_heat_snapshots(
    model: &ManifoldModel,
    f: &TestFunction,
    times: &[f64],
    res: &GridResolution,
) -> Result<Vec<GridField>> {
    solve_initial(model, |x| f.value(x), times, res)
}

/// Solves from arbitrary initial data given pointwise.
pub fn solve_initial(
    model: &ManifoldModel,
    init: impl Fn(Point) -> f64,
    times: &[f64],
    res: &GridResolution,
) -> Result<Vec<GridField>> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let grid = grid_for(model, res, t_max)?;
    let initial = grid.centres().into_iter().map(init).collect();
    evolve(model, grid, initial, times, res)
}

/// `∇u(x)` by interpolation.
pub fn grid_gradient(field: &GridField, x: Point) -> Point {
    field.value_and_gradient(x).1
}

/// Pointwise combination of several solved fields at `x`.
pub fn functional_on_grid(fields: &[&GridField], x: Point, combine: impl Fn(&[f64]) -> f64) -> f64 {
    let vals: Vec<f64> = fields.iter().map(|f| f.value_at(x)).collect();
    combine(&vals)
}

/// Solved fields `P_t f`, `P_t f²`, `P_t (f² log f²)`.
pub struct MomentFields {
    pub func: TestFunction,
    pub f: GridField,
    pub f2: GridField,
    pub f2_log_f2: GridField,
}

impl MomentFields {
    pub fn solve(model: &ManifoldModel, f: &TestFunction, t: f64, res: &GridResolution) -> Result<Self> {
        let one = |g: &dyn Fn(Point) -> f64| solve_initial(model, g, &[t], res).map(|mut v| v.remove(0));
        Ok(Self {
            func: *f,
            f: one(&|x| f.value(x))?,
            f2: one(&|x| f.value(x).powi(2))?,
            f2_log_f2: one(&|x| xlogx(f.value(x).powi(2)))?,
        })
    }

    /// `P_t(f² log f²) − P_t f² log P_t f²`
    pub fn entropy_sq(&self, x: Point) -> f64 {
        if self.f.time == 0.0 {
            return 0.0;
        }
        functional_on_grid(&[&self.f2_log_f2, &self.f2], x, |v| v[0] - xlogx(v[1]))
    }

    /// `P_t f² − (P_t f)²`
    pub fn variance(&self, x: Point) -> f64 {
        if self.f.time == 0.0 {
            return 0.0;
        }
        functional_on_grid(&[&self.f2, &self.f], x, |v| v[0] - v[1] * v[1])
    }
}

/// `∫ g dμ / μ(M)` for the invariant measure `μ = e^V dx`, by the
/// midpoint rule on the model's grid.
pub fn invariant_average(model: &ManifoldModel, res: &GridResolution, g: impl Fn(Point) -> f64) -> Result<f64> {
    let a = radial_potential(model)?;
    let grid = grid_for(model, res, 1.0)?;
    let w = cell_weights(&grid, a);
    let total: f64 = w.iter().sum();
    Ok(grid.centres().into_iter().zip(&w).map(|(x, w)| w * g(x)).sum::<f64>() / total)
}

/// Whether the PDE oracle can handle `model`.
pub fn supports(model: &ManifoldModel) -> bool {
    radial_potential(model).is_ok()
}
