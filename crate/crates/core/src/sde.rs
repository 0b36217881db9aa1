//! Reflected diffusion `dX = √2 dB + Z(X) dt + N(X) dl` by the projection
//! scheme, with the boundary local time accumulated from projection
//! distances.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DriftSpec, ManifoldModel, Shape};
use crate::point::Point;

/// Tolerance for "on the boundary" and for membership after projection.
pub const EPS_PROJ: f64 = 1e-9;

/// Paths per work unit. Results are reduced in path order, so the chunk
/// size affects only scheduling.
pub const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Projection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub n_paths: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { dt: 1e-4, n_paths: 10_000, base_seed: 0x5eed, scheme: Scheme::Projection }
    }
}

impl SimParams {
    pub fn new(dt: f64, n_paths: usize, base_seed: u64) -> Self {
        Self { dt, n_paths, base_seed, scheme: Scheme::Projection }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniform grid on `[0, t]` with a step no larger than `dt`.
pub fn time_grid(t: f64, dt: f64) -> (usize, f64) {
    if t <= 0.0 {
        return (0, dt);
    }
    let n = (t / dt - 1e-9).ceil().max(1.0) as usize;
    (n, t / n as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-path seed derived from `(base_seed, path_index)`.
pub fn path_seed(base_seed: u64, path_index: u64) -> u128 {
    let hi = splitmix64(base_seed ^ splitmix64(path_index));
    let lo = splitmix64(hi ^ path_index.rotate_left(32) ^ 0xa076_1d64_78bd_642f);
    ((hi as u128) << 64) | lo as u128
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
    pub local_time: Vec<f64>,
    pub path_index: u64,
    pub seed: u128,
}

impl PathSample {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn n_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn final_position(&self) -> Point {
        *self.positions.last().expect("path has at least one point")
    }

    pub fn final_local_time(&self) -> f64 {
        *self.local_time.last().expect("path has at least one point")
    }

    fn step_size(&self) -> f64 {
        if self.n_steps() == 0 {
            0.0
        } else {
            self.horizon() / self.n_steps() as f64
        }
    }

    /// `∫₀ᵗ exp(2σ(l_t − l_{t−s}) + 2Ks) ds` by the trapezoid rule, reading
    /// `l_{t−s}` off the stored path.
    pub fn integral_a(&self, sigma: f64, k: f64) -> f64 {
        let n = self.n_steps();
        let lt = self.final_local_time();
        trapezoid(n, self.step_size(), |j| {
            let s = j as f64 * self.step_size();
            (2.0 * sigma * (lt - self.local_time[n - j]) + 2.0 * k * s).exp()
        })
    }

    /// `∫₀ᵗ exp(2σ l_s − 2Ks) ds` by the trapezoid rule.
    pub fn integral_b(&self, sigma: f64, k: f64) -> f64 {
        let h = self.step_size();
        trapezoid(self.n_steps(), h, |j| (2.0 * sigma * self.local_time[j] - 2.0 * k * j as f64 * h).exp())
    }

    /// `∫₀ᵗ K₁(X_s) ds + ∫₀ᵗ K₂(X_s) dl_s`; the `ds` part by the trapezoid
    /// rule, the `dl` part as `Σ K₂(X_{i+1}) Δl_i`.
    pub fn integral_var(
        &self,
        model: &ManifoldModel,
        k1: &crate::geometry::ScalarField,
        k2: &crate::geometry::ScalarField,
    ) -> f64 {
        let h = self.step_size();
        let ds = trapezoid(self.n_steps(), h, |j| k1.eval(model, self.positions[j]));
        let dl: f64 = (0..self.n_steps())
            .map(|i| {
                let inc = self.local_time[i + 1] - self.local_time[i];
                if inc > 0.0 {
                    k2.eval(model, self.positions[i + 1]) * inc
                } else {
                    0.0
                }
            })
            .sum();
        ds + dl
    }
}

fn trapezoid(n: usize, h: f64, g: impl Fn(usize) -> f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.5 * (g(0) + g(n));
    for j in 1..n {
        acc += g(j);
    }
    acc * h
}

/// Shape parameters copied out of the model so the stepping loop
/// branches on a small enum instead of re-dispatching through geometry.
#[derive(Clone, Copy, Debug)]
enum FastShape {
    HalfLine,
    Interval { a: f64, b: f64 },
    Disk { r2: f64, r: f64 },
    Annulus { inner: f64, outer: f64 },
    Other,
}

#[derive(Clone, Copy, Debug)]
enum FastDrift {
    Zero,
    Linear(f64),
    General,
}

/// One path of the projection scheme, advanced step by step. Estimators
/// consume it directly so that nothing beyond the current state is stored.
pub struct Stepper<'a> {
    model: &'a ManifoldModel,
    rng: Pcg64Mcg,
    dt: f64,
    noise: f64,
    pub x: Point,
    pub l: f64,
    pub step: usize,
    path_index: u64,
    two_d: bool,
    shape: FastShape,
    drift: FastDrift,
    medial_guard: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a ManifoldModel, x0: Point, dt: f64, base_seed: u64, path_index: u64) -> Self {
        let medial_guard = match model.shape {
            Shape::Annulus { inner, .. } => 0.5 * inner,
            _ => f64::INFINITY,
        };
        let shape = match model.shape {
            Shape::HalfLine => FastShape::HalfLine,
            Shape::Interval { a, b } => FastShape::Interval { a, b },
            Shape::Disk { radius } => FastShape::Disk { r2: radius * radius, r: radius },
            Shape::Annulus { inner, outer } => FastShape::Annulus { inner, outer },
            Shape::Rectangle { .. } => FastShape::Other,
        };
        let drift = match model.drift {
            DriftSpec::Zero => FastDrift::Zero,
            DriftSpec::Linear { a } => FastDrift::Linear(a),
            DriftSpec::GradientPotential { .. } => FastDrift::General,
        };
        Self {
            model,
            rng: Pcg64Mcg::new(path_seed(base_seed, path_index)),
            dt,
            noise: (2.0 * dt).sqrt(),
            x: model.restrict(x0),
            l: 0.0,
            step: 0,
            path_index,
            two_d: model.dimension() == 2,
            shape,
            drift,
            medial_guard,
        }
    }

    #[inline(always)]
    fn drift_at(&self, x: Point) -> Point {
        match self.drift {
            FastDrift::Zero => Point::ZERO,
            FastDrift::Linear(a) => a * x,
            FastDrift::General => self.model.drift(x),
        }
    }

    /// Advances one step and returns the local-time increment.
    #[inline(always)]
    pub fn advance(&mut self) -> Result<f64> {
        self.step += 1;
        let z = self.drift_at(self.x);
        let xi_x: f64 = self.rng.sample(StandardNormal);
        if !self.two_d {
            let y = self.x.x + self.noise * xi_x + z.x * self.dt;
            let next = match self.shape {
                FastShape::HalfLine => y.max(0.0),
                FastShape::Interval { a, b } => y.clamp(a, b),
                _ => self.model.project(Point::on_line(y)).map_or(y, |p| p.x),
            };
            let dl = (y - next).abs();
            self.x.x = next;
            self.l += dl;
            return Ok(dl);
        }
        let xi_y: f64 = self.rng.sample(StandardNormal);
        let y = Point::new(self.x.x + self.noise * xi_x + z.x * self.dt, self.x.y + self.noise * xi_y + z.y * self.dt);
        let next = match self.shape {
            FastShape::Disk { r2, r } => {
                let q = y.norm_sq();
                if q <= r2 {
                    self.x = y;
                    return Ok(0.0);
                }
                (r / q.sqrt()) * y
            }
            FastShape::Annulus { inner, outer } => {
                let q = y.norm_sq();
                if q >= inner * inner && q <= outer * outer {
                    self.x = y;
                    return Ok(0.0);
                }
                if q == 0.0 {
                    return Err(self.failure(0.0));
                }
                let target = if q > outer * outer { outer } else { inner };
                (target / q.sqrt()) * y
            }
            _ => {
                if self.model.signed_distance(y) >= 0.0 {
                    self.x = y;
                    return Ok(0.0);
                }
                match self.model.project(y) {
                    Some(p) => p,
                    None => return Err(self.failure(y.norm())),
                }
            }
        };
        let dl = (y - next).norm();
        if dl > self.medial_guard {
            return Err(self.failure(dl));
        }
        self.x = next;
        self.l += dl;
        Ok(dl)
    }

    /// Advances `n` steps. One-dimensional shapes with zero or linear
    /// drift run a loop over local copies of the state.
    pub fn advance_n(&mut self, n: usize) -> Result<()> {
        let bounds = match self.shape {
            FastShape::HalfLine => Some((0.0, f64::INFINITY)),
            FastShape::Interval { a, b } => Some((a, b)),
            _ => None,
        };
        let slope = match self.drift {
            FastDrift::Zero => Some(0.0),
            FastDrift::Linear(a) => Some(a),
            FastDrift::General => None,
        };
        if let (false, Some((lo, hi)), Some(a)) = (self.two_d, bounds, slope) {
            let mut rng = self.rng.clone();
            let (mut x, mut l) = (self.x.x, self.l);
            let (noise, growth) = (self.noise, 1.0 + a * self.dt);
            for _ in 0..n {
                let xi: f64 = rng.sample(StandardNormal);
                let y = growth * x + noise * xi;
                let next = y.clamp(lo, hi);
                l += (y - next).abs();
                x = next;
            }
            self.rng = rng;
            self.x.x = x;
            self.l = l;
            self.step += n;
            return Ok(());
        }
        for _ in 0..n {
            self.advance()?;
        }
        Ok(())
    }

    #[cold]
    fn failure(&self, jump: f64) -> Error {
        Error::ProjectionFailure { path_index: self.path_index, step: self.step, jump }
    }
}

fn check_start(model: &ManifoldModel, x0: Point, t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be non-negative, got {t}")));
    }
    if !x0.is_finite() || model.signed_distance(model.restrict(x0)) < -EPS_PROJ {
        return Err(Error::InvalidParameter(format!("start point {x0} is outside {model}")));
    }
    Ok(())
}

pub fn simulate_reflected_path(
    model: &ManifoldModel,
    x0: Point,
    t: f64,
    params: &SimParams,
    path_index: u64,
) -> Result<PathSample> {
    params.validate()?;
    check_start(model, x0, t)?;
    let (n, dt) = time_grid(t, params.dt);
    let mut st = Stepper::new(model, x0, dt, params.base_seed, path_index);
    let mut times = Vec::with_capacity(n + 1);
    let mut positions = Vec::with_capacity(n + 1);
    let mut local_time = Vec::with_capacity(n + 1);
    times.push(0.0);
    positions.push(st.x);
    local_time.push(0.0);
    for i in 1..=n {
        st.advance()?;
        times.push(i as f64 * dt);
        positions.push(st.x);
        local_time.push(st.l);
    }
    Ok(PathSample { times, positions, local_time, path_index, seed: path_seed(params.base_seed, path_index) })
}

pub fn simulate_batch(model: &ManifoldModel, x0: Point, t: f64, params: &SimParams) -> Result<Vec<PathSample>> {
    map_paths(params.n_paths, |i| simulate_reflected_path(model, x0, t, params, i))
}

/// Runs `f(path_index)` for every path in parallel and returns the
/// results in path order. The first error (lowest index) wins.
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    let chunk = |c: usize| -> Result<Vec<T>> {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n_paths);
        (lo..hi).map(|i| f(i as u64)).collect()
    };
    let chunks: Vec<Result<Vec<T>>> = match pool() {
        Some(p) => p.install(|| (0..n_chunks).into_par_iter().map(chunk).collect()),
        None => (0..n_chunks).map(chunk).collect(),
    };
    let mut out = Vec::with_capacity(n_paths);
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

/// Worker pool sized by `NEUMANN_THREADS` (default: all cores). `None`
/// where threads cannot be spawned (wasm); work then runs in place.
pub fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("NEUMANN_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
    })
    .as_ref()
}

/// First grid time at which the path is at distance `>= delta` from `x0`.
pub fn exit_time(path: &PathSample, x0: Point, delta: f64) -> Option<f64> {
    path.positions.iter().zip(&path.times).find(|(p, _)| (**p - x0).norm() >= delta).map(|(_, &t)| t)
}
