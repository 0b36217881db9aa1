use thiserror::Error;

use crate::point::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {point} is not on the boundary (signed distance {distance:e})")]
    NotOnBoundary { point: Point, distance: f64 },

    #[error("point {0} lies in a rectangle corner neighbourhood")]
    RectangleCorner(Point),

    #[error("vector {vector} is not tangent to the boundary at {point}")]
    NotTangent { point: Point, vector: Point },

    #[error("unsupported drift: {0}")]
    UnsupportedDrift(String),

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("projection failure on path {path_index} at step {step}: jump of {jump:e} (dt too large)")]
    ProjectionFailure { path_index: u64, step: usize, jump: f64 },

    #[error("path weight {weight:e} exceeds overflow guard on path {path_index}")]
    OverflowGuard { path_index: u64, weight: f64 },

    #[error("grid too coarse: mass drift per unit time {drift:e}")]
    ResolutionTooCoarse { drift: f64 },

    #[error("limit extrapolation too noisy: residual {residual:e} vs extrapolated {value:e}")]
    NoisyLimit { residual: f64, value: f64 },

    #[error("gradient norm {0:e} too small at evaluation point")]
    DegenerateGradient(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
