//! Inequality checks with explicit slack accounting.
//!
//! Every report carries the left and right sides, the Monte Carlo
//! standard error of `lhs − rhs`, and a deterministic discretisation
//! margin (time step plus grid). Verdicts:
//!
//! * PASS if `lhs − rhs − margin <= se`,
//! * INCONCLUSIVE if it lies in `(se, 3 se]`,
//! * FAIL if it exceeds the slack budget `3 se + margin`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::point::Point;

pub mod bochner;
pub mod ii;
pub mod isoperimetric;
pub mod statements;
pub mod suite;

pub use bochner::{bochner_gamma2, gamma2_symbolic};
pub use ii::{estimate_ii, IIEstimate};
pub use isoperimetric::{
    check_levy_gromov, gaussian_profile, gaussian_profile_derivatives, levy_gromov_limit, submartingale_diagnostic,
    SubmartingaleReport,
};
pub use statements::{check_statement, check_variable_bounds, CheckContext, CheckOptions, LhsOracle};
pub use suite::{default_points, run_statements, SuiteResult};

/// Asymptotic shortfall of the projection scheme's local time, in units
/// of the step standard deviation `√(2 dt)`: `−ζ(1/2)/√(2π)`.
pub const LOCAL_TIME_SHORTFALL: f64 = 0.582_597_157_939_010_6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatementId {
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    G2,
    G3,
    LG43,
    LG41,
}

impl StatementId {
    pub const THEOREM: [StatementId; 6] =
        [StatementId::S2, StatementId::S3, StatementId::S4, StatementId::S5, StatementId::S6, StatementId::S7];
}

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Where the left-hand side came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Exact,
    Pde,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub statement: StatementId,
    pub model: String,
    pub f: String,
    pub x: Point,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `lhs − rhs`.
    pub se: f64,
    pub dt_margin: f64,
    pub h_margin: f64,
    pub slack_budget: f64,
    pub verdict: Verdict,
    pub lhs_source: Source,
    pub k: f64,
    pub sigma: f64,
}

impl InequalityReport {
    pub fn margin(&self) -> f64 {
        self.dt_margin + self.h_margin
    }

    /// `lhs − rhs − margin` in units of the standard error.
    pub fn excess(&self) -> f64 {
        self.lhs - self.rhs - self.margin()
    }
}

/// Relative floating-point allowance folded into the margin so that exact
/// identities evaluated in different orders do not read as violations.
const ROUNDOFF: f64 = 1e-12;

pub fn verdict(lhs: f64, rhs: f64, se: f64, margin: f64) -> Verdict {
    let excess = lhs - rhs - margin - ROUNDOFF * lhs.abs().max(rhs.abs()).max(1.0);
    if !(excess.is_finite() && se.is_finite()) {
        return Verdict::Inconclusive;
    }
    if excess <= se {
        Verdict::Pass
    } else if excess <= 3.0 * se {
        Verdict::Inconclusive
    } else {
        Verdict::Fail
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn report(
    statement: StatementId,
    model: &crate::geometry::ManifoldModel,
    f: &str,
    x: Point,
    t: f64,
    lhs: f64,
    rhs: f64,
    se: f64,
    dt_margin: f64,
    h_margin: f64,
    lhs_source: Source,
    k: f64,
    sigma: f64,
) -> InequalityReport {
    let margin = dt_margin + h_margin;
    InequalityReport {
        statement,
        model: model.to_string(),
        f: f.to_string(),
        x,
        t,
        lhs,
        rhs,
        se,
        dt_margin,
        h_margin,
        slack_budget: 3.0 * se + margin,
        verdict: verdict(lhs, rhs, se, margin),
        lhs_source,
        k,
        sigma,
    }
}

/// `((e^{2Kt} − 1)/K, 2K/(1 − e^{−2Kt}), 2K²/(1 − e^{−2Kt})²)`, with the
/// limits `(2t, 1/t, 1/(2t²))` when `|K| t < 1e-8`.
pub fn kconst(k: f64, t: f64) -> (f64, f64, f64) {
    if (k * t).abs() < 1e-8 {
        return (2.0 * t, 1.0 / t, 1.0 / (2.0 * t * t));
    }
    let a = (2.0 * k * t).exp_m1() / k;
    let d = -(-2.0 * k * t).exp_m1();
    (a, 2.0 * k / d, 2.0 * k * k / (d * d))
}

/// Relative dt margin for a weight `exp(c · local time)`: the scheme's
/// local time runs short by about `LOCAL_TIME_SHORTFALL · √(2 dt)`.
pub fn local_time_factor(c: f64, dt: f64) -> f64 {
    (c.abs() * LOCAL_TIME_SHORTFALL * (2.0 * dt).sqrt()).exp_m1()
}
