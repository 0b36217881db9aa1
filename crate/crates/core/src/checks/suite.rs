//! Batches of statement checks sharing path batches and PDE solves.

use serde::Serialize;

use crate::checks::statements::{CheckContext, CheckOptions, LhsOracle};
use crate::checks::{InequalityReport, StatementId, Verdict};
use crate::error::Result;
use crate::geometry::{ManifoldModel, Shape};
use crate::pde::{self, GridResolution};
use crate::point::Point;
use crate::sde::SimParams;
use crate::semigroup::TestFunction;

/// One interior point and one boundary point per shape.
pub fn default_points(model: &ManifoldModel) -> Vec<Point> {
    match model.shape {
        Shape::HalfLine => vec![Point::on_line(0.5), Point::ZERO],
        Shape::Interval { a, b } => vec![Point::on_line(a + 0.3 * (b - a)), Point::on_line(a)],
        Shape::Disk { radius } => vec![Point::new(0.2 * radius, 0.1 * radius), Point::new(0.0, radius)],
        Shape::Annulus { inner, outer } => vec![Point::new(0.5 * (inner + outer), 0.0), Point::new(inner, 0.0)],
        Shape::Rectangle { width, height } => vec![Point::new(0.1 * width, 0.0), Point::new(0.5 * width, 0.1 * height)],
    }
}

/// A statement/function pair that does not apply (S6 needs `f >= 0`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub statement: StatementId,
    pub f: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SuiteResult {
    pub reports: Vec<InequalityReport>,
    pub skipped: Vec<Skipped>,
}

impl SuiteResult {
    pub fn count(&self, v: Verdict) -> usize {
        self.reports.iter().filter(|r| r.verdict == v).count()
    }

    pub fn extend(&mut self, other: SuiteResult) {
        self.reports.extend(other.reports);
        for s in other.skipped {
            if !self.skipped.contains(&s) {
                self.skipped.push(s);
            }
        }
    }
}

/// Runs every constant-curvature statement in `stmts` for every `f`,
/// point and time. Reports are ordered by time, point, function, then
/// statement. One path batch per `(x, t)`; one pair of PDE solves per
/// `(f, t)` when the model supports it.
#[allow(clippy::too_many_arguments)]
pub fn run_statements(
    model: &ManifoldModel,
    fs: &[TestFunction],
    points: &[Point],
    times: &[f64],
    stmts: &[StatementId],
    params: &SimParams,
    opts: &CheckOptions,
) -> Result<SuiteResult> {
    let mut out = SuiteResult::default();
    let applicable = |stmt: StatementId, f: &TestFunction| stmt != StatementId::S6 || f.is_nonnegative_on(model);
    for &stmt in stmts {
        for f in fs {
            if !applicable(stmt, f) {
                out.skipped.push(Skipped {
                    statement: stmt,
                    f: f.to_string(),
                    reason: format!("{f} changes sign on {model}"),
                });
            }
        }
    }
    let use_pde = !opts.monte_carlo_lhs && pde::supports(model);
    let res = opts.grid.unwrap_or_else(|| GridResolution::for_model(model));
    for &t in times {
        // lhs[f][point]
        let lhs: Vec<Vec<LhsOracle>> = fs
            .iter()
            .map(|f| {
                if use_pde {
                    LhsOracle::pde(model, f, points, t, &res)
                } else {
                    points.iter().map(|&x| LhsOracle::monte_carlo(model, f, x, t, params)).collect()
                }
            })
            .collect::<Result<_>>()?;
        for (j, &x) in points.iter().enumerate() {
            let ctx = CheckContext::new(model, x, t, params, opts)?;
            for (i, f) in fs.iter().enumerate() {
                for &stmt in stmts {
                    if applicable(stmt, f) {
                        out.reports.push(ctx.check(stmt, f, &lhs[i][j])?);
                    }
                }
            }
        }
    }
    Ok(out)
}
