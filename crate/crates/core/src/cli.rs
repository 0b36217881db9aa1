//! Config-driven command line front end.
//!
//! Exit codes: 0 when no row FAILs, 1 when a row FAILs or a numerical
//! error aborts a job, 2 for configuration and usage errors.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checks::ii::{estimate_ii, IIEstimate};
use crate::checks::isoperimetric::{
    check_levy_gromov, levy_gromov_limit, submartingale_diagnostic, SubmartingaleReport,
};
use crate::checks::statements::{check_variable_bounds, CheckOptions};
use crate::checks::suite::{default_points, run_statements, Skipped, SuiteResult};
use crate::checks::{InequalityReport, StatementId, Verdict};
use crate::error::Error;
use crate::geometry::{ManifoldModel, ScalarField};
use crate::pde::GridResolution;
use crate::point::Point;
use crate::sde::{simulate_reflected_path, time_grid, SimParams};
use crate::semigroup::{summarize, SummaryRequest, TestFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "neumann-lab", version, about = "Reflected diffusion and Neumann semigroup inequality checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every job in the config.
    Run(Common),
    /// Run the statement and variable-bound jobs.
    Check(Common),
    /// Simulate paths and write them as CSV.
    Simulate(Common),
    /// Run the second fundamental form jobs.
    #[command(name = "estimate-ii")]
    EstimateIi(Common),
    /// Run the Lévy–Gromov jobs.
    Isoperimetric(Common),
    /// Quick built-in oracle checks.
    Selftest,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `sim.n_paths`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Overrides `sim.dt`.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Write every step of every simulated path instead of endpoints.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
}

fn default_dt() -> f64 {
    1e-4
}

fn default_paths() -> usize {
    10_000
}

fn default_seed() -> u64 {
    0x5eed
}

fn default_p() -> f64 {
    2.0
}

impl Default for SimSection {
    fn default() -> Self {
        Self { dt: default_dt(), n_paths: default_paths() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Job {
    /// Constant-curvature statements S2–S7. Functions default to the
    /// registry, points to one interior and one boundary point.
    Statements {
        statements: Vec<StatementId>,
        #[serde(default)]
        functions: Option<Vec<TestFunction>>,
        #[serde(default)]
        points: Option<Vec<Point>>,
        times: Vec<f64>,
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        sigma: Option<f64>,
    },
    /// G2/G3 with curvature fields (default: the model's optimal fields).
    VariableBounds {
        statements: Vec<StatementId>,
        #[serde(default)]
        functions: Option<Vec<TestFunction>>,
        #[serde(default)]
        points: Option<Vec<Point>>,
        times: Vec<f64>,
        #[serde(default)]
        k1: Option<ScalarField>,
        #[serde(default)]
        k2: Option<ScalarField>,
    },
    /// Lévy–Gromov semigroup bound, optionally with the stationary limit
    /// and the submartingale diagnostic on an `s` grid of the given size.
    LevyGromov {
        functions: Vec<TestFunction>,
        points: Vec<Point>,
        times: Vec<f64>,
        #[serde(default)]
        stationary: bool,
        #[serde(default)]
        submartingale: Option<usize>,
    },
    Ii {
        point: Point,
        direction: Point,
        #[serde(default = "default_p")]
        p: f64,
        times: Vec<f64>,
    },
    Simulate {
        x0: Point,
        t: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ManifoldModel,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default)]
    pub grid: Option<GridResolution>,
    #[serde(default)]
    pub jobs: Vec<Job>,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidModel(_)
            | Error::InvalidParameter(_)
            | Error::NotOnBoundary { .. }
            | Error::RectangleCorner(_)
            | Error::NotTangent { .. }
            | Error::UnsupportedDrift(_)
            | Error::UnsupportedShape(_) => EXIT_CONFIG,
            _ => EXIT_FAIL,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_FAIL, message: format!("i/o error: {e}") }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self { code: EXIT_FAIL, message: format!("csv error: {e}") }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses a config, reporting the offending field path on failure.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::config(format!(
            "config error at `{path}` (line {}, column {}): {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn is_gradient_statement(s: StatementId) -> bool {
    !matches!(s, StatementId::S4 | StatementId::S5 | StatementId::LG43 | StatementId::LG41)
}

fn validate(cfg: &ExperimentConfig) -> CliResult<()> {
    let m = &cfg.model;
    let check_points = |what: &str, pts: &[Point]| -> CliResult<()> {
        for p in pts {
            if !m.contains(m.restrict(*p)) {
                return Err(CliError::config(format!("{what}: point {p} is outside {m}")));
            }
        }
        Ok(())
    };
    for (i, job) in cfg.jobs.iter().enumerate() {
        let at = format!("jobs[{i}]");
        match job {
            Job::Statements { statements, points, times, .. }
            | Job::VariableBounds { statements, points, times, .. } => {
                let variable = matches!(job, Job::VariableBounds { .. });
                for &s in statements {
                    let ok = if variable {
                        matches!(s, StatementId::G2 | StatementId::G3)
                    } else {
                        StatementId::THEOREM.contains(&s)
                    };
                    if !ok {
                        return Err(CliError::config(format!("{at}.statements: {s} does not belong in this job kind")));
                    }
                    if is_gradient_statement(s) && times.iter().any(|&t| !(t > 0.0)) {
                        return Err(CliError::config(format!("{at}.times: {s} needs t > 0")));
                    }
                }
                if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                    return Err(CliError::config(format!("{at}.times: times must be finite and >= 0")));
                }
                if let Some(p) = points {
                    check_points(&format!("{at}.points"), p)?;
                }
            }
            Job::LevyGromov { points, times, submartingale, .. } => {
                check_points(&format!("{at}.points"), points)?;
                if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                    return Err(CliError::config(format!("{at}.times: times must be finite and >= 0")));
                }
                if submartingale.is_some_and(|n| n < 2) {
                    return Err(CliError::config(format!("{at}.submartingale: need at least two s values")));
                }
            }
            Job::Ii { times, p, .. } => {
                if times.len() < 4 {
                    return Err(CliError::config(format!(
                        "{at}.times: the limit extrapolation needs at least 4 times, got {}",
                        times.len()
                    )));
                }
                if times.iter().any(|&t| !(t > 0.0)) {
                    return Err(CliError::config(format!("{at}.times: times must be positive")));
                }
                if !(*p >= 1.0) {
                    return Err(CliError::config(format!("{at}.p: must be >= 1")));
                }
            }
            Job::Simulate { x0, t } => {
                check_points(&format!("{at}.x0"), std::slice::from_ref(x0))?;
                if !(*t >= 0.0 && t.is_finite()) {
                    return Err(CliError::config(format!("{at}.t: must be finite and >= 0")));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Selection {
    All,
    Check,
    Simulate,
    Ii,
    Isoperimetric,
}

impl Selection {
    fn wants(self, job: &Job) -> bool {
        match self {
            Selection::All => true,
            Selection::Check => matches!(job, Job::Statements { .. } | Job::VariableBounds { .. }),
            Selection::Simulate => matches!(job, Job::Simulate { .. }),
            Selection::Ii => matches!(job, Job::Ii { .. }),
            Selection::Isoperimetric => matches!(job, Job::LevyGromov { .. }),
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    statement: String,
    model: &'a str,
    f: &'a str,
    x: String,
    t: f64,
    lhs: f64,
    rhs: f64,
    se: f64,
    margin: f64,
    verdict: String,
}

fn format_point(model: &ManifoldModel, p: Point) -> String {
    if model.dimension() == 1 {
        format!("{}", p.x)
    } else {
        format!("{};{}", p.x, p.y)
    }
}

#[derive(Serialize)]
struct Counts {
    pass: usize,
    inconclusive: usize,
    fail: usize,
}

#[derive(Serialize)]
struct StationaryRow {
    f: String,
    lhs: f64,
    rhs: f64,
    verdict: Verdict,
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a ExperimentConfig,
    counts: Counts,
    reports: &'a [InequalityReport],
    skipped: &'a [Skipped],
    stationary: &'a [StationaryRow],
    submartingale: &'a [SubmartingaleReport],
    ii: &'a [IIEstimate],
}

/// Outcome of a run, also written to disk.
pub struct RunOutcome {
    pub reports: Vec<InequalityReport>,
    pub ii: Vec<IIEstimate>,
    pub exit_code: i32,
}

/// Headers are written explicitly so that empty tables still carry them.
fn csv_writer(path: &Path) -> CliResult<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(File::create(path)?)))
}

fn simulate_job(
    cfg: &ExperimentConfig,
    params: &SimParams,
    x0: Point,
    t: f64,
    dump: bool,
    out: &Path,
) -> CliResult<usize> {
    let m = &cfg.model;
    let mut w = csv_writer(&out.join("paths.csv"))?;
    let mut rows = 0;
    if dump {
        w.write_record(["path", "step", "time", "x", "y", "local_time"])?;
        for i in 0..params.n_paths as u64 {
            let path = simulate_reflected_path(m, x0, t, params, i)?;
            for (k, ((time, p), l)) in path.times.iter().zip(&path.positions).zip(&path.local_time).enumerate() {
                w.serialize((i, k, time, p.x, p.y, l))?;
                rows += 1;
            }
        }
    } else {
        w.write_record(["path", "x", "y", "local_time"])?;
        let ends = summarize(m, x0, t, params, &SummaryRequest::default())?;
        for (i, s) in ends.iter().enumerate() {
            w.serialize((i, s.x_t.x, s.x_t.y, s.l_t))?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

/// Executes the selected jobs of `cfg` and writes `report.csv`,
/// `report.json` (and `paths.csv` / `ii.csv` when relevant) into `out`.
fn execute(
    cfg: &ExperimentConfig,
    sel: Selection,
    params: &SimParams,
    dump: bool,
    out: &Path,
) -> CliResult<RunOutcome> {
    params.validate()?;
    fs::create_dir_all(out)?;
    let m = &cfg.model;
    let mut suite = SuiteResult::default();
    let mut stationary = Vec::new();
    let mut martingales = Vec::new();
    let mut ii = Vec::new();
    let base_opts = CheckOptions { grid: cfg.grid, ..Default::default() };
    for job in cfg.jobs.iter().filter(|j| sel.wants(j)) {
        match job {
            Job::Statements { statements, functions, points, times, k, sigma } => {
                let fs = functions.clone().unwrap_or_else(|| TestFunction::registry(m));
                let pts = points.clone().unwrap_or_else(|| default_points(m));
                let opts = CheckOptions { k: *k, sigma: *sigma, ..base_opts.clone() };
                suite.extend(run_statements(m, &fs, &pts, times, statements, params, &opts)?);
            }
            Job::VariableBounds { statements, functions, points, times, k1, k2 } => {
                let fs = functions.clone().unwrap_or_else(|| TestFunction::registry(m));
                let pts = points.clone().unwrap_or_else(|| default_points(m));
                let b = m.curvature_bounds()?;
                let k1 = k1.or(b.k1).ok_or_else(|| CliError::config("no K1 field for this model"))?;
                let k2 = k2.or(b.k2).ok_or_else(|| CliError::config("no K2 field for this model"))?;
                for &t in times {
                    for &x in &pts {
                        for f in &fs {
                            for &s in statements {
                                suite.reports.push(check_variable_bounds(s, m, f, x, t, k1, k2, params, &base_opts)?);
                            }
                        }
                    }
                }
            }
            Job::LevyGromov { functions, points, times, stationary: want_limit, submartingale } => {
                for f in functions {
                    for &t in times {
                        for &x in points {
                            suite.reports.push(check_levy_gromov(m, f, x, t, params, &base_opts)?);
                            if let Some(n) = submartingale {
                                if t > 0.0 {
                                    martingales.push(submartingale_diagnostic(m, f, x, t, *n, params)?);
                                }
                            }
                        }
                    }
                    if *want_limit {
                        let (lhs, rhs) = levy_gromov_limit(m, f)?;
                        let verdict = crate::checks::verdict(lhs, rhs, 0.0, 0.0);
                        stationary.push(StationaryRow { f: f.to_string(), lhs, rhs, verdict });
                    }
                }
            }
            Job::Ii { point, direction, p, times } => {
                ii.push(estimate_ii(m, *point, *direction, *p, times, params)?);
            }
            Job::Simulate { x0, t } => {
                let rows = simulate_job(cfg, params, *x0, *t, dump, out)?;
                let (n, _) = time_grid(*t, params.dt);
                eprintln!("simulate: {rows} rows ({} paths, {n} steps)", params.n_paths);
            }
        }
    }

    let reports = suite.reports;
    let mut w = csv_writer(&out.join("report.csv"))?;
    w.write_record(["statement", "model", "f", "x", "t", "lhs", "rhs", "se", "margin", "verdict"])?;
    for r in &reports {
        w.serialize(CsvRow {
            statement: r.statement.to_string(),
            model: &r.model,
            f: &r.f,
            x: format_point(m, r.x),
            t: r.t,
            lhs: r.lhs,
            rhs: r.rhs,
            se: r.se,
            margin: r.margin(),
            verdict: r.verdict.to_string(),
        })?;
    }
    for s in &stationary {
        w.serialize(CsvRow {
            statement: StatementId::LG41.to_string(),
            model: &m.to_string(),
            f: &s.f,
            x: String::new(),
            t: f64::INFINITY,
            lhs: s.lhs,
            rhs: s.rhs,
            se: 0.0,
            margin: 0.0,
            verdict: s.verdict.to_string(),
        })?;
    }
    w.flush()?;
    if !ii.is_empty() {
        let mut w = csv_writer(&out.join("ii.csv"))?;
        w.write_record(["x", "v", "p", "t", "raw", "raw_se", "ii", "exact"])?;
        for e in &ii {
            for ((t, raw), se) in e.times.iter().zip(&e.raw).zip(&e.raw_se) {
                w.serialize((format_point(m, e.x), format_point(m, e.v), e.p, t, raw, se, e.ii, e.exact))?;
            }
        }
        w.flush()?;
    }
    let count = |v: Verdict| {
        reports.iter().filter(|r| r.verdict == v).count() + stationary.iter().filter(|s| s.verdict == v).count()
    };
    let counts =
        Counts { pass: count(Verdict::Pass), inconclusive: count(Verdict::Inconclusive), fail: count(Verdict::Fail) };
    let any_fail = counts.fail > 0 || martingales.iter().any(|s| !s.monotone);
    let meta = Metadata {
        config: cfg,
        counts,
        reports: &reports,
        skipped: &suite.skipped,
        stationary: &stationary,
        submartingale: &martingales,
        ii: &ii,
    };
    let mut jf = BufWriter::new(File::create(out.join("report.json"))?);
    serde_json::to_writer_pretty(&mut jf, &meta).map_err(|e| CliError { code: EXIT_FAIL, message: e.to_string() })?;
    jf.write_all(b"\n")?;
    jf.flush()?;
    Ok(RunOutcome { reports, ii, exit_code: if any_fail { EXIT_FAIL } else { EXIT_OK } })
}

fn run_common(c: &Common, sel: Selection) -> CliResult<RunOutcome> {
    let text = fs::read_to_string(&c.config)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", c.config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = c.seed {
        cfg.base_seed = s;
    }
    if let Some(n) = c.paths {
        cfg.sim.n_paths = n;
    }
    if let Some(dt) = c.dt {
        cfg.sim.dt = dt;
    }
    let params = SimParams::new(cfg.sim.dt, cfg.sim.n_paths, cfg.base_seed);
    params.validate().map_err(|e| CliError::config(e.to_string()))?;
    execute(&cfg, sel, &params, c.dump, &c.out)
}

fn summarize_outcome(o: &RunOutcome) {
    let n = |v: Verdict| o.reports.iter().filter(|r| r.verdict == v).count();
    println!(
        "{} rows: {} PASS, {} INCONCLUSIVE, {} FAIL",
        o.reports.len(),
        n(Verdict::Pass),
        n(Verdict::Inconclusive),
        n(Verdict::Fail)
    );
    if n(Verdict::Inconclusive) > 0 {
        eprintln!("warning: {} INCONCLUSIVE rows", n(Verdict::Inconclusive));
    }
    for e in &o.ii {
        println!("II at {} along {}: {:.4} (closed form {:.4})", e.x, e.v, e.ii, e.exact);
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(c) => run_common(c, Selection::All),
        Command::Check(c) => run_common(c, Selection::Check),
        Command::Simulate(c) => run_common(c, Selection::Simulate),
        Command::EstimateIi(c) => run_common(c, Selection::Ii),
        Command::Isoperimetric(c) => run_common(c, Selection::Isoperimetric),
        Command::Selftest => return crate::selftest::run(),
    };
    match result {
        Ok(o) => {
            summarize_outcome(&o);
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
