//! Experiment drivers and their tabular reports.
//!
//! Every study is deterministic: re-running it from the metadata of its
//! report (see [`rerun`]) reproduces every numeric cell bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{by_name, Problem};
use crate::solver::{compensated_add, ButcherPath, Integrator, SolverConfig};
use crate::tableau::{min_eig_realpart, stability_function, ButcherTableau};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Convergence,
    LongRun,
    Decay,
    Drift,
    Stability,
    Tableau,
    Trajectory,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Convergence => "convergence",
            ReportKind::LongRun => "long_run",
            ReportKind::Decay => "decay",
            ReportKind::Drift => "drift",
            ReportKind::Stability => "stability",
            ReportKind::Tableau => "tableau",
            ReportKind::Trajectory => "trajectory",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            ReportKind::Convergence,
            ReportKind::LongRun,
            ReportKind::Decay,
            ReportKind::Drift,
            ReportKind::Stability,
            ReportKind::Tableau,
            ReportKind::Trajectory,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

/// Named columns of numbers plus the configuration that produced them.
/// Missing cells (failed solver runs, undefined rates) are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub kind: ReportKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

impl RunReport {
    pub fn new(kind: ReportKind, columns: Vec<String>) -> Self {
        RunReport {
            kind,
            columns,
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the columns");
        self.rows.push(row);
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta(key)?.parse().ok()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// CSV with `#`-prefixed metadata lines, a header row, and one line per
    /// row. Numbers use the shortest representation that parses back to the
    /// same double; missing values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kind={}", self.kind.as_str());
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_cell(v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidConfig(format!("malformed report: {msg}"));
        let mut kind = None;
        let mut metadata = BTreeMap::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta.trim_start().split_once('=').ok_or_else(|| bad(line.into()))?;
                if k == "kind" {
                    kind = Some(ReportKind::parse(v).ok_or_else(|| bad(format!("kind `{v}`")))?);
                } else {
                    metadata.insert(k.to_string(), v.to_string());
                }
            } else if line.is_empty() {
                continue;
            } else if columns.is_none() {
                columns = Some(line.split(',').map(str::to_string).collect());
            } else {
                let row = line
                    .split(',')
                    .map(|c| if c.is_empty() { Ok(f64::NAN) } else { c.parse::<f64>() })
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| bad(e.to_string()))?;
                rows.push(row);
            }
        }
        let columns = columns.ok_or_else(|| bad("no header".into()))?;
        if let Some(r) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(bad(format!("row of width {} under {} columns", r.len(), columns.len())));
        }
        Ok(RunReport {
            kind: kind.ok_or_else(|| bad("no kind".into()))?,
            columns,
            rows,
            metadata,
        })
    }

    /// Single JSON document; missing values become `null`.
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<Option<f64>>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| v.is_finite().then_some(v)).collect())
            .collect();
        let doc = serde_json::json!({
            "kind": self.kind,
            "columns": self.columns,
            "rows": rows,
            "metadata": self.metadata,
        });
        serde_json::to_string_pretty(&doc).expect("report serialises")
    }
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

fn list_to_string<T: std::fmt::Debug>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";")
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|v| {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad list entry `{v}`")))
        })
        .collect()
}

/// Solver settings shared by all studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub path: ButcherPath,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            fp_tol: 1e-14,
            fp_max_iter: 100,
            path: ButcherPath::Fast,
        }
    }
}

impl StudyOptions {
    fn config(&self, s: usize, h: f64) -> SolverConfig {
        SolverConfig::new(s, h)
            .with_fp_tol(self.fp_tol)
            .with_fp_max_iter(self.fp_max_iter)
            .with_path(self.path)
            .with_dense_output(false)
    }

    fn echo(&self, report: &mut RunReport) {
        report.set_meta("fp_tol", format!("{:?}", self.fp_tol));
        report.set_meta("fp_max_iter", self.fp_max_iter);
        report.set_meta(
            "path",
            match self.path {
                ButcherPath::Dense => "dense",
                ButcherPath::Fast => "fast",
            },
        );
    }

    fn from_meta(report: &RunReport) -> Result<Self> {
        let missing = |k: &str| Error::InvalidConfig(format!("report metadata lacks `{k}`"));
        let path = match report.meta("path").ok_or_else(|| missing("path"))? {
            "dense" => ButcherPath::Dense,
            "fast" => ButcherPath::Fast,
            other => return Err(Error::InvalidConfig(format!("unknown path `{other}`"))),
        };
        Ok(StudyOptions {
            fp_tol: report.meta_f64("fp_tol").ok_or_else(|| missing("fp_tol"))?,
            fp_max_iter: report
                .meta("fp_max_iter")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| missing("fp_max_iter"))?,
            path,
        })
    }
}

fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn finish(report: &mut RunReport, started: Instant) {
    report.set_meta("wall_time_s", format!("{:.3}", started.elapsed().as_secs_f64()));
}

/// Integration horizon for order studies: one period when known, else 1.
fn horizon(problem: &Problem) -> f64 {
    problem.period.unwrap_or(1.0)
}

/// Endpoint error after one horizon for every `(s, n)` with `h = horizon / n`,
/// laid out with one row per `n` and an `err`/`rate` column pair per `s`.
/// The rate in row `i` is `log(err_{i-1} / err_i) / log(n_i / n_{i-1})`.
pub fn convergence_study(
    problem: &Problem,
    s_list: &[usize],
    n_list: &[usize],
    opts: &StudyOptions,
) -> Result<RunReport> {
    let started = Instant::now();
    if n_list.windows(2).any(|w| w[1] <= w[0]) || n_list.contains(&0) {
        return Err(Error::InvalidConfig(
            "n_list must be positive and strictly increasing".into(),
        ));
    }
    if s_list.contains(&0) {
        return Err(Error::ZeroStages);
    }
    let t_end = horizon(problem);
    let exact = problem
        .exact(t_end, &problem.y0)
        .ok_or_else(|| Error::MissingReference(problem.name.clone()))?;

    let cells: Vec<(usize, usize)> = s_list
        .iter()
        .flat_map(|&s| n_list.iter().map(move |&n| (s, n)))
        .collect();
    let outcomes: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(s, n)| {
            let mut it = Integrator::new(opts.config(s, t_end / n as f64))?;
            let traj = it.integrate(problem, &problem.y0, t_end)?;
            Ok(max_norm_diff(traj.last(), &exact))
        })
        .collect();
    let failed: Vec<String> = cells
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o.is_err())
        .map(|((s, n), _)| format!("{s}:{n}"))
        .collect();
    let errors: Vec<f64> = outcomes.into_iter().map(|o| o.unwrap_or(f64::NAN)).collect();

    let mut columns = vec!["n".to_string()];
    for s in s_list {
        columns.push(format!("err_s{s}"));
        columns.push(format!("rate_s{s}"));
    }
    let mut report = RunReport::new(ReportKind::Convergence, columns);
    for (row, &n) in n_list.iter().enumerate() {
        let mut values = vec![n as f64];
        for (si, _) in s_list.iter().enumerate() {
            let err = errors[si * n_list.len() + row];
            let rate = if row == 0 {
                f64::NAN
            } else {
                let prev = errors[si * n_list.len() + row - 1];
                let ratio = (n as f64 / n_list[row - 1] as f64).ln();
                let r = (prev / err).ln() / ratio;
                if r.is_finite() {
                    r
                } else {
                    f64::NAN
                }
            };
            values.push(err);
            values.push(rate);
        }
        report.push_row(values);
    }
    report.set_meta("problem", &problem.spec);
    report.set_meta("s_list", list_to_string(s_list));
    report.set_meta("n_list", list_to_string(n_list));
    report.set_meta("t_end", format!("{t_end:?}"));
    if !failed.is_empty() {
        report.set_meta("failed_cells", failed.join(";"));
    }
    opts.echo(&mut report);
    finish(&mut report, started);
    Ok(report)
}

/// Error at the end of each of `periods` periods with `h = period / n`.
pub fn long_run_study(problem: &Problem, s: usize, n: usize, periods: usize, opts: &StudyOptions) -> Result<RunReport> {
    let started = Instant::now();
    let period = problem
        .period
        .ok_or_else(|| Error::MissingReference(problem.name.clone()))?;
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    let mut report = RunReport::new(ReportKind::LongRun, vec!["period".into(), "t".into(), "err".into()]);
    report.set_meta("problem", &problem.spec);
    report.set_meta("s", s);
    report.set_meta("n", n);
    report.set_meta("periods", periods);
    opts.echo(&mut report);

    let mut it = Integrator::new(opts.config(s, period / n as f64))?;
    let mut y = problem.y0.clone();
    let mut carry = vec![0.0; y.len()];
    let mut index = 0;
    for p in 1..=periods {
        for _ in 0..n {
            let r = it.step(problem, &y).map_err(|e| Error::StepFailed {
                index,
                source: Box::new(e),
            });
            match r {
                Ok(r) => compensated_add(&mut y, &mut carry, &r.increment),
                Err(e) => {
                    report.set_meta("error", e);
                    finish(&mut report, started);
                    return Ok(report);
                }
            }
            index += 1;
        }
        let t = p as f64 * period;
        let exact = problem.exact(t, &problem.y0).unwrap_or_else(|| problem.y0.clone());
        report.push_row(vec![p as f64, t, max_norm_diff(&y, &exact)]);
    }
    finish(&mut report, started);
    Ok(report)
}

/// Fitted geometric decay of a coefficient sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// `rho` in `|gamma_j| ~ kappa rho^-j`.
    pub rho: f64,
    /// Number of leading coefficients used by the fit.
    pub used: usize,
}

/// Least-squares fit of `log |gamma_j|` against `j` over the leading run of
/// coefficients above `100 eps |gamma_0|`. `None` with fewer than four.
pub fn fit_decay_base(norms: &[f64]) -> Option<DecayFit> {
    let lead = *norms.first()?;
    let floor = 100.0 * f64::EPSILON * lead;
    let used = norms.iter().take_while(|&&g| g > floor && g > 0.0).count();
    if used < 4 {
        return None;
    }
    let n = used as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (j, g) in norms[..used].iter().enumerate() {
        let (x, y) = (j as f64, g.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Some(DecayFit {
        rho: (-slope).exp(),
        used,
    })
}

/// `|gamma_j|` (max over components) of the first step for each `h`, one
/// column per `h`. Fitted bases go to metadata as `rho_hat.<i>`, or
/// `skipped` when the fit is not possible.
pub fn spectral_decay(problem: &Problem, s: usize, h_list: &[f64], opts: &StudyOptions) -> Result<RunReport> {
    let started = Instant::now();
    if s < 2 {
        return Err(Error::InvalidConfig("spectral decay needs s >= 2".into()));
    }
    let tableau = std::sync::Arc::new(ButcherTableau::ccm(s)?);
    let norms: Vec<Result<Vec<f64>>> = h_list
        .par_iter()
        .map(|&h| {
            let mut it = Integrator::with_tableau(opts.config(s, h), tableau.clone())?;
            Ok(it.step(problem, &problem.y0)?.coefficient_norms())
        })
        .collect();

    let columns = std::iter::once("j".to_string())
        .chain((0..h_list.len()).map(|i| format!("gamma_h{i}")))
        .collect();
    let mut report = RunReport::new(ReportKind::Decay, columns);
    for j in 0..s {
        let mut row = vec![j as f64];
        for n in &norms {
            row.push(n.as_ref().map(|v| v[j]).unwrap_or(f64::NAN));
        }
        report.push_row(row);
    }
    for (i, n) in norms.iter().enumerate() {
        report.set_meta(&format!("h.{i}"), format!("{:?}", h_list[i]));
        let fit = n.as_ref().ok().and_then(|v| fit_decay_base(v));
        match fit {
            Some(f) => {
                report.set_meta(&format!("rho_hat.{i}"), format!("{:?}", f.rho));
                report.set_meta(&format!("fit_used.{i}"), f.used);
            }
            None => report.set_meta(&format!("rho_hat.{i}"), "skipped"),
        }
        if let Err(e) = n {
            report.set_meta(&format!("error.{i}"), e);
        }
    }
    report.set_meta("problem", &problem.spec);
    report.set_meta("s", s);
    report.set_meta("h_list", list_to_string(h_list));
    opts.echo(&mut report);
    finish(&mut report, started);
    Ok(report)
}

/// `|H(y_n) - H(y_0)|` after every step up to `t_end`.
pub fn hamiltonian_drift(problem: &Problem, s: usize, h: f64, t_end: f64, opts: &StudyOptions) -> Result<RunReport> {
    let started = Instant::now();
    let h0 = problem
        .hamiltonian(&problem.y0)
        .ok_or_else(|| Error::MissingHamiltonian(problem.name.clone()))?;
    let mut it = Integrator::new(opts.config(s, h))?;
    let traj = it.integrate(problem, &problem.y0, t_end)?;
    let mut report = RunReport::new(ReportKind::Drift, vec!["t".into(), "drift".into()]);
    let mut max_drift = 0.0f64;
    for (t, y) in traj.times.iter().zip(&traj.states).skip(1) {
        let d = (problem.hamiltonian(y).expect("checked above") - h0).abs();
        max_drift = max_drift.max(d);
        report.push_row(vec![*t, d]);
    }
    report.set_meta("problem", &problem.spec);
    report.set_meta("s", s);
    report.set_meta("h", format!("{h:?}"));
    report.set_meta("t_end", format!("{t_end:?}"));
    report.set_meta("max_drift", format!("{max_drift:?}"));
    opts.echo(&mut report);
    finish(&mut report, started);
    Ok(report)
}

/// Step-by-step solution: `t`, the state components `y1..ym`, the
/// Hamiltonian `H` when the problem has one, and the fixed-point
/// iteration count of the step that produced the row.
pub fn trajectory_report(problem: &Problem, s: usize, h: f64, t_end: f64, opts: &StudyOptions) -> Result<RunReport> {
    let started = Instant::now();
    let mut it = Integrator::new(opts.config(s, h).with_dense_output(true))?;
    let traj = it.integrate(problem, &problem.y0, t_end)?;
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=problem.dim).map(|d| format!("y{d}")));
    if problem.has_hamiltonian() {
        columns.push("H".into());
    }
    columns.push("iterations".into());
    let mut report = RunReport::new(ReportKind::Trajectory, columns);
    let mut total_iterations = 0;
    for (i, (t, y)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![*t];
        row.extend(y);
        if let Some(energy) = problem.hamiltonian(y) {
            row.push(energy);
        }
        let iterations = if i == 0 { 0 } else { traj.steps[i - 1].iterations };
        total_iterations += iterations;
        row.push(iterations as f64);
        report.push_row(row);
    }
    report.set_meta("problem", &problem.spec);
    report.set_meta("s", s);
    report.set_meta("h", format!("{h:?}"));
    report.set_meta("t_end", format!("{t_end:?}"));
    report.set_meta("steps", traj.times.len() - 1);
    report.set_meta("total_iterations", total_iterations);
    opts.echo(&mut report);
    finish(&mut report, started);
    Ok(report)
}

/// Sample points for the linear stability scan.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    /// `y` values for `z = iy`.
    pub imag_axis: Vec<f64>,
    /// Points with negative real part.
    pub left_half_plane: Vec<Complex<f64>>,
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

impl Default for StabilityGrid {
    /// `y` in `logspace(-2, 3, 50)`; left half plane on 25 radii in
    /// `logspace(-2, 2)` times 24 angles strictly inside `(pi/2, 3pi/2)`.
    fn default() -> Self {
        let angles: Vec<f64> = (0..24)
            .map(|i| std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * std::f64::consts::PI / 24.0)
            .collect();
        let left_half_plane = logspace(-2.0, 2.0, 25)
            .into_iter()
            .flat_map(|r| angles.iter().map(move |&a| Complex::from_polar(r, a)))
            .collect();
        StabilityGrid {
            imag_axis: logspace(-2.0, 3.0, 50),
            left_half_plane,
        }
    }
}

/// Per `s`: smallest real part of the spectrum of `X_s`, the worst
/// `||R(iy)| - 1|` on the imaginary axis, and the largest `|R(z)|` on the
/// left-half-plane samples.
pub fn stability_scan(s_list: &[usize], grid: &StabilityGrid) -> Result<RunReport> {
    let started = Instant::now();
    let rows: Vec<Result<Vec<f64>>> = s_list
        .par_iter()
        .map(|&s| {
            let t = ButcherTableau::ccm(s)?;
            let min_re = min_eig_realpart(s)?;
            let mut axis = 0.0f64;
            for &y in &grid.imag_axis {
                let r = stability_function(&t, Complex::new(0.0, y))?;
                axis = axis.max((r.norm() - 1.0).abs());
            }
            let mut lhp = 0.0f64;
            for &z in &grid.left_half_plane {
                lhp = lhp.max(stability_function(&t, z)?.norm());
            }
            Ok(vec![s as f64, min_re, axis, lhp])
        })
        .collect();
    let mut report = RunReport::new(
        ReportKind::Stability,
        vec![
            "s".into(),
            "min_re_eig".into(),
            "max_imag_axis_defect".into(),
            "max_lhp_abs".into(),
        ],
    );
    for row in rows {
        report.push_row(row?);
    }
    report.set_meta("s_list", list_to_string(s_list));
    report.set_meta("imag_axis_points", grid.imag_axis.len());
    report.set_meta("lhp_points", grid.left_half_plane.len());
    finish(&mut report, started);
    Ok(report)
}

/// Tableau as a report: `i, c, b, a_1..a_k`.
pub fn tableau_report(t: &ButcherTableau) -> RunReport {
    let columns = ["i", "c", "b"]
        .iter()
        .map(|c| c.to_string())
        .chain((1..=t.k).map(|j| format!("a_{j}")))
        .collect();
    let mut report = RunReport::new(ReportKind::Tableau, columns);
    for i in 0..t.k {
        let mut row = vec![(i + 1) as f64, t.c[i], t.b[i]];
        row.extend(t.a.row(i).iter());
        report.push_row(row);
    }
    report.set_meta("s", t.s);
    report.set_meta("k", t.k);
    report
}

/// Re-runs the experiment described by a report's metadata.
pub fn rerun(report: &RunReport) -> Result<RunReport> {
    let get = |k: &str| {
        report
            .meta(k)
            .ok_or_else(|| Error::InvalidConfig(format!("report metadata lacks `{k}`")))
    };
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::InvalidConfig(format!("bad `{k}`"))) };
    let real = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::InvalidConfig(format!("bad `{k}`"))) };
    match report.kind {
        ReportKind::Convergence => convergence_study(
            &by_name(get("problem")?)?,
            &parse_list(get("s_list")?)?,
            &parse_list(get("n_list")?)?,
            &StudyOptions::from_meta(report)?,
        ),
        ReportKind::LongRun => long_run_study(
            &by_name(get("problem")?)?,
            num("s")?,
            num("n")?,
            num("periods")?,
            &StudyOptions::from_meta(report)?,
        ),
        ReportKind::Decay => spectral_decay(
            &by_name(get("problem")?)?,
            num("s")?,
            &parse_list(get("h_list")?)?,
            &StudyOptions::from_meta(report)?,
        ),
        ReportKind::Drift => hamiltonian_drift(
            &by_name(get("problem")?)?,
            num("s")?,
            real("h")?,
            real("t_end")?,
            &StudyOptions::from_meta(report)?,
        ),
        ReportKind::Stability => stability_scan(&parse_list(get("s_list")?)?, &StabilityGrid::default()),
        ReportKind::Trajectory => trajectory_report(
            &by_name(get("problem")?)?,
            num("s")?,
            real("h")?,
            real("t_end")?,
            &StudyOptions::from_meta(report)?,
        ),
        ReportKind::Tableau => Ok(tableau_report(&ButcherTableau::new(num("s")?, num("k")?)?)),
    }
}
