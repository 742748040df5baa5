//! `u_t + a u_x = b u_xx` on `[−1, 1]` with homogeneous Dirichlet data,
//! split into two overlapping subdomains that may carry different
//! coefficients.
//!
//! Time stepping is backward Euler with central differences in space. The
//! classic coupling is Schwarz waveform relaxation with sub-iteration at every
//! step; the learned coupling predicts both interface values once per step.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{solve_tridiagonal, TridiagonalSystem};
use crate::mesh::{Decomposition, Grid1D};
use crate::neural::{
    trial_parts, BoundaryData, OutputMap, Provenance, Surrogate, TrainingSet,
};

pub fn initial_condition(x: f64) -> f64 {
    -(PI * x).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvDiffProblem {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub grid: Grid1D,
    pub decomposition: Decomposition,
    pub t_final: f64,
    /// Number of time levels including `t = 0`.
    pub n_levels: usize,
}

impl AdvDiffProblem {
    pub fn new(a: (f64, f64), b: (f64, f64), n_points: usize, split: usize, k: usize, t_final: f64, n_levels: usize) -> Result<Self> {
        let p = Self {
            a1: a.0,
            a2: a.1,
            b1: b.0,
            b2: b.1,
            grid: Grid1D::new(-1.0, 1.0, n_points)?,
            decomposition: Decomposition::new(n_points, split, k)?,
            t_final,
            n_levels,
        };
        p.validate()?;
        Ok(p)
    }

    /// `a = 1, b = 0.1` on both sides; 41 nodes, split at 21, 101 levels on `[0, 1]`.
    pub fn identical() -> Self {
        Self::new((1.0, 1.0), (0.1, 0.1), 41, 21, 2, 1.0, 101).expect("valid configuration")
    }

    /// `a1 = 1, a2 = 0.1, b1 = 0.1, b2 = 1`; otherwise as [`Self::identical`].
    pub fn heterogeneous() -> Self {
        Self::new((1.0, 0.1), (0.1, 1.0), 41, 21, 2, 1.0, 101).expect("valid configuration")
    }

    /// Same problem on a different time mesh.
    pub fn with_levels(&self, n_levels: usize) -> Result<Self> {
        let p = Self { n_levels, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a1, self.a2, self.b1, self.b2, self.t_final]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.b1 <= 0.0 || self.b2 <= 0.0 {
            return Err(Error::Config(format!(
                "need finite coefficients with b > 0, got a = ({}, {}), b = ({}, {})",
                self.a1, self.a2, self.b1, self.b2
            )));
        }
        if self.t_final <= 0.0 || self.n_levels < 2 {
            return Err(Error::Config(format!(
                "need T > 0 and at least 2 time levels, got T = {}, {} levels",
                self.t_final, self.n_levels
            )));
        }
        if self.decomposition.n_points() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                context: "decomposition vs grid",
                expected: self.grid.len(),
                found: self.decomposition.n_points(),
            });
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.n_levels - 1) as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n + 1 == self.n_levels {
            self.t_final
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_levels).map(|n| self.time(n)).collect()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.a1 == self.a2 && self.b1 == self.b2
    }

    fn coefficients(&self, side: Side) -> (f64, f64) {
        match side {
            Side::Omega1 => (self.a1, self.b1),
            Side::Omega2 => (self.a2, self.b2),
        }
    }

    /// Zero-based inclusive node range of a subdomain.
    fn nodes(&self, side: Side) -> (usize, usize) {
        let zb = self.decomposition.zero_based();
        match side {
            Side::Omega1 => (*zb.omega1.start(), *zb.omega1.end()),
            Side::Omega2 => (*zb.omega2.start(), *zb.omega2.end()),
        }
    }

    fn initial_values(&self, side: Side) -> Vec<f64> {
        let (lo, hi) = self.nodes(side);
        (lo..=hi).map(|i| initial_condition(self.grid.point(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Omega1,
    Omega2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub max_terms: usize,
    pub tolerance: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            max_terms: 200,
            tolerance: 1e-14,
        }
    }
}

/// Series solution for `g = −sin(πx)` with equal coefficients on the whole
/// interval.
///
/// Summation stops once the magnitude bound of a term (trigonometric factor
/// dropped) falls below `cfg.tolerance`.
pub fn advdiff_analytical(t: f64, x: f64, a: f64, b: f64, cfg: &SeriesConfig) -> Result<f64> {
    if cfg.max_terms < 1 || cfg.tolerance.is_nan() || cfg.tolerance <= 0.0 {
        return Err(Error::Config(format!("invalid series config {cfg:?}")));
    }
    if t < 0.0 || !(-1.0..=1.0).contains(&x) || b <= 0.0 {
        return Err(Error::Config(format!(
            "series needs t ≥ 0, x ∈ [−1, 1], b > 0; got t = {t}, x = {x}, b = {b}"
        )));
    }
    let r = a / (2.0 * b);
    let pre = 16.0 * PI * PI * a * b.powi(3) * ((x - a * t / 2.0) * r).exp();
    let (sh, ch) = (pre * r.sinh(), pre * r.cosh());
    let a4 = a.powi(4);
    let abp2 = (a * b * PI).powi(2);
    let bp4 = (PI * b).powi(4);
    let mut sum = 0.0;
    for p in 0..cfg.max_terms {
        let pf = p as f64;
        let q = 2.0 * pf + 1.0;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let d1 = a4 + 8.0 * abp2 * (pf * pf + 1.0) + 16.0 * bp4 * (pf * pf - 1.0).powi(2);
        let d2 = a4 + abp2 * (8.0 * pf * pf + 8.0 * pf + 10.0) + bp4 * (4.0 * pf * pf + 4.0 * pf - 3.0).powi(2);
        let c1 = sh * 2.0 * pf * (-b * pf * pf * PI * PI * t).exp() / d1;
        let c2 = ch * q * (-q * q * b * PI * PI * t / 4.0).exp() / d2;
        sum += sign * (c1 * (pf * PI * x).sin() + c2 * (q * PI * x / 2.0).cos());
        if p > 0 && c1.abs() + c2.abs() < cfg.tolerance {
            return Ok(sum);
        }
    }
    Err(Error::SeriesNotConverged {
        partial: sum,
        terms: cfg.max_terms,
    })
}

/// One backward-Euler step on a node block with Dirichlet end values.
pub fn implicit_step(u_prev: &[f64], a: f64, b: f64, dt: f64, dx: f64, left: f64, right: f64) -> Result<Vec<f64>> {
    let n = u_prev.len();
    if n < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {n}")));
    }
    let m = n - 2;
    let lo = -a * dt / (2.0 * dx) - b * dt / (dx * dx);
    let di = 1.0 + 2.0 * b * dt / (dx * dx);
    let up = a * dt / (2.0 * dx) - b * dt / (dx * dx);
    let mut rhs = u_prev[1..n - 1].to_vec();
    rhs[0] -= lo * left;
    rhs[m - 1] -= up * right;
    let sys = TridiagonalSystem::new(vec![lo; m - 1], vec![di; m], vec![up; m - 1], rhs)?;
    let inner = solve_tridiagonal(&sys)?;
    let mut out = Vec::with_capacity(n);
    out.push(left);
    out.extend(inner);
    out.push(right);
    Ok(out)
}

/// Advances one subdomain by one step. The physical end is held at zero and
/// the interface end at `interface_value`.
pub fn advdiff_implicit_step(
    problem: &AdvDiffProblem,
    which: Side,
    u_prev: &[f64],
    interface_value: f64,
) -> Result<Vec<f64>> {
    let (lo, hi) = problem.nodes(which);
    if u_prev.len() != hi - lo + 1 {
        return Err(Error::DimensionMismatch {
            context: "subdomain values",
            expected: hi - lo + 1,
            found: u_prev.len(),
        });
    }
    let (a, b) = problem.coefficients(which);
    let (dt, dx) = (problem.dt(), problem.grid.spacing());
    match which {
        Side::Omega1 => implicit_step(u_prev, a, b, dt, dx, 0.0, interface_value),
        Side::Omega2 => implicit_step(u_prev, a, b, dt, dx, interface_value, 0.0),
    }
}

/// Values over `(time level, node)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub label: String,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// `values[n][i]` at `(times[n], x[i])`.
    pub values: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    /// `max |self − other|` over all levels and the given node indices.
    pub fn max_abs_diff(&self, other: &Self, nodes: impl IntoIterator<Item = usize> + Clone) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch {
                context: "time levels",
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        let mut m = 0.0f64;
        let mut seen = false;
        for (ra, rb) in self.values.iter().zip(&other.values) {
            for i in nodes.clone() {
                let (Some(a), Some(b)) = (ra.get(i), rb.get(i)) else {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        len: ra.len().min(rb.len()),
                    });
                };
                seen = true;
                m = m.max((a - b).abs());
            }
        }
        if !seen {
            return Err(Error::EmptyRegion);
        }
        Ok(m)
    }

    pub fn max_abs_diff_all(&self, other: &Self) -> Result<f64> {
        self.max_abs_diff(other, 0..self.x.len())
    }

    /// CSV with header `t,x_1,…,x_I` and one row per time level.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.x.len()).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.values) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv()?.as_bytes())
    }
}

/// Series solution sampled on the problem's space-time mesh; level 0 is the
/// initial condition itself.
pub fn analytical_field(problem: &AdvDiffProblem, cfg: &SeriesConfig) -> Result<SpaceTimeField> {
    if !problem.is_homogeneous() {
        return Err(Error::Config("no closed form for distinct coefficients".into()));
    }
    let x = problem.grid.points();
    let times = problem.times();
    let mut values = Vec::with_capacity(times.len());
    values.push(x.iter().map(|&xi| initial_condition(xi)).collect());
    for &t in &times[1..] {
        values.push(
            x.iter()
                .map(|&xi| advdiff_analytical(t, xi, problem.a1, problem.b1, cfg))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(SpaceTimeField {
        label: "analytical".into(),
        times,
        x,
        values,
    })
}

/// Backward Euler on the whole interval with one set of coefficients.
pub fn solve_single_domain(a: f64, b: f64, n_points: usize, n_levels: usize, t_final: f64) -> Result<SpaceTimeField> {
    let grid = Grid1D::new(-1.0, 1.0, n_points)?;
    if n_levels < 2 || t_final <= 0.0 {
        return Err(Error::Config("need at least 2 levels and T > 0".into()));
    }
    let dt = t_final / (n_levels - 1) as f64;
    let x = grid.points();
    let mut u: Vec<f64> = x.iter().map(|&xi| initial_condition(xi)).collect();
    u[0] = 0.0;
    u[n_points - 1] = 0.0;
    let mut values = vec![u.clone()];
    for _ in 1..n_levels {
        u = implicit_step(&u, a, b, dt, grid.spacing(), 0.0, 0.0)?;
        values.push(u.clone());
    }
    let times = (0..n_levels)
        .map(|n| if n + 1 == n_levels { t_final } else { n as f64 * dt })
        .collect();
    Ok(SpaceTimeField {
        label: "single-domain".into(),
        times,
        x,
        values,
    })
}

/// Result of a coupled time march.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvDiffRun {
    /// Merged field; Ω2 values win on the overlap.
    pub merged: SpaceTimeField,
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
    /// Total number of subdomain sweeps over all steps.
    pub iterations: usize,
    pub sub_iterations: Vec<usize>,
    /// Final sweep-to-sweep change at every step (empty for one-shot runs).
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub wall_time: f64,
}

fn merge(problem: &AdvDiffProblem, u1: &[Vec<f64>], u2: &[Vec<f64>], label: &str) -> SpaceTimeField {
    let (lo2, _) = problem.nodes(Side::Omega2);
    let values = u1
        .iter()
        .zip(u2)
        .map(|(a, b)| a[..lo2].iter().chain(b).copied().collect())
        .collect();
    SpaceTimeField {
        label: label.into(),
        times: problem.times(),
        x: problem.grid.points(),
        values,
    }
}

/// Waveform relaxation with the lagged exchange as the first guess at each
/// step, then alternating sweeps until the subdomain values change by at
/// most `tol`.
pub fn classic_swr_advdiff(problem: &AdvDiffProblem, tol: f64, max_iter: usize) -> Result<AdvDiffRun> {
    problem.validate()?;
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return Err(Error::Config(format!("need tol > 0 and max_iter ≥ 1, got {tol}, {max_iter}")));
    }
    let start = Instant::now();
    let zb = problem.decomposition.zero_based();
    let (lo2, _) = problem.nodes(Side::Omega2);
    let (g1, g2) = (zb.gamma1, zb.gamma2);
    let mut u1 = problem.initial_values(Side::Omega1);
    let mut u2 = problem.initial_values(Side::Omega2);
    u1[0] = 0.0;
    *u2.last_mut().unwrap() = 0.0;
    let mut h1 = vec![u1.clone()];
    let mut h2 = vec![u2.clone()];
    let mut sub = Vec::with_capacity(problem.n_levels - 1);
    let mut residuals = Vec::with_capacity(problem.n_levels - 1);
    for step in 1..problem.n_levels {
        let mut iface1 = u2[g1 - lo2];
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut done = None;
        for it in 1..=max_iter {
            let n1 = advdiff_implicit_step(problem, Side::Omega1, &u1, iface1)?;
            let n2 = advdiff_implicit_step(problem, Side::Omega2, &u2, n1[g2])?;
            iface1 = n2[g1 - lo2];
            let change = prev.as_ref().map(|(p1, p2)| max_change(p1, &n1).max(max_change(p2, &n2)));
            prev = Some((n1, n2));
            if let Some(c) = change {
                if !c.is_finite() {
                    break;
                }
                if c <= tol {
                    done = Some((it, c));
                    break;
                }
            }
        }
        let Some((its, res)) = done else {
            return Err(Error::SubIterationFailed { step });
        };
        let (n1, n2) = prev.expect("at least one sweep");
        u1 = n1;
        u2 = n2;
        h1.push(u1.clone());
        h2.push(u2.clone());
        sub.push(its);
        residuals.push(res);
    }
    Ok(AdvDiffRun {
        merged: merge(problem, &h1, &h2, "classic"),
        u1: h1,
        u2: h2,
        iterations: sub.iter().sum(),
        sub_iterations: sub,
        residual_history: residuals,
        converged: true,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Supplies `[u(x_{I′−1}), u(x_{I′})]` at level `n + 1`.
pub trait InterfaceModel {
    /// `zone` holds u1 on `I′−k−1..=I′−1` then u2 on `I′..=I′+k`, at level `n`.
    fn interfaces(&self, n: usize, t_next: f64, zone: &[f64]) -> Result<[f64; 2]>;
}

/// Boundary data of the equal-coefficient problem on the unit time window.
#[derive(Debug, Clone, Copy)]
pub struct SeriesBoundary {
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
    pub series: SeriesConfig,
}

impl BoundaryData for SeriesBoundary {
    fn initial(&self, x: f64) -> f64 {
        initial_condition(x)
    }
    fn terminal(&self, x: f64) -> f64 {
        match advdiff_analytical(self.t_final, x, self.a, self.b, &self.series) {
            Ok(v) => v,
            Err(Error::SeriesNotConverged { partial, .. }) => partial,
            Err(_) => f64::NAN,
        }
    }
    fn left(&self, _t: f64) -> f64 {
        0.0
    }
    fn right(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Network of `(t, x)` wrapped in the trial solution; time is rescaled to
/// `[0, 1]` by `t_final`.
pub struct GlobalTrialModel {
    pub surrogate: Surrogate,
    pub boundary: SeriesBoundary,
    pub x_interfaces: [f64; 2],
}

impl GlobalTrialModel {
    pub fn new(problem: &AdvDiffProblem, surrogate: Surrogate, series: SeriesConfig) -> Result<Self> {
        if surrogate.net.input_dim() != 2 || surrogate.net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "global-trial network inputs (t, x)",
                expected: 2,
                found: surrogate.net.input_dim(),
            });
        }
        let zb = problem.decomposition.zero_based();
        Ok(Self {
            surrogate,
            boundary: SeriesBoundary {
                a: problem.a1,
                b: problem.b1,
                t_final: problem.t_final,
                series,
            },
            x_interfaces: [problem.grid.point(zb.gamma2), problem.grid.point(zb.gamma1)],
        })
    }

    pub fn evaluate(&self, t: f64, x: f64) -> Result<f64> {
        let tau = t / self.boundary.t_final;
        let scaled = TimeScaled(&self.boundary);
        // the network sees physical time; the trial factors see τ ∈ [0, 1]
        let (a, m) = trial_parts(tau, x, &scaled);
        if m == 0.0 {
            return Ok(a);
        }
        Ok(a + m * self.surrogate.predict(&[t, x])?[0])
    }
}

struct TimeScaled<'a>(&'a SeriesBoundary);

impl BoundaryData for TimeScaled<'_> {
    fn initial(&self, x: f64) -> f64 {
        self.0.initial(x)
    }
    fn terminal(&self, x: f64) -> f64 {
        self.0.terminal(x)
    }
    fn left(&self, tau: f64) -> f64 {
        self.0.left(tau * self.0.t_final)
    }
    fn right(&self, tau: f64) -> f64 {
        self.0.right(tau * self.0.t_final)
    }
}

impl InterfaceModel for GlobalTrialModel {
    fn interfaces(&self, _n: usize, t_next: f64, _zone: &[f64]) -> Result<[f64; 2]> {
        Ok([
            self.evaluate(t_next, self.x_interfaces[0])?,
            self.evaluate(t_next, self.x_interfaces[1])?,
        ])
    }
}

/// Network mapping the `2k + 2` zone values at level `n` to the interface
/// values at level `n + 1`.
pub struct LocalStencilModel {
    pub surrogate: Surrogate,
}

impl LocalStencilModel {
    pub fn new(problem: &AdvDiffProblem, surrogate: Surrogate) -> Result<Self> {
        let w = problem.decomposition.zone_width();
        if surrogate.net.input_dim() != w || surrogate.net.output_dim() != 2 {
            return Err(Error::DimensionMismatch {
                context: "local-stencil network input width",
                expected: w,
                found: surrogate.net.input_dim(),
            });
        }
        Ok(Self { surrogate })
    }
}

impl InterfaceModel for LocalStencilModel {
    fn interfaces(&self, _n: usize, _t_next: f64, zone: &[f64]) -> Result<[f64; 2]> {
        let y = self.surrogate.predict(zone)?;
        Ok([y[0], y[1]])
    }
}

/// Replays stored interface values, indexed by step.
pub struct RecordedInterfaces {
    pub values: Vec<[f64; 2]>,
}

impl RecordedInterfaces {
    /// Interface values of a converged classic run.
    pub fn from_run(problem: &AdvDiffProblem, run: &AdvDiffRun) -> Self {
        let zb = problem.decomposition.zero_based();
        let (lo2, _) = problem.nodes(Side::Omega2);
        let values = run.u1[1..]
            .iter()
            .zip(&run.u2[1..])
            .map(|(a, b)| [a[zb.gamma2], b[zb.gamma1 - lo2]])
            .collect();
        Self { values }
    }
}

impl InterfaceModel for RecordedInterfaces {
    fn interfaces(&self, n: usize, _t_next: f64, _zone: &[f64]) -> Result<[f64; 2]> {
        self.values.get(n).copied().ok_or(Error::IndexOutOfRange {
            index: n,
            len: self.values.len(),
        })
    }
}

fn zone_values(problem: &AdvDiffProblem, u1: &[f64], u2: &[f64]) -> Vec<f64> {
    let zb = problem.decomposition.zero_based();
    let (lo2, _) = problem.nodes(Side::Omega2);
    let mut z: Vec<f64> = u1[*zb.zone.start()..=zb.gamma2].to_vec();
    z.extend_from_slice(&u2[zb.gamma1 - lo2..=zb.zone.end() - lo2]);
    z
}

/// Marches without sub-iteration: each step the model supplies both interface
/// values and each subdomain takes one implicit step.
pub fn ml_swr_advdiff(problem: &AdvDiffProblem, model: &dyn InterfaceModel) -> Result<AdvDiffRun> {
    problem.validate()?;
    let start = Instant::now();
    let mut u1 = problem.initial_values(Side::Omega1);
    let mut u2 = problem.initial_values(Side::Omega2);
    u1[0] = 0.0;
    *u2.last_mut().unwrap() = 0.0;
    let mut h1 = vec![u1.clone()];
    let mut h2 = vec![u2.clone()];
    for n in 0..problem.n_levels - 1 {
        let zone = zone_values(problem, &u1, &u2);
        let [left2, right1] = model.interfaces(n, problem.time(n + 1), &zone)?;
        u1 = advdiff_implicit_step(problem, Side::Omega1, &u1, right1)?;
        u2 = advdiff_implicit_step(problem, Side::Omega2, &u2, left2)?;
        h1.push(u1.clone());
        h2.push(u2.clone());
    }
    let steps = problem.n_levels - 1;
    Ok(AdvDiffRun {
        merged: merge(problem, &h1, &h2, "ml"),
        u1: h1,
        u2: h2,
        iterations: steps,
        sub_iterations: vec![1; steps],
        residual_history: Vec::new(),
        converged: true,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Samples `(t^l, x)` for `l = 1..=levels` and both interface nodes, with
/// series targets and the trial-solution output map.
pub fn build_global_training_set(problem: &AdvDiffProblem, levels: usize, series: &SeriesConfig) -> Result<TrainingSet> {
    if !problem.is_homogeneous() {
        return Err(Error::Config(
            "global training needs equal coefficients on both subdomains".into(),
        ));
    }
    if levels == 0 {
        return Err(Error::Config("need at least one training level".into()));
    }
    let zb = problem.decomposition.zero_based();
    let xs = [problem.grid.point(zb.gamma2), problem.grid.point(zb.gamma1)];
    let boundary = SeriesBoundary {
        a: problem.a1,
        b: problem.b1,
        t_final: problem.t_final,
        series: *series,
    };
    let scaled = TimeScaled(&boundary);
    let (mut inputs, mut targets, mut offsets, mut mults) = (vec![], vec![], vec![], vec![]);
    for l in 1..=levels {
        let tau = l as f64 / levels as f64;
        let t = tau * problem.t_final;
        for &x in &xs {
            let (a, m) = trial_parts(tau, x, &scaled);
            inputs.push(vec![t, x]);
            targets.push(vec![advdiff_analytical(t, x, problem.a1, problem.b1, series)?]);
            offsets.push(vec![a]);
            mults.push(vec![m]);
        }
    }
    TrainingSet::new(inputs, targets, Provenance::AdvdiffGlobal)?.with_output_map(OutputMap {
        offsets,
        multipliers: mults,
    })
}

/// One sample per step of a classic run: zone values at `n` in, interface
/// values `[u1(x_{I′−1}), u2(x_{I′})]` at `n + 1` out.
pub fn build_local_training_set(problem: &AdvDiffProblem, run: &AdvDiffRun) -> Result<TrainingSet> {
    if run.u1.len() < 2 || run.u1.len() != run.u2.len() {
        return Err(Error::InvalidData(format!(
            "need a history of at least 2 levels, got {}",
            run.u1.len()
        )));
    }
    let recorded = RecordedInterfaces::from_run(problem, run);
    let inputs = run.u1[..run.u1.len() - 1]
        .iter()
        .zip(&run.u2)
        .map(|(a, b)| zone_values(problem, a, b))
        .collect();
    let targets = recorded.values.iter().map(|v| v.to_vec()).collect();
    TrainingSet::new(inputs, targets, Provenance::AdvdiffLocal)
}
