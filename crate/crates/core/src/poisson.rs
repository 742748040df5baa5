//! Two-subdomain Schwarz iteration for `Δu = f` on the unit square, with the
//! interfaces supplied either by the neighbouring subdomain or by a trained
//! surrogate.
//!
//! The domain is split along `x`. Fields are stored column by column: node
//! `(i, j)` of a field with `ny` rows lives at `i * ny + j`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{BandedLu, BandedMatrix};
use crate::mesh::{Decomposition, Grid1D, Grid2D};
use crate::neural::{Mlp, Provenance, Surrogate, TrainingSet};

pub fn poisson_exact(x: f64, y: f64) -> f64 {
    (-x).exp() * (x + y.powi(3))
}

pub fn poisson_source(x: f64, y: f64) -> f64 {
    (-x).exp() * (x - 2.0 + y.powi(3) + 6.0 * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchwarzMode {
    /// Both subdomains read the previous iterate.
    Additive,
    /// Ω2 reads the Ω1 iterate computed in the same sweep.
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Zero in the interior, `g` on the physical boundary.
    Zero,
    /// `g` evaluated at every node.
    BoundaryExtension,
}

#[derive(Debug, Clone, Copy)]
pub struct PoissonProblem {
    pub grid: Grid2D,
    pub decomposition: Decomposition,
    pub source: fn(f64, f64) -> f64,
    pub boundary: fn(f64, f64) -> f64,
    pub exact: Option<fn(f64, f64) -> f64>,
    /// Number of node columns shared by Ω1 and Ω2 in the classic iteration.
    pub overlap: usize,
    pub initial_guess: InitialGuess,
}

impl PoissonProblem {
    /// `nx × ny` nodes on the unit square, split at column `split` (1-based)
    /// with zone half width `k`.
    pub fn unit_square(nx: usize, ny: usize, split: usize, k: usize) -> Result<Self> {
        let grid = Grid2D::new(Grid1D::new(0.0, 1.0, nx)?, Grid1D::new(0.0, 1.0, ny)?);
        Ok(Self {
            grid,
            decomposition: Decomposition::new(nx, split, k)?,
            source: poisson_source,
            boundary: poisson_exact,
            exact: Some(poisson_exact),
            overlap: 2,
            initial_guess: InitialGuess::Zero,
        })
    }

    /// 41 × 21 nodes, split at column 21, zone half width 2.
    pub fn reference() -> Self {
        Self::unit_square(41, 21, 21, 2).expect("reference configuration is valid")
    }

    pub fn nx(&self) -> usize {
        self.grid.x.len()
    }

    pub fn ny(&self) -> usize {
        self.grid.y.len()
    }

    /// Zero-based `(Γ2, Γ1)` columns used by the classic iteration.
    fn interfaces(&self) -> Result<(usize, usize)> {
        let gamma1 = self.decomposition.zero_based().gamma1;
        if self.overlap < 2 || self.overlap > gamma1 {
            return Err(Error::InvalidDecomposition(format!(
                "overlap {} must lie in [2, {gamma1}]",
                self.overlap
            )));
        }
        Ok((gamma1 + 1 - self.overlap, gamma1))
    }

    fn validate(&self) -> Result<()> {
        if self.decomposition.n_points() != self.nx() {
            return Err(Error::DimensionMismatch {
                context: "decomposition vs grid columns",
                expected: self.nx(),
                found: self.decomposition.n_points(),
            });
        }
        self.interfaces()?;
        Ok(())
    }

    fn g(&self, i: usize, j: usize) -> f64 {
        let (x, y) = self.grid.node(i, j);
        (self.boundary)(x, y)
    }

    /// `u_exact` at every node of the global grid.
    pub fn exact_field(&self) -> Option<Field2D> {
        let exact = self.exact?;
        let mut f = Field2D::zeros(self.nx(), self.ny());
        for i in 0..self.nx() {
            for j in 0..self.ny() {
                let (x, y) = self.grid.node(i, j);
                f.set(i, j, exact(x, y));
            }
        }
        Some(f)
    }
}

/// Node values on a block of consecutive grid columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![0.0; nx * ny],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ny + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ny + j] = v;
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.ny..(i + 1) * self.ny]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ny..(i + 1) * self.ny]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max |self − other|` over the given columns and all rows.
    pub fn max_abs_diff_columns(
        &self,
        other: &Self,
        columns: impl IntoIterator<Item = usize>,
    ) -> Result<f64> {
        let mut seen = false;
        let mut m = 0.0f64;
        for i in columns {
            if i >= self.nx || i >= other.nx {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.nx.min(other.nx),
                });
            }
            seen = true;
            for (a, b) in self.column(i).iter().zip(other.column(i)) {
                m = m.max((a - b).abs());
            }
        }
        if !seen {
            return Err(Error::EmptyRegion);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Omega1,
    Omega2,
}

/// Prefactored five-point Laplacian on one subdomain.
///
/// Dirichlet data: `g` on the physical sides and the rows `j = 0, ny−1`,
/// caller-supplied values on the interface column.
#[derive(Debug, Clone)]
pub struct SubdomainSolver {
    side: Side,
    first: usize,
    last: usize,
    ny: usize,
    inv_dx2: f64,
    lu: BandedLu,
    base_rhs: Vec<f64>,
    template: Field2D,
}

impl SubdomainSolver {
    pub fn new(problem: &PoissonProblem, side: Side) -> Result<Self> {
        problem.validate()?;
        let (gamma2, gamma1) = problem.interfaces()?;
        let (first, last) = match side {
            Side::Omega1 => (0, gamma1),
            Side::Omega2 => (gamma2, problem.nx() - 1),
        };
        Self::for_columns(problem, side, first, last)
    }

    fn for_columns(problem: &PoissonProblem, side: Side, first: usize, last: usize) -> Result<Self> {
        let ny = problem.ny();
        let nxi = last - first - 1;
        let nyi = ny - 2;
        let n = nxi * nyi;
        let dx = problem.grid.x.spacing();
        let dy = problem.grid.y.spacing();
        let (cx, cy) = (1.0 / (dx * dx), 1.0 / (dy * dy));

        let mut a = BandedMatrix::zeros(n, nyi)?;
        let mut rhs = vec![0.0; n];
        let mut template = Field2D::zeros(last - first + 1, ny);
        for i in first..=last {
            for j in [0, ny - 1] {
                template.set(i - first, j, problem.g(i, j));
            }
        }
        let physical = match side {
            Side::Omega1 => Some(first),
            Side::Omega2 => Some(last),
        };
        for i in first..=last {
            if Some(i) == physical {
                for j in 0..ny {
                    template.set(i - first, j, problem.g(i, j));
                }
            }
        }

        for ia in 0..nxi {
            let i = first + 1 + ia;
            for ja in 0..nyi {
                let j = 1 + ja;
                let r = ia * nyi + ja;
                let (x, y) = problem.grid.node(i, j);
                a.set(r, r, -2.0 * cx - 2.0 * cy);
                rhs[r] = (problem.source)(x, y);
                if ja > 0 {
                    a.set(r, r - 1, cy);
                } else {
                    rhs[r] -= cy * problem.g(i, 0);
                }
                if ja + 1 < nyi {
                    a.set(r, r + 1, cy);
                } else {
                    rhs[r] -= cy * problem.g(i, ny - 1);
                }
                if ia > 0 {
                    a.set(r, r - nyi, cx);
                } else if Some(first) == physical {
                    rhs[r] -= cx * problem.g(first, j);
                }
                if ia + 1 < nxi {
                    a.set(r, r + nyi, cx);
                } else if Some(last) == physical {
                    rhs[r] -= cx * problem.g(last, j);
                }
            }
        }
        Ok(Self {
            side,
            first,
            last,
            ny,
            inv_dx2: cx,
            lu: a.factorize()?,
            base_rhs: rhs,
            template,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Zero-based global index of the first column.
    pub fn first_column(&self) -> usize {
        self.first
    }

    pub fn last_column(&self) -> usize {
        self.last
    }

    /// Solves with the given interface column. Its end entries are ignored:
    /// the corner nodes take `g`.
    pub fn solve(&self, interface: &[f64]) -> Result<Field2D> {
        if interface.len() != self.ny {
            return Err(Error::DimensionMismatch {
                context: "interface column",
                expected: self.ny,
                found: interface.len(),
            });
        }
        let nyi = self.ny - 2;
        let nxi = self.last - self.first - 1;
        let mut rhs = self.base_rhs.clone();
        let (iface_col, adjacent) = match self.side {
            Side::Omega1 => (self.last - self.first, nxi - 1),
            Side::Omega2 => (0, 0),
        };
        for ja in 0..nyi {
            rhs[adjacent * nyi + ja] -= self.inv_dx2 * interface[ja + 1];
        }
        let sol = self.lu.solve(&rhs)?;
        let mut field = self.template.clone();
        field.column_mut(iface_col)[1..self.ny - 1].copy_from_slice(&interface[1..self.ny - 1]);
        for ia in 0..nxi {
            field.column_mut(ia + 1)[1..self.ny - 1].copy_from_slice(&sol[ia * nyi..(ia + 1) * nyi]);
        }
        Ok(field)
    }

    /// Initial iterate: `g` on the physical boundary, interior per `guess`.
    fn initial(&self, problem: &PoissonProblem) -> Field2D {
        let mut f = self.template.clone();
        if problem.initial_guess == InitialGuess::BoundaryExtension {
            for i in self.first..=self.last {
                for j in 0..self.ny {
                    f.set(i - self.first, j, problem.g(i, j));
                }
            }
        }
        f
    }
}

pub fn solve_poisson_subdomain(
    problem: &PoissonProblem,
    which: Side,
    interface_values: &[f64],
) -> Result<Field2D> {
    SubdomainSolver::new(problem, which)?.solve(interface_values)
}

/// Direct solve on the whole grid with `g` on the entire boundary.
pub fn solve_poisson_global(problem: &PoissonProblem) -> Result<Field2D> {
    problem.validate()?;
    let nx = problem.nx();
    let solver = SubdomainSolver::for_columns(problem, Side::Omega1, 0, nx - 1)?;
    let right: Vec<f64> = (0..problem.ny()).map(|j| problem.g(nx - 1, j)).collect();
    solver.solve(&right)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwarzState {
    pub m: usize,
    pub u1: Field2D,
    pub u2: Field2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRunRecord {
    /// Merged field; Ω2 values win on the overlap.
    pub field: Field2D,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub wall_time: f64,
}

struct Solvers {
    s1: SubdomainSolver,
    s2: SubdomainSolver,
}

impl Solvers {
    fn new(problem: &PoissonProblem) -> Result<Self> {
        Ok(Self {
            s1: SubdomainSolver::new(problem, Side::Omega1)?,
            s2: SubdomainSolver::new(problem, Side::Omega2)?,
        })
    }

    /// Column of u1 at global index `i`.
    fn col1<'a>(&self, u1: &'a Field2D, i: usize) -> &'a [f64] {
        u1.column(i - self.s1.first)
    }

    fn col2<'a>(&self, u2: &'a Field2D, i: usize) -> &'a [f64] {
        u2.column(i - self.s2.first)
    }

    fn merge(&self, u1: &Field2D, u2: &Field2D) -> Field2D {
        let nx = self.s2.last + 1;
        let mut f = Field2D::zeros(nx, u1.ny());
        for i in 0..nx {
            let src = if i >= self.s2.first {
                self.col2(u2, i)
            } else {
                self.col1(u1, i)
            };
            f.column_mut(i).copy_from_slice(src);
        }
        f
    }
}

pub fn classic_schwarz_poisson(
    problem: &PoissonProblem,
    tol: f64,
    max_iter: usize,
    mode: SchwarzMode,
) -> Result<CoupledRunRecord> {
    Ok(classic_schwarz_poisson_traced(problem, tol, max_iter, mode)?.0)
}

/// Like [`classic_schwarz_poisson`], also returning every iterate `m ≥ 1`.
pub fn classic_schwarz_poisson_traced(
    problem: &PoissonProblem,
    tol: f64,
    max_iter: usize,
    mode: SchwarzMode,
) -> Result<(CoupledRunRecord, Vec<SchwarzState>)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let start = Instant::now();
    let sv = Solvers::new(problem)?;
    let gamma1 = sv.s1.last;
    let gamma2 = sv.s2.first;
    let mut u1 = sv.s1.initial(problem);
    let mut u2 = sv.s2.initial(problem);
    let mut history = Vec::new();
    let mut states = Vec::new();
    let mut converged = false;
    for m in 1..=max_iter {
        let n1 = sv.s1.solve(sv.col2(&u2, gamma1))?;
        let n2 = match mode {
            SchwarzMode::Additive => sv.s2.solve(sv.col1(&u1, gamma2))?,
            SchwarzMode::Multiplicative => sv.s2.solve(sv.col1(&n1, gamma2))?,
        };
        let r = n1.max_abs_diff(&u1).max(n2.max_abs_diff(&u2));
        u1 = n1;
        u2 = n2;
        history.push(r);
        states.push(SchwarzState {
            m,
            u1: u1.clone(),
            u2: u2.clone(),
        });
        if r <= tol {
            converged = true;
            break;
        }
    }
    let record = CoupledRunRecord {
        field: sv.merge(&u1, &u2),
        iterations: history.len(),
        converged,
        residual_history: history,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((record, states))
}

fn require_default_overlap(problem: &PoissonProblem) -> Result<()> {
    if problem.overlap != 2 {
        return Err(Error::InvalidDecomposition(format!(
            "surrogate coupling needs overlap 2, got {}",
            problem.overlap
        )));
    }
    Ok(())
}

/// Surrogate input: u1 on the zone's left column, u2 on its right column,
/// then `g` along the zone's bottom and top rows.
fn zone_input(problem: &PoissonProblem, sv: &Solvers, u1: &Field2D, u2: &Field2D) -> Vec<f64> {
    let zone = problem.decomposition.zero_based().zone;
    let ny = problem.ny();
    let mut input = Vec::with_capacity(2 * ny + 2 * zone.clone().count());
    input.extend_from_slice(sv.col1(u1, *zone.start()));
    input.extend_from_slice(sv.col2(u2, *zone.end()));
    for j in [0, ny - 1] {
        input.extend(zone.clone().map(|i| problem.g(i, j)));
    }
    input
}

/// Width of the surrogate input and output for this problem.
pub fn poisson_surrogate_dims(problem: &PoissonProblem) -> (usize, usize) {
    let ny = problem.ny();
    (
        2 * ny + 2 * problem.decomposition.zone_width(),
        2 * ny,
    )
}

/// One sample per iterate: zone boundary data in, same-iterate interface
/// columns `[u1 on Γ1, u2 on Γ2]` out.
pub fn build_poisson_training_set(
    problem: &PoissonProblem,
    history: &[SchwarzState],
) -> Result<TrainingSet> {
    if history.is_empty() {
        return Err(Error::InvalidData("empty iterate history".into()));
    }
    require_default_overlap(problem)?;
    let sv = Solvers::new(problem)?;
    let zb = problem.decomposition.zero_based();
    let mut inputs = Vec::with_capacity(history.len());
    let mut targets = Vec::with_capacity(history.len());
    for s in history {
        if s.u1.nx() != sv.s1.last + 1 || s.u2.nx() != sv.s2.last - sv.s2.first + 1 {
            return Err(Error::DimensionMismatch {
                context: "iterate columns",
                expected: sv.s1.last + 1,
                found: s.u1.nx(),
            });
        }
        inputs.push(zone_input(problem, &sv, &s.u1, &s.u2));
        let mut t = sv.col1(&s.u1, zb.gamma1).to_vec();
        t.extend_from_slice(sv.col2(&s.u2, zb.gamma2));
        targets.push(t);
    }
    TrainingSet::new(inputs, targets, Provenance::PoissonIterates)
}

/// Schwarz iteration in which the surrogate supplies both interface columns.
pub fn ml_schwarz_poisson(
    problem: &PoissonProblem,
    net: &Surrogate,
    tol: f64,
    max_iter: usize,
) -> Result<CoupledRunRecord> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    require_default_overlap(problem)?;
    let (d_in, d_out) = poisson_surrogate_dims(problem);
    if net.net.input_dim() != d_in || net.net.output_dim() != d_out {
        return Err(Error::DimensionMismatch {
            context: "surrogate shape for this problem",
            expected: d_in,
            found: net.net.input_dim(),
        });
    }
    let start = Instant::now();
    let sv = Solvers::new(problem)?;
    let ny = problem.ny();
    let mut u1 = sv.s1.initial(problem);
    let mut u2 = sv.s2.initial(problem);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let s = net.predict(&zone_input(problem, &sv, &u1, &u2))?;
        let n1 = sv.s1.solve(&s[..ny])?;
        let n2 = sv.s2.solve(&s[ny..])?;
        let r = n1.max_abs_diff(&u1).max(n2.max_abs_diff(&u2));
        u1 = n1;
        u2 = n2;
        history.push(r);
        if !r.is_finite() {
            break;
        }
        if r <= tol {
            converged = true;
            break;
        }
    }
    Ok(CoupledRunRecord {
        field: sv.merge(&u1, &u2),
        iterations: history.len(),
        converged,
        residual_history: history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// A network that ignores its input and outputs the interface columns of
/// `record`: zero weights, output bias equal to the stored values.
pub fn memorizing_surrogate(problem: &PoissonProblem, record: &CoupledRunRecord) -> Result<Surrogate> {
    let (d_in, d_out) = poisson_surrogate_dims(problem);
    let zb = problem.decomposition.zero_based();
    let mut net = Mlp::zeros(&[d_in, 2, d_out])?;
    let mut bias = record.field.column(zb.gamma1).to_vec();
    bias.extend_from_slice(record.field.column(zb.gamma2));
    net.biases_mut()[1].copy_from_slice(&bias);
    Surrogate::from_parts(
        net,
        crate::neural::InputScaling::identity(d_in),
        Provenance::PoissonIterates,
        0,
    )
}

/// The four error columns of a coupled run, all measured over the zone S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub err_u_exact: f64,
    pub err_u_sbar: f64,
    pub err_sbar_exact: f64,
    pub loss: f64,
}

impl ErrorReport {
    pub fn satisfies_triangle(&self) -> bool {
        self.err_u_exact <= (self.err_u_sbar + self.err_sbar_exact) * (1.0 + 1e-12)
    }
}

/// Errors over S of `record` against `u_exact` and the reference field `sbar`
/// (the converged classic solution), plus the training loss.
pub fn poisson_error_report(
    record: &CoupledRunRecord,
    sbar: &Field2D,
    problem: &PoissonProblem,
    loss: f64,
) -> Result<ErrorReport> {
    let exact = problem
        .exact_field()
        .ok_or_else(|| Error::Config("problem has no exact solution".into()))?;
    let zone = problem.decomposition.zero_based().zone;
    Ok(ErrorReport {
        err_u_exact: record.field.max_abs_diff_columns(&exact, zone.clone())?,
        err_u_sbar: record.field.max_abs_diff_columns(sbar, zone.clone())?,
        err_sbar_exact: sbar.max_abs_diff_columns(&exact, zone)?,
        loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(poisson_exact(0.0, 0.0), 0.0);
        assert_eq!(poisson_exact(0.0, 1.0), 1.0);
        assert!((poisson_exact(1.0, 1.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(poisson_source(0.0, 0.0), -2.0);
        assert_eq!(poisson_source(0.0, 1.0), 5.0);
    }

    #[test]
    fn source_is_laplacian_of_exact() {
        let h = 1e-4;
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.5), (0.93, 0.07), (0.3, 0.8)] {
            let lap = (poisson_exact(x + h, y) + poisson_exact(x - h, y) + poisson_exact(x, y + h)
                + poisson_exact(x, y - h)
                - 4.0 * poisson_exact(x, y))
                / (h * h);
            assert!((lap - poisson_source(x, y)).abs() < 1e-5, "{lap}");
        }
    }

    fn constant_problem() -> PoissonProblem {
        PoissonProblem {
            source: |_, _| 0.0,
            boundary: |_, _| 1.0,
            exact: Some(|_, _| 1.0),
            ..PoissonProblem::reference()
        }
    }

    #[test]
    fn constant_data_gives_constant_field() {
        let p = constant_problem();
        for side in [Side::Omega1, Side::Omega2] {
            let f = solve_poisson_subdomain(&p, side, &vec![1.0; 21]).unwrap();
            assert!(f.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn linear_data_reproduced_exactly() {
        let p = PoissonProblem {
            source: |_, _| 0.0,
            boundary: |x, y| 2.0 * x - y + 0.5,
            exact: Some(|x, y| 2.0 * x - y + 0.5),
            ..PoissonProblem::reference()
        };
        let exact = p.exact_field().unwrap();
        let s1 = SubdomainSolver::new(&p, Side::Omega1).unwrap();
        let iface = exact.column(s1.last_column()).to_vec();
        let f = s1.solve(&iface).unwrap();
        for i in 0..f.nx() {
            for j in 0..f.ny() {
                assert!((f.get(i, j) - exact.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_interfaces_give_discretization_error() {
        let p = PoissonProblem::reference();
        let exact = p.exact_field().unwrap();
        let s2 = SubdomainSolver::new(&p, Side::Omega2).unwrap();
        let f = s2.solve(exact.column(s2.first_column())).unwrap();
        let mut err = 0.0f64;
        for i in 0..f.nx() {
            for j in 0..f.ny() {
                err = err.max((f.get(i, j) - exact.get(i + s2.first_column(), j)).abs());
            }
        }
        assert!(err > 0.0 && err < 5e-5, "{err}");
        // interface and boundary are imposed exactly
        assert_eq!(f.column(0)[5], exact.get(s2.first_column(), 5));
        assert_eq!(f.column(f.nx() - 1), exact.column(40));
    }

    #[test]
    fn subdomain_residual_is_small() {
        let p = PoissonProblem::reference();
        let iface: Vec<f64> = (0..21).map(|j| (j as f64 * 0.37).sin()).collect();
        let s1 = SubdomainSolver::new(&p, Side::Omega1).unwrap();
        let f = s1.solve(&iface).unwrap();
        let dx = p.grid.x.spacing();
        let dy = p.grid.y.spacing();
        for i in 1..f.nx() - 1 {
            for j in 1..f.ny() - 1 {
                let lap = (f.get(i + 1, j) - 2.0 * f.get(i, j) + f.get(i - 1, j)) / (dx * dx)
                    + (f.get(i, j + 1) - 2.0 * f.get(i, j) + f.get(i, j - 1)) / (dy * dy);
                let (x, y) = p.grid.node(i, j);
                assert!((lap - poisson_source(x, y)).abs() < 1e-10);
            }
        }
        assert_eq!(&f.column(20)[1..20], &iface[1..20]);
    }

    #[test]
    fn wrong_interface_length() {
        let p = PoissonProblem::reference();
        assert!(solve_poisson_subdomain(&p, Side::Omega1, &[0.0; 5]).is_err());
    }

    #[test]
    fn infinite_tolerance_single_iteration() {
        let p = PoissonProblem::reference();
        let r = classic_schwarz_poisson(&p, f64::INFINITY, 10, SchwarzMode::Additive).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn linear_solution_with_consistent_start_converges_fast() {
        let p = PoissonProblem {
            source: |_, _| 0.0,
            boundary: |x, _| x,
            exact: Some(|x, _| x),
            initial_guess: InitialGuess::BoundaryExtension,
            ..PoissonProblem::unit_square(11, 11, 6, 1).unwrap()
        };
        for mode in [SchwarzMode::Additive, SchwarzMode::Multiplicative] {
            let r = classic_schwarz_poisson(&p, 1e-10, 50, mode).unwrap();
            assert!(r.converged && r.iterations <= 3, "{mode:?}: {}", r.iterations);
        }
    }

    #[test]
    fn training_set_shapes() {
        let p = PoissonProblem::reference();
        let (rec, hist) =
            classic_schwarz_poisson_traced(&p, 1e-6, 500, SchwarzMode::Multiplicative).unwrap();
        let data = build_poisson_training_set(&p, &hist).unwrap();
        assert_eq!(data.len(), rec.iterations);
        assert_eq!(data.input_dim(), 2 * 21 + 2 * 6);
        assert_eq!(data.output_dim(), 42);
        let last = data.targets().last().unwrap();
        let end = hist.last().unwrap();
        assert_eq!(&last[..21], end.u1.column(20));
        assert_eq!(&last[21..], end.u2.column(0));
        // Ω2 wins on the overlap of the merged field
        assert_eq!(rec.field.column(20), end.u2.column(1));
        assert!(build_poisson_training_set(&p, &[]).is_err());
    }

    #[test]
    fn non_default_overlap_rejected_for_surrogate() {
        let p = PoissonProblem {
            overlap: 4,
            ..PoissonProblem::reference()
        };
        let (_, hist) = classic_schwarz_poisson_traced(&p, 1e-4, 500, SchwarzMode::Additive).unwrap();
        assert!(build_poisson_training_set(&p, &hist).is_err());
    }
}
