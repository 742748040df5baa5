//! Direct solvers for the tridiagonal and banded systems produced by the
//! finite-difference discretizations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::EmptyRegion);
        }
        for (context, len, expected) in [
            ("tridiagonal sub-diagonal", sub.len(), n - 1),
            ("tridiagonal super-diagonal", sup.len(), n - 1),
            ("tridiagonal rhs", rhs.len(), n),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found: len,
                });
            }
        }
        Ok(Self {
            sub,
            diag,
            sup,
            rhs,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A·x` for the stored matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

/// Thomas algorithm.
pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];

    let mut pivot = sys.diag[0];
    if pivot == 0.0 {
        return Err(Error::SingularSystem { row: 0 });
    }
    if n > 1 {
        c[0] = sys.sup[0] / pivot;
    }
    d[0] = sys.rhs[0] / pivot;
    for i in 1..n {
        pivot = sys.diag[i] - sys.sub[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        if i + 1 < n {
            c[i] = sys.sup[i] / pivot;
        }
        d[i] = (sys.rhs[i] - sys.sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Square matrix with `bandwidth` nonzero diagonals on each side of the main
/// diagonal, stored row by row as `2·bandwidth + 1` entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyRegion);
        }
        if bandwidth >= n.max(2) {
            return Err(Error::DimensionMismatch {
                context: "bandwidth must be below the matrix size",
                expected: n - 1,
                found: bandwidth,
            });
        }
        Ok(Self {
            n,
            bandwidth,
            band: vec![0.0; n * (2 * bandwidth + 1)],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let offset = col as isize - row as isize;
        if offset.unsigned_abs() > self.bandwidth || row >= self.n || col >= self.n {
            return None;
        }
        let width = 2 * self.bandwidth + 1;
        Some(row * width + (offset + self.bandwidth as isize) as usize)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |s| self.band[s])
    }

    /// Panics if `(row, col)` lies outside the band.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let s = self
            .slot(row, col)
            .unwrap_or_else(|| panic!("({row}, {col}) outside band {}", self.bandwidth));
        self.band[s] = value;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let bw = self.bandwidth;
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(bw);
                let hi = (i + bw).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization without pivoting; fill stays inside the band.
    pub fn factorize(&self) -> Result<BandedLu> {
        let mut lu = self.clone();
        let n = self.n;
        let bw = self.bandwidth;
        for k in 0..n {
            let pivot = lu.get(k, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem { row: k });
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let factor = lu.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                lu.set(i, k, factor);
                for j in k + 1..=last {
                    let v = lu.get(i, j) - factor * lu.get(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(BandedLu { lu })
    }
}

/// Factored banded matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.n;
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                context: "banded rhs",
                expected: n,
                found: rhs.len(),
            });
        }
        let bw = self.lu.bandwidth;
        let mut x = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut v = x[i];
            for j in lo..i {
                v -= self.lu.get(i, j) * x[j];
            }
            x[i] = v;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut v = x[i];
            for j in i + 1..=hi {
                v -= self.lu.get(i, j) * x[j];
            }
            x[i] = v / self.lu.get(i, i);
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSystem {
    pub matrix: BandedMatrix,
    pub rhs: Vec<f64>,
}

pub fn solve_banded(sys: &BandedSystem) -> Result<Vec<f64>> {
    sys.matrix.factorize()?.solve(&sys.rhs)
}
