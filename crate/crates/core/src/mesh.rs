//! Uniform grids, two-subdomain overlapping decompositions and the norms used
//! to report errors.
//!
//! Node indices in the public accessors of [`Decomposition`] are 1-based (`x_1 ..= x_I`).
//! The [`ZeroBased`] view is what the solvers use internally.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {n_points}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    /// Coordinate of zero-based node `i`.
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Self { x, y }
    }

    /// Coordinates of zero-based node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x.point(i), self.y.point(j))
    }
}

/// Two overlapping subdomains along one axis.
///
/// With `I` nodes, split `I'` and half width `k`:
/// Ω1 = [1, I'], Ω2 = [I'-1, I], Γ1 = I', Γ2 = I'-1 and the interface zone
/// S = [I'-k-1, I'+k].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    n_points: usize,
    split: usize,
    half_width: usize,
}

/// Zero-based node positions of a [`Decomposition`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroBased {
    pub omega1: RangeInclusive<usize>,
    pub omega2: RangeInclusive<usize>,
    pub gamma1: usize,
    pub gamma2: usize,
    pub zone: RangeInclusive<usize>,
}

impl Decomposition {
    pub fn new(n_points: usize, split: usize, half_width: usize) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::InvalidDecomposition(
                "half width k must be at least 1".into(),
            ));
        }
        if split < 2 || split > n_points {
            return Err(Error::InvalidDecomposition(format!(
                "split {split} outside grid of {n_points} nodes"
            )));
        }
        if split >= n_points {
            return Err(Error::InvalidDecomposition(format!(
                "interface Γ1 = {split} coincides with the physical boundary"
            )));
        }
        let lower = split as isize - half_width as isize - 1;
        if lower < 2 {
            return Err(Error::InvalidDecomposition(format!(
                "zone lower bound {lower} < 2"
            )));
        }
        let upper = split + half_width;
        if upper > n_points - 1 {
            return Err(Error::InvalidDecomposition(format!(
                "zone upper bound {upper} > {}",
                n_points - 1
            )));
        }
        Ok(Self {
            n_points,
            split,
            half_width,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn omega1(&self) -> RangeInclusive<usize> {
        1..=self.split
    }

    pub fn omega2(&self) -> RangeInclusive<usize> {
        self.split - 1..=self.n_points
    }

    pub fn gamma1(&self) -> usize {
        self.split
    }

    pub fn gamma2(&self) -> usize {
        self.split - 1
    }

    pub fn zone(&self) -> RangeInclusive<usize> {
        self.split - self.half_width - 1..=self.split + self.half_width
    }

    /// Number of nodes across the zone, `2k + 2`.
    pub fn zone_width(&self) -> usize {
        2 * self.half_width + 2
    }

    pub fn zero_based(&self) -> ZeroBased {
        let shift = |r: RangeInclusive<usize>| r.start() - 1..=r.end() - 1;
        ZeroBased {
            omega1: shift(self.omega1()),
            omega2: shift(self.omega2()),
            gamma1: self.gamma1() - 1,
            gamma2: self.gamma2() - 1,
            zone: shift(self.zone()),
        }
    }
}

/// `max |a_i - b_i|` over the indices in `region`.
pub fn inf_norm_diff<I>(a: &[f64], b: &[f64], region: I) -> Result<f64>
where
    I: IntoIterator<Item = usize>,
{
    let mut max: Option<f64> = None;
    for i in region {
        let (Some(x), Some(y)) = (a.get(i), b.get(i)) else {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: a.len().min(b.len()),
            });
        };
        let d = (x - y).abs();
        max = Some(max.map_or(d, |m| m.max(d)));
    }
    max.ok_or(Error::EmptyRegion)
}

/// Mean squared componentwise difference.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "mse",
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_points_are_exact_from_index() {
        let g = Grid1D::new(-1.0, 1.0, 41).unwrap();
        assert_eq!(g.spacing(), 0.05);
        assert_eq!(g.point(0), -1.0);
        assert_eq!(g.point(40), 1.0);
        assert_eq!(g.point(20), -1.0 + 20.0 * 0.05);
        assert!(Grid1D::new(1.0, 1.0, 5).is_err());
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn default_poisson_decomposition() {
        let d = Decomposition::new(41, 21, 2).unwrap();
        assert_eq!(d.omega1(), 1..=21);
        assert_eq!(d.omega2(), 20..=41);
        assert_eq!(d.gamma1(), 21);
        assert_eq!(d.gamma2(), 20);
        assert_eq!(d.zone(), 18..=23);
        assert_eq!(d.zone_width(), 6);
        let z = d.zero_based();
        assert_eq!(z.gamma1, 20);
        assert_eq!(z.zone, 17..=22);
    }

    #[test]
    fn interface_on_physical_boundary_rejected() {
        let err = Decomposition::new(21, 21, 2).unwrap_err();
        assert!(err.to_string().contains("physical boundary"), "{err}");
    }

    #[test]
    fn zone_below_two_rejected() {
        let err = Decomposition::new(41, 3, 2).unwrap_err();
        assert!(err.to_string().contains("lower bound 0"), "{err}");
    }

    #[test]
    fn zone_touching_right_boundary_rejected() {
        assert!(Decomposition::new(41, 39, 2).is_err());
        assert!(Decomposition::new(41, 38, 2).is_ok());
    }

    #[test]
    fn norm_examples() {
        let a = [0.3, -1.0, 2.0, 4.0];
        assert_eq!(inf_norm_diff(&a, &a, 0..4).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 0.25).collect();
        assert!((inf_norm_diff(&a, &b, 1..3).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            inf_norm_diff(&a, &b, 0..0),
            Err(Error::EmptyRegion)
        ));
        assert!(inf_norm_diff(&a, &b, [7]).is_err());

        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn norms_match_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut expected = 0.0f64;
        for i in 0..5 {
            if (a[i] - b[i]).abs() > expected {
                expected = (a[i] - b[i]).abs();
            }
        }
        assert_eq!(inf_norm_diff(&a, &b, 0..5).unwrap(), expected);

        let a: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut sum = 0.0;
        for i in 0..7 {
            sum += (a[i] - b[i]).powi(2);
        }
        assert!((mse(&a, &b).unwrap() - sum / 7.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn inf_norm_is_symmetric_and_satisfies_triangle(
            v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 1..20)
        ) {
            let a: Vec<f64> = v.iter().map(|t| t.0).collect();
            let b: Vec<f64> = v.iter().map(|t| t.1).collect();
            let c: Vec<f64> = v.iter().map(|t| t.2).collect();
            let n = a.len();
            let ab = inf_norm_diff(&a, &b, 0..n).unwrap();
            prop_assert_eq!(ab, inf_norm_diff(&b, &a, 0..n).unwrap());
            prop_assert!(ab >= 0.0);
            let ac = inf_norm_diff(&a, &c, 0..n).unwrap();
            let cb = inf_norm_diff(&c, &b, 0..n).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn interfaces_always_inside_zone(n in 8usize..200, k in 1usize..6, frac in 0.0f64..1.0) {
            let lo = k + 3;
            let hi = n.saturating_sub(k + 1);
            prop_assume!(lo <= hi);
            let split = lo + ((hi - lo) as f64 * frac) as usize;
            let d = Decomposition::new(n, split, k).unwrap();
            prop_assert!(d.zone().contains(&d.gamma1()));
            prop_assert!(d.zone().contains(&d.gamma2()));
            prop_assert!(*d.zone().start() >= 2 && *d.zone().end() <= n - 1);
            let (o1, o2) = (d.omega1(), d.omega2());
            let overlap: Vec<usize> = o1.clone().filter(|i| o2.contains(i)).collect();
            prop_assert_eq!(overlap, vec![split - 1, split]);
        }
    }
}
