//! Trial solutions on `[0,1] × [−1,1]` that match prescribed initial, terminal
//! and boundary values for any network.

use super::data::InputScaling;
use super::mlp::Mlp;
use crate::error::{Error, Result};

/// Values of `u` on the four sides of the space-time rectangle.
///
/// Corner values must agree between the sides that meet there.
pub trait BoundaryData {
    fn initial(&self, x: f64) -> f64;
    fn terminal(&self, x: f64) -> f64;
    fn left(&self, t: f64) -> f64;
    fn right(&self, t: f64) -> f64;
}

/// Returns `(A(t,x), t(1−t)(x+1)(x−1))`, the transfinite interpolant of the
/// boundary data and the factor multiplying the network output.
pub fn trial_parts(t: f64, x: f64, b: &dyn BoundaryData) -> (f64, f64) {
    let wl = (1.0 - x) / 2.0;
    let wr = (1.0 + x) / 2.0;
    let edge = |u_left: f64, u_right: f64| wl * u_left + wr * u_right;
    let a = edge(b.left(t), b.right(t))
        + (1.0 - t) * (b.initial(x) - edge(b.initial(-1.0), b.initial(1.0)))
        + t * (b.terminal(x) - edge(b.terminal(-1.0), b.terminal(1.0)));
    (a, t * (1.0 - t) * (x + 1.0) * (x - 1.0))
}

/// `A(t,x) + t(1−t)(x+1)(x−1)·N(t,x)`, with `N` fed the scaled pair `(t, x)`.
pub fn trial_solution(
    net: &Mlp,
    scaling: &InputScaling,
    t: f64,
    x: f64,
    b: &dyn BoundaryData,
) -> Result<f64> {
    if net.input_dim() != 2 || net.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "trial-solution network (t, x) -> N",
            expected: 2,
            found: net.input_dim(),
        });
    }
    let (a, m) = trial_parts(t, x, b);
    if m == 0.0 {
        return Ok(a);
    }
    let n = net.forward(&scaling.apply(&[t, x]))?[0];
    Ok(a + m * n)
}
