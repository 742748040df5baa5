//! Overlapping domain decomposition for a 2D Poisson problem and 1D
//! advection–diffusion, with subdomains coupled either by classic Schwarz
//! transmission or by a trained network that predicts interface values.

pub mod error;
pub mod harness;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod neural;
pub mod poisson;
pub mod advdiff;

pub use error::{Error, Result};
