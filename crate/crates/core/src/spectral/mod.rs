//! Periodic-box Fourier discretization.
//!
//! Transforms are unnormalized forward and divide by `n²` on the inverse.
//! Every norm is computed so that it approximates the continuum integral
//! over the box, independent of that convention.

mod bracket;
mod field;
mod grid;
pub mod identities;

pub use bracket::{bracket_of_gradients, poisson_bracket, Gradient};
pub(crate) use bracket::dealiased;
pub use field::{lp_of_magnitude, lp_of_samples, Axis, Field, Lp};
pub use grid::{Grid, DEFAULT_BOX};
