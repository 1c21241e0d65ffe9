use ndarray::{Array2, Zip};
use num_complex::Complex64;

use super::field::Field;
use crate::error::Result;

/// Physical-space gradient of a field, reused across several brackets.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl Gradient {
    pub fn of(f: &Field) -> Gradient {
        Gradient {
            x: f.dx().to_physical(),
            y: f.dy().to_physical(),
        }
    }

    /// Pointwise `|∇f|`.
    pub fn magnitude(&self) -> Array2<f64> {
        let mut out = self.x.clone();
        Zip::from(&mut out)
            .and(&self.y)
            .for_each(|a, &b| *a = a.hypot(b));
        out
    }
}

/// `[f, g] = f_x g_y − f_y g_x`, dealiased.
pub fn poisson_bracket(f: &Field, g: &Field) -> Result<Field> {
    f.check_same_grid(g)?;
    Ok(bracket_of_gradients(f, &Gradient::of(f), &Gradient::of(g)))
}

/// Bracket from precomputed gradients; `like` supplies the grid.
///
/// The product is formed in physical space, transformed, truncated to the
/// two-thirds band, and its zero mode set to zero: the bracket is a
/// divergence, so its integral vanishes.
pub fn bracket_of_gradients(like: &Field, f: &Gradient, g: &Gradient) -> Field {
    let mut prod = Array2::<f64>::zeros(f.x.dim());
    Zip::from(&mut prod)
        .and(&f.x)
        .and(&f.y)
        .and(&g.x)
        .and(&g.y)
        .for_each(|out, &fx, &fy, &gx, &gy| *out = fx * gy - fy * gx);
    let grid = like.grid();
    let mut out = Field::from_physical(grid, &prod).expect("gradient shape matches grid");
    out.dealias_mut();
    out.spec_mut()[[0, 0]] = Complex64::new(0.0, 0.0);
    out
}

/// Transforms a physical product back to spectral space and dealiases it.
pub(crate) fn dealiased(like: &Field, prod: &Array2<f64>) -> Field {
    let mut out = Field::from_physical(like.grid(), prod).expect("product shape matches grid");
    out.dealias_mut();
    out
}
