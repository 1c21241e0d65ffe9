use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::Rng;

use super::grid::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Supported Lebesgue exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lp {
    L1,
    L2,
    L4,
    Inf,
}

impl Lp {
    /// Parses the numeric exponent; anything outside {1, 2, 4, ∞} is refused.
    pub fn from_exponent(p: f64) -> Result<Lp> {
        match p {
            p if p == 1.0 => Ok(Lp::L1),
            p if p == 2.0 => Ok(Lp::L2),
            p if p == 4.0 => Ok(Lp::L4),
            p if p.is_infinite() && p > 0.0 => Ok(Lp::Inf),
            _ => Err(Error::config(format!(
                "unsupported Lebesgue exponent p = {p}; expected 1, 2, 4 or inf"
            ))),
        }
    }

    pub fn exponent(self) -> f64 {
        match self {
            Lp::L1 => 1.0,
            Lp::L2 => 2.0,
            Lp::L4 => 4.0,
            Lp::Inf => f64::INFINITY,
        }
    }
}

/// A real scalar field on a periodic grid, stored by its half spectrum.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    spec: Array2<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: grid.clone(),
            spec: Array2::zeros(grid.spectral_shape()),
        }
    }

    /// Forward transform of physical samples.
    pub fn from_physical(grid: &Arc<Grid>, phys: &Array2<f64>) -> Result<Field> {
        let n = grid.n();
        if phys.dim() != (n, n) {
            return Err(Error::config(format!(
                "physical array has shape {:?}, grid expects ({n}, {n})",
                phys.dim()
            )));
        }
        Ok(Field {
            grid: grid.clone(),
            spec: grid.forward(phys),
        })
    }

    /// Samples `f(x, y)` at the grid points and transforms.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let phys = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
            f(grid.coord(i), grid.coord(j))
        });
        Field {
            grid: grid.clone(),
            spec: grid.forward(&phys),
        }
    }

    /// Wraps spectral coefficients. The caller is responsible for the
    /// conjugate symmetry of the `q = 0` and `q = n/2` rows.
    pub fn from_spectral(grid: &Arc<Grid>, spec: Array2<Complex64>) -> Result<Field> {
        if spec.dim() != grid.spectral_shape() {
            return Err(Error::config(format!(
                "spectral array has shape {:?}, grid expects {:?}",
                spec.dim(),
                grid.spectral_shape()
            )));
        }
        Ok(Field {
            grid: grid.clone(),
            spec,
        })
    }

    /// Random real field whose modes satisfy `|index| ≤ band` on both axes.
    /// The result is scaled to root-mean-square value `amplitude` and has zero mean.
    pub fn random_bandlimited<R: Rng>(
        grid: &Arc<Grid>,
        band: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Result<Field> {
        let n = grid.n();
        if band == 0 || 2 * band >= n {
            return Err(Error::config(format!(
                "band {band} must lie in 1..{} for n = {n}",
                n / 2
            )));
        }
        let mut spec = Array2::<Complex64>::zeros(grid.spectral_shape());
        for q in 0..=band {
            for p in 0..n {
                if grid.mode_index(p).unsigned_abs() as usize > band {
                    continue;
                }
                let re: f64 = rng.random_range(-1.0..1.0);
                let im: f64 = rng.random_range(-1.0..1.0);
                spec[[q, p]] = Complex64::new(re, im);
            }
        }
        spec[[0, 0]] = Complex64::new(0.0, 0.0);
        // Row q = 0 must be Hermitian in p for a real field.
        for p in 1..n / 2 {
            spec[[0, n - p]] = spec[[0, p]].conj();
        }
        let mut field = Field {
            grid: grid.clone(),
            spec,
        };
        let rms = field.l2_spectral() / grid.l();
        if rms > 0.0 {
            field.scale_mut(amplitude / rms);
        }
        Ok(field)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn spec(&self) -> &Array2<Complex64> {
        &self.spec
    }

    pub fn spec_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.spec
    }

    pub fn into_spec(self) -> Array2<Complex64> {
        self.spec
    }

    /// Inverse transform to physical samples.
    pub fn to_physical(&self) -> Array2<f64> {
        self.grid.inverse(&self.spec)
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "grid mismatch: {:?} vs {:?}",
                self.grid, other.grid
            )))
        }
    }

    /// The `(0,0)` coefficient, equal to `n² · mean`.
    pub fn zero_mode(&self) -> f64 {
        self.spec[[0, 0]].re
    }

    pub fn mean(&self) -> f64 {
        let n = self.grid.n() as f64;
        self.zero_mode() / (n * n)
    }

    /// `∫ f` over the box.
    pub fn integral(&self) -> f64 {
        self.mean() * self.grid.l() * self.grid.l()
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.spec.mapv_inplace(|c| c * s);
    }

    pub fn scaled(&self, s: f64) -> Field {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &Field) {
        Zip::from(&mut self.spec)
            .and(&other.spec)
            .for_each(|a, &b| *a += b * s);
    }

    /// Multiplies each mode by `symbol(kx, ky)`.
    pub fn apply_symbol(&self, symbol: impl Fn(f64, f64) -> Complex64) -> Field {
        let g = &self.grid;
        let mut out = self.clone();
        for ((q, p), c) in out.spec.indexed_iter_mut() {
            *c *= symbol(g.kx()[p], g.ky()[q]);
        }
        out
    }

    /// `∂^order f / ∂axis^order` by spectral multiplication with `(i k)^order`.
    ///
    /// Odd orders zero the Nyquist mode of the differentiated axis, whose
    /// derivative has no real-valued representation.
    pub fn deriv(&self, axis: Axis, order: u32) -> Field {
        let g = &self.grid;
        let n = g.n();
        let mut out = self.clone();
        if order == 0 {
            return out;
        }
        let ik = |k: f64| Complex64::new(0.0, k).powu(order);
        for ((q, p), c) in out.spec.indexed_iter_mut() {
            let (k, nyquist) = match axis {
                Axis::X => (g.kx()[p], p == n / 2),
                Axis::Y => (g.ky()[q], q == n / 2),
            };
            if nyquist && order % 2 == 1 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= ik(k);
            }
        }
        out
    }

    pub fn dx(&self) -> Field {
        self.deriv(Axis::X, 1)
    }

    pub fn dy(&self) -> Field {
        self.deriv(Axis::Y, 1)
    }

    pub fn laplacian(&self) -> Field {
        let g = self.grid.clone();
        let mut out = self.clone();
        for ((q, p), c) in out.spec.indexed_iter_mut() {
            *c *= -g.k2(q, p);
        }
        out
    }

    /// Mean-free inverse of the Laplacian.
    ///
    /// Fails when the zero mode exceeds `1e-10` of the largest coefficient.
    pub fn inv_laplacian(&self) -> Result<Field> {
        let zero = self.spec[[0, 0]].norm();
        let scale = self.spec.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        if zero > 1e-10 * scale {
            return Err(Error::Precondition(format!(
                "inverse Laplacian needs a mean-free field; zero mode magnitude {zero:e}"
            )));
        }
        let g = self.grid.clone();
        let mut out = self.clone();
        for ((q, p), c) in out.spec.indexed_iter_mut() {
            if q == 0 && p == 0 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c /= -g.k2(q, p);
            }
        }
        Ok(out)
    }

    /// Zeroes every mode outside the two-thirds band.
    pub fn dealias_mut(&mut self) {
        Zip::from(&mut self.spec)
            .and(self.grid.dealias_mask())
            .for_each(|c, &keep| {
                if !keep {
                    *c = Complex64::new(0.0, 0.0);
                }
            });
    }

    /// Rectangle-rule `L^p` norm of the physical samples.
    pub fn lp_norm(&self, p: Lp) -> f64 {
        lp_of_samples(&self.to_physical(), p, self.grid.dx())
    }

    /// `L^2` norm from the spectral coefficients (Parseval).
    pub fn l2_spectral(&self) -> f64 {
        self.weighted_spectral_sum(|_| 1.0).sqrt()
    }

    /// Homogeneous Sobolev seminorm `‖ |k|^s f̂ ‖`, for `s` in `0..=4`.
    pub fn sobolev_seminorm(&self, s: u32) -> Result<f64> {
        if s > 4 {
            return Err(Error::config(format!("Sobolev order {s} exceeds 4")));
        }
        Ok(self.weighted_spectral_sum(|k2| k2.powi(s as i32)).sqrt())
    }

    /// `Σ w(|k|²) |f̂|²` normalized so that `w ≡ 1` gives `∫ f²`.
    fn weighted_spectral_sum(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let mut total = 0.0;
        for ((q, p), c) in self.spec.indexed_iter() {
            let mult = if q == 0 || q == n / 2 { 1.0 } else { 2.0 };
            total += mult * weight(g.k2(q, p)) * c.norm_sqr();
        }
        let n2 = (n * n) as f64;
        total * g.l() * g.l() / (n2 * n2)
    }

    /// `∫ self · other` from spectral coefficients.
    pub fn inner(&self, other: &Field) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let mut total = 0.0;
        for ((q, _), (a, b)) in self.spec.indexed_iter().map(|(i, a)| (i, (a, &other.spec[i]))) {
            let mult = if q == 0 || q == n / 2 { 1.0 } else { 2.0 };
            total += mult * (a * b.conj()).re;
        }
        let n2 = (n * n) as f64;
        total * g.l() * g.l() / (n2 * n2)
    }
}

/// Rectangle-rule norm of physical samples with spacing `dx`.
pub fn lp_of_samples(phys: &Array2<f64>, p: Lp, dx: f64) -> f64 {
    let area = dx * dx;
    match p {
        Lp::L1 => area * phys.iter().map(|v| v.abs()).sum::<f64>(),
        Lp::L2 => (area * phys.iter().map(|v| v * v).sum::<f64>()).sqrt(),
        Lp::L4 => (area * phys.iter().map(|v| (v * v) * (v * v)).sum::<f64>()).powf(0.25),
        Lp::Inf => phys.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    }
}

/// `L^p` norm of the pointwise Euclidean magnitude of a vector field given by samples.
pub fn lp_of_magnitude(components: &[&Array2<f64>], p: Lp, dx: f64) -> f64 {
    let first = components[0];
    let mag = Array2::from_shape_fn(first.dim(), |idx| {
        components.iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt()
    });
    lp_of_samples(&mag, p, dx)
}

impl Add<&Field> for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&Field> for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl AddAssign<&Field> for Field {
    fn add_assign(&mut self, rhs: &Field) {
        self.axpy(1.0, rhs);
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scaled(rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scaled(-1.0)
    }
}
