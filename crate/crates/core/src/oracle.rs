//! Closed-form references used to validate the solver: the heat kernel, the
//! heat semigroup, and a brute-force bracket built on direct summation.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid};

/// Largest grid the brute-force bracket accepts.
pub const BRUTE_MAX_N: usize = 32;

/// A heat kernel of the given mass, evaluated at time `t` about `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub t: f64,
    pub center: [f64; 2],
    pub mass: f64,
}

impl KernelParams {
    /// Kernel centered in the box.
    pub fn centered(grid: &Grid, t: f64, mass: f64) -> KernelParams {
        KernelParams {
            t,
            center: grid.center(),
            mass,
        }
    }

    /// Diffusion length `√(4t)`.
    pub fn width(&self) -> f64 {
        (4.0 * self.t).sqrt()
    }
}

/// `Γ(t, x) = exp(−|x|²/4t) / 4πt`.
pub fn gamma(t: f64, r2: f64) -> f64 {
    (-r2 / (4.0 * t)).exp() / (4.0 * PI * t)
}

/// Displacement from `c` to `x` on a circle of length `l`, mapped to `[−l/2, l/2)`.
fn nearest_image(x: f64, c: f64, l: f64) -> f64 {
    let d = x - c;
    d - l * (d / l + 0.5).floor()
}

/// Samples `mass·Γ(t, x − center)` using the nearest periodic image.
///
/// When the kernel is too wide for the box (`√(4t) ≥ l/4`) a warning with
/// the measured tail mass is logged; the samples are still returned.
pub fn heat_kernel(grid: &Arc<Grid>, params: &KernelParams) -> Result<Field> {
    if !(params.t > 0.0 && params.t.is_finite()) {
        return Err(Error::Precondition(format!(
            "heat kernel needs t > 0, got {}",
            params.t
        )));
    }
    let l = grid.l();
    let [cx, cy] = params.center;
    let t = params.t;
    let m = params.mass;
    let field = Field::from_fn(grid, |x, y| {
        let dx = nearest_image(x, cx, l);
        let dy = nearest_image(y, cy, l);
        m * gamma(t, dx * dx + dy * dy)
    });
    if params.width() >= l / 4.0 {
        log::warn!(
            "heat kernel at t = {t} has width {:.4} >= l/4 = {:.4}; tail mass outside the box is {:.3e}",
            params.width(),
            l / 4.0,
            tail_mass_fraction(l, t)
        );
    }
    Ok(field)
}

/// Fraction of a unit kernel's mass lying outside the square `[−l/2, l/2)²`.
pub fn tail_mass_fraction(l: f64, t: f64) -> f64 {
    let inside = libm::erf(0.5 * l / (4.0 * t).sqrt());
    1.0 - inside * inside
}

/// Exact heat semigroup on the torus: each mode is multiplied by `exp(−|k|²t)`.
pub fn heat_evolve(f0: &Field, t: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("heat_evolve needs t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(f0.clone());
    }
    let grid = f0.grid();
    let mut spec = f0.spec().clone();
    for ((q, p), c) in spec.indexed_iter_mut() {
        *c *= (-grid.k2(q, p) * t).exp();
    }
    Field::from_spectral(grid, spec)
}

/// Signed wavenumber index of storage slot `m`, or 0 for the Nyquist slot
/// when `odd` is set.
fn wrapped(m: usize, n: usize, odd: bool) -> f64 {
    if 2 * m == n {
        if odd {
            0.0
        } else {
            (n / 2) as f64
        }
    } else if 2 * m < n {
        m as f64
    } else {
        m as f64 - n as f64
    }
}

/// Full complex 2-D DFT by direct summation; `sign` is the exponent sign.
fn direct_dft(data: &Array2<Complex64>, sign: f64) -> Array2<Complex64> {
    let n = data.nrows();
    let tw: Vec<Complex64> = (0..n)
        .map(|m| Complex64::from_polar(1.0, sign * 2.0 * PI * m as f64 / n as f64))
        .collect();
    Array2::from_shape_fn((n, n), |(a, b)| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += data[[i, j]] * tw[(a * i + b * j) % n];
            }
        }
        acc
    })
}

/// Gradient of physical samples using direct-summation transforms.
fn brute_gradient(phys: &Array2<f64>, l: f64) -> (Array2<f64>, Array2<f64>) {
    let n = phys.nrows();
    let hat = direct_dft(&phys.mapv(|v| Complex64::new(v, 0.0)), -1.0);
    let k0 = 2.0 * PI / l;
    let i = Complex64::new(0.0, 1.0);
    let gx = Array2::from_shape_fn((n, n), |(a, b)| hat[[a, b]] * i * k0 * wrapped(a, n, true));
    let gy = Array2::from_shape_fn((n, n), |(a, b)| hat[[a, b]] * i * k0 * wrapped(b, n, true));
    let norm = 1.0 / (n * n) as f64;
    (
        direct_dft(&gx, 1.0).mapv(|c| c.re * norm),
        direct_dft(&gy, 1.0).mapv(|c| c.re * norm),
    )
}

/// `[f, g]` from O(n⁴) direct transforms and pointwise products, without
/// dealiasing. Meaningful only for band-limited inputs where no aliasing occurs.
pub fn brute_bracket(f: &Field, g: &Field) -> Result<Field> {
    let grid = f.grid();
    if !grid.same_as(g.grid()) {
        return Err(Error::config("brute_bracket operands live on different grids"));
    }
    if grid.n() > BRUTE_MAX_N {
        return Err(Error::config(format!(
            "brute_bracket refuses n = {} (limit {BRUTE_MAX_N})",
            grid.n()
        )));
    }
    let (fx, fy) = brute_gradient(&f.to_physical(), grid.l());
    let (gx, gy) = brute_gradient(&g.to_physical(), grid.l());
    let prod = &fx * &gy - &fy * &gx;
    Field::from_physical(grid, &prod)
}

/// Brute-force gradient of a field, exposed for cross-checks of composite terms.
pub fn brute_derivatives(f: &Field) -> Result<(Array2<f64>, Array2<f64>)> {
    let grid = f.grid();
    if grid.n() > BRUTE_MAX_N {
        return Err(Error::config(format!(
            "brute-force derivatives refuse n = {} (limit {BRUTE_MAX_N})",
            grid.n()
        )));
    }
    Ok(brute_gradient(&f.to_physical(), grid.l()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{poisson_bracket, Lp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, l: f64) -> Arc<Grid> {
        Grid::new(n, l).unwrap()
    }

    #[test]
    fn kernel_center_value_and_mass() {
        let g = grid(128, 32.0 * PI);
        let k = heat_kernel(&g, &KernelParams::centered(&g, 1.0, 1.0)).unwrap();
        let peak = k.lp_norm(Lp::Inf);
        assert!((peak - 0.079_577_471_545_947_67).abs() < 1e-12, "{peak}");
        assert!((k.integral() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kernel_semigroup_via_spectral_convolution() {
        let g = grid(128, 32.0 * PI);
        let t = 2.0;
        let k1 = heat_kernel(&g, &KernelParams::centered(&g, t, 1.0)).unwrap();
        let k2 = heat_kernel(&g, &KernelParams::centered(&g, 2.0 * t, 1.0)).unwrap();
        let evolved = heat_evolve(&k1, t).unwrap();
        assert!((&evolved - &k2).lp_norm(Lp::Inf) < 1e-8);
    }

    #[test]
    fn kernel_rejects_nonpositive_time() {
        let g = grid(16, 2.0 * PI);
        let r = heat_kernel(&g, &KernelParams::centered(&g, 0.0, 1.0));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn wide_kernel_still_sampled() {
        let g = grid(32, 8.0);
        let k = heat_kernel(&g, &KernelParams::centered(&g, 10.0, 1.0)).unwrap();
        assert!(k.integral() < 1.0);
        assert!(tail_mass_fraction(8.0, 10.0) > 0.1);
    }

    #[test]
    fn heat_evolve_examples() {
        let g = grid(32, 2.0 * PI);
        let f = Field::from_fn(&g, |x, _| x.sin());
        let same = heat_evolve(&f, 0.0).unwrap();
        assert_eq!(same.spec(), f.spec());
        let t = 0.7;
        let evolved = heat_evolve(&f, t).unwrap();
        let exact = f.scaled((-t).exp());
        assert!((&evolved - &exact).lp_norm(Lp::Inf) < 1e-15);
        assert!(heat_evolve(&f, -1.0).is_err());
    }

    #[test]
    fn gaussian_bump_widens_to_later_kernel() {
        let g = grid(128, 32.0 * PI);
        let t0 = 2.0;
        let bump = heat_kernel(&g, &KernelParams::centered(&g, t0, 1.0)).unwrap();
        let evolved = heat_evolve(&bump, 1.0).unwrap();
        let widened = heat_kernel(&g, &KernelParams::centered(&g, t0 + 1.0, 1.0)).unwrap();
        assert!((&evolved - &widened).lp_norm(Lp::Inf) < 1e-8);
    }

    #[test]
    fn brute_bracket_matches_spectral() {
        let g = grid(16, 2.0 * PI);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let f = Field::random_bandlimited(&g, 2, 1.0, &mut rng).unwrap();
            let h = Field::random_bandlimited(&g, 2, 1.0, &mut rng).unwrap();
            let spectral = poisson_bracket(&f, &h).unwrap();
            let brute = brute_bracket(&f, &h).unwrap();
            assert!((&spectral - &brute).lp_norm(Lp::Inf) < 1e-10);
            assert!(brute_bracket(&f, &f).unwrap().lp_norm(Lp::Inf) < 1e-12);
            let rev = brute_bracket(&h, &f).unwrap();
            assert!((&brute + &rev).lp_norm(Lp::Inf) < 1e-12);
        }
    }

    #[test]
    fn brute_bracket_refuses_large_grids() {
        let g = grid(64, 2.0 * PI);
        let f = Field::zeros(&g);
        assert!(matches!(brute_bracket(&f, &f), Err(Error::Config(_))));
    }

    #[test]
    fn concentric_kernels_commute() {
        let g = grid(128, 32.0 * PI);
        let a = heat_kernel(&g, &KernelParams::centered(&g, 3.0, 1.0)).unwrap();
        let b = heat_kernel(&g, &KernelParams::centered(&g, 7.0, -2.0)).unwrap();
        assert!(poisson_bracket(&a, &b).unwrap().lp_norm(Lp::Inf) < 1e-9);
    }

    #[test]
    fn sup_norm_decays_like_inverse_time() {
        let g = grid(128, 32.0 * PI);
        let f = heat_kernel(&g, &KernelParams::centered(&g, 0.5, 1.0)).unwrap();
        let l1 = f.lp_norm(Lp::L1);
        let ts: Vec<f64> = (0..8).map(|i| 10.0 * 10f64.powf(i as f64 / 7.0)).collect();
        let pts: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| (t.ln(), (heat_evolve(&f, t).unwrap().lp_norm(Lp::Inf) / l1).ln()))
            .collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
            (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2))
        });
        let slope = sxy / sxx;
        assert!((slope + 1.0).abs() < 0.05, "{slope}");
    }
}
