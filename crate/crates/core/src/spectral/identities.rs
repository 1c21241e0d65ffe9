//! Self-check of the bracket's algebraic identities on random band-limited data.
//!
//! With inputs restricted to `|mode| ≤ n/6` every product below stays inside
//! the two-thirds band, so the discrete identities hold to rounding.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bracket::poisson_bracket;
use super::field::{Field, Lp};
use super::grid::Grid;
use crate::error::Result;

/// One identity with its worst observed violation.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub max_violation: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.max_violation <= self.tolerance
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub n: usize,
    pub pairs: usize,
    pub seed: u64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(IdentityCheck::passed)
    }
}

pub const EXACT_TOL: f64 = 1e-12;
pub const INTEGRAL_TOL: f64 = 1e-9;

fn max_abs(f: &Field) -> f64 {
    f.lp_norm(Lp::Inf)
}

/// Runs every identity on `pairs` random triples `(f, g, h)` drawn with ChaCha8 from `seed`.
pub fn run_identity_suite(n: usize, l: f64, pairs: usize, seed: u64) -> Result<IdentityReport> {
    let grid: Arc<Grid> = Grid::new(n, l)?;
    let band = (n / 6).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0_f64; 5];

    for _ in 0..pairs {
        let f = Field::random_bandlimited(&grid, band, 1.0, &mut rng)?;
        let g = Field::random_bandlimited(&grid, band, 1.0, &mut rng)?;
        let h = Field::random_bandlimited(&grid, band, 1.0, &mut rng)?;
        let fg = poisson_bracket(&f, &g)?;
        let gf = poisson_bracket(&g, &f)?;
        let ff = poisson_bracket(&f, &f)?;
        let scale = max_abs(&fg).max(f64::MIN_POSITIVE);

        // [f,g] = -[g,f]
        worst[0] = worst[0].max(max_abs(&(&fg + &gf)) / scale);
        // [f,f] = 0, relative to |∇f|²
        let grad2 = f.sobolev_seminorm(1)?.powi(2) / (grid.l() * grid.l());
        worst[1] = worst[1].max(max_abs(&ff) / grad2.max(f64::MIN_POSITIVE));

        // ∫ f [f,g] = 0
        let lhs = f.inner(&fg);
        worst[2] = worst[2].max(lhs.abs() / (f.l2_spectral() * fg.l2_spectral()));

        // ∫ f [g,h] = ∫ g [h,f]
        let gh = poisson_bracket(&g, &h)?;
        let hf = poisson_bracket(&h, &f)?;
        let a = f.inner(&gh);
        let b = g.inner(&hf);
        let norm = (f.l2_spectral() * gh.l2_spectral()).max(g.l2_spectral() * hf.l2_spectral());
        worst[3] = worst[3].max((a - b).abs() / norm);

        // Δ[f,g] = [Δf,g] + [f,Δg] + 2[f_x,g_x] + 2[f_y,g_y]
        let lhs = fg.laplacian();
        let mut rhs = poisson_bracket(&f.laplacian(), &g)?;
        rhs += &poisson_bracket(&f, &g.laplacian())?;
        rhs.axpy(2.0, &poisson_bracket(&f.dx(), &g.dx())?);
        rhs.axpy(2.0, &poisson_bracket(&f.dy(), &g.dy())?);
        worst[4] = worst[4].max(max_abs(&(&lhs - &rhs)) / max_abs(&lhs).max(f64::MIN_POSITIVE));
    }

    let names = [
        ("antisymmetry [f,g] = -[g,f]", EXACT_TOL),
        ("self bracket [f,f] = 0", EXACT_TOL),
        ("integral f[f,g] = 0", INTEGRAL_TOL),
        ("cyclic integral f[g,h] = g[h,f]", INTEGRAL_TOL),
        ("Laplacian product rule", INTEGRAL_TOL),
    ];
    let checks = names
        .iter()
        .zip(worst)
        .map(|(&(name, tolerance), max_violation)| IdentityCheck {
            name,
            max_violation,
            tolerance,
        })
        .collect();
    Ok(IdentityReport {
        n,
        pairs,
        seed,
        checks,
    })
}
