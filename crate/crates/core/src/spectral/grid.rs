use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Grids at or below this size run their transforms on the calling thread.
const PARALLEL_MIN_N: usize = 64;

/// Default box side, wide enough that localized data behaves as on the plane
/// until diffusion reaches the boundary.
pub const DEFAULT_BOX: f64 = 32.0 * PI;

/// Periodic square box `[0, l)²` sampled on `n × n` points.
///
/// Physical arrays are indexed `[i, j]` for the point `(i·dx, j·dx)`.
/// Spectral arrays hold the non-redundant half of the real-to-complex
/// transform, shape `(n/2 + 1, n)`, indexed `[q, p]` with `q` the
/// non-negative y-mode and `p` the (wrapped) x-mode.
pub struct Grid {
    n: usize,
    l: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
    mode: Vec<i64>,
    dealias: Array2<bool>,
    plans: Plans,
}

struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("l", &self.l)
            .finish()
    }
}

impl Grid {
    pub fn new(n: usize, l: f64) -> Result<Arc<Grid>> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "grid size n = {n} must be a power of two and at least 8"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::config(format!("box side l = {l} must be positive")));
        }
        let dk = 2.0 * PI / l;
        let mode: Vec<i64> = (0..n)
            .map(|j| if j < n / 2 { j as i64 } else { j as i64 - n as i64 })
            .collect();
        let kx: Vec<f64> = mode.iter().map(|&m| dk * m as f64).collect();
        let ky = kx.clone();
        let nh = n / 2 + 1;
        let keep = |m: i64| 3 * m.unsigned_abs() as usize <= n;
        let dealias = Array2::from_shape_fn((nh, n), |(q, p)| keep(q as i64) && keep(mode[p]));

        let mut rplanner = RealFftPlanner::<f64>::new();
        let mut cplanner = FftPlanner::<f64>::new();
        let plans = Plans {
            r2c: rplanner.plan_fft_forward(n),
            c2r: rplanner.plan_fft_inverse(n),
            fwd: cplanner.plan_fft_forward(n),
            inv: cplanner.plan_fft_inverse(n),
        };
        Ok(Arc::new(Grid {
            n,
            l,
            kx,
            ky,
            mode,
            dealias,
            plans,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Number of stored y-modes, `n/2 + 1`.
    pub fn nh(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn spectral_shape(&self) -> (usize, usize) {
        (self.nh(), self.n)
    }

    /// Wavenumbers along x, `2π/l` times the signed mode index.
    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    /// Wavenumbers along y; only the first `n/2 + 1` are used by the half spectrum.
    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    /// Signed mode index of slot `j`.
    pub fn mode_index(&self, j: usize) -> i64 {
        self.mode[j]
    }

    pub fn dealias_mask(&self) -> &Array2<bool> {
        &self.dealias
    }

    /// `|k|²` of spectral slot `[q, p]`.
    pub fn k2(&self, q: usize, p: usize) -> f64 {
        self.kx[p] * self.kx[p] + self.ky[q] * self.ky[q]
    }

    /// Largest wavenumber kept by the two-thirds rule along one axis.
    pub fn k_max(&self) -> f64 {
        2.0 * PI / self.l * (self.n / 3) as f64
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * self.l, 0.5 * self.l]
    }

    /// Coordinate of sample `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Same box and resolution.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.l == other.l)
    }

    /// Forward transform, unnormalized: `f̂[q,p] = Σ f[i,j] e^{-i(kx_p x_i + ky_q y_j)}`.
    pub(crate) fn forward(&self, phys: &Array2<f64>) -> Array2<Complex64> {
        let n = self.n;
        let nh = self.nh();
        let mut rows = phys.as_standard_layout().into_owned();
        let mut half = vec![Complex64::new(0.0, 0.0); n * nh];
        {
            let input = rows.as_slice_mut().expect("standard layout");
            let r2c = &self.plans.r2c;
            let job = |(src, dst): (&mut [f64], &mut [Complex64]), scratch: &mut Vec<Complex64>| {
                r2c.process_with_scratch(src, dst, scratch)
                    .expect("real transform length");
            };
            let scratch_len = r2c.get_scratch_len();
            if n > PARALLEL_MIN_N {
                input
                    .par_chunks_mut(n)
                    .zip(half.par_chunks_mut(nh))
                    .for_each_init(|| vec![Complex64::default(); scratch_len], |s, pair| job(pair, s));
            } else {
                let mut s = vec![Complex64::default(); scratch_len];
                for pair in input.chunks_mut(n).zip(half.chunks_mut(nh)) {
                    job(pair, &mut s);
                }
            }
        }
        // half is [i][q]; transpose to [q][i] then transform along x.
        let mut out = vec![Complex64::new(0.0, 0.0); nh * n];
        for i in 0..n {
            for q in 0..nh {
                out[q * n + i] = half[i * nh + q];
            }
        }
        self.complex_pass(&mut out, &self.plans.fwd);
        Array2::from_shape_vec((nh, n), out).expect("spectral shape")
    }

    /// Inverse of [`Grid::forward`], including the `1/n²` factor.
    pub(crate) fn inverse(&self, spec: &Array2<Complex64>) -> Array2<f64> {
        let n = self.n;
        let nh = self.nh();
        let mut cols: Vec<Complex64> = spec.iter().copied().collect();
        self.complex_pass(&mut cols, &self.plans.inv);
        let mut half = vec![Complex64::new(0.0, 0.0); n * nh];
        for q in 0..nh {
            for i in 0..n {
                half[i * nh + q] = cols[q * n + i];
            }
        }
        let mut out = vec![0.0; n * n];
        let norm = 1.0 / (n * n) as f64;
        let c2r = &self.plans.c2r;
        let scratch_len = c2r.get_scratch_len();
        let job = |(src, dst): (&mut [Complex64], &mut [f64]), scratch: &mut Vec<Complex64>| {
            // The first and last bins of a real signal are real; drop rounding residue.
            src[0].im = 0.0;
            src[nh - 1].im = 0.0;
            c2r.process_with_scratch(src, dst, scratch)
                .expect("inverse real transform length");
            for v in dst.iter_mut() {
                *v *= norm;
            }
        };
        if n > PARALLEL_MIN_N {
            half.par_chunks_mut(nh)
                .zip(out.par_chunks_mut(n))
                .for_each_init(|| vec![Complex64::default(); scratch_len], |s, pair| job(pair, s));
        } else {
            let mut s = vec![Complex64::default(); scratch_len];
            for pair in half.chunks_mut(nh).zip(out.chunks_mut(n)) {
                job(pair, &mut s);
            }
        }
        Array2::from_shape_vec((n, n), out).expect("physical shape")
    }

    fn complex_pass(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let scratch_len = plan.get_inplace_scratch_len();
        if n > PARALLEL_MIN_N {
            data.par_chunks_mut(n).for_each_init(
                || vec![Complex64::default(); scratch_len],
                |s, row| plan.process_with_scratch(row, s),
            );
        } else {
            let mut s = vec![Complex64::default(); scratch_len];
            for row in data.chunks_mut(n) {
                plan.process_with_scratch(row, &mut s);
            }
        }
    }
}
