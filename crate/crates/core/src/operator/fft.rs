use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::check_compatible;
use crate::error::Result;
use crate::grid::Grid;
use crate::kernel::Kernel;

/// Smallest `m >= n` whose prime factors are all in {2, 3, 5, 7}.
pub(crate) fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5, 7] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// Cyclic FFT convolution on a padded lattice.
///
/// Open grids pad each axis to at least `n + radius` so the wrap-around of the
/// centred kernel lands in the zero padding, which makes the cyclic result
/// equal to the truncated convolution. Periodic grids use length `n` exactly.
#[derive(Clone)]
pub struct FftConvolver {
    n: usize,
    len: usize,
    dimension: usize,
    weight: f64,
    kernel_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FftConvolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftConvolver")
            .field("n", &self.n)
            .field("len", &self.len)
            .field("dimension", &self.dimension)
            .finish()
    }
}

impl FftConvolver {
    pub fn new(kernel: &Kernel, grid: &Grid) -> Result<Self> {
        check_compatible(kernel, grid)?;
        let n = grid.points_per_axis();
        let r = kernel.radius();
        let len = if grid.is_periodic() {
            n
        } else {
            fast_len(n + r)
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let dimension = grid.dimension();

        let size = len.pow(dimension as u32);
        let mut kernel_hat = vec![Complex64::new(0.0, 0.0); size];
        let ri = r as i64;
        let wrap = |k: i64| k.rem_euclid(len as i64) as usize;
        if dimension == 1 {
            for k in -ri..=ri {
                kernel_hat[wrap(k)] += kernel.tap(k);
            }
        } else {
            for ky in -ri..=ri {
                for kx in -ri..=ri {
                    kernel_hat[wrap(ky) * len + wrap(kx)] += kernel.tap2(kx, ky);
                }
            }
        }
        let mut conv = Self {
            n,
            len,
            dimension,
            weight: grid.cell_volume(),
            kernel_hat: Vec::new(),
            forward,
            inverse,
        };
        conv.transform(&mut kernel_hat, true);
        conv.kernel_hat = kernel_hat;
        Ok(conv)
    }

    /// Padded transform length per axis.
    pub fn padded_len(&self) -> usize {
        self.len
    }

    fn transform(&self, buf: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.forward } else { &self.inverse };
        if self.dimension == 1 {
            plan.process(buf);
        } else {
            // rows, then columns through a transpose
            plan.process(buf);
            let len = self.len;
            let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
            transpose(buf, &mut t, len);
            plan.process(&mut t);
            transpose(&t, buf, len);
        }
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let (n, len) = (self.n, self.len);
        let mut buf = vec![Complex64::new(0.0, 0.0); len.pow(self.dimension as u32)];
        if self.dimension == 1 {
            for (b, &v) in buf.iter_mut().zip(u) {
                b.re = v;
            }
        } else {
            for iy in 0..n {
                for ix in 0..n {
                    buf[iy * len + ix].re = u[iy * n + ix];
                }
            }
        }
        self.transform(&mut buf, true);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.transform(&mut buf, false);
        let scale = self.weight / (buf.len() as f64);
        if self.dimension == 1 {
            for (o, b) in out.iter_mut().zip(&buf) {
                *o = b.re * scale;
            }
        } else {
            for iy in 0..n {
                for ix in 0..n {
                    out[iy * n + ix] = buf[iy * len + ix].re * scale;
                }
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], len: usize) {
    for i in 0..len {
        for j in 0..len {
            dst[j * len + i] = src[i * len + j];
        }
    }
}
