//! The truncated convolution operator `T u = (K * ũ)|_Ω`, where `ũ` is the
//! zero extension of `u` (or its periodic extension on a torus grid).
//!
//! Three routes compute the same thing: direct summation (the reference),
//! zero-padded FFT convolution, and an explicit dense matrix `H(x, y) = K(x - y)`.
//! All carry the quadrature weight `h^d`.

mod fft;
mod matrix;

pub use fft::FftConvolver;
pub use matrix::{build_operator_matrix, build_operator_matrix_with_cap, OperatorMatrix, DEFAULT_MATRIX_CAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::par;

/// Which algorithm [`Operator`] uses for `T u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    Direct,
    Fft,
    /// Direct summation for small tap counts, FFT otherwise. The choice only
    /// depends on the lattice and kernel sizes.
    #[default]
    Auto,
}

/// Tap-work threshold (taps per output) above which `Auto` switches to FFT.
const AUTO_FFT_TAPS: usize = 96;

pub(crate) fn check_compatible(kernel: &Kernel, grid: &Grid) -> Result<()> {
    if kernel.dimension() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: grid.dimension(),
            got: kernel.dimension(),
        });
    }
    if (kernel.spacing() - grid.spacing()).abs() > 1e-12 * grid.spacing() {
        return Err(Error::SpacingMismatch {
            kernel: kernel.spacing(),
            grid: grid.spacing(),
        });
    }
    if grid.is_periodic() && kernel.width() > grid.points_per_axis() {
        return Err(Error::invalid(format!(
            "kernel window of {} taps does not fit a periodic axis of {} points",
            kernel.width(),
            grid.points_per_axis()
        )));
    }
    Ok(())
}

/// A kernel bound to a lattice, ready to be applied repeatedly.
#[derive(Debug, Clone)]
pub struct Operator {
    kernel: Kernel,
    grid: Grid,
    fft: Option<FftConvolver>,
}

impl Operator {
    pub fn new(kernel: &Kernel, grid: &Grid) -> Result<Self> {
        Self::with_method(kernel, grid, ConvolutionMethod::Auto)
    }

    pub fn with_method(kernel: &Kernel, grid: &Grid, method: ConvolutionMethod) -> Result<Self> {
        check_compatible(kernel, grid)?;
        let use_fft = match method {
            ConvolutionMethod::Direct => false,
            ConvolutionMethod::Fft => true,
            ConvolutionMethod::Auto => {
                kernel.width().pow(kernel.dimension() as u32) > AUTO_FFT_TAPS
            }
        };
        let fft = if use_fft {
            Some(FftConvolver::new(kernel, grid)?)
        } else {
            None
        };
        Ok(Self {
            kernel: kernel.clone(),
            grid: *grid,
            fft,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn method(&self) -> ConvolutionMethod {
        if self.fft.is_some() {
            ConvolutionMethod::Fft
        } else {
            ConvolutionMethod::Direct
        }
    }

    /// Writes `T u` into `out`. Both slices have `grid.len()` entries.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.fft {
            Some(fft) => fft.apply_into(u, out),
            None => direct_into(&self.kernel, &self.grid, u, out),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }

    pub fn apply_field(&self, field: &Field) -> Result<Field> {
        if !field.grid().same_lattice(&self.grid) {
            return Err(Error::invalid("field lives on a different grid"));
        }
        Field::from_values(*field.grid(), self.apply(field.values()))
    }
}

/// Direct-sum `T u` (the reference route).
pub fn apply_t(kernel: &Kernel, field: &Field) -> Result<Field> {
    check_compatible(kernel, field.grid())?;
    let mut out = vec![0.0; field.len()];
    direct_into(kernel, field.grid(), field.values(), &mut out);
    Field::from_values(*field.grid(), out)
}

/// FFT-route `T u`.
pub fn apply_t_fft(kernel: &Kernel, field: &Field) -> Result<Field> {
    let conv = FftConvolver::new(kernel, field.grid())?;
    let mut out = vec![0.0; field.len()];
    conv.apply_into(field.values(), &mut out);
    Field::from_values(*field.grid(), out)
}

fn chunk_len(grid: &Grid) -> usize {
    if grid.dimension() == 1 {
        256
    } else {
        grid.points_per_axis()
    }
}

/// Direct summation, fanned out over output chunks when `parallel` is enabled.
pub fn direct_into(kernel: &Kernel, grid: &Grid, u: &[f64], out: &mut [f64]) {
    let len = chunk_len(grid);
    par::for_each_chunk(out, len, |c, chunk| {
        direct_chunk(kernel, grid, u, c * len, chunk)
    });
}

/// Direct summation on the calling thread only.
pub fn direct_into_sequential(kernel: &Kernel, grid: &Grid, u: &[f64], out: &mut [f64]) {
    let len = chunk_len(grid);
    for (c, chunk) in out.chunks_mut(len).enumerate() {
        direct_chunk(kernel, grid, u, c * len, chunk);
    }
}

/// Fills `out[m] = (T u)[start + m]`. Taps are summed in ascending offset
/// order for every output point.
fn direct_chunk(kernel: &Kernel, grid: &Grid, u: &[f64], start: usize, out: &mut [f64]) {
    let n = grid.points_per_axis() as i64;
    let r = kernel.radius() as i64;
    let w = kernel.width();
    let taps = kernel.samples();
    let weight = grid.cell_volume();
    let periodic = grid.is_periodic();
    let wrap = |j: i64| -> Option<usize> {
        if periodic {
            Some(j.rem_euclid(n) as usize)
        } else if (0..n).contains(&j) {
            Some(j as usize)
        } else {
            None
        }
    };

    if grid.dimension() == 1 {
        for (m, o) in out.iter_mut().enumerate() {
            let i = (start + m) as i64;
            let mut acc = 0.0;
            for k in -r..=r {
                if let Some(j) = wrap(i - k) {
                    acc += taps[(k + r) as usize] * u[j];
                }
            }
            *o = acc * weight;
        }
    } else {
        for (m, o) in out.iter_mut().enumerate() {
            let flat = (start + m) as i64;
            let (iy, ix) = (flat / n, flat % n);
            let mut acc = 0.0;
            for ky in -r..=r {
                let Some(jy) = wrap(iy - ky) else { continue };
                let row = &taps[(ky + r) as usize * w..(ky + r + 1) as usize * w];
                let urow = &u[jy * n as usize..(jy + 1) * n as usize];
                for kx in -r..=r {
                    if let Some(jx) = wrap(ix - kx) {
                        acc += row[(kx + r) as usize] * urow[jx];
                    }
                }
            }
            *o = acc * weight;
        }
    }
}

/// Result of checking `||T u||_inf <= ||K||_2 ||u||_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinftyBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn verify_linfty_bound(kernel: &Kernel, field: &Field) -> Result<LinftyBound> {
    let tu = apply_t(kernel, field)?;
    let lhs = tu.norm_inf();
    let rhs = kernel.l2_norm() * field.norm_l2();
    Ok(LinftyBound {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-10),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Band, KernelSpec};

    fn indicator_setup(h: f64) -> (Kernel, Field) {
        let grid = Grid::new(1, 3.0, (6.0 / h).round() as usize + 1).unwrap();
        let kernel = KernelSpec::bands(vec![Band::new(0.0, 1.0, 1.0)])
            .sample(1, grid.spacing())
            .unwrap();
        let u = Field::from_fn(grid, |x, _| if x.abs() <= 1.0 + 1e-9 { 1.0 } else { 0.0 });
        (kernel, u)
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let (k, u) = indicator_setup(0.1);
        let z = Field::zeros(*u.grid());
        assert_eq!(apply_t(&k, &z).unwrap().norm_inf(), 0.0);
    }

    #[test]
    fn indicator_overlap_matches_analytic_profile() {
        // overlap length max(0, 2 - |x|) for two unit indicators on [-1, 1]
        for h in [0.1, 0.02, 0.005] {
            let (k, u) = indicator_setup(h);
            let tu = apply_t(&k, &u).unwrap();
            let g = *u.grid();
            for (x, expect) in [(0.0, 2.0), (1.0, 1.0), (3.0, 0.0), (0.5, 1.5)] {
                let got = tu.values()[g.index_of(x)];
                assert!((got - expect).abs() <= 2.0 * h, "h={h} x={x}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn interior_constant_gives_integral() {
        let grid = Grid::new(1, 25.0, 200).unwrap();
        let spec = KernelSpec::family(
            crate::kernel::KernelFamily::K1,
            crate::kernel::KernelParams::defaults(crate::kernel::KernelFamily::K1, 1),
            1,
        )
        .unwrap();
        let k = spec.sample(1, grid.spacing()).unwrap();
        let c = 0.7;
        let u = Field::from_fn(grid, |_, _| c);
        let tu = apply_t(&k, &u).unwrap();
        let mid = grid.index_of(0.0);
        assert!((tu.values()[mid] - c * k.integral()).abs() < 1e-12);
    }

    #[test]
    fn spacing_mismatch_is_rejected() {
        let grid = Grid::new(1, 1.0, 11).unwrap();
        let k = KernelSpec::bands(vec![Band::new(0.0, 0.5, 1.0)])
            .sample(1, 0.3)
            .unwrap();
        assert!(matches!(
            apply_t(&k, &Field::zeros(grid)),
            Err(Error::SpacingMismatch { .. })
        ));
    }

    #[test]
    fn linfty_bound_on_indicator() {
        let (k, u) = indicator_setup(0.01);
        let b = verify_linfty_bound(&k, &u).unwrap();
        assert!((b.lhs - 2.0).abs() < 0.03);
        assert!(b.rhs >= 2.0 - 0.03 && b.holds);
        let z = verify_linfty_bound(&k, &Field::zeros(*u.grid())).unwrap();
        assert_eq!((z.lhs, z.rhs, z.holds), (0.0, 0.0, true));
    }

    #[test]
    fn parallel_and_sequential_direct_are_bitwise_equal() {
        let grid = Grid::new(2, 10.0, 41).unwrap();
        let k = KernelSpec::bands(vec![Band::new(0.0, 1.0, 1.0), Band::new(1.0, 2.0, -0.3)])
            .sample(2, grid.spacing())
            .unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let mut a = vec![0.0; u.len()];
        let mut b = vec![0.0; u.len()];
        direct_into(&k, &grid, &u, &mut a);
        direct_into_sequential(&k, &grid, &u, &mut b);
        assert_eq!(a, b);
    }
}
