use nalgebra::{DMatrix, DVector};

use super::check_compatible;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::par;

/// Largest node count for which the dense `N x N` matrix is assembled by default.
pub const DEFAULT_MATRIX_CAP: usize = 20_000;

/// Dense `H_ij = K(x_i - x_j) * h^d` on the grid nodes.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: Grid,
    kernel: Kernel,
    entries: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(u);
        (&self.entries * v).as_slice().to_vec()
    }

    /// Largest `|H_ij - H_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst
    }
}

pub fn build_operator_matrix(kernel: &Kernel, grid: &Grid) -> Result<OperatorMatrix> {
    build_operator_matrix_with_cap(kernel, grid, DEFAULT_MATRIX_CAP)
}

pub fn build_operator_matrix_with_cap(
    kernel: &Kernel,
    grid: &Grid,
    cap: usize,
) -> Result<OperatorMatrix> {
    check_compatible(kernel, grid)?;
    let size = grid.len();
    if size > cap {
        return Err(Error::MatrixTooLarge { n: size, cap });
    }
    let n = grid.points_per_axis() as i64;
    let periodic = grid.is_periodic();
    let weight = grid.cell_volume();
    // signed axis offset between node indices, minimum image on a torus
    let offset = move |a: i64, b: i64| -> i64 {
        let d = a - b;
        if periodic {
            let m = d.rem_euclid(n);
            if m > n / 2 {
                m - n
            } else {
                m
            }
        } else {
            d
        }
    };
    let dimension = grid.dimension();
    let mut data = vec![0.0; size * size];
    // column-major: chunk j holds column j
    par::for_each_chunk(&mut data, size, |j, col| {
        let j = j as i64;
        for (i, e) in col.iter_mut().enumerate() {
            let i = i as i64;
            let v = if dimension == 1 {
                kernel.tap(offset(i, j))
            } else {
                kernel.tap2(offset(i % n, j % n), offset(i / n, j / n))
            };
            *e = v * weight;
        }
    });
    Ok(OperatorMatrix {
        grid: *grid,
        kernel: kernel.clone(),
        entries: DMatrix::from_vec(size, size, data),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::kernel::{Band, KernelSpec};
    use crate::operator::apply_t;

    #[test]
    fn three_point_hand_evaluation() {
        let grid = Grid::new(1, 1.0, 3).unwrap();
        let k = Kernel::from_samples(1, 1.0, vec![0.5, 1.0, 0.5]).unwrap();
        let m = build_operator_matrix(&k, &grid).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0]);
        assert_eq!(m.entries(), &expect);
    }

    #[test]
    fn zero_kernel_gives_zero_matrix() {
        let grid = Grid::new(2, 2.0, 5).unwrap();
        let k = Kernel::from_samples(2, 1.0, vec![0.0; 9]).unwrap();
        let m = build_operator_matrix(&k, &grid).unwrap();
        assert!(m.entries().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn symmetric_and_toeplitz() {
        let grid = Grid::new(1, 5.0, 41).unwrap();
        let k = KernelSpec::bands(vec![Band::new(0.0, 1.0, 1.0), Band::new(1.0, 2.0, -0.4)])
            .sample(1, grid.spacing())
            .unwrap();
        let m = build_operator_matrix(&k, &grid).unwrap();
        assert_eq!(m.asymmetry(), 0.0);
        let e = m.entries();
        for d in 0..41 {
            for i in 0..41 - d {
                assert_eq!(e[(i + d, i)], e[(d, 0)]);
            }
        }
    }

    #[test]
    fn matvec_matches_direct_sum_2d() {
        let grid = Grid::new(2, 3.0, 13).unwrap();
        let k = KernelSpec::bands(vec![Band::new(0.0, 0.8, 1.0), Band::new(0.8, 1.5, -0.2)])
            .sample(2, grid.spacing())
            .unwrap();
        let u = Field::from_fn(grid, |x, y| (x * 0.7).sin() + y * 0.1);
        let direct = apply_t(&k, &u).unwrap();
        let m = build_operator_matrix(&k, &grid).unwrap();
        let mv = m.matvec(u.values());
        for (a, b) in direct.values().iter().zip(&mv) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let grid = Grid::new(1, 1.0, 101).unwrap();
        let k = Kernel::from_samples(1, grid.spacing(), vec![1.0]).unwrap();
        assert!(matches!(
            build_operator_matrix_with_cap(&k, &grid, 100),
            Err(Error::MatrixTooLarge { n: 101, cap: 100 })
        ));
    }
}
