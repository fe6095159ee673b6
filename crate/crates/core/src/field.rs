use crate::error::{Error, Result};
use crate::grid::Grid;

/// Real-valued samples on a [`Grid`], row-major with `x` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.node(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L2 norm with quadrature weight `spacing^d`.
    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Weighted inner product `sum u_i v_i * spacing^d`.
    pub fn inner(&self, other: &Field) -> f64 {
        weighted_dot(&self.values, &other.values, self.grid.cell_volume())
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Field, beta: f64) -> Field {
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(u, v)| alpha * u + beta * v)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Value at axis index `i` (1D) or `(ix, iy)` (2D).
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.points_per_axis() + ix]
    }
}

pub(crate) fn weighted_dot(a: &[f64], b: &[f64], weight: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * weight
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Grid::new(1, 1.0, 3).unwrap();
        assert!(Field::from_values(g, vec![0.0; 4]).is_err());
        assert!(Field::from_values(g, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn weighted_norms() {
        let g = Grid::new(1, 1.0, 3).unwrap();
        let f = Field::from_values(g, vec![1.0, -2.0, 2.0]).unwrap();
        assert_eq!(f.norm_inf(), 2.0);
        assert!((f.norm_l2() - 3.0).abs() < 1e-15);
    }
}
