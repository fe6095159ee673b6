//! Uniform lattices over `[-r, r]^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the truncated convolution treats the edge of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero extension outside the domain (the truncated convolution).
    #[default]
    Open,
    /// Torus: the lattice wraps with period `points_per_axis * spacing`.
    Periodic,
}

/// A uniform 1D or 2D lattice with `x_i = -r + i * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dimension: usize,
    extent: f64,
    points_per_axis: usize,
    spacing: f64,
    boundary: Boundary,
}

impl Grid {
    /// Open lattice with `points_per_axis` nodes spanning `[-extent, extent]`.
    pub fn new(dimension: usize, extent: f64, points_per_axis: usize) -> Result<Self> {
        if !(dimension == 1 || dimension == 2) {
            return Err(Error::invalid(format!(
                "dimension must be 1 or 2, got {dimension}"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::invalid(format!(
                "extent must be positive, got {extent}"
            )));
        }
        if points_per_axis < 3 {
            return Err(Error::invalid(format!(
                "points_per_axis must be at least 3, got {points_per_axis}"
            )));
        }
        Ok(Self {
            dimension,
            extent,
            points_per_axis,
            spacing: 2.0 * extent / (points_per_axis - 1) as f64,
            boundary: Boundary::Open,
        })
    }

    /// Periodic lattice whose period (`points_per_axis * spacing`) equals `period`.
    ///
    /// Nodes are centred on the origin, so the extent is `period * (n - 1) / (2n)`.
    pub fn periodic(dimension: usize, period: f64, points_per_axis: usize) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::invalid(format!(
                "period must be positive, got {period}"
            )));
        }
        let n = points_per_axis as f64;
        let mut grid = Self::new(dimension, period * (n - 1.0) / (2.0 * n), points_per_axis)?;
        grid.spacing = period / n;
        grid.boundary = Boundary::Periodic;
        Ok(grid)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Total number of nodes, `points_per_axis^dimension`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one node, `spacing^dimension`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    /// Period length of a periodic grid (`n * spacing`).
    pub fn period(&self) -> f64 {
        self.points_per_axis as f64 * self.spacing
    }

    /// Coordinate of axis index `i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing
    }

    /// Nearest axis index to coordinate `x` (clamped to the lattice).
    pub fn index_of(&self, x: f64) -> usize {
        let i = ((x + self.extent) / self.spacing).round();
        i.clamp(0.0, (self.points_per_axis - 1) as f64) as usize
    }

    /// Axis coordinates `x_0 .. x_{n-1}`.
    pub fn axis(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|i| self.coordinate(i)).collect()
    }

    /// Coordinates of flat node `k` (row-major, `x` fastest). `y` is 0 in 1D.
    pub fn node(&self, k: usize) -> (f64, f64) {
        let n = self.points_per_axis;
        if self.dimension == 1 {
            (self.coordinate(k), 0.0)
        } else {
            (self.coordinate(k % n), self.coordinate(k / n))
        }
    }

    pub(crate) fn same_lattice(&self, other: &Grid) -> bool {
        self.dimension == other.dimension
            && self.points_per_axis == other.points_per_axis
            && self.boundary == other.boundary
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
    }

    /// Same node coordinates, regardless of boundary treatment.
    pub(crate) fn same_nodes(&self, other: &Grid) -> bool {
        self.dimension == other.dimension
            && self.points_per_axis == other.points_per_axis
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (self.extent - other.extent).abs() <= 1e-12 * self.extent
    }
}
