//! Eigenpairs of the discretised operator `T`.
//!
//! Eigenfields are normalised in the weighted inner product
//! `<u, v> = sum u_i v_i h^d`, so mode coefficients are `a_j = <u, e_j>`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{weighted_dot, Field};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::operator::{build_operator_matrix, Operator, OperatorMatrix};

/// Node count up to which [`Spectrum::compute`] uses the dense solver.
pub const DENSE_LIMIT: usize = 4096;

/// Default relative tolerance for matching `a / b` against an eigenvalue.
pub const EXISTENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Grid,
    eigenvalues: Vec<f64>,
    eigenfields: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    lambda_max: f64,
    lambda_min: Option<f64>,
}

impl Spectrum {
    /// Dense decomposition for small grids, Lanczos (largest values) otherwise.
    pub fn compute(kernel: &Kernel, grid: &Grid, modes: usize) -> Result<Self> {
        if grid.len() <= DENSE_LIMIT {
            let matrix = build_operator_matrix(kernel, grid)?;
            eigendecompose(&matrix, modes)
        } else {
            let op = Operator::new(kernel, grid)?;
            lanczos_top(&op, modes, &LanczosOptions::default())
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Retained eigenvalues, descending by value.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Mode `j` (0-based) as a field.
    pub fn eigenfield(&self, j: usize) -> Field {
        Field::from_values(self.grid, self.eigenfields[j].clone()).expect("finite eigenfield")
    }

    pub fn eigenfield_values(&self, j: usize) -> &[f64] {
        &self.eigenfields[j]
    }

    /// `||T e_j - lambda_j e_j||_2` (weighted) per retained mode.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Largest eigenvalue of the whole discretised operator.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Smallest eigenvalue, when the solver resolved it.
    pub fn lambda_min(&self) -> Option<f64> {
        self.lambda_min
    }

    /// Largest retained `|lambda|`.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index (0-based) of the retained mode with eigenvalue `lambda_max`.
    pub fn max_mode(&self) -> Option<usize> {
        self.eigenvalues
            .first()
            .filter(|&&v| v == self.lambda_max)
            .map(|_| 0)
    }
}

fn sign_normalise(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn residual(op: &Operator, lambda: f64, e: &[f64], weight: f64) -> f64 {
    let te = op.apply(e);
    let r: Vec<f64> = te.iter().zip(e).map(|(t, x)| t - lambda * x).collect();
    weighted_dot(&r, &r, weight).sqrt()
}

fn assemble(
    grid: Grid,
    mut pairs: Vec<(f64, Vec<f64>)>,
    lambda_max: f64,
    lambda_min: Option<f64>,
    op: &Operator,
) -> Spectrum {
    // descending by value; the stable sort keeps solver order inside exact ties
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let weight = grid.cell_volume();
    let scale = 1.0 / weight.sqrt();
    let mut eigenvalues = Vec::with_capacity(pairs.len());
    let mut eigenfields = Vec::with_capacity(pairs.len());
    for (lambda, mut v) in pairs {
        v.iter_mut().for_each(|x| *x *= scale);
        sign_normalise(&mut v);
        eigenvalues.push(lambda);
        eigenfields.push(v);
    }
    let residuals = crate::par::map_range(eigenvalues.len(), |j| {
        residual(op, eigenvalues[j], &eigenfields[j], weight)
    });
    Spectrum {
        grid,
        eigenvalues,
        eigenfields,
        residuals,
        lambda_max,
        lambda_min,
    }
}

/// Dense symmetric eigendecomposition, keeping the `modes` largest `|lambda|`.
pub fn eigendecompose(matrix: &OperatorMatrix, modes: usize) -> Result<Spectrum> {
    let n = matrix.size();
    if modes == 0 || modes > n {
        return Err(Error::invalid(format!("modes must be in 1..={n}, got {modes}")));
    }
    let eig = SymmetricEigen::new(matrix.entries().clone());
    let values = eig.eigenvalues.as_slice();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Convergence {
            worst_residual: f64::INFINITY,
            iterations: 0,
        });
    }
    let lambda_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_min = values.iter().copied().fold(f64::INFINITY, f64::min);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let pairs = order
        .into_iter()
        .take(modes)
        .map(|i| (values[i], eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();

    let op = reference_operator(matrix)?;
    Ok(assemble(*matrix.grid(), pairs, lambda_max, Some(lambda_min), &op))
}

// Residuals are checked against the convolution route, not the matrix.
fn reference_operator(matrix: &OperatorMatrix) -> Result<Operator> {
    Operator::new(matrix.kernel(), matrix.grid())
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub max_iterations: usize,
    pub check_every: usize,
    /// Relative Ritz residual target, scaled by `|theta_max| + 1`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iterations: 600,
            check_every: 25,
            tol: 1e-8,
            seed: 0x5eed,
        }
    }
}

/// Matrix-free Lanczos with full reorthogonalisation for the `modes`
/// largest eigenvalues (by value).
pub fn lanczos_top(op: &Operator, modes: usize, opts: &LanczosOptions) -> Result<Spectrum> {
    let grid = *op.grid();
    let n = grid.len();
    if modes == 0 || modes > n {
        return Err(Error::invalid(format!("modes must be in 1..={n}, got {modes}")));
    }
    let max_iter = opts.max_iterations.min(n).max(modes);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    normalise(&mut q);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last: Option<(Vec<f64>, DMatrix<f64>, f64)> = None;

    for j in 0..max_iter {
        let mut w = op.apply(&basis[j]);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        let done = j + 1 == max_iter || bnorm < 1e-13 * (a.abs() + 1.0);
        if done || (j + 1) % opts.check_every == 0 {
            let m = alpha.len();
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
            let top = &order[..modes.min(m)];
            let theta_max = vals[order[0]];
            let worst = top
                .iter()
                .map(|&i| (bnorm * eig.eigenvectors[(m - 1, i)]).abs())
                .fold(0.0, f64::max);
            last = Some((vals, eig.eigenvectors, worst));
            if top.len() == modes && worst <= opts.tol * (theta_max.abs() + 1.0) {
                break;
            }
            if done {
                break;
            }
        }
        beta.push(bnorm);
        w.iter_mut().for_each(|x| *x /= bnorm);
        basis.push(w);
    }

    let (vals, vecs, worst) = last.expect("at least one Ritz check");
    let m = vals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    if order.len() < modes {
        return Err(Error::Convergence {
            worst_residual: worst,
            iterations: m,
        });
    }
    let pairs: Vec<(f64, Vec<f64>)> = order[..modes]
        .iter()
        .map(|&i| {
            let mut v = vec![0.0; n];
            for (k, b) in basis.iter().take(m).enumerate() {
                let c = vecs[(k, i)];
                v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            normalise(&mut v);
            (vals[i], v)
        })
        .collect();
    let lambda_max = pairs[0].0;
    let spectrum = assemble(grid, pairs, lambda_max, None, op);
    let worst_true = spectrum.residuals.iter().fold(0.0f64, |m, r| m.max(*r));
    if worst_true > 1e-6 * (lambda_max.abs() + 1.0) {
        log::warn!("Lanczos stopped with worst residual {worst_true:.3e} after {m} iterations");
    }
    Ok(spectrum)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalise(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// `a / lambda_max`: below it every mode of the linear problem decays.
pub fn b_critical(spectrum: &Spectrum, a: f64) -> Result<f64> {
    let lambda_max = spectrum.lambda_max();
    if lambda_max <= 0.0 {
        return Err(Error::NoPositiveEigenvalue { lambda_max });
    }
    Ok(a / lambda_max)
}

/// Coefficients `a_j = <u, e_j>` for every retained mode.
pub fn project_onto_modes(field: &Field, spectrum: &Spectrum) -> Vec<f64> {
    let w = field.grid().cell_volume();
    crate::par::map_range(spectrum.len(), |j| {
        weighted_dot(field.values(), &spectrum.eigenfields[j], w)
    })
}

/// `sum_j a_j e_j` over the first `coefficients.len()` modes.
pub fn reconstruct(coefficients: &[f64], spectrum: &Spectrum) -> Field {
    let mut values = vec![0.0; spectrum.grid.len()];
    for (c, e) in coefficients.iter().zip(&spectrum.eigenfields) {
        values.iter_mut().zip(e).for_each(|(v, x)| *v += c * x);
    }
    Field::from_values(spectrum.grid, values).expect("finite reconstruction")
}

/// 1-based indices `j` with `|a/b - lambda_j| <= tol * max|lambda|`; an
/// empty list means only the trivial stationary state exists.
pub fn linear_stationary_existence(a: f64, b: f64, spectrum: &Spectrum, tol: f64) -> Result<Vec<usize>> {
    if b == 0.0 {
        return Err(Error::invalid("b must be non-zero"));
    }
    let target = a / b;
    let scale = spectrum.spectral_radius();
    Ok(spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| (target - l).abs() <= tol * scale)
        .map(|(j, _)| j + 1)
        .collect())
}
