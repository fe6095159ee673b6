use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::Response;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::Kernel;
use crate::operator::{build_operator_matrix_with_cap, Operator, OperatorMatrix};

/// Largest node count for which the dense Jacobian is assembled.
pub const NEWTON_CAP: usize = 4096;

const MAX_HALVINGS: usize = 30;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `||-a u + f(T u)||_inf`.
pub fn residual(field: &Field, kernel: &Kernel, a: f64, response: &Response) -> Result<f64> {
    let op = Operator::new(kernel, field.grid())?;
    Ok(sup(&crate::dynamics::rate(&op, a, response, field.values())))
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonReport {
    #[serde(skip)]
    pub field: Field,
    pub residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
    /// Steps taken by the fixed-point fallback `u <- f(T u) / a`.
    pub fallback_steps: usize,
    pub converged: bool,
}

struct Problem<'a> {
    matrix: &'a OperatorMatrix,
    a: f64,
    response: Response,
}

impl Problem<'_> {
    fn tu(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.matvec(u)
    }

    fn rate(&self, u: &[f64], tu: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(tu)
            .map(|(&x, &t)| -self.a * x + self.response.apply(t))
            .collect()
    }

    /// Solves `(-a I + D M) delta = -F`.
    fn newton_direction(&self, tu: &[f64], rate: &[f64]) -> Option<Vec<f64>> {
        let m = self.matrix.entries();
        let n = m.nrows();
        let d: Vec<f64> = tu.iter().map(|&t| self.response.derivative(t)).collect();
        let mut j = DMatrix::from_fn(n, n, |r, c| d[r] * m[(r, c)]);
        for i in 0..n {
            j[(i, i)] -= self.a;
        }
        let rhs = DVector::from_iterator(n, rate.iter().map(|r| -r));
        let delta = j.lu().solve(&rhs)?;
        delta.iter().all(|x| x.is_finite()).then(|| delta.as_slice().to_vec())
    }
}

/// Damped Newton on `F(u) = -a u + f(T u)`; see [`newton_refine_with`].
pub fn newton_refine(
    field: &Field,
    kernel: &Kernel,
    a: f64,
    response: &Response,
    max_iters: usize,
    tol: f64,
) -> Result<NewtonReport> {
    let matrix = build_operator_matrix_with_cap(kernel, field.grid(), NEWTON_CAP)?;
    newton_refine_with(field, &matrix, a, response, max_iters, tol)
}

/// Damped Newton with a prebuilt operator matrix. A step is accepted only if
/// it lowers the sup-norm residual, so the result never exceeds the input's.
/// When the Jacobian is singular or no damped step helps, one fixed-point
/// step `u <- f(T u) / a` is tried instead.
pub fn newton_refine_with(
    field: &Field,
    matrix: &OperatorMatrix,
    a: f64,
    response: &Response,
    max_iters: usize,
    tol: f64,
) -> Result<NewtonReport> {
    if !field.grid().same_lattice(matrix.grid()) {
        return Err(Error::invalid("field and operator matrix live on different grids"));
    }
    if !(a > 0.0) {
        return Err(Error::invalid("a must be positive"));
    }
    let p = Problem {
        matrix,
        a,
        response: *response,
    };
    let mut u = field.values().to_vec();
    let mut tu = p.tu(&u);
    let mut f = p.rate(&u, &tu);
    let mut r = sup(&f);
    let initial = r;
    let mut iterations = 0;
    let mut fallback_steps = 0;
    while r > tol && iterations < max_iters {
        iterations += 1;
        let mut accepted = false;
        if let Some(delta) = p.newton_direction(&tu, &f) {
            let mut lambda = 1.0;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + lambda * d).collect();
                let ttu = p.tu(&trial);
                let tf = p.rate(&trial, &ttu);
                let tr = sup(&tf);
                if tr < r {
                    (u, tu, f, r) = (trial, ttu, tf, tr);
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if !accepted {
            let trial: Vec<f64> = tu.iter().map(|&t| response.apply(t) / a).collect();
            let ttu = p.tu(&trial);
            let tf = p.rate(&trial, &ttu);
            let tr = sup(&tf);
            if tr < r {
                (u, tu, f, r) = (trial, ttu, tf, tr);
                fallback_steps += 1;
            } else {
                break;
            }
        }
    }
    Ok(NewtonReport {
        field: Field::from_values(*field.grid(), u)?,
        residual: r,
        initial_residual: initial,
        iterations,
        fallback_steps,
        converged: r <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::{Band, KernelSpec};

    #[test]
    fn zero_is_exact() {
        let grid = Grid::new(1, 10.0, 101).unwrap();
        let k = KernelSpec::bands(vec![Band::new(0.0, 2.0, 0.6)]).sample(1, grid.spacing()).unwrap();
        let r = newton_refine(&Field::zeros(grid), &k, 1.0, &Response::saturation(1.0), 10, 1e-12).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.residual, 0.0);
        assert!(r.field.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fully_clamped_one_step() {
        // b T u far beyond 1 everywhere: f(T u) = 1, the root is u = 1 / a
        let grid = Grid::new(1, 3.0, 61).unwrap();
        let k = KernelSpec::bands(vec![Band::new(0.0, 10.0, 1.0)]).sample(1, grid.spacing()).unwrap();
        let u = Field::from_values(grid, vec![3.0; 61]).unwrap();
        let r = newton_refine(&u, &k, 2.0, &Response::saturation(5.0), 5, 1e-14).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.field.values().iter().all(|v| (*v - 0.5).abs() < 1e-15));
        assert_eq!(r.residual, 0.0);
    }
}
