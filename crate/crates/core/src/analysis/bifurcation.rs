use serde::Serialize;

use super::newton::{newton_refine_with, NEWTON_CAP};
use crate::dynamics::{Integrator, Response, ResponseKind, RunOptions};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::operator::{build_operator_matrix_with_cap, Operator};
use crate::par;
use crate::spectral::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub b: f64,
    /// Weighted `L2` norm of the converged state.
    pub amplitude: f64,
    pub residual: f64,
    /// `false` marks a gap: no state met the acceptance residual.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub response: ResponseKind,
    /// Acceptance residual for a branch point.
    pub tol: f64,
    pub newton_iters: usize,
    /// Pseudo-time step and budget of the relaxation that precedes Newton
    /// for nonlinear responses.
    pub relax_dt: f64,
    pub relax_steps: usize,
    pub relax_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            response: ResponseKind::SmoothSaturation,
            tol: 1e-8,
            newton_iters: 50,
            relax_dt: 0.5,
            relax_steps: 40_000,
            relax_tol: 1e-7,
        }
    }
}

/// Stationary states near `b = a / lambda_k`, one per `b` value.
///
/// Each point starts from `seed_amplitude * e_k`. Nonlinear responses are
/// first relaxed with the explicit flow, which moves the seed onto the
/// attracting branch (the trivial root is also a Newton fixed point); then
/// Newton sharpens the state. `mode_index` is 1-based by value.
pub fn bifurcation_scan(
    kernel: &Kernel,
    a: f64,
    spectrum: &Spectrum,
    mode_index: usize,
    b_values: &[f64],
    seed_amplitude: f64,
    opts: &ScanOptions,
) -> Result<Vec<BranchPoint>> {
    if opts.response == ResponseKind::Saturation {
        return Err(Error::invalid(
            "the branch scan needs a differentiable response (linear or smooth_saturation)",
        ));
    }
    if mode_index == 0 || mode_index > spectrum.len() {
        return Err(Error::invalid(format!("mode index {mode_index} out of range")));
    }
    let lambda = spectrum.eigenvalues()[mode_index - 1];
    if lambda <= 0.0 {
        return Err(Error::NoPositiveEigenvalue { lambda_max: lambda });
    }
    if !(opts.relax_dt * a < 1.0) {
        return Err(Error::invalid("relaxation step must satisfy dt * a < 1"));
    }
    let grid = *spectrum.grid();
    let matrix = build_operator_matrix_with_cap(kernel, &grid, NEWTON_CAP)?;
    let op = Operator::new(kernel, &grid)?;
    let seed = spectrum.eigenfield(mode_index - 1).scaled(seed_amplitude);

    let points = par::map_slice(b_values, |&b| -> Result<BranchPoint> {
        let response = Response { kind: opts.response, b };
        let start = if opts.response == ResponseKind::Linear {
            seed.clone()
        } else {
            let mut it = Integrator::with_operator(op.clone(), seed.clone(), a, response, opts.relax_dt);
            it.run(opts.relax_steps, opts.relax_tol, RunOptions::default())?.final_field
        };
        let refined = newton_refine_with(&start, &matrix, a, &response, opts.newton_iters, 0.1 * opts.tol)?;
        let converged = refined.residual <= opts.tol;
        Ok(BranchPoint {
            b,
            amplitude: if converged { refined.field.norm_l2() } else { f64::NAN },
            residual: refined.residual,
            converged,
        })
    });
    points.into_iter().collect()
}
