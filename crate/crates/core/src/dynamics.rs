//! Explicit Euler integration of `u_t = -a u + f(T u)`.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::Kernel;
use crate::operator::Operator;
use crate::spectral::{project_onto_modes, Spectrum};

/// Tolerance on `max mu_j` below which a mode counts as non-growing.
pub const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    /// `f(x) = b x`
    Linear,
    /// `f(x) = clamp(b x, -1, 1)`
    Saturation,
    /// `f(x) = tanh(b x)`
    SmoothSaturation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub kind: ResponseKind,
    pub b: f64,
}

impl Response {
    pub fn linear(b: f64) -> Self {
        Self { kind: ResponseKind::Linear, b }
    }

    pub fn saturation(b: f64) -> Self {
        Self { kind: ResponseKind::Saturation, b }
    }

    pub fn smooth_saturation(b: f64) -> Self {
        Self { kind: ResponseKind::SmoothSaturation, b }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let bx = self.b * x;
        match self.kind {
            ResponseKind::Linear => bx,
            ResponseKind::Saturation => bx.clamp(-1.0, 1.0),
            ResponseKind::SmoothSaturation => bx.tanh(),
        }
    }

    /// `f'(x)`; the clamp counts as flat on the saturated set including its edge.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self.kind {
            ResponseKind::Linear => self.b,
            ResponseKind::Saturation => {
                if (self.b * x).abs() < 1.0 {
                    self.b
                } else {
                    0.0
                }
            }
            ResponseKind::SmoothSaturation => {
                let t = (self.b * x).tanh();
                self.b * (1.0 - t * t)
            }
        }
    }

    pub fn with_b(&self, b: f64) -> Self {
        Self { kind: self.kind, b }
    }
}

pub fn apply_response(response: &Response, value: f64) -> f64 {
    response.apply(value)
}

/// `rate = -a u + f(T u)`, with `tu` as scratch for `T u`.
fn rate_into(op: &Operator, a: f64, response: &Response, u: &[f64], tu: &mut [f64], rate: &mut [f64]) {
    op.apply_into(u, tu);
    for ((r, &x), &t) in rate.iter_mut().zip(u).zip(tu.iter()) {
        *r = -a * x + response.apply(t);
    }
}

/// `-a u + f(T u)` as a plain vector.
pub fn rate(op: &Operator, a: f64, response: &Response, u: &[f64]) -> Vec<f64> {
    let mut tu = vec![0.0; u.len()];
    let mut out = vec![0.0; u.len()];
    rate_into(op, a, response, u, &mut tu, &mut out);
    out
}

fn first_non_finite(v: &[f64]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

/// One step `u + dt (-a u + f(T u))`.
pub fn euler_step(field: &Field, kernel: &Kernel, a: f64, response: &Response, dt: f64) -> Result<Field> {
    let op = Operator::new(kernel, field.grid())?;
    let r = rate(&op, a, response, field.values());
    let next: Vec<f64> = field.values().iter().zip(&r).map(|(u, r)| u + dt * r).collect();
    if let Some(index) = first_non_finite(&next) {
        return Err(Error::BlowUp { step: 1, index });
    }
    Field::from_values(*field.grid(), next)
}

/// Mode coefficients and weighted `L2` norm at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSample {
    pub t: f64,
    pub coefficients: Vec<f64>,
    pub norm_l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    #[serde(skip)]
    pub final_field: Field,
    pub steps_taken: usize,
    pub stationary: bool,
    /// `||-a u + f(T u)||_inf` at the final state.
    pub residual_inf: f64,
    /// `||u_{n+1} - u_n||_inf / dt` of the last evaluated step.
    pub update_norm: f64,
    pub final_time: f64,
    pub mode_history: Option<Vec<ModeSample>>,
}

/// Records mode coefficients every `stride` steps.
#[derive(Debug, Clone, Copy)]
pub struct ModeRecorder<'a> {
    pub spectrum: &'a Spectrum,
    pub stride: usize,
}

/// Callback receiving `(step, state)` at the snapshot stride.
pub type SnapshotFn<'a> = dyn FnMut(usize, &Field) -> Result<()> + 'a;

#[derive(Default)]
pub struct RunOptions<'a> {
    pub modes: Option<ModeRecorder<'a>>,
    pub snapshot_stride: usize,
    pub on_snapshot: Option<&'a mut SnapshotFn<'a>>,
}

/// Stateful stepper; owns its state exclusively.
pub struct Integrator {
    op: Operator,
    a: f64,
    response: Response,
    dt: f64,
    state: Vec<f64>,
    tu: Vec<f64>,
    rate: Vec<f64>,
    step: usize,
}

impl Integrator {
    pub fn new(kernel: &Kernel, u0: Field, a: f64, response: Response, dt: f64) -> Result<Self> {
        let op = Operator::new(kernel, u0.grid())?;
        Ok(Self::with_operator(op, u0, a, response, dt))
    }

    pub fn with_operator(op: Operator, u0: Field, a: f64, response: Response, dt: f64) -> Self {
        let n = u0.len();
        Self {
            op,
            a,
            response,
            dt,
            state: u0.into_values(),
            tu: vec![0.0; n],
            rate: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn field(&self) -> Field {
        Field::from_values(*self.op.grid(), self.state.clone()).expect("finite state")
    }

    /// Evaluates the rate at the current state and returns its sup norm.
    pub fn evaluate(&mut self) -> f64 {
        rate_into(&self.op, self.a, &self.response, &self.state, &mut self.tu, &mut self.rate);
        self.rate.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// Advances with the rate from the last [`evaluate`](Self::evaluate).
    pub fn advance(&mut self) -> Result<()> {
        let dt = self.dt;
        for (u, r) in self.state.iter_mut().zip(&self.rate) {
            *u += dt * r;
        }
        self.step += 1;
        match first_non_finite(&self.state) {
            Some(index) => Err(Error::BlowUp { step: self.step, index }),
            None => Ok(()),
        }
    }

    /// One explicit step from the current state; returns the rate norm used.
    pub fn step(&mut self) -> Result<f64> {
        let norm = self.evaluate();
        self.advance()?;
        Ok(norm)
    }

    /// Runs until `||rate||_inf <= tol` or `max_steps` steps were taken.
    pub fn run(&mut self, max_steps: usize, tol: f64, mut opts: RunOptions<'_>) -> Result<RunReport> {
        let grid = *self.op.grid();
        let mut history = opts.modes.map(|_| Vec::new());
        let record = |this: &Self, history: &mut Option<Vec<ModeSample>>| {
            if let (Some(h), Some(rec)) = (history.as_mut(), opts.modes.as_ref()) {
                let field = Field::from_values(grid, this.state.clone()).expect("finite state");
                h.push(ModeSample {
                    t: this.step as f64 * this.dt,
                    coefficients: project_onto_modes(&field, rec.spectrum),
                    norm_l2: field.norm_l2(),
                });
            }
        };
        let stride = opts.modes.map_or(0, |m| m.stride.max(1));
        let start = self.step;
        let mut stationary = false;
        let mut update_norm;
        loop {
            let taken = self.step - start;
            if stride > 0 && taken.is_multiple_of(stride) {
                record(self, &mut history);
            }
            if opts.snapshot_stride > 0 && taken.is_multiple_of(opts.snapshot_stride) {
                if let Some(cb) = opts.on_snapshot.as_mut() {
                    cb(self.step, &self.field())?;
                }
            }
            update_norm = self.evaluate();
            if !update_norm.is_finite() {
                let index = first_non_finite(&self.rate).unwrap_or(0);
                return Err(Error::BlowUp { step: self.step, index });
            }
            if update_norm <= tol {
                stationary = true;
                break;
            }
            if taken == max_steps {
                break;
            }
            self.advance()?;
        }
        let taken = self.step - start;
        if stride > 0 && !taken.is_multiple_of(stride) {
            record(self, &mut history);
        }
        // the last evaluation already holds the residual of the final state
        let residual_inf = update_norm;
        Ok(RunReport {
            final_field: self.field(),
            steps_taken: taken,
            stationary,
            residual_inf,
            update_norm,
            final_time: self.step as f64 * self.dt,
            mode_history: history,
        })
    }
}

/// Runs `config` from its own initial condition.
pub fn integrate(config: &SimConfig) -> Result<RunReport> {
    let u0 = config.initial_field()?;
    integrate_from(config, u0, RunOptions::default())
}

pub fn integrate_from(config: &SimConfig, u0: Field, opts: RunOptions<'_>) -> Result<RunReport> {
    config.validate()?;
    if !u0.grid().same_lattice(&config.grid) {
        return Err(Error::invalid("initial field lives on a different grid"));
    }
    let op = Operator::with_method(&config.kernel, &config.grid, config.method)?;
    let mut integrator = Integrator::with_operator(op, u0, config.a, config.response, config.dt);
    integrator.run(config.max_steps, config.stationarity_tol, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// `mu_j = b lambda_j - a` per retained mode.
    pub mu: Vec<f64>,
    /// 1-based indices of modes with `mu_j > 0`.
    pub unstable_indices: Vec<usize>,
}

pub fn stability_classify(a: f64, b: f64, spectrum: &Spectrum) -> Result<StabilityReport> {
    if a <= 0.0 || b == 0.0 {
        return Err(Error::invalid("stability needs a > 0 and b != 0"));
    }
    stability_from_eigenvalues(a, b, spectrum.eigenvalues(), spectrum.lambda_max(), spectrum.lambda_min())
}

fn stability_from_eigenvalues(
    a: f64,
    b: f64,
    eigenvalues: &[f64],
    lambda_max: f64,
    lambda_min: Option<f64>,
) -> Result<StabilityReport> {
    let mu: Vec<f64> = eigenvalues.iter().map(|l| b * l - a).collect();
    let unstable_indices: Vec<usize> = mu
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > MARGINAL_TOL)
        .map(|(j, _)| j + 1)
        .collect();
    let extreme = if b > 0.0 {
        b * lambda_max - a
    } else {
        lambda_min.map_or(f64::NEG_INFINITY, |l| b * l - a)
    };
    let stable = unstable_indices.is_empty() && extreme <= MARGINAL_TOL;
    Ok(StabilityReport {
        stable,
        mu,
        unstable_indices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeDecayReport {
    /// Worst `|a_j(t) - a_j(0) e^{mu_j t}| / (|a_j(0)| e^{mu_j t})` over significant modes.
    pub max_relative_error: f64,
    pub stable: bool,
    /// Largest `||u(t_{k+1})||_2 - ||u(t_k)||_2` between consecutive samples.
    pub worst_norm_increase: f64,
    /// `||u(t)||_2 <= ||u_0||_2` at every sample (only meaningful when stable).
    pub norm_bounded: bool,
}

/// Compares recorded coefficients with the exact linear decay `a_j(0) e^{mu_j t}`.
pub fn mode_decay_check(history: &[ModeSample], spectrum: &Spectrum, a: f64, b: f64) -> Result<ModeDecayReport> {
    let stability = stability_classify(a, b, spectrum)?;
    let Some(first) = history.first() else {
        return Ok(ModeDecayReport {
            max_relative_error: 0.0,
            stable: stability.stable,
            worst_norm_increase: 0.0,
            norm_bounded: true,
        });
    };
    let scale = first.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut worst = 0.0f64;
    if scale > 0.0 {
        for sample in &history[1..] {
            for (j, (&c0, &ct)) in first.coefficients.iter().zip(&sample.coefficients).enumerate() {
                if c0.abs() <= 1e-8 * scale {
                    continue;
                }
                let exact = c0 * (stability.mu[j] * (sample.t - first.t)).exp();
                worst = worst.max((ct - exact).abs() / exact.abs());
            }
        }
    }
    let mut worst_increase = 0.0f64;
    let mut bounded = true;
    for pair in history.windows(2) {
        worst_increase = worst_increase.max(pair[1].norm_l2 - pair[0].norm_l2);
    }
    for s in history {
        bounded &= s.norm_l2 <= first.norm_l2 * (1.0 + 1e-12) + 1e-12;
    }
    Ok(ModeDecayReport {
        max_relative_error: worst,
        stable: stability.stable,
        worst_norm_increase: worst_increase,
        norm_bounded: bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::{Band, KernelSpec};

    #[test]
    fn response_examples() {
        let s = Response::saturation(1.0);
        assert_eq!(s.apply(2.0), 1.0);
        assert_eq!(s.apply(0.5), 0.5);
        assert_eq!(s.apply(-3.0), -1.0);
        assert_eq!(Response::linear(0.3).apply(2.0), 0.6);
        assert_eq!(Response::saturation(0.5).apply(1.9), 0.95);
        for x in [-2.5, -0.3, 0.0, 0.7, 4.0] {
            for r in [Response::saturation(0.8), Response::smooth_saturation(1.3), Response::linear(-0.4)] {
                assert_eq!(r.apply(-x), -r.apply(x));
            }
        }
        assert_eq!(s.derivative(0.5), 1.0);
        assert_eq!(s.derivative(1.0), 0.0);
        assert_eq!(s.derivative(-2.0), 0.0);
    }

    #[test]
    fn stability_examples() {
        let r = stability_from_eigenvalues(1.0, 1.0, &[0.5, 0.3], 0.5, Some(0.3)).unwrap();
        assert!(r.stable);
        assert_eq!(r.mu, vec![-0.5, -0.7]);
        let r = stability_from_eigenvalues(1.0, 3.0, &[0.5, 0.1], 0.5, Some(0.1)).unwrap();
        assert!(!r.stable);
        assert!((r.mu[0] - 0.5).abs() < 1e-15);
        assert_eq!(r.unstable_indices, vec![1]);
        let r = stability_from_eigenvalues(1.0, 1.0 / 0.4, &[0.4, 0.1], 0.4, Some(0.1)).unwrap();
        assert!(r.stable);
    }

    #[test]
    fn zero_stays_zero() {
        let grid = Grid::new(1, 5.0, 21).unwrap();
        let k = KernelSpec::bands(vec![Band::new(0.0, 1.0, 1.0), Band::new(1.0, 2.0, -0.5)])
            .sample(1, grid.spacing())
            .unwrap();
        let u = Field::zeros(grid);
        let next = euler_step(&u, &k, 1.0, &Response::saturation(2.0), 0.1).unwrap();
        assert!(next.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn interior_constant_step() {
        let grid = Grid::new(1, 10.0, 201).unwrap();
        let spec = KernelSpec::bands(vec![Band::new(0.0, 1.0, 1.0), Band::new(1.0, 2.0, -0.25)]);
        let k = spec.sample(1, grid.spacing()).unwrap();
        let integral = k.integral();
        let u = Field::from_values(grid, vec![1.0; 201]).unwrap();
        let (a, b, dt) = (1.0, 0.3, 0.1);
        let next = euler_step(&u, &k, a, &Response::linear(b), dt).unwrap();
        let expect = 1.0 + dt * (-a + b * integral);
        assert!((next.values()[100] - expect).abs() < 1e-12);
    }
}
