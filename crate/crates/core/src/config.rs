//! Simulation configuration and its TOML form.
//!
//! ```toml
//! a = 1.0
//! dt = 0.1
//! max_steps = 100000
//! stationarity_tol = 1e-8
//! method = "auto"            # direct | fft | auto
//!
//! [grid]
//! dimension = 1
//! points = 200
//! extent = 25.0              # or: boundary = "periodic", period = 48.0
//!
//! [kernel]
//! family = "K1"              # K1..K5 take optional activation, inhibition,
//!                            # inner, outer, far overrides; "custom" takes
//!                            # profile = "bands" + bands, or profile = "hat"
//!
//! [response]
//! kind = "saturation"        # linear | saturation | smooth_saturation
//! b = 0.8
//!
//! [initial]
//! kind = "random"            # zero | random | step_sign | square_plateau |
//! seed = 7                   # mode_seed | from_file | intervals |
//!                            # periodic_plateau
//! amplitude = 1.0
//!
//! [history]                  # optional mode recording
//! stride = 10
//! modes = 20
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Response;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Boundary, Grid};
use crate::kernel::{Band, Kernel, KernelFamily, KernelParams, KernelSpec, Profile};
use crate::operator::{check_compatible, ConvolutionMethod};
use crate::spectral::Spectrum;

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_HISTORY_STRIDE: usize = 10;

/// A signed interval `[lo, hi]` (per axis in 2D: applied to `x`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedInterval {
    pub lo: f64,
    pub hi: f64,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// Uniform on `[-amplitude, amplitude]` from a ChaCha8 stream seeded with `seed`.
    Random {
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `sign(x)`, zero on the axis.
    StepSign,
    /// `1` on `|x|, |y| <= half_width`, `0` elsewhere.
    SquarePlateau { half_width: f64 },
    /// `amplitude * e_index` with a 1-based mode index by value.
    ModeSeed { index: usize, amplitude: f64 },
    FromFile { path: PathBuf },
    /// `sign` on each interval (in `x`), `0` elsewhere.
    Intervals { intervals: Vec<SignedInterval> },
    /// Period `4 + 2s` square wave: `1` on `[0, 2]`, `-1` on `[2 + s, 4 + s]`,
    /// linear across the transitions.
    PeriodicPlateau { s: f64 },
}

fn one() -> f64 {
    1.0
}

impl InitialCondition {
    /// Replaces the seed of a random start; other variants are unchanged.
    pub fn with_seed(self, new_seed: u64) -> Self {
        match self {
            InitialCondition::Random { amplitude, .. } => InitialCondition::Random {
                seed: new_seed,
                amplitude,
            },
            other => other,
        }
    }
}

/// Uniform `[-amplitude, amplitude]` samples; reproducible across platforms.
pub fn random_field(grid: Grid, seed: u64, amplitude: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| amplitude * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    Field::from_values(grid, values).expect("finite samples")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryConfig {
    #[serde(default = "default_stride")]
    pub stride: usize,
    pub modes: usize,
}

fn default_stride() -> usize {
    DEFAULT_HISTORY_STRIDE
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Grid,
    pub kernel: Kernel,
    /// The continuum description the kernel was sampled from, when known.
    pub kernel_spec: Option<KernelSpec>,
    pub a: f64,
    pub response: Response,
    pub dt: f64,
    pub max_steps: usize,
    pub stationarity_tol: f64,
    pub initial_condition: InitialCondition,
    pub method: ConvolutionMethod,
    pub history: Option<HistoryConfig>,
    /// Snapshot stride for trajectory dumps; 0 disables them.
    pub snapshot_stride: usize,
}

impl SimConfig {
    /// Config with `a = 1` and the default step, budget and tolerance.
    pub fn new(grid: Grid, spec: KernelSpec, response: Response) -> Result<Self> {
        let kernel = spec.sample(grid.dimension(), grid.spacing())?;
        Ok(Self {
            grid,
            kernel,
            kernel_spec: Some(spec),
            a: 1.0,
            response,
            dt: DEFAULT_DT,
            max_steps: DEFAULT_MAX_STEPS,
            stationarity_tol: DEFAULT_TOL,
            initial_condition: InitialCondition::Zero,
            method: ConvolutionMethod::Auto,
            history: None,
            snapshot_stride: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Error::Config {
            path: key.to_string(),
            message: msg,
        };
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(bad("a", format!("degradation rate must be positive, got {}", self.a)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if self.dt * self.a >= 1.0 {
            return Err(bad("dt", format!("dt * a = {} must be below 1", self.dt * self.a)));
        }
        if self.max_steps == 0 {
            return Err(bad("max_steps", "must be positive".into()));
        }
        if !(self.stationarity_tol > 0.0 && self.stationarity_tol.is_finite()) {
            return Err(bad("stationarity_tol", format!("must be positive, got {}", self.stationarity_tol)));
        }
        if !self.response.b.is_finite() {
            return Err(bad("response.b", "must be finite".into()));
        }
        check_compatible(&self.kernel, &self.grid)?;
        let stiff = self.dt * (self.a + self.response.b.abs() * self.kernel.l1_norm());
        if stiff > 1.0 {
            log::warn!("dt * (a + |b| ||K||_1) = {stiff:.3} exceeds 1; the explicit step may oscillate");
        }
        Ok(())
    }

    /// Builds `u_0` from the configured initial condition.
    pub fn initial_field(&self) -> Result<Field> {
        initial_field(&self.initial_condition, &self.grid, &self.kernel)
    }
}

pub fn initial_field(ic: &InitialCondition, grid: &Grid, kernel: &Kernel) -> Result<Field> {
    let grid = *grid;
    Ok(match ic {
        InitialCondition::Zero => Field::zeros(grid),
        InitialCondition::Random { seed, amplitude } => random_field(grid, *seed, *amplitude),
        InitialCondition::StepSign => Field::from_fn(grid, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        InitialCondition::SquarePlateau { half_width } => {
            let hw = *half_width;
            let two_d = grid.dimension() == 2;
            Field::from_fn(grid, move |x, y| {
                if x.abs() <= hw && (!two_d || y.abs() <= hw) {
                    1.0
                } else {
                    0.0
                }
            })
        }
        InitialCondition::ModeSeed { index, amplitude } => {
            if *index == 0 || *index > grid.len() {
                return Err(Error::invalid(format!("mode index {index} out of range")));
            }
            let spectrum = Spectrum::compute(kernel, &grid, *index)?;
            let mut order: Vec<usize> = (0..spectrum.len()).collect();
            order.sort_by(|&i, &j| spectrum.eigenvalues()[j].total_cmp(&spectrum.eigenvalues()[i]));
            spectrum.eigenfield(order[index - 1]).scaled(*amplitude)
        }
        InitialCondition::FromFile { path } => {
            let field = crate::io::read_field_csv(path)?;
            if !field.grid().same_nodes(&grid) {
                return Err(Error::Config {
                    path: path.display().to_string(),
                    message: "field file does not match the configured grid".into(),
                });
            }
            Field::from_values(grid, field.into_values())?
        }
        InitialCondition::PeriodicPlateau { s } => {
            let s = *s;
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("transition width must be positive, got {s}")));
            }
            let period = 4.0 + 2.0 * s;
            Field::from_fn(grid, move |x, _| {
                let y = x.rem_euclid(period);
                if y <= 2.0 {
                    1.0
                } else if y < 2.0 + s {
                    1.0 - 2.0 * (y - 2.0) / s
                } else if y <= 4.0 + s {
                    -1.0
                } else {
                    -1.0 + 2.0 * (y - 4.0 - s) / s
                }
            })
        }
        InitialCondition::Intervals { intervals } => {
            let intervals = intervals.clone();
            Field::from_fn(grid, move |x, _| {
                intervals
                    .iter()
                    .find(|iv| x >= iv.lo && x <= iv.hi)
                    .map_or(0.0, |iv| iv.sign)
            })
        }
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    dimension: usize,
    points: usize,
    #[serde(default)]
    boundary: Boundary,
    extent: Option<f64>,
    period: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProfileKind {
    Bands,
    Hat,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    family: KernelFamily,
    activation: Option<f64>,
    inhibition: Option<f64>,
    inner: Option<f64>,
    outer: Option<f64>,
    far: Option<f64>,
    profile: Option<ProfileKind>,
    bands: Option<Vec<Band>>,
    height: Option<f64>,
    half_width: Option<f64>,
    /// Kernel lattice size over `[-support, support]`; must match the grid spacing.
    samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default = "one")]
    a: f64,
    #[serde(default = "dt_default")]
    dt: f64,
    #[serde(default = "steps_default")]
    max_steps: usize,
    #[serde(default = "tol_default")]
    stationarity_tol: f64,
    #[serde(default)]
    method: ConvolutionMethod,
    #[serde(default)]
    snapshot_stride: usize,
    grid: GridSection,
    kernel: KernelSection,
    response: Response,
    #[serde(default = "zero_ic")]
    initial: InitialCondition,
    history: Option<HistoryConfig>,
}

fn dt_default() -> f64 {
    DEFAULT_DT
}
fn steps_default() -> usize {
    DEFAULT_MAX_STEPS
}
fn tol_default() -> f64 {
    DEFAULT_TOL
}
fn zero_ic() -> InitialCondition {
    InitialCondition::Zero
}

/// Reads and validates a TOML config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config_str(&text, &path.display().to_string())?;
    // relative field files resolve against the config's directory
    if let InitialCondition::FromFile { path: file } = &mut config.initial_condition {
        if file.is_relative() {
            if let Some(dir) = path.parent() {
                *file = dir.join(&*file);
            }
        }
    }
    Ok(config)
}

/// Parses config text; `origin` names the source in diagnostics.
pub fn parse_config_str(text: &str, origin: &str) -> Result<SimConfig> {
    let err = |message: String| Error::Config {
        path: origin.to_string(),
        message,
    };
    let file: FileConfig = toml::from_str(text).map_err(|e| err(e.to_string()))?;

    let g = &file.grid;
    let grid = match (g.boundary, g.extent, g.period) {
        (Boundary::Open, Some(extent), None) => Grid::new(g.dimension, extent, g.points),
        (Boundary::Periodic, None, Some(period)) => Grid::periodic(g.dimension, period, g.points),
        (Boundary::Open, _, _) => return Err(err("grid: open grids take `extent` (and no `period`)".into())),
        (Boundary::Periodic, _, _) => {
            return Err(err("grid: periodic grids take `period` (and no `extent`)".into()))
        }
    }
    .map_err(|e| err(format!("grid: {e}")))?;

    let spec = kernel_spec(&file.kernel, g.dimension).map_err(|e| err(format!("kernel: {e}")))?;
    let kernel = spec
        .sample(grid.dimension(), grid.spacing())
        .map_err(|e| err(format!("kernel: {e}")))?;
    if let Some(samples) = file.kernel.samples {
        if samples < 2 {
            return Err(err("kernel.samples: need at least 2".into()));
        }
        let implied = 2.0 * kernel.support_half_width() / (samples - 1) as f64;
        let rel = (implied - grid.spacing()).abs() / grid.spacing();
        if rel > 0.01 {
            return Err(err(format!(
                "kernel.samples: {samples} samples give spacing {implied:.6}, grid spacing is {:.6}",
                grid.spacing()
            )));
        }
    }

    let config = SimConfig {
        grid,
        kernel,
        kernel_spec: Some(spec),
        a: file.a,
        response: file.response,
        dt: file.dt,
        max_steps: file.max_steps,
        stationarity_tol: file.stationarity_tol,
        initial_condition: file.initial,
        method: file.method,
        history: file.history,
        snapshot_stride: file.snapshot_stride,
    };
    config.validate().map_err(|e| match e {
        Error::Config { path, message } => err(format!("{path}: {message}")),
        other => err(other.to_string()),
    })?;
    Ok(config)
}

fn kernel_spec(k: &KernelSection, dimension: usize) -> Result<KernelSpec> {
    let named = [k.activation, k.inhibition, k.inner, k.outer, k.far];
    match k.family {
        KernelFamily::Custom => {
            if named.iter().any(Option::is_some) {
                return Err(Error::invalid("custom kernels take `bands` or a hat, not family parameters"));
            }
            match (k.profile.unwrap_or(ProfileKind::Bands), &k.bands, k.height, k.half_width) {
                (ProfileKind::Bands, Some(bands), None, None) => Ok(KernelSpec::bands(bands.clone())),
                (ProfileKind::Hat, None, Some(height), Some(half_width)) => Ok(KernelSpec::hat(height, half_width)),
                (ProfileKind::Bands, ..) => Err(Error::invalid("profile `bands` needs `bands` only")),
                (ProfileKind::Hat, ..) => Err(Error::invalid("profile `hat` needs `height` and `half_width`")),
            }
        }
        family => {
            if k.profile.is_some() || k.bands.is_some() || k.height.is_some() || k.half_width.is_some() {
                return Err(Error::invalid("named families take parameters, not a profile"));
            }
            let d = KernelParams::defaults(family, dimension);
            let params = KernelParams {
                activation: k.activation.unwrap_or(d.activation),
                inhibition: k.inhibition.unwrap_or(d.inhibition),
                inner: k.inner.unwrap_or(d.inner),
                outer: k.outer.unwrap_or(d.outer),
                far: k.far.unwrap_or(d.far),
            };
            KernelSpec::family(family, params, dimension)
        }
    }
}

/// Renders a config back to TOML (used for run provenance files).
pub fn to_toml(config: &SimConfig) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        a: f64,
        dt: f64,
        max_steps: usize,
        stationarity_tol: f64,
        method: ConvolutionMethod,
        snapshot_stride: usize,
        grid: toml::Table,
        kernel: toml::Table,
        response: &'a Response,
        initial: &'a InitialCondition,
        #[serde(skip_serializing_if = "Option::is_none")]
        history: Option<HistoryConfig>,
    }
    let g = &config.grid;
    let mut grid = toml::Table::new();
    grid.insert("dimension".into(), (g.dimension() as i64).into());
    grid.insert("points".into(), (g.points_per_axis() as i64).into());
    if g.is_periodic() {
        grid.insert("boundary".into(), "periodic".into());
        grid.insert("period".into(), g.period().into());
    } else {
        grid.insert("extent".into(), g.extent().into());
    }
    let mut kernel = toml::Table::new();
    match &config.kernel_spec {
        Some(KernelSpec { profile: Profile::Bands { bands }, .. }) => {
            kernel.insert("family".into(), "custom".into());
            kernel.insert("profile".into(), "bands".into());
            let arr = bands
                .iter()
                .map(|b| {
                    let mut t = toml::Table::new();
                    t.insert("inner".into(), b.inner.into());
                    t.insert("outer".into(), b.outer.into());
                    t.insert("value".into(), b.value.into());
                    toml::Value::Table(t)
                })
                .collect::<Vec<_>>();
            kernel.insert("bands".into(), toml::Value::Array(arr));
        }
        Some(KernelSpec { profile: Profile::Hat { height, half_width }, .. }) => {
            kernel.insert("family".into(), "custom".into());
            kernel.insert("profile".into(), "hat".into());
            kernel.insert("height".into(), (*height).into());
            kernel.insert("half_width".into(), (*half_width).into());
        }
        None => {
            kernel.insert("family".into(), "custom".into());
        }
    }
    let out = Out {
        a: config.a,
        dt: config.dt,
        max_steps: config.max_steps,
        stationarity_tol: config.stationarity_tol,
        method: config.method,
        snapshot_stride: config.snapshot_stride,
        grid,
        kernel,
        response: &config.response,
        initial: &config.initial_condition,
        history: config.history,
    };
    toml::to_string(&out).expect("serialisable config")
}
