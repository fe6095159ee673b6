//! Named experiments with fixed configs, analyses and output files.
//!
//! Families:
//!
//! * `linear-1d-K{1..4}`: linear response at the marginal `b = a / lambda_max`,
//!   random start.
//! * `schauder-1d-K{1..3}`: clamp saturation, sign step start, set-B check.
//! * `negative-1d-K4-periodic`: negative band kernel on a torus whose length
//!   is a multiple of `4 + 2s`, periodic plateau start.
//! * `branch-1d-K1`: smooth saturation and a branch scan around `a / lambda_1`.
//! * `pattern-2d-K{1..5}-{large,small}-{random,regular}`: 2D saturation runs;
//!   large means `b = 1`, small means `b = 1.25 b_critical`; regular is a
//!   centred square plateau.
//!
//! Desk scale uses 200 points (1D) and 128x128 (2D) on `[-25, 25]`; paper
//! scale uses 600 points and 600x600 on `[-50, 50]`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::analysis::{
    bifurcation_scan, set_b_membership, stripe_wavelength, BranchPoint, Membership, ScanOptions, SetBSpec,
    SetBVariant, Wavelength,
};
use crate::config::{to_toml, InitialCondition, SimConfig};
use crate::dynamics::{integrate_from, stability_classify, Response, RunOptions, RunReport, StabilityReport};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io;
use crate::kernel::{KernelFamily, KernelParams, KernelSpec};
use crate::spectral::Spectrum;

/// Ratio `b / b_critical` of the small-b 2D presets.
pub const SMALL_B_FACTOR: f64 = 1.25;
/// Tolerance of set-B checks on run outputs.
pub const SET_B_RUN_TOL: f64 = 1e-3;
/// Transition width of the periodic negative-kernel preset.
pub const PERIODIC_S: f64 = 1.0;
/// Half-width of the regular 2D start.
pub const PLATEAU_HALF_WIDTH: f64 = 4.0;

const PATTERN_STEPS: usize = 20_000;
const LINEAR_STEPS: usize = 100_000;
const LINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::invalid(format!("unknown scale `{other}` (expected desk or paper)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisStep {
    Spectrum,
    Stability,
    SetB(SetBSpec),
    Wavelength,
    /// `count` values of `b` evenly spread over `[lo, hi] * a / lambda_mode`.
    Branch { mode: usize, lo: f64, hi: f64, count: usize },
}

#[derive(Debug, Clone)]
pub struct ExperimentPreset {
    pub name: String,
    pub scale: Scale,
    pub config: SimConfig,
    pub analysis_steps: Vec<AnalysisStep>,
    /// File names written under the preset directory.
    pub outputs: Vec<PathBuf>,
    spectrum: Option<Spectrum>,
}

impl ExperimentPreset {
    /// The spectrum computed while resolving `b`, if any.
    pub fn spectrum(&self) -> Option<&Spectrum> {
        self.spectrum.as_ref()
    }
}

/// Everything a preset run measured.
#[derive(Debug, Clone, Serialize)]
pub struct PresetReport {
    pub name: String,
    pub scale: Scale,
    pub seed: u64,
    pub b: f64,
    pub b_critical: Option<f64>,
    pub lambda_max: Option<f64>,
    pub run: RunReport,
    /// `|<u, e_1>| / ||u||_2` of the final state.
    pub mode1_ratio: Option<f64>,
    pub stability: Option<StabilityReport>,
    pub set_b: Option<Membership>,
    pub wavelength: Option<Wavelength>,
    pub wavelength_error: Option<String>,
    pub branch: Option<Vec<BranchPoint>>,
}

#[derive(Debug)]
pub struct ArtifactSet {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: PresetReport,
}

enum BRule {
    Fixed(f64),
    /// `a / lambda_max`.
    Marginal,
    /// `factor * a / lambda_max`.
    Critical(f64),
}

pub fn preset_names() -> Vec<String> {
    let mut names: Vec<String> = (1..=4).map(|k| format!("linear-1d-K{k}")).collect();
    names.extend((1..=3).map(|k| format!("schauder-1d-K{k}")));
    names.push("negative-1d-K4-periodic".into());
    names.push("branch-1d-K1".into());
    for k in 1..=5 {
        for size in ["large", "small"] {
            for start in ["random", "regular"] {
                names.push(format!("pattern-2d-K{k}-{size}-{start}"));
            }
        }
    }
    names
}

fn family_of(tag: &str) -> Option<KernelFamily> {
    Some(match tag {
        "K1" => KernelFamily::K1,
        "K2" => KernelFamily::K2,
        "K3" => KernelFamily::K3,
        "K4" => KernelFamily::K4,
        "K5" => KernelFamily::K5,
        _ => return None,
    })
}

fn family_spec(family: KernelFamily, dimension: usize) -> Result<KernelSpec> {
    KernelSpec::family(family, KernelParams::defaults(family, dimension), dimension)
}

fn open_grid(dimension: usize, scale: Scale) -> Result<Grid> {
    match scale {
        Scale::Desk => Grid::new(dimension, 25.0, if dimension == 1 { 200 } else { 128 }),
        Scale::Paper => Grid::new(dimension, 50.0, 600),
    }
}

/// Builds a preset; `seed` replaces the seed of random starts.
pub fn build_preset(name: &str, scale: Scale, seed: u64) -> Result<ExperimentPreset> {
    let unknown = || Error::UnknownPreset(name.to_string());
    let parts: Vec<&str> = name.split('-').collect();
    let (config, steps, rule) = match parts.as_slice() {
        ["linear", "1d", k] => {
            let family = family_of(k).filter(|f| *f != KernelFamily::K5).ok_or_else(unknown)?;
            let mut c = SimConfig::new(open_grid(1, scale)?, family_spec(family, 1)?, Response::linear(0.0))?;
            c.initial_condition = InitialCondition::Random { seed, amplitude: 1.0 };
            c.max_steps = LINEAR_STEPS;
            c.stationarity_tol = LINEAR_TOL;
            (c, vec![AnalysisStep::Spectrum, AnalysisStep::Stability], BRule::Marginal)
        }
        ["schauder", "1d", k] => {
            // Caption values of b applied to the family amplitudes; the lemma
            // hypotheses are conditions on b K itself.
            let (family, b, variant) = match *k {
                "K1" => (KernelFamily::K1, 0.8, SetBVariant::NarrowGap),
                "K2" => (KernelFamily::K2, 0.7, SetBVariant::NarrowGap),
                "K3" => (KernelFamily::K3, 0.1, SetBVariant::WideGap),
                _ => return Err(unknown()),
            };
            let mut c = SimConfig::new(open_grid(1, scale)?, family_spec(family, 1)?, Response::saturation(b))?;
            c.initial_condition = InitialCondition::StepSign;
            let steps = vec![AnalysisStep::SetB(SetBSpec::new(variant, SET_B_RUN_TOL))];
            (c, steps, BRule::Fixed(b))
        }
        ["negative", "1d", "K4", "periodic"] => {
            let grid = match scale {
                Scale::Desk => Grid::periodic(1, 48.0, 200)?,
                Scale::Paper => Grid::periodic(1, 96.0, 600)?,
            };
            let mut c = SimConfig::new(grid, family_spec(KernelFamily::K4, 1)?, Response::saturation(1.0))?;
            c.initial_condition = InitialCondition::PeriodicPlateau { s: PERIODIC_S };
            let steps = vec![
                AnalysisStep::SetB(SetBSpec::new(SetBVariant::Periodic { s: PERIODIC_S }, SET_B_RUN_TOL)),
                AnalysisStep::Wavelength,
            ];
            (c, steps, BRule::Fixed(1.0))
        }
        ["branch", "1d", "K1"] => {
            let mut c = SimConfig::new(
                open_grid(1, scale)?,
                family_spec(KernelFamily::K1, 1)?,
                Response::smooth_saturation(0.0),
            )?;
            c.initial_condition = InitialCondition::ModeSeed { index: 1, amplitude: 0.1 };
            let steps = vec![
                AnalysisStep::Spectrum,
                AnalysisStep::Stability,
                AnalysisStep::Branch { mode: 1, lo: 0.9, hi: 1.1, count: 21 },
            ];
            (c, steps, BRule::Critical(1.05))
        }
        ["pattern", "2d", k, size, start] => {
            let family = family_of(k).ok_or_else(unknown)?;
            let rule = match *size {
                "large" => BRule::Fixed(1.0),
                "small" => BRule::Critical(SMALL_B_FACTOR),
                _ => return Err(unknown()),
            };
            let ic = match *start {
                "random" => InitialCondition::Random { seed, amplitude: 1.0 },
                "regular" => InitialCondition::SquarePlateau { half_width: PLATEAU_HALF_WIDTH },
                _ => return Err(unknown()),
            };
            let mut c = SimConfig::new(open_grid(2, scale)?, family_spec(family, 2)?, Response::saturation(0.0))?;
            c.initial_condition = ic;
            c.max_steps = PATTERN_STEPS;
            (c, vec![AnalysisStep::Spectrum, AnalysisStep::Wavelength], rule)
        }
        _ => return Err(unknown()),
    };

    let needs_spectrum = !matches!(rule, BRule::Fixed(_))
        || steps
            .iter()
            .any(|s| matches!(s, AnalysisStep::Spectrum | AnalysisStep::Stability | AnalysisStep::Branch { .. }));
    let spectrum = if needs_spectrum {
        let modes = if config.grid.dimension() == 1 { 50 } else { 4 };
        Some(Spectrum::compute(&config.kernel, &config.grid, modes)?)
    } else {
        None
    };
    let mut config = config;
    config.response.b = match rule {
        BRule::Fixed(b) => b,
        BRule::Marginal => critical_b(&config, spectrum.as_ref())?,
        BRule::Critical(factor) => factor * critical_b(&config, spectrum.as_ref())?,
    };
    config.validate()?;

    let mut outputs: Vec<PathBuf> = ["config.toml", "initial.csv", "final.csv", "final.pgm", "report.json"]
        .iter()
        .map(PathBuf::from)
        .collect();
    if steps.contains(&AnalysisStep::Spectrum) {
        outputs.push("spectrum.csv".into());
    }
    if steps.iter().any(|s| matches!(s, AnalysisStep::Branch { .. })) {
        outputs.push("branch.csv".into());
    }
    Ok(ExperimentPreset {
        name: name.to_string(),
        scale,
        config,
        analysis_steps: steps,
        outputs,
        spectrum,
    })
}

fn critical_b(config: &SimConfig, spectrum: Option<&Spectrum>) -> Result<f64> {
    let s = spectrum.expect("spectrum computed for critical b");
    let lambda = s.lambda_max();
    if lambda <= 0.0 {
        return Err(Error::NoPositiveEigenvalue { lambda_max: lambda });
    }
    Ok(config.a / lambda)
}

/// Runs a preset and writes its artifacts to `out_dir/<name>/`.
pub fn run_preset(name: &str, scale: Scale, out_dir: impl AsRef<Path>, seed: u64) -> Result<ArtifactSet> {
    let preset = build_preset(name, scale, seed)?;
    execute_preset(&preset, out_dir.as_ref(), seed)
}

pub fn execute_preset(preset: &ExperimentPreset, out_dir: &Path, seed: u64) -> Result<ArtifactSet> {
    let config = &preset.config;
    let dir = out_dir.join(&preset.name);
    log::info!("running preset {} ({}) into {}", preset.name, preset.scale, dir.display());
    let u0 = config.initial_field()?;
    let run = integrate_from(config, u0.clone(), RunOptions::default())?;
    let spectrum = preset.spectrum.as_ref();

    let mut report = PresetReport {
        name: preset.name.clone(),
        scale: preset.scale,
        seed,
        b: config.response.b,
        b_critical: spectrum.map(|s| config.a / s.lambda_max()),
        lambda_max: spectrum.map(|s| s.lambda_max()),
        mode1_ratio: None,
        stability: None,
        set_b: None,
        wavelength: None,
        wavelength_error: None,
        branch: None,
        run,
    };
    if let Some(s) = spectrum {
        let u = &report.run.final_field;
        let norm = u.norm_l2();
        if norm > 0.0 {
            report.mode1_ratio = Some(u.inner(&s.eigenfield(0)).abs() / norm);
        }
    }
    for step in &preset.analysis_steps {
        match *step {
            AnalysisStep::Spectrum => {}
            AnalysisStep::Stability => {
                let s = spectrum.expect("spectrum computed for stability");
                report.stability = Some(stability_classify(config.a, config.response.b, s)?);
            }
            AnalysisStep::SetB(spec) => {
                report.set_b = Some(set_b_membership(&report.run.final_field, &spec)?);
            }
            AnalysisStep::Wavelength => match stripe_wavelength(&report.run.final_field) {
                Ok(w) => report.wavelength = Some(w),
                Err(Error::NoPeak(msg)) => report.wavelength_error = Some(msg),
                Err(e) => return Err(e),
            },
            AnalysisStep::Branch { mode, lo, hi, count } => {
                let s = spectrum.expect("spectrum computed for the branch scan");
                let bc = config.a / s.eigenvalues()[mode - 1];
                let bs: Vec<f64> = (0..count)
                    .map(|i| bc * (lo + (hi - lo) * i as f64 / (count.max(2) - 1) as f64))
                    .collect();
                let points = bifurcation_scan(&config.kernel, config.a, s, mode, &bs, 0.1, &ScanOptions::default())?;
                report.branch = Some(points);
            }
        }
    }

    let mut files = Vec::new();
    for file in &preset.outputs {
        let path = dir.join(file);
        match file.to_str().unwrap_or_default() {
            "config.toml" => {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                std::fs::write(&path, to_toml(config)).map_err(|e| Error::io(&path, e))?;
            }
            "initial.csv" => io::write_field_csv(&u0, &path)?,
            "final.csv" => io::write_field_csv(&report.run.final_field, &path)?,
            "final.pgm" => io::write_image(&report.run.final_field, &path)?,
            "report.json" => io::write_report(&report, &path)?,
            "spectrum.csv" => io::write_spectrum_csv(spectrum.expect("spectrum"), &path)?,
            "branch.csv" => io::write_branch_csv(report.branch.as_deref().unwrap_or_default(), &path)?,
            other => return Err(Error::invalid(format!("unknown artifact `{other}`"))),
        }
        files.push(path);
    }
    log::info!(
        "preset {}: {} steps, stationary={}, residual={:.3e}",
        preset.name,
        report.run.steps_taken,
        report.run.stationary,
        report.run.residual_inf
    );
    Ok(ArtifactSet { dir, files, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        for name in preset_names() {
            let parts: Vec<&str> = name.split('-').collect();
            assert!(parts.len() >= 3, "{name}");
        }
        assert_eq!(preset_names().len(), 29);
        assert!(matches!(build_preset("pattern-2d-K9-large-random", Scale::Desk, 1), Err(Error::UnknownPreset(_))));
        assert!(matches!(build_preset("nope", Scale::Desk, 1), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn linear_preset_is_marginal() {
        let p = build_preset("linear-1d-K2", Scale::Desk, 3).unwrap();
        let lmax = p.spectrum().unwrap().lambda_max();
        assert!((p.config.response.b * lmax - 1.0).abs() < 1e-12);
        assert_eq!(p.config.initial_condition, InitialCondition::Random { seed: 3, amplitude: 1.0 });
    }

    #[test]
    fn scale_parses() {
        assert_eq!("desk".parse::<Scale>().unwrap(), Scale::Desk);
        assert_eq!("paper".parse::<Scale>().unwrap(), Scale::Paper);
        assert!("huge".parse::<Scale>().is_err());
    }
}
