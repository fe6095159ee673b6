use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use nonlocal_core::analysis::{
    bifurcation_scan, check_lemma_hypotheses, verify_ft_invariance, InvarianceReport, Lemma, LemmaReport, ScanOptions,
};
use nonlocal_core::config::{parse_config, to_toml, SimConfig};
use nonlocal_core::dynamics::{integrate_from, stability_classify, ModeRecorder, ResponseKind, RunOptions};
use nonlocal_core::io;
use nonlocal_core::preset::{preset_names, run_preset, Scale};
use nonlocal_core::{Error, Field, Spectrum};
use serde_json::json;

/// Simulator for u_t = -a u + f(T u) with a truncated convolution T.
#[derive(Parser)]
#[command(name = "nonlocal", version)]
struct Cli {
    /// Seed for random initial conditions and set-B samples.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a config to stationarity or the step budget.
    Run { config: PathBuf },
    /// Run a named experiment.
    Preset {
        /// Preset name; omit with --list to print all names.
        name: Option<String>,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long)]
        list: bool,
    },
    /// Leading eigenvalues of T and the critical b.
    Spectrum {
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        modes: usize,
    },
    /// Lemma hypotheses for the config kernel (scaled by the response b) and
    /// a sampled invariance test.
    CheckKernel {
        config: PathBuf,
        /// Lemma tag (Positive1, Positive2, SmallInhibition1, SmallInhibition2,
        /// Negative) or `all`.
        #[arg(long, default_value = "all")]
        lemma: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Stationary branch near b = a / lambda_mode.
    Scan {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        mode: usize,
        /// Lower end as a multiple of a / lambda_mode.
        #[arg(long, default_value_t = 0.9)]
        from: f64,
        #[arg(long, default_value_t = 1.1)]
        to: f64,
        #[arg(long, default_value_t = 21)]
        count: usize,
        #[arg(long, default_value_t = 0.1)]
        seed_amplitude: f64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. }) => 4,
        Some(Error::BlowUp { .. } | Error::Convergence { .. } | Error::NoPositiveEigenvalue { .. }) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads(cli.threads)?;
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Run { config } => cmd_run(&config, out, cli.seed),
        Command::Preset { name, scale, list } => {
            if list || name.is_none() {
                for n in preset_names() {
                    println!("{n}");
                }
                return Ok(());
            }
            let scale: Scale = scale.parse()?;
            let artifacts = run_preset(name.as_deref().unwrap_or_default(), scale, out, cli.seed.unwrap_or(1))?;
            let r = &artifacts.report;
            println!(
                "{}: steps={} stationary={} residual={:.3e}",
                r.name, r.run.steps_taken, r.run.stationary, r.run.residual_inf
            );
            for f in &artifacts.files {
                println!("  {}", f.display());
            }
            Ok(())
        }
        Command::Spectrum { config, modes } => cmd_spectrum(&config, out, modes),
        Command::CheckKernel { config, lemma, samples } => cmd_check(&config, out, &lemma, samples, cli.seed.unwrap_or(0)),
        Command::Scan {
            config,
            mode,
            from,
            to,
            count,
            seed_amplitude,
        } => cmd_scan(&config, out, mode, (from, to, count), seed_amplitude),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) -> anyhow::Result<()> {
    use anyhow::Context;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: usize) -> anyhow::Result<()> {
    if threads > 1 {
        log::warn!("built without the parallel feature; --threads {threads} ignored");
    }
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<SimConfig> {
    Ok(parse_config(path)?)
}

fn cmd_run(path: &Path, out: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let mut config = load(path)?;
    if let Some(seed) = seed {
        config.initial_condition = config.initial_condition.clone().with_seed(seed);
    }
    let u0 = config.initial_field()?;
    io::write_field_csv(&u0, out.join("initial.csv"))?;
    let history = match &config.history {
        Some(h) => Some((Spectrum::compute(&config.kernel, &config.grid, h.modes)?, h.stride)),
        None => None,
    };
    let snapshots = out.join("snapshots");
    let mut dump = |step: usize, field: &Field| io::write_field_csv(field, snapshots.join(format!("u_{step:08}.csv")));
    let mut opts = RunOptions {
        modes: history.as_ref().map(|(spectrum, stride)| ModeRecorder {
            spectrum,
            stride: *stride,
        }),
        snapshot_stride: config.snapshot_stride,
        on_snapshot: None,
    };
    if config.snapshot_stride > 0 {
        opts.on_snapshot = Some(&mut dump);
    }
    let report = integrate_from(&config, u0, opts)?;
    io::write_field_csv(&report.final_field, out.join("final.csv"))?;
    io::write_image(&report.final_field, out.join("final.pgm"))?;
    #[cfg(feature = "png")]
    io::write_png(&report.final_field, out.join("final.png"))?;
    io::write_report(&report, out.join("report.json"))?;
    std::fs::write(out.join("config.toml"), to_toml(&config)).map_err(|e| Error::Io {
        path: out.join("config.toml"),
        source: e,
    })?;
    println!(
        "steps={} stationary={} residual={:.3e} t={}",
        report.steps_taken, report.stationary, report.residual_inf, report.final_time
    );
    info!("artifacts in {}", out.display());
    Ok(())
}

fn cmd_spectrum(path: &Path, out: &Path, modes: usize) -> anyhow::Result<()> {
    let config = load(path)?;
    let spectrum = Spectrum::compute(&config.kernel, &config.grid, modes)?;
    io::write_spectrum_csv(&spectrum, out.join("spectrum.csv"))?;
    let lambda = spectrum.lambda_max();
    let stability = (lambda > 0.0)
        .then(|| stability_classify(config.a, config.response.b, &spectrum))
        .transpose()?;
    let report = json!({
        "lambda_max": lambda,
        "lambda_min": spectrum.lambda_min(),
        "b_critical": (lambda > 0.0).then(|| config.a / lambda),
        "max_residual": spectrum.residuals().iter().cloned().fold(0.0f64, f64::max),
        "stability": stability,
    });
    io::write_report(&report, out.join("spectrum.json"))?;
    println!("lambda_max={lambda:.12e}");
    if lambda > 0.0 {
        println!("b_critical={:.12e}", config.a / lambda);
    }
    Ok(())
}

fn cmd_check(path: &Path, out: &Path, lemma: &str, samples: usize, seed: u64) -> anyhow::Result<()> {
    let config = load(path)?;
    let lemmas: Vec<Lemma> = if lemma.eq_ignore_ascii_case("all") {
        Lemma::ALL.to_vec()
    } else {
        vec![Lemma::parse(lemma).ok_or_else(|| Error::InvalidArgument(format!("unknown lemma `{lemma}`")))?]
    };
    let scaled = config.kernel.scaled(config.response.b);
    let mut reports: Vec<LemmaReport> = Vec::new();
    let mut invariance: Vec<InvarianceReport> = Vec::new();
    for l in lemmas {
        let report = check_lemma_hypotheses(&scaled, l)?;
        io::write_lemma_csv(&report, out.join(format!("lemma_{}.csv", l.tag())))?;
        println!("{}: applicable={}", l.tag(), report.applicable);
        for h in report.hypotheses.iter().filter(|h| !h.satisfied) {
            println!("  unmet {}: value={:.6e} threshold={:.6e}", h.name, h.value, h.threshold);
        }
        if samples > 0 && config.response.kind == ResponseKind::Saturation {
            let inv = verify_ft_invariance(&config.kernel, &config.grid, &config.response, l, samples, seed)?;
            println!("  invariance {:?}: worst={:.3e} (seed {})", inv.status, inv.worst_violation, inv.worst_seed);
            invariance.push(inv);
        }
        reports.push(report);
    }
    io::write_report(&json!({ "lemmas": reports, "invariance": invariance }), out.join("check.json"))?;
    Ok(())
}

fn cmd_scan(path: &Path, out: &Path, mode: usize, range: (f64, f64, usize), seed_amplitude: f64) -> anyhow::Result<()> {
    let config = load(path)?;
    let (from, to, count) = range;
    if count == 0 || !(from <= to) {
        return Err(Error::InvalidArgument(format!("bad b range {from}..{to} with {count} values")).into());
    }
    let spectrum = Spectrum::compute(&config.kernel, &config.grid, mode.max(1))?;
    if mode == 0 || mode > spectrum.len() {
        return Err(Error::InvalidArgument(format!("mode {mode} out of range")).into());
    }
    let lambda = spectrum.eigenvalues()[mode - 1];
    let bc = config.a / lambda;
    let bs: Vec<f64> = (0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            bc * (from + (to - from) * t)
        })
        .collect();
    let kind = match config.response.kind {
        ResponseKind::Saturation => {
            log::warn!("clamp saturation is not differentiable; scanning with smooth_saturation");
            ResponseKind::SmoothSaturation
        }
        k => k,
    };
    let opts = ScanOptions {
        response: kind,
        ..Default::default()
    };
    let points = bifurcation_scan(&config.kernel, config.a, &spectrum, mode, &bs, seed_amplitude, &opts)?;
    io::write_branch_csv(&points, out.join("branch.csv"))?;
    for p in &points {
        println!(
            "b={:.8e} b/bc={:.4} amplitude={:.6e} residual={:.3e}{}",
            p.b,
            p.b / bc,
            p.amplitude,
            p.residual,
            if p.converged { "" } else { " gap" }
        );
    }
    Ok(())
}
