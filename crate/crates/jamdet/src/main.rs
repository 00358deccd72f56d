//! Command-line harness around the jamdet library.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 unsupported dimension, 5 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use jamdet::calibration::{
    empirical_pfa, mc_threshold, threshold_from_statistics, CalibrationResult, SampleProvenance,
    SampleSet,
};
use jamdet::config::{parse_hypothesis, RunConfig};
use jamdet::detectors::DetectorSpec;
use jamdet::harness::{analytic_setup, run_sweep};
use jamdet::matfile;
use jamdet::signal::assemble_received;
use jamdet::wishart::{analytic_threshold, pfa_grid};
use jamdet::{JamdetError, Result};

#[derive(Parser)]
#[command(
    name = "jamdet",
    about = "Singular-value jamming detection experiments",
    version
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted (required for gen-samples).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count; 0 means automatic.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate a detection threshold from H0 statistics.
    Calibrate,
    /// Analytic false-alarm probabilities or threshold inversion (K = 3).
    Analytic,
    /// Run the sweep configured in the [sweep] section, emitting CSV.
    Sweep,
    /// Generate received-signal sample matrices into a JDMX1 file.
    GenSamples,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &JamdetError) -> u8 {
    match e {
        JamdetError::Config(_)
        | JamdetError::InvalidArgument(_)
        | JamdetError::InsufficientTrials(_)
        | JamdetError::InsufficientDimension(_) => 2,
        JamdetError::NumericalFailure(_)
        | JamdetError::DegenerateInput(_)
        | JamdetError::DegenerateCovariance(_)
        | JamdetError::NotPositiveDefinite(_) => 3,
        JamdetError::UnsupportedDimension(_) => 4,
        JamdetError::Io(_) => 5,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| JamdetError::Config(format!("thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| JamdetError::Config("--config is required".into()))?;
    let cfg = RunConfig::from_path(config_path)?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    match cli.command {
        Command::Calibrate => cmd_calibrate(&cfg, seed, cli.out.as_deref()),
        Command::Analytic => cmd_analytic(&cfg, seed, cli.out.as_deref()),
        Command::Sweep => cmd_sweep(&cfg, seed, cli.out.as_deref()),
        Command::GenSamples => cmd_gen_samples(&cfg, seed, cli.out.as_deref()),
    }
}

/// Writes to the path atomically, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => matfile::write_atomic(path, |buf| {
            buf.extend_from_slice(bytes);
            Ok(())
        }),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn cmd_calibrate(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let cal_cfg = cfg
        .calibrate
        .as_ref()
        .ok_or_else(|| JamdetError::Config("config has no [calibrate] section".into()))?;
    let det: DetectorSpec = cfg.detector(cal_cfg.detector);
    let scenario = cfg.scenario(seed);
    let result: CalibrationResult = match &cal_cfg.samples_file {
        None => mc_threshold(&det, &scenario, cal_cfg.pfa_target, cal_cfg.trials, seed)?,
        Some(path) => {
            let bytes = std::fs::read(path)?;
            let matrices = matfile::read_matrices(&mut bytes.as_slice())?;
            let set = SampleSet {
                matrices,
                provenance: SampleProvenance::External { path: path.clone() },
            };
            set.validate()?;
            if set.matrices.len() < 100
                || (set.matrices.len() as f64 * cal_cfg.pfa_target) < 10.0
            {
                return Err(JamdetError::InsufficientTrials(format!(
                    "need >= 100 samples and count * pfa_target >= 10, got {}",
                    set.matrices.len()
                )));
            }
            det.check_dims(set.matrices[0].k())?;
            let mut stats: Vec<f64> = set
                .matrices
                .iter()
                .map(|y| Ok(det.statistic(y)?.value))
                .collect::<Result<_>>()?;
            let eta = threshold_from_statistics(&mut stats, cal_cfg.pfa_target);
            let (achieved, _) = empirical_pfa(&det, &set, eta)?;
            CalibrationResult {
                detector: det,
                eta,
                pfa_target: cal_cfg.pfa_target,
                trials: set.matrices.len(),
                seed,
                achieved_pfa_estimate: achieved,
            }
        }
    };
    let mut json = serde_json::to_string_pretty(&result)
        .map_err(|e| JamdetError::NumericalFailure(e.to_string()))?;
    json.push('\n');
    emit(out, json.as_bytes())
}

#[derive(Serialize)]
struct AnalyticOutput {
    detector: String,
    /// Detector-domain threshold solving the false-alarm target, if requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pfa_target: Option<f64>,
    /// (threshold, pfa) pairs over the requested detector-domain grid.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    curve: Vec<(f64, f64)>,
    /// Covariance eigenvalues the curve conditions on.
    zeta: Vec<f64>,
}

fn cmd_analytic(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let an = cfg
        .analytic
        .as_ref()
        .ok_or_else(|| JamdetError::Config("config has no [analytic] section".into()))?;
    let scenario = cfg.scenario(seed);
    let expected_m = match an.detector {
        jamdet::detectors::DetectorKind::Ssv => 1,
        jamdet::detectors::DetectorKind::Ksv => 2,
        other => {
            return Err(JamdetError::UnsupportedDimension(format!(
                "analytic curves exist for ssv and ksv, not {other}"
            )))
        }
    };
    if scenario.m != expected_m {
        return Err(JamdetError::Config(format!(
            "analytic {} expects scenario m = {expected_m}, got {}",
            an.detector, scenario.m
        )));
    }
    let (which, ctx, _) = analytic_setup(&scenario, seed, an.epsilon_rel)?;
    let eta = match an.pfa_target {
        Some(target) => Some(analytic_threshold(target, &ctx, which)? / scenario.sigma2_w),
        None => None,
    };
    let curve = if an.eta_grid.is_empty() {
        Vec::new()
    } else {
        let eig_grid: Vec<f64> = an.eta_grid.iter().map(|e| e * scenario.sigma2_w).collect();
        let pfas = pfa_grid(&eig_grid, &ctx, which)?;
        an.eta_grid.iter().copied().zip(pfas).collect()
    };
    let output = AnalyticOutput {
        detector: an.detector.to_string(),
        eta,
        pfa_target: an.pfa_target,
        curve,
        zeta: ctx.spec.zeta.clone(),
    };
    let mut json = serde_json::to_string_pretty(&output)
        .map_err(|e| JamdetError::NumericalFailure(e.to_string()))?;
    json.push('\n');
    emit(out, json.as_bytes())
}

fn cmd_sweep(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let spec = cfg.sweep_spec(seed)?;
    let result = run_sweep(&spec)?;
    emit(out, result.to_csv_string().as_bytes())
}

fn cmd_gen_samples(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let gs = cfg
        .gen_samples
        .as_ref()
        .ok_or_else(|| JamdetError::Config("config has no [gen_samples] section".into()))?;
    let path = out.ok_or_else(|| JamdetError::Config("gen-samples requires --out".into()))?;
    let hypothesis = parse_hypothesis(&gs.hypothesis)?;
    let scenario = cfg.scenario(seed);
    scenario.validate()?;
    // Same stream as synthetic calibration, so calibrating against the file
    // reproduces `calibrate` without a samples_file bit for bit.
    let tag = jamdet::calibration::tag::CALIBRATE;
    let matrices: Vec<_> = (0..gs.count as u64)
        .map(|t| {
            let mut rng = jamdet::rng::derive_rng(
                seed,
                &[tag, hypothesis.active_jammers() as u64, t],
            );
            assemble_received(&scenario, hypothesis, &mut rng, Default::default())
        })
        .collect::<Result<_>>()?;
    matfile::write_atomic(path, |buf| matfile::write_matrices(buf, &matrices))
}
