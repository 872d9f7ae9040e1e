//! The experiment runner: dispatches a validated config to one of the
//! verification experiments, stages artifacts, and stamps the run manifest.

mod acceptance_sweep;
mod drift_diffusion;
mod noise_accumulation;
mod q_distribution;
mod weak_convergence;
mod zeta_concentration;

use std::path::PathBuf;
use std::time::Instant;

use hilbert_rwm_core::kernel::{ProposalParams, RwmSampler};

use crate::calibration::{calibration, Calibration, CALIBRATION_TOML};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::manifest::{now_unix, sha256_hex, RunManifest};
use crate::output::{write_json, RunDir};

/// What an experiment hands back to the dispatcher.
pub struct ExperimentResult {
    /// Threshold breaches; non-empty means exit code 2.
    pub breaches: Vec<String>,
    /// Human-readable summary lines for stdout.
    pub summary: Vec<String>,
    pub resolved_ell: Vec<f64>,
    pub replica_streams: Vec<u64>,
    pub init_kind: String,
}

pub(crate) struct Ctx<'a> {
    pub config: &'a ExperimentConfig,
    pub cal: Calibration,
    pub threads: usize,
}

/// Runs the configured experiment; returns the committed output directory
/// and any threshold breaches.
pub fn run_experiment(
    config: &ExperimentConfig,
    raw_config: &str,
    threads: usize,
    output_override: Option<PathBuf>,
) -> Result<(PathBuf, Vec<String>)> {
    let out_dir = output_override.unwrap_or_else(|| config.output_dir.clone());
    let stage = RunDir::stage(&out_dir)?;
    let started = Instant::now();
    let started_unix = now_unix();

    let ctx = Ctx {
        config,
        cal: calibration(),
        threads,
    };
    let result = match config.experiment {
        ExperimentKind::AcceptanceSweep => acceptance_sweep::run(&ctx, &stage)?,
        ExperimentKind::DriftDiffusion => drift_diffusion::run(&ctx, &stage)?,
        ExperimentKind::QDistribution => q_distribution::run(&ctx, &stage)?,
        ExperimentKind::WeakConvergence => weak_convergence::run(&ctx, &stage)?,
        ExperimentKind::NoiseAccumulation => noise_accumulation::run(&ctx, &stage)?,
        ExperimentKind::ZetaConcentration => zeta_concentration::run(&ctx, &stage)?,
    };

    let manifest = RunManifest {
        experiment: config.experiment.name().to_string(),
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: sha256_hex(raw_config),
        calibration_hash: sha256_hex(CALIBRATION_TOML),
        master_seed: config.master_seed,
        threads,
        resolved_ell: result.resolved_ell.clone(),
        replica_streams: result.replica_streams.clone(),
        init_kind: result.init_kind.clone(),
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&stage.file("manifest.json"), &manifest)?;
    let committed = stage.commit()?;

    for line in &result.summary {
        println!("{line}");
    }
    for breach in &result.breaches {
        eprintln!("ASSERTION BREACH: {breach}");
    }
    Ok((committed, result.breaches))
}

/// Builds the sampler for one grid cell, storing the configured tail margin.
pub(crate) fn build_sampler(
    config: &ExperimentConfig,
    ell: f64,
    n: usize,
) -> Result<RwmSampler<f64>> {
    Ok(RwmSampler::new(
        config.potential.clone(),
        config.covariance.clone(),
        config.s,
        ProposalParams::new(ell, n)?,
        config.n_store().max(n),
    )?)
}

pub(crate) fn init_kind_label(config: &ExperimentConfig) -> String {
    if config.potential.is_conjugate() {
        "exact".to_string()
    } else {
        let max_n = config.n_grid.iter().copied().max().unwrap_or(1);
        format!("burn_in:{}", 50 * max_n)
    }
}

/// Default diffusion-entry probes clipped to the active dimension.
pub(crate) fn probes_for(n: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
    let modes: Vec<usize> = hilbert_rwm_core::diagnostics::DEFAULT_PROBE_MODES
        .iter()
        .copied()
        .filter(|&m| m <= n)
        .collect();
    let pairs: Vec<(usize, usize)> = hilbert_rwm_core::diagnostics::DEFAULT_PROBE_PAIRS
        .iter()
        .copied()
        .filter(|&(i, j)| i <= n && j <= n)
        .collect();
    (modes, pairs)
}

