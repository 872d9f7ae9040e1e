//! Experiment configuration: TOML loading and validation that reports every
//! violation, not just the first.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use hilbert_rwm_core::limit::optimal_ell;
use hilbert_rwm_core::potential::PotentialSpec;
use hilbert_rwm_core::spectral::{CovarianceSpec, SobolevIndex};

use crate::error::CliError;

/// Which verification experiment to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    AcceptanceSweep,
    DriftDiffusion,
    QDistribution,
    WeakConvergence,
    NoiseAccumulation,
    ZetaConcentration,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "acceptance_sweep" => Some(Self::AcceptanceSweep),
            "drift_diffusion" => Some(Self::DriftDiffusion),
            "q_distribution" => Some(Self::QDistribution),
            "weak_convergence" => Some(Self::WeakConvergence),
            "noise_accumulation" => Some(Self::NoiseAccumulation),
            "zeta_concentration" => Some(Self::ZetaConcentration),
        _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AcceptanceSweep => "acceptance_sweep",
            Self::DriftDiffusion => "drift_diffusion",
            Self::QDistribution => "q_distribution",
            Self::WeakConvergence => "weak_convergence",
            Self::NoiseAccumulation => "noise_accumulation",
            Self::ZetaConcentration => "zeta_concentration",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Jump-size grid: explicit values or the `"optimal"` sentinel.
#[derive(Clone, Debug, PartialEq)]
pub enum EllGrid {
    Values(Vec<f64>),
    Optimal,
}

/// A validated experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub covariance: CovarianceSpec<f64>,
    pub potential: PotentialSpec<f64>,
    pub s: SobolevIndex<f64>,
    pub n_grid: Vec<usize>,
    pub ell_grid: EllGrid,
    pub t: f64,
    pub replicas: usize,
    pub inner_mc: u64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Resolves the `optimal` sentinel through the speed maximizer.
    pub fn resolve_ells(&self) -> Result<Vec<f64>, CliError> {
        match &self.ell_grid {
            EllGrid::Values(v) => Ok(v.clone()),
            EllGrid::Optimal => {
                let opt = optimal_ell(0.1_f64, 10.0, 1e-10)?;
                Ok(vec![opt.ell])
            }
        }
    }

    /// Stored modes: the largest truncation plus 64 tail modes for
    /// Sobolev-norm observables (clamped to the explicit-law length).
    pub fn n_store(&self) -> usize {
        let max_n = self.n_grid.iter().copied().max().unwrap_or(1);
        let want = max_n + 64;
        match self.covariance.max_mode() {
            Some(limit) => want.min(limit),
            None => want,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: String,
    covariance: RawCovariance,
    potential: RawPotential,
    #[serde(default)]
    s: f64,
    #[serde(rename = "N_grid")]
    n_grid: Vec<i64>,
    ell_grid: RawEllGrid,
    #[serde(rename = "T", default = "default_t")]
    t: f64,
    #[serde(default = "default_replicas")]
    replicas: i64,
    #[serde(default = "default_inner_mc")]
    inner_mc: i64,
    master_seed: u64,
    #[serde(default)]
    output_dir: Option<String>,
}

fn default_t() -> f64 {
    1.0
}
fn default_replicas() -> i64 {
    2000
}
fn default_inner_mc() -> i64 {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCovariance {
    law: String,
    kappa: Option<f64>,
    amplitude: Option<f64>,
    lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: String,
    a: Option<Vec<f64>>,
    weight: Option<f64>,
    w: Option<Vec<f64>>,
    s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawEllGrid {
    Sentinel(String),
    Values(Vec<f64>),
}

/// Loads and validates a config file; returns the config together with the
/// raw bytes (hashed into the run manifest). All violations are reported.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String), CliError> {
    let raw_text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = parse_config(&raw_text)?;
    Ok((config, raw_text))
}

/// Parses and validates config text.
pub fn parse_config(raw_text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig =
        toml::from_str(raw_text).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut violations = Vec::new();

    let experiment = ExperimentKind::parse(&raw.experiment);
    if experiment.is_none() {
        violations.push(format!(
            "experiment: unknown experiment `{}` (expected one of acceptance_sweep, \
             drift_diffusion, q_distribution, weak_convergence, noise_accumulation, \
             zeta_concentration)",
            raw.experiment
        ));
    }

    let covariance = build_covariance(&raw.covariance, &mut violations);
    let potential = build_potential(&raw.potential, &mut violations);

    let s = match SobolevIndex::new(raw.s) {
        Ok(s) => {
            if raw.s < 0.0 {
                violations.push(format!("s: must be nonnegative, got {}", raw.s));
            }
            if let Some(CovarianceSpec::PowerLaw { kappa, .. }) = covariance.as_ref() {
                if raw.s >= kappa - 0.5 {
                    violations.push(format!(
                        "s: s = {} >= kappa - 1/2 = {} violates the trace-class \
                         condition for the reference measure on the working space",
                        raw.s,
                        kappa - 0.5
                    ));
                }
            }
            Some(s)
        }
        Err(e) => {
            violations.push(format!("s: {e}"));
            None
        }
    };

    let mut n_grid = Vec::new();
    if raw.n_grid.is_empty() {
        violations.push("N_grid: must contain at least one truncation level".into());
    }
    for &n in &raw.n_grid {
        if n <= 0 {
            violations.push(format!("N_grid: entries must be positive, got {n}"));
        } else {
            n_grid.push(n as usize);
        }
    }
    if let (Some(cov), Some(&max_n)) = (covariance.as_ref(), n_grid.iter().max()) {
        if let Some(limit) = cov.max_mode() {
            if max_n > limit {
                violations.push(format!(
                    "N_grid: largest truncation {max_n} exceeds the {limit} explicit \
                     eigenvalues provided"
                ));
            }
        }
    }

    let ell_grid = match &raw.ell_grid {
        RawEllGrid::Sentinel(s) if s == "optimal" => Some(EllGrid::Optimal),
        RawEllGrid::Sentinel(s) => {
            violations.push(format!(
                "ell_grid: unknown sentinel `{s}` (only \"optimal\" is recognized)"
            ));
            None
        }
        RawEllGrid::Values(v) => {
            if v.is_empty() {
                violations.push("ell_grid: must contain at least one value".into());
            }
            for &ell in v {
                if !ell.is_finite() || ell <= 0.0 {
                    violations
                        .push(format!("ell_grid: entries must be positive, got {ell}"));
                }
            }
            Some(EllGrid::Values(v.clone()))
        }
    };

    if !raw.t.is_finite() || raw.t <= 0.0 {
        violations.push(format!("T: must be positive, got {}", raw.t));
    }
    if raw.replicas <= 0 {
        violations.push(format!("replicas: must be positive, got {}", raw.replicas));
    }
    if raw.inner_mc <= 0 {
        violations.push(format!("inner_mc: must be positive, got {}", raw.inner_mc));
    }

    if !violations.is_empty() {
        return Err(CliError::Invalid(violations));
    }

    let experiment = experiment.expect("validated above");
    Ok(ExperimentConfig {
        output_dir: PathBuf::from(
            raw.output_dir
                .unwrap_or_else(|| format!("runs/{}", experiment.name())),
        ),
        experiment,
        covariance: covariance.expect("validated above"),
        potential: potential.expect("validated above"),
        s: s.expect("validated above"),
        n_grid,
        ell_grid: ell_grid.expect("validated above"),
        t: raw.t,
        replicas: raw.replicas as usize,
        inner_mc: raw.inner_mc as u64,
        master_seed: raw.master_seed,
    })
}

fn build_covariance(
    raw: &RawCovariance,
    violations: &mut Vec<String>,
) -> Option<CovarianceSpec<f64>> {
    match raw.law.as_str() {
        "power" | "power_law" => {
            let kappa = raw.kappa;
            let amplitude = raw.amplitude.unwrap_or(1.0);
            if raw.lambdas.is_some() {
                violations
                    .push("covariance.lambdas: not used by the power law".to_string());
            }
            match kappa {
                None => {
                    violations.push(
                        "covariance.kappa: required for the power law".to_string(),
                    );
                    None
                }
                Some(kappa) => match CovarianceSpec::power_law(amplitude, kappa) {
                    Ok(cov) => Some(cov),
                    Err(e) => {
                        violations.push(format!("covariance: {e}"));
                        None
                    }
                },
            }
        }
        "explicit" => match &raw.lambdas {
            None => {
                violations.push(
                    "covariance.lambdas: required for the explicit law".to_string(),
                );
                None
            }
            Some(lambdas) => match CovarianceSpec::explicit(lambdas.clone()) {
                Ok(cov) => Some(cov),
                Err(e) => {
                    violations.push(format!("covariance: {e}"));
                    None
                }
            },
        },
        other => {
            violations.push(format!(
                "covariance.law: unknown law `{other}` (expected \"power\" or \"explicit\")"
            ));
            None
        }
    }
}

fn build_potential(
    raw: &RawPotential,
    violations: &mut Vec<String>,
) -> Option<PotentialSpec<f64>> {
    match raw.kind.as_str() {
        "zero" => Some(PotentialSpec::zero()),
        "diagonal_quadratic" => match &raw.a {
            None => {
                violations.push(
                    "potential.a: required for kind = \"diagonal_quadratic\"".into(),
                );
                None
            }
            Some(a) => match PotentialSpec::diagonal_quadratic(a.clone()) {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(format!("potential: {e}"));
                    None
                }
            },
        },
        "sobolev_squared" => {
            let weight = raw.weight.unwrap_or(1.0);
            let s = raw.s.unwrap_or(0.0);
            match SobolevIndex::new(s)
                .and_then(|idx| PotentialSpec::sobolev_squared(weight, idx))
            {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(format!("potential: {e}"));
                    None
                }
            }
        }
        "cosine_tilt" => match &raw.w {
            None => {
                violations
                    .push("potential.w: required for kind = \"cosine_tilt\"".into());
                None
            }
            Some(w) => match PotentialSpec::cosine_tilt(w.clone()) {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(format!("potential: {e}"));
                    None
                }
            },
        },
        other => {
            violations.push(format!(
                "potential.kind: unknown kind `{other}` (expected zero, \
                 diagonal_quadratic, sobolev_squared, or cosine_tilt)"
            ));
            None
        }
    }
}
