//! Run manifests: everything needed to reproduce a run's artifacts
//! bit-for-bit (except the wall clock, which is informational).

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub software_version: String,
    /// SHA-256 of the raw config file text.
    pub config_hash: String,
    /// SHA-256 of the embedded calibration file.
    pub calibration_hash: String,
    pub master_seed: u64,
    pub threads: usize,
    /// Jump sizes after resolving the `optimal` sentinel.
    pub resolved_ell: Vec<f64>,
    /// Stream indices consumed by the per-replica role, when the experiment
    /// is replica-structured. Together with the master seed and role tags
    /// these address every random draw of the run.
    pub replica_streams: Vec<u64>,
    /// How chains were initialized (`exact` or `burn_in:<steps>`).
    pub init_kind: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
