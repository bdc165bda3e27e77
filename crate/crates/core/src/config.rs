//! Run configuration: a flat JSON document, overridable from the command line.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::{Error, Result};
use crate::oracle::DEFAULT_ORACLE_MAX_ATOMS;
use crate::propagator::{Method, PropagatorConfig};

/// `N lambda' = 2 pi x 100 rad/s` at `N = 10^5`.
pub const DEFAULT_LAMBDA_A_PRIME: f64 = 2.0 * PI * 100.0 / 1e5;

/// Zeeman shift used by the invariance check, rad/s.
pub const DEFAULT_ZEEMAN_CHECK_P: f64 = 2.0 * PI * 100.0;

/// Auto `tau_max` in units of the one-axis-twisting optimum.
pub const AUTO_TAU_FACTOR: f64 = 3.0;

pub const DEFAULT_ORACLE_SIZES: [usize; 5] = [2, 4, 6, 8, 12];
pub const DEFAULT_SWEEP_SIZES: [usize; 5] = [250, 500, 1000, 2000, 4000];

/// Estimated optimal dimensionless time of `4 lambda' (J^x)^2`:
/// `3^(1/6) N^(-2/3) / 4`.
pub fn oat_optimal_tau(n_atoms: usize) -> f64 {
    3f64.powf(1.0 / 6.0) * (n_atoms as f64).powf(-2.0 / 3.0) / 4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Run,
    Sweep,
    OracleCheck,
    Fig1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Single atom number; `n_list` wins when both are set.
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    /// rad/s.
    pub lambda_a_prime: f64,
    /// rad/s.
    pub zeeman_p: f64,
    /// Dimensionless; `null` selects `AUTO_TAU_FACTOR * oat_optimal_tau(N)`.
    pub tau_max: Option<f64>,
    pub samples: usize,
    pub method: Method,
    pub d_switch: usize,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    pub max_halvings: u32,
    pub oracle_tol: f64,
    pub oracle_max_n: usize,
    pub zeeman_check_p: f64,
    pub fig1a_n: usize,
    pub fig1b_n: usize,
    pub output_dir: PathBuf,
    /// `null` uses every available core.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let prop = PropagatorConfig::default();
        Self {
            mode: Mode::Run,
            n: None,
            n_list: None,
            lambda_a_prime: DEFAULT_LAMBDA_A_PRIME,
            zeeman_p: 0.0,
            tau_max: None,
            samples: 200,
            method: prop.method,
            d_switch: prop.d_switch,
            krylov_dim: prop.krylov_dim,
            krylov_tol: prop.krylov_tol,
            max_halvings: prop.max_halvings,
            oracle_tol: 1e-8,
            oracle_max_n: DEFAULT_ORACLE_MAX_ATOMS,
            zeeman_check_p: DEFAULT_ZEEMAN_CHECK_P,
            fig1a_n: 100_000,
            fig1b_n: 1_000,
            output_dir: PathBuf::from("out"),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !self.lambda_a_prime.is_finite() || self.lambda_a_prime == 0.0 {
            return bad(format!(
                "lambda_a_prime must be finite and nonzero, got {}",
                self.lambda_a_prime
            ));
        }
        if !self.zeeman_p.is_finite() || !self.zeeman_check_p.is_finite() {
            return bad("Zeeman shifts must be finite".into());
        }
        if let Some(t) = self.tau_max {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tau_max must be positive, got {t}"));
            }
        }
        if self.samples < 2 {
            return bad(format!("samples must be at least 2, got {}", self.samples));
        }
        if !(self.oracle_tol > 0.0) {
            return bad("oracle_tol must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.atom_numbers().is_empty() {
            return bad("no atom numbers given".into());
        }
        self.propagator_config().validate()
    }

    /// Atom numbers for the current mode.
    pub fn atom_numbers(&self) -> Vec<usize> {
        if let Some(list) = &self.n_list {
            return list.clone();
        }
        if let Some(n) = self.n {
            return vec![n];
        }
        match self.mode {
            Mode::Run => vec![self.fig1b_n],
            Mode::Sweep => DEFAULT_SWEEP_SIZES.to_vec(),
            Mode::OracleCheck => DEFAULT_ORACLE_SIZES.to_vec(),
            Mode::Fig1 => vec![self.fig1a_n, self.fig1b_n],
        }
    }

    pub fn tau_max_for(&self, n_atoms: usize) -> f64 {
        self.tau_max
            .unwrap_or_else(|| AUTO_TAU_FACTOR * oat_optimal_tau(n_atoms.max(2)))
    }

    pub fn propagator_config(&self) -> PropagatorConfig {
        PropagatorConfig {
            method: self.method,
            d_switch: self.d_switch,
            krylov_dim: self.krylov_dim,
            krylov_tol: self.krylov_tol,
            max_halvings: self.max_halvings,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Git blob hash of [`Self::to_json`].
    pub fn content_hash(&self) -> Result<String> {
        Ok(git_blob_sha1(self.to_json()?.as_bytes()))
    }
}

/// SHA-1 over `blob <len>\0<bytes>`, as `git hash-object` computes it.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut hasher = Sha1::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
