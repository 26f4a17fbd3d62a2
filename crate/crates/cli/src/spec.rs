use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use cwrmt::ensembles::{DiagonalLaw, EnsembleConfig, EnsembleKind};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Esd,
    Moments,
    Norm,
    Correlations,
    Oracle,
    Graphcheck,
    Laplace,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Esd => "esd",
            Task::Moments => "moments",
            Task::Norm => "norm",
            Task::Correlations => "correlations",
            Task::Oracle => "oracle",
            Task::Graphcheck => "graphcheck",
            Task::Laplace => "laplace",
        }
    }
}

/// Ensemble template. The generalized ensemble uses the Curie-Weiss
/// potential at `beta` with scale `N^alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: String,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// `marginal` (scale N on every diagonal) or `own_length` (scale N - k).
    #[serde(default = "default_diagonal_law")]
    pub diagonal_law: String,
}

fn default_n() -> usize {
    100
}

fn default_diagonal_law() -> String {
    "marginal".into()
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            kind: "iid".into(),
            n: default_n(),
            beta: None,
            alpha: None,
            diagonal_law: default_diagonal_law(),
        }
    }
}

impl EnsembleSpec {
    pub fn kind(&self) -> CliResult<EnsembleKind> {
        self.kind.parse::<EnsembleKind>().map_err(|e| CliError::Config(e.to_string()))
    }

    /// A validated core configuration at dimension `n`.
    pub fn config(&self, n: usize, seed: u64) -> CliResult<EnsembleConfig> {
        let need_beta = || {
            self.beta
                .ok_or_else(|| CliError::Config(format!("ensemble.beta is required for {}", self.kind)))
        };
        let law = match self.diagonal_law.as_str() {
            "marginal" => DiagonalLaw::Marginal,
            "own_length" => DiagonalLaw::OwnLength,
            other => {
                return Err(CliError::Config(format!(
                    "ensemble.diagonal_law must be marginal or own_length, got {other:?}"
                )))
            }
        };
        let cfg = match self.kind()? {
            EnsembleKind::FullCw => EnsembleConfig::full_cw(n, need_beta()?, seed),
            EnsembleKind::DiagonalCw => EnsembleConfig::diagonal_cw(n, need_beta()?, seed).with_diagonal_law(law),
            EnsembleKind::Generalized => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| CliError::Config("ensemble.alpha is required for generalized".into()))?;
                EnsembleConfig::generalized_cw(n, alpha, need_beta()?, seed).map_err(|e| CliError::Config(e.to_string()))?
            }
            EnsembleKind::Iid => EnsembleConfig::iid(n, seed),
        };
        cfg.validate().map_err(|e| CliError::Config(format!("ensemble: {e}")))?;
        Ok(cfg)
    }
}

/// Pass/fail thresholds. Defaults are calibrated desk-scale values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Mean KS distance to the semicircle; `None` means 0.06 for the
    /// diagonal ensemble and 0.05 otherwise.
    pub ks_max: Option<f64>,
    pub m2_tol: f64,
    pub m4_range: [f64; 2],
    pub variance_max: f64,
    pub mc_sigmas: f64,
    pub low_temp_norm_tol: f64,
    pub high_temp_norm_max: f64,
    pub laplace_rel: f64,
    pub identity_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ks_max: None,
            m2_tol: 1e-10,
            m4_range: [1.85, 2.15],
            variance_max: 0.01,
            mc_sigmas: 3.0,
            low_temp_norm_tol: 0.07,
            high_temp_norm_max: 0.15,
            laplace_rel: 0.02,
            identity_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl Default for Histogram {
    fn default() -> Self {
        Self { lo: -3.0, hi: 3.0, width: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub task: Task,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Dimensions to sweep; defaults to `[ensemble.n]`.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    /// Mixing scales for the laplace task.
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    /// Scaling exponent of `X / N^gamma` for esd, moments and oracle.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub histogram: Histogram,
}

fn default_replicas() -> usize {
    10
}

fn default_k_max() -> usize {
    4
}

fn default_scales() -> Vec<f64> {
    vec![1e3, 1e4, 1e5, 1e6]
}

fn default_gamma() -> f64 {
    0.5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("cwrmt-out")
}

impl ExperimentSpec {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            ensemble: EnsembleSpec::default(),
            replicas: default_replicas(),
            k_max: default_k_max(),
            n_grid: Vec::new(),
            scales: default_scales(),
            gamma: default_gamma(),
            output_dir: default_output_dir(),
            seed: 0,
            tolerances: Tolerances::default(),
            histogram: Histogram::default(),
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("spec: {e}")))
    }

    /// `n_grid`, or `[ensemble.n]` when it is empty.
    pub fn grid(&self) -> Vec<usize> {
        if self.n_grid.is_empty() {
            vec![self.ensemble.n]
        } else {
            self.n_grid.clone()
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.grid().contains(&0) {
            return bad("n_grid entries must be positive".into());
        }
        if self.grid().windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        let h = &self.histogram;
        if !(h.width > 0.0 && h.hi > h.lo) {
            return bad(format!("histogram needs lo < hi and width > 0, got {h:?}"));
        }
        match self.task {
            Task::Graphcheck | Task::Laplace => {}
            _ => {
                for &n in &self.grid() {
                    self.ensemble.config(n, self.seed)?;
                }
            }
        }
        match self.task {
            Task::Moments | Task::Norm if self.replicas < 2 => {
                bad(format!("{} needs at least 2 replicas for a spread", self.task.name()))
            }
            Task::Correlations if self.replicas < cwrmt::correlations::MIN_REPLICAS => bad(format!(
                "correlations needs at least {} replicas for the Monte Carlo estimate",
                cwrmt::correlations::MIN_REPLICAS
            )),
            Task::Oracle if self.replicas < 2 => bad("oracle needs at least 2 Monte Carlo samples".into()),
            Task::Moments | Task::Oracle | Task::Correlations | Task::Graphcheck | Task::Laplace
                if self.k_max == 0 =>
            {
                bad("k_max must be at least 1".into())
            }
            Task::Laplace if self.ensemble.beta.is_none() => bad("laplace needs ensemble.beta".into()),
            Task::Laplace if self.scales.is_empty() || self.scales.iter().any(|s| s.is_nan() || *s <= 0.0) => {
                bad("laplace needs positive scales".into())
            }
            Task::Oracle | Task::Correlations
                if matches!(self.ensemble.kind()?, EnsembleKind::DiagonalCw) =>
            {
                Err(CliError::Core(cwrmt::Error::UnsupportedEnsemble(format!(
                    "{} needs a single shared latent parameter; diagonal_cw has one per diagonal",
                    self.task.name()
                ))))
            }
            _ => Ok(()),
        }
    }
}
