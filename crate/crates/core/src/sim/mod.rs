//! Experiment drivers: analytic sweeps, Monte Carlo finishing-time
//! comparisons, and local concurrent execution with injected stragglers.

mod analytic;
mod monte_carlo;
mod real_exec;
mod report;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::PointMode;
use crate::optimizer::{optimize_profile, OptimizerSpec};
use crate::runtime::{ExpectationMode, RuntimeParams};
use crate::tiling::Profile;

pub use analytic::run_analytic_sweep;
pub use monte_carlo::run_monte_carlo;
pub use real_exec::{run_real_exec, RealExecOutcome, REAL_EXEC_TOLERANCE};
pub use report::{ExperimentReport, ReportRow, TrialRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Plain,
    Hier,
    SumRate,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Plain => "plain",
            Scheme::Hier => "hier",
            Scheme::SumRate => "sumrate",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    #[default]
    Analytic,
    MonteCarlo,
    RealExec,
}

/// Which hierarchical profile the decode-cost columns use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostProfile {
    /// The finishing-time-optimized profile.
    #[default]
    Optimized,
    /// First three layers share the load, remaining layers get threshold 1.
    FirstThree,
}

fn default_slowdown() -> f64 {
    1.0
}

fn default_points() -> PointMode {
    PointMode::Chebyshev
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    /// `(n_x, n_z, n_y)`.
    pub dims: [usize; 3],
    pub n_workers: usize,
    /// Layer counts to sweep.
    pub layers: Vec<usize>,
    /// Per-worker load `k_sum / L`; also the plain code's threshold.
    pub load: usize,
    pub mu: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub mode: ExperimentMode,
    #[serde(default = "default_expectation")]
    pub expectation: ExpectationMode,
    #[serde(default)]
    pub cost_profile: CostProfile,
    /// Fixed hierarchical profile used instead of the optimizer for the
    /// layer count equal to its length.
    #[serde(default)]
    pub profile: Option<Vec<usize>>,
    #[serde(default)]
    pub straggler_probability: f64,
    #[serde(default = "default_slowdown")]
    pub slowdown: f64,
    #[serde(default = "default_points")]
    pub points: PointMode,
    /// 1-based workers that never report (real execution only).
    #[serde(default)]
    pub kill_workers: Vec<usize>,
}

fn default_expectation() -> ExpectationMode {
    ExpectationMode::Exact
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::InvalidParameter(format!("{key}: {msg}")));
        if self.schemes.is_empty() {
            return bad("schemes", "at least one scheme required".into());
        }
        if self.dims.contains(&0) {
            return bad(
                "dims",
                format!("dimensions must be positive, got {:?}", self.dims),
            );
        }
        if self.layers.is_empty() || self.layers.contains(&0) {
            return bad("layers", "need at least one positive layer count".into());
        }
        if self.load == 0 {
            return bad("load", "must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.straggler_probability) {
            return bad(
                "straggler_probability",
                format!("must lie in [0, 1], got {}", self.straggler_probability),
            );
        }
        if !(self.slowdown >= 1.0 && self.slowdown.is_finite()) {
            return bad("slowdown", format!("must be >= 1, got {}", self.slowdown));
        }
        if let Some(p) = &self.profile {
            Profile::new(p.clone())
                .map_err(|e| Error::InvalidParameter(format!("profile: {e}")))?;
        }
        if let Some(w) = self
            .kill_workers
            .iter()
            .find(|&&w| w == 0 || w > self.n_workers)
        {
            return bad(
                "kill_workers",
                format!("worker {w} outside 1..={}", self.n_workers),
            );
        }
        self.runtime_params()
            .map_err(|e| Error::InvalidParameter(format!("mu/alpha/n_workers: {e}")))?;
        Ok(())
    }

    pub fn runtime_params(&self) -> Result<RuntimeParams> {
        RuntimeParams::new(self.n_workers, self.mu, self.alpha)
    }

    /// Short stable digest of the canonical JSON form of the config.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Hierarchical profile for `layers`: the configured override when its
    /// length matches, otherwise the optimizer's choice at `K = load * layers`.
    pub fn hier_profile(&self, layers: usize) -> Result<Profile> {
        if let Some(p) = self.profile.as_ref().filter(|p| p.len() == layers) {
            return Profile::new(p.clone());
        }
        let spec = OptimizerSpec::new(
            layers,
            self.load * layers,
            self.runtime_params()?,
            self.expectation,
        )?;
        Ok(optimize_profile(&spec)?.profile)
    }
}

/// Decode-cost preset: for `L > 3` the first three layers split
/// `avg * L - (L - 3)` as evenly as possible (larger first) and every later
/// layer has threshold 1; for `L <= 3` every layer gets `avg`.
///
/// With `avg = 10` the first three thresholds are exactly `3L + 1`.
pub fn first_three_profile(layers: usize, avg: usize) -> Result<Profile> {
    if layers == 0 || avg == 0 {
        return Err(Error::InvalidParameter(
            "layers and average threshold must be positive".into(),
        ));
    }
    if layers <= 3 {
        return Profile::new(vec![avg; layers]);
    }
    let head = avg * layers - (layers - 3);
    let base = head / 3;
    let extra = head % 3;
    let mut k: Vec<usize> = (0..3).map(|i| base + usize::from(i < extra)).collect();
    k.extend(std::iter::repeat_n(1, layers - 3));
    Profile::new(k)
}

/// Mean and standard error of the mean (0 for a single sample).
pub(crate) fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
