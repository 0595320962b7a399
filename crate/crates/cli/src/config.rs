use std::path::{Path, PathBuf};

use hiercode_core::runtime::ExpectationMode;
use hiercode_core::{ExperimentConfig, LayerGrid, PointMode};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

/// The config file: one table per subcommand plus shared settings.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfigFile {
    pub backend: Option<Backend>,
    pub points: Option<PointMode>,
    pub output: Option<OutputSection>,
    pub analyze: Option<ExperimentConfig>,
    pub simulate: Option<ExperimentConfig>,
    pub run: Option<ExperimentConfig>,
    pub inputs: Option<InputsSection>,
    pub optimize: Option<OptimizeSection>,
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Operands for `run`: two binary matrix files, or random dimensions.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsSection {
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub random: Option<[usize; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub n_workers: usize,
    pub layers: usize,
    pub total_threshold: usize,
    pub mu: f64,
    pub alpha: f64,
    #[serde(default = "default_mode")]
    pub mode: ExpectationMode,
}

fn default_mode() -> ExpectationMode {
    ExpectationMode::Exact
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub dims: [usize; 3],
    pub profile: Vec<usize>,
    /// `"MxN"` per layer; chosen automatically when absent.
    pub grids: Option<Vec<String>>,
    pub n_workers: usize,
    #[serde(default)]
    pub seed: u64,
    pub subset_budget: Option<usize>,
    pub tolerance: Option<f64>,
}

impl CliConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }
}

pub fn parse_grid(s: &str) -> Result<LayerGrid, String> {
    let (x, y) = s
        .trim()
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grids: expected MxN, got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("grids: bad number in {s:?}"))
    };
    Ok(LayerGrid::new(parse(x)?, parse(y)?))
}

pub fn parse_grids(list: &[String]) -> Result<Vec<LayerGrid>, String> {
    list.iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.trim().is_empty())
        .map(parse_grid)
        .collect()
}
