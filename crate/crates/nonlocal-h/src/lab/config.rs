use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::schur_grid::GridSplit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Layered,
    Convolution,
    Interleaved,
    Constant,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// potential, curl and harmonic data
    #[default]
    Full,
    /// `g = 0`, `x = 0`
    Potential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct Seeds {
    #[serde(default = "one")]
    pub f: u64,
    #[serde(default = "two")]
    pub g: u64,
    #[serde(default = "three")]
    pub x: u64,
    #[serde(default = "four")]
    pub test: u64,
}

fn one() -> u64 {
    1
}
fn two() -> u64 {
    2
}
fn three() -> u64 {
    3
}
fn four() -> u64 {
    4
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { f: 1, g: 2, x: 3, test: 4 }
    }
}

fn default_split() -> String {
    "gradients".into()
}

/// A scenario description read from TOML.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    /// fixture name or domain JSON path
    #[serde(default)]
    pub domain: String,
    pub family: Family,
    #[serde(default = "default_minus")]
    pub minus: f64,
    #[serde(default = "default_plus")]
    pub plus: f64,
    #[serde(default = "default_l1")]
    pub l1: f64,
    #[serde(default = "default_sigma")]
    pub sigma_cells: f64,
    /// kernel truncation radius in units of sigma
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_value")]
    pub value: f64,
    pub tensor_file: Option<String>,
    pub indices: Vec<usize>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub data: DataKind,
    #[serde(default = "default_fourier")]
    pub test_fourier: usize,
    #[serde(default = "default_random")]
    pub test_random: usize,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_tol")]
    pub flux_tolerance: f64,
    #[serde(default = "default_split")]
    pub split: String,
    pub output: Option<String>,
    /// divcurl only: replace the solution sequence by oscillating gradients
    #[serde(default)]
    pub adversarial: bool,
    /// interleaved family: dimensions of the three blocks
    #[serde(default = "default_block")]
    pub block0: usize,
    #[serde(default = "default_grid")]
    pub block1: usize,
    #[serde(default = "default_block")]
    pub block2: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_minus() -> f64 {
    1.0
}
fn default_plus() -> f64 {
    4.0
}
fn default_l1() -> f64 {
    0.5
}
fn default_sigma() -> f64 {
    2.0
}
fn default_cutoff() -> f64 {
    2.5
}
fn default_value() -> f64 {
    1.0
}
fn default_fourier() -> usize {
    8
}
fn default_random() -> usize {
    4
}
fn default_tol() -> f64 {
    0.1
}
fn default_block() -> usize {
    8
}
fn default_grid() -> usize {
    1024
}
fn default_amplitude() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::Config("index list is empty".into()));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) || self.indices[0] == 0 {
            return Err(Error::Config(format!("indices must be positive and strictly increasing: {:?}", self.indices)));
        }
        if self.family != Family::Interleaved && self.domain.is_empty() {
            return Err(Error::Config("a domain is required".into()));
        }
        self.grid_split()?;
        Ok(())
    }

    pub fn grid_split(&self) -> Result<GridSplit> {
        match self.split.as_str() {
            "gradients" => Ok(GridSplit::Gradients),
            "curl-free" => Ok(GridSplit::CurlFree),
            s => Err(Error::Config(format!("unknown split `{s}` (gradients | curl-free)"))),
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{:?}", self.family).to_lowercase())
    }
}

/// Worker count from `NLH_WORKERS`, default 1.
pub fn workers() -> usize {
    std::env::var("NLH_WORKERS").ok().and_then(|s| s.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_layered_config() {
        let c = ScenarioConfig::from_toml(
            r#"
            domain = "cavity-cube 12 4"
            family = "layered"
            indices = [1, 2, 4]
            seeds = { f = 5 }
            split = "curl-free"
            "#,
        )
        .unwrap();
        assert_eq!(c.family, Family::Layered);
        assert_eq!(c.seeds.f, 5);
        assert_eq!(c.seeds.g, 2);
        assert_eq!(c.grid_split().unwrap(), GridSplit::CurlFree);
    }

    #[test]
    fn rejects_unsorted_indices_and_unknown_keys() {
        assert!(ScenarioConfig::from_toml("domain = \"solid-cube 5\"\nfamily = \"layered\"\nindices = [2, 1]").is_err());
        assert!(ScenarioConfig::from_toml("domain = \"solid-cube 5\"\nfamily = \"layered\"\nindices = [1]\nbogus = 1").is_err());
    }
}
