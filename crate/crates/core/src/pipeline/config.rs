use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{parse_json, SystemFile};
use crate::system::FiniteMetricSystem;

/// Built-in system generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    CircleDoubling { n: usize },
    CircleRotation { n: usize, k: usize },
    RandomMetric { n: usize, seed: u64 },
}

impl Generator {
    pub fn build(&self) -> Result<FiniteMetricSystem> {
        match *self {
            Generator::CircleDoubling { n } => FiniteMetricSystem::circle_doubling(n),
            Generator::CircleRotation { n, k } => FiniteMetricSystem::circle_rotation(n, k),
            Generator::RandomMetric { n, seed } => FiniteMetricSystem::random_metric(n, seed),
        }
    }
}

/// Where the system comes from: a JSON system file, a generator, or an
/// inline system description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSource {
    Path(PathBuf),
    Generated(Generator),
    Inline(SystemFile),
}

/// One component of a target mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetComponent {
    pub word: Vec<usize>,
    pub weight: f64,
}

fn default_max_period() -> usize {
    5
}
fn default_cap() -> usize {
    10_000
}
fn default_eps() -> Vec<f64> {
    vec![0.5, 1.0 / 3.0]
}
fn default_pi_radius() -> usize {
    10
}
fn default_depth() -> usize {
    3
}
fn default_scales() -> Vec<usize> {
    vec![8, 16, 32, 64, 128, 256]
}
fn default_threshold() -> f64 {
    0.05
}
fn default_sample() -> usize {
    48
}
fn default_mixtures() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub system: SystemSource,
    /// Finest level; levels run over `δ = 1/n` for `n = 1..=n_max`.
    pub n_max: usize,
    #[serde(default = "default_max_period")]
    pub max_period: usize,
    #[serde(default = "default_cap")]
    pub enumeration_cap: usize,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// π truncation radius for π̄ between periodic-orbit measures.
    #[serde(default = "default_pi_radius")]
    pub pi_radius: usize,
    /// Cylinder depth of the weak* proxy.
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Target mixture for the density demo. Defaults to half the first fixed
    /// point plus half the first 2-cycle of the density level.
    #[serde(default)]
    pub target: Option<Vec<TargetComponent>>,
    #[serde(default = "default_scales")]
    pub block_scales: Vec<usize>,
    /// Level of the density demo; defaults to `n_max`.
    #[serde(default)]
    pub density_level: Option<usize>,
    #[serde(default = "default_threshold")]
    pub density_threshold: f64,
    /// Ergodic measures per level used in cross-level Hausdorff distances.
    #[serde(default = "default_sample")]
    pub hausdorff_sample: usize,
    /// Random mixtures per level in the full-versus-ergodic check.
    #[serde(default = "default_mixtures")]
    pub mixture_samples: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |pointer: &str, message: &str| {
            Err(Error::Schema { pointer: pointer.into(), message: message.into() })
        };
        if self.n_max == 0 {
            return fail("/n_max", "must be at least 1");
        }
        if self.max_period == 0 {
            return fail("/max_period", "must be at least 1");
        }
        if self.enumeration_cap == 0 {
            return fail("/enumeration_cap", "must be at least 1");
        }
        if let Some(i) = self.eps.iter().position(|&e| !(e > 0.0 && e <= 1.0)) {
            return fail(&format!("/eps/{i}"), "must lie in (0, 1]");
        }
        if self.depth == 0 {
            return fail("/depth", "must be at least 1");
        }
        if let Some(i) = self.block_scales.iter().position(|&l| l == 0) {
            return fail(&format!("/block_scales/{i}"), "must be positive");
        }
        if !(self.density_threshold > 0.0) {
            return fail("/density_threshold", "must be positive");
        }
        if let Some(n) = self.density_level {
            if n == 0 || n > self.n_max {
                return fail("/density_level", "must lie in 1..=n_max");
            }
        }
        if self.hausdorff_sample == 0 {
            return fail("/hausdorff_sample", "must be at least 1");
        }
        if let Some(t) = &self.target {
            if t.is_empty() {
                return fail("/target", "must have at least one component");
            }
            if let Some(i) = t.iter().position(|c| c.word.is_empty() || !(c.weight > 0.0)) {
                return fail(&format!("/target/{i}"), "needs a non-empty word and positive weight");
            }
        }
        Ok(())
    }

    pub fn density_level(&self) -> usize {
        self.density_level.unwrap_or(self.n_max)
    }

    /// Hex SHA-256 of the canonical JSON form, defaults included.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Builds the system, resolving relative paths against `base`.
    pub fn load_system(&self, base: Option<&Path>) -> Result<FiniteMetricSystem> {
        match &self.system {
            SystemSource::Path(p) => {
                let p = match base {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p.clone(),
                };
                crate::io::load_system(&p)
            }
            SystemSource::Generated(g) => g.build(),
            SystemSource::Inline(f) => f.clone().into_system(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = parse_json(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"system": {"generator": "circle_doubling", "n": 8}, "n_max": 4}"#).unwrap();
        assert_eq!(cfg.max_period, 5);
        assert_eq!(cfg.enumeration_cap, 10_000);
        assert_eq!(cfg.depth, 3);
        assert_eq!(cfg.density_level(), 4);
        assert_eq!(cfg.load_system(None).unwrap().len(), 8);
    }

    #[test]
    fn unknown_field_names_the_field() {
        let err = parse_config(r#"{"system": "s.json", "n_max": 4, "n_maks": 3}"#).unwrap_err();
        match err {
            Error::Schema { message, .. } => assert!(message.contains("n_maks"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_values_carry_pointers() {
        let err = parse_config(r#"{"system": "s.json", "n_max": 4, "eps": [0.5, 0]}"#).unwrap_err();
        assert!(matches!(err, Error::Schema { ref pointer, .. } if pointer == "/eps/1"));
        let err = parse_config(r#"{"system": "s.json", "n_max": "four"}"#).unwrap_err();
        assert!(matches!(err, Error::Schema { ref pointer, .. } if pointer == "/n_max"));
    }

    #[test]
    fn inline_systems_and_digest() {
        let text = r#"{"system": {"metric": {"circle_grid": 4}, "map": [0, 2, 0, 2]}, "n_max": 2}"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.load_system(None).unwrap().len(), 4);
        assert_eq!(cfg.digest(), parse_config(text).unwrap().digest());
        assert_eq!(cfg.digest().len(), 64);
    }
}
