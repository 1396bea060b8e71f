//! TOML config files.
//!
//! ```toml
//! seed = 3
//! preset = "figure8-left"
//! alpha = "pi/4"
//! pairs = 50000
//!
//! [station_a]
//! threshold = 0.5
//!
//! [station_b]
//! threshold = 0.75
//! noise_sigma = 0.01
//! ```
//!
//! Keys a command does not use are ignored by it; unknown keys are errors.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::angle::AngleSpec;
use crate::args::{Figure, Kind, PolicyName, PresetName, SourceName};
use crate::Usage;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    pub figure: Option<toml::Value>,
    pub theta: Option<AngleSpec>,
    pub alpha: Option<AngleSpec>,
    pub beta: Option<AngleSpec>,
    pub kind: Option<Kind>,
    pub n: Option<u64>,
    pub policy: Option<PolicyName>,
    pub policy_a: Option<PolicyName>,
    pub policy_b: Option<PolicyName>,
    pub assumed: Option<AngleSpec>,
    pub assumed_a: Option<AngleSpec>,
    pub assumed_b: Option<AngleSpec>,

    pub preset: Option<PresetName>,
    pub source: Option<SourceName>,
    pub basis: Option<AngleSpec>,
    pub steps: Option<usize>,
    pub pairs: Option<u64>,
    pub a1: Option<AngleSpec>,
    pub a2: Option<AngleSpec>,
    pub b1: Option<AngleSpec>,
    pub b2: Option<AngleSpec>,

    pub rate: Option<f64>,
    pub jitter_ns: Option<f64>,
    pub duration: Option<f64>,
    pub events_a: Option<PathBuf>,
    pub events_b: Option<PathBuf>,
    pub window: Option<u64>,
    pub truth: Option<PathBuf>,

    #[serde(default)]
    pub station_a: StationFile,
    #[serde(default)]
    pub station_b: StationFile,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationFile {
    pub threshold: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub efficiency: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Usage> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Usage(format!("config {}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str) -> Result<Self, Usage> {
        toml::from_str(text).map_err(|e| Usage(e.to_string()))
    }

    pub fn figure(&self) -> Result<Option<Figure>, Usage> {
        let name = match &self.figure {
            None => return Ok(None),
            Some(toml::Value::Integer(k)) => k.to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(other) => return Err(Usage(format!("figure must be 1-5 or \"special\", got {other}"))),
        };
        Figure::from_str(&name, true)
            .map(Some)
            .map_err(|_| Usage(format!("unknown figure `{name}`")))
    }
}

/// Resolves an optional config-file angle.
pub fn file_angle(spec: &Option<AngleSpec>, key: &str) -> Result<Option<eprb_core::Angle>, Usage> {
    spec.as_ref()
        .map(|s| s.resolve().map_err(|e| Usage(format!("config key `{key}`: {e}"))))
        .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_flat_keys() {
        let c = FileConfig::parse(
            "seed = 3\npreset = \"figure8-left\"\nalpha = \"pi/4\"\nfigure = 2\n[station_b]\nthreshold = 0.75\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.preset, Some(PresetName::Figure8Left));
        assert_eq!(c.station_b.threshold, Some(0.75));
        assert_eq!(c.station_a.threshold, None);
        assert_eq!(c.figure().unwrap(), Some(Figure::SplitShared));
        assert!(file_angle(&c.alpha, "alpha").unwrap().is_some());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse("sede = 3\n").is_err());
        assert!(FileConfig::parse("[station_a]\nthreshhold = 0.5\n").is_err());
    }

    #[test]
    fn special_figure_by_name() {
        let c = FileConfig::parse("figure = \"special\"\n").unwrap();
        assert_eq!(c.figure().unwrap(), Some(Figure::Special));
        assert!(FileConfig::parse("figure = 9\n").unwrap().figure().is_err());
    }
}
