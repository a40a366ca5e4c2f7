//! Pipeline configuration file.
//!
//! A JSON object; every field is optional and falls back to the default
//! below. Unknown fields are rejected.
//!
//! ```json
//! {
//!   "channel": "red",
//!   "deltaTms": 30.0,
//!   "length": 10,
//!   "mask": 3,
//!   "fps": 25.0,
//!   "durations": {
//!     "phoneme": {"min": 1, "max": 25},
//!     "viseme": {"min": 1, "max": 25},
//!     "biphone": {"min": 2, "max": 37},
//!     "biviseme": {"min": 2, "max": 37}
//!   },
//!   "deriveDurations": false,
//!   "svm": {"cGrid": [1, 4, 16, 64, 256], "gammaGrid": [0.001953125, 0.0078125, 0.03125, 0.125],
//!           "tolerance": 0.001, "maxPasses": 10000},
//!   "cvSplit": 0.2,
//!   "roiWidth": 64,
//!   "roiHeight": 48,
//!   "paths": {"corpus": null, "output": null}
//! }
//! ```
//!
//! With `deriveDurations` the bounds of each kind are the shortest and
//! longest training sample instead of the configured values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, UnitKind};
use crate::io;
use crate::segmentation::roi::{DEFAULT_ROI_HEIGHT, DEFAULT_ROI_WIDTH};
use crate::svm::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationBounds {
    pub min: usize,
    pub max: usize,
}

impl DurationBounds {
    pub fn new(min: usize, max: usize) -> Self {
        DurationBounds { min, max }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::invalid(format!(
                "duration bounds {}..={} must satisfy 1 <= min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DurationTable {
    pub phoneme: DurationBounds,
    pub viseme: DurationBounds,
    pub biphone: DurationBounds,
    pub biviseme: DurationBounds,
}

impl Default for DurationTable {
    fn default() -> Self {
        DurationTable {
            phoneme: DurationBounds::new(1, 25),
            viseme: DurationBounds::new(1, 25),
            biphone: DurationBounds::new(2, 37),
            biviseme: DurationBounds::new(2, 37),
        }
    }
}

impl DurationTable {
    pub fn get(&self, kind: UnitKind) -> DurationBounds {
        match kind {
            UnitKind::Phoneme => self.phoneme,
            UnitKind::Viseme => self.viseme,
            UnitKind::Biphone => self.biphone,
            UnitKind::Biviseme => self.biviseme,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub features: FeatureConfig,
    pub durations: DurationTable,
    pub derive_durations: bool,
    pub svm: TrainConfig,
    /// Fraction of every class held out to choose `(C, gamma)`.
    pub cv_split: f64,
    pub roi_width: usize,
    pub roi_height: usize,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureConfig::default(),
            durations: DurationTable::default(),
            derive_durations: false,
            svm: TrainConfig::default(),
            cv_split: 0.2,
            roi_width: DEFAULT_ROI_WIDTH,
            roi_height: DEFAULT_ROI_HEIGHT,
            paths: PathsConfig::default(),
        }
    }
}

const KNOWN_FIELDS: [&str; 13] = [
    "channel",
    "deltaTms",
    "length",
    "mask",
    "fps",
    "durations",
    "deriveDurations",
    "svm",
    "cvSplit",
    "roiWidth",
    "roiHeight",
    "paths",
    "$schema",
];

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.svm.validate()?;
        for kind in [UnitKind::Phoneme, UnitKind::Viseme, UnitKind::Biphone, UnitKind::Biviseme] {
            self.durations.get(kind).validate()?;
        }
        if !(self.cv_split > 0.0 && self.cv_split < 1.0) {
            return Err(Error::invalid(format!("cvSplit must be in (0, 1), got {}", self.cv_split)));
        }
        if self.roi_width < 8 || self.roi_height < 8 {
            return Err(Error::invalid("ROI must be at least 8x8 pixels"));
        }
        if self.features.mask > self.roi_width.min(self.roi_height) {
            return Err(Error::invalid("mask size exceeds the ROI dimensions"));
        }
        Ok(())
    }

    /// Parses and validates a configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        // flattened fields cannot use deny_unknown_fields, so check by hand
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::format("config", e.to_string()))?;
        let obj = raw
            .as_object()
            .ok_or_else(|| Error::format("config", "top level must be a JSON object"))?;
        if let Some(key) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
            return Err(Error::format("config", format!("unknown field `{key}`")));
        }
        let cfg: PipelineConfig = serde_json::from_value(raw).map_err(|e| Error::format("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::format("config", e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_text(path)?).map_err(|e| match e {
            Error::Format { what, detail } => Error::Format {
                what: format!("{what} {}", path.display()),
                detail,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::Channel;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = PipelineConfig::from_json(r#"{"channel":"green","deltaTms":0,"durations":{"phoneme":{"min":2,"max":9}}}"#)
            .unwrap();
        assert_eq!(cfg.features.channel, Channel::Green);
        assert_eq!(cfg.features.delta_t_ms, 0.0);
        assert_eq!(cfg.durations.phoneme, DurationBounds::new(2, 9));
        assert_eq!(cfg.durations.biphone, DurationBounds::new(2, 37));
        assert_eq!(cfg.features.length, 10);
    }

    #[test]
    fn bad_documents() {
        assert!(PipelineConfig::from_json(r#"{"lenght":10}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"mask":0}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"cvSplit":1.5}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"durations":{"phoneme":{"min":4,"max":3}}}"#).is_err());
        assert!(PipelineConfig::from_json("[1]").is_err());
        assert!(PipelineConfig::from_json(r#"{"svm":{"cGrid":[]}}"#).is_err());
    }
}
