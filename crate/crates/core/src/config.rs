//! Engine configuration, loaded from TOML. Every key is optional.
//!
//! ```toml
//! [text.asr]
//! max_edits = 1
//! min_token_len_for_fuzzy = 4
//! fuzz_discount = 0.5
//! tau = 0.5
//!
//! [fusion.weights_default]
//! asr = 1.0
//! visual = 1.0
//!
//! [diversify]
//! per_video_cap = 3
//!
//! [visual]
//! grid_dims = "8x8"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy_index::MatchPolicy;
use crate::ingest::{Category, GridDims};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("invalid configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoryConfig {
    pub max_edits: u8,
    pub min_token_len_for_fuzzy: usize,
    pub fuzz_discount: f64,
    /// Confidence threshold applied at ingest.
    pub tau: f64,
}

impl CategoryConfig {
    fn default_for(category: Category) -> Self {
        let p = MatchPolicy::default_for(category);
        Self {
            max_edits: p.max_edits,
            min_token_len_for_fuzzy: p.min_token_len_for_fuzzy,
            fuzz_discount: p.fuzz_discount,
            tau: match category {
                Category::Asr => 0.5,
                Category::Ocr | Category::Label => 0.0,
            },
        }
    }
}

impl Default for CategoryConfig {
    fn default() -> Self {
        Self::default_for(Category::Asr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    pub asr: CategoryConfig,
    pub ocr: CategoryConfig,
    pub label: CategoryConfig,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            asr: CategoryConfig::default_for(Category::Asr),
            ocr: CategoryConfig::default_for(Category::Ocr),
            label: CategoryConfig::default_for(Category::Label),
        }
    }
}

impl TextConfig {
    pub fn get(&self, category: Category) -> &CategoryConfig {
        match category {
            Category::Asr => &self.asr,
            Category::Ocr => &self.ocr,
            Category::Label => &self.label,
        }
    }
}

/// Fusion weight used for a clause that carries no explicit weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClauseWeights {
    pub asr: f64,
    pub ocr: f64,
    pub label: f64,
    pub visual: f64,
}

impl Default for ClauseWeights {
    fn default() -> Self {
        Self {
            asr: 1.0,
            ocr: 1.0,
            label: 1.0,
            visual: 1.0,
        }
    }
}

impl ClauseWeights {
    pub fn text(&self, category: Category) -> f64 {
        match category {
            Category::Asr => self.asr,
            Category::Ocr => self.ocr,
            Category::Label => self.label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub weights_default: ClauseWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiversifyConfig {
    pub per_video_cap: usize,
}

impl Default for DiversifyConfig {
    fn default() -> Self {
        Self { per_video_cap: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisualConfig {
    #[serde(with = "grid_dims_text")]
    pub grid_dims: GridDims,
}

mod grid_dims_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::ingest::GridDims;

    pub fn serialize<S: Serializer>(d: &GridDims, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(d)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GridDims, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub text: TextConfig,
    pub fusion: FusionConfig,
    pub diversify: DiversifyConfig,
    pub visual: VisualConfig,
}

impl EngineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn policy(&self, category: Category) -> MatchPolicy {
        let c = self.text.get(category);
        MatchPolicy {
            category,
            max_edits: c.max_edits,
            min_token_len_for_fuzzy: c.min_token_len_for_fuzzy,
            fuzz_discount: c.fuzz_discount,
        }
    }

    pub fn tau(&self, category: Category) -> f64 {
        self.text.get(category).tau
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for c in Category::ALL {
            self.policy(c)
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("text.{c}: {e}")))?;
            let tau = self.tau(c);
            if !(0.0..=1.0).contains(&tau) {
                return Err(ConfigError::Invalid(format!("text.{c}.tau {tau} outside [0, 1]")));
            }
        }
        let w = &self.fusion.weights_default;
        for (name, v) in [("asr", w.asr), ("ocr", w.ocr), ("label", w.label), ("visual", w.visual)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid(format!("fusion.weights_default.{name} = {v}")));
            }
        }
        if self.diversify.per_video_cap == 0 {
            return Err(ConfigError::Invalid("diversify.per_video_cap must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = EngineConfig::default();
        assert_eq!(c.policy(Category::Asr).max_edits, 1);
        assert_eq!(c.policy(Category::Ocr).max_edits, 1);
        assert_eq!(c.policy(Category::Label).max_edits, 0);
        assert_eq!(c.policy(Category::Label).min_token_len_for_fuzzy, 4);
        assert_eq!(c.tau(Category::Asr), 0.5);
        assert_eq!(c.tau(Category::Label), 0.0);
        assert_eq!(c.diversify.per_video_cap, 3);
        assert_eq!(c.visual.grid_dims, GridDims::new(8, 8));
    }

    #[test]
    fn partial_toml_and_roundtrip() {
        let c = EngineConfig::from_toml_str(
            "[text.label]\nmax_edits = 1\n[visual]\ngrid_dims = \"4x6\"\n[diversify]\nper_video_cap = 2\n",
        )
        .unwrap();
        assert_eq!(c.policy(Category::Label).max_edits, 1);
        assert_eq!(c.policy(Category::Asr).max_edits, 1);
        assert_eq!(c.visual.grid_dims, GridDims::new(4, 6));
        assert_eq!(EngineConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn rejects_invalid() {
        assert!(EngineConfig::from_toml_str("[text.asr]\nmax_edits = 3\n").is_err());
        assert!(EngineConfig::from_toml_str("[text.asr]\ntau = 2.0\n").is_err());
        assert!(EngineConfig::from_toml_str("[diversify]\nper_video_cap = 0\n").is_err());
        assert!(EngineConfig::from_toml_str("[bogus]\n").is_err());
    }
}
