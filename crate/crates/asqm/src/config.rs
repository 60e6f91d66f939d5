//! Declarative configuration documents: model constants and fitted
//! segment weights. Built-in defaults match the published coefficient
//! tables as decimal literals.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{AsqmError, Result};
use crate::qoe::{
    Category, CategoryCoeffs, CodecProfile, InitialDelayModel, ModelConstants, MosScale, PfMode,
    PreferenceModel, SegmentWeights,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CategoryEntry {
    name: String,
    alpha: f64,
    beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PreferenceSection {
    #[serde(default)]
    mode: PfMode,
    category: Vec<CategoryEntry>,
}

/// On-disk model constants document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigDoc {
    scale: MosScale,
    initial_delay: InitialDelayModel,
    codec: Vec<CodecProfile>,
    preference: PreferenceSection,
}

impl Default for ConfigDoc {
    fn default() -> Self {
        Self::from_constants(&ModelConstants::default())
    }
}

impl ConfigDoc {
    pub fn from_constants(constants: &ModelConstants) -> Self {
        Self {
            scale: constants.scale,
            initial_delay: constants.initial_delay,
            codec: constants.codecs.clone(),
            preference: PreferenceSection {
                mode: constants.preference.mode,
                category: constants
                    .preference
                    .categories
                    .iter()
                    .map(|(c, coeffs)| CategoryEntry {
                        name: c.as_str().to_string(),
                        alpha: coeffs.alpha,
                        beta: coeffs.beta,
                    })
                    .collect(),
            },
        }
    }

    pub fn into_constants(self) -> Result<ModelConstants> {
        if !(self.scale.m_min < self.scale.m_max) {
            return Err(AsqmError::Config(format!(
                "scale requires m_min < m_max, got {} and {}",
                self.scale.m_min, self.scale.m_max
            )));
        }
        if !(self.initial_delay.k > 0.0) || !(self.initial_delay.c > 0.0) {
            return Err(AsqmError::Config(format!(
                "initial delay constants must be positive, got k={} c={}",
                self.initial_delay.k, self.initial_delay.c
            )));
        }
        for profile in &self.codec {
            if !(profile.br_min > 0.0) || !(profile.br_min < profile.br_max) {
                return Err(AsqmError::Config(format!(
                    "codec {}: bitrate range {}-{} is invalid",
                    profile.name, profile.br_min, profile.br_max
                )));
            }
        }
        Ok(ModelConstants {
            scale: self.scale,
            initial_delay: self.initial_delay,
            codecs: self.codec,
            preference: PreferenceModel {
                categories: self
                    .preference
                    .category
                    .into_iter()
                    .map(|e| {
                        (Category::new(&e.name), CategoryCoeffs { alpha: e.alpha, beta: e.beta })
                    })
                    .collect(),
                mode: self.preference.mode,
            },
        })
    }
}

pub fn load_constants(path: &Path) -> Result<ModelConstants> {
    let text = std::fs::read_to_string(path)?;
    let doc: ConfigDoc = toml::from_str(&text)
        .map_err(|e| AsqmError::Config(format!("{}: {e}", path.display())))?;
    doc.into_constants()
}

pub fn save_constants(path: &Path, constants: &ModelConstants) -> Result<()> {
    let doc = ConfigDoc::from_constants(constants);
    let text = toml::to_string_pretty(&doc)
        .map_err(|e| AsqmError::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<SegmentWeights> {
    let text = std::fs::read_to_string(path)?;
    let weights: SegmentWeights = toml::from_str(&text)
        .map_err(|e| AsqmError::Config(format!("{}: {e}", path.display())))?;
    if !weights.is_finite() {
        return Err(AsqmError::Config("segment weights must be finite".to_string()));
    }
    Ok(weights)
}

pub fn save_weights(path: &Path, weights: &SegmentWeights) -> Result<()> {
    let text = toml::to_string_pretty(weights)
        .map_err(|e| AsqmError::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_document_roundtrips_to_builtin_constants() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        save_constants(&path, &ModelConstants::default()).unwrap();
        let loaded = load_constants(&path).unwrap();

        assert_eq!(loaded.scale, MosScale { m_min: 1.05, m_max: 4.9 });
        assert_eq!(loaded.initial_delay, InitialDelayModel { k: 0.824, c: 1.017 });
        assert_eq!(loaded.codecs, CodecProfile::builtin());
        let music = loaded.preference.coeffs(&Category::new("music")).unwrap();
        assert_eq!((music.alpha, music.beta), (0.423, 0.197));
        let sport = loaded.preference.coeffs(&Category::new("sport")).unwrap();
        assert_eq!((sport.alpha, sport.beta), (0.699, 0.428));
        let news = loaded.preference.coeffs(&Category::new("news")).unwrap();
        assert_eq!((news.alpha, news.beta), (0.481, 0.256));
    }

    #[test]
    fn invalid_codec_range_is_rejected() {
        let text = r#"
            [scale]
            m_min = 1.05
            m_max = 4.9

            [initial_delay]
            k = 0.824
            c = 1.017

            [[codec]]
            name = "broken"
            alpha1 = 1.0
            alpha2 = -0.1
            alpha3 = 0.0
            br_min = 96.0
            br_max = 16.0

            [preference]
            mode = "consistent"

            [[preference.category]]
            name = "music"
            alpha = 0.423
            beta = 0.197
        "#;
        let doc: ConfigDoc = toml::from_str(text).unwrap();
        assert!(matches!(doc.into_constants(), Err(AsqmError::Config(_))));
    }

    #[test]
    fn weights_document_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.toml");
        let weights = SegmentWeights {
            ln_c: 1.482,
            d_a: -0.61,
            d_b: -0.34,
            d_c: -0.27,
            calibrated: true,
        };
        save_weights(&path, &weights).unwrap();
        assert_eq!(load_weights(&path).unwrap(), weights);
    }

    #[test]
    fn non_finite_weights_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.toml");
        std::fs::write(&path, "ln_c = inf\nd_a = 0.0\nd_b = 0.0\nd_c = 0.0\n").unwrap();
        assert!(load_weights(&path).is_err());
    }
}
