//! Parametric audio quality model: codec baseline, initial-delay and stall
//! impairments with per-segment weighting, and the content-preference
//! adjustment factor.

use serde::{Deserialize, Serialize};

use crate::error::{AsqmError, Result};

/// MOS scale bounds used by the R-scale mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosScale {
    pub m_min: f64,
    pub m_max: f64,
}

impl Default for MosScale {
    fn default() -> Self {
        Self { m_min: 1.05, m_max: 4.9 }
    }
}

/// Codec coefficient set and the bitrate range it is valid over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecProfile {
    pub name: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub br_min: f64,
    pub br_max: f64,
}

impl CodecProfile {
    pub fn aac_lc() -> Self {
        Self {
            name: "AAC-LC".to_string(),
            alpha1: 100.0,
            alpha2: -0.05,
            alpha3: 14.6,
            br_min: 32.0,
            br_max: 576.0,
        }
    }

    pub fn he_aac_v2() -> Self {
        Self {
            name: "HE-AAC-v2".to_string(),
            alpha1: 100.0,
            alpha2: -0.11,
            alpha3: 20.06,
            br_min: 16.0,
            br_max: 96.0,
        }
    }

    pub fn builtin() -> Vec<Self> {
        vec![Self::aac_lc(), Self::he_aac_v2()]
    }
}

/// Constants of the initial-delay impairment curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDelayModel {
    pub k: f64,
    pub c: f64,
}

impl Default for InitialDelayModel {
    fn default() -> Self {
        Self { k: 0.824, c: 1.017 }
    }
}

/// Temporal thirds of the media timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    A,
    B,
    C,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::A, Segment::B, Segment::C];

    pub fn index(self) -> usize {
        match self {
            Segment::A => 0,
            Segment::B => 1,
            Segment::C => 2,
        }
    }
}

/// Per-segment stall statistics for one playback session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStalls {
    /// Number of stalls in the segment.
    pub stalls: u32,
    /// Arithmetic mean stall length in seconds, 0 when there are none.
    pub mean_len: f64,
    /// Segment length in seconds.
    pub seg_len: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallSummary {
    pub segments: [SegmentStalls; 3],
    /// Initial buffering delay in seconds.
    pub initial_delay: f64,
    /// Total media length in seconds.
    pub media_len: f64,
}

impl StallSummary {
    /// A stall-free session of the given length and initial delay.
    pub fn clean(media_len: f64, initial_delay: f64) -> Self {
        let seg = SegmentStalls { stalls: 0, mean_len: 0.0, seg_len: media_len / 3.0 };
        Self { segments: [seg; 3], initial_delay, media_len }
    }

    pub fn segment(&self, seg: Segment) -> &SegmentStalls {
        &self.segments[seg.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.media_len > 0.0) {
            return Err(AsqmError::InvalidInput(format!(
                "media length must be positive, got {}",
                self.media_len
            )));
        }
        if !(self.initial_delay >= 0.0) {
            return Err(AsqmError::InvalidInput(format!(
                "initial delay must be non-negative, got {}",
                self.initial_delay
            )));
        }
        let seg_sum: f64 = self.segments.iter().map(|s| s.seg_len).sum();
        if (seg_sum - self.media_len).abs() > 1e-9 {
            return Err(AsqmError::InvalidInput(format!(
                "segment lengths sum to {seg_sum}, expected media length {}",
                self.media_len
            )));
        }
        for (seg, s) in Segment::ALL.iter().zip(self.segments.iter()) {
            if s.mean_len < 0.0 || !s.mean_len.is_finite() {
                return Err(AsqmError::InvalidInput(format!(
                    "segment {seg:?}: mean stall length {} is invalid",
                    s.mean_len
                )));
            }
            if (s.stalls == 0) != (s.mean_len == 0.0) {
                return Err(AsqmError::InvalidInput(format!(
                    "segment {seg:?}: {} stalls with mean length {}",
                    s.stalls, s.mean_len
                )));
            }
            if s.stalls > 0 && !(s.seg_len > 0.0) {
                return Err(AsqmError::InvalidInput(format!(
                    "segment {seg:?}: stalls present but segment length is {}",
                    s.seg_len
                )));
            }
        }
        Ok(())
    }
}

/// Intercept and per-segment degradation weights of the stall model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentWeights {
    /// Natural log of the model intercept C.
    pub ln_c: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_c: f64,
    /// True when the weights came out of a fit rather than configuration.
    #[serde(default)]
    pub calibrated: bool,
}

impl SegmentWeights {
    pub fn weight(&self, seg: Segment) -> f64 {
        match seg {
            Segment::A => self.d_a,
            Segment::B => self.d_b,
            Segment::C => self.d_c,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ln_c.is_finite() && self.d_a.is_finite() && self.d_b.is_finite() && self.d_c.is_finite()
    }
}

/// How the non-preference branch of the preference factor is evaluated.
///
/// `Consistent` keeps the preferring and non-preferring factors summing to
/// exactly 2; `Literal` flips the sign of beta in the non-preference branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PfMode {
    #[default]
    Consistent,
    Literal,
}

/// Content category, matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Category(String);

impl Category {
    pub fn new(name: &str) -> Self {
        Self(name.trim().to_ascii_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Per-category coefficients of the preference factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCoeffs {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub categories: Vec<(Category, CategoryCoeffs)>,
    pub mode: PfMode,
}

impl Default for PreferenceModel {
    fn default() -> Self {
        Self {
            categories: vec![
                (Category::new("music"), CategoryCoeffs { alpha: 0.423, beta: 0.197 }),
                (Category::new("sport"), CategoryCoeffs { alpha: 0.699, beta: 0.428 }),
                (Category::new("news"), CategoryCoeffs { alpha: 0.481, beta: 0.256 }),
            ],
            mode: PfMode::Consistent,
        }
    }
}

impl PreferenceModel {
    pub fn coeffs(&self, category: &Category) -> Result<&CategoryCoeffs> {
        self.categories
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, coeffs)| coeffs)
            .ok_or_else(|| {
                AsqmError::Config(format!("unknown content category \"{category}\""))
            })
    }

    pub fn category_names(&self) -> impl Iterator<Item = &Category> {
        self.categories.iter().map(|(c, _)| c)
    }
}

/// Maps an R-scale score to the MOS scale. The score is clamped to
/// [0, 100] before evaluation.
pub fn mos_from_r(x: f64, scale: MosScale) -> Result<f64> {
    if !x.is_finite() {
        return Err(AsqmError::InvalidInput(format!("R-scale score {x} is not finite")));
    }
    let x = x.clamp(0.0, 100.0);
    let mos = scale.m_min
        + (scale.m_max - scale.m_min) * x / 100.0
        + x * (x - 60.0) * (100.0 - x) * 7e-6;
    Ok(mos.clamp(scale.m_min, scale.m_max))
}

/// Codec impairment on the R-scale at the given bitrate.
pub fn codec_impairment(profile: &CodecProfile, bitrate_kbps: f64) -> Result<f64> {
    if !bitrate_kbps.is_finite() || bitrate_kbps < profile.br_min || bitrate_kbps > profile.br_max {
        return Err(AsqmError::BitrateOutOfRange {
            profile: profile.name.clone(),
            bitrate: bitrate_kbps,
            min: profile.br_min,
            max: profile.br_max,
        });
    }
    Ok(profile.alpha1 * (profile.alpha2 * bitrate_kbps).exp() + profile.alpha3)
}

/// Best quality the codec reaches at the given bitrate, absent any
/// network impairment.
pub fn codec_quality(profile: &CodecProfile, bitrate_kbps: f64, scale: MosScale) -> Result<f64> {
    let impairment = codec_impairment(profile, bitrate_kbps)?;
    mos_from_r(100.0 - impairment, scale)
}

/// Impairment added by the initial buffering delay. Zero delay means no
/// delay event and contributes nothing; positive delays evaluate the
/// logarithmic curve and are clamped to the usable quality range.
pub fn initial_delay_impairment(
    model: InitialDelayModel,
    delay_secs: f64,
    media_len_secs: f64,
    q_a: f64,
    scale: MosScale,
) -> Result<f64> {
    if !(media_len_secs > 0.0) {
        return Err(AsqmError::InvalidInput(format!(
            "media length must be positive, got {media_len_secs}"
        )));
    }
    if !(delay_secs >= 0.0) || !delay_secs.is_finite() {
        return Err(AsqmError::InvalidInput(format!(
            "initial delay must be non-negative, got {delay_secs}"
        )));
    }
    if delay_secs == 0.0 {
        return Ok(0.0);
    }
    let raw = -model.k * (model.c * delay_secs / media_len_secs).ln();
    Ok(raw.clamp(0.0, q_a - scale.m_min))
}

/// Stall impairment from the per-segment summary. A stall-free session
/// contributes nothing regardless of the fitted intercept.
pub fn stall_impairment(
    summary: &StallSummary,
    weights: &SegmentWeights,
    q_a: f64,
    scale: MosScale,
) -> Result<f64> {
    summary.validate()?;
    if summary.segments.iter().all(|s| s.stalls == 0) {
        return Ok(0.0);
    }
    let mut exponent = 0.0;
    for seg in Segment::ALL {
        let s = summary.segment(seg);
        exponent += f64::from(s.stalls) * s.mean_len * weights.weight(seg) / s.seg_len;
    }
    let predicted = (weights.ln_c + exponent).exp().clamp(scale.m_min, q_a);
    Ok(q_a - predicted)
}

/// Quality index from technical parameters only: codec baseline minus
/// the delay and stall impairments, on the model's MOS scale.
pub fn asqm1(q_a: f64, i_d: f64, i_s: f64, scale: MosScale) -> Result<f64> {
    for (name, v) in [("q_a", q_a), ("i_d", i_d), ("i_s", i_s)] {
        if !v.is_finite() {
            return Err(AsqmError::InvalidInput(format!("{name} = {v} is not finite")));
        }
    }
    Ok((q_a - i_d - i_s).clamp(scale.m_min, scale.m_max))
}

/// Preference factor for a category at the given quality index.
pub fn preference_factor(
    model: &PreferenceModel,
    category: &Category,
    mos: f64,
    has_preference: bool,
) -> Result<f64> {
    if !(mos > 0.0) || !mos.is_finite() {
        return Err(AsqmError::InvalidInput(format!(
            "preference factor needs a positive MOS, got {mos}"
        )));
    }
    let coeffs = model.coeffs(category)?;
    let pf_p = coeffs.alpha * mos.ln() + coeffs.beta;
    let pf = if has_preference {
        pf_p
    } else {
        match model.mode {
            PfMode::Consistent => 2.0 - pf_p,
            PfMode::Literal => 2.0 - coeffs.alpha * mos.ln() + coeffs.beta,
        }
    };
    if !(pf > 0.0) {
        return Err(AsqmError::ModelDomain(format!(
            "preference factor {pf} for category \"{category}\" at MOS {mos} is not positive"
        )));
    }
    Ok(pf)
}

/// Which preference branch a score took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PfBranch {
    Preferred,
    NotPreferred,
    /// No preference information; the factor is the identity.
    Unknown,
}

impl std::fmt::Display for PfBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PfBranch::Preferred => "preferred",
            PfBranch::NotPreferred => "not-preferred",
            PfBranch::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// All intermediates of one scoring pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub q_a: f64,
    pub i_d: f64,
    pub i_s: f64,
    pub asqm1: f64,
    pub pf: f64,
    pub pf_branch: PfBranch,
    pub asqm: f64,
}

/// Everything the scorer needs besides the session itself.
#[derive(Debug, Clone)]
pub struct ModelConstants {
    pub scale: MosScale,
    pub initial_delay: InitialDelayModel,
    pub codecs: Vec<CodecProfile>,
    pub preference: PreferenceModel,
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            scale: MosScale::default(),
            initial_delay: InitialDelayModel::default(),
            codecs: CodecProfile::builtin(),
            preference: PreferenceModel::default(),
        }
    }
}

impl ModelConstants {
    pub fn codec(&self, name: &str) -> Result<&CodecProfile> {
        self.codecs
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| AsqmError::Config(format!("unknown codec \"{name}\"")))
    }
}

/// Full scoring pass. `preference` carries whether the listener prefers
/// the content category, or `None` when no preference data is available,
/// in which case the factor is the identity.
#[allow(clippy::too_many_arguments)]
pub fn score(
    constants: &ModelConstants,
    profile: &CodecProfile,
    bitrate_kbps: f64,
    summary: &StallSummary,
    weights: &SegmentWeights,
    content_category: &Category,
    preference: Option<bool>,
) -> Result<ScoreReport> {
    let scale = constants.scale;
    let q_a = codec_quality(profile, bitrate_kbps, scale)?;
    let i_d = initial_delay_impairment(
        constants.initial_delay,
        summary.initial_delay,
        summary.media_len,
        q_a,
        scale,
    )?;
    let i_s = stall_impairment(summary, weights, q_a, scale)?;
    let asqm1 = asqm1(q_a, i_d, i_s, scale)?;
    let (pf, pf_branch) = match preference {
        Some(has_pref) => {
            let pf = preference_factor(&constants.preference, content_category, asqm1, has_pref)?;
            let branch = if has_pref { PfBranch::Preferred } else { PfBranch::NotPreferred };
            (pf, branch)
        }
        None => (1.0, PfBranch::Unknown),
    };
    let asqm = (asqm1 * pf).clamp(1.0, 5.0);
    Ok(ScoreReport { q_a, i_d, i_s, asqm1, pf, pf_branch, asqm })
}
