//! Spatio-temporal DCT features for every feasible sub-sequence of a mouth
//! volume.
//!
//! The chain for one sub-sequence is: select a colour channel, delay the
//! video by the audio-visual offset, subtract each pixel's mean over the whole
//! sequence, cut the sub-sequence, stretch it to a fixed number of frames,
//! take the 3D DCT, keep the coefficients under the pyramid mask and append
//! the original length in frames.

pub mod dct;
pub mod transcript;
pub mod volume;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dct::{dct3, idct3, pyramid_count, pyramid_extract, pyramid_indices, DctBasis};
pub use transcript::{frame_span, Transcript, TranscriptEntry};
pub use volume::{resample_to_length, subtract_sequence_mean, time_shift, ScalarVolume};

use crate::error::{Error, Result};
use crate::eval::viseme::viseme_of;
use crate::segmentation::{Channel, RoiVolume};

pub type FeatureVector = Vec<f64>;

/// Separator of composite two-unit labels such as `AE+T`.
pub const PAIR_SEPARATOR: char = '+';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubSequenceSpec {
    pub start: usize,
    pub duration: usize,
}

impl SubSequenceSpec {
    pub fn new(start: usize, duration: usize) -> Self {
        SubSequenceSpec { start, duration }
    }

    pub fn end(&self) -> usize {
        self.start + self.duration
    }
}

/// All `(start, d)` with `min_dur <= d <= max_dur` that fit in `frames`,
/// ordered by start, then duration.
pub fn enumerate_subsequences(frames: usize, min_dur: usize, max_dur: usize) -> Vec<SubSequenceSpec> {
    let min_dur = min_dur.max(1);
    let mut out = Vec::new();
    for start in 0..frames {
        for d in min_dur..=max_dur.min(frames - start) {
            out.push(SubSequenceSpec::new(start, d));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FeatureConfig {
    pub channel: Channel,
    #[serde(rename = "deltaTms")]
    pub delta_t_ms: f64,
    /// Frames every sub-sequence is stretched to.
    pub length: usize,
    /// Pyramid mask size.
    pub mask: usize,
    pub fps: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            channel: Channel::Red,
            delta_t_ms: 30.0,
            length: 10,
            mask: 3,
            fps: 25.0,
        }
    }
}

impl FeatureConfig {
    pub fn dimension(&self) -> usize {
        pyramid_count(self.mask) + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::invalid(format!("uniform length must be >= 2, got {}", self.length)));
        }
        if self.mask == 0 || self.mask > self.length {
            return Err(Error::invalid(format!(
                "mask size {} must be between 1 and the uniform length {}",
                self.mask, self.length
            )));
        }
        if !(self.delta_t_ms >= 0.0) || !(self.fps > 0.0) {
            return Err(Error::invalid("time shift must be >= 0 and fps > 0"));
        }
        Ok(())
    }
}

/// One channel of the ROI as a volume, delayed and mean-free.
pub fn prepare_volume(roi: &RoiVolume, cfg: &FeatureConfig) -> Result<ScalarVolume> {
    let mut data = Vec::with_capacity(roi.frame_len() * roi.frames());
    for t in 0..roi.frames() {
        data.extend(roi.plane(cfg.channel, t)?.iter().map(|&v| v as f64));
    }
    let raw = ScalarVolume::from_vec(roi.width(), roi.height(), roi.frames(), data)?;
    let shifted = time_shift(&raw, cfg.delta_t_ms, cfg.fps)?;
    Ok(subtract_sequence_mean(&shifted))
}

fn check_spec(spec: &SubSequenceSpec, frames: usize) -> Result<()> {
    if spec.duration == 0 || spec.end() > frames {
        return Err(Error::invalid(format!(
            "sub-sequence {}+{} does not fit {frames} frames",
            spec.start, spec.duration
        )));
    }
    Ok(())
}

/// Feature vector of one sub-sequence by literal composition of the stages.
pub fn featurize(roi: &RoiVolume, cfg: &FeatureConfig, spec: &SubSequenceSpec) -> Result<FeatureVector> {
    cfg.validate()?;
    check_spec(spec, roi.frames())?;
    let prepared = prepare_volume(roi, cfg)?;
    featurize_prepared(&prepared, cfg, spec)
}

pub fn featurize_prepared(prepared: &ScalarVolume, cfg: &FeatureConfig, spec: &SubSequenceSpec) -> Result<FeatureVector> {
    check_spec(spec, prepared.frames())?;
    let sub = prepared.slice_frames(spec.start, spec.duration)?;
    let stretched = resample_to_length(&sub, cfg.length)?;
    let coeffs = dct3(&stretched);
    let mut out = pyramid_extract(&coeffs, cfg.mask)?;
    out.push(spec.duration as f64);
    Ok(out)
}

/// Bulk feature extraction for one ROI.
///
/// Every stage after mean subtraction is linear, so the masked coefficients
/// are computed from per-frame spatial projections onto the few
/// low-frequency x/y basis pairs, combined with per-duration temporal weights.
/// Results equal [`featurize`] up to rounding.
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    frames: usize,
    /// Spatial frequency pairs `(i, j)` with `i + j < mask`.
    pairs: Vec<(usize, usize)>,
    /// `projections[p][t]` for pair `p` and frame `t`.
    projections: Vec<Vec<f64>>,
    /// Mask entries as `(pair index, k)`.
    layout: Vec<(usize, usize)>,
    temporal: DctBasis,
}

impl FeatureExtractor {
    pub fn new(roi: &RoiVolume, cfg: &FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.mask > roi.width().min(roi.height()) {
            return Err(Error::invalid(format!(
                "mask size {} exceeds the ROI size {}x{}",
                cfg.mask,
                roi.width(),
                roi.height()
            )));
        }
        let prepared = prepare_volume(roi, cfg)?;
        Ok(Self::from_prepared(&prepared, cfg))
    }

    pub fn from_prepared(prepared: &ScalarVolume, cfg: &FeatureConfig) -> Self {
        let (w, h, frames) = prepared.dims();
        let s = cfg.mask;
        let bx = DctBasis::new(w);
        let by = DctBasis::new(h);
        let mut pairs = Vec::new();
        for i in 0..s {
            for j in 0..s - i {
                pairs.push((i, j));
            }
        }
        let layout = pyramid_indices(s)
            .into_iter()
            .map(|(i, j, k)| (pairs.iter().position(|&p| p == (i, j)).unwrap(), k))
            .collect();
        let per_frame: Vec<Vec<f64>> = (0..frames)
            .into_par_iter()
            .map(|t| {
                let frame = prepared.frame(t);
                // column sums weighted by each needed y basis row
                let rows: Vec<Vec<f64>> = (0..s)
                    .map(|j| {
                        let mut acc = vec![0.0; w];
                        for (y, &b) in by.row(j).iter().enumerate() {
                            for (a, &v) in acc.iter_mut().zip(&frame[y * w..(y + 1) * w]) {
                                *a += b * v;
                            }
                        }
                        acc
                    })
                    .collect();
                pairs
                    .iter()
                    .map(|&(i, j)| bx.row(i).iter().zip(&rows[j]).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let projections = (0..pairs.len())
            .map(|p| per_frame.iter().map(|f| f[p]).collect())
            .collect();
        FeatureExtractor {
            cfg: cfg.clone(),
            frames,
            pairs,
            projections,
            layout,
            temporal: DctBasis::new(cfg.length),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// Weights folding linear resampling and the temporal DCT row `k`.
    fn temporal_weights(&self, duration: usize) -> Vec<Vec<f64>> {
        let resample = volume::resample_weights(duration, self.cfg.length);
        (0..self.cfg.mask)
            .map(|k| {
                let mut w = vec![0.0; duration];
                for (t, &(f0, w0, w1)) in resample.iter().enumerate() {
                    let c = self.temporal.row(k)[t];
                    w[f0] += c * w0;
                    if w1 != 0.0 {
                        w[f0 + 1] += c * w1;
                    }
                }
                w
            })
            .collect()
    }

    pub fn features(&self, spec: &SubSequenceSpec) -> Result<FeatureVector> {
        check_spec(spec, self.frames)?;
        let weights = self.temporal_weights(spec.duration);
        let mut out: Vec<f64> = self
            .layout
            .iter()
            .map(|&(p, k)| {
                let proj = &self.projections[p][spec.start..spec.end()];
                weights[k].iter().zip(proj).map(|(a, b)| a * b).sum()
            })
            .collect();
        out.push(spec.duration as f64);
        Ok(out)
    }

    /// Features for many sub-sequences, in input order.
    pub fn features_many(&self, specs: &[SubSequenceSpec]) -> Result<Vec<FeatureVector>> {
        specs.par_iter().map(|s| self.features(s)).collect()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }
}

/// Per-dimension mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    pub fn fit(rows: &[FeatureVector]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::invalid(format!(
                "standardization needs at least 2 vectors, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..dim).map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n).collect();
        let std = (0..dim)
            .map(|d| {
                let var = rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(StandardizationStats { mean, std })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<FeatureVector> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

/// Recognition unit a sample or model is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Phoneme,
    Viseme,
    Biphone,
    Biviseme,
}

impl UnitKind {
    pub fn is_pair(self) -> bool {
        matches!(self, UnitKind::Biphone | UnitKind::Biviseme)
    }

    pub fn uses_visemes(self) -> bool {
        matches!(self, UnitKind::Viseme | UnitKind::Biviseme)
    }

    /// Pair kind built on top of a single-unit kind.
    pub fn paired(self) -> UnitKind {
        match self {
            UnitKind::Phoneme | UnitKind::Biphone => UnitKind::Biphone,
            UnitKind::Viseme | UnitKind::Biviseme => UnitKind::Biviseme,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitKind::Phoneme => "phoneme",
            UnitKind::Viseme => "viseme",
            UnitKind::Biphone => "biphone",
            UnitKind::Biviseme => "biviseme",
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UnitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phoneme" => Ok(UnitKind::Phoneme),
            "viseme" => Ok(UnitKind::Viseme),
            "biphone" => Ok(UnitKind::Biphone),
            "biviseme" | "bi-viseme" => Ok(UnitKind::Biviseme),
            other => Err(Error::invalid(format!("unknown unit kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub label: String,
    pub spec: SubSequenceSpec,
    pub features: FeatureVector,
}

/// Frame-level units of a transcript for a kind: labels mapped to visemes
/// when needed (HH dropped), then paired for two-unit kinds.
pub fn transcript_units(transcript: &Transcript, kind: UnitKind, fps: f64, frames: usize) -> Result<Vec<(String, SubSequenceSpec)>> {
    let mut singles = Vec::with_capacity(transcript.len());
    for e in transcript.entries() {
        let label = if kind.uses_visemes() {
            match viseme_of(&e.label)? {
                Some(v) => v.to_string(),
                None => continue,
            }
        } else {
            e.label.clone()
        };
        let (start, mut duration) = frame_span(e.start_ms, e.end_ms, fps);
        if start >= frames {
            return Err(Error::invalid(format!(
                "entry {} at {} ms starts after the last frame",
                e.label, e.start_ms
            )));
        }
        duration = duration.min(frames - start);
        singles.push((label, SubSequenceSpec::new(start, duration)));
    }
    if !kind.is_pair() {
        return Ok(singles);
    }
    Ok(singles
        .windows(2)
        .map(|w| {
            let (a, sa) = &w[0];
            let (b, sb) = &w[1];
            let end = sb.end().max(sa.end());
            (
                format!("{a}{PAIR_SEPARATOR}{b}"),
                SubSequenceSpec::new(sa.start, (end - sa.start).max(1)),
            )
        })
        .collect())
}

/// Labelled training samples of one video.
pub fn extract_labeled_samples(
    roi: &RoiVolume,
    transcript: &Transcript,
    kind: UnitKind,
    cfg: &FeatureConfig,
) -> Result<Vec<LabeledSample>> {
    if transcript.is_empty() {
        return Ok(Vec::new());
    }
    let units = transcript_units(transcript, kind, cfg.fps, roi.frames())?;
    let extractor = FeatureExtractor::new(roi, cfg)?;
    units
        .into_iter()
        .map(|(label, spec)| {
            Ok(LabeledSample {
                label,
                spec,
                features: extractor.features(&spec)?,
            })
        })
        .collect()
}
