//! Corpus-level glue between the stages: segment sentence directories,
//! train unit models, decode and time the whole chain.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{DurationBounds, PipelineConfig};
use crate::decoder::{build_probability_grid_with, decode_sequence, expand_biphones, model_class_specs, DecodedSequence, ProbabilityGrid};
use crate::error::{Error, Result};
use crate::features::{enumerate_subsequences, extract_labeled_samples, FeatureExtractor, LabeledSample, Transcript, UnitKind};
use crate::fixtures::TRANSCRIPT_FILE;
use crate::image::VideoSequence;
use crate::io;
use crate::segmentation::{segment_video, Channel, RoiVolume, Segmentation, SegmentationConfig};
use crate::svm::{predict_probabilities, train_multiclass_with_report, ModelMeta, MultiClassModel, TrainingReport};

/// A sentence directory: frames plus `manifest.txt`, optionally with a
/// `transcript.txt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceDir {
    pub id: String,
    pub dir: PathBuf,
}

impl SentenceDir {
    pub fn transcript_path(&self) -> PathBuf {
        self.dir.join(TRANSCRIPT_FILE)
    }

    pub fn read_transcript(&self) -> Result<Option<Transcript>> {
        let path = self.transcript_path();
        if path.is_file() {
            io::read_transcript(&path).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Sentence directories of a corpus, sorted by name. `root` may itself be a
/// sentence directory.
pub fn list_sentences(root: &Path) -> Result<Vec<SentenceDir>> {
    let name_of = |p: &Path| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
    if root.join(io::MANIFEST).is_file() {
        return Ok(vec![SentenceDir {
            id: name_of(root),
            dir: root.to_path_buf(),
        }]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(io::MANIFEST).is_file() {
            out.push(SentenceDir {
                id: name_of(&path),
                dir: path,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("{} contains no sentence directories", root.display())));
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

pub fn segmentation_config(cfg: &PipelineConfig) -> SegmentationConfig {
    SegmentationConfig {
        roi_width: cfg.roi_width,
        roi_height: cfg.roi_height,
        channels: Channel::ALL.to_vec(),
        ..SegmentationConfig::default()
    }
}

pub fn segment_dir(dir: &Path, cfg: &PipelineConfig) -> Result<Segmentation> {
    let video = io::read_video_dir(dir)?;
    segment_video(&video, &segmentation_config(cfg))
}

/// ROI volume and transcript of one training or test sentence.
#[derive(Clone, Debug)]
pub struct SentenceData {
    pub id: String,
    pub roi: RoiVolume,
    pub transcript: Transcript,
}

/// Segments every sentence of a corpus that has a transcript.
pub fn load_corpus(root: &Path, cfg: &PipelineConfig) -> Result<Vec<SentenceData>> {
    list_sentences(root)?
        .par_iter()
        .map(|s| {
            let transcript = s
                .read_transcript()?
                .ok_or_else(|| Error::invalid(format!("{} has no {TRANSCRIPT_FILE}", s.dir.display())))?;
            Ok(SentenceData {
                id: s.id.clone(),
                roi: segment_dir(&s.dir, cfg)?.roi,
                transcript,
            })
        })
        .collect()
}

/// Labelled samples of all sentences, in sentence order.
pub fn collect_samples(data: &[SentenceData], kind: UnitKind, cfg: &PipelineConfig) -> Result<Vec<LabeledSample>> {
    let per: Vec<Vec<LabeledSample>> = data
        .par_iter()
        .map(|s| {
            extract_labeled_samples(&s.roi, &s.transcript, kind, &cfg.features)
                .map_err(|e| Error::invalid(format!("{}: {e}", s.id)))
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Duration bounds used for a kind: configured, or the training range.
pub fn duration_bounds(samples: &[LabeledSample], kind: UnitKind, cfg: &PipelineConfig) -> DurationBounds {
    let configured = cfg.durations.get(kind);
    if !cfg.derive_durations || samples.is_empty() {
        return configured;
    }
    let min = samples.iter().map(|s| s.spec.duration).min().unwrap_or(configured.min);
    let max = samples.iter().map(|s| s.spec.duration).max().unwrap_or(configured.max);
    DurationBounds::new(min, max)
}

/// Trains the one-vs-rest model of a unit kind on labelled samples.
pub fn train_on_samples(samples: &[LabeledSample], kind: UnitKind, cfg: &PipelineConfig) -> Result<(MultiClassModel, TrainingReport)> {
    cfg.validate()?;
    let labels: Vec<&str> = samples.iter().map(|s| s.label.as_str()).collect();
    let features: Vec<_> = samples.iter().map(|s| s.features.clone()).collect();
    let (mut model, report) = train_multiclass_with_report(&labels, &features, &cfg.svm, cfg.cv_split)?;
    let bounds = duration_bounds(samples, kind, cfg);
    model.meta = ModelMeta {
        kind,
        features: cfg.features.clone(),
        min_duration: bounds.min,
        max_duration: bounds.max,
        pipeline: Some(cfg.clone()),
    };
    Ok((model, report))
}

pub fn train_units(data: &[SentenceData], kind: UnitKind, cfg: &PipelineConfig) -> Result<(MultiClassModel, TrainingReport)> {
    let samples = collect_samples(data, kind, cfg)?;
    if samples.is_empty() {
        return Err(Error::invalid(format!("no {kind} samples in the training corpus")));
    }
    train_on_samples(&samples, kind, cfg)
}

fn check_pair_model(units: &MultiClassModel, pairs: &MultiClassModel) -> Result<()> {
    if units.meta.kind.is_pair() {
        return Err(Error::invalid(format!("unit model is a {} model", units.meta.kind)));
    }
    if pairs.meta.kind != units.meta.kind.paired() {
        return Err(Error::invalid(format!(
            "{} model cannot augment a {} model",
            pairs.meta.kind, units.meta.kind
        )));
    }
    if pairs.meta.features != units.meta.features {
        return Err(Error::invalid("unit and pair models use different feature settings"));
    }
    Ok(())
}

/// Probability grid of a video, with the pair model's classes appended
/// after the unit classes when given.
pub fn probability_grid(units: &MultiClassModel, pairs: Option<&MultiClassModel>, roi: &RoiVolume) -> Result<ProbabilityGrid> {
    let extractor = FeatureExtractor::new(roi, &units.meta.features)?;
    let grid = build_probability_grid_with(units, &extractor)?;
    match pairs {
        None => Ok(grid),
        Some(p) => {
            check_pair_model(units, p)?;
            grid.concat(&build_probability_grid_with(p, &extractor)?)
        }
    }
}

/// Decodes a video; pair labels are split back into their two units.
pub fn decode_roi(units: &MultiClassModel, pairs: Option<&MultiClassModel>, roi: &RoiVolume) -> Result<DecodedSequence> {
    let seq = decode_sequence(&probability_grid(units, pairs, roi)?)?;
    if pairs.is_some() {
        expand_biphones(&seq)
    } else {
        Ok(seq)
    }
}

/// Wall-clock seconds per stage for one video.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub frames: usize,
    pub segmentation: f64,
    pub features: f64,
    pub classification: f64,
    pub decoding: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.segmentation + self.features + self.classification + self.decoding
    }

    pub fn per_frame(&self) -> f64 {
        self.total() / self.frames.max(1) as f64
    }
}

/// Runs segmentation through decoding on one video, timing each stage.
pub fn time_stages(video: &VideoSequence, model: &MultiClassModel, cfg: &PipelineConfig) -> Result<(StageTimings, DecodedSequence)> {
    let mut t = StageTimings {
        frames: video.len(),
        ..Default::default()
    };
    let clock = Instant::now();
    let seg = segment_video(video, &segmentation_config(cfg))?;
    t.segmentation = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let extractor = FeatureExtractor::new(&seg.roi, &model.meta.features)?;
    let specs = enumerate_subsequences(extractor.frames(), model.meta.min_duration, model.meta.max_duration);
    let features = extractor.features_many(&specs)?;
    t.features = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let probs: Vec<Vec<f64>> = features
        .par_iter()
        .map(|f| predict_probabilities(model, f))
        .collect::<Result<_>>()?;
    let mut grid = ProbabilityGrid::from_fn(model_class_specs(model), extractor.frames(), |_, _, _| 0.0)?;
    for (spec, p) in specs.iter().zip(&probs) {
        for (c, &v) in p.iter().enumerate() {
            grid.set(c, spec.start, spec.duration, v)?;
        }
    }
    t.classification = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let decoded = decode_sequence(&grid)?;
    t.decoding = clock.elapsed().as_secs_f64();
    Ok((t, decoded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{synth_corpus, SynthConfig};

    #[test]
    fn sentence_listing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            sentence_length: 2,
            ..SynthConfig::default()
        };
        synth_corpus(&cfg, 2, dir.path()).unwrap();
        std::fs::create_dir(dir.path().join("notes")).unwrap();
        let s = list_sentences(dir.path()).unwrap();
        assert_eq!(s.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["sent_000", "sent_001"]);
        assert_eq!(list_sentences(&s[1].dir).unwrap(), vec![s[1].clone()]);
        assert!(s[0].read_transcript().unwrap().is_some());
        assert!(list_sentences(&dir.path().join("notes")).is_err());
    }

    #[test]
    fn derived_bounds_follow_samples() {
        let mut cfg = PipelineConfig::default();
        let sample = |d: usize| LabeledSample {
            label: "A".into(),
            spec: crate::features::SubSequenceSpec::new(0, d),
            features: vec![0.0; 11],
        };
        let samples = vec![sample(4), sample(9), sample(6)];
        assert_eq!(duration_bounds(&samples, UnitKind::Phoneme, &cfg), DurationBounds::new(1, 25));
        cfg.derive_durations = true;
        assert_eq!(duration_bounds(&samples, UnitKind::Phoneme, &cfg), DurationBounds::new(4, 9));
    }
}
