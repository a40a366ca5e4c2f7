//! Deterministic synthetic talking-face corpus.
//!
//! Every frame is rendered from a function of line coordinates `(u, |v|)`
//! relative to a known symmetry line, so the face is mirror-symmetric by
//! construction. Each recognition class is a mouth motion pattern: while a
//! unit is active the interior height and width follow
//! `base + amplitude * (0.5 - 0.5 cos(2 pi tau / period))`, `tau` counted in
//! frames from the unit start. The mouth moves ahead of the labels by the
//! configured audio-visual offset.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Transcript;
use crate::image::{RgbImage, VideoSequence};
use crate::io;
use crate::rng::SplitMix64;
use crate::segmentation::{Point, SymmetryLine};

/// ARPAbet tokens used as class labels; each maps to a different viseme.
pub const CLASS_TOKENS: [&str; 8] = ["AA", "F", "M", "S", "OW", "T", "K", "CH"];

const DEFAULT_MOTIONS: [ClassMotion; 8] = [
    ClassMotion::new(12.0, 0.0, 10.0),
    ClassMotion::new(2.0, 8.0, 14.0),
    ClassMotion::new(7.0, -7.0, 8.0),
    ClassMotion::new(10.0, 5.0, 6.0),
    ClassMotion::new(4.0, -4.0, 12.0),
    ClassMotion::new(6.0, 7.0, 9.0),
    ClassMotion::new(9.0, -8.0, 16.0),
    ClassMotion::new(3.0, 3.0, 7.0),
];

/// Mouth geometry at rest, in pixels.
const MOUTH_OFFSET: f64 = 45.0;
const MOUTH_HALF_WIDTH: f64 = 24.0;
const MOUTH_HALF_HEIGHT: f64 = 2.5;
const LIP_SIDE: f64 = 0.5;
const LIP_THICKNESS: f64 = 5.0;
/// Half height of the dark band joining the interior to the corners.
const CONTACT_HALF: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassMotion {
    pub open_amplitude: f64,
    pub width_amplitude: f64,
    pub period: f64,
}

impl ClassMotion {
    pub const fn new(open_amplitude: f64, width_amplitude: f64, period: f64) -> Self {
        ClassMotion {
            open_amplitude,
            width_amplitude,
            period,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SynthConfig {
    pub seed: u64,
    pub class_count: usize,
    /// Units per sentence.
    pub sentence_length: usize,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub motions: Vec<ClassMotion>,
    /// Standard deviation of the additive pixel noise, intensities in [0, 1].
    pub noise_sigma: f64,
    pub min_unit_frames: usize,
    pub max_unit_frames: usize,
    /// How far the mouth motion runs ahead of the labels.
    pub av_offset_ms: f64,
    /// Amplitude of the head sway: columns and degrees.
    pub sway_columns: f64,
    pub sway_degrees: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::with_classes(7, 3)
    }
}

impl SynthConfig {
    pub fn with_classes(seed: u64, class_count: usize) -> Self {
        SynthConfig {
            seed,
            class_count,
            sentence_length: 8,
            fps: 25.0,
            width: 176,
            height: 208,
            motions: DEFAULT_MOTIONS[..class_count.min(DEFAULT_MOTIONS.len())].to_vec(),
            noise_sigma: 4.0 / 255.0,
            min_unit_frames: 3,
            max_unit_frames: 12,
            av_offset_ms: 30.0,
            sway_columns: 4.0,
            sway_degrees: 2.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=CLASS_TOKENS.len()).contains(&self.class_count) {
            return Err(Error::invalid(format!("class count must be 2..=8, got {}", self.class_count)));
        }
        if self.motions.len() != self.class_count {
            return Err(Error::invalid(format!(
                "{} motion triples for {} classes",
                self.motions.len(),
                self.class_count
            )));
        }
        for (i, a) in self.motions.iter().enumerate() {
            if !(a.period > 0.0) || a.open_amplitude < 0.0 || a.width_amplitude.abs() > 12.0 {
                return Err(Error::invalid(format!("motion {i} is out of range")));
            }
            if self.motions[..i].contains(a) {
                return Err(Error::invalid(format!("motion {i} duplicates another class")));
            }
        }
        if self.sentence_length == 0 || self.min_unit_frames == 0 || self.min_unit_frames > self.max_unit_frames {
            return Err(Error::invalid("sentence length and unit durations must be positive and ordered"));
        }
        if self.width < 140 || self.height < 200 {
            return Err(Error::invalid("frames must be at least 140x200"));
        }
        if !(self.fps > 0.0) || !(self.noise_sigma >= 0.0) || !(self.av_offset_ms >= 0.0) {
            return Err(Error::invalid("fps, noise and offset must be non-negative"));
        }
        if self.sway_degrees.abs() > 8.0 || self.sway_columns.abs() > 10.0 {
            return Err(Error::invalid("head sway is limited to 8 degrees and 10 columns"));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<&'static str> {
        CLASS_TOKENS[..self.class_count].to_vec()
    }
}

/// Ground-truth mouth landmarks in source pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthKeypoints {
    pub lip_row: f64,
    pub left: Point,
    pub right: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthGroundTruth {
    pub id: String,
    pub lines: Vec<SymmetryLine>,
    pub keypoints: Vec<TruthKeypoints>,
    /// `(class index, start frame, duration)`.
    pub units: Vec<(usize, usize, usize)>,
    pub transcript: Transcript,
}

impl SynthGroundTruth {
    pub fn frames(&self) -> usize {
        self.lines.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,symCol,symAngle,lipRow,leftRow,leftCol,rightRow,rightCol\n");
        for (i, (l, k)) in self.lines.iter().zip(&self.keypoints).enumerate() {
            let _ = writeln!(
                out,
                "{i},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                l.column, l.angle, k.lip_row, k.left.row, k.left.col, k.right.row, k.right.col
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SynthSentence {
    pub video: VideoSequence,
    pub truth: SynthGroundTruth,
}

/// Skin texture: a sum of plane waves in face coordinates with amplitude
/// falling off as 1/f.
#[derive(Clone, Debug)]
struct FaceStyle {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl FaceStyle {
    fn new(seed: u64) -> Self {
        let mut rng = SplitMix64::derive(seed, &[0]);
        let waves = (0..6)
            .map(|k| {
                let f = 1.0 / (32.0 / (1.5f64).powi(k));
                let dir = rng.next_f64() * PI;
                let phase = rng.next_f64() * 2.0 * PI;
                (f * dir.cos(), f * dir.sin(), phase, 1.0 / (k as f64 + 1.0))
            })
            .collect();
        FaceStyle { waves }
    }

    fn texture(&self, u: f64, v: f64) -> f64 {
        let norm: f64 = self.waves.iter().map(|w| w.3).sum();
        self.waves
            .iter()
            .map(|&(fu, fv, ph, a)| a * (2.0 * PI * (fu * u + fv * v) + ph).sin())
            .sum::<f64>()
            / norm
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct MouthShape {
    half_width: f64,
    half_height: f64,
}

/// Approximate signed distance to an axis-aligned ellipse boundary.
fn ellipse_distance(x: f64, y: f64, a: f64, b: f64) -> f64 {
    let q = (x / a).powi(2) + (y / b).powi(2) - 1.0;
    let gx = 2.0 * x / (a * a);
    let gy = 2.0 * y / (b * b);
    let g = (gx * gx + gy * gy).sqrt();
    if g < 1e-9 {
        -a.min(b)
    } else {
        q / g
    }
}

/// Pixel coverage of the inside of a boundary at signed distance `d`.
fn coverage(d: f64) -> f64 {
    (0.5 - d).clamp(0.0, 1.0)
}

fn mix3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Colour of the face at line coordinates `(u, v)`, `v >= 0`.
fn face_colour(style: &FaceStyle, mouth: MouthShape, u: f64, v: f64) -> [f64; 3] {
    let n = style.texture(u, v);
    let background = [0.42 + 0.03 * n, 0.38 + 0.03 * n, 0.34 + 0.03 * n];
    let skin = [0.80 * (1.0 + 0.15 * n), 0.60 * (1.0 + 0.15 * n), 0.50 * (1.0 + 0.15 * n)];
    // soft face border so it does not compete with the lip edges
    let face = ((1.0 - ((v / 74.0).powi(2) + ((u - 2.0) / 94.0).powi(2)).sqrt()) * 12.0).clamp(0.0, 1.0);
    let mut c = mix3(background, skin, face);

    let eye = coverage(ellipse_distance(v - 30.0, u + 38.0, 11.0, 5.0));
    c = mix3(c, [0.14, 0.11, 0.10], eye);
    let brow = coverage(ellipse_distance(v - 30.0, u + 50.0, 14.0, 2.0));
    c = mix3(c, [0.36, 0.26, 0.20], brow);
    // nose sides give the axis search structure close to the line
    let nose = coverage((v - 6.0).abs() - 1.0).min(coverage((u + 5.0).abs() - 20.0));
    c = mix3(c, [0.58, 0.42, 0.36], nose);
    let nostril = coverage(ellipse_distance(v - 7.0, u - 18.0, 3.0, 2.0));
    c = mix3(c, [0.40, 0.24, 0.22], nostril);

    let w = u - MOUTH_OFFSET;
    let lips = coverage(ellipse_distance(
        v,
        w,
        mouth.half_width + LIP_SIDE,
        mouth.half_height + LIP_THICKNESS,
    ));
    c = mix3(c, [0.78, 0.20, 0.26], lips);
    let interior = coverage(ellipse_distance(v, w, mouth.half_width, mouth.half_height));
    let band = coverage(w.abs() - CONTACT_HALF).min(coverage(v - mouth.half_width));
    c = mix3(c, [0.10, 0.04, 0.05], interior.max(band));
    c
}

fn sentence_rng(seed: u64, sentence: usize) -> SplitMix64 {
    SplitMix64::derive(seed, &[1, sentence as u64])
}

struct SentencePlan {
    units: Vec<(usize, usize, usize)>,
    frames: usize,
    column_offset: f64,
    column_phase: f64,
    angle_phase: f64,
}

fn plan_sentence(cfg: &SynthConfig, sentence: usize) -> SentencePlan {
    let mut rng = sentence_rng(cfg.seed, sentence);
    let mut units = Vec::with_capacity(cfg.sentence_length);
    let mut start = 0;
    let mut prev = usize::MAX;
    for _ in 0..cfg.sentence_length {
        // no class follows itself, so every unit boundary is visible in the labels
        let mut class = rng.range_inclusive(0, cfg.class_count as u64 - 1) as usize;
        if class == prev {
            class = (class + 1 + rng.range_inclusive(0, cfg.class_count as u64 - 2) as usize) % cfg.class_count;
        }
        let duration = rng.range_inclusive(cfg.min_unit_frames as u64, cfg.max_unit_frames as u64) as usize;
        units.push((class, start, duration));
        start += duration;
        prev = class;
    }
    SentencePlan {
        units,
        frames: start,
        column_offset: (rng.next_f64() * 2.0 - 1.0) * cfg.sway_columns,
        column_phase: rng.next_f64() * 2.0 * PI,
        angle_phase: rng.next_f64() * 2.0 * PI,
    }
}

fn line_at(cfg: &SynthConfig, plan: &SentencePlan, frame: usize) -> SymmetryLine {
    let t = frame as f64;
    let center = (cfg.width as f64 - 1.0) / 2.0;
    SymmetryLine::new(
        center + plan.column_offset + 0.5 * cfg.sway_columns * (2.0 * PI * t / 60.0 + plan.column_phase).sin(),
        cfg.sway_degrees * (2.0 * PI * t / 80.0 + plan.angle_phase).sin(),
    )
}

fn mouth_at(cfg: &SynthConfig, plan: &SentencePlan, frame: usize) -> MouthShape {
    let tau = frame as f64 + cfg.av_offset_ms * cfg.fps / 1000.0;
    let &(class, start, _) = plan
        .units
        .iter()
        .rev()
        .find(|&&(_, s, _)| (s as f64) <= tau)
        .unwrap_or(&plan.units[0]);
    let m = cfg.motions[class];
    let phase = 0.5 - 0.5 * (2.0 * PI * (tau - start as f64) / m.period).cos();
    MouthShape {
        half_width: MOUTH_HALF_WIDTH + m.width_amplitude * phase,
        half_height: MOUTH_HALF_HEIGHT + 0.5 * m.open_amplitude * phase,
    }
}

fn truth_keypoints(height: usize, line: &SymmetryLine, mouth: MouthShape) -> TruthKeypoints {
    let to = |u: f64, v: f64| {
        let (r, c) = line.to_image(height, u, v);
        Point::new(r, c)
    };
    TruthKeypoints {
        lip_row: to(MOUTH_OFFSET + mouth.half_height, 0.0).row,
        left: to(MOUTH_OFFSET, -mouth.half_width),
        right: to(MOUTH_OFFSET, mouth.half_width),
    }
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn render(cfg: &SynthConfig, style: &FaceStyle, line: &SymmetryLine, mouth: MouthShape, noise: Option<SplitMix64>) -> RgbImage {
    let (w, h) = (cfg.width, cfg.height);
    let center_row = (h as f64 - 1.0) / 2.0;
    let (s, c) = line.angle.to_radians().sin_cos();
    let mut noise = noise;
    let mut img = RgbImage::new(w, h);
    for row in 0..h {
        for col in 0..w {
            let dr = row as f64 - center_row;
            let dc = col as f64 - line.column;
            let u = dr * c - dc * s;
            let v = (dr * s + dc * c).abs();
            let mut rgb = face_colour(style, mouth, u, v);
            if let Some(rng) = noise.as_mut() {
                for ch in rgb.iter_mut() {
                    *ch += cfg.noise_sigma * rng.next_gaussian();
                }
            }
            img.put(row, col, rgb.map(to_byte));
        }
    }
    img
}

/// One frame of a sentence: the mouth follows `class` at `tau` frames into
/// its unit, posed on `line`.
pub fn synth_face_frame(cfg: &SynthConfig, class: usize, tau: f64, line: &SymmetryLine, frame_seed: u64) -> Result<RgbImage> {
    cfg.validate()?;
    let m = cfg
        .motions
        .get(class)
        .ok_or_else(|| Error::invalid(format!("class {class} out of range")))?;
    let phase = 0.5 - 0.5 * (2.0 * PI * tau / m.period).cos();
    let mouth = MouthShape {
        half_width: MOUTH_HALF_WIDTH + m.width_amplitude * phase,
        half_height: MOUTH_HALF_HEIGHT + 0.5 * m.open_amplitude * phase,
    };
    let noise = (cfg.noise_sigma > 0.0).then(|| SplitMix64::derive(cfg.seed, &[2, frame_seed]));
    Ok(render(cfg, &FaceStyle::new(cfg.seed), line, mouth, noise))
}

/// Ground-truth keypoints of [`synth_face_frame`] with the same arguments.
pub fn synth_frame_truth(cfg: &SynthConfig, class: usize, tau: f64, line: &SymmetryLine) -> Result<TruthKeypoints> {
    let m = cfg
        .motions
        .get(class)
        .ok_or_else(|| Error::invalid(format!("class {class} out of range")))?;
    let phase = 0.5 - 0.5 * (2.0 * PI * tau / m.period).cos();
    let mouth = MouthShape {
        half_width: MOUTH_HALF_WIDTH + m.width_amplitude * phase,
        half_height: MOUTH_HALF_HEIGHT + 0.5 * m.open_amplitude * phase,
    };
    Ok(truth_keypoints(cfg.height, line, mouth))
}

pub fn sentence_id(index: usize) -> String {
    format!("sent_{index:03}")
}

/// Renders sentence `index` of the corpus in memory.
pub fn synth_sentence(cfg: &SynthConfig, index: usize) -> Result<SynthSentence> {
    cfg.validate()?;
    let style = FaceStyle::new(cfg.seed);
    let plan = plan_sentence(cfg, index);
    let lines: Vec<SymmetryLine> = (0..plan.frames).map(|f| line_at(cfg, &plan, f)).collect();
    let mouths: Vec<MouthShape> = (0..plan.frames).map(|f| mouth_at(cfg, &plan, f)).collect();
    let frames: Vec<RgbImage> = (0..plan.frames)
        .into_par_iter()
        .map(|f| {
            let noise = (cfg.noise_sigma > 0.0).then(|| SplitMix64::derive(cfg.seed, &[3, index as u64, f as u64]));
            render(cfg, &style, &lines[f], mouths[f], noise)
        })
        .collect();
    let keypoints = lines
        .iter()
        .zip(&mouths)
        .map(|(l, m)| truth_keypoints(cfg.height, l, *m))
        .collect();
    let labels = cfg.labels();
    let items: Vec<(&str, usize, usize)> = plan.units.iter().map(|&(c, s, d)| (labels[c], s, d)).collect();
    Ok(SynthSentence {
        video: VideoSequence::new(frames, cfg.fps)?,
        truth: SynthGroundTruth {
            id: sentence_id(index),
            lines,
            keypoints,
            units: plan.units,
            transcript: Transcript::from_frames(&items, cfg.fps)?,
        },
    })
}

pub const TRANSCRIPT_FILE: &str = "transcript.txt";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.csv";

/// Writes `sentences` sentences as `<out>/sent_NNN/` directories holding the
/// frames, `manifest.txt`, `transcript.txt` and `groundtruth.csv`.
pub fn synth_corpus(cfg: &SynthConfig, sentences: usize, out: &Path) -> Result<Vec<SynthGroundTruth>> {
    if sentences == 0 {
        return Err(Error::invalid("at least one sentence is required"));
    }
    cfg.validate()?;
    let mut truths = Vec::with_capacity(sentences);
    for i in 0..sentences {
        let s = synth_sentence(cfg, i)?;
        let dir = out.join(&s.truth.id);
        io::write_video_dir(&dir, &s.video)?;
        io::write_bytes(&dir.join(TRANSCRIPT_FILE), s.truth.transcript.to_text().as_bytes())?;
        io::write_bytes(&dir.join(GROUND_TRUTH_FILE), s.truth.to_csv().as_bytes())?;
        truths.push(s.truth);
    }
    Ok(truths)
}
