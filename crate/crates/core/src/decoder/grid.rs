//! Per-class probabilities of every `(start, duration)` sub-sequence.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{enumerate_subsequences, FeatureExtractor, SubSequenceSpec};
use crate::segmentation::RoiVolume;
use crate::svm::{predict_probabilities, MultiClassModel};

pub const PROB_FLOOR: f64 = 1e-12;
pub const PROB_CEIL: f64 = 1.0 - 1e-12;
const GRID_MAGIC: &[u8; 4] = b"GRD1";
const INVALID: f64 = -1.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassSpec {
    pub label: String,
    pub dmin: usize,
    pub dmax: usize,
}

impl ClassSpec {
    pub fn new(label: impl Into<String>, dmin: usize, dmax: usize) -> Self {
        ClassSpec {
            label: label.into(),
            dmin,
            dmax,
        }
    }

    fn width(&self) -> usize {
        self.dmax - self.dmin + 1
    }
}

pub(crate) fn validate_specs(classes: &[ClassSpec]) -> Result<()> {
    if classes.is_empty() {
        return Err(Error::invalid("at least one class is required"));
    }
    for c in classes {
        if c.dmin == 0 || c.dmin > c.dmax {
            return Err(Error::invalid(format!(
                "class `{}` has invalid duration bounds {}..{}",
                c.label, c.dmin, c.dmax
            )));
        }
    }
    Ok(())
}

/// Cells are indexed `[class][start][duration - dmin]`; cells running past
/// the last frame hold no value.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityGrid {
    classes: Vec<ClassSpec>,
    frames: usize,
    probs: Vec<Vec<f64>>,
}

impl ProbabilityGrid {
    /// Fills every valid cell from `f(class, start, duration)`, clamped to
    /// `[PROB_FLOOR, PROB_CEIL]`.
    pub fn from_fn(classes: Vec<ClassSpec>, frames: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        validate_specs(&classes)?;
        let probs = classes
            .iter()
            .enumerate()
            .map(|(c, spec)| {
                let mut row = vec![INVALID; frames * spec.width()];
                for t in 0..frames {
                    for d in spec.dmin..=spec.dmax.min(frames - t) {
                        row[t * spec.width() + d - spec.dmin] = clamp_prob(f(c, t, d));
                    }
                }
                row
            })
            .collect();
        Ok(ProbabilityGrid { classes, frames, probs })
    }

    pub fn classes(&self) -> &[ClassSpec] {
        &self.classes
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.label.clone()).collect()
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn max_duration(&self) -> usize {
        self.classes.iter().map(|c| c.dmax).max().unwrap_or(0)
    }

    /// Probability of `(class, start, duration)`, `None` outside the valid cells.
    pub fn get(&self, class: usize, start: usize, duration: usize) -> Option<f64> {
        let spec = self.classes.get(class)?;
        if start >= self.frames || duration < spec.dmin || duration > spec.dmax || start + duration > self.frames {
            return None;
        }
        Some(self.probs[class][start * spec.width() + duration - spec.dmin])
    }

    pub fn set(&mut self, class: usize, start: usize, duration: usize, p: f64) -> Result<()> {
        if self.get(class, start, duration).is_none() {
            return Err(Error::invalid(format!("cell ({class}, {start}, {duration}) is not valid")));
        }
        let spec = &self.classes[class];
        self.probs[class][start * spec.width() + duration - spec.dmin] = clamp_prob(p);
        Ok(())
    }

    /// Stacks the classes of two grids over the same frames.
    pub fn concat(&self, other: &ProbabilityGrid) -> Result<ProbabilityGrid> {
        if self.frames != other.frames {
            return Err(Error::DimensionMismatch {
                expected: self.frames,
                found: other.frames,
            });
        }
        if let Some(dup) = other.classes.iter().find(|c| self.classes.iter().any(|s| s.label == c.label)) {
            return Err(Error::invalid(format!("class `{}` appears in both grids", dup.label)));
        }
        let mut out = self.clone();
        out.classes.extend(other.classes.iter().cloned());
        out.probs.extend(other.probs.iter().cloned());
        Ok(out)
    }

    /// 8-bit rendering of one class: start frame along x, duration along y
    /// with duration 1 on the bottom row. Invalid cells are black. Returns
    /// `(width, height, pixels)`, row-major from the top.
    pub fn heatmap(&self, class: usize) -> Result<(usize, usize, Vec<u8>)> {
        let spec = self
            .classes
            .get(class)
            .ok_or_else(|| Error::invalid(format!("class index {class} out of range")))?;
        let (w, h) = (self.frames, spec.dmax);
        let mut px = vec![0u8; w * h];
        for d in 1..=h {
            for t in 0..w {
                if let Some(p) = self.get(class, t, d) {
                    px[(h - d) * w + t] = (p * 255.0).round() as u8;
                }
            }
        }
        Ok((w, h, px))
    }

    /// Dense little-endian GRD1 encoding.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let io = |e: std::io::Error| Error::format("grid", e.to_string());
        let maxd = self.max_duration();
        let mut buf = Vec::new();
        buf.extend_from_slice(GRID_MAGIC);
        for v in [self.classes.len(), self.frames, maxd] {
            buf.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for c in &self.classes {
            buf.extend_from_slice(&(c.label.len() as u32).to_le_bytes());
            buf.extend_from_slice(c.label.as_bytes());
            buf.extend_from_slice(&(c.dmin as u32).to_le_bytes());
            buf.extend_from_slice(&(c.dmax as u32).to_le_bytes());
        }
        for c in 0..self.classes.len() {
            for t in 0..self.frames {
                for d in 1..=maxd {
                    let v = self.get(c, t, d).unwrap_or(INVALID) as f32;
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn read_from(mut r: impl Read) -> Result<ProbabilityGrid> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::format("grid", e.to_string()))?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != GRID_MAGIC {
            return Err(Error::format("grid", "missing GRD1 magic"));
        }
        let count = cur.u32()? as usize;
        let frames = cur.u32()? as usize;
        let maxd = cur.u32()? as usize;
        let mut classes = Vec::with_capacity(count);
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let label = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| Error::format("grid", "label is not UTF-8"))?
                .to_string();
            let dmin = cur.u32()? as usize;
            let dmax = cur.u32()? as usize;
            classes.push(ClassSpec { label, dmin, dmax });
        }
        validate_specs(&classes).map_err(|e| Error::format("grid", e.to_string()))?;
        if classes.iter().any(|c| c.dmax > maxd) {
            return Err(Error::format("grid", "class bound exceeds maxDuration"));
        }
        let mut dense = vec![0f32; count * frames * maxd];
        for v in dense.iter_mut() {
            *v = f32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        }
        if cur.pos != bytes.len() {
            return Err(Error::format("grid", "trailing bytes"));
        }
        let mut grid = ProbabilityGrid::from_fn(classes, frames, |_, _, _| 0.5)?;
        for c in 0..count {
            for t in 0..frames {
                for d in 1..=maxd {
                    let v = dense[(c * frames + t) * maxd + d - 1];
                    match grid.get(c, t, d) {
                        Some(_) if (0.0..=1.0).contains(&v) => grid.set(c, t, d, v as f64)?,
                        Some(_) => return Err(Error::format("grid", format!("cell ({c}, {t}, {d}) holds {v}"))),
                        None if v != INVALID as f32 => {
                            return Err(Error::format("grid", format!("invalid cell ({c}, {t}, {d}) holds {v}")))
                        }
                        None => {}
                    }
                }
            }
        }
        Ok(grid)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format("grid", "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn clamp_prob(p: f64) -> f64 {
    if p.is_nan() {
        PROB_FLOOR
    } else {
        p.clamp(PROB_FLOOR, PROB_CEIL)
    }
}

/// Class specs of a model, using its trained duration bounds.
pub fn model_class_specs(model: &MultiClassModel) -> Vec<ClassSpec> {
    model
        .class_labels
        .iter()
        .map(|l| ClassSpec::new(l.clone(), model.meta.min_duration, model.meta.max_duration))
        .collect()
}

/// Featurizes every sub-sequence the model's duration bounds allow and
/// stores the calibrated per-class probabilities.
pub fn build_probability_grid(model: &MultiClassModel, roi: &RoiVolume) -> Result<ProbabilityGrid> {
    let extractor = FeatureExtractor::new(roi, &model.meta.features)?;
    build_probability_grid_with(model, &extractor)
}

pub fn build_probability_grid_with(model: &MultiClassModel, extractor: &FeatureExtractor) -> Result<ProbabilityGrid> {
    if extractor.config() != &model.meta.features {
        return Err(Error::invalid("feature extractor configuration differs from the model's"));
    }
    let classes = model_class_specs(model);
    validate_specs(&classes)?;
    let frames = extractor.frames();
    let specs: Vec<SubSequenceSpec> = enumerate_subsequences(frames, model.meta.min_duration, model.meta.max_duration);
    let probs: Vec<Vec<f64>> = specs
        .par_iter()
        .map(|spec| predict_probabilities(model, &extractor.features(spec)?))
        .collect::<Result<_>>()?;
    let mut grid = ProbabilityGrid::from_fn(classes, frames, |_, _, _| PROB_FLOOR)?;
    for (spec, p) in specs.iter().zip(&probs) {
        for (c, &v) in p.iter().enumerate() {
            grid.set(c, spec.start, spec.duration, v)?;
        }
    }
    Ok(grid)
}
