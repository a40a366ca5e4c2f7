//! HMM tracking of the inner lower lip and the mouth corners on aligned
//! frames.

use rayon::prelude::*;

use super::channels::ChannelSet;
use crate::decoder::viterbi::{viterbi_generic, Transitions};
use crate::error::{Error, Result};
use crate::image::Plane;

/// Transition spread (rows) of the lip tracker.
pub const LIP_SIGMA: f64 = 8.0;
/// Transition spread (polyline samples) of the corner trackers.
pub const CORNER_SIGMA: f64 = 2.0;
/// Samples on each side of the seed of a minimal luminance line.
pub const LUM_LINE_REACH: usize = 40;
pub const LUM_LINE_LEN: usize = 2 * LUM_LINE_REACH + 1;
/// Seed search window relative to the lip row.
pub const SEED_ABOVE: isize = 8;
pub const SEED_BELOW: isize = 4;

/// Dark polyline between the lips, `(row, col)` in aligned-frame pixels.
pub type LumLine = Vec<(usize, usize)>;

fn gaussian_density(delta: f64, sigma: f64) -> f64 {
    (-(delta * delta) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Central-difference derivative, one-sided at the ends.
pub fn gradient(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                values[1] - values[0]
            } else if i == n - 1 {
                values[n - 1] - values[n - 2]
            } else {
                (values[i + 1] - values[i - 1]) / 2.0
            }
        })
        .collect()
}

/// Min-max normalisation to [0, 1]; `None` when the values are flat.
pub fn normalize_unit(values: &[f64]) -> Option<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 1e-12) {
        return None;
    }
    Some(values.iter().map(|v| (v - lo) / range).collect())
}

/// Viterbi over per-frame weights with Gaussian index transitions and
/// uniform priors.
fn track(observations: &[Vec<f64>], sigma: f64) -> Result<Vec<usize>> {
    let states = observations[0].len();
    let trans = Transitions::dense(states, |a, b| gaussian_density(a as f64 - b as f64, sigma));
    let priors = vec![1.0; states];
    Ok(viterbi_generic(&priors, &trans, observations)?.states)
}

/// Row of the inner lower lip on the centre column of every aligned frame.
///
/// `forced_first` pins frame 0 to a given row; the rest of the path follows
/// from the HMM.
pub fn detect_inner_lower_lip(channels: &[ChannelSet], forced_first: Option<usize>) -> Result<Vec<usize>> {
    if channels.is_empty() {
        return Err(Error::invalid("no frames to track"));
    }
    let height = channels[0].height();
    let center = (channels[0].width() - 1) / 2;
    let mut observations: Vec<Vec<f64>> = channels
        .par_iter()
        .enumerate()
        .map(|(t, set)| {
            let column: Vec<f64> = (0..height).map(|r| set.ulum.get(r, center)).collect();
            normalize_unit(&gradient(&column)).ok_or_else(|| {
                Error::degenerate(format!("frame {t}: flat U*lum gradient, lip undetectable"))
            })
        })
        .collect::<Result<_>>()?;
    if let Some(row) = forced_first {
        if row >= height {
            return Err(Error::invalid(format!("forced lip row {row} outside frame height {height}")));
        }
        observations[0] = (0..height).map(|r| if r == row { 1.0 } else { 0.0 }).collect();
    }
    track(&observations, LIP_SIGMA)
}

/// Dark line through the mouth opening, seeded near the lip row on the
/// centre column and extended greedily one column at a time.
pub fn build_min_luminance_line(channels: &ChannelSet, lip_row: f64) -> LumLine {
    min_luminance_line_on(&channels.lum.box_blur3(), lip_row)
}

pub(crate) fn min_luminance_line_on(smoothed: &Plane, lip_row: f64) -> LumLine {
    let height = smoothed.height() as isize;
    let center = (smoothed.width() - 1) / 2;
    let lip = lip_row.round() as isize;
    let lo = (lip - SEED_ABOVE).clamp(0, height - 1);
    let hi = (lip + SEED_BELOW).clamp(0, height - 1);
    let mut seed = lo;
    for r in lo..=hi {
        if smoothed.get(r as usize, center) < smoothed.get(seed as usize, center) {
            seed = r;
        }
    }

    let step = |row: isize, col: usize| -> isize {
        // candidates ordered by |drow| then row, so strict < keeps the preferred tie
        let mut best = row;
        for cand in [row - 1, row + 1] {
            let cand = cand.clamp(0, height - 1);
            if smoothed.get(cand as usize, col) < smoothed.get(best as usize, col) {
                best = cand;
            }
        }
        best
    };

    let mut line = vec![(0usize, 0usize); LUM_LINE_LEN];
    line[LUM_LINE_REACH] = (seed as usize, center);
    let mut row = seed;
    for k in 1..=LUM_LINE_REACH {
        let col = center.saturating_sub(k);
        row = step(row, col);
        line[LUM_LINE_REACH - k] = (row as usize, col);
    }
    row = seed;
    for k in 1..=LUM_LINE_REACH {
        let col = (center + k).min(smoothed.width() - 1);
        row = step(row, col);
        line[LUM_LINE_REACH + k] = (row as usize, col);
    }
    line
}

/// Polyline indices of the left and right mouth corner in one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CornerIndices {
    pub left: usize,
    pub right: usize,
}

/// Left corner states cover polyline indices `0..40`, right corner states
/// `41..=80`.
pub fn detect_mouth_corners(channels: &[ChannelSet], lines: &[LumLine]) -> Result<Vec<CornerIndices>> {
    if channels.is_empty() || channels.len() != lines.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} luminance lines",
            channels.len(),
            lines.len()
        )));
    }
    let per_frame: Vec<(Vec<f64>, Vec<f64>)> = channels
        .par_iter()
        .zip(lines.par_iter())
        .enumerate()
        .map(|(t, (set, line))| {
            if line.len() != LUM_LINE_LEN {
                return Err(Error::invalid(format!("frame {t}: luminance line has {} points", line.len())));
            }
            let smoothed = set.lum.box_blur3();
            let values: Vec<f64> = line.iter().map(|&(r, c)| smoothed.get(r, c)).collect();
            let g = gradient(&values);
            let left: Vec<f64> = g[..LUM_LINE_REACH].iter().map(|v| -v).collect();
            let right: Vec<f64> = g[LUM_LINE_REACH + 1..].to_vec();
            let flat = || Error::degenerate(format!("frame {t}: flat luminance gradient, corners undetectable"));
            Ok((
                normalize_unit(&left).ok_or_else(flat)?,
                normalize_unit(&right).ok_or_else(flat)?,
            ))
        })
        .collect::<Result<_>>()?;
    let (left_obs, right_obs): (Vec<_>, Vec<_>) = per_frame.into_iter().unzip();
    let left = track(&left_obs, CORNER_SIGMA)?;
    let right = track(&right_obs, CORNER_SIGMA)?;
    Ok(left
        .into_iter()
        .zip(right)
        .map(|(l, r)| CornerIndices {
            left: l,
            right: r + LUM_LINE_REACH + 1,
        })
        .collect())
}
