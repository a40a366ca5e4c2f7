//! Face symmetry axis search.
//!
//! A symmetry line passes through the vertical image centre at `column` and is
//! tilted by `angle` degrees from vertical, positive clockwise. Points on the
//! image are addressed in line coordinates `(u, v)`: `u` runs along the line
//! (downwards), `v` perpendicular to it (to the right).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{build_image_pyramid, Plane, VideoSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryLine {
    pub column: f64,
    /// Degrees from vertical, positive clockwise.
    pub angle: f64,
}

impl SymmetryLine {
    pub fn new(column: f64, angle: f64) -> Self {
        SymmetryLine { column, angle }
    }

    /// Image position `(row, col)` of line coordinates `(u, v)` in an image of
    /// the given height.
    pub fn to_image(&self, height: usize, u: f64, v: f64) -> (f64, f64) {
        let center_row = (height as f64 - 1.0) / 2.0;
        let (s, c) = self.angle.to_radians().sin_cos();
        (center_row + u * c + v * s, self.column - u * s + v * c)
    }
}

/// Search parameters for [`find_symmetry_lines`].
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrySearch {
    /// Columns compared on each side of the line.
    pub band: usize,
    /// Angle range searched exhaustively on the smallest pyramid level.
    pub coarse_angle_range: i32,
    /// Column window (pixels of the current level) for refinement.
    pub column_window: i32,
    /// Angle window (degrees) for refinement.
    pub angle_window: f64,
    /// Angle step inside the refinement window.
    pub angle_step: f64,
}

impl Default for SymmetrySearch {
    fn default() -> Self {
        SymmetrySearch {
            band: 5,
            coarse_angle_range: 10,
            column_window: 2,
            angle_window: 1.0,
            angle_step: 0.5,
        }
    }
}

/// Sum of squared left/right differences across the line.
///
/// Sample pairs sit at perpendicular offsets `±(k - 0.5)` for `k = 1..=band`,
/// one pair per image row along the line, with bilinear interpolation. Pairs
/// with a sample outside the image are skipped and the sum is rescaled to the
/// full pair count; if fewer than a quarter of the pairs are valid the cost
/// is `+inf`.
pub fn symmetry_cost(image: &Plane, line: &SymmetryLine, band: usize) -> f64 {
    let height = image.height();
    let center_row = (height as f64 - 1.0) / 2.0;
    let total = height * band;
    let mut valid = 0usize;
    let mut sum = 0.0;
    for i in 0..height {
        let u = i as f64 - center_row;
        for k in 1..=band {
            let v = k as f64 - 0.5;
            let (lr, lc) = line.to_image(height, u, -v);
            let (rr, rc) = line.to_image(height, u, v);
            if let (Some(left), Some(right)) = (image.sample(lr, lc), image.sample(rr, rc)) {
                sum += (left - right).powi(2);
                valid += 1;
            }
        }
    }
    if total == 0 || valid * 4 < total {
        return f64::INFINITY;
    }
    sum * total as f64 / valid as f64
}

fn best_line(image: &Plane, band: usize, candidates: impl Iterator<Item = SymmetryLine>) -> Option<SymmetryLine> {
    let mut best: Option<(f64, SymmetryLine)> = None;
    for line in candidates {
        let cost = symmetry_cost(image, &line, band);
        if cost.is_finite() && best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, line));
        }
    }
    best.map(|(_, l)| l)
}

fn refine_candidates(center: SymmetryLine, cfg: &SymmetrySearch, width: usize) -> Vec<SymmetryLine> {
    let steps = (cfg.angle_window / cfg.angle_step).round() as i32;
    let mut out = Vec::new();
    for dc in -cfg.column_window..=cfg.column_window {
        let column = center.column + dc as f64;
        if column < 0.0 || column > (width - 1) as f64 {
            continue;
        }
        for da in -steps..=steps {
            let angle = center.angle + da as f64 * cfg.angle_step;
            if angle.abs() <= 45.0 {
                out.push(SymmetryLine::new(column, angle));
            }
        }
    }
    out
}

/// Coarse-to-fine symmetry search on a single image.
pub fn search_pyramid(image: &Plane, cfg: &SymmetrySearch) -> Result<SymmetryLine> {
    let pyramid = build_image_pyramid(image)?;
    let smallest = pyramid.last().unwrap();
    let coarse = (0..smallest.width()).flat_map(|col| {
        (-cfg.coarse_angle_range..=cfg.coarse_angle_range)
            .map(move |a| SymmetryLine::new(col as f64, a as f64))
    });
    let mut line = best_line(smallest, cfg.band, coarse).unwrap_or(SymmetryLine::new(
        (smallest.width() as f64 - 1.0) / 2.0,
        0.0,
    ));
    for pair in pyramid.windows(2).rev() {
        let (fine, coarse) = (&pair[0], &pair[1]);
        let ratio = fine.width() as f64 / coarse.width() as f64;
        let scaled = SymmetryLine::new((line.column + 0.5) * ratio - 0.5, line.angle);
        line = best_line(fine, cfg.band, refine_candidates(scaled, cfg, fine.width()).into_iter())
            .unwrap_or(scaled);
    }
    Ok(line)
}

/// One symmetry line per frame: the first frame by pyramid search, later
/// frames by refining the previous line on the full-size image.
pub fn find_symmetry_lines(video: &VideoSequence, cfg: &SymmetrySearch) -> Result<Vec<SymmetryLine>> {
    if video.is_empty() {
        return Err(Error::invalid("video has no frames"));
    }
    let mut lines = Vec::with_capacity(video.len());
    let first = video.frames()[0].luminance();
    let mut line = search_pyramid(&first, cfg)?;
    lines.push(line);
    for frame in &video.frames()[1..] {
        let lum = frame.luminance();
        line = best_line(&lum, cfg.band, refine_candidates(line, cfg, lum.width()).into_iter())
            .unwrap_or(line);
        lines.push(line);
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mirrored_about(width: usize, height: usize, axis: usize) -> Plane {
        Plane::from_fn(width, height, |r, c| {
            let d = (c as f64 - axis as f64).abs();
            ((d * 0.7).sin() + (r as f64 * 0.3).cos() * d * 0.1 + d * d * 0.01).abs()
        })
    }

    #[test]
    fn two_by_two_direct_arithmetic() {
        let img = Plane::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cost = symmetry_cost(&img, &SymmetryLine::new(0.5, 0.0), 1);
        assert!((cost - 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_mirror_has_zero_cost_and_beats_shifted_axis() {
        let img = mirrored_about(60, 40, 27);
        let at_axis = symmetry_cost(&img, &SymmetryLine::new(27.0, 0.0), 5);
        let off_axis = symmetry_cost(&img, &SymmetryLine::new(30.0, 0.0), 5);
        assert!(at_axis.abs() < 1e-9);
        assert!(at_axis <= off_axis);
    }

    #[test]
    fn mirror_invariance() {
        let img = Plane::from_fn(50, 36, |r, c| ((r * 13 + c * 7) % 17) as f64 / 17.0 + 0.01 * c as f64);
        let mirror = img.mirrored();
        for &(col, angle) in &[(20.0, 0.0), (24.5, 3.0), (30.0, -7.5), (12.0, 10.0)] {
            let a = symmetry_cost(&img, &SymmetryLine::new(col, angle), 5);
            let b = symmetry_cost(&mirror, &SymmetryLine::new(49.0 - col, -angle), 5);
            assert!((a - b).abs() < 1e-6 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn mostly_outside_band_is_infinite() {
        let img = Plane::new(30, 10);
        assert!(symmetry_cost(&img, &SymmetryLine::new(-20.0, 0.0), 5).is_infinite());
    }

    #[test]
    fn pyramid_search_recovers_upright_axis() {
        let img = mirrored_about(120, 90, 64);
        let line = search_pyramid(&img, &SymmetrySearch::default()).unwrap();
        assert!((line.column - 64.0).abs() <= 2.0, "{line:?}");
        assert!(line.angle.abs() <= 1.0, "{line:?}");
    }
}
