use rayon::prelude::*;

use super::channels::ChannelSet;
use super::symmetry::SymmetryLine;
use crate::error::{Error, Result};
use crate::image::{Plane, RgbImage, VideoSequence};

/// Columns kept on either side of the symmetry line.
pub const CROP_HALF_WIDTH: usize = 50;
/// Width of an aligned frame; the symmetry line is its centre column.
pub const CROP_WIDTH: usize = 2 * CROP_HALF_WIDTH + 1;

/// A frame rotated so that its symmetry line is vertical and central.
#[derive(Clone, Debug)]
pub struct AlignedFrame {
    pub rgb: RgbImage,
    pub channels: ChannelSet,
    pub line: SymmetryLine,
}

/// Maps aligned-frame coordinates back to the source frame.
pub fn aligned_to_source(line: &SymmetryLine, height: usize, row: f64, col: f64) -> (f64, f64) {
    let center_row = (height as f64 - 1.0) / 2.0;
    line.to_image(height, row - center_row, col - CROP_HALF_WIDTH as f64)
}

fn align_frame(frame: &RgbImage, line: &SymmetryLine) -> AlignedFrame {
    let h = frame.height();
    let sources: Vec<Plane> = (0..3).map(|i| frame.channel(i)).collect();
    let mut planes: Vec<Plane> = (0..3).map(|_| Plane::new(CROP_WIDTH, h)).collect();
    let mut rgb = RgbImage::new(CROP_WIDTH, h);
    for r in 0..h {
        for c in 0..CROP_WIDTH {
            let (sr, sc) = aligned_to_source(line, h, r as f64, c as f64);
            let mut px = [0u8; 3];
            for k in 0..3 {
                let v = sources[k].sample_clamped(sr, sc);
                planes[k].set(r, c, v);
                px[k] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            }
            rgb.put(r, c, px);
        }
    }
    let [red, green, blue]: [Plane; 3] = planes.try_into().unwrap();
    AlignedFrame {
        rgb,
        channels: ChannelSet::from_rgb(red, green, blue),
        line: *line,
    }
}

/// Rotates and crops every frame around its symmetry line and computes the
/// colour channels of the result. Pixels outside the source replicate edges.
pub fn prepare_frames(video: &VideoSequence, lines: &[SymmetryLine]) -> Result<Vec<AlignedFrame>> {
    if lines.len() != video.len() {
        return Err(Error::invalid(format!(
            "{} symmetry lines for {} frames",
            lines.len(),
            video.len()
        )));
    }
    Ok(video
        .frames()
        .par_iter()
        .zip(lines.par_iter())
        .map(|(frame, line)| align_frame(frame, line))
        .collect())
}
