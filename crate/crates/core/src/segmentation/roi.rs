use rayon::prelude::*;

use super::channels::{Channel, ChannelSet};
use crate::error::{Error, Result};
use crate::image::{Plane, VideoSequence};

pub const DEFAULT_ROI_WIDTH: usize = 64;
pub const DEFAULT_ROI_HEIGHT: usize = 48;
/// Fraction of the ROI width covered by the widest mouth of the sequence.
pub const MOUTH_WIDTH_FRACTION: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

impl Point {
    pub fn new(row: f64, col: f64) -> Self {
        Point { row, col }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }
}

/// Tracked mouth landmarks of one frame. `lip_row`, and both corners are in
/// source-frame pixels; `lum_line` is in aligned-frame pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct MouthKeypoints {
    pub lip_row: f64,
    pub left_corner: Point,
    pub right_corner: Point,
    pub lum_line: Vec<(usize, usize)>,
}

/// Normalised mouth region, stored channel-major, then frame, then row.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiVolume {
    width: usize,
    height: usize,
    frames: usize,
    channels: Vec<Channel>,
    scale: f64,
    data: Vec<f32>,
}

impl RoiVolume {
    pub fn new(
        width: usize,
        height: usize,
        frames: usize,
        channels: Vec<Channel>,
        scale: f64,
        data: Vec<f32>,
    ) -> Result<Self> {
        let expected = width * height * frames * channels.len();
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        if width == 0 || height == 0 || frames == 0 || channels.is_empty() {
            return Err(Error::invalid("ROI volume dimensions must be positive"));
        }
        if !(scale > 0.0) {
            return Err(Error::invalid(format!("ROI scale must be positive, got {scale}")));
        }
        Ok(RoiVolume {
            width,
            height,
            frames,
            channels,
            scale,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    /// Pixels of one channel and frame, row-major.
    pub fn plane(&self, channel: Channel, frame: usize) -> Result<&[f32]> {
        let ci = self
            .channels
            .iter()
            .position(|&c| c == channel)
            .ok_or_else(|| Error::invalid(format!("ROI volume has no `{channel}` channel")))?;
        let n = self.frame_len();
        let start = (ci * self.frames + frame) * n;
        Ok(&self.data[start..start + n])
    }

    pub fn get(&self, channel: Channel, frame: usize, row: usize, col: usize) -> Result<f64> {
        Ok(self.plane(channel, frame)?[row * self.width + col] as f64)
    }
}

/// Similarity transform from ROI pixels to source-frame pixels of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoiTransform {
    pub center: Point,
    /// Angle of the corner line against the image x axis, radians.
    pub angle: f64,
    /// ROI pixels per source pixel.
    pub scale: f64,
    pub roi_width: usize,
    pub roi_height: usize,
}

impl RoiTransform {
    pub fn to_source(&self, row: f64, col: f64) -> Point {
        let x = (col - (self.roi_width as f64 - 1.0) / 2.0) / self.scale;
        let y = (row - (self.roi_height as f64 - 1.0) / 2.0) / self.scale;
        let (s, c) = self.angle.sin_cos();
        Point::new(self.center.row + x * s + y * c, self.center.col + x * c - y * s)
    }

    pub fn to_roi(&self, p: &Point) -> Point {
        let dr = p.row - self.center.row;
        let dc = p.col - self.center.col;
        let (s, c) = self.angle.sin_cos();
        let x = dc * c + dr * s;
        let y = -dc * s + dr * c;
        Point::new(
            y * self.scale + (self.roi_height as f64 - 1.0) / 2.0,
            x * self.scale + (self.roi_width as f64 - 1.0) / 2.0,
        )
    }
}

/// Per-frame transforms sharing one scale derived from the widest mouth.
pub fn roi_transforms(keypoints: &[MouthKeypoints], roi_width: usize, roi_height: usize) -> Result<Vec<RoiTransform>> {
    let max_width = keypoints
        .iter()
        .map(|k| k.left_corner.distance(&k.right_corner))
        .fold(0.0, f64::max);
    if !(max_width > 0.0) {
        return Err(Error::degenerate("mouth corners coincide in every frame"));
    }
    let scale = MOUTH_WIDTH_FRACTION * roi_width as f64 / max_width;
    Ok(keypoints
        .iter()
        .map(|k| {
            let (l, r) = (k.left_corner, k.right_corner);
            RoiTransform {
                center: Point::new((l.row + r.row) / 2.0, (l.col + r.col) / 2.0),
                angle: (r.row - l.row).atan2(r.col - l.col),
                scale,
                roi_width,
                roi_height,
            }
        })
        .collect())
}

/// Resamples the mouth region of every frame into a fixed-size volume.
pub fn extract_roi(
    video: &VideoSequence,
    keypoints: &[MouthKeypoints],
    roi_width: usize,
    roi_height: usize,
    channels: &[Channel],
) -> Result<RoiVolume> {
    if keypoints.len() != video.len() {
        return Err(Error::invalid(format!(
            "{} keypoint sets for {} frames",
            keypoints.len(),
            video.len()
        )));
    }
    if channels.is_empty() {
        return Err(Error::invalid("no ROI channels requested"));
    }
    let transforms = roi_transforms(keypoints, roi_width, roi_height)?;
    let scale = transforms[0].scale;
    let per_frame: Vec<ChannelSet> = video
        .frames()
        .par_iter()
        .zip(transforms.par_iter())
        .map(|(frame, tf)| {
            let src: Vec<Plane> = (0..3).map(|i| frame.channel(i)).collect();
            let mut planes: Vec<Plane> = (0..3).map(|_| Plane::new(roi_width, roi_height)).collect();
            for r in 0..roi_height {
                for c in 0..roi_width {
                    let p = tf.to_source(r as f64, c as f64);
                    for k in 0..3 {
                        planes[k].set(r, c, src[k].sample_clamped(p.row, p.col));
                    }
                }
            }
            let [red, green, blue]: [Plane; 3] = planes.try_into().unwrap();
            ChannelSet::from_rgb(red, green, blue)
        })
        .collect();
    let frames = video.len();
    let mut data = Vec::with_capacity(roi_width * roi_height * frames * channels.len());
    for &ch in channels {
        for set in &per_frame {
            data.extend_from_slice(set.get(ch).data());
        }
    }
    RoiVolume::new(roi_width, roi_height, frames, channels.to_vec(), scale, data)
}
