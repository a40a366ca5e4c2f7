//! Mouth-region segmentation: symmetry axis, lip and corner tracking, and
//! extraction of a normalised region-of-interest volume.

pub mod align;
pub mod channels;
pub mod roi;
pub mod symmetry;
pub mod tracking;

pub use align::{prepare_frames, AlignedFrame, CROP_HALF_WIDTH, CROP_WIDTH};
pub use channels::{Channel, ChannelSet};
pub use roi::{extract_roi, MouthKeypoints, Point, RoiVolume};
pub use symmetry::{find_symmetry_lines, symmetry_cost, SymmetryLine, SymmetrySearch};
pub use tracking::{build_min_luminance_line, detect_inner_lower_lip, detect_mouth_corners};

use rayon::prelude::*;

use crate::error::Result;
use crate::image::VideoSequence;

#[derive(Clone, Debug)]
pub struct SegmentationConfig {
    pub symmetry: SymmetrySearch,
    pub roi_width: usize,
    pub roi_height: usize,
    pub channels: Vec<Channel>,
    /// Manual override of the lip row (aligned-frame pixels) in frame 0.
    pub forced_lip_row: Option<usize>,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            symmetry: SymmetrySearch::default(),
            roi_width: roi::DEFAULT_ROI_WIDTH,
            roi_height: roi::DEFAULT_ROI_HEIGHT,
            channels: Channel::ALL.to_vec(),
            forced_lip_row: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub lines: Vec<SymmetryLine>,
    pub keypoints: Vec<MouthKeypoints>,
    pub roi: RoiVolume,
}

/// Symmetry lines, aligned frames and tracked keypoints for a video.
pub fn track_keypoints(video: &VideoSequence, cfg: &SegmentationConfig) -> Result<(Vec<SymmetryLine>, Vec<MouthKeypoints>)> {
    let lines = find_symmetry_lines(video, &cfg.symmetry)?;
    let aligned = prepare_frames(video, &lines)?;
    let keypoints = keypoints_from_aligned(&aligned, cfg.forced_lip_row)?;
    Ok((lines, keypoints))
}

pub fn keypoints_from_aligned(aligned: &[AlignedFrame], forced_lip_row: Option<usize>) -> Result<Vec<MouthKeypoints>> {
    let sets: Vec<ChannelSet> = aligned.iter().map(|f| f.channels.clone()).collect();
    let lip_rows = detect_inner_lower_lip(&sets, forced_lip_row)?;
    let lum_lines: Vec<Vec<(usize, usize)>> = sets
        .par_iter()
        .zip(lip_rows.par_iter())
        .map(|(set, &row)| build_min_luminance_line(set, row as f64))
        .collect();
    let corners = detect_mouth_corners(&sets, &lum_lines)?;
    let height = sets[0].height();
    Ok(aligned
        .iter()
        .zip(lip_rows)
        .zip(lum_lines)
        .zip(corners)
        .map(|(((frame, lip), line), corner)| {
            let to_src = |row: f64, col: f64| {
                let (r, c) = align::aligned_to_source(&frame.line, height, row, col);
                Point::new(r, c)
            };
            let (lr, lc) = line[corner.left];
            let (rr, rc) = line[corner.right];
            MouthKeypoints {
                lip_row: to_src(lip as f64, CROP_HALF_WIDTH as f64).row,
                left_corner: to_src(lr as f64, lc as f64),
                right_corner: to_src(rr as f64, rc as f64),
                lum_line: line,
            }
        })
        .collect())
}

/// Runs the full segmentation chain on one video.
pub fn segment_video(video: &VideoSequence, cfg: &SegmentationConfig) -> Result<Segmentation> {
    let (lines, keypoints) = track_keypoints(video, cfg)?;
    let roi = extract_roi(video, &keypoints, cfg.roi_width, cfg.roi_height, &cfg.channels)?;
    Ok(Segmentation {
        lines,
        keypoints,
        roi,
    })
}
