//! Raster containers shared by the segmentation and fixture code.

use crate::error::{Error, Result};

/// Single-channel image, row-major, `f32` storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col) as f32);
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col] as f64
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value as f32;
    }

    /// Pixel lookup with coordinates clamped to the border (edge replication).
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    /// Bilinear sample at a real position; `None` when the position lies
    /// outside `[0, height-1] x [0, width-1]`.
    pub fn sample(&self, row: f64, col: f64) -> Option<f64> {
        let max_r = (self.height - 1) as f64;
        let max_c = (self.width - 1) as f64;
        const EPS: f64 = 1e-9;
        if !(row >= -EPS && row <= max_r + EPS && col >= -EPS && col <= max_c + EPS) {
            return None;
        }
        Some(self.sample_clamped(row, col))
    }

    /// Bilinear sample with edge replication outside the raster.
    pub fn sample_clamped(&self, row: f64, col: f64) -> f64 {
        let r = row.clamp(0.0, (self.height - 1) as f64);
        let c = col.clamp(0.0, (self.width - 1) as f64);
        let r0 = r.floor() as usize;
        let c0 = c.floor() as usize;
        let r1 = (r0 + 1).min(self.height - 1);
        let c1 = (c0 + 1).min(self.width - 1);
        let fr = r - r0 as f64;
        let fc = c - c0 as f64;
        let top = self.get(r0, c0) * (1.0 - fc) + self.get(r0, c1) * fc;
        let bottom = self.get(r1, c0) * (1.0 - fc) + self.get(r1, c1) * fc;
        top * (1.0 - fr) + bottom * fr
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v as f64), hi.max(v as f64))
            })
    }

    /// 3x3 mean filter with edge replication.
    pub fn box_blur3(&self) -> Plane {
        Plane::from_fn(self.width, self.height, |r, c| {
            let mut acc = 0.0;
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    acc += self.get_clamped(r as isize + dr, c as isize + dc);
                }
            }
            acc / 9.0
        })
    }

    pub fn mirrored(&self) -> Plane {
        Plane::from_fn(self.width, self.height, |r, c| {
            self.get(r, self.width - 1 - c)
        })
    }

    /// Area-averaging resize to an arbitrary target size.
    pub fn resize_area(&self, width: usize, height: usize) -> Plane {
        let col_weights = area_weights(self.width, width);
        let row_weights = area_weights(self.height, height);
        // horizontal pass
        let mut tmp = vec![0.0f64; self.height * width];
        for r in 0..self.height {
            for (c, weights) in col_weights.iter().enumerate() {
                tmp[r * width + c] = weights.iter().map(|&(i, w)| w * self.get(r, i)).sum();
            }
        }
        let mut out = Plane::new(width, height);
        for (r, weights) in row_weights.iter().enumerate() {
            for c in 0..width {
                let v: f64 = weights.iter().map(|&(i, w)| w * tmp[i * width + c]).sum();
                out.set(r, c, v);
            }
        }
        out
    }
}

/// Overlap weights for resampling `src` cells onto `dst` cells by area.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|j| {
            let lo = j as f64 * scale;
            let hi = (j + 1) as f64 * scale;
            let mut weights = Vec::new();
            let mut i = lo.floor() as usize;
            while (i as f64) < hi && i < src {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                if overlap > 0.0 {
                    weights.push((i, overlap / scale));
                }
                i += 1;
            }
            weights
        })
        .collect()
}

/// 8-bit interleaved RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                expected: width * height * 3,
                found: data.len(),
            });
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One colour channel scaled to [0, 1].
    pub fn channel(&self, index: usize) -> Plane {
        Plane::from_fn(self.width, self.height, |r, c| {
            self.pixel(r, c)[index] as f64 / 255.0
        })
    }

    /// Luminance `0.299 R + 0.587 G + 0.114 B` on [0, 1] inputs, not rescaled.
    pub fn luminance(&self) -> Plane {
        Plane::from_fn(self.width, self.height, |r, c| {
            let [red, green, blue] = self.pixel(r, c);
            luma(
                red as f64 / 255.0,
                green as f64 / 255.0,
                blue as f64 / 255.0,
            )
        })
    }

    /// Translate the content by an integer offset, replicating edges.
    pub fn shifted(&self, d_row: isize, d_col: isize) -> RgbImage {
        let mut out = RgbImage::new(self.width, self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                let sr = (r as isize - d_row).clamp(0, self.height as isize - 1) as usize;
                let sc = (c as isize - d_col).clamp(0, self.width as isize - 1) as usize;
                out.put(r, c, self.pixel(sr, sc));
            }
        }
        out
    }
}

#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Ordered RGB frames with a frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSequence {
    frames: Vec<RgbImage>,
    fps: f64,
}

impl VideoSequence {
    pub fn new(frames: Vec<RgbImage>, fps: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("video has no frames"))?;
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        let (w, h) = (first.width(), first.height());
        if let Some(i) = frames
            .iter()
            .position(|f| f.width() != w || f.height() != h)
        {
            return Err(Error::invalid(format!(
                "frame {i} is {}x{}, expected {w}x{h}",
                frames[i].width(),
                frames[i].height()
            )));
        }
        Ok(VideoSequence { frames, fps })
    }

    pub fn frames(&self) -> &[RgbImage] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}

/// Smallest pyramid width that is still searched.
pub const MIN_PYRAMID_WIDTH: usize = 20;

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Image pyramid with 75 % shrink per level, stopping before the width
/// drops under [`MIN_PYRAMID_WIDTH`].
pub fn build_image_pyramid(image: &Plane) -> Result<Vec<Plane>> {
    if image.width() < MIN_PYRAMID_WIDTH {
        return Err(Error::invalid(format!(
            "image width {} is below the minimum of {MIN_PYRAMID_WIDTH} pixels",
            image.width()
        )));
    }
    let mut levels = vec![image.clone()];
    loop {
        let prev = levels.last().unwrap();
        let w = round_half_up(prev.width() as f64 * 0.75);
        if w < MIN_PYRAMID_WIDTH {
            break;
        }
        let h = round_half_up(prev.height() as f64 * 0.75).max(1);
        let next = prev.resize_area(w, h);
        levels.push(next);
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramid_widths_follow_the_shrink_rule() {
        let img = Plane::new(100, 80);
        let widths: Vec<usize> = build_image_pyramid(&img)
            .unwrap()
            .iter()
            .map(Plane::width)
            .collect();
        assert_eq!(widths, vec![100, 75, 56, 42, 32, 24]);
    }

    #[test]
    fn pyramid_of_minimum_width_is_single_level() {
        let levels = build_image_pyramid(&Plane::new(20, 30)).unwrap();
        assert_eq!(levels.len(), 1);
        assert_eq!(levels[0].width(), 20);
    }

    #[test]
    fn narrow_image_is_rejected() {
        assert!(matches!(
            build_image_pyramid(&Plane::new(19, 40)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Plane::from_fn(137, 91, |_, _| 0.625);
        for level in build_image_pyramid(&img).unwrap() {
            for &v in level.data() {
                assert!((v as f64 - 0.625).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn last_level_width_is_in_band() {
        for w in 20..400 {
            let levels = build_image_pyramid(&Plane::new(w, 4)).unwrap();
            let widths: Vec<usize> = levels.iter().map(Plane::width).collect();
            assert!(widths.windows(2).all(|p| p[1] < p[0]), "{widths:?}");
            let last = *widths.last().unwrap();
            assert!((20..=26).contains(&last), "width {w}: last {last}");
        }
    }

    #[test]
    fn area_resize_preserves_mean() {
        let img = Plane::from_fn(40, 30, |r, c| ((r * 7 + c * 3) % 11) as f64);
        let small = img.resize_area(30, 22);
        let mean = |p: &Plane| p.data().iter().map(|&v| v as f64).sum::<f64>() / p.data().len() as f64;
        assert!((mean(&img) - mean(&small)).abs() < 1e-4);
    }

    #[test]
    fn bilinear_sampling_interpolates() {
        let img = Plane::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(img.sample(0.5, 0.5), Some(2.5));
        assert_eq!(img.sample(0.0, 1.0), Some(2.0));
        assert_eq!(img.sample(-0.5, 0.0), None);
        assert_eq!(img.sample_clamped(-3.0, 9.0), 2.0);
    }
}
