//! Dense single-channel video volumes and the temporal operations applied to
//! them before the DCT.

use crate::error::{Error, Result};

/// Real-valued volume with `x` fastest, then `y`, then `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarVolume {
    width: usize,
    height: usize,
    frames: usize,
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn zeros(width: usize, height: usize, frames: usize) -> Self {
        ScalarVolume {
            width,
            height,
            frames,
            data: vec![0.0; width * height * frames],
        }
    }

    pub fn from_vec(width: usize, height: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * frames {
            return Err(Error::DimensionMismatch {
                expected: width * height * frames,
                found: data.len(),
            });
        }
        if width == 0 || height == 0 || frames == 0 {
            return Err(Error::invalid("volume dimensions must be positive"));
        }
        Ok(ScalarVolume {
            width,
            height,
            frames,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, frames: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * frames);
        for t in 0..frames {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, t));
                }
            }
        }
        ScalarVolume {
            width,
            height,
            frames,
            data,
        }
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

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.frames)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        (t * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.data[self.index(x, y, t)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, t: usize, v: f64) {
        let i = self.index(x, y, t);
        self.data[i] = v;
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    /// Frames `start..start + len`.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<ScalarVolume> {
        if len == 0 || start + len > self.frames {
            return Err(Error::invalid(format!(
                "frames {start}..{} outside a volume of {} frames",
                start + len,
                self.frames
            )));
        }
        let n = self.frame_len();
        ScalarVolume::from_vec(
            self.width,
            self.height,
            len,
            self.data[start * n..(start + len) * n].to_vec(),
        )
    }

    pub fn max_abs_diff(&self, other: &ScalarVolume) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Linear interpolation between whole frames at a real frame position,
    /// clamped to the first and last frame.
    fn frame_at(&self, pos: f64, out: &mut [f64]) {
        let last = (self.frames - 1) as f64;
        let p = pos.clamp(0.0, last);
        let f0 = p.floor() as usize;
        let frac = p - f0 as f64;
        let a = self.frame(f0);
        if frac == 0.0 || f0 + 1 >= self.frames {
            out.copy_from_slice(a);
        } else {
            let b = self.frame(f0 + 1);
            for ((o, &va), &vb) in out.iter_mut().zip(a).zip(b) {
                *o = (1.0 - frac) * va + frac * vb;
            }
        }
    }
}

/// Delays the video by `delta_ms`: output frame `t` samples the input at
/// `t - delta_ms * fps / 1000`.
pub fn time_shift(volume: &ScalarVolume, delta_ms: f64, fps: f64) -> Result<ScalarVolume> {
    if !(delta_ms >= 0.0) {
        return Err(Error::invalid(format!("time shift must be non-negative, got {delta_ms}")));
    }
    if !(fps > 0.0) {
        return Err(Error::invalid(format!("fps must be positive, got {fps}")));
    }
    let shift = delta_ms * fps / 1000.0;
    let mut out = ScalarVolume::zeros(volume.width, volume.height, volume.frames);
    let n = volume.frame_len();
    for t in 0..volume.frames {
        volume.frame_at(t as f64 - shift, &mut out.data[t * n..(t + 1) * n]);
    }
    Ok(out)
}

/// Removes each pixel's temporal mean.
pub fn subtract_sequence_mean(volume: &ScalarVolume) -> ScalarVolume {
    let n = volume.frame_len();
    let mut mean = vec![0.0; n];
    for t in 0..volume.frames {
        for (m, v) in mean.iter_mut().zip(volume.frame(t)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= volume.frames as f64;
    }
    let mut out = volume.clone();
    for t in 0..volume.frames {
        for (o, m) in out.data[t * n..(t + 1) * n].iter_mut().zip(&mean) {
            *o -= m;
        }
    }
    out
}

/// Interpolation weights mapping `length` output frames onto `d` input
/// frames: entry `t` is `(f0, w0, w1)` so that
/// `out[t] = w0 * in[f0] + w1 * in[f0 + 1]`.
pub fn resample_weights(d: usize, length: usize) -> Vec<(usize, f64, f64)> {
    (0..length)
        .map(|t| {
            if d == 1 {
                return (0, 1.0, 0.0);
            }
            let pos = t as f64 * (d - 1) as f64 / (length - 1) as f64;
            let f0 = (pos.floor() as usize).min(d - 1);
            let frac = pos - f0 as f64;
            if f0 + 1 >= d || frac == 0.0 {
                (f0, 1.0, 0.0)
            } else {
                (f0, 1.0 - frac, frac)
            }
        })
        .collect()
}

/// Stretches or squeezes a volume to `length` frames by per-pixel linear
/// interpolation. A single frame is replicated.
pub fn resample_to_length(volume: &ScalarVolume, length: usize) -> Result<ScalarVolume> {
    if length < 2 {
        return Err(Error::invalid(format!("target length must be at least 2, got {length}")));
    }
    let n = volume.frame_len();
    let mut out = ScalarVolume::zeros(volume.width, volume.height, length);
    for (t, (f0, w0, w1)) in resample_weights(volume.frames, length).into_iter().enumerate() {
        let dst = &mut out.data[t * n..(t + 1) * n];
        let a = volume.frame(f0);
        if w1 == 0.0 {
            dst.copy_from_slice(a);
        } else {
            let b = volume.frame(f0 + 1);
            for ((o, &va), &vb) in dst.iter_mut().zip(a).zip(b) {
                *o = w0 * va + w1 * vb;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(frames: usize) -> ScalarVolume {
        ScalarVolume::from_fn(3, 2, frames, |x, y, t| (t * 10 + y * 3 + x) as f64)
    }

    #[test]
    fn zero_shift_is_identity() {
        let v = ramp(6);
        assert_eq!(time_shift(&v, 0.0, 25.0).unwrap(), v);
    }

    #[test]
    fn forty_ms_at_25_fps_is_one_frame() {
        let v = ramp(5);
        let s = time_shift(&v, 40.0, 25.0).unwrap();
        assert_eq!(s.frame(0), v.frame(0));
        for t in 1..5 {
            assert_eq!(s.frame(t), v.frame(t - 1));
        }
    }

    #[test]
    fn twenty_ms_is_a_midpoint() {
        let v = ramp(4);
        let s = time_shift(&v, 20.0, 25.0).unwrap();
        for t in 1..4 {
            for (i, &o) in s.frame(t).iter().enumerate() {
                let expect = 0.5 * v.frame(t)[i] + 0.5 * v.frame(t - 1)[i];
                assert!((o - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negative_shift_is_rejected() {
        assert!(time_shift(&ramp(3), -1.0, 25.0).is_err());
    }

    #[test]
    fn mean_subtraction_cases() {
        let c = ScalarVolume::from_fn(2, 2, 3, |_, _, _| 4.5);
        assert!(subtract_sequence_mean(&c).data().iter().all(|&v| v == 0.0));
        let two = ScalarVolume::from_vec(1, 1, 2, vec![3.0, 5.0]).unwrap();
        assert_eq!(subtract_sequence_mean(&two).data(), &[-1.0, 1.0]);
    }

    #[test]
    fn resample_cases() {
        let v = ramp(10);
        assert_eq!(resample_to_length(&v, 10).unwrap(), v);
        let two = ScalarVolume::from_vec(1, 1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(resample_to_length(&two, 3).unwrap().data(), &[0.0, 0.5, 1.0]);
        let one = ScalarVolume::from_vec(1, 1, 1, vec![7.0]).unwrap();
        assert_eq!(resample_to_length(&one, 4).unwrap().data(), &[7.0; 4]);
        let flat = ScalarVolume::from_fn(2, 2, 7, |x, y, _| (x + y) as f64);
        let r = resample_to_length(&flat, 10).unwrap();
        for t in 0..10 {
            assert_eq!(r.frame(t), flat.frame(0));
        }
        assert!(resample_to_length(&flat, 1).is_err());
    }
}
