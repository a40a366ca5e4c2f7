//! Orthonormal 3D DCT-II and the low-frequency pyramid mask.

use super::volume::ScalarVolume;
use crate::error::{Error, Result};

/// Orthonormal DCT-II basis: `row k` holds `alpha_k cos(pi (2n + 1) k / 2N)`.
#[derive(Clone, Debug)]
pub struct DctBasis {
    n: usize,
    table: Vec<f64>,
}

impl DctBasis {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n * n);
        for k in 0..n {
            let alpha = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for i in 0..n {
                let arg = std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64;
                table.push(alpha * arg.cos());
            }
        }
        DctBasis { n, table }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.table[k * self.n..(k + 1) * self.n]
    }

    fn forward(&self, input: &[f64], output: &mut [f64]) {
        for (k, out) in output.iter_mut().enumerate() {
            *out = self.row(k).iter().zip(input).map(|(b, x)| b * x).sum();
        }
    }

    fn inverse(&self, input: &[f64], output: &mut [f64]) {
        output.iter_mut().for_each(|o| *o = 0.0);
        for (k, &c) in input.iter().enumerate() {
            for (o, b) in output.iter_mut().zip(self.row(k)) {
                *o += c * b;
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
    T,
}

fn apply_axis(volume: &ScalarVolume, axis: Axis, inverse: bool) -> ScalarVolume {
    let (w, h, f) = volume.dims();
    let n = match axis {
        Axis::X => w,
        Axis::Y => h,
        Axis::T => f,
    };
    let basis = DctBasis::new(n);
    let mut out = volume.clone();
    let mut line = vec![0.0; n];
    let mut coeffs = vec![0.0; n];
    let (outer_a, outer_b) = match axis {
        Axis::X => (h, f),
        Axis::Y => (w, f),
        Axis::T => (w, h),
    };
    for a in 0..outer_a {
        for b in 0..outer_b {
            let idx = |i: usize| match axis {
                Axis::X => volume.index(i, a, b),
                Axis::Y => volume.index(a, i, b),
                Axis::T => volume.index(a, b, i),
            };
            for (i, l) in line.iter_mut().enumerate() {
                *l = volume.data()[idx(i)];
            }
            if inverse {
                basis.inverse(&line, &mut coeffs);
            } else {
                basis.forward(&line, &mut coeffs);
            }
            for (i, &c) in coeffs.iter().enumerate() {
                let (x, y, t) = match axis {
                    Axis::X => (i, a, b),
                    Axis::Y => (a, i, b),
                    Axis::T => (a, b, i),
                };
                out.set(x, y, t, c);
            }
        }
    }
    out
}

/// Separable orthonormal DCT-II along x, y and t. Coefficient `(i, j, k)` is
/// stored at position `(x=i, y=j, t=k)`.
pub fn dct3(volume: &ScalarVolume) -> ScalarVolume {
    let v = apply_axis(volume, Axis::X, false);
    let v = apply_axis(&v, Axis::Y, false);
    apply_axis(&v, Axis::T, false)
}

/// Inverse of [`dct3`].
pub fn idct3(coeffs: &ScalarVolume) -> ScalarVolume {
    let v = apply_axis(coeffs, Axis::T, true);
    let v = apply_axis(&v, Axis::Y, true);
    apply_axis(&v, Axis::X, true)
}

/// Number of coefficients selected by a pyramid mask of size `s`.
pub fn pyramid_count(s: usize) -> usize {
    s * (s + 1) * (s + 2) / 6
}

/// Frequency triples `(i, j, k)` with `i + j + k <= s - 1`, lexicographic.
pub fn pyramid_indices(s: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(pyramid_count(s));
    for i in 0..s {
        for j in 0..s - i {
            for k in 0..s - i - j {
                out.push((i, j, k));
            }
        }
    }
    out
}

/// Low-frequency coefficients under the pyramid mask.
pub fn pyramid_extract(coeffs: &ScalarVolume, s: usize) -> Result<Vec<f64>> {
    let (w, h, f) = coeffs.dims();
    if s == 0 || s > w.min(h).min(f) {
        return Err(Error::invalid(format!(
            "mask size {s} does not fit a {w}x{h}x{f} coefficient volume"
        )));
    }
    Ok(pyramid_indices(s)
        .into_iter()
        .map(|(i, j, k)| coeffs.get(i, j, k))
        .collect())
}
