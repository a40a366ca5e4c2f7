//! Sigmoid calibration of SVM decision values, `p(f) = 1 / (1 + exp(A f + B))`,
//! fitted by Newton's method with backtracking on smoothed targets.

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const SIGMA: f64 = 1e-12;
const GRAD_EPS: f64 = 1e-5;

/// Numerically stable sigmoid probability.
pub fn sigmoid_probability(f: f64, a: f64, b: f64) -> f64 {
    let z = a * f + b;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

fn targets(labels: &[f64]) -> Result<Vec<f64>> {
    let pos = labels.iter().filter(|&&l| l > 0.0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::degenerate("Platt scaling needs both labels"));
    }
    let hi = (pos as f64 + 1.0) / (pos as f64 + 2.0);
    let lo = 1.0 / (neg as f64 + 2.0);
    Ok(labels.iter().map(|&l| if l > 0.0 { hi } else { lo }).collect())
}

fn nll_with_targets(scores: &[f64], t: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(t)
        .map(|(&f, &t)| {
            let z = a * f + b;
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Negative log-likelihood of `(A, B)` under the smoothed targets.
pub fn platt_nll(scores: &[f64], labels: &[f64], a: f64, b: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    Ok(nll_with_targets(scores, &targets(labels)?, a, b))
}

/// Fits `(A, B)`; labels are read by sign.
pub fn fit_platt(scores: &[f64], labels: &[f64]) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("decision values must be finite"));
    }
    let t = targets(labels)?;
    let pos = labels.iter().filter(|&&l| l > 0.0).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut a = 0.0;
    let mut b = ((neg + 1.0) / (pos + 1.0)).ln();
    let mut fval = nll_with_targets(scores, &t, a, b);

    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &ti) in scores.iter().zip(&t) {
            let p = sigmoid_probability(f, a, b);
            let q = 1.0 - p;
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < GRAD_EPS && g2.abs() < GRAD_EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = nll_with_targets(scores, &t, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid_probability(0.0, -1.0, 0.0), 0.5);
        let big = sigmoid_probability(1e4, -1.0, 0.0);
        assert!(big > 0.999 && big <= 1.0);
        assert!(sigmoid_probability(-1e4, -1.0, 0.0) >= 0.0);
    }

    #[test]
    fn symmetric_scores_give_zero_offset() {
        let scores = [-2.0, -1.5, -0.4, -0.1, 0.1, 0.4, 1.5, 2.0];
        let labels = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let (a, b) = fit_platt(&scores, &labels).unwrap();
        assert!(a < 0.0);
        assert!(b.abs() < 1e-3, "B = {b}");
    }

    #[test]
    fn separable_data_keeps_finite_slope() {
        let scores = [-3.0, -2.0, 2.0, 3.0];
        let labels = [-1.0, -1.0, 1.0, 1.0];
        let (a, _) = fit_platt(&scores, &labels).unwrap();
        assert!(a.is_finite() && a < 0.0);
    }

    #[test]
    fn local_minimum() {
        let scores = [-1.2, -0.3, 0.2, -0.8, 0.9, 1.4, -0.1, 0.5, 2.0, -2.2];
        let labels = [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0];
        let (a, b) = fit_platt(&scores, &labels).unwrap();
        let best = platt_nll(&scores, &labels, a, b).unwrap();
        for (da, db) in [(0.1, 0.0), (-0.1, 0.0), (0.0, 0.1), (0.0, -0.1)] {
            assert!(best <= platt_nll(&scores, &labels, a + da, b + db).unwrap());
        }
    }

    #[test]
    fn single_label_is_rejected() {
        assert!(fit_platt(&[0.1, 0.2], &[1.0, 1.0]).is_err());
    }
}
