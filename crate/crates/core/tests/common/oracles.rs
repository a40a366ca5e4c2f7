//! Slow, obviously-correct reference implementations used as test oracles.
#![allow(dead_code)]

use vsr3d_core::decoder::ProbabilityGrid;
use vsr3d_core::features::ScalarVolume;
use vsr3d_core::rng::SplitMix64;

/// Orthonormal DCT-II straight from the triple-sum definition.
pub fn naive_dct3(v: &ScalarVolume) -> ScalarVolume {
    let (nx, ny, nt) = v.dims();
    let scale = |k: usize, n: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let cos = |k: usize, i: usize, n: usize| (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
    ScalarVolume::from_fn(nx, ny, nt, |kx, ky, kt| {
        let mut s = 0.0;
        for x in 0..nx {
            for y in 0..ny {
                for t in 0..nt {
                    s += v.get(x, y, t) * cos(kx, x, nx) * cos(ky, y, ny) * cos(kt, t, nt);
                }
            }
        }
        s * scale(kx, nx) * scale(ky, ny) * scale(kt, nt)
    })
}

pub fn random_volume(rng: &mut SplitMix64, nx: usize, ny: usize, nt: usize) -> ScalarVolume {
    let data = (0..nx * ny * nt).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
    ScalarVolume::from_vec(nx, ny, nt, data).unwrap()
}

/// Best log score over every state path, enumerated exhaustively.
/// `trans[i][j]` is the weight from `i` to `j`; all weights linear.
pub fn brute_force_viterbi(priors: &[f64], trans: &[Vec<f64>], obs: &[Vec<f64>]) -> f64 {
    let n = priors.len();
    let steps = obs.len();
    let ln = |w: f64| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
    let mut best = f64::NEG_INFINITY;
    let mut path = vec![0usize; steps];
    loop {
        let mut s = ln(priors[path[0]]) + ln(obs[0][path[0]]);
        for t in 1..steps {
            s += ln(trans[path[t - 1]][path[t]]) + ln(obs[t][path[t]]);
        }
        if s > best {
            best = s;
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == steps {
                return best;
            }
            path[k] += 1;
            if path[k] < n {
                break;
            }
            path[k] = 0;
            k += 1;
        }
    }
}

/// Best `sum d * ln p` over all tilings of the grid's frames into
/// (class, duration) units, by plain recursion over the next unit.
pub fn brute_force_segmentation(grid: &ProbabilityGrid) -> f64 {
    fn best_from(grid: &ProbabilityGrid, t: usize) -> f64 {
        if t == grid.frames() {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for (c, spec) in grid.classes().iter().enumerate() {
            for d in spec.dmin..=spec.dmax {
                if let Some(p) = grid.get(c, t, d) {
                    let rest = best_from(grid, t + d);
                    let s = d as f64 * p.ln() + rest;
                    if s > best {
                        best = s;
                    }
                }
            }
        }
        best
    }
    best_from(grid, 0)
}

/// Plain edit distance with unit costs.
pub fn levenshtein(a: &[String], b: &[String]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            cur[j] = (prev[j - 1] + usize::from(a[i - 1] != b[j - 1]))
                .min(prev[j] + 1)
                .min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Largest violation of the soft-margin KKT conditions:
/// `alpha = 0 => y f >= 1`, `0 < alpha < C => y f = 1`, `alpha = C => y f <= 1`.
pub fn kkt_violation(gram: impl Fn(usize, usize) -> f64, y: &[f64], alpha: &[f64], bias: f64, c: f64) -> f64 {
    let n = y.len();
    let eps = 1e-8 * c.max(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alpha[j] * y[j] * gram(j, i)).sum::<f64>() + bias;
        let m = y[i] * f;
        let v = if alpha[i] <= eps {
            (1.0 - m).max(0.0)
        } else if alpha[i] >= c - eps {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Dual objective `sum alpha - 1/2 sum alpha_i alpha_j y_i y_j K_ij`.
pub fn dual_objective(gram: impl Fn(usize, usize) -> f64, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram(i, j);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}
