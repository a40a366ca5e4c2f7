//! Binary soft-margin SVM trained with Platt's sequential minimal
//! optimisation.
//!
//! Decision function: `f(x) = sum_i alpha_i y_i K(x_i, x) + b`. The working
//! pair is chosen with the two-loop heuristic; every scan runs in index order
//! starting after the current example, so training is reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(rbf_unchecked(x, y, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Dense symmetric Gram matrix.
#[derive(Clone, Debug)]
pub struct Gram {
    n: usize,
    values: Vec<f64>,
}

impl Gram {
    pub fn rbf(x: &[Vec<f64>], gamma: f64) -> Self {
        let n = x.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in 0..i {
                let k = rbf_unchecked(&x[i], &x[j], gamma);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Gram { n, values }
    }

    pub fn subset(&self, idx: &[usize]) -> Gram {
        let n = idx.len();
        let mut values = Vec::with_capacity(n * n);
        for &i in idx {
            for &j in idx {
                values.push(self.get(i, j));
            }
        }
        Gram { n, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Hyper-parameter grids and solver limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainConfig {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    /// KKT tolerance.
    pub tolerance: f64,
    /// Upper bound on full sweeps over the training set.
    pub max_passes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c_grid: [0, 2, 4, 6, 8].iter().map(|&e| 2f64.powi(e)).collect(),
            gamma_grid: [-9, -7, -5, -3].iter().map(|&e| 2f64.powi(e)).collect(),
            tolerance: 1e-3,
            max_passes: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() || self.gamma_grid.is_empty() {
            return Err(Error::invalid("C and gamma grids must be non-empty"));
        }
        if self.c_grid.iter().chain(&self.gamma_grid).any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("grid values must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("KKT tolerance must be positive"));
        }
        Ok(())
    }
}

/// Raw dual solution.
#[derive(Clone, Debug)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Successful pair updates.
    pub steps: usize,
    pub converged: bool,
    /// Dual objective after every update, when tracing was requested.
    pub objective_trace: Vec<f64>,
}

struct Solver<'a> {
    gram: &'a Gram,
    y: &'a [f64],
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    bias: f64,
    /// `f(x_i) - y_i`.
    errors: Vec<f64>,
    steps: usize,
    trace: Option<Vec<f64>>,
}

const STEP_EPS: f64 = 1e-10;

impl Solver<'_> {
    fn non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn objective(&self) -> f64 {
        let n = self.alpha.len();
        let mut quad = 0.0;
        for i in 0..n {
            if self.alpha[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                quad += self.alpha[i] * self.alpha[j] * self.y[i] * self.y[j] * self.gram.get(i, j);
            }
        }
        self.alpha.iter().sum::<f64>() - 0.5 * quad
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.errors[i1], self.errors[i2]);
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if y1 != y2 {
            ((a2_old - a1_old).max(0.0), (c + a2_old - a1_old).min(c))
        } else {
            ((a1_old + a2_old - c).max(0.0), (a1_old + a2_old).min(c))
        };
        if hi - lo < 1e-14 * c.max(1.0) {
            return false;
        }
        let k11 = self.gram.get(i1, i1);
        let k12 = self.gram.get(i1, i2);
        let k22 = self.gram.get(i2, i2);
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > 1e-12 {
            (a2_old + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // objective at both ends of the feasible segment
            let f1 = y1 * (e1 - self.bias) - a1_old * k11 - s * a2_old * k12;
            let f2 = y2 * (e2 - self.bias) - s * a1_old * k12 - a2_old * k22;
            let end = |a2: f64| {
                let a1 = a1_old + s * (a2_old - a2);
                a1 * f1 + a2 * f2 + 0.5 * a1 * a1 * k11 + 0.5 * a2 * a2 * k22 + s * a2 * a1 * k12
            };
            let (l_obj, h_obj) = (end(lo), end(hi));
            if l_obj < h_obj - STEP_EPS {
                lo
            } else if l_obj > h_obj + STEP_EPS {
                hi
            } else {
                a2_old
            }
        };
        if a2 < 1e-12 * c {
            a2 = 0.0;
        } else if a2 > c * (1.0 - 1e-12) {
            a2 = c;
        }
        if (a2 - a2_old).abs() < STEP_EPS * (a2 + a2_old + STEP_EPS) {
            return false;
        }
        let mut a1 = a1_old + s * (a2_old - a2);
        if a1 < 1e-12 * c {
            a1 = 0.0;
        } else if a1 > c * (1.0 - 1e-12) {
            a1 = c;
        }
        let d1 = y1 * (a1 - a1_old);
        let d2 = y2 * (a2 - a2_old);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        let new_bias = if a1 > 0.0 && a1 < c {
            b1
        } else if a2 > 0.0 && a2 < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_bias - self.bias;
        for (i, e) in self.errors.iter_mut().enumerate() {
            *e += d1 * self.gram.get(i1, i) + d2 * self.gram.get(i2, i) + db;
        }
        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        self.bias = new_bias;
        self.steps += 1;
        if self.trace.is_some() {
            let w = self.objective();
            if let Some(trace) = self.trace.as_mut() {
                trace.push(w);
            }
        }
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let n = self.alpha.len();
        let y2 = self.y[i2];
        let a2 = self.alpha[i2];
        let e2 = self.errors[i2];
        let r2 = e2 * y2;
        if !((r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0)) {
            return false;
        }
        let non_bound: Vec<usize> = (0..n).filter(|&i| self.non_bound(i)).collect();
        if non_bound.len() > 1 {
            let mut best = None;
            let mut gap = -1.0;
            for &i in &non_bound {
                let g = (self.errors[i] - e2).abs();
                if g > gap {
                    gap = g;
                    best = Some(i);
                }
            }
            if let Some(i1) = best {
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        for k in 1..=n {
            let i1 = (i2 + k) % n;
            if self.non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        for k in 1..=n {
            let i1 = (i2 + k) % n;
            if !self.non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }
}

/// Solves the dual for a precomputed kernel matrix and labels in {-1, +1}.
pub fn solve_smo(gram: &Gram, y: &[f64], c: f64, tol: f64, max_passes: usize, trace: bool) -> Result<SmoSolution> {
    let n = y.len();
    if gram.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: gram.len(),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::degenerate("training set needs both labels"));
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    let mut solver = Solver {
        gram,
        y,
        c,
        tol,
        alpha: vec![0.0; n],
        bias: 0.0,
        errors: y.iter().map(|v| -v).collect(),
        steps: 0,
        trace: trace.then(Vec::new),
    };
    let mut examine_all = true;
    let mut passes = 0;
    let mut converged = false;
    while passes < max_passes {
        let mut changed = 0;
        for i in 0..n {
            if examine_all || solver.non_bound(i) {
                changed += solver.examine(i) as usize;
            }
        }
        passes += 1;
        if examine_all {
            if changed == 0 {
                converged = true;
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    Ok(SmoSolution {
        alpha: solver.alpha,
        bias: solver.bias,
        steps: solver.steps,
        converged,
        objective_trace: solver.trace.unwrap_or_default(),
    })
}

/// Trained binary classifier with its probability calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` of every support vector.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub platt_a: f64,
    pub platt_b: f64,
}

impl BinarySvmModel {
    pub fn dimension(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        let dim = self.dimension();
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, a)| a * rbf_unchecked(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(super::platt::sigmoid_probability(self.decision_value(x)?, self.platt_a, self.platt_b))
    }
}

/// Builds the sparse model from a dual solution.
pub fn model_from_solution(x: &[Vec<f64>], y: &[f64], sol: &SmoSolution, gamma: f64) -> BinarySvmModel {
    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for i in 0..x.len() {
        if sol.alpha[i] > 0.0 {
            support_vectors.push(x[i].clone());
            alphas.push(sol.alpha[i] * y[i]);
        }
    }
    BinarySvmModel {
        support_vectors,
        alphas,
        bias: sol.bias,
        gamma,
        platt_a: -1.0,
        platt_b: 0.0,
    }
}

fn check_training_set(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if let Some(first) = x.first() {
        if let Some(bad) = x.iter().find(|r| r.len() != first.len()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                found: bad.len(),
            });
        }
    }
    Ok(())
}

/// Trains an uncalibrated binary RBF SVM (Platt parameters default to
/// `A = -1, B = 0`).
pub fn train_binary_smo(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, cfg: &TrainConfig) -> Result<BinarySvmModel> {
    check_training_set(x, y)?;
    let gram = Gram::rbf(x, gamma);
    let sol = solve_smo(&gram, y, c, cfg.tolerance, cfg.max_passes, false)?;
    Ok(model_from_solution(x, y, &sol, gamma))
}

/// Like [`train_binary_smo`] but also returns the full dual solution with
/// the objective recorded after every update.
pub fn train_binary_smo_traced(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    gamma: f64,
    cfg: &TrainConfig,
) -> Result<(BinarySvmModel, SmoSolution)> {
    check_training_set(x, y)?;
    let gram = Gram::rbf(x, gamma);
    let sol = solve_smo(&gram, y, c, cfg.tolerance, cfg.max_passes, true)?;
    Ok((model_from_solution(x, y, &sol, gamma), sol))
}
