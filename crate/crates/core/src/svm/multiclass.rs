//! One-vs-rest training with a held-out split for choosing `(C, gamma)`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::platt::{fit_platt, sigmoid_probability};
use super::smo::{model_from_solution, solve_smo, BinarySvmModel, Gram, TrainConfig};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector, StandardizationStats, UnitKind};

/// Folds used to produce out-of-sample decision values for Platt scaling.
pub const PLATT_FOLDS: usize = 5;

/// What a model was trained on; echoed into the model file.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelMeta {
    pub kind: UnitKind,
    pub features: FeatureConfig,
    pub min_duration: usize,
    pub max_duration: usize,
    pub pipeline: Option<PipelineConfig>,
}

impl Default for ModelMeta {
    fn default() -> Self {
        ModelMeta {
            kind: UnitKind::Phoneme,
            features: FeatureConfig::default(),
            min_duration: 1,
            max_duration: 25,
            pipeline: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiClassModel {
    pub class_labels: Vec<String>,
    pub per_class: Vec<BinarySvmModel>,
    pub stats: StandardizationStats,
    pub c: f64,
    pub gamma: f64,
    pub meta: ModelMeta,
}

impl MultiClassModel {
    pub fn dimension(&self) -> usize {
        self.stats.dimension()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }
}

/// Independent one-vs-rest probabilities, one per class label.
pub fn predict_probabilities(model: &MultiClassModel, x: &[f64]) -> Result<Vec<f64>> {
    let z = model.stats.apply(x)?;
    Ok(probabilities_standardized(&model.per_class, &z))
}

fn probabilities_standardized(models: &[BinarySvmModel], z: &[f64]) -> Vec<f64> {
    models
        .iter()
        .map(|m| sigmoid_probability(m.decision_unchecked(z), m.platt_a, m.platt_b))
        .collect()
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

pub fn predict_label<'a>(model: &'a MultiClassModel, x: &[f64]) -> Result<&'a str> {
    let p = predict_probabilities(model, x)?;
    Ok(&model.class_labels[argmax(&p)])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
    pub cv_accuracy: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingReport {
    /// Sorted by C, then gamma.
    pub grid: Vec<GridPoint>,
    pub chosen: GridPoint,
    pub train_samples: usize,
    pub cv_samples: usize,
}

/// Training and held-out indices: the first `cv_split` fraction of every
/// class (in input order) is held out, at least one sample and never all.
fn stratified_split(labels: &[String], classes: &[String], cv_split: f64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut cv = Vec::new();
    for class in classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| &labels[i] == class).collect();
        let held = ((cv_split * members.len() as f64).floor() as usize).clamp(1, members.len() - 1);
        cv.extend_from_slice(&members[..held]);
        train.extend_from_slice(&members[held..]);
    }
    train.sort_unstable();
    cv.sort_unstable();
    (train, cv)
}

fn class_inventory<S: AsRef<str>>(labels: &[S]) -> Result<Vec<String>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_ref()).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::degenerate(format!(
            "need at least 2 classes, found {}",
            counts.len()
        )));
    }
    if let Some((label, n)) = counts.iter().find(|(_, &n)| n < 2) {
        return Err(Error::invalid(format!("class `{label}` has only {n} sample(s); at least 2 are required")));
    }
    Ok(counts.keys().map(|s| s.to_string()).collect())
}

/// Decision values of every training point from models that did not see it;
/// fold of point `i` is `i mod k`.
fn cross_validated_scores(gram: &Gram, y: &[f64], c: f64, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let n = y.len();
    let folds = PLATT_FOLDS.min(n);
    let mut scores = vec![0.0; n];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != fold).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == fold).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let has_pos = ty.contains(&1.0);
        let has_neg = ty.contains(&-1.0);
        if !(has_pos && has_neg) {
            let constant = if has_pos { 1.0 } else { -1.0 };
            for &i in &test {
                scores[i] = constant;
            }
            continue;
        }
        let sub = gram.subset(&train);
        let sol = solve_smo(&sub, &ty, c, cfg.tolerance, cfg.max_passes, false)?;
        for &i in &test {
            scores[i] = train
                .iter()
                .enumerate()
                .filter(|(k, _)| sol.alpha[*k] > 0.0)
                .map(|(k, &j)| sol.alpha[k] * ty[k] * gram.get(i, j))
                .sum::<f64>()
                + sol.bias;
        }
    }
    Ok(scores)
}

/// One calibrated binary model on precomputed kernel values.
fn train_calibrated(x: &[FeatureVector], gram: &Gram, y: &[f64], c: f64, gamma: f64, cfg: &TrainConfig) -> Result<BinarySvmModel> {
    let sol = solve_smo(gram, y, c, cfg.tolerance, cfg.max_passes, false)?;
    let mut model = model_from_solution(x, y, &sol, gamma);
    let scores = cross_validated_scores(gram, y, c, cfg)?;
    let (a, b) = fit_platt(&scores, y)?;
    model.platt_a = a;
    model.platt_b = b;
    Ok(model)
}

fn one_vs_rest(
    x: &[FeatureVector],
    gram: &Gram,
    labels: &[&str],
    classes: &[String],
    c: f64,
    gamma: f64,
    cfg: &TrainConfig,
) -> Result<Vec<BinarySvmModel>> {
    classes
        .par_iter()
        .map(|class| {
            let y: Vec<f64> = labels.iter().map(|l| if l == class { 1.0 } else { -1.0 }).collect();
            train_calibrated(x, gram, &y, c, gamma, cfg)
        })
        .collect()
}

fn top1_accuracy(models: &[BinarySvmModel], x: &[FeatureVector], labels: &[&str], classes: &[String]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let correct = x
        .iter()
        .zip(labels)
        .filter(|(xi, l)| classes[argmax(&probabilities_standardized(models, xi))] == **l)
        .count();
    correct as f64 / x.len() as f64
}

/// Trains one-vs-rest models and reports the grid search.
pub fn train_multiclass_with_report<S: AsRef<str> + Sync>(
    labels: &[S],
    features: &[FeatureVector],
    cfg: &TrainConfig,
    cv_split: f64,
) -> Result<(MultiClassModel, TrainingReport)> {
    cfg.validate()?;
    if labels.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: features.len(),
        });
    }
    if !(cv_split > 0.0 && cv_split < 1.0) {
        return Err(Error::invalid(format!("cross-validation split must be in (0, 1), got {cv_split}")));
    }
    let classes = class_inventory(labels)?;
    let owned: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    let (train_idx, cv_idx) = stratified_split(&owned, &classes, cv_split);

    let raw_train: Vec<FeatureVector> = train_idx.iter().map(|&i| features[i].clone()).collect();
    let stats = StandardizationStats::fit(&raw_train)?;
    let standardize = |idx: &[usize]| -> Result<Vec<FeatureVector>> { idx.iter().map(|&i| stats.apply(&features[i])).collect() };
    let x_train = standardize(&train_idx)?;
    let x_cv = standardize(&cv_idx)?;
    let l_train: Vec<&str> = train_idx.iter().map(|&i| owned[i].as_str()).collect();
    let l_cv: Vec<&str> = cv_idx.iter().map(|&i| owned[i].as_str()).collect();

    let mut points: Vec<(f64, f64)> = cfg
        .c_grid
        .iter()
        .flat_map(|&c| cfg.gamma_grid.iter().map(move |&g| (c, g)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points.dedup();

    let mut gammas: Vec<f64> = points.iter().map(|p| p.1).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let grams: Vec<Gram> = gammas.par_iter().map(|&g| Gram::rbf(&x_train, g)).collect();
    let gram_for = |g: f64| &grams[gammas.iter().position(|&v| v == g).unwrap()];

    let trained: Vec<(Vec<BinarySvmModel>, GridPoint)> = points
        .par_iter()
        .map(|&(c, gamma)| {
            let models = one_vs_rest(&x_train, gram_for(gamma), &l_train, &classes, c, gamma, cfg)?;
            let point = GridPoint {
                c,
                gamma,
                cv_accuracy: top1_accuracy(&models, &x_cv, &l_cv, &classes),
                train_accuracy: top1_accuracy(&models, &x_train, &l_train, &classes),
            };
            Ok((models, point))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, (_, p)) in trained.iter().enumerate() {
        if p.cv_accuracy > trained[best].1.cv_accuracy {
            best = i;
        }
    }
    let chosen = trained[best].1;
    let report = TrainingReport {
        grid: trained.iter().map(|(_, p)| *p).collect(),
        chosen,
        train_samples: train_idx.len(),
        cv_samples: cv_idx.len(),
    };
    // models at the winning point were already trained on the training portion
    let per_class = trained.into_iter().nth(best).unwrap().0;
    let model = MultiClassModel {
        class_labels: classes,
        per_class,
        stats,
        c: chosen.c,
        gamma: chosen.gamma,
        meta: ModelMeta::default(),
    };
    Ok((model, report))
}

pub fn train_multiclass<S: AsRef<str> + Sync>(
    labels: &[S],
    features: &[FeatureVector],
    cfg: &TrainConfig,
    cv_split: f64,
) -> Result<MultiClassModel> {
    train_multiclass_with_report(labels, features, cfg, cv_split).map(|(m, _)| m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningPoint {
    pub fraction: f64,
    pub train_samples: usize,
    pub train_accuracy: f64,
    pub cv_accuracy: f64,
}

/// Accuracy on the used training subset and on the held-out split when only
/// the first `fraction` of each class's training samples is used, at a fixed
/// `(C, gamma)`.
pub fn learning_curve<S: AsRef<str> + Sync>(
    labels: &[S],
    features: &[FeatureVector],
    cfg: &TrainConfig,
    cv_split: f64,
    c: f64,
    gamma: f64,
    fractions: &[f64],
) -> Result<Vec<LearningPoint>> {
    let classes = class_inventory(labels)?;
    let owned: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    let (train_idx, cv_idx) = stratified_split(&owned, &classes, cv_split);
    fractions
        .iter()
        .map(|&fraction| {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::invalid(format!("fraction must be in (0, 1], got {fraction}")));
            }
            let mut subset = Vec::new();
            for class in &classes {
                let members: Vec<usize> = train_idx.iter().copied().filter(|&i| &owned[i] == class).collect();
                let keep = ((fraction * members.len() as f64).ceil() as usize).clamp(1, members.len());
                subset.extend_from_slice(&members[..keep]);
            }
            subset.sort_unstable();
            let raw: Vec<FeatureVector> = subset.iter().map(|&i| features[i].clone()).collect();
            let stats = StandardizationStats::fit(&raw)?;
            let x: Vec<FeatureVector> = raw.iter().map(|r| stats.apply(r)).collect::<Result<_>>()?;
            let l: Vec<&str> = subset.iter().map(|&i| owned[i].as_str()).collect();
            let gram = Gram::rbf(&x, gamma);
            let models = one_vs_rest(&x, &gram, &l, &classes, c, gamma, cfg)?;
            let x_cv: Vec<FeatureVector> = cv_idx.iter().map(|&i| stats.apply(&features[i])).collect::<Result<_>>()?;
            let l_cv: Vec<&str> = cv_idx.iter().map(|&i| owned[i].as_str()).collect();
            Ok(LearningPoint {
                fraction,
                train_samples: subset.len(),
                train_accuracy: top1_accuracy(&models, &x, &l, &classes),
                cv_accuracy: top1_accuracy(&models, &x_cv, &l_cv, &classes),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn blobs(per_class: usize, seed: u64) -> (Vec<String>, Vec<FeatureVector>) {
        let centers = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0)];
        let mut rng = SplitMix64::new(seed);
        let mut labels = Vec::new();
        let mut xs = Vec::new();
        for _ in 0..per_class {
            for (k, (cx, cy)) in centers.iter().enumerate() {
                labels.push(format!("c{k}"));
                xs.push(vec![cx + 0.5 * rng.next_gaussian(), cy + 0.5 * rng.next_gaussian()]);
            }
        }
        (labels, xs)
    }

    #[test]
    fn separable_blobs() {
        let (labels, xs) = blobs(20, 3);
        let (model, report) = train_multiclass_with_report(&labels, &xs, &TrainConfig::default(), 0.2).unwrap();
        assert_eq!(report.chosen.cv_accuracy, 1.0);
        assert_eq!(report.cv_samples, 12);
        assert_eq!(model.class_labels, vec!["c0", "c1", "c2"]);
        let p = predict_probabilities(&model, &[6.0, 0.0]).unwrap();
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(argmax(&p), 1);
    }

    #[test]
    fn single_point_grid_is_kept() {
        let (labels, xs) = blobs(10, 4);
        let cfg = TrainConfig {
            c_grid: vec![64.0],
            gamma_grid: vec![2f64.powi(-7)],
            ..TrainConfig::default()
        };
        let m = train_multiclass(&labels, &xs, &cfg, 0.2).unwrap();
        assert_eq!((m.c, m.gamma), (64.0, 2f64.powi(-7)));
    }

    #[test]
    fn rare_class_is_named() {
        let labels = ["a", "a", "b"];
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        match train_multiclass(&labels, &xs, &TrainConfig::default(), 0.2) {
            Err(Error::InvalidInput(msg)) => assert!(msg.contains("`b`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reproducible() {
        let (labels, xs) = blobs(8, 9);
        let cfg = TrainConfig::default();
        let a = train_multiclass(&labels, &xs, &cfg, 0.2).unwrap();
        let b = train_multiclass(&labels, &xs, &cfg, 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_holds_out_leading_samples() {
        let labels: Vec<String> = ["a", "b", "a", "a", "b", "a", "a"].iter().map(|s| s.to_string()).collect();
        let classes = vec!["a".to_string(), "b".to_string()];
        let (train, cv) = stratified_split(&labels, &classes, 0.2);
        assert_eq!(cv, vec![0, 1]);
        assert_eq!(train, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn learning_curve_rows() {
        let (labels, xs) = blobs(10, 5);
        let rows = learning_curve(&labels, &xs, &TrainConfig::default(), 0.2, 64.0, 0.125, &[0.5, 1.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].train_samples < rows[1].train_samples);
        assert!(rows[1].cv_accuracy > 0.9);
    }
}
