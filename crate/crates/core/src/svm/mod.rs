//! RBF support vector machines: SMO training, Platt calibration and
//! one-vs-rest multi-class models.

pub mod multiclass;
pub mod platt;
pub mod smo;

use std::io;

use serde::{Deserialize, Serialize};

pub use multiclass::{
    learning_curve, predict_label, predict_probabilities, train_multiclass, train_multiclass_with_report, GridPoint,
    LearningPoint, ModelMeta, MultiClassModel, TrainingReport,
};
pub use platt::{fit_platt, platt_nll, sigmoid_probability};
pub use smo::{rbf_kernel, train_binary_smo, train_binary_smo_traced, BinarySvmModel, Gram, SmoSolution, TrainConfig};

use crate::error::{Error, Result};
use crate::config::PipelineConfig;
use crate::features::{FeatureConfig, StandardizationStats, UnitKind};
use crate::segmentation::Channel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModelFile {
    version: u32,
    kind: UnitKind,
    class_labels: Vec<String>,
    config: ConfigEcho,
    stats: StandardizationStats,
    models: Vec<BinaryEntry>,
    /// Full configuration the model was trained with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pipeline: Option<PipelineConfig>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ConfigEcho {
    channel: Channel,
    delta_tms: f64,
    l: usize,
    s: usize,
    fps: f64,
    #[serde(rename = "C")]
    c: f64,
    gamma: f64,
    min_duration: usize,
    max_duration: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct BinaryEntry {
    label: String,
    gamma: f64,
    bias: f64,
    platt_a: f64,
    platt_b: f64,
    alphas: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
}

/// Writes every `f64` with 17 significant digits so values round-trip.
struct PreciseFloats;

impl serde_json::ser::Formatter for PreciseFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn check_finite(model: &MultiClassModel) -> Result<()> {
    let all = model
        .stats
        .mean
        .iter()
        .chain(&model.stats.std)
        .chain(model.per_class.iter().flat_map(|m| {
            m.alphas
                .iter()
                .chain(m.support_vectors.iter().flatten())
                .chain([&m.bias, &m.platt_a, &m.platt_b, &m.gamma])
        }));
    for v in all {
        if !v.is_finite() {
            return Err(Error::degenerate("model contains a non-finite value"));
        }
    }
    Ok(())
}

pub fn model_to_json(model: &MultiClassModel) -> Result<String> {
    check_finite(model)?;
    let meta = &model.meta;
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        kind: meta.kind,
        class_labels: model.class_labels.clone(),
        config: ConfigEcho {
            channel: meta.features.channel,
            delta_tms: meta.features.delta_t_ms,
            l: meta.features.length,
            s: meta.features.mask,
            fps: meta.features.fps,
            c: model.c,
            gamma: model.gamma,
            min_duration: meta.min_duration,
            max_duration: meta.max_duration,
        },
        stats: model.stats.clone(),
        models: model
            .class_labels
            .iter()
            .zip(&model.per_class)
            .map(|(label, m)| BinaryEntry {
                label: label.clone(),
                gamma: m.gamma,
                bias: m.bias,
                platt_a: m.platt_a,
                platt_b: m.platt_b,
                alphas: m.alphas.clone(),
                support_vectors: m.support_vectors.clone(),
            })
            .collect(),
        pipeline: meta.pipeline.clone(),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PreciseFloats);
    file.serialize(&mut ser)
        .map_err(|e| Error::format("model", e.to_string()))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

pub fn model_from_json(text: &str) -> Result<MultiClassModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::format("model", e.to_string()))?;
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::format("model", format!("unsupported version {}", file.version)));
    }
    if file.models.len() != file.class_labels.len()
        || file.models.iter().zip(&file.class_labels).any(|(m, l)| &m.label != l)
    {
        return Err(Error::format("model", "models[] must list one entry per class label, in order"));
    }
    let dim = file.stats.mean.len();
    if file.stats.std.len() != dim {
        return Err(Error::format("model", "stats mean/std lengths differ"));
    }
    for m in &file.models {
        if m.alphas.len() != m.support_vectors.len() || m.support_vectors.is_empty() {
            return Err(Error::format("model", format!("class `{}` has inconsistent support vectors", m.label)));
        }
        if m.support_vectors.iter().any(|sv| sv.len() != dim) {
            return Err(Error::format("model", format!("class `{}` support vector dimension differs from stats", m.label)));
        }
    }
    let features = FeatureConfig {
        channel: file.config.channel,
        delta_t_ms: file.config.delta_tms,
        length: file.config.l,
        mask: file.config.s,
        fps: file.config.fps,
    };
    features.validate()?;
    if features.dimension() != dim {
        return Err(Error::format(
            "model",
            format!("mask size {} implies {} features, stats have {dim}", features.mask, features.dimension()),
        ));
    }
    Ok(MultiClassModel {
        class_labels: file.class_labels,
        per_class: file
            .models
            .into_iter()
            .map(|m| BinarySvmModel {
                support_vectors: m.support_vectors,
                alphas: m.alphas,
                bias: m.bias,
                gamma: m.gamma,
                platt_a: m.platt_a,
                platt_b: m.platt_b,
            })
            .collect(),
        stats: file.stats,
        c: file.config.c,
        gamma: file.config.gamma,
        meta: ModelMeta {
            kind: file.kind,
            features,
            min_duration: file.config.min_duration,
            max_duration: file.config.max_duration,
            pipeline: file.pipeline,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> MultiClassModel {
        let bin = |b: f64| BinarySvmModel {
            support_vectors: vec![vec![0.1; 11], vec![1.0 / 3.0; 11]],
            alphas: vec![0.7, -0.7],
            bias: b,
            gamma: 2f64.powi(-7),
            platt_a: -1.2345678901234567,
            platt_b: 1e-17,
        };
        MultiClassModel {
            class_labels: vec!["AA".into(), "T".into()],
            per_class: vec![bin(0.1), bin(-0.2)],
            stats: StandardizationStats {
                mean: vec![0.5; 11],
                std: vec![std::f64::consts::PI; 11],
            },
            c: 64.0,
            gamma: 2f64.powi(-7),
            meta: ModelMeta::default(),
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = tiny_model();
        let text = model_to_json(&m).unwrap();
        assert!(text.contains("\"plattA\":-1.2345678901234567e0"));
        assert!(text.contains("\"C\":6.4000000000000000e1"));
        assert_eq!(model_from_json(&text).unwrap(), m);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let text = model_to_json(&tiny_model()).unwrap().replace("\"label\":\"T\"", "\"label\":\"K\"");
        assert!(model_from_json(&text).is_err());
    }
}
