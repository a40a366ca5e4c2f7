use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use vsr3d_core::config::PipelineConfig;
use vsr3d_core::decoder::ProbabilityGrid;
use vsr3d_core::eval::{evaluate, paired_t_test_one_tailed};
use vsr3d_core::features::{enumerate_subsequences, extract_labeled_samples, FeatureExtractor, Transcript, UnitKind};
use vsr3d_core::fixtures::{synth_corpus, synth_sentence, SynthConfig, TRANSCRIPT_FILE};
use vsr3d_core::image::VideoSequence;
use vsr3d_core::io::{self, FeatureRow};
use vsr3d_core::pipeline::{self, SentenceData};
use vsr3d_core::segmentation::{segment_video, Channel};
use vsr3d_core::svm::{model_from_json, model_to_json, MultiClassModel, TrainConfig};

use crate::{BenchArgs, DecodeArgs, EvalArgs, FeatureOverrides, FeaturizeArgs, HeatmapArgs, SegmentArgs, SynthArgs, TrainArgs};

pub const ROI_FILE: &str = "roi.vsr1";
pub const KEYPOINTS_FILE: &str = "keypoints.csv";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations.
    Usage(String),
    /// Anything wrong with the files or data being processed.
    Data(vsr3d_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<vsr3d_core::Error> for CliError {
    fn from(e: vsr3d_core::Error) -> Self {
        CliError::Data(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(vsr3d_core::Error::InvalidInput(msg.into()))
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn parse_units(s: &str) -> Result<UnitKind> {
    s.parse().map_err(|_| usage(format!("unknown unit kind `{s}`")))
}

fn apply_feature_overrides(cfg: &mut PipelineConfig, o: &FeatureOverrides) -> Result<()> {
    if let Some(c) = &o.channel {
        cfg.features.channel = c.parse::<Channel>().map_err(|_| usage(format!("unknown channel `{c}`")))?;
    }
    if let Some(v) = o.delta_t {
        cfg.features.delta_t_ms = v;
    }
    if let Some(v) = o.length {
        cfg.features.length = v;
    }
    if let Some(v) = o.mask {
        cfg.features.mask = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    Ok(io::write_bytes(path, bytes.as_ref())?)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::with_classes(a.seed, a.classes);
    cfg.sentence_length = a.units;
    cfg.noise_sigma = a.noise / 255.0;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.sentences == 0 {
        return Err(usage("--sentences must be at least 1"));
    }
    let truths = synth_corpus(&cfg, a.sentences, &a.out)?;
    let frames: usize = truths.iter().map(|t| t.frames()).sum();
    println!("wrote {} sentences ({frames} frames) to {}", truths.len(), a.out.display());
    Ok(())
}

/// One sentence of an input tree: either raw frames or a segmented ROI.
struct InputSentence {
    id: String,
    dir: PathBuf,
    segmented: bool,
}

/// Sentence directories under `root` (or `root` itself), sorted by name.
fn list_inputs(root: &Path) -> Result<Vec<InputSentence>> {
    let is_sentence = |p: &Path| p.join(ROI_FILE).is_file() || p.join(io::MANIFEST).is_file();
    let make = |p: &Path| InputSentence {
        id: p
            .file_name()
            .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()),
        dir: p.to_path_buf(),
        segmented: p.join(ROI_FILE).is_file(),
    };
    if is_sentence(root) {
        return Ok(vec![make(root)]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| vsr3d_core::Error::Io {
        path: root.to_path_buf(),
        source: e,
    })?;
    let mut out: Vec<InputSentence> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_sentence(p))
        .map(|p| make(&p))
        .collect();
    if out.is_empty() {
        return Err(data(format!("{} holds no sentence directories", root.display())));
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

fn read_optional_transcript(dir: &Path) -> Result<Option<Transcript>> {
    let p = dir.join(TRANSCRIPT_FILE);
    if p.is_file() {
        Ok(Some(io::read_transcript(&p)?))
    } else {
        Ok(None)
    }
}

fn load_roi(s: &InputSentence, cfg: &PipelineConfig) -> Result<vsr3d_core::segmentation::RoiVolume> {
    if s.segmented {
        Ok(io::read_roi(&s.dir.join(ROI_FILE))?)
    } else {
        Ok(pipeline::segment_dir(&s.dir, cfg)?.roi)
    }
}

pub fn segment(a: SegmentArgs, cfg: &PipelineConfig) -> Result<()> {
    let inputs = list_inputs(&a.input)?;
    if let Some(s) = inputs.iter().find(|s| s.segmented) {
        return Err(data(format!("{} is already segmented", s.dir.display())));
    }
    let mut seg_cfg = pipeline::segmentation_config(cfg);
    seg_cfg.forced_lip_row = a.lip_row;
    inputs.par_iter().try_for_each(|s| -> Result<()> {
        let video = io::read_video_dir(&s.dir)?;
        let seg = segment_video(&video, &seg_cfg).map_err(|e| data(format!("{}: {e}", s.id)))?;
        let out = a.out.join(&s.id);
        write(&out.join(KEYPOINTS_FILE), io::keypoints_to_csv(&seg.keypoints))?;
        io::write_roi(&out.join(ROI_FILE), &seg.roi)?;
        if let Some(t) = read_optional_transcript(&s.dir)? {
            write(&out.join(TRANSCRIPT_FILE), t.to_text())?;
        }
        Ok(())
    })?;
    println!("segmented {} sentences into {}", inputs.len(), a.out.display());
    Ok(())
}

pub fn featurize(a: FeaturizeArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_feature_overrides(&mut cfg, &a.features)?;
    let kind = parse_units(&a.units)?;
    let inputs = list_inputs(&a.input)?;
    let counts: Vec<usize> = inputs
        .par_iter()
        .map(|s| -> Result<usize> {
            let roi = load_roi(s, &cfg)?;
            let rows: Vec<FeatureRow> = match read_optional_transcript(&s.dir)? {
                Some(t) => extract_labeled_samples(&roi, &t, kind, &cfg.features)?
                    .into_iter()
                    .map(|x| FeatureRow {
                        spec: x.spec,
                        features: x.features,
                        label: Some(x.label),
                    })
                    .collect(),
                None => {
                    let ex = FeatureExtractor::new(&roi, &cfg.features)?;
                    let b = cfg.durations.get(kind);
                    let specs = enumerate_subsequences(ex.frames(), b.min, b.max);
                    let feats = ex.features_many(&specs)?;
                    specs
                        .into_iter()
                        .zip(feats)
                        .map(|(spec, features)| FeatureRow {
                            spec,
                            features,
                            label: None,
                        })
                        .collect()
                }
            };
            write(&a.out.join(format!("{}.csv", s.id)), io::features_to_csv(&rows))?;
            Ok(rows.len())
        })
        .collect::<Result<_>>()?;
    println!(
        "wrote {} feature rows for {} sentences to {}",
        counts.iter().sum::<usize>(),
        inputs.len(),
        a.out.display()
    );
    Ok(())
}

fn load_training_data(root: &Path, cfg: &PipelineConfig) -> Result<Vec<SentenceData>> {
    list_inputs(root)?
        .par_iter()
        .map(|s| {
            let transcript = read_optional_transcript(&s.dir)?
                .ok_or_else(|| data(format!("{} has no {TRANSCRIPT_FILE}", s.dir.display())))?;
            Ok(SentenceData {
                id: s.id.clone(),
                roi: load_roi(s, cfg)?,
                transcript,
            })
        })
        .collect()
}

pub fn train(a: TrainArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_feature_overrides(&mut cfg, &a.features)?;
    if a.derive_durations {
        cfg.derive_durations = true;
    }
    if let Some(c) = a.c_grid {
        cfg.svm.c_grid = c;
    }
    if let Some(g) = a.gamma_grid {
        cfg.svm.gamma_grid = g;
    }
    if let Some(v) = a.cv_split {
        cfg.cv_split = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let kind = parse_units(&a.units)?;
    let data = load_training_data(&a.input, &cfg)?;
    let (model, report) = pipeline::train_units(&data, kind, &cfg)?;
    write(&a.out, model_to_json(&model)?)?;
    if let Some(path) = &a.report {
        let mut csv = String::from("C,gamma,cvAccuracy,trainAccuracy,chosen\n");
        for p in &report.grid {
            let chosen = p.c == report.chosen.c && p.gamma == report.chosen.gamma;
            let _ = writeln!(
                csv,
                "{},{},{:.6},{:.6},{}",
                p.c,
                p.gamma,
                p.cv_accuracy,
                p.train_accuracy,
                u8::from(chosen)
            );
        }
        write(path, csv)?;
    }
    println!(
        "{kind} model: {} classes, C={} gamma={} cv accuracy {:.4} ({} train / {} held out), durations {}..={}",
        model.class_labels.len(),
        model.c,
        model.gamma,
        report.chosen.cv_accuracy,
        report.train_samples,
        report.cv_samples,
        model.meta.min_duration,
        model.meta.max_duration
    );
    Ok(())
}

fn read_model(path: &Path) -> Result<MultiClassModel> {
    model_from_json(&io::read_text(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn decode(a: DecodeArgs) -> Result<()> {
    let units = read_model(&a.model)?;
    if let Some(u) = &a.units {
        let want = parse_units(u)?;
        if want.is_pair() {
            return Err(usage("--units takes phoneme or viseme; use --use-biphones for pairs"));
        }
        if want != units.meta.kind {
            return Err(usage(format!("--units {want} but the model is a {} model", units.meta.kind)));
        }
    }
    let pairs = match (a.use_biphones, &a.pair_model) {
        (true, Some(p)) => Some(read_model(p)?),
        (true, None) => return Err(usage("--use-biphones needs --pair-model")),
        (false, Some(_)) => return Err(usage("--pair-model is only used with --use-biphones")),
        (false, None) => None,
    };
    // the unit model's own settings drive segmentation of raw input
    let cfg = units.meta.pipeline.clone().unwrap_or_default();
    let inputs = list_inputs(&a.input)?;
    inputs.par_iter().try_for_each(|s| -> Result<()> {
        let roi = load_roi(s, &cfg)?;
        let grid = pipeline::probability_grid(&units, pairs.as_ref(), &roi)?;
        if let Some(dir) = &a.grids {
            let mut buf = Vec::new();
            grid.write_to(&mut buf)?;
            write(&dir.join(format!("{}.grd", s.id)), buf)?;
        }
        let mut seq = vsr3d_core::decoder::decode_sequence(&grid)?;
        if pairs.is_some() {
            seq = vsr3d_core::decoder::expand_biphones(&seq)?;
        }
        let fps = units.meta.features.fps;
        write(&a.out.join(format!("{}.txt", s.id)), seq.to_transcript(fps)?.to_text())
    })?;
    println!("decoded {} sentences into {}", inputs.len(), a.out.display());
    Ok(())
}

/// Labels of a transcript file; lines may be `LABEL START END` or bare
/// whitespace-separated labels.
fn read_labels(path: &Path) -> Result<Vec<String>> {
    let text = io::read_text(path)?;
    match Transcript::parse(&text) {
        Ok(t) => Ok(t.labels()),
        Err(_) if text.lines().all(|l| l.split_whitespace().all(|t| t.parse::<f64>().is_err())) => {
            Ok(text.split_whitespace().map(str::to_string).collect())
        }
        Err(e) => Err(data(format!("{}: {e}", path.display()))),
    }
}

/// `(id, path)` of every transcript under `root`: `<id>.txt` files or
/// `<id>/transcript.txt` sentence directories. A file yields itself.
fn transcript_files(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    if root.is_file() {
        let id = root.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        return Ok(vec![(id, root.to_path_buf())]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| vsr3d_core::Error::Io {
        path: root.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::new();
    for p in entries.filter_map(|e| e.ok().map(|e| e.path())) {
        if p.is_file() && p.extension().is_some_and(|x| x == "txt") {
            out.push((p.file_stem().unwrap().to_string_lossy().into_owned(), p));
        } else if p.join(TRANSCRIPT_FILE).is_file() {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), p.join(TRANSCRIPT_FILE)));
        }
    }
    if out.is_empty() {
        return Err(data(format!("no transcripts under {}", root.display())));
    }
    out.sort();
    Ok(out)
}

type Items = Vec<(String, Vec<String>, Vec<String>)>;

fn paired_items(reference: &Path, hyp: &Path) -> Result<Items> {
    let refs = transcript_files(reference)?;
    let hyps = transcript_files(hyp)?;
    if refs.len() == 1 && hyps.len() == 1 && reference.is_file() && hyp.is_file() {
        return Ok(vec![(refs[0].0.clone(), read_labels(&refs[0].1)?, read_labels(&hyps[0].1)?)]);
    }
    refs.iter()
        .map(|(id, rp)| {
            let hp = hyps
                .iter()
                .find(|(h, _)| h == id)
                .map(|(_, p)| p)
                .ok_or_else(|| data(format!("no hypothesis for `{id}` in {}", hyp.display())))?;
            Ok((id.clone(), read_labels(rp)?, read_labels(hp)?))
        })
        .collect()
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let visemes = match parse_units(&a.units)? {
        UnitKind::Phoneme => false,
        UnitKind::Viseme => true,
        other => return Err(usage(format!("cannot score {other} units; use phoneme or viseme"))),
    };
    let items = paired_items(&a.reference, &a.hyp)?;
    let report = evaluate(&items, visemes)?;
    let mut summary = report.to_csv();
    println!(
        "sentences {} T {} C {} S {} D {} I {} accuracy {:.6} mean {:.6}",
        report.sequences.len(),
        report.total.t,
        report.total.c,
        report.total.s,
        report.total.d,
        report.total.i,
        report.accuracy,
        report.mean_accuracy()
    );
    if let Some(base) = &a.baseline {
        let base_report = evaluate(&paired_items(&a.reference, base)?, visemes)?;
        let acc = |r: &vsr3d_core::eval::EvalReport| r.sequences.iter().map(|s| s.accuracy).collect::<Vec<_>>();
        let t = paired_t_test_one_tailed(&acc(&base_report), &acc(&report))?;
        println!("paired t-test (hyp better than baseline): t {:.4} df {} p {:.6}", t.t, t.df, t.p);
        let _ = writeln!(summary, "TTEST,t={:.6},df={},p={:.6}", t.t, t.df, t.p);
    }
    if let Some(out) = &a.out {
        write(out, &summary)?;
    }
    if let Some(path) = &a.confusion {
        write(path, report.confusion()?.to_csv())?;
    }
    Ok(())
}

/// A small model trained on synthetic data, for timing runs without a
/// trained model.
fn bench_model(seed: u64, cfg: &PipelineConfig) -> Result<MultiClassModel> {
    let synth = SynthConfig::with_classes(seed, 3);
    let data: Vec<SentenceData> = (0..6)
        .into_par_iter()
        .map(|i| {
            let s = synth_sentence(&synth, 1000 + i)?;
            let seg = segment_video(&s.video, &pipeline::segmentation_config(cfg))?;
            Ok(SentenceData {
                id: s.truth.id,
                roi: seg.roi,
                transcript: s.truth.transcript,
            })
        })
        .collect::<std::result::Result<_, vsr3d_core::Error>>()?;
    let mut cfg = cfg.clone();
    cfg.svm = TrainConfig {
        c_grid: vec![64.0],
        gamma_grid: vec![2f64.powi(-7)],
        ..cfg.svm
    };
    Ok(pipeline::train_units(&data, UnitKind::Phoneme, &cfg)?.0)
}

pub fn bench(a: BenchArgs, cfg: PipelineConfig) -> Result<()> {
    if a.frames.is_empty() || a.frames.contains(&0) {
        return Err(usage("--frames needs positive lengths"));
    }
    let model = match &a.model {
        Some(p) => read_model(p)?,
        None => bench_model(a.seed, &cfg)?,
    };
    let mut table = String::from("frames,segmentation_s,features_s,classification_s,decoding_s,total_s,per_frame_ms\n");
    for &n in &a.frames {
        let mut synth = SynthConfig::with_classes(a.seed, 3);
        synth.sentence_length = n.div_ceil(synth.min_unit_frames);
        let s = synth_sentence(&synth, 0)?;
        let video = VideoSequence::new(s.video.frames()[..n].to_vec(), s.video.fps())?;
        let (t, _) = pipeline::time_stages(&video, &model, &cfg)?;
        let _ = writeln!(
            table,
            "{n},{:.4},{:.4},{:.4},{:.4},{:.4},{:.3}",
            t.segmentation,
            t.features,
            t.classification,
            t.decoding,
            t.total(),
            1000.0 * t.per_frame()
        );
    }
    print!("{table}");
    if let Some(out) = &a.out {
        write(out, &table)?;
    }
    Ok(())
}

pub fn grid_heatmap(a: HeatmapArgs) -> Result<()> {
    let bytes = io::read_bytes(&a.grid)?;
    let grid = ProbabilityGrid::read_from(bytes.as_slice()).map_err(|e| data(format!("{}: {e}", a.grid.display())))?;
    let labels = grid.labels();
    let class = labels
        .iter()
        .position(|l| *l == a.class)
        .ok_or_else(|| usage(format!("class `{}` not in grid (have {})", a.class, labels.join(", "))))?;
    let (w, h, px) = grid.heatmap(class)?;
    write(&a.out, io::encode_pgm(w, h, &px)?)?;
    println!("wrote {w}x{h} heatmap of `{}` to {}", a.class, a.out.display());
    Ok(())
}
