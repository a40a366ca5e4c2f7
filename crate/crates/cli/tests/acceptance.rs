//! Acceptance table: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the table is always printed. The
//! process fails if any criterion outside `KNOWN_FAILURES` fails.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use oracles::*;
use vsr3d_core::config::PipelineConfig;
use vsr3d_core::decoder::*;
use vsr3d_core::eval::*;
use vsr3d_core::features::*;
use vsr3d_core::fixtures::{synth_sentence, SynthConfig, SynthGroundTruth};
use vsr3d_core::pipeline::{self, SentenceData};
use vsr3d_core::rng::SplitMix64;
use vsr3d_core::segmentation::{segment_video, Segmentation};
use vsr3d_core::svm::smo::solve_smo;
use vsr3d_core::svm::*;

/// Criteria whose published target this implementation does not reach.
/// The one-tailed p for t = 2.302 at 79 degrees of freedom is 0.01199;
/// the quoted 0.0112 matches roughly 200 degrees of freedom.
const KNOWN_FAILURES: [u32; 1] = [8];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn dct_exactness() -> Outcome {
    let clock = Instant::now();
    let mut rng = SplitMix64::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d: Vec<usize> = (0..3).map(|_| rng.range_inclusive(1, 8) as usize).collect();
        let v = random_volume(&mut rng, d[0], d[1], d[2]);
        worst = worst.max(dct3(&v).max_abs_diff(&naive_dct3(&v)));
    }
    let v = random_volume(&mut rng, 16, 16, 16);
    let round = idct3(&dct3(&v)).max_abs_diff(&v);
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        1,
        "3D DCT vs triple sum",
        worst < 1e-9 && round < 1e-9 && secs < 10.0,
        format!("max err {worst:.2e}, 16^3 round trip {round:.2e}, {secs:.2}s"),
    )
}

fn mask_counts() -> Outcome {
    let counts: Vec<usize> = (1..=5).map(pyramid_count).collect();
    let c = dct3(&ScalarVolume::from_fn(8, 8, 10, |x, y, t| ((x * 31 + y * 17 + t * 7) % 13) as f64));
    let v3 = pyramid_extract(&c, 3).unwrap().len() + 1;
    outcome(
        2,
        "pyramid mask counts",
        counts == [1, 4, 10, 20, 35] && v3 == 11 && FeatureConfig::default().dimension() == 11,
        format!("counts {counts:?}, s=3 vector {v3}"),
    )
}

fn random_weights(rng: &mut SplitMix64, n: usize, sparsity: f64) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.next_f64() < sparsity { 0.0 } else { rng.next_f64() })
        .collect()
}

fn viterbi_brute_force() -> Outcome {
    let mut rng = SplitMix64::new(303);
    let mut bad = 0;
    for _ in 0..200 {
        let n = rng.range_inclusive(1, 5) as usize;
        let steps = rng.range_inclusive(1, 6) as usize;
        let priors = random_weights(&mut rng, n, 0.2);
        let trans: Vec<Vec<f64>> = (0..n).map(|_| random_weights(&mut rng, n, 0.3)).collect();
        let obs: Vec<Vec<f64>> = (0..steps).map(|_| random_weights(&mut rng, n, 0.1)).collect();
        let want = brute_force_viterbi(&priors, &trans, &obs);
        let ok = match viterbi_generic(&priors, &Transitions::dense(n, |i, j| trans[i][j]), &obs) {
            Ok(p) => (p.log_score - want).abs() < 1e-9,
            Err(_) => want == f64::NEG_INFINITY,
        };
        bad += usize::from(!ok);
    }
    outcome(3, "Viterbi vs enumeration", bad == 0, format!("{bad}/200 mismatches"))
}

fn decoder_brute_force() -> Outcome {
    let mut rng = SplitMix64::new(404);
    let (mut bad, mut worst_gap) = (0, 0f64);
    for _ in 0..100 {
        let classes = rng.range_inclusive(1, 3) as usize;
        let frames = rng.range_inclusive(1, 8) as usize;
        let specs: Vec<ClassSpec> = (0..classes)
            .map(|c| {
                let lo = rng.range_inclusive(1, 3) as usize;
                let hi = rng.range_inclusive(lo as u64, 3) as usize;
                ClassSpec::new(format!("c{c}"), lo, hi)
            })
            .collect();
        let mut vals = SplitMix64::new(rng.next_u64());
        let grid = ProbabilityGrid::from_fn(specs, frames, |_, _, _| 0.01 + 0.98 * vals.next_f64()).unwrap();
        let want = brute_force_segmentation(&grid);
        match (decode_sequence(&grid), decode_with_chain_hmm(&grid)) {
            (Ok(d), Ok(c)) => {
                bad += usize::from((d.log_score - want).abs() >= 1e-9);
                worst_gap = worst_gap.max((d.log_score - c.log_score).abs());
            }
            (Err(_), Err(_)) => bad += usize::from(want != f64::NEG_INFINITY),
            _ => bad += 1,
        }
    }
    outcome(
        4,
        "duration decoder vs enumeration",
        bad == 0 && worst_gap < 1e-9,
        format!("{bad}/100 mismatches, chain vs dummy gap {worst_gap:.1e}"),
    )
}

fn gaussian_set(rng: &mut SplitMix64, n: usize, dim: usize, shift: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let x = y
        .iter()
        .map(|l| (0..dim).map(|_| rng.next_gaussian() + l * shift).collect())
        .collect();
    (x, y)
}

fn smo_checks() -> Outcome {
    let mut rng = SplitMix64::new(505);
    let (mut kkt, mut balance): (f64, f64) = (0.0, 0.0);
    for case in 0..20 {
        let n = rng.range_inclusive(8, 40) as usize;
        let (x, y) = gaussian_set(&mut rng, n, 3, 0.6);
        let c = [0.5, 1.0, 10.0, 100.0][case % 4];
        let gram = Gram::rbf(&x, [0.1, 0.5, 1.0][case % 3]);
        let sol = solve_smo(&gram, &y, c, 1e-4, 10_000, false).unwrap();
        kkt = kkt.max(kkt_violation(|i, j| gram.get(i, j), &y, &sol.alpha, sol.bias, c));
        balance = balance.max(sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum::<f64>().abs());
    }
    let mut separable = true;
    for _ in 0..5 {
        let (x, y) = gaussian_set(&mut rng, 30, 2, 3.0);
        let keep: Vec<usize> = (0..x.len()).filter(|&i| y[i] * (x[i][0] + x[i][1]) > 0.5).collect();
        let xs: Vec<Vec<f64>> = keep.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
        let m = train_binary_smo(&xs, &ys, 1e6, 0.5, &TrainConfig::default()).unwrap();
        separable &= xs.iter().zip(&ys).all(|(xi, yi)| m.decision_value(xi).unwrap() * yi > 0.0);
    }
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let y = vec![1.0, 1.0, -1.0, -1.0];
    let m = train_binary_smo(&x, &y, 10.0, 1.0, &TrainConfig::default()).unwrap();
    let xor = x.iter().zip(&y).all(|(xi, yi)| m.decision_value(xi).unwrap() * yi > 0.0);
    outcome(
        5,
        "SMO optimality",
        kkt < 1e-3 && balance < 1e-6 && separable && xor,
        format!("KKT {kkt:.1e}, |sum alpha y| {balance:.1e}, separable {separable}, XOR {xor}"),
    )
}

fn platt_checks() -> Outcome {
    let mut rng = SplitMix64::new(606);
    let (mut minimum, mut monotone) = (true, true);
    for _ in 0..10 {
        let labels: Vec<f64> = (0..60).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let scores: Vec<f64> = labels.iter().map(|l| 0.8 * l + rng.next_gaussian()).collect();
        let (a, b) = fit_platt(&scores, &labels).unwrap();
        let best = platt_nll(&scores, &labels, a, b).unwrap();
        for da in [-0.1, 0.0, 0.1] {
            for db in [-0.1, 0.0, 0.1] {
                minimum &= platt_nll(&scores, &labels, a + da, b + db).unwrap() >= best - 1e-12;
            }
        }
        let p: Vec<f64> = (-50..=50).map(|k| sigmoid_probability(k as f64 * 0.2, a, b)).collect();
        monotone &= p.windows(2).all(|w| w[1] >= w[0]);
    }
    outcome(
        6,
        "Platt scaling",
        minimum && monotone,
        format!("local minimum {minimum}, monotone {monotone}"),
    )
}

fn accuracy_arithmetic() -> Outcome {
    let counts = |t, c, i| AlignmentCounts { t, c, i, ..Default::default() };
    let a = accuracy(&counts(2728, 587, 39)).unwrap();
    let b = accuracy(&counts(2518, 1029, 37)).unwrap();
    outcome(
        7,
        "accuracy arithmetic",
        (a - 0.201).abs() <= 5e-4 && (b - 0.394).abs() <= 5e-4,
        format!("{a:.4}, {b:.4}"),
    )
}

fn t_test_tails() -> Outcome {
    let p1 = student_t_upper_tail(2.5, 79.0);
    let p2 = student_t_upper_tail(2.302, 79.0);
    let ok1 = (p1 - 0.0072).abs() <= 2e-4;
    let ok2 = (p2 - 0.0112).abs() <= 2e-4;
    outcome(
        8,
        "Student t tails at df=79",
        ok1 && ok2,
        format!(
            "t=2.5 p={p1:.5} ({}), t=2.302 p={p2:.5} vs 0.0112 ({})",
            if ok1 { "ok" } else { "off" },
            if ok2 { "ok" } else { "off" }
        ),
    )
}

/// Synthesises and segments sentences one at a time so only the ROI
/// volumes stay in memory. Returns the segmentation time too.
fn segment_synthetic(cfg: &SynthConfig, pc: &PipelineConfig, range: std::ops::Range<usize>) -> (Vec<(SynthGroundTruth, Segmentation)>, f64) {
    let seg_cfg = pipeline::segmentation_config(pc);
    let mut out = Vec::new();
    let mut secs = 0.0;
    for i in range {
        let s = synth_sentence(cfg, i).unwrap();
        let clock = Instant::now();
        let seg = segment_video(&s.video, &seg_cfg).unwrap();
        secs += clock.elapsed().as_secs_f64();
        out.push((s.truth, seg));
    }
    (out, secs)
}

fn segmentation_recovery(corpus: &[(SynthGroundTruth, Segmentation)], secs: f64) -> Outcome {
    let (mut frames, mut sym, mut corners) = (0usize, 0usize, 0usize);
    for (truth, seg) in corpus {
        for f in 0..truth.frames() {
            let (line, g) = (&seg.lines[f], &truth.lines[f]);
            let (kp, k) = (&seg.keypoints[f], &truth.keypoints[f]);
            frames += 1;
            sym += usize::from((line.column - g.column).abs() <= 2.0 && (line.angle - g.angle).abs() <= 1.0);
            let near = |p: &vsr3d_core::segmentation::Point, q: &vsr3d_core::segmentation::Point| {
                (p.row - q.row).abs() <= 3.0 && (p.col - q.col).abs() <= 3.0
            };
            corners += usize::from(near(&kp.left_corner, &k.left) && near(&kp.right_corner, &k.right));
        }
    }
    let fs = sym as f64 / frames as f64;
    let fc = corners as f64 / frames as f64;
    outcome(
        9,
        "segmentation on synthetic faces",
        fs >= 0.95 && fc >= 0.90 && secs < 300.0,
        format!(
            "{} sentences, {frames} frames: symmetry {fs:.3}, corners {fc:.3}, {secs:.1}s",
            corpus.len()
        ),
    )
}

fn end_to_end(corpus: Vec<(SynthGroundTruth, Segmentation)>, pc: &PipelineConfig, earlier_secs: f64) -> Outcome {
    let clock = Instant::now();
    let data: Vec<SentenceData> = corpus
        .into_iter()
        .map(|(t, s)| SentenceData {
            id: t.id,
            roi: s.roi,
            transcript: t.transcript,
        })
        .collect();
    let (train, test) = data.split_at(40);
    let (units, _) = pipeline::train_units(train, UnitKind::Phoneme, pc).unwrap();
    let (pairs, _) = pipeline::train_units(train, UnitKind::Biphone, pc).unwrap();
    let score = |p: Option<&MultiClassModel>| {
        let items: Vec<(String, Vec<String>, Vec<String>)> = test
            .iter()
            .map(|s| {
                let hyp = pipeline::decode_roi(&units, p, &s.roi).unwrap();
                (s.id.clone(), s.transcript.labels(), hyp.labels())
            })
            .collect();
        evaluate(&items, false).unwrap().mean_accuracy()
    };
    let phon = score(None);
    let bi = score(Some(&pairs));
    let secs = earlier_secs + clock.elapsed().as_secs_f64();
    outcome(
        10,
        "end to end on 3 synthetic classes",
        phon >= 0.70 && bi >= phon - 0.02 && secs < 900.0,
        format!("mean accuracy {phon:.4}, with biphones {bi:.4}, {secs:.1}s"),
    )
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vsr3d"))
}

fn run(cmd: &mut Command) {
    let out = cmd.output().expect("spawn vsr3d");
    assert!(
        out.status.success(),
        "{cmd:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn linear_runtime(dir: &Path) -> Outcome {
    let table = dir.join("bench.csv");
    run(cli().args(["bench", "--frames", "50,100,200", "--out"]).arg(&table));
    let text = std::fs::read_to_string(&table).unwrap();
    let per: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let hi = per.iter().cloned().fold(f64::MIN, f64::max);
    let lo = per.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        11,
        "linear runtime",
        per.len() == 3 && hi / lo < 2.0,
        format!("ms/frame {per:?}, ratio {:.2}", hi / lo),
    )
}

fn chain(dir: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let p = |s: &str| dir.join(s);
    let t = ["--threads", threads];
    run(cli().args(t).args(["synth", "--seed", "11", "--sentences", "4", "--units", "4", "--out"]).arg(p("raw")));
    run(cli().args(t).arg("segment").arg("--input").arg(p("raw")).arg("--out").arg(p("seg")));
    run(cli()
        .args(t)
        .arg("train")
        .arg("--input")
        .arg(p("seg"))
        .arg("--out")
        .arg(p("model.json"))
        .arg("--report")
        .arg(p("grid.csv")));
    run(cli()
        .args(t)
        .arg("decode")
        .arg("--model")
        .arg(p("model.json"))
        .arg("--input")
        .arg(p("seg"))
        .arg("--out")
        .arg(p("hyp")));
    run(cli()
        .args(t)
        .arg("eval")
        .arg("--ref")
        .arg(p("seg"))
        .arg("--hyp")
        .arg(p("hyp"))
        .arg("--out")
        .arg(p("report.csv")));
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files);
    files.sort();
    files
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).unwrap().display().to_string();
            out.push((rel, std::fs::read(&path).unwrap()));
        }
    }
}

fn determinism(dir: &Path) -> Outcome {
    let one = chain(&dir.join("t1"), "1");
    let four = chain(&dir.join("t4"), "4");
    let differing: Vec<&str> = one
        .iter()
        .zip(&four)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    outcome(
        12,
        "determinism across thread counts",
        one.len() == four.len() && differing.is_empty(),
        format!("{} files compared, {} differ {:?}", one.len(), differing.len(), differing),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let mut results = vec![
        dct_exactness(),
        mask_counts(),
        viterbi_brute_force(),
        decoder_brute_force(),
        smo_checks(),
        platt_checks(),
        accuracy_arithmetic(),
        t_test_tails(),
    ];

    let synth = SynthConfig::with_classes(7, 3);
    let pc = PipelineConfig {
        derive_durations: true,
        ..PipelineConfig::default()
    };
    let clock = Instant::now();
    let (mut corpus, seg_secs) = segment_synthetic(&synth, &pc, 0..30);
    results.push(segmentation_recovery(&corpus, seg_secs));
    let (rest, _) = segment_synthetic(&synth, &pc, 30..50);
    corpus.extend(rest);
    results.push(end_to_end(corpus, &pc, clock.elapsed().as_secs_f64()));

    results.push(linear_runtime(scratch.path()));
    results.push(determinism(scratch.path()));

    let mut unexpected = 0;
    for r in &results {
        let known = KNOWN_FAILURES.contains(&r.id);
        let tag = match (r.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag:<12} {:>2} {:<36} {}", r.id, r.name, r.detail);
        unexpected += usize::from(!r.pass && !known);
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
