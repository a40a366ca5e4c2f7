//! Scoring of decoded label sequences against references.

pub mod align;
pub mod stats;
pub mod viseme;

use std::fmt::Write as _;

pub use align::{accuracy, align_nw, strip_internal_silence, AlignedPair, AlignmentCounts};
pub use stats::{paired_t_test_one_tailed, regularized_incomplete_beta, student_t_upper_tail, TTest};
pub use viseme::{map_to_visemes, viseme_of};

use crate::error::{Error, Result};

/// Label counts over aligned pairs, with a deletion column and an insertion row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[reference][hypothesis]`.
    pub counts: Vec<Vec<usize>>,
    pub deletions: Vec<usize>,
    pub insertions: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn row_total(&self, label: usize) -> usize {
        self.counts[label].iter().sum::<usize>() + self.deletions[label]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ref\\hyp");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push_str(",DEL\n");
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for v in &self.counts[i] {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", self.deletions[i]);
        }
        out.push_str("INS");
        for v in &self.insertions {
            let _ = write!(out, ",{v}");
        }
        out.push_str(",\n");
        out
    }
}

pub fn confusion_matrix<S: AsRef<str>>(alignments: &[Vec<AlignedPair>], labels: &[S]) -> Result<ConfusionMatrix> {
    let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    let n = labels.len();
    let index = |tok: &str| {
        labels
            .iter()
            .position(|l| l == tok)
            .ok_or_else(|| Error::UnknownLabel(tok.to_string()))
    };
    let mut m = ConfusionMatrix {
        counts: vec![vec![0; n]; n],
        deletions: vec![0; n],
        insertions: vec![0; n],
        labels: labels.clone(),
    };
    for pair in alignments.iter().flatten() {
        match pair {
            (Some(r), Some(h)) => m.counts[index(r)?][index(h)?] += 1,
            (Some(r), None) => m.deletions[index(r)?] += 1,
            (None, Some(h)) => m.insertions[index(h)?] += 1,
            (None, None) => {}
        }
    }
    Ok(m)
}

/// Reference and hypothesis labels as scored: optionally mapped to visemes,
/// reference silences reduced to the sequence boundaries.
pub fn prepare_for_scoring<S: AsRef<str>, H: AsRef<str>>(
    reference: &[S],
    hypothesis: &[H],
    visemes: bool,
) -> Result<(Vec<String>, Vec<String>)> {
    let owned = |s: &[&str]| s.iter().map(|t| t.to_string()).collect::<Vec<_>>();
    let r: Vec<&str> = reference.iter().map(|s| s.as_ref()).collect();
    let h: Vec<&str> = hypothesis.iter().map(|s| s.as_ref()).collect();
    let (r, h) = if visemes {
        (map_visemes_lenient(&r)?, map_visemes_lenient(&h)?)
    } else {
        (owned(&r), owned(&h))
    };
    Ok((strip_internal_silence(&r), h))
}

/// Viseme tokens pass through unchanged so already-mapped sequences can be
/// scored.
fn map_visemes_lenient(seq: &[&str]) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(seq.len());
    for tok in seq {
        if viseme::is_viseme(tok) {
            out.push(tok.to_string());
        } else if let Some(v) = viseme_of(tok)? {
            out.push(v.to_string());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceScore {
    pub id: String,
    pub counts: AlignmentCounts,
    pub accuracy: f64,
    pub alignment: Vec<AlignedPair>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub sequences: Vec<SequenceScore>,
    pub total: AlignmentCounts,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn mean_accuracy(&self) -> f64 {
        if self.sequences.is_empty() {
            return 0.0;
        }
        self.sequences.iter().map(|s| s.accuracy).sum::<f64>() / self.sequences.len() as f64
    }

    /// Every label seen in the alignments, sorted.
    pub fn labels(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .sequences
            .iter()
            .flat_map(|s| s.alignment.iter())
            .flat_map(|(r, h)| r.iter().chain(h.iter()).cloned())
            .collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn confusion(&self) -> Result<ConfusionMatrix> {
        let aligns: Vec<Vec<AlignedPair>> = self.sequences.iter().map(|s| s.alignment.clone()).collect();
        confusion_matrix(&aligns, &self.labels())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,T,C,S,D,I,acc\n");
        let row = |out: &mut String, id: &str, c: &AlignmentCounts, acc: f64| {
            let _ = writeln!(out, "{id},{},{},{},{},{},{acc:.6}", c.t, c.c, c.s, c.d, c.i);
        };
        for s in &self.sequences {
            row(&mut out, &s.id, &s.counts, s.accuracy);
        }
        row(&mut out, "TOTAL", &self.total, self.accuracy);
        let _ = writeln!(out, "MEAN,,,,,,{:.6}", self.mean_accuracy());
        out
    }
}

/// Scores `(id, reference, hypothesis)` triples.
pub fn evaluate<S: AsRef<str>>(items: &[(String, Vec<S>, Vec<S>)], visemes: bool) -> Result<EvalReport> {
    let mut sequences = Vec::with_capacity(items.len());
    let mut total = AlignmentCounts::default();
    for (id, reference, hypothesis) in items {
        let (r, h) = prepare_for_scoring(reference, hypothesis, visemes)?;
        let (counts, alignment) = align_nw(&r, &h);
        let acc = accuracy(&counts).map_err(|_| Error::invalid(format!("reference of `{id}` is empty")))?;
        total = total.add(&counts);
        sequences.push(SequenceScore {
            id: id.clone(),
            counts,
            accuracy: acc,
            alignment,
        });
    }
    let acc = accuracy(&total)?;
    Ok(EvalReport {
        sequences,
        total,
        accuracy: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_alignment_is_diagonal() {
        let (_, pairs) = align_nw(&["A", "B", "A"], &["A", "B", "A"]);
        let m = confusion_matrix(&[pairs], &["A", "B"]).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0], vec![0, 1]]);
        assert_eq!(m.deletions, vec![0, 0]);
        assert_eq!(m.row_total(0), 2);
    }

    #[test]
    fn csv_margins() {
        let (_, pairs) = align_nw(&["A", "B"], &["B", "B", "A"]);
        let m = confusion_matrix(&[pairs], &["A", "B"]).unwrap();
        let csv = m.to_csv();
        assert!(csv.lines().next().unwrap().ends_with(",DEL"));
        assert!(csv.lines().last().unwrap().starts_with("INS,"));
        assert!(confusion_matrix(&[vec![(Some("Q".to_string()), None)]], &["A"]).is_err());
    }

    #[test]
    fn report_of_identical_sequences() {
        let items = vec![("s1".to_string(), vec!["AA", "T"], vec!["AA", "T"])];
        let r = evaluate(&items, false).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.to_csv().contains("TOTAL,2,2,0,0,0,1.000000"));
    }

    #[test]
    fn viseme_scoring_merges_classes() {
        let items = vec![("s".to_string(), vec!["F", "HH", "T"], vec!["V", "D"])];
        assert_eq!(evaluate(&items, true).unwrap().accuracy, 1.0);
        assert_eq!(evaluate(&items, false).unwrap().total.t, 3);
    }
}
