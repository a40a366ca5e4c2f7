//! Minimum-edit global alignment of a hypothesis to a reference.

use crate::error::{Error, Result};

use super::viseme::SILENCE;

/// One column of an alignment. `(Some, Some)` is a match or substitution,
/// `(Some, None)` a deletion, `(None, Some)` an insertion.
pub type AlignedPair = (Option<String>, Option<String>);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AlignmentCounts {
    /// Reference length.
    pub t: usize,
    pub c: usize,
    pub s: usize,
    pub d: usize,
    pub i: usize,
}

impl AlignmentCounts {
    pub fn errors(&self) -> usize {
        self.s + self.d + self.i
    }

    pub fn add(&self, o: &AlignmentCounts) -> AlignmentCounts {
        AlignmentCounts {
            t: self.t + o.t,
            c: self.c + o.c,
            s: self.s + o.s,
            d: self.d + o.d,
            i: self.i + o.i,
        }
    }
}

/// `(C - I) / T`; negative when insertions outnumber correct labels.
pub fn accuracy(counts: &AlignmentCounts) -> Result<f64> {
    if counts.t == 0 {
        return Err(Error::invalid("accuracy is undefined for an empty reference"));
    }
    Ok((counts.c as f64 - counts.i as f64) / counts.t as f64)
}

/// Drops every silence token except one leading and one trailing silence.
pub fn strip_internal_silence<S: AsRef<str>>(seq: &[S]) -> Vec<String> {
    let toks: Vec<&str> = seq.iter().map(|s| s.as_ref()).collect();
    let lead = toks.first() == Some(&SILENCE);
    let trail = toks.len() > 1 && toks.last() == Some(&SILENCE) && toks.iter().any(|t| *t != SILENCE);
    let mut out: Vec<String> = Vec::with_capacity(toks.len());
    if lead {
        out.push(SILENCE.to_string());
    }
    out.extend(toks.iter().filter(|t| **t != SILENCE).map(|t| t.to_string()));
    if trail {
        out.push(SILENCE.to_string());
    }
    out
}

/// Needleman-Wunsch with unit substitution, deletion and insertion costs.
/// Backtracking prefers the diagonal, then deletion, then insertion.
pub fn align_nw<S: AsRef<str>, H: AsRef<str>>(reference: &[S], hypothesis: &[H]) -> (AlignmentCounts, Vec<AlignedPair>) {
    let n = reference.len();
    let m = hypothesis.len();
    let r = |i: usize| reference[i].as_ref();
    let h = |j: usize| hypothesis[j].as_ref();
    let w = m + 1;
    let mut cost = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        cost[i * w] = i;
    }
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = cost[(i - 1) * w + j - 1] + usize::from(r(i - 1) != h(j - 1));
            let del = cost[(i - 1) * w + j] + 1;
            let ins = cost[i * w + j - 1] + 1;
            cost[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut pairs = Vec::with_capacity(n.max(m));
    let mut counts = AlignmentCounts {
        t: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 && here == cost[(i - 1) * w + j - 1] + usize::from(r(i - 1) != h(j - 1)) {
            if r(i - 1) == h(j - 1) {
                counts.c += 1;
            } else {
                counts.s += 1;
            }
            pairs.push((Some(r(i - 1).to_string()), Some(h(j - 1).to_string())));
            i -= 1;
            j -= 1;
        } else if i > 0 && here == cost[(i - 1) * w + j] + 1 {
            counts.d += 1;
            pairs.push((Some(r(i - 1).to_string()), None));
            i -= 1;
        } else {
            counts.i += 1;
            pairs.push((None, Some(h(j - 1).to_string())));
            j -= 1;
        }
    }
    pairs.reverse();
    (counts, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sequences() {
        let (c, pairs) = align_nw(&["A", "B", "C"], &["A", "B", "C"]);
        assert_eq!((c.t, c.c, c.s, c.d, c.i), (3, 3, 0, 0, 0));
        assert_eq!(pairs.len(), 3);
    }

    #[test]
    fn empty_hypothesis_deletes_all() {
        let (c, _) = align_nw(&["A", "B"], &[] as &[&str]);
        assert_eq!((c.t, c.c, c.s, c.d, c.i), (2, 0, 0, 2, 0));
        let (c, _) = align_nw(&[] as &[&str], &["X"]);
        assert_eq!((c.t, c.i), (0, 1));
    }

    #[test]
    fn one_deletion() {
        let (c, pairs) = align_nw(&["A", "B", "C"], &["A", "C"]);
        assert_eq!((c.c, c.s, c.d, c.i), (2, 0, 1, 0));
        assert_eq!(pairs[1], (Some("B".to_string()), None));
    }

    #[test]
    fn reported_totals() {
        let phon = AlignmentCounts {
            t: 2728,
            c: 587,
            i: 39,
            ..Default::default()
        };
        assert!((accuracy(&phon).unwrap() - 0.201).abs() < 5e-4);
        let vis = AlignmentCounts {
            t: 2518,
            c: 1029,
            i: 37,
            ..Default::default()
        };
        assert!((accuracy(&vis).unwrap() - 0.394).abs() < 5e-4);
        assert!(accuracy(&AlignmentCounts::default()).is_err());
    }

    #[test]
    fn silence_stripping() {
        assert_eq!(strip_internal_silence(&["sil", "AE", "sil", "T", "sil"]), vec!["sil", "AE", "T", "sil"]);
        assert_eq!(strip_internal_silence(&["AE", "T"]), vec!["AE", "T"]);
        assert_eq!(strip_internal_silence(&["sil", "sil", "AE"]), vec!["sil", "AE"]);
        assert_eq!(strip_internal_silence(&["sil"]), vec!["sil"]);
        assert_eq!(strip_internal_silence(&["sil", "sil"]), vec!["sil"]);
    }
}
