//! Timed label sequences (`LABEL START_MS END_MS` per line).

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub label: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new(entries: Vec<TranscriptEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.start_ms >= e.end_ms {
                return Err(Error::invalid(format!(
                    "entry {i} ({}) has start {} >= end {}",
                    e.label, e.start_ms, e.end_ms
                )));
            }
            if e.label.is_empty() || e.label.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("entry {i} has an invalid label `{}`", e.label)));
            }
            if i > 0 && entries[i - 1].end_ms > e.start_ms {
                return Err(Error::invalid(format!("entry {i} ({}) overlaps its predecessor", e.label)));
            }
        }
        Ok(Transcript { entries })
    }

    /// Builds a transcript from frame-aligned `(label, start, duration)`
    /// triples.
    pub fn from_frames<S: AsRef<str>>(items: &[(S, usize, usize)], fps: f64) -> Result<Self> {
        let to_ms = |f: usize| (f as f64 * 1000.0 / fps).round() as u64;
        Transcript::new(
            items
                .iter()
                .map(|(l, s, d)| TranscriptEntry {
                    label: l.as_ref().to_string(),
                    start_ms: to_ms(*s),
                    end_ms: to_ms(s + d),
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |detail: &str| Error::format("transcript", format!("line {}: {detail}", n + 1));
            if fields.len() != 3 {
                return Err(bad("expected `LABEL START_MS END_MS`"));
            }
            let start_ms = fields[1].parse().map_err(|_| bad("start is not an integer"))?;
            let end_ms = fields[2].parse().map_err(|_| bad("end is not an integer"))?;
            entries.push(TranscriptEntry {
                label: fields[0].to_string(),
                start_ms,
                end_ms,
            });
        }
        Transcript::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {}", e.label, e.start_ms, e.end_ms);
        }
        out
    }
}

/// Frame interval `[start, start + duration)` covered by a millisecond span:
/// start rounds down, end rounds up, at least one frame.
pub fn frame_span(start_ms: u64, end_ms: u64, fps: f64) -> (usize, usize) {
    // A small tolerance keeps exact multiples from drifting across a frame.
    let start = (start_ms as f64 * fps / 1000.0 + 1e-9).floor() as usize;
    let end = (end_ms as f64 * fps / 1000.0 - 1e-9).ceil().max(0.0) as usize;
    (start, end.saturating_sub(start).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        let t = Transcript::parse("sil 0 120\nAE 120 200\n\nT 200 360\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.to_text(), "sil 0 120\nAE 120 200\nT 200 360\n");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Transcript::parse("AE 10").is_err());
        assert!(Transcript::parse("AE x 20").is_err());
        assert!(Transcript::parse("AE 20 10").is_err());
        assert!(Transcript::parse("AE 0 20\nT 10 30").is_err());
    }

    #[test]
    fn frame_span_rounding() {
        assert_eq!(frame_span(200, 360, 25.0), (5, 4));
        assert_eq!(frame_span(0, 40, 25.0), (0, 1));
        assert_eq!(frame_span(10, 20, 25.0), (0, 1));
        assert_eq!(frame_span(30, 90, 25.0), (0, 3));
    }

    #[test]
    fn frames_round_trip() {
        let t = Transcript::from_frames(&[("A", 0, 3), ("B", 3, 5)], 25.0).unwrap();
        let spans: Vec<_> = t.entries().iter().map(|e| frame_span(e.start_ms, e.end_ms, 25.0)).collect();
        assert_eq!(spans, vec![(0, 3), (3, 5)]);
    }
}
