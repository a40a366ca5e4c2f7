//! Continuous decoding of a probability grid into a label sequence.

pub mod grid;
pub mod hmm;
pub mod viterbi;

pub use grid::{build_probability_grid, build_probability_grid_with, model_class_specs, ClassSpec, ProbabilityGrid};
pub use hmm::{build_chain_hmm, build_duration_hmm, DurationHmm, HmmState};
pub use viterbi::{path_log_score, viterbi_generic, viterbi_log, Transitions, ViterbiPath};

use crate::error::{Error, Result};
use crate::features::{Transcript, PAIR_SEPARATOR};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedEntry {
    pub label: String,
    pub start: usize,
    pub duration: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedSequence {
    pub entries: Vec<DecodedEntry>,
    /// Sum over entries of `d * ln p`.
    pub log_score: f64,
}

impl DecodedSequence {
    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }

    pub fn frames(&self) -> usize {
        self.entries.last().map_or(0, |e| e.start + e.duration)
    }

    pub fn to_transcript(&self, fps: f64) -> Result<Transcript> {
        let items: Vec<(&str, usize, usize)> = self
            .entries
            .iter()
            .filter(|e| e.duration > 0)
            .map(|e| (e.label.as_str(), e.start, e.duration))
            .collect();
        Transcript::from_frames(&items, fps)
    }
}

/// Log observation of a state at step `t`: a start state scores its whole
/// unit as `d * ln p`, dummies score nothing.
fn folded_log_obs(grid: &ProbabilityGrid, hmm: &DurationHmm, t: usize, s: usize) -> f64 {
    match hmm.states[s] {
        HmmState::Start { class, duration } => match grid.get(class, t, duration) {
            Some(p) => duration as f64 * p.ln(),
            None => f64::NEG_INFINITY,
        },
        HmmState::Dummy { .. } => 0.0,
        HmmState::Chain {
            class,
            duration,
            position,
        } => match t.checked_sub(position).and_then(|start| grid.get(class, start, duration)) {
            Some(p) => p.ln(),
            None => f64::NEG_INFINITY,
        },
    }
}

fn check_grid(grid: &ProbabilityGrid) -> Result<()> {
    if grid.frames() == 0 {
        return Err(Error::invalid("grid has no frames"));
    }
    Ok(())
}

fn squeeze(grid: &ProbabilityGrid, hmm: &DurationHmm, path: &ViterbiPath) -> DecodedSequence {
    let mut entries = Vec::new();
    for (t, &s) in path.states.iter().enumerate() {
        let head = match hmm.states[s] {
            HmmState::Start { class, duration } => Some((class, duration)),
            HmmState::Chain {
                class,
                duration,
                position: 0,
            } => Some((class, duration)),
            _ => None,
        };
        if let Some((class, duration)) = head {
            entries.push(DecodedEntry {
                label: grid.classes()[class].label.clone(),
                start: t,
                duration,
            });
        }
    }
    DecodedSequence {
        entries,
        log_score: path.log_score,
    }
}

fn run(grid: &ProbabilityGrid, hmm: &DurationHmm) -> Result<DecodedSequence> {
    check_grid(grid)?;
    let path = viterbi_log(&hmm.log_priors, &hmm.transitions, grid.frames(), |t, s| {
        folded_log_obs(grid, hmm, t, s)
    })
    .map_err(|_| {
        Error::Infeasible(format!(
            "{} frames cannot be tiled with the allowed unit durations",
            grid.frames()
        ))
    })?;
    let seq = squeeze(grid, hmm, &path);
    debug_assert_eq!(seq.frames(), grid.frames());
    Ok(seq)
}

/// Most likely tiling of the frames into units, using the shared-dummy
/// duration HMM.
pub fn decode_sequence(grid: &ProbabilityGrid) -> Result<DecodedSequence> {
    run(grid, &build_duration_hmm(grid.classes())?)
}

/// Same optimum computed with private per-(class, duration) chains.
pub fn decode_with_chain_hmm(grid: &ProbabilityGrid) -> Result<DecodedSequence> {
    run(grid, &build_chain_hmm(grid.classes())?)
}

/// Splits `A+B` entries at the midpoint (first half rounded up).
pub fn expand_biphones(seq: &DecodedSequence) -> Result<DecodedSequence> {
    let mut entries = Vec::with_capacity(seq.entries.len() * 2);
    for e in &seq.entries {
        if !e.label.contains(PAIR_SEPARATOR) {
            entries.push(e.clone());
            continue;
        }
        let parts: Vec<&str> = e.label.split(PAIR_SEPARATOR).collect();
        if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
            return Err(Error::invalid(format!("malformed composite label `{}`", e.label)));
        }
        let first = e.duration.div_ceil(2);
        entries.push(DecodedEntry {
            label: parts[0].to_string(),
            start: e.start,
            duration: first,
        });
        entries.push(DecodedEntry {
            label: parts[1].to_string(),
            start: e.start + first,
            duration: e.duration - first,
        });
    }
    Ok(DecodedSequence {
        entries,
        log_score: seq.log_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_feasible_tiling() {
        let g = ProbabilityGrid::from_fn(vec![ClassSpec::new("c", 5, 5)], 10, |_, _, _| 0.3).unwrap();
        let seq = decode_sequence(&g).unwrap();
        assert_eq!(
            seq.entries,
            vec![
                DecodedEntry {
                    label: "c".into(),
                    start: 0,
                    duration: 5
                },
                DecodedEntry {
                    label: "c".into(),
                    start: 5,
                    duration: 5
                },
            ]
        );
    }

    #[test]
    fn infeasible_grid_errors() {
        let g = ProbabilityGrid::from_fn(vec![ClassSpec::new("c", 4, 4)], 6, |_, _, _| 0.3).unwrap();
        assert!(matches!(decode_sequence(&g), Err(Error::Infeasible(_))));
        let g = ProbabilityGrid::from_fn(vec![ClassSpec::new("c", 4, 6)], 3, |_, _, _| 0.3).unwrap();
        assert!(decode_sequence(&g).is_err());
    }

    #[test]
    fn fixed_durations_pick_block_argmax() {
        // two classes with duration 3 only: every block is decided on its own
        let g = ProbabilityGrid::from_fn(vec![ClassSpec::new("a", 3, 3), ClassSpec::new("b", 3, 3)], 9, |c, t, _| {
            match (c, t) {
                (0, 0) | (1, 3) | (0, 6) => 0.9,
                _ => 0.2,
            }
        })
        .unwrap();
        assert_eq!(decode_sequence(&g).unwrap().labels(), vec!["a", "b", "a"]);
    }

    #[test]
    fn biphone_split() {
        let seq = DecodedSequence {
            entries: vec![
                DecodedEntry {
                    label: "AE+T".into(),
                    start: 0,
                    duration: 5,
                },
                DecodedEntry {
                    label: "K".into(),
                    start: 5,
                    duration: 2,
                },
            ],
            log_score: 0.0,
        };
        let out = expand_biphones(&seq).unwrap();
        let triples: Vec<(&str, usize, usize)> = out.entries.iter().map(|e| (e.label.as_str(), e.start, e.duration)).collect();
        assert_eq!(triples, vec![("AE", 0, 3), ("T", 3, 2), ("K", 5, 2)]);
        let bad = DecodedSequence {
            entries: vec![DecodedEntry {
                label: "A+B+C".into(),
                start: 0,
                duration: 2,
            }],
            log_score: 0.0,
        };
        assert!(expand_biphones(&bad).is_err());
    }
}
