//! Duration HMMs built from class duration bounds.
//!
//! [`build_duration_hmm`] makes one start state per (class, duration) plus a
//! single chain of dummy states shared by every class: a unit of duration
//! `d` enters at its start state and then walks `dummy_{d-1} .. dummy_1`.
//! The start state carries the unit's whole observation, so dummies carry
//! none. [`build_chain_hmm`] is the unshared variant with a private chain per
//! (class, duration) that repeats the observation on every frame; it is kept
//! as a reference for the shared construction.

use super::grid::{validate_specs, ClassSpec};
use super::viterbi::Transitions;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HmmState {
    /// First frame of a unit of `class` lasting `duration` frames.
    Start { class: usize, duration: usize },
    /// `remaining` frames of the current unit are left after this one.
    Dummy { remaining: usize },
    /// Frame `position` of a private `(class, duration)` chain.
    Chain { class: usize, duration: usize, position: usize },
}

#[derive(Clone, Debug)]
pub struct DurationHmm {
    pub classes: Vec<ClassSpec>,
    pub states: Vec<HmmState>,
    pub transitions: Transitions,
    pub log_priors: Vec<f64>,
}

impl DurationHmm {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn start_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, HmmState::Start { .. } | HmmState::Chain { position: 0, .. }))
            .map(|(i, _)| i)
    }
}

/// Start states class-major with durations ascending, then
/// `dummy_1 .. dummy_{Dmax-1}`.
pub fn build_duration_hmm(classes: &[ClassSpec]) -> Result<DurationHmm> {
    validate_specs(classes)?;
    let dmax = classes.iter().map(|c| c.dmax).max().unwrap();
    let mut states = Vec::new();
    for (class, spec) in classes.iter().enumerate() {
        for duration in spec.dmin..=spec.dmax {
            states.push(HmmState::Start { class, duration });
        }
    }
    let starts = states.len();
    for remaining in 1..dmax {
        states.push(HmmState::Dummy { remaining });
    }
    let dummy = |remaining: usize| starts + remaining - 1;

    let mut transitions = Transitions::new(states.len());
    for (i, s) in states.iter().enumerate() {
        let unit_ends = match *s {
            HmmState::Start { duration, .. } if duration > 1 => {
                transitions.add_log(i, dummy(duration - 1), 0.0);
                false
            }
            HmmState::Dummy { remaining } if remaining > 1 => {
                transitions.add_log(i, dummy(remaining - 1), 0.0);
                false
            }
            _ => true,
        };
        if unit_ends {
            for to in 0..starts {
                transitions.add_log(i, to, 0.0);
            }
        }
    }
    let log_priors = (0..states.len())
        .map(|i| if i < starts { 0.0 } else { f64::NEG_INFINITY })
        .collect();
    Ok(DurationHmm {
        classes: classes.to_vec(),
        states,
        transitions,
        log_priors,
    })
}

/// One private chain of `d` states per (class, duration), ordered
/// class-major, durations ascending, positions ascending.
pub fn build_chain_hmm(classes: &[ClassSpec]) -> Result<DurationHmm> {
    validate_specs(classes)?;
    let mut states = Vec::new();
    for (class, spec) in classes.iter().enumerate() {
        for duration in spec.dmin..=spec.dmax {
            for position in 0..duration {
                states.push(HmmState::Chain {
                    class,
                    duration,
                    position,
                });
            }
        }
    }
    let heads: Vec<usize> = states
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, HmmState::Chain { position: 0, .. }))
        .map(|(i, _)| i)
        .collect();
    let mut transitions = Transitions::new(states.len());
    for (i, s) in states.iter().enumerate() {
        if let HmmState::Chain { duration, position, .. } = *s {
            if position + 1 < duration {
                transitions.add_log(i, i + 1, 0.0);
            } else {
                for &h in &heads {
                    transitions.add_log(i, h, 0.0);
                }
            }
        }
    }
    let log_priors = states
        .iter()
        .map(|s| match s {
            HmmState::Chain { position: 0, .. } => 0.0,
            _ => f64::NEG_INFINITY,
        })
        .collect();
    Ok(DurationHmm {
        classes: classes.to_vec(),
        states,
        transitions,
        log_priors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_classes_up_to_twenty() {
        let specs: Vec<ClassSpec> = ["a", "b", "c"].iter().map(|l| ClassSpec::new(*l, 1, 20)).collect();
        let hmm = build_duration_hmm(&specs).unwrap();
        assert_eq!(hmm.state_count(), 79);
        for (i, s) in hmm.states.iter().enumerate() {
            match *s {
                HmmState::Start { duration, .. } if duration > 1 => assert_eq!(hmm.transitions.out_degree(i), 1),
                HmmState::Start { .. } => assert_eq!(hmm.transitions.out_degree(i), 60),
                HmmState::Dummy { remaining: 1 } => assert_eq!(hmm.transitions.out_degree(i), 60),
                HmmState::Dummy { .. } => assert_eq!(hmm.transitions.out_degree(i), 1),
                HmmState::Chain { .. } => unreachable!(),
            }
        }
    }

    #[test]
    fn single_unit_state_loops() {
        let hmm = build_duration_hmm(&[ClassSpec::new("a", 1, 1)]).unwrap();
        assert_eq!(hmm.state_count(), 1);
        assert_eq!(hmm.transitions.log_weight(0, 0), 0.0);
    }

    #[test]
    fn bounds_limit_start_states() {
        let hmm = build_duration_hmm(&[ClassSpec::new("a", 2, 4), ClassSpec::new("b", 1, 2)]).unwrap();
        // 3 + 2 start states, dummies 1..3
        assert_eq!(hmm.state_count(), 8);
        assert!(build_duration_hmm(&[]).is_err());
        assert!(build_duration_hmm(&[ClassSpec::new("a", 3, 2)]).is_err());
    }

    #[test]
    fn chain_sizes() {
        let hmm = build_chain_hmm(&[ClassSpec::new("a", 1, 3)]).unwrap();
        assert_eq!(hmm.state_count(), 6);
        assert_eq!(hmm.start_states().count(), 3);
    }
}
