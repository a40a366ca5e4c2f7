//! Log-space Viterbi over sparse transition graphs.

use crate::error::{Error, Result};

/// Sparse transition graph stored as incoming-edge lists, sorted by source
/// state so that ties resolve toward the smallest predecessor index.
#[derive(Clone, Debug)]
pub struct Transitions {
    incoming: Vec<Vec<(usize, f64)>>,
}

impl Transitions {
    pub fn new(states: usize) -> Self {
        Transitions {
            incoming: vec![Vec::new(); states],
        }
    }

    /// Fully connected graph with weights `weight(from, to)`; zero weights are
    /// left out.
    pub fn dense(states: usize, weight: impl Fn(usize, usize) -> f64) -> Self {
        let mut t = Transitions::new(states);
        for to in 0..states {
            for from in 0..states {
                let w = weight(from, to);
                if w > 0.0 {
                    t.incoming[to].push((from, w.ln()));
                }
            }
        }
        t
    }

    /// Adds an edge with a linear-domain weight. Non-positive weights are
    /// dropped (log 0 = -inf).
    pub fn add(&mut self, from: usize, to: usize, weight: f64) {
        if weight > 0.0 {
            self.add_log(from, to, weight.ln());
        }
    }

    pub fn add_log(&mut self, from: usize, to: usize, log_weight: f64) {
        assert!(from < self.incoming.len() && to < self.incoming.len());
        let list = &mut self.incoming[to];
        let pos = list.partition_point(|&(s, _)| s <= from);
        list.insert(pos, (from, log_weight));
    }

    pub fn states(&self) -> usize {
        self.incoming.len()
    }

    pub fn incoming(&self, to: usize) -> &[(usize, f64)] {
        &self.incoming[to]
    }

    pub fn out_degree(&self, from: usize) -> usize {
        self.incoming
            .iter()
            .map(|list| list.iter().filter(|&&(s, _)| s == from).count())
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        self.incoming.iter().map(Vec::len).sum()
    }

    pub fn log_weight(&self, from: usize, to: usize) -> f64 {
        self.incoming[to]
            .iter()
            .find(|&&(s, _)| s == from)
            .map_or(f64::NEG_INFINITY, |&(_, w)| w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    /// Natural log of prior x transitions x observations along the path.
    pub log_score: f64,
}

fn safe_ln(w: f64) -> f64 {
    if w > 0.0 {
        w.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Most likely state path for linear-domain priors and observations.
///
/// `observations[t][s]` is the weight of state `s` at step `t`. All weights
/// must be non-negative; they need not be normalized.
pub fn viterbi_generic(
    priors: &[f64],
    transitions: &Transitions,
    observations: &[Vec<f64>],
) -> Result<ViterbiPath> {
    if let Some(w) = priors
        .iter()
        .chain(observations.iter().flatten())
        .find(|w| !(**w >= 0.0))
    {
        return Err(Error::invalid(format!("negative or NaN weight {w}")));
    }
    for (t, row) in observations.iter().enumerate() {
        if row.len() != priors.len() {
            return Err(Error::invalid(format!(
                "observation step {t} has {} states, expected {}",
                row.len(),
                priors.len()
            )));
        }
    }
    let log_priors: Vec<f64> = priors.iter().map(|&w| safe_ln(w)).collect();
    viterbi_log(&log_priors, transitions, observations.len(), |t, s| {
        safe_ln(observations[t][s])
    })
}

/// Log-domain Viterbi with observations supplied by a callback, which lets
/// callers fold large powers without underflow.
pub fn viterbi_log(
    log_priors: &[f64],
    transitions: &Transitions,
    steps: usize,
    log_obs: impl Fn(usize, usize) -> f64,
) -> Result<ViterbiPath> {
    let n = log_priors.len();
    if steps == 0 {
        return Err(Error::invalid("viterbi needs at least one step"));
    }
    if n == 0 || transitions.states() != n {
        return Err(Error::invalid(format!(
            "{} priors for a graph of {} states",
            n,
            transitions.states()
        )));
    }

    let mut score: Vec<f64> = (0..n).map(|s| log_priors[s] + log_obs(0, s)).collect();
    let mut back = vec![0u32; n * steps];
    let mut next = vec![f64::NEG_INFINITY; n];
    for t in 1..steps {
        for (to, slot) in next.iter_mut().enumerate() {
            let obs = log_obs(t, to);
            if obs == f64::NEG_INFINITY {
                *slot = f64::NEG_INFINITY;
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for &(from, w) in transitions.incoming(to) {
                let cand = score[from] + w;
                if cand > best {
                    best = cand;
                    arg = from;
                }
            }
            *slot = best + obs;
            if arg != usize::MAX {
                back[t * n + to] = arg as u32;
            }
        }
        std::mem::swap(&mut score, &mut next);
    }

    let mut last = 0;
    for s in 1..n {
        if score[s] > score[last] {
            last = s;
        }
    }
    let log_score = score[last];
    if log_score == f64::NEG_INFINITY || log_score.is_nan() {
        return Err(Error::Infeasible(
            "every state path has zero weight".to_string(),
        ));
    }
    let mut states = vec![0usize; steps];
    states[steps - 1] = last;
    for t in (1..steps).rev() {
        states[t - 1] = back[t * n + states[t]] as usize;
    }
    Ok(ViterbiPath { states, log_score })
}

/// Log weight of an explicit path under the same model.
pub fn path_log_score(
    log_priors: &[f64],
    transitions: &Transitions,
    path: &[usize],
    log_obs: impl Fn(usize, usize) -> f64,
) -> f64 {
    let mut total = log_priors[path[0]] + log_obs(0, path[0]);
    for t in 1..path.len() {
        total += transitions.log_weight(path[t - 1], path[t]) + log_obs(t, path[t]);
    }
    total
}
