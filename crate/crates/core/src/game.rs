//! Finite weighted transition systems viewed as two-player games: player 0
//! picks the action, player 1 picks the transition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub action: u32,
    pub dst: usize,
    pub weight: i64,
}

impl Edge {
    pub fn new(src: usize, action: u32, dst: usize, weight: i64) -> Self {
        Self {
            src,
            action,
            dst,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedGame {
    n_states: usize,
    initial: Vec<usize>,
    edges: Vec<Edge>,
    output: Vec<i64>,
}

/// Outgoing transitions of one state grouped by action, in increasing action order.
#[derive(Debug, Clone)]
pub struct ActionGroup {
    pub action: u32,
    /// `(dst, weight)` pairs.
    pub moves: Vec<(usize, i64)>,
}

impl WeightedGame {
    /// Edges are sorted and deduplicated. `output` defaults to zeros when empty.
    pub fn new(
        n_states: usize,
        initial: Vec<usize>,
        mut edges: Vec<Edge>,
        output: Vec<i64>,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::MalformedGame("game has no states".into()));
        }
        if let Some(e) = edges.iter().find(|e| e.src >= n_states || e.dst >= n_states) {
            return Err(Error::MalformedGame(format!(
                "edge {e:?} references a state outside 0..{n_states}"
            )));
        }
        if let Some(&s) = initial.iter().find(|&&s| s >= n_states) {
            return Err(Error::MalformedGame(format!("initial state {s} out of range")));
        }
        if initial.is_empty() {
            return Err(Error::MalformedGame("no initial states".into()));
        }
        let output = if output.is_empty() {
            vec![0; n_states]
        } else if output.len() == n_states {
            output
        } else {
            return Err(Error::MalformedGame(format!(
                "output map has {} entries for {n_states} states",
                output.len()
            )));
        };
        let mut initial = initial;
        initial.sort_unstable();
        initial.dedup();
        edges.sort_unstable();
        edges.dedup();
        Ok(Self {
            n_states,
            initial,
            edges,
            output,
        })
    }

    /// Every state initial.
    pub fn with_all_initial(n_states: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::new(n_states, (0..n_states).collect(), edges, Vec::new())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn output(&self) -> &[i64] {
        &self.output
    }

    pub fn max_abs_weight(&self) -> i64 {
        self.edges.iter().map(|e| e.weight.abs()).max().unwrap_or(0)
    }

    /// Errors on the first state without an outgoing edge.
    pub fn check_non_blocking(&self) -> Result<()> {
        let mut has_out = vec![false; self.n_states];
        for e in &self.edges {
            has_out[e.src] = true;
        }
        match has_out.iter().position(|&b| !b) {
            Some(s) => Err(Error::MalformedGame(format!(
                "state {s} has no outgoing edge"
            ))),
            None => Ok(()),
        }
    }

    /// Per-state action groups. Relies on edges being sorted by `(src, action)`.
    pub fn action_groups(&self) -> Vec<Vec<ActionGroup>> {
        let mut groups: Vec<Vec<ActionGroup>> = vec![Vec::new(); self.n_states];
        for e in &self.edges {
            let g = &mut groups[e.src];
            match g.last_mut() {
                Some(last) if last.action == e.action => last.moves.push((e.dst, e.weight)),
                _ => g.push(ActionGroup {
                    action: e.action,
                    moves: vec![(e.dst, e.weight)],
                }),
            }
        }
        groups
    }

    /// Actions available at each state.
    pub fn actions(&self) -> Vec<Vec<u32>> {
        self.action_groups()
            .into_iter()
            .map(|g| g.into_iter().map(|a| a.action).collect())
            .collect()
    }

    /// Same states and initial set, keeping only edges accepted by `keep`.
    pub fn filter_edges(&self, keep: impl Fn(&Edge) -> bool) -> Self {
        Self {
            n_states: self.n_states,
            initial: self.initial.clone(),
            edges: self.edges.iter().copied().filter(|e| keep(e)).collect(),
            output: self.output.clone(),
        }
    }

    /// Keeps only the action chosen by a positional strategy at each state.
    pub fn restrict(&self, strategy: &[u32]) -> Result<Self> {
        if strategy.len() != self.n_states {
            return Err(Error::MalformedGame(format!(
                "strategy covers {} states, game has {}",
                strategy.len(),
                self.n_states
            )));
        }
        let restricted = self.filter_edges(|e| e.action == strategy[e.src]);
        restricted.check_non_blocking()?;
        Ok(restricted)
    }

    /// Same game with every weight negated.
    pub fn negated(&self) -> Self {
        let mut g = self.clone();
        g.edges.iter_mut().for_each(|e| e.weight = -e.weight);
        g
    }
}
