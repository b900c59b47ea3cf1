//! Finite traffic models whose states are length-`l` deadline words.

pub mod backend;
pub mod planar;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deadline::{normalize, DeadlineWord, Petc};
use crate::error::{Error, Result};
use crate::game::{Edge, WeightedGame};

pub use backend::{
    backend_names, make_backend, sphere_samples, BackendOptions, SamplingBackend, Successor,
    WitnessBackend,
};
pub use planar::PlanarBackend;

/// Interval of direction angles `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub lo: f64,
    pub hi: f64,
}

impl Arc {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Abstract state: a deadline word with unit-norm states that realise it.
/// `arcs` is filled only by backends that compute regions exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub word: DeadlineWord,
    pub witnesses: Vec<Vec<f64>>,
    pub arcs: Vec<Arc>,
}

impl Region {
    pub fn new(word: DeadlineWord, witnesses: Vec<Vec<f64>>) -> Self {
        Self {
            word,
            witnesses,
            arcs: Vec::new(),
        }
    }
}

/// Which actions each state offers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSet {
    /// Every `u ≤ σ(1)`.
    All,
    /// Only `u = σ(1)`, the reference PETC's own choice.
    PetcOnly,
}

impl ActionSet {
    fn actions(self, word: &DeadlineWord) -> Vec<u32> {
        match self {
            ActionSet::All => (1..=word.first()).collect(),
            ActionSet::PetcOnly => vec![word.first()],
        }
    }
}

/// Sampling-based discovery of length-`l` words.
pub fn discover_states(petc: &Petc, l: usize, budget: usize, seed: u64) -> Result<Vec<Region>> {
    SamplingBackend::new(BackendOptions {
        budget,
        seed,
        ..BackendOptions::default()
    })
    .discover(petc, l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficModel {
    l: usize,
    h: f64,
    kmax: u32,
    words: Vec<DeadlineWord>,
    witnesses: Vec<Vec<f64>>,
    game: WeightedGame,
    index: HashMap<DeadlineWord, usize>,
}

/// Builds the transition relation from `states`, adding any successor word
/// that the backend certifies but discovery missed, until closed. Every
/// state of the result is non-blocking and every edge has a verified witness.
pub fn build_transitions(
    petc: &Petc,
    states: Vec<Region>,
    l: usize,
    backend: &dyn WitnessBackend,
    actions: ActionSet,
    witness_cap: usize,
) -> Result<TrafficModel> {
    if states.is_empty() {
        return Err(Error::InvalidSpec("no abstract states to build from".into()));
    }
    let mut regions: Vec<Region> = Vec::with_capacity(states.len());
    let mut index: HashMap<DeadlineWord, usize> = HashMap::new();
    for r in states {
        if r.word.len() != l {
            return Err(Error::Internal(format!("word {} is not of length {l}", r.word)));
        }
        if r.witnesses.is_empty() {
            return Err(Error::Internal(format!("word {} has no witness", r.word)));
        }
        if index.insert(r.word.clone(), regions.len()).is_some() {
            return Err(Error::Internal(format!("duplicate word {}", r.word)));
        }
        regions.push(r);
    }

    let cap = witness_cap.max(1);
    let mut edges: BTreeSet<(usize, u32, usize)> = BTreeSet::new();
    let mut frontier: Vec<usize> = (0..regions.len()).collect();
    while !frontier.is_empty() {
        // Successor computation is independent per state; merging happens
        // sequentially in frontier order so the result is deterministic.
        let found: Vec<Vec<(u32, Vec<Successor>)>> = frontier
            .par_iter()
            .map(|&s| {
                let r = &regions[s];
                actions
                    .actions(&r.word)
                    .into_iter()
                    .map(|u| (u, backend.successors(petc, r, u)))
                    .collect()
            })
            .collect();
        let mut fresh: Vec<usize> = Vec::new();
        let fresh_from = regions.len();
        for (&s, per_action) in frontier.iter().zip(found) {
            for (u, succs) in per_action {
                for succ in succs {
                    if !petc.in_region(&succ.source, &regions[s].word)
                        || !petc.in_region(&succ.image, &succ.word)
                    {
                        continue;
                    }
                    let dst = match index.get(&succ.word) {
                        Some(&d) => {
                            if d >= fresh_from && regions[d].witnesses.len() < cap {
                                regions[d].witnesses.push(succ.image);
                            }
                            d
                        }
                        None => {
                            let d = regions.len();
                            index.insert(succ.word.clone(), d);
                            regions.push(Region::new(succ.word, vec![succ.image]));
                            fresh.push(d);
                            d
                        }
                    };
                    edges.insert((s, u, dst));
                }
            }
        }
        frontier = fresh;
    }

    // Canonical state order: lexicographic by word.
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| regions[a].word.cmp(&regions[b].word));
    let mut rank = vec![0usize; regions.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let edges: Vec<Edge> = edges
        .into_iter()
        .map(|(s, u, d)| Edge::new(rank[s], u, rank[d], i64::from(u)))
        .collect();
    let mut words = Vec::with_capacity(order.len());
    let mut witnesses = Vec::with_capacity(order.len());
    for &old in &order {
        words.push(regions[old].word.clone());
        witnesses.push(regions[old].witnesses[0].clone());
    }
    TrafficModel::from_parts(l, petc.h(), petc.kmax(), words, witnesses, edges)
}

/// Discovery followed by closure with the given backend.
pub fn build_model(
    petc: &Petc,
    l: usize,
    backend: &dyn WitnessBackend,
    actions: ActionSet,
    witness_cap: usize,
) -> Result<TrafficModel> {
    let regions = backend.discover(petc, l)?;
    build_transitions(petc, regions, l, backend, actions, witness_cap)
}

/// Outcome of checking the model against concrete one-step transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverageCheck {
    pub checked: usize,
    /// Samples whose own word is not a model state.
    pub missing_states: usize,
    /// Samples whose state exists but with a different action set.
    pub action_mismatches: usize,
    /// Concrete transitions `(σ, u, σ')` absent from the model.
    pub missing_edges: usize,
}

impl CoverageCheck {
    pub fn is_clean(&self) -> bool {
        self.missing_states == 0 && self.action_mismatches == 0 && self.missing_edges == 0
    }
}

impl TrafficModel {
    fn from_parts(
        l: usize,
        h: f64,
        kmax: u32,
        words: Vec<DeadlineWord>,
        witnesses: Vec<Vec<f64>>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let n = words.len();
        let mut index = HashMap::with_capacity(n);
        for (i, w) in words.iter().enumerate() {
            if w.len() != l {
                return Err(Error::InvalidSpec(format!("word {w} is not of length {l}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidSpec(format!("duplicate word {w}")));
            }
        }
        let game = WeightedGame::new(
            n,
            (0..n).collect(),
            edges,
            words.iter().map(|w| i64::from(w.first())).collect(),
        )?;
        game.check_non_blocking()?;
        Ok(Self {
            l,
            h,
            kmax,
            words,
            witnesses,
            game,
            index,
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn kmax(&self) -> u32 {
        self.kmax
    }

    pub fn words(&self) -> &[DeadlineWord] {
        &self.words
    }

    pub fn witness(&self, state: usize) -> &[f64] {
        &self.witnesses[state]
    }

    pub fn game(&self) -> &WeightedGame {
        &self.game
    }

    pub fn n_states(&self) -> usize {
        self.words.len()
    }

    pub fn state_of(&self, word: &DeadlineWord) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Same states, keeping only the PETC's own action `σ(1)`.
    pub fn restrict_to_petc(&self) -> Result<Self> {
        let words = &self.words;
        let game = self
            .game
            .filter_edges(|e| e.action == words[e.src].first());
        game.check_non_blocking()?;
        Ok(Self {
            game,
            ..self.clone()
        })
    }

    /// Samples random states and actions and checks that each concrete
    /// one-step transition is represented in the model.
    pub fn coverage_check(&self, petc: &Petc, samples: usize, seed: u64) -> CoverageCheck {
        let edge_set: HashSet<(usize, u32, usize)> = self
            .game
            .edges()
            .iter()
            .map(|e| (e.src, e.action, e.dst))
            .collect();
        let actions = self.game.actions();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut check = CoverageCheck {
            checked: samples,
            missing_states: 0,
            action_mismatches: 0,
            missing_edges: 0,
        };
        for _ in 0..samples {
            let x = backend::random_unit(&mut rng, petc.nx());
            let sigma = petc.deadline_sequence(&x, self.l);
            let Some(s) = self.state_of(&sigma) else {
                check.missing_states += 1;
                continue;
            };
            let expected: Vec<u32> = (1..=sigma.first()).collect();
            if actions[s] != expected {
                check.action_mismatches += 1;
            }
            let u = rng.random_range(1..=sigma.first());
            let mut y = petc.advance(&x, u);
            normalize(&mut y);
            let next = petc.deadline_sequence(&y, self.l);
            match self.state_of(&next) {
                Some(d) if edge_set.contains(&(s, u, d)) => {}
                _ => check.missing_edges += 1,
            }
        }
        check
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            l: self.l,
            h: self.h,
            kmax: self.kmax,
            states: self
                .words
                .iter()
                .zip(&self.witnesses)
                .enumerate()
                .map(|(id, (word, witness))| StateJson {
                    id,
                    word: word.clone(),
                    witness: witness.clone(),
                })
                .collect(),
            edges: self
                .game
                .edges()
                .iter()
                .map(|e| [e.src as i64, i64::from(e.action), e.dst as i64, e.weight])
                .collect(),
        }
    }

    pub fn from_json(json: ModelJson) -> Result<Self> {
        let mut states = json.states;
        states.sort_by_key(|s| s.id);
        if states.iter().enumerate().any(|(i, s)| s.id != i) {
            return Err(Error::InvalidSpec("state ids must be 0..n without gaps".into()));
        }
        let mut edges = Vec::with_capacity(json.edges.len());
        for [src, u, dst, w] in json.edges {
            let (Ok(src), Ok(u), Ok(dst)) =
                (usize::try_from(src), u32::try_from(u), usize::try_from(dst))
            else {
                return Err(Error::InvalidSpec(format!(
                    "malformed edge [{src}, {u}, {dst}, {w}]"
                )));
            };
            if w != i64::from(u) {
                return Err(Error::InvalidSpec(format!(
                    "edge weight {w} differs from its action {u}"
                )));
            }
            edges.push(Edge::new(src, u, dst, w));
        }
        let (words, witnesses) = states.into_iter().map(|s| (s.word, s.witness)).unzip();
        Self::from_parts(json.l, json.h, json.kmax, words, witnesses, edges)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, &self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let json: ModelJson = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
        Self::from_json(json)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub id: usize,
    pub word: DeadlineWord,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub l: usize,
    pub h: f64,
    pub kmax: u32,
    pub states: Vec<StateJson>,
    /// `[src, action, dst, weight]`.
    pub edges: Vec<[i64; 4]>,
}
