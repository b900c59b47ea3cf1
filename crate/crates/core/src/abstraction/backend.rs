//! Witness backends: interchangeable ways of certifying that a deadline word
//! (or a transition between two words) is realised by some concrete state.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::Region;
use crate::deadline::{normalize, DeadlineWord, Petc};
use crate::error::{Error, Result};

/// A successor word of a region under one action, with the concrete pair
/// `(source, image)` that certifies it: `source` lies in the region and
/// `image = M(hu) source` (normalised) lies in the successor region.
#[derive(Debug, Clone)]
pub struct Successor {
    pub word: DeadlineWord,
    pub source: Vec<f64>,
    pub image: Vec<f64>,
}

pub trait WitnessBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Regions of length-`l` words, each with at least one witness.
    fn discover(&self, petc: &Petc, l: usize) -> Result<Vec<Region>>;

    /// Words reachable from `region` in one step with action `action`.
    fn successors(&self, petc: &Petc, region: &Region, action: u32) -> Vec<Successor>;

    /// A state `x` with word `sigma` whose image under `M(h·action)` has word
    /// `next`, or `None` if the backend finds none.
    fn find_witness(
        &self,
        petc: &Petc,
        sigma: &DeadlineWord,
        action: u32,
        next: &DeadlineWord,
    ) -> Result<Option<Vec<f64>>> {
        if sigma.len() != next.len() || action < 1 || action > sigma.first() {
            return Ok(None);
        }
        let regions = self.discover(petc, sigma.len())?;
        let Some(region) = regions.iter().find(|r| &r.word == sigma) else {
            return Ok(None);
        };
        Ok(self
            .successors(petc, region, action)
            .into_iter()
            .find(|s| &s.word == next)
            .map(|s| s.source))
    }
}

/// Parameters shared by the registered backends.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendOptions {
    /// Number of sphere samples used for discovery.
    pub budget: usize,
    pub seed: u64,
    /// Witnesses kept per region.
    pub witness_cap: usize,
}

impl Default for BackendOptions {
    fn default() -> Self {
        Self {
            budget: 100_000,
            seed: 0,
            witness_cap: 64,
        }
    }
}

type Factory = fn(&BackendOptions) -> Box<dyn WitnessBackend>;

const REGISTRY: &[(&str, Factory)] = &[
    ("sampling", |o| Box::new(SamplingBackend::new(o.clone()))),
    ("planar", |o| Box::new(super::planar::PlanarBackend::new(o.witness_cap))),
];

pub fn backend_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn make_backend(name: &str, options: &BackendOptions) -> Result<Box<dyn WitnessBackend>> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f(options))
        .ok_or_else(|| Error::UnknownName {
            kind: "witness backend",
            name: name.to_string(),
            available: backend_names().join(", "),
        })
}

/// Unit-sphere sample set: evenly spaced angles on the half circle for
/// `n_x = 2`, seeded Gaussian directions otherwise.
pub fn sphere_samples(nx: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match nx {
        1 => vec![vec![1.0]; count.min(1)],
        2 => (0..count)
            .map(|i| {
                let theta = std::f64::consts::PI * (i as f64 + 0.5) / count as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| random_unit(&mut rng, nx)).collect()
        }
    }
}

pub fn random_unit<R: Rng>(rng: &mut R, nx: usize) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..nx).map(|_| rng.sample(StandardNormal)).collect();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            x.iter_mut().for_each(|v| *v /= norm);
            return x;
        }
    }
}

/// Discovers words from a fixed sample set and certifies transitions by
/// pushing stored witnesses through the dynamics.
#[derive(Debug, Clone)]
pub struct SamplingBackend {
    options: BackendOptions,
}

impl SamplingBackend {
    pub fn new(options: BackendOptions) -> Self {
        Self { options }
    }
}

impl WitnessBackend for SamplingBackend {
    fn name(&self) -> &'static str {
        "sampling"
    }

    fn discover(&self, petc: &Petc, l: usize) -> Result<Vec<Region>> {
        if self.options.budget == 0 {
            return Err(Error::InvalidSpec("sampling budget must be at least 1".into()));
        }
        if l == 0 {
            return Err(Error::InvalidSpec("word length must be at least 1".into()));
        }
        let samples = sphere_samples(petc.nx(), self.options.budget, self.options.seed);
        let words: Vec<DeadlineWord> = samples
            .par_iter()
            .map(|x| petc.deadline_sequence(x, l))
            .collect();

        // Reservoir sampling per word, in sample order, so the kept
        // witnesses depend only on the seed.
        let cap = self.options.witness_cap.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed ^ 0x5eed);
        let mut index: HashMap<DeadlineWord, usize> = HashMap::new();
        let mut regions: Vec<(Region, usize)> = Vec::new();
        for (x, w) in samples.into_iter().zip(words) {
            let i = *index.entry(w.clone()).or_insert_with(|| {
                regions.push((Region::new(w, Vec::new()), 0));
                regions.len() - 1
            });
            let (region, seen) = &mut regions[i];
            *seen += 1;
            if region.witnesses.len() < cap {
                region.witnesses.push(x);
            } else {
                let j = rng.random_range(0..*seen);
                if j < cap {
                    region.witnesses[j] = x;
                }
            }
        }
        let mut regions: Vec<Region> = regions.into_iter().map(|(r, _)| r).collect();
        regions.sort_by(|a, b| a.word.cmp(&b.word));
        Ok(regions)
    }

    fn successors(&self, petc: &Petc, region: &Region, action: u32) -> Vec<Successor> {
        propagate_witnesses(petc, region, action)
    }
}

/// One successor per distinct word reached by the region's witnesses.
pub(crate) fn propagate_witnesses(petc: &Petc, region: &Region, action: u32) -> Vec<Successor> {
    let l = region.word.len();
    let mut seen: HashMap<DeadlineWord, ()> = HashMap::new();
    let mut out = Vec::new();
    for x in &region.witnesses {
        let mut y = petc.advance(x, action);
        normalize(&mut y);
        let word = petc.deadline_sequence(&y, l);
        if seen.insert(word.clone(), ()).is_none() {
            out.push(Successor {
                word,
                source: x.clone(),
                image: y,
            });
        }
    }
    out
}
