//! Sampling policies: the rule that picks the next inter-sample step count
//! from the current state.

use std::sync::Arc;

use crate::deadline::Petc;
use crate::error::{Error, Result};
use crate::synthesis::StrategyTable;

pub trait SamplingPolicy: Send + Sync {
    fn name(&self) -> &str;

    /// Steps of `h` until the next sample, taken from state `x`.
    fn action(&self, petc: &Petc, x: &[f64]) -> u32;
}

/// The reference PETC: sample exactly at the deadline.
#[derive(Debug, Clone, Copy, Default)]
pub struct PetcPolicy;

impl SamplingPolicy for PetcPolicy {
    fn name(&self) -> &str {
        "petc"
    }

    fn action(&self, petc: &Petc, x: &[f64]) -> u32 {
        petc.deadline(x)
    }
}

/// Synthesised self-triggered strategy looked up by deadline word.
#[derive(Debug, Clone)]
pub struct StrategyPolicy {
    table: Arc<StrategyTable>,
}

impl StrategyPolicy {
    pub fn new(table: Arc<StrategyTable>) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &StrategyTable {
        &self.table
    }
}

impl SamplingPolicy for StrategyPolicy {
    fn name(&self) -> &str {
        "sdss"
    }

    fn action(&self, petc: &Petc, x: &[f64]) -> u32 {
        self.table.refine_lookup(petc, x)
    }
}

/// Fixed period, clamped to `1..=kmax`. Not deadline-safe in general.
#[derive(Debug, Clone, Copy)]
pub struct PeriodicPolicy {
    pub period: u32,
}

impl SamplingPolicy for PeriodicPolicy {
    fn name(&self) -> &str {
        "periodic"
    }

    fn action(&self, petc: &Petc, _x: &[f64]) -> u32 {
        self.period.clamp(1, petc.kmax())
    }
}

/// Inputs a registered policy may need.
#[derive(Debug, Clone, Default)]
pub struct PolicyContext {
    pub strategy: Option<Arc<StrategyTable>>,
    pub period: u32,
}

type Factory = fn(&PolicyContext) -> Result<Box<dyn SamplingPolicy>>;

const REGISTRY: &[(&str, Factory)] = &[
    ("petc", |_| Ok(Box::new(PetcPolicy))),
    ("sdss", |c| match &c.strategy {
        Some(t) => Ok(Box::new(StrategyPolicy::new(Arc::clone(t)))),
        None => Err(Error::InvalidSpec("the sdss policy needs a strategy table".into())),
    }),
    ("periodic", |c| {
        if c.period == 0 {
            return Err(Error::InvalidSpec("periodic policy needs a period of at least 1".into()));
        }
        Ok(Box::new(PeriodicPolicy { period: c.period }))
    }),
];

pub fn policy_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn make_policy(name: &str, context: &PolicyContext) -> Result<Box<dyn SamplingPolicy>> {
    match REGISTRY.iter().find(|(n, _)| *n == name) {
        Some((_, f)) => f(context),
        None => Err(Error::UnknownName {
            kind: "sampling policy",
            name: name.to_string(),
            available: policy_names().join(", "),
        }),
    }
}
