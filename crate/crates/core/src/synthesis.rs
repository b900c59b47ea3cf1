//! The synthesis loop: abstract, solve, bound, and decide whether a longer
//! deadline horizon `l` is worth it. Also the trigger calibration sweep.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::abstraction::{build_model, make_backend, ActionSet, BackendOptions, TrafficModel};
use crate::deadline::{DeadlineWord, Petc};
use crate::error::{Error, Result};
use crate::lti::{Plant, TriggerSpec};
use crate::mpg::{cooperative_upper_value, min_cycle_mean, solve_mean_payoff, GameValues};
use crate::policy::{PetcPolicy, StrategyPolicy};
use crate::rational::{from_decimal, to_f64, Rational, RationalJson};
use crate::simulation::estimate_saist;

/// Static self-triggered strategy: deadline word of length `l` → action.
#[derive(Debug)]
pub struct StrategyTable {
    l: usize,
    h: f64,
    /// Physical game value of the abstraction the table was solved on.
    game_value: Rational,
    /// Physical cooperative upper value of the same abstraction.
    upper: Rational,
    table: BTreeMap<DeadlineWord, u32>,
    misses: AtomicU64,
}

impl Clone for StrategyTable {
    fn clone(&self) -> Self {
        Self {
            l: self.l,
            h: self.h,
            game_value: self.game_value,
            upper: self.upper,
            table: self.table.clone(),
            misses: AtomicU64::new(self.misses()),
        }
    }
}

impl PartialEq for StrategyTable {
    fn eq(&self, other: &Self) -> bool {
        self.l == other.l
            && self.h == other.h
            && self.game_value == other.game_value
            && self.upper == other.upper
            && self.table == other.table
    }
}

impl StrategyTable {
    pub fn new(
        l: usize,
        h: f64,
        game_value: Rational,
        upper: Rational,
        table: BTreeMap<DeadlineWord, u32>,
    ) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidSpec("strategy word length must be at least 1".into()));
        }
        for (w, &u) in &table {
            if w.len() != l {
                return Err(Error::InvalidSpec(format!("word {w} is not of length {l}")));
            }
            if u < 1 || u > w.first() {
                return Err(Error::InvalidSpec(format!(
                    "action {u} for word {w} is outside 1..={}",
                    w.first()
                )));
            }
        }
        Ok(Self {
            l,
            h,
            game_value,
            upper,
            table,
            misses: AtomicU64::new(0),
        })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn game_value(&self) -> Rational {
        self.game_value
    }

    pub fn upper(&self) -> Rational {
        self.upper
    }

    pub fn table(&self) -> &BTreeMap<DeadlineWord, u32> {
        &self.table
    }

    pub fn get(&self, word: &DeadlineWord) -> Option<u32> {
        self.table.get(word).copied()
    }

    /// Lookups that fell back to the PETC deadline.
    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn reset_misses(&self) {
        self.misses.store(0, Ordering::Relaxed);
    }

    /// Action for state `x`: the table entry for its deadline word, or the
    /// PETC deadline itself when the word is unknown.
    pub fn refine_lookup(&self, petc: &Petc, x: &[f64]) -> u32 {
        let sigma = petc.deadline_sequence(x, self.l);
        match self.table.get(&sigma) {
            Some(&u) => u,
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                sigma.first()
            }
        }
    }

    pub fn to_json(&self) -> StrategyJson {
        StrategyJson {
            l: self.l,
            h: self.h,
            game_value_num: *self.game_value.numer(),
            game_value_den: *self.game_value.denom(),
            upper_num: *self.upper.numer(),
            upper_den: *self.upper.denom(),
            table: self
                .table
                .iter()
                .map(|(w, &u)| TableEntry {
                    word: w.clone(),
                    action: u,
                })
                .collect(),
        }
    }

    pub fn from_json(json: StrategyJson) -> Result<Self> {
        if json.game_value_den <= 0 || json.upper_den <= 0 {
            return Err(Error::InvalidSpec("denominators must be positive".into()));
        }
        let mut table = BTreeMap::new();
        for e in json.table {
            if table.insert(e.word.clone(), e.action).is_some() {
                return Err(Error::InvalidSpec(format!("duplicate word {}", e.word)));
            }
        }
        Self::new(
            json.l,
            json.h,
            Rational::new(json.game_value_num, json.game_value_den),
            Rational::new(json.upper_num, json.upper_den),
            table,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(file, &self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let json: StrategyJson = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
        Self::from_json(json)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub word: DeadlineWord,
    pub action: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyJson {
    pub l: usize,
    pub h: f64,
    pub game_value_num: i64,
    pub game_value_den: i64,
    pub upper_num: i64,
    pub upper_den: i64,
    pub table: Vec<TableEntry>,
}

/// Closed-loop simulation settings for empirical checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSettings {
    pub n_init: usize,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub l_max: usize,
    /// Registered witness backend name.
    pub backend: String,
    pub backend_options: BackendOptions,
    /// Stop once `V_U − v_l` is at most this (physical units).
    pub stop_eps: f64,
    /// Stop once the simulated refined-strategy SAIST exceeds the PETC
    /// baseline by at least this. Needs `refined_check`.
    pub min_improvement: Option<f64>,
    /// Simulate each refined strategy when set.
    pub refined_check: Option<SimSettings>,
    /// Word length of the PETC-only model behind the baseline.
    pub petc_depth: usize,
    /// Backend for the PETC-only baseline model. Exact backends expose
    /// thin regions whose cycles pull the baseline far below what the
    /// closed loop exhibits, so sampling is the default here.
    pub baseline_backend: String,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            l_max: 3,
            backend: "sampling".into(),
            backend_options: BackendOptions::default(),
            stop_eps: 0.0,
            min_improvement: None,
            refined_check: None,
            petc_depth: 8,
            baseline_backend: "sampling".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpsilonSmall,
    ImprovementLarge,
    LCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub l: usize,
    pub states: usize,
    pub edges: usize,
    /// Game value `v_l`.
    pub value: RationalJson,
    /// Cooperative upper value `V_U`.
    pub upper: RationalJson,
    pub epsilon: RationalJson,
    /// Minimum cycle mean of the PETC-restricted submodel.
    pub petc_value: RationalJson,
    /// Largest per-state game value.
    pub max_state_value: RationalJson,
    /// Whether the values carry an optimality certificate.
    pub certified: bool,
    /// Simulated SAIST of the refined strategy, when requested.
    pub refined_saist: Option<f64>,
    pub strategy_misses: Option<u64>,
    /// Not serialised, so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub h: f64,
    /// Trigger decay rate, for predictive Lyapunov triggers.
    pub rho: Option<f64>,
    pub backend: String,
    pub records: Vec<LevelRecord>,
    pub chosen_l: usize,
    pub stop_reason: StopReason,
    /// Minimum cycle mean of the deep PETC-only model.
    pub petc_baseline: RationalJson,
    pub petc_depth: usize,
    pub baseline_backend: String,
}

pub struct SynthesisOutcome {
    pub strategy: StrategyTable,
    pub report: SynthesisReport,
    /// Every abstraction built, in order of `l`.
    pub models: Vec<TrafficModel>,
}

fn physical(h: Rational, steps: Rational) -> RationalJson {
    RationalJson::from(h * steps)
}

/// PETC SAIST estimate in physical units from a PETC-only model of depth
/// `depth`.
pub fn petc_model_value(
    petc: &Petc,
    depth: usize,
    backend: &str,
    options: &BackendOptions,
) -> Result<Rational> {
    let h = from_decimal(petc.h())?;
    let backend = make_backend(backend, options)?;
    let model = build_model(petc, depth, backend.as_ref(), ActionSet::PetcOnly, options.witness_cap)?;
    Ok(h * min_cycle_mean(model.game(), None)?)
}

/// A solved abstraction: the strategy table plus per-state values in steps.
pub struct SolvedModel {
    pub table: StrategyTable,
    pub values: GameValues,
}

/// Solves the game of `model` and tabulates player 0's strategy by word.
pub fn solve_model(model: &TrafficModel) -> Result<SolvedModel> {
    let h = from_decimal(model.h())?;
    let values = solve_mean_payoff(model.game())?;
    let upper = cooperative_upper_value(model.game())?;
    let table = StrategyTable::new(
        model.l(),
        model.h(),
        h * values.game_value,
        h * upper,
        model
            .words()
            .iter()
            .cloned()
            .zip(values.strategy.iter().copied())
            .collect(),
    )?;
    Ok(SolvedModel { table, values })
}

pub fn synthesize(petc: &Petc, options: &SynthesisOptions) -> Result<(StrategyTable, SynthesisReport)> {
    synthesize_with_models(petc, options).map(|o| (o.strategy, o.report))
}

pub fn synthesize_with_models(petc: &Petc, options: &SynthesisOptions) -> Result<SynthesisOutcome> {
    if options.l_max == 0 {
        return Err(Error::InvalidSpec("l_max must be at least 1".into()));
    }
    if options.min_improvement.is_some() && options.refined_check.is_none() {
        return Err(Error::InvalidSpec(
            "an improvement threshold needs refined-strategy simulation settings".into(),
        ));
    }
    let h = from_decimal(petc.h())?;
    let backend = make_backend(&options.backend, &options.backend_options)?;
    let baseline = petc_model_value(
        petc,
        options.petc_depth,
        &options.baseline_backend,
        &options.backend_options,
    )?;

    let mut records = Vec::new();
    let mut models = Vec::new();
    let mut best: Option<(Rational, StrategyTable, usize)> = None;
    let mut stop_reason = StopReason::LCap;
    for l in 1..=options.l_max {
        let start = Instant::now();
        let model = build_model(
            petc,
            l,
            backend.as_ref(),
            ActionSet::All,
            options.backend_options.witness_cap,
        )?;
        let SolvedModel { table, values: solved } = solve_model(&model)?;
        let petc_value = min_cycle_mean(model.restrict_to_petc()?.game(), None)?;
        let max_state = solved.values.iter().copied().max().unwrap_or_default();
        let value = table.game_value();
        let upper_phys = table.upper();
        let (refined_saist, misses) = match options.refined_check {
            Some(s) => {
                let policy = StrategyPolicy::new(Arc::new(table.clone()));
                let est = estimate_saist(petc, &policy, s.n_init, s.steps, s.seed)?;
                (Some(est.min), Some(policy.table().misses()))
            }
            None => (None, None),
        };
        let epsilon = upper_phys - value;
        records.push(LevelRecord {
            l,
            states: model.n_states(),
            edges: model.game().edges().len(),
            value: value.into(),
            upper: upper_phys.into(),
            epsilon: epsilon.into(),
            petc_value: physical(h, petc_value),
            max_state_value: physical(h, max_state),
            certified: solved.certified,
            refined_saist,
            strategy_misses: misses,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        models.push(model);
        // Ties go to the longer horizon, whose refinement is finer.
        if best.as_ref().is_none_or(|(v, _, _)| value >= *v) {
            best = Some((value, table, l));
        }
        if to_f64(epsilon) <= options.stop_eps {
            stop_reason = StopReason::EpsilonSmall;
            break;
        }
        if let (Some(th), Some(r)) = (options.min_improvement, refined_saist) {
            if r - to_f64(baseline) >= th {
                stop_reason = StopReason::ImprovementLarge;
                break;
            }
        }
    }
    let (_, strategy, chosen_l) = best.ok_or_else(|| Error::Internal("no level solved".into()))?;
    Ok(SynthesisOutcome {
        strategy,
        report: SynthesisReport {
            h: petc.h(),
            rho: petc.trigger().lyapunov().map(|l| l.rho),
            backend: options.backend.clone(),
            records,
            chosen_l,
            stop_reason,
            petc_baseline: baseline.into(),
            petc_depth: options.petc_depth,
            baseline_backend: options.baseline_backend.clone(),
        },
        models,
    })
}

/// Fixed parts of a predictive Lyapunov trigger; `rho` is swept.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerTemplate {
    pub p: DMatrix<f64>,
    pub q_lyap: DMatrix<f64>,
    pub h: f64,
    pub kmax: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub depth: usize,
    pub backend: String,
    pub backend_options: BackendOptions,
    /// Simulated PETC SAIST for each grid point, as a cross-check.
    pub sim: Option<SimSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub rho: f64,
    /// Model-based PETC SAIST.
    pub estimate: RationalJson,
    pub simulated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub rho: f64,
    pub estimate: f64,
    pub gap: f64,
    pub target: f64,
    pub entries: Vec<CalibrationEntry>,
}

/// Picks the grid `rho` whose model-based PETC SAIST is nearest `target`.
/// Ties go to the point whose simulated SAIST is nearer, then to the first.
pub fn calibrate_rho(
    plant: &Plant,
    template: &TriggerTemplate,
    target: f64,
    grid: &[f64],
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if grid.is_empty() {
        return Err(Error::InvalidSpec("calibration grid is empty".into()));
    }
    let mut entries = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &rho in grid {
        let trig = TriggerSpec::predictive_lyapunov(
            plant,
            template.p.clone(),
            template.q_lyap.clone(),
            rho,
            template.h,
            template.kmax,
        )?;
        let petc = Petc::new(plant.clone(), trig)?;
        let est = petc_model_value(&petc, options.depth, &options.backend, &options.backend_options)?;
        let simulated = match options.sim {
            Some(s) => Some(estimate_saist(&petc, &PetcPolicy, s.n_init, s.steps, s.seed)?.min),
            None => None,
        };
        let e = to_f64(est);
        let gap = (e - target).abs();
        let sim_gap = simulated.map_or(f64::INFINITY, |s| (s - target).abs());
        if best.is_none_or(|(_, _, g, sg)| gap < g || (gap == g && sim_gap < sg)) {
            best = Some((rho, e, gap, sim_gap));
        }
        entries.push(CalibrationEntry {
            rho,
            estimate: est.into(),
            simulated,
        });
    }
    let (rho, estimate, gap, _) = best.expect("grid is non-empty");
    Ok(CalibrationResult {
        rho,
        estimate,
        gap,
        target,
        entries,
    })
}

/// `{0.05, 0.10, …, 0.95}`.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=19).map(|i| f64::from(i) / 20.0).collect()
}
