//! JSON run configuration.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::abstraction::BackendOptions;
use crate::deadline::Petc;
use crate::error::{Error, Result};
use crate::lti::{Plant, TriggerSpec};
use crate::synthesis::{CalibrationOptions, SimSettings, SynthesisOptions, TriggerTemplate};

/// Row-major nested array.
pub type MatrixRows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    #[serde(rename = "A")]
    pub a: MatrixRows,
    #[serde(rename = "B")]
    pub b: MatrixRows,
    #[serde(rename = "K")]
    pub k: MatrixRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TriggerConfig {
    Quadratic {
        #[serde(rename = "Q")]
        q: MatrixRows,
    },
    PredictiveLyapunov {
        #[serde(rename = "P")]
        p: MatrixRows,
        #[serde(rename = "Q_lyap")]
        q_lyap: MatrixRows,
        /// Left out when it is to be calibrated.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    pub l_max: usize,
    pub budget: usize,
    pub seed: u64,
    pub n_init: usize,
    pub steps: usize,
    pub backend: String,
    pub stop_eps: f64,
    pub min_improvement: Option<f64>,
    pub witness_cap: usize,
    pub petc_depth: usize,
    /// Backend for the PETC-only baseline and calibration models.
    pub baseline_backend: String,
    /// Simulate each refined strategy during synthesis.
    pub refined_check: bool,
    /// PETC SAIST the calibration aims for.
    pub target_saist: Option<f64>,
    pub rho_grid: Option<Vec<f64>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            l_max: 3,
            budget: 100_000,
            seed: 0,
            n_init: 100,
            steps: 2000,
            backend: "sampling".into(),
            stop_eps: 0.0,
            min_improvement: None,
            witness_cap: 64,
            petc_depth: 8,
            baseline_backend: "sampling".into(),
            refined_check: true,
            target_saist: None,
            rho_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub plant: PlantConfig,
    pub trigger: TriggerConfig,
    pub h: f64,
    pub kmax: u32,
    #[serde(default)]
    pub run: RunOptions,
}

fn matrix(path: &str, rows: &MatrixRows) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(Error::InvalidSpec(format!("{path}: matrix is empty")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::InvalidSpec(format!(
            "{path}[{i}]: row has {} entries, expected {m}",
            r.len()
        )));
    }
    Ok(DMatrix::from_row_iterator(n, m, rows.iter().flatten().copied()))
}

impl Config {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::InvalidSpec(format!("{path}: {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Re-checks the configuration, e.g. after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let plant = self.plant()?;
        match &self.trigger {
            TriggerConfig::Quadratic { q } => {
                TriggerSpec::quadratic(matrix("trigger.Q", q)?, self.h, self.kmax)?;
            }
            TriggerConfig::PredictiveLyapunov { rho, .. } => {
                // Without rho only the matrix shapes can be checked here.
                let t = self.template()?.expect("lyapunov trigger");
                TriggerSpec::predictive_lyapunov(&plant, t.p, t.q_lyap, rho.unwrap_or(0.5), self.h, self.kmax)?;
            }
        }
        let r = &self.run;
        if r.l_max == 0 || r.budget == 0 || r.n_init == 0 || r.steps == 0 || r.petc_depth == 0 || r.witness_cap == 0 {
            return Err(Error::InvalidSpec(
                "run: l_max, budget, n_init, steps, witness_cap and petc_depth must be at least 1".into(),
            ));
        }
        if let Some(grid) = &r.rho_grid {
            if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
                return Err(Error::InvalidSpec("run.rho_grid: values must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<Plant> {
        Plant::new(
            matrix("plant.A", &self.plant.a)?,
            matrix("plant.B", &self.plant.b)?,
            matrix("plant.K", &self.plant.k)?,
        )
    }

    /// The Lyapunov ingredients when the trigger is predictive.
    pub fn template(&self) -> Result<Option<TriggerTemplate>> {
        match &self.trigger {
            TriggerConfig::Quadratic { .. } => Ok(None),
            TriggerConfig::PredictiveLyapunov { p, q_lyap, .. } => Ok(Some(TriggerTemplate {
                p: matrix("trigger.P", p)?,
                q_lyap: matrix("trigger.Q_lyap", q_lyap)?,
                h: self.h,
                kmax: self.kmax,
            })),
        }
    }

    pub fn rho(&self) -> Option<f64> {
        match &self.trigger {
            TriggerConfig::PredictiveLyapunov { rho, .. } => *rho,
            TriggerConfig::Quadratic { .. } => None,
        }
    }

    /// The trigger, with `rho_override` taking precedence over the file.
    pub fn trigger_spec(&self, plant: &Plant, rho_override: Option<f64>) -> Result<TriggerSpec> {
        match &self.trigger {
            TriggerConfig::Quadratic { q } => {
                TriggerSpec::quadratic(matrix("trigger.Q", q)?, self.h, self.kmax)
            }
            TriggerConfig::PredictiveLyapunov { p, q_lyap, rho } => {
                let rho = rho_override.or(*rho).ok_or_else(|| {
                    Error::InvalidSpec(
                        "trigger.rho: missing; set it or run calibration first".into(),
                    )
                })?;
                TriggerSpec::predictive_lyapunov(
                    plant,
                    matrix("trigger.P", p)?,
                    matrix("trigger.Q_lyap", q_lyap)?,
                    rho,
                    self.h,
                    self.kmax,
                )
            }
        }
    }

    pub fn petc(&self, rho_override: Option<f64>) -> Result<Petc> {
        let plant = self.plant()?;
        let trig = self.trigger_spec(&plant, rho_override)?;
        Petc::new(plant, trig)
    }

    pub fn backend_options(&self) -> BackendOptions {
        BackendOptions {
            budget: self.run.budget,
            seed: self.run.seed,
            witness_cap: self.run.witness_cap,
        }
    }

    pub fn sim_settings(&self) -> SimSettings {
        SimSettings {
            n_init: self.run.n_init,
            steps: self.run.steps,
            seed: self.run.seed,
        }
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            l_max: self.run.l_max,
            backend: self.run.backend.clone(),
            backend_options: self.backend_options(),
            stop_eps: self.run.stop_eps,
            min_improvement: self.run.min_improvement,
            refined_check: self.run.refined_check.then(|| self.sim_settings()),
            petc_depth: self.run.petc_depth,
            baseline_backend: self.run.baseline_backend.clone(),
        }
    }

    pub fn calibration_options(&self) -> CalibrationOptions {
        CalibrationOptions {
            depth: self.run.petc_depth,
            backend: self.run.baseline_backend.clone(),
            backend_options: self.backend_options(),
            sim: Some(self.sim_settings()),
        }
    }
}
