//! Closed-loop simulation at sample instants, inter-sample-time statistics
//! and trace export.
//!
//! The state is carried as a unit direction plus a log-norm: deadlines only
//! depend on the direction, and long stable runs would otherwise underflow.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::backend::random_unit;
use crate::deadline::{normalize, Petc};
use crate::error::{Error, Result};
use crate::lti::eval_form;
use crate::policy::SamplingPolicy;

/// Largest log-norm before the run is declared divergent (`e^709` is close
/// to the largest finite `f64`).
const MAX_LOG_NORM: f64 = 709.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub i: usize,
    /// Sample time in steps of `h`.
    pub t_steps: u64,
    /// Steps until the next sample.
    pub k: u32,
    /// Unit direction of `x_i`.
    pub direction: Vec<f64>,
    /// `ln |x_i|`.
    pub log_norm: f64,
    /// `x_iᵀ P x_i`, when Lyapunov data is available.
    pub lyapunov: Option<f64>,
}

impl TraceRow {
    /// `x_i` itself; entries underflow to zero on long stable runs.
    pub fn state(&self) -> Vec<f64> {
        let s = self.log_norm.exp();
        self.direction.iter().map(|v| v * s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub h: f64,
    pub policy: String,
    pub x0: Vec<f64>,
    pub seed: Option<u64>,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.h * self.rows[i].t_steps as f64
    }

    pub fn taus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| self.h * f64::from(r.k)).collect()
    }

    /// Mean inter-sample time over the last half of the trace.
    pub fn tail_average(&self) -> f64 {
        let n = self.rows.len();
        let tail = &self.rows[n / 2..];
        let steps: u64 = tail.iter().map(|r| u64::from(r.k)).sum();
        self.h * steps as f64 / tail.len().max(1) as f64
    }
}

/// Runs `steps` samples of the closed loop from `x0` under `policy`.
pub fn simulate(
    petc: &Petc,
    policy: &dyn SamplingPolicy,
    x0: &[f64],
    steps: usize,
) -> Result<Trace> {
    if steps == 0 {
        return Err(Error::InvalidSpec("simulation needs at least one step".into()));
    }
    if x0.len() != petc.nx() {
        return Err(Error::InvalidSpec(format!(
            "initial state has {} entries, the plant has n_x = {}",
            x0.len(),
            petc.nx()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("initial state is not finite".into()));
    }
    let p = petc
        .trigger()
        .lyapunov()
        .map(|l| l.p.as_slice().to_vec());
    let norm0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut direction = x0.to_vec();
    normalize(&mut direction);
    let mut log_norm = if norm0 > 0.0 { norm0.ln() } else { f64::NEG_INFINITY };
    let mut next = vec![0.0; x0.len()];
    let mut t_steps = 0u64;
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let k = policy.action(petc, &direction).clamp(1, petc.kmax());
        let lyapunov = p
            .as_ref()
            .map(|p| eval_form(p, &direction) * (2.0 * log_norm).exp());
        rows.push(TraceRow {
            i,
            t_steps,
            k,
            direction: direction.clone(),
            log_norm,
            lyapunov,
        });
        t_steps += u64::from(k);
        petc.advance_into(&direction, k, &mut next);
        let growth = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !growth.is_finite() {
            return Err(Error::NumericalOverflow(format!("state not finite at step {i}")));
        }
        if growth > 0.0 {
            log_norm += growth.ln();
            next.iter_mut().for_each(|v| *v /= growth);
        } else {
            log_norm = f64::NEG_INFINITY;
        }
        if log_norm > MAX_LOG_NORM {
            return Err(Error::Diverged { step: i, log_norm });
        }
        std::mem::swap(&mut direction, &mut next);
    }
    Ok(Trace {
        h: petc.h(),
        policy: policy.name().to_string(),
        x0: x0.to_vec(),
        seed: None,
        rows,
    })
}

/// `r_n = (1/(n+1)) Σ_{i≤n} τ_i`.
pub fn running_average(taus: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    taus.iter()
        .enumerate()
        .map(|(n, t)| {
            sum += t;
            sum / (n + 1) as f64
        })
        .collect()
}

/// Empirical SAIST: per-initial-state tail averages and their minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaistEstimate {
    pub min: f64,
    pub per_init: Vec<f64>,
}

/// `n_init` seeded initial directions on the unit sphere.
pub fn initial_states(nx: usize, n_init: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_init).map(|_| random_unit(&mut rng, nx)).collect()
}

pub fn estimate_saist(
    petc: &Petc,
    policy: &dyn SamplingPolicy,
    n_init: usize,
    steps: usize,
    seed: u64,
) -> Result<SaistEstimate> {
    if n_init == 0 {
        return Err(Error::InvalidSpec("n_init must be at least 1".into()));
    }
    let per_init = initial_states(petc.nx(), n_init, seed)
        .par_iter()
        .map(|x0| simulate(petc, policy, x0, steps).map(|t| t.tail_average()))
        .collect::<Result<Vec<f64>>>()?;
    let min = per_init.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SaistEstimate { min, per_init })
}

/// True iff no sample comes later than the PETC deadline of its state.
pub fn verify_deadline_safety(trace: &Trace, petc: &Petc) -> bool {
    trace
        .rows
        .iter()
        .all(|r| r.k >= 1 && r.k <= petc.deadline(&r.direction))
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub i: usize,
    pub t: f64,
    pub tau: f64,
    pub k: u32,
    pub x: Vec<f64>,
    pub v: Option<f64>,
}

/// Header `i,t,tau,k,x1..xn,V`; `V` is empty without Lyapunov data.
pub fn write_trace_csv<W: Write>(trace: &Trace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let nx = trace.x0.len();
    let mut header = vec!["i".to_string(), "t".into(), "tau".into(), "k".into()];
    header.extend((1..=nx).map(|j| format!("x{j}")));
    header.push("V".into());
    w.write_record(&header)?;
    for (n, r) in trace.rows.iter().enumerate() {
        let mut rec = vec![
            r.i.to_string(),
            trace.t(n).to_string(),
            (trace.h * f64::from(r.k)).to_string(),
            r.k.to_string(),
        ];
        rec.extend(r.state().iter().map(f64::to_string));
        rec.push(r.lyapunov.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let nx = header.len().saturating_sub(5);
    let expected: Vec<String> = ["i", "t", "tau", "k"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=nx).map(|j| format!("x{j}")))
        .chain(std::iter::once("V".to_string()))
        .collect();
    if header.len() < 6 || header != expected {
        let want = if nx == 0 { "i,t,tau,k,x1..xn,V".to_string() } else { expected.join(",") };
        return Err(Error::InvalidSpec(format!(
            "trace header must be {want}, got {}",
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |field: &str| {
            Error::InvalidSpec(format!("row {}: field `{field}` is not a number", line + 1))
        };
        let num = |j: usize| -> Result<f64> {
            rec[j].trim().parse::<f64>().map_err(|_| bad(&header[j]))
        };
        let row = CsvRow {
            i: rec[0].trim().parse().map_err(|_| bad("i"))?,
            t: num(1)?,
            tau: num(2)?,
            k: rec[3].trim().parse().map_err(|_| bad("k"))?,
            x: (0..nx).map(|j| num(4 + j)).collect::<Result<_>>()?,
            v: match rec[4 + nx].trim() {
                "" => None,
                _ => Some(num(4 + nx)?),
            },
        };
        if row.tau.is_nan() || row.tau <= 0.0 || !row.t.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "row {}: tau must be positive and t finite",
                line + 1
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidSpec("trace has no rows".into()));
    }
    Ok(rows)
}
