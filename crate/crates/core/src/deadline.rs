//! State-dependent deadlines of the reference PETC and the deadline words
//! that label abstract states.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{eval_form, hold_transition, lift_form, Plant, TriggerSpec};

/// Sequence `k₁ … k_l` of deadline indices produced by the PETC from one state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeadlineWord(Vec<u32>);

impl DeadlineWord {
    pub fn new(indices: Vec<u32>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The next deadline, which is also the largest admissible action.
    pub fn first(&self) -> u32 {
        self.0[0]
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self(self.0[..len.min(self.0.len())].to_vec())
    }
}

impl fmt::Display for DeadlineWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

/// The reference PETC with every `M(hk)` and `N(hk)` precomputed.
///
/// Matrices are stored column-major as flat slices; `n_x` is small, so the
/// hot paths avoid allocating matrix types.
#[derive(Debug, Clone)]
pub struct Petc {
    plant: Plant,
    trigger: TriggerSpec,
    /// `transitions[k - 1] = M(hk)`, `k = 1..=kmax`.
    transitions: Vec<Vec<f64>>,
    /// `forms[k - 1] = N(hk)`, `k = 1..kmax` (the last check never fires).
    forms: Vec<Vec<f64>>,
}

impl Petc {
    pub fn new(plant: Plant, trigger: TriggerSpec) -> Result<Self> {
        let nx = plant.nx();
        if trigger.q().nrows() != 2 * nx {
            return Err(Error::InvalidSpec(format!(
                "trigger matrix is {}x{} but the plant has n_x = {nx}",
                trigger.q().nrows(),
                trigger.q().ncols()
            )));
        }
        let kmax = trigger.kmax();
        let mut transitions = Vec::with_capacity(kmax as usize);
        let mut forms = Vec::with_capacity(kmax as usize - 1);
        for k in 1..=kmax {
            let m = hold_transition(&plant, trigger.h() * f64::from(k))?;
            if k < kmax {
                forms.push(lift_form(trigger.q(), &m).matrix().as_slice().to_vec());
            }
            transitions.push(m.as_slice().to_vec());
        }
        Ok(Self {
            plant,
            trigger,
            transitions,
            forms,
        })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn trigger(&self) -> &TriggerSpec {
        &self.trigger
    }

    pub fn nx(&self) -> usize {
        self.plant.nx()
    }

    pub fn h(&self) -> f64 {
        self.trigger.h()
    }

    pub fn kmax(&self) -> u32 {
        self.trigger.kmax()
    }

    /// `M(hk)` as a matrix.
    pub fn transition(&self, k: u32) -> DMatrix<f64> {
        let n = self.nx();
        DMatrix::from_column_slice(n, n, &self.transitions[k as usize - 1])
    }

    /// `N(hk)` as a matrix, `k < kmax`.
    pub fn form(&self, k: u32) -> DMatrix<f64> {
        let n = self.nx();
        DMatrix::from_column_slice(n, n, &self.forms[k as usize - 1])
    }

    /// `xᵀ N(hk) x`; identically zero for `k = kmax`.
    pub fn form_value(&self, k: u32, x: &[f64]) -> f64 {
        match self.forms.get(k as usize - 1) {
            Some(n) => eval_form(n, x),
            None => 0.0,
        }
    }

    /// First check index at which the trigger fires, or `kmax` if none does.
    /// Boundary points (`xᵀNx = 0`) count as not yet triggered.
    pub fn deadline(&self, x: &[f64]) -> u32 {
        for (j, n) in self.forms.iter().enumerate() {
            if eval_form(n, x) > 0.0 {
                return j as u32 + 1;
            }
        }
        self.kmax()
    }

    /// `M(hk) x`.
    pub fn advance(&self, x: &[f64], k: u32) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.advance_into(x, k, &mut out);
        out
    }

    pub(crate) fn advance_into(&self, x: &[f64], k: u32, out: &mut [f64]) {
        let n = x.len();
        let m = &self.transitions[k as usize - 1];
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, xj) in x.iter().enumerate() {
            let col = &m[j * n..(j + 1) * n];
            for (o, mij) in out.iter_mut().zip(col) {
                *o += mij * xj;
            }
        }
    }

    /// The `l` deadlines the PETC generates from `x`.
    ///
    /// The propagated state is renormalised after each step; deadlines are
    /// invariant under scaling, so this only guards against under/overflow.
    pub fn deadline_sequence(&self, x: &[f64], l: usize) -> DeadlineWord {
        let mut word = Vec::with_capacity(l);
        let mut cur = x.to_vec();
        let mut next = vec![0.0; x.len()];
        for i in 0..l {
            let k = self.deadline(&cur);
            word.push(k);
            if i + 1 < l {
                self.advance_into(&cur, k, &mut next);
                normalize(&mut next);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        DeadlineWord(word)
    }

    /// True iff `x` generates exactly the deadline word `sigma`.
    pub fn in_region(&self, x: &[f64], sigma: &DeadlineWord) -> bool {
        if sigma.is_empty() || sigma.indices().iter().any(|&k| k < 1 || k > self.kmax()) {
            return false;
        }
        self.deadline_sequence(x, sigma.len()) == *sigma
    }
}

/// Scales `x` to unit Euclidean norm; the zero vector is left unchanged.
pub fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}
