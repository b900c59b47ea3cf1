//! Exact region computation for planar plants.
//!
//! Directions are parametrised by `θ ∈ [0, π)`. Along a direction `d(θ)` each
//! trigger form pulled back through a fixed matrix `Φ` is
//! `α + R cos(2θ − φ)`, so its sign changes are available in closed form and
//! deadline words are constant on the arcs between consecutive roots.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::backend::{propagate_witnesses, Successor, WitnessBackend};
use super::{Arc, Region};
use crate::deadline::{normalize, DeadlineWord, Petc};
use crate::error::{Error, Result};

/// Arc of directions on which the first `word.len()` deadlines are constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub arc: Arc,
    pub word: DeadlineWord,
}

#[derive(Debug, Clone)]
pub struct PlanarBackend {
    witness_cap: usize,
}

impl PlanarBackend {
    pub fn new(witness_cap: usize) -> Self {
        Self {
            witness_cap: witness_cap.max(1),
        }
    }
}

fn direction(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// `Φ d`, with `Φ` column-major 2x2.
fn apply(phi: &[f64; 4], d: [f64; 2]) -> [f64; 2] {
    [phi[0] * d[0] + phi[2] * d[1], phi[1] * d[0] + phi[3] * d[1]]
}

/// `A Φ`, rescaled so the largest entry has magnitude one.
fn compose(a: &[f64], phi: &[f64; 4]) -> [f64; 4] {
    let mut out = [
        a[0] * phi[0] + a[2] * phi[1],
        a[1] * phi[0] + a[3] * phi[1],
        a[0] * phi[2] + a[2] * phi[3],
        a[1] * phi[2] + a[3] * phi[3],
    ];
    let scale = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale > 0.0 && scale.is_finite() {
        out.iter_mut().for_each(|v| *v /= scale);
    }
    out
}

/// Angles in `(lo, hi)` where `d(θ)ᵀ Φᵀ N Φ d(θ)` changes sign.
fn form_roots(n: &[f64], phi: &[f64; 4], lo: f64, hi: f64, out: &mut Vec<f64>) {
    // S = Φᵀ N Φ, entries a = S00, b = S01, c = S11.
    let col0 = [phi[0], phi[1]];
    let col1 = [phi[2], phi[3]];
    let quad = |u: [f64; 2], v: [f64; 2]| {
        let nv = [n[0] * v[0] + n[2] * v[1], n[1] * v[0] + n[3] * v[1]];
        u[0] * nv[0] + u[1] * nv[1]
    };
    let a = quad(col0, col0);
    let b = quad(col0, col1);
    let c = quad(col1, col1);
    let alpha = 0.5 * (a + c);
    let beta = 0.5 * (a - c);
    let r = beta.hypot(b);
    if r <= 1e-300 {
        return;
    }
    let ratio = -alpha / r;
    if ratio.abs() > 1.0 {
        return;
    }
    let phase = b.atan2(beta);
    let delta = ratio.acos();
    for two_theta in [phase + delta, phase - delta] {
        let theta = (0.5 * two_theta).rem_euclid(PI);
        if theta > lo && theta < hi {
            out.push(theta);
        }
    }
}

/// Splits each arc (taken in the coordinates where `Φ0 d(θ)` is the state)
/// into pieces with constant length-`l` deadline words.
pub fn refine(petc: &Petc, arcs: &[Arc], phi0: [f64; 4], l: usize) -> Vec<Piece> {
    let forms: Vec<Vec<f64>> = (1..petc.kmax())
        .map(|k| petc.form(k).as_slice().to_vec())
        .collect();
    let transitions: Vec<Vec<f64>> = (1..=petc.kmax())
        .map(|k| petc.transition(k).as_slice().to_vec())
        .collect();

    let mut out = Vec::new();
    let mut stack: Vec<(Arc, [f64; 4], Vec<u32>)> =
        arcs.iter().rev().map(|a| (*a, phi0, Vec::new())).collect();
    while let Some((arc, phi, prefix)) = stack.pop() {
        if prefix.len() == l {
            out.push(Piece {
                arc,
                word: DeadlineWord::new(prefix),
            });
            continue;
        }
        let mut cuts = Vec::new();
        for n in &forms {
            form_roots(n, &phi, arc.lo, arc.hi, &mut cuts);
        }
        cuts.sort_by(f64::total_cmp);
        let mut points = Vec::with_capacity(cuts.len() + 2);
        points.push(arc.lo);
        points.extend(cuts);
        points.push(arc.hi);

        // Deadline on each elementary arc, merging neighbours that agree.
        let mut merged: Vec<(Arc, u32)> = Vec::new();
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let x = apply(&phi, direction(0.5 * (a + b)));
            let k = petc.deadline(&x);
            match merged.last_mut() {
                Some((last, lk)) if *lk == k => last.hi = b,
                _ => merged.push((Arc { lo: a, hi: b }, k)),
            }
        }
        for (sub, k) in merged.into_iter().rev() {
            let mut next = prefix.clone();
            next.push(k);
            stack.push((sub, compose(&transitions[k as usize - 1], &phi), next));
        }
    }
    out
}

/// Verified witnesses for a word: midpoints of its pieces, widest first.
fn witnesses_for(petc: &Petc, word: &DeadlineWord, pieces: &[Arc], phi: &[f64; 4], cap: usize) -> Vec<Vec<f64>> {
    let mut arcs: Vec<&Arc> = pieces.iter().collect();
    arcs.sort_by(|a, b| (b.hi - b.lo).total_cmp(&(a.hi - a.lo)));
    let mut out = Vec::new();
    for arc in arcs {
        if out.len() >= cap {
            break;
        }
        let mut x = apply(phi, direction(arc.mid())).to_vec();
        normalize(&mut x);
        if petc.in_region(&x, word) {
            out.push(x);
        }
    }
    out
}

const IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 1.0];

impl WitnessBackend for PlanarBackend {
    fn name(&self) -> &'static str {
        "planar"
    }

    fn discover(&self, petc: &Petc, l: usize) -> Result<Vec<Region>> {
        if petc.nx() != 2 {
            return Err(Error::InvalidSpec(format!(
                "the planar backend needs n_x = 2, got {}",
                petc.nx()
            )));
        }
        if l == 0 {
            return Err(Error::InvalidSpec("word length must be at least 1".into()));
        }
        let pieces = refine(petc, &[Arc { lo: 0.0, hi: PI }], IDENTITY, l);
        let mut by_word: BTreeMap<DeadlineWord, Vec<Arc>> = BTreeMap::new();
        for p in pieces {
            by_word.entry(p.word).or_default().push(p.arc);
        }
        Ok(by_word
            .into_iter()
            .filter_map(|(word, arcs)| {
                let witnesses = witnesses_for(petc, &word, &arcs, &IDENTITY, self.witness_cap);
                (!witnesses.is_empty()).then_some(Region {
                    word,
                    witnesses,
                    arcs,
                })
            })
            .collect())
    }

    fn successors(&self, petc: &Petc, region: &Region, action: u32) -> Vec<Successor> {
        if region.arcs.is_empty() || petc.nx() != 2 {
            return propagate_witnesses(petc, region, action);
        }
        // Directions of the region are d(θ), θ in its arcs; their images are
        // M(hu) d(θ), so refining with Φ0 = M(hu) yields the successor words.
        let m = petc.transition(action);
        let phi = [m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)]];
        let pieces = refine(petc, &region.arcs, phi, region.word.len());
        let mut by_word: BTreeMap<DeadlineWord, Vec<Arc>> = BTreeMap::new();
        for p in pieces {
            by_word.entry(p.word).or_default().push(p.arc);
        }
        // Stored witnesses are always propagated too: on arcs narrower than
        // the rounding error, midpoints can fail re-verification.
        let mut out = propagate_witnesses(petc, region, action);
        for (word, mut arcs) in by_word {
            if out.iter().any(|s| s.word == word) {
                continue;
            }
            arcs.sort_by(|a, b| (b.hi - b.lo).total_cmp(&(a.hi - a.lo)));
            for arc in arcs {
                let source = direction(arc.mid()).to_vec();
                let mut image = petc.advance(&source, action);
                normalize(&mut image);
                if petc.in_region(&source, &region.word) && petc.in_region(&image, &word) {
                    out.push(Successor {
                        word,
                        source,
                        image,
                    });
                    break;
                }
            }
        }
        out
    }
}
