//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stc_core::deadline::Petc;
use stc_core::game::{Edge, WeightedGame};
use stc_core::lti::{Plant, TriggerSpec};
use stc_core::rational::Rational;

pub const H: f64 = 0.1;
pub const KMAX: u32 = 20;

pub fn example_plant() -> Plant {
    Plant::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 3.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, -4.0]),
    )
    .unwrap()
}

pub fn example_p() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 1.0])
}

pub fn example_q_lyap() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.25, 1.5])
}

pub fn example_trigger(rho: f64) -> TriggerSpec {
    TriggerSpec::predictive_lyapunov(&example_plant(), example_p(), example_q_lyap(), rho, H, KMAX).unwrap()
}

pub fn example_petc(rho: f64) -> Petc {
    Petc::new(example_plant(), example_trigger(rho)).unwrap()
}

pub fn unit_circle(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * (i as f64 + 0.5) / n as f64;
            vec![t.cos(), t.sin()]
        })
        .collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

// ---------------------------------------------------------------------------
// Series oracles for the held-input discretisation.
// ---------------------------------------------------------------------------

/// `(e^{At}, ∫_0^t e^{As} ds)` by summing the power series until the terms
/// no longer register.
pub fn series_exp_and_integral(a: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let at = a * t;
    let mut term = DMatrix::<f64>::identity(n, n); // (At)^k / k!
    let mut exp = term.clone();
    let mut int = term.clone() * t; // Σ A^k t^{k+1} / (k+1)!
    for k in 1..400 {
        term = &term * &at / k as f64;
        exp += &term;
        let int_term = &term * (t / (k as f64 + 1.0));
        int += &int_term;
        if term.amax() < 1e-20 * exp.amax().max(1.0) && k > 5 {
            break;
        }
    }
    (exp, int)
}

pub fn series_hold_transition(plant: &Plant, t: f64) -> DMatrix<f64> {
    let (exp, int) = series_exp_and_integral(plant.a(), t);
    exp + int * plant.b() * plant.k()
}

// ---------------------------------------------------------------------------
// Direct-simulation deadline oracle for the predictive Lyapunov trigger.
// ---------------------------------------------------------------------------

/// Evaluates `V̇(ζ, x̂) > −ρ ζᵀ Q_lyap ζ` with `ζ` the one-check-ahead
/// prediction from the true state `xi` under the held input `K x̂`.
pub fn lyapunov_trigger_fires(
    plant: &Plant,
    p: &DMatrix<f64>,
    q_lyap: &DMatrix<f64>,
    rho: f64,
    h: f64,
    xi: &DMatrix<f64>,
    x_hat: &DMatrix<f64>,
) -> bool {
    let (ad, int) = series_exp_and_integral(plant.a(), h);
    let u = plant.k() * x_hat;
    let zeta = &ad * xi + &int * plant.b() * &u;
    let a = plant.a();
    let vdot = (zeta.transpose() * (a.transpose() * p + p * a) * &zeta)[(0, 0)]
        + 2.0 * (zeta.transpose() * p * plant.b() * &u)[(0, 0)];
    let bound = -rho * (zeta.transpose() * q_lyap * &zeta)[(0, 0)];
    vdot > bound
}

/// First check `j < kmax` at which the raw condition fires on the
/// simulated trajectory `ξ_x(jh)`, else `kmax`.
pub fn brute_force_deadline(rho: f64, x: &[f64]) -> u32 {
    let plant = example_plant();
    let x_hat = DMatrix::from_column_slice(x.len(), 1, x);
    for j in 1..KMAX {
        let xi = series_hold_transition(&plant, H * f64::from(j)) * &x_hat;
        if lyapunov_trigger_fires(&plant, &example_p(), &example_q_lyap(), rho, H, &xi, &x_hat) {
            return j;
        }
    }
    KMAX
}

/// The chain of deadlines obtained by repeating the oracle from the state
/// reached at each oracle deadline.
pub fn brute_force_word(rho: f64, x: &[f64], l: usize) -> Vec<u32> {
    let plant = example_plant();
    let mut cur = DMatrix::from_column_slice(x.len(), 1, x);
    let mut word = Vec::with_capacity(l);
    for _ in 0..l {
        let k = brute_force_deadline(rho, cur.as_slice());
        word.push(k);
        cur = series_hold_transition(&plant, H * f64::from(k)) * &cur;
        let n = cur.norm();
        cur /= n;
    }
    word
}

// ---------------------------------------------------------------------------
// Graph oracles.
// ---------------------------------------------------------------------------

/// Random non-blocking game: every state gets `1..=max_actions` actions and
/// every action `1..=max_succ` successors, weights in `weights`.
pub fn random_game(
    rng: &mut ChaCha8Rng,
    max_states: usize,
    max_actions: u32,
    max_succ: usize,
    weights: std::ops::RangeInclusive<i64>,
) -> WeightedGame {
    let n = rng.random_range(1..=max_states);
    let mut edges = Vec::new();
    for s in 0..n {
        for a in 1..=rng.random_range(1..=max_actions) {
            for _ in 0..rng.random_range(1..=max_succ) {
                edges.push(Edge::new(s, a, rng.random_range(0..n), rng.random_range(weights.clone())));
            }
        }
    }
    let mut initial: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    if initial.is_empty() {
        initial.push(rng.random_range(0..n));
    }
    WeightedGame::new(n, initial, edges, Vec::new()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean of the cycle a functional graph `next` ends in from `start`.
fn functional_cycle_mean(next: &[(usize, i64)], start: usize) -> Rational {
    let mut seen = vec![usize::MAX; next.len()];
    let mut path = Vec::new();
    let mut s = start;
    while seen[s] == usize::MAX {
        seen[s] = path.len();
        path.push(s);
        s = next[s].0;
    }
    let cycle = &path[seen[s]..];
    let total: i64 = cycle.iter().map(|&v| next[v].1).sum();
    Rational::new(total, cycle.len() as i64)
}

/// Per-state game values by enumerating every positional strategy of both
/// players: `max over player-0 choices of min over player-1 choices`.
pub fn exhaustive_game_values(game: &WeightedGame) -> Vec<Rational> {
    let n = game.n_states();
    let mut actions: Vec<Vec<u32>> = vec![Vec::new(); n];
    for e in game.edges() {
        if !actions[e.src].contains(&e.action) {
            actions[e.src].push(e.action);
        }
    }
    let moves = |s: usize, a: u32| -> Vec<(usize, i64)> {
        game.edges()
            .iter()
            .filter(|e| e.src == s && e.action == a)
            .map(|e| (e.dst, e.weight))
            .collect()
    };
    let mut best = vec![None::<Rational>; n];
    let mut choice0 = vec![0usize; n];
    loop {
        let options: Vec<Vec<(usize, i64)>> = (0..n).map(|s| moves(s, actions[s][choice0[s]])).collect();
        let mut worst = vec![None::<Rational>; n];
        let mut choice1 = vec![0usize; n];
        loop {
            let next: Vec<(usize, i64)> = (0..n).map(|s| options[s][choice1[s]]).collect();
            for (x, w) in worst.iter_mut().enumerate() {
                let m = functional_cycle_mean(&next, x);
                if w.is_none_or(|v| m < v) {
                    *w = Some(m);
                }
            }
            if !odometer(&mut choice1, |s| options[s].len()) {
                break;
            }
        }
        for (b, w) in best.iter_mut().zip(worst) {
            let w = w.unwrap();
            if b.is_none_or(|v| w > v) {
                *b = Some(w);
            }
        }
        if !odometer(&mut choice0, |s| actions[s].len()) {
            break;
        }
    }
    best.into_iter().map(Option::unwrap).collect()
}

/// Advances a mixed-radix counter; false once it wraps around.
fn odometer(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for (i, d) in digits.iter_mut().enumerate() {
        *d += 1;
        if *d < radix(i) {
            return true;
        }
        *d = 0;
    }
    false
}

/// Every simple cycle as (node set, mean), ignoring actions.
pub fn simple_cycles(game: &WeightedGame) -> Vec<(Vec<usize>, Rational)> {
    let n = game.n_states();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for e in game.edges() {
        adj[e.src].push((e.dst, e.weight));
    }
    let mut out = Vec::new();
    // Each cycle is found once, from its smallest node.
    for start in 0..n {
        let mut stack: Vec<(usize, i64, Vec<usize>)> = vec![(start, 0, vec![start])];
        while let Some((v, total, path)) = stack.pop() {
            for &(d, w) in &adj[v] {
                if d == start {
                    out.push((path.clone(), Rational::new(total + w, path.len() as i64)));
                } else if d > start && !path.contains(&d) {
                    let mut p = path.clone();
                    p.push(d);
                    stack.push((d, total + w, p));
                }
            }
        }
    }
    out
}

pub fn reachable_from(game: &WeightedGame, sources: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; game.n_states()];
    let mut queue: VecDeque<usize> = sources.iter().copied().collect();
    for &s in sources {
        seen[s] = true;
    }
    while let Some(v) = queue.pop_front() {
        for e in game.edges().iter().filter(|e| e.src == v) {
            if !seen[e.dst] {
                seen[e.dst] = true;
                queue.push_back(e.dst);
            }
        }
    }
    seen
}

/// Minimum simple-cycle mean over cycles reachable from the initial states.
pub fn enumerated_min_cycle_mean(game: &WeightedGame) -> Rational {
    let reach = reachable_from(game, game.initial());
    simple_cycles(game)
        .into_iter()
        .filter(|(nodes, _)| reach[nodes[0]])
        .map(|(_, m)| m)
        .min()
        .expect("non-blocking games have cycles")
}

/// `min over initial x of max simple-cycle mean reachable from x`.
pub fn enumerated_upper_value(game: &WeightedGame) -> Rational {
    let cycles = simple_cycles(game);
    game.initial()
        .iter()
        .map(|&x| {
            let reach = reachable_from(game, &[x]);
            cycles
                .iter()
                .filter(|(nodes, _)| reach[nodes[0]])
                .map(|(_, m)| *m)
                .max()
                .expect("non-blocking games have cycles")
        })
        .min()
        .unwrap()
}

/// Eventually periodic sequence: a geometric transient on top of a cycle.
pub fn eventually_periodic(cycle: &[f64], transient: f64, ratio: f64, len: usize) -> Vec<f64> {
    let mut b = transient;
    (0..len)
        .map(|i| {
            let v = cycle[i % cycle.len()] + b;
            b *= ratio;
            v
        })
        .collect()
}
