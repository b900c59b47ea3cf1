//! Exact mean-payoff game values, positional strategies and one-player
//! cycle means on [`WeightedGame`]s.
//!
//! Player 0 maximises `liminf (1/(n+1)) Σ w_i` by choosing actions; player 1
//! resolves each action to one of its transitions. Values are rationals in
//! weight units.
//!
//! [`solve_mean_payoff`] runs value iteration with exact integer sums. At
//! every checkpoint horizon `T` the greedy strategies of both players are
//! read off the last iterate and checked with Karp's algorithm: the value
//! player 0 secures with its strategy (a lower bound) and the value player 0
//! can reach against player 1's strategy (an upper bound). When both agree
//! state by state they are the exact values. Greedy strategies can stall on
//! a suboptimal tie, so once the iterate rounded to denominators at most `n`
//! repeats between checkpoints, both strategies are rebuilt from the energy
//! games at each candidate value and checked the same way. If that never
//! happens before
//! the horizon `4 n³ W`, the iterate is rounded to the unique nearby rational
//! with denominator at most `n`, and a strategy is extracted by halving
//! action sets while the values stay put.

use num_integer::Integer;
use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::game::{ActionGroup, WeightedGame};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct GameValues {
    /// Optimal value per state.
    pub values: Vec<Rational>,
    /// Minimum over initial states.
    pub game_value: Rational,
    /// Positional optimal strategy for player 0 (action per state).
    pub strategy: Vec<u32>,
    /// Value-iteration horizon reached.
    pub horizon: u64,
    /// Whether the result came from the strategy certificate (as opposed to
    /// rounding at the full horizon).
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Min,
    Max,
}

/// Minimum cycle mean over cycles reachable from an initial state; with a
/// strategy, only the chosen action's edges are kept first.
pub fn min_cycle_mean(game: &WeightedGame, restricted: Option<&[u32]>) -> Result<Rational> {
    let g;
    let game = match restricted {
        Some(s) => {
            g = game.restrict(s)?;
            &g
        }
        None => {
            game.check_non_blocking()?;
            game
        }
    };
    let per_state = reachable_cycle_means(game, Extremum::Min);
    Ok(min_over_initial(game, &per_state))
}

/// `V_U`: for each initial state the largest reachable cycle mean (player 0
/// controls actions and transitions), minimised over initial states.
pub fn cooperative_upper_value(game: &WeightedGame) -> Result<Rational> {
    game.check_non_blocking()?;
    let per_state = reachable_cycle_means(game, Extremum::Max);
    Ok(min_over_initial(game, &per_state))
}

/// Per-state minimum reachable cycle mean (adversarial one-player value).
pub fn adversarial_values(game: &WeightedGame) -> Result<Vec<Rational>> {
    game.check_non_blocking()?;
    Ok(reachable_cycle_means(game, Extremum::Min))
}

/// Per-state maximum reachable cycle mean (cooperative value).
pub fn cooperative_values(game: &WeightedGame) -> Result<Vec<Rational>> {
    game.check_non_blocking()?;
    Ok(reachable_cycle_means(game, Extremum::Max))
}

fn min_over_initial(game: &WeightedGame, per_state: &[Rational]) -> Rational {
    game.initial()
        .iter()
        .map(|&s| per_state[s])
        .min()
        .expect("games have at least one initial state")
}

fn reachable_cycle_means(game: &WeightedGame, ext: Extremum) -> Vec<Rational> {
    let n = game.n_states();
    let mut graph: DiGraph<(), i64> = DiGraph::with_capacity(n, game.edges().len());
    for _ in 0..n {
        graph.add_node(());
    }
    for e in game.edges() {
        let w = match ext {
            Extremum::Min => e.weight,
            Extremum::Max => -e.weight,
        };
        graph.add_edge(NodeIndex::new(e.src), NodeIndex::new(e.dst), w);
    }

    // Components come out sinks first (reverse topological order), so
    // successors are final when visited. Kosaraju is iterative, which
    // matters on long chains.
    let sccs = kosaraju_scc(&graph);
    let mut comp_of = vec![usize::MAX; n];
    for (c, nodes) in sccs.iter().enumerate() {
        for v in nodes {
            comp_of[v.index()] = c;
        }
    }
    let mut comp_best: Vec<Option<Rational>> = vec![None; sccs.len()];
    for (c, nodes) in sccs.iter().enumerate() {
        let internal = component_edges(&graph, nodes, &comp_of, c);
        let mut best = component_min_mean(nodes.len(), &internal);
        for v in nodes {
            for e in graph.edges(*v) {
                let d = comp_of[petgraph::visit::EdgeRef::target(&e).index()];
                if d != c {
                    best = min_opt(best, comp_best[d]);
                }
            }
        }
        comp_best[c] = best;
    }
    (0..n)
        .map(|v| {
            let r = comp_best[comp_of[v]].expect("non-blocking graphs reach a cycle");
            match ext {
                Extremum::Min => r,
                Extremum::Max => -r,
            }
        })
        .collect()
}

fn min_opt(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Components above this size use policy iteration instead of Karp, whose
/// cost grows with the product of node and edge counts.
const KARP_MAX_NODES: usize = 512;

/// Edges of component `comp` in local indices `(src, dst, weight)`.
fn component_edges(
    graph: &DiGraph<(), i64>,
    nodes: &[NodeIndex],
    comp_of: &[usize],
    comp: usize,
) -> Vec<(usize, usize, i64)> {
    use petgraph::visit::EdgeRef;

    let mut local = std::collections::HashMap::with_capacity(nodes.len());
    for (i, v) in nodes.iter().enumerate() {
        local.insert(v.index(), i);
    }
    let mut internal = Vec::new();
    for (i, v) in nodes.iter().enumerate() {
        for e in graph.edges(*v) {
            let t = e.target().index();
            if comp_of[t] == comp {
                internal.push((i, local[&t], *e.weight()));
            }
        }
    }
    internal
}

/// Minimum cycle mean of one strongly connected component given by its
/// `m` nodes and internal edges, or `None` for a single node without a
/// self-loop.
fn component_min_mean(m: usize, internal: &[(usize, usize, i64)]) -> Option<Rational> {
    if internal.is_empty() {
        None
    } else if m <= KARP_MAX_NODES {
        karp_min_mean(m, internal)
    } else {
        howard_min_mean(m, internal)
    }
}

/// Karp's algorithm. Uses two sweeps over the path-length table so memory
/// stays linear in the component size.
fn karp_min_mean(m: usize, internal: &[(usize, usize, i64)]) -> Option<Rational> {
    const INF: i64 = i64::MAX;
    let relax = |prev: &[i64], next: &mut [i64]| {
        next.iter_mut().for_each(|d| *d = INF);
        for &(u, v, w) in internal {
            if prev[u] != INF {
                let cand = prev[u] + w;
                if cand < next[v] {
                    next[v] = cand;
                }
            }
        }
    };

    let mut prev = vec![INF; m];
    let mut next = vec![INF; m];
    prev[0] = 0;
    for _ in 0..m {
        relax(&prev, &mut next);
        std::mem::swap(&mut prev, &mut next);
    }
    let d_m = prev.clone();

    // worst[v] = max_k (D_m(v) - D_k(v)) / (m - k), kept as unreduced
    // (numerator, denominator) pairs; denominators are positive, so
    // comparison is cross-multiplication.
    let greater = |a: (i64, i64), b: (i64, i64)| {
        i128::from(a.0) * i128::from(b.1) > i128::from(b.0) * i128::from(a.1)
    };
    let mut worst: Vec<Option<(i64, i64)>> = vec![None; m];
    let mut d_k = vec![INF; m];
    d_k[0] = 0;
    for k in 0..m {
        let den = (m - k) as i64;
        for v in 0..m {
            if d_m[v] != INF && d_k[v] != INF {
                let r = (d_m[v] - d_k[v], den);
                match worst[v] {
                    Some(w) if !greater(r, w) => {}
                    _ => worst[v] = Some(r),
                }
            }
        }
        relax(&d_k, &mut next);
        std::mem::swap(&mut d_k, &mut next);
    }
    worst
        .into_iter()
        .flatten()
        .reduce(|a, b| if greater(a, b) { b } else { a })
        .map(|(n, d)| Rational::new(n, d))
}

/// Howard's policy iteration for the minimum cycle mean, in exact integer
/// arithmetic. Each node fixes one out-edge; the policy graph is evaluated
/// to a cycle mean `λ = p/q` per node and a potential `x` stored scaled by
/// `q`, then improved first on `λ` and, when no `λ` can drop, on `x`.
fn howard_min_mean(m: usize, internal: &[(usize, usize, i64)]) -> Option<Rational> {
    if internal.is_empty() {
        return None;
    }
    let mut start = vec![0usize; m + 1];
    for &(u, _, _) in internal {
        start[u + 1] += 1;
    }
    for i in 0..m {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut dst = vec![0usize; internal.len()];
    let mut wgt = vec![0i64; internal.len()];
    for &(u, v, w) in internal {
        dst[fill[u]] = v;
        wgt[fill[u]] = w;
        fill[u] += 1;
    }
    if (0..m).any(|u| start[u] == start[u + 1]) {
        return karp_min_mean(m, internal);
    }
    let less = |a: (i64, i64), b: (i64, i64)| {
        i128::from(a.0) * i128::from(b.1) < i128::from(b.0) * i128::from(a.1)
    };

    let mut policy: Vec<usize> = (0..m)
        .map(|u| (start[u]..start[u + 1]).min_by_key(|&e| wgt[e]).expect("out-edge"))
        .collect();
    let mut lam = vec![(0i64, 1i64); m];
    let mut pot = vec![0i64; m];
    let mut state = vec![0u8; m];
    let mut path = Vec::new();
    loop {
        // Evaluate the policy graph.
        state.iter_mut().for_each(|s| *s = 0);
        for s in 0..m {
            if state[s] != 0 {
                continue;
            }
            path.clear();
            let mut v = s;
            while state[v] == 0 {
                state[v] = 1;
                path.push(v);
                v = dst[policy[v]];
            }
            if state[v] == 1 {
                let pos = path.iter().position(|&u| u == v).expect("on path");
                let cycle = &path[pos..];
                let len = cycle.len() as i64;
                let total: i64 = cycle.iter().map(|&c| wgt[policy[c]]).sum();
                let g = total.gcd(&len);
                let (p, q) = (total / g, len / g);
                pot[cycle[0]] = 0;
                for i in (1..cycle.len()).rev() {
                    let c = cycle[i];
                    let next = cycle[(i + 1) % cycle.len()];
                    pot[c] = wgt[policy[c]] * q - p + pot[next];
                }
                for &c in cycle {
                    lam[c] = (p, q);
                    state[c] = 2;
                }
                path.truncate(pos);
            }
            for &u in path.iter().rev() {
                let t = dst[policy[u]];
                let (p, q) = lam[t];
                lam[u] = (p, q);
                pot[u] = wgt[policy[u]] * q - p + pot[t];
                state[u] = 2;
            }
        }

        // Improve on cycle means first.
        let mut changed = false;
        for u in 0..m {
            let mut best = policy[u];
            let mut best_lam = lam[u];
            for e in start[u]..start[u + 1] {
                if less(lam[dst[e]], best_lam) {
                    best = e;
                    best_lam = lam[dst[e]];
                }
            }
            if best != policy[u] {
                policy[u] = best;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        // Then on potentials within the same cycle-mean class.
        for u in 0..m {
            let (p, q) = lam[u];
            let mut best = policy[u];
            let mut best_val = pot[u];
            for e in start[u]..start[u + 1] {
                let t = dst[e];
                if lam[t] == (p, q) {
                    let val = wgt[e] * q - p + pot[t];
                    if val < best_val {
                        best = e;
                        best_val = val;
                    }
                }
            }
            if best != policy[u] {
                policy[u] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    lam.into_iter()
        .reduce(|a, b| if less(b, a) { b } else { a })
        .map(|(p, q)| Rational::new(p, q))
}

/// Incremental value iteration `v_{t+1}(s) = max_u min_{(d,w)} (w + v_t(d))`.
struct ValueIteration<'a> {
    groups: &'a [Vec<ActionGroup>],
    prev: Vec<i64>,
    cur: Vec<i64>,
    t: u64,
}

impl<'a> ValueIteration<'a> {
    fn new(groups: &'a [Vec<ActionGroup>]) -> Self {
        let n = groups.len();
        Self {
            groups,
            prev: vec![0; n],
            cur: vec![0; n],
            t: 0,
        }
    }

    fn advance_to(&mut self, horizon: u64) {
        let mut next = vec![0i64; self.cur.len()];
        while self.t < horizon {
            for (s, acts) in self.groups.iter().enumerate() {
                next[s] = acts
                    .iter()
                    .map(|g| {
                        g.moves
                            .iter()
                            .map(|&(d, w)| w + self.cur[d])
                            .min()
                            .expect("action groups are non-empty")
                    })
                    .max()
                    .expect("non-blocking game");
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
            std::mem::swap(&mut self.cur, &mut next);
            self.t += 1;
        }
    }
}

/// Finite-horizon values `v_T` rounded to the nearest rationals with
/// denominator at most `n`. Exact once `T ≥ 4 n³ W`.
pub fn value_iteration_rounded(game: &WeightedGame, horizon: u64) -> Result<Vec<Rational>> {
    game.check_non_blocking()?;
    if horizon == 0 {
        return Err(Error::InvalidSpec("horizon must be positive".into()));
    }
    let groups = game.action_groups();
    let mut vi = ValueIteration::new(&groups);
    vi.advance_to(horizon);
    Ok(round_values(&vi.cur, horizon, game.n_states()))
}

fn round_values(v: &[i64], horizon: u64, max_den: usize) -> Vec<Rational> {
    let t = horizon as i128;
    v.iter()
        .map(|&total| {
            let total = total as i128;
            let mut best: Option<(i128, i128, i128, i128)> = None; // (err_num, err_den, p, q)
            for q in 1..=max_den as i128 {
                // p = round(total * q / t)
                let p = (2 * total * q + t).div_euclid(2 * t);
                let err_num = (total * q - p * t).abs();
                let err_den = q * t;
                let better = match best {
                    None => true,
                    Some((en, ed, _, _)) => err_num * ed < en * err_den,
                };
                if better {
                    best = Some((err_num, err_den, p, q));
                }
            }
            let (_, _, p, q) = best.expect("max_den >= 1");
            Rational::new(p as i64, q as i64)
        })
        .collect()
}

fn zwick_paterson_horizon(game: &WeightedGame) -> u64 {
    let n = game.n_states() as u128;
    let w = game.max_abs_weight().max(1) as u128;
    (4 * n * n * n * w).min(u64::MAX as u128) as u64
}

/// Solves the mean-payoff game: exact per-state values, the game value
/// (minimum over initial states) and a positional optimal strategy for
/// player 0. Ties between actions go to the smallest action index.
pub fn solve_mean_payoff(game: &WeightedGame) -> Result<GameValues> {
    game.check_non_blocking()?;
    let n = game.n_states();
    let groups = game.action_groups();
    let bound = zwick_paterson_horizon(game);
    let mut vi = ValueIteration::new(&groups);
    let mut horizon = bound.min(64.max(4 * n as u64));

    let mut previous: Option<Vec<Rational>> = None;
    loop {
        vi.advance_to(horizon);
        let greedy = greedy_strategies(&groups, &vi.prev);
        let mut certified = certify(game, &groups, &greedy.0, &greedy.1).map(|v| (v, greedy.0));
        if certified.is_none() {
            // Greedy play can settle on a suboptimal bias. Once the rounded
            // iterate stops moving, rebuild both strategies from energy games.
            let candidate = round_values(&vi.cur, horizon, n);
            if previous.as_ref() == Some(&candidate) {
                if let Some((s0, s1)) = energy_strategies(&groups, &candidate) {
                    certified = certify(game, &groups, &s0, &s1).map(|v| (v, s0));
                }
            }
            previous = Some(candidate);
        }
        if let Some((values, strategy)) = certified {
            return Ok(GameValues {
                game_value: min_over_initial(game, &values),
                values,
                strategy,
                horizon,
                certified: true,
            });
        }
        if horizon >= bound {
            break;
        }
        horizon = horizon.saturating_mul(2).min(bound);
    }

    let values = round_values(&vi.cur, horizon, n);
    let strategy = extract_by_halving(game, &values)?;
    let check = adversarial_values(&game.restrict(&strategy)?)?;
    if check != values {
        return Err(Error::Internal(
            "extracted strategy does not secure the rounded values".into(),
        ));
    }
    Ok(GameValues {
        game_value: min_over_initial(game, &values),
        values,
        strategy,
        horizon,
        certified: false,
    })
}

/// Greedy actions for player 0 and greedy responses (one move per state and
/// action) for player 1 with respect to `v`.
fn greedy_strategies(groups: &[Vec<ActionGroup>], v: &[i64]) -> (Vec<u32>, Vec<Vec<usize>>) {
    let mut s0 = Vec::with_capacity(groups.len());
    let mut s1 = Vec::with_capacity(groups.len());
    for acts in groups {
        let mut best: Option<(i64, u32)> = None;
        let mut responses = Vec::with_capacity(acts.len());
        for g in acts {
            let (idx, val) = g
                .moves
                .iter()
                .enumerate()
                .map(|(i, &(d, w))| (i, w + v[d]))
                .min_by_key(|&(i, val)| (val, i))
                .expect("action groups are non-empty");
            responses.push(idx);
            if best.is_none_or(|(b, _)| val > b) {
                best = Some((val, g.action));
            }
        }
        s0.push(best.expect("non-blocking").1);
        s1.push(responses);
    }
    (s0, s1)
}

fn certify(
    game: &WeightedGame,
    groups: &[Vec<ActionGroup>],
    s0: &[u32],
    s1: &[Vec<usize>],
) -> Option<Vec<Rational>> {
    let lower = adversarial_values(&game.restrict(s0).ok()?).ok()?;

    let mut edges = Vec::new();
    for (s, acts) in groups.iter().enumerate() {
        for (g, &pick) in acts.iter().zip(&s1[s]) {
            let (d, w) = g.moves[pick];
            edges.push(crate::game::Edge::new(s, g.action, d, w));
        }
    }
    let responded = WeightedGame::new(
        game.n_states(),
        game.initial().to_vec(),
        edges,
        game.output().to_vec(),
    )
    .ok()?;
    let upper = cooperative_values(&responded).ok()?;
    (lower == upper).then_some(lower)
}

const TOP: i64 = i64::MAX;

/// Least energy credit per state for keeping running sums of the scaled
/// weights `q w − p` (player 0 in control) or `p − q w` (player 1 in
/// control) bounded below, by progress-measure lifting. [`TOP`] marks states
/// where no finite credit suffices, i.e. the value is below (resp. above)
/// `p/q`.
fn energy_credits(groups: &[Vec<ActionGroup>], p: i64, q: i64, player0: bool) -> Vec<i64> {
    let n = groups.len();
    let scaled = |w: i64| if player0 { q * w - p } else { p - q * w };
    let cap = n as i64
        * groups
            .iter()
            .flatten()
            .flat_map(|g| g.moves.iter().map(|&(_, w)| scaled(w).abs()))
            .max()
            .unwrap_or(0);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, acts) in groups.iter().enumerate() {
        for &(d, _) in acts.iter().flat_map(|g| &g.moves) {
            preds[d].push(s);
        }
    }
    let mut credit = vec![0i64; n];
    let mut queued = vec![true; n];
    let mut work: std::collections::VecDeque<usize> = (0..n).collect();
    while let Some(s) = work.pop_front() {
        queued[s] = false;
        let need = lift(&groups[s], &credit, &scaled, cap, player0);
        if need > credit[s] {
            credit[s] = need;
            for &u in &preds[s] {
                if !queued[u] {
                    queued[u] = true;
                    work.push_back(u);
                }
            }
        }
    }
    credit
}

/// Credit needed after one move into `d` with scaled weight `w`.
fn step_credit(credit: &[i64], d: usize, w: i64, cap: i64) -> i64 {
    match credit[d] {
        TOP => TOP,
        c => match (c - w).max(0) {
            x if x > cap => TOP,
            x => x,
        },
    }
}

/// Credit needed at a state: the controller picks the cheapest option, the
/// opponent the most expensive one.
fn lift(acts: &[ActionGroup], credit: &[i64], scaled: &impl Fn(i64) -> i64, cap: i64, player0: bool) -> i64 {
    let per_action = acts.iter().map(|g| {
        let steps = g.moves.iter().map(|&(d, w)| step_credit(credit, d, scaled(w), cap));
        if player0 { steps.max() } else { steps.min() }.expect("action groups are non-empty")
    });
    if player0 { per_action.min() } else { per_action.max() }.expect("non-blocking game")
}

/// Positional strategies for both players that are optimal if `values` are
/// the game values: every state plays the energy-game strategy for the
/// threshold equal to its own value. `None` when some state cannot hold its
/// value, which means `values` is wrong.
fn energy_strategies(groups: &[Vec<ActionGroup>], values: &[Rational]) -> Option<(Vec<u32>, Vec<Vec<usize>>)> {
    let n = groups.len();
    let mut classes = values.to_vec();
    classes.sort();
    classes.dedup();
    let mut s0 = vec![0u32; n];
    let mut s1 = vec![Vec::new(); n];
    for c in classes {
        let (p, q) = (*c.numer(), *c.denom());
        let low = energy_credits(groups, p, q, true);
        let high = energy_credits(groups, p, q, false);
        let cap0 = |w: i64| q * w - p;
        let cap1 = |w: i64| p - q * w;
        for s in (0..n).filter(|&s| values[s] == c) {
            if low[s] == TOP || high[s] == TOP {
                return None;
            }
            s0[s] = groups[s]
                .iter()
                .min_by_key(|g| {
                    g.moves
                        .iter()
                        .map(|&(d, w)| step_credit(&low, d, cap0(w), TOP - 1))
                        .max()
                        .expect("action groups are non-empty")
                })
                .expect("non-blocking game")
                .action;
            s1[s] = groups[s]
                .iter()
                .map(|g| {
                    (0..g.moves.len())
                        .min_by_key(|&i| step_credit(&high, g.moves[i].0, cap1(g.moves[i].1), TOP - 1))
                        .expect("action groups are non-empty")
                })
                .collect();
        }
    }
    Some((s0, s1))
}

/// Narrows each state's action set by halves, keeping a half whenever the
/// restricted game still has the same values.
fn extract_by_halving(game: &WeightedGame, values: &[Rational]) -> Result<Vec<u32>> {
    let mut allowed = game.actions();
    for s in 0..game.n_states() {
        while allowed[s].len() > 1 {
            let half = allowed[s].len() / 2;
            let first: Vec<u32> = allowed[s][..half].to_vec();
            let mut trial = allowed.clone();
            trial[s] = first.clone();
            let sub = game.filter_edges(|e| trial[e.src].contains(&e.action));
            let sub_values = solve_mean_payoff(&sub)?.values;
            if sub_values == values {
                allowed[s] = first;
            } else {
                allowed[s] = allowed[s][half..].to_vec();
            }
        }
    }
    Ok(allowed.into_iter().map(|a| a[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Edge;

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn energy_credits_separate_at_the_cycle_mean() {
        // A two-cycle with weights 1 and 3 has mean 2.
        let g = WeightedGame::with_all_initial(2, vec![Edge::new(0, 1, 1, 1), Edge::new(1, 1, 0, 3)]).unwrap();
        let groups = g.action_groups();
        assert_eq!(energy_credits(&groups, 2, 1, true), vec![1, 0]);
        assert_eq!(energy_credits(&groups, 2, 1, false), vec![0, 1]);
        assert!(energy_credits(&groups, 5, 2, true).iter().all(|&c| c == TOP));
        assert!(energy_credits(&groups, 3, 2, false).iter().all(|&c| c == TOP));
        assert!(energy_strategies(&groups, &[r(2, 1), r(2, 1)]).is_some());
        assert!(energy_strategies(&groups, &[r(5, 2), r(5, 2)]).is_none());
    }

    #[test]
    fn single_self_loop() {
        let g = WeightedGame::with_all_initial(1, vec![Edge::new(0, 1, 0, 3)]).unwrap();
        let v = solve_mean_payoff(&g).unwrap();
        assert_eq!(v.values, vec![r(3, 1)]);
        assert_eq!(v.strategy, vec![1]);
        assert_eq!(v.game_value, r(3, 1));
    }

    #[test]
    fn constant_weight_cycle() {
        let g = WeightedGame::with_all_initial(
            2,
            vec![Edge::new(0, 1, 1, 2), Edge::new(1, 1, 0, 2)],
        )
        .unwrap();
        let v = solve_mean_payoff(&g).unwrap();
        assert_eq!(v.values, vec![r(2, 1), r(2, 1)]);
    }

    #[test]
    fn three_cycle_mean() {
        let g = WeightedGame::with_all_initial(
            3,
            vec![
                Edge::new(0, 1, 1, 1),
                Edge::new(1, 1, 2, 2),
                Edge::new(2, 1, 0, 3),
            ],
        )
        .unwrap();
        assert_eq!(min_cycle_mean(&g, None).unwrap(), r(2, 1));
        assert_eq!(cooperative_upper_value(&g).unwrap(), r(2, 1));
    }

    #[test]
    fn unreachable_cycles_are_ignored() {
        // 0 loops with weight 7; 1 <-> 2 has mean 1 but is unreachable from 0.
        let g = WeightedGame::new(
            3,
            vec![0],
            vec![
                Edge::new(0, 1, 0, 7),
                Edge::new(1, 1, 2, 1),
                Edge::new(2, 1, 1, 1),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(min_cycle_mean(&g, None).unwrap(), r(7, 1));
    }

    #[test]
    fn cooperative_value_max_then_min() {
        // s0 reaches a mean-5 loop and a mean-2 loop; s1 reaches only the mean-2 loop.
        let edges = vec![
            Edge::new(0, 1, 2, 1),
            Edge::new(0, 2, 3, 1),
            Edge::new(1, 1, 3, 1),
            Edge::new(2, 1, 2, 5),
            Edge::new(3, 1, 3, 2),
        ];
        let one = WeightedGame::new(4, vec![0], edges.clone(), vec![]).unwrap();
        assert_eq!(cooperative_upper_value(&one).unwrap(), r(5, 1));
        let two = WeightedGame::new(4, vec![0, 1], edges, vec![]).unwrap();
        assert_eq!(cooperative_upper_value(&two).unwrap(), r(2, 1));
    }

    #[test]
    fn adversary_picks_worst_transition() {
        // Action 1 at s0 may lead to a weight-1 sink or a weight-4 sink; action 2
        // leads surely to a weight-3 sink.
        let g = WeightedGame::with_all_initial(
            4,
            vec![
                Edge::new(0, 1, 1, 0),
                Edge::new(0, 1, 2, 0),
                Edge::new(0, 2, 3, 0),
                Edge::new(1, 1, 1, 1),
                Edge::new(2, 1, 2, 4),
                Edge::new(3, 1, 3, 3),
            ],
        )
        .unwrap();
        let v = solve_mean_payoff(&g).unwrap();
        assert_eq!(v.values[0], r(3, 1));
        assert_eq!(v.strategy[0], 2);
        assert_eq!(v.game_value, r(1, 1));
    }

    #[test]
    fn blocking_game_is_rejected() {
        let g = WeightedGame::with_all_initial(2, vec![Edge::new(0, 1, 1, 1)]).unwrap();
        assert!(matches!(solve_mean_payoff(&g), Err(Error::MalformedGame(_))));
        assert!(matches!(min_cycle_mean(&g, None), Err(Error::MalformedGame(_))));
    }

    #[test]
    fn halving_extraction_matches_certified_strategy_value() {
        let g = WeightedGame::with_all_initial(
            3,
            vec![
                Edge::new(0, 1, 0, 1),
                Edge::new(0, 2, 1, 2),
                Edge::new(0, 3, 2, 0),
                Edge::new(1, 1, 0, 4),
                Edge::new(2, 1, 2, 2),
            ],
        )
        .unwrap();
        let solved = solve_mean_payoff(&g).unwrap();
        let strategy = extract_by_halving(&g, &solved.values).unwrap();
        let secured = adversarial_values(&g.restrict(&strategy).unwrap()).unwrap();
        assert_eq!(secured, solved.values);
        assert_eq!(solved.values[0], r(3, 1));
    }

    #[test]
    fn rounding_picks_small_denominators() {
        assert_eq!(round_values(&[1000], 3000, 4), vec![r(1, 3)]);
        assert_eq!(round_values(&[-1501], 3000, 2), vec![r(-1, 2)]);
    }

    proptest::proptest! {
        #[test]
        fn policy_iteration_agrees_with_karp(
            n in 1usize..40,
            raw in proptest::collection::vec((0usize..40, 0usize..40, -6i64..9), 1..160),
        ) {
            // A Hamiltonian cycle keeps the graph strongly connected.
            let mut edges: Vec<(usize, usize, i64)> =
                (0..n).map(|i| (i, (i + 1) % n, 3)).collect();
            edges.extend(raw.into_iter().map(|(u, v, w)| (u % n, v % n, w)));
            proptest::prop_assert_eq!(howard_min_mean(n, &edges), karp_min_mean(n, &edges));
            let neg: Vec<_> = edges.iter().map(|&(u, v, w)| (u, v, -w)).collect();
            proptest::prop_assert_eq!(howard_min_mean(n, &neg), karp_min_mean(n, &neg));
        }
    }
}
