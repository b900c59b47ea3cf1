mod common;

use common::*;
use proptest::prelude::*;
use stc_core::game::{Edge, WeightedGame};
use stc_core::mpg::{
    cooperative_upper_value, min_cycle_mean, solve_mean_payoff, value_iteration_rounded,
};
use stc_core::rational::Rational;

fn zp_horizon(game: &WeightedGame) -> u64 {
    let n = game.n_states() as u64;
    4 * n * n * n * game.max_abs_weight().max(1) as u64
}

#[test]
fn documented_small_cases() {
    let r = |p, q| Rational::new(p, q);
    let g = WeightedGame::with_all_initial(1, vec![Edge::new(0, 1, 0, 3)]).unwrap();
    let v = solve_mean_payoff(&g).unwrap();
    assert_eq!((v.values.clone(), v.strategy.clone()), (vec![r(3, 1)], vec![1]));

    let g = WeightedGame::with_all_initial(2, vec![Edge::new(0, 1, 1, 2), Edge::new(1, 1, 0, 2)]).unwrap();
    assert_eq!(solve_mean_payoff(&g).unwrap().values, vec![r(2, 1); 2]);

    let g = WeightedGame::with_all_initial(
        3,
        vec![Edge::new(0, 1, 1, 1), Edge::new(1, 1, 2, 2), Edge::new(2, 1, 0, 3)],
    )
    .unwrap();
    assert_eq!(min_cycle_mean(&g, None).unwrap(), r(2, 1));

    // s0 reaches cycles of mean 5 and 2; s1 only the mean-2 cycle.
    let edges = vec![
        Edge::new(0, 1, 2, 0),
        Edge::new(0, 2, 3, 0),
        Edge::new(2, 1, 2, 5),
        Edge::new(3, 1, 3, 2),
        Edge::new(1, 1, 3, 0),
    ];
    let g = WeightedGame::new(4, vec![0], edges.clone(), Vec::new()).unwrap();
    assert_eq!(cooperative_upper_value(&g).unwrap(), r(5, 1));
    let g = WeightedGame::new(4, vec![0, 1], edges, Vec::new()).unwrap();
    assert_eq!(cooperative_upper_value(&g).unwrap(), r(2, 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn values_match_positional_strategy_enumeration(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), 6, 3, 2, 1..=5);
        let solved = solve_mean_payoff(&g).unwrap();
        let oracle = exhaustive_game_values(&g);
        prop_assert_eq!(&solved.values, &oracle);
        let game_value = g.initial().iter().map(|&s| oracle[s]).min().unwrap();
        prop_assert_eq!(solved.game_value, game_value);
    }

    #[test]
    fn cycle_means_match_simple_cycle_enumeration(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), 8, 2, 2, -4..=9);
        prop_assert_eq!(min_cycle_mean(&g, None).unwrap(), enumerated_min_cycle_mean(&g));
        prop_assert_eq!(cooperative_upper_value(&g).unwrap(), enumerated_upper_value(&g));
    }

    #[test]
    fn game_value_is_sandwiched(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), 10, 4, 3, 1..=9);
        let v = solve_mean_payoff(&g).unwrap().game_value;
        prop_assert!(min_cycle_mean(&g, None).unwrap() <= v);
        prop_assert!(v <= cooperative_upper_value(&g).unwrap());
    }

    #[test]
    fn optimal_strategy_attains_the_game_value(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), 12, 4, 3, -3..=9);
        let solved = solve_mean_payoff(&g).unwrap();
        let legal = g.actions();
        for (s, a) in solved.strategy.iter().enumerate() {
            prop_assert!(legal[s].contains(a));
        }
        prop_assert_eq!(min_cycle_mean(&g, Some(&solved.strategy)).unwrap(), solved.game_value);
    }

    #[test]
    fn rounding_is_stable_under_doubling(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), 6, 3, 2, 1..=5);
        let t = zp_horizon(&g);
        let once = value_iteration_rounded(&g, t).unwrap();
        prop_assert_eq!(&once, &value_iteration_rounded(&g, 2 * t).unwrap());
        prop_assert_eq!(&once, &solve_mean_payoff(&g).unwrap().values);
        for v in &once {
            prop_assert!(*v.denom() >= 1 && *v.denom() <= g.n_states() as i64);
        }
    }
}
