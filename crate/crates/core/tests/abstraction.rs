mod common;

use common::*;
use rand::Rng;
use stc_core::abstraction::{
    build_model, discover_states, make_backend, ActionSet, BackendOptions, TrafficModel,
};
use stc_core::deadline::{DeadlineWord, Petc};
use stc_core::lti::TriggerSpec;
use stc_core::mpg::{
    adversarial_values, cooperative_upper_value, min_cycle_mean, solve_mean_payoff, value_iteration_rounded,
};

fn model(petc: &Petc, backend: &str, l: usize) -> TrafficModel {
    let opts = BackendOptions {
        budget: 20_000,
        seed: 5,
        witness_cap: 64,
    };
    let b = make_backend(backend, &opts).unwrap();
    build_model(petc, l, b.as_ref(), ActionSet::All, opts.witness_cap).unwrap()
}

fn forced_petc() -> Petc {
    let trig = TriggerSpec::predictive_lyapunov(&example_plant(), example_p(), example_q_lyap(), 0.8, H, 1).unwrap();
    Petc::new(example_plant(), trig).unwrap()
}

#[test]
fn single_check_trigger_gives_one_self_loop() {
    let petc = forced_petc();
    for l in 1..=3 {
        let states = discover_states(&petc, l, 500, 0).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].word, DeadlineWord::new(vec![1; l]));
        let m = model(&petc, "sampling", l);
        assert_eq!(m.n_states(), 1);
        let edges = m.game().edges();
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].src, edges[0].action, edges[0].dst, edges[0].weight), (0, 1, 0, 1));
        assert_eq!(m.restrict_to_petc().unwrap(), m);
    }
}

#[test]
fn one_sample_gives_its_own_word() {
    let petc = example_petc(0.8);
    let states = discover_states(&petc, 2, 1, 9).unwrap();
    assert_eq!(states.len(), 1);
    let r = &states[0];
    assert!(r.witnesses.iter().all(|w| petc.deadline_sequence(w, 2) == r.word));
}

#[test]
fn models_are_well_formed_for_both_backends() {
    let petc = example_petc(0.8);
    for backend in ["sampling", "planar"] {
        for l in 1..=2 {
            let m = model(&petc, backend, l);
            let g = m.game();
            g.check_non_blocking().unwrap();
            assert_eq!(g.initial(), (0..m.n_states()).collect::<Vec<_>>().as_slice());
            for s in 0..m.n_states() {
                let word = &m.words()[s];
                assert_eq!(word.len(), l);
                // Stored witnesses re-verify.
                assert!(petc.in_region(m.witness(s), word), "{backend} {word}");
            }
            let actions = g.actions();
            for (s, acts) in actions.iter().enumerate() {
                let expected: Vec<u32> = (1..=m.words()[s].first()).collect();
                assert_eq!(acts, &expected, "{backend} l={l} state {s}");
            }
            for e in g.edges() {
                assert_eq!(e.weight, i64::from(e.action));
            }
            let restricted = m.restrict_to_petc().unwrap();
            for e in restricted.game().edges() {
                assert_eq!(e.action, m.words()[e.src].first());
            }
        }
    }
}

#[test]
fn concrete_action_sets_match_abstract_ones() {
    let petc = example_petc(0.8);
    let m = model(&petc, "planar", 2);
    let actions = m.game().actions();
    let mut r = rng(4);
    for _ in 0..1000 {
        let t: f64 = r.random_range(0.0..std::f64::consts::TAU);
        let x = [t.cos(), t.sin()];
        let word = petc.deadline_sequence(&x, 2);
        let s = m.state_of(&word).expect("planar regions cover every direction");
        assert_eq!(actions[s], (1..=petc.deadline(&x)).collect::<Vec<_>>());
    }
}

#[test]
fn concrete_steps_are_edges_of_the_exact_model() {
    let petc = example_petc(0.8);
    for l in 1..=2 {
        let m = model(&petc, "planar", l);
        let check = m.coverage_check(&petc, 1000, 17);
        assert_eq!(check.checked, 1000);
        assert!(check.is_clean(), "l={l}: {check:?}");
    }
}

#[test]
fn abstractions_satisfy_the_sandwich() {
    let petc = example_petc(0.8);
    for backend in ["sampling", "planar"] {
        for l in 1..=2 {
            let m = model(&petc, backend, l);
            let petc_value = min_cycle_mean(m.restrict_to_petc().unwrap().game(), None).unwrap();
            let v = solve_mean_payoff(m.game()).unwrap().game_value;
            let upper = cooperative_upper_value(m.game()).unwrap();
            assert!(petc_value <= v && v <= upper, "{backend} l={l}: {petc_value} {v} {upper}");
        }
    }
}

#[test]
fn model_files_keep_a_stable_layout() {
    let petc = example_petc(0.8);
    let m = model(&petc, "sampling", 1);
    let text = serde_json::to_string(&m.to_json()).unwrap();
    let keys = ["\"l\":", "\"h\":", "\"kmax\":", "\"states\":", "\"edges\":"];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text:.200}");
    assert!(text.contains("{\"id\":0,\"word\":["));
    let back = TrafficModel::from_json(serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back, m);
    assert_eq!(serde_json::to_string(&back.to_json()).unwrap(), text);
}

#[test]
fn tied_greedy_strategies_are_repaired_exactly() {
    // Greedy value-iteration strategies stall on this game; the long-horizon
    // iterate pins the values independently.
    let petc = example_petc(0.9);
    let m = model(&petc, "planar", 3);
    let solved = solve_mean_payoff(m.game()).unwrap();
    assert!(solved.certified);
    let reference = value_iteration_rounded(m.game(), 1_000_000).unwrap();
    assert_eq!(solved.values, reference);
    let secured = adversarial_values(&m.game().restrict(&solved.strategy).unwrap()).unwrap();
    assert_eq!(secured, solved.values);
}
