mod common;

use noughts::drl::{
    curve_csv, evaluate, select_action, train_policy, AgentConfig, Algorithm, Lookahead, Policy,
};
use noughts::env::acts::ActionSet;
use noughts::env::DialogueKit;
use noughts::features::Featurizer;
use noughts::game::Variant;
use noughts::nn::DenseNet;
use noughts::seed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn competitive_selection_resists_adversarial_q() {
    for (variant, probes) in [(Variant::Standard, 60_000), (Variant::Ultimate, 40_000)] {
        let c = common::adversarial_selection(variant, probes, 21);
        assert_eq!(c.violations, 0, "{variant}: {c:?}");
        assert!(c.with_winners > 100 && c.with_worst > 100, "{variant}: too few informative probes {c:?}");
    }
}

#[test]
fn lookahead_leaves_the_episode_untouched() {
    for variant in [Variant::Standard, Variant::Ultimate] {
        assert_eq!(common::lookahead_mutations(variant, 100_000, 22), 0, "{variant}");
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let z = common::replay_max_z(10_000, 1_000_000, 23);
    assert!(z < 5.0, "max |z| = {z}");
}

#[test]
fn full_exploration_is_uniform_over_candidates() {
    let p = common::exploration_p(100_000, 24);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn simulated_user_moves_uniformly() {
    for variant in [Variant::Standard, Variant::Ultimate] {
        let (k, p) = common::simulated_user_move_p(variant, 100_000, 25);
        assert!(k > 1);
        assert!(p > 0.01, "{variant}: p = {p} over {k} moves");
    }
}

#[test]
fn discount_propagates_one_step_back() {
    let (q0, q1) = common::chain_q(1.0, 20_000, 26);
    assert!((q1 - 1.0).abs() < 0.05, "Q(s1) = {q1}");
    assert!((q0 - 0.7).abs() < 0.05, "Q(s0) = {q0}");
}

fn quick(algorithm: Algorithm, seed: u64) -> AgentConfig {
    AgentConfig {
        algorithm,
        learning_steps: 4000,
        burn_in: 300,
        target_reset: 500,
        curve_every: 500,
        seed,
        ..AgentConfig::default()
    }
}

#[test]
fn seeded_training_is_bit_reproducible() {
    for algorithm in Algorithm::ALL {
        let kit = DialogueKit::builtin(Variant::Standard);
        let (a, out_a) = train_policy(&quick(algorithm, 31), kit.clone()).unwrap();
        let (b, out_b) = train_policy(&quick(algorithm, 31), kit.clone()).unwrap();
        assert_eq!(curve_csv(&out_a.curve), curve_csv(&out_b.curve), "{algorithm}");
        assert_eq!(a.net, b.net, "{algorithm}");
        let (c, _) = train_policy(&quick(algorithm, 32), kit).unwrap();
        assert_ne!(a.net, c.net, "{algorithm}: seed ignored");
    }
}

#[test]
fn training_stops_at_the_game_cap() {
    let config = AgentConfig {
        max_games: 7,
        ..quick(Algorithm::DqnVariant, 33)
    };
    let (_, out) = train_policy(&config, DialogueKit::builtin(Variant::Standard)).unwrap();
    assert_eq!(out.games, 7);
    assert!(out.steps < config.learning_steps);
}

#[test]
fn evaluation_rates_are_consistent() {
    let kit = DialogueKit::builtin(Variant::Standard);
    let (policy, _) = train_policy(&quick(Algorithm::CompetitiveTemporal, 34), kit).unwrap();
    let r = evaluate(&policy, 300, 35).unwrap();
    assert_eq!(r.games, 300);
    assert!((r.win_rate + r.draw_rate + r.loss_rate - 1.0).abs() < 1e-12, "{r:?}");
    assert!((r.task_success - (r.win_rate + r.draw_rate)).abs() < 1e-12);
    assert_eq!(r, evaluate(&policy, 300, 35).unwrap());
}

#[test]
fn untrained_agent_dialogues_stay_within_the_step_limit() {
    let kit = DialogueKit::builtin(Variant::Standard);
    let f = Featurizer::new(Variant::Standard, true);
    let mut rng = seed::stream(36, "init");
    let net = DenseNet::q_network(f.dim(), 16, kit.catalogue().len(), &mut rng);
    let policy = Policy::new(Algorithm::CompetitiveTemporal, net, kit.clone()).unwrap();
    let r = evaluate(&policy, 50, 37).unwrap();
    assert!(r.avg_dialogue_length <= 100.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn selection_ignores_shared_positive_scaling(
        q in prop::collection::vec(-10.0f64..10.0, 20),
        bits in 1u32..(1 << 20),
        worst_bits in 0u32..(1 << 20),
        win_bits in 0u32..(1 << 20),
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
        use_lookahead in any::<bool>(),
    ) {
        let set = |b: u32| -> ActionSet { (0..20).filter(|i| b >> i & 1 == 1).collect() };
        let cands = set(bits);
        let la = Lookahead { winners: set(win_bits & bits & 0b111), worst: set(worst_bits & bits) };
        let la = use_lookahead.then_some(la);
        let scaled: Vec<f64> = q.iter().map(|v| v * scale + shift).collect();
        let mut r1 = ChaCha8Rng::seed_from_u64(0);
        let mut r2 = ChaCha8Rng::seed_from_u64(0);
        let a = select_action(&q, cands, la.as_ref(), 0.0, &mut r1).unwrap();
        let b = select_action(&scaled, cands, la.as_ref(), 0.0, &mut r2).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(cands.contains(a));
        if let Some(la) = la {
            if !la.winners.is_empty() {
                prop_assert!(la.winners.contains(a));
            } else if !cands.difference(la.worst).is_empty() {
                prop_assert!(!la.worst.contains(a));
            }
        }
    }
}
