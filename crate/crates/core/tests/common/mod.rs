//! Oracles shared by the property tests and the acceptance run. Each
//! returns what it measured; the callers decide what passes.
#![allow(dead_code)]

use std::sync::Arc;

use noughts::drl::{
    candidates_for, lookahead_sets, select_action, train, AgentConfig, Algorithm, Experience, Lookahead, ReplayMemory,
    Task, TrainError,
};
use noughts::env::acts::{ActCatalogue, ActionSet};
use noughts::env::{simulated_user_step, DialogueKit, Environment, EpisodeState, UserPrompt};
use noughts::game::{CellId, GameState, GameStatus, Mark, Player, Variant};
use noughts::nn::{gradient_check, Activation, ConvNet, ConvShape, DenseNet, Loss, Sample, Target};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Default)]
pub struct PlayoutCheck {
    pub playouts: usize,
    pub positions: usize,
    pub failures: usize,
}

/// Random playouts checking `undo(apply(s, m)) == s`, that `play`/`unplay`
/// agree with `apply`/`undo`, and that legal moves are empty cells in open
/// subgrids.
pub fn apply_undo_playouts(variant: Variant, playouts: usize, seed: u64) -> PlayoutCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = PlayoutCheck {
        playouts,
        ..Default::default()
    };
    let mut legal = Vec::new();
    for _ in 0..playouts {
        let first = if rng.gen() { Player::Cross } else { Player::Nought };
        let mut s = GameState::new(variant, first);
        while s.status() == GameStatus::Ongoing {
            legal.clear();
            s.legal_moves_into(&mut legal);
            if legal.is_empty() {
                check.failures += 1;
                break;
            }
            let bad_move = legal.iter().any(|&c| {
                s.cell(c) != Mark::Empty
                    || (variant == Variant::Ultimate && !s.macro_board()[c.index() / 9].is_open())
            });
            let m = *legal.choose(&mut rng).expect("non-empty");
            let next = s.apply(m).expect("legal");
            let round_trip = next.undo().is_ok_and(|back| back == s);
            let before = s.clone();
            s.play(m).expect("legal");
            let in_place = s == next;
            let unplayed = {
                let mut t = s.clone();
                t.unplay().is_ok() && t == before
            };
            check.positions += 1;
            if bad_move || !round_trip || !in_place || !unplayed {
                check.failures += 1;
            }
        }
    }
    check
}

/// Independent rules for the 3x3 board: 0 empty, 1 first player, 2 second.
fn scan_winner(b: &[u8; 9]) -> u8 {
    const L: [[usize; 3]; 8] = [[0, 1, 2], [3, 4, 5], [6, 7, 8], [0, 3, 6], [1, 4, 7], [2, 5, 8], [0, 4, 8], [2, 4, 6]];
    for l in L {
        if b[l[0]] != 0 && b[l[0]] == b[l[1]] && b[l[1]] == b[l[2]] {
            return b[l[0]];
        }
    }
    0
}

#[derive(Debug, Default)]
pub struct Enumeration {
    pub complete_games: u64,
    /// Perfect-play value for the first player: 1 win, 0 draw, -1 loss.
    pub root_value: i32,
    pub disagreements: u64,
    /// Exact outcome probabilities under uniformly random play by both sides.
    pub random_first_win: f64,
    pub random_second_win: f64,
    pub random_draw: f64,
}

/// Walks the whole standard game tree alongside an independent board,
/// comparing status and legal moves at every node.
pub fn enumerate_standard() -> Enumeration {
    let mut e = Enumeration::default();
    let mut s = GameState::new(Variant::Standard, Player::Cross);
    let mut b = [0u8; 9];
    e.root_value = walk(&mut s, &mut b, 1, 1.0, &mut e);
    e
}

fn walk(s: &mut GameState, b: &mut [u8; 9], turn: u8, p: f64, e: &mut Enumeration) -> i32 {
    let w = scan_winner(b);
    let full = b.iter().all(|&x| x != 0);
    let expected = match w {
        1 => GameStatus::Win(Player::Cross),
        2 => GameStatus::Win(Player::Nought),
        _ if full => GameStatus::Draw,
        _ => GameStatus::Ongoing,
    };
    if s.status() != expected {
        e.disagreements += 1;
    }
    if w != 0 || full {
        e.complete_games += 1;
        match w {
            1 => e.random_first_win += p,
            2 => e.random_second_win += p,
            _ => e.random_draw += p,
        }
        return match w {
            1 => 1,
            2 => -1,
            _ => 0,
        };
    }
    let empties: Vec<usize> = (0..9).filter(|&i| b[i] == 0).collect();
    let legal: Vec<usize> = s.legal_moves().expect("ongoing").iter().map(|c| c.index()).collect();
    if legal != empties {
        e.disagreements += 1;
    }
    let q = p / empties.len() as f64;
    let mut best = if turn == 1 { i32::MIN } else { i32::MAX };
    for i in empties {
        b[i] = turn;
        s.play(CellId::new(Variant::Standard, i).expect("in range")).expect("legal");
        let v = walk(s, b, 3 - turn, q, e);
        s.unplay().expect("just played");
        b[i] = 0;
        best = if turn == 1 { best.max(v) } else { best.min(v) };
    }
    best
}

/// Uniformly random standard games: (first-mover win rate, draw rate).
pub fn random_vs_random(games: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut wins, mut draws) = (0usize, 0usize);
    for _ in 0..games {
        let mut s = GameState::new(Variant::Standard, Player::Cross);
        while s.status() == GameStatus::Ongoing {
            let moves = s.legal_moves().expect("ongoing");
            s.play(*moves.choose(&mut rng).expect("non-empty")).expect("legal");
        }
        match s.status() {
            GameStatus::Win(Player::Cross) => wins += 1,
            GameStatus::Draw => draws += 1,
            _ => {}
        }
    }
    (wins as f64 / games as f64, draws as f64 / games as f64)
}

#[derive(Debug)]
pub struct GradientCase {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize, outputs: usize, loss: Loss) -> (Vec<Vec<f64>>, Vec<Target>) {
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let targets = (0..n)
        .map(|_| match loss {
            Loss::SelectedMse => Target::Selected {
                action: rng.gen_range(0..outputs),
                value: rng.gen_range(-5.0..5.0),
            },
            Loss::Hinge => Target::Class(rng.gen_range(0..outputs)),
        })
        .collect();
    (inputs, targets)
}

/// Central-difference checks on random small dense and conv networks.
pub fn gradient_cases(seed: u64) -> Vec<GradientCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    let dense: [&[usize]; 6] = [&[4, 3], &[5, 7, 3], &[6, 10, 4], &[73, 16, 12], &[3, 8, 8, 2], &[10, 5, 5, 5, 4]];
    for dims in dense {
        for loss in [Loss::SelectedMse, Loss::Hinge] {
            let mut acts = vec![Activation::Relu; dims.len() - 2];
            acts.push(Activation::Linear);
            let mut net = DenseNet::glorot(dims, &acts, &mut rng);
            let (inputs, targets) = random_batch(&mut rng, 3, dims[0], *dims.last().unwrap(), loss);
            let batch: Vec<Sample> = inputs
                .iter()
                .zip(&targets)
                .map(|(i, &t)| Sample { input: i, target: t })
                .collect();
            let r = gradient_check(&mut net, &batch, loss, 1e-5).expect("shapes agree");
            cases.push(GradientCase {
                name: format!("dense {dims:?} {loss:?}"),
                max_rel_error: r.max_rel_error,
                checked: r.checked,
            });
        }
    }
    let shapes = [
        ConvShape {
            size: 8,
            kernel1: 3,
            filters1: 2,
            pool1: 2,
            kernel2: 2,
            filters2: 3,
            pool2: 2,
            classes: 3,
        },
        ConvShape {
            size: 12,
            kernel1: 3,
            filters1: 3,
            pool1: 2,
            kernel2: 3,
            filters2: 4,
            pool2: 2,
            classes: 3,
        },
        ConvShape {
            size: 11,
            kernel1: 2,
            filters1: 2,
            pool1: 1,
            kernel2: 3,
            filters2: 2,
            pool2: 3,
            classes: 4,
        },
        ConvShape {
            size: 16,
            kernel1: 5,
            filters1: 4,
            pool1: 3,
            kernel2: 2,
            filters2: 5,
            pool2: 1,
            classes: 2,
        },
        ConvShape::default(),
    ];
    for shape in shapes {
        assert!(shape.is_valid(), "{shape:?}");
        for loss in [Loss::Hinge, Loss::SelectedMse] {
            let mut net = ConvNet::glorot(shape, &mut rng);
            let n = if shape == ConvShape::default() { 1 } else { 2 };
            let (inputs, targets) = random_batch(&mut rng, n, shape.size * shape.size, shape.classes, loss);
            let batch: Vec<Sample> = inputs
                .iter()
                .zip(&targets)
                .map(|(i, &t)| Sample { input: i, target: t })
                .collect();
            let r = gradient_check(&mut net, &batch, loss, 1e-5).expect("shapes agree");
            cases.push(GradientCase {
                name: format!("conv {} {loss:?}", shape.describe()),
                max_rel_error: r.max_rel_error,
                checked: r.checked,
            });
        }
    }
    cases
}

/// Drives an environment with random phase acts (mostly permitted ones)
/// and hands every robot decision point to `visit`.
pub fn random_probes(variant: Variant, probes: usize, seed: u64, mut visit: impl FnMut(&Arc<DialogueKit>, &mut EpisodeState)) {
    let kit = DialogueKit::builtin(variant);
    let mut env = Environment::new(kit.clone(), ChaCha8Rng::seed_from_u64(seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    for _ in 0..probes {
        if env.state().is_terminal() {
            env.reset();
        }
        visit(&kit, env.state_mut());
        let permitted = env.state().permitted_acts();
        let pool = if rng.gen_bool(0.9) && !permitted.is_empty() {
            permitted
        } else {
            env.state().phase_acts()
        };
        let a = pool.nth(rng.gen_range(0..pool.len())).expect("non-empty");
        env.step(a).expect("episode running");
    }
}

#[derive(Debug, Default)]
pub struct SelectionCheck {
    pub probes: usize,
    pub with_winners: usize,
    pub with_worst: usize,
    pub violations: usize,
}

/// Greedy competitive selection with Q-values rigged towards `worst`.
pub fn adversarial_selection(variant: Variant, probes: usize, seed: u64) -> SelectionCheck {
    let mut check = SelectionCheck::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_probes(variant, probes, seed, |kit, state| {
        let Ok(cands) = candidates_for(Algorithm::CompetitiveTemporal, kit, state) else {
            return;
        };
        let la: Lookahead = lookahead_sets(state, cands);
        let n = kit.catalogue().len();
        let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for w in la.worst.iter() {
            q[w] = 100.0 + rng.gen::<f64>();
        }
        // Winners look worst of all to the network.
        for w in la.winners.iter() {
            q[w] = -100.0;
        }
        let a = select_action(&q, cands, Some(&la), 0.0, &mut rng).expect("candidates non-empty");
        check.probes += 1;
        let bad = if !la.winners.is_empty() {
            check.with_winners += 1;
            !la.winners.contains(a)
        } else if !la.worst.is_empty() && !cands.difference(la.worst).is_empty() {
            check.with_worst += 1;
            la.worst.contains(a)
        } else {
            false
        };
        if bad {
            check.violations += 1;
        }
    });
    check
}

/// Counts probes where `lookahead_sets` left the episode state changed.
pub fn lookahead_mutations(variant: Variant, probes: usize, seed: u64) -> usize {
    let mut changed = 0;
    random_probes(variant, probes, seed, |_, state| {
        let before = state.clone();
        let all = ActionSet::all(ActCatalogue::new(variant).len());
        let _ = lookahead_sets(state, all);
        if *state != before {
            changed += 1;
        }
    });
    changed
}

/// Largest |z| of per-slot counts when sampling a full buffer.
pub fn replay_max_z(capacity: usize, samples: usize, seed: u64) -> f64 {
    let mut mem = ReplayMemory::new(capacity);
    for i in 0..capacity + 17 {
        mem.push(Experience {
            state: vec![i as f64],
            action: 0,
            reward: 0.0,
            next_state: Vec::new(),
            terminal: true,
            next_candidates: ActionSet::empty(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; capacity];
    let mut out = Vec::new();
    let mut drawn = 0;
    while drawn < samples {
        let n = (samples - drawn).min(4096);
        mem.sample_indices(n, &mut rng, &mut out);
        for &i in &out {
            counts[i] += 1;
        }
        drawn += n;
    }
    let p = 1.0 / capacity as f64;
    let mean = samples as f64 * p;
    let sd = (samples as f64 * p * (1.0 - p)).sqrt();
    counts.iter().map(|&c| (c as f64 - mean).abs() / sd).fold(0.0, f64::max)
}

/// Upper-tail p-value of Pearson's chi-square for `counts` against a
/// uniform distribution.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// p-value of the simulated user's move choice from a position with
/// several legal moves.
pub fn simulated_user_move_p(variant: Variant, draws: usize, seed: u64) -> (usize, f64) {
    let kit = DialogueKit::builtin(variant);
    let cat = kit.catalogue();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = EpisodeState::new(variant, &kit.config);
    // Open the game and make one robot move, answering prompts as the user.
    loop {
        let permitted = state.permitted_acts();
        let a = cat.act(permitted.nth(0).expect("opening acts available"));
        match state.execute_robot_act(a) {
            Some(Some(UserPrompt::GameMove)) => break,
            Some(Some(p)) => {
                simulated_user_step(&mut state, p, &kit, &mut rng).expect("reply");
            }
            _ => {}
        }
    }
    let legal = state.untaken_legal_moves();
    let mut counts = vec![0u64; legal.len()];
    for _ in 0..draws {
        let mut s = state.clone();
        let act = simulated_user_step(&mut s, UserPrompt::GameMove, &kit, &mut rng).expect("legal move exists");
        let noughts::env::corpus::UserAct::GameMove(c) = act else {
            panic!("expected a game move, got {act:?}");
        };
        counts[legal.iter().position(|&l| l == c).expect("legal")] += 1;
    }
    (legal.len(), chi_square_uniform_p(&counts))
}

/// p-value of epsilon = 1 selection over a fixed candidate set.
pub fn exploration_p(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cands: ActionSet = [1usize, 4, 5, 9, 20, 33].into_iter().collect();
    let q: Vec<f64> = (0..40).map(|i| i as f64).collect();
    let mut counts = [0u64; 6];
    for _ in 0..draws {
        let a = select_action(&q, cands, None, 1.0, &mut rng).expect("non-empty");
        counts[cands.iter().position(|c| c == a).expect("member")] += 1;
    }
    chi_square_uniform_p(&counts)
}

/// Two-state chain: state 0 always moves to state 1 for reward 0; state 1
/// ends the episode with reward `r`.
pub struct Chain {
    at: usize,
    pub r: f64,
}

impl Chain {
    pub fn new(r: f64) -> Self {
        Chain { at: 0, r }
    }
}

impl Task for Chain {
    fn input_dim(&self) -> usize {
        2
    }

    fn action_count(&self) -> usize {
        1
    }

    fn reset(&mut self) {
        self.at = 0;
    }

    fn features(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend(if self.at == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
    }

    fn candidates(&self) -> Result<ActionSet, TrainError> {
        Ok(ActionSet::all(1))
    }

    fn lookahead(&mut self, _: ActionSet) -> Option<Lookahead> {
        None
    }

    fn step(&mut self, _: usize) -> Result<(f64, bool), TrainError> {
        if self.at == 0 {
            self.at = 1;
            Ok((0.0, false))
        } else {
            Ok((self.r, true))
        }
    }

    fn success(&self) -> bool {
        true
    }
}

/// Fitted Q-values of the chain's two states.
pub fn chain_q(r: f64, steps: u64, seed: u64) -> (f64, f64) {
    use noughts::nn::Network;
    let config = AgentConfig {
        algorithm: Algorithm::DqnVariant,
        learning_steps: steps,
        burn_in: 200,
        target_reset: 500,
        hidden_width: 8,
        seed,
        ..AgentConfig::default()
    };
    let out = train(&config, &mut Chain::new(r)).expect("toy task trains");
    let q0 = out.net.forward(&[1.0, 0.0]).expect("dim 2")[0];
    let q1 = out.net.forward(&[0.0, 1.0]).expect("dim 2")[0];
    (q0, q1)
}
