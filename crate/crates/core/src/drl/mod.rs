//! Deep Q-learning with experience replay and a target network, plus the
//! competitive variant that filters actions by one-ply lookahead: it always
//! takes a winning move when one exists and, when acting greedily, never
//! takes a move whose immediate reward is the (negative) minimum.

mod eval;
mod policy;
mod replay;

pub use eval::{evaluate, EvalReport};
pub use policy::{candidates_for, train_policy, DialogueTask, Policy};
pub use replay::{Experience, ReplayMemory};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::acts::{ActCatalogue, ActionSet, DialogueAct};
use crate::env::prior::PriorError;
use crate::env::{game_move_reward, EnvError, EpisodeState, Reward};
use crate::game::GameStatus;
use crate::nn::{DenseNet, Loss, Network, NnError, Sample, Sgd, Target};
use crate::seed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no candidate actions")]
    EmptyCandidates,
    #[error("diverged at step {step}: {source}")]
    Diverged { step: u64, source: NnError },
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Epsilon-greedy over every act of the current phase.
    DqnOriginal,
    /// Candidates restricted by the dialogue prior and to untaken cells.
    DqnVariant,
    /// Prior restriction plus lookahead filtering, temporal features zeroed.
    CompetitiveNoTemporal,
    CompetitiveTemporal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::DqnOriginal,
        Algorithm::DqnVariant,
        Algorithm::CompetitiveNoTemporal,
        Algorithm::CompetitiveTemporal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DqnOriginal => "dqn_original",
            Algorithm::DqnVariant => "dqn_variant",
            Algorithm::CompetitiveNoTemporal => "competitive_no_temporal",
            Algorithm::CompetitiveTemporal => "competitive_temporal",
        }
    }

    pub fn uses_prior(self) -> bool {
        self != Algorithm::DqnOriginal
    }

    pub fn competitive(self) -> bool {
        matches!(self, Algorithm::CompetitiveNoTemporal | Algorithm::CompetitiveTemporal)
    }

    pub fn temporal(self) -> bool {
        self != Algorithm::CompetitiveNoTemporal
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?} (expected one of dqn_original, dqn_variant, competitive_no_temporal, competitive_temporal)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub burn_in: u64,
    pub batch_size: usize,
    pub min_epsilon: f64,
    /// Fraction of `learning_steps` over which epsilon falls linearly from 1.
    pub epsilon_decay_fraction: f64,
    pub learning_steps: u64,
    pub max_games: u64,
    pub hidden_width: usize,
    pub target_reset: u64,
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub replay_capacity: usize,
    pub curve_every: u64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            algorithm: Algorithm::CompetitiveTemporal,
            gamma: 0.7,
            burn_in: 1000,
            batch_size: 2,
            min_epsilon: 0.005,
            epsilon_decay_fraction: 0.8,
            learning_steps: 200_000,
            max_games: 20_000,
            hidden_width: 100,
            target_reset: 2000,
            learning_rate: 0.005,
            grad_clip: 10.0,
            replay_capacity: 10_000,
            curve_every: 500,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must be in (0, 1)");
        }
        if self.batch_size == 0 || self.hidden_width == 0 || self.replay_capacity == 0 {
            return bad("batch_size, hidden_width and replay_capacity must be positive");
        }
        if self.learning_steps == 0 || self.target_reset == 0 || self.curve_every == 0 || self.max_games == 0 {
            return bad("learning_steps, target_reset, curve_every and max_games must be positive");
        }
        if !(self.min_epsilon > 0.0 && self.min_epsilon <= 1.0) {
            return bad("min_epsilon must be in (0, 1]");
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return bad("epsilon_decay_fraction must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.grad_clip > 0.0) {
            return bad("learning_rate and grad_clip must be positive");
        }
        Ok(())
    }

    /// Exploration rate for the 1-based environment step `step`.
    pub fn epsilon(&self, step: u64) -> f64 {
        let horizon = (self.learning_steps as f64 * self.epsilon_decay_fraction).max(1.0);
        let frac = step.saturating_sub(1) as f64 / horizon;
        if frac >= 1.0 {
            return self.min_epsilon;
        }
        (1.0 - frac * (1.0 - self.min_epsilon)).max(self.min_epsilon)
    }
}

/// Lookahead filter sets over candidate actions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Lookahead {
    /// Game moves that win on the spot.
    pub winners: ActionSet,
    /// Game moves attaining the minimum one-ply reward, when that minimum is negative.
    pub worst: ActionSet,
}

/// Probes every candidate game move with apply-observe-undo. `state` is
/// unchanged on return.
pub fn lookahead_sets(state: &mut EpisodeState, available: ActionSet) -> Lookahead {
    let cat = ActCatalogue::new(state.variant());
    let robot = state.robot();
    let mut winners = ActionSet::empty();
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for i in available.iter() {
        let DialogueAct::GameMove(c) = cat.act(i) else {
            continue;
        };
        let r = if state.permits(DialogueAct::GameMove(c)) {
            let game = state.game_mut();
            if game.status() == GameStatus::Ongoing && game.wins_with(c, robot) {
                winners.insert(i);
            }
            game_move_reward(game, c, robot)
        } else {
            Reward::Penalty
        };
        scored.push((i, r.value()));
    }
    let min = scored.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let worst = if min < 0.0 {
        scored.iter().filter(|&&(_, r)| r == min).map(|&(i, _)| i).collect()
    } else {
        ActionSet::empty()
    };
    Lookahead { winners, worst }
}

/// Index of the largest `q[i]` over `set`, lowest index on ties.
pub fn argmax_over(q: &[f64], set: ActionSet) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in set.iter() {
        if best.is_none_or(|(_, b)| q[i] > b) {
            best = Some((i, q[i]));
        }
    }
    best.map(|(i, _)| i)
}

/// Epsilon-greedy choice. With `lookahead`, winners (if any) replace the
/// candidates, and the greedy branch skips `worst` unless nothing else is
/// left. Always draws one uniform number for the epsilon test.
pub fn select_action<R: Rng + ?Sized>(
    q: &[f64],
    candidates: ActionSet,
    lookahead: Option<&Lookahead>,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, TrainError> {
    let mut cands = candidates;
    if let Some(la) = lookahead {
        if !la.winners.is_empty() {
            cands = la.winners;
        }
    }
    if cands.is_empty() {
        return Err(TrainError::EmptyCandidates);
    }
    if rng.gen::<f64>() < epsilon {
        let k = rng.gen_range(0..cands.len());
        return Ok(cands.nth(k).expect("k < len"));
    }
    let pool = match lookahead {
        Some(la) => {
            let rest = cands.difference(la.worst);
            if rest.is_empty() {
                cands
            } else {
                rest
            }
        }
        None => cands,
    };
    Ok(argmax_over(q, pool).expect("non-empty pool"))
}

/// An episodic environment as seen by the learner.
pub trait Task {
    fn input_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    fn reset(&mut self);
    fn features(&self, out: &mut Vec<f64>);
    fn candidates(&self) -> Result<ActionSet, TrainError>;
    /// Filter sets for `candidates`; `None` when the learner does not filter.
    fn lookahead(&mut self, candidates: ActionSet) -> Option<Lookahead>;
    fn step(&mut self, action: usize) -> Result<(f64, bool), TrainError>;
    /// Whether the finished episode counts as a task success.
    fn success(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    pub avg_reward: f64,
    pub task_success: f64,
    pub dialogue_length: f64,
}

pub const CURVE_HEADER: &str = "step,avg_reward,task_success,dialogue_length";

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{:.6},{:.6},{:.4}\n", r.step, r.avg_reward, r.task_success, r.dialogue_length));
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Online network, rounded to `f32` precision.
    pub net: DenseNet,
    pub curve: Vec<CurveRow>,
    pub steps: u64,
    pub games: u64,
}

#[derive(Default)]
struct Window {
    games: u64,
    reward: f64,
    success: u64,
    length: u64,
}

/// Runs DQN on `task` for `config.learning_steps` environment steps (or
/// `config.max_games` episodes). Curve rows average the episodes finished
/// since the previous row; a row with none repeats the previous values.
pub fn train<T: Task>(config: &AgentConfig, task: &mut T) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    let root = config.seed;
    let mut init_rng = seed::stream(root, "train/init");
    let mut explore_rng = seed::stream(root, "train/explore");
    let mut replay_rng = seed::stream(root, "train/replay");

    let mut online = DenseNet::q_network(task.input_dim(), config.hidden_width, task.action_count(), &mut init_rng);
    let mut target = online.clone();
    let mut replay = ReplayMemory::new(config.replay_capacity);
    let mut sgd = Sgd::new(config.learning_rate, config.grad_clip);

    task.reset();
    let mut s = Vec::new();
    task.features(&mut s);
    let mut cands = task.candidates()?;
    let (mut ep_reward, mut ep_len) = (0.0, 0u64);
    let mut window = Window::default();
    let mut last_row = CurveRow {
        step: 0,
        avg_reward: 0.0,
        task_success: 0.0,
        dialogue_length: 0.0,
    };
    let mut curve = Vec::new();
    let mut games = 0u64;
    let mut step = 0u64;
    let mut batch_idx = Vec::with_capacity(config.batch_size);

    while step < config.learning_steps && games < config.max_games {
        step += 1;
        let eps = config.epsilon(step);
        let la = task.lookahead(cands);
        let q = online.forward(&s)?;
        let a = select_action(&q, cands, la.as_ref(), eps, &mut explore_rng)?;
        let (r, terminal) = task.step(a)?;
        ep_reward += r;
        ep_len += 1;

        let mut s_next = Vec::new();
        task.features(&mut s_next);
        let next_cands = if terminal { ActionSet::empty() } else { task.candidates()? };
        replay.push(Experience {
            state: std::mem::take(&mut s),
            action: a,
            reward: r,
            next_state: s_next.clone(),
            terminal,
            next_candidates: next_cands,
        });

        if terminal {
            window.games += 1;
            window.reward += ep_reward / ep_len as f64;
            window.length += ep_len;
            window.success += task.success() as u64;
            games += 1;
            ep_reward = 0.0;
            ep_len = 0;
            task.reset();
            task.features(&mut s);
            cands = task.candidates()?;
        } else {
            s = s_next;
            cands = next_cands;
        }

        if step > config.burn_in {
            replay.sample_indices(config.batch_size, &mut replay_rng, &mut batch_idx);
            let mut targets = Vec::with_capacity(batch_idx.len());
            for &i in &batch_idx {
                let e = replay.get(i);
                let y = if e.terminal || e.next_candidates.is_empty() {
                    e.reward
                } else {
                    let qn = target.forward(&e.next_state)?;
                    let best = e.next_candidates.iter().map(|j| qn[j]).fold(f64::NEG_INFINITY, f64::max);
                    e.reward + config.gamma * best
                };
                targets.push(y);
            }
            let batch: Vec<Sample> = batch_idx
                .iter()
                .zip(&targets)
                .map(|(&i, &y)| {
                    let e = replay.get(i);
                    Sample {
                        input: &e.state,
                        target: Target::Selected { action: e.action, value: y },
                    }
                })
                .collect();
            sgd.step(&mut online, &batch, Loss::SelectedMse)
                .map_err(|source| TrainError::Diverged { step, source })?;
        }
        if step.is_multiple_of(config.target_reset) {
            target.clone_from(&online);
        }
        if step.is_multiple_of(config.curve_every) {
            if window.games > 0 {
                let n = window.games as f64;
                last_row = CurveRow {
                    step,
                    avg_reward: window.reward / n,
                    task_success: window.success as f64 / n,
                    dialogue_length: window.length as f64 / n,
                };
            } else {
                last_row.step = step;
            }
            curve.push(last_row);
            window = Window::default();
        }
    }
    online.round_to_f32();
    Ok(TrainOutput {
        net: online,
        curve,
        steps: step,
        games,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::DialogueKit;
    use crate::game::{CellId, GameState, Player, Variant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let c = AgentConfig {
            learning_steps: 1000,
            ..AgentConfig::default()
        };
        assert_eq!(c.epsilon(1), 1.0);
        assert!((c.epsilon(401) - (1.0 - 0.5 * 0.995)).abs() < 1e-12);
        assert_eq!(c.epsilon(801), 0.005);
        assert_eq!(c.epsilon(1000), 0.005);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("bogus".parse::<Algorithm>().is_err());
    }

    fn robot_turn(board: &str) -> EpisodeState {
        let kit = DialogueKit::builtin(Variant::Standard);
        let mut s = EpisodeState::new(Variant::Standard, &kit.config);
        use crate::env::corpus::UserAct;
        for (a, u) in [
            (DialogueAct::Greeting, UserAct::Greeting),
            (DialogueAct::ProvideName, UserAct::Acknowledge),
            (DialogueAct::RequestPlay, UserAct::ConfirmPlay),
        ] {
            s.execute_robot_act(a).unwrap();
            s.apply_user_act(u, "", &[]).unwrap();
        }
        s.execute_robot_act(DialogueAct::ReplyPlayYes);
        let target = GameState::parse_board(board, Player::Cross).unwrap();
        for m in target.history() {
            s.game_mut().play(m.cell).unwrap();
        }
        s
    }

    #[test]
    fn completing_move_is_the_only_winner() {
        let mut s = robot_turn("XX./OO./...");
        let cat = ActCatalogue::new(Variant::Standard);
        let acts = s.phase_acts();
        let la = lookahead_sets(&mut s, acts);
        let win = cat.index_of(DialogueAct::GameMove(CellId::new(Variant::Standard, 2).unwrap()));
        assert_eq!(la.winners.iter().collect::<Vec<_>>(), vec![win]);
    }

    #[test]
    fn empty_board_has_no_filter_sets() {
        let mut s = robot_turn(".../.../...");
        let acts = s.phase_acts();
        let la = lookahead_sets(&mut s, acts);
        assert!(la.winners.is_empty() && la.worst.is_empty());
    }

    #[test]
    fn winners_override_q_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut la = Lookahead::default();
        la.winners.insert(3);
        let q = [10.0, 9.0, 8.0, -100.0];
        let cands: ActionSet = [0, 1, 2, 3].into_iter().collect();
        assert_eq!(select_action(&q, cands, Some(&la), 0.0, &mut rng).unwrap(), 3);
    }

    #[test]
    fn empty_candidates_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            select_action(&[0.0], ActionSet::empty(), None, 0.5, &mut rng),
            Err(TrainError::EmptyCandidates)
        ));
    }

    #[test]
    fn config_defaults_validate() {
        AgentConfig::default().validate().unwrap();
        let bad = AgentConfig {
            gamma: 1.0,
            ..AgentConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
