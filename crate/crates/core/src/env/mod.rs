//! The multimodal episode environment: a phase machine over dialogue acts
//! wrapped around a game, a reward function, and a simulated opponent.
//!
//! Phase machine (robot acts drive every transition):
//!
//! ```text
//! Opening --RequestPlay--> AwaitPlayConfirm --ReplyPlayYes--> RobotTurn | UserTurn
//! RobotTurn --GameMove--> UserTurn | Feedback
//! UserTurn --RequestUserMove (+ user move)--> RobotTurn | Feedback
//! Feedback --Feedback(outcome)--> Closing --Closing--> Done
//! Feedback --Closing--> Done
//! ```
//!
//! `Opening` runs greeting, then name, then the play request, in that
//! order. An act the
//! current phase does not permit is rejected: it costs a step and a -5
//! reward and changes nothing else.

pub mod acts;
pub mod corpus;
pub mod prior;

use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CellId, GameState, GameStatus, Player, Variant};
use acts::{ActCatalogue, ActKind, ActionSet, CommandTag, DialogueAct, Feedback};
use corpus::{Corpus, UserAct, Vocabulary, VOCABULARY_SIZE};
use prior::ActionPrior;

pub const MAX_DIALOGUE_STEPS: u32 = 100;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("the episode has already terminated")]
    EpisodeOver,
    #[error("no legal move available for the user")]
    NoLegalMove,
    #[error("user act {0} does not fit the dialogue state")]
    UnexpectedUserAct(String),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Opening,
    AwaitPlayConfirm,
    RobotTurn,
    UserTurn,
    Feedback,
    Closing,
    Done,
}

impl Phase {
    pub const COUNT: usize = 7;

    pub const fn index(self) -> usize {
        self as usize
    }
}

/// Reward values emitted by the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reward {
    /// -5: a repeated, occupied, illegal or out-of-phase act; losing or about to lose.
    Penalty,
    Neutral,
    /// +1: a draw, or only draws reachable at one ply.
    Draw,
    /// +5: winning or about to win.
    Win,
}

impl Reward {
    pub const fn value(self) -> f64 {
        match self {
            Reward::Penalty => -5.0,
            Reward::Neutral => 0.0,
            Reward::Draw => 1.0,
            Reward::Win => 5.0,
        }
    }
}

/// How an episode ended from the robot's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Win,
    Draw,
    Loss,
    /// The step limit was reached before the game finished.
    Unfinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub robot: Player,
    pub robot_starts: bool,
    pub max_steps: u32,
    /// Uniform range of simulated word-recognition confidences.
    pub user_confidence: (f64, f64),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            robot: Player::Cross,
            robot_starts: true,
            max_steps: MAX_DIALOGUE_STEPS,
            user_confidence: (0.5, 1.0),
        }
    }
}

/// What the robot is waiting for after an accepted act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserPrompt {
    /// A spoken reply to a robot act of the given class.
    Utterance(ActKind),
    GameMove,
}

fn vocabulary() -> &'static Vocabulary {
    static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
    VOCAB.get_or_init(Vocabulary::builtin)
}

fn act_words(act: DialogueAct) -> &'static [usize] {
    static WORDS: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
    let table = WORDS.get_or_init(|| {
        acts::CONVERSATIONAL_ACTS
            .iter()
            .chain(std::iter::once(&DialogueAct::GameMove(CellId::new(Variant::Standard, 0).unwrap())))
            .map(|a| vocabulary().word_indices(a.verbalisation()))
            .collect()
    });
    let i = match act {
        DialogueAct::GameMove(_) => acts::CONVERSATIONAL_ACTS.len(),
        other => acts::CONVERSATIONAL_ACTS.iter().position(|&a| a == other).expect("known act"),
    };
    &table[i]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    game: GameState,
    phase: Phase,
    robot: Player,
    robot_starts: bool,
    max_steps: u32,
    commands: [bool; CommandTag::ALL.len()],
    words_robot: [bool; VOCABULARY_SIZE],
    words_user: [f64; VOCABULARY_SIZE],
    step_count: u32,
    acts_taken: Vec<DialogueAct>,
    greeted: bool,
    named: bool,
    pending: Option<UserPrompt>,
}

impl Hash for EpisodeState {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.game.hash(h);
        self.phase.hash(h);
        self.robot.hash(h);
        self.robot_starts.hash(h);
        self.max_steps.hash(h);
        self.commands.hash(h);
        self.words_robot.hash(h);
        for w in &self.words_user {
            w.to_bits().hash(h);
        }
        self.step_count.hash(h);
        self.acts_taken.hash(h);
        self.greeted.hash(h);
        self.named.hash(h);
        self.pending.hash(h);
    }
}

impl EpisodeState {
    pub fn new(variant: Variant, config: &EnvConfig) -> Self {
        let first = if config.robot_starts {
            config.robot
        } else {
            config.robot.opponent()
        };
        EpisodeState {
            game: GameState::new(variant, first),
            phase: Phase::Opening,
            robot: config.robot,
            robot_starts: config.robot_starts,
            max_steps: config.max_steps,
            commands: [false; 7],
            words_robot: [false; VOCABULARY_SIZE],
            words_user: [0.0; VOCABULARY_SIZE],
            step_count: 0,
            acts_taken: Vec::new(),
            greeted: false,
            named: false,
            pending: None,
        }
    }

    pub fn variant(&self) -> Variant {
        self.game.variant()
    }

    pub fn game(&self) -> &GameState {
        &self.game
    }

    /// Mutable game access for apply-observe-undo probing. Callers must
    /// leave the game as they found it.
    pub fn game_mut(&mut self) -> &mut GameState {
        &mut self.game
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn robot(&self) -> Player {
        self.robot
    }

    pub fn user(&self) -> Player {
        self.robot.opponent()
    }

    pub fn commands(&self) -> &[bool; 7] {
        &self.commands
    }

    pub fn words_robot(&self) -> &[bool; VOCABULARY_SIZE] {
        &self.words_robot
    }

    pub fn words_user(&self) -> &[f64; VOCABULARY_SIZE] {
        &self.words_user
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn acts_taken(&self) -> &[DialogueAct] {
        &self.acts_taken
    }

    pub fn last_act(&self) -> Option<DialogueAct> {
        self.acts_taken.last().copied()
    }

    pub fn pending(&self) -> Option<UserPrompt> {
        self.pending
    }

    pub fn is_terminal(&self) -> bool {
        self.phase == Phase::Done || self.step_count >= self.max_steps
    }

    pub fn outcome(&self) -> Outcome {
        match self.game.status() {
            GameStatus::Win(p) if p == self.robot => Outcome::Win,
            GameStatus::Win(_) => Outcome::Loss,
            GameStatus::Draw => Outcome::Draw,
            GameStatus::Ongoing => Outcome::Unfinished,
        }
    }

    fn correct_feedback(&self) -> Option<Feedback> {
        match self.outcome() {
            Outcome::Win => Some(Feedback::Win),
            Outcome::Loss => Some(Feedback::Loss),
            Outcome::Draw => Some(Feedback::Draw),
            Outcome::Unfinished => None,
        }
    }

    /// Whether the phase machine accepts `act` right now.
    pub fn permits(&self, act: DialogueAct) -> bool {
        if self.pending.is_some() {
            return false;
        }
        match (self.phase, act) {
            (Phase::Opening, DialogueAct::Greeting) => !self.greeted,
            (Phase::Opening, DialogueAct::ProvideName) => self.greeted && !self.named,
            (Phase::Opening, DialogueAct::RequestPlay) => self.greeted && self.named,
            (Phase::AwaitPlayConfirm, DialogueAct::ReplyPlayYes) => true,
            (Phase::RobotTurn, DialogueAct::GameMove(c)) => self.game.is_legal(c),
            (Phase::UserTurn, DialogueAct::RequestUserMove) => true,
            (Phase::Feedback, DialogueAct::Feedback(f)) => self.correct_feedback() == Some(f),
            (Phase::Feedback | Phase::Closing, DialogueAct::Closing) => true,
            _ => false,
        }
    }

    /// Every catalogue act whose kind belongs to the current phase,
    /// including ones that would be rejected (taken cells, wrong feedback).
    pub fn phase_acts(&self) -> ActionSet {
        let cat = ActCatalogue::new(self.variant());
        match self.phase {
            Phase::Opening => cat.indices_of_kinds(&[ActKind::Greeting, ActKind::ProvideName, ActKind::RequestPlay]),
            Phase::AwaitPlayConfirm => cat.indices_of_kinds(&[ActKind::ReplyPlayYes]),
            Phase::RobotTurn => cat.indices_of_kinds(&[ActKind::GameMove]),
            Phase::UserTurn => cat.indices_of_kinds(&[ActKind::RequestUserMove]),
            Phase::Feedback => cat.indices_of_kinds(&[
                ActKind::FeedbackWin,
                ActKind::FeedbackLoss,
                ActKind::FeedbackDraw,
                ActKind::Closing,
            ]),
            Phase::Closing => cat.indices_of_kinds(&[ActKind::Closing]),
            Phase::Done => ActionSet::empty(),
        }
    }

    /// Acts the phase machine would accept right now.
    pub fn permitted_acts(&self) -> ActionSet {
        let cat = ActCatalogue::new(self.variant());
        self.phase_acts().iter().filter(|&i| self.permits(cat.act(i))).collect()
    }

    /// Legal game moves not yet taken by either player.
    pub fn untaken_legal_moves(&self) -> Vec<CellId> {
        let mut moves = Vec::new();
        self.game.legal_moves_into(&mut moves);
        moves
    }

    /// Executes a robot act. Every call counts as a dialogue step; a
    /// non-permitted act changes nothing else and returns `None`.
    /// Otherwise returns the user reply the act calls for, if any.
    pub fn execute_robot_act(&mut self, act: DialogueAct) -> Option<Option<UserPrompt>> {
        self.step_count += 1;
        if !self.permits(act) {
            return None;
        }
        self.acts_taken.push(act);
        self.words_robot = [false; VOCABULARY_SIZE];
        for &w in act_words(act) {
            self.words_robot[w] = true;
        }
        if let Some(tag) = act.command() {
            self.commands[tag.index()] = true;
        }
        let prompt = match act {
            DialogueAct::Greeting => {
                self.greeted = true;
                Some(UserPrompt::Utterance(ActKind::Greeting))
            }
            DialogueAct::ProvideName => {
                self.named = true;
                Some(UserPrompt::Utterance(ActKind::ProvideName))
            }
            DialogueAct::RequestPlay => {
                self.phase = Phase::AwaitPlayConfirm;
                Some(UserPrompt::Utterance(ActKind::RequestPlay))
            }
            DialogueAct::ReplyPlayYes => {
                self.phase = if self.robot_starts { Phase::RobotTurn } else { Phase::UserTurn };
                None
            }
            DialogueAct::GameMove(c) => {
                self.game.play(c).expect("permitted move is legal");
                self.phase = if self.game.status().is_over() { Phase::Feedback } else { Phase::UserTurn };
                None
            }
            DialogueAct::RequestUserMove => Some(UserPrompt::GameMove),
            DialogueAct::Feedback(_) => {
                self.phase = Phase::Closing;
                Some(UserPrompt::Utterance(act.kind()))
            }
            DialogueAct::Closing => {
                self.phase = Phase::Done;
                Some(UserPrompt::Utterance(ActKind::Closing))
            }
        };
        self.pending = prompt;
        Some(prompt)
    }

    /// Applies a user turn. `confidences` pairs with the vocabulary words of
    /// `text` in order; missing entries default to 1.
    pub fn apply_user_act(&mut self, act: UserAct, text: &str, confidences: &[f64]) -> Result<(), EnvError> {
        if let UserAct::GameMove(c) = act {
            if self.pending != Some(UserPrompt::GameMove) {
                return Err(EnvError::UnexpectedUserAct(act.label(self.variant())));
            }
            if self.game.to_move() != self.user() {
                return Err(EnvError::UnexpectedUserAct(act.label(self.variant())));
            }
            self.game.play(c)?;
            self.phase = if self.game.status().is_over() { Phase::Feedback } else { Phase::RobotTurn };
        } else if self.pending == Some(UserPrompt::GameMove) {
            return Err(EnvError::UnexpectedUserAct(act.label(self.variant())));
        }
        self.pending = None;
        self.words_user = [0.0; VOCABULARY_SIZE];
        for (k, w) in vocabulary().word_indices(text).into_iter().enumerate() {
            self.words_user[w] = confidences.get(k).copied().unwrap_or(1.0).clamp(0.0, 1.0);
        }
        Ok(())
    }
}

/// Reward for playing `cell` as `robot` in `game`, where the game is still
/// going. Probes with apply-observe-undo and leaves `game` unchanged.
pub fn game_move_reward(game: &mut GameState, cell: CellId, robot: Player) -> Reward {
    if !game.is_legal(cell) || game.to_move() != robot {
        return Reward::Penalty;
    }
    game.play(cell).expect("checked legal");
    let r = position_reward(game, robot);
    game.unplay().expect("just played");
    r
}

/// One-ply evaluation of the position right after `robot` moved.
fn position_reward(game: &mut GameState, robot: Player) -> Reward {
    let opp = robot.opponent();
    match game.status() {
        GameStatus::Win(p) if p == robot => return Reward::Win,
        GameStatus::Win(_) => return Reward::Penalty,
        GameStatus::Draw => return Reward::Draw,
        GameStatus::Ongoing => {}
    }
    if game.has_immediate_win(opp) {
        return Reward::Penalty;
    }
    let mut replies = Vec::new();
    game.legal_moves_into(&mut replies);
    if threat_is_unblockable(game, robot, &replies) {
        return Reward::Win;
    }
    let all_draws = replies.iter().all(|&r| {
        game.play(r).expect("legal reply");
        let draw = game.status() == GameStatus::Draw;
        game.unplay().expect("just played");
        draw
    });
    if all_draws {
        Reward::Draw
    } else {
        Reward::Neutral
    }
}

/// Whether every opponent reply leaves `robot` an immediate win.
fn threat_is_unblockable(game: &mut GameState, robot: Player, replies: &[CellId]) -> bool {
    !replies.is_empty()
        && replies.iter().all(|&r| {
            game.play(r).expect("legal reply");
            let ok = game.status() == GameStatus::Ongoing && game.has_immediate_win(robot);
            game.unplay().expect("just played");
            ok
        })
}

/// Reward for the robot executing `act` in `prev`, yielding `next`.
pub fn reward(prev: &EpisodeState, act: DialogueAct, next: &EpisodeState) -> Reward {
    if !prev.permits(act) {
        return Reward::Penalty;
    }
    match act {
        DialogueAct::GameMove(c) => {
            let mut game = prev.game.clone();
            game_move_reward(&mut game, c, prev.robot)
        }
        DialogueAct::RequestUserMove => match next.game.status() {
            GameStatus::Win(p) if p == prev.user() => Reward::Penalty,
            GameStatus::Draw => Reward::Draw,
            _ => Reward::Neutral,
        },
        _ => Reward::Neutral,
    }
}

/// Shared, immutable dialogue resources for one variant.
#[derive(Debug)]
pub struct DialogueKit {
    pub variant: Variant,
    pub config: EnvConfig,
    pub corpus: Corpus,
    pub prior: ActionPrior,
}

impl DialogueKit {
    pub fn new(corpus: Corpus, config: EnvConfig) -> Result<Arc<Self>, prior::PriorError> {
        let prior = ActionPrior::train(&corpus, &config)?;
        Ok(Arc::new(DialogueKit {
            variant: corpus.variant(),
            config,
            corpus,
            prior,
        }))
    }

    pub fn with_config(variant: Variant, config: EnvConfig) -> Arc<Self> {
        DialogueKit::new(Corpus::builtin(variant), config).expect("bundled corpus replays cleanly")
    }

    pub fn builtin(variant: Variant) -> Arc<Self> {
        DialogueKit::with_config(variant, EnvConfig::default())
    }

    pub fn catalogue(&self) -> ActCatalogue {
        ActCatalogue::new(self.variant)
    }

    pub fn vocabulary(&self) -> &'static Vocabulary {
        vocabulary()
    }
}

/// The user's reply to a robot act of class `kind`.
pub fn user_reply_to(kind: ActKind) -> UserAct {
    match kind {
        ActKind::Greeting => UserAct::Greeting,
        ActKind::RequestPlay => UserAct::ConfirmPlay,
        ActKind::Closing => UserAct::Closing,
        _ => UserAct::Acknowledge,
    }
}

/// Plays the simulated user's side for `prompt`: a uniformly random legal
/// move for game turns, a corpus utterance otherwise. Word confidences are
/// drawn uniformly from the configured range.
pub fn simulated_user_step<R: Rng + ?Sized>(
    state: &mut EpisodeState,
    prompt: UserPrompt,
    kit: &DialogueKit,
    rng: &mut R,
) -> Result<UserAct, EnvError> {
    let (act, pool) = match prompt {
        UserPrompt::GameMove => {
            let moves = state.untaken_legal_moves();
            if moves.is_empty() {
                return Err(EnvError::NoLegalMove);
            }
            let c = moves[rng.gen_range(0..moves.len())];
            (UserAct::GameMove(c), kit.corpus.responses_to(ActKind::RequestUserMove))
        }
        UserPrompt::Utterance(kind) => {
            (user_reply_to(kind), kit.corpus.responses_to(kind))
        }
    };
    let text = if pool.is_empty() {
        ""
    } else {
        pool[rng.gen_range(0..pool.len())].as_str()
    };
    let (lo, hi) = kit.config.user_confidence;
    let n = vocabulary().word_indices(text).len();
    let confidences: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    state.apply_user_act(act, text, &confidences)?;
    Ok(act)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: Reward,
    pub terminal: bool,
}

/// One dialogue episode against the simulated user.
pub struct Environment<R> {
    kit: Arc<DialogueKit>,
    state: EpisodeState,
    rng: R,
}

impl<R: Rng> Environment<R> {
    pub fn new(kit: Arc<DialogueKit>, rng: R) -> Self {
        let state = EpisodeState::new(kit.variant, &kit.config);
        Environment { kit, state, rng }
    }

    pub fn kit(&self) -> &Arc<DialogueKit> {
        &self.kit
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut EpisodeState {
        &mut self.state
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn reset(&mut self) {
        self.state = EpisodeState::new(self.kit.variant, &self.kit.config);
    }

    /// Executes the catalogue act with index `action`.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        let act = self.kit.catalogue().act(action);
        self.step_act(act)
    }

    pub fn step_act(&mut self, act: DialogueAct) -> Result<StepOutcome, EnvError> {
        if self.state.is_terminal() {
            return Err(EnvError::EpisodeOver);
        }
        let prev = self.state.clone();
        if let Some(Some(prompt)) = self.state.execute_robot_act(act) {
            simulated_user_step(&mut self.state, prompt, &self.kit, &mut self.rng)?;
        }
        Ok(StepOutcome {
            reward: reward(&prev, act, &self.state),
            terminal: self.state.is_terminal(),
        })
    }
}
