//! A trained agent playing a human, shared by the terminal game and the
//! HTTP service.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drl::{Policy, TrainError};
use crate::env::acts::DialogueAct;
use crate::env::corpus::UserAct;
use crate::env::{user_reply_to, EnvConfig, EnvError, EpisodeState, Outcome, UserPrompt};
use crate::game::{CellId, Player, Variant};

#[derive(Debug, Error)]
pub enum PlayError {
    #[error("it is not the human's turn to move")]
    NotYourTurn,
    #[error("illegal move {0}")]
    Illegal(String),
    #[error("the game is over")]
    Over,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] TrainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Agent,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub actor: Actor,
    /// Act label, e.g. `GameMove(gridloc=center)`.
    pub act: String,
    pub text: String,
    /// Milliseconds since the Unix epoch.
    pub at_ms: u64,
}

/// Game state as the agent sees it, matching its feedback act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayStatus {
    Ongoing,
    Win,
    Loss,
    Draw,
    /// The dialogue hit its step limit before the game finished.
    Abandoned,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// One game between a greedy agent and a human. The agent runs until it
/// asks for the human's move; conversational replies are filled in with
/// the corpus's first answer.
#[derive(Debug, Clone)]
pub struct HumanGame {
    policy: Arc<Policy>,
    state: EpisodeState,
    transcript: Vec<TranscriptEntry>,
}

impl HumanGame {
    pub fn new(policy: Arc<Policy>, human: Player, agent_starts: bool) -> Result<Self, PlayError> {
        let config = EnvConfig {
            robot: human.opponent(),
            robot_starts: agent_starts,
            ..policy.kit.config.clone()
        };
        let state = EpisodeState::new(policy.variant(), &config);
        let mut g = HumanGame {
            policy,
            state,
            transcript: Vec::new(),
        };
        g.run_agent()?;
        Ok(g)
    }

    pub fn variant(&self) -> Variant {
        self.state.variant()
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn human(&self) -> Player {
        self.state.user()
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn awaiting_human_move(&self) -> bool {
        !self.state.is_terminal() && self.state.pending() == Some(UserPrompt::GameMove)
    }

    pub fn status(&self) -> PlayStatus {
        match self.state.outcome() {
            Outcome::Win => PlayStatus::Win,
            Outcome::Loss => PlayStatus::Loss,
            Outcome::Draw => PlayStatus::Draw,
            Outcome::Unfinished if self.state.is_terminal() => PlayStatus::Abandoned,
            Outcome::Unfinished => PlayStatus::Ongoing,
        }
    }

    /// Legal cells for the human, empty unless it is their turn.
    pub fn legal_moves(&self) -> Vec<CellId> {
        if self.awaiting_human_move() {
            self.state.game().legal_moves().unwrap_or_default()
        } else {
            Vec::new()
        }
    }

    /// Plays the human's move and lets the agent respond. Returns the
    /// transcript entries added. The state is unchanged on error.
    pub fn human_move(&mut self, cell: CellId) -> Result<Vec<TranscriptEntry>, PlayError> {
        if self.state.is_terminal() {
            return Err(PlayError::Over);
        }
        if !self.awaiting_human_move() {
            return Err(PlayError::NotYourTurn);
        }
        if !self.state.game().is_legal(cell) {
            return Err(PlayError::Illegal(cell.name(self.variant())));
        }
        let start = self.transcript.len();
        self.state.apply_user_act(UserAct::GameMove(cell), "", &[])?;
        self.record(Actor::Human, UserAct::GameMove(cell).label(self.variant()), String::new());
        self.run_agent()?;
        Ok(self.transcript[start..].to_vec())
    }

    fn record(&mut self, actor: Actor, act: String, text: String) {
        self.transcript.push(TranscriptEntry {
            actor,
            act,
            text,
            at_ms: now_ms(),
        });
    }

    fn run_agent(&mut self) -> Result<(), PlayError> {
        while !self.state.is_terminal() && !self.awaiting_human_move() {
            let act = self.policy.greedy_act(&mut self.state, true)?;
            if let DialogueAct::GameMove(c) = act {
                debug_assert!(self.state.game().is_legal(c), "agent chose an illegal move");
            }
            let Some(prompt) = self.state.execute_robot_act(act) else {
                continue;
            };
            let variant = self.variant();
            self.record(Actor::Agent, act.label(variant), act.verbalisation().to_string());
            if let Some(UserPrompt::Utterance(kind)) = prompt {
                let reply = user_reply_to(kind);
                let text = self
                    .policy
                    .kit
                    .corpus
                    .responses_to(kind)
                    .first()
                    .cloned()
                    .unwrap_or_default();
                self.state.apply_user_act(reply, &text, &[])?;
                self.record(Actor::Human, reply.label(variant), text);
            }
        }
        Ok(())
    }
}
