//! Naive Bayes prior over dialogue acts, trained from the example dialogues.
//!
//! Binary features: the previous robot act class (one-hot, including "none"),
//! the dialogue phase (one-hot) and a game-over flag. Laplace smoothing with
//! `alpha = 1` on both the class prior and the per-feature Bernoulli terms.

use thiserror::Error;

use super::acts::{ActCatalogue, ActKind, ActionSet, DialogueAct};
use super::corpus::{Corpus, Turn};
use super::{EpisodeState, EnvConfig, Phase};

/// Acts whose posterior exceeds this are kept.
pub const PRIOR_THRESHOLD: f64 = 0.001;

pub const PRIOR_FEATURES: usize = 1 + ActKind::COUNT + Phase::COUNT + 1;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("the action prior has not been trained")]
    Untrained,
    #[error("dialogue {dialogue}, turn {turn}: {act} is not permitted in phase {phase:?}")]
    InconsistentDialogue {
        dialogue: usize,
        turn: usize,
        act: String,
        phase: Phase,
    },
}

pub fn prior_features(state: &EpisodeState) -> [bool; PRIOR_FEATURES] {
    let mut f = [false; PRIOR_FEATURES];
    match state.last_act() {
        None => f[0] = true,
        Some(a) => f[1 + a.kind().index()] = true,
    }
    f[1 + ActKind::COUNT + state.phase().index()] = true;
    f[PRIOR_FEATURES - 1] = state.game().status().is_over();
    f
}

#[derive(Debug, Clone, Default)]
pub struct ActionPrior {
    class_counts: Vec<f64>,
    /// `feature_counts[class][j]`: examples of `class` with feature `j` set.
    feature_counts: Vec<[f64; PRIOR_FEATURES]>,
    total: f64,
}

impl ActionPrior {
    pub fn untrained() -> Self {
        ActionPrior::default()
    }

    pub fn is_trained(&self) -> bool {
        self.total > 0.0
    }

    pub fn fit(examples: &[([bool; PRIOR_FEATURES], ActKind)]) -> Self {
        let mut class_counts = vec![0.0; ActKind::COUNT];
        let mut feature_counts = vec![[0.0; PRIOR_FEATURES]; ActKind::COUNT];
        for (f, k) in examples {
            class_counts[k.index()] += 1.0;
            for (j, &on) in f.iter().enumerate() {
                if on {
                    feature_counts[k.index()][j] += 1.0;
                }
            }
        }
        ActionPrior {
            class_counts,
            feature_counts,
            total: examples.len() as f64,
        }
    }

    /// Trains on the robot turns of every corpus dialogue, replaying each one
    /// through the phase machine to recover the state features.
    pub fn train(corpus: &Corpus, config: &EnvConfig) -> Result<Self, PriorError> {
        let catalogue = ActCatalogue::new(corpus.variant());
        let mut examples = Vec::new();
        for (d, dialogue) in corpus.dialogues().iter().enumerate() {
            let mut state = EpisodeState::new(corpus.variant(), config);
            for (t, turn) in dialogue.turns.iter().enumerate() {
                match turn {
                    Turn::Robot { act, .. } => {
                        examples.push((prior_features(&state), act.kind()));
                        if !state.permits(*act) {
                            return Err(PriorError::InconsistentDialogue {
                                dialogue: d,
                                turn: t,
                                act: act.label(catalogue.variant()),
                                phase: state.phase(),
                            });
                        }
                        state.execute_robot_act(*act);
                    }
                    Turn::User { act, text } => {
                        state
                            .apply_user_act(*act, text, &[])
                            .map_err(|_| PriorError::InconsistentDialogue {
                                dialogue: d,
                                turn: t,
                                act: act.label(catalogue.variant()),
                                phase: state.phase(),
                            })?;
                    }
                }
            }
        }
        Ok(ActionPrior::fit(&examples))
    }

    /// Posterior over act classes, indexed by [`ActKind::index`].
    pub fn posterior(&self, features: &[bool; PRIOR_FEATURES]) -> Result<[f64; ActKind::COUNT], PriorError> {
        if !self.is_trained() {
            return Err(PriorError::Untrained);
        }
        let k = ActKind::COUNT as f64;
        let mut logp = [0.0; ActKind::COUNT];
        for (c, lp) in logp.iter_mut().enumerate() {
            let n = self.class_counts[c];
            *lp = ((n + 1.0) / (self.total + k)).ln();
            for (j, &on) in features.iter().enumerate() {
                let p1 = (self.feature_counts[c][j] + 1.0) / (n + 2.0);
                *lp += if on { p1 } else { 1.0 - p1 }.ln();
            }
        }
        let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut post = [0.0; ActKind::COUNT];
        let mut z = 0.0;
        for (p, lp) in post.iter_mut().zip(logp) {
            *p = (lp - max).exp();
            z += *p;
        }
        post.iter_mut().for_each(|p| *p /= z);
        Ok(post)
    }

    /// Likely acts in `state`: every class above [`PRIOR_THRESHOLD`], plus the
    /// legal untaken game moves on the robot's turn. Falls back to every
    /// phase-appropriate act when that comes out empty.
    pub fn candidates(&self, state: &EpisodeState) -> Result<ActionSet, PriorError> {
        self.candidates_for(state, &prior_features(state))
    }

    pub fn candidates_for(
        &self,
        state: &EpisodeState,
        features: &[bool; PRIOR_FEATURES],
    ) -> Result<ActionSet, PriorError> {
        let post = self.posterior(features)?;
        let catalogue = ActCatalogue::new(state.variant());
        let mut set = ActionSet::empty();
        for kind in ActKind::ALL {
            if kind == ActKind::GameMove || post[kind.index()] <= PRIOR_THRESHOLD {
                continue;
            }
            set = set.union(catalogue.indices_of_kinds(&[kind]));
        }
        if state.phase() == Phase::RobotTurn || post[ActKind::GameMove.index()] > PRIOR_THRESHOLD {
            for c in state.untaken_legal_moves() {
                set.insert(catalogue.index_of(DialogueAct::GameMove(c)));
            }
        }
        if set.is_empty() {
            set = state.phase_acts();
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::DialogueKit;
    use crate::game::Variant;

    #[test]
    fn untrained_prior_errors() {
        let s = EpisodeState::new(Variant::Standard, &EnvConfig::default());
        assert!(matches!(ActionPrior::untrained().candidates(&s), Err(PriorError::Untrained)));
    }

    #[test]
    fn opening_prior_contains_greeting_and_no_moves() {
        for v in [Variant::Standard, Variant::Ultimate] {
            let kit = DialogueKit::builtin(v);
            let s = EpisodeState::new(v, &kit.config);
            let post = kit.prior.posterior(&prior_features(&s)).unwrap();
            assert!(post[ActKind::Greeting.index()] > PRIOR_THRESHOLD);
            assert!(post[ActKind::GameMove.index()] <= PRIOR_THRESHOLD, "{post:?}");
            let set = kit.prior.candidates(&s).unwrap();
            let cat = ActCatalogue::new(v);
            assert!(set.contains(cat.index_of(DialogueAct::Greeting)));
            assert!(set.iter().all(|i| !cat.act(i).is_game_move()));
        }
    }

    #[test]
    fn posterior_sums_to_one() {
        let kit = DialogueKit::builtin(Variant::Standard);
        let s = EpisodeState::new(Variant::Standard, &kit.config);
        let post = kit.prior.posterior(&prior_features(&s)).unwrap();
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_features_still_give_candidates() {
        let kit = DialogueKit::builtin(Variant::Standard);
        let s = EpisodeState::new(Variant::Standard, &kit.config);
        let set = kit.prior.candidates_for(&s, &[false; PRIOR_FEATURES]).unwrap();
        assert!(!set.is_empty());
    }
}
