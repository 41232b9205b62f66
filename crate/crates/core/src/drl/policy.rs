use std::path::Path;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::{lookahead_sets, select_action, train, AgentConfig, Algorithm, Lookahead, Task, TrainError, TrainOutput};
use crate::env::acts::{ActCatalogue, ActionSet, DialogueAct};
use crate::env::{DialogueKit, Environment, EpisodeState, Outcome};
use crate::features::Featurizer;
use crate::game::Variant;
use crate::nn::{load_model, save_model, AnyNet, DenseNet, ModelMeta, Network, NnError};
use crate::seed;

/// Actions an algorithm may choose from in `state`.
pub fn candidates_for(algorithm: Algorithm, kit: &DialogueKit, state: &EpisodeState) -> Result<ActionSet, TrainError> {
    let set = if algorithm.uses_prior() {
        kit.prior.candidates(state)?
    } else {
        state.phase_acts()
    };
    Ok(set)
}

/// The dialogue environment wrapped for the learner.
pub struct DialogueTask {
    env: Environment<ChaCha8Rng>,
    featurizer: Featurizer,
    algorithm: Algorithm,
}

impl DialogueTask {
    pub fn new(kit: Arc<DialogueKit>, algorithm: Algorithm, user_rng: ChaCha8Rng) -> Self {
        let featurizer = Featurizer::new(kit.variant, algorithm.temporal());
        DialogueTask {
            env: Environment::new(kit, user_rng),
            featurizer,
            algorithm,
        }
    }

    pub fn env(&self) -> &Environment<ChaCha8Rng> {
        &self.env
    }

    pub fn featurizer(&self) -> &Featurizer {
        &self.featurizer
    }
}

impl Task for DialogueTask {
    fn input_dim(&self) -> usize {
        self.featurizer.dim()
    }

    fn action_count(&self) -> usize {
        self.env.kit().catalogue().len()
    }

    fn reset(&mut self) {
        self.env.reset();
    }

    fn features(&self, out: &mut Vec<f64>) {
        out.resize(self.featurizer.dim(), 0.0);
        self.featurizer.featurize_into(self.env.state(), out);
    }

    fn candidates(&self) -> Result<ActionSet, TrainError> {
        candidates_for(self.algorithm, self.env.kit(), self.env.state())
    }

    fn lookahead(&mut self, candidates: ActionSet) -> Option<Lookahead> {
        self.algorithm
            .competitive()
            .then(|| lookahead_sets(self.env.state_mut(), candidates))
    }

    fn step(&mut self, action: usize) -> Result<(f64, bool), TrainError> {
        let out = self.env.step(action)?;
        Ok((out.reward.value(), out.terminal))
    }

    fn success(&self) -> bool {
        matches!(self.env.state().outcome(), Outcome::Win | Outcome::Draw)
    }
}

/// Trains `config.algorithm` against the simulated user of `kit`, with the
/// user drawing from the `train/user` stream of `config.seed`.
pub fn train_policy(config: &AgentConfig, kit: Arc<DialogueKit>) -> Result<(Policy, TrainOutput), TrainError> {
    let mut task = DialogueTask::new(kit.clone(), config.algorithm, seed::stream(config.seed, "train/user"));
    let out = train(config, &mut task)?;
    let policy = Policy::new(config.algorithm, out.net.clone(), kit)?;
    Ok((policy, out))
}

/// A trained Q-network with the action filtering of its algorithm.
#[derive(Debug, Clone)]
pub struct Policy {
    pub algorithm: Algorithm,
    pub featurizer: Featurizer,
    pub net: DenseNet,
    pub kit: Arc<DialogueKit>,
}

impl Policy {
    pub fn new(algorithm: Algorithm, net: DenseNet, kit: Arc<DialogueKit>) -> Result<Self, NnError> {
        let featurizer = Featurizer::new(kit.variant, algorithm.temporal());
        let catalogue = kit.catalogue();
        if net.input_dim() != featurizer.dim() {
            return Err(NnError::DimMismatch {
                expected: featurizer.dim(),
                found: net.input_dim(),
            });
        }
        if net.output_dim() != catalogue.len() {
            return Err(NnError::DimMismatch {
                expected: catalogue.len(),
                found: net.output_dim(),
            });
        }
        Ok(Policy {
            algorithm,
            featurizer,
            net,
            kit,
        })
    }

    pub fn variant(&self) -> Variant {
        self.kit.variant
    }

    pub fn catalogue(&self) -> ActCatalogue {
        self.kit.catalogue()
    }

    pub fn q_values(&self, state: &EpisodeState) -> Vec<f64> {
        self.net
            .forward(&self.featurizer.featurize(state))
            .expect("featurizer width matches the network")
    }

    /// Greedy action with the algorithm's filtering. With
    /// `permitted_only`, candidates are further limited to acts the phase
    /// machine accepts (falling back to all of those).
    pub fn greedy_action(&self, state: &mut EpisodeState, permitted_only: bool) -> Result<usize, TrainError> {
        let mut cands = candidates_for(self.algorithm, &self.kit, state)?;
        if permitted_only {
            let permitted = state.permitted_acts();
            let both: ActionSet = cands.iter().filter(|&i| permitted.contains(i)).collect();
            cands = if both.is_empty() { permitted } else { both };
        }
        let la = self.algorithm.competitive().then(|| lookahead_sets(state, cands));
        let q = self.q_values(state);
        let mut rng = rand::rngs::mock::StepRng::new(u64::MAX, 0);
        select_action(&q, cands, la.as_ref(), 0.0, &mut rng)
    }

    pub fn greedy_act(&self, state: &mut EpisodeState, permitted_only: bool) -> Result<DialogueAct, TrainError> {
        Ok(self.catalogue().act(self.greedy_action(state, permitted_only)?))
    }

    pub fn meta(&self) -> ModelMeta {
        ModelMeta::for_features(self.featurizer.index())
            .with("algorithm", self.algorithm.name())
            .with("variant", self.variant().name())
            .with("hidden_width", self.net.dims()[1].to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        save_model(path, &AnyNet::Dense(self.net.clone()), &self.meta())
    }

    /// Loads a policy saved by [`Policy::save`], checking it against the
    /// feature manifest of `kit`'s variant.
    pub fn load(path: &Path, kit: Arc<DialogueKit>) -> Result<Self, NnError> {
        let (net, meta) = load_model(path)?;
        let net = net.into_dense()?;
        let algorithm: Algorithm = meta
            .info
            .get("algorithm")
            .ok_or_else(|| NnError::Corrupt("missing algorithm".into()))?
            .parse()
            .map_err(NnError::Corrupt)?;
        let policy = Policy::new(algorithm, net, kit)?;
        meta.check_manifest(policy.featurizer.index())?;
        Ok(policy)
    }

    /// Variant recorded in a saved model's metadata.
    pub fn saved_variant(path: &Path) -> Result<Variant, NnError> {
        let (_, meta) = load_model(path)?;
        meta.info
            .get("variant")
            .ok_or_else(|| NnError::Corrupt("missing variant".into()))?
            .parse()
            .map_err(|e: crate::game::GameError| NnError::Corrupt(e.to_string()))
    }
}
