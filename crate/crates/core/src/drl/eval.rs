use serde::{Deserialize, Serialize};

use super::{Policy, TrainError};
use crate::env::{Environment, Outcome};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub games: u64,
    /// Mean over games of the per-step reward.
    pub avg_reward: f64,
    /// Win rate plus draw rate.
    pub task_success: f64,
    pub avg_dialogue_length: f64,
    pub win_rate: f64,
    pub draw_rate: f64,
    /// Losses, including games cut off by the step limit.
    pub loss_rate: f64,
}

impl EvalReport {
    /// Aggregates `(mean step reward, dialogue length, outcome)` per game.
    pub fn summarize(games: impl IntoIterator<Item = (f64, u32, Outcome)>) -> Self {
        let (mut n, mut reward, mut length, mut wins, mut draws) = (0u64, 0.0, 0.0, 0u64, 0u64);
        for (r, l, o) in games {
            n += 1;
            reward += r;
            length += l as f64;
            match o {
                Outcome::Win => wins += 1,
                Outcome::Draw => draws += 1,
                _ => {}
            }
        }
        let d = n.max(1) as f64;
        let (win_rate, draw_rate) = (wins as f64 / d, draws as f64 / d);
        EvalReport {
            games: n,
            avg_reward: reward / d,
            task_success: (wins + draws) as f64 / d,
            avg_dialogue_length: length / d,
            win_rate,
            draw_rate,
            loss_rate: (n - wins - draws) as f64 / d,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GameResult {
    reward: f64,
    length: u32,
    outcome: Option<Outcome>,
}

fn play_game(policy: &Policy, seed: u64, game: u64) -> Result<GameResult, TrainError> {
    let rng = seed::stream(seed, &format!("eval/user/{game}"));
    let mut env = Environment::new(policy.kit.clone(), rng);
    let mut total = 0.0;
    loop {
        let a = policy.greedy_action(env.state_mut(), false)?;
        let out = env.step(a)?;
        total += out.reward.value();
        if out.terminal {
            let s = env.state();
            return Ok(GameResult {
                reward: total / s.step_count() as f64,
                length: s.step_count(),
                outcome: Some(s.outcome()),
            });
        }
    }
}

/// Plays `games` greedy episodes against the simulated user. Game `g` uses
/// its own seeded generator, so the report does not depend on how games are
/// spread over threads.
pub fn evaluate(policy: &Policy, games: u64, seed: u64) -> Result<EvalReport, TrainError> {
    if games == 0 {
        return Err(TrainError::Config("games must be positive".into()));
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(games as usize);
    let mut results = vec![GameResult::default(); games as usize];
    let chunk = results.len().div_ceil(threads);
    std::thread::scope(|scope| -> Result<(), TrainError> {
        let handles: Vec<_> = results
            .chunks_mut(chunk)
            .enumerate()
            .map(|(c, slots)| {
                scope.spawn(move || -> Result<(), TrainError> {
                    for (k, slot) in slots.iter_mut().enumerate() {
                        *slot = play_game(policy, seed, (c * chunk + k) as u64)?;
                    }
                    Ok(())
                })
            })
            .collect();
        for h in handles {
            h.join().expect("evaluation worker panicked")?;
        }
        Ok(())
    })?;

    Ok(EvalReport::summarize(
        results.iter().map(|r| (r.reward, r.length, r.outcome.expect("every game was played"))),
    ))
}
