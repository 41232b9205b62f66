//! Plays games in which the user's moves are read from rendered board
//! frames, at increasing noise levels.
//!
//! `cargo run --release -p noughts --example perception_loop [games] [steps] [seed]`

use std::time::Instant;

use noughts::drl::{train_policy, AgentConfig, Algorithm};
use noughts::env::DialogueKit;
use noughts::game::Variant;
use noughts::perception::{
    generate_glyphs, run_episode_with_perception, train_classifier, ClassifierConfig, GlyphDatasetSpec, ObserverConfig,
    Split,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let games: u64 = arg(0, "200").parse()?;
    let steps: u64 = arg(1, "50000").parse()?;
    let seed: u64 = arg(2, "1").parse()?;

    let t = Instant::now();
    let dataset = generate_glyphs(&GlyphDatasetSpec { seed, noisy: 0, ..Default::default() });
    let classifier = train_classifier(dataset.split(Split::Clean), &ClassifierConfig { seed, ..Default::default() })?;
    println!("classifier trained in {:.1?}", t.elapsed());

    let config = AgentConfig {
        algorithm: Algorithm::CompetitiveTemporal,
        learning_steps: steps,
        seed,
        ..Default::default()
    };
    let t = Instant::now();
    let (policy, _) = train_policy(&config, DialogueKit::builtin(Variant::Standard))?;
    println!("policy trained in {:.1?}", t.elapsed());

    for level in [0.0, 0.5, 1.0] {
        let t = Instant::now();
        let observer = ObserverConfig { noise_level: level, ..Default::default() };
        let r = run_episode_with_perception(&policy, &classifier, &observer, games, seed)?;
        println!(
            "noise {level:.1}: {} of {} user moves misread (rate {:.4}), task success {:.3}, {:.1?}",
            r.misrecognitions,
            r.user_moves,
            r.misrecognition_rate,
            r.eval.task_success,
            t.elapsed()
        );
    }
    Ok(())
}
