//! Trains one agent against the simulated user and evaluates it greedily.
//!
//! cargo run --release --example train_agent -- [algorithm] [variant] [steps] [seed] [width]

use std::time::Instant;

use noughts::drl::{evaluate, train, AgentConfig, Algorithm, DialogueTask, Policy};
use noughts::env::DialogueKit;
use noughts::game::Variant;
use noughts::seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let algorithm: Algorithm = arg(0, "competitive_temporal").parse()?;
    let variant: Variant = arg(1, "standard").parse()?;
    let config = AgentConfig {
        algorithm,
        learning_steps: arg(2, "200000").parse()?,
        seed: arg(3, "1").parse()?,
        hidden_width: arg(4, "100").parse()?,
        ..AgentConfig::default()
    };

    let kit = DialogueKit::builtin(variant);
    let mut task = DialogueTask::new(kit.clone(), algorithm, seed::stream(config.seed, "train/user"));
    let t = Instant::now();
    let out = train(&config, &mut task)?;
    println!("trained {algorithm} on {} for {} steps ({} games) in {:.1?}", variant.name(), out.steps, out.games, t.elapsed());
    if let Some(last) = out.curve.last() {
        println!("last curve row: {last:?}");
    }

    let policy = Policy::new(algorithm, out.net, kit)?;
    let t = Instant::now();
    let report = evaluate(&policy, 3000, seed::derive(config.seed, "eval"))?;
    println!("evaluated in {:.1?}", t.elapsed());
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
