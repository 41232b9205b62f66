//! Walks one dialogue episode against the simulated user with a random
//! agent restricted to permitted acts, printing each act, its phase and
//! reward. Ends with the feature layout the networks see.
//!
//! cargo run --release --example dialogue_episode -- [standard|ultimate] [seed]

use noughts::env::{DialogueKit, Environment};
use noughts::features::Featurizer;
use noughts::game::{render_board, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant: Variant = args.first().map_or("standard", String::as_str).parse()?;
    let seed: u64 = args.get(1).map_or(Ok(3), |s| s.parse())?;

    let kit = DialogueKit::builtin(variant);
    let catalogue = kit.catalogue();
    println!("{} acts in the catalogue", catalogue.len());
    let mut env = Environment::new(kit.clone(), ChaCha8Rng::seed_from_u64(seed));
    let mut total = 0.0;
    while !env.state().is_terminal() {
        let permitted = env.state().permitted_acts();
        let pick = env.rng().gen_range(0..permitted.len());
        let action = permitted.nth(pick).expect("permitted set is non-empty");
        let act = catalogue.act(action);
        let phase = env.state().phase();
        let out = env.step(action)?;
        total += out.reward.value();
        println!(
            "{:>3} {:<16} {:<34} reward {:>5}",
            env.state().step_count(),
            format!("{phase:?}"),
            act.label(variant),
            out.reward.value()
        );
    }
    println!("\noutcome {:?}, return {total}", env.state().outcome());
    println!("{}", render_board(env.state().game()));

    let f = Featurizer::new(variant, true);
    println!("feature vector width {} (layout hash {})", f.dim(), f.index().hash());
    for key in f.index().keys().iter().take(8) {
        println!("  {key}");
    }
    println!("  ...");
    Ok(())
}
