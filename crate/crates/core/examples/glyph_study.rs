//! Classifier study on synthetic glyphs: leave-one-out on the clean set and
//! the two cross-noise transfers.
//!
//! `cargo run --release -p noughts --example glyph_study [seed] [out_dir]`

use std::path::PathBuf;

use noughts::perception::{generate_glyphs, glyph_study, write_dataset, ClassifierConfig, GlyphDatasetSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    let out: Option<PathBuf> = args.next().map(PathBuf::from);

    let spec = GlyphDatasetSpec { seed, ..Default::default() };
    let dataset = generate_glyphs(&spec);
    if let Some(dir) = &out {
        write_dataset(dir, &dataset)?;
        println!("wrote {} images to {}", dataset.examples.len(), dir.display());
    }

    let config = ClassifierConfig { seed, ..Default::default() };
    let report = glyph_study(&dataset, &config)?;
    println!("leave-one-out, clean set:\n{}\n", report.loo_clean);
    if let (Some(cn), Some(nc)) = (&report.clean_to_noisy, &report.noisy_to_clean) {
        println!("trained clean, tested noisy:\n{cn}\n");
        println!("trained noisy, tested clean:\n{nc}\n");
    }
    println!("{:.1} s", report.seconds);
    Ok(())
}
