//! Recognising handwritten game moves from rectified board images.
//!
//! Synthetic glyph images train a small convolutional classifier; a
//! tracker splits each board frame into square patches, rejects frames
//! disturbed by a hand, smooths labels over three frames and commits the
//! most confident new glyph on an empty square.

mod classifier;
mod episode;
mod glyphs;
mod tracker;

pub use classifier::{
    cross_validate_loo, evaluate_classifier, glyph_study, train_classifier, ClassifierConfig, ClassifierError,
    ConfusionMatrix, GlyphClassifier, GlyphStudyReport, OracleClassifier,
};
pub use episode::{
    check_tracker_with_oracle, run_episode_with_perception, BoardRenderer, MoveObserver, ObserverConfig, OracleCheck,
    PerceptionEpisode, Recognition,
};
pub use glyphs::{
    generate_glyphs, read_dataset, read_pgm, render_glyph, write_dataset, write_pgm, GlyphDataset, GlyphDatasetSpec,
    GlyphExample, GlyphParams, NoiseParams, Split,
};
pub use tracker::{events_csv, Tracker, TrackerEvent, TrackerLogRow};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Player;

/// Side of one square patch in pixels.
pub const RHO: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Glyph {
    Nought,
    Cross,
    Nothing,
}

impl Glyph {
    pub const ALL: [Glyph; 3] = [Glyph::Nought, Glyph::Cross, Glyph::Nothing];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Glyph> {
        Glyph::ALL.get(i).copied()
    }

    pub const fn name(self) -> &'static str {
        match self {
            Glyph::Nought => "nought",
            Glyph::Cross => "cross",
            Glyph::Nothing => "nothing",
        }
    }

    pub const fn of_player(p: Player) -> Glyph {
        match p {
            Player::Nought => Glyph::Nought,
            Player::Cross => Glyph::Cross,
        }
    }
}

impl fmt::Display for Glyph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Glyph {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Glyph::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown glyph label {s:?}"))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("frame sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

/// Square greyscale image, row-major, intensities in [0, 1] (ink = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    side: usize,
    pixels: Vec<f64>,
}

impl Frame {
    pub fn blank(side: usize) -> Self {
        Frame {
            side,
            pixels: vec![0.0; side * side],
        }
    }

    /// Intensities are clamped to [0, 1].
    pub fn from_pixels(side: usize, mut pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), side * side);
        pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
        Frame { side, pixels }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    /// The `RHO`-sized patch whose top-left corner is at square (`row`, `col`).
    pub fn patch(&self, row: usize, col: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(RHO * RHO);
        for y in 0..RHO {
            let start = (row * RHO + y) * self.side + col * RHO;
            out.extend_from_slice(&self.pixels[start..start + RHO]);
        }
        out
    }
}

/// Euclidean distance between two frames.
pub fn frame_distance(a: &Frame, b: &Frame) -> Result<f64, FrameError> {
    if a.pixels.len() != b.pixels.len() {
        return Err(FrameError::SizeMismatch(a.pixels.len(), b.pixels.len()));
    }
    Ok(a.pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Default occlusion threshold for a frame: 0.04 times the square root of
/// its pixel count, which scales like the distance of a fixed fraction of
/// changed pixels.
pub fn default_tau(side: usize) -> f64 {
    0.04 * ((side * side) as f64).sqrt()
}
