pub mod drl;
pub mod env;
pub mod features;
pub mod game;
pub mod harness;
pub mod nn;
pub mod perception;
pub mod play;
pub mod seed;
