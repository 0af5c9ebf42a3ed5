//! Replays verifier counterexamples for fixed-point digital systems and
//! decides whether each one is reproducible.

pub mod cli;
pub mod counterexample;
pub mod fixed_point;
pub mod pipeline;
pub mod plot;
pub mod polynomial;
pub mod realization;
pub mod system;
pub mod validators;
