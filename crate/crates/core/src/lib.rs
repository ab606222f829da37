//! In-game win probability for American football.
//!
//! The pipeline: play-by-play rows ([`ingest`]) become normalized
//! [`domain::GameState`]s, which [`features`] turns into a 21-column design
//! row. [`models`] fits a logistic GLM, Gaussian naive Bayes, or a small
//! feedforward network on those rows; [`ratings`] supplies the team-strength
//! differential; [`eval`] measures calibration and accuracy. [`synth`] holds
//! seeded generators with known ground truth used by the self-test.

pub mod domain;
pub mod features;
pub mod ratings;
pub mod ingest;
pub mod models;
pub mod eval;
pub mod synth;
pub mod selftest;
