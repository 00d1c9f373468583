//! Minimum-time lane-free intersection crossing for connected automated
//! vehicles: single-track dynamics, polytope geometry, dual-form collision
//! constraints, direct collocation and an interior-point NLP solver.

pub mod duality;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod par;
pub mod scenario;
pub mod solver;
pub mod transcription;
