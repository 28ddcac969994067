//! Synthetic eye-in-hand grasp sequences and pre-shape evaluation.

pub mod config;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod render;
pub mod rng;
pub mod scene;
pub mod taxonomy;
pub mod textfmt;
pub mod trajectory;
