//! Shared fixtures for the benchmarks.

use roomgen_core::scene::{generate_toy_scene, Scene, ToyConfig};

/// Forbid-mode toy scene used across benchmarks.
pub fn toy_scene(seed: u64) -> Scene {
    generate_toy_scene(seed, &ToyConfig::default()).expect("default toy config is feasible")
}
