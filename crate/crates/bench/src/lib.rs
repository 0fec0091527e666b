//! Shared fixtures for the benchmarks.

use wsseg_core::eval::synth::{synth_scene, SceneSpec};
use wsseg_core::{LabelArray, PointCloud};

/// A seeded synthetic scene of roughly `extent² · 5` points.
pub fn scene(extent: f64) -> (PointCloud, LabelArray) {
    let spec = SceneSpec {
        extent,
        buildings: (extent / 15.0) as usize,
        trees: (extent / 3.0) as usize,
        poles: (extent / 4.0) as usize,
        building_size_max: (extent / 4.0).max(8.0),
        seed: 11,
        ..SceneSpec::default()
    };
    synth_scene(&spec).expect("valid bench scene").into_parts()
}
