//! Fixtures shared by the benchmarks.

use hdradar::sim::{PointTarget, Scene};

/// A fixed three-target scene with mild noise.
pub fn bench_scene() -> Scene {
    Scene {
        noise_sigma: 0.5,
        seed: 42,
        targets: vec![
            PointTarget::new(4.2, 1.5, -20.0),
            PointTarget::new(7.9, -3.0, 5.0),
            PointTarget::new(10.4, 0.5, 31.0),
        ],
    }
}
