use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Point;

/// Ranges for random batch augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub rotate: bool,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Standard deviation of per-coordinate jitter, meters.
    pub jitter_sigma: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotate: true,
            scale_min: 0.9,
            scale_max: 1.1,
            jitter_sigma: 0.01,
        }
    }
}

impl AugmentConfig {
    /// No-op augmentation. Still consumes the same random draws.
    pub fn disabled() -> Self {
        Self {
            rotate: false,
            scale_min: 1.0,
            scale_max: 1.0,
            jitter_sigma: 0.0,
        }
    }
}

/// One concrete draw of augmentation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentParams {
    pub angle: f64,
    pub scale: f64,
    /// Per-point offsets, meters.
    pub jitter: Vec<Point>,
}

impl AugmentParams {
    pub fn sample<R: Rng + ?Sized>(config: &AugmentConfig, count: usize, rng: &mut R) -> Self {
        // Every draw happens regardless of the config so the stream position
        // depends only on the batch size.
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let unit: f64 = rng.random();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let jitter = (0..count)
            .map(|_| {
                let z: [f64; 3] = std::array::from_fn(|_| normal.sample(rng));
                z.map(|v| v * config.jitter_sigma)
            })
            .collect();
        Self {
            angle: if config.rotate { angle } else { 0.0 },
            scale: config.scale_min + unit * (config.scale_max - config.scale_min),
            jitter,
        }
    }

    /// Rotate about the z axis through the origin, scale, then jitter.
    pub fn apply(&self, coords: &[Point]) -> Vec<Point> {
        assert_eq!(self.jitter.len(), coords.len(), "jitter drawn for a different batch size");
        let (sin, cos) = self.angle.sin_cos();
        coords
            .iter()
            .zip(&self.jitter)
            .map(|(p, j)| {
                let x = cos * p[0] - sin * p[1];
                let y = sin * p[0] + cos * p[1];
                [
                    self.scale * x + j[0],
                    self.scale * y + j[1],
                    self.scale * p[2] + j[2],
                ]
            })
            .collect()
    }
}

/// Randomly rotates about the vertical axis, scales isotropically and jitters.
pub fn augment<R: Rng + ?Sized>(coords: &[Point], config: &AugmentConfig, rng: &mut R) -> Vec<Point> {
    AugmentParams::sample(config, coords.len(), rng).apply(coords)
}
