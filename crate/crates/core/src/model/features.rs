//! Handcrafted per-point descriptors from local neighborhoods.

use crate::cloud::{HashGrid, Point, PointCloud};
use crate::error::{Error, Result};

use super::eigen::{symmetric_eigen3, Mat3};

/// Columns preceding the cloud's own auxiliary channels.
pub const GEOMETRIC_FEATURES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub k_neighbors: usize,
    /// Height above the batch minimum is divided by this, meters.
    pub height_scale: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 16,
            height_scale: 10.0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 3 {
            return Err(Error::contract("feature encoding needs at least 3 neighbors"));
        }
        if !(self.height_scale > 0.0) {
            return Err(Error::contract("height scale must be positive"));
        }
        Ok(())
    }

    pub fn width(&self, aux_channels: usize) -> usize {
        GEOMETRIC_FEATURES + aux_channels
    }
}

/// Row-major feature matrix, one row per batch point.
///
/// Columns: scaled height above the batch minimum, linearity, planarity,
/// sphericity, verticality, `ln(1 + density)` with density in points per
/// cubic meter, then the cloud's auxiliary channels unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeatures {
    pub rows: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl PointFeatures {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }
}

/// Eigen-descriptors of one neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeDescriptors {
    pub linearity: f64,
    pub planarity: f64,
    pub sphericity: f64,
    pub verticality: f64,
}

pub fn covariance(points: &[Point]) -> Mat3 {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for d in 0..3 {
            mean[d] += p[d] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for p in points {
        let q = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += q[i] * q[j] / n;
            }
        }
    }
    cov
}

/// Linearity, planarity and sphericity from the sorted covariance spectrum;
/// verticality is `1 - |n_z|` for the normal (smallest-eigenvalue) direction.
pub fn shape_descriptors(points: &[Point]) -> ShapeDescriptors {
    let eig = symmetric_eigen3(&covariance(points));
    let [l1, l2, l3] = eig.values.map(|v| v.max(0.0));
    let normal = eig.vectors[2];
    if l1 <= f64::EPSILON * 1e-3 {
        return ShapeDescriptors {
            linearity: 0.0,
            planarity: 0.0,
            sphericity: 0.0,
            verticality: 0.0,
        };
    }
    ShapeDescriptors {
        linearity: ((l1 - l2) / l1).clamp(0.0, 1.0),
        planarity: ((l2 - l3) / l1).clamp(0.0, 1.0),
        sphericity: (l3 / l1).clamp(0.0, 1.0),
        verticality: (1.0 - normal[2].abs()).clamp(0.0, 1.0),
    }
}

/// Encodes the points of a batch, using `coords` in place of the cloud's
/// own coordinates (typically the augmented batch coordinates).
///
/// Neighborhoods are the `k` nearest batch points including the point
/// itself; smaller batches pad by repeating the nearest available points.
pub fn encode_features(
    cloud: &PointCloud,
    indices: &[usize],
    coords: &[Point],
    config: &FeatureConfig,
) -> Result<PointFeatures> {
    config.validate()?;
    if indices.len() != coords.len() {
        return Err(Error::contract(format!(
            "{} batch indices but {} coordinates",
            indices.len(),
            coords.len()
        )));
    }
    let aux = cloud.feature_width();
    let width = config.width(aux);
    let mut values = Vec::with_capacity(coords.len() * width);
    if coords.is_empty() {
        return Ok(PointFeatures { rows: 0, width, values });
    }

    let z_min = coords.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    let grid = HashGrid::new(coords, neighborhood_cell(coords, config.k_neighbors));
    let k = config.k_neighbors;
    let mut neighborhood = Vec::with_capacity(k);
    for (row, p) in coords.iter().enumerate() {
        let found = grid.knn(coords, *p, k);
        neighborhood.clear();
        neighborhood.extend(found.iter().map(|&j| coords[j]));
        let mut pad = found.iter().cycle();
        while neighborhood.len() < k {
            neighborhood.push(coords[*pad.next().expect("knn returns the query point")]);
        }
        let shape = shape_descriptors(&neighborhood);
        let reach = neighborhood
            .iter()
            .map(|q| crate::cloud::dist2(p, q))
            .fold(0.0f64, f64::max)
            .sqrt()
            .max(1e-3);
        let density = k as f64 / (4.0 / 3.0 * std::f64::consts::PI * reach.powi(3));
        values.extend_from_slice(&[
            (p[2] - z_min) / config.height_scale,
            shape.linearity,
            shape.planarity,
            shape.sphericity,
            shape.verticality,
            density.ln_1p(),
        ]);
        values.extend_from_slice(cloud.feature_row(indices[row]));
    }
    Ok(PointFeatures {
        rows: coords.len(),
        width,
        values,
    })
}

/// Grid cell sized so a cell holds roughly `k` points of the batch footprint.
fn neighborhood_cell(coords: &[Point], k: usize) -> f64 {
    let (mut lo, mut hi) = (coords[0], coords[0]);
    for p in coords {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(1e-6);
    (area * k as f64 / coords.len() as f64).sqrt().max(0.05)
}
