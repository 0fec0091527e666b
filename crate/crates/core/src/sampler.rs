//! Circular spatial mini-batches.
//!
//! Training batches are centered on the point of lowest potential; every
//! point a batch touches has its potential raised by a distance-dependent
//! amount, which spreads visits evenly over the scene. Test batches tile the
//! scene on a square grid whose spacing equals the radius, so neighbouring
//! circles overlap by half and each point is seen about three times.
//!
//! Circles are horizontal: distances ignore z, so a batch is a vertical
//! cylinder through the scene.

use rand::distr::Open01;
use rand::Rng;

use crate::cloud::{HashGrid, Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSpec {
    /// Circle radius, meters.
    pub radius: f64,
    /// Largest number of points in one training batch.
    pub point_cap: usize,
    /// Exponent of the potential increment `(1 - d/r)^p`.
    pub falloff_exponent: f64,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            radius: 10.0,
            point_cap: 4096,
            falloff_exponent: 2.0,
        }
    }
}

impl BatchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::contract(format!("batch radius must be positive, got {}", self.radius)));
        }
        if self.point_cap < 1 {
            return Err(Error::contract("batch point cap must be at least 1"));
        }
        if !(self.falloff_exponent > 0.0) {
            return Err(Error::contract("falloff exponent must be positive"));
        }
        Ok(())
    }

    /// Potential increment for a point at horizontal distance `d` from the center.
    pub fn increment(&self, d: f64) -> f64 {
        (1.0 - d / self.radius).clamp(0.0, 1.0).powf(self.falloff_exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub potentials: Vec<f64>,
}

impl PotentialField {
    /// I.i.d. uniform potentials on the open interval (0, 1).
    pub fn init<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::contract("potential field needs at least one point"));
        }
        Ok(Self {
            potentials: (0..n).map(|_| rng.sample::<f64, _>(Open01)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.potentials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty()
    }

    /// Index of the smallest potential, lowest index on ties.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.potentials.iter().enumerate().skip(1) {
            if p < self.potentials[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    /// Distinct point indices, ascending.
    pub indices: Vec<usize>,
    pub center: Point,
    /// Parallel to `indices`: true where the point carries a weak label.
    pub labeled_mask: Vec<bool>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn horizontal_distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Draws potential-driven training batches from one cloud.
#[derive(Debug, Clone)]
pub struct TrainSampler {
    spec: BatchSpec,
    grid: HashGrid,
}

impl TrainSampler {
    pub fn new(cloud: &PointCloud, spec: BatchSpec) -> Result<Self> {
        spec.validate()?;
        let grid = HashGrid::planar(cloud.coords(), spec.radius);
        Ok(Self { spec, grid })
    }

    pub fn spec(&self) -> &BatchSpec {
        &self.spec
    }

    /// Picks the next batch and raises the potentials it covers.
    ///
    /// `labeled` is a per-point membership mask of the weak-label set.
    pub fn next_batch(
        &self,
        field: &mut PotentialField,
        cloud: &PointCloud,
        labeled: &[bool],
    ) -> Result<MiniBatch> {
        if field.len() != cloud.len() || labeled.len() != cloud.len() {
            return Err(Error::contract(format!(
                "potential field ({}) and label mask ({}) must match the cloud ({})",
                field.len(),
                labeled.len(),
                cloud.len()
            )));
        }
        let coords = cloud.coords();
        let center = coords[field.argmin()];
        let mut members: Vec<(f64, usize)> = self
            .grid
            .radius_query(coords, center, self.spec.radius)
            .into_iter()
            .map(|i| (horizontal_distance(&coords[i], &center), i))
            .collect();
        if members.len() > self.spec.point_cap {
            members.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            members.truncate(self.spec.point_cap);
            members.sort_unstable_by_key(|m| m.1);
        }
        for &(d, i) in &members {
            field.potentials[i] += self.spec.increment(d);
        }
        let indices: Vec<usize> = members.into_iter().map(|m| m.1).collect();
        let labeled_mask = indices.iter().map(|&i| labeled[i]).collect();
        Ok(MiniBatch {
            indices,
            center,
            labeled_mask,
        })
    }
}

/// One-shot form of [`TrainSampler::next_batch`].
pub fn next_train_batch(
    field: &mut PotentialField,
    cloud: &PointCloud,
    spec: &BatchSpec,
    labeled: &[bool],
) -> Result<MiniBatch> {
    TrainSampler::new(cloud, spec.clone())?.next_batch(field, cloud, labeled)
}

/// Tiles the cloud with circles of `spec.radius` centered on a horizontal
/// grid of the same spacing. Empty circles are skipped; no point cap applies.
pub fn test_batches(cloud: &PointCloud, spec: &BatchSpec) -> Result<Vec<MiniBatch>> {
    spec.validate()?;
    let (lo, hi) = cloud
        .bounds()
        .ok_or_else(|| Error::contract("cannot tile an empty cloud"))?;
    let r = spec.radius;
    let coords = cloud.coords();
    let grid = HashGrid::planar(coords, r);
    let nx = ((hi[0] - lo[0]) / r).ceil() as usize;
    let ny = ((hi[1] - lo[1]) / r).ceil() as usize;
    let mut batches = Vec::new();
    for ix in 0..=nx {
        for iy in 0..=ny {
            let mut center = [lo[0] + ix as f64 * r, lo[1] + iy as f64 * r, 0.0];
            let indices = grid.radius_query(coords, center, r);
            if indices.is_empty() {
                continue;
            }
            center[2] = indices.iter().map(|&i| coords[i][2]).sum::<f64>() / indices.len() as f64;
            batches.push(MiniBatch {
                labeled_mask: vec![false; indices.len()],
                indices,
                center,
            });
        }
    }
    Ok(batches)
}
