//! Point containers, grid subsampling, spatial queries and augmentation.

mod augment;
mod grid;
mod subsample;

pub use augment::{augment, AugmentConfig, AugmentParams};
pub use grid::HashGrid;
pub use subsample::{grid_subsample, transfer_labels, SubsampleMapping};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Coordinates in meters plus `feature_width` auxiliary channels per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    coords: Vec<Point>,
    features: Vec<f64>,
    feature_width: usize,
}

impl PointCloud {
    /// Builds a cloud from coordinates and a row-major feature matrix.
    pub fn new(coords: Vec<Point>, features: Vec<f64>, feature_width: usize) -> Result<Self> {
        if coords.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("point cloud contains non-finite coordinates".into()));
        }
        if features.len() != coords.len() * feature_width {
            return Err(Error::contract(format!(
                "feature buffer has {} values, expected {} points x {} channels",
                features.len(),
                coords.len(),
                feature_width
            )));
        }
        Ok(Self {
            coords,
            features,
            feature_width,
        })
    }

    pub fn from_coords(coords: Vec<Point>) -> Result<Self> {
        Self::new(coords, Vec::new(), 0)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_width..(i + 1) * self.feature_width]
    }

    /// Indices within `radius` of `center`, ascending.
    ///
    /// Builds a throwaway [`HashGrid`]; keep a grid around for repeated queries.
    pub fn radius_query(&self, center: Point, radius: f64) -> Vec<usize> {
        HashGrid::new(&self.coords, radius).radius_query(&self.coords, center, radius)
    }

    /// Subset of the cloud in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let coords = indices.iter().map(|&i| self.coords[i]).collect();
        let mut features = Vec::with_capacity(indices.len() * self.feature_width);
        for &i in indices {
            features.extend_from_slice(self.feature_row(i));
        }
        PointCloud {
            coords,
            features,
            feature_width: self.feature_width,
        }
    }

    /// Axis-aligned bounds as (min, max); `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point, Point)> {
        let first = *self.coords.first()?;
        Some(self.coords.iter().fold((first, first), |(mut lo, mut hi), p| {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
            (lo, hi)
        }))
    }
}

/// Per-point class indices, with [`LabelArray::IGNORE`] marking unlabeled entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelArray {
    labels: Vec<u32>,
}

impl LabelArray {
    pub const IGNORE: u32 = u32::MAX;

    pub fn new(labels: Vec<u32>) -> Self {
        Self { labels }
    }

    /// Checks every non-ignored entry against `class_count`.
    pub fn validated(labels: Vec<u32>, class_count: usize) -> Result<Self> {
        if let Some((i, &l)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l != Self::IGNORE && l as usize >= class_count)
        {
            return Err(Error::contract(format!(
                "label {l} at index {i} is outside [0, {class_count})"
            )));
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        match self.labels[i] {
            Self::IGNORE => None,
            l => Some(l as usize),
        }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    /// Number of points per class; ignored entries are skipped.
    pub fn class_counts(&self, class_count: usize) -> Vec<usize> {
        let mut counts = vec![0; class_count];
        for &l in &self.labels {
            if l != Self::IGNORE {
                counts[l as usize] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    names: Vec<String>,
}

impl ClassCatalog {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::contract("a class catalog needs at least two classes"));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::contract(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self { names })
    }

    /// Catalog with names "class_0" .. "class_{k-1}".
    pub fn anonymous(class_count: usize) -> Result<Self> {
        Self::new((0..class_count).map(|c| format!("class_{c}")).collect())
    }

    pub fn class_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
