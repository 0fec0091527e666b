use std::collections::HashMap;

use super::{dist2, HashGrid, LabelArray, PointCloud};
use crate::error::{Error, Result};

/// Links a grid-subsampled cloud back to its source cloud.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubsampleMapping {
    /// For each kept point, the source point standing in for it.
    pub kept_to_source: Vec<usize>,
    /// For each source point, the kept point it takes values from.
    pub source_to_kept: Vec<usize>,
}

impl SubsampleMapping {
    pub fn identity(n: usize) -> Self {
        Self {
            kept_to_source: (0..n).collect(),
            source_to_kept: (0..n).collect(),
        }
    }

    pub fn kept_len(&self) -> usize {
        self.kept_to_source.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_to_kept.len()
    }

    /// Labels for the kept points, taken from their representative source points.
    pub fn restrict_labels(&self, source: &LabelArray) -> Result<LabelArray> {
        if source.len() != self.source_len() {
            return Err(Error::contract(format!(
                "{} labels for a mapping over {} source points",
                source.len(),
                self.source_len()
            )));
        }
        Ok(LabelArray::new(
            self.kept_to_source
                .iter()
                .map(|&s| source.as_slice()[s])
                .collect(),
        ))
    }
}

/// Keeps one point per occupied cubic cell of edge `cell_size`, placed at
/// the centroid of the cell's points (features are averaged the same way).
///
/// Kept points are ordered by the first source point that landed in their
/// cell. Every source point maps to its nearest kept point, ties going to
/// the lowest kept index.
pub fn grid_subsample(cloud: &PointCloud, cell_size: f64) -> Result<(PointCloud, SubsampleMapping)> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::contract(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    if cloud.is_empty() {
        let empty = PointCloud::new(Vec::new(), Vec::new(), cloud.feature_width())?;
        return Ok((empty, SubsampleMapping::default()));
    }

    let width = cloud.feature_width();
    let mut slot_of_cell: HashMap<[i64; 3], usize> = HashMap::new();
    let mut cell_of_point = Vec::with_capacity(cloud.len());
    let mut sums: Vec<([f64; 3], usize)> = Vec::new();
    let mut feature_sums: Vec<f64> = Vec::new();
    for (i, p) in cloud.coords().iter().enumerate() {
        let key = [
            (p[0] / cell_size).floor() as i64,
            (p[1] / cell_size).floor() as i64,
            (p[2] / cell_size).floor() as i64,
        ];
        let slot = *slot_of_cell.entry(key).or_insert_with(|| {
            sums.push(([0.0; 3], 0));
            feature_sums.extend(std::iter::repeat_n(0.0, width));
            sums.len() - 1
        });
        let (acc, count) = &mut sums[slot];
        for d in 0..3 {
            acc[d] += p[d];
        }
        *count += 1;
        for (f, v) in feature_sums[slot * width..(slot + 1) * width]
            .iter_mut()
            .zip(cloud.feature_row(i))
        {
            *f += v;
        }
        cell_of_point.push(slot);
    }

    let kept_coords: Vec<_> = sums
        .iter()
        .map(|(acc, n)| {
            let n = *n as f64;
            [acc[0] / n, acc[1] / n, acc[2] / n]
        })
        .collect();
    let mut kept_features = feature_sums;
    for (slot, (_, n)) in sums.iter().enumerate() {
        for v in &mut kept_features[slot * width..(slot + 1) * width] {
            *v /= *n as f64;
        }
    }

    let grid = HashGrid::new(&kept_coords, cell_size);
    let source_to_kept: Vec<usize> = cloud
        .coords()
        .iter()
        .map(|p| grid.knn(&kept_coords, *p, 1)[0])
        .collect();

    // Representative: the member of the cell nearest its centroid, preferring
    // members that already map to this kept point.
    let mut best: Vec<Option<(bool, f64, usize)>> = vec![None; kept_coords.len()];
    for (i, p) in cloud.coords().iter().enumerate() {
        let slot = cell_of_point[i];
        let candidate = (source_to_kept[i] == slot, dist2(p, &kept_coords[slot]), i);
        let better = match best[slot] {
            None => true,
            Some((own, d, _)) => (candidate.0 && !own) || (candidate.0 == own && candidate.1 < d),
        };
        if better {
            best[slot] = Some(candidate);
        }
    }
    let mut mapping = SubsampleMapping {
        kept_to_source: Vec::with_capacity(best.len()),
        source_to_kept,
    };
    for (slot, entry) in best.into_iter().enumerate() {
        let (_, _, rep) = entry.expect("every cell has at least one member");
        // A representative always takes its own kept value, even in the rare
        // layout where another centroid is marginally closer.
        mapping.source_to_kept[rep] = slot;
        mapping.kept_to_source.push(rep);
    }

    let kept = PointCloud::new(kept_coords, kept_features, width)?;
    Ok((kept, mapping))
}

/// Copies each kept point's value to every source point mapped to it.
pub fn transfer_labels<T: Clone>(mapping: &SubsampleMapping, sub_values: &[T]) -> Result<Vec<T>> {
    if sub_values.len() != mapping.kept_len() {
        return Err(Error::contract(format!(
            "{} values for {} kept points",
            sub_values.len(),
            mapping.kept_len()
        )));
    }
    Ok(mapping
        .source_to_kept
        .iter()
        .map(|&k| sub_values[k].clone())
        .collect())
}
