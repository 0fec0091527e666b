//! Sparse, class-balanced weak labels drawn from ground truth.
//!
//! Each class contributes at most `per_class_cap` labels and never more than
//! a tenth of its own population. Draws can extend a parent set, so a
//! sparser configuration is always a subset of a denser one.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::cloud::{ClassCatalog, LabelArray};
use crate::error::{Error, Result};

/// Fraction of a class's population that may carry weak labels.
pub const CLASS_CEILING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabelSet {
    /// Sorted, distinct point indices.
    pub labeled_indices: Vec<usize>,
    pub labels: Vec<u32>,
    /// Realized fraction of labeled points, M / N.
    pub ratio: f64,
    pub per_class_cap: usize,
    pub seed: u64,
    /// Classes that had no population to draw from.
    pub warnings: Vec<String>,
}

impl WeakLabelSet {
    /// Assembles a set from (index, class) pairs without the sampling rules.
    pub fn from_pairs(
        mut pairs: Vec<(usize, u32)>,
        cloud_size: usize,
        per_class_cap: usize,
        seed: u64,
    ) -> Result<Self> {
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::contract("weak label indices must be distinct"));
        }
        if let Some(&(i, _)) = pairs.iter().find(|(i, _)| *i >= cloud_size) {
            return Err(Error::contract(format!(
                "weak label index {i} outside a cloud of {cloud_size} points"
            )));
        }
        let ratio = if cloud_size == 0 {
            0.0
        } else {
            pairs.len() as f64 / cloud_size as f64
        };
        Ok(Self {
            labeled_indices: pairs.iter().map(|p| p.0).collect(),
            labels: pairs.iter().map(|p| p.1).collect(),
            ratio,
            per_class_cap,
            seed,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labeled_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labeled_indices.is_empty()
    }

    /// Membership mask over a cloud of `n` points.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.labeled_indices {
            mask[i] = true;
        }
        mask
    }

    /// Dense label array with unlabeled points set to ignore.
    pub fn to_label_array(&self, n: usize) -> LabelArray {
        let mut labels = vec![LabelArray::IGNORE; n];
        for (&i, &l) in self.labeled_indices.iter().zip(&self.labels) {
            labels[i] = l;
        }
        LabelArray::new(labels)
    }

    /// Like [`Self::to_label_array`] but rejects indices or classes out of range.
    pub fn to_label_array_checked(&self, n: usize, class_count: usize) -> Result<LabelArray> {
        if let Some(&i) = self.labeled_indices.iter().find(|&&i| i >= n) {
            return Err(Error::contract(format!(
                "weak label index {i} outside a cloud of {n} points"
            )));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(Error::contract(format!(
                "weak label class {l} outside {class_count} classes"
            )));
        }
        Ok(self.to_label_array(n))
    }

    pub fn class_counts(&self, class_count: usize) -> Vec<usize> {
        let mut counts = vec![0; class_count];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# ratio={} cap={} seed={}\n",
            self.ratio, self.per_class_cap, self.seed
        );
        for (i, l) in self.labeled_indices.iter().zip(&self.labels) {
            let _ = writeln!(out, "{i} {l}");
        }
        out
    }

    /// Parses the text form; `cloud_size` bounds the indices.
    pub fn from_text(text: &str, cloud_size: usize, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header line".into()))?;
        let mut cap = None;
        let mut seed = None;
        for field in header
            .strip_prefix('#')
            .ok_or_else(|| parse_err(1, "header must start with '#'".into()))?
            .split_whitespace()
        {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| parse_err(1, format!("malformed header field {field:?}")))?;
            match key {
                "ratio" => {}
                "cap" => cap = value.parse::<usize>().ok(),
                "seed" => seed = value.parse::<u64>().ok(),
                _ => return Err(parse_err(1, format!("unknown header key {key:?}"))),
            }
        }
        let (cap, seed) = cap
            .zip(seed)
            .ok_or_else(|| parse_err(1, "header needs numeric cap and seed".into()))?;
        let mut pairs = Vec::new();
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parsed = (|| {
                let i = parts.next()?.parse::<usize>().ok()?;
                let c = parts.next()?.parse::<u32>().ok()?;
                parts.next().is_none().then_some((i, c))
            })();
            pairs.push(parsed.ok_or_else(|| {
                parse_err(n + 1, format!("expected \"index class\", got {line:?}"))
            })?);
        }
        Self::from_pairs(pairs, cloud_size, cap, seed)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, cloud_size: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, cloud_size, path)
    }
}

/// How many labels class `population` receives under `cap`.
pub fn class_quota(population: usize, cap: usize) -> usize {
    let ceiling = (CLASS_CEILING * population as f64).floor() as usize;
    cap.min(ceiling).min(population)
}

/// Draws a weak-label set from `truth`.
///
/// With a `parent`, its picks for each class are kept and only the
/// remainder of the quota is drawn fresh from the rest of the class.
pub fn sample_weak_labels<R: Rng + ?Sized>(
    truth: &LabelArray,
    catalog: &ClassCatalog,
    per_class_cap: usize,
    rng: &mut R,
    seed: u64,
    parent: Option<&WeakLabelSet>,
) -> Result<WeakLabelSet> {
    if per_class_cap < 1 {
        return Err(Error::contract("per-class cap must be at least 1"));
    }
    let k = catalog.class_count();
    let mut populations: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in truth.as_slice().iter().enumerate() {
        if l == LabelArray::IGNORE {
            continue;
        }
        populations
            .get_mut(l as usize)
            .ok_or_else(|| Error::contract(format!("truth label {l} at {i} outside [0, {k})")))?
            .push(i);
    }

    let mut inherited: Vec<Vec<usize>> = vec![Vec::new(); k];
    if let Some(parent) = parent {
        for (&i, &l) in parent.labeled_indices.iter().zip(&parent.labels) {
            if i >= truth.len() || truth.get(i) != Some(l as usize) {
                return Err(Error::contract(format!(
                    "parent label {l} at {i} disagrees with ground truth"
                )));
            }
            inherited[l as usize].push(i);
        }
    }

    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for (c, population) in populations.iter().enumerate() {
        if population.is_empty() {
            warnings.push(format!(
                "class {} ({}) has no points; no weak labels drawn",
                c,
                catalog.names()[c]
            ));
            continue;
        }
        let quota = class_quota(population.len(), per_class_cap);
        let kept = &inherited[c];
        if kept.len() > quota {
            return Err(Error::contract(format!(
                "parent holds {} labels of class {c} but the quota is {quota}",
                kept.len()
            )));
        }
        let mut pool: Vec<usize> = population
            .iter()
            .copied()
            .filter(|i| kept.binary_search(i).is_err())
            .collect();
        let fresh = quota - kept.len();
        // Partial Fisher-Yates: the first `fresh` slots become the draw.
        for slot in 0..fresh {
            let j = rng.random_range(slot..pool.len());
            pool.swap(slot, j);
        }
        pairs.extend(kept.iter().map(|&i| (i, c as u32)));
        pairs.extend(pool[..fresh].iter().map(|&i| (i, c as u32)));
    }

    let mut set = WeakLabelSet::from_pairs(pairs, truth.len(), per_class_cap, seed)?;
    set.warnings = warnings;
    Ok(set)
}

/// Sorted indices of `[0, cloud_size)` that carry no weak label.
pub fn unlabeled_complement(cloud_size: usize, weak: &WeakLabelSet) -> Result<Vec<usize>> {
    if let Some(&i) = weak.labeled_indices.iter().find(|&&i| i >= cloud_size) {
        return Err(Error::contract(format!(
            "weak index {i} outside a cloud of {cloud_size} points"
        )));
    }
    let mask = weak.mask(cloud_size);
    Ok((0..cloud_size).filter(|&i| !mask[i]).collect())
}

/// Smallest cap whose realized label count is closest to `target_ratio * N`.
pub fn cap_for_ratio(truth: &LabelArray, class_count: usize, target_ratio: f64) -> usize {
    let counts = truth.class_counts(class_count);
    let n: usize = counts.iter().sum();
    let target = target_ratio * n as f64;
    let total = |cap: usize| counts.iter().map(|&p| class_quota(p, cap)).sum::<usize>();
    let max_cap = counts.iter().copied().max().unwrap_or(1).max(1);
    // The realized total is nondecreasing in the cap, so bisect for the
    // first cap reaching the target and compare with its predecessor.
    let (mut lo, mut hi) = (1usize, max_cap);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if (total(mid) as f64) < target {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if lo > 1 && (target - total(lo - 1) as f64).abs() < (total(lo) as f64 - target).abs() {
        lo - 1
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    /// Class sizes whose quotas reproduce the ISPRS column of the
    /// weak-label table: eight large classes plus one of 325 points.
    fn isprs_like_truth() -> LabelArray {
        let sizes = [100_000, 90_000, 80_000, 60_000, 40_000, 20_000, 7_000, 4_567, 325];
        assert_eq!(sizes.iter().sum::<usize>(), 401_892);
        LabelArray::new(
            sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &n)| std::iter::repeat_n(c as u32, n))
                .collect(),
        )
    }

    fn truth_from_sizes(sizes: &[usize]) -> LabelArray {
        // Interleave classes so indices are not grouped by class.
        let mut labels = Vec::new();
        let mut remaining = sizes.to_vec();
        while remaining.iter().any(|&r| r > 0) {
            for (c, r) in remaining.iter_mut().enumerate() {
                if *r > 0 {
                    labels.push(c as u32);
                    *r -= 1;
                }
            }
        }
        LabelArray::new(labels)
    }

    #[test]
    fn isprs_table_configurations() {
        let truth = isprs_like_truth();
        let catalog = ClassCatalog::anonymous(9).unwrap();
        for (cap, sum) in [(22, 198), (46, 400), (95, 792), (245, 1992)] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let set = sample_weak_labels(&truth, &catalog, cap, &mut rng, 1, None).unwrap();
            assert_eq!(set.len(), sum, "cap {cap}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = sample_weak_labels(&truth, &catalog, 46, &mut rng, 1, None).unwrap();
        // 400 / 401892 = 0.995 per mille, reported truncated as 0.99.
        assert_eq!((set.ratio * 1e5).floor() / 100.0, 0.99);
    }

    #[test]
    fn cap_zero_rejected_and_cap_one_gives_one_per_class() {
        let truth = truth_from_sizes(&[10, 12, 15]);
        let catalog = ClassCatalog::anonymous(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(sample_weak_labels(&truth, &catalog, 0, &mut rng, 2, None).is_err());
        let set = sample_weak_labels(&truth, &catalog, 1, &mut rng, 2, None).unwrap();
        assert_eq!(set.class_counts(3), vec![1, 1, 1]);
    }

    #[test]
    fn labels_match_truth_and_are_sorted() {
        let truth = truth_from_sizes(&[5000, 700, 90]);
        let catalog = ClassCatalog::anonymous(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = sample_weak_labels(&truth, &catalog, 50, &mut rng, 3, None).unwrap();
        assert!(set.labeled_indices.windows(2).all(|w| w[0] < w[1]));
        for (&i, &l) in set.labeled_indices.iter().zip(&set.labels) {
            assert_eq!(truth.get(i), Some(l as usize));
        }
        assert_eq!(set.class_counts(3), vec![50, 50, 9]);
    }

    #[test]
    fn nested_draw_is_superset() {
        let truth = isprs_like_truth();
        let catalog = ClassCatalog::anonymous(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let small = sample_weak_labels(&truth, &catalog, 22, &mut rng, 4, None).unwrap();
        let large = sample_weak_labels(&truth, &catalog, 46, &mut rng, 4, Some(&small)).unwrap();
        assert_eq!((small.len(), large.len()), (198, 400));
        let large_set: BTreeSet<_> = large.labeled_indices.iter().collect();
        assert!(small.labeled_indices.iter().all(|i| large_set.contains(i)));
    }

    #[test]
    fn parent_exceeding_quota_is_rejected() {
        let truth = truth_from_sizes(&[1000, 1000]);
        let catalog = ClassCatalog::anonymous(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let big = sample_weak_labels(&truth, &catalog, 40, &mut rng, 5, None).unwrap();
        assert!(matches!(
            sample_weak_labels(&truth, &catalog, 10, &mut rng, 5, Some(&big)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn empty_class_is_warned_about() {
        let truth = truth_from_sizes(&[100, 0, 100]);
        let catalog = ClassCatalog::anonymous(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let set = sample_weak_labels(&truth, &catalog, 5, &mut rng, 6, None).unwrap();
        assert_eq!(set.class_counts(3), vec![5, 0, 5]);
        assert_eq!(set.warnings.len(), 1);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let truth = truth_from_sizes(&[3000, 400, 80]);
        let catalog = ClassCatalog::anonymous(3).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_weak_labels(&truth, &catalog, 20, &mut rng, seed, None).unwrap()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9).labeled_indices, draw(10).labeled_indices);
    }

    #[test]
    fn complement_edge_cases() {
        let none = WeakLabelSet::from_pairs(vec![], 4, 1, 0).unwrap();
        assert_eq!(unlabeled_complement(4, &none).unwrap(), vec![0, 1, 2, 3]);
        let all = WeakLabelSet::from_pairs((0..4).map(|i| (i, 0)).collect(), 4, 1, 0).unwrap();
        assert!(unlabeled_complement(4, &all).unwrap().is_empty());
        assert!(unlabeled_complement(3, &all).is_err());
    }

    #[test]
    fn complement_partitions_the_index_range() {
        let truth = truth_from_sizes(&[500, 390, 110]);
        let catalog = ClassCatalog::anonymous(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let weak = sample_weak_labels(&truth, &catalog, 13, &mut rng, 7, None).unwrap();
        assert_eq!(weak.len(), 37);
        let rest = unlabeled_complement(1000, &weak).unwrap();
        let a: BTreeSet<usize> = weak.labeled_indices.iter().copied().collect();
        let b: BTreeSet<usize> = rest.iter().copied().collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.union(&b).copied().collect::<Vec<_>>(), (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let set = WeakLabelSet::from_pairs(vec![(7, 1), (2, 0)], 10, 3, 42).unwrap();
        let text = set.to_text();
        assert!(text.starts_with("# ratio=0.2 cap=3 seed=42\n2 0\n7 1\n"));
        let back = WeakLabelSet::from_text(&text, 10, Path::new("w.txt")).unwrap();
        assert_eq!(back, set);
        let err = WeakLabelSet::from_text("# ratio=0.1 cap=1 seed=0\n1 x\n", 10, Path::new("w"));
        assert!(matches!(err, Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn cap_search_hits_the_isprs_ratio() {
        let truth = isprs_like_truth();
        assert_eq!(cap_for_ratio(&truth, 9, 400.0 / 401_892.0), 46);
        assert_eq!(cap_for_ratio(&truth, 9, 198.0 / 401_892.0), 22);
    }
}
