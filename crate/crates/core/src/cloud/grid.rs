use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use super::{dist2, Point};

type CellKey = [i64; 3];

/// Multiplicative hash for small integer cell keys; SipHash dominates query time otherwise.
#[derive(Default)]
struct CellHasher(u64);

impl Hasher for CellHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.write_u64(b as u64);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = (self.0.rotate_left(5) ^ v).wrapping_mul(0x517c_c1b7_2722_0a95);
    }

    fn write_i64(&mut self, v: i64) {
        self.write_u64(v as u64);
    }

    fn write_usize(&mut self, v: usize) {
        self.write_u64(v as u64);
    }
}

type CellMap = HashMap<CellKey, Vec<u32>, BuildHasherDefault<CellHasher>>;

/// Uniform hash grid over a point slice.
///
/// The grid stores indices only; every query takes the same slice the grid
/// was built from. A planar grid ignores z, so its radius queries select
/// vertical cylinders rather than spheres.
#[derive(Debug, Clone)]
pub struct HashGrid {
    cell: f64,
    planar: bool,
    cells: CellMap,
    lo: CellKey,
    hi: CellKey,
}

impl HashGrid {
    pub fn new(points: &[Point], cell: f64) -> Self {
        Self::build(points, cell, false)
    }

    /// Grid keyed on (x, y) only.
    pub fn planar(points: &[Point], cell: f64) -> Self {
        Self::build(points, cell, true)
    }

    fn build(points: &[Point], cell: f64, planar: bool) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        let mut grid = Self {
            cell,
            planar,
            cells: CellMap::default(),
            lo: [i64::MAX; 3],
            hi: [i64::MIN; 3],
        };
        for (i, p) in points.iter().enumerate() {
            let key = grid.key(p);
            for d in 0..3 {
                grid.lo[d] = grid.lo[d].min(key[d]);
                grid.hi[d] = grid.hi[d].max(key[d]);
            }
            grid.cells.entry(key).or_default().push(i as u32);
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn key(&self, p: &Point) -> CellKey {
        let z = if self.planar {
            0
        } else {
            (p[2] / self.cell).floor() as i64
        };
        [
            (p[0] / self.cell).floor() as i64,
            (p[1] / self.cell).floor() as i64,
            z,
        ]
    }

    fn distance2(&self, a: &Point, b: &Point) -> f64 {
        if self.planar {
            let dx = a[0] - b[0];
            let dy = a[1] - b[1];
            dx * dx + dy * dy
        } else {
            dist2(a, b)
        }
    }

    /// Indices whose distance to `center` is at most `radius`, ascending.
    pub fn radius_query(&self, points: &[Point], center: Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.cells.is_empty() || radius < 0.0 {
            return out;
        }
        let r2 = radius * radius;
        let c = self.key(&center);
        let reach = (radius / self.cell).ceil() as i64;
        let clamp = |d: usize| {
            (
                (c[d] - reach).max(self.lo[d]),
                (c[d] + reach).min(self.hi[d]),
            )
        };
        let (x0, x1) = clamp(0);
        let (y0, y1) = clamp(1);
        let (z0, z1) = if self.planar { (0, 0) } else { clamp(2) };
        for x in x0..=x1 {
            for y in y0..=y1 {
                for z in z0..=z1 {
                    if let Some(members) = self.cells.get(&[x, y, z]) {
                        out.extend(
                            members
                                .iter()
                                .map(|&i| i as usize)
                                .filter(|&i| self.distance2(&points[i], &center) <= r2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The `k` nearest indices to `query`, sorted by (distance, index).
    ///
    /// Returns fewer than `k` only when the grid holds fewer points.
    pub fn knn(&self, points: &[Point], query: Point, k: usize) -> Vec<usize> {
        let mut found: Vec<(f64, usize)> = Vec::new();
        if k == 0 || self.cells.is_empty() {
            return Vec::new();
        }
        let c = self.key(&query);
        let max_shell = (0..3)
            .map(|d| (c[d] - self.lo[d]).abs().max((self.hi[d] - c[d]).abs()))
            .max()
            .unwrap_or(0);
        for shell in 0..=max_shell {
            self.visit_shell(c, shell, |members| {
                for &i in members {
                    let i = i as usize;
                    found.push((self.distance2(&points[i], &query), i));
                }
            });
            if found.len() >= k {
                let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                found.select_nth_unstable_by(k - 1, by_distance);
                found.truncate(k);
                // Every unvisited cell lies outside the searched block.
                if found[k - 1].0 <= self.block_clearance(&query, c, shell).powi(2) {
                    break;
                }
            }
        }
        found.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(k);
        found.into_iter().map(|(_, i)| i).collect()
    }

    /// Distance from `query` to the boundary of the block of cells within `shell` of `c`.
    fn block_clearance(&self, query: &Point, c: CellKey, shell: i64) -> f64 {
        let dims = if self.planar { 2 } else { 3 };
        (0..dims)
            .map(|d| {
                let lo = (c[d] - shell) as f64 * self.cell;
                let hi = (c[d] + shell + 1) as f64 * self.cell;
                (query[d] - lo).min(hi - query[d])
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    fn visit_shell(&self, c: CellKey, shell: i64, mut visit: impl FnMut(&[u32])) {
        let zr = if self.planar { 0 } else { shell };
        for dx in -shell..=shell {
            for dy in -shell..=shell {
                for dz in -zr..=zr {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                        continue;
                    }
                    if let Some(members) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        visit(members);
                    }
                }
            }
        }
    }
}
