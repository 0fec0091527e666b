//! Labeled synthetic aerial scenes.
//!
//! Four classes with distinct local geometry: a gently undulating ground
//! terrain, boxes with flat or gabled roofs and sparsely sampled facades, ellipsoidal
//! tree crowns sampled through their volume, and thin vertical poles. The
//! total point count is Poisson with mean `extent² · density`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::cloud::{ClassCatalog, LabelArray, Point, PointCloud};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const GROUND: u32 = 0;
pub const BUILDING: u32 = 1;
pub const TREE: u32 = 2;
pub const POLE: u32 = 3;

pub fn scene_catalog() -> ClassCatalog {
    ClassCatalog::new(
        ["ground", "building", "tree", "pole"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    )
    .expect("distinct names")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Side of the square scene, meters.
    pub extent: f64,
    /// Points per square meter of plan area.
    pub density: f64,
    /// Amplitude of the rolling terrain, meters.
    pub hill_amplitude: f64,
    /// Amplitude of short-wavelength ground bumps, meters.
    pub ground_roughness: f64,
    /// Gaussian noise on every coordinate, meters.
    pub noise: f64,
    pub buildings: usize,
    pub building_size_min: f64,
    pub building_size_max: f64,
    pub building_height_min: f64,
    pub building_height_max: f64,
    /// Largest roof pitch, degrees; pitches are uniform in `[0, max]`.
    pub roof_pitch_max: f64,
    /// Share of the plan density that lands on facades.
    pub facade_fraction: f64,
    pub trees: usize,
    /// Mean horizontal crown radius, meters.
    pub tree_radius: f64,
    pub poles: usize,
    pub pole_height: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            extent: 100.0,
            density: 5.0,
            hill_amplitude: 4.0,
            ground_roughness: 0.3,
            noise: 0.15,
            buildings: 16,
            building_size_min: 8.0,
            building_size_max: 18.0,
            building_height_min: 2.5,
            building_height_max: 12.0,
            roof_pitch_max: 35.0,
            facade_fraction: 0.3,
            trees: 80,
            tree_radius: 3.0,
            poles: 30,
            pole_height: 8.0,
            seed: 0,
        }
    }
}

macro_rules! spec_keys {
    ($($key:ident),*) => {
        const KEYS: &[&str] = &[$(stringify!($key)),*];
    };
}
spec_keys!(
    extent, density, hill_amplitude, ground_roughness, noise, buildings, building_size_min, building_size_max,
    building_height_min, building_height_max, roof_pitch_max, facade_fraction, trees, tree_radius, poles,
    pole_height, seed
);

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("extent", self.extent),
            ("density", self.density),
            ("building_size_min", self.building_size_min),
            ("building_height_min", self.building_height_min),
            ("tree_radius", self.tree_radius),
            ("pole_height", self.pole_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("hill_amplitude", self.hill_amplitude),
            ("ground_roughness", self.ground_roughness),
            ("noise", self.noise),
            ("facade_fraction", self.facade_fraction),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::contract(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.building_size_max < self.building_size_min
            || self.building_height_max < self.building_height_min
        {
            return Err(Error::contract("building size and height ranges must be ordered"));
        }
        if !(0.0..80.0).contains(&self.roof_pitch_max) {
            return Err(Error::contract("roof pitch must lie in [0, 80) degrees"));
        }
        if self.buildings > 0 && self.building_size_max >= self.extent {
            return Err(Error::contract("buildings do not fit in the scene"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let values = [
            self.extent.to_string(),
            self.density.to_string(),
            self.hill_amplitude.to_string(),
            self.ground_roughness.to_string(),
            self.noise.to_string(),
            self.buildings.to_string(),
            self.building_size_min.to_string(),
            self.building_size_max.to_string(),
            self.building_height_min.to_string(),
            self.building_height_max.to_string(),
            self.roof_pitch_max.to_string(),
            self.facade_fraction.to_string(),
            self.trees.to_string(),
            self.tree_radius.to_string(),
            self.poles.to_string(),
            self.pole_height.to_string(),
            self.seed.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Parses `key=value` lines; missing keys keep their defaults.
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut spec = Self::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|_| err(format!("`{key}` expects a number, got `{value}`")))
            };
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| err(format!("`{key}` expects a count, got `{value}`")))
            };
            match key {
                "extent" => spec.extent = float()?,
                "density" => spec.density = float()?,
                "hill_amplitude" => spec.hill_amplitude = float()?,
                "roof_pitch_max" => spec.roof_pitch_max = float()?,
                "ground_roughness" => spec.ground_roughness = float()?,
                "noise" => spec.noise = float()?,
                "buildings" => spec.buildings = int()?,
                "building_size_min" => spec.building_size_min = float()?,
                "building_size_max" => spec.building_size_max = float()?,
                "building_height_min" => spec.building_height_min = float()?,
                "building_height_max" => spec.building_height_max = float()?,
                "facade_fraction" => spec.facade_fraction = float()?,
                "trees" => spec.trees = int()?,
                "tree_radius" => spec.tree_radius = float()?,
                "poles" => spec.poles = int()?,
                "pole_height" => spec.pole_height = float()?,
                "seed" => {
                    spec.seed = value
                        .parse()
                        .map_err(|_| err(format!("`seed` expects an integer, got `{value}`")))?
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub cloud: PointCloud,
    pub labels: LabelArray,
    pub catalog: ClassCatalog,
    pub warnings: Vec<String>,
}

impl SyntheticScene {
    pub fn into_parts(self) -> (PointCloud, LabelArray) {
        (self.cloud, self.labels)
    }
}

struct Building {
    lo: [f64; 2],
    hi: [f64; 2],
    base: f64,
    eave: f64,
    /// Rise per meter away from the eaves; the ridge runs along the longer side.
    slope: f64,
}

impl Building {
    fn roof(&self, x: f64, y: f64) -> f64 {
        let (w, d) = (self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]);
        let to_eave = if w >= d {
            (y - self.lo[1]).min(self.hi[1] - y)
        } else {
            (x - self.lo[0]).min(self.hi[0] - x)
        };
        self.eave + self.slope * to_eave.max(0.0)
    }


    fn contains(&self, x: f64, y: f64, margin: f64) -> bool {
        x >= self.lo[0] - margin
            && x <= self.hi[0] + margin
            && y >= self.lo[1] - margin
            && y <= self.hi[1] + margin
    }
}

struct Tree {
    center: [f64; 2],
    radius: f64,
    /// Vertical semi-axis and crown center height above ground.
    semi_z: f64,
    crown_z: f64,
}

/// Rolling hills plus short bumps; phases come from the scene seed.
struct Terrain {
    hills: f64,
    bumps: f64,
    phase: [f64; 4],
}

impl Terrain {
    fn height(&self, x: f64, y: f64) -> f64 {
        let p = &self.phase;
        self.hills * 0.5 * ((x / 29.0 + p[0]).sin() + (y / 37.0 + p[1]).sin())
            + self.bumps * 0.5 * ((x / 3.1 + p[2]).sin() * (y / 2.7 + p[3]).sin() + ((x + y) / 4.3).sin())
    }
}

pub fn synth_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Stream::Scene);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::contract(e.to_string()))?;
    let e = spec.extent;
    let mut warnings = Vec::new();
    for (count, name) in [(spec.buildings, "building"), (spec.trees, "tree"), (spec.poles, "pole")] {
        if count == 0 {
            warnings.push(format!("{name} count is zero; class omitted"));
        }
    }

    let terrain = Terrain {
        hills: spec.hill_amplitude,
        bumps: spec.ground_roughness,
        phase: std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI)),
    };
    let ground_height = |x: f64, y: f64| terrain.height(x, y);
    let mut buildings: Vec<Building> = Vec::new();
    for _ in 0..spec.buildings {
        for _attempt in 0..100 {
            let w = rng.random_range(spec.building_size_min..=spec.building_size_max);
            let d = rng.random_range(spec.building_size_min..=spec.building_size_max);
            let x = rng.random_range(0.0..=e - w);
            let y = rng.random_range(0.0..=e - d);
            let h = rng.random_range(spec.building_height_min..=spec.building_height_max);
            let pitch = rng.random_range(0.0..=spec.roof_pitch_max).to_radians();
            let base = [[x, y], [x + w, y], [x, y + d], [x + w, y + d]]
                .iter()
                .map(|c| ground_height(c[0], c[1]))
                .fold(f64::INFINITY, f64::min);
            let candidate = Building {
                lo: [x, y],
                hi: [x + w, y + d],
                base,
                eave: ground_height(x + w / 2.0, y + d / 2.0) + h,
                slope: pitch.tan(),
            };
            let clear = buildings.iter().all(|b| {
                candidate.lo[0] > b.hi[0] + 3.0
                    || candidate.hi[0] < b.lo[0] - 3.0
                    || candidate.lo[1] > b.hi[1] + 3.0
                    || candidate.hi[1] < b.lo[1] - 3.0
            });
            if clear {
                buildings.push(candidate);
                break;
            }
        }
    }
    if buildings.len() < spec.buildings {
        warnings.push(format!(
            "placed {} of {} buildings without overlap",
            buildings.len(),
            spec.buildings
        ));
    }

    let mut trees = Vec::new();
    for _ in 0..spec.trees {
        for _attempt in 0..100 {
            let radius = spec.tree_radius * rng.random_range(0.7..1.3);
            let center = [rng.random_range(0.0..e), rng.random_range(0.0..e)];
            if buildings
                .iter()
                .any(|b| b.contains(center[0], center[1], radius + 1.0))
            {
                continue;
            }
            let semi_z = radius * rng.random_range(1.0..1.5);
            let trunk = rng.random_range(1.5..3.5);
            trees.push(Tree {
                center,
                radius,
                semi_z,
                crown_z: trunk + semi_z,
            });
            break;
        }
    }

    let mut poles: Vec<[f64; 2]> = Vec::new();
    for _ in 0..spec.poles {
        for _attempt in 0..100 {
            let p = [rng.random_range(0.0..e), rng.random_range(0.0..e)];
            let blocked = buildings.iter().any(|b| b.contains(p[0], p[1], 1.0))
                || trees.iter().any(|t| {
                    (p[0] - t.center[0]).hypot(p[1] - t.center[1]) < t.radius + 1.0
                });
            if !blocked {
                poles.push(p);
                break;
            }
        }
    }

    let total = Poisson::new(e * e * spec.density)
        .map_err(|e| Error::contract(e.to_string()))?
        .sample(&mut rng) as usize;
    let mut coords: Vec<Point> = Vec::with_capacity(total);
    let mut labels: Vec<u32> = Vec::with_capacity(total);

    let per_pole = (spec.pole_height * spec.density).round() as usize;
    for p in &poles {
        let base = ground_height(p[0], p[1]);
        for _ in 0..per_pole {
            let r = 0.1 * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            coords.push([
                p[0] + r * a.cos(),
                p[1] + r * a.sin(),
                base + rng.random_range(0.0..spec.pole_height) + noise.sample(&mut rng),
            ]);
            labels.push(POLE);
        }
    }

    for b in &buildings {
        let (w, d) = (b.hi[0] - b.lo[0], b.hi[1] - b.lo[1]);
        let perimeter = 2.0 * (w + d);
        let count = (perimeter * (b.eave - b.base) * spec.density * spec.facade_fraction).round() as usize;
        let corners = [b.lo, [b.hi[0], b.lo[1]], b.hi, [b.lo[0], b.hi[1]]];
        let edges = [
            (corners[0], [1.0, 0.0], w),
            (corners[1], [0.0, 1.0], d),
            (corners[2], [-1.0, 0.0], w),
            (corners[3], [0.0, -1.0], d),
        ];
        for _ in 0..count {
            let mut s = rng.random_range(0.0..perimeter);
            let mut point = corners[3];
            for &(start, dir, len) in &edges {
                if s < len {
                    point = [start[0] + dir[0] * s, start[1] + dir[1] * s];
                    break;
                }
                s -= len;
            }
            let [x, y] = point;
            coords.push([
                x + noise.sample(&mut rng),
                y + noise.sample(&mut rng),
                rng.random_range(b.base..b.eave),
            ]);
            labels.push(BUILDING);
        }
    }

    while coords.len() < total {
        let (x, y) = (rng.random_range(0.0..e), rng.random_range(0.0..e));
        let n = noise.sample(&mut rng);
        if let Some(b) = buildings.iter().find(|b| b.contains(x, y, 0.0)) {
            coords.push([x, y, b.roof(x, y) + n]);
            labels.push(BUILDING);
            continue;
        }
        let g = ground_height(x, y);
        let crown = trees.iter().find_map(|t| {
            let rho = (x - t.center[0]).hypot(y - t.center[1]) / t.radius;
            (rho < 1.0).then(|| (t, (1.0 - rho * rho).sqrt() * t.semi_z))
        });
        match crown {
            // Crowns are sampled through their volume, biased towards the top.
            Some((t, half)) => {
                let u: f64 = rng.random();
                let z = g + t.crown_z + half * (1.0 - 2.0 * u * u);
                coords.push([x, y, z + n]);
                labels.push(TREE);
            }
            None => {
                coords.push([x, y, g + n]);
                labels.push(GROUND);
            }
        }
    }

    Ok(SyntheticScene {
        cloud: PointCloud::from_coords(coords)?,
        labels: LabelArray::new(labels),
        catalog: scene_catalog(),
        warnings,
    })
}
