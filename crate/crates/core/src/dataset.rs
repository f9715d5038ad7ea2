//! Training data: pose sampling near furniture, ground-truth occupancy crops
//! and the `SLID` dataset file.
//!
//! # File format (version 1, little-endian)
//!
//! ```text
//! magic        4 bytes  "SLID"
//! version      u32      1
//! count        u32      number of samples
//! per sample:
//!   obs_size   u16      60 or 100
//!   pose       3 x f64  x, y, heading
//!   obs        obs_size^2 bytes, one class id per cell, row-major
//!   gt planes  4 planes in the order 60, 60ext, 100, 100ext; each plane is
//!              ceil(size^2 / 8) bytes, bit i of byte k is cell 8k + i
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::Pose;
use crate::sensor::{
    self, cell_to_robot, project_egocentric, raycast_scan, LidarConfig, LocalSemanticMap, SensorError,
};
use crate::world::{rasterize, ClassId, SemanticGrid, WorldSpec};

/// Dilation radius of the extended ground truth, in cells.
pub const EXTENDED_RADIUS: usize = 5;
/// Minimum distance in meters between a sampled pose and any obstacle cell centre.
pub const MIN_CLEARANCE: f64 = 0.1;

const MAGIC: &[u8; 4] = b"SLID";
const VERSION: u32 = 1;

/// Which of the four ground truths a model is trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundTruthVariant {
    pub size: usize,
    pub extended: bool,
}

impl GroundTruthVariant {
    pub const ALL: [GroundTruthVariant; 4] = [
        GroundTruthVariant { size: 60, extended: false },
        GroundTruthVariant { size: 60, extended: true },
        GroundTruthVariant { size: 100, extended: false },
        GroundTruthVariant { size: 100, extended: true },
    ];

    pub fn index(self) -> usize {
        GroundTruthVariant::ALL
            .iter()
            .position(|v| *v == self)
            .expect("variant is one of the four")
    }
}

impl fmt::Display for GroundTruthVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.size, if self.extended { "ext" } else { "" })
    }
}

impl FromStr for GroundTruthVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GroundTruthVariant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| format!("unknown variant `{s}`; expected one of 60, 60ext, 100, 100ext"))
    }
}

/// Binary occupancy image centred on the robot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyPatch {
    pub size: usize,
    pub cells: Vec<bool>,
}

impl OccupancyPatch {
    pub fn empty(size: usize) -> Self {
        OccupancyPatch {
            size,
            cells: vec![false; size * size],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.size + col] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn center_crop(&self, size: usize) -> OccupancyPatch {
        assert!(size <= self.size);
        let off = (self.size - size) / 2;
        let mut cells = Vec::with_capacity(size * size);
        for r in 0..size {
            let start = (r + off) * self.size + off;
            cells.extend_from_slice(&self.cells[start..start + size]);
        }
        OccupancyPatch { size, cells }
    }
}

/// Disk structuring element: offsets with `dr^2 + dc^2 <= radius^2`.
pub fn disk_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r * r {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// Binary dilation with a Euclidean disk of `radius_cells`, clipped at the borders.
pub fn dilate(patch: &OccupancyPatch, radius_cells: usize) -> OccupancyPatch {
    let n = patch.size as i64;
    let disk = disk_offsets(radius_cells);
    let mut out = OccupancyPatch::empty(patch.size);
    for r in 0..n {
        for c in 0..n {
            if !patch.get(r as usize, c as usize) {
                continue;
            }
            for &(dr, dc) in &disk {
                let (rr, cc) = (r + dr, c + dc);
                if rr >= 0 && cc >= 0 && rr < n && cc < n {
                    out.set(rr as usize, cc as usize, true);
                }
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("world contains no objects to sample around")]
    NoObjects,
    #[error("invalid sampling request: {0}")]
    InvalidRequest(&'static str),
    #[error("found only {found} of {requested} valid poses within {attempts} attempts")]
    NotEnoughPoses {
        requested: usize,
        found: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated dataset: expected at least {expected} bytes, file has {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("malformed dataset: {0}")]
    Malformed(String),
}

/// Samples `count` robot poses on free cells within `max_dist_m` of some
/// object footprint cell, uniformly over that region, with uniform headings.
pub fn sample_poses(
    spec: &WorldSpec,
    count: usize,
    max_dist_m: f64,
    seed: u64,
) -> Result<Vec<Pose>, DatasetError> {
    if count == 0 {
        return Err(DatasetError::InvalidRequest("count must be at least 1"));
    }
    if !(max_dist_m.is_finite() && max_dist_m > 0.0) {
        return Err(DatasetError::InvalidRequest("max_dist_m must be positive"));
    }
    let grid = rasterize(spec);
    let res = grid.resolution;
    let center = |r: usize, c: usize| ((c as f64 + 0.5) * res, (r as f64 + 0.5) * res);
    let mut object_cells = Vec::new();
    let mut obstacle_cells = Vec::new();
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let class = grid.footprint(r, c);
            if class.is_object() {
                object_cells.push(center(r, c));
            }
            if class.is_obstacle() {
                obstacle_cells.push(center(r, c));
            }
        }
    }
    if object_cells.is_empty() {
        return Err(DatasetError::NoObjects);
    }
    let within = |cells: &[(f64, f64)], x: f64, y: f64, d: f64| {
        let d2 = d * d;
        cells
            .iter()
            .any(|&(cx, cy)| (cx - x) * (cx - x) + (cy - y) * (cy - y) <= d2)
    };
    // Rejection sampling inside the bounding box of the admissible region.
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &object_cells {
        x0 = x0.min(x - max_dist_m);
        x1 = x1.max(x + max_dist_m);
        y0 = y0.min(y - max_dist_m);
        y1 = y1.max(y + max_dist_m);
    }
    let (x0, x1) = (x0.max(0.0), x1.min(grid.width_m()));
    let (y0, y1) = (y0.max(0.0), y1.min(grid.height_m()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 1000 * count + 10_000;
    let mut poses = Vec::with_capacity(count);
    for _ in 0..budget {
        let x = rng.random_range(x0..x1);
        let y = rng.random_range(y0..y1);
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let Some((r, c)) = grid.cell_at(x, y) else { continue };
        if grid.footprint(r, c) != ClassId::Free {
            continue;
        }
        if !within(&object_cells, x, y, max_dist_m) || within(&obstacle_cells, x, y, MIN_CLEARANCE) {
            continue;
        }
        poses.push(Pose::new(x, y, heading));
        if poses.len() == count {
            return Ok(poses);
        }
    }
    Err(DatasetError::NotEnoughPoses {
        requested: count,
        found: poses.len(),
        attempts: budget,
    })
}

/// Robot-centred crop of the footprint layer: each patch cell takes the class
/// of the world cell under its centre, using the exact pose.
pub fn footprint_crop(grid: &SemanticGrid, pose: Pose, size: usize) -> Vec<ClassId> {
    let mut out = Vec::with_capacity(size * size);
    for row in 0..size {
        for col in 0..size {
            let (f, l) = cell_to_robot(size, row, col);
            let (x, y) = pose.to_world(f, l);
            let r = (y / grid.resolution).floor() as i64;
            let c = (x / grid.resolution).floor() as i64;
            out.push(grid.footprint_or_free(r, c));
        }
    }
    out
}

/// Ground truth for one variant. Obstacles of every class are occupied; the
/// extended variant dilates furniture by [`EXTENDED_RADIUS`] and keeps walls as is.
pub fn ground_truth(grid: &SemanticGrid, pose: Pose, variant: GroundTruthVariant) -> OccupancyPatch {
    let classes = footprint_crop(grid, pose, variant.size);
    ground_truth_from_classes(&classes, variant)
}

fn ground_truth_from_classes(classes: &[ClassId], variant: GroundTruthVariant) -> OccupancyPatch {
    let size = variant.size;
    let occupied = OccupancyPatch {
        size,
        cells: classes.iter().map(|c| c.is_obstacle()).collect(),
    };
    if !variant.extended {
        return occupied;
    }
    let objects = OccupancyPatch {
        size,
        cells: classes.iter().map(|c| c.is_object()).collect(),
    };
    let mut grown = dilate(&objects, EXTENDED_RADIUS);
    for (g, o) in grown.cells.iter_mut().zip(&occupied.cells) {
        *g |= *o;
    }
    grown
}

/// One observation with its four ground truths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub observation: LocalSemanticMap,
    /// Indexed by [`GroundTruthVariant::index`].
    pub gts: [OccupancyPatch; 4],
    pub pose: Pose,
}

impl TrainingSample {
    pub fn gt(&self, variant: GroundTruthVariant) -> &OccupancyPatch {
        &self.gts[variant.index()]
    }

    /// The observation at `size`. A 100-cell observation yields the 60-cell one
    /// by cropping, since its central window is exactly that projection.
    pub fn observation_for(&self, size: usize) -> Option<LocalSemanticMap> {
        if size == self.observation.size {
            Some(self.observation.clone())
        } else if size < self.observation.size {
            self.observation.center_crop(size).ok()
        } else {
            None
        }
    }
}

/// Builds an observation of side `obs_size` and all four ground truths at `pose`.
pub fn make_sample(
    grid: &SemanticGrid,
    pose: Pose,
    config: &LidarConfig,
    obs_size: usize,
    seed: u64,
) -> Result<TrainingSample, DatasetError> {
    let scan = raycast_scan(grid, pose, config, seed)?;
    let observation = project_egocentric(&scan, obs_size)?;
    let big = footprint_crop(grid, pose, sensor::EXPANDED);
    let small: Vec<ClassId> = {
        let off = (sensor::EXPANDED - sensor::WINDOW) / 2;
        (0..sensor::WINDOW)
            .flat_map(|r| {
                let start = (r + off) * sensor::EXPANDED + off;
                big[start..start + sensor::WINDOW].iter().copied()
            })
            .collect()
    };
    let gts = GroundTruthVariant::ALL.map(|v| {
        let classes = if v.size == sensor::WINDOW { &small } else { &big };
        ground_truth_from_classes(classes, v)
    });
    Ok(TrainingSample {
        observation,
        gts,
        pose,
    })
}

/// Samples poses in `spec` and builds one training sample per pose.
pub fn generate(
    spec: &WorldSpec,
    count: usize,
    max_dist_m: f64,
    config: &LidarConfig,
    obs_size: usize,
    seed: u64,
) -> Result<Vec<TrainingSample>, DatasetError> {
    let grid = rasterize(spec);
    let poses = sample_poses(spec, count, max_dist_m, seed)?;
    poses
        .into_iter()
        .enumerate()
        .map(|(i, p)| make_sample(&grid, p, config, obs_size, seed.wrapping_add(i as u64)))
        .collect()
}

fn plane_bytes(size: usize) -> usize {
    (size * size).div_ceil(8)
}

/// Serializes samples into the `SLID` format.
pub fn encode_dataset(samples: &[TrainingSample]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    for s in samples {
        out.extend_from_slice(&(s.observation.size as u16).to_le_bytes());
        for v in [s.pose.x, s.pose.y, s.pose.heading] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(s.observation.cells.iter().map(|c| c.as_u8()));
        for gt in &s.gts {
            let mut plane = vec![0u8; plane_bytes(gt.size)];
            for (i, &bit) in gt.cells.iter().enumerate() {
                if bit {
                    plane[i / 8] |= 1 << (i % 8);
                }
            }
            out.extend_from_slice(&plane);
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(DatasetError::Truncated {
                expected: end,
                actual: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, DatasetError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DatasetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses an `SLID` byte buffer.
pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<TrainingSample>, DatasetError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4).map_err(|_| DatasetError::BadMagic)? != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(DatasetError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let count = cur.u32()? as usize;
    let mut samples = Vec::with_capacity(count.min(1 << 16));
    for index in 0..count {
        let size = cur.u16()? as usize;
        sensor::check_size(size)
            .map_err(|_| DatasetError::Malformed(format!("sample {index}: observation size {size}")))?;
        let pose = Pose::new(cur.f64()?, cur.f64()?, cur.f64()?);
        let cells = cur
            .take(size * size)?
            .iter()
            .map(|&b| {
                ClassId::from_u8(b)
                    .ok_or_else(|| DatasetError::Malformed(format!("sample {index}: class id {b}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut planes = Vec::with_capacity(4);
        for v in GroundTruthVariant::ALL {
            let plane = cur.take(plane_bytes(v.size))?;
            let cells = (0..v.size * v.size)
                .map(|i| plane[i / 8] >> (i % 8) & 1 == 1)
                .collect();
            planes.push(OccupancyPatch { size: v.size, cells });
        }
        samples.push(TrainingSample {
            observation: LocalSemanticMap { size, cells },
            gts: planes.try_into().expect("four planes"),
            pose,
        });
    }
    if cur.pos != bytes.len() {
        return Err(DatasetError::Malformed(format!(
            "{} trailing bytes after {count} samples",
            bytes.len() - cur.pos
        )));
    }
    Ok(samples)
}

pub fn write_dataset(samples: &[TrainingSample], path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, encode_dataset(samples))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<TrainingSample>, DatasetError> {
    decode_dataset(&std::fs::read(path)?)
}
