//! Grid costmaps with disk inflation and imagination fusion.

use serde::{Deserialize, Serialize};

use super::NavError;
use crate::dataset::OccupancyPatch;
use crate::geom::Pose;
use crate::sensor::robot_to_cell;
use crate::world::{cell_coord, SemanticGrid};

pub const FREE: u8 = 0;
pub const INSCRIBED: u8 = 99;
pub const LETHAL: u8 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InflationConfig {
    /// Cells within this distance of a lethal cell cost [`INSCRIBED`].
    pub inscribed_radius: f64,
    /// Beyond the inscribed disk, cost decays linearly from 98 to 1 out to
    /// this distance. Equal to `inscribed_radius` disables the band.
    pub falloff_radius: f64,
}

impl Default for InflationConfig {
    fn default() -> Self {
        InflationConfig {
            inscribed_radius: 0.2,
            falloff_radius: 0.5,
        }
    }
}

impl InflationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.inscribed_radius.is_finite() && self.inscribed_radius >= 0.0) {
            return Err("inscribed_radius must be non-negative".into());
        }
        if !(self.falloff_radius.is_finite() && self.falloff_radius >= self.inscribed_radius) {
            return Err("falloff_radius must be at least inscribed_radius".into());
        }
        Ok(())
    }
}

/// Precomputed stamp placed around every lethal cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Inflation {
    stamp: Vec<(i64, i64, u8)>,
}

impl Inflation {
    pub fn new(config: &InflationConfig, resolution: f64) -> Self {
        let ins = config.inscribed_radius / resolution;
        let out = config.falloff_radius / resolution;
        let reach = out.floor() as i64 + 1;
        let mut stamp = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let d2 = (dr * dr + dc * dc) as f64;
                let cost = if d2 <= ins * ins + 1e-9 {
                    INSCRIBED
                } else if d2 <= out * out + 1e-9 {
                    let t = (d2.sqrt() - ins) / (out - ins);
                    (98.0 * (1.0 - t)).round().clamp(1.0, 98.0) as u8
                } else {
                    continue;
                };
                stamp.push((dr, dc, cost));
            }
        }
        Inflation { stamp }
    }

    /// Cells reached beyond the centre, in cells.
    pub fn reach(&self) -> i64 {
        self.stamp.iter().map(|&(r, c, _)| r.abs().max(c.abs())).max().unwrap_or(0)
    }
}

/// A rectangular window of the world grid. `origin_row`/`origin_col` give the
/// world cell of local cell `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    pub rows: usize,
    pub cols: usize,
    pub resolution: f64,
    pub origin_row: i64,
    pub origin_col: i64,
    pub cost: Vec<u8>,
}

impl Costmap {
    pub fn new(rows: usize, cols: usize, resolution: f64, origin_row: i64, origin_col: i64) -> Self {
        Costmap {
            rows,
            cols,
            resolution,
            origin_row,
            origin_col,
            cost: vec![FREE; rows * cols],
        }
    }

    /// World position of the lower-left corner, in meters.
    pub fn origin_m(&self) -> (f64, f64) {
        (self.origin_col as f64 * self.resolution, self.origin_row as f64 * self.resolution)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cost[row * self.cols + col]
    }

    #[inline]
    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    /// Local cell of a world cell.
    pub fn local(&self, world_row: i64, world_col: i64) -> Option<(usize, usize)> {
        let (r, c) = (world_row - self.origin_row, world_col - self.origin_col);
        self.contains(r, c).then_some((r as usize, c as usize))
    }

    /// Local cell containing a world point.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let r = cell_coord(y, self.resolution) as i64;
        let c = cell_coord(x, self.resolution) as i64;
        self.local(r, c)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            (self.origin_col + col as i64) as f64 * self.resolution + 0.5 * self.resolution,
            (self.origin_row + row as i64) as f64 * self.resolution + 0.5 * self.resolution,
        )
    }

    pub fn cost_at(&self, x: f64, y: f64) -> Option<u8> {
        self.cell_at(x, y).map(|(r, c)| self.get(r, c))
    }

    pub fn count(&self, value: u8) -> usize {
        self.cost.iter().filter(|&&v| v == value).count()
    }

    pub fn is_lethal(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == LETHAL
    }

    /// Marks a cell lethal and stamps its inflation (max merge). Returns
    /// whether the cell was not lethal before.
    pub fn add_lethal(&mut self, row: usize, col: usize, inflation: &Inflation) -> bool {
        let idx = row * self.cols + col;
        if self.cost[idx] == LETHAL {
            return false;
        }
        self.cost[idx] = LETHAL;
        for &(dr, dc, v) in &inflation.stamp {
            let (r, c) = (row as i64 + dr, col as i64 + dc);
            if self.contains(r, c) {
                let j = r as usize * self.cols + c as usize;
                if self.cost[j] < v {
                    self.cost[j] = v;
                }
            }
        }
        true
    }
}

/// Lethal cells wherever the laser layer holds an obstacle, then inflated.
pub fn build_global_costmap(grid: &SemanticGrid, config: &InflationConfig) -> Costmap {
    let inflation = Inflation::new(config, grid.resolution);
    let mut map = Costmap::new(grid.rows, grid.cols, grid.resolution, 0, 0);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            if grid.laser(r, c).is_obstacle() {
                map.add_lethal(r, c, &inflation);
            }
        }
    }
    map
}

/// World cells covered by occupied patch cells, found by mapping each
/// costmap cell centre into the robot frame at the exact pose and looking up
/// the nearest patch cell.
pub fn patch_world_cells(costmap: &Costmap, patch: &OccupancyPatch, pose: Pose) -> Vec<(usize, usize)> {
    let res = costmap.resolution;
    let reach = (patch.size as f64 * 0.5 + 1.0) * res * std::f64::consts::SQRT_2;
    let r0 = cell_coord(pose.y - reach, res) as i64 - costmap.origin_row;
    let r1 = cell_coord(pose.y + reach, res) as i64 - costmap.origin_row;
    let c0 = cell_coord(pose.x - reach, res) as i64 - costmap.origin_col;
    let c1 = cell_coord(pose.x + reach, res) as i64 - costmap.origin_col;
    let mut out = Vec::new();
    for r in r0.max(0)..=r1.min(costmap.rows as i64 - 1) {
        for c in c0.max(0)..=c1.min(costmap.cols as i64 - 1) {
            let (x, y) = costmap.cell_center(r as usize, c as usize);
            let (f, l) = pose.to_robot(x, y);
            if let Some((pr, pc)) = robot_to_cell(patch.size, f, l) {
                if patch.get(pr, pc) {
                    out.push((r as usize, c as usize));
                }
            }
        }
    }
    out
}

/// Merges imagined occupancy into `costmap` as lethal cells and re-inflates
/// around them. Cells whose centres lie within `keep_clear` meters of the
/// robot are skipped, since the robot body occupies them. Returns the number
/// of newly lethal cells.
pub fn fuse_imagination(
    costmap: &mut Costmap,
    patch: &OccupancyPatch,
    pose: Pose,
    inflation: &Inflation,
    keep_clear: f64,
) -> Result<usize, NavError> {
    if costmap.cell_at(pose.x, pose.y).is_none() {
        return Err(NavError::PoseOutside { x: pose.x, y: pose.y });
    }
    let mut added = 0;
    for (r, c) in patch_world_cells(costmap, patch, pose) {
        let (x, y) = costmap.cell_center(r, c);
        if pose.distance_to(x, y) < keep_clear {
            continue;
        }
        if costmap.add_lethal(r, c, inflation) {
            added += 1;
        }
    }
    Ok(added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ClassId;

    fn grid_with(cells: &[(usize, usize)]) -> SemanticGrid {
        let mut g = SemanticGrid::new_free(40, 40, 0.05);
        for &(r, c) in cells {
            let i = g.index(r, c);
            g.laser_layer[i] = ClassId::Wall;
            g.footprint_layer[i] = ClassId::Wall;
        }
        g
    }

    fn no_band(r: f64) -> InflationConfig {
        InflationConfig {
            inscribed_radius: r,
            falloff_radius: r,
        }
    }

    #[test]
    fn empty_grid_costs_nothing() {
        let m = build_global_costmap(&grid_with(&[]), &InflationConfig::default());
        assert!(m.cost.iter().all(|&v| v == FREE));
    }

    #[test]
    fn single_wall_without_inflation() {
        let m = build_global_costmap(&grid_with(&[(20, 20)]), &no_band(0.0));
        assert_eq!(m.count(LETHAL), 1);
        assert_eq!(m.count(FREE), 1599);
    }

    #[test]
    fn single_wall_inscribed_disk() {
        let m = build_global_costmap(&grid_with(&[(20, 20)]), &no_band(0.2));
        let lattice = (-4i64..=4)
            .flat_map(|a| (-4i64..=4).map(move |b| (a, b)))
            .filter(|&(a, b)| a * a + b * b <= 16)
            .count();
        assert_eq!(lattice, 49);
        assert_eq!(m.count(LETHAL), 1);
        assert_eq!(m.count(INSCRIBED), lattice - 1);
        assert!(m.cost.iter().all(|&v| v == FREE || v >= INSCRIBED));
    }

    #[test]
    fn falloff_band_is_graded() {
        let m = build_global_costmap(&grid_with(&[(20, 20)]), &InflationConfig::default());
        assert_eq!(m.count(INSCRIBED), 48);
        assert_eq!(m.get(20, 25), 82);
        assert_eq!(m.get(20, 30), 1);
        assert!(m.get(20, 29) >= 1 && m.get(20, 29) < m.get(20, 26));
        assert_eq!(m.get(20, 31), FREE);
        // Cost never increases moving away from the wall.
        for c in 21..39 {
            assert!(m.get(20, c + 1) <= m.get(20, c));
        }
    }

    #[test]
    fn fusion_adds_one_lethal_cell_with_its_disk() {
        let grid = grid_with(&[]);
        let mut m = build_global_costmap(&grid, &no_band(0.2));
        let inflation = Inflation::new(&no_band(0.2), 0.05);
        let pose = Pose::new(1.025, 1.025, 0.0);
        let mut patch = OccupancyPatch::empty(60);
        assert_eq!(fuse_imagination(&mut m, &patch, pose, &inflation, 0.0).unwrap(), 0);
        assert_eq!(m.count(FREE), 1600);
        // Five cells ahead of the robot.
        patch.set(25, 30, true);
        assert_eq!(fuse_imagination(&mut m, &patch, pose, &inflation, 0.0).unwrap(), 1);
        assert!(m.is_lethal(20, 25));
        assert_eq!(m.count(LETHAL), 1);
        assert_eq!(m.count(INSCRIBED), 48);
        let before = m.clone();
        assert_eq!(fuse_imagination(&mut m, &patch, pose, &inflation, 0.0).unwrap(), 0);
        assert_eq!(m, before);
    }

    #[test]
    fn fusion_over_wall_is_idempotent() {
        let grid = grid_with(&[(20, 25)]);
        let mut m = build_global_costmap(&grid, &InflationConfig::default());
        let before = m.clone();
        let mut patch = OccupancyPatch::empty(60);
        patch.set(25, 30, true);
        let inflation = Inflation::new(&InflationConfig::default(), 0.05);
        fuse_imagination(&mut m, &patch, Pose::new(1.025, 1.025, 0.0), &inflation, 0.0).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn fusion_follows_heading_and_respects_keep_clear() {
        let grid = grid_with(&[]);
        let inflation = Inflation::new(&no_band(0.0), 0.05);
        let mut m = build_global_costmap(&grid, &no_band(0.0));
        let mut patch = OccupancyPatch::empty(60);
        patch.set(25, 30, true);
        patch.set(30, 30, true);
        let pose = Pose::new(1.025, 1.025, std::f64::consts::FRAC_PI_2);
        assert_eq!(fuse_imagination(&mut m, &patch, pose, &inflation, 0.1).unwrap(), 1);
        assert!(m.is_lethal(25, 20));
        assert!(!m.is_lethal(20, 20));
        assert!(matches!(
            fuse_imagination(&mut m, &patch, Pose::new(-1.0, 0.5, 0.0), &inflation, 0.0),
            Err(NavError::PoseOutside { .. })
        ));
    }
}
