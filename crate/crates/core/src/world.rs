//! World documents, the built-in furniture library and rasterization into
//! two-layer semantic grids.
//!
//! A world is described in a small TOML document:
//!
//! ```toml
//! [size]
//! width = 8.0        # meters
//! height = 6.0       # meters
//!
//! [[walls]]
//! from = [0.0, 0.0]  # axis-aligned segment endpoints in meters
//! to = [8.0, 0.0]
//! thickness = 0.1    # optional, meters
//!
//! [[objects]]
//! template = "table_120x80"
//! position = [4.0, 3.0]
//! turns = 1          # optional, counter-clockwise quarter-turns
//! ```
//!
//! The grid uses `col = floor(x / resolution)` and `row = floor(y / resolution)`,
//! so row 0 lies along `y = 0`.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed grid resolution: a 3 m window maps onto 60 cells.
pub const RESOLUTION: f64 = 0.05;

/// Default wall thickness in meters when the document omits it.
pub const DEFAULT_WALL_THICKNESS: f64 = 0.1;

/// Semantic class of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(u8)]
pub enum ClassId {
    #[default]
    Free = 0,
    Unknown = 1,
    Wall = 2,
    Chair = 3,
    Table = 4,
}

impl ClassId {
    pub const ALL: [ClassId; 5] = [
        ClassId::Free,
        ClassId::Unknown,
        ClassId::Wall,
        ClassId::Chair,
        ClassId::Table,
    ];

    pub fn from_u8(value: u8) -> Option<ClassId> {
        ClassId::ALL.get(value as usize).copied()
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    /// Walls, chairs and tables: anything a beam can strike.
    pub fn is_obstacle(self) -> bool {
        matches!(self, ClassId::Wall | ClassId::Chair | ClassId::Table)
    }

    /// Furniture only.
    pub fn is_object(self) -> bool {
        matches!(self, ClassId::Chair | ClassId::Table)
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassId::Free => "free",
            ClassId::Unknown => "unknown",
            ClassId::Wall => "wall",
            ClassId::Chair => "chair",
            ClassId::Table => "table",
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cell offset `(dx, dy)` where `dx` moves along columns and `dy` along rows.
pub type CellOffset = (i32, i32);

/// A piece of furniture: the cells its legs occupy at lidar height and the
/// cells of its full top-down footprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectTemplate {
    pub class: ClassId,
    pub name: &'static str,
    pub leg_cells: Vec<CellOffset>,
    pub footprint_cells: Vec<CellOffset>,
}

impl ObjectTemplate {
    /// Rectangular top of `width` x `depth` cells carried by four square legs
    /// of `leg` cells at the corners.
    fn four_legged(class: ClassId, name: &'static str, width: i32, depth: i32, leg: i32) -> Self {
        let xs = span(width);
        let ys = span(depth);
        let mut footprint_cells = Vec::with_capacity((width * depth) as usize);
        let mut leg_cells = Vec::new();
        for dy in ys.clone() {
            for dx in xs.clone() {
                footprint_cells.push((dx, dy));
                let leg_x = dx < xs.start + leg || dx >= xs.end - leg;
                let leg_y = dy < ys.start + leg || dy >= ys.end - leg;
                if leg_x && leg_y {
                    leg_cells.push((dx, dy));
                }
            }
        }
        ObjectTemplate {
            class,
            name,
            leg_cells,
            footprint_cells,
        }
    }
}

/// Floor of `v / resolution`, tolerant to the representation error of
/// coordinates that sit exactly on a cell boundary (e.g. `2.0 / 0.05`).
pub fn cell_coord(v: f64, resolution: f64) -> f64 {
    (v / resolution + 1e-9).floor()
}

fn span(len: i32) -> std::ops::Range<i32> {
    let lo = -(len / 2);
    lo..lo + len
}

/// Rotates an offset by `turns` counter-clockwise quarter-turns.
pub fn rotate_offset((dx, dy): CellOffset, turns: u8) -> CellOffset {
    match turns % 4 {
        0 => (dx, dy),
        1 => (-dy, dx),
        2 => (-dx, -dy),
        _ => (dy, -dx),
    }
}

/// The built-in object library: five chairs and five tables.
pub fn library() -> &'static [ObjectTemplate] {
    static LIBRARY: OnceLock<Vec<ObjectTemplate>> = OnceLock::new();
    LIBRARY.get_or_init(|| {
        use ClassId::{Chair, Table};
        vec![
            ObjectTemplate::four_legged(Chair, "chair_40", 8, 8, 1),
            ObjectTemplate::four_legged(Chair, "chair_45", 9, 9, 1),
            ObjectTemplate::four_legged(Chair, "chair_50", 10, 10, 1),
            ObjectTemplate::four_legged(Chair, "chair_40x50", 8, 10, 1),
            ObjectTemplate::four_legged(Chair, "chair_50x45", 10, 9, 1),
            ObjectTemplate::four_legged(Table, "table_80", 16, 16, 2),
            ObjectTemplate::four_legged(Table, "table_100x80", 20, 16, 2),
            ObjectTemplate::four_legged(Table, "table_120x60", 24, 12, 2),
            ObjectTemplate::four_legged(Table, "table_120x80", 24, 16, 2),
            ObjectTemplate::four_legged(Table, "table_140x80", 28, 16, 2),
        ]
    })
}

pub fn find_template(name: &str) -> Option<&'static ObjectTemplate> {
    library().iter().find(|t| t.name == name)
}

/// Axis-aligned wall segment with a thickness, all in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub thickness: f64,
}

impl Wall {
    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]` covered by the wall.
    pub fn bounds(&self) -> [f64; 4] {
        let half = self.thickness / 2.0;
        [
            self.from[0].min(self.to[0]) - half,
            self.from[0].max(self.to[0]) + half,
            self.from[1].min(self.to[1]) - half,
            self.from[1].max(self.to[1]) + half,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub template: String,
    pub position: [f64; 2],
    pub turns: u8,
}

/// Validated world description.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution: f64,
    pub walls: Vec<Wall>,
    pub placements: Vec<Placement>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("objects[{index}]: unknown template `{name}`")]
    UnknownTemplate { index: usize, name: String },
    #[error("objects[{index}] (`{template}`) does not fit inside the world bounds")]
    OutOfBounds { index: usize, template: String },
    #[error("objects[{first}] and objects[{second}] have overlapping footprints")]
    Overlap { first: usize, second: usize },
    #[error("objects[{index}] overlaps walls[{wall}]")]
    OverlapsWall { index: usize, wall: usize },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldDoc {
    size: SizeDoc,
    #[serde(default)]
    walls: Vec<WallDoc>,
    #[serde(default)]
    objects: Vec<ObjectDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SizeDoc {
    width: f64,
    height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WallDoc {
    from: [f64; 2],
    to: [f64; 2],
    #[serde(default = "default_thickness")]
    thickness: f64,
}

fn default_thickness() -> f64 {
    DEFAULT_WALL_THICKNESS
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    template: String,
    position: [f64; 2],
    #[serde(default)]
    turns: u8,
}

/// Parses and validates a world document.
pub fn load_world(document: &str) -> Result<WorldSpec, WorldError> {
    let doc: WorldDoc = toml::from_str(document).map_err(|e| {
        let line = e
            .span()
            .map(|s| document[..s.start.min(document.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        WorldError::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    let resolution = doc.size.resolution.unwrap_or(RESOLUTION);
    let spec = WorldSpec {
        width_m: doc.size.width,
        height_m: doc.size.height,
        resolution,
        walls: doc
            .walls
            .into_iter()
            .map(|w| Wall {
                from: w.from,
                to: w.to,
                thickness: w.thickness,
            })
            .collect(),
        placements: doc
            .objects
            .into_iter()
            .map(|o| Placement {
                template: o.template,
                position: o.position,
                turns: o.turns,
            })
            .collect(),
    };
    spec.validate()?;
    Ok(spec)
}

/// Serializes a world back into its document form.
pub fn to_document(spec: &WorldSpec) -> String {
    let doc = WorldDoc {
        size: SizeDoc {
            width: spec.width_m,
            height: spec.height_m,
            resolution: None,
        },
        walls: spec
            .walls
            .iter()
            .map(|w| WallDoc {
                from: w.from,
                to: w.to,
                thickness: w.thickness,
            })
            .collect(),
        objects: spec
            .placements
            .iter()
            .map(|p| ObjectDoc {
                template: p.template.clone(),
                position: p.position,
                turns: p.turns,
            })
            .collect(),
    };
    toml::to_string(&doc).expect("world document serializes")
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> WorldError {
    WorldError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

impl WorldSpec {
    /// An empty world of the given size.
    pub fn empty(width_m: f64, height_m: f64) -> Self {
        WorldSpec {
            width_m,
            height_m,
            resolution: RESOLUTION,
            walls: Vec::new(),
            placements: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        (self.height_m / self.resolution).round() as usize
    }

    pub fn cols(&self) -> usize {
        (self.width_m / self.resolution).round() as usize
    }

    /// Cell containing a world point, without bounds checking.
    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            cell_coord(y, self.resolution) as i64,
            cell_coord(x, self.resolution) as i64,
        )
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.width_m.is_finite() && self.width_m > 0.0) {
            return Err(invalid("size.width", "must be a positive number"));
        }
        if !(self.height_m.is_finite() && self.height_m > 0.0) {
            return Err(invalid("size.height", "must be a positive number"));
        }
        if (self.resolution - RESOLUTION).abs() > 1e-12 {
            return Err(invalid(
                "size.resolution",
                format!("only {RESOLUTION} m/cell is supported"),
            ));
        }
        for (i, wall) in self.walls.iter().enumerate() {
            let coords = wall.from.iter().chain(wall.to.iter());
            if coords.clone().any(|v| !v.is_finite()) {
                return Err(invalid(format!("walls[{i}]"), "non-finite coordinate"));
            }
            if wall.from[0] != wall.to[0] && wall.from[1] != wall.to[1] {
                return Err(invalid(format!("walls[{i}]"), "segment is not axis-aligned"));
            }
            if !(wall.thickness.is_finite() && wall.thickness > 0.0) {
                return Err(invalid(
                    format!("walls[{i}].thickness"),
                    "must be a positive number",
                ));
            }
            let [x0, x1, y0, y1] = [
                wall.from[0].min(wall.to[0]),
                wall.from[0].max(wall.to[0]),
                wall.from[1].min(wall.to[1]),
                wall.from[1].max(wall.to[1]),
            ];
            if x0 < 0.0 || y0 < 0.0 || x1 > self.width_m || y1 > self.height_m {
                return Err(invalid(format!("walls[{i}]"), "segment leaves the world bounds"));
            }
        }

        let rows = self.rows() as i64;
        let cols = self.cols() as i64;
        let wall_cells = self.wall_cells();
        let mut wall_owner: HashMap<(i64, i64), usize> = HashMap::new();
        for (w, cells) in wall_cells.iter().enumerate() {
            for &c in cells {
                wall_owner.entry(c).or_insert(w);
            }
        }
        let mut owner: HashMap<(i64, i64), usize> = HashMap::new();
        for (i, placement) in self.placements.iter().enumerate() {
            if placement.position.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("objects[{i}].position"), "non-finite coordinate"));
            }
            if placement.turns > 3 {
                return Err(invalid(format!("objects[{i}].turns"), "must be in 0..=3"));
            }
            let Some(cells) = self.placement_cells(i) else {
                return Err(WorldError::UnknownTemplate {
                    index: i,
                    name: placement.template.clone(),
                });
            };
            for &(r, c) in &cells.footprint {
                if r < 0 || c < 0 || r >= rows || c >= cols {
                    return Err(WorldError::OutOfBounds {
                        index: i,
                        template: placement.template.clone(),
                    });
                }
            }
            for &cell in &cells.footprint {
                if let Some(&other) = owner.get(&cell) {
                    return Err(WorldError::Overlap {
                        first: other,
                        second: i,
                    });
                }
                if let Some(&wall) = wall_owner.get(&cell) {
                    return Err(WorldError::OverlapsWall { index: i, wall });
                }
            }
            for &cell in &cells.footprint {
                owner.insert(cell, i);
            }
        }
        Ok(())
    }

    /// World cells `(row, col)` of placement `index`, or `None` if its template
    /// is not in the library.
    pub fn placement_cells(&self, index: usize) -> Option<PlacementCells> {
        let placement = self.placements.get(index)?;
        let template = find_template(&placement.template)?;
        let (row, col) = self.cell_of(placement.position[0], placement.position[1]);
        let place = |offsets: &[CellOffset]| -> Vec<(i64, i64)> {
            offsets
                .iter()
                .map(|&o| {
                    let (dx, dy) = rotate_offset(o, placement.turns);
                    (row + dy as i64, col + dx as i64)
                })
                .collect()
        };
        Some(PlacementCells {
            class: template.class,
            legs: place(&template.leg_cells),
            footprint: place(&template.footprint_cells),
        })
    }

    /// Cells covered by each wall, clipped to the grid.
    pub fn wall_cells(&self) -> Vec<Vec<(i64, i64)>> {
        let rows = self.rows() as i64;
        let cols = self.cols() as i64;
        let res = self.resolution;
        self.walls
            .iter()
            .map(|wall| {
                let [x0, x1, y0, y1] = wall.bounds();
                let c0 = ((x0 / res) - 0.5).ceil().max(0.0) as i64;
                let c1 = ((x1 / res) - 0.5).floor().min(cols as f64 - 1.0) as i64;
                let r0 = ((y0 / res) - 0.5).ceil().max(0.0) as i64;
                let r1 = ((y1 / res) - 0.5).floor().min(rows as f64 - 1.0) as i64;
                let mut cells = Vec::new();
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        cells.push((r, c));
                    }
                }
                cells
            })
            .collect()
    }
}

/// Cells of one placed object in world grid coordinates `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementCells {
    pub class: ClassId,
    pub legs: Vec<(i64, i64)>,
    pub footprint: Vec<(i64, i64)>,
}

/// The rasterized world: what a lidar at leg height can hit, and the full
/// top-down occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGrid {
    pub rows: usize,
    pub cols: usize,
    pub resolution: f64,
    pub laser_layer: Vec<ClassId>,
    pub footprint_layer: Vec<ClassId>,
}

impl SemanticGrid {
    pub fn new_free(rows: usize, cols: usize, resolution: f64) -> Self {
        SemanticGrid {
            rows,
            cols,
            resolution,
            laser_layer: vec![ClassId::Free; rows * cols],
            footprint_layer: vec![ClassId::Free; rows * cols],
        }
    }

    pub fn width_m(&self) -> f64 {
        self.cols as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.rows as f64 * self.resolution
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let row = cell_coord(y, self.resolution);
        let col = cell_coord(x, self.resolution);
        if row < 0.0 || col < 0.0 || row >= self.rows as f64 || col >= self.cols as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    pub fn laser(&self, row: usize, col: usize) -> ClassId {
        self.laser_layer[self.index(row, col)]
    }

    pub fn footprint(&self, row: usize, col: usize) -> ClassId {
        self.footprint_layer[self.index(row, col)]
    }

    /// Footprint class at a signed cell; outside the grid is free.
    pub fn footprint_or_free(&self, row: i64, col: i64) -> ClassId {
        if self.contains(row, col) {
            self.footprint(row as usize, col as usize)
        } else {
            ClassId::Free
        }
    }
}

/// Rasterizes a validated world into its two semantic layers.
pub fn rasterize(spec: &WorldSpec) -> SemanticGrid {
    let mut grid = SemanticGrid::new_free(spec.rows(), spec.cols(), spec.resolution);
    for cells in spec.wall_cells() {
        for (r, c) in cells {
            let idx = grid.index(r as usize, c as usize);
            grid.laser_layer[idx] = ClassId::Wall;
            grid.footprint_layer[idx] = ClassId::Wall;
        }
    }
    for i in 0..spec.placements.len() {
        let cells = spec
            .placement_cells(i)
            .expect("rasterize requires a validated world");
        for &(r, c) in &cells.footprint {
            if grid.contains(r, c) {
                let idx = grid.index(r as usize, c as usize);
                grid.footprint_layer[idx] = cells.class;
            }
        }
        for &(r, c) in &cells.legs {
            if grid.contains(r, c) {
                let idx = grid.index(r as usize, c as usize);
                grid.laser_layer[idx] = cells.class;
            }
        }
    }
    grid
}
