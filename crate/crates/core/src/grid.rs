//! Environment model: tagged grid cells, priority and semi-transparent street
//! cells, the scenario text format, and occlusion realizations.
//!
//! Coordinates: origin at the top-left cell, `x` grows rightward and `y`
//! downward. The center of cell `(x, y)` lies at `((x + 0.5) l, (y + 0.5) l)`
//! where `l` is the grid length in meters.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    pub fn dist2(self, other: Cell) -> i64 {
        let dx = other.x as i64 - self.x as i64;
        let dy = other.y as i64 - self.y as i64;
        dx * dx + dy * dy
    }
}

// Row-major: y first, then x.
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellTag {
    /// Blocks line of sight.
    Obstacle,
    /// Neither placeable nor blocking (sidewalks and the like).
    Blocked,
    /// Must be covered.
    Street,
    /// Available for sensor placement.
    Free,
    /// A free cell that already hosts a sensor.
    SensorOccupied,
}

impl CellTag {
    fn to_char(self) -> char {
        match self {
            CellTag::Obstacle => '#',
            CellTag::Blocked => 'B',
            CellTag::Street => 'S',
            CellTag::Free => '.',
            CellTag::SensorOccupied => 'X',
        }
    }
}

/// Shared range and field of view of the homogeneous sensors of a scenario.
///
/// The field of view is kept in degrees, the unit of every user-facing
/// surface, so that scenario files round-trip exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub range_m: f64,
    pub fov_deg: f64,
}

impl SensorSpec {
    pub fn new(range_m: f64, fov_deg: f64) -> Result<Self> {
        let spec = SensorSpec { range_m, fov_deg };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fov_rad(&self) -> f64 {
        self.fov_deg.to_radians()
    }

    /// Area of the sensing wedge, `r^2 * omega / 2`.
    pub fn wedge_area(&self) -> f64 {
        self.range_m * self.range_m * self.fov_rad() / 2.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.range_m > 0.0 && self.range_m.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "sensor range must be positive, got {}",
                self.range_m
            )));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(Error::InvalidScenario(format!(
                "sensor fov must lie in (0, 360] degrees, got {}",
                self.fov_deg
            )));
        }
        Ok(())
    }
}

/// A grid map with tagged cells plus its sensor specification.
///
/// Derived lookups (street list, street index, free list) are computed at
/// construction and the value is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    width: usize,
    height: usize,
    grid_len: f64,
    tags: Vec<CellTag>,
    priority: BTreeSet<Cell>,
    opacity: BTreeMap<Cell, f64>,
    sensor_spec: SensorSpec,
    street_cells: Vec<Cell>,
    street_index: Vec<Option<u32>>,
    free_cells: Vec<Cell>,
}

impl Scenario {
    pub fn new(
        width: usize,
        height: usize,
        grid_len: f64,
        tags: Vec<CellTag>,
        priority: BTreeSet<Cell>,
        opacity: BTreeMap<Cell, f64>,
        sensor_spec: SensorSpec,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidScenario("empty grid".into()));
        }
        if tags.len() != width * height {
            return Err(Error::InvalidScenario(format!(
                "expected {} tags, got {}",
                width * height,
                tags.len()
            )));
        }
        if !(grid_len > 0.0 && grid_len.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "grid_len must be positive, got {grid_len}"
            )));
        }
        sensor_spec.validate()?;

        let tag_at = |c: &Cell| {
            (c.x < width && c.y < height).then(|| tags[c.y * width + c.x])
        };
        for c in &priority {
            if tag_at(c) != Some(CellTag::Street) {
                return Err(Error::InvalidScenario(format!(
                    "priority on non-street cell ({}, {})",
                    c.x, c.y
                )));
            }
        }
        for (c, &v) in &opacity {
            if tag_at(c) != Some(CellTag::Street) {
                return Err(Error::InvalidScenario(format!(
                    "opacity on non-street cell ({}, {})",
                    c.x, c.y
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidScenario(format!(
                    "opacity {v} at ({}, {}) outside [0, 1]",
                    c.x, c.y
                )));
            }
        }

        let mut street_cells = Vec::new();
        let mut street_index = vec![None; tags.len()];
        let mut free_cells = Vec::new();
        for y in 0..height {
            for x in 0..width {
                match tags[y * width + x] {
                    CellTag::Street => {
                        street_index[y * width + x] = Some(street_cells.len() as u32);
                        street_cells.push(Cell::new(x, y));
                    }
                    CellTag::Free => free_cells.push(Cell::new(x, y)),
                    _ => {}
                }
            }
        }

        Ok(Scenario {
            width,
            height,
            grid_len,
            tags,
            priority,
            opacity,
            sensor_spec,
            street_cells,
            street_index,
            free_cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn grid_len(&self) -> f64 {
        self.grid_len
    }

    pub fn sensor_spec(&self) -> SensorSpec {
        self.sensor_spec
    }

    /// Number of street cells.
    pub fn n_road(&self) -> usize {
        self.street_cells.len()
    }

    pub fn tags(&self) -> &[CellTag] {
        &self.tags
    }

    pub fn priority(&self) -> &BTreeSet<Cell> {
        &self.priority
    }

    pub fn opacity(&self) -> &BTreeMap<Cell, f64> {
        &self.opacity
    }

    /// Street cells in row-major order; positions in this list are the street
    /// indices used by coverage fields.
    pub fn street_cells(&self) -> &[Cell] {
        &self.street_cells
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> &[Cell] {
        &self.free_cells
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn tag(&self, c: Cell) -> CellTag {
        self.tags[c.y * self.width + c.x]
    }

    pub fn get(&self, x: i64, y: i64) -> Option<CellTag> {
        self.in_bounds(x, y)
            .then(|| self.tags[y as usize * self.width + x as usize])
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height && self.tag(c) == CellTag::Free
    }

    pub fn street_index(&self, c: Cell) -> Option<usize> {
        if c.x < self.width && c.y < self.height {
            self.street_index[c.y * self.width + c.x].map(|i| i as usize)
        } else {
            None
        }
    }

    pub fn is_priority(&self, c: Cell) -> bool {
        self.priority.contains(&c)
    }

    /// Copy of this scenario with the given cells tagged as sensor-occupied.
    pub fn with_sensors(&self, cells: impl IntoIterator<Item = Cell>) -> Result<Scenario> {
        let mut tags = self.tags.clone();
        for c in cells {
            if !self.is_free(c) {
                return Err(Error::InvalidGene {
                    x: c.x as i64,
                    y: c.y as i64,
                });
            }
            tags[c.y * self.width + c.x] = CellTag::SensorOccupied;
        }
        Scenario::new(
            self.width,
            self.height,
            self.grid_len,
            tags,
            self.priority.clone(),
            self.opacity.clone(),
            self.sensor_spec,
        )
    }

    /// Parses the scenario text format.
    ///
    /// Header lines are `key=value` pairs (`grid_len`, `sensor_range`,
    /// `sensor_fov_deg`, optional `name`) and `opacity <x> <y> <value>` lines.
    /// Lines starting with `;` are comments. The grid block follows: one
    /// character per cell, rows top to bottom, `#` obstacle, `B` blocked,
    /// `S` street, `P` priority street, `.` free, `X` sensor-occupied.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut grid_len = None;
        let mut range = None;
        let mut fov = None;
        let mut opacity_lines = Vec::new();
        let mut rows: Vec<(usize, &str)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let is_grid_row = line
                .chars()
                .all(|ch| matches!(ch, '#' | 'B' | 'S' | 'P' | '.' | 'X'));
            if !rows.is_empty() || is_grid_row {
                rows.push((lineno, line));
                continue;
            }
            if let Some(rest) = line.strip_prefix("opacity") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(parse_err(lineno, "expected `opacity <x> <y> <value>`"));
                }
                let x: usize = parse_num(lineno, parts[0])?;
                let y: usize = parse_num(lineno, parts[1])?;
                let v: f64 = parse_num(lineno, parts[2])?;
                opacity_lines.push((lineno, Cell::new(x, y), v));
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(parse_err(lineno, format!("unrecognized line `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "grid_len" => grid_len = Some(parse_num::<f64>(lineno, value)?),
                "sensor_range" => range = Some(parse_num::<f64>(lineno, value)?),
                "sensor_fov_deg" => fov = Some(parse_num::<f64>(lineno, value)?),
                "name" => {}
                _ => return Err(parse_err(lineno, format!("unknown key `{key}`"))),
            }
        }

        let grid_len = grid_len.ok_or_else(|| parse_err(0, "missing grid_len"))?;
        let (Some(range), Some(fov)) = (range, fov) else {
            return Err(parse_err(0, "missing sensor spec (sensor_range, sensor_fov_deg)"));
        };
        let sensor_spec = SensorSpec { range_m: range, fov_deg: fov };
        if rows.is_empty() {
            return Err(parse_err(0, "missing grid block"));
        }

        let width = rows[0].1.chars().count();
        let height = rows.len();
        let mut tags = Vec::with_capacity(width * height);
        let mut priority = BTreeSet::new();
        for (y, &(lineno, row)) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(parse_err(
                    lineno,
                    format!("row has {} cells, expected {width}", row.chars().count()),
                ));
            }
            for (x, ch) in row.chars().enumerate() {
                let tag = match ch {
                    '#' => CellTag::Obstacle,
                    'B' => CellTag::Blocked,
                    'S' => CellTag::Street,
                    'P' => {
                        priority.insert(Cell::new(x, y));
                        CellTag::Street
                    }
                    '.' => CellTag::Free,
                    'X' => CellTag::SensorOccupied,
                    other => {
                        return Err(parse_err(lineno, format!("unknown cell character `{other}`")))
                    }
                };
                tags.push(tag);
            }
        }

        let mut opacity = BTreeMap::new();
        for (lineno, c, v) in opacity_lines {
            if c.x >= width || c.y >= height || tags[c.y * width + c.x] != CellTag::Street {
                return Err(parse_err(
                    lineno,
                    format!("opacity on non-street cell ({}, {})", c.x, c.y),
                ));
            }
            opacity.insert(c, v);
        }

        Scenario::new(width, height, grid_len, tags, priority, opacity, sensor_spec)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "grid_len={}", self.grid_len);
        let _ = writeln!(out, "sensor_range={}", self.sensor_spec.range_m);
        let _ = writeln!(out, "sensor_fov_deg={}", self.sensor_spec.fov_deg);
        for (c, v) in &self.opacity {
            let _ = writeln!(out, "opacity {} {} {}", c.x, c.y, v);
        }
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                let ch = if self.priority.contains(&c) {
                    'P'
                } else {
                    self.tag(c).to_char()
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn stats(&self) -> ScenarioStats {
        let count = |t: CellTag| self.tags.iter().filter(|&&x| x == t).count();
        ScenarioStats {
            n_road: self.n_road(),
            obstacle: count(CellTag::Obstacle),
            blocked: count(CellTag::Blocked),
            street: count(CellTag::Street),
            free: count(CellTag::Free),
            sensor_occupied: count(CellTag::SensorOccupied),
            priority: self.priority.len(),
            opacity_cells: self.opacity.len(),
        }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(line, format!("invalid number `{s}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub n_road: usize,
    pub obstacle: usize,
    pub blocked: usize,
    pub street: usize,
    pub free: usize,
    pub sensor_occupied: usize,
    pub priority: usize,
    pub opacity_cells: usize,
}

/// One realization of the semi-transparent street cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcclusionMask {
    pub opaque_now: BTreeSet<Cell>,
    pub seed: u64,
}

impl OcclusionMask {
    /// A realization with nothing opaque.
    pub fn clear() -> Self {
        OcclusionMask {
            opaque_now: BTreeSet::new(),
            seed: 0,
        }
    }

    pub fn is_opaque(&self, c: Cell) -> bool {
        self.opaque_now.contains(&c)
    }
}

/// Draws `count` occlusion realizations: every opacity-annotated cell is
/// independently opaque with probability equal to its opacity.
pub fn sample_occlusion_masks(scenario: &Scenario, seed: u64, count: usize) -> Vec<OcclusionMask> {
    (0..count)
        .map(|i| {
            let mask_seed = rng::derive_seed(seed, &[rng::purpose::MASK, i as u64]);
            let mut stream = rng::stream(mask_seed, &[]);
            let opaque_now = scenario
                .opacity
                .iter()
                .filter_map(|(&c, &p)| (stream.random::<f64>() < p).then_some(c))
                .collect();
            OcclusionMask {
                opaque_now,
                seed: mask_seed,
            }
        })
        .collect()
}
