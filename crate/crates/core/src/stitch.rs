//! Composing a large map from independently optimized fragments.
//!
//! A library holds fragments (a junction or straight segment scenario plus an
//! optimized placement). A layout places fragments on a global grid with an
//! offset, a quarter-turn rotation and a mirror flag, and names which ports
//! meet. Ports are the runs of street cells on a fragment's boundary, named by
//! side (`N`, `E`, `S`, `W`) and index along that side, e.g. `E0`.
//!
//! Library document:
//!
//! ```text
//! {"fragments": [{"id": "j", "kind": "junction", "scenario": "<scenario text>",
//!                 "solution": [{"x": 3, "y": 9, "phi_deg": 12.5}], "period": null}]}
//! ```
//!
//! Layout document:
//!
//! ```text
//! {"placements": [{"fragment": "j", "offset": [0, 0], "rotation": 90, "mirror": false}],
//!  "connections": [{"a": {"placement": 0, "port": "E0"}, "b": {"placement": 1, "port": "W0"}}]}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, SymmetryDecl};
use crate::error::{Error, Result};
use crate::evolve::Chromosome;
use crate::grid::{Cell, CellTag, Scenario};
use crate::model::Problem;
use crate::pipeline::{optimize, problem_for};
use crate::refine::local_search_where;
use crate::result::{gene_docs, GeneDoc};
use crate::rng::{self, purpose};
use crate::symmetry::{Axis, Transform};
use crate::visibility::{candidate_angles, nearest_angle, Gene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FragmentKind {
    Junction,
    StraightSegment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    N,
    E,
    S,
    W,
}

impl Side {
    fn letter(self) -> char {
        match self {
            Side::N => 'N',
            Side::E => 'E',
            Side::S => 'S',
            Side::W => 'W',
        }
    }

    /// Outward unit step.
    fn normal(self) -> (i64, i64) {
        match self {
            Side::N => (0, -1),
            Side::E => (1, 0),
            Side::S => (0, 1),
            Side::W => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub name: String,
    pub side: Side,
    pub cells: Vec<Cell>,
}

/// Runs of street cells along the map boundary, side by side in the order
/// N, E, S, W.
pub fn ports(scenario: &Scenario) -> Vec<Port> {
    let (w, h) = (scenario.width(), scenario.height());
    let mut out = Vec::new();
    for side in [Side::N, Side::E, Side::S, Side::W] {
        let cells: Vec<Cell> = match side {
            Side::N => (0..w).map(|x| Cell::new(x, 0)).collect(),
            Side::E => (0..h).map(|y| Cell::new(w - 1, y)).collect(),
            Side::S => (0..w).map(|x| Cell::new(x, h - 1)).collect(),
            Side::W => (0..h).map(|y| Cell::new(0, y)).collect(),
        };
        let mut run: Vec<Cell> = Vec::new();
        let mut index = 0;
        for c in cells.into_iter().chain([Cell::new(usize::MAX, usize::MAX)]) {
            let street = c.x != usize::MAX && scenario.tag(c) == CellTag::Street;
            if street {
                run.push(c);
            } else if !run.is_empty() {
                out.push(Port {
                    name: format!("{}{index}", side.letter()),
                    side,
                    cells: std::mem::take(&mut run),
                });
                index += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentDoc {
    pub id: String,
    pub kind: FragmentKind,
    pub scenario: String,
    pub solution: Vec<GeneDoc>,
    /// Translation period of a segment's placement in cells.
    #[serde(default)]
    pub period: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryDoc {
    pub fragments: Vec<FragmentDoc>,
}

#[derive(Debug, Clone)]
pub struct Fragment {
    pub id: String,
    pub kind: FragmentKind,
    pub scenario: Scenario,
    /// Orientations are as stored; they are snapped once placed.
    pub solution: Vec<Gene>,
    pub ports: Vec<Port>,
    pub period: Option<usize>,
}

impl Fragment {
    pub fn new(
        id: &str,
        kind: FragmentKind,
        scenario: Scenario,
        solution: Vec<Gene>,
        period: Option<usize>,
    ) -> Result<Self> {
        for g in &solution {
            if !scenario.in_bounds(g.x as i64, g.y as i64) || !scenario.is_free(g.cell()) {
                return Err(Error::InvalidGene {
                    x: g.x as i64,
                    y: g.y as i64,
                });
            }
        }
        let ports = ports(&scenario);
        Ok(Fragment {
            id: id.to_string(),
            kind,
            scenario,
            solution,
            ports,
            period,
        })
    }

    pub fn from_doc(doc: &FragmentDoc) -> Result<Self> {
        let scenario = Scenario::parse(&doc.scenario)?;
        let solution = doc
            .solution
            .iter()
            .map(|d| Gene::new(d.x, d.y, d.phi_deg.to_radians()))
            .collect();
        Fragment::new(&doc.id, doc.kind, scenario, solution, doc.period)
    }

    pub fn to_doc(&self) -> FragmentDoc {
        FragmentDoc {
            id: self.id.clone(),
            kind: self.kind,
            scenario: self.scenario.to_text(),
            solution: gene_docs(&self.solution),
            period: self.period,
        }
    }

    /// Axis a straight segment runs along, in its own frame.
    fn local_axis(&self) -> Result<Axis> {
        let sides: BTreeSet<Side> = self.ports.iter().map(|p| p.side).collect();
        let along_x = sides.contains(&Side::W) || sides.contains(&Side::E);
        let along_y = sides.contains(&Side::N) || sides.contains(&Side::S);
        match (along_x, along_y) {
            (true, false) => Ok(Axis::X),
            (false, true) => Ok(Axis::Y),
            _ => Err(Error::Layout(format!(
                "segment '{}' needs ports on exactly one pair of opposite sides",
                self.id
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Library {
    pub fragments: Vec<Fragment>,
}

impl Library {
    pub fn get(&self, id: &str) -> Option<&Fragment> {
        self.fragments.iter().find(|f| f.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LibraryDoc = serde_json::from_str(text)?;
        let fragments = doc.fragments.iter().map(Fragment::from_doc).collect::<Result<Vec<_>>>()?;
        let mut ids = HashSet::new();
        for f in &fragments {
            if !ids.insert(f.id.as_str()) {
                return Err(Error::Layout(format!("duplicate fragment id '{}'", f.id)));
            }
        }
        Ok(Library { fragments })
    }

    pub fn to_json(&self) -> String {
        let doc = LibraryDoc {
            fragments: self.fragments.iter().map(Fragment::to_doc).collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("library documents serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub fragment: String,
    pub offset: [usize; 2],
    /// Clockwise on screen, in degrees; one of 0, 90, 180, 270.
    #[serde(default)]
    pub rotation: u32,
    /// Reflect the fragment left to right before rotating it.
    #[serde(default)]
    pub mirror: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortRef {
    pub placement: usize,
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub a: PortRef,
    pub b: PortRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub placements: Vec<Placement>,
    #[serde(default)]
    pub connections: Vec<Connection>,
}

impl Layout {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Mirror, then rotate, then offset. Returns the transform and the placed
/// width and height.
fn placement_transform(pl: &Placement, w: usize, h: usize) -> Result<(Transform, usize, usize)> {
    if !pl.rotation.is_multiple_of(90) || pl.rotation >= 360 {
        return Err(Error::Layout(format!(
            "rotation must be 0, 90, 180 or 270, got {}",
            pl.rotation
        )));
    }
    let mut t = Transform::IDENTITY;
    if pl.mirror {
        t = Transform {
            m: [[-1, 0], [0, 1]],
            t: [2 * w as i64, 0],
        }
        .then(&t);
    }
    let (mut pw, mut ph) = (w, h);
    for _ in 0..pl.rotation / 90 {
        // (x, y) -> (ph - 1 - y, x)
        t = Transform {
            m: [[0, -1], [1, 0]],
            t: [2 * ph as i64, 0],
        }
        .then(&t);
        std::mem::swap(&mut pw, &mut ph);
    }
    t = Transform {
        m: [[1, 0], [0, 1]],
        t: [2 * pl.offset[0] as i64, 2 * pl.offset[1] as i64],
    }
    .then(&t);
    Ok((t, pw, ph))
}

fn linear(t: &Transform, (x, y): (i64, i64)) -> (i64, i64) {
    (t.m[0][0] * x + t.m[0][1] * y, t.m[1][0] * x + t.m[1][1] * y)
}

fn image(t: &Transform, c: Cell) -> Cell {
    let (x, y) = t.cell(c.x as i64, c.y as i64).expect("quarter turns map cells to cells");
    Cell::new(x as usize, y as usize)
}

#[derive(Debug, Clone)]
pub struct PlacedPort {
    pub name: String,
    pub cells: Vec<Cell>,
    pub normal: (i64, i64),
    pub connected: bool,
}

/// One fragment as placed on the global grid.
#[derive(Debug, Clone)]
pub struct PlacedPiece {
    pub fragment: String,
    pub kind: FragmentKind,
    /// Local-to-global transform.
    pub transform: Transform,
    pub origin: (usize, usize),
    pub size: (usize, usize),
    pub local_size: (usize, usize),
    /// The fragment solution in local coordinates.
    pub local_genes: Vec<Gene>,
    pub ports: Vec<PlacedPort>,
    /// Global axis of a straight segment.
    pub axis: Option<Axis>,
    pub period: Option<usize>,
}

impl PlacedPiece {
    fn contains(&self, c: Cell) -> bool {
        let (ox, oy) = self.origin;
        let (w, h) = self.size;
        (ox..ox + w).contains(&c.x) && (oy..oy + h).contains(&c.y)
    }
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub scenario: Scenario,
    /// Union of the placed fragment solutions.
    pub chromosome: Chromosome,
    pub pieces: Vec<PlacedPiece>,
}

/// Snaps `phi` to the nearest candidate orientation at `c` of the scenario.
fn snap_to(scenario: &Scenario, c: Cell, phi: f64) -> Option<f64> {
    nearest_angle(&candidate_angles(c, scenario), phi)
}

/// Builds the global scenario and the union of the placed solutions.
/// Cells no fragment covers become `B` (blocked). Two genes landing on the
/// same cell are merged, keeping the first.
pub fn assemble_layout(layout: &Layout, library: &Library) -> Result<Assembly> {
    if layout.placements.is_empty() {
        return Err(Error::Layout("layout has no placements".into()));
    }
    let frags: Vec<&Fragment> = layout
        .placements
        .iter()
        .map(|pl| {
            library
                .get(&pl.fragment)
                .ok_or_else(|| Error::Layout(format!("unknown fragment '{}'", pl.fragment)))
        })
        .collect::<Result<_>>()?;

    let first = &frags[0].scenario;
    for f in &frags[1..] {
        let (a, b) = (first.sensor_spec(), f.scenario.sensor_spec());
        if a != b || first.grid_len() != f.scenario.grid_len() {
            return Err(Error::SensorSpecMismatch(format!(
                "'{}' has r={} m, fov={} deg, l={} m but '{}' has r={} m, fov={} deg, l={} m",
                frags[0].id,
                a.range_m,
                a.fov_deg,
                first.grid_len(),
                f.id,
                b.range_m,
                b.fov_deg,
                f.scenario.grid_len()
            )));
        }
    }

    let mut pieces = Vec::new();
    for (pl, f) in layout.placements.iter().zip(&frags) {
        let (w, h) = (f.scenario.width(), f.scenario.height());
        let (t, pw, ph) = placement_transform(pl, w, h)?;
        let ports = f
            .ports
            .iter()
            .map(|p| PlacedPort {
                name: p.name.clone(),
                cells: p.cells.iter().map(|&c| image(&t, c)).collect(),
                normal: linear(&t, p.side.normal()),
                connected: false,
            })
            .collect();
        let axis = match f.kind {
            FragmentKind::Junction => None,
            FragmentKind::StraightSegment => {
                let v = match f.local_axis()? {
                    Axis::X => (1, 0),
                    Axis::Y => (0, 1),
                };
                Some(if linear(&t, v).0 != 0 { Axis::X } else { Axis::Y })
            }
        };
        pieces.push(PlacedPiece {
            fragment: f.id.clone(),
            kind: f.kind,
            transform: t,
            origin: (pl.offset[0], pl.offset[1]),
            size: (pw, ph),
            local_size: (w, h),
            local_genes: f.solution.clone(),
            ports,
            axis,
            period: f.period,
        });
    }

    let width = pieces.iter().map(|p| p.origin.0 + p.size.0).max().unwrap_or(0);
    let height = pieces.iter().map(|p| p.origin.1 + p.size.1).max().unwrap_or(0);
    let mut tags: Vec<Option<CellTag>> = vec![None; width * height];
    let mut priority = BTreeSet::new();
    let mut opacity = BTreeMap::new();
    for (piece, f) in pieces.iter().zip(&frags) {
        let sc = &f.scenario;
        for y in 0..sc.height() {
            for x in 0..sc.width() {
                let c = Cell::new(x, y);
                let g = image(&piece.transform, c);
                let slot = &mut tags[g.y * width + g.x];
                if slot.is_some() {
                    return Err(Error::Layout(format!("pieces overlap at ({}, {})", g.x, g.y)));
                }
                *slot = Some(sc.tag(c));
                if sc.is_priority(c) {
                    priority.insert(g);
                }
                if let Some(&v) = sc.opacity().get(&c) {
                    opacity.insert(g, v);
                }
            }
        }
    }
    let tags = tags.into_iter().map(|t| t.unwrap_or(CellTag::Blocked)).collect();
    let scenario = Scenario::new(
        width,
        height,
        first.grid_len(),
        tags,
        priority,
        opacity,
        first.sensor_spec(),
    )?;

    for conn in &layout.connections {
        let find = |r: &PortRef| -> Result<(usize, usize)> {
            let piece = pieces
                .get(r.placement)
                .ok_or_else(|| Error::Layout(format!("no placement {}", r.placement)))?;
            let i = piece
                .ports
                .iter()
                .position(|p| p.name == r.port)
                .ok_or_else(|| Error::Layout(format!("placement {} has no port {}", r.placement, r.port)))?;
            Ok((r.placement, i))
        };
        let (pa, ia) = find(&conn.a)?;
        let (pb, ib) = find(&conn.b)?;
        let a = &pieces[pa].ports[ia];
        let b = &pieces[pb].ports[ib];
        let stepped: BTreeSet<(i64, i64)> = a
            .cells
            .iter()
            .map(|c| (c.x as i64 + a.normal.0, c.y as i64 + a.normal.1))
            .collect();
        let other: BTreeSet<(i64, i64)> = b.cells.iter().map(|c| (c.x as i64, c.y as i64)).collect();
        if stepped != other || a.normal != (-b.normal.0, -b.normal.1) {
            return Err(Error::Layout(format!(
                "ports {}:{} and {}:{} do not meet",
                pa, conn.a.port, pb, conn.b.port
            )));
        }
        pieces[pa].ports[ia].connected = true;
        pieces[pb].ports[ib].connected = true;
    }
    for (i, piece) in pieces.iter().enumerate() {
        for port in piece.ports.iter().filter(|p| !p.connected) {
            let inside = port.cells.iter().any(|c| {
                scenario.in_bounds(c.x as i64 + port.normal.0, c.y as i64 + port.normal.1)
            });
            if inside {
                return Err(Error::Layout(format!("dangling port {i}:{}", port.name)));
            }
        }
    }

    let mut genes = Vec::new();
    let mut taken = HashSet::new();
    for piece in &pieces {
        for g in ensemble(piece, &scenario, false, 0) {
            if taken.insert(g.cell()) {
                genes.push(g);
            }
        }
    }
    Ok(Assembly {
        scenario,
        chromosome: Chromosome::new(genes),
        pieces,
    })
}

/// The placed solution of `piece`, optionally reflected left to right within
/// the fragment, then moved `shift` cells along the segment axis. Genes that
/// leave the piece or land on a non-free cell are dropped.
fn ensemble(piece: &PlacedPiece, scenario: &Scenario, mirrored: bool, shift: usize) -> Vec<Gene> {
    let mut t = piece.transform;
    if mirrored {
        let flip = Transform {
            m: [[-1, 0], [0, 1]],
            t: [2 * piece.local_size.0 as i64, 0],
        };
        t = t.then(&flip);
    }
    let (dx, dy) = match piece.axis {
        Some(Axis::X) => (shift as i64, 0),
        Some(Axis::Y) => (0, shift as i64),
        None => (0, 0),
    };
    piece
        .local_genes
        .iter()
        .filter_map(|g| {
            let (x, y) = t.cell(g.x as i64, g.y as i64)?;
            let (x, y) = (x + dx, y + dy);
            if !scenario.in_bounds(x, y) {
                return None;
            }
            let c = Cell::new(x as usize, y as usize);
            if !piece.contains(c) || !scenario.is_free(c) {
                return None;
            }
            let phi = snap_to(scenario, c, t.angle(g.phi))?;
            Some(Gene::new(c.x, c.y, phi))
        })
        .collect()
}

/// Shifts tried for a piece: one motif period (or the segment length) for a
/// straight segment, none for a junction.
fn shift_count(piece: &PlacedPiece) -> usize {
    match piece.axis {
        None => 1,
        Some(axis) => {
            let len = match axis {
                Axis::X => piece.size.0,
                Axis::Y => piece.size.1,
            };
            piece.period.unwrap_or(len).clamp(1, len)
        }
    }
}

/// Pieces in the order they are joined: breadth first along connections
/// from the first placement, then any unconnected pieces.
fn join_order(layout: &Layout) -> Vec<usize> {
    let n = layout.placements.len();
    let mut adj = vec![Vec::new(); n];
    for c in &layout.connections {
        adj[c.a.placement].push(c.b.placement);
        adj[c.b.placement].push(c.a.placement);
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub fitness: f64,
    pub mirrors: Vec<bool>,
    pub shifts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StitchOutcome {
    pub chromosome: Chromosome,
    /// Fitness of the plain assembly.
    pub naive_fitness: f64,
    pub best_trial: usize,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct StitchParams {
    pub trials: usize,
    pub seed: u64,
    /// Let the final local search move every sensor, not only those near a
    /// joint.
    pub full_local_search: bool,
}

/// Joins the fragment placements of `asm` on the global problem `p`.
///
/// Trial 0 starts from the plain assembly; later trials start from random
/// per-fragment mirror states. Each trial visits the pieces in join order and
/// keeps the mirror state and (for segments) rigid shift that maximize the
/// global fitness, then runs a local search over sensors within `2r` of a
/// joined port. The best trial wins, ties going to the earliest.
pub fn stitch_optimize(asm: &Assembly, p: &Problem, layout: &Layout, params: StitchParams) -> Result<StitchOutcome> {
    if params.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let sc = p.scenario();
    let n = asm.pieces.len();
    // options[i][mirror][shift] -> (genes, footprints)
    type Option_ = (Vec<Gene>, Vec<Vec<Vec<u32>>>);
    let options: Vec<[Vec<Option_>; 2]> = asm
        .pieces
        .par_iter()
        .map(|piece| {
            let build = |mirrored: bool| {
                (0..shift_count(piece))
                    .map(|s| {
                        let genes = ensemble(piece, sc, mirrored, s);
                        let fps = genes.iter().map(|g| p.footprints(g)).collect();
                        (genes, fps)
                    })
                    .collect::<Vec<_>>()
            };
            [build(false), build(true)]
        })
        .collect();

    let reach = 2.0 * sc.sensor_spec().range_m / sc.grid_len();
    let joints: Vec<Cell> = asm
        .pieces
        .iter()
        .flat_map(|pc| pc.ports.iter().filter(|pt| pt.connected).flat_map(|pt| pt.cells.iter().copied()))
        .collect();
    let near_joint = |g: &Gene| {
        joints.iter().any(|&c| {
            let d2 = g.cell().dist2(c) as f64;
            d2 <= reach * reach
        })
    };
    let order = join_order(layout);

    let run = |trial: usize| -> (Chromosome, TrialRecord) {
        let mut mirrors = vec![false; n];
        if trial > 0 {
            let mut r = rng::stream(params.seed, &[purpose::STITCH, trial as u64]);
            for m in mirrors.iter_mut() {
                *m = r.random_bool(0.5);
            }
        }
        let mut shifts = vec![0usize; n];
        let mut state = p.state(&[]);
        for i in 0..n {
            for fp in &options[i][mirrors[i] as usize][0].1 {
                state.add_footprints(p, fp);
            }
        }
        for &i in &order {
            let cur = &options[i][mirrors[i] as usize][shifts[i]].1;
            for fp in cur {
                state.remove_footprints(p, fp);
            }
            let mut best: Option<(f64, bool, usize)> = None;
            for m in [mirrors[i], !mirrors[i]] {
                for (s, (_, fps)) in options[i][m as usize].iter().enumerate() {
                    for fp in fps {
                        state.add_footprints(p, fp);
                    }
                    let f = state.fitness(p);
                    for fp in fps {
                        state.remove_footprints(p, fp);
                    }
                    if best.is_none_or(|(bf, _, _)| f > bf) {
                        best = Some((f, m, s));
                    }
                }
            }
            let (_, m, s) = best.expect("every piece has at least one option");
            mirrors[i] = m;
            shifts[i] = s;
            for fp in &options[i][m as usize][s].1 {
                state.add_footprints(p, fp);
            }
        }
        let genes: Vec<Gene> = (0..n)
            .flat_map(|i| options[i][mirrors[i] as usize][shifts[i]].0.iter().copied())
            .collect();
        let joined = Chromosome::new(genes);
        let refined = if params.full_local_search {
            local_search_where(&joined, p, &|_| true)
        } else {
            local_search_where(&joined, p, &near_joint)
        }
        .chromosome;
        let record = TrialRecord {
            fitness: refined.fitness.expect("local search sets fitness"),
            mirrors,
            shifts,
        };
        (refined, record)
    };

    let results: Vec<(Chromosome, TrialRecord)> = (0..params.trials).into_par_iter().map(run).collect();
    let mut best_trial = 0;
    for (i, (_, r)) in results.iter().enumerate() {
        if r.fitness > results[best_trial].1.fitness {
            best_trial = i;
        }
    }
    let naive_fitness = p.fitness(&asm.chromosome.genes);
    let trials = results.iter().map(|(_, r)| r.clone()).collect();
    let chromosome = results.into_iter().nth(best_trial).map(|(c, _)| c).expect("at least one trial");
    Ok(StitchOutcome {
        chromosome,
        naive_fitness,
        best_trial,
        trials,
    })
}

/// One entry of a library manifest: a fragment scenario to optimize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: FragmentKind,
    /// Path of the scenario file, relative to the manifest.
    pub scenario: String,
    /// Symmetry declaration for this fragment. Segments default to a
    /// translation search along their axis.
    #[serde(default)]
    pub symmetry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fragments: Vec<ManifestEntry>,
}

/// Optimizes one fragment with the full pipeline. For a straight segment the
/// period found by the translation search is recorded.
pub fn optimize_fragment(
    id: &str,
    kind: FragmentKind,
    scenario: Scenario,
    symmetry: Option<&str>,
    cfg: &Config,
) -> Result<Fragment> {
    let mut cfg = cfg.clone();
    let probe = Fragment::new(id, kind, scenario.clone(), Vec::new(), None)?;
    cfg.symmetry = match (symmetry, kind) {
        (Some(text), _) => Some(SymmetryDecl::parse(text)?),
        (None, FragmentKind::StraightSegment) => Some(SymmetryDecl::Translation(probe.local_axis()?)),
        (None, FragmentKind::Junction) => None,
    };
    let p = problem_for(&scenario, &cfg)?;
    let out = optimize(&p, &cfg)?;
    let period = match kind {
        FragmentKind::StraightSegment => out
            .symmetry
            .and_then(|r| r.period_m)
            .map(|m| (m / scenario.grid_len()).round() as usize),
        FragmentKind::Junction => None,
    };
    Fragment::new(id, kind, scenario, out.chromosome.genes, period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::build_problem;
    use crate::evolve::GaConfig;

    const HEADER: &str = "grid_len=1\nsensor_range=8\nsensor_fov_deg=60\n";

    fn segment(len: usize) -> Scenario {
        let mut s = String::from(HEADER);
        s.push_str(&".".repeat(len));
        s.push('\n');
        for _ in 0..2 {
            s.push_str(&"S".repeat(len));
            s.push('\n');
        }
        s.push_str(&".".repeat(len));
        s.push('\n');
        Scenario::parse(&s).unwrap()
    }

    fn lib_with(fragments: Vec<Fragment>) -> Library {
        Library { fragments }
    }

    #[test]
    fn ports_are_boundary_street_runs() {
        let s = Scenario::parse(&format!("{HEADER}.SS.S\nS...S\n.....\n")).unwrap();
        let names: Vec<String> = ports(&s).iter().map(|p| p.name.clone()).collect();
        assert_eq!(names, ["N0", "N1", "E0", "W0"]);
        let e0 = &ports(&s)[2];
        assert_eq!(e0.cells, vec![Cell::new(4, 0), Cell::new(4, 1)]);
    }

    #[test]
    fn single_identity_placement_is_the_fragment() {
        let s = segment(10);
        let g = Gene::new(2, 0, snap_to(&s, Cell::new(2, 0), 0.4).unwrap());
        let f = Fragment::new("seg", FragmentKind::StraightSegment, s.clone(), vec![g], None).unwrap();
        let layout = Layout {
            placements: vec![Placement {
                fragment: "seg".into(),
                offset: [0, 0],
                rotation: 0,
                mirror: false,
            }],
            connections: vec![],
        };
        let asm = assemble_layout(&layout, &lib_with(vec![f])).unwrap();
        assert_eq!(asm.scenario, s);
        assert_eq!(asm.chromosome.genes, vec![g]);
    }

    #[test]
    fn segments_join_end_to_end() {
        let f = Fragment::new("seg", FragmentKind::StraightSegment, segment(6), vec![], None).unwrap();
        let place = |x| Placement {
            fragment: "seg".into(),
            offset: [x, 0],
            rotation: 0,
            mirror: false,
        };
        let conn = Connection {
            a: PortRef { placement: 0, port: "E0".into() },
            b: PortRef { placement: 1, port: "W0".into() },
        };
        let layout = Layout {
            placements: vec![place(0), place(6)],
            connections: vec![conn],
        };
        let asm = assemble_layout(&layout, &lib_with(vec![f.clone()])).unwrap();
        assert_eq!(asm.scenario.n_road(), 2 * f.scenario.n_road());

        let gap = Layout {
            placements: vec![place(0), place(7)],
            connections: layout.connections.clone(),
        };
        assert!(matches!(assemble_layout(&gap, &lib_with(vec![f.clone()])), Err(Error::Layout(_))));
        let overlap = Layout {
            placements: vec![place(0), place(5)],
            connections: vec![],
        };
        let err = assemble_layout(&overlap, &lib_with(vec![f.clone()])).unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");
        let dangling = Layout {
            placements: vec![place(0), place(6)],
            connections: vec![],
        };
        let err = assemble_layout(&dangling, &lib_with(vec![f])).unwrap_err();
        assert!(err.to_string().contains("dangling"), "{err}");
    }

    #[test]
    fn rotation_turns_ports_and_genes() {
        let s = segment(6);
        let g = Gene::new(1, 0, snap_to(&s, Cell::new(1, 0), 0.5).unwrap());
        let f = Fragment::new("seg", FragmentKind::StraightSegment, s, vec![g], None).unwrap();
        let layout = Layout {
            placements: vec![Placement {
                fragment: "seg".into(),
                offset: [0, 0],
                rotation: 90,
                mirror: false,
            }],
            connections: vec![],
        };
        let asm = assemble_layout(&layout, &lib_with(vec![f])).unwrap();
        assert_eq!((asm.scenario.width(), asm.scenario.height()), (4, 6));
        assert_eq!(asm.pieces[0].axis, Some(Axis::Y));
        // (1, 0) -> (h - 1 - 0, 1) with h = 4
        let placed = asm.chromosome.genes[0];
        assert_eq!((placed.x, placed.y), (3, 1));
        let turned = g.phi + std::f64::consts::FRAC_PI_2;
        let diff = (placed.phi - turned).rem_euclid(std::f64::consts::TAU);
        assert!(diff < 1e-9 || std::f64::consts::TAU - diff < 1e-9);
        // east turns to south
        assert_eq!(asm.pieces[0].ports[0].name, "E0");
        assert_eq!(asm.pieces[0].ports[0].normal, (0, 1));
    }

    #[test]
    fn mismatched_specs_are_refused() {
        let a = Fragment::new("a", FragmentKind::StraightSegment, segment(4), vec![], None).unwrap();
        let other = Scenario::parse("grid_len=1\nsensor_range=9\nsensor_fov_deg=60\n....\nSSSS\nSSSS\n....\n").unwrap();
        let b = Fragment::new("b", FragmentKind::StraightSegment, other, vec![], None).unwrap();
        let layout = Layout {
            placements: vec![
                Placement { fragment: "a".into(), offset: [0, 0], rotation: 0, mirror: false },
                Placement { fragment: "b".into(), offset: [4, 0], rotation: 0, mirror: false },
            ],
            connections: vec![Connection {
                a: PortRef { placement: 0, port: "E0".into() },
                b: PortRef { placement: 1, port: "W0".into() },
            }],
        };
        let err = assemble_layout(&layout, &lib_with(vec![a, b])).unwrap_err();
        assert!(matches!(err, Error::SensorSpecMismatch(_)));
    }

    #[test]
    fn stitching_never_loses_to_the_plain_assembly() {
        let s = segment(12);
        let genes = vec![
            Gene::new(0, 0, snap_to(&s, Cell::new(0, 0), 0.45).unwrap()),
            Gene::new(11, 3, snap_to(&s, Cell::new(11, 3), -2.7).unwrap()),
        ];
        let f = Fragment::new("seg", FragmentKind::StraightSegment, s, genes, Some(6)).unwrap();
        let place = |x| Placement { fragment: "seg".into(), offset: [x, 0], rotation: 0, mirror: false };
        let layout = Layout {
            placements: vec![place(0), place(12)],
            connections: vec![Connection {
                a: PortRef { placement: 0, port: "E0".into() },
                b: PortRef { placement: 1, port: "W0".into() },
            }],
        };
        let asm = assemble_layout(&layout, &lib_with(vec![f])).unwrap();
        let p = build_problem(&asm.scenario, &GaConfig::default()).unwrap();
        let params = StitchParams { trials: 4, seed: 1, full_local_search: false };
        let out = stitch_optimize(&asm, &p, &layout, params).unwrap();
        assert!(out.chromosome.fitness.unwrap() >= out.naive_fitness);
        assert_eq!(out.trials.len(), 4);
        let again = stitch_optimize(&asm, &p, &layout, params).unwrap();
        assert_eq!(again.chromosome.genes, out.chromosome.genes);
        let one = stitch_optimize(&asm, &p, &layout, StitchParams { trials: 1, ..params }).unwrap();
        assert!(out.chromosome.fitness >= one.chromosome.fitness);
        assert!(out.trials.iter().all(|t| t.shifts.iter().all(|&s| s < 6)));
    }
}
