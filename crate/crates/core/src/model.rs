// SPDX-License-Identifier: Apache-2.0

//! Problem and floorplan state types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{owner_for, CellOwner, GridCanvas, ModuleId, Point, Region};
use crate::netlist::decompose_nets;
use crate::Scalar;

/// Block shape as given by a benchmark, in benchmark units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BlockShape {
    Soft { area: f64, aspect_min: f64, aspect_max: f64 },
    Hard { width: f64, height: f64 },
}

impl BlockShape {
    pub fn area(&self) -> f64 {
        match *self {
            BlockShape::Soft { area, .. } => area,
            BlockShape::Hard { width, height } => width * height,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub shape: BlockShape,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Terminal {
    pub name: String,
    /// Fixed position in benchmark units, when a placement file gave one.
    pub position: Option<(f64, f64)>,
}

/// One endpoint of a net.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PinRef {
    Module(ModuleId),
    Terminal(u32),
}

impl PinRef {
    pub fn module(self) -> Option<ModuleId> {
        match self {
            PinRef::Module(id) => Some(id),
            PinRef::Terminal(_) => None,
        }
    }
}

/// A multi-pin net. The driver is the signal source; every sink becomes one
/// two-pin child after reorganization.
#[derive(Clone, Debug, PartialEq)]
pub struct NetRecord {
    pub id: usize,
    pub driver: PinRef,
    pub sinks: Vec<PinRef>,
    pub children: Vec<TwoPinNet>,
}

impl NetRecord {
    pub fn new(id: usize, driver: PinRef, sinks: Vec<PinRef>) -> Self {
        NetRecord {
            id,
            driver,
            sinks,
            children: Vec::new(),
        }
    }

    pub fn pin_count(&self) -> usize {
        1 + self.sinks.len()
    }

    pub fn pins(&self) -> impl Iterator<Item = PinRef> + '_ {
        std::iter::once(self.driver).chain(self.sinks.iter().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TwoPinNet {
    pub id: usize,
    pub parent_net: usize,
    pub src: PinRef,
    pub dst: PinRef,
}

impl TwoPinNet {
    /// Both endpoints as modules, when neither is a chip terminal.
    pub fn modules(&self) -> Option<(ModuleId, ModuleId)> {
        Some((self.src.module()?, self.dst.module()?))
    }
}

/// Parsed benchmark: blocks, terminals and nets in benchmark units.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub blocks: Vec<BlockSpec>,
    pub terminals: Vec<Terminal>,
    pub nets: Vec<NetRecord>,
    /// Block positions from a placement file (lower-left corners).
    pub block_positions: Vec<Option<(f64, f64)>>,
}

impl ProblemInstance {
    pub fn module_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModuleKind {
    Soft { aspect_min: f64, aspect_max: f64 },
    Hard { width: u32, height: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModuleRecord {
    pub id: ModuleId,
    pub name: String,
    /// Predefined area in cells.
    pub predefined_area: u64,
    pub kind: ModuleKind,
    pub preplaced: bool,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlankRecord {
    pub id: ModuleId,
    pub region: Region,
}

/// Default fraction of the canvas covered by module area after scaling.
pub const DEFAULT_UTILIZATION: f64 = 0.8;

/// A floorplan on the cell grid together with its netlist.
#[derive(Clone, Debug, PartialEq)]
pub struct FloorplanState {
    pub name: String,
    pub canvas: GridCanvas,
    pub modules: Vec<ModuleRecord>,
    pub blanks: Vec<BlankRecord>,
    pub nets: Vec<NetRecord>,
    pub two_pin: Vec<TwoPinNet>,
    pub terminals: Vec<Terminal>,
    /// Terminal positions on the doubled (half-cell) lattice.
    pub terminal_points: Vec<Option<(i64, i64)>>,
    /// Benchmark units per cell edge.
    pub scale: f64,
    /// Set when module regions overlap or leave the canvas.
    pub needs_legalization: bool,
}

impl FloorplanState {
    /// Scales a benchmark onto a `width x height` grid so that total module
    /// area covers `utilization` of the canvas. Modules start unplaced.
    pub fn from_problem(
        problem: &ProblemInstance,
        width: u32,
        height: u32,
        utilization: f64,
    ) -> Result<Self> {
        let canvas = GridCanvas::new(width, height)?;
        if !(utilization > 0.0 && utilization <= 1.0) {
            return Err(Error::Config(format!("utilization {utilization} outside (0, 1]")));
        }
        let total: f64 = problem.blocks.iter().map(|b| b.shape.area()).sum();
        let cells = width as f64 * height as f64;
        let scale = if total > 0.0 {
            (total / (utilization * cells)).sqrt()
        } else {
            1.0
        };
        Self::with_scale(problem, canvas, scale)
    }

    /// Builds a state using an explicit benchmark-units-per-cell scale.
    pub fn with_scale(problem: &ProblemInstance, canvas: GridCanvas, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("scale {scale} must be positive")));
        }
        let modules = problem
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let (kind, area) = match b.shape {
                    BlockShape::Soft {
                        area,
                        aspect_min,
                        aspect_max,
                    } => (
                        ModuleKind::Soft {
                            aspect_min,
                            aspect_max,
                        },
                        ((area / (scale * scale)).round() as u64).max(1),
                    ),
                    BlockShape::Hard { width, height } => {
                        let w = ((width / scale).round() as u32).max(1);
                        let h = ((height / scale).round() as u32).max(1);
                        (ModuleKind::Hard { width: w, height: h }, w as u64 * h as u64)
                    }
                };
                ModuleRecord {
                    id: ModuleId(i as u32),
                    name: b.name.clone(),
                    predefined_area: area,
                    kind,
                    preplaced: false,
                    region: Region::new(),
                }
            })
            .collect();
        let (w2, h2) = (2 * canvas.width() as i64, 2 * canvas.height() as i64);
        let terminal_points = problem
            .terminals
            .iter()
            .map(|t| {
                t.position.map(|(x, y)| {
                    let x2 = ((2.0 * x / scale).round() as i64).clamp(0, w2);
                    let y2 = ((2.0 * y / scale).round() as i64).clamp(0, h2);
                    (x2, y2)
                })
            })
            .collect();
        let mut nets = problem.nets.clone();
        let two_pin = decompose_nets(&nets).nets;
        for n in &mut nets {
            n.children = two_pin.iter().filter(|c| c.parent_net == n.id).copied().collect();
        }
        Ok(FloorplanState {
            name: problem.name.clone(),
            canvas,
            modules,
            blanks: Vec::new(),
            nets,
            two_pin,
            terminals: problem.terminals.clone(),
            terminal_points,
            scale,
            needs_legalization: false,
        })
    }

    pub fn width(&self) -> u32 {
        self.canvas.width()
    }

    pub fn height(&self) -> u32 {
        self.canvas.height()
    }

    pub fn module(&self, id: ModuleId) -> &ModuleRecord {
        &self.modules[id.index()]
    }

    pub fn module_by_name(&self, name: &str) -> Option<&ModuleRecord> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Region of a real or blank module.
    pub fn region(&self, id: ModuleId) -> &Region {
        if id.is_blank() {
            &self.blanks[id.index()].region
        } else {
            &self.modules[id.index()].region
        }
    }

    /// Replaces the region of `id`, keeping the canvas in sync. Cells of the
    /// old region still owned by `id` are released; new cells are claimed
    /// unconditionally.
    pub fn set_region(&mut self, id: ModuleId, region: Region) {
        let old = std::mem::take(if id.is_blank() {
            &mut self.blanks[id.index()].region
        } else {
            &mut self.modules[id.index()].region
        });
        for &c in old.cells() {
            if self.canvas.id_at(c) == Some(id) {
                self.canvas.set(c, CellOwner::Empty);
            }
        }
        self.canvas.assign(&region, owner_for(id));
        if id.is_blank() {
            self.blanks[id.index()].region = region;
        } else {
            self.modules[id.index()].region = region;
        }
    }

    /// All module ids in graph order: real modules, then blanks.
    pub fn node_ids(&self) -> Vec<ModuleId> {
        self.modules
            .iter()
            .map(|m| m.id)
            .chain(self.blanks.iter().map(|b| b.id))
            .collect()
    }

    pub fn node_index(&self, id: ModuleId) -> usize {
        if id.is_blank() {
            self.modules.len() + id.index()
        } else {
            id.index()
        }
    }

    /// Centroid of every real module (`None` while unplaced).
    pub fn module_centers<T: Scalar>(&self) -> Vec<Option<Point<T>>> {
        self.modules.iter().map(|m| m.region.center().ok()).collect()
    }

    pub fn terminal_point<T: Scalar>(&self, t: u32) -> Option<Point<T>> {
        self.terminal_points[t as usize].map(|(x2, y2)| Point::from_doubled(x2, y2))
    }

    /// Rebuilds canvas ownership from module regions. Returns `true` when
    /// some cell is claimed twice or a region leaves the canvas.
    pub fn rebuild_canvas(&mut self) -> bool {
        let mut canvas = GridCanvas::new(self.width(), self.height()).expect("valid dims");
        let mut conflict = false;
        for m in &self.modules {
            for &c in m.region.cells() {
                match canvas.get(c) {
                    None => conflict = true,
                    Some(CellOwner::Empty) => canvas.set(c, CellOwner::Module(m.id)),
                    Some(_) => conflict = true,
                }
            }
        }
        for b in &self.blanks {
            for &c in b.region.cells() {
                if canvas.get(c) == Some(CellOwner::Empty) {
                    canvas.set(c, CellOwner::Blank(b.id));
                } else {
                    conflict = true;
                }
            }
        }
        self.canvas = canvas;
        self.needs_legalization = conflict;
        conflict
    }

    /// Every module placed, inside the canvas, and no cell shared.
    pub fn is_legal(&self) -> bool {
        let mut owned = 0usize;
        for m in &self.modules {
            if m.region.is_empty() {
                return false;
            }
            for &c in m.region.cells() {
                if self.canvas.id_at(c) != Some(m.id) {
                    return false;
                }
            }
            owned += m.region.area();
        }
        for b in &self.blanks {
            owned += b.region.area();
        }
        owned + self.canvas.count_empty() == self.canvas.cell_count()
    }

    /// Fraction of canvas cells not owned by a real module.
    pub fn whitespace_ratio(&self) -> f64 {
        let used: usize = self.modules.iter().map(|m| m.region.area()).sum();
        1.0 - used as f64 / self.canvas.cell_count() as f64
    }

    /// Dissolves blank modules back into empty cells.
    pub fn clear_blanks(&mut self) {
        for b in std::mem::take(&mut self.blanks) {
            for &c in b.region.cells() {
                if self.canvas.id_at(c) == Some(b.id) {
                    self.canvas.set(c, CellOwner::Empty);
                }
            }
        }
    }

    /// Two-pin nets incident to module `id` (by index into `two_pin`).
    pub fn incident_two_pin(&self, id: ModuleId) -> impl Iterator<Item = &TwoPinNet> + '_ {
        self.two_pin
            .iter()
            .filter(move |n| n.src == PinRef::Module(id) || n.dst == PinRef::Module(id))
    }
}
