// SPDX-License-Identifier: Apache-2.0

//! Grid geometry: cells, rectilinear regions, the ownership canvas and
//! boundary extraction.
//!
//! Cell `(x, y)` covers the unit square `[x, x+1] x [y, y+1]`. Grid lines are
//! addressed by their integer coordinate, so the bottom face of cell `(x, y)`
//! lies on horizontal line `y` and its left face on vertical line `x`.
//! Connectivity is 4-neighbour everywhere.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Identifier of a real module or a blank (whitespace) module.
///
/// Blank ids live in a reserved range starting at [`ModuleId::BLANK_BASE`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModuleId(pub u32);

impl ModuleId {
    pub const BLANK_BASE: u32 = 1 << 20;

    pub fn blank(k: usize) -> Self {
        ModuleId(Self::BLANK_BASE + k as u32)
    }

    pub fn is_blank(self) -> bool {
        self.0 >= Self::BLANK_BASE
    }

    /// Index into the real-module table, or into the blank table for blanks.
    pub fn index(self) -> usize {
        if self.is_blank() {
            (self.0 - Self::BLANK_BASE) as usize
        } else {
            self.0 as usize
        }
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_blank() {
            write!(f, "B{}", self.index())
        } else {
            write!(f, "M{}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellOwner {
    Empty,
    Module(ModuleId),
    Blank(ModuleId),
}

impl CellOwner {
    pub fn id(self) -> Option<ModuleId> {
        match self {
            CellOwner::Empty => None,
            CellOwner::Module(id) | CellOwner::Blank(id) => Some(id),
        }
    }

    pub fn is_empty(self) -> bool {
        matches!(self, CellOwner::Empty)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn neighbors(self) -> [Cell; 4] {
        [
            Cell::new(self.x - 1, self.y),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x, self.y + 1),
        ]
    }
}

// Row-major: lower rows first, then left to right.
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

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    /// Point from doubled integer coordinates (half-cell lattice).
    pub fn from_doubled(x2: i64, y2: i64) -> Self {
        let two = T::lit(2.0);
        Point::new(T::lit(x2 as f64) / two, T::lit(y2 as f64) / two)
    }

    pub fn distance(self, other: Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn translate(self, dx: T, dy: T) -> Self {
        Point::new(self.x + dx, self.y + dy)
    }
}

/// Axis-aligned rectangle of cells, anchored at its bottom-left cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn x_end(&self) -> i32 {
        self.x + self.w as i32
    }

    pub fn y_end(&self) -> i32 {
        self.y + self.h as i32
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x >= self.x && c.x < self.x_end() && c.y >= self.y && c.y < self.y_end()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.y..self.y_end()).flat_map(move |y| (self.x..self.x_end()).map(move |x| Cell::new(x, y)))
    }

    /// Doubled coordinates of the rectangle center.
    pub fn center_doubled(&self) -> (i64, i64) {
        (
            2 * self.x as i64 + self.w as i64,
            2 * self.y as i64 + self.h as i64,
        )
    }
}

/// A set of grid cells, kept sorted in row-major order without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Region {
    cells: Vec<Cell>,
}

impl Region {
    pub fn new() -> Self {
        Region::default()
    }

    pub fn from_cells<I: IntoIterator<Item = Cell>>(cells: I) -> Self {
        let mut cells: Vec<Cell> = cells.into_iter().collect();
        cells.sort_unstable();
        cells.dedup();
        Region { cells }
    }

    pub fn from_rect(r: Rect) -> Self {
        // Rect::cells already yields row-major order.
        Region {
            cells: r.cells().collect(),
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.cells.binary_search(&c).is_ok()
    }

    pub fn insert(&mut self, c: Cell) -> bool {
        match self.cells.binary_search(&c) {
            Ok(_) => false,
            Err(pos) => {
                self.cells.insert(pos, c);
                true
            }
        }
    }

    pub fn remove(&mut self, c: Cell) -> bool {
        match self.cells.binary_search(&c) {
            Ok(pos) => {
                self.cells.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn extend<I: IntoIterator<Item = Cell>>(&mut self, cells: I) {
        self.cells.extend(cells);
        self.cells.sort_unstable();
        self.cells.dedup();
    }

    pub fn retain<F: FnMut(&Cell) -> bool>(&mut self, f: F) {
        self.cells.retain(f);
    }

    pub fn bbox(&self) -> Option<Rect> {
        let first = self.cells.first()?;
        let (mut x0, mut x1) = (first.x, first.x);
        let y0 = first.y;
        let y1 = self.cells.last()?.y;
        for c in &self.cells {
            x0 = x0.min(c.x);
            x1 = x1.max(c.x);
        }
        Some(Rect::new(x0, y0, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32))
    }

    pub fn is_rectangle(&self) -> bool {
        self.bbox()
            .map(|b| b.area() == self.cells.len() as u64)
            .unwrap_or(false)
    }

    pub fn translated(&self, dx: i32, dy: i32) -> Region {
        Region {
            cells: self
                .cells
                .iter()
                .map(|c| Cell::new(c.x + dx, c.y + dy))
                .collect(),
        }
    }

    /// Area centroid: the mean of the cell centers.
    pub fn center<T: Scalar>(&self) -> Result<Point<T>> {
        region_center(self)
    }

    /// True when the cells form a single 4-connected component.
    pub fn is_connected(&self) -> bool {
        let Some(bb) = self.bbox() else {
            return false;
        };
        let mask = BoxMask::new(bb, &self.cells);
        let mut seen = vec![false; mask.bits.len()];
        let mut queue = VecDeque::from([self.cells[0]]);
        seen[mask.idx(self.cells[0])] = true;
        let mut count = 1usize;
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors() {
                if mask.get(n) {
                    let i = mask.idx(n);
                    if !seen[i] {
                        seen[i] = true;
                        count += 1;
                        queue.push_back(n);
                    }
                }
            }
        }
        count == self.cells.len()
    }
}

/// Bitmap of a cell set over its bounding box.
struct BoxMask {
    bb: Rect,
    bits: Vec<bool>,
}

impl BoxMask {
    fn new(bb: Rect, cells: &[Cell]) -> Self {
        let mut m = BoxMask {
            bb,
            bits: vec![false; bb.area() as usize],
        };
        for &c in cells {
            let i = m.idx(c);
            m.bits[i] = true;
        }
        m
    }

    fn idx(&self, c: Cell) -> usize {
        ((c.y - self.bb.y) as usize) * self.bb.w as usize + (c.x - self.bb.x) as usize
    }

    fn get(&self, c: Cell) -> bool {
        self.bb.contains(c) && self.bits[self.idx(c)]
    }
}

pub fn region_center<T: Scalar>(region: &Region) -> Result<Point<T>> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    // Integer sums of doubled cell centers, then a single division.
    let (sx, sy) = region.cells.iter().fold((0i64, 0i64), |(sx, sy), c| {
        (sx + 2 * c.x as i64 + 1, sy + 2 * c.y as i64 + 1)
    });
    let n2 = T::lit(2.0 * region.area() as f64);
    Ok(Point::new(T::lit(sx as f64) / n2, T::lit(sy as f64) / n2))
}

const EMPTY: u32 = u32::MAX;

/// Cell-ownership matrix of the chip canvas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridCanvas {
    width: u32,
    height: u32,
    owner: Vec<u32>,
}

impl GridCanvas {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::BadCanvas { width, height });
        }
        Ok(GridCanvas {
            width,
            height,
            owner: vec![EMPTY; width as usize * height as usize],
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.owner.len()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as u32) < self.width && (c.y as u32) < self.height
    }

    pub fn rect_in_bounds(&self, r: Rect) -> bool {
        r.x >= 0
            && r.y >= 0
            && r.x_end() as i64 <= self.width as i64
            && r.y_end() as i64 <= self.height as i64
    }

    fn idx(&self, c: Cell) -> usize {
        c.y as usize * self.width as usize + c.x as usize
    }

    /// Owner of `c`, or `None` outside the canvas.
    pub fn get(&self, c: Cell) -> Option<CellOwner> {
        self.in_bounds(c).then(|| decode(self.owner[self.idx(c)]))
    }

    /// Raw owner id of `c` (`None` for empty or out of bounds).
    pub fn id_at(&self, c: Cell) -> Option<ModuleId> {
        if !self.in_bounds(c) {
            return None;
        }
        let v = self.owner[self.idx(c)];
        (v != EMPTY).then_some(ModuleId(v))
    }

    pub fn set(&mut self, c: Cell, owner: CellOwner) {
        let i = self.idx(c);
        self.owner[i] = match owner {
            CellOwner::Empty => EMPTY,
            CellOwner::Module(id) | CellOwner::Blank(id) => id.0,
        };
    }

    pub fn assign(&mut self, region: &Region, owner: CellOwner) {
        for &c in region.cells() {
            self.set(c, owner);
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell, CellOwner)> + '_ {
        let w = self.width as usize;
        self.owner.iter().enumerate().map(move |(i, &v)| {
            (Cell::new((i % w) as i32, (i / w) as i32), decode(v))
        })
    }

    pub fn count_empty(&self) -> usize {
        self.owner.iter().filter(|&&v| v == EMPTY).count()
    }

    /// Cells owned by `id`, in row-major order.
    pub fn region_of(&self, id: ModuleId) -> Region {
        Region {
            cells: self
                .cells()
                .filter(|(_, o)| o.id() == Some(id))
                .map(|(c, _)| c)
                .collect(),
        }
    }

    pub fn to_owner_for(&self, id: ModuleId) -> CellOwner {
        owner_for(id)
    }
}

pub fn owner_for(id: ModuleId) -> CellOwner {
    if id.is_blank() {
        CellOwner::Blank(id)
    } else {
        CellOwner::Module(id)
    }
}

fn decode(v: u32) -> CellOwner {
    if v == EMPTY {
        CellOwner::Empty
    } else {
        owner_for(ModuleId(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Which side of a grid line the owning module lies on: `Low` is below a
/// horizontal line or left of a vertical one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Neighbor {
    Border,
    Empty,
    Module(ModuleId),
    Blank(ModuleId),
}

impl Neighbor {
    fn from_owner(o: Option<CellOwner>) -> Self {
        match o {
            None => Neighbor::Border,
            Some(CellOwner::Empty) => Neighbor::Empty,
            Some(CellOwner::Module(id)) => Neighbor::Module(id),
            Some(CellOwner::Blank(id)) => Neighbor::Blank(id),
        }
    }

    pub fn id(self) -> Option<ModuleId> {
        match self {
            Neighbor::Module(id) | Neighbor::Blank(id) => Some(id),
            _ => None,
        }
    }
}

/// A maximal straight piece of a module outline facing a single neighbour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundarySegment {
    pub module: ModuleId,
    pub neighbor: Neighbor,
    pub axis: Axis,
    /// Coordinate of the grid line the segment lies on.
    pub line: i32,
    /// First cell coordinate covered along the line.
    pub start: i32,
    pub length: u32,
    pub side: Side,
}

impl BoundarySegment {
    pub fn end(&self) -> i32 {
        self.start + self.length as i32
    }
}

/// Unit face of a cell: `(axis, line, side, pos)`.
type Face = (Axis, i32, Side, i32);

fn cell_faces(c: Cell) -> [(Cell, Face); 4] {
    [
        (Cell::new(c.x, c.y - 1), (Axis::Horizontal, c.y, Side::High, c.x)),
        (Cell::new(c.x, c.y + 1), (Axis::Horizontal, c.y + 1, Side::Low, c.x)),
        (Cell::new(c.x - 1, c.y), (Axis::Vertical, c.x, Side::High, c.y)),
        (Cell::new(c.x + 1, c.y), (Axis::Vertical, c.x + 1, Side::Low, c.y)),
    ]
}

/// Merges sorted keyed unit positions into maximal runs `(key, start, len)`.
fn merge_runs<K: Ord + Copy>(mut units: Vec<(K, i32)>) -> Vec<(K, i32, u32)> {
    units.sort_unstable();
    let mut out: Vec<(K, i32, u32)> = Vec::new();
    for (k, p) in units {
        match out.last_mut() {
            Some((lk, s, len)) if *lk == k && *s + *len as i32 == p => *len += 1,
            _ => out.push((k, p, 1)),
        }
    }
    out
}

/// Outline segments of module `id` labelled with the owner across each one.
pub fn boundary_segments(canvas: &GridCanvas, id: ModuleId) -> Result<Vec<BoundarySegment>> {
    let region = canvas.region_of(id);
    if region.is_empty() {
        return Err(Error::Unplaced(id));
    }
    Ok(boundary_segments_of(canvas, &region, id))
}

/// Like [`boundary_segments`] for a region already extracted from `canvas`.
pub fn boundary_segments_of(
    canvas: &GridCanvas,
    region: &Region,
    id: ModuleId,
) -> Vec<BoundarySegment> {
    let mut units = Vec::new();
    for &c in region.cells() {
        for (n, (axis, line, side, pos)) in cell_faces(c) {
            if region.contains(n) {
                continue;
            }
            let neighbor = Neighbor::from_owner(canvas.get(n));
            units.push(((axis, line, side, neighbor), pos));
        }
    }
    merge_runs(units)
        .into_iter()
        .map(|((axis, line, side, neighbor), start, length)| BoundarySegment {
            module: id,
            neighbor,
            axis,
            line,
            start,
            length,
            side,
        })
        .collect()
}

/// Maximal straight outline edges of a region regardless of neighbours.
pub fn outline_segments(region: &Region) -> Vec<(Axis, i32, Side, i32, u32)> {
    let Some(bb) = region.bbox() else {
        return Vec::new();
    };
    let mask = BoxMask::new(bb, region.cells());
    let mut units: Vec<((Axis, i32, Side), i32)> = Vec::new();
    for &c in region.cells() {
        for (n, (axis, line, side, pos)) in cell_faces(c) {
            if !mask.get(n) {
                units.push(((axis, line, side), pos));
            }
        }
    }
    merge_runs(units)
        .into_iter()
        .map(|((a, l, s), start, len)| (a, l, s, start, len))
        .collect()
}

pub fn outline_segment_count(region: &Region) -> usize {
    outline_segments(region).len()
}

/// Total shared boundary length between modules `i` and `j`.
pub fn adjacency_length(canvas: &GridCanvas, i: ModuleId, j: ModuleId) -> u32 {
    if i == j {
        return 0;
    }
    let region = canvas.region_of(i);
    adjacency_length_of(canvas, &region, j)
}

pub fn adjacency_length_of(canvas: &GridCanvas, region_i: &Region, j: ModuleId) -> u32 {
    region_i
        .cells()
        .iter()
        .flat_map(|c| c.neighbors())
        .filter(|&n| canvas.id_at(n) == Some(j) && !region_i.contains(n))
        .count() as u32
}

/// 4-connected components of cells whose owner matches `pred`, ordered by
/// their first cell in row-major order.
pub fn connected_components<F>(canvas: &GridCanvas, pred: F) -> Vec<Region>
where
    F: Fn(CellOwner) -> bool,
{
    let w = canvas.width as usize;
    let mut seen = vec![false; canvas.owner.len()];
    let mut out = Vec::new();
    for start in 0..canvas.owner.len() {
        if seen[start] || !pred(decode(canvas.owner[start])) {
            continue;
        }
        seen[start] = true;
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let c = Cell::new((i % w) as i32, (i / w) as i32);
            cells.push(c);
            for n in c.neighbors() {
                if canvas.in_bounds(n) {
                    let j = canvas.idx(n);
                    if !seen[j] && pred(decode(canvas.owner[j])) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out.push(Region::from_cells(cells));
    }
    out
}

/// A maximal straight run of grid line shared by two distinct owners.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SharedSegment {
    /// Owner on the low side of the line.
    pub low: ModuleId,
    /// Owner on the high side of the line.
    pub high: ModuleId,
    pub axis: Axis,
    pub line: i32,
    pub start: i32,
    pub length: u32,
}

impl SharedSegment {
    /// The pair in ascending id order.
    pub fn pair(&self) -> (ModuleId, ModuleId) {
        if self.low < self.high {
            (self.low, self.high)
        } else {
            (self.high, self.low)
        }
    }
}

/// Every maximal segment of grid line separating two different owners,
/// found in a single scan of the canvas. Empty cells never share edges.
pub fn shared_segments(canvas: &GridCanvas) -> Vec<SharedSegment> {
    let (w, h) = (canvas.width as i32, canvas.height as i32);
    let at = |x: i32, y: i32| canvas.owner[y as usize * w as usize + x as usize];
    let mut out: Vec<SharedSegment> = Vec::new();
    let push = |out: &mut Vec<SharedSegment>, low: u32, high: u32, axis, line, pos| {
        if low == high || low == EMPTY || high == EMPTY {
            return;
        }
        let (low, high) = (ModuleId(low), ModuleId(high));
        if let Some(last) = out.last_mut() {
            if last.low == low
                && last.high == high
                && last.axis == axis
                && last.line == line
                && last.start + last.length as i32 == pos
            {
                last.length += 1;
                return;
            }
        }
        out.push(SharedSegment {
            low,
            high,
            axis,
            line,
            start: pos,
            length: 1,
        });
    };
    for y in 1..h {
        for x in 0..w {
            push(&mut out, at(x, y - 1), at(x, y), Axis::Horizontal, y, x);
        }
    }
    for x in 1..w {
        for y in 0..h {
            push(&mut out, at(x - 1, y), at(x, y), Axis::Vertical, x, y);
        }
    }
    out
}
