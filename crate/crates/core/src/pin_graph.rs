// SPDX-License-Identifier: Apache-2.0

//! Pin assignment over the module adjacency graph.
//!
//! Every pair of modules sharing boundary gets an edge whose capacity is the
//! number of pin slots that fit on the shared segments at pitch `u`. Nets
//! between adjacent modules take a slot directly; the rest are routed with
//! A* over module centers and placed on concrete slots with a beam search.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{shared_segments, Axis, ModuleId, Point};
use crate::legalizer::module_footprint;
use crate::model::FloorplanState;
use crate::Scalar;

/// Result of the pin pitch computation, with the means it was derived from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinSpace {
    pub u: u32,
    pub mean_perimeter: f64,
    pub mean_nets: f64,
}

/// `u = max(1, round(mean footprint perimeter / mean incident two-pin nets))`.
pub fn pin_space(state: &FloorplanState) -> Result<PinSpace> {
    let n = state.modules.len();
    if n == 0 {
        return Ok(PinSpace {
            u: 1,
            mean_perimeter: 0.0,
            mean_nets: 0.0,
        });
    }
    let mut perimeter = 0.0;
    for m in &state.modules {
        let (w, h) = module_footprint(m)?;
        perimeter += 2.0 * (w as f64 + h as f64);
    }
    let mut incident = 0usize;
    for net in &state.two_pin {
        incident += net.src.module().is_some() as usize + net.dst.module().is_some() as usize;
    }
    let mean_perimeter = perimeter / n as f64;
    let mean_nets = incident as f64 / n as f64;
    if incident == 0 {
        warn!("no module nets; pin pitch defaults to 1");
        return Ok(PinSpace {
            u: 1,
            mean_perimeter,
            mean_nets,
        });
    }
    let u = ((mean_perimeter / mean_nets).round() as u32).max(1);
    debug!("pin pitch {u}: mean perimeter {mean_perimeter:.4}, mean nets {mean_nets:.4}");
    Ok(PinSpace {
        u,
        mean_perimeter,
        mean_nets,
    })
}

/// A pin position on the boundary between `a` and `b`, on the half-cell
/// lattice (coordinates doubled).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PinSite {
    pub a: ModuleId,
    pub b: ModuleId,
    pub x2: i64,
    pub y2: i64,
}

impl PinSite {
    pub fn point<T: Scalar>(&self) -> Point<T> {
        Point::from_doubled(self.x2, self.y2)
    }
}

/// One straight shared segment of an edge and the range of slots on it.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSegment {
    pub axis: Axis,
    pub line: i32,
    pub start: i32,
    pub length: u32,
    pub slots: std::ops::Range<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeState<T> {
    /// Endpoints in node order (`a` before `b`).
    pub a: ModuleId,
    pub b: ModuleId,
    pub segments: Vec<EdgeSegment>,
    /// Slot positions, doubled coordinates.
    pub slots: Vec<(i64, i64)>,
    pub used: Vec<bool>,
    pub capacity: usize,
    pub initial: usize,
    /// Total shared boundary length.
    pub length: u32,
    /// Euclidean distance between the endpoint centers.
    pub distance: T,
}

impl<T> EdgeState<T> {
    fn site(&self, slot: usize) -> PinSite {
        let (x2, y2) = self.slots[slot];
        PinSite {
            a: self.a,
            b: self.b,
            x2,
            y2,
        }
    }

    fn take(&mut self, slot: usize) -> PinSite {
        debug_assert!(!self.used[slot]);
        self.used[slot] = true;
        self.capacity -= 1;
        self.site(slot)
    }

    fn free_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.slots.len()).filter(|&s| !self.used[s])
    }
}

/// Node numbering shared by the resource and mask graphs: real modules
/// first, then blanks.
#[derive(Clone, Debug, PartialEq)]
struct NodeIndex {
    nodes: Vec<ModuleId>,
    n_real: usize,
}

impl NodeIndex {
    fn of(&self, id: ModuleId) -> Option<usize> {
        let i = if id.is_blank() {
            self.n_real + id.index()
        } else {
            let i = id.index();
            if i >= self.n_real {
                return None;
            }
            i
        };
        (self.nodes.get(i) == Some(&id)).then_some(i)
    }

    fn require(&self, id: ModuleId) -> Result<usize> {
        self.of(id).ok_or(Error::UnknownNode(id))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResourceGraph<T> {
    pub u: u32,
    index: NodeIndex,
    pub centers: Vec<Point<T>>,
    pub edges: Vec<EdgeState<T>>,
    /// Per node: `(neighbour node, edge index)`, ascending by neighbour.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl<T: Scalar> ResourceGraph<T> {
    pub fn nodes(&self) -> &[ModuleId] {
        &self.index.nodes
    }

    pub fn node_index(&self, id: ModuleId) -> Option<usize> {
        self.index.of(id)
    }

    pub fn edge_index(&self, a: ModuleId, b: ModuleId) -> Option<usize> {
        let (i, j) = (self.index.of(a)?, self.index.of(b)?);
        self.adjacency[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .ok()
            .map(|k| self.adjacency[i][k].1)
    }

    pub fn edge(&self, a: ModuleId, b: ModuleId) -> Option<&EdgeState<T>> {
        self.edge_index(a, b).map(|e| &self.edges[e])
    }

    /// Remaining slots between `a` and `b` (0 when not adjacent).
    pub fn capacity(&self, a: ModuleId, b: ModuleId) -> usize {
        self.edge(a, b).map_or(0, |e| e.capacity)
    }

    pub fn center(&self, id: ModuleId) -> Option<Point<T>> {
        self.index.of(id).map(|i| self.centers[i])
    }
}

/// Builds the slot graph of a legal state at pin pitch `u`. Each shared
/// segment of length `L` holds `floor(L / u)` slots at the midpoints of
/// consecutive `u`-intervals starting from its low end.
pub fn build_resource_graph<T: Scalar>(state: &FloorplanState, u: u32) -> Result<ResourceGraph<T>> {
    if u == 0 {
        return Err(Error::Config("pin pitch must be at least 1".into()));
    }
    let nodes = state.node_ids();
    let index = NodeIndex {
        n_real: state.modules.len(),
        nodes,
    };
    let mut centers = Vec::with_capacity(index.nodes.len());
    for &id in &index.nodes {
        centers.push(state.region(id).center::<T>().map_err(|_| Error::Unplaced(id))?);
    }
    let mut pairs: BTreeMap<(usize, usize), Vec<_>> = BTreeMap::new();
    for seg in shared_segments(&state.canvas) {
        let (Some(i), Some(j)) = (index.of(seg.low), index.of(seg.high)) else {
            continue;
        };
        pairs.entry((i.min(j), i.max(j))).or_default().push(seg);
    }
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); index.nodes.len()];
    let u2 = u as i64;
    for ((i, j), mut segs) in pairs {
        segs.sort_by_key(|s| (s.axis, s.line, s.start));
        let mut segments = Vec::with_capacity(segs.len());
        let mut slots = Vec::new();
        let mut length = 0;
        for s in &segs {
            length += s.length;
            let first = slots.len();
            for k in 0..(s.length / u) as i64 {
                let along = 2 * s.start as i64 + u2 * (2 * k + 1);
                let across = 2 * s.line as i64;
                slots.push(match s.axis {
                    Axis::Horizontal => (along, across),
                    Axis::Vertical => (across, along),
                });
            }
            segments.push(EdgeSegment {
                axis: s.axis,
                line: s.line,
                start: s.start,
                length: s.length,
                slots: first..slots.len(),
            });
        }
        if slots.is_empty() {
            continue;
        }
        let e = edges.len();
        adjacency[i].push((j, e));
        adjacency[j].push((i, e));
        edges.push(EdgeState {
            a: index.nodes[i],
            b: index.nodes[j],
            segments,
            used: vec![false; slots.len()],
            capacity: slots.len(),
            initial: slots.len(),
            slots,
            length,
            distance: centers[i].distance(centers[j]),
        });
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(ResourceGraph {
        u,
        index,
        centers,
        edges,
        adjacency,
    })
}

/// Edges with free capacity, weighted by center distance.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskGraph<T> {
    index: NodeIndex,
    pub centers: Vec<Point<T>>,
    /// Per node: `(neighbour node, weight)`, ascending by neighbour.
    pub adjacency: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> MaskGraph<T> {
    /// Graph over nodes `ModuleId(0..)` at the given centers; every listed
    /// pair is connected with its Euclidean center distance.
    pub fn from_edges(centers: Vec<Point<T>>, edges: &[(usize, usize)]) -> Self {
        let n = centers.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in edges {
            let w = centers[i].distance(centers[j]);
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(n, _)| n);
            list.dedup_by_key(|&mut (n, _)| n);
        }
        MaskGraph {
            index: NodeIndex {
                nodes: (0..n as u32).map(ModuleId).collect(),
                n_real: n,
            },
            centers,
            adjacency,
        }
    }

    pub fn weight(&self, a: ModuleId, b: ModuleId) -> Option<T> {
        let (i, j) = (self.index.of(a)?, self.index.of(b)?);
        self.adjacency[i].iter().find(|&&(n, _)| n == j).map(|&(_, w)| w)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

pub fn build_mask_graph<T: Scalar>(g: &ResourceGraph<T>) -> MaskGraph<T> {
    let adjacency = g
        .adjacency
        .iter()
        .map(|list| {
            list.iter()
                .filter(|&&(_, e)| g.edges[e].capacity > 0)
                .map(|&(n, e)| (n, g.edges[e].distance))
                .collect()
        })
        .collect();
    MaskGraph {
        index: g.index.clone(),
        centers: g.centers.clone(),
        adjacency,
    }
}

#[derive(Clone, Copy, Debug)]
struct Open<T> {
    f: T,
    g: T,
    hops: usize,
    node: usize,
}

impl<T: Scalar> PartialEq for Open<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Open<T> {}
impl<T: Scalar> PartialOrd for Open<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Scalar> Ord for Open<T> {
    // Reversed so that `BinaryHeap` pops the smallest key.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.partial_cmp(&self.f)
            .unwrap_or(Ordering::Equal)
            .then(o.hops.cmp(&self.hops))
            .then(o.node.cmp(&self.node))
    }
}

/// `(cost, hops, predecessor)` labels compared lexicographically.
fn better<T: Scalar>(a: (T, usize, usize), b: (T, usize, usize)) -> bool {
    match a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => (a.1, a.2) < (b.1, b.2),
    }
}

/// Shortest module path from `src` to `dst` by summed center distance,
/// guided by the straight-line distance to `dst`. Equal-cost paths prefer
/// fewer hops, then smaller predecessor ids.
pub fn astar_path<T: Scalar>(mask: &MaskGraph<T>, src: ModuleId, dst: ModuleId) -> Result<Option<Vec<ModuleId>>> {
    let s = mask.index.require(src)?;
    let t = mask.index.require(dst)?;
    if s == t {
        return Ok(Some(vec![src]));
    }
    // Shrink the heuristic slightly so rounding never makes it inadmissible.
    let shrink = T::one() - T::epsilon() * T::lit(16.0);
    let target = mask.centers[t];
    let h = |i: usize| mask.centers[i].distance(target) * shrink;
    let n = mask.centers.len();
    let mut label: Vec<Option<(T, usize, usize)>> = vec![None; n];
    label[s] = Some((T::zero(), 0, usize::MAX));
    let mut open = BinaryHeap::new();
    open.push(Open {
        f: h(s),
        g: T::zero(),
        hops: 0,
        node: s,
    });
    while let Some(cur) = open.pop() {
        let Some((g, hops, _)) = label[cur.node] else { continue };
        if g != cur.g || hops != cur.hops {
            continue;
        }
        if cur.node == t {
            let mut path = vec![mask.index.nodes[t]];
            let mut at = t;
            while let Some((_, _, p)) = label[at] {
                if p == usize::MAX {
                    break;
                }
                path.push(mask.index.nodes[p]);
                at = p;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for &(nb, w) in &mask.adjacency[cur.node] {
            let cand = (g + w, hops + 1, cur.node);
            if label[nb].is_none_or(|old| better(cand, old)) {
                let stale = label[nb].is_some_and(|old| old.0 == cand.0 && old.1 == cand.1);
                label[nb] = Some(cand);
                if !stale {
                    open.push(Open {
                        f: cand.0 + h(nb),
                        g: cand.0,
                        hops: cand.1,
                        node: nb,
                    });
                }
            }
        }
    }
    Ok(None)
}

/// Picks one free slot per consecutive pair of `path` so that the polyline
/// from the first module's center through the slots to the last module's
/// center is as short as a width-`k` beam can find. The chosen slots are
/// consumed.
pub fn beam_assign<T: Scalar>(g: &mut ResourceGraph<T>, path: &[ModuleId], k: usize) -> Result<Vec<PinSite>> {
    if k == 0 {
        return Err(Error::Config("beam width must be at least 1".into()));
    }
    if path.len() < 2 {
        return Err(Error::Config("path needs at least two modules".into()));
    }
    let mut edges = Vec::with_capacity(path.len() - 1);
    for w in path.windows(2) {
        match g.edge_index(w[0], w[1]) {
            Some(e) if g.edges[e].capacity > 0 => edges.push(e),
            _ => return Err(Error::StalePath(w[0], w[1])),
        }
    }
    let start = g.center(path[0]).ok_or(Error::UnknownNode(path[0]))?;
    let end = g.center(path[path.len() - 1]).ok_or(Error::UnknownNode(path[path.len() - 1]))?;
    let order = |a: &(T, Point<T>, Vec<usize>), b: &(T, Point<T>, Vec<usize>)| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then_with(|| a.2.cmp(&b.2))
    };
    let mut beam: Vec<(T, Point<T>, Vec<usize>)> = vec![(T::zero(), start, Vec::new())];
    for &e in &edges {
        let edge = &g.edges[e];
        let mut next = Vec::with_capacity(beam.len() * edge.capacity);
        for (cost, last, picks) in &beam {
            for slot in edge.free_slots() {
                let p = edge.site(slot).point::<T>();
                let mut ext = picks.clone();
                ext.push(slot);
                next.push((*cost + last.distance(p), p, ext));
            }
        }
        next.sort_by(order);
        next.truncate(k);
        beam = next;
    }
    let best = beam
        .into_iter()
        .map(|(c, last, picks)| (c + last.distance(end), last, picks))
        .min_by(order)
        .expect("non-empty beam");
    Ok(edges.iter().zip(best.2).map(|(&e, slot)| g.edges[e].take(slot)).collect())
}

/// Consumes the free slot closest to the middle of its shared segment
/// (lowest slot index on ties).
pub fn assign_direct<T: Scalar>(g: &mut ResourceGraph<T>, a: ModuleId, b: ModuleId) -> Result<PinSite> {
    let e = match g.edge_index(a, b) {
        Some(e) if g.edges[e].capacity > 0 => e,
        _ => return Err(Error::StalePath(a, b)),
    };
    let edge = &g.edges[e];
    let mut best: Option<(i64, usize)> = None;
    for seg in &edge.segments {
        let mid2 = 2 * seg.start as i64 + seg.length as i64;
        for slot in seg.slots.clone().filter(|&s| !edge.used[s]) {
            let (x2, y2) = edge.slots[slot];
            let along = if seg.axis == Axis::Horizontal { x2 } else { y2 };
            let key = ((along - mid2).abs(), slot);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    let (_, slot) = best.expect("capacity implies a free slot");
    Ok(g.edges[e].take(slot))
}

#[derive(Clone, Debug, PartialEq)]
pub enum NetOutcome<T> {
    Direct {
        pin: PinSite,
    },
    Feedthrough {
        path: Vec<ModuleId>,
        pins: Vec<PinSite>,
        ft_len: T,
        ft_num: usize,
    },
    Unplaced,
    /// A chip terminal endpoint; not part of pin assignment.
    OffChip,
}

impl<T> NetOutcome<T> {
    pub fn label(&self) -> &'static str {
        match self {
            NetOutcome::Direct { .. } => "direct",
            NetOutcome::Feedthrough { .. } => "feedthrough",
            NetOutcome::Unplaced => "unplaced",
            NetOutcome::OffChip => "offchip",
        }
    }

    pub fn pins(&self) -> &[PinSite] {
        match self {
            NetOutcome::Direct { pin } => std::slice::from_ref(pin),
            NetOutcome::Feedthrough { pins, .. } => pins,
            _ => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentResult<T> {
    /// Indexed by two-pin net id.
    pub outcomes: Vec<NetOutcome<T>>,
    /// Mean over feedthrough nets (0 when there are none).
    pub ft_len: T,
    pub ft_num: T,
    pub unplaced: usize,
    /// Graph after every slot consumption.
    pub graph: ResourceGraph<T>,
}

impl<T: Scalar> AssignmentResult<T> {
    pub fn feedthrough_count(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, NetOutcome::Feedthrough { .. }))
            .count()
    }

    pub fn direct_count(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, NetOutcome::Direct { .. }))
            .count()
    }

    /// Module pairs of unplaced nets.
    pub fn unplaced_nets(&self) -> impl Iterator<Item = usize> + '_ {
        self.outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, NetOutcome::Unplaced))
            .map(|(i, _)| i)
    }
}

fn route<T: Scalar>(g: &mut ResourceGraph<T>, a: ModuleId, b: ModuleId, k: usize) -> Result<NetOutcome<T>> {
    let mask = build_mask_graph(g);
    let Some(path) = astar_path(&mask, a, b)? else {
        return Ok(NetOutcome::Unplaced);
    };
    if path.len() == 2 {
        return Ok(NetOutcome::Direct {
            pin: assign_direct(g, a, b)?,
        });
    }
    let ft_len = path
        .windows(2)
        .fold(T::zero(), |acc, w| acc + g.edge(w[0], w[1]).expect("path edge").distance);
    let pins = beam_assign(g, &path, k)?;
    Ok(NetOutcome::Feedthrough {
        ft_num: path.len() - 2,
        path,
        pins,
        ft_len,
    })
}

/// Assigns pins for every two-pin net of `state`: first nets whose modules
/// are adjacent with free slots, then adjacent nets left without slots,
/// then non-adjacent nets, each group in ascending net id.
pub fn assign_all<T: Scalar>(state: &FloorplanState, u: u32, k: usize) -> Result<AssignmentResult<T>> {
    let mut g = build_resource_graph::<T>(state, u)?;
    let mut outcomes = vec![NetOutcome::OffChip; state.two_pin.len()];
    let mut blocked = Vec::new();
    let mut distant = Vec::new();
    let mut nets: Vec<_> = state.two_pin.iter().collect();
    nets.sort_by_key(|n| n.id);
    for net in nets {
        let Some((a, b)) = net.modules() else { continue };
        match g.edge_index(a, b) {
            Some(e) if g.edges[e].capacity > 0 => {
                outcomes[net.id] = NetOutcome::Direct {
                    pin: assign_direct(&mut g, a, b)?,
                }
            }
            Some(_) => blocked.push((net.id, a, b)),
            None => distant.push((net.id, a, b)),
        }
    }
    for (id, a, b) in blocked.into_iter().chain(distant) {
        outcomes[id] = route(&mut g, a, b, k)?;
    }
    let (mut len, mut num, mut count, mut unplaced) = (T::zero(), T::zero(), 0usize, 0usize);
    for o in &outcomes {
        match o {
            NetOutcome::Feedthrough { ft_len, ft_num, .. } => {
                len = len + *ft_len;
                num = num + T::from_count(*ft_num);
                count += 1;
            }
            NetOutcome::Unplaced => unplaced += 1,
            _ => {}
        }
    }
    let (ft_len, ft_num) = if count == 0 {
        (T::zero(), T::zero())
    } else {
        (len / T::from_count(count), num / T::from_count(count))
    };
    Ok(AssignmentResult {
        outcomes,
        ft_len,
        ft_num,
        unplaced,
        graph: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Rect, Region};
    use crate::model::fixtures::{placed, problem};
    use crate::netlist::register_blank_modules;
    use crate::GridCanvas;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn id(i: u32) -> ModuleId {
        ModuleId(i)
    }

    #[test]
    fn pin_space_of_uniform_modules() {
        // Five 4x4 modules, every pair connected: each module on four nets.
        let pairs: Vec<[u32; 2]> = (0..5u32).flat_map(|a| (a + 1..5).map(move |b| [a, b])).collect();
        let refs: Vec<&[u32]> = pairs.iter().map(|p| p.as_slice()).collect();
        let p = problem(&[16.0; 5], &refs);
        let s = FloorplanState::with_scale(&p, GridCanvas::new(20, 20).unwrap(), 1.0).unwrap();
        let ps = pin_space(&s).unwrap();
        assert_eq!((ps.mean_perimeter, ps.mean_nets, ps.u), (16.0, 4.0, 4));

        let lone = problem(&[16.0], &[]);
        let s = FloorplanState::with_scale(&lone, GridCanvas::new(8, 8).unwrap(), 1.0).unwrap();
        assert_eq!(pin_space(&s).unwrap().u, 1);
    }

    #[test]
    fn shared_edge_of_seven_at_pitch_two() {
        let s = placed(7, 2, &[Rect::new(0, 0, 7, 1), Rect::new(0, 1, 7, 1)], &[]);
        let g = build_resource_graph::<f64>(&s, 2).unwrap();
        let e = g.edge(id(0), id(1)).unwrap();
        assert_eq!((e.capacity, e.length), (3, 7));
        // Midpoints of [0,2), [2,4), [4,6) on the line y = 1.
        assert_eq!(e.slots, vec![(2, 2), (6, 2), (10, 2)]);
    }

    #[test]
    fn corner_contact_and_short_edges_give_no_edge() {
        let s = placed(4, 4, &[Rect::new(0, 0, 2, 2), Rect::new(2, 2, 2, 2)], &[]);
        let g = build_resource_graph::<f64>(&s, 1).unwrap();
        assert!(g.edges.is_empty());
        let s = placed(4, 4, &[Rect::new(0, 0, 2, 2), Rect::new(2, 0, 2, 2)], &[]);
        assert!(build_resource_graph::<f64>(&s, 3).unwrap().edges.is_empty());
        assert_eq!(build_resource_graph::<f64>(&s, 2).unwrap().capacity(id(0), id(1)), 1);
    }

    #[test]
    fn mask_graph_gates_on_capacity() {
        let mut s = placed(2, 1, &[Rect::new(0, 0, 1, 1), Rect::new(1, 0, 1, 1)], &[]);
        let mut g = build_resource_graph::<f64>(&s, 1).unwrap();
        let m = build_mask_graph(&g);
        assert_eq!(m.weight(id(0), id(1)), Some(1.0));
        assign_direct(&mut g, id(0), id(1)).unwrap();
        assert_eq!(build_mask_graph(&g).weight(id(0), id(1)), None);
        assert_eq!(build_mask_graph(&g).edge_count(), 0);
        s.set_region(id(1), Region::new());
        assert!(matches!(build_resource_graph::<f64>(&s, 1), Err(Error::Unplaced(_))));
    }

    #[test]
    fn mask_weights_match_recomputed_centers() {
        let s = grid_layout(&[3, 5, 4], &[&[4, 4], &[2, 3, 3], &[8]]);
        let g = build_resource_graph::<f64>(&s, 1).unwrap();
        let m = build_mask_graph(&g);
        for e in &g.edges {
            let ca: Point<f64> = s.region(e.a).center().unwrap();
            let cb: Point<f64> = s.region(e.b).center().unwrap();
            assert_eq!(m.weight(e.a, e.b), Some((ca.x - cb.x).hypot(ca.y - cb.y)));
        }
    }

    #[test]
    fn astar_trivial_cases() {
        let pts = vec![Point::new(0.5, 0.5), Point::new(1.5, 0.5), Point::new(9.0, 9.0)];
        let m = MaskGraph::from_edges(pts, &[(0, 1)]);
        assert_eq!(astar_path(&m, id(0), id(1)).unwrap(), Some(vec![id(0), id(1)]));
        assert_eq!(astar_path(&m, id(0), id(2)).unwrap(), None);
        assert!(matches!(astar_path(&m, id(0), id(7)), Err(Error::UnknownNode(_))));
    }

    fn dijkstra(m: &MaskGraph<f64>, s: usize, t: usize) -> Option<f64> {
        let n = m.centers.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[s] = 0.0;
        for _ in 0..n {
            let u = (0..n).filter(|&i| !done[i]).min_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())?;
            if dist[u].is_infinite() {
                break;
            }
            done[u] = true;
            for &(v, w) in &m.adjacency[u] {
                if dist[u] + w < dist[v] {
                    dist[v] = dist[u] + w;
                }
            }
        }
        dist[t].is_finite().then_some(dist[t])
    }

    fn path_cost(m: &MaskGraph<f64>, path: &[ModuleId]) -> f64 {
        path.windows(2).map(|w| m.weight(w[0], w[1]).expect("edge on path")).sum()
    }

    #[test]
    fn astar_matches_dijkstra_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..=20);
            let pts: Vec<Point<f64>> = (0..n)
                .map(|_| Point::new(rng.gen_range(0..40) as f64 * 0.5, rng.gen_range(0..40) as f64 * 0.5))
                .collect();
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|_| rng.gen_bool(0.25))
                .collect();
            let m = MaskGraph::from_edges(pts, &edges);
            for t in 1..n {
                let path = astar_path(&m, id(0), id(t as u32)).unwrap();
                match (path, dijkstra(&m, 0, t)) {
                    (None, None) => {}
                    (Some(p), Some(d)) => {
                        assert_eq!(p.first(), Some(&id(0)));
                        assert_eq!(p.last(), Some(&id(t as u32)));
                        let c = path_cost(&m, &p);
                        assert!((c - d).abs() <= 1e-9 * d.max(1.0), "{c} vs {d}");
                    }
                    (a, b) => panic!("reachability mismatch: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn astar_prefers_fewer_hops_on_equal_cost() {
        // Collinear points: 0-1-2 and 0-2 have the same length.
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        let m = MaskGraph::from_edges(pts, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(astar_path(&m, id(0), id(2)).unwrap(), Some(vec![id(0), id(2)]));
    }

    /// Tiling of the canvas into columns; `cols[i]` is a width and
    /// `rows[i]` the heights of the modules stacked in that column.
    fn grid_layout(cols: &[u32], rows: &[&[u32]]) -> FloorplanState {
        let mut rects = Vec::new();
        let mut x = 0;
        for (w, hs) in cols.iter().zip(rows) {
            let mut y = 0;
            for &h in hs.iter() {
                rects.push(Rect::new(x, y, *w, h));
                y += h as i32;
            }
            x += *w as i32;
        }
        let width = cols.iter().sum();
        let height = rows.iter().map(|r| r.iter().sum::<u32>()).max().unwrap();
        placed(width, height, &rects, &[])
    }

    /// Every chain of free slots along `path`, with its polyline length.
    fn exhaustive_chains(g: &ResourceGraph<f64>, path: &[ModuleId]) -> Vec<f64> {
        let start = g.center(path[0]).unwrap();
        let end = g.center(*path.last().unwrap()).unwrap();
        let mut partial: Vec<(f64, Point<f64>)> = vec![(0.0, start)];
        for w in path.windows(2) {
            let e = g.edge(w[0], w[1]).unwrap();
            partial = partial
                .iter()
                .flat_map(|&(c, last)| {
                    e.free_slots().map(move |s| {
                        let p = e.site(s).point::<f64>();
                        (c + last.distance(p), p)
                    })
                })
                .collect();
        }
        partial.into_iter().map(|(c, last)| c + last.distance(end)).collect()
    }

    fn chain_length(g: &ResourceGraph<f64>, path: &[ModuleId], pins: &[PinSite]) -> f64 {
        let mut pts = vec![g.center(path[0]).unwrap()];
        pts.extend(pins.iter().map(|p| p.point::<f64>()));
        pts.push(g.center(*path.last().unwrap()).unwrap());
        pts.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    #[test]
    fn forced_chain_when_each_pair_has_one_slot() {
        let s = grid_layout(&[2, 2, 2], &[&[2], &[2], &[2]]);
        let mut g = build_resource_graph::<f64>(&s, 2).unwrap();
        let path = [id(0), id(1), id(2)];
        let pins = beam_assign(&mut g, &path, 5).unwrap();
        assert_eq!(pins.iter().map(|p| (p.x2, p.y2)).collect::<Vec<_>>(), vec![(4, 2), (8, 2)]);
        assert_eq!(g.capacity(id(0), id(1)), 0);
        assert!(matches!(beam_assign(&mut g, &path, 5), Err(Error::StalePath(..))));
    }

    #[test]
    fn wide_beam_equals_exhaustive_minimum() {
        // Four columns of height 6 at pitch 2: three slots per boundary,
        // 27 chains in total.
        let s = grid_layout(&[2, 3, 1, 2], &[&[6], &[6], &[6], &[6]]);
        let mut g = build_resource_graph::<f64>(&s, 2).unwrap();
        let path = [id(0), id(1), id(2), id(3)];
        let all = exhaustive_chains(&g, &path);
        assert_eq!(all.len(), 27);
        let best = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let snapshot = g.clone();
        let pins = beam_assign(&mut g, &path, 64).unwrap();
        assert_eq!(chain_length(&snapshot, &path, &pins), best);
    }

    #[test]
    fn narrow_beam_never_beats_exhaustive() {
        let s = grid_layout(&[3, 2, 4, 2, 3], &[&[5, 4], &[9], &[2, 7], &[9], &[4, 5]]);
        let g0 = build_resource_graph::<f64>(&s, 1).unwrap();
        let path = [id(0), id(2), id(3), id(5), id(6)];
        let best = exhaustive_chains(&g0, &path).into_iter().fold(f64::INFINITY, f64::min);
        for k in [1, 2, 5, 1000] {
            let mut g = g0.clone();
            let pins = beam_assign(&mut g, &path, k).unwrap();
            let len = chain_length(&g0, &path, &pins);
            assert!(best <= len + 1e-12, "k={k}");
            if k == 1000 {
                assert_eq!(len, best);
            }
        }
    }

    /// Five modules in a row where the end pair is not adjacent and each
    /// inner boundary holds two slots.
    fn five_in_a_row() -> FloorplanState {
        let rects = [
            Rect::new(0, 0, 2, 2),
            Rect::new(2, 0, 2, 2),
            Rect::new(4, 0, 2, 2),
            Rect::new(6, 0, 2, 2),
            Rect::new(8, 0, 2, 2),
        ];
        placed(10, 2, &rects, &[&[0, 4]])
    }

    #[test]
    fn end_to_end_net_routes_through_three_modules() {
        let s = five_in_a_row();
        let g0 = build_resource_graph::<f64>(&s, 1).unwrap();
        assert_eq!(g0.capacity(id(1), id(2)), 2);
        assert_eq!(g0.capacity(id(2), id(3)), 2);
        let r = assign_all::<f64>(&s, 1, 5).unwrap();
        let NetOutcome::Feedthrough { path, pins, ft_len, ft_num } = &r.outcomes[0] else {
            panic!("expected feedthrough, got {:?}", r.outcomes[0]);
        };
        assert_eq!(path, &vec![id(0), id(1), id(2), id(3), id(4)]);
        assert_eq!(*ft_num, 3);
        assert_eq!(*ft_len, 8.0);
        assert_eq!((r.ft_len, r.ft_num, r.unplaced), (8.0, 3.0, 0));
        let best = exhaustive_chains(&g0, path).into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(chain_length(&g0, path, pins), best);
    }

    #[test]
    fn single_adjacent_net_is_direct() {
        let s = placed(4, 2, &[Rect::new(0, 0, 2, 2), Rect::new(2, 0, 2, 2)], &[&[0, 1]]);
        let r = assign_all::<f64>(&s, 1, 5).unwrap();
        assert!(matches!(r.outcomes[0], NetOutcome::Direct { .. }));
        assert_eq!((r.ft_len, r.ft_num, r.unplaced), (0.0, 0.0, 0));
        assert_eq!(r.graph.capacity(id(0), id(1)), 1);
    }

    #[test]
    fn direct_pin_sits_nearest_the_middle() {
        let s = placed(5, 2, &[Rect::new(0, 0, 5, 1), Rect::new(0, 1, 5, 1)], &[]);
        let mut g = build_resource_graph::<f64>(&s, 1).unwrap();
        let p = assign_direct(&mut g, id(1), id(0)).unwrap();
        assert_eq!((p.x2, p.y2), (5, 2));
        let p = assign_direct(&mut g, id(0), id(1)).unwrap();
        assert_eq!((p.x2, p.y2), (3, 2));
    }

    #[test]
    fn exhausted_adjacent_pair_falls_back_to_feedthrough() {
        // 0 and 1 share one slot; the second net goes around through 2.
        let s = grid_layout(&[1, 1], &[&[1, 1], &[2]]);
        let mut s = s;
        s.two_pin = crate::netlist::decompose_nets(&[
            crate::NetRecord::new(0, crate::PinRef::Module(id(0)), vec![crate::PinRef::Module(id(1))]),
            crate::NetRecord::new(1, crate::PinRef::Module(id(0)), vec![crate::PinRef::Module(id(1))]),
        ])
        .nets;
        let r = assign_all::<f64>(&s, 1, 5).unwrap();
        assert!(matches!(r.outcomes[0], NetOutcome::Direct { .. }));
        match &r.outcomes[1] {
            NetOutcome::Feedthrough { path, ft_num, .. } => {
                assert_eq!(path, &vec![id(0), id(2), id(1)]);
                assert_eq!(*ft_num, 1);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    /// All simple paths from `s` to `t` over edges with positive initial
    /// capacity.
    fn simple_paths(g: &ResourceGraph<f64>, s: ModuleId, t: ModuleId) -> Vec<Vec<ModuleId>> {
        fn go(g: &ResourceGraph<f64>, at: ModuleId, t: ModuleId, cur: &mut Vec<ModuleId>, out: &mut Vec<Vec<ModuleId>>) {
            if at == t {
                out.push(cur.clone());
                return;
            }
            for &n in g.nodes() {
                if !cur.contains(&n) && g.edge(at, n).is_some() {
                    cur.push(n);
                    go(g, n, t, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(g, s, t, &mut vec![s], &mut out);
        out
    }

    #[test]
    fn disconnected_pair_is_unplaced_and_others_route() {
        // Modules 0..4 tile the left part; module 5 sits alone.
        let rects = [
            Rect::new(0, 0, 2, 2),
            Rect::new(2, 0, 2, 2),
            Rect::new(4, 0, 2, 2),
            Rect::new(0, 2, 3, 2),
            Rect::new(3, 2, 3, 2),
            Rect::new(8, 0, 2, 2),
        ];
        let nets: &[&[u32]] = &[&[0, 2], &[0, 5], &[3, 4], &[0, 1], &[1, 4], &[2, 3]];
        let s = placed(10, 4, &rects, nets);
        let g0 = build_resource_graph::<f64>(&s, 1).unwrap();
        let r = assign_all::<f64>(&s, 1, 5).unwrap();
        let mut expected_unplaced = 0;
        for net in &s.two_pin {
            let (a, b) = net.modules().unwrap();
            let reachable = !simple_paths(&g0, a, b).is_empty();
            expected_unplaced += !reachable as usize;
            assert_eq!(matches!(r.outcomes[net.id], NetOutcome::Unplaced), !reachable);
        }
        assert_eq!(expected_unplaced, 1);
        assert_eq!(r.unplaced, 1);
        assert!(matches!(r.outcomes[1], NetOutcome::Unplaced));
        // Every feedthrough path is among the enumerated simple paths and
        // is the shortest one when capacity is ample.
        for net in &s.two_pin {
            if let NetOutcome::Feedthrough { path, .. } = &r.outcomes[net.id] {
                let (a, b) = net.modules().unwrap();
                let all = simple_paths(&g0, a, b);
                assert!(all.contains(path));
                let m = build_mask_graph(&g0);
                let min = all.iter().map(|p| path_cost(&m, p)).fold(f64::INFINITY, f64::min);
                assert!((path_cost(&m, path) - min).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn terminal_nets_are_off_chip() {
        let mut s = placed(4, 2, &[Rect::new(0, 0, 2, 2), Rect::new(2, 0, 2, 2)], &[]);
        s.two_pin = vec![crate::TwoPinNet {
            id: 0,
            parent_net: 0,
            src: crate::PinRef::Terminal(0),
            dst: crate::PinRef::Module(id(1)),
        }];
        let r = assign_all::<f64>(&s, 1, 5).unwrap();
        assert_eq!(r.outcomes, vec![NetOutcome::OffChip]);
        assert_eq!(r.unplaced, 0);
    }

    #[test]
    fn blanks_carry_feedthrough() {
        // Whitespace between two modules becomes a blank node.
        let mut s = placed(6, 2, &[Rect::new(0, 0, 2, 2), Rect::new(4, 0, 2, 2)], &[&[0, 1]]);
        assert_eq!(register_blank_modules(&mut s), 1);
        let r = assign_all::<f64>(&s, 1, 5).unwrap();
        match &r.outcomes[0] {
            NetOutcome::Feedthrough { path, ft_num, .. } => {
                assert_eq!(path, &vec![id(0), ModuleId::blank(0), id(1)]);
                assert_eq!(*ft_num, 1);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    fn column_layout(cols: Vec<(u32, Vec<u32>)>) -> FloorplanState {
        let widths: Vec<u32> = cols.iter().map(|c| c.0).collect();
        let heights: Vec<&[u32]> = cols.iter().map(|c| c.1.as_slice()).collect();
        grid_layout(&widths, &heights)
    }

    fn check_invariants(s: &FloorplanState, r: &AssignmentResult<f64>) {
        let g0 = build_resource_graph::<f64>(s, r.graph.u).unwrap();
        let mut consumed = vec![0usize; g0.edges.len()];
        let mut seen = std::collections::HashSet::new();
        for o in &r.outcomes {
            for pin in o.pins() {
                assert!(seen.insert(*pin), "slot used twice: {pin:?}");
                consumed[g0.edge_index(pin.a, pin.b).unwrap()] += 1;
            }
            if let NetOutcome::Feedthrough { path, pins, ft_len, ft_num } = o {
                assert!(path.len() >= 3);
                assert_eq!(*ft_num, path.len() - 2);
                assert_eq!(pins.len(), path.len() - 1);
                let mut expect = 0.0;
                for (w, pin) in path.windows(2).zip(pins) {
                    assert!(g0.edge(w[0], w[1]).is_some());
                    assert_eq!(g0.edge_index(pin.a, pin.b), g0.edge_index(w[0], w[1]));
                    let ca: Point<f64> = s.region(w[0]).center().unwrap();
                    let cb: Point<f64> = s.region(w[1]).center().unwrap();
                    expect += (ca.x - cb.x).hypot(ca.y - cb.y);
                }
                assert_eq!(*ft_len, expect);
            }
        }
        for (e, (before, after)) in g0.edges.iter().zip(&r.graph.edges).enumerate() {
            assert_eq!(before.initial, after.capacity + consumed[e]);
            assert_eq!(after.used.iter().filter(|u| **u).count(), consumed[e]);
            for seg in &before.segments {
                let taken: Vec<usize> = seg.slots.clone().filter(|&i| after.used[i]).collect();
                for w in taken.windows(2) {
                    let (p, q) = (before.slots[w[0]], before.slots[w[1]]);
                    let gap = (p.0 - q.0).abs() + (p.1 - q.1).abs();
                    assert!(gap >= 2 * r.graph.u as i64);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn assignment_invariants_hold(
            cols in proptest::collection::vec((1u32..5, proptest::collection::vec(1u32..5, 1..4)), 1..5),
            net_seed in any::<u64>(),
            u in 1u32..3,
            k in 1usize..6,
        ) {
            let mut s = column_layout(cols);
            let n = s.modules.len() as u32;
            prop_assume!(n >= 2);
            let mut rng = ChaCha8Rng::seed_from_u64(net_seed);
            let nets: Vec<crate::NetRecord> = (0..rng.gen_range(1..12))
                .map(|i| {
                    let a = rng.gen_range(0..n);
                    let b = (a + rng.gen_range(1..n)) % n;
                    crate::NetRecord::new(i, crate::PinRef::Module(id(a)), vec![crate::PinRef::Module(id(b))])
                })
                .collect();
            s.two_pin = crate::netlist::decompose_nets(&nets).nets;
            register_blank_modules(&mut s);
            let r = assign_all::<f64>(&s, u, k).unwrap();
            check_invariants(&s, &r);
            prop_assert_eq!(r.unplaced, r.unplaced_nets().count());
            prop_assert_eq!(&assign_all::<f64>(&s, u, k).unwrap(), &r);
        }
    }
}
