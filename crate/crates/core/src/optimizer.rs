// SPDX-License-Identifier: Apache-2.0

//! Incremental optimization: whitespace removal followed by simulated
//! annealing over three local region operators.

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    adjacency_length_of, boundary_segments_of, connected_components, outline_segment_count, Axis, Cell,
    CellOwner, ModuleId, Neighbor, Point, Rect, Region, Side,
};
use crate::metrics::{hpwl, objective, MetricSet, Weights};
use crate::model::FloorplanState;
use crate::pin_graph::{assign_all, AssignmentResult, NetOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SAConfig {
    pub t_init: f64,
    pub t_end: f64,
    pub cooling: f64,
    /// Moves per temperature level; `None` derives it from the number of
    /// feedthrough nets.
    pub moves_per_temperature: Option<usize>,
    /// Upper bound applied to the derived move count.
    pub max_moves_per_temperature: usize,
    pub weights: Weights<f64>,
    pub avr_threshold: f64,
    pub max_edge_segments: usize,
    pub beam_k: usize,
    pub seed: u64,
}

impl Default for SAConfig {
    fn default() -> Self {
        SAConfig {
            t_init: 100.0,
            t_end: 0.01,
            cooling: 0.9,
            moves_per_temperature: None,
            max_moves_per_temperature: 40,
            weights: Weights::default(),
            avr_threshold: 0.05,
            max_edge_segments: 20,
            beam_k: 5,
            seed: 0,
        }
    }
}

impl SAConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return bad("cooling must lie in (0, 1)");
        }
        if !(self.t_end > 0.0 && self.t_end < self.t_init) {
            return bad("temperatures must satisfy 0 < t_end < t_init");
        }
        if self.beam_k == 0 || self.max_edge_segments < 4 {
            return bad("beam width must be positive and the segment limit at least 4");
        }
        Ok(())
    }

    /// Number of temperature levels the schedule visits.
    pub fn level_count(&self) -> usize {
        let mut t = self.t_init;
        let mut n = 0;
        while t >= self.t_end {
            n += 1;
            t *= self.cooling;
        }
        n
    }
}

/// A scored floorplan: its pin assignment and objective terms.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub assignment: AssignmentResult<f64>,
    pub metrics: MetricSet<f64>,
    pub objective: f64,
}

pub fn evaluate(state: &FloorplanState, u: u32, k: usize, weights: &Weights<f64>) -> Result<Evaluation> {
    let assignment = assign_all::<f64>(state, u, k)?;
    let metrics = MetricSet {
        hpwl: hpwl::<f64>(state, &state.nets)?,
        ft_len: assignment.ft_len,
        ft_num: assignment.ft_num,
        unplaced: assignment.unplaced,
    };
    Ok(Evaluation {
        objective: objective(&metrics, weights),
        assignment,
        metrics,
    })
}

/// Moves `cells` to `to`, taking them from whichever real module owns them.
fn transfer(s: &mut FloorplanState, cells: &[Cell], to: ModuleId) {
    for &c in cells {
        if let Some(from) = s.canvas.id_at(c) {
            if !from.is_blank() {
                s.modules[from.index()].region.remove(c);
            }
        }
        s.canvas.set(c, CellOwner::Module(to));
    }
    s.modules[to.index()].region.extend(cells.iter().copied());
}

fn swap_regions(s: &mut FloorplanState, i: ModuleId, j: ModuleId) {
    let (a, b) = (i.index(), j.index());
    let ri = std::mem::take(&mut s.modules[a].region);
    let rj = std::mem::replace(&mut s.modules[b].region, ri);
    s.modules[a].region = rj;
    s.canvas.assign(&s.modules[a].region, CellOwner::Module(i));
    s.canvas.assign(&s.modules[b].region, CellOwner::Module(j));
}

fn movable(s: &FloorplanState, i: ModuleId, j: ModuleId) -> bool {
    i != j
        && !i.is_blank()
        && !j.is_blank()
        && i.index() < s.modules.len()
        && j.index() < s.modules.len()
        && !s.module(i).preplaced
        && !s.module(j).preplaced
}

fn shape_ok(s: &FloorplanState, ids: &[ModuleId], max_segments: usize) -> bool {
    ids.iter().all(|&id| {
        let r = &s.module(id).region;
        !r.is_empty() && r.is_connected() && outline_segment_count(r) <= max_segments
    })
}

fn avr_after(s: &FloorplanState, id: ModuleId, cells: usize) -> f64 {
    let a = s.module(id).predefined_area as f64;
    (a - cells as f64) / a
}

/// Operator 1: exchanges the regions of two modules outright. Rejected
/// when either module would shrink by more than `avr_threshold`.
pub fn op_random_exchange(s: &FloorplanState, i: ModuleId, j: ModuleId, cfg: &SAConfig) -> Option<FloorplanState> {
    if !movable(s, i, j) {
        return None;
    }
    let (ni, nj) = (s.module(i).region.area(), s.module(j).region.area());
    if avr_after(s, i, nj) > cfg.avr_threshold || avr_after(s, j, ni) > cfg.avr_threshold {
        return None;
    }
    let mut out = s.clone();
    swap_regions(&mut out, i, j);
    Some(out)
}

/// Operator 2: exchanges two adjacent modules, then hands interface cells
/// from the module that gained area to the one that lost it, layer by
/// layer in row-major order, until both hold their original cell counts.
pub fn op_adjacent_exchange(s: &FloorplanState, i: ModuleId, j: ModuleId, cfg: &SAConfig) -> Option<FloorplanState> {
    if !movable(s, i, j) || adjacency_length_of(&s.canvas, &s.module(i).region, j) == 0 {
        return None;
    }
    let (ni, nj) = (s.module(i).region.area(), s.module(j).region.area());
    let mut out = s.clone();
    swap_regions(&mut out, i, j);
    if ni == nj {
        return Some(out);
    }
    let (small, large, mut need) = if ni > nj { (i, j, ni - nj) } else { (j, i, nj - ni) };
    while need > 0 {
        let queue: Vec<Cell> = out
            .module(large)
            .region
            .cells()
            .iter()
            .copied()
            .filter(|c| c.neighbors().iter().any(|n| out.canvas.id_at(*n) == Some(small)))
            .collect();
        if queue.is_empty() || queue.len() >= out.module(large).region.area() {
            return None;
        }
        let take = need.min(queue.len());
        transfer(&mut out, &queue[..take], small);
        need -= take;
    }
    shape_ok(&out, &[i, j], cfg.max_edge_segments).then_some(out)
}

/// Maps (along, across) coordinates of a segment frame to a cell.
fn frame_cell(axis: Axis, along: i32, across: i32) -> Cell {
    match axis {
        Axis::Horizontal => Cell::new(along, across),
        Axis::Vertical => Cell::new(across, along),
    }
}

/// Operator 3: on a straight shared segment of length `L >= 3`, pushes an
/// `m x m` tooth (`m = L / 3`) over the middle third into one module and
/// hands back an `m x m` block right after it the other way. Both areas are
/// preserved and the shared boundary grows by `4m`.
pub fn op_p2p_enhance<R: Rng>(
    s: &FloorplanState,
    i: ModuleId,
    j: ModuleId,
    rng: &mut R,
    cfg: &SAConfig,
) -> Option<FloorplanState> {
    if !movable(s, i, j) {
        return None;
    }
    let segs: Vec<_> = boundary_segments_of(&s.canvas, &s.module(i).region, i)
        .into_iter()
        .filter(|b| b.neighbor == Neighbor::Module(j) && b.length >= 3)
        .collect();
    if segs.is_empty() {
        return None;
    }
    let seg = segs[rng.gen_range(0..segs.len())];
    let len = seg.length as i32;
    let m = len / 3;
    let c1 = seg.start + (len - m) / 2;
    let c2 = c1 + m;
    // `i` is on `seg.side` of the line.
    let (low, high) = if seg.side == Side::Low { (i, j) } else { (j, i) };
    let into_high = rng.gen_bool(0.5);
    let line = seg.line;
    let block = |from: i32, a0: i32| -> Vec<Cell> {
        (a0..a0 + m)
            .flat_map(|along| (from..from + m).map(move |across| frame_cell(seg.axis, along, across)))
            .collect()
    };
    let (tooth, tooth_from, tooth_to, comp, comp_from, comp_to) = if into_high {
        (block(line, c1), high, low, block(line - m, c2), low, high)
    } else {
        (block(line - m, c1), low, high, block(line, c2), high, low)
    };
    let owned = |cells: &[Cell], by: ModuleId| cells.iter().all(|c| s.canvas.id_at(*c) == Some(by));
    if !owned(&tooth, tooth_from) || !owned(&comp, comp_from) {
        return None;
    }
    let mut out = s.clone();
    transfer(&mut out, &tooth, tooth_to);
    transfer(&mut out, &comp, comp_to);
    shape_ok(&out, &[i, j], cfg.max_edge_segments).then_some(out)
}

/// Unplaced-pin count per real module.
fn unplaced_per_module(s: &FloorplanState, a: &AssignmentResult<f64>) -> Vec<usize> {
    let mut count = vec![0; s.modules.len()];
    for net in a.unplaced_nets() {
        if let Some((x, y)) = s.two_pin[net].modules() {
            count[x.index()] += 1;
            count[y.index()] += 1;
        }
    }
    count
}

/// Grows a rectangular module one full side at a time into empty cells.
/// Grows a rectangular module by one free grid line (right, up, left,
/// down: first side that is entirely empty). Returns whether it grew.
fn grow_one_line(s: &mut FloorplanState, id: ModuleId) -> bool {
    let Some(bb) = s.module(id).region.bbox() else { return false };
    let sides: [Vec<Cell>; 4] = [
        (bb.y..bb.y_end()).map(|y| Cell::new(bb.x_end(), y)).collect(),
        (bb.x..bb.x_end()).map(|x| Cell::new(x, bb.y_end())).collect(),
        (bb.y..bb.y_end()).map(|y| Cell::new(bb.x - 1, y)).collect(),
        (bb.x..bb.x_end()).map(|x| Cell::new(x, bb.y - 1)).collect(),
    ];
    let free = sides
        .into_iter()
        .find(|line| line.iter().all(|c| s.canvas.get(*c) == Some(CellOwner::Empty)));
    match free {
        Some(line) => {
            transfer(s, &line, id);
            true
        }
        None => false,
    }
}

/// Fills every empty cell. Rectangular modules first grow in place, most
/// unplaced pins first; each leftover empty component then joins the
/// adjacent module whose merge gives the lowest FTlen.
pub fn remove_whitespace(
    state: &FloorplanState,
    assignment: &AssignmentResult<f64>,
    u: u32,
    cfg: &SAConfig,
) -> Result<FloorplanState> {
    let mut s = state.clone();
    s.clear_blanks();
    if s.canvas.count_empty() == 0 {
        return Ok(s);
    }
    let unplaced = unplaced_per_module(&s, assignment);
    let mut order: Vec<ModuleId> = s.modules.iter().filter(|m| !m.preplaced).map(|m| m.id).collect();
    order.sort_by(|a, b| {
        unplaced[b.index()]
            .cmp(&unplaced[a.index()])
            .then(s.module(*b).predefined_area.cmp(&s.module(*a).predefined_area))
            .then(a.cmp(b))
    });
    // Rounds of one line per module, in priority order, until none grows.
    let mut growing: Vec<ModuleId> = order.into_iter().filter(|&id| s.module(id).region.is_rectangle()).collect();
    while !growing.is_empty() {
        growing.retain(|&id| grow_one_line(&mut s, id));
    }
    let pockets = connected_components(&s.canvas, CellOwner::is_empty);
    debug!("whitespace: {} pockets after expansion", pockets.len());
    for pocket in pockets {
        let mut cands: Vec<ModuleId> = pocket
            .cells()
            .iter()
            .flat_map(|c| c.neighbors())
            .filter_map(|n| s.canvas.id_at(n))
            .filter(|id| !id.is_blank() && !s.module(*id).preplaced)
            .collect();
        cands.sort_unstable();
        cands.dedup();
        if cands.is_empty() {
            let target = nearest_movable(&s, &pocket)?;
            warn!("whitespace pocket enclosed by fixed modules merged into {}", s.module(target).name);
            transfer(&mut s, pocket.cells(), target);
            continue;
        }
        let merged = |id: ModuleId| {
            let mut t = s.clone();
            transfer(&mut t, pocket.cells(), id);
            let segs = outline_segment_count(&t.module(id).region);
            (t, segs)
        };
        let mut best: Option<(f64, ModuleId, FloorplanState)> = None;
        let mut fallback: Option<(usize, ModuleId)> = None;
        for &id in &cands {
            let (t, segs) = merged(id);
            if segs > cfg.max_edge_segments {
                if fallback.is_none_or(|(fs, _)| segs < fs) {
                    fallback = Some((segs, id));
                }
                continue;
            }
            let ft = if cands.len() == 1 {
                0.0
            } else {
                assign_all::<f64>(&t, u, cfg.beam_k)?.ft_len
            };
            if best.as_ref().is_none_or(|(bf, _, _)| ft < *bf) {
                best = Some((ft, id, t));
            }
        }
        s = match best {
            Some((_, _, t)) => t,
            None => {
                let (segs, id) = fallback.expect("candidates exist");
                warn!(
                    "whitespace pocket of {} cells merged into {} with {segs} outline segments",
                    pocket.area(),
                    s.module(id).name
                );
                merged(id).0
            }
        };
    }
    Ok(s)
}

fn nearest_movable(s: &FloorplanState, pocket: &Region) -> Result<ModuleId> {
    let c: Point<f64> = pocket.center()?;
    s.modules
        .iter()
        .filter(|m| !m.preplaced && !m.region.is_empty())
        .map(|m| (m.region.center::<f64>().map(|p| p.distance(c)).unwrap_or(f64::INFINITY), m.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
        .ok_or_else(|| Error::Layout("no movable module to absorb whitespace".into()))
}

/// One row of the annealing log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub temperature: f64,
    pub best_objective: f64,
    pub current_objective: f64,
    pub acceptance_rate: f64,
    pub moves: usize,
}

#[derive(Clone, Debug)]
pub struct SAOutcome {
    pub state: FloorplanState,
    pub evaluation: Evaluation,
    pub initial_objective: f64,
    pub levels: Vec<LevelRecord>,
}

/// Nets the annealer works on: feedthrough and unplaced ones.
fn targets(a: &AssignmentResult<f64>) -> Vec<usize> {
    a.outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| matches!(o, NetOutcome::Feedthrough { .. } | NetOutcome::Unplaced))
        .map(|(i, _)| i)
        .collect()
}

/// Proposes a move for the net with the given endpoints.
fn propose<R: Rng>(
    s: &FloorplanState,
    eval: &Evaluation,
    net: usize,
    rng: &mut R,
    cfg: &SAConfig,
) -> Option<FloorplanState> {
    let (a, b) = s.two_pin[net].modules()?;
    if adjacency_length_of(&s.canvas, &s.module(a).region, b) > 0 {
        if let Some(t) = op_p2p_enhance(s, a, b, rng, cfg) {
            return Some(t);
        }
    }
    let (mover, anchor) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
    if let NetOutcome::Feedthrough { path, .. } = &eval.assignment.outcomes[net] {
        if rng.gen_bool(0.5) {
            // Step the mover one module along its path.
            let next = if mover == path[0] { path[1] } else { path[path.len() - 2] };
            if let Some(t) = op_adjacent_exchange(s, mover, next, cfg) {
                return Some(t);
            }
        }
    }
    // Swap the mover with a module touching the other endpoint; neighbors
    // are tried in random order and the first feasible exchange is taken.
    let g = &eval.assignment.graph;
    let mut neighbors: Vec<ModuleId> = g
        .nodes()
        .iter()
        .copied()
        .filter(|&n| !n.is_blank() && n != mover && g.edge(anchor, n).is_some())
        .collect();
    neighbors.shuffle(rng);
    neighbors.into_iter().find_map(|partner| op_random_exchange(s, mover, partner, cfg))
}

/// Metropolis search over Operators 1-3 driven by the nets that need
/// feedthrough or could not be placed. Returns the best state seen.
pub fn sa_optimize(state: &FloorplanState, u: u32, cfg: &SAConfig) -> Result<SAOutcome> {
    cfg.validate()?;
    let eval = evaluate(state, u, cfg.beam_k, &cfg.weights)?;
    let initial_objective = eval.objective;
    let mut levels = Vec::new();
    let work = targets(&eval.assignment);
    if work.is_empty() {
        info!("annealing skipped: no feedthrough or unplaced nets");
        return Ok(SAOutcome {
            state: state.clone(),
            evaluation: eval,
            initial_objective,
            levels,
        });
    }
    let moves = cfg
        .moves_per_temperature
        .unwrap_or_else(|| eval.assignment.feedthrough_count().max(10).min(cfg.max_moves_per_temperature));
    info!("annealing: {} levels x {moves} moves", cfg.level_count());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = (state.clone(), eval);
    let mut best = current.clone();
    let mut turn = 0usize;
    let mut t = cfg.t_init;
    let mut level = 0;
    while t >= cfg.t_end {
        let mut accepted = 0;
        let mut infeasible = 0;
        for _ in 0..moves {
            let work = targets(&current.1.assignment);
            if work.is_empty() {
                continue;
            }
            let net = work[turn % work.len()];
            turn += 1;
            let Some(cand) = propose(&current.0, &current.1, net, &mut rng, cfg) else {
                infeasible += 1;
                continue;
            };
            let e = evaluate(&cand, u, cfg.beam_k, &cfg.weights)?;
            let delta = e.objective - current.1.objective;
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / t).exp() {
                accepted += 1;
                current = (cand, e);
                if current.1.objective < best.1.objective {
                    best = current.clone();
                }
            }
        }
        let rec = LevelRecord {
            level,
            temperature: t,
            best_objective: best.1.objective,
            current_objective: current.1.objective,
            acceptance_rate: accepted as f64 / moves.max(1) as f64,
            moves,
        };
        debug!(
            "level {level}: T {t:.5} best {:.4} current {:.4} accepted {accepted}/{moves}, {infeasible} infeasible",
            rec.best_objective, rec.current_objective
        );
        levels.push(rec);
        t *= cfg.cooling;
        level += 1;
    }
    Ok(SAOutcome {
        state: best.0,
        evaluation: best.1,
        initial_objective,
        levels,
    })
}

/// Rectangle helper for building fixtures and callers that place blocks.
pub fn rect_region(x: i32, y: i32, w: u32, h: u32) -> Region {
    Region::from_rect(Rect::new(x, y, w, h))
}
