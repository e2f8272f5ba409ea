// SPDX-License-Identifier: Apache-2.0

//! Overlap-free sequential placement guided by a position-mask (where a
//! footprint fits) and a wiremask (how much HPWL placing it there costs).

use std::cmp::Ordering;

use log::{debug, info};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Cell, ModuleId, Point, Rect, Region};
use crate::metrics::hpwl;
use crate::model::{FloorplanState, ModuleKind, ModuleRecord, PinRef};
use crate::Scalar;

/// Per-anchor values over the canvas; `None` marks an infeasible anchor.
/// Anchors address the bottom-left cell of a footprint.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask<T> {
    pub width: u32,
    pub height: u32,
    values: Vec<Option<T>>,
}

impl<T: Copy> Mask<T> {
    fn filled(width: u32, height: u32, v: Option<T>) -> Self {
        Mask {
            width,
            height,
            values: vec![v; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> Option<T> {
        self.values[y as usize * self.width as usize + x as usize]
    }

    fn set(&mut self, x: u32, y: u32, v: Option<T>) {
        self.values[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn feasible_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Anchors feasible in both masks, valued by `self`.
    pub fn gated_by<U: Copy>(&self, gate: &Mask<U>) -> Mask<T> {
        Mask {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&gate.values)
                .map(|(v, g)| if g.is_some() { *v } else { None })
                .collect(),
        }
    }
}

/// Integer rectangle for a module: fixed dims for hard blocks, the tightest
/// aspect-feasible rectangle covering the predefined area for soft ones.
pub fn module_footprint(m: &ModuleRecord) -> Result<(u32, u32)> {
    match m.kind {
        ModuleKind::Hard { width, height } => Ok((width, height)),
        ModuleKind::Soft {
            aspect_min,
            aspect_max,
        } => footprint_for_area(m.predefined_area, aspect_min, aspect_max),
    }
}

/// Among integer `(w, h)` with `w*h >= area` and `h/w` inside the aspect
/// bounds, minimizes the slack `w*h - area`, then the distance of the ratio
/// from 1, preferring the wider shape last.
pub fn footprint_for_area(area: u64, aspect_min: f64, aspect_max: f64) -> Result<(u32, u32)> {
    let err = || Error::NoFootprint {
        area,
        min: aspect_min,
        max: aspect_max,
    };
    if area == 0 || aspect_min.is_nan() || aspect_min <= 0.0 || aspect_min > aspect_max {
        return Err(err());
    }
    const EPS: f64 = 1e-9;
    let mut best: Option<(u64, u32, u32)> = None;
    for w in 1..=area {
        let lo = area.div_ceil(w).max((aspect_min * w as f64 - EPS).ceil() as u64);
        let hi = (aspect_max * w as f64 + EPS).floor() as u64;
        if lo > hi {
            continue;
        }
        let (w32, h32) = (w as u32, lo as u32);
        let slack = w * lo - area;
        let better = match best {
            None => true,
            Some((bs, bw, bh)) => match slack.cmp(&bs) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => {
                    // Compare max/min ratios by cross multiplication.
                    let (a_max, a_min) = (w32.max(h32) as u64, w32.min(h32) as u64);
                    let (b_max, b_min) = (bw.max(bh) as u64, bw.min(bh) as u64);
                    match (a_max * b_min).cmp(&(b_max * a_min)) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => w32 > bw,
                    }
                }
            },
        };
        if better {
            best = Some((slack, w32, h32));
        }
    }
    best.map(|(_, w, h)| (w, h)).ok_or_else(err)
}

/// Anchors where a `w x h` footprint stays inside the canvas and overlaps
/// no owned cell.
pub fn compute_position_mask<T: Scalar>(state: &FloorplanState, footprint: (u32, u32)) -> Mask<T> {
    let (cw, ch) = (state.width(), state.height());
    let (w, h) = footprint;
    let mut mask = Mask::filled(cw, ch, None);
    if w == 0 || h == 0 || w > cw || h > ch {
        return mask;
    }
    // 2D prefix sums of occupancy.
    let stride = cw as usize + 1;
    let mut pre = vec![0u32; stride * (ch as usize + 1)];
    for y in 0..ch as usize {
        for x in 0..cw as usize {
            let occ = state
                .canvas
                .id_at(crate::Cell::new(x as i32, y as i32))
                .is_some() as u32;
            pre[(y + 1) * stride + x + 1] =
                occ + pre[y * stride + x + 1] + pre[(y + 1) * stride + x] - pre[y * stride + x];
        }
    }
    let sum = |x0: usize, y0: usize, x1: usize, y1: usize| {
        pre[y1 * stride + x1] + pre[y0 * stride + x0] - pre[y0 * stride + x1] - pre[y1 * stride + x0]
    };
    for y in 0..=(ch - h) {
        for x in 0..=(cw - w) {
            let (x, y) = (x as usize, y as usize);
            if sum(x, y, x + w as usize, y + h as usize) == 0 {
                mask.set(x as u32, y as u32, Some(T::zero()));
            }
        }
    }
    mask
}

/// Bounding boxes `(lo, hi)` of the already-placed endpoints of every net
/// touching `id`, excluding `id` itself. Nets with no placed partner are
/// omitted.
fn partner_boxes<T: Scalar>(state: &FloorplanState, id: ModuleId) -> Vec<(Point<T>, Point<T>)> {
    let centers = state.module_centers::<T>();
    let mut boxes = Vec::new();
    for net in &state.nets {
        if !net.pins().any(|p| p == PinRef::Module(id)) {
            continue;
        }
        let mut pts = net.pins().filter_map(|p| match p {
            PinRef::Module(m) if m == id => None,
            PinRef::Module(m) => centers[m.index()],
            PinRef::Terminal(t) => state.terminal_point(t),
        });
        let Some(first) = pts.next() else { continue };
        let (mut lo, mut hi) = (first, first);
        for p in pts {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        boxes.push((lo, hi));
    }
    boxes
}

fn outside<T: Scalar>(c: T, lo: T, hi: T) -> T {
    (lo - c).max(T::zero()) + (c - hi).max(T::zero())
}

/// HPWL increase of the nets on `id` when a `w x h` footprint is anchored
/// at each in-canvas position. The increase splits into an x part and a y
/// part, so the mask is the outer sum of two profiles.
pub fn compute_wiremask<T: Scalar>(state: &FloorplanState, id: ModuleId, footprint: (u32, u32)) -> Mask<T> {
    let (cw, ch) = (state.width(), state.height());
    let (w, h) = footprint;
    let mut mask = Mask::filled(cw, ch, None);
    if w == 0 || h == 0 || w > cw || h > ch {
        return mask;
    }
    let boxes = partner_boxes::<T>(state, id);
    let half = T::lit(0.5);
    let xs: Vec<T> = (0..=(cw - w))
        .map(|x| {
            let c = T::lit(x as f64) + T::lit(w as f64) * half;
            boxes.iter().fold(T::zero(), |acc, (lo, hi)| acc + outside(c, lo.x, hi.x))
        })
        .collect();
    let ys: Vec<T> = (0..=(ch - h))
        .map(|y| {
            let c = T::lit(y as f64) + T::lit(h as f64) * half;
            boxes.iter().fold(T::zero(), |acc, (lo, hi)| acc + outside(c, lo.y, hi.y))
        })
        .collect();
    for (y, &vy) in ys.iter().enumerate() {
        for (x, &vx) in xs.iter().enumerate() {
            mask.set(x as u32, y as u32, Some(vx + vy));
        }
    }
    mask
}

/// Footprint used for a module during legalization: its current shape when
/// that is a rectangle, otherwise the best-fit rectangle.
fn legalization_footprint(m: &ModuleRecord) -> Result<(u32, u32)> {
    match m.region.bbox() {
        Some(bb) if m.region.is_rectangle() => Ok((bb.w, bb.h)),
        _ => module_footprint(m),
    }
}

/// Other rectangles a module may take when its preferred one fits nowhere:
/// the rotation for hard blocks, every aspect-feasible covering rectangle
/// (least slack first) for soft ones.
fn alternate_footprints(m: &ModuleRecord, primary: (u32, u32)) -> Vec<(u32, u32)> {
    let mut out = match m.kind {
        ModuleKind::Hard { width, height } => vec![(width, height), (height, width)],
        ModuleKind::Soft {
            aspect_min,
            aspect_max,
        } => {
            let area = m.predefined_area;
            let mut v: Vec<(u64, u32, u32)> = Vec::new();
            let w_max = ((area as f64 / aspect_min).sqrt().ceil() as u64 + 1).min(area);
            for w in 1..=w_max {
                let lo = area.div_ceil(w).max((aspect_min * w as f64 - 1e-9).ceil() as u64);
                let hi = (aspect_max * w as f64 + 1e-9).floor() as u64;
                if lo <= hi {
                    v.push((w * lo - area, w as u32, lo as u32));
                }
            }
            v.sort_by_key(|&(slack, w, h)| (slack, w.max(h) * 1000 / w.min(h).max(1), w));
            v.into_iter().map(|(_, w, h)| (w, h)).collect()
        }
    };
    out.retain(|&f| f != primary);
    out.dedup();
    out.insert(0, primary);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TieBreak {
    /// Equal-cost anchors go to the one nearest the original position.
    Anchor,
    /// Equal-cost anchors go to the one with the most boundary contact
    /// (placed cells or canvas border), then nearest the original position.
    Packed,
}

/// Boundary cells of a footprint at `(x, y)` that touch the border or an
/// owned cell.
fn contact(s: &FloorplanState, x: u32, y: u32, (w, h): (u32, u32)) -> usize {
    let blocked = |cx: i64, cy: i64| {
        let c = Cell::new(cx as i32, cy as i32);
        s.canvas.get(c).is_none_or(|o| !o.is_empty())
    };
    let (x, y, w, h) = (x as i64, y as i64, w as i64, h as i64);
    let mut n = 0;
    for i in 0..w {
        n += blocked(x + i, y - 1) as usize + blocked(x + i, y + h) as usize;
    }
    for j in 0..h {
        n += blocked(x - 1, y + j) as usize + blocked(x + w, y + j) as usize;
    }
    n
}

type Job = (ModuleId, u64, Vec<(u32, u32)>, (i64, i64));

fn place_all(state: &FloorplanState, jobs: &[Job], tie: TieBreak) -> Result<FloorplanState> {
    let mut s = state.clone();
    for (id, _, footprints, (ox, oy)) in jobs {
        let (id, ox, oy) = (*id, *ox, *oy);
        let mut placed = None;
        for &fp in footprints {
            let pos = compute_position_mask::<f64>(&s, fp);
            if pos.feasible_count() == 0 {
                continue;
            }
            let wire = compute_wiremask::<f64>(&s, id, fp).gated_by(&pos);
            let mut lowest = f64::INFINITY;
            let mut ties: Vec<(u32, u32)> = Vec::new();
            for y in 0..s.height() {
                for x in 0..s.width() {
                    let Some(cost) = wire.get(x, y) else { continue };
                    match cost.partial_cmp(&lowest).unwrap_or(Ordering::Equal) {
                        Ordering::Less => {
                            lowest = cost;
                            ties.clear();
                            ties.push((x, y));
                        }
                        Ordering::Equal => ties.push((x, y)),
                        Ordering::Greater => {}
                    }
                }
            }
            // Ties are collected in row-major order, so `min_by_key` keeps
            // the lowest index among equal keys.
            let best = ties.iter().copied().min_by_key(|&(x, y)| {
                let d = (x as i64 - ox).pow(2) + (y as i64 - oy).pow(2);
                let c = match tie {
                    TieBreak::Anchor => 0,
                    TieBreak::Packed => contact(&s, x, y, fp),
                };
                (std::cmp::Reverse(c), d)
            });
            if let Some((x, y)) = best {
                placed = Some((x, y, fp));
                break;
            }
        }
        let Some((x, y, fp)) = placed else {
            return Err(Error::NoFeasiblePosition(s.module(id).name.clone()));
        };
        debug!("legalize: {} -> ({x}, {y}) {}x{}", s.module(id).name, fp.0, fp.1);
        s.set_region(id, Region::from_rect(Rect::new(x as i32, y as i32, fp.0, fp.1)));
    }
    s.needs_legalization = false;
    Ok(s)
}

/// Removes overlaps by re-placing every movable module, largest first, at
/// the feasible anchor minimizing (wiremask cost, squared distance from its
/// original anchor, row-major index). A module whose rectangle fits nowhere
/// tries its alternate rectangles; if the pass still fails it is rerun with
/// equal-cost anchors packed against placed cells. Legal inputs are
/// returned unchanged.
pub fn legalize(state: &FloorplanState) -> Result<FloorplanState> {
    if !state.needs_legalization && state.is_legal() {
        info!("legalization skipped: layout is legal");
        return Ok(state.clone());
    }
    let mut s = state.clone();
    s.clear_blanks();
    let mut jobs: Vec<Job> = Vec::new();
    let mut demand: u64 = 0;
    for m in s.modules.iter().filter(|m| !m.preplaced) {
        let fp = legalization_footprint(m)?;
        let (cw, ch) = (s.width() as i64, s.height() as i64);
        let anchor = match m.region.bbox() {
            Some(bb) => (bb.x as i64, bb.y as i64),
            None => ((cw - fp.0 as i64) / 2, (ch - fp.1 as i64) / 2),
        };
        demand += fp.0 as u64 * fp.1 as u64;
        jobs.push((m.id, m.predefined_area, alternate_footprints(m, fp), anchor));
    }
    let fixed: u64 = s
        .modules
        .iter()
        .filter(|m| m.preplaced)
        .map(|m| m.region.area() as u64)
        .sum();
    if demand + fixed > s.canvas.cell_count() as u64 {
        return Err(Error::InsufficientArea);
    }
    for (id, ..) in &jobs {
        s.modules[id.index()].region = Region::new();
    }
    s.rebuild_canvas();
    jobs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    match place_all(&s, &jobs, TieBreak::Anchor) {
        Err(Error::NoFeasiblePosition(name)) => {
            debug!("legalize: no room for {name}; retrying with packed tie-break");
            place_all(&s, &jobs, TieBreak::Packed)
        }
        r => r,
    }
}

/// Drops every movable module at a uniformly random anchor (overlaps
/// allowed). Deterministic in `rng`.
pub fn random_placement<R: Rng>(state: &FloorplanState, rng: &mut R) -> Result<FloorplanState> {
    let mut s = state.clone();
    s.clear_blanks();
    for i in 0..s.modules.len() {
        if s.modules[i].preplaced {
            continue;
        }
        let (w, h) = module_footprint(&s.modules[i])?;
        if w > s.width() || h > s.height() {
            return Err(Error::NoFeasiblePosition(s.modules[i].name.clone()));
        }
        let x = rng.gen_range(0..=(s.width() - w)) as i32;
        let y = rng.gen_range(0..=(s.height() - h)) as i32;
        s.modules[i].region = Region::from_rect(Rect::new(x, y, w, h));
    }
    s.rebuild_canvas();
    s.needs_legalization = true;
    Ok(s)
}

/// Random generator for trial `trial` of a seeded stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Legalizes `trials` random floorplans and keeps the one with least HPWL
/// (earliest trial on ties).
pub fn random_initial(state: &FloorplanState, trials: usize, seed: u64) -> Result<FloorplanState> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let results: Vec<(usize, Result<(f64, FloorplanState)>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let run = || -> Result<(f64, FloorplanState)> {
                let mut rng = trial_rng(seed, t as u64);
                let s = legalize(&random_placement(state, &mut rng)?)?;
                Ok((hpwl::<f64>(&s, &s.nets)?, s))
            };
            (t, run())
        })
        .collect();
    let mut best: Option<(f64, FloorplanState)> = None;
    for (t, r) in results {
        match r {
            Ok((h, s)) => {
                debug!("initial trial {t}: hpwl {h:.3}");
                if best.as_ref().is_none_or(|(bh, _)| h < *bh) {
                    best = Some((h, s));
                }
            }
            Err(e) => debug!("initial trial {t} failed: {e}"),
        }
    }
    best.map(|(_, s)| s).ok_or(Error::AllTrialsFailed(trials))
}
