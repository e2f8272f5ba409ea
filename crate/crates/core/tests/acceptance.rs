// SPDX-License-Identifier: Apache-2.0

//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Every check recomputes its expectation with code
//! that does not go through the library's own geometry or metrics.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use pinplan::bench_io::load_gsrc;
use pinplan::cli::{plan_run, refine_run, PpmSpec, RunConfig, RunReport};
use pinplan::geometry::{GridCanvas, ModuleId, Point, Rect, Region};
use pinplan::legalizer::{compute_wiremask, random_initial};
use pinplan::metrics::hpwl;
use pinplan::model::{
    BlockShape, BlockSpec, FloorplanState, NetRecord, PinRef, ProblemInstance, Terminal, DEFAULT_UTILIZATION,
};
use pinplan::pin_graph::{astar_path, beam_assign, build_resource_graph, MaskGraph, NetOutcome};
use pinplan::AssignmentResult;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUITE: [&str; 8] = ["n10", "n30", "n50", "n100", "n200", "n300", "ami33", "ami49"];
const RUNTIME_BUDGET_S: f64 = 300.0;

fn bench_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("benchmarks")
}

fn bench_paths(name: &str) -> [PathBuf; 3] {
    let d = bench_dir();
    ["blocks", "nets", "pl"].map(|e| d.join(format!("{name}.{e}")))
}

fn problem(name: &str) -> ProblemInstance {
    let [b, n, p] = bench_paths(name);
    load_gsrc(&b, &n, Some(&p)).expect("benchmark parses")
}

struct Outcome {
    name: &'static str,
    pass: bool,
}

fn report(out: &mut Vec<Outcome>, name: &'static str, failures: Vec<String>, detail: String) {
    let pass = failures.is_empty();
    let detail = if pass {
        detail
    } else {
        format!("{detail}; {}", failures.into_iter().take(5).collect::<Vec<_>>().join("; "))
    };
    let line = format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stdout(), "{line}");
    out.push(Outcome { name, pass });
}

// ---------------------------------------------------------------------------
// Independent geometry.

/// Owner grid rebuilt from module regions; records overlaps and
/// out-of-bounds cells.
fn owner_grid(s: &FloorplanState, errors: &mut Vec<String>) -> Vec<Option<usize>> {
    let (w, h) = (s.width() as i64, s.height() as i64);
    let mut grid: Vec<Option<usize>> = vec![None; (w * h) as usize];
    for (i, m) in s.modules.iter().enumerate() {
        for c in m.region.cells() {
            let (x, y) = (c.x as i64, c.y as i64);
            if x < 0 || y < 0 || x >= w || y >= h {
                errors.push(format!("{}: cell ({x},{y}) outside canvas", m.name));
                continue;
            }
            let slot = &mut grid[(y * w + x) as usize];
            if let Some(prev) = *slot {
                errors.push(format!("cell ({x},{y}) owned by {} and {}", s.modules[prev].name, m.name));
            }
            *slot = Some(i);
        }
    }
    grid
}

fn cell_set(r: &Region) -> HashSet<(i64, i64)> {
    r.cells().iter().map(|c| (c.x as i64, c.y as i64)).collect()
}

fn four_connected(cells: &HashSet<(i64, i64)>) -> bool {
    let Some(&start) = cells.iter().min() else { return false };
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((x, y)) = queue.pop_front() {
        for n in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            if cells.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == cells.len()
}

/// Outline segments counted as polygon corners: every lattice vertex whose
/// four surrounding cells hold one or three members is one corner, a
/// diagonal pair is two.
fn corner_count(cells: &HashSet<(i64, i64)>) -> usize {
    let mut vertices = HashSet::new();
    for &(x, y) in cells {
        for dx in 0..=1 {
            for dy in 0..=1 {
                vertices.insert((x + dx, y + dy));
            }
        }
    }
    let mut corners = 0;
    for (vx, vy) in vertices {
        let q = [(vx - 1, vy - 1), (vx, vy - 1), (vx - 1, vy), (vx, vy)].map(|c| cells.contains(&c));
        match q.iter().filter(|b| **b).count() {
            1 | 3 => corners += 1,
            2 if q[0] == q[3] => corners += 2,
            _ => {}
        }
    }
    corners
}

fn centroid(r: &Region) -> Point<f64> {
    let n = r.cells().len() as f64;
    let sx: f64 = r.cells().iter().map(|c| c.x as f64 + 0.5).sum();
    let sy: f64 = r.cells().iter().map(|c| c.y as f64 + 0.5).sum();
    Point::new(sx / n, sy / n)
}

fn region_of(s: &FloorplanState, id: ModuleId) -> &Region {
    if id.is_blank() {
        &s.blanks.iter().find(|b| b.id == id).expect("blank exists").region
    } else {
        &s.module(id).region
    }
}

/// Full legality check of a zero-whitespace floorplan.
fn validate_layout(s: &FloorplanState, avr_max: f64, seg_max: usize) -> Vec<String> {
    let mut errors = Vec::new();
    let grid = owner_grid(s, &mut errors);
    let empty = grid.iter().filter(|o| o.is_none()).count();
    if empty > 0 {
        errors.push(format!("{empty} empty cells"));
    }
    for m in &s.modules {
        let cells = cell_set(&m.region);
        if !four_connected(&cells) {
            errors.push(format!("{} not 4-connected", m.name));
        }
        let segs = corner_count(&cells);
        if segs > seg_max {
            errors.push(format!("{} has {segs} segments", m.name));
        }
        let a = m.predefined_area as f64;
        let avr = (a - cells.len() as f64) / a;
        if !m.preplaced && avr > avr_max {
            errors.push(format!("{} AVR {avr:.4}", m.name));
        }
    }
    errors
}

// ---------------------------------------------------------------------------
// Independent metrics.

fn hpwl_oracle(s: &FloorplanState) -> f64 {
    let mut total = 0.0;
    for net in &s.nets {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for p in net.pins() {
            let pt = match p {
                PinRef::Module(id) => Some(centroid(&s.module(id).region)),
                PinRef::Terminal(t) => s.terminal_point::<f64>(t),
            };
            if let Some(pt) = pt {
                xs.push(pt.x);
                ys.push(pt.y);
            }
        }
        if xs.is_empty() {
            continue;
        }
        let span = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        total += span(&xs) + span(&ys);
    }
    total
}

fn feedthrough_errors(s: &FloorplanState, a: &AssignmentResult) -> Vec<String> {
    let mut errors = Vec::new();
    let (mut len_sum, mut num_sum, mut count) = (0.0, 0.0, 0usize);
    for (net, o) in a.outcomes.iter().enumerate() {
        if let NetOutcome::Feedthrough { path, ft_len, ft_num, .. } = o {
            if *ft_num != path.len() - 2 {
                errors.push(format!("net {net}: ft_num {ft_num} for path of {}", path.len()));
            }
            let expect: f64 = path
                .windows(2)
                .map(|w| {
                    let (p, q) = (centroid(region_of(s, w[0])), centroid(region_of(s, w[1])));
                    ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
                })
                .sum();
            if (ft_len - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                errors.push(format!("net {net}: ft_len {ft_len} vs {expect}"));
            }
            len_sum += ft_len;
            num_sum += *ft_num as f64;
            count += 1;
        }
    }
    if count > 0 {
        let (ml, mn) = (len_sum / count as f64, num_sum / count as f64);
        if (a.ft_len - ml).abs() > 1e-9 * ml.max(1.0) || (a.ft_num - mn).abs() > 1e-9 * mn.max(1.0) {
            errors.push(format!("aggregates {}/{} vs {ml}/{mn}", a.ft_len, a.ft_num));
        }
    }
    errors
}

/// Pins checked against the owner grid: each pin sits inside a boundary
/// between its two modules, pins of one pair on one boundary line are at
/// least `u` apart, and no position is used twice.
fn pin_errors(s: &FloorplanState, a: &AssignmentResult, u: u32) -> (Vec<String>, usize) {
    let mut errors = Vec::new();
    let mut sink = Vec::new();
    let grid = owner_grid(s, &mut sink);
    let w = s.width() as i64;
    let h = s.height() as i64;
    let owner = |x: i64, y: i64| -> Option<usize> {
        (x >= 0 && y >= 0 && x < w && y < h).then(|| grid[(y * w + x) as usize]).flatten()
    };
    let mut lines: BTreeMap<(usize, usize, u8, i64), Vec<i64>> = BTreeMap::new();
    let mut used: HashSet<(usize, usize, i64, i64)> = HashSet::new();
    let mut total = 0;
    for (net, o) in a.outcomes.iter().enumerate() {
        for p in o.pins() {
            total += 1;
            let (ia, ib) = (p.a.index(), p.b.index());
            let pair = (ia.min(ib), ia.max(ib));
            if !used.insert((pair.0, pair.1, p.x2, p.y2)) {
                errors.push(format!("net {net}: slot ({},{}) reused", p.x2, p.y2));
            }
            let want = HashSet::from([ia, ib]);
            // Horizontal boundary: y2 = 2*line, cells below and above.
            let horiz = p.y2 % 2 == 0 && {
                let (cx, line) = (p.x2.div_euclid(2), p.y2 / 2);
                let got: HashSet<usize> = [owner(cx, line - 1), owner(cx, line)].into_iter().flatten().collect();
                got == want
            };
            let vert = p.x2 % 2 == 0 && {
                let (cy, line) = (p.y2.div_euclid(2), p.x2 / 2);
                let got: HashSet<usize> = [owner(line - 1, cy), owner(line, cy)].into_iter().flatten().collect();
                got == want
            };
            match (horiz, vert) {
                (true, _) => lines.entry((pair.0, pair.1, 0, p.y2)).or_default().push(p.x2),
                (_, true) => lines.entry((pair.0, pair.1, 1, p.x2)).or_default().push(p.y2),
                _ => errors.push(format!("net {net}: pin ({},{}) not on a {ia}/{ib} boundary", p.x2, p.y2)),
            }
        }
    }
    for ((pa, pb, _, _), mut pos) in lines {
        pos.sort_unstable();
        for w in pos.windows(2) {
            if w[1] - w[0] < 2 * u as i64 {
                errors.push(format!("pair {pa}/{pb}: pins {} half-cells apart, pitch {u}", w[1] - w[0]));
            }
        }
    }
    (errors, total)
}

// ---------------------------------------------------------------------------
// Fixtures.

fn soft(name: String, area: f64) -> BlockSpec {
    BlockSpec {
        name,
        shape: BlockShape::Soft {
            area,
            aspect_min: 0.5,
            aspect_max: 2.0,
        },
    }
}

fn synthetic_problem(rng: &mut ChaCha8Rng, modules: usize, nets: usize, n_terminals: usize, side: f64) -> ProblemInstance {
    let blocks = (0..modules).map(|i| soft(format!("m{i}"), rng.gen_range(4..40) as f64)).collect();
    let terminals = (0..n_terminals)
        .map(|i| Terminal {
            name: format!("t{i}"),
            position: Some((rng.gen_range(0.0..side), rng.gen_range(0.0..side))),
        })
        .collect();
    let mut nl = Vec::new();
    for id in 0..nets {
        let k = rng.gen_range(2..=4);
        let mut pins: Vec<PinRef> = Vec::new();
        while pins.len() < k {
            let p = if n_terminals > 0 && terminals_len(&pins) < 1 && rng.gen_bool(0.2) {
                PinRef::Terminal(rng.gen_range(0..n_terminals) as u32)
            } else {
                PinRef::Module(ModuleId(rng.gen_range(0..modules) as u32))
            };
            if !pins.contains(&p) {
                pins.push(p);
            }
        }
        nl.push(NetRecord::new(id, pins[0], pins[1..].to_vec()));
    }
    ProblemInstance {
        name: "synthetic".into(),
        blocks,
        terminals,
        nets: nl,
        block_positions: vec![None; modules],
    }
}

fn terminals_len(pins: &[PinRef]) -> usize {
    pins.iter().filter(|p| matches!(p, PinRef::Terminal(_))).count()
}

// ---------------------------------------------------------------------------
// Criteria.

struct Runs {
    n10: Vec<RunReport>,
    n30: Vec<RunReport>,
    n10_start: Vec<RunReport>,
    others: Vec<RunReport>,
    ppm: RunReport,
}

fn run_all() -> Runs {
    let cfg = RunConfig::default();
    let mut n10 = Vec::new();
    let mut n30 = Vec::new();
    for seed in 0..5 {
        n10.push(plan_run(&problem("n10"), &cfg, seed).expect("n10 plan"));
        n30.push(plan_run(&problem("n30"), &cfg, seed).expect("n30 plan"));
    }
    let others = SUITE[2..]
        .iter()
        .map(|n| plan_run(&problem(n), &cfg, 0).unwrap_or_else(|e| panic!("{n}: {e}")))
        .collect();
    let ppm_cfg = RunConfig {
        ppm: Some(PpmSpec::Fraction(0.3)),
        ..RunConfig::default()
    };
    let ppm = plan_run(&problem("n30"), &ppm_cfg, 7).expect("ppm plan");
    // Refine from an explicitly random-legalized baseline.
    let p = problem("n10");
    let n10_start = (0..5)
        .map(|seed| {
            let blank = FloorplanState::from_problem(&p, cfg.grid, cfg.grid, DEFAULT_UTILIZATION).unwrap();
            let base = random_initial(&blank, cfg.trials, seed).unwrap();
            refine_run(&base, &cfg, seed).unwrap()
        })
        .collect();
    Runs {
        n10,
        n30,
        n10_start,
        others,
        ppm,
    }
}

fn all_reports(r: &Runs) -> impl Iterator<Item = &RunReport> {
    r.n10.iter().chain(&r.n30).chain(&r.n10_start).chain(&r.others).chain(std::iter::once(&r.ppm))
}

fn legality(out: &mut Vec<Outcome>, r: &Runs) {
    let cfg = RunConfig::default();
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    let firsts = [&r.n10[0], &r.n30[0]].into_iter().chain(&r.others);
    for rep in firsts.chain(std::iter::once(&r.ppm)) {
        let errs = validate_layout(&rep.state, cfg.sa.avr_threshold, cfg.sa.max_edge_segments);
        failures.extend(errs.into_iter().map(|e| format!("{}: {e}", rep.state.name)));
        if rep.runtime_s >= RUNTIME_BUDGET_S {
            failures.push(format!("{} took {:.1}s", rep.state.name, rep.runtime_s));
        }
        notes.push(format!("{} {:.1}s", rep.state.name, rep.runtime_s));
    }
    if r.ppm.ppm.is_empty() {
        failures.push("no pre-placed modules selected".into());
    }
    for &id in &r.ppm.ppm {
        if r.ppm.state.module(id).region != r.ppm.start.module(id).region {
            failures.push(format!("pre-placed {} moved", r.ppm.state.module(id).name));
        }
    }
    report(
        out,
        "legality suite",
        failures,
        format!("8 instances + ppm run ({} fixed modules); {}", r.ppm.ppm.len(), notes.join(", ")),
    );
}

fn dijkstra(mask: &MaskGraph<f64>, src: usize, dst: usize) -> Option<f64> {
    let n = mask.centers.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|&i| !done[i]).min_by(|&a, &b| dist[a].total_cmp(&dist[b]))?;
        if dist[u].is_infinite() {
            break;
        }
        done[u] = true;
        for &(v, w) in &mask.adjacency[u] {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
            }
        }
    }
    dist[dst].is_finite().then_some(dist[dst])
}

fn oracle_equivalence(out: &mut Vec<Outcome>) {
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=20);
        let centers: Vec<Point<f64>> =
            (0..n).map(|_| Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0))).collect();
        let p = rng.gen_range(0.1..0.5);
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.gen_bool(p))
            .collect();
        let mask = MaskGraph::from_edges(centers, &edges);
        let (src, dst) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let path = astar_path(&mask, ModuleId(src as u32), ModuleId(dst as u32)).expect("valid nodes");
        let cost = path.as_ref().map(|p| {
            p.windows(2)
                .map(|w| mask.weight(w[0], w[1]).expect("path follows edges"))
                .sum::<f64>()
        });
        let expect = dijkstra(&mask, src, dst);
        if cost != expect {
            failures.push(format!("graph {seed}: A* {cost:?} vs Dijkstra {expect:?}"));
        }
    }
    let u = 2;
    let mut chains_checked = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.gen_range(3..=6);
        let widths: Vec<u32> = (0..n).map(|_| rng.gen_range(2..6)).collect();
        let heights: Vec<u32> = (0..n).map(|_| rng.gen_range(2..8)).collect();
        let areas: Vec<f64> = widths.iter().zip(&heights).map(|(w, h)| (w * h) as f64).collect();
        let p = ProblemInstance {
            name: "chain".into(),
            blocks: areas.iter().enumerate().map(|(i, &a)| soft(format!("c{i}"), a)).collect(),
            nets: vec![NetRecord::new(0, PinRef::Module(ModuleId(0)), vec![PinRef::Module(ModuleId(n as u32 - 1))])],
            block_positions: vec![None; n],
            ..Default::default()
        };
        let canvas = GridCanvas::new(widths.iter().sum(), *heights.iter().max().unwrap()).unwrap();
        let mut s = FloorplanState::with_scale(&p, canvas, 1.0).unwrap();
        let mut x = 0;
        for i in 0..n {
            s.set_region(ModuleId(i as u32), Region::from_rect(Rect::new(x, 0, widths[i], heights[i])));
            x += widths[i] as i32;
        }
        let g = build_resource_graph::<f64>(&s, u).unwrap();
        let path: Vec<ModuleId> = (0..n as u32).map(ModuleId).collect();
        let slot_sets: Vec<Vec<Point<f64>>> = path
            .windows(2)
            .map(|w| {
                g.edge(w[0], w[1])
                    .expect("consecutive modules touch")
                    .slots
                    .iter()
                    .map(|&(x2, y2)| Point::new(x2 as f64 / 2.0, y2 as f64 / 2.0))
                    .collect()
            })
            .collect();
        let src = centroid(&s.module(path[0]).region);
        let dst = centroid(&s.module(path[n - 1]).region);
        let chain_cost = |pts: &[Point<f64>]| {
            let mut c = 0.0;
            let mut prev = src;
            for &q in pts.iter().chain(std::iter::once(&dst)) {
                c += ((q.x - prev.x).powi(2) + (q.y - prev.y).powi(2)).sqrt();
                prev = q;
            }
            c
        };
        let count: usize = slot_sets.iter().map(|v| v.len()).product();
        let mut best = f64::INFINITY;
        for mut code in 0..count {
            let mut pick = Vec::new();
            for set in &slot_sets {
                pick.push(set[code % set.len()]);
                code /= set.len();
            }
            best = best.min(chain_cost(&pick));
        }
        let mut g2 = g.clone();
        let pins = beam_assign(&mut g2, &path, count).expect("chain has capacity");
        let got = chain_cost(&pins.iter().map(|p| p.point::<f64>()).collect::<Vec<_>>());
        chains_checked += 1;
        if got != best {
            failures.push(format!("chain {seed}: beam {got} vs exhaustive {best}"));
        }
    }
    report(
        out,
        "oracle equivalence",
        failures,
        format!("100 A*/Dijkstra graphs, {chains_checked} beam/exhaustive chains, exact"),
    );
}

fn metric_arithmetic(out: &mut Vec<Outcome>, r: &Runs) {
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let m = rng.gen_range(4..10);
        let p = synthetic_problem(&mut rng, m, 12, 3, 30.0);
        let blank = FloorplanState::from_problem(&p, 30, 30, 0.6).unwrap();
        let s = random_initial(&blank, 1, seed).unwrap();
        let got = hpwl::<f64>(&s, &s.nets).unwrap();
        let expect = hpwl_oracle(&s);
        if got != expect {
            failures.push(format!("layout {seed}: hpwl {got} vs {expect}"));
        }
    }
    let mut nets = 0;
    for rep in all_reports(r) {
        let a = &rep.evaluation.assignment;
        nets += a.feedthrough_count();
        failures.extend(feedthrough_errors(&rep.state, a).into_iter().map(|e| format!("{}: {e}", rep.state.name)));
        let h = hpwl_oracle(&rep.state);
        if rep.evaluation.metrics.hpwl != h {
            failures.push(format!("{}: reported hpwl {} vs {h}", rep.state.name, rep.evaluation.metrics.hpwl));
        }
    }
    report(
        out,
        "metric arithmetic",
        failures,
        format!("20 random layouts exact; {nets} feedthrough nets rechecked"),
    );
}

fn pin_spacing(out: &mut Vec<Outcome>, r: &Runs) {
    let mut failures = Vec::new();
    let mut pins = 0;
    let mut layouts = 0;
    for rep in all_reports(r) {
        let (errs, n) = pin_errors(&rep.state, &rep.evaluation.assignment, rep.u);
        pins += n;
        layouts += 1;
        failures.extend(errs.into_iter().map(|e| format!("{}: {e}", rep.state.name)));
    }
    report(out, "pin spacing", failures, format!("{pins} pins on {layouts} layouts"));
}

fn wiremask(out: &mut Vec<Outcome>) {
    let rects = [
        Rect::new(0, 0, 3, 3),
        Rect::new(8, 0, 4, 2),
        Rect::new(0, 8, 2, 4),
        Rect::new(6, 6, 3, 3),
    ];
    let mut blocks: Vec<BlockSpec> = rects.iter().enumerate().map(|(i, r)| soft(format!("m{i}"), (r.w * r.h) as f64)).collect();
    blocks.push(soft("m4".into(), 6.0));
    blocks.push(soft("m5".into(), 4.0));
    let m = |i: u32| PinRef::Module(ModuleId(i));
    let nets = vec![
        NetRecord::new(0, m(4), vec![m(0)]),
        NetRecord::new(1, m(4), vec![m(1), m(2)]),
        NetRecord::new(2, m(3), vec![m(4)]),
        NetRecord::new(3, m(4), vec![m(5)]),
        NetRecord::new(4, m(0), vec![m(1), m(3)]),
        NetRecord::new(5, m(4), vec![PinRef::Terminal(0)]),
        NetRecord::new(6, m(2), vec![m(4), m(5), m(3)]),
        NetRecord::new(7, m(5), vec![m(1)]),
    ];
    let p = ProblemInstance {
        name: "wiremask".into(),
        blocks,
        terminals: vec![Terminal {
            name: "t0".into(),
            position: Some((11.5, 10.0)),
        }],
        nets,
        block_positions: vec![None; 6],
    };
    let mut s = FloorplanState::with_scale(&p, GridCanvas::new(12, 12).unwrap(), 1.0).unwrap();
    for (i, r) in rects.iter().enumerate() {
        s.set_region(ModuleId(i as u32), Region::from_rect(*r));
    }
    let target = ModuleId(4);
    let fp = (3, 2);
    let mask = compute_wiremask::<f64>(&s, target, fp);
    // HPWL of nets on the target, unplaced endpoints left out.
    let incident = |st: &FloorplanState| -> f64 {
        st.nets
            .iter()
            .filter(|n| n.pins().any(|q| q == PinRef::Module(target)))
            .map(|n| {
                let pts: Vec<Point<f64>> = n
                    .pins()
                    .filter_map(|q| match q {
                        PinRef::Module(id) if !st.module(id).region.is_empty() => Some(centroid(&st.module(id).region)),
                        PinRef::Module(_) => None,
                        PinRef::Terminal(t) => st.terminal_point(t),
                    })
                    .collect();
                if pts.is_empty() {
                    return 0.0;
                }
                let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
                for q in pts {
                    x0 = x0.min(q.x);
                    x1 = x1.max(q.x);
                    y0 = y0.min(q.y);
                    y1 = y1.max(q.y);
                }
                (x1 - x0) + (y1 - y0)
            })
            .sum()
    };
    let before = incident(&s);
    let mut failures = Vec::new();
    let mut anchors = 0;
    for y in 0..=(12 - fp.1) {
        for x in 0..=(12 - fp.0) {
            let mut t = s.clone();
            t.modules[target.index()].region = Region::from_rect(Rect::new(x as i32, y as i32, fp.0, fp.1));
            let expect = incident(&t) - before;
            anchors += 1;
            if mask.get(x, y) != Some(expect) {
                failures.push(format!("anchor ({x},{y}): {:?} vs {expect}", mask.get(x, y)));
            }
        }
    }
    report(out, "wiremask correctness", failures, format!("{anchors} anchors on 12x12, 6 modules, 8 nets"));
}

fn improvement(out: &mut Vec<Outcome>, r: &Runs) {
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for (name, reps) in [("n10", &r.n10_start), ("n30", &r.n30)] {
        for rep in reps.iter() {
            if rep.evaluation.objective > rep.start_objective {
                failures.push(format!(
                    "{name} seed {}: objective {:.3} > initial {:.3}",
                    rep.seed, rep.evaluation.objective, rep.start_objective
                ));
            }
        }
        let n = reps.len() as f64;
        let before = reps.iter().map(|r| r.start_metrics.unplaced as f64).sum::<f64>() / n;
        let after = reps.iter().map(|r| r.evaluation.metrics.unplaced as f64).sum::<f64>() / n;
        let obj0 = reps.iter().map(|r| r.start_objective).sum::<f64>() / n;
        let obj1 = reps.iter().map(|r| r.evaluation.objective).sum::<f64>() / n;
        notes.push(format!(
            "{name}: objective {obj0:.1} -> {obj1:.1}, mean unplaced {before:.1} -> {after:.1}"
        ));
        if after >= before {
            failures.push(format!("{name}: mean unplaced did not decrease ({before:.1} -> {after:.1})"));
        }
    }
    report(out, "improvement property", failures, notes.join("; "));
}

fn magnitude(out: &mut Vec<Outcome>, r: &Runs) {
    let n = r.n10.len() as f64;
    let ftnum = r.n10.iter().map(|x| x.evaluation.metrics.ft_num).sum::<f64>() / n;
    let unplaced = r.n10.iter().map(|x| x.evaluation.metrics.unplaced as f64).sum::<f64>() / n;
    let ftlen = r.n10.iter().map(|x| x.evaluation.metrics.ft_len).sum::<f64>() / n;
    let hp = r.n10.iter().map(|x| x.evaluation.metrics.hpwl).sum::<f64>() / n;
    let mut failures = Vec::new();
    if !(0.5..=3.0).contains(&ftnum) {
        failures.push(format!("mean FTnum {ftnum:.3} outside [0.5, 3.0]"));
    }
    if unplaced > 10.0 {
        failures.push(format!("mean Unplacepin {unplaced:.2} > 10"));
    }
    report(
        out,
        "desk-scale magnitude",
        failures,
        format!("n10, 5 seeds: FTnum {ftnum:.3}, Unplacepin {unplaced:.2}, FTlen {ftlen:.3}, HPWL {hp:.1}"),
    );
}

fn run_cli(out_dir: &Path, extra: &[&str]) -> std::process::Output {
    let [b, n, p] = bench_paths("n10");
    Command::new(env!("CARGO_BIN_EXE_pinplan"))
        .arg("plan")
        .arg("--blocks")
        .arg(b)
        .arg("--nets")
        .arg(n)
        .arg("--pl")
        .arg(p)
        .arg("--out")
        .arg(out_dir)
        .args(extra)
        .env("PIANO_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn determinism_and_schedule(out: &mut Vec<Outcome>, r: &Runs) {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let flags = ["--seed", "3", "--reproducible"];
    let ra = run_cli(&a, &flags);
    let rb = run_cli(&b, &flags);
    let mut failures = Vec::new();
    for (dir, res) in [(&a, &ra), (&b, &rb)] {
        if !res.status.success() {
            failures.push(format!("{} exited {:?}: {}", dir.display(), res.status.code(), String::from_utf8_lossy(&res.stderr)));
        }
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap_or_default();
    for f in ["layout.json", "metrics.csv", "anneal.csv"] {
        let (x, y) = (read(&a, f), read(&b, f));
        if x.is_empty() || x != y {
            failures.push(format!("{f} differs between runs"));
        }
    }
    report(
        out,
        "determinism",
        failures,
        "two `plan --seed 3` runs on n10 compared byte for byte".into(),
    );

    let anneal = String::from_utf8(read(&a, "anneal.csv")).unwrap_or_default();
    let rows = anneal.lines().skip(1).filter(|l| !l.is_empty()).count();
    let mut failures = Vec::new();
    if rows != 88 {
        failures.push(format!("anneal.csv has {rows} levels"));
    }
    for rep in &r.n10 {
        if rep.levels.len() != 88 {
            failures.push(format!("n10 seed {}: {} levels", rep.seed, rep.levels.len()));
        }
    }
    report(out, "annealing schedule", failures, format!("{rows} temperature levels logged"));
}

fn main() {
    // `cargo test` passes harness flags; a name filter that matches nothing
    // here skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let clock = Instant::now();
    let mut out = Vec::new();
    oracle_equivalence(&mut out);
    wiremask(&mut out);
    let runs = run_all();
    legality(&mut out, &runs);
    metric_arithmetic(&mut out, &runs);
    pin_spacing(&mut out, &runs);
    improvement(&mut out, &runs);
    magnitude(&mut out, &runs);
    determinism_and_schedule(&mut out, &runs);
    let failed: Vec<&str> = out.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    let _ = writeln!(
        std::io::stdout(),
        "acceptance: {}/{} criteria passed in {:.1}s",
        out.len() - failed.len(),
        out.len(),
        clock.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        let _ = writeln!(std::io::stdout(), "failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
