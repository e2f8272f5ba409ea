// SPDX-License-Identifier: Apache-2.0

//! Benchmark parsing (GSRC `.blocks` / `.nets` / `.pl`), the JSON layout
//! document, SVG rendering and CSV reports.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{outline_segments, Axis, Cell, GridCanvas, ModuleId, Point, Region};
use crate::metrics::{max_avr, max_regularity, MetricSet};
use crate::model::{BlockShape, BlockSpec, FloorplanState, NetRecord, PinRef, ProblemInstance, Terminal};
use crate::optimizer::LevelRecord;
use crate::pin_graph::{AssignmentResult, NetOutcome};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Significant lines with their 1-based numbers; comments and format
/// banners are dropped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        let banner = line.starts_with("UCSC") || line.starts_with("UCLA");
        (!line.is_empty() && !banner).then_some((i + 1, line))
    })
}

fn num(file: &str, line: usize, tok: Option<&str>, what: &str) -> Result<f64> {
    let tok = tok.ok_or_else(|| Error::parse(file, line, format!("missing {what}")))?;
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(file, line, format!("bad {what} `{tok}`")))
}

fn header_value(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once(':')?;
    Some((k.trim(), v.trim()))
}

/// Parses GSRC floorplanning text. The first pin of each net is taken as
/// its driver.
pub fn parse_gsrc(name: &str, blocks: &str, nets: &str, pl: Option<&str>) -> Result<ProblemInstance> {
    let bfile = format!("{name}.blocks");
    let mut p = ProblemInstance {
        name: name.to_string(),
        ..Default::default()
    };
    let mut names: HashMap<String, PinRef> = HashMap::new();
    for (ln, line) in content_lines(blocks) {
        if line.starts_with("Num") {
            continue;
        }
        let mut toks = line.split_whitespace();
        let bname = toks.next().expect("non-empty line").to_string();
        let kind = toks
            .next()
            .ok_or_else(|| Error::parse(&bfile, ln, "missing block type"))?;
        let pin = match kind {
            "softrectangular" => {
                let area = num(&bfile, ln, toks.next(), "area")?;
                let aspect_min = num(&bfile, ln, toks.next(), "minimum aspect ratio")?;
                let aspect_max = num(&bfile, ln, toks.next(), "maximum aspect ratio")?;
                if area <= 0.0 || aspect_min <= 0.0 || aspect_min > aspect_max {
                    return Err(Error::parse(&bfile, ln, "invalid soft block dimensions"));
                }
                p.blocks.push(BlockSpec {
                    name: bname.clone(),
                    shape: BlockShape::Soft {
                        area,
                        aspect_min,
                        aspect_max,
                    },
                });
                PinRef::Module(ModuleId(p.blocks.len() as u32 - 1))
            }
            "hardrectilinear" => {
                let count = num(&bfile, ln, toks.next(), "vertex count")? as usize;
                let rest: String = toks.collect::<Vec<_>>().join(" ");
                let coords: Vec<f64> = rest
                    .split(|c: char| c == '(' || c == ')' || c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| num(&bfile, ln, Some(t), "vertex coordinate"))
                    .collect::<Result<_>>()?;
                if count != 4 || coords.len() != 8 {
                    return Err(Error::parse(&bfile, ln, "only four-vertex hard blocks are supported"));
                }
                let span = |off: usize| {
                    let (lo, hi) = coords
                        .iter()
                        .skip(off)
                        .step_by(2)
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                    hi - lo
                };
                let (width, height) = (span(0), span(1));
                if width <= 0.0 || height <= 0.0 {
                    return Err(Error::parse(&bfile, ln, "degenerate hard block"));
                }
                p.blocks.push(BlockSpec {
                    name: bname.clone(),
                    shape: BlockShape::Hard { width, height },
                });
                PinRef::Module(ModuleId(p.blocks.len() as u32 - 1))
            }
            "terminal" => {
                p.terminals.push(Terminal {
                    name: bname.clone(),
                    position: None,
                });
                PinRef::Terminal(p.terminals.len() as u32 - 1)
            }
            other => return Err(Error::parse(&bfile, ln, format!("unknown block type `{other}`"))),
        };
        if names.insert(bname.clone(), pin).is_some() {
            return Err(Error::parse(&bfile, ln, format!("duplicate name `{bname}`")));
        }
    }
    p.block_positions = vec![None; p.blocks.len()];

    let nfile = format!("{name}.nets");
    let mut lines = content_lines(nets).peekable();
    while let Some((ln, line)) = lines.next() {
        let Some((key, value)) = header_value(line) else {
            return Err(Error::parse(&nfile, ln, format!("expected `NetDegree`, found `{line}`")));
        };
        if key != "NetDegree" {
            if key.starts_with("Num") {
                continue;
            }
            return Err(Error::parse(&nfile, ln, format!("unexpected header `{key}`")));
        }
        let degree: usize = value
            .split_whitespace()
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(&nfile, ln, "bad net degree"))?;
        let id = p.nets.len();
        let mut pins = Vec::with_capacity(degree);
        for _ in 0..degree {
            let (pl_ln, pin_line) = match lines.peek() {
                Some((_, l)) if !l.starts_with("NetDegree") => lines.next().expect("peeked"),
                _ => return Err(Error::parse(&nfile, ln, format!("net {id} lists fewer than {degree} pins"))),
            };
            let pname = pin_line.split_whitespace().next().expect("non-empty line");
            let pin = names.get(pname).copied().ok_or_else(|| Error::DanglingEndpoint {
                net: id,
                endpoint: pname.to_string(),
            })?;
            let _ = pl_ln;
            pins.push(pin);
        }
        let mut pins = pins.into_iter();
        match pins.next() {
            Some(driver) => p.nets.push(NetRecord::new(id, driver, pins.collect())),
            None => warn!("{nfile}:{ln}: net with no pins ignored"),
        }
    }

    if let Some(pl) = pl {
        let pfile = format!("{name}.pl");
        for (ln, line) in content_lines(pl) {
            let mut toks = line.split_whitespace();
            let pname = toks.next().expect("non-empty line");
            let x = num(&pfile, ln, toks.next(), "x coordinate")?;
            let y = num(&pfile, ln, toks.next(), "y coordinate")?;
            match names.get(pname) {
                Some(PinRef::Terminal(t)) => p.terminals[*t as usize].position = Some((x, y)),
                Some(PinRef::Module(m)) => p.block_positions[m.index()] = Some((x, y)),
                None => warn!("{pfile}:{ln}: unknown name `{pname}` ignored"),
            }
        }
    }
    let loose = p.terminals.iter().filter(|t| t.position.is_none()).count();
    if loose > 0 {
        warn!("{name}: {loose} of {} terminals have no position and are left out of HPWL", p.terminals.len());
    } else {
        info!("{name}: {} terminals with positions enter HPWL", p.terminals.len());
    }
    Ok(p)
}

/// Reads `<stem>.blocks`, `<stem>.nets` and, when present, `<stem>.pl`
/// from explicit paths.
pub fn load_gsrc(blocks: &Path, nets: &Path, pl: Option<&Path>) -> Result<ProblemInstance> {
    let name = blocks
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let b = read_text(blocks)?;
    let n = read_text(nets)?;
    let p = pl.map(read_text).transpose()?;
    parse_gsrc(&name, &b, &n, p.as_deref())
}

fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleEntry {
    pub name: String,
    pub area: u64,
    #[serde(default)]
    pub preplaced: bool,
    /// Row runs `[y, x0, length]`.
    pub rows: Vec<[i32; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinEntry {
    pub net: usize,
    pub modules: [String; 2],
    /// Position on the half-cell lattice (coordinates doubled).
    pub x2: i64,
    pub y2: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub hpwl: f64,
    pub ft_len: f64,
    pub ft_num: f64,
    pub unplaced: usize,
    pub whitespace_ratio: f64,
    pub max_avr: f64,
    pub max_segments: usize,
}

impl MetricsBlock {
    pub fn new(state: &FloorplanState, m: &MetricSet<f64>) -> Self {
        let avr = max_avr(state);
        MetricsBlock {
            hpwl: round6(m.hpwl),
            ft_len: round6(m.ft_len),
            ft_num: round6(m.ft_num),
            unplaced: m.unplaced,
            whitespace_ratio: round6(state.whitespace_ratio()),
            max_avr: if avr.is_finite() { round6(avr) } else { 0.0 },
            max_segments: max_regularity(state),
        }
    }
}

pub const LAYOUT_FORMAT: &str = "pinplan-layout/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub format: String,
    pub instance: String,
    pub grid: GridDims,
    /// Benchmark units per cell edge.
    pub scale: f64,
    pub modules: Vec<ModuleEntry>,
    #[serde(default)]
    pub pins: Vec<PinEntry>,
    #[serde(default)]
    pub metrics: Option<MetricsBlock>,
}

fn encode_rows(region: &Region) -> Vec<[i32; 3]> {
    let mut rows: Vec<[i32; 3]> = Vec::new();
    for c in region.cells() {
        match rows.last_mut() {
            Some(r) if r[0] == c.y && r[1] + r[2] == c.x => r[2] += 1,
            _ => rows.push([c.y, c.x, 1]),
        }
    }
    rows
}

fn pin_module_name(state: &FloorplanState, id: ModuleId) -> String {
    if id.is_blank() {
        format!("~blank{}", id.index())
    } else {
        state.module(id).name.clone()
    }
}

impl LayoutDocument {
    pub fn from_state(
        state: &FloorplanState,
        assignment: Option<&AssignmentResult<f64>>,
        metrics: Option<MetricsBlock>,
    ) -> Self {
        let mut pins = Vec::new();
        if let Some(a) = assignment {
            for (net, o) in a.outcomes.iter().enumerate() {
                for p in o.pins() {
                    pins.push(PinEntry {
                        net,
                        modules: [pin_module_name(state, p.a), pin_module_name(state, p.b)],
                        x2: p.x2,
                        y2: p.y2,
                    });
                }
            }
        }
        LayoutDocument {
            format: LAYOUT_FORMAT.into(),
            instance: state.name.clone(),
            grid: GridDims {
                width: state.width(),
                height: state.height(),
            },
            scale: state.scale,
            modules: state
                .modules
                .iter()
                .map(|m| ModuleEntry {
                    name: m.name.clone(),
                    area: m.predefined_area,
                    preplaced: m.preplaced,
                    rows: encode_rows(&m.region),
                })
                .collect(),
            pins,
            metrics,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("layout serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LayoutDocument = serde_json::from_str(text)?;
        if doc.format != LAYOUT_FORMAT {
            return Err(Error::Layout(format!("unsupported format `{}`", doc.format)));
        }
        Ok(doc)
    }

    /// Rebuilds a floorplan for `problem`. Overlapping or missing regions
    /// are accepted and flag the state for legalization.
    pub fn to_state(&self, problem: &ProblemInstance) -> Result<FloorplanState> {
        let canvas = GridCanvas::new(self.grid.width, self.grid.height)?;
        let mut s = FloorplanState::with_scale(problem, canvas, self.scale)?;
        let mut seen = vec![false; s.modules.len()];
        for entry in &self.modules {
            let idx = problem
                .module_index(&entry.name)
                .ok_or_else(|| Error::UnknownModule(entry.name.clone()))?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::Layout(format!("module {} listed twice", entry.name)));
            }
            let mut cells = Vec::new();
            for &[y, x0, len] in &entry.rows {
                if len <= 0 {
                    return Err(Error::Layout(format!("empty row run in module {}", entry.name)));
                }
                for x in x0..x0 + len {
                    let c = Cell::new(x, y);
                    if !s.canvas.in_bounds(c) {
                        return Err(Error::Layout(format!(
                            "cell ({x}, {y}) of module {} outside the {}x{} grid",
                            entry.name, self.grid.width, self.grid.height
                        )));
                    }
                    cells.push(c);
                }
            }
            s.modules[idx].region = Region::from_cells(cells);
            s.modules[idx].preplaced = entry.preplaced;
        }
        let overlap = s.rebuild_canvas();
        s.needs_legalization = overlap || seen.iter().any(|v| !v);
        Ok(s)
    }
}

pub fn save_layout(
    state: &FloorplanState,
    assignment: Option<&AssignmentResult<f64>>,
    metrics: Option<MetricsBlock>,
) -> String {
    LayoutDocument::from_state(state, assignment, metrics).to_json()
}

pub fn load_layout(json: &str, problem: &ProblemInstance) -> Result<FloorplanState> {
    LayoutDocument::from_json(json)?.to_state(problem)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvgOptions {
    /// Pixels per cell edge.
    pub cell_px: f64,
    /// Restrict pins and feedthrough paths to nets touching this module.
    pub filter_module: Option<ModuleId>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            cell_px: 4.0,
            filter_module: None,
        }
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Red shade for a feedthrough depth: deeper paths are darker.
fn depth_color(ft_num: usize, deepest: usize) -> String {
    let t = if deepest <= 1 {
        1.0
    } else {
        (ft_num.saturating_sub(1)) as f64 / (deepest - 1) as f64
    };
    let light = (230.0 * (1.0 - t) + 90.0 * t).round() as u8;
    let base = (255.0 * (1.0 - t) + 120.0 * t).round() as u8;
    format!("#{base:02x}{:02x}{:02x}", light / 3, light / 3)
}

/// SVG drawing of module regions, pins and feedthrough paths.
pub fn render_svg(state: &FloorplanState, assignment: Option<&AssignmentResult<f64>>, opts: &SvgOptions) -> String {
    let px = opts.cell_px;
    let (w, h) = (state.width() as f64 * px, state.height() as f64 * px);
    let sx = |x: f64| x * px;
    let sy = |y: f64| h - y * px;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r##"<rect class="canvas" x="0" y="0" width="{w}" height="{h}" fill="#ffffff" stroke="#000000"/>"##);
    let draw_region = |out: &mut String, region: &Region, class: &str, fill: &str, label: Option<&str>| {
        if let (true, Some(bb)) = (region.is_rectangle(), region.bbox()) {
            let _ = writeln!(
                out,
                r##"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="#333333"/>"##,
                sx(bb.x as f64),
                sy(bb.y_end() as f64),
                bb.w as f64 * px,
                bb.h as f64 * px
            );
        } else {
            let mut d = String::new();
            for [y, x0, len] in encode_rows(region) {
                let _ = write!(d, "M{} {}h{}v{}h{}Z", sx(x0 as f64), sy(y as f64 + 1.0), len as f64 * px, px, -(len as f64) * px);
            }
            let _ = writeln!(out, r#"<path class="{class}" d="{d}" fill="{fill}" stroke="none"/>"#);
            let mut o = String::new();
            for (axis, line, _, start, len) in outline_segments(region) {
                let (x1, y1, x2, y2) = match axis {
                    Axis::Horizontal => (start, line, start + len as i32, line),
                    Axis::Vertical => (line, start, line, start + len as i32),
                };
                let _ = write!(o, "M{} {}L{} {}", sx(x1 as f64), sy(y1 as f64), sx(x2 as f64), sy(y2 as f64));
            }
            let _ = writeln!(out, r##"<path class="outline" d="{o}" fill="none" stroke="#333333"/>"##);
        }
        if let (Some(text), Ok(c)) = (label, region.center::<f64>()) {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-size="{}" text-anchor="middle">{}</text>"#,
                sx(c.x),
                sy(c.y),
                (2.5 * px).max(6.0),
                xml_escape(text)
            );
        }
    };
    for b in &state.blanks {
        draw_region(&mut out, &b.region, "blank", "#eeeeee", None);
    }
    for m in &state.modules {
        let fill = if m.preplaced { "#9ecae1" } else { "#d9e6f2" };
        draw_region(&mut out, &m.region, "module", fill, Some(&m.name));
    }
    if let Some(a) = assignment {
        let touches = |net: usize| match opts.filter_module {
            None => true,
            Some(f) => state.two_pin[net]
                .modules()
                .is_some_and(|(x, y)| x == f || y == f),
        };
        let deepest = a
            .outcomes
            .iter()
            .filter_map(|o| match o {
                NetOutcome::Feedthrough { ft_num, .. } => Some(*ft_num),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        for (net, o) in a.outcomes.iter().enumerate() {
            if !touches(net) {
                continue;
            }
            if let NetOutcome::Feedthrough { path, pins, ft_num, .. } = o {
                let mut pts: Vec<Point<f64>> = Vec::new();
                pts.extend(a.graph.center(path[0]));
                pts.extend(pins.iter().map(|p| p.point::<f64>()));
                pts.extend(a.graph.center(path[path.len() - 1]));
                let coords: Vec<String> = pts.iter().map(|p| format!("{},{}", sx(p.x), sy(p.y))).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline class="ft" data-net="{net}" data-ftnum="{ft_num}" points="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                    coords.join(" "),
                    depth_color(*ft_num, deepest),
                    (px / 3.0).max(1.0)
                );
            }
        }
        for (net, o) in a.outcomes.iter().enumerate() {
            if !touches(net) {
                continue;
            }
            for p in o.pins() {
                let q = p.point::<f64>();
                let _ = writeln!(
                    out,
                    r##"<circle class="pin" data-net="{net}" cx="{}" cy="{}" r="{}" fill="#000000"/>"##,
                    sx(q.x),
                    sy(q.y),
                    (px / 4.0).max(0.75)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One line of the metrics report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub instance: String,
    pub hpwl: String,
    pub ftlen: String,
    pub ftnum: String,
    pub unplacepin: usize,
    pub runtime_s: String,
    pub seed: u64,
    pub hpwl_grid: String,
    pub hpwl_bench: String,
    pub whitespace: String,
    pub max_avr: String,
    pub max_segments: usize,
}

impl MetricsRow {
    pub fn new(state: &FloorplanState, m: &MetricSet<f64>, runtime_s: f64, seed: u64) -> Self {
        let b = MetricsBlock::new(state, m);
        let f = |v: f64| format!("{v:.6}");
        MetricsRow {
            instance: state.name.clone(),
            hpwl: f(m.hpwl),
            ftlen: f(m.ft_len),
            ftnum: f(m.ft_num),
            unplacepin: m.unplaced,
            runtime_s: format!("{runtime_s:.3}"),
            seed,
            hpwl_grid: f(m.hpwl),
            hpwl_bench: f(m.hpwl * state.scale),
            whitespace: f(b.whitespace_ratio),
            max_avr: f(b.max_avr),
            max_segments: b.max_segments,
        }
    }
}

fn csv_string<R: Serialize>(rows: &[R], header: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub const METRICS_HEADER: [&str; 12] = [
    "instance",
    "hpwl",
    "ftlen",
    "ftnum",
    "unplacepin",
    "runtime_s",
    "seed",
    "hpwl_grid",
    "hpwl_bench",
    "whitespace",
    "max_avr",
    "max_segments",
];

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    csv_string(rows, &METRICS_HEADER)
}

/// Per-net report: `net_id,outcome,path,ft_len,ft_num`; paths list module
/// names separated by `;`.
pub fn nets_csv(state: &FloorplanState, a: &AssignmentResult<f64>) -> String {
    let rows: Vec<(usize, &str, String, String, usize)> = a
        .outcomes
        .iter()
        .enumerate()
        .map(|(id, o)| {
            let name = |m: ModuleId| pin_module_name(state, m);
            let (path, len, num) = match o {
                NetOutcome::Feedthrough { path, ft_len, ft_num, .. } => (
                    path.iter().map(|&m| name(m)).collect::<Vec<_>>().join(";"),
                    *ft_len,
                    *ft_num,
                ),
                NetOutcome::Direct { pin } => (format!("{};{}", name(pin.a), name(pin.b)), 0.0, 0),
                _ => (String::new(), 0.0, 0),
            };
            (id, o.label(), path, format!("{len:.6}"), num)
        })
        .collect();
    csv_string(&rows, &["net_id", "outcome", "path", "ft_len", "ft_num"])
}

pub fn anneal_csv(levels: &[LevelRecord]) -> String {
    let rows: Vec<(usize, String, String, String, String, usize)> = levels
        .iter()
        .map(|l| {
            (
                l.level,
                format!("{:.6}", l.temperature),
                format!("{:.6}", l.best_objective),
                format!("{:.6}", l.current_objective),
                format!("{:.6}", l.acceptance_rate),
                l.moves,
            )
        })
        .collect();
    csv_string(
        &rows,
        &["level", "temperature", "best_objective", "current_objective", "acceptance_rate", "moves"],
    )
}
