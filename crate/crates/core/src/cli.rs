// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: `plan`, `refine` and `evaluate`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::bench_io::{
    anneal_csv, load_gsrc, metrics_csv, nets_csv, read_text, render_svg, save_layout, write_text, LayoutDocument,
    MetricsBlock, MetricsRow, SvgOptions,
};
use crate::error::{Error, Result};
use crate::geometry::ModuleId;
use crate::legalizer::{legalize, random_initial, trial_rng};
use crate::metrics::{MetricSet, Weights};
use crate::model::{FloorplanState, ProblemInstance, DEFAULT_UTILIZATION};
use crate::netlist::register_blank_modules;
use crate::optimizer::{evaluate, remove_whitespace, sa_optimize, Evaluation, LevelRecord, SAConfig};
use crate::pin_graph::pin_space;

/// Stream index reserved for pre-placed module selection.
const PPM_STREAM: u64 = u64::MAX;

#[derive(Parser, Debug)]
#[command(name = "pinplan", version, about = "Pin-assignment-aware floorplanner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a floorplan from scratch.
    Plan(PlanArgs),
    /// Improve an existing layout (legalizing it first if needed).
    Refine(RefineArgs),
    /// Assign pins on a legal layout and report metrics.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long)]
    pub blocks: PathBuf,
    #[arg(long)]
    pub nets: PathBuf,
    #[arg(long)]
    pub pl: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Pin pitch in cells; derived from the netlist when omitted.
    #[arg(long)]
    pub pinspace: Option<u32>,
    #[arg(long = "beam-k", default_value_t = 5)]
    pub beam_k: usize,
    #[arg(long, default_value = "1,50,2000,100", value_parser = parse_weights)]
    pub weights: Weights<f64>,
    /// Restrict SVG pins and paths to nets of this module (name or index).
    #[arg(long = "filter-module")]
    pub filter_module: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct AnnealArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Runs seeds `seed..seed+repeats` concurrently.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.05)]
    pub avr: f64,
    #[arg(long = "max-segments", default_value_t = 20)]
    pub max_segments: usize,
    #[arg(long = "t-init", default_value_t = 100.0)]
    pub t_init: f64,
    #[arg(long = "t-end", default_value_t = 0.01)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.9)]
    pub cooling: f64,
    /// Fixed moves per temperature level.
    #[arg(long)]
    pub moves: Option<usize>,
    /// Cap on the derived moves per temperature level.
    #[arg(long = "max-moves", default_value_t = 40)]
    pub max_moves: usize,
    /// Pre-placed modules: a fraction of total area, or a comma-separated
    /// list of names or indices.
    #[arg(long)]
    pub ppm: Option<String>,
    /// Write 0 for runtime so repeated runs give identical CSV bytes.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Args, Debug, Clone)]
pub struct PlanArgs {
    #[command(flatten)]
    pub bench: BenchArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub anneal: AnnealArgs,
    #[arg(long, default_value_t = 224)]
    pub grid: u32,
    /// Random initial floorplans tried before optimization.
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
}

#[derive(Args, Debug, Clone)]
pub struct RefineArgs {
    #[command(flatten)]
    pub bench: BenchArgs,
    #[arg(long)]
    pub layout: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub bench: BenchArgs,
    #[arg(long)]
    pub layout: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

fn parse_weights(s: &str) -> std::result::Result<Weights<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad weight `{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [hpwl, ft_len, ft_num, unplaced] if v.iter().all(|w| w.is_finite() && *w >= 0.0) => Ok(Weights {
            hpwl,
            ft_len,
            ft_num,
            unplaced,
        }),
        _ => Err("expected four non-negative weights w1,w2,w3,w4".into()),
    }
}

/// How pre-placed modules are chosen.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PpmSpec {
    Fraction(f64),
    Modules(Vec<String>),
}

impl PpmSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if let Ok(f) = s.parse::<f64>() {
            if f > 0.0 && f < 1.0 && s.contains('.') {
                return Ok(PpmSpec::Fraction(f));
            }
        }
        let names: Vec<String> = s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
        if names.is_empty() {
            return Err(Error::Config(format!("empty --ppm value `{s}`")));
        }
        Ok(PpmSpec::Modules(names))
    }
}

fn resolve_module(state: &FloorplanState, key: &str) -> Result<ModuleId> {
    if let Some(m) = state.module_by_name(key) {
        return Ok(m.id);
    }
    match key.parse::<usize>() {
        Ok(i) if i < state.modules.len() => Ok(ModuleId(i as u32)),
        _ => Err(Error::UnknownModule(key.to_string())),
    }
}

/// Picks pre-placed modules. A fraction shuffles the modules with the run
/// seed and takes them in order until their cells reach that share of the
/// total module area.
pub fn select_ppm(state: &FloorplanState, spec: &PpmSpec, seed: u64) -> Result<Vec<ModuleId>> {
    let mut ids = match spec {
        PpmSpec::Modules(keys) => keys.iter().map(|k| resolve_module(state, k)).collect::<Result<Vec<_>>>()?,
        PpmSpec::Fraction(f) => {
            let mut order: Vec<ModuleId> = state.modules.iter().map(|m| m.id).collect();
            order.shuffle(&mut trial_rng(seed, PPM_STREAM));
            let total: usize = state.modules.iter().map(|m| m.region.area()).sum();
            let target = f * total as f64;
            let mut taken = 0usize;
            let mut out = Vec::new();
            for id in order {
                if taken as f64 >= target {
                    break;
                }
                taken += state.module(id).region.area();
                out.push(id);
            }
            out
        }
    };
    ids.sort();
    ids.dedup();
    Ok(ids)
}

/// Fully resolved run settings; logged at the start of every run.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub grid: u32,
    pub trials: usize,
    pub pinspace: Option<u32>,
    pub ppm: Option<PpmSpec>,
    pub sa: SAConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: 224,
            trials: 8,
            pinspace: None,
            ppm: None,
            sa: SAConfig::default(),
        }
    }
}

/// Everything one optimization run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub seed: u64,
    /// Legal layout optimization started from (PPMs already marked).
    pub start: FloorplanState,
    pub start_metrics: MetricSet<f64>,
    pub start_objective: f64,
    pub state: FloorplanState,
    pub evaluation: Evaluation,
    pub levels: Vec<LevelRecord>,
    pub ppm: Vec<ModuleId>,
    pub u: u32,
    pub runtime_s: f64,
}

fn with_blanks(state: &FloorplanState) -> FloorplanState {
    let mut s = state.clone();
    s.clear_blanks();
    register_blank_modules(&mut s);
    s
}

fn resolve_u(state: &FloorplanState, cfg: &RunConfig) -> Result<u32> {
    match cfg.pinspace {
        Some(0) => Err(Error::Config("--pinspace must be positive".into())),
        Some(u) => Ok(u),
        None => Ok(pin_space(state)?.u),
    }
}

/// Stages 2 and 3 on an existing layout: legalize when needed, mark PPMs,
/// assign pins, fill whitespace and anneal.
pub fn refine_run(start: &FloorplanState, cfg: &RunConfig, seed: u64) -> Result<RunReport> {
    let clock = Instant::now();
    let mut s = legalize(start)?;
    let mut ppm = Vec::new();
    if let Some(spec) = &cfg.ppm {
        ppm = select_ppm(&s, spec, seed)?;
        for &id in &ppm {
            s.modules[id.index()].preplaced = true;
        }
        let names: Vec<String> = ppm.iter().map(|&id| format!("{}({})", s.module(id).name, id.index())).collect();
        info!("seed {seed}: pre-placed modules {}", names.join(", "));
    }
    let u = resolve_u(&s, cfg)?;
    let s = with_blanks(&s);
    let pre = evaluate(&s, u, cfg.sa.beam_k, &cfg.sa.weights)?;
    info!(
        "seed {seed}: before optimization objective {:.4}, unplaced {}",
        pre.objective, pre.metrics.unplaced
    );
    let filled = remove_whitespace(&s, &pre.assignment, u, &cfg.sa)?;
    let sa_cfg = SAConfig { seed, ..cfg.sa.clone() };
    let out = sa_optimize(&filled, u, &sa_cfg)?;
    info!("seed {seed}: after whitespace removal objective {:.4}", out.initial_objective);
    Ok(RunReport {
        seed,
        start: s,
        start_metrics: pre.metrics,
        start_objective: pre.objective,
        state: out.state,
        evaluation: out.evaluation,
        levels: out.levels,
        ppm,
        u,
        runtime_s: clock.elapsed().as_secs_f64(),
    })
}

/// All three stages from a parsed benchmark.
pub fn plan_run(problem: &ProblemInstance, cfg: &RunConfig, seed: u64) -> Result<RunReport> {
    let clock = Instant::now();
    let blank = FloorplanState::from_problem(problem, cfg.grid, cfg.grid, DEFAULT_UTILIZATION)?;
    let initial = random_initial(&blank, cfg.trials, seed)?;
    let mut r = refine_run(&initial, cfg, seed)?;
    r.runtime_s = clock.elapsed().as_secs_f64();
    Ok(r)
}

fn sa_config(a: &AnnealArgs, c: &CommonArgs) -> SAConfig {
    SAConfig {
        t_init: a.t_init,
        t_end: a.t_end,
        cooling: a.cooling,
        moves_per_temperature: a.moves,
        max_moves_per_temperature: a.max_moves,
        weights: c.weights,
        avr_threshold: a.avr,
        max_edge_segments: a.max_segments,
        beam_k: c.beam_k,
        seed: a.seed,
    }
}

fn log_config<C: Serialize>(command: &str, cfg: &C) {
    info!(
        "{command} configuration: {}",
        serde_json::to_string(cfg).expect("config serializes")
    );
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn svg_options(state: &FloorplanState, filter: &Option<String>) -> Result<SvgOptions> {
    Ok(SvgOptions {
        filter_module: filter.as_deref().map(|k| resolve_module(state, k)).transpose()?,
        ..Default::default()
    })
}

fn write_run(dir: &Path, r: &RunReport, common: &CommonArgs) -> Result<()> {
    ensure_dir(dir)?;
    let metrics = MetricsBlock::new(&r.state, &r.evaluation.metrics);
    write_text(
        &dir.join("layout.json"),
        &save_layout(&r.state, Some(&r.evaluation.assignment), Some(metrics)),
    )?;
    let opts = svg_options(&r.state, &common.filter_module)?;
    write_text(
        &dir.join("layout.svg"),
        &render_svg(&r.state, Some(&r.evaluation.assignment), &opts),
    )?;
    write_text(&dir.join("anneal.csv"), &anneal_csv(&r.levels))
}

fn summary(r: &RunReport) -> String {
    let m = &r.evaluation.metrics;
    format!(
        "{} seed {}: hpwl {:.3} ftlen {:.3} ftnum {:.3} unplaced {} objective {:.3} (from {:.3}) in {:.2}s",
        r.state.name, r.seed, m.hpwl, m.ft_len, m.ft_num, m.unplaced, r.evaluation.objective, r.start_objective, r.runtime_s
    )
}

fn run_repeats<F>(anneal: &AnnealArgs, common: &CommonArgs, run: F) -> Result<()>
where
    F: Fn(u64) -> Result<RunReport> + Sync,
{
    if anneal.repeats == 0 {
        return Err(Error::Config("--repeats must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..anneal.repeats as u64).map(|i| anneal.seed + i).collect();
    let mut reports = seeds.par_iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?;
    reports.sort_by_key(|r| r.seed);
    ensure_dir(&common.out)?;
    let mut rows = Vec::new();
    for r in &reports {
        let dir = if reports.len() == 1 {
            common.out.clone()
        } else {
            common.out.join(format!("seed_{}", r.seed))
        };
        write_run(&dir, r, common)?;
        let runtime = if anneal.reproducible { 0.0 } else { r.runtime_s };
        rows.push(MetricsRow::new(&r.state, &r.evaluation.metrics, runtime, r.seed));
        println!("{}", summary(r));
    }
    write_text(&common.out.join("metrics.csv"), &metrics_csv(&rows))?;
    if reports.len() > 1 {
        let n = reports.len() as f64;
        let mean = |f: &dyn Fn(&MetricSet<f64>) -> f64| reports.iter().map(|r| f(&r.evaluation.metrics)).sum::<f64>() / n;
        println!(
            "mean over {} seeds: hpwl {:.3} ftlen {:.3} ftnum {:.3} unplaced {:.2}",
            reports.len(),
            mean(&|m| m.hpwl),
            mean(&|m| m.ft_len),
            mean(&|m| m.ft_num),
            mean(&|m| m.unplaced as f64)
        );
    }
    Ok(())
}

fn load_problem(b: &BenchArgs) -> Result<ProblemInstance> {
    load_gsrc(&b.blocks, &b.nets, b.pl.as_deref())
}

fn run_config(anneal: &AnnealArgs, common: &CommonArgs, grid: u32, trials: usize) -> Result<RunConfig> {
    let cfg = RunConfig {
        grid,
        trials,
        pinspace: common.pinspace,
        ppm: anneal.ppm.as_deref().map(PpmSpec::parse).transpose()?,
        sa: sa_config(anneal, common),
    };
    cfg.sa.validate()?;
    Ok(cfg)
}

fn load_state(path: &Path, problem: &ProblemInstance) -> Result<FloorplanState> {
    LayoutDocument::from_json(&read_text(path)?)?.to_state(problem)
}

pub fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let cfg = run_config(&a.anneal, &a.common, a.grid, a.trials)?;
    log_config("plan", &(&cfg, &a.anneal.seed, &a.anneal.repeats, &a.common.out));
    let problem = load_problem(&a.bench)?;
    run_repeats(&a.anneal, &a.common, |seed| plan_run(&problem, &cfg, seed))
}

pub fn cmd_refine(a: &RefineArgs) -> Result<()> {
    let problem = load_problem(&a.bench)?;
    let start = load_state(&a.layout, &problem)?;
    let cfg = run_config(&a.anneal, &a.common, start.width(), 0)?;
    log_config("refine", &(&cfg, &a.anneal.seed, &a.anneal.repeats, &a.common.out));
    run_repeats(&a.anneal, &a.common, |seed| refine_run(&start, &cfg, seed))
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    log_config(
        "evaluate",
        &(&a.common.pinspace, &a.common.beam_k, &a.common.weights, &a.common.out),
    );
    let problem = load_problem(&a.bench)?;
    let state = load_state(&a.layout, &problem)?;
    if state.needs_legalization || !state.is_legal() {
        return Err(Error::Layout(format!(
            "{} has overlapping or unplaced modules; run `refine` to repair it",
            a.layout.display()
        )));
    }
    let cfg = RunConfig {
        pinspace: a.common.pinspace,
        ..Default::default()
    };
    let u = resolve_u(&state, &cfg)?;
    let state = with_blanks(&state);
    let clock = Instant::now();
    let e = evaluate(&state, u, a.common.beam_k, &a.common.weights)?;
    let runtime = clock.elapsed().as_secs_f64();
    let out = &a.common.out;
    ensure_dir(out)?;
    let row = MetricsRow::new(&state, &e.metrics, runtime, 0);
    println!(
        "{}: hpwl {:.3} ftlen {:.3} ftnum {:.3} unplaced {} whitespace {} objective {:.3}",
        state.name, e.metrics.hpwl, e.metrics.ft_len, e.metrics.ft_num, e.metrics.unplaced, row.whitespace, e.objective
    );
    write_text(&out.join("metrics.csv"), &metrics_csv(&[row]))?;
    write_text(&out.join("nets.csv"), &nets_csv(&state, &e.assignment))?;
    let opts = svg_options(&state, &a.common.filter_module)?;
    write_text(&out.join("layout.svg"), &render_svg(&state, Some(&e.assignment), &opts))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

/// Exit status for an error: 2 for unreadable or unwritable files, 1
/// otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 2,
        _ => 1,
    }
}

/// Binary entry point. Log verbosity comes from `PIANO_LOG`.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("PIANO_LOG", "info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
