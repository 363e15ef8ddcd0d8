//! Experiment plumbing around the `gmoea` library: configuration files,
//! seeded experiment plans, parallel execution, record persistence and
//! summary tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gmoea::algorithms::{compare, preset_budget, preset_pop_size, run, AlgorithmTag, Indicator, RunConfig, RunRecord};
use gmoea::common::Objectives;
use gmoea::metrics::{iqr, median, Symbol};
use gmoea::problems::{make_problem, ImfId};
use gmoea::gan::GanConfig;
use gmoea::operators::VariationConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "GMOEA_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Runtime(_) => 2,
        }
    }
}

impl From<gmoea::Error> for HarnessError {
    fn from(e: gmoea::Error) -> Self {
        match e {
            gmoea::Error::Config(_) | gmoea::Error::Lookup { .. } => HarnessError::Config(e.to_string()),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Runtime(format!("{}: {e}", path.display()))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| HarnessError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// Parses and validates a run configuration. Problems are reported with
/// the offending line and column.
pub fn parse_run_config(text: &str, origin: &str) -> Result<RunConfig> {
    let cfg: RunConfig = parse_json(text, origin)?;
    cfg.validate().map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?;
    Ok(cfg)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    parse_run_config(&read_text(path)?, &path.display().to_string())
}

/// Runs one configuration. Wall time is only recorded on request so that
/// repeated runs serialize identically.
pub fn execute_run(cfg: &RunConfig, record_time: bool) -> Result<RunRecord> {
    let start = std::time::Instant::now();
    let mut record = run(cfg)?;
    if record_time {
        record.wall_ms = start.elapsed().as_millis() as u64;
    }
    Ok(record)
}

pub fn record_json(record: &RunRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("records always serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub algorithm: AlgorithmTag,
    pub problem: String,
    pub dim: usize,
}

impl Cell {
    pub fn key(&self) -> String {
        format!("{}/{}_{}", self.algorithm, self.problem, self.dim)
    }

    /// Directory of this cell's records below the experiment root.
    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join(format!("{}_{}", self.problem, self.dim)).join(self.algorithm.dir_name())
    }
}

/// Seed of run `k` in `cell`: the base seed plus the run index, offset into
/// a cell-specific block by a hash of the cell key.
pub fn cell_seed(base_seed: u64, cell: &Cell, run_index: usize) -> u64 {
    let digest = Sha256::digest(cell.key().as_bytes());
    let block = u32::from_le_bytes([digest[0], digest[1], digest[2], digest[3]]) as u64;
    base_seed.wrapping_add(run_index as u64).wrapping_add(block << 32)
}

fn default_runs() -> usize {
    20
}

/// Settings applied on top of each cell's preset configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOverrides {
    #[serde(default)]
    pub pop_size: Option<usize>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub variation: Option<VariationConfig>,
    #[serde(default)]
    pub gan: Option<GanConfig>,
    #[serde(default)]
    pub trace_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub cells: Vec<Cell>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Worker count; `None` uses every core. `GMOEA_THREADS` wins over both.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub overrides: PlanOverrides,
}

/// One scheduled run of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub cell: Cell,
    pub index: usize,
    pub path: PathBuf,
    pub config: RunConfig,
}

impl ExperimentPlan {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let plan: ExperimentPlan = parse_json(text, origin)?;
        if plan.runs == 0 {
            return Err(HarnessError::Config(format!("{origin}: runs must be positive")));
        }
        if plan.threads == Some(0) {
            return Err(HarnessError::Config(format!("{origin}: threads must be positive")));
        }
        let unique: BTreeSet<&Cell> = plan.cells.iter().collect();
        if unique.len() != plan.cells.len() {
            return Err(HarnessError::Config(format!("{origin}: duplicate cell")));
        }
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    /// Every run of the plan in cell order, with validated configurations.
    pub fn expand(&self) -> Result<Vec<PlannedRun>> {
        let mut out = Vec::with_capacity(self.cells.len() * self.runs);
        for cell in &self.cells {
            let o = &self.overrides;
            let problem = make_problem(&cell.problem, cell.dim)?;
            let budget = o.budget.or(preset_budget(cell.dim)).ok_or_else(|| {
                HarnessError::Config(format!("no preset budget for D={}; set overrides.budget", cell.dim))
            })?;
            let mut base = RunConfig {
                algorithm: cell.algorithm,
                problem: problem.name(),
                dim: cell.dim,
                pop_size: o.pop_size.unwrap_or(preset_pop_size(problem.n_obj())),
                budget,
                seed: 0,
                variation: VariationConfig::default(),
                gan: GanConfig::default(),
                trace_every: None,
            };
            if let Some(v) = &o.variation {
                base.variation = v.clone();
            }
            if let Some(g) = &o.gan {
                base.gan = g.clone();
            }
            base.trace_every = o.trace_every.or(base.trace_every);
            let cell = Cell { problem: base.problem.clone(), ..cell.clone() };
            for index in 0..self.runs {
                let config = RunConfig { seed: cell_seed(self.base_seed, &cell, index), ..base.clone() };
                config.validate()?;
                let path = cell.dir(&self.out_dir).join(format!("run_{index}.json"));
                out.push(PlannedRun { cell: cell.clone(), index, path, config });
            }
        }
        Ok(out)
    }

    pub fn parallelism(&self) -> usize {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .or(self.threads)
            .unwrap_or_else(rayon::current_num_threads)
    }
}

fn write_record(job: &PlannedRun, record: &RunRecord) -> Result<()> {
    if let Some(dir) = job.path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(&job.path, record_json(record)).map_err(|e| io_err(&job.path, e))
}

/// Runs every planned run, writing one JSON record per run. Returns the
/// record paths in plan order.
pub fn execute_plan(plan: &ExperimentPlan, parallel: bool) -> Result<Vec<PathBuf>> {
    let jobs = plan.expand()?;
    let work = |job: &PlannedRun| -> Result<()> {
        let record = execute_run(&job.config, false)?;
        write_record(job, &record)
    };
    if parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.parallelism())
            .build()
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(work).collect::<Result<Vec<()>>>())?;
    } else {
        jobs.iter().map(work).collect::<Result<Vec<()>>>()?;
    }
    Ok(jobs.into_iter().map(|j| j.path).collect())
}

/// Every `run_*.json` below `dir`, sorted by path.
pub fn record_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| io_err(&d, e))? {
            let path = entry.map_err(|e| io_err(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".json"))
            {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    record_paths(dir)?
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Runtime(format!("{}: {e}", p.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub problem: String,
    pub dim: usize,
    pub algorithm: AlgorithmTag,
    pub runs: usize,
    pub igd_median: Option<f64>,
    pub igd_iqr: Option<f64>,
    pub hv_median: Option<f64>,
    pub hv_iqr: Option<f64>,
    /// IGD rank-sum outcome against the reference algorithm.
    pub symbol: Option<Symbol>,
    pub best_igd: bool,
    pub best_hv: bool,
}

/// One row per (problem, D, algorithm), grouped by instance. Algorithms
/// missing from an instance appear as rows without values.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsTable {
    pub reference: AlgorithmTag,
    pub rows: Vec<StatsRow>,
}

fn problem_order(name: &str) -> (usize, String) {
    (name.parse::<ImfId>().map(ImfId::index).unwrap_or(usize::MAX), name.to_string())
}

pub fn summarize(records: &[RunRecord], reference: AlgorithmTag, alpha: f64) -> Result<StatsTable> {
    type Key = ((usize, String), usize);
    let mut groups: BTreeMap<Key, BTreeMap<AlgorithmTag, Vec<&RunRecord>>> = BTreeMap::new();
    let mut algorithms = BTreeSet::new();
    for r in records {
        let key = (problem_order(&r.config.problem), r.config.dim);
        groups.entry(key).or_default().entry(r.config.algorithm).or_default().push(r);
        algorithms.insert(r.config.algorithm);
    }
    let with_symbols = algorithms.len() > 1;
    let mut rows = Vec::new();
    for (((_, problem), dim), by_alg) in &groups {
        let start = rows.len();
        for &alg in &algorithms {
            let runs: Vec<RunRecord> = by_alg.get(&alg).map(|v| v.iter().map(|r| (*r).clone()).collect()).unwrap_or_default();
            let igd: Vec<f64> = runs.iter().map(RunRecord::final_igd).collect();
            let hv: Vec<f64> = runs.iter().map(RunRecord::final_hv).collect();
            let symbol = match by_alg.get(&reference) {
                Some(refs) if with_symbols && runs.len() >= 2 && refs.len() >= 2 => {
                    if alg == reference {
                        Some(Symbol::Similar)
                    } else {
                        let refs: Vec<RunRecord> = refs.iter().map(|r| (*r).clone()).collect();
                        Some(compare(&runs, &refs, Indicator::Igd, alpha)?.symbol)
                    }
                }
                _ => None,
            };
            rows.push(StatsRow {
                problem: problem.clone(),
                dim: *dim,
                algorithm: alg,
                runs: runs.len(),
                igd_median: median(&igd),
                igd_iqr: iqr(&igd),
                hv_median: median(&hv),
                hv_iqr: iqr(&hv),
                symbol,
                best_igd: false,
                best_hv: false,
            });
        }
        let block = &mut rows[start..];
        let best_igd = block.iter().filter_map(|r| r.igd_median).fold(f64::INFINITY, f64::min);
        let best_hv = block.iter().filter_map(|r| r.hv_median).fold(f64::NEG_INFINITY, f64::max);
        for r in block.iter_mut() {
            r.best_igd = r.igd_median == Some(best_igd);
            r.best_hv = r.hv_median == Some(best_hv);
        }
    }
    Ok(StatsTable { reference, rows })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4e}")).unwrap_or_default()
}

impl StatsTable {
    pub const CSV_HEADER: [&'static str; 8] =
        ["problem", "D", "algorithm", "igd_median", "igd_iqr", "hv_median", "hv_iqr", "symbol_vs_ref"];

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            w.write_record([
                r.problem.clone(),
                r.dim.to_string(),
                r.algorithm.to_string(),
                opt(r.igd_median),
                opt(r.igd_iqr),
                opt(r.hv_median),
                opt(r.hv_iqr),
                r.symbol.map(|s| s.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Aligned text; `*` marks the best median of each instance.
    pub fn to_text(&self) -> String {
        let header = ["problem", "D", "algorithm", "runs", "IGD median (IQR)", "HV median (IQR)", "vs ref"];
        let cells: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                let pair = |m: Option<f64>, q: Option<f64>, best: bool| match m {
                    Some(_) => format!("{} ({}){}", fmt_opt(m), fmt_opt(q), if best { " *" } else { "" }),
                    None => "-".to_string(),
                };
                [
                    r.problem.clone(),
                    r.dim.to_string(),
                    r.algorithm.to_string(),
                    r.runs.to_string(),
                    pair(r.igd_median, r.igd_iqr, r.best_igd),
                    pair(r.hv_median, r.hv_iqr, r.best_hv),
                    r.symbol.map(|s| s.to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |fields: Vec<&str>| {
            let padded: Vec<String> = fields
                .iter()
                .zip(&widths)
                .map(|(f, w)| format!("{f}{}", " ".repeat(w - f.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        };
        line(header.to_vec());
        for row in &cells {
            line(row.iter().map(String::as_str).collect());
        }
        let _ = writeln!(out, "reference: {}; * best median per instance", self.reference);
        out
    }
}

/// Convergence profiles: one CSV row per snapshot of every record.
pub fn trace_csv(records: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["problem", "D", "algorithm", "seed", "fe", "igd", "hv"]).expect("in-memory write");
    for r in records {
        for s in &r.snapshots {
            w.write_record([
                r.config.problem.clone(),
                r.config.dim.to_string(),
                r.config.algorithm.to_string(),
                r.seed.to_string(),
                s.fe.to_string(),
                format!("{:e}", s.igd),
                format!("{:e}", s.hv),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
