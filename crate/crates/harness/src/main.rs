use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gmoea::algorithms::{preset_budget, preset_pop_size, AlgorithmTag, RunConfig};
use gmoea::common::Objectives;
use gmoea::problems::{make_problem, ImfId, PRESET_DIMS};
use gmoea_harness::{
    execute_plan, execute_run, load_records, load_run_config, record_json, summarize, trace_csv, ExperimentPlan,
    HarnessError, Result,
};

#[derive(Parser)]
#[command(name = "gmoea", version, about = "Run and analyse GMOEA experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run configuration and emit its record as JSON.
    Run {
        config: PathBuf,
        /// Write the record here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Store the measured wall time (records then differ between runs).
        #[arg(long)]
        record_time: bool,
    },
    /// Execute every run of an experiment plan.
    Experiment {
        plan: PathBuf,
        /// Run one job at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Summarize a records directory into stats.csv and stats.txt.
    Stats {
        dir: PathBuf,
        #[arg(long, default_value = "GMOEA")]
        reference: AlgorithmTag,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Write the convergence profiles of a records directory to trace.csv.
    Trace {
        dir: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// List the benchmark suite with its preset sizes.
    Problems,
    /// Execute one run configuration and emit its training losses as CSV.
    Losses {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print a complete preset run configuration.
    Preset {
        #[arg(long, default_value = "GMOEA")]
        algorithm: AlgorithmTag,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 30)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn problems_table() -> Result<String> {
    let mut out = format!("{:<7} {:>2}  {:>4}  {}\n", "problem", "M", "N", "D (FE budget)");
    let presets: Vec<String> = PRESET_DIMS
        .iter()
        .map(|&d| format!("{d} ({})", preset_budget(d).unwrap_or_default()))
        .collect();
    for id in ImfId::ALL {
        let p = make_problem(&id.to_string(), PRESET_DIMS[0])?;
        out.push_str(&format!("{:<7} {:>2}  {:>4}  {}\n", id.to_string(), p.n_obj(), preset_pop_size(p.n_obj()), presets.join(", ")));
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, record_time } => {
            let cfg = load_run_config(&config)?;
            let record = execute_run(&cfg, record_time)?;
            emit(&record_json(&record), out.as_deref())
        }
        Command::Experiment { plan, sequential } => {
            let plan = ExperimentPlan::load(&plan)?;
            let paths = execute_plan(&plan, !sequential)?;
            eprintln!("wrote {} records under {}", paths.len(), plan.out_dir.display());
            Ok(())
        }
        Command::Stats { dir, reference, alpha } => {
            let records = load_records(&dir)?;
            let table = summarize(&records, reference, alpha)?;
            emit(&table.to_csv(), Some(&dir.join("stats.csv")))?;
            let text = table.to_text();
            emit(&text, Some(&dir.join("stats.txt")))?;
            print!("{text}");
            Ok(())
        }
        Command::Trace { dir, out } => {
            let records = load_records(&dir)?;
            let path = out.unwrap_or_else(|| dir.join("trace.csv"));
            emit(&trace_csv(&records), Some(&path))
        }
        Command::Problems => emit(&problems_table()?, None),
        Command::Losses { config, out } => {
            let cfg = load_run_config(&config)?;
            let record = execute_run(&cfg, false)?;
            emit(&record.losses.to_csv(), out.as_deref())
        }
        Command::Preset { algorithm, problem, dim, seed } => {
            let cfg = RunConfig::preset(algorithm, &problem, dim, seed)?;
            let text = serde_json::to_string_pretty(&cfg).expect("configs always serialize");
            emit(&format!("{text}\n"), None)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gmoea: {e}");
            e.exit_code() as u8
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()))
}
