use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ftsim::harness::{
    compare_strategies, emit_csv, load_configs, load_fault_plan, render_comparison, run_baseline, run_detailed,
    run_sweep, write_csv, ExperimentConfig, PlanPreset, PresetSpec, ResultRow, RunStatus,
};
use ftsim::simcore::{SparePlacement, WorldConfig};
use ftsim::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNRECOVERABLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ftsim",
    version,
    about = "Simulate shrink and substitute recovery of a fault-tolerant FGMRES solve"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its CSV row.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Fault plan overriding the config's.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the final checkpoint stores as JSON.
        #[arg(long)]
        dump_store: Option<PathBuf>,
    },
    /// Run every *.json config of a directory.
    Sweep {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a generated fault plan as JSON.
    Plan {
        #[arg(long, value_parser = parse_preset)]
        preset: PlanPreset,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        spares: usize,
        #[arg(long, default_value_t = 1)]
        cores_per_node: usize,
        #[arg(long, value_parser = parse_placement, default_value = "dedicated")]
        placement: SparePlacement,
        #[arg(long, default_value_t = 1)]
        first_iteration: u64,
        #[arg(long, default_value_t = 0)]
        spacing: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the unprotected, failure-free version of a config.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_preset(s: &str) -> Result<PlanPreset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_placement(s: &str) -> Result<SparePlacement, String> {
    match s {
        "dedicated" => Ok(SparePlacement::Dedicated),
        "packed" => Ok(SparePlacement::Packed),
        _ => Err(format!("unknown placement {s:?} (expected dedicated or packed)")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::MatrixMarket(_) => EXIT_CONFIG,
        Error::Unrecoverable(_) => EXIT_UNRECOVERABLE,
        _ => EXIT_FAILURE,
    }
}

fn output(rows: &[ResultRow], out: Option<&PathBuf>) -> ftsim::Result<()> {
    match out {
        Some(path) => emit_csv(rows, path),
        None => write_csv(rows, std::io::stdout().lock()),
    }
}

fn status_code(rows: &[ResultRow]) -> u8 {
    if rows.iter().any(|r| r.status == RunStatus::Unrecoverable) {
        EXIT_UNRECOVERABLE
    } else {
        0
    }
}

fn run(cmd: Command) -> ftsim::Result<u8> {
    match cmd {
        Command::Run {
            config,
            plan,
            out,
            dump_store,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let plan = match plan {
                Some(p) => load_fault_plan(&p, cfg.world.processes, cfg.solver.max_steps(), cfg.solver.m_inner)?,
                None => cfg.resolve_plan()?,
            };
            let rec = run_detailed(&cfg, &plan)?;
            if let Some(err) = &rec.error {
                eprintln!("ftsim: {err}");
            }
            if let Some(path) = dump_store {
                let dump = rec.outcome.as_ref().map(|o| o.stores.dump()).unwrap_or_default();
                std::fs::write(&path, serde_json::to_string_pretty(&dump)?)?;
            }
            let rows = [rec.row];
            output(&rows, out.as_ref())?;
            Ok(status_code(&rows))
        }
        Command::Sweep { configs, out } => {
            let cfgs = load_configs(&configs)?;
            let rows = run_sweep(&cfgs)?;
            emit_csv(&rows, &out)?;
            if let Ok(cmp) = compare_strategies(&rows) {
                if !cmp.is_empty() {
                    eprint!("{}", render_comparison(&cmp));
                }
            }
            Ok(status_code(&rows))
        }
        Command::Plan {
            preset,
            p,
            k,
            spares,
            cores_per_node,
            placement,
            first_iteration,
            spacing,
            seed,
        } => {
            let mut world = WorldConfig::new(p, spares, cores_per_node);
            world.spare_placement = placement;
            world.seed = seed;
            let mut spec = PresetSpec::new(preset, k);
            spec.first_iteration = first_iteration;
            spec.spacing = spacing;
            let plan = spec.build(&world)?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", serde_json::to_string_pretty(&plan)?)?;
            Ok(0)
        }
        Command::Baseline { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = [run_baseline(&cfg)?.row];
            output(&rows, out.as_ref())?;
            Ok(status_code(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ftsim: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
