use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use forced_kepler::plot::{plot, PlotKind};
use forced_kepler::report::ScenarioReport;
use forced_kepler::scenario::{Scenario, Task};
use forced_kepler::store::{load_report, report_json, run_cached, verify, write_atomic, RunOptions, CACHE_ENV};

#[derive(Parser)]
#[command(version, about = "Topology and periodic orbits of the forced Kepler problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json plus plots.
    #[command(after_help = format!("The cache directory can be overridden with {CACHE_ENV}."))]
    Run {
        scenario: PathBuf,
        /// Output directory (default: the scenario's `output`, else out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_cache: bool,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render an SVG plot from a report.
    Plot {
        report: PathBuf,
        #[arg(long, value_parser = ["map", "orbits", "projections"])]
        kind: String,
        /// Output file (default: <kind>.svg next to the report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the invariant checks of a report or scenario and print a table.
    Verify { path: PathBuf },
}

fn write_plot(report: &ScenarioReport, kind: PlotKind, path: &Path) -> Result<(), String> {
    let svg = plot(report, kind).map_err(|e| e.to_string())?;
    write_atomic(path, svg.as_bytes()).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(path: &Path, out: Option<PathBuf>, no_cache: bool, seed: Option<u64>) -> Result<bool, String> {
    let mut scenario = Scenario::load(path).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        scenario.solver.seed = s;
    }
    let out = out
        .or_else(|| scenario.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let opts = RunOptions {
        use_cache: !no_cache,
        ..Default::default()
    };
    let outcome = run_cached(&scenario, &opts).map_err(|e| e.to_string())?;
    let report = outcome.report;
    let report_path = out.join("report.json");
    write_atomic(&report_path, report_json(&report).as_bytes()).map_err(|e| e.to_string())?;
    println!(
        "wrote {}{}",
        report_path.display(),
        if outcome.from_cache { " (from cache)" } else { "" }
    );
    let planar = report.analyze2d.is_some();
    let mut kinds = Vec::new();
    if planar {
        kinds.push(PlotKind::Map);
    }
    if report.orbits.is_some() || report.nbody.is_some() {
        kinds.push(PlotKind::Orbits);
    }
    if scenario.dimension == 3 && scenario.has(Task::Critical) {
        kinds.push(PlotKind::Projections);
    }
    for kind in kinds {
        if let Err(e) = write_plot(&report, kind, &out.join(format!("{kind}.svg"))) {
            log::warn!("{kind} plot: {e}");
        }
    }
    for e in &report.task_errors {
        eprintln!("task {} failed: {}", e.task, e.message);
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("{} check failed: {} ({})", if c.hard { "hard" } else { "soft" }, c.name, c.detail);
    }
    Ok(report.all_hard_checks_pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            no_cache,
            seed,
        } => run(&scenario, out, no_cache, seed),
        Command::Plot { report, kind, out } => (|| {
            let kind: PlotKind = kind.parse().map_err(|e: forced_kepler::plot::PlotError| e.to_string())?;
            let r = load_report(&report).map_err(|e| e.to_string())?;
            let path = out.unwrap_or_else(|| report.with_file_name(format!("{kind}.svg")));
            write_plot(&r, kind, &path).map(|_| true)
        })(),
        Command::Verify { path } => verify(&path).map_err(|e| e.to_string()).map(|s| {
            print!("{}", s.table());
            s.passed()
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
