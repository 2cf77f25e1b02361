//! Full pipeline for a scenario file: cached run, report, plots and re-verification.
//!
//! `cargo run --release --example scenario_report -- scenarios/epicycloid.json /tmp/epicycloid`

use std::path::PathBuf;

use forced_kepler::plot::{plot, PlotKind};
use forced_kepler::scenario::Scenario;
use forced_kepler::store::{report_json, run_cached, verify, write_atomic, RunOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/arc.json").into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/example".into()));
    let scenario = Scenario::load(&path).unwrap();
    let outcome = run_cached(&scenario, &RunOptions::default()).unwrap();
    let report_path = out.join("report.json");
    write_atomic(&report_path, report_json(&outcome.report).as_bytes()).unwrap();
    println!("report {} (cached: {})", report_path.display(), outcome.from_cache);
    for kind in [PlotKind::Map, PlotKind::Orbits, PlotKind::Projections] {
        match plot(&outcome.report, kind) {
            Ok(svg) => {
                write_atomic(&out.join(format!("{kind}.svg")), svg.as_bytes()).unwrap();
                println!("plot {kind} written");
            }
            Err(e) => println!("plot {kind} skipped: {e}"),
        }
    }
    print!("{}", verify(&report_path).unwrap().table());
}
