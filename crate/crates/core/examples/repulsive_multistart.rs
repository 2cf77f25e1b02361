//! Winding-stratified multistart for the repulsive problem, compared with the per-winding predictions.

use forced_kepler::critical::{default_starts, find_critical_points, SearchBox, SearchOptions};
use forced_kepler::curve::Catalog;
use forced_kepler::field::{ForceContext, Kernel, Sign};
use forced_kepler::orbits::{multistart_search, MultistartStrategy, OrbitOptions};
use forced_kepler::planar::analyze_complement;

fn main() {
    let set = Catalog::Epicycloid.build().unwrap();
    let ctx = ForceContext::new(set, Kernel::new(2.0, Sign::Repulsive).unwrap());
    let map = analyze_complement(ctx.curve(), 1024).unwrap();
    let bx = SearchBox::around(&ctx);
    let sopts = SearchOptions::default();
    let points = find_critical_points(&ctx, &bx, &default_starts(&ctx, &bx, &sopts), &sopts).points;
    let mut windings = map.windings();
    windings.dedup();
    let strategy = MultistartStrategy {
        critical_points: points,
        windings: windings.clone(),
        ..Default::default()
    };
    let report = multistart_search(&ctx, Sign::Repulsive, 1e-3, &strategy, &OrbitOptions::default());
    println!("{} seeds, {} distinct orbits, {} failures", report.seeds, report.orbits.len(), report.failures.len());
    for w in windings {
        let components = map.windings().iter().filter(|v| **v == w).count();
        let found = report.per_winding.iter().find(|e| e.0 == w).map_or(0, |e| e.1);
        println!("winding {w}: found {found}, predicted {}", components + 1);
    }
    println!("total predicted r + s = {}", map.r() + map.s());
}
