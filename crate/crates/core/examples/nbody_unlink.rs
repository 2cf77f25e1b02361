//! Restricted n-body problem: a particle forced by two prescribed bodies tracing an unlink.

use forced_kepler::report::run_scenario;
use forced_kepler::scenario::{CurveSpec, Scenario, Task};

fn main() {
    let scenario = Scenario {
        name: "unlink".into(),
        dimension: 3,
        kernel: Default::default(),
        curve: CurveSpec::catalog("unlink(2, 4)"),
        tasks: vec![Task::Knots3d, Task::Critical, Task::Nbody],
        solver: Default::default(),
        output: None,
    };
    let report = run_scenario(&scenario).unwrap();
    let nb = report.nbody.as_ref().unwrap();
    println!(
        "{} bodies, r = {}, degree bound {}, tunnel bound {:?}, {} critical points",
        nb.bodies, nb.homology_rank, nb.degree_bound, nb.morse_bound, nb.critical_count
    );
    for run in &nb.runs {
        println!("eps {:e}: {} distinct orbits", run.epsilon, run.distinct_count);
        for r in &run.orbits {
            println!("  {}: residual {:.1e}, min distance to bodies {:.3}", r.orbit.seed, r.orbit.residual_sup, r.orbit.min_distance_to_k);
        }
    }
    for b in &report.bounds {
        println!("bound {}: predicted {:?}, found {:?}, {:?}", b.name, b.predicted, b.found, b.status);
    }
}
