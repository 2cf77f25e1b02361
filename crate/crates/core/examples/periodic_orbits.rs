//! Continuation in epsilon from each critical point of the epicycloid potential to a periodic orbit.

use forced_kepler::critical::{default_starts, find_critical_points, SearchBox, SearchOptions};
use forced_kepler::curve::Catalog;
use forced_kepler::field::{ForceContext, Kernel, Sign};
use forced_kepler::orbits::{continue_in_epsilon, nondegeneracy, orbit_energy_residual, to_physical, OrbitOptions};

fn main() {
    let eps: f64 = std::env::args().nth(1).map_or(1e-3, |s| s.parse().unwrap());
    let set = Catalog::Epicycloid.build().unwrap();
    let ctx = ForceContext::new(set, Kernel::new(2.0, Sign::Attractive).unwrap());
    let bx = SearchBox::around(&ctx);
    let sopts = SearchOptions::default();
    let points = find_critical_points(&ctx, &bx, &default_starts(&ctx, &bx, &sopts), &sopts).points;
    let opts = OrbitOptions::default();
    for p in &points {
        let branch = continue_in_epsilon(&ctx, Sign::Attractive, p, eps, 200, &opts).unwrap();
        let reached = branch.reached();
        let Some(orbit) = branch.orbit.filter(|_| reached) else {
            println!("from ({:.3}, {:.3}): stopped at eps {:e}", p.x[0], p.x[1], branch.last_epsilon);
            continue;
        };
        let phys = to_physical(&ctx, &orbit).unwrap();
        let m = nondegeneracy(&ctx, &orbit, &opts).unwrap();
        println!(
            "from ({:>6.3}, {:>6.3}): {} steps, N = {}, winding {:?}, residual {:.1e}, lambda = {:.3}, |u| in [{:.3}, {:.3}], energy residual {:.1e}, sigma_min(M - I) = {:.1e}",
            p.x[0],
            p.x[1],
            branch.steps,
            orbit.modes,
            orbit.winding,
            orbit.residual_sup,
            orbit.lambda,
            phys.min_norm,
            phys.max_norm,
            orbit_energy_residual(&ctx, &orbit).unwrap(),
            m.sigma_min
        );
    }
}
