//! Multistart critical-point search, Morse indices and the census of a space curve.

use forced_kepler::critical::{default_starts, find_critical_points, morse_census, same_points, SearchBox, SearchOptions};
use forced_kepler::curve::Catalog;
use forced_kepler::degree::{degree_3d, SurfaceMesh};
use forced_kepler::field::{ForceContext, Kernel, Sign};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "trefoil".into());
    let set = Catalog::parse(&name).unwrap().build().unwrap();
    let ctx = ForceContext::new(set, Kernel::new(2.0, Sign::Attractive).unwrap());
    let bx = SearchBox::around(&ctx);
    let opts = SearchOptions::default();
    let out = find_critical_points(&ctx, &bx, &default_starts(&ctx, &bx, &opts), &opts);
    for p in &out.points {
        println!(
            "x = [{:>8.4}, {:>8.4}, {:>8.4}] index {} G = {:.5} eigenvalues {:?}",
            p.x[0], p.x[1], p.x[2], p.morse_index, p.g_value, p.eigenvalues
        );
    }
    let doubled_opts = SearchOptions { n_starts: 2 * opts.n_starts, ..opts.clone() };
    let doubled = find_critical_points(&ctx, &bx, &default_starts(&ctx, &bx, &doubled_opts), &doubled_opts);
    let stable = same_points(&out.points, &doubled.points, 1e-6 * bx.diameter());
    let c = ctx.curves().center();
    let neg = |x: &[f64]| ctx.grad(x).map(|g| g.iter().map(|v| -v).collect::<Vec<f64>>());
    let far = degree_3d(&neg, &SurfaceMesh::sphere([c[0], c[1], c[2]], 10.0 * ctx.curves().radius(), 12, 24)).unwrap();
    let census = morse_census(&out.points, far.value, stable).unwrap();
    println!(
        "m1 = {}, m2 = {}, m3 = {}: identity {}, degree sum {} vs far field {}, exhaustive {}",
        census.m1, census.m2, census.m3, census.identity_holds, census.degree_sum, census.far_field_degree, census.exhaustive
    );
}
