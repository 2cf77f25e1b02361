//! Brouwer degrees from boundary data: eroded components, far field, kernel, annulus.

use forced_kepler::curve::Catalog;
use forced_kepler::degree::{circle_loop, degree_2d};
use forced_kepler::field::{ForceContext, Kernel, Sign};
use forced_kepler::planar::{analyze_complement, erode_component};

fn main() {
    let set = Catalog::Epicycloid.build().unwrap();
    let ctx = ForceContext::new(set, Kernel::new(2.0, Sign::Attractive).unwrap());
    let map = analyze_complement(ctx.curve(), 1024).unwrap();
    let f = |x: &[f64]| ctx.f_eval(x);
    let mut sum = 0;
    for c in map.bounded() {
        let region = erode_component(&map, c.id, 0.05).unwrap();
        let d = degree_2d(&f, &region.boundary).unwrap();
        sum += d.value;
        println!(
            "component {} (winding {}): degree {} raw {:.8} refinement {}",
            c.id, c.winding, d.value, d.raw, d.refinement_level
        );
    }
    let neg = |x: &[f64]| ctx.grad(x).map(|g| g.iter().map(|v| -v).collect::<Vec<f64>>());
    let far = degree_2d(&neg, &[circle_loop([0.0, 0.0], 10.0 * ctx.curves().radius(), 64)]).unwrap();
    println!("far field: {} (raw {:.8})", far.value, far.raw);
    println!("annulus by additivity: {}", far.value - sum);
}
