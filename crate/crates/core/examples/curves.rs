//! Builds catalog curves and a curve from its forcing, then prints basic geometry.

use forced_kepler::curve::{forcing_of, second_primitive, Catalog, PeriodicCurve};
use num_complex::Complex64;

fn main() {
    for name in ["epicycloid", "arc(2.0)", "segment", "trefoil", "unlink(2, 4)"] {
        let set = Catalog::parse(name).unwrap().build().unwrap();
        println!(
            "{name:>14}: dimension {}, {} component(s), radius {:.3}",
            set.dimension(),
            set.component_count(),
            set.radius()
        );
    }

    // h = 4 pi^2 e^{2 pi i t} gives back the unit circle as H with H'' = -h
    let h = PeriodicCurve::from_complex_modes(&[(1, Complex64::new(4.0 * std::f64::consts::PI.powi(2), 0.0))]);
    let big_h = second_primitive(&h).unwrap();
    println!("H(0) = {:?}, H(1/4) = {:?}", big_h.point(0.0), big_h.point(0.25));
    let back = forcing_of(&big_h).linear_combination(1.0, &h, -1.0);
    println!("|forcing_of(H) - h| = {:.1e}", back.sup_norm(0, 256));
}
