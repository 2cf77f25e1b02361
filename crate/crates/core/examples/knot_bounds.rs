//! Homology rank, tunnel number and the resulting critical-point bounds for catalog knots and links.

use forced_kepler::curve::Catalog;
use forced_kepler::knots3d::{bounds_3d, catalog_link};

fn main() {
    for name in ["unknot", "trefoil", "figure8", "granny", "hopf", "unlink(2, 4)", "unlink(3, 4)", "lemniscate(3)"] {
        let link = catalog_link(&Catalog::parse(name).unwrap()).unwrap();
        let b = bounds_3d(&link);
        println!(
            "{name:>14}: c = {}, double points = {}, r = {}, t = {:?}, r - c + 1 = {}, 2t + 1 = {:?}",
            link.components, link.double_points, link.homology_rank, link.tunnel_number, b.degree_bound, b.morse_bound
        );
    }
}
