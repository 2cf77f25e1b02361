//! Averaged potential and force of a curve, with derivative and quadrature self-checks.

use forced_kepler::curve::Catalog;
use forced_kepler::field::{ForceContext, Kernel, Sign};

fn main() {
    let set = Catalog::parse("trefoil").unwrap().build().unwrap();
    let ctx = ForceContext::new(set, Kernel::new(2.0, Sign::Attractive).unwrap());
    for x in [[0.0, 0.0, 0.0], [0.5, 0.2, 0.1], [4.0, -3.0, 2.0]] {
        let g = ctx.g_value(&x).unwrap();
        let f = ctx.f_eval(&x).unwrap();
        let (ge, he) = ctx.finite_difference_errors(&x, 1e-3 * ctx.distance(&x)).unwrap();
        let lap = ctx.hess(&x).unwrap().trace();
        println!(
            "x = {x:?}: G = {g:.6}, F = [{:.4}, {:.4}, {:.4}], d = {:.3}, nodes {:?}",
            f[0], f[1], f[2], ctx.distance(&x), ctx.nodes_at(&x).unwrap()
        );
        println!(
            "    FD errors {ge:.1e} / {he:.1e}, doubling change {:.1e}, Laplacian {lap:.3e}",
            ctx.doubling_change(&x).unwrap()
        );
    }
}
