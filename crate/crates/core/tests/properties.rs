use forced_kepler::critical::{find_critical_points, SearchBox, SearchOptions, default_starts};
use forced_kepler::curve::{second_primitive, Catalog, CurveSet, PeriodicCurve};
use forced_kepler::degree::{circle_loop, degree_2d, degree_3d, SurfaceMesh};
use forced_kepler::field::{ForceContext, Kernel, Sign};
use forced_kepler::orbits::{
    continue_in_epsilon, orbit_energy_residual, to_physical, OrbitOptions,
};
use forced_kepler::planar::{analyze_complement, winding_number};
use num_complex::Complex64;
use proptest::prelude::*;

fn planar_curve(m: i64, re: f64, im: f64) -> PeriodicCurve {
    PeriodicCurve::from_complex_modes(&[(1, Complex64::new(1.0, 0.0)), (m, Complex64::new(re, im))])
}

fn lift(c: &PeriodicCurve, tilt: f64) -> PeriodicCurve {
    let bump = PeriodicCurve::fit(3, 4, |t| vec![0.0, 0.0, tilt * (2.0 * std::f64::consts::TAU * t).sin()]);
    c.embedded(3).linear_combination(1.0, &bump, 1.0)
}

fn ctx_of(curve: PeriodicCurve, q: f64) -> ForceContext {
    ForceContext::new(CurveSet::single(curve), Kernel::new(q, Sign::Attractive).unwrap())
}

fn curve_strategy() -> impl Strategy<Value = PeriodicCurve> {
    (prop::sample::select(vec![-3i64, -2, 2, 3]), -0.3f64..0.3, -0.3f64..0.3).prop_map(|(m, a, b)| planar_curve(m, a, b))
}

fn spatial_strategy() -> impl Strategy<Value = PeriodicCurve> {
    (curve_strategy(), -0.5f64..0.5).prop_map(|(c, t)| lift(&c, t))
}

fn point(ctx: &ForceContext, u: &[f64]) -> Option<Vec<f64>> {
    let r = ctx.curves().radius();
    let c = ctx.curves().center();
    let x: Vec<f64> = c.iter().zip(u).map(|(c, u)| c + 2.0 * r * u).collect();
    (ctx.distance(&x) >= 0.25 * r).then_some(x)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn derivatives_match_finite_differences(
        curve in curve_strategy(),
        q in 2.0f64..4.0,
        u in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let ctx = ctx_of(curve, q);
        let Some(x) = point(&ctx, &u) else { return Ok(()) };
        let (g, h) = ctx.finite_difference_errors(&x, 1e-3 * ctx.distance(&x)).unwrap();
        prop_assert!(g < 1e-6 && h < 1e-6, "gradient {g:e}, hessian {h:e}");
    }

    #[test]
    fn spatial_derivatives_match_finite_differences(
        curve in spatial_strategy(),
        u in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let ctx = ctx_of(curve, 2.0);
        let Some(x) = point(&ctx, &u) else { return Ok(()) };
        let (g, h) = ctx.finite_difference_errors(&x, 1e-3 * ctx.distance(&x)).unwrap();
        prop_assert!(g < 1e-6 && h < 1e-6, "gradient {g:e}, hessian {h:e}");
    }

    #[test]
    fn quadrature_doubling_is_converged(curve in spatial_strategy(), u in prop::collection::vec(-1.0f64..1.0, 3)) {
        let ctx = ctx_of(curve, 2.0);
        let Some(x) = point(&ctx, &u) else { return Ok(()) };
        let change = ctx.doubling_change(&x).unwrap();
        prop_assert!(change < 1e-12, "{change:e}");
    }

    #[test]
    fn potential_is_subharmonic(curve in spatial_strategy(), q in 2.0f64..4.0, u in prop::collection::vec(-1.0f64..1.0, 3)) {
        // q >= n - 1 in space
        let ctx = ctx_of(curve, q);
        let Some(x) = point(&ctx, &u) else { return Ok(()) };
        let lap = ctx.hess(&x).unwrap().trace();
        prop_assert!(lap >= -1e-10 * ctx.g_value(&x).unwrap().max(1.0), "{lap:e}");
    }

    #[test]
    fn potential_stays_below_kernel_at_distance(curve in curve_strategy(), q in 2.0f64..4.0, u in prop::collection::vec(-1.0f64..1.0, 2)) {
        let ctx = ctx_of(curve, q);
        let Some(x) = point(&ctx, &u) else { return Ok(()) };
        let g = ctx.g_value(&x).unwrap();
        let bound = ctx.g_of_distance(&x);
        prop_assert!(g <= bound * (1.0 + 1e-12), "G = {g} > g(d) = {bound}");
    }

    #[test]
    fn second_primitive_inverts_minus_second_derivative(
        coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..6),
    ) {
        let mut modes = vec![vec![Complex64::new(0.0, 0.0); 2]];
        modes.extend(coeffs.iter().map(|(a, b, c, d)| vec![Complex64::new(*a, *b), Complex64::new(*c, *d)]));
        let h = PeriodicCurve::new(2, modes);
        let big_h = second_primitive(&h).unwrap();
        let back = big_h.derivative(2).linear_combination(-1.0, &h, -1.0);
        let scale = h.sup_norm(0, 256).max(1.0);
        prop_assert!(back.sup_norm(0, 256) < 1e-12 * scale);
        prop_assert!(big_h.is_zero_mean());
    }

    #[test]
    fn degree_of_negated_field(a in prop::collection::vec(-2.0f64..2.0, 4), b in prop::collection::vec(-2.0f64..2.0, 9)) {
        let d2 = a[0] * a[3] - a[1] * a[2];
        prop_assume!(d2.abs() > 0.05);
        let f = |x: &[f64]| Ok::<_, forced_kepler::field::FieldError>(vec![a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]]);
        let g = |x: &[f64]| f(x).map(|v| v.iter().map(|c| -c).collect::<Vec<f64>>());
        let lp = [circle_loop([0.0, 0.0], 1.0, 64)];
        let (df, dg) = (degree_2d(&f, &lp).unwrap().value, degree_2d(&g, &lp).unwrap().value);
        prop_assert_eq!(df, d2.signum() as i64);
        prop_assert_eq!(dg, df);

        let m = nalgebra::Matrix3::from_row_slice(&b);
        prop_assume!(m.determinant().abs() > 0.05);
        // a badly conditioned map needs a finer sphere; the bound keeps the test fast
        let sv = m.singular_values();
        prop_assume!(sv.max() / sv.min() < 20.0);
        let f3 = |x: &[f64]| Ok::<_, forced_kepler::field::FieldError>((m * nalgebra::Vector3::new(x[0], x[1], x[2])).iter().copied().collect::<Vec<f64>>());
        let g3 = |x: &[f64]| f3(x).map(|v| v.iter().map(|c| -c).collect::<Vec<f64>>());
        let mesh = SurfaceMesh::sphere([0.0; 3], 1.0, 12, 24);
        let (df, dg) = (degree_3d(&f3, &mesh).unwrap().value, degree_3d(&g3, &mesh).unwrap().value);
        prop_assert_eq!(df, m.determinant().signum() as i64);
        prop_assert_eq!(dg, -df);
    }

    #[test]
    fn winding_is_constant_on_components(curve in curve_strategy(), picks in prop::collection::vec((0usize..1000, 0usize..1000), 8)) {
        let map = analyze_complement(&curve, 256).unwrap();
        for (i, j) in picks {
            let (i, j) = (i * 256 / 1000, j * 256 / 1000);
            let Ok(id) = usize::try_from(map.label(i, j)) else { continue };
            let p = map.cell_center(i, j);
            // cells next to the curve are left to the raster
            if map.polyline().distance(p) < 2.0 * map.cell_size() {
                continue;
            }
            let expected = if map.components[id].bounded { map.components[id].winding } else { 0 };
            prop_assert_eq!(winding_number(&curve, p).unwrap(), expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn component_counts_do_not_depend_on_resolution(res in 400usize..1400) {
        let h = Catalog::Epicycloid.build().unwrap();
        let map = analyze_complement(&h.curves()[0], res).unwrap();
        prop_assert_eq!((map.r(), map.s()), (5, 3));
        let mut w = map.windings();
        w.sort();
        prop_assert_eq!(w, vec![1, 1, 2, 2, 3]);
    }

    #[test]
    fn accepted_orbits_satisfy_the_identities(eps_exp in -4.0f64..-2.0, stretch in 0.8f64..1.25) {
        let curve = PeriodicCurve::fit(2, 2, |t| {
            let a = std::f64::consts::TAU * t;
            vec![stretch * a.cos(), a.sin()]
        });
        let ctx = ctx_of(curve, 2.0);
        let bx = SearchBox::around(&ctx);
        let opts = SearchOptions { n_starts: 32, ..Default::default() };
        let out = find_critical_points(&ctx, &bx, &default_starts(&ctx, &bx, &opts), &opts);
        prop_assert!(!out.points.is_empty());
        let eps = 10f64.powf(eps_exp);
        let branch = continue_in_epsilon(&ctx, Sign::Attractive, &out.points[0], eps, 200, &OrbitOptions::default()).unwrap();
        prop_assert!(branch.reached());
        let orbit = branch.orbit.unwrap();
        prop_assert!(orbit.certified());
        prop_assert!(orbit.lambda_relation_error() <= 1e-14);
        let phys = to_physical(&ctx, &orbit).unwrap();
        let lh = orbit.lambda * phys.forcing_sup;
        prop_assert!(phys.residual_sup < 1e-6 * lh, "u residual {:e}", phys.residual_sup);
        let e = orbit_energy_residual(&ctx, &orbit).unwrap();
        prop_assert!(e < 1e-6 * lh * phys.max_speed, "energy {e:e}");

        let mut bad = orbit.clone();
        let bump = PeriodicCurve::fit(2, 2, |t| vec![0.05 * (2.0 * std::f64::consts::TAU * t).cos(), 0.0]);
        bad.z = bad.z.linear_combination(1.0, &bump, 1.0);
        prop_assert!(orbit_energy_residual(&ctx, &bad).unwrap() > 1e-2);
    }
}

#[test]
fn local_degree_matches_morse_index() {
    let set = Catalog::Epicycloid.build().unwrap();
    let ctx = ForceContext::new(set, Kernel::new(2.0, Sign::Attractive).unwrap());
    let bx = SearchBox::around(&ctx);
    let opts = SearchOptions { n_starts: 128, ..Default::default() };
    let out = find_critical_points(&ctx, &bx, &default_starts(&ctx, &bx, &opts), &opts);
    assert_eq!(out.points.len(), 5);
    for p in &out.points {
        let r = 0.2 * p.distance_to_k;
        let f = |x: &[f64]| ctx.grad(x).map(|g| g.iter().map(|v| -v).collect::<Vec<f64>>());
        let d = degree_2d(&f, &[circle_loop([p.x[0], p.x[1]], r, 64)]).unwrap();
        assert_eq!(d.value, p.negative_gradient_degree(), "at {:?}", p.x);
    }
}
