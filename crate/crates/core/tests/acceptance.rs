//! End-to-end acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use forced_kepler::critical::{default_starts, find_critical_points, morse_census, SearchBox, SearchOptions};
use forced_kepler::curve::{Catalog, PeriodicCurve};
use forced_kepler::degree::{circle_loop, degree_2d, degree_3d, SurfaceMesh};
use forced_kepler::field::{grad_g, ForceContext, Kernel, Sign};
use forced_kepler::knots3d::{bounds_3d, catalog_link};
use forced_kepler::orbits::{orbit_distance, solve_at_lambda, OrbitError, OrbitOptions};
use forced_kepler::planar::{analyze_complement, erode_component, multiplicity_bounds, winding_number};
use forced_kepler::report::{run_scenario, BoundState, OrbitRun, ScenarioReport};
use forced_kepler::scenario::Scenario;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"));
    Scenario::load(&path).unwrap()
}

/// A report computed once per process, with the time it took.
fn cached(cell: &'static OnceLock<(ScenarioReport, Duration)>, name: &str) -> &'static (ScenarioReport, Duration) {
    cell.get_or_init(|| {
        let t = Instant::now();
        let r = run_scenario(&scenario(name)).unwrap();
        (r, t.elapsed())
    })
}

fn epicycloid() -> &'static (ScenarioReport, Duration) {
    static CELL: OnceLock<(ScenarioReport, Duration)> = OnceLock::new();
    cached(&CELL, "epicycloid")
}

fn attractive_run() -> &'static OrbitRun {
    &epicycloid().0.orbits.as_ref().unwrap().runs[0]
}

fn ctx(name: &str, sign: Sign) -> ForceContext {
    ForceContext::new(Catalog::parse(name).unwrap().build().unwrap(), Kernel::new(2.0, sign).unwrap())
}

struct Verdict {
    id: u32,
    title: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
    started: Instant,
    budget: Duration,
}

impl Verdict {
    fn new(id: u32, title: &'static str, budget_s: u64) -> Self {
        Self {
            id,
            title,
            failures: Vec::new(),
            notes: Vec::new(),
            started: Instant::now(),
            budget: Duration::from_secs(budget_s),
        }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    /// Prints the line and fails the test on any unmet expectation. `extra` is shared work done elsewhere.
    fn finish(self, extra: Duration) {
        let elapsed = self.started.elapsed() + extra;
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let budget = if elapsed <= self.budget { "within" } else { "over" };
        println!(
            "criterion {}: {status} {} [{:.1}s, {budget} the {}s budget] {}{}",
            self.id,
            self.title,
            elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.notes.join("; "),
            if self.failures.is_empty() { String::new() } else { format!(" | failed: {}", self.failures.join("; ")) }
        );
        assert!(self.failures.is_empty(), "criterion {} failed: {:?}", self.id, self.failures);
    }
}

#[test]
fn criterion_01_epicycloid_topology() {
    let mut v = Verdict::new(1, "epicycloid topology", 10);
    let h = Catalog::Epicycloid.build().unwrap();
    for res in [512, 1024, 2048] {
        let map = analyze_complement(&h.curves()[0], res).unwrap();
        let mut w = map.windings();
        w.sort_by(|a, b| b.cmp(a));
        let b = multiplicity_bounds(&map);
        v.expect(
            map.r() == 5 && map.s() == 3 && w == vec![3, 2, 2, 1, 1] && b.attractive_bound == 5 && b.repulsive_bound == 8,
            format!("res {res}: r={} s={} windings {w:?} bounds {}/{}", map.r(), map.s(), b.attractive_bound, b.repulsive_bound),
        );
    }
    v.finish(Duration::ZERO);
}

#[test]
fn criterion_02_degree_certificates() {
    let mut v = Verdict::new(2, "degree certificates", 30);
    let c = ctx("epicycloid", Sign::Attractive);
    let map = analyze_complement(c.curve(), 1024).unwrap();
    let f = |x: &[f64]| c.f_eval(x);
    let mut sum = 0;
    for info in map.bounded() {
        let region = erode_component(&map, info.id, 0.05).unwrap();
        let d = degree_2d(&f, &region.boundary).unwrap();
        sum += d.value;
        v.expect(d.value == 1 && d.residue() < 0.25, format!("component w={} deg {} (raw {:.6})", info.winding, d.value, d.raw));
    }
    let neg = |x: &[f64]| c.grad(x).map(|g| g.iter().map(|v| -v).collect::<Vec<f64>>());
    let r_far = 10.0 * c.curves().radius();
    let far = degree_2d(&neg, &[circle_loop([0.0, 0.0], r_far, 64)]).unwrap();
    v.expect(far.value == 1 && far.residue() < 0.25, format!("far field n=2 deg {} (raw {:.6})", far.value, far.raw));
    let annulus = far.value - sum;
    v.expect(annulus == -4, format!("annulus deg {annulus}"));

    let u = ctx("unknot", Sign::Attractive);
    let neg3 = |x: &[f64]| u.grad(x).map(|g| g.iter().map(|v| -v).collect::<Vec<f64>>());
    let far3 = degree_3d(&neg3, &SurfaceMesh::sphere([0.0; 3], 10.0 * u.curves().radius(), 12, 24)).unwrap();
    v.expect(far3.value == 1 && far3.residue() < 0.1, format!("far field unknot deg {} (raw {:.6})", far3.value, far3.raw));

    let k = |x: &[f64]| grad_g(x, 2.0);
    let k2 = degree_2d(&k, &[circle_loop([0.0, 0.0], 0.3, 32)]).unwrap();
    let k3 = degree_3d(&k, &SurfaceMesh::sphere([0.0; 3], 0.3, 8, 16)).unwrap();
    v.expect(k2.value == 1 && k2.residue() < 0.25, format!("kernel n=2 deg {}", k2.value));
    v.expect(k3.value == -1 && k3.residue() < 0.1, format!("kernel n=3 deg {}", k3.value));
    v.finish(Duration::ZERO);
}

#[test]
fn criterion_03_attractive_orbit_counts() {
    let (report, shared) = epicycloid();
    let mut v = Verdict::new(3, "attractive epicycloid orbits", 60);
    let run = attractive_run();
    let orbits: Vec<_> = run.orbits.iter().map(|r| &r.orbit).collect();
    v.expect(orbits.len() == 5, format!("{} distinct orbits", orbits.len()));
    let mut min_sep = f64::INFINITY;
    for i in 0..orbits.len() {
        for j in 0..i {
            min_sep = min_sep.min(orbit_distance(orbits[i], orbits[j]));
        }
    }
    v.expect(min_sep > 1e-3, format!("min pairwise distance {min_sep:.3}"));
    let worst = orbits.iter().map(|o| o.residual_sup).fold(0.0, f64::max);
    v.expect(worst < 1e-8, format!("max residual {worst:.2e}"));
    let mut components: Vec<usize> = run.orbits.iter().filter_map(|r| r.component).collect();
    components.sort();
    components.dedup();
    v.expect(components.len() == 5, format!("orbits sit in {} distinct components", components.len()));
    v.expect(run.orbits.iter().all(|r| r.in_eroded_region == Some(true)), "all inside their eroded region");
    for o in &orbits {
        let m = o.monodromy.as_ref().unwrap();
        v.expect(
            m.nondegenerate,
            format!("w={:?} det(M-I)={:.1e} sigma_min={:.1e}", o.winding, m.det_gap, m.sigma_min),
        );
    }
    v.note(format!("seed {}", report.scenario.solver.seed));
    v.finish(*shared);
}

#[test]
fn criterion_04_solution_identities() {
    // the shared run is charged to criterion 3
    epicycloid();
    let mut v = Verdict::new(4, "solution identities", 10);
    let run = attractive_run();
    v.expect(!run.orbits.is_empty(), format!("{} orbits checked", run.orbits.len()));
    for r in &run.orbits {
        let (u, ut) = (r.u_residual.unwrap(), r.u_tolerance.unwrap());
        let (e, et) = (r.energy_residual.unwrap(), r.energy_tolerance.unwrap());
        v.expect(u < ut && e < et && r.lambda_relation_error <= 1e-14, format!("u {:.1e}/{ut:.1e} energy {:.1e}/{et:.1e} lambda rel {:.1e}", u, e, r.lambda_relation_error));
    }
    let nc = run.negative_control_energy.unwrap();
    v.expect(nc > 1e-2, format!("negative control energy residual {nc:.2e}"));
    v.finish(Duration::ZERO);
}

#[test]
fn criterion_05_unknot_morse_data() {
    let mut v = Verdict::new(5, "unknot Morse data", 20);
    let c = ctx("unknot", Sign::Attractive);
    let bx = SearchBox::around(&c);
    let opts = SearchOptions::default();
    let out = find_critical_points(&c, &bx, &default_starts(&c, &bx, &opts), &opts);
    v.expect(out.points.len() == 1, format!("{} critical points", out.points.len()));
    if let Some(p) = out.points.first() {
        let r = p.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        v.expect(r < 1e-6 && p.morse_index == 1, format!("|x| = {r:.1e}, index {}", p.morse_index));
    }
    let neg = |x: &[f64]| c.grad(x).map(|g| g.iter().map(|v| -v).collect::<Vec<f64>>());
    let far = degree_3d(&neg, &SurfaceMesh::sphere([0.0; 3], 10.0, 12, 24)).unwrap().value;
    let census = morse_census(&out.points, far, true).unwrap();
    v.expect(
        (census.m1, census.m2, census.m3) == (0, 1, 0) && census.identity_holds,
        format!("m = ({}, {}, {})", census.m1, census.m2, census.m3),
    );
    v.expect(census.degree_sum == 1 && far == 1, format!("degree sum {} far field {far}", census.degree_sum));
    let b = bounds_3d(&catalog_link(&Catalog::parse("unknot").unwrap()).unwrap());
    v.expect(b.morse_bound == Some(1) && out.points.len() >= 1, "bound 2t+1 = 1 met");
    v.finish(Duration::ZERO);
}

#[test]
fn criterion_06_trefoil_bound() {
    let t = Instant::now();
    let report = run_scenario(&scenario("trefoil")).unwrap();
    let mut v = Verdict::new(6, "trefoil knot bound", 120);
    let crit = report.critical.as_ref().unwrap();
    let nondeg = crit.points.iter().filter(|p| !p.degenerate).count();
    v.expect(nondeg >= 3, format!("{nondeg} nondegenerate critical points"));
    let census = crit.census.as_ref().unwrap();
    v.expect(census.exhaustive && census.identity_holds, format!("m = ({}, {}, {}) exhaustive {}", census.m1, census.m2, census.m3, census.exhaustive));
    let b = report.bound("critical.morse_bound").unwrap();
    v.expect(b.status == BoundState::Met && b.predicted == Some(3), format!("2t+1 = {:?} {:?}", b.predicted, b.status));
    v.expect(crit.stable_under_doubling, format!("{} points with doubled starts", crit.doubled_count));
    let extra = t.elapsed() - v.started.elapsed();
    v.finish(extra);
}

#[test]
fn criterion_07_unlink_nbody() {
    let t = Instant::now();
    let report = run_scenario(&scenario("unlink_nbody")).unwrap();
    let mut v = Verdict::new(7, "restricted n-body unlink", 120);
    let nb = report.nbody.as_ref().unwrap();
    v.expect(nb.homology_rank == 2, format!("r = {}", nb.homology_rank));
    v.expect(nb.degree_bound == 1, format!("degree bound {}", nb.degree_bound));
    v.expect(nb.morse_bound == Some(3), format!("morse bound {:?}", nb.morse_bound));
    v.expect(nb.critical_count >= 3, format!("{} critical points", nb.critical_count));
    let run = &nb.runs[0];
    v.expect(run.epsilon == 1e-3 && run.distinct_count >= 3, format!("{} distinct orbits at eps {:e}", run.distinct_count, run.epsilon));
    v.expect(run.orbits.iter().all(|r| r.orbit.certified()), "all certified");
    let extra = t.elapsed() - v.started.elapsed();
    v.finish(extra);
}

#[test]
fn criterion_08_degenerate_cases() {
    let t = Instant::now();
    let seg = run_scenario(&scenario("segment")).unwrap();
    let mut v = Verdict::new(8, "degenerate cases", 20);
    let a = seg.analyze2d.as_ref().unwrap();
    v.expect(a.summary.r == 0, format!("segment r = {}", a.summary.r));
    let run = &seg.orbits.as_ref().unwrap().runs[0];
    v.expect(run.sign == Sign::Repulsive && run.distinct_count == 0, format!("repulsive segment orbits {} from {} seeds", run.distinct_count, run.seeds));
    let arc = run_scenario(&scenario("arc")).unwrap();
    let b = &arc.analyze2d.as_ref().unwrap().bounds;
    v.expect(
        b.r == 0 && b.note.as_deref().is_some_and(|n| n.contains("not necessary")),
        format!("arc(2.0) r = {}, note {:?}", b.r, b.note),
    );
    let c = ctx("circle", Sign::Attractive);
    let guess = PeriodicCurve::zero(2);
    for sign in [Sign::Attractive, Sign::Repulsive] {
        match solve_at_lambda(&c, sign, 0.0, &guess, &OrbitOptions::default()) {
            Err(OrbitError::Refused(reason)) => v.expect(true, format!("{sign:?} lambda=0 refused: {reason}")),
            other => v.expect(false, format!("{sign:?} lambda=0 gave {:?}", other.map(|o| o.residual_sup))),
        }
    }
    let extra = t.elapsed() - v.started.elapsed();
    v.finish(extra);
}

#[test]
fn criterion_09_numerical_hygiene() {
    let (report, _) = epicycloid();
    let t = Instant::now();
    let unknot = run_scenario(&scenario("unknot")).unwrap();
    let mut v = Verdict::new(9, "numerical hygiene", 30);
    for r in [report, &unknot] {
        let f = r.field.as_ref().unwrap();
        let name = &r.scenario.name;
        v.expect(f.points == 50, format!("{name}: {} random points", f.points));
        v.expect(f.gradient_fd_max < 1e-6 && f.hessian_fd_max < 1e-6, format!("{name}: FD grad {:.1e} hess {:.1e}", f.gradient_fd_max, f.hessian_fd_max));
        v.expect(f.quadrature_doubling_max < 1e-12, format!("{name}: doubling {:.1e}", f.quadrature_doubling_max));
        let lap = f.laplacian_min.unwrap();
        v.expect(lap >= -1e-10, format!("{name}: min Laplacian {lap:.1e}"));
    }
    let refine = attractive_run().orbits.iter().map(|r| r.refinement_change.unwrap()).fold(0.0, f64::max);
    v.expect(refine < 1e-8, format!("orbit change under N -> 2N {refine:.1e}"));
    let extra = t.elapsed() - v.started.elapsed();
    v.finish(extra);
}

#[test]
fn criterion_10_repulsive_bookkeeping() {
    let t = Instant::now();
    let report = run_scenario(&scenario("epicycloid_repulsive")).unwrap();
    let mut v = Verdict::new(10, "repulsive epicycloid bookkeeping (exploratory)", 120);
    let run = &report.orbits.as_ref().unwrap().runs[0];
    let total = report.bound("orbits.eps=1e-3.repulsive_count").unwrap();
    v.expect(total.predicted == Some(8), format!("predicted total {:?}, found {:?} ({:?})", total.predicted, total.found, total.status));
    for w in [3, 2, 1] {
        let b = report.bound(&format!("orbits.eps=1e-3.winding_{w}")).unwrap();
        let found = run.per_winding.iter().find(|e| e.0 == w).map_or(0, |e| e.1) as i64;
        let state_ok = match b.status {
            BoundState::Met => found >= b.predicted.unwrap(),
            BoundState::NotMetSearchLimit => found < b.predicted.unwrap(),
            BoundState::NotApplicable => false,
        };
        v.expect(b.found == Some(found) && state_ok, format!("winding {w}: {found}/{} {:?}", b.predicted.unwrap(), b.status));
    }
    // independent winding tags: turns of u = lambda (z - H) around the origin
    let h = Catalog::Epicycloid.build().unwrap();
    for r in &run.orbits {
        let o = &r.orbit;
        let u = o.z.linear_combination(o.lambda, &h.curves()[0], -o.lambda);
        let w = winding_number(&u, [0.0, 0.0]).unwrap();
        v.expect(o.winding == Some(w) && o.certified(), format!("tag {:?} vs {w}", o.winding));
    }
    let extra = t.elapsed() - v.started.elapsed();
    v.finish(extra);
}
