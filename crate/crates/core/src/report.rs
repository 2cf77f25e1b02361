//! Running a scenario: per-task results, bound statuses and invariant checks.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::critical::{
    default_starts, find_critical_points, morse_census, same_points, CriticalPoint, MorseCensus, SearchBox,
    SearchOptions,
};
use crate::curve::{forcing_of, CurveSet, PeriodicCurve};
use crate::degree::{circle_loop, degree_2d, degree_3d, DegreeResult, SurfaceMesh};
use crate::field::{grad_g, ForceContext, Sign};
use crate::knots3d::{bounds_3d, catalog_link, homology_rank, Bounds3d, LinkData, DEFAULT_SAMPLES};
use crate::orbits::{
    continue_in_epsilon, distinct_classes, multistart_search, nondegeneracy, orbit_energy_residual, refinement_change,
    to_physical, MultistartStrategy, OrbitOptions, PeriodicOrbit, SeedFailure,
};
use crate::planar::{analyze_complement, erode_component, multiplicity_bounds, ComplementMap, ComplementSummary, MultiplicityBounds};
use crate::scenario::{Scenario, Task};

pub const REPORT_FORMAT: &str = "forced-kepler-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Hard checks decide the exit status.
    pub hard: bool,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundState {
    Met,
    /// Fewer found than predicted: a limit of the search, not a counterexample.
    NotMetSearchLimit,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundStatus {
    pub name: String,
    pub predicted: Option<i64>,
    pub found: Option<i64>,
    pub status: BoundState,
    pub note: Option<String>,
}

impl BoundStatus {
    fn compare(name: &str, predicted: i64, found: i64, note: Option<String>) -> Self {
        Self {
            name: name.to_string(),
            predicted: Some(predicted),
            found: Some(found),
            status: if found >= predicted { BoundState::Met } else { BoundState::NotMetSearchLimit },
            note,
        }
    }

    fn not_applicable(name: &str, predicted: Option<i64>, note: &str) -> Self {
        Self {
            name: name.to_string(),
            predicted,
            found: None,
            status: BoundState::NotApplicable,
            note: Some(note.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldChecks {
    pub points: usize,
    pub gradient_fd_max: f64,
    pub hessian_fd_max: f64,
    pub quadrature_doubling_max: f64,
    /// Smallest Laplacian of G seen, when `q >= n - 1`.
    pub laplacian_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCount {
    pub resolution: usize,
    pub r: usize,
    pub s: usize,
    pub windings: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub component: usize,
    pub winding: i64,
    pub delta: f64,
    pub cells: usize,
    pub boundary_loops: usize,
    pub boundary_clearance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analyze2dResult {
    pub summary: ComplementSummary,
    pub stability: Vec<ResolutionCount>,
    pub stable: bool,
    pub bounds: MultiplicityBounds,
    pub regions: Vec<RegionSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knots3dResult {
    pub link: LinkData,
    pub bounds: Bounds3d,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeEntry {
    pub name: String,
    pub value: i64,
    pub raw: f64,
    pub residue: f64,
    pub tolerance: f64,
    pub expected: Option<i64>,
    pub refinement_level: u32,
}

impl DegreeEntry {
    fn new(name: String, d: &DegreeResult, tolerance: f64, expected: Option<i64>) -> Self {
        Self {
            name,
            value: d.value,
            raw: d.raw,
            residue: d.residue(),
            tolerance,
            expected,
            refinement_level: d.refinement_level,
        }
    }

    pub fn passed(&self) -> bool {
        self.residue < self.tolerance && self.expected.is_none_or(|e| e == self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeTaskResult {
    pub entries: Vec<DegreeEntry>,
    /// Component degrees agree across all erosion distances.
    pub erosion_stable: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalTaskResult {
    pub points: Vec<CriticalPoint>,
    pub n_starts: usize,
    pub converged: usize,
    pub doubled_count: usize,
    pub stable_under_doubling: bool,
    pub far_field_degree: Option<i64>,
    pub census: Option<MorseCensus>,
    pub census_error: Option<String>,
    /// Bounded component containing each point, planar single curves only.
    pub components: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub orbit: PeriodicOrbit,
    pub u_residual: Option<f64>,
    pub u_tolerance: Option<f64>,
    pub energy_residual: Option<f64>,
    pub energy_tolerance: Option<f64>,
    pub lambda_relation_error: f64,
    pub refinement_change: Option<f64>,
    pub u_norm_range: Option<[f64; 2]>,
    pub component: Option<usize>,
    pub in_eroded_region: Option<bool>,
    /// Nondegeneracy not established, so this orbit's count is tentative.
    pub tentative: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRun {
    pub epsilon: f64,
    pub sign: Sign,
    pub seeds: usize,
    pub orbits: Vec<OrbitRecord>,
    pub failures: Vec<SeedFailure>,
    pub distinct_count: usize,
    pub per_winding: Vec<(i64, usize)>,
    pub negative_control_energy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitsTaskResult {
    pub runs: Vec<OrbitRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbodyResult {
    pub bodies: usize,
    pub homology_rank: usize,
    pub degree_bound: i64,
    pub morse_bound: Option<usize>,
    pub critical_count: usize,
    pub runs: Vec<OrbitRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskError {
    pub task: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub cache_key: String,
    /// The only run-dependent part of a report.
    pub timing: Option<Timing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub format: String,
    pub scenario: Scenario,
    pub field: Option<FieldChecks>,
    pub analyze2d: Option<Analyze2dResult>,
    pub knots3d: Option<Knots3dResult>,
    pub degree: Option<DegreeTaskResult>,
    pub critical: Option<CriticalTaskResult>,
    pub orbits: Option<OrbitsTaskResult>,
    pub nbody: Option<NbodyResult>,
    pub task_errors: Vec<TaskError>,
    pub bounds: Vec<BoundStatus>,
    pub checks: Vec<Check>,
    pub all_hard_checks_pass: bool,
    pub provenance: Provenance,
    /// SHA-256 of the report with this field empty and the timing removed.
    pub digest: String,
}

impl ScenarioReport {
    /// Report with the run-dependent parts removed, for comparisons.
    pub fn deterministic(&self) -> ScenarioReport {
        let mut r = self.clone();
        r.provenance.timing = None;
        r.digest = String::new();
        r
    }

    pub fn compute_digest(&self) -> String {
        let text = serde_json::to_string(&self.deterministic()).expect("reports serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn digest_ok(&self) -> bool {
        self.digest == self.compute_digest()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn bound(&self, name: &str) -> Option<&BoundStatus> {
        self.bounds.iter().find(|b| b.name == name)
    }
}

/// Content hash of the resolved scenario and the tool version.
pub fn cache_key(scenario: &Scenario) -> String {
    let text = serde_json::to_string(scenario).expect("scenarios serialize");
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update([0]);
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

struct Runner<'a> {
    scenario: &'a Scenario,
    set: CurveSet,
    ctx: ForceContext,
    checks: Vec<Check>,
    bounds: Vec<BoundStatus>,
    map: Option<ComplementMap>,
    critical: Option<CriticalTaskResult>,
    link: Option<LinkData>,
    far_field: Option<i64>,
}

fn fmt_eps(e: f64) -> String {
    format!("{e:e}")
}

impl<'a> Runner<'a> {
    fn check(&mut self, name: String, passed: bool, hard: bool, value: Option<f64>, tolerance: Option<f64>, detail: String) {
        self.checks.push(Check {
            name,
            passed,
            hard,
            value,
            tolerance,
            detail,
        });
    }

    fn planar_single(&self) -> bool {
        self.set.dimension() == 2 && self.set.component_count() == 1
    }

    fn map(&mut self) -> Result<&ComplementMap, String> {
        if self.map.is_none() {
            let m = analyze_complement(&self.set.curves()[0], self.scenario.solver.resolution).map_err(|e| e.to_string())?;
            self.map = Some(m);
        }
        Ok(self.map.as_ref().unwrap())
    }

    fn link(&mut self) -> Result<LinkData, String> {
        if self.link.is_none() {
            let link = match self.scenario.curve.catalog_entry() {
                Some(cat) => catalog_link(&cat),
                None => homology_rank(&self.set, DEFAULT_SAMPLES),
            }
            .map_err(|e| e.to_string())?;
            self.link = Some(link);
        }
        Ok(self.link.clone().unwrap())
    }

    fn far_radius(&self) -> f64 {
        self.scenario.solver.far_field_factor * self.set.radius()
    }

    /// Degree of `-grad G` over a large circle or sphere around the curves.
    fn far_field(&mut self) -> Result<DegreeResult, String> {
        let c = self.set.center();
        let r = self.far_radius();
        let ctx = &self.ctx;
        let f = |x: &[f64]| ctx.grad(x).map(|g| g.iter().map(|v| -v).collect::<Vec<f64>>());
        let d = if self.set.dimension() == 2 {
            degree_2d(&f, &[circle_loop([c[0], c[1]], r, 64)])
        } else {
            degree_3d(&f, &SurfaceMesh::sphere([c[0], c[1], c[2]], r, 12, 24))
        }
        .map_err(|e| e.to_string())?;
        self.far_field = Some(d.value);
        Ok(d)
    }

    fn field_checks(&mut self) -> FieldChecks {
        let s = &self.scenario.solver;
        let bx = SearchBox::around(&self.ctx);
        let radius = self.set.radius();
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed);
        let n = self.set.dimension();
        let q = self.ctx.q();
        let (mut gmax, mut hmax, mut dmax, mut lmin) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
        let mut points = 0;
        let mut attempts = 0;
        while points < s.fd_points && attempts < 100 * s.fd_points {
            attempts += 1;
            let x: Vec<f64> = bx.lo.iter().zip(&bx.hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            let d = self.ctx.distance(&x);
            if d < 0.1 * radius {
                continue;
            }
            let Ok((ge, he)) = self.ctx.finite_difference_errors(&x, 1e-3 * d) else {
                continue;
            };
            let Ok(dc) = self.ctx.doubling_change(&x) else { continue };
            gmax = gmax.max(ge);
            hmax = hmax.max(he);
            dmax = dmax.max(dc);
            if let Ok(h) = self.ctx.hess(&x) {
                lmin = lmin.min(h.trace());
            }
            points += 1;
        }
        let laplacian_min = (q >= n as f64 - 1.0).then_some(lmin);
        let fc = FieldChecks {
            points,
            gradient_fd_max: gmax,
            hessian_fd_max: hmax,
            quadrature_doubling_max: dmax,
            laplacian_min,
        };
        self.check("field.gradient_fd".into(), gmax < 1e-6, true, Some(gmax), Some(1e-6), format!("{points} random points, relative error"));
        self.check("field.hessian_fd".into(), hmax < 1e-6, true, Some(hmax), Some(1e-6), format!("{points} random points, relative error"));
        self.check(
            "field.quadrature_doubling".into(),
            dmax < 1e-12,
            true,
            Some(dmax),
            Some(1e-12),
            "relative change of G when the node count doubles".into(),
        );
        if let Some(l) = laplacian_min {
            self.check("field.laplacian".into(), l >= -1e-10, true, Some(l), Some(-1e-10), "minimum Laplacian of G".into());
        }
        fc
    }

    fn analyze2d(&mut self) -> Result<Analyze2dResult, String> {
        let curve = self.set.curves()[0].clone();
        let s = self.scenario.solver.clone();
        let map = self.map()?.clone();
        let mut stability = Vec::new();
        for &res in &s.stability_resolutions {
            let m = if res == map.resolution { map.clone() } else { analyze_complement(&curve, res).map_err(|e| e.to_string())? };
            stability.push(ResolutionCount {
                resolution: res,
                r: m.r(),
                s: m.s(),
                windings: m.windings(),
            });
        }
        let stable = stability.iter().all(|c| c.r == map.r() && c.s == map.s() && c.windings == map.windings());
        let mut regions = Vec::new();
        for info in map.bounded() {
            match erode_component(&map, info.id, s.erosion) {
                Ok(reg) => regions.push(RegionSummary {
                    component: info.id,
                    winding: info.winding,
                    delta: s.erosion,
                    cells: reg.cells.len(),
                    boundary_loops: reg.boundary.len(),
                    boundary_clearance: reg.boundary_clearance,
                }),
                Err(e) => log::warn!("component {}: {e}", info.id),
            }
        }
        let summary = map.summary();
        self.check(
            "analyze2d.partition".into(),
            summary.partition_ok,
            true,
            None,
            None,
            "every raster cell is curve, discarded or in one component".into(),
        );
        self.check(
            "analyze2d.resolution_stability".into(),
            stable,
            true,
            None,
            None,
            format!("r, s and windings agree at resolutions {:?}", s.stability_resolutions),
        );
        let consistent = summary.components.iter().all(|c| c.winding_consistent);
        self.check(
            "analyze2d.winding_consistency".into(),
            consistent,
            false,
            None,
            None,
            "raster winding agrees with the polyline angle sum at each representative".into(),
        );
        Ok(Analyze2dResult {
            stable,
            bounds: multiplicity_bounds(&map),
            summary,
            stability,
            regions,
        })
    }

    fn knots3d(&mut self) -> Result<Knots3dResult, String> {
        let link = self.link()?;
        let bounds = bounds_3d(&link);
        self.check(
            "knots3d.rank".into(),
            link.homology_rank == link.double_points + link.components,
            true,
            None,
            None,
            format!("r = d + c = {} + {}", link.double_points, link.components),
        );
        Ok(Knots3dResult { link, bounds })
    }

    fn degree(&mut self) -> Result<DegreeTaskResult, String> {
        let n = self.set.dimension();
        let tol = if n == 2 { 0.25 } else { 0.1 };
        let mut entries = Vec::new();
        let ff = self.far_field()?;
        entries.push(DegreeEntry::new(
            format!("far_field(-grad G, R = {})", self.far_radius()),
            &ff,
            tol,
            Some(1),
        ));
        let kernel = |x: &[f64]| grad_g(x, self.ctx.q());
        let small = if n == 2 {
            degree_2d(&kernel, &[circle_loop([0.0, 0.0], 0.5, 32)])
        } else {
            degree_3d(&kernel, &SurfaceMesh::sphere([0.0; 3], 0.5, 8, 16))
        }
        .map_err(|e| e.to_string())?;
        entries.push(DegreeEntry::new("kernel(grad g, small sphere)".into(), &small, tol, Some(if n == 2 { 1 } else { -1 })));
        let mut erosion_stable = None;
        if self.planar_single() {
            let s = self.scenario.solver.clone();
            let map = self.map()?.clone();
            let ctx = &self.ctx;
            let f = |x: &[f64]| ctx.f_eval(x);
            let mut sum = 0;
            let mut stable = true;
            for info in map.bounded() {
                let region = erode_component(&map, info.id, s.erosion).map_err(|e| e.to_string())?;
                let d = degree_2d(&f, &region.boundary).map_err(|e| e.to_string())?;
                sum += d.value;
                for &delta in &s.erosion_checks {
                    let other = erode_component(&map, info.id, delta)
                        .map_err(|e| e.to_string())
                        .and_then(|r| degree_2d(&f, &r.boundary).map_err(|e| e.to_string()))
                        .map(|d| d.value);
                    match other {
                        Ok(v) if v == d.value => {}
                        Ok(_) => stable = false,
                        // an erosion that empties a small component proves nothing either way
                        Err(e) => log::debug!("erosion {delta} of component {}: {e}", info.id),
                    }
                }
                entries.push(DegreeEntry::new(
                    format!("component {} (winding {}, erosion {})", info.id, info.winding, s.erosion),
                    &d,
                    tol,
                    Some(1),
                ));
            }
            let annulus = ff.value - sum;
            entries.push(DegreeEntry {
                name: "annulus (far field minus components)".into(),
                value: annulus,
                raw: annulus as f64,
                residue: 0.0,
                tolerance: tol,
                expected: Some(1 - map.r() as i64),
                refinement_level: 0,
            });
            erosion_stable = Some(stable);
            self.check(
                "degree.erosion_stability".into(),
                stable,
                true,
                None,
                None,
                format!("component degrees agree at erosion {} and {:?}", s.erosion, s.erosion_checks),
            );
        }
        for e in &entries {
            self.checks.push(Check {
                name: format!("degree.{}", e.name),
                passed: e.passed(),
                hard: true,
                value: Some(e.raw),
                tolerance: Some(e.tolerance),
                detail: format!("integer {} expected {:?}, residue {:.3e}", e.value, e.expected, e.residue),
            });
        }
        Ok(DegreeTaskResult { entries, erosion_stable })
    }

    fn critical(&mut self) -> Result<CriticalTaskResult, String> {
        if let Some(c) = &self.critical {
            return Ok(c.clone());
        }
        let s = self.scenario.solver.clone();
        let bx = SearchBox::around(&self.ctx);
        let opts = SearchOptions {
            n_starts: s.n_starts,
            seed: s.seed,
            ..Default::default()
        };
        let out = find_critical_points(&self.ctx, &bx, &default_starts(&self.ctx, &bx, &opts), &opts);
        let doubled_opts = SearchOptions {
            n_starts: 2 * s.n_starts,
            fd_check: false,
            ..opts.clone()
        };
        let doubled = find_critical_points(&self.ctx, &bx, &default_starts(&self.ctx, &bx, &doubled_opts), &doubled_opts);
        let stable = same_points(&out.points, &doubled.points, 1e-6 * bx.diameter());
        let mut far_field_degree = None;
        let (mut census, mut census_error) = (None, None);
        if self.set.dimension() == 3 {
            let ff = match self.far_field {
                Some(v) => v,
                None => self.far_field()?.value,
            };
            far_field_degree = Some(ff);
            match morse_census(&out.points, ff, stable) {
                Ok(c) => census = Some(c),
                Err(e) => census_error = Some(e.to_string()),
            }
        }
        let components = if self.planar_single() {
            let map = self.map()?;
            out.points
                .iter()
                .map(|p| map.label_at([p.x[0], p.x[1]]).and_then(|l| (l >= 0).then_some(l as usize)))
                .map(|c| c.filter(|&id| map.components.get(id).is_some_and(|i| i.bounded)))
                .collect()
        } else {
            vec![None; out.points.len()]
        };
        let degenerate = out.points.iter().filter(|p| p.degenerate).count();
        self.check(
            "critical.nondegenerate".into(),
            degenerate == 0,
            false,
            Some(degenerate as f64),
            Some(0.0),
            format!("{} points, {} degenerate", out.points.len(), degenerate),
        );
        let fd = out.points.iter().filter_map(|p| p.hessian_fd_error).fold(0.0, f64::max);
        self.check("critical.hessian_fd".into(), fd < 1e-6, true, Some(fd), Some(1e-6), "Hessian against differences of the gradient at every point".into());
        self.check(
            "critical.stable_under_doubling".into(),
            stable,
            false,
            Some(doubled.points.len() as f64),
            None,
            format!("{} points with {} starts, {} with {}", out.points.len(), s.n_starts, doubled.points.len(), 2 * s.n_starts),
        );
        if let Some(c) = &census {
            self.check(
                "critical.census_identity".into(),
                c.identity_holds,
                c.exhaustive,
                Some((c.m2 as i64 - c.m1 as i64 - c.m3 as i64 - 1) as f64),
                Some(0.0),
                format!(
                    "m1 = {}, m2 = {}, m3 = {}, degree sum {} vs far field {}, exhaustive {}",
                    c.m1, c.m2, c.m3, c.degree_sum, c.far_field_degree, c.exhaustive
                ),
            );
        }
        let nondeg = out.points.iter().filter(|p| !p.degenerate).count() as i64;
        if self.set.dimension() == 3 {
            let link = self.link()?;
            let b = bounds_3d(&link);
            self.bounds.push(BoundStatus::compare(
                "critical.degree_bound",
                b.degree_bound,
                nondeg,
                Some("r - c + 1 against nondegenerate critical points".into()),
            ));
            self.bounds.push(match b.morse_bound {
                Some(m) => BoundStatus::compare("critical.morse_bound", m as i64, nondeg, Some("2t + 1".into())),
                None => BoundStatus::not_applicable("critical.morse_bound", None, "tunnel number unknown"),
            });
        }
        let result = CriticalTaskResult {
            points: out.points,
            n_starts: s.n_starts,
            converged: out.converged,
            doubled_count: doubled.points.len(),
            stable_under_doubling: stable,
            far_field_degree,
            census,
            census_error,
            components,
        };
        self.critical = Some(result.clone());
        Ok(result)
    }

    fn orbit_options(&self) -> OrbitOptions {
        let s = &self.scenario.solver;
        OrbitOptions {
            modes: s.modes,
            max_modes: s.max_modes,
            collision_fraction: s.collision_fraction,
            ..Default::default()
        }
    }

    /// Diagnostics of one orbit, recording the checks under `prefix`.
    fn record(&mut self, orbit: PeriodicOrbit, opts: &OrbitOptions) -> OrbitRecord {
        let mut rec = OrbitRecord {
            lambda_relation_error: orbit.lambda_relation_error(),
            refinement_change: refinement_change(&self.ctx, &orbit, opts).ok(),
            tentative: !orbit.nondegenerate().unwrap_or(false),
            u_residual: None,
            u_tolerance: None,
            energy_residual: None,
            energy_tolerance: None,
            u_norm_range: None,
            component: None,
            in_eroded_region: None,
            orbit,
        };
        if self.set.component_count() == 1 {
            if let Ok(phys) = to_physical(&self.ctx, &rec.orbit) {
                let o = &rec.orbit;
                rec.u_residual = Some(phys.residual_sup);
                rec.u_tolerance = Some(1e-6 * o.lambda * phys.forcing_sup);
                rec.energy_residual = orbit_energy_residual(&self.ctx, o).ok();
                rec.energy_tolerance = Some(1e-6 * o.lambda * phys.forcing_sup * phys.max_speed);
                rec.u_norm_range = Some([phys.min_norm, phys.max_norm]);
            }
        }
        if self.planar_single() && rec.orbit.sign == Sign::Attractive {
            let erosion = self.scenario.solver.erosion;
            if let Ok(map) = self.map() {
                let map = map.clone();
                let c = rec.orbit.center();
                if let Some(id) = map.label_at([c[0], c[1]]).filter(|l| *l >= 0).map(|l| l as usize) {
                    if map.components.get(id).is_some_and(|i| i.bounded) {
                        rec.component = Some(id);
                        if let Ok(region) = erode_component(&map, id, erosion) {
                            let count = 4 * (2 * rec.orbit.modes + 1);
                            let pts = rec.orbit.z.sample(count, 0);
                            rec.in_eroded_region = Some(pts.chunks(2).all(|p| region.contains(&map, [p[0], p[1]])));
                        }
                    }
                }
            }
        }
        rec
    }

    fn orbit_checks(&mut self, prefix: &str, run: &OrbitRun) {
        if run.orbits.is_empty() {
            self.check(
                format!("{prefix}.found"),
                true,
                false,
                Some(0.0),
                None,
                format!("no orbit found from {} seeds, nothing to validate", run.seeds),
            );
            return;
        }
        let certified = run.orbits.iter().all(|r| r.orbit.certified());
        let worst = run.orbits.iter().map(|r| r.orbit.residual_sup / r.orbit.residual_tolerance).fold(0.0, f64::max);
        self.check(
            format!("{prefix}.residual"),
            certified,
            true,
            Some(worst),
            Some(1.0),
            "fine-grid residual over its tolerance 1e-8·max(1, eps·max|grad g|), worst orbit".into(),
        );
        let lam = run.orbits.iter().map(|r| r.lambda_relation_error).fold(0.0, f64::max);
        self.check(format!("{prefix}.lambda_relation"), lam <= 1e-14, true, Some(lam), Some(1e-14), "relative error of eps = lambda^-(q+1)".into());
        let refine = run.orbits.iter().map(|r| r.refinement_change.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
        self.check(format!("{prefix}.refinement"), refine < 1e-8, true, Some(refine), Some(1e-8), "sup change under N -> 2N".into());
        let ratio = |v: Option<f64>, t: Option<f64>| match (v, t) {
            (Some(v), Some(t)) => Some(v / t),
            _ => None,
        };
        let u: Vec<f64> = run.orbits.iter().filter_map(|r| ratio(r.u_residual, r.u_tolerance)).collect();
        if !u.is_empty() {
            let w = u.iter().cloned().fold(0.0, f64::max);
            self.check(format!("{prefix}.u_residual"), w < 1.0, true, Some(w), Some(1.0), "physical residual over 1e-6·lambda·|h|, worst orbit".into());
        }
        let e: Vec<f64> = run.orbits.iter().filter_map(|r| ratio(r.energy_residual, r.energy_tolerance)).collect();
        if !e.is_empty() {
            let w = e.iter().cloned().fold(0.0, f64::max);
            self.check(
                format!("{prefix}.energy_identity"),
                w < 1.0,
                true,
                Some(w),
                Some(1.0),
                "energy identity residual over 1e-6·lambda·|h|·max|u'|, worst orbit".into(),
            );
        }
        if let Some(nc) = run.negative_control_energy {
            self.check(format!("{prefix}.negative_control"), nc > 1e-2, true, Some(nc), Some(1e-2), "perturbed orbit must fail the energy identity".into());
        }
        let suspicious = run
            .orbits
            .iter()
            .filter(|r| r.u_norm_range.is_some_and(|[a, b]| !(1e-6..=1e6).contains(&a) || !(1e-6..=1e6).contains(&b)))
            .count();
        if run.orbits.iter().any(|r| r.u_norm_range.is_some()) {
            self.check(format!("{prefix}.u_bounds"), suspicious == 0, false, Some(suspicious as f64), Some(0.0), "|u| within [1e-6, 1e6]".into());
        }
        let tentative = run.orbits.iter().filter(|r| r.tentative).count();
        self.check(
            format!("{prefix}.nondegenerate"),
            tentative == 0,
            false,
            Some(tentative as f64),
            Some(0.0),
            "orbits whose monodromy test failed are counted as tentative".into(),
        );
        let inside: Vec<bool> = run.orbits.iter().filter_map(|r| r.in_eroded_region).collect();
        if !inside.is_empty() {
            let out = inside.iter().filter(|b| !**b).count();
            self.check(
                format!("{prefix}.inside_eroded_region"),
                out == 0,
                false,
                Some(out as f64),
                Some(0.0),
                "attractive orbits inside the eroded region of their component".into(),
            );
        }
    }

    fn finish_run(&mut self, eps: f64, sign: Sign, seeds: usize, orbits: Vec<PeriodicOrbit>, failures: Vec<SeedFailure>, opts: &OrbitOptions) -> OrbitRun {
        let distinct_tol = self.scenario.solver.distinct_tol;
        let reps = distinct_classes(&orbits, distinct_tol);
        let orbits: Vec<PeriodicOrbit> = reps.into_iter().map(|i| orbits[i].clone()).collect();
        let records: Vec<OrbitRecord> = orbits.into_iter().map(|o| self.record(o, opts)).collect();
        let mut per_winding: Vec<(i64, usize)> = Vec::new();
        for r in &records {
            if let Some(w) = r.orbit.winding {
                match per_winding.iter_mut().find(|(v, _)| *v == w) {
                    Some(e) => e.1 += 1,
                    None => per_winding.push((w, 1)),
                }
            }
        }
        per_winding.sort_by(|a, b| b.0.cmp(&a.0));
        let negative_control_energy = if self.set.component_count() == 1 {
            records.first().and_then(|r| {
                let mut bad = r.orbit.clone();
                let bump = PeriodicCurve::fit(bad.dimension(), 2, |t| {
                    let mut v = vec![0.0; bad.dimension()];
                    v[0] = 0.05 * self.set.radius() * (2.0 * std::f64::consts::TAU * t).cos();
                    v
                });
                bad.z = bad.z.linear_combination(1.0, &bump, 1.0);
                orbit_energy_residual(&self.ctx, &bad).ok()
            })
        } else {
            None
        };
        OrbitRun {
            epsilon: eps,
            sign,
            seeds,
            distinct_count: records.len(),
            orbits: records,
            failures,
            per_winding,
            negative_control_energy,
        }
    }

    fn orbits(&mut self) -> Result<OrbitsTaskResult, String> {
        let crit = self.critical()?;
        let s = self.scenario.solver.clone();
        let sign = self.scenario.kernel.sign;
        let opts = self.orbit_options();
        let windings = if self.planar_single() {
            let mut w = self.map()?.windings();
            w.dedup();
            w
        } else {
            Vec::new()
        };
        let strategy = MultistartStrategy {
            critical_points: crit.points.iter().filter(|p| !p.degenerate).cloned().collect(),
            windings,
            loop_radii: s.loop_radii.clone(),
            random_constants: s.random_constants,
            seed: s.seed,
            max_continuation_steps: s.max_continuation_steps,
            distinct_tol: s.distinct_tol,
            monodromy: true,
        };
        let mut runs = Vec::new();
        for &eps in &s.epsilons {
            let rep = multistart_search(&self.ctx, sign, eps, &strategy, &opts);
            let run = self.finish_run(eps, sign, rep.seeds, rep.orbits, rep.failures, &opts);
            self.orbit_checks(&format!("orbits.eps={}", fmt_eps(eps)), &run);
            self.orbit_bounds(&run);
            runs.push(run);
        }
        Ok(OrbitsTaskResult { runs })
    }

    fn orbit_bounds(&mut self, run: &OrbitRun) {
        let tag = format!("orbits.eps={}", fmt_eps(run.epsilon));
        if !self.planar_single() {
            self.bounds.push(BoundStatus::not_applicable(
                &format!("{tag}.count"),
                None,
                "orbit multiplicity bounds are stated for planar curves",
            ));
            return;
        }
        let Ok(map) = self.map() else { return };
        let mb = multiplicity_bounds(map);
        let windings: Vec<i64> = map.bounded().map(|c| c.winding).collect();
        let predicted = mb.for_sign(run.sign) as i64;
        let found_total = run.distinct_count as i64;
        self.bounds.push(BoundStatus::compare(
            &format!("{tag}.{}_count", run.sign),
            predicted,
            found_total,
            Some(match &mb.note {
                Some(n) => format!("r = {}, s = {}; {n}", mb.r, mb.s),
                None => format!("r = {}, s = {}", mb.r, mb.s),
            }),
        ));
        let other = match run.sign {
            Sign::Attractive => Sign::Repulsive,
            Sign::Repulsive => Sign::Attractive,
        };
        self.bounds.push(BoundStatus::not_applicable(
            &format!("{tag}.{other}_count"),
            Some(mb.for_sign(other) as i64),
            "sign not run in this scenario",
        ));
        let mut classes = windings.clone();
        classes.sort_by(|a, b| b.cmp(a));
        classes.dedup();
        for w in classes {
            let components = windings.iter().filter(|v| **v == w).count() as i64;
            let predicted = match run.sign {
                Sign::Attractive => components,
                Sign::Repulsive => components + 1,
            };
            let found = run.per_winding.iter().find(|(v, _)| *v == w).map_or(0, |e| e.1) as i64;
            self.bounds.push(BoundStatus::compare(
                &format!("{tag}.winding_{w}"),
                predicted,
                found,
                Some(format!("{components} component(s) with winding {w}")),
            ));
        }
    }

    fn nbody(&mut self) -> Result<NbodyResult, String> {
        let link = self.link()?;
        let b = bounds_3d(&link);
        let crit = self.critical()?;
        let s = self.scenario.solver.clone();
        let sign = self.scenario.kernel.sign;
        let opts = self.orbit_options();
        let points: Vec<CriticalPoint> = crit.points.iter().filter(|p| !p.degenerate).cloned().collect();
        let mut runs = Vec::new();
        for &eps in &s.epsilons {
            let mut found = Vec::new();
            let mut failures = Vec::new();
            for (i, p) in points.iter().enumerate() {
                let seed = format!("critical point {i}");
                match continue_in_epsilon(&self.ctx, sign, p, eps, s.max_continuation_steps, &opts) {
                    Ok(br) if br.reached() => {
                        let mut o = br.orbit.expect("a reached branch has an orbit");
                        o.seed = seed;
                        o.monodromy = nondegeneracy(&self.ctx, &o, &opts).ok();
                        found.push(o);
                    }
                    Ok(br) => failures.push(SeedFailure {
                        seed,
                        reason: format!("branch stopped at eps = {:e}: {}", br.last_epsilon, br.last_error.unwrap_or_default()),
                    }),
                    Err(e) => failures.push(SeedFailure { seed, reason: e.to_string() }),
                }
            }
            let run = self.finish_run(eps, sign, points.len(), found, failures, &opts);
            let tag = format!("nbody.eps={}", fmt_eps(eps));
            self.orbit_checks(&tag, &run);
            match b.morse_bound {
                Some(m) => self.bounds.push(BoundStatus::compare(&format!("{tag}.orbits"), m as i64, run.distinct_count as i64, Some("2t + 1 continued orbits".into()))),
                None => self.bounds.push(BoundStatus::not_applicable(&format!("{tag}.orbits"), None, "tunnel number unknown")),
            }
            runs.push(run);
        }
        let count = points.len();
        self.bounds.push(BoundStatus::compare("nbody.degree_bound", b.degree_bound, count as i64, Some("r - n + 2 with n - 1 = c prescribed bodies".into())));
        if let Some(m) = b.morse_bound {
            self.bounds.push(BoundStatus::compare("nbody.morse_bound", m as i64, count as i64, Some("2t + 1 critical points".into())));
        }
        Ok(NbodyResult {
            bodies: link.components + 1,
            homology_rank: link.homology_rank,
            degree_bound: b.degree_bound,
            morse_bound: b.morse_bound,
            critical_count: count,
            runs,
        })
    }
}

/// Runs every task of a validated scenario. Task failures are recorded and the run continues.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport, crate::scenario::ScenarioError> {
    let started = Instant::now();
    let started_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    scenario.validate()?;
    let set = scenario.curve.build()?;
    let s = &scenario.solver;
    let ctx = ForceContext::with_options(set.clone(), scenario.kernel(), s.quadrature_nodes, s.exclusion)
        .map_err(|e| crate::scenario::ScenarioError::Invalid { path: "solver".into(), message: e.to_string() })?;
    let mut runner = Runner {
        scenario,
        set,
        ctx,
        checks: Vec::new(),
        bounds: Vec::new(),
        map: None,
        critical: None,
        link: None,
        far_field: None,
    };
    let mut report = ScenarioReport {
        format: REPORT_FORMAT.into(),
        scenario: scenario.clone(),
        field: None,
        analyze2d: None,
        knots3d: None,
        degree: None,
        critical: None,
        orbits: None,
        nbody: None,
        task_errors: Vec::new(),
        bounds: Vec::new(),
        checks: Vec::new(),
        all_hard_checks_pass: false,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: s.seed,
            cache_key: cache_key(scenario),
            timing: None,
        },
        digest: String::new(),
    };
    let tasks = scenario.ordered_tasks();
    if tasks.iter().any(|t| matches!(t, Task::Degree | Task::Critical | Task::Orbits | Task::Nbody)) {
        report.field = Some(runner.field_checks());
    }
    for task in tasks {
        log::info!("task {}", task.name());
        let err = match task {
            Task::Analyze2d => runner.analyze2d().map(|r| report.analyze2d = Some(r)),
            Task::Knots3d => runner.knots3d().map(|r| report.knots3d = Some(r)),
            Task::Degree => runner.degree().map(|r| report.degree = Some(r)),
            Task::Critical => runner.critical().map(|r| report.critical = Some(r)),
            Task::Orbits => runner.orbits().map(|r| report.orbits = Some(r)),
            Task::Nbody => runner.nbody().map(|r| report.nbody = Some(r)),
        }
        .err();
        if let Some(message) = err {
            log::error!("task {} failed: {message}", task.name());
            runner.checks.push(Check {
                name: format!("{}.completed", task.name()),
                passed: false,
                hard: true,
                value: None,
                tolerance: None,
                detail: message.clone(),
            });
            report.task_errors.push(TaskError {
                task: task.name().into(),
                message,
            });
        }
    }
    report.all_hard_checks_pass = runner.checks.iter().all(|c| c.passed || !c.hard);
    report.checks = runner.checks;
    report.bounds = runner.bounds;
    report.provenance.timing = Some(Timing {
        started_unix,
        wall_seconds: started.elapsed().as_secs_f64(),
    });
    report.digest = report.compute_digest();
    Ok(report)
}

/// Convenience for examples and tests: the force context a scenario describes.
pub fn context_of(scenario: &Scenario) -> Result<ForceContext, crate::scenario::ScenarioError> {
    let set = scenario.curve.build()?;
    ForceContext::with_options(set, scenario.kernel(), scenario.solver.quadrature_nodes, scenario.solver.exclusion)
        .map_err(|e| crate::scenario::ScenarioError::Invalid { path: "solver".into(), message: e.to_string() })
}

/// Forcing `h` of a single-curve scenario.
pub fn forcing(scenario: &Scenario) -> Option<PeriodicCurve> {
    let set = scenario.curve.build().ok()?;
    (set.component_count() == 1).then(|| forcing_of(&set.curves()[0]))
}
