//! Connected components of the plane minus a closed curve, and their winding numbers.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::PeriodicCurve;
use crate::degree::Loop;
use crate::field::Sign;

pub const DEFAULT_RESOLUTION: usize = 1024;
const POLYLINE_SAMPLES: usize = 1024;
const MIN_COMPONENT_CELLS: usize = 4;
const CURVE: i32 = -1;
const NOISE: i32 = -2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanarError {
    #[error("curve must be planar, got dimension {0}")]
    NotPlanar(usize),
    #[error("resolution {0} below the minimum of 128")]
    Resolution(usize),
    #[error("point {point:?} is within {distance:.3e} of the curve")]
    TooClose { point: [f64; 2], distance: f64 },
    #[error("winding number did not settle (residue {residue:.3}) at {point:?}")]
    WindingUnsettled { point: [f64; 2], residue: f64 },
    #[error("component {0} does not exist or is unbounded")]
    NoSuchComponent(usize),
    #[error("erosion by {delta} empties component {id}; try a smaller distance (max distance in component is {max_distance:.3e})")]
    EmptyErosion { id: usize, delta: f64, max_distance: f64 },
}

/// Closed polyline of a planar curve with a bucket index for nearest-segment queries.
#[derive(Clone, Debug)]
pub struct Polyline {
    points: Vec<[f64; 2]>,
    lo: [f64; 2],
    bin: f64,
    bins: usize,
    buckets: Vec<Vec<u32>>,
}

impl Polyline {
    pub fn new(curve: &PeriodicCurve, samples: usize) -> Self {
        let s = curve.sample(samples, 0);
        let points: Vec<[f64; 2]> = s.chunks(curve.dimension()).map(|p| [p[0], p[1]]).collect();
        Self::from_points(points)
    }

    pub fn from_points(points: Vec<[f64; 2]>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let bins = 32;
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let bin = span * (1.0 + 1e-9) / bins as f64;
        let mut buckets = vec![Vec::new(); bins * bins];
        let m = points.len();
        for i in 0..m {
            let (a, b) = (points[i], points[(i + 1) % m]);
            let cell = |x: f64, d: usize| (((x - lo[d]) / bin).floor().max(0.0) as usize).min(bins - 1);
            let (x0, x1) = (cell(a[0].min(b[0]), 0), cell(a[0].max(b[0]), 0));
            let (y0, y1) = (cell(a[1].min(b[1]), 1), cell(a[1].max(b[1]), 1));
            for x in x0..=x1 {
                for y in y0..=y1 {
                    buckets[x * bins + y].push(i as u32);
                }
            }
        }
        Self {
            points,
            lo,
            bin,
            bins,
            buckets,
        }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    fn segment_distance(&self, i: usize, p: [f64; 2]) -> f64 {
        let a = self.points[i];
        let b = self.points[(i + 1) % self.points.len()];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let ap = [p[0] - a[0], p[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let s = if len2 > 0.0 {
            ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ((ap[0] - s * ab[0]).powi(2) + (ap[1] - s * ab[1]).powi(2)).sqrt()
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let n = self.bins as i64;
        let fx = ((p[0] - self.lo[0]) / self.bin).floor() as i64;
        let fy = ((p[1] - self.lo[1]) / self.bin).floor() as i64;
        let cx = fx.clamp(0, n - 1);
        let cy = fy.clamp(0, n - 1);
        // distance from p to the box of bins, for points outside it
        let outside = ((fx - cx).abs().max((fy - cy).abs()) - 1).max(0) as f64 * self.bin;
        let mut best = f64::INFINITY;
        for ring in 0..=n {
            for x in (cx - ring)..=(cx + ring) {
                for y in (cy - ring)..=(cy + ring) {
                    if (x - cx).abs() != ring && (y - cy).abs() != ring {
                        continue;
                    }
                    if x < 0 || y < 0 || x >= n || y >= n {
                        continue;
                    }
                    for &s in &self.buckets[(x * n + y) as usize] {
                        best = best.min(self.segment_distance(s as usize, p));
                    }
                }
            }
            // anything in ring + 1 or beyond is at least this far
            if best <= (ring as f64 * self.bin).max(outside) {
                break;
            }
        }
        best
    }

    /// Signed angle swept by `q - p` as `q` runs along the polyline, in turns.
    pub fn turns_around(&self, p: [f64; 2]) -> f64 {
        let m = self.points.len();
        let mut total = 0.0;
        for i in 0..m {
            let a = self.points[i];
            let b = self.points[(i + 1) % m];
            let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
            let (bx, by) = (b[0] - p[0], b[1] - p[1]);
            total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
        }
        total / TAU
    }
}

/// Winding number of `curve` around `x`, refining the polyline until the angle sum settles.
pub fn winding_number(curve: &PeriodicCurve, x: [f64; 2]) -> Result<i64, PlanarError> {
    if curve.dimension() != 2 {
        return Err(PlanarError::NotPlanar(curve.dimension()));
    }
    let scale = curve.radius().max(1.0);
    let mut samples = POLYLINE_SAMPLES;
    let mut last = None;
    loop {
        let poly = Polyline::new(curve, samples);
        let d = poly.distance(x);
        if d < 1e-9 * scale {
            return Err(PlanarError::TooClose { point: x, distance: d });
        }
        let raw = poly.turns_around(x);
        let value = raw.round();
        let residue = (raw - value).abs();
        // a segment longer than the distance to x may cut across it
        let max_seg = poly
            .points
            .iter()
            .zip(poly.points.iter().cycle().skip(1))
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        let resolved = max_seg < d;
        if residue < 0.25 && (resolved || last == Some(value)) {
            return Ok(value as i64);
        }
        if samples >= 1 << 20 {
            return Err(PlanarError::WindingUnsettled { point: x, residue });
        }
        last = (residue < 0.25).then_some(value);
        samples *= 2;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub id: usize,
    pub bounded: bool,
    pub winding: i64,
    pub representative: [f64; 2],
    pub cell_count: usize,
    /// Distance from the representative to the curve polyline.
    pub clearance: f64,
    /// Winding agreed at every re-sampled cell.
    pub winding_consistent: bool,
}

/// Raster decomposition of the plane minus a curve, over a square box.
#[derive(Clone, Debug)]
pub struct ComplementMap {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub resolution: usize,
    /// Per cell (row-major in x then y): component id, `-1` curve, `-2` discarded noise.
    labels: Vec<i32>,
    pub components: Vec<ComponentInfo>,
    pub discarded_cells: usize,
    pub curve_cells: usize,
    polyline: Polyline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementSummary {
    pub resolution: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub r: usize,
    pub s: usize,
    pub windings: Vec<i64>,
    pub components: Vec<ComponentInfo>,
    pub curve_cells: usize,
    pub discarded_cells: usize,
    pub partition_ok: bool,
}

impl ComplementMap {
    pub fn cell_size(&self) -> f64 {
        (self.hi[0] - self.lo[0]) / self.resolution as f64
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.cell_size();
        [self.lo[0] + (i as f64 + 0.5) * h, self.lo[1] + (j as f64 + 0.5) * h]
    }

    pub fn label(&self, i: usize, j: usize) -> i32 {
        self.labels[i * self.resolution + j]
    }

    pub fn label_at(&self, p: [f64; 2]) -> Option<i32> {
        let h = self.cell_size();
        let i = ((p[0] - self.lo[0]) / h).floor();
        let j = ((p[1] - self.lo[1]) / h).floor();
        if i < 0.0 || j < 0.0 || i >= self.resolution as f64 || j >= self.resolution as f64 {
            return None;
        }
        Some(self.label(i as usize, j as usize))
    }

    pub fn polyline(&self) -> &Polyline {
        &self.polyline
    }

    pub fn bounded(&self) -> impl Iterator<Item = &ComponentInfo> {
        self.components.iter().filter(|c| c.bounded)
    }

    /// Number of bounded components.
    pub fn r(&self) -> usize {
        self.bounded().count()
    }

    /// Number of distinct winding values among bounded components.
    pub fn s(&self) -> usize {
        let mut w: Vec<i64> = self.bounded().map(|c| c.winding).collect();
        w.sort_unstable();
        w.dedup();
        w.len()
    }

    /// Windings of bounded components, descending.
    pub fn windings(&self) -> Vec<i64> {
        let mut w: Vec<i64> = self.bounded().map(|c| c.winding).collect();
        w.sort_unstable_by(|a, b| b.cmp(a));
        w
    }

    /// Cell counts add up to the whole box.
    pub fn partition_ok(&self) -> bool {
        let labelled: usize = self.components.iter().map(|c| c.cell_count).sum();
        labelled + self.discarded_cells + self.curve_cells == self.resolution * self.resolution
    }

    pub fn summary(&self) -> ComplementSummary {
        ComplementSummary {
            resolution: self.resolution,
            lo: self.lo,
            hi: self.hi,
            r: self.r(),
            s: self.s(),
            windings: self.windings(),
            components: self.components.clone(),
            curve_cells: self.curve_cells,
            discarded_cells: self.discarded_cells,
            partition_ok: self.partition_ok(),
        }
    }

    fn cells_of(&self, id: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.resolution;
        (0..n * n)
            .filter(move |&k| self.labels[k] == id as i32)
            .map(move |k| (k / n, k % n))
    }
}

/// Rasterizes the curve, flood-fills the rest and computes windings per component.
pub fn analyze_complement(curve: &PeriodicCurve, resolution: usize) -> Result<ComplementMap, PlanarError> {
    if curve.dimension() != 2 {
        return Err(PlanarError::NotPlanar(curve.dimension()));
    }
    if resolution < 128 {
        return Err(PlanarError::Resolution(resolution));
    }
    let polyline = Polyline::new(curve, POLYLINE_SAMPLES);
    let center = curve.mean();
    let radius = curve.radius().max(1e-9);
    let half = 3.0 * radius;
    let lo = [center[0] - half, center[1] - half];
    let hi = [center[0] + half, center[1] + half];
    let n = resolution;
    let h = 2.0 * half / n as f64;
    let mut labels = vec![i32::MAX; n * n];

    // thickened raster of the polyline
    let pts = polyline.points();
    let cell_of = |p: [f64; 2]| {
        let i = ((p[0] - lo[0]) / h).floor() as i64;
        let j = ((p[1] - lo[1]) / h).floor() as i64;
        (i, j)
    };
    for k in 0..pts.len() {
        let (a, b) = (pts[k], pts[(k + 1) % pts.len()]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let steps = (4.0 * len / h).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let f = s as f64 / steps as f64;
            let (i, j) = cell_of([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let (x, y) = (i + di, j + dj);
                    if x >= 0 && y >= 0 && (x as usize) < n && (y as usize) < n {
                        labels[x as usize * n + y as usize] = CURVE;
                    }
                }
            }
        }
    }
    let curve_cells = labels.iter().filter(|&&l| l == CURVE).count();

    // 4-connected flood fill
    let mut raw_components: Vec<(Vec<usize>, bool)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut scratch = vec![false; n * n];
    for start in 0..n * n {
        if labels[start] != i32::MAX || scratch[start] {
            continue;
        }
        let mut cells = Vec::new();
        let mut touches_edge = false;
        scratch[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            cells.push(k);
            let (i, j) = (k / n, k % n);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                touches_edge = true;
            }
            let mut visit = |m: usize| {
                if labels[m] == i32::MAX && !scratch[m] {
                    scratch[m] = true;
                    queue.push_back(m);
                }
            };
            if i > 0 {
                visit(k - n);
            }
            if i + 1 < n {
                visit(k + n);
            }
            if j > 0 {
                visit(k - 1);
            }
            if j + 1 < n {
                visit(k + 1);
            }
        }
        raw_components.push((cells, touches_edge));
    }

    let mut components = Vec::new();
    let mut discarded_cells = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for (cells, unbounded) in raw_components {
        if cells.len() < MIN_COMPONENT_CELLS && !unbounded {
            log::debug!("discarding {}-cell raster component", cells.len());
            discarded_cells += cells.len();
            for &k in &cells {
                labels[k] = NOISE;
            }
            continue;
        }
        let id = components.len();
        for &k in &cells {
            labels[k] = id as i32;
        }
        let center_of = |k: usize| [lo[0] + ((k / n) as f64 + 0.5) * h, lo[1] + ((k % n) as f64 + 0.5) * h];
        let (representative, clearance) = if unbounded {
            let p = center_of(cells[0]);
            (p, polyline.distance(p))
        } else {
            cells
                .iter()
                .map(|&k| {
                    let p = center_of(k);
                    (p, polyline.distance(p))
                })
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("component is nonempty")
        };
        let winding = winding_number(curve, representative)?;
        let mut consistent = true;
        for _ in 0..5 {
            let k = cells[rng.random_range(0..cells.len())];
            let p = center_of(k);
            if polyline.distance(p) < 0.5 * h {
                continue;
            }
            match winding_number(curve, p) {
                Ok(w) if w == winding => {}
                _ => consistent = false,
            }
        }
        components.push(ComponentInfo {
            id,
            bounded: !unbounded,
            winding,
            representative,
            cell_count: cells.len(),
            clearance,
            winding_consistent: consistent,
        });
    }

    Ok(ComplementMap {
        lo,
        hi,
        resolution,
        labels,
        components,
        discarded_cells,
        curve_cells,
        polyline,
    })
}

/// Solution-count predictions from the component data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityBounds {
    pub r: usize,
    pub s: usize,
    pub attractive_bound: usize,
    pub repulsive_bound: usize,
    pub note: Option<String>,
}

impl MultiplicityBounds {
    pub fn for_sign(&self, sign: Sign) -> usize {
        match sign {
            Sign::Attractive => self.attractive_bound,
            Sign::Repulsive => self.repulsive_bound,
        }
    }
}

pub fn multiplicity_bounds(map: &ComplementMap) -> MultiplicityBounds {
    bounds_from_counts(map.r(), map.s())
}

pub fn bounds_from_counts(r: usize, s: usize) -> MultiplicityBounds {
    if r == 0 {
        return MultiplicityBounds {
            r,
            s,
            attractive_bound: 0,
            repulsive_bound: 0,
            note: Some(
                "no bounded complement component: no lower bound is predicted, \
                 but the component condition is not necessary and solutions may still exist"
                    .into(),
            ),
        };
    }
    MultiplicityBounds {
        r,
        s,
        attractive_bound: r,
        repulsive_bound: (r + 1).max(r + s),
        note: None,
    }
}

/// Cells of one component kept away from the curve, with their outline.
#[derive(Clone, Debug)]
pub struct Region {
    pub component: usize,
    pub delta: f64,
    pub cells: Vec<(usize, usize)>,
    /// Closed loops with the region on their left.
    pub boundary: Vec<Loop>,
    /// Smallest distance from a boundary vertex to the curve polyline.
    pub boundary_clearance: f64,
}

impl Region {
    pub fn contains(&self, map: &ComplementMap, p: [f64; 2]) -> bool {
        let h = map.cell_size();
        let i = ((p[0] - map.lo[0]) / h).floor();
        let j = ((p[1] - map.lo[1]) / h).floor();
        if i < 0.0 || j < 0.0 {
            return false;
        }
        self.cells.binary_search(&(i as usize, j as usize)).is_ok()
    }
}

/// Keeps the cells of component `id` whose closed square stays farther than `delta` from the curve.
pub fn erode_component(map: &ComplementMap, id: usize, delta: f64) -> Result<Region, PlanarError> {
    let info = map
        .components
        .get(id)
        .filter(|c| c.bounded)
        .ok_or(PlanarError::NoSuchComponent(id))?;
    let h = map.cell_size();
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    let mut cells: Vec<(usize, usize)> = map
        .cells_of(id)
        .filter(|&(i, j)| map.polyline.distance(map.cell_center(i, j)) > delta + half_diag)
        .collect();
    if cells.is_empty() {
        return Err(PlanarError::EmptyErosion {
            id,
            delta,
            max_distance: info.clearance,
        });
    }
    cells.sort_unstable();
    let inside = |i: i64, j: i64| i >= 0 && j >= 0 && cells.binary_search(&(i as usize, j as usize)).is_ok();

    // directed edges between lattice vertices, region on the left
    let mut out: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    let mut edges = 0usize;
    for &(i, j) in &cells {
        let (i, j) = (i as i64, j as i64);
        let mut add = |a: (i64, i64), b: (i64, i64)| {
            out.entry(a).or_default().push(b);
            edges += 1;
        };
        if !inside(i, j - 1) {
            add((i, j), (i + 1, j));
        }
        if !inside(i + 1, j) {
            add((i + 1, j), (i + 1, j + 1));
        }
        if !inside(i, j + 1) {
            add((i + 1, j + 1), (i, j + 1));
        }
        if !inside(i - 1, j) {
            add((i, j + 1), (i, j));
        }
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    let vertex = |v: (i64, i64)| [map.lo[0] + v.0 as f64 * h, map.lo[1] + v.1 as f64 * h];
    let mut starts: Vec<(i64, i64)> = out.keys().copied().collect();
    starts.sort_unstable();
    let mut boundary = Vec::new();
    for s in starts {
        while let Some(first) = out.get_mut(&s).and_then(|v| v.pop()) {
            let mut lp = vec![vertex(s)];
            let mut prev = s;
            let mut cur = first;
            while cur != s {
                lp.push(vertex(cur));
                let outs = out.get_mut(&cur).expect("every boundary vertex has an exit");
                // at a pinch vertex turn left first so loops do not cross
                let dir = (cur.0 - prev.0, cur.1 - prev.1);
                let left = (cur.0 - dir.1, cur.1 + dir.0);
                let k = outs.iter().position(|&w| w == left).unwrap_or(outs.len() - 1);
                let next = outs.remove(k);
                prev = cur;
                cur = next;
            }
            boundary.push(simplify(lp));
        }
    }
    debug_assert!(edges > 0);
    let boundary_clearance = boundary
        .iter()
        .flatten()
        .map(|&p| map.polyline.distance(p))
        .fold(f64::INFINITY, f64::min);
    Ok(Region {
        component: id,
        delta,
        cells,
        boundary,
        boundary_clearance,
    })
}

/// Drops vertices in the middle of straight runs.
fn simplify(lp: Loop) -> Loop {
    let m = lp.len();
    if m < 4 {
        return lp;
    }
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let a = lp[(k + m - 1) % m];
        let b = lp[k];
        let c = lp[(k + 1) % m];
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if cross.abs() > 1e-12 * (1.0 + b[0].abs() + b[1].abs()).powi(2) {
            out.push(b);
        }
    }
    out
}

/// Loop area by the shoelace formula, positive when counterclockwise.
pub fn loop_area(lp: &Loop) -> f64 {
    let m = lp.len();
    (0..m)
        .map(|k| {
            let (a, b) = (lp[k], lp[(k + 1) % m]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}
