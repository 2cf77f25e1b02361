//! Brouwer degree of a vector field over a region, read off its boundary.
//!
//! In the plane the degree is the winding of the field along the boundary
//! loops. In space it is the signed area swept on the unit sphere by the
//! normalized field over a closed triangulated surface, summed triangle by
//! triangle with the exact solid angle of each image triangle. The mesh is
//! refined until every image triangle is small, so the piecewise map is
//! homotopic to the field.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldError;

const MAX_DEPTH_2D: u32 = 12;
const MAX_LEVEL_3D: u32 = 3;
/// Largest angle between field directions at the corners of one image triangle.
const MAX_IMAGE_ANGLE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegreeError {
    #[error("field vanishes on the boundary near {point:?} (|f| = {norm:.3e} <= {tol:.3e})")]
    ZeroOnBoundary { point: Vec<f64>, norm: f64, tol: f64 },
    #[error("degree did not converge after refinement level {level} (raw {raw})")]
    NotConverged { level: u32, raw: f64 },
    #[error("boundary is empty")]
    EmptyBoundary,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub value: i64,
    pub raw: f64,
    pub refinement_level: u32,
    pub min_field_norm_on_boundary: f64,
}

impl DegreeResult {
    pub fn residue(&self) -> f64 {
        (self.raw - self.value as f64).abs()
    }

    /// Degree of the difference of two regions (outer minus inner).
    fn minus(self, other: &DegreeResult) -> DegreeResult {
        DegreeResult {
            value: self.value - other.value,
            raw: self.raw - other.raw,
            refinement_level: self.refinement_level.max(other.refinement_level),
            min_field_norm_on_boundary: self.min_field_norm_on_boundary.min(other.min_field_norm_on_boundary),
        }
    }
}

/// Closed polyline, vertices in order, last joined to first.
pub type Loop = Vec<[f64; 2]>;

pub fn circle_loop(center: [f64; 2], radius: f64, samples: usize) -> Loop {
    (0..samples)
        .map(|i| {
            let a = TAU * i as f64 / samples as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        0.0
    } else {
        v[v.len() / 2]
    }
}

fn signed_angle(a: &[f64], b: &[f64]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

struct Winder<'a, F> {
    field: &'a F,
    tol: f64,
    min_norm: f64,
    depth: u32,
}

impl<F> Winder<'_, F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldError>,
{
    fn eval(&mut self, p: [f64; 2]) -> Result<Vec<f64>, DegreeError> {
        let f = (self.field)(&p)?;
        let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= self.tol {
            return Err(DegreeError::ZeroOnBoundary {
                point: p.to_vec(),
                norm,
                tol: self.tol,
            });
        }
        self.min_norm = self.min_norm.min(norm);
        Ok(f)
    }

    /// Angle swept by the field along `a -> b`, bisecting until each step turns less than pi/2.
    fn sweep(&mut self, a: [f64; 2], fa: &[f64], b: [f64; 2], fb: &[f64], depth: u32) -> Result<f64, DegreeError> {
        let step = signed_angle(fa, fb);
        self.depth = self.depth.max(depth);
        if step.abs() < PI / 2.0 {
            // one probe at the midpoint catches a full turn hidden between the ends
            if depth >= 2 {
                return Ok(step);
            }
        }
        if depth >= MAX_DEPTH_2D {
            if step.abs() < PI / 2.0 {
                return Ok(step);
            }
            return Err(DegreeError::NotConverged { level: depth, raw: step / TAU });
        }
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let fm = self.eval(m)?;
        Ok(self.sweep(a, fa, m, &fm, depth + 1)? + self.sweep(m, &fm, b, fb, depth + 1)?)
    }
}

/// Degree of `field` over the region bounded by `loops` (counterclockwise outer loops,
/// clockwise holes). Each edge is bisected until the field turns less than pi/2 per step.
pub fn degree_2d<F>(field: &F, loops: &[Loop]) -> Result<DegreeResult, DegreeError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldError>,
{
    if loops.iter().all(|l| l.len() < 3) {
        return Err(DegreeError::EmptyBoundary);
    }
    let mut values = Vec::with_capacity(loops.len());
    let mut norms = Vec::new();
    for l in loops {
        let vals = l.iter().map(|p| field(p)).collect::<Result<Vec<_>, _>>()?;
        norms.extend(vals.iter().map(|f| f.iter().map(|x| x * x).sum::<f64>().sqrt()));
        values.push(vals);
    }
    let tol = 1e-8 * median(norms);
    let mut w = Winder {
        field,
        tol,
        min_norm: f64::INFINITY,
        depth: 0,
    };
    let mut total = 0.0;
    for (l, vals) in loops.iter().zip(&values) {
        if l.len() < 3 {
            continue;
        }
        for (i, p) in l.iter().enumerate() {
            w.eval(*p)?;
            let j = (i + 1) % l.len();
            total += w.sweep(*p, &vals[i], l[j], &vals[j], 0)?;
        }
    }
    let raw = total / TAU;
    let value = raw.round() as i64;
    let result = DegreeResult {
        value,
        raw,
        refinement_level: w.depth,
        min_field_norm_on_boundary: w.min_norm,
    };
    if result.residue() >= 0.25 {
        return Err(DegreeError::NotConverged { level: w.depth, raw });
    }
    Ok(result)
}

/// Closed, outward-oriented triangulated surface in `R^3`.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    kind: MeshKind,
}

#[derive(Clone, Copy, Debug)]
enum MeshKind {
    Sphere { center: [f64; 3], radius: f64, n_lat: usize, n_lon: usize },
    Cuboid { lo: [f64; 3], hi: [f64; 3], n: usize },
}

impl SurfaceMesh {
    /// Latitude-longitude sphere with `n_lat` bands and `n_lon` meridians.
    pub fn sphere(center: [f64; 3], radius: f64, n_lat: usize, n_lon: usize) -> Self {
        let n_lat = n_lat.max(2);
        let n_lon = n_lon.max(3);
        let mut vertices = vec![[center[0], center[1], center[2] + radius]];
        for i in 1..n_lat {
            let theta = PI * i as f64 / n_lat as f64;
            for j in 0..n_lon {
                let phi = TAU * j as f64 / n_lon as f64;
                vertices.push([
                    center[0] + radius * theta.sin() * phi.cos(),
                    center[1] + radius * theta.sin() * phi.sin(),
                    center[2] + radius * theta.cos(),
                ]);
            }
        }
        vertices.push([center[0], center[1], center[2] - radius]);
        let south = vertices.len() - 1;
        let ring = |i: usize, j: usize| 1 + (i - 1) * n_lon + j % n_lon;
        let mut triangles = Vec::new();
        for j in 0..n_lon {
            triangles.push([0, ring(1, j), ring(1, j + 1)]);
        }
        for i in 1..n_lat - 1 {
            for j in 0..n_lon {
                let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        for j in 0..n_lon {
            triangles.push([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)]);
        }
        Self {
            vertices,
            triangles,
            kind: MeshKind::Sphere { center, radius, n_lat, n_lon },
        }
    }

    /// Surface of the box `[lo, hi]`, each face split into `n x n` cells.
    pub fn cuboid(lo: [f64; 3], hi: [f64; 3], n: usize) -> Self {
        let n = n.max(1);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for side in [0usize, 1] {
                let base = vertices.len();
                for i in 0..=n {
                    for j in 0..=n {
                        let mut p = [0.0; 3];
                        p[axis] = if side == 0 { lo[axis] } else { hi[axis] };
                        p[u] = lo[u] + (hi[u] - lo[u]) * i as f64 / n as f64;
                        p[v] = lo[v] + (hi[v] - lo[v]) * j as f64 / n as f64;
                        vertices.push(p);
                    }
                }
                let idx = |i: usize, j: usize| base + i * (n + 1) + j;
                for i in 0..n {
                    for j in 0..n {
                        let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                        // (u, v, axis) is right-handed, so u x v points along +axis
                        if side == 1 {
                            triangles.push([a, b, d]);
                            triangles.push([a, d, c]);
                        } else {
                            triangles.push([a, d, b]);
                            triangles.push([a, c, d]);
                        }
                    }
                }
            }
        }
        Self {
            vertices,
            triangles,
            kind: MeshKind::Cuboid { lo, hi, n },
        }
    }

    /// Same surface with twice the resolution in every direction.
    pub fn refined(&self) -> Self {
        match self.kind {
            MeshKind::Sphere { center, radius, n_lat, n_lon } => Self::sphere(center, radius, 2 * n_lat, 2 * n_lon),
            MeshKind::Cuboid { lo, hi, n } => Self::cuboid(lo, hi, 2 * n),
        }
    }

    /// Enclosed volume, positive for outward orientation.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
                det3(a, b, c) / 6.0
            })
            .sum()
    }
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Signed solid angle of the geodesic triangle spanned by three unit vectors.
fn solid_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let num = det3(a, b, c);
    let den = 1.0 + dot3(a, b) + dot3(b, c) + dot3(a, c);
    2.0 * num.atan2(den)
}

/// Degree of `field` over the solid bounded by `mesh`.
pub fn degree_3d<F>(field: &F, mesh: &SurfaceMesh) -> Result<DegreeResult, DegreeError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldError>,
{
    if mesh.triangles.is_empty() {
        return Err(DegreeError::EmptyBoundary);
    }
    let mut mesh = mesh.clone();
    let mut level = 0;
    let mut previous: Option<f64> = None;
    loop {
        let values = mesh
            .vertices
            .iter()
            .map(|p| field(p))
            .collect::<Result<Vec<_>, _>>()?;
        let norms: Vec<f64> = values.iter().map(|f| f.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        let tol = 1e-8 * median(norms.clone());
        let (imin, min_norm) = norms
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("mesh has vertices");
        if min_norm <= tol {
            return Err(DegreeError::ZeroOnBoundary {
                point: mesh.vertices[imin].to_vec(),
                norm: min_norm,
                tol,
            });
        }
        let unit: Vec<[f64; 3]> = values
            .iter()
            .zip(&norms)
            .map(|(f, r)| [f[0] / r, f[1] / r, f[2] / r])
            .collect();
        let cos_limit = MAX_IMAGE_ANGLE.cos();
        let mut small = true;
        let mut total = 0.0;
        for t in &mesh.triangles {
            let (a, b, c) = (unit[t[0]], unit[t[1]], unit[t[2]]);
            if dot3(a, b) < cos_limit || dot3(b, c) < cos_limit || dot3(a, c) < cos_limit {
                small = false;
            }
            total += solid_angle(a, b, c);
        }
        let raw = total / (4.0 * PI);
        let value = raw.round() as i64;
        let result = DegreeResult {
            value,
            raw,
            refinement_level: level,
            min_field_norm_on_boundary: min_norm,
        };
        // a stretched image can keep long edges at every level; two agreeing near-integer levels settle it
        let settled = previous.is_some_and(|p| (p - raw).abs() < 1e-6) && result.residue() < 1e-6;
        if (small && result.residue() < 0.1) || settled {
            return Ok(result);
        }
        previous = Some(raw);
        if level >= MAX_LEVEL_3D {
            return Err(DegreeError::NotConverged { level, raw });
        }
        log::debug!("degree_3d: refining mesh (level {level}, raw {raw:.6}, small {small})");
        mesh = mesh.refined();
        level += 1;
    }
}

/// A closed boundary in two or three dimensions.
#[derive(Clone, Debug)]
pub enum Boundary {
    Planar(Vec<Loop>),
    Surface(SurfaceMesh),
}

pub fn degree<F>(field: &F, boundary: &Boundary) -> Result<DegreeResult, DegreeError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldError>,
{
    match boundary {
        Boundary::Planar(loops) => degree_2d(field, loops),
        Boundary::Surface(mesh) => degree_3d(field, mesh),
    }
}

/// Degree over `outer` with the disjoint regions bounded by `inners` removed (additivity).
pub fn degree_region_with_holes<F>(field: &F, outer: &Boundary, inners: &[Boundary]) -> Result<DegreeResult, DegreeError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, FieldError>,
{
    let mut result = degree(field, outer)?;
    for inner in inners {
        result = result.minus(&degree(field, inner)?);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::grad_g;

    fn identity(x: &[f64]) -> Result<Vec<f64>, FieldError> {
        Ok(x.to_vec())
    }

    #[test]
    fn identity_has_degree_one() {
        let d = degree_2d(&identity, &[circle_loop([0.0, 0.0], 1.0, 64)]).unwrap();
        assert_eq!(d.value, 1);
        assert!(d.residue() < 1e-12);
        let s = SurfaceMesh::sphere([0.0; 3], 1.0, 16, 32);
        assert!(s.volume() > 4.0);
        assert_eq!(degree_3d(&identity, &s).unwrap().value, 1);
        let b = SurfaceMesh::cuboid([-1.0, -2.0, -0.5], [1.0, 1.0, 2.0], 8);
        assert!((b.volume() - 2.0 * 3.0 * 2.5).abs() < 1e-12);
        assert_eq!(degree_3d(&identity, &b).unwrap().value, 1);
    }

    #[test]
    fn kernel_gradient_degrees() {
        let f = |x: &[f64]| grad_g(x, 2.0);
        assert_eq!(degree_2d(&f, &[circle_loop([0.0, 0.0], 0.5, 32)]).unwrap().value, 1);
        let s = SurfaceMesh::sphere([0.0; 3], 0.5, 16, 32);
        assert_eq!(degree_3d(&f, &s).unwrap().value, -1);
    }

    #[test]
    fn zero_outside_has_degree_zero() {
        let d = degree_2d(&identity, &[circle_loop([3.0, 0.0], 1.0, 64)]).unwrap();
        assert_eq!(d.value, 0);
        let s = SurfaceMesh::sphere([3.0, 0.0, 0.0], 1.0, 8, 16);
        assert_eq!(degree_3d(&identity, &s).unwrap().value, 0);
    }

    #[test]
    fn fast_rotation_is_resolved() {
        // z^5 turns five times along the unit circle; four vertices cannot see that
        let f = |x: &[f64]| {
            let z = num_complex::Complex64::new(x[0], x[1]).powu(5);
            Ok(vec![z.re, z.im])
        };
        let square = vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        let d = degree_2d(&f, &[square]).unwrap();
        assert_eq!(d.value, 5);
        assert!(d.refinement_level >= 2);
    }

    #[test]
    fn zero_on_boundary_is_refused() {
        let err = degree_2d(&identity, &[vec![[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]).unwrap_err();
        assert!(matches!(err, DegreeError::ZeroOnBoundary { .. }), "{err:?}");
    }

    #[test]
    fn holes_subtract() {
        let outer = Boundary::Planar(vec![circle_loop([0.0, 0.0], 5.0, 64)]);
        let inner = Boundary::Planar(vec![circle_loop([0.0, 0.0], 1.0, 64)]);
        assert_eq!(degree_region_with_holes(&identity, &outer, &[inner]).unwrap().value, 0);
        assert_eq!(degree_region_with_holes(&identity, &outer, &[]).unwrap().value, 1);
    }
}
