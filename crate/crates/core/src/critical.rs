//! Critical points of the averaged potential by damped multistart Newton.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::dot;
use crate::field::{FieldError, ForceContext, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticalError {
    #[error("census needs dimension 3, got {0}")]
    Dimension(usize),
    #[error("{0} degenerate critical point(s): the potential is not Morse there, census refused")]
    Degenerate(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: Vec<f64>,
    pub g_value: f64,
    pub grad_norm: f64,
    /// Eigenvalues of the Hessian, ascending.
    pub eigenvalues: Vec<f64>,
    pub morse_index: usize,
    /// `(-1)^morse_index`, the local degree of the gradient.
    pub local_degree: i64,
    pub distance_to_k: f64,
    pub degenerate: bool,
    /// Relative disagreement between the Hessian and finite differences of the gradient, when checked.
    pub hessian_fd_error: Option<f64>,
}

impl CriticalPoint {
    /// Local degree of the negative gradient, `(-1)^(n - morse_index)`.
    pub fn negative_gradient_degree(&self) -> i64 {
        if (self.x.len() - self.morse_index) % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    /// Box around the curves with a margin of one curve diameter on every side.
    pub fn around(ctx: &ForceContext) -> Self {
        let (lo, hi) = ctx.curves().bounds();
        let diameter = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max).max(1e-9);
        Self {
            lo: lo.iter().map(|a| a - diameter).collect(),
            hi: hi.iter().map(|b| b + diameter).collect(),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= a - slack && *v <= b + slack)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub exclusion: f64,
    /// Gradient tolerance relative to `1 + |G|`.
    pub tol: f64,
    pub max_iterations: usize,
    pub max_backtracks: usize,
    pub degeneracy: f64,
    pub fd_check: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            n_starts: 256,
            seed: 0,
            exclusion: 5e-3,
            tol: 1e-9,
            max_iterations: 100,
            max_backtracks: 40,
            degeneracy: 1e-6,
            fd_check: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Sorted lexicographically by coordinates.
    pub points: Vec<CriticalPoint>,
    pub starts: usize,
    pub converged: usize,
    pub dropped: usize,
    pub escaped: usize,
    pub excluded: usize,
}

/// Component `dim` of the `i`-th Halton point, `i >= 1`.
pub fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];

/// `count` quasi-random points in the box; `seed` shifts the sequence.
pub fn halton_starts(bx: &SearchBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let offset = 1 + (seed as usize % 100_003) * 17;
    (0..count)
        .map(|k| {
            bx.lo
                .iter()
                .zip(&bx.hi)
                .enumerate()
                .map(|(d, (a, b))| a + (b - a) * halton(offset + k, PRIMES[d % PRIMES.len()]))
                .collect()
        })
        .collect()
}

/// Points pushed off each curve along its normal directions at the given distances.
pub fn normal_offset_starts(ctx: &ForceContext, per_curve: usize, distances: &[f64]) -> Vec<Vec<f64>> {
    let n = ctx.dimension();
    let mut out = Vec::new();
    for curve in ctx.curves().curves() {
        for k in 0..per_curve {
            let t = k as f64 / per_curve as f64;
            let p = curve.point(t);
            let v = curve.eval(t, 1).expect("order 1");
            let a = curve.eval(t, 2).expect("order 2");
            let tangent = normalize(&v);
            let mut dirs = Vec::new();
            // principal normal, falling back to any direction orthogonal to the tangent
            let mut normal = gram_schmidt(&a, &[&tangent]);
            if normal.is_none() {
                for e in 0..n {
                    let mut basis = vec![0.0; n];
                    basis[e] = 1.0;
                    if let Some(v) = gram_schmidt(&basis, &[&tangent]) {
                        normal = Some(v);
                        break;
                    }
                }
            }
            let Some(normal) = normal else { continue };
            dirs.push(normal.clone());
            if n == 3 {
                let b = cross(&tangent, &normal);
                dirs.push(b);
            }
            for dir in dirs {
                for &d in distances {
                    for s in [1.0, -1.0] {
                        out.push(p.iter().zip(&dir).map(|(x, u)| x + s * d * u).collect());
                    }
                }
            }
        }
    }
    out
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let r = dot(v, v).sqrt();
    v.iter().map(|x| x / r).collect()
}

fn gram_schmidt(v: &[f64], against: &[&[f64]]) -> Option<Vec<f64>> {
    let mut w = v.to_vec();
    for u in against {
        let c = dot(&w, u);
        for (a, b) in w.iter_mut().zip(u.iter()) {
            *a -= c * b;
        }
    }
    let r = dot(&w, &w).sqrt();
    (r > 1e-8 * dot(v, v).sqrt().max(1e-300)).then(|| w.iter().map(|x| x / r).collect())
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// The default start set: Halton points plus 64 normal offsets per curve at 0.1, 0.3 and 1.0.
pub fn default_starts(ctx: &ForceContext, bx: &SearchBox, opts: &SearchOptions) -> Vec<Vec<f64>> {
    let mut starts = halton_starts(bx, opts.n_starts, opts.seed);
    starts.extend(normal_offset_starts(ctx, 64, &[0.1, 0.3, 1.0]));
    starts
}

fn grad_norm(g: &[f64]) -> f64 {
    dot(g, g).sqrt()
}

/// Damped Newton on the gradient. Returns the converged point, or `None`.
pub fn newton<P: Potential>(pot: &P, start: &[f64], opts: &SearchOptions) -> Option<Vec<f64>> {
    let n = pot.dimension();
    let admissible = |x: &[f64]| pot.singular_distance(x) > opts.exclusion;
    if !admissible(start) {
        return None;
    }
    let mut x = start.to_vec();
    let mut g = pot.gradient(&x).ok()?;
    let mut gn = grad_norm(&g);
    for _ in 0..opts.max_iterations {
        let all = pot.all(&x).ok()?;
        if gn < opts.tol * (1.0 + all.value.abs()) {
            return Some(x);
        }
        let h = all.hessian;
        let rhs = DVector::from_column_slice(&g);
        let step = match h.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => rhs.clone(),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = (0..n).map(|d| x[d] - alpha * step[d]).collect();
            if admissible(&trial) {
                if let Ok(gt) = pot.gradient(&trial) {
                    let gtn = grad_norm(&gt);
                    if gtn < gn {
                        x = trial;
                        g = gt;
                        gn = gtn;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            let value = pot.value(&x).ok()?;
            return (gn < opts.tol * (1.0 + value.abs())).then_some(x);
        }
    }
    let value = pot.value(&x).ok()?;
    (gn < opts.tol * (1.0 + value.abs())).then_some(x)
}

/// Hessian spectrum, Morse index and degeneracy at a converged point.
pub fn classify<P: Potential>(pot: &P, x: &[f64], opts: &SearchOptions) -> Result<CriticalPoint, FieldError> {
    let n = pot.dimension();
    let all = pot.all(x)?;
    let (g_value, g, h) = (all.value, all.gradient, all.hessian);
    let sym = (&h + h.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let max_abs = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let min_abs = eigenvalues.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let degenerate = !(min_abs > opts.degeneracy * max_abs);
    let morse_index = eigenvalues.iter().filter(|e| **e < 0.0).count();
    let hessian_fd_error = if opts.fd_check {
        Some(hessian_fd_error(pot, x, &h)?)
    } else {
        None
    };
    Ok(CriticalPoint {
        x: x.to_vec(),
        g_value,
        grad_norm: grad_norm(&g),
        eigenvalues,
        morse_index,
        local_degree: if morse_index % 2 == 0 { 1 } else { -1 },
        distance_to_k: pot.singular_distance(x),
        degenerate,
        hessian_fd_error,
    })
    .map(|cp| {
        debug_assert_eq!(cp.x.len(), n);
        cp
    })
}

/// Relative Frobenius error between `h` and central differences of the gradient.
pub fn hessian_fd_error<P: Potential>(pot: &P, x: &[f64], h: &DMatrix<f64>) -> Result<f64, FieldError> {
    let n = x.len();
    let step = 1e-4 * pot.singular_distance(x).min(1.0);
    let mut fd = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let gp = pot.gradient(&xp)?;
        let gm = pot.gradient(&xm)?;
        for i in 0..n {
            fd[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    Ok((&fd - h).norm() / h.norm().max(1e-300))
}

/// Multistart search: Newton from every start, then classification and deduplication.
pub fn find_critical_points<P: Potential>(
    pot: &P,
    bx: &SearchBox,
    starts: &[Vec<f64>],
    opts: &SearchOptions,
) -> SearchOutcome {
    let radius = 1e-6 * bx.diameter();
    let slack = 0.5 * bx.diameter();
    let mut found: Vec<Vec<f64>> = Vec::new();
    let (mut converged, mut dropped, mut escaped, mut excluded) = (0, 0, 0, 0);
    for s in starts {
        let Some(x) = newton(pot, s, opts) else {
            dropped += 1;
            continue;
        };
        if !bx.contains(&x, slack) {
            escaped += 1;
            continue;
        }
        if pot.singular_distance(&x) <= opts.exclusion {
            excluded += 1;
            continue;
        }
        converged += 1;
        if !found.iter().any(|f| crate::curve::dist(f, &x) < radius) {
            found.push(x);
        }
    }
    let mut points: Vec<CriticalPoint> = found
        .iter()
        .filter_map(|x| classify(pot, x, opts).ok())
        .collect();
    points.sort_by(|a, b| {
        a.x.iter()
            .zip(&b.x)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    SearchOutcome {
        points,
        starts: starts.len(),
        converged,
        dropped,
        escaped,
        excluded,
    }
}

/// Whether two searches found the same point set up to `tol`.
pub fn same_points(a: &[CriticalPoint], b: &[CriticalPoint], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .all(|p| b.iter().any(|q| crate::curve::dist(&p.x, &q.x) < tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseCensus {
    /// Points of index `i` for `-G`, i.e. index `3 - i` for `G`.
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
    /// `m2 - m1 = m3 + 1`.
    pub identity_holds: bool,
    /// Sum over points of `sign det(-Hess G)`.
    pub degree_sum: i64,
    /// Degree of `-grad G` over a large sphere.
    pub far_field_degree: i64,
    /// Degree sum matches the far field and the point set was stable under more starts.
    pub exhaustive: bool,
}

pub fn morse_census(
    points: &[CriticalPoint],
    far_field_degree: i64,
    stable: bool,
) -> Result<MorseCensus, CriticalError> {
    if let Some(p) = points.first() {
        if p.x.len() != 3 {
            return Err(CriticalError::Dimension(p.x.len()));
        }
    }
    let degenerate = points.iter().filter(|p| p.degenerate).count();
    if degenerate > 0 {
        return Err(CriticalError::Degenerate(degenerate));
    }
    let count = |i: usize| points.iter().filter(|p| p.morse_index == 3 - i).count();
    let (m1, m2, m3) = (count(1), count(2), count(3));
    let degree_sum: i64 = points.iter().map(|p| p.negative_gradient_degree()).sum();
    Ok(MorseCensus {
        m1,
        m2,
        m3,
        identity_holds: m2 as i64 - m1 as i64 == m3 as i64 + 1,
        degree_sum,
        far_field_degree,
        exhaustive: stable && degree_sum == far_field_degree,
    })
}

/// At least `2t + 1` critical points.
pub fn knot_bound_check(count: usize, tunnel_number: usize) -> bool {
    count >= 2 * tunnel_number + 1
}

/// `sum x_i^4`: a potential with a degenerate critical point at the origin, for testing.
#[derive(Clone, Copy, Debug)]
pub struct QuarticTestPotential {
    pub dimension: usize,
}

impl Potential for QuarticTestPotential {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn value(&self, x: &[f64]) -> Result<f64, FieldError> {
        Ok(x.iter().map(|v| v.powi(4)).sum())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        Ok(x.iter().map(|v| 4.0 * v.powi(3)).collect())
    }
    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, FieldError> {
        Ok(DMatrix::from_diagonal(&DVector::from_iterator(
            x.len(),
            x.iter().map(|v| 12.0 * v * v),
        )))
    }
    fn singular_distance(&self, _: &[f64]) -> f64 {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Catalog;
    use crate::field::{Kernel, Sign};

    fn ctx(name: &str) -> ForceContext {
        let set = Catalog::parse(name).unwrap().build().unwrap();
        ForceContext::new(set, Kernel::new(2.0, Sign::Attractive).unwrap())
    }

    fn search(c: &ForceContext, n_starts: usize) -> SearchOutcome {
        let bx = SearchBox::around(c);
        let opts = SearchOptions {
            n_starts,
            ..Default::default()
        };
        let starts = default_starts(c, &bx, &opts);
        find_critical_points(c, &bx, &starts, &opts)
    }

    #[test]
    fn halton_is_low_discrepancy() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn planar_circle_has_one_minimum() {
        let c = ctx("circle");
        let out = search(&c, 64);
        assert_eq!(out.points.len(), 1, "{:?}", out.points);
        let p = &out.points[0];
        assert!(dot(&p.x, &p.x).sqrt() < 1e-6);
        assert_eq!(p.morse_index, 0);
        assert_eq!(p.local_degree, 1);
        assert!(p.hessian_fd_error.unwrap() < 1e-5);
    }

    #[test]
    fn unknot_has_one_saddle() {
        let c = ctx("unknot");
        let out = search(&c, 64);
        assert_eq!(out.points.len(), 1);
        let p = &out.points[0];
        assert!(dot(&p.x, &p.x).sqrt() < 1e-6);
        assert_eq!(p.morse_index, 1);
        // the unstable direction is the axis
        assert!(p.eigenvalues[0] < 0.0 && p.eigenvalues[1] > 0.0);
        let census = morse_census(&out.points, 1, true).unwrap();
        assert_eq!((census.m1, census.m2, census.m3), (0, 1, 0));
        assert!(census.identity_holds && census.exhaustive);
        assert!(knot_bound_check(out.points.len(), 0));
    }

    #[test]
    fn quartic_hook_is_degenerate() {
        let q = QuarticTestPotential { dimension: 3 };
        let cp = classify(&q, &[0.0; 3], &SearchOptions { fd_check: false, ..Default::default() }).unwrap();
        assert!(cp.degenerate);
        assert!(matches!(morse_census(&[cp], 1, true), Err(CriticalError::Degenerate(1))));
    }

    #[test]
    fn bound_check() {
        assert!(knot_bound_check(3, 1));
        assert!(!knot_bound_check(4, 2));
        assert!(knot_bound_check(5, 2));
    }
}
