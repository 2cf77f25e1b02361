//! The singular kernel `g(u) = |u|^{-(q-1)}` and its time averages along curves.
//!
//! Averages use the periodic trapezoid rule. The node count grows with the
//! ratio of curve speed to distance so that the rule stays spectrally accurate
//! near the curve; past `2^16` nodes the point is refused as too close.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{dist, dot, CurveSet, PeriodicCurve};

pub const DEFAULT_EXCLUSION: f64 = 1e-3;
pub const DEFAULT_NODES: usize = 256;
pub const MAX_NODES: usize = 1 << 16;
const DISTANCE_SAMPLES: usize = 1024;
/// Nodes per unit of (speed / 2 pi) per unit distance.
const NODE_DENSITY: f64 = 32.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("kernel is singular at u = 0")]
    Singular,
    #[error("exponent q = {0} not allowed, need q >= 2")]
    InvalidExponent(f64),
    #[error("point is {distance:.3e} from curve {curve} (t = {t:.6}); {reason}")]
    Proximity {
        curve: usize,
        t: f64,
        distance: f64,
        reason: String,
    },
    #[error("point has dimension {got}, context has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("quadrature needs at least 64 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("the averaged field F is defined for a single curve, context has {0}")]
    NotSingleCurve(usize),
}

/// Direction of the central force.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Attractive,
    Repulsive,
}

impl Sign {
    /// `+1` for attractive, `-1` for repulsive: the factor multiplying `-u/|u|^{q+1}`.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Attractive => 1.0,
            Sign::Repulsive => -1.0,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Attractive => write!(f, "attractive"),
            Sign::Repulsive => write!(f, "repulsive"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub q: f64,
    pub sign: Sign,
}

impl Kernel {
    pub fn new(q: f64, sign: Sign) -> Result<Self, FieldError> {
        if !(q >= 2.0 && q.is_finite()) {
            return Err(FieldError::InvalidExponent(q));
        }
        Ok(Self { q, sign })
    }
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

pub fn g_eval(u: &[f64], q: f64) -> Result<f64, FieldError> {
    let r = norm(u);
    if r == 0.0 {
        return Err(FieldError::Singular);
    }
    Ok(r.powf(-(q - 1.0)))
}

pub fn grad_g(u: &[f64], q: f64) -> Result<Vec<f64>, FieldError> {
    let mut out = vec![0.0; u.len()];
    if norm(u) == 0.0 {
        return Err(FieldError::Singular);
    }
    add_grad_g(u, q, 1.0, &mut out);
    Ok(out)
}

pub fn hess_g(u: &[f64], q: f64) -> Result<DMatrix<f64>, FieldError> {
    let n = u.len();
    if norm(u) == 0.0 {
        return Err(FieldError::Singular);
    }
    let mut out = vec![0.0; n * n];
    add_hess_g(u, q, 1.0, &mut out);
    Ok(DMatrix::from_row_slice(n, n, &out))
}

/// `out += w * grad g(u)`; `u` must be nonzero. Returns `|u|`.
pub fn add_grad_g(u: &[f64], q: f64, w: f64, out: &mut [f64]) -> f64 {
    let r = norm(u);
    let c = -w * (q - 1.0) * r.powf(-(q + 1.0));
    for (o, x) in out.iter_mut().zip(u) {
        *o += c * x;
    }
    r
}

/// `out += w * Hess g(u)` in row-major order; `u` must be nonzero.
pub fn add_hess_g(u: &[f64], q: f64, w: f64, out: &mut [f64]) {
    let n = u.len();
    let r2 = dot(u, u);
    let a = r2.powf(-(q + 1.0) / 2.0);
    let b = (q + 1.0) * a / r2;
    let c = -w * (q - 1.0);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { a } else { 0.0 };
            out[i * n + j] += c * (id - b * u[i] * u[j]);
        }
    }
}

/// Something with a gradient whose critical points can be searched.
pub trait Potential {
    fn dimension(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64, FieldError>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FieldError>;
    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, FieldError>;
    /// Distance to where the potential is undefined, `INFINITY` if nowhere.
    fn singular_distance(&self, x: &[f64]) -> f64;
    /// Value, gradient and Hessian together.
    fn all(&self, x: &[f64]) -> Result<FieldValue, FieldError> {
        Ok(FieldValue {
            value: self.value(x)?,
            gradient: self.gradient(x)?,
            hessian: self.hessian(x)?,
        })
    }
}

/// Value, gradient and Hessian of `G` at one point.
#[derive(Clone, Debug)]
pub struct FieldValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// Nearest point of a curve set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub curve: usize,
    pub t: f64,
    pub distance: f64,
}

struct CurveCache {
    polyline: Vec<f64>,
    speed: f64,
    /// Node samples for `M = 2^level`, filled on demand.
    levels: Vec<OnceLock<Vec<f64>>>,
}

/// Quadrature context for `G(x) = sum_i int_0^1 g(x - k_i(t)) dt`.
pub struct ForceContext {
    curves: CurveSet,
    kernel: Kernel,
    quadrature_nodes: usize,
    exclusion: f64,
    caches: Vec<CurveCache>,
}

impl std::fmt::Debug for ForceContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForceContext")
            .field("components", &self.curves.component_count())
            .field("kernel", &self.kernel)
            .field("quadrature_nodes", &self.quadrature_nodes)
            .field("exclusion", &self.exclusion)
            .finish()
    }
}

impl Clone for ForceContext {
    fn clone(&self) -> Self {
        Self::with_options(self.curves.clone(), self.kernel, self.quadrature_nodes, self.exclusion)
            .expect("validated on construction")
    }
}

impl ForceContext {
    pub fn new(curves: CurveSet, kernel: Kernel) -> Self {
        Self::with_options(curves, kernel, DEFAULT_NODES, DEFAULT_EXCLUSION).expect("defaults are valid")
    }

    /// `quadrature_nodes` is the minimum node count; it is rounded up to a power of two.
    pub fn with_options(
        curves: CurveSet,
        kernel: Kernel,
        quadrature_nodes: usize,
        exclusion: f64,
    ) -> Result<Self, FieldError> {
        if quadrature_nodes < 64 {
            return Err(FieldError::TooFewNodes(quadrature_nodes));
        }
        let quadrature_nodes = quadrature_nodes.next_power_of_two().min(MAX_NODES);
        let caches = curves
            .curves()
            .iter()
            .map(|c| CurveCache {
                polyline: c.sample(DISTANCE_SAMPLES, 0),
                speed: c.sup_norm(1, 1024).max(c.speed_bound() * 1e-3),
                levels: (0..=16).map(|_| OnceLock::new()).collect(),
            })
            .collect();
        Ok(Self {
            curves,
            kernel,
            quadrature_nodes,
            exclusion: exclusion.max(0.0),
            caches,
        })
    }

    pub fn curves(&self) -> &CurveSet {
        &self.curves
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn q(&self) -> f64 {
        self.kernel.q
    }

    pub fn dimension(&self) -> usize {
        self.curves.dimension()
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.quadrature_nodes
    }

    pub fn exclusion(&self) -> f64 {
        self.exclusion
    }

    fn nodes(&self, curve: usize, m: usize) -> &[f64] {
        let level = m.trailing_zeros() as usize;
        self.caches[curve].levels[level].get_or_init(|| self.curves.curves()[curve].sample(m, 0))
    }

    /// Nearest point on curve `index`: polyline search, then Newton on `|k(t) - x|^2`.
    pub fn nearest_on(&self, index: usize, x: &[f64]) -> Nearest {
        let curve = &self.curves.curves()[index];
        let poly = &self.caches[index].polyline;
        let n = self.dimension();
        let m = DISTANCE_SAMPLES;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..m {
            let a = &poly[i * n..(i + 1) * n];
            let j = (i + 1) % m;
            let b = &poly[j * n..(j + 1) * n];
            let (mut len2, mut proj) = (0.0, 0.0);
            for d in 0..n {
                let ab = b[d] - a[d];
                len2 += ab * ab;
                proj += (x[d] - a[d]) * ab;
            }
            let s = if len2 > 0.0 { (proj / len2).clamp(0.0, 1.0) } else { 0.0 };
            let d2: f64 = (0..n).map(|d| (x[d] - a[d] - s * (b[d] - a[d])).powi(2)).sum();
            if d2 < best.0 {
                best = (d2, (i as f64 + s) / m as f64);
            }
        }
        let mut t = best.1;
        let mut d = best.0.sqrt();
        let mut buf = vec![0.0; 3 * n];
        for _ in 0..3 {
            curve.eval_into(t, 0, &mut buf[..n]);
            curve.eval_into(t, 1, &mut buf[n..2 * n]);
            curve.eval_into(t, 2, &mut buf[2 * n..]);
            let (p, v) = (&buf[..n], &buf[n..2 * n]);
            let diff: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
            let d1 = dot(&diff, v);
            let d2 = dot(v, v) + dot(&diff, &buf[2 * n..]);
            if d2 <= 0.0 {
                break;
            }
            let t_new = t - d1 / d2;
            let dn = dist(&curve.point(t_new), x);
            if dn < d {
                t = t_new;
                d = dn;
            } else {
                break;
            }
        }
        Nearest {
            curve: index,
            t: t.rem_euclid(1.0),
            distance: d,
        }
    }

    /// Nearest point over all curves.
    pub fn nearest(&self, x: &[f64]) -> Nearest {
        (0..self.curves.component_count())
            .map(|i| self.nearest_on(i, x))
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
            .expect("curve set is nonempty")
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.nearest(x).distance
    }

    /// Node count that keeps the trapezoid rule accurate for curve `index` at distance `d`.
    pub fn required_nodes(&self, index: usize, d: f64) -> usize {
        let speed = self.caches[index].speed;
        let need = NODE_DENSITY * speed / (TAU * d);
        if !need.is_finite() || need > MAX_NODES as f64 {
            return usize::MAX;
        }
        (need.ceil() as usize).max(self.quadrature_nodes).next_power_of_two()
    }

    fn check(&self, x: &[f64]) -> Result<Vec<usize>, FieldError> {
        if x.len() != self.dimension() {
            return Err(FieldError::Dimension {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        let mut counts = Vec::with_capacity(self.curves.component_count());
        for i in 0..self.curves.component_count() {
            let near = self.nearest_on(i, x);
            if near.distance <= self.exclusion {
                return Err(FieldError::Proximity {
                    curve: i,
                    t: near.t,
                    distance: near.distance,
                    reason: format!("inside the exclusion distance {:.1e}", self.exclusion),
                });
            }
            let m = self.required_nodes(i, near.distance);
            if m > MAX_NODES {
                return Err(FieldError::Proximity {
                    curve: i,
                    t: near.t,
                    distance: near.distance,
                    reason: format!("quadrature would need more than {MAX_NODES} nodes"),
                });
            }
            counts.push(m);
        }
        Ok(counts)
    }

    /// Node counts used at `x`, one per curve.
    pub fn nodes_at(&self, x: &[f64]) -> Result<Vec<usize>, FieldError> {
        self.check(x)
    }

    /// `G`, `grad G` and `Hess G` with the automatic node counts.
    pub fn evaluate(&self, x: &[f64]) -> Result<FieldValue, FieldError> {
        let counts = self.check(x)?;
        Ok(self.evaluate_with(x, &counts))
    }

    /// `G`, `grad G` and `Hess G` with the node counts scaled by `factor` (a power of two).
    pub fn evaluate_refined(&self, x: &[f64], factor: usize) -> Result<FieldValue, FieldError> {
        let counts: Vec<usize> = self
            .check(x)?
            .into_iter()
            .map(|m| (m * factor.next_power_of_two()).min(MAX_NODES))
            .collect();
        Ok(self.evaluate_with(x, &counts))
    }

    /// Evaluation with explicit node counts and no proximity guard beyond nonzero distance.
    pub fn evaluate_with(&self, x: &[f64], counts: &[usize]) -> FieldValue {
        let n = self.dimension();
        let mut hess = vec![0.0; n * n];
        let (value, gradient) = self.accumulate(x, counts, Some(&mut hess));
        FieldValue {
            value,
            gradient,
            hessian: DMatrix::from_row_slice(n, n, &hess),
        }
    }

    fn accumulate(&self, x: &[f64], counts: &[usize], mut hess: Option<&mut [f64]>) -> (f64, Vec<f64>) {
        let n = self.dimension();
        let q = self.kernel.q;
        let mut value = 0.0;
        let mut gradient = vec![0.0; n];
        let mut u = vec![0.0; n];
        for (i, &m) in counts.iter().enumerate() {
            let m = m.next_power_of_two();
            let w = 1.0 / m as f64;
            for p in self.nodes(i, m).chunks(n) {
                for d in 0..n {
                    u[d] = x[d] - p[d];
                }
                let r = add_grad_g(&u, q, w, &mut gradient);
                value += w * r.powf(-(q - 1.0));
                if let Some(h) = hess.as_deref_mut() {
                    add_hess_g(&u, q, w, h);
                }
            }
        }
        (value, gradient)
    }

    /// Relative errors of the analytic gradient and Hessian against fourth-order central
    /// differences with step `step`, all evaluations sharing the node counts of `x`.
    ///
    /// Errors are relative to the larger of the exact norm and the natural scale `G/d`
    /// (`G/d^2` for the Hessian), so that points where the gradient vanishes stay meaningful.
    pub fn finite_difference_errors(&self, x: &[f64], step: f64) -> Result<(f64, f64), FieldError> {
        let counts = self.check(x)?;
        let exact = self.evaluate_with(x, &counts);
        let n = self.dimension();
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::zeros(n, n);
        for d in 0..n {
            let at = |s: f64| {
                let mut y = x.to_vec();
                y[d] += s * step;
                self.evaluate_with(&y, &counts)
            };
            let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
            let stencil = |a: f64, b: f64, c: f64, e: f64| (8.0 * (a - b) - (c - e)) / (12.0 * step);
            grad[d] = stencil(p1.value, m1.value, p2.value, m2.value);
            for e in 0..n {
                hess[(e, d)] = stencil(p1.gradient[e], m1.gradient[e], p2.gradient[e], m2.gradient[e]);
            }
        }
        let gerr: f64 = grad.iter().zip(&exact.gradient).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let d = self.distance(x);
        let gscale = norm(&exact.gradient).max(exact.value.abs() / d);
        let hscale = exact.hessian.norm().max(exact.value.abs() / (d * d));
        Ok((gerr / gscale, (&hess - &exact.hessian).norm() / hscale))
    }

    /// Relative change of `G` when the node counts at `x` are doubled.
    pub fn doubling_change(&self, x: &[f64]) -> Result<f64, FieldError> {
        let a = self.evaluate(x)?.value;
        let b = self.evaluate_refined(x, 2)?.value;
        Ok((a - b).abs() / a.abs())
    }

    pub fn g_value(&self, x: &[f64]) -> Result<f64, FieldError> {
        let counts = self.check(x)?;
        Ok(self.accumulate(x, &counts, None).0)
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        let counts = self.check(x)?;
        Ok(self.accumulate(x, &counts, None).1)
    }

    pub fn hess(&self, x: &[f64]) -> Result<DMatrix<f64>, FieldError> {
        Ok(self.evaluate(x)?.hessian)
    }

    /// `F(x) = int (x - H)/|x - H|^{q+1} dt`, computed from its own integrand.
    pub fn f_eval(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        if self.curves.component_count() != 1 {
            return Err(FieldError::NotSingleCurve(self.curves.component_count()));
        }
        let counts = self.check(x)?;
        Ok(self.f_with(x, counts[0]))
    }

    pub fn f_with(&self, x: &[f64], m: usize) -> Vec<f64> {
        let n = self.dimension();
        let q = self.kernel.q;
        let m = m.next_power_of_two();
        let w = 1.0 / m as f64;
        let mut out = vec![0.0; n];
        let mut u = vec![0.0; n];
        for p in self.nodes(0, m).chunks(n) {
            for d in 0..n {
                u[d] = x[d] - p[d];
            }
            let c = w * norm(&u).powf(-(q + 1.0));
            for d in 0..n {
                out[d] += c * u[d];
            }
        }
        out
    }

    /// Lower estimate `g(d(x, K))`, the bound `G` stays under for a single curve.
    pub fn g_of_distance(&self, x: &[f64]) -> f64 {
        self.distance(x).powf(-(self.kernel.q - 1.0))
    }

    /// The underlying curve of a single-curve context.
    pub fn curve(&self) -> &PeriodicCurve {
        &self.curves.curves()[0]
    }
}

impl Potential for ForceContext {
    fn dimension(&self) -> usize {
        ForceContext::dimension(self)
    }

    fn value(&self, x: &[f64]) -> Result<f64, FieldError> {
        self.g_value(x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        self.grad(x)
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>, FieldError> {
        self.hess(x)
    }

    fn singular_distance(&self, x: &[f64]) -> f64 {
        self.distance(x)
    }

    fn all(&self, x: &[f64]) -> Result<FieldValue, FieldError> {
        self.evaluate(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Catalog;

    fn ctx(name: &str) -> ForceContext {
        let set = Catalog::parse(name).unwrap().build().unwrap();
        ForceContext::new(set, Kernel::new(2.0, Sign::Attractive).unwrap())
    }

    #[test]
    fn kernel_values() {
        assert_eq!(g_eval(&[1.0, 0.0], 3.0).unwrap(), 1.0);
        assert_eq!(g_eval(&[2.0, 0.0], 2.0).unwrap(), 0.5);
        assert_eq!(g_eval(&[2.0, 0.0, 0.0], 3.0).unwrap(), 0.25);
        assert_eq!(grad_g(&[1.0, 0.0], 2.0).unwrap(), vec![-1.0, 0.0]);
        assert!(matches!(g_eval(&[0.0, 0.0], 2.0), Err(FieldError::Singular)));
        assert!(hess_g(&[0.0; 3], 2.0).is_err());
        assert!(Kernel::new(1.5, Sign::Repulsive).is_err());
    }

    #[test]
    fn harmonic_case_has_zero_trace() {
        let h = hess_g(&[1.0, 0.0, 0.0], 2.0).unwrap();
        assert!(h.trace().abs() < 1e-15);
        let h = hess_g(&[0.3, -0.7], 3.0).unwrap();
        let r: f64 = (0.09f64 + 0.49).sqrt();
        let expected = 2.0 * 2.0 * r.powf(-4.0);
        assert!((h.trace() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn circle_center_and_axis() {
        let c = ctx("circle");
        let v = c.evaluate(&[0.0, 0.0]).unwrap();
        assert!((v.value - 1.0).abs() < 1e-14);
        assert!(v.gradient.iter().all(|g| g.abs() < 1e-14));
        assert!(c.f_eval(&[0.0, 0.0]).unwrap().iter().all(|f| f.abs() < 1e-14));

        let u = ctx("circle(1, 3)");
        for z in [0.0, 0.5, 2.0] {
            let g = u.g_value(&[0.0, 0.0, z]).unwrap();
            assert!((g - 1.0 / (1.0 + z * z).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn epicycloid_far_field() {
        let c = ctx("epicycloid");
        let g = c.g_value(&[10.0, 10.0]).unwrap();
        let scaled = g * (200f64).sqrt();
        assert!((0.8..=1.2).contains(&scaled), "{scaled}");
    }

    #[test]
    fn f_matches_gradient() {
        let c = ctx("epicycloid");
        for x in [[0.1, 0.2], [0.0, 2.7], [3.6, 0.05], [5.0, -4.0]] {
            let f = c.f_eval(&x).unwrap();
            let g = c.grad(&x).unwrap();
            let fnorm = norm(&f);
            let err: f64 = f.iter().zip(&g).map(|(a, b)| (a + b / (c.q() - 1.0)).powi(2)).sum::<f64>().sqrt();
            assert!(err < 1e-10 * fnorm, "{err} vs {fnorm}");
        }
    }

    #[test]
    fn winding_three_component_refines() {
        let c = ctx("epicycloid");
        let x = [0.3, -0.2];
        let m = c.nodes_at(&x).unwrap()[0];
        let coarse = c.f_with(&x, m);
        let fine = c.f_with(&x, 16 * m);
        let err = dist(&coarse, &fine);
        assert!(norm(&coarse) > 1e-6);
        assert!(err < 1e-10 * norm(&coarse), "{err}");
    }

    #[test]
    fn proximity_is_refused() {
        let c = ctx("circle");
        match c.g_value(&[1.0005, 0.0]) {
            Err(FieldError::Proximity { curve, .. }) => assert_eq!(curve, 0),
            other => panic!("{other:?}"),
        }
        let near = c.nearest(&[1.2, 0.0]);
        assert!((near.distance - 0.2).abs() < 1e-12);
        assert!(near.t.min(1.0 - near.t) < 1e-9);
    }

    #[test]
    fn unlink_sums_components() {
        let c = ctx("unlink(2, 4)");
        let one = ctx("circle(1, 3)");
        let mid = c.g_value(&[2.0, 0.0, 0.0]).unwrap();
        let single = one.g_value(&[2.0, 0.0, 0.0]).unwrap();
        assert!((mid - 2.0 * single).abs() < 1e-13);
    }
}
