//! Period-1 closed curves stored as truncated Fourier series.
//!
//! A [`PeriodicCurve`] keeps the coefficients `c_0..c_K` of every coordinate;
//! negative modes are implied by the reality condition `c_{-k} = conj(c_k)`,
//! so every evaluation is real and exactly periodic.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("forcing must have zero mean (|mean| = {0:e}); the second primitive is only periodic for zero-mean forcing")]
    NonZeroMean(f64),
    #[error("derivative order {0} not supported (max 2)")]
    DerivativeOrder(usize),
    #[error("unknown catalog curve `{0}`")]
    UnknownCatalog(String),
    #[error("invalid catalog parameters for `{name}`: {reason}")]
    InvalidParameters { name: String, reason: String },
    #[error("curves of a set must share one dimension")]
    DimensionMismatch,
    #[error("non-generic contact between curve {curve_a} (t = {t:.6}) and curve {curve_b} (s = {s:.6}): intersection angle {angle:.3e} rad below tolerance")]
    NonGeneric {
        curve_a: usize,
        t: f64,
        curve_b: usize,
        s: f64,
        angle: f64,
    },
    #[error("self-intersection search needs at least 64 samples, got {0}")]
    TooFewSamples(usize),
}

/// A closed curve `x(t) = c_0 + sum_{k>=1} 2 Re(c_k e^{2 pi i k t})` in `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCurve {
    dimension: usize,
    /// `coefficients[k][d]` is the `k`-th Fourier coefficient of coordinate `d`, `k = 0..=K`.
    coefficients: Vec<Vec<Complex64>>,
}

impl PeriodicCurve {
    /// Builds a curve from non-negative modes. The imaginary part of `c_0` is dropped.
    pub fn new(dimension: usize, mut coefficients: Vec<Vec<Complex64>>) -> Self {
        assert!(dimension >= 1, "dimension must be positive");
        if coefficients.is_empty() {
            coefficients.push(vec![Complex64::new(0.0, 0.0); dimension]);
        }
        for c in coefficients.iter_mut() {
            assert_eq!(c.len(), dimension, "coefficient vector has wrong dimension");
        }
        for c in coefficients[0].iter_mut() {
            c.im = 0.0;
        }
        Self {
            dimension,
            coefficients,
        }
    }

    pub fn zero(dimension: usize) -> Self {
        Self::new(dimension, Vec::new())
    }

    /// Planar curve `Re/Im` of `sum_j a_j e^{2 pi i k_j t}` with integer frequencies of any sign.
    pub fn from_complex_modes(modes: &[(i64, Complex64)]) -> Self {
        let kmax = modes.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coefficients = vec![vec![Complex64::new(0.0, 0.0); 2]; kmax + 1];
        for &(k, a) in modes {
            let idx = k.unsigned_abs() as usize;
            // x_k = (a_k + conj(a_{-k}))/2, y_k = (a_k - conj(a_{-k}))/(2i)
            if k > 0 {
                coefficients[idx][0] += a * 0.5;
                coefficients[idx][1] += a * Complex64::new(0.0, -0.5);
            } else if k < 0 {
                coefficients[idx][0] += a.conj() * 0.5;
                coefficients[idx][1] += a.conj() * Complex64::new(0.0, 0.5);
            } else {
                coefficients[0][0] += Complex64::new(a.re, 0.0);
                coefficients[0][1] += Complex64::new(a.im, 0.0);
            }
        }
        Self::new(2, coefficients)
    }

    /// Fits `modes` Fourier modes to a sampled periodic map by FFT.
    pub fn fit<F>(dimension: usize, modes: usize, f: F) -> Self
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let samples = (8 * modes).max(512).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(samples);
        let values: Vec<Vec<f64>> = (0..samples).map(|j| f(j as f64 / samples as f64)).collect();
        let mut coefficients = vec![vec![Complex64::new(0.0, 0.0); dimension]; modes + 1];
        for d in 0..dimension {
            let mut buf: Vec<Complex64> =
                values.iter().map(|v| Complex64::new(v[d], 0.0)).collect();
            fft.process(&mut buf);
            for k in 0..=modes {
                coefficients[k][d] = buf[k] / samples as f64;
            }
        }
        Self::new(dimension, coefficients)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Highest mode `K`.
    pub fn modes(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[Vec<Complex64>] {
        &self.coefficients
    }

    pub fn mean(&self) -> Vec<f64> {
        self.coefficients[0].iter().map(|c| c.re).collect()
    }

    pub fn is_zero_mean(&self) -> bool {
        self.coefficients[0].iter().all(|c| c.re == 0.0)
    }

    /// `k`-th derivative evaluated at `t`, `order <= 2`.
    pub fn eval(&self, t: f64, order: usize) -> Result<Vec<f64>, CurveError> {
        if order > 2 {
            return Err(CurveError::DerivativeOrder(order));
        }
        let mut out = vec![0.0; self.dimension];
        self.eval_into(t, order, &mut out);
        Ok(out)
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.eval_into(t, 0, &mut out);
        out
    }

    /// Writes the `order`-th derivative at `t` into `out`. Any order is accepted here.
    pub fn eval_into(&self, t: f64, order: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension);
        for (d, o) in out.iter_mut().enumerate() {
            *o = if order == 0 { self.coefficients[0][d].re } else { 0.0 };
        }
        let base = Complex64::from_polar(1.0, TAU * t.rem_euclid(1.0));
        let mut phase = Complex64::new(1.0, 0.0);
        for (k, ck) in self.coefficients.iter().enumerate().skip(1) {
            // recompute every 32 modes to keep the recurrence error small
            phase = if k % 32 == 0 {
                Complex64::from_polar(1.0, TAU * k as f64 * t.rem_euclid(1.0))
            } else {
                phase * base
            };
            let factor = Complex64::new(0.0, TAU * k as f64).powu(order as u32) * phase;
            for (o, c) in out.iter_mut().zip(ck) {
                *o += 2.0 * (c * factor).re;
            }
        }
    }

    /// Samples `count` uniform nodes `t_j = j/count`, flattened node-major.
    pub fn sample(&self, count: usize, order: usize) -> Vec<f64> {
        let n = self.dimension;
        let mut out = vec![0.0; count * n];
        for j in 0..count {
            self.eval_into(j as f64 / count as f64, order, &mut out[j * n..(j + 1) * n]);
        }
        out
    }

    /// Spectral derivative of any order; the constant mode is dropped for `order >= 1`.
    pub fn derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, ck)| {
                let factor = Complex64::new(0.0, TAU * k as f64).powu(order);
                ck.iter().map(|c| c * factor).collect()
            })
            .collect();
        Self::new(self.dimension, coefficients)
    }

    /// `a * self + b * other`, padding the shorter series with zeros.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dimension, other.dimension);
        let modes = self.modes().max(other.modes());
        let zero = vec![Complex64::new(0.0, 0.0); self.dimension];
        let coefficients = (0..=modes)
            .map(|k| {
                let x = self.coefficients.get(k).unwrap_or(&zero);
                let y = other.coefficients.get(k).unwrap_or(&zero);
                x.iter().zip(y).map(|(x, y)| x * a + y * b).collect()
            })
            .collect();
        Self::new(self.dimension, coefficients)
    }

    pub fn translated(&self, offset: &[f64]) -> Self {
        let mut out = self.clone();
        for (c, o) in out.coefficients[0].iter_mut().zip(offset) {
            c.re += o;
        }
        out
    }

    /// Embeds a curve into a higher dimension by padding coordinates with zero.
    pub fn embedded(&self, dimension: usize) -> Self {
        assert!(dimension >= self.dimension);
        let coefficients = self
            .coefficients
            .iter()
            .map(|ck| {
                let mut v = ck.clone();
                v.resize(dimension, Complex64::new(0.0, 0.0));
                v
            })
            .collect();
        Self::new(dimension, coefficients)
    }

    /// Max distance of a curve point from the mean, estimated on 1024 samples.
    pub fn radius(&self) -> f64 {
        let mean = self.mean();
        let n = self.dimension;
        let s = self.sample(1024, 0);
        s.chunks(n)
            .map(|p| dist(p, &mean))
            .fold(0.0, f64::max)
    }

    /// Upper bound of the speed `|x'(t)|` from the coefficient sum.
    pub fn speed_bound(&self) -> f64 {
        let mut total = 0.0;
        for (k, ck) in self.coefficients.iter().enumerate().skip(1) {
            let norm: f64 = ck.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            total += 2.0 * TAU * k as f64 * norm;
        }
        total
    }

    pub fn sup_norm(&self, order: usize, samples: usize) -> f64 {
        let n = self.dimension;
        self.sample(samples, order)
            .chunks(n)
            .map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Second primitive `H` with `H'' = -h`, normalized to zero mean.
pub fn second_primitive(h: &PeriodicCurve) -> Result<PeriodicCurve, CurveError> {
    let mean_norm = h.mean().iter().map(|x| x * x).sum::<f64>().sqrt();
    if mean_norm > 0.0 {
        return Err(CurveError::NonZeroMean(mean_norm));
    }
    let coefficients = h
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, ck)| {
            if k == 0 {
                vec![Complex64::new(0.0, 0.0); h.dimension]
            } else {
                let scale = 1.0 / (TAU * k as f64).powi(2);
                ck.iter().map(|c| c * scale).collect()
            }
        })
        .collect();
    Ok(PeriodicCurve::new(h.dimension, coefficients))
}

/// Forcing `h = -H''` of a curve.
pub fn forcing_of(curve: &PeriodicCurve) -> PeriodicCurve {
    curve.derivative(2).linear_combination(-1.0, &PeriodicCurve::zero(curve.dimension()), 0.0)
}

/// The set `K` of curves driving one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    curves: Vec<PeriodicCurve>,
}

impl CurveSet {
    pub fn new(curves: Vec<PeriodicCurve>) -> Result<Self, CurveError> {
        if let Some(first) = curves.first() {
            if curves.iter().any(|c| c.dimension() != first.dimension()) {
                return Err(CurveError::DimensionMismatch);
            }
        }
        Ok(Self { curves })
    }

    pub fn single(curve: PeriodicCurve) -> Self {
        Self {
            curves: vec![curve],
        }
    }

    pub fn curves(&self) -> &[PeriodicCurve] {
        &self.curves
    }

    pub fn component_count(&self) -> usize {
        self.curves.len()
    }

    pub fn dimension(&self) -> usize {
        self.curves.first().map_or(0, |c| c.dimension())
    }

    /// Centroid of the curve means.
    pub fn center(&self) -> Vec<f64> {
        let n = self.dimension();
        let mut c = vec![0.0; n];
        for curve in &self.curves {
            for (a, b) in c.iter_mut().zip(curve.mean()) {
                *a += b / self.curves.len() as f64;
            }
        }
        c
    }

    /// Max distance from [`Self::center`] to any sampled curve point.
    pub fn radius(&self) -> f64 {
        let center = self.center();
        let n = self.dimension();
        self.curves
            .iter()
            .flat_map(|c| {
                c.sample(1024, 0)
                    .chunks(n)
                    .map(|p| dist(p, &center))
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// Axis-aligned bounds of the sampled curves.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dimension();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for c in &self.curves {
            for p in c.sample(1024, 0).chunks(n) {
                for d in 0..n {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
        }
        (lo, hi)
    }
}

impl From<PeriodicCurve> for CurveSet {
    fn from(c: PeriodicCurve) -> Self {
        CurveSet::single(c)
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Named test curves. Planar curves use `theta = 2 pi t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Catalog {
    /// Circle of the given radius in the first coordinate plane.
    Circle {
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    /// `e^{i theta} + 3 e^{3 i theta}`.
    Epicycloid,
    /// `e^{i l sin(theta)}`: a circular arc traversed back and forth.
    Arc { l: f64 },
    /// `(cos theta, 0)`: image is a line segment.
    Segment,
    /// `(sin theta cos theta, sin theta)`: one transverse double point at the origin.
    Lemniscate {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    Trefoil,
    Torus { p: u32, q: u32 },
    Figure8,
    /// Connected sum of two trefoils of the same handedness.
    Granny,
    /// `c` unit circles in parallel horizontal planes, centers `separation` apart along x.
    Unlink { c: usize, separation: f64 },
    Hopf,
}

fn default_radius() -> f64 {
    1.0
}
fn default_dimension() -> usize {
    2
}

impl Catalog {
    /// Parses `name` or `name(p1, p2, ...)`, e.g. `arc(1.5707963)` or `unlink(2, 4)`.
    pub fn parse(spec: &str) -> Result<Self, CurveError> {
        let spec = spec.trim();
        let (name, args) = match spec.find('(') {
            Some(i) if spec.ends_with(')') => {
                let inner = &spec[i + 1..spec.len() - 1];
                let args: Result<Vec<f64>, _> = inner
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse::<f64>())
                    .collect();
                let args = args.map_err(|e| CurveError::InvalidParameters {
                    name: spec[..i].to_string(),
                    reason: e.to_string(),
                })?;
                (&spec[..i], args)
            }
            _ => (spec, Vec::new()),
        };
        let bad = |reason: &str| CurveError::InvalidParameters {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        let arg = |i: usize| args.get(i).copied();
        let cat = match name {
            "circle" => Catalog::Circle {
                radius: arg(0).unwrap_or(1.0),
                dimension: arg(1).map_or(2, |d| d as usize),
            },
            "unknot" => Catalog::Circle {
                radius: arg(0).unwrap_or(1.0),
                dimension: 3,
            },
            "epicycloid" => Catalog::Epicycloid,
            "arc" => Catalog::Arc {
                l: arg(0).ok_or_else(|| bad("arc needs the angle l"))?,
            },
            "segment" => Catalog::Segment,
            "lemniscate" => Catalog::Lemniscate {
                dimension: arg(0).map_or(2, |d| d as usize),
            },
            "trefoil" => Catalog::Trefoil,
            "torus" => Catalog::Torus {
                p: arg(0).ok_or_else(|| bad("torus needs p and q"))? as u32,
                q: arg(1).ok_or_else(|| bad("torus needs p and q"))? as u32,
            },
            "figure8" => Catalog::Figure8,
            "granny" => Catalog::Granny,
            "unlink" => Catalog::Unlink {
                c: arg(0).map_or(2, |c| c as usize),
                separation: arg(1).unwrap_or(4.0),
            },
            "hopf" => Catalog::Hopf,
            other => return Err(CurveError::UnknownCatalog(other.to_string())),
        };
        cat.validate()?;
        Ok(cat)
    }

    fn validate(&self) -> Result<(), CurveError> {
        let bad = |name: &str, reason: &str| {
            Err(CurveError::InvalidParameters {
                name: name.into(),
                reason: reason.into(),
            })
        };
        match *self {
            Catalog::Circle { radius, dimension } => {
                if radius <= 0.0 || dimension < 2 {
                    return bad("circle", "radius > 0 and dimension >= 2 required");
                }
            }
            Catalog::Arc { l } if !(l > 0.0 && l.is_finite()) => return bad("arc", "l > 0 required"),
            Catalog::Lemniscate { dimension } if dimension < 2 => {
                return bad("lemniscate", "dimension >= 2 required")
            }
            Catalog::Torus { p, q } => {
                if p == 0 || q == 0 || gcd(p, q) != 1 {
                    return bad("torus", "p, q positive and coprime");
                }
            }
            Catalog::Unlink { c, separation } => {
                if c == 0 || separation <= 2.0 {
                    return bad("unlink", "c >= 1 and separation > 2 (disjoint unit circles)");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Short identifier used in reports and the tunnel-number table.
    pub fn label(&self) -> String {
        match self {
            Catalog::Circle { dimension: 3, .. } => "unknot".into(),
            Catalog::Circle { .. } => "circle".into(),
            Catalog::Epicycloid => "epicycloid".into(),
            Catalog::Arc { l } => format!("arc({l})"),
            Catalog::Segment => "segment".into(),
            Catalog::Lemniscate { .. } => "lemniscate".into(),
            Catalog::Trefoil => "trefoil".into(),
            Catalog::Torus { p, q } => format!("torus({p},{q})"),
            Catalog::Figure8 => "figure8".into(),
            Catalog::Granny => "granny".into(),
            Catalog::Unlink { c, separation } => format!("unlink({c},{separation})"),
            Catalog::Hopf => "hopf".into(),
        }
    }

    /// The first (for knots, the only) curve of [`Self::build`].
    pub fn curve(&self) -> Result<PeriodicCurve, CurveError> {
        Ok(self.build()?.curves[0].clone())
    }

    pub fn build(&self) -> Result<CurveSet, CurveError> {
        self.validate()?;
        let set = match *self {
            Catalog::Circle { radius, dimension } => {
                let c = PeriodicCurve::from_complex_modes(&[(1, Complex64::new(radius, 0.0))]);
                CurveSet::single(c.embedded(dimension))
            }
            Catalog::Epicycloid => CurveSet::single(PeriodicCurve::from_complex_modes(&[
                (1, Complex64::new(1.0, 0.0)),
                (3, Complex64::new(3.0, 0.0)),
            ])),
            Catalog::Arc { l } => {
                // Bessel coefficients J_k(l) decay superexponentially; 48 modes is exact to roundoff for l <= 2 pi
                CurveSet::single(PeriodicCurve::fit(2, 48, |t| {
                    let a = l * (TAU * t).sin();
                    vec![a.cos(), a.sin()]
                }))
            }
            Catalog::Segment => {
                let c = PeriodicCurve::from_complex_modes(&[
                    (1, Complex64::new(0.5, 0.0)),
                    (-1, Complex64::new(0.5, 0.0)),
                ]);
                CurveSet::single(c)
            }
            Catalog::Lemniscate { dimension } => {
                // x = sin(2 theta)/2, y = sin(theta)
                let mut coefficients = vec![vec![Complex64::new(0.0, 0.0); 2]; 3];
                coefficients[2][0] = Complex64::new(0.0, -0.25);
                coefficients[1][1] = Complex64::new(0.0, -0.5);
                CurveSet::single(PeriodicCurve::new(2, coefficients).embedded(dimension))
            }
            Catalog::Trefoil => return Catalog::Torus { p: 2, q: 3 }.build(),
            Catalog::Torus { p, q } => CurveSet::single(PeriodicCurve::fit(
                3,
                (p + q) as usize + 1,
                |t| {
                    let th = TAU * t;
                    let r = 2.0 + (q as f64 * th).cos();
                    vec![
                        r * (p as f64 * th).cos(),
                        r * (p as f64 * th).sin(),
                        (q as f64 * th).sin(),
                    ]
                },
            )),
            Catalog::Figure8 => CurveSet::single(PeriodicCurve::fit(3, 6, |t| {
                let th = TAU * t;
                let r = 2.0 + (2.0 * th).cos();
                vec![r * (3.0 * th).cos(), r * (3.0 * th).sin(), (4.0 * th).sin()]
            })),
            Catalog::Granny => braid_closure(3, &[1, 1, 1, 2, 2, 2], 192)?,
            Catalog::Unlink { c, separation } => {
                let base = PeriodicCurve::from_complex_modes(&[(1, Complex64::new(1.0, 0.0))])
                    .embedded(3);
                let curves = (0..c)
                    .map(|i| base.translated(&[i as f64 * separation, 0.0, 0.0]))
                    .collect();
                CurveSet::new(curves)?
            }
            Catalog::Hopf => {
                let a = PeriodicCurve::from_complex_modes(&[(1, Complex64::new(1.0, 0.0))])
                    .embedded(3);
                // unit circle in the xz-plane through the center of `a`
                let mut coefficients = vec![vec![Complex64::new(0.0, 0.0); 3]; 2];
                coefficients[0][0] = Complex64::new(1.0, 0.0);
                coefficients[1][0] = Complex64::new(0.5, 0.0);
                coefficients[1][2] = Complex64::new(0.0, -0.5);
                CurveSet::new(vec![a, PeriodicCurve::new(3, coefficients)])?
            }
        };
        Ok(set)
    }
}

impl fmt::Display for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Closure of a braid on `strands` strands drawn on nested cylinders.
///
/// Generator `i` (1-based, negative for the inverse) swaps the strands at radial
/// positions `i-1` and `i`; the strand moving outward passes over (positive)
/// or under (negative). Each cycle of the braid permutation becomes one curve.
pub fn braid_closure(strands: usize, word: &[i32], modes: usize) -> Result<CurveSet, CurveError> {
    let bad = |reason: &str| CurveError::InvalidParameters {
        name: "braid".into(),
        reason: reason.into(),
    };
    if strands < 1 || word.is_empty() {
        return Err(bad("need at least one strand and one generator"));
    }
    if word
        .iter()
        .any(|&g| g == 0 || g.unsigned_abs() as usize >= strands)
    {
        return Err(bad("generator index out of range"));
    }
    // position after each slot, starting from each position
    let step = |p: usize, g: i32| -> usize {
        let i = g.unsigned_abs() as usize;
        if p == i - 1 {
            i
        } else if p == i {
            i - 1
        } else {
            p
        }
    };
    let mut visited = vec![false; strands];
    let mut curves = Vec::new();
    for start in 0..strands {
        if visited[start] {
            continue;
        }
        // cycle of the permutation containing `start`
        let mut passes = Vec::new();
        let mut p = start;
        loop {
            visited[p] = true;
            passes.push(p);
            for &g in word {
                p = step(p, g);
            }
            if p == start {
                break;
            }
        }
        let word = word.to_vec();
        let slots = word.len();
        let total = passes.len();
        let curve = PeriodicCurve::fit(3, modes, move |t| {
            let s = t.rem_euclid(1.0) * total as f64;
            let pass = (s.floor() as usize).min(total - 1);
            let within = (s - pass as f64) * slots as f64;
            let slot = (within.floor() as usize).min(slots - 1);
            let tau = within - slot as f64;
            let mut p = passes[pass];
            for &g in &word[..slot] {
                p = step(p, g);
            }
            let g = word[slot];
            let q = step(p, g);
            let ramp = tau - (TAU * tau).sin() / TAU;
            let radius = 2.0 + p as f64 + (q as f64 - p as f64) * ramp;
            let lift = if q == p {
                0.0
            } else {
                let over = (q > p) == (g > 0);
                let bump = (PI * tau).sin().powi(4);
                if over {
                    0.6 * bump
                } else {
                    -0.6 * bump
                }
            };
            let phi = TAU * s;
            vec![radius * phi.cos(), radius * phi.sin(), lift]
        });
        curves.push(curve);
    }
    CurveSet::new(curves)
}

/// Whether curve `a` near `t` runs along curve `b` near `s`, in either direction.
fn retraces(curves: &[PeriodicCurve], a: usize, t: f64, b: usize, s: f64, samples: usize, tol: f64) -> bool {
    let h = 1.0 / samples as f64;
    let cb = &curves[b];
    let gap = |p: &[f64]| -> f64 {
        let f = |u: f64| dist(p, &cb.point(u));
        // coarse scan over a window, then golden section on the best bracket
        let steps = 48;
        let (lo, hi) = (s - 6.0 * h, s + 6.0 * h);
        let du = (hi - lo) / steps as f64;
        let best = (0..=steps)
            .map(|k| lo + k as f64 * du)
            .min_by(|x, y| f(*x).total_cmp(&f(*y)))
            .unwrap_or(s);
        let (mut x0, mut x1) = (best - du, best + du);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let m0 = x1 - g * (x1 - x0);
            let m1 = x0 + g * (x1 - x0);
            if f(m0) < f(m1) {
                x1 = m1;
            } else {
                x0 = m0;
            }
        }
        f(0.5 * (x0 + x1))
    };
    [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]
        .iter()
        .all(|&k| gap(&curves[a].point(t + k * h)) < tol)
}

/// A transverse double point found on the polyline approximation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublePoint {
    pub curve_a: usize,
    pub t: f64,
    pub curve_b: usize,
    pub s: f64,
    pub point: Vec<f64>,
    /// Intersection angle in radians, in `(0, pi/2]`.
    pub angle: f64,
}

/// Transverse double points of a curve set.
///
/// Segment pairs closer than `tol` are candidates. Nearly parallel candidates
/// are either retraced overlaps (a curve running back along itself, skipped)
/// or genuine tangencies, which are refused as non-generic.
pub fn self_intersections(
    set: &CurveSet,
    samples: usize,
    tol: f64,
    angle_tol: f64,
) -> Result<Vec<DoublePoint>, CurveError> {
    if samples < 64 {
        return Err(CurveError::TooFewSamples(samples));
    }
    let n = set.dimension();
    let polylines: Vec<Vec<f64>> = set.curves().iter().map(|c| c.sample(samples, 0)).collect();
    let scale = set.radius().max(1e-300);
    let overlap_tol = 1e-7 * scale;
    let vertex = |c: usize, i: usize| -> &[f64] {
        let i = i % samples;
        &polylines[c][i * n..(i + 1) * n]
    };
    // bounding boxes per segment
    let boxes: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..set.component_count())
        .map(|c| {
            (0..samples)
                .map(|i| {
                    let a = vertex(c, i);
                    let b = vertex(c, i + 1);
                    let lo = a.iter().zip(b).map(|(x, y)| x.min(*y) - tol).collect();
                    let hi = a.iter().zip(b).map(|(x, y)| x.max(*y) + tol).collect();
                    (lo, hi)
                })
                .collect()
        })
        .collect();
    let overlaps = |lo1: &[f64], hi1: &[f64], lo2: &[f64], hi2: &[f64]| {
        (0..n).all(|d| lo1[d] <= hi2[d] && lo2[d] <= hi1[d])
    };

    let mut candidates: Vec<DoublePoint> = Vec::new();
    for ca in 0..set.component_count() {
        for cb in ca..set.component_count() {
            for i in 0..samples {
                let j_start = if ca == cb { i + 2 } else { 0 };
                for j in j_start..samples {
                    if ca == cb && (i + samples - j) % samples < 2 {
                        continue;
                    }
                    let (lo1, hi1) = &boxes[ca][i];
                    let (lo2, hi2) = &boxes[cb][j];
                    if !overlaps(lo1, hi1, lo2, hi2) {
                        continue;
                    }
                    let (a0, a1) = (vertex(ca, i), vertex(ca, i + 1));
                    let (b0, b1) = (vertex(cb, j), vertex(cb, j + 1));
                    let (sa, sb, d) = closest_segment_params(a0, a1, b0, b1);
                    if d > tol {
                        continue;
                    }
                    let da: Vec<f64> = a1.iter().zip(a0).map(|(x, y)| x - y).collect();
                    let db: Vec<f64> = b1.iter().zip(b0).map(|(x, y)| x - y).collect();
                    let cos = (dot(&da, &db) / (dot(&da, &da) * dot(&db, &db)).sqrt()).clamp(-1.0, 1.0);
                    let angle = cos.abs().acos();
                    let t = (i as f64 + sa) / samples as f64;
                    let s = (j as f64 + sb) / samples as f64;
                    if retraces(set.curves(), ca, t, cb, s, samples, overlap_tol) {
                        continue;
                    }
                    if angle < angle_tol {
                        return Err(CurveError::NonGeneric {
                            curve_a: ca,
                            t,
                            curve_b: cb,
                            s,
                            angle,
                        });
                    }
                    let point = a0.iter().zip(&da).map(|(p, v)| p + sa * v).collect();
                    candidates.push(DoublePoint {
                        curve_a: ca,
                        t,
                        curve_b: cb,
                        s,
                        point,
                        angle,
                    });
                }
            }
        }
    }

    // one report per crossing: merge candidates with nearby parameters
    let close = |x: f64, y: f64| {
        let d = (x - y).rem_euclid(1.0);
        d.min(1.0 - d) < 3.0 / samples as f64
    };
    let mut unique: Vec<DoublePoint> = Vec::new();
    for c in candidates {
        let dup = unique.iter().any(|u| {
            u.curve_a == c.curve_a
                && u.curve_b == c.curve_b
                && ((close(u.t, c.t) && close(u.s, c.s)) || (close(u.t, c.s) && close(u.s, c.t)))
        });
        if !dup {
            unique.push(c);
        }
    }
    Ok(unique)
}

/// Closest points of segments `[a0,a1]`, `[b0,b1]` in `R^n`: returns `(s, t, distance)`.
fn closest_segment_params(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64]) -> (f64, f64, f64) {
    let d1: Vec<f64> = a1.iter().zip(a0).map(|(x, y)| x - y).collect();
    let d2: Vec<f64> = b1.iter().zip(b0).map(|(x, y)| x - y).collect();
    let r: Vec<f64> = a0.iter().zip(b0).map(|(x, y)| x - y).collect();
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let c = dot(&d1, &r);
    let b = dot(&d1, &d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = if e > 0.0 { (b * s + f) / e } else { 0.0 };
    if t < 0.0 {
        t = 0.0;
        s = if a > 0.0 { (-c / a).clamp(0.0, 1.0) } else { 0.0 };
    } else if t > 1.0 {
        t = 1.0;
        s = if a > 0.0 { ((b - c) / a).clamp(0.0, 1.0) } else { 0.0 };
    }
    let d: f64 = (0..a0.len())
        .map(|k| {
            let p = a0[k] + s * d1[k];
            let q = b0[k] + t * d2[k];
            (p - q) * (p - q)
        })
        .sum::<f64>()
        .sqrt();
    (s, t, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> PeriodicCurve {
        Catalog::Circle {
            radius: 1.0,
            dimension: 2,
        }
        .build()
        .unwrap()
        .curves()[0]
            .clone()
    }

    #[test]
    fn circle_eval() {
        let c = circle();
        let p = c.eval(0.0, 0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        let a = c.eval(0.0, 2).unwrap();
        assert!((a[0] + 4.0 * PI * PI).abs() < 1e-12 && a[1].abs() < 1e-12);
        let q = c.eval(0.25, 0).unwrap();
        assert!(q[0].abs() < 1e-15 && (q[1] - 1.0).abs() < 1e-15);
        assert!(matches!(c.eval(0.0, 3), Err(CurveError::DerivativeOrder(3))));
    }

    #[test]
    fn epicycloid_at_zero() {
        let e = Catalog::Epicycloid.build().unwrap();
        let p = e.curves()[0].eval(0.0, 0).unwrap();
        assert!((p[0] - 4.0).abs() < 1e-14 && p[1].abs() < 1e-14);
    }

    #[test]
    fn periodic_evaluation() {
        let e = Catalog::Epicycloid.curve().unwrap();
        for &t in &[0.1, 0.37, 0.93] {
            let a = e.point(t);
            let b = e.point(t + 1.0);
            assert!(dist(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn second_primitive_of_circle_forcing() {
        let mut coefficients = vec![vec![Complex64::new(0.0, 0.0); 2]; 2];
        let s = (TAU).powi(2);
        coefficients[1][0] = Complex64::new(0.5 * s, 0.0);
        coefficients[1][1] = Complex64::new(0.0, -0.5 * s);
        let h = PeriodicCurve::new(2, coefficients);
        let big_h = second_primitive(&h).unwrap();
        assert!(dist(&big_h.point(0.0), &[1.0, 0.0]) < 1e-14);
        assert!(dist(&big_h.point(0.25), &[0.0, 1.0]) < 1e-14);
    }

    #[test]
    fn second_primitive_of_epicycloid_forcing() {
        // h = (2 pi)^2 (e^{i theta} + 27 e^{3 i theta})
        let s = TAU.powi(2);
        let h = PeriodicCurve::from_complex_modes(&[
            (1, Complex64::new(s, 0.0)),
            (3, Complex64::new(27.0 * s, 0.0)),
        ]);
        let big_h = second_primitive(&h).unwrap();
        let expected = Catalog::Epicycloid.curve().unwrap();
        for (a, b) in big_h.coefficients().iter().flatten().zip(expected.coefficients().iter().flatten()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn second_primitive_rejects_mean_and_accepts_zero() {
        let h = circle().translated(&[0.5, 0.0]);
        assert!(matches!(second_primitive(&h), Err(CurveError::NonZeroMean(_))));
        let zero = second_primitive(&PeriodicCurve::zero(3)).unwrap();
        assert_eq!(zero.point(0.3), vec![0.0; 3]);
    }

    #[test]
    fn unknown_catalog_name() {
        assert!(matches!(Catalog::parse("cinquefoil"), Err(CurveError::UnknownCatalog(_))));
        assert!(Catalog::parse("torus(2,4)").is_err());
        assert_eq!(Catalog::parse("arc(1.5)").unwrap(), Catalog::Arc { l: 1.5 });
    }

    #[test]
    fn arc_stays_on_unit_circle() {
        let l = PI / 2.0;
        let arc = Catalog::Arc { l }.build().unwrap();
        let c = &arc.curves()[0];
        for j in 0..200 {
            let p = c.point(j as f64 / 200.0);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
            assert!(p[1].atan2(p[0]).abs() <= l + 1e-12);
        }
        let pts = self_intersections(&arc, 1024, 1e-9, 1e-3).unwrap();
        assert!(pts.is_empty(), "{pts:?}");
    }

    #[test]
    fn unlink_geometry() {
        let set = Catalog::Unlink { c: 2, separation: 4.0 }.build().unwrap();
        assert_eq!(set.component_count(), 2);
        let m0 = set.curves()[0].mean();
        let m1 = set.curves()[1].mean();
        assert!((dist(&m0, &m1) - 4.0).abs() < 1e-14);
        assert!(self_intersections(&set, 256, 1e-9, 1e-3).unwrap().is_empty());
    }

    #[test]
    fn circle_has_no_double_points() {
        assert!(self_intersections(&CurveSet::single(circle()), 1024, 1e-9, 1e-3)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn lemniscate_has_one_double_point() {
        let set = Catalog::Lemniscate { dimension: 2 }.build().unwrap();
        let pts = self_intersections(&set, 1024, 1e-9, 1e-3).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].point.iter().all(|x| x.abs() < 1e-9));
        // the embedded copy in R^3 has the same crossing
        let set3 = Catalog::Lemniscate { dimension: 3 }.build().unwrap();
        assert_eq!(self_intersections(&set3, 1024, 1e-9, 1e-3).unwrap().len(), 1);
    }

    #[test]
    fn tangent_circles_are_refused() {
        let a = circle();
        let b = circle().translated(&[2.0, 0.0]);
        let set = CurveSet::new(vec![a, b]).unwrap();
        assert!(matches!(
            self_intersections(&set, 1024, 1e-6, 1e-2),
            Err(CurveError::NonGeneric { .. })
        ));
    }

    #[test]
    fn catalog_knots_are_embedded() {
        for name in ["trefoil", "figure8", "granny", "torus(2,5)", "hopf", "unknot"] {
            let set = Catalog::parse(name).unwrap().build().unwrap();
            let pts = self_intersections(&set, 1024, 1e-6, 1e-3).unwrap();
            assert!(pts.is_empty(), "{name}: {pts:?}");
        }
    }

    #[test]
    fn braid_components_follow_permutation() {
        assert_eq!(braid_closure(2, &[1, 1, 1], 64).unwrap().component_count(), 1);
        assert_eq!(braid_closure(2, &[1, 1], 64).unwrap().component_count(), 2);
        assert_eq!(braid_closure(3, &[1, 1, 1, 2, 2, 2], 64).unwrap().component_count(), 1);
        assert!(braid_closure(2, &[2], 16).is_err());
    }
}
