//! Periodic solutions of `z'' = -s·eps·sum_i (z - k_i)/|z - k_i|^{q+1}` by Fourier collocation,
//! continuation in `eps` from critical points of G, and the checks applied to every orbit.
//!
//! `s = +1` is the attractive force. With a single curve `H` the physical solution is
//! `u = lambda·(z - H)` with `eps = lambda^{-(q+1)}`, solving `u'' ± u/|u|^{q+1} = lambda·h`, `h = -H''`.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::CriticalPoint;
use crate::curve::{dist, PeriodicCurve};
use crate::field::{ForceContext, Sign};
use crate::ode::dopri5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },
    #[error("near collision at t = {t:.6}: distance {distance:.3e} below the floor {floor:.3e}")]
    Collision { t: f64, distance: f64, floor: f64 },
    #[error("linear solve failed at {unknowns} unknowns")]
    LinearSolve { unknowns: usize },
    #[error("residual {residual:.3e} above {tolerance:.3e} even at {modes} modes")]
    NotCertified { residual: f64, tolerance: f64, modes: usize },
    #[error("refused: {0}")]
    Refused(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("variational integration failed: {0}")]
    Integrator(String),
    #[error("branch stopped at eps = {epsilon:e}: {reason}")]
    Stopped { epsilon: f64, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    /// Starting number of Fourier modes `N`; `M = 2N + 1` collocation nodes.
    pub modes: usize,
    pub max_modes: usize,
    pub max_iterations: usize,
    /// Collision floor as a fraction of the curve radius.
    pub collision_fraction: f64,
    /// Fine residual tolerance factor on `max(1, eps·max|grad g|)`.
    pub residual_factor: f64,
    pub monodromy_tol: f64,
    /// Nondegenerate iff `sigma_min(M - I) > threshold·|M|`.
    pub nondegeneracy_threshold: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            modes: 64,
            max_modes: 4096,
            max_iterations: 50,
            collision_fraction: 1e-2,
            residual_factor: 1e-8,
            monodromy_tol: 1e-10,
            nondegeneracy_threshold: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    /// Floquet multipliers as `[re, im]`.
    pub eigenvalues: Vec<[f64; 2]>,
    /// `|det(M - I)|`.
    pub det_gap: f64,
    /// Smallest singular value of `M - I`.
    pub sigma_min: f64,
    /// Spectral norm of `M`.
    pub norm: f64,
    /// `sigma_min(M - I) > threshold·|M|`.
    pub nondegenerate: bool,
    /// `|det(M - I)| > threshold·|M|`. The determinant scales like `eps^n`, so this fails
    /// for small `eps` even when `M - I` is well conditioned.
    pub det_criterion: bool,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub epsilon: f64,
    pub lambda: f64,
    pub q: f64,
    pub sign: Sign,
    pub modes: usize,
    pub z: PeriodicCurve,
    /// Sup of the equation residual on the fine node set.
    pub residual_sup: f64,
    pub residual_tolerance: f64,
    pub min_distance_to_k: f64,
    pub collision_floor: f64,
    /// Winding of `u = lambda·(z - H)` around the origin, planar single curves only.
    pub winding: Option<i64>,
    pub monodromy: Option<Monodromy>,
    pub newton_iterations: usize,
    pub seed: String,
}

impl PeriodicOrbit {
    pub fn dimension(&self) -> usize {
        self.z.dimension()
    }

    pub fn certified(&self) -> bool {
        self.residual_sup < self.residual_tolerance && self.min_distance_to_k > self.collision_floor
    }

    /// `eps = lambda^{-(q+1)}` up to a few ulps.
    pub fn lambda_relation_error(&self) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        (self.lambda.powf(-(self.q + 1.0)) - self.epsilon).abs() / self.epsilon
    }

    /// Mean position of the orbit.
    pub fn center(&self) -> Vec<f64> {
        self.z.mean()
    }

    pub fn nondegenerate(&self) -> Option<bool> {
        self.monodromy.as_ref().map(|m| m.nondegenerate)
    }
}

pub fn lambda_of(epsilon: f64, q: f64) -> f64 {
    epsilon.powf(-1.0 / (q + 1.0))
}

pub fn epsilon_of(lambda: f64, q: f64) -> f64 {
    lambda.powf(-(q + 1.0))
}

/// Spectral operations on `m` equispaced nodes of a period-1 function, `m` odd.
struct Spectral {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    fn freq(&self, k: usize) -> f64 {
        if k <= self.m / 2 {
            k as f64
        } else {
            k as f64 - self.m as f64
        }
    }

    /// Multiplies every coordinate of node-major `x` in frequency space by `mult(freq)`.
    fn apply(&self, x: &[f64], n: usize, mult: impl Fn(f64) -> f64) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m * n];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for d in 0..n {
            for j in 0..m {
                buf[j] = Complex64::new(x[j * n + d], 0.0);
            }
            self.fwd.process(&mut buf);
            for (k, b) in buf.iter_mut().enumerate() {
                *b *= mult(self.freq(k)) / m as f64;
            }
            self.inv.process(&mut buf);
            for j in 0..m {
                out[j * n + d] = buf[j].re;
            }
        }
        out
    }

    fn d2(&self, x: &[f64], n: usize) -> Vec<f64> {
        self.apply(x, n, |k| -(TAU * k).powi(2))
    }

    fn d1(&self, x: &[f64], n: usize) -> Vec<f64> {
        // odd derivative needs the imaginary unit; do it directly
        let m = self.m;
        let mut out = vec![0.0; m * n];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for d in 0..n {
            for j in 0..m {
                buf[j] = Complex64::new(x[j * n + d], 0.0);
            }
            self.fwd.process(&mut buf);
            for (k, b) in buf.iter_mut().enumerate() {
                let f = self.freq(k);
                // the Nyquist mode does not exist for odd m
                *b *= Complex64::new(0.0, TAU * f) / m as f64;
            }
            self.inv.process(&mut buf);
            for j in 0..m {
                out[j * n + d] = buf[j].re;
            }
        }
        out
    }

    /// Zero-mean `y` with `y'' = w - mean(w)`.
    fn d2_inv(&self, w: &[f64], n: usize) -> Vec<f64> {
        self.apply(w, n, |k| if k == 0.0 { 0.0 } else { -1.0 / (TAU * k).powi(2) })
    }

    /// Fourier series interpolating node-major values.
    fn to_curve(&self, x: &[f64], n: usize) -> PeriodicCurve {
        let m = self.m;
        let modes = m / 2;
        let mut coefficients = vec![vec![Complex64::new(0.0, 0.0); n]; modes + 1];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for d in 0..n {
            for j in 0..m {
                buf[j] = Complex64::new(x[j * n + d], 0.0);
            }
            self.fwd.process(&mut buf);
            for k in 0..=modes {
                coefficients[k][d] = buf[k] / m as f64;
            }
        }
        PeriodicCurve::new(n, coefficients)
    }
}

fn mean(x: &[f64], n: usize) -> Vec<f64> {
    let m = x.len() / n;
    let mut out = vec![0.0; n];
    for j in 0..m {
        for d in 0..n {
            out[d] += x[j * n + d];
        }
    }
    out.iter_mut().for_each(|v| *v /= m as f64);
    out
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Restriction of `-s·sum_i n(z - k_i)` to a node set.
struct Grid {
    m: usize,
    spectral: Spectral,
    /// Per curve, node-major positions.
    k: Vec<Vec<f64>>,
}

struct ForceEval {
    f: Vec<f64>,
    /// Per node, row-major `n x n` Jacobian of `f`.
    b: Option<Vec<f64>>,
    min_distance: f64,
    argmin: usize,
    /// Max over nodes of `sum_i |grad g(z - k_i)|`.
    max_grad_g: f64,
}

struct Problem<'a> {
    ctx: &'a ForceContext,
    sigma: f64,
    q: f64,
    n: usize,
    floor: f64,
    opts: &'a OrbitOptions,
}

impl<'a> Problem<'a> {
    fn new(ctx: &'a ForceContext, sign: Sign, opts: &'a OrbitOptions) -> Self {
        Self {
            ctx,
            sigma: sign.factor(),
            q: ctx.q(),
            n: ctx.dimension(),
            floor: opts.collision_fraction * ctx.curves().radius(),
            opts,
        }
    }

    fn grid(&self, m: usize) -> Grid {
        Grid {
            m,
            spectral: Spectral::new(m),
            k: self.ctx.curves().curves().iter().map(|c| c.sample(m, 0)).collect(),
        }
    }

    fn force(&self, grid: &Grid, z: &[f64], jacobian: bool) -> ForceEval {
        let (m, n, q) = (grid.m, self.n, self.q);
        let mut f = vec![0.0; m * n];
        let mut b = if jacobian { Some(vec![0.0; m * n * n]) } else { None };
        let mut min_distance = f64::INFINITY;
        let mut argmin = 0;
        let mut max_grad_g = 0.0f64;
        let mut u = vec![0.0; n];
        for j in 0..m {
            let mut grad_sum = 0.0;
            for k in &grid.k {
                for d in 0..n {
                    u[d] = z[j * n + d] - k[j * n + d];
                }
                let r2: f64 = u.iter().map(|v| v * v).sum();
                let r = r2.sqrt();
                if r < min_distance {
                    min_distance = r;
                    argmin = j;
                }
                let inv = r.powf(-(q + 1.0));
                grad_sum += (q - 1.0) * r.powf(-q);
                for d in 0..n {
                    f[j * n + d] -= self.sigma * u[d] * inv;
                }
                if let Some(b) = b.as_mut() {
                    let blk = &mut b[j * n * n..(j + 1) * n * n];
                    let c = (q + 1.0) * inv / r2;
                    for a in 0..n {
                        for e in 0..n {
                            let dn = if a == e { inv } else { 0.0 } - c * u[a] * u[e];
                            blk[a * n + e] -= self.sigma * dn;
                        }
                    }
                }
            }
            max_grad_g = max_grad_g.max(grad_sum);
        }
        ForceEval {
            f,
            b,
            min_distance,
            argmin,
            max_grad_g,
        }
    }

    /// Residual at `z = g + w` where `g` is known exactly through its nodal values and second derivative.
    fn residual(&self, grid: &Grid, base: &Base, w: &[f64], eps: f64, jacobian: bool) -> (Vec<f64>, ForceEval) {
        let z: Vec<f64> = base.z.iter().zip(w).map(|(g, w)| g + w).collect();
        let fe = self.force(grid, &z, jacobian);
        let mut r = grid.spectral.d2(w, self.n);
        for ((r, f), g) in r.iter_mut().zip(&fe.f).zip(&base.zpp) {
            *r += g - eps * f;
        }
        (r, fe)
    }

    fn collision(&self, grid: &Grid, fe: &ForceEval) -> Option<OrbitError> {
        (fe.min_distance < self.floor).then(|| OrbitError::Collision {
            t: fe.argmin as f64 / grid.m as f64,
            distance: fe.min_distance,
            floor: self.floor,
        })
    }

    /// Solves `(D2 - eps·B)·delta = rhs`.
    fn linear_solve(&self, grid: &Grid, b: &[f64], eps: f64, rhs: &[f64]) -> Result<Vec<f64>, OrbitError> {
        if let Some(x) = self.schur_solve(grid, b, eps, rhs) {
            return Ok(x);
        }
        if grid.m * self.n <= 1600 {
            return self.dense_solve(grid, b, eps, rhs);
        }
        Err(OrbitError::LinearSolve { unknowns: grid.m * self.n })
    }

    fn apply_b(&self, b: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let m = w.len() / n;
        let mut out = vec![0.0; m * n];
        for j in 0..m {
            let blk = &b[j * n * n..(j + 1) * n * n];
            for a in 0..n {
                out[j * n + a] = (0..n).map(|e| blk[a * n + e] * w[j * n + e]).sum();
            }
        }
        out
    }

    /// `(I - eps·L)^{-1} g` for `L w = D2^{-1} P (B w)` by fixed-point iteration.
    fn resolvent(&self, grid: &Grid, b: &[f64], eps: f64, g: &[f64]) -> Option<Vec<f64>> {
        let mut y = g.to_vec();
        let scale = sup(g).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let ly = grid.spectral.d2_inv(&self.apply_b(b, &y), self.n);
            let next: Vec<f64> = g.iter().zip(&ly).map(|(g, l)| g + eps * l).collect();
            let change = next.iter().zip(&y).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            y = next;
            if change <= 1e-15 * scale.max(sup(&y)) {
                return Some(y);
            }
            if change > 0.9 * last && last < f64::INFINITY && change > 1e-12 * scale {
                // contraction too slow or diverging
                if change > last {
                    return None;
                }
            }
            last = change;
        }
        None
    }

    fn schur_solve(&self, grid: &Grid, b: &[f64], eps: f64, rhs: &[f64]) -> Option<Vec<f64>> {
        let (m, n) = (grid.m, self.n);
        let ya = self.resolvent(grid, b, eps, &grid.spectral.d2_inv(rhs, n))?;
        let mut a = DMatrix::zeros(n, n);
        let mut ym = Vec::with_capacity(n);
        for c in 0..n {
            let mut e = vec![0.0; m * n];
            for j in 0..m {
                e[j * n + c] = 1.0;
            }
            let be = self.apply_b(b, &e);
            let g: Vec<f64> = grid.spectral.d2_inv(&be, n).iter().map(|v| eps * v).collect();
            let y = self.resolvent(grid, b, eps, &g)?;
            let col: Vec<f64> = mean(&be, n).iter().zip(mean(&self.apply_b(b, &y), n)).map(|(x, y)| x + y).collect();
            for r in 0..n {
                a[(r, c)] = col[r];
            }
            ym.push(y);
        }
        let mr = mean(rhs, n);
        let mby = mean(&self.apply_b(b, &ya), n);
        let v = DVector::from_iterator(n, (0..n).map(|d| -mr[d] / eps - mby[d]));
        let c = a.lu().solve(&v)?;
        let mut delta = ya;
        for j in 0..m {
            for d in 0..n {
                let mut s = c[d];
                for (mi, y) in ym.iter().enumerate() {
                    s += c[mi] * y[j * n + d];
                }
                delta[j * n + d] += s;
            }
        }
        delta.iter().all(|v| v.is_finite()).then_some(delta)
    }

    fn dense_solve(&self, grid: &Grid, b: &[f64], eps: f64, rhs: &[f64]) -> Result<Vec<f64>, OrbitError> {
        let (m, n) = (grid.m, self.n);
        let size = m * n;
        let mut d2 = DMatrix::zeros(m, m);
        for c in 0..m {
            let mut e = vec![0.0; m];
            e[c] = 1.0;
            let col = grid.spectral.d2(&e, 1);
            for r in 0..m {
                d2[(r, c)] = col[r];
            }
        }
        let mut jac = DMatrix::zeros(size, size);
        for r in 0..m {
            for c in 0..m {
                for d in 0..n {
                    jac[(r * n + d, c * n + d)] = d2[(r, c)];
                }
            }
            for a in 0..n {
                for e in 0..n {
                    jac[(r * n + a, r * n + e)] -= eps * b[r * n * n + a * n + e];
                }
            }
        }
        jac.lu()
            .solve(&DVector::from_column_slice(rhs))
            .map(|x| x.as_slice().to_vec())
            .ok_or(OrbitError::LinearSolve { unknowns: size })
    }

    /// Damped Newton on the collocation system at a fixed grid.
    fn newton(&self, grid: &Grid, base: &Base, eps: f64) -> Result<(Vec<f64>, usize), OrbitError> {
        let mut z = vec![0.0; base.z.len()];
        let (mut r, mut fe) = self.residual(grid, base, &z, eps, true);
        if let Some(e) = self.collision(grid, &fe) {
            return Err(e);
        }
        let scale = |fe: &ForceEval| 1f64.max(eps * fe.max_grad_g);
        // rounding in the spectral second derivative grows like the square of the top frequency
        let noise = |z: &[f64]| 10.0 * f64::EPSILON * (TAU * (grid.m / 2) as f64).powi(2) * sup(z);
        for it in 0..self.opts.max_iterations {
            let rn = sup(&r);
            if rn <= 1e-12 * scale(&fe) {
                return Ok((z, it));
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = self.linear_solve(grid, fe.b.as_ref().unwrap(), eps, &rhs)?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = z.iter().zip(&delta).map(|(z, d)| z + alpha * d).collect();
                let (rt, ft) = self.residual(grid, base, &trial, eps, true);
                if ft.min_distance >= self.floor && sup(&rt) < (1.0 - 1e-4 * alpha) * rn {
                    z = trial;
                    r = rt;
                    fe = ft;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // rounding floor reached
                if rn <= (1e-9 * scale(&fe)).max(noise(&z)) {
                    return Ok((z, it));
                }
                return Err(OrbitError::Divergence {
                    iterations: it,
                    residual: rn,
                });
            }
        }
        Err(OrbitError::Divergence {
            iterations: self.opts.max_iterations,
            residual: sup(&r),
        })
    }

    /// Residual of the Fourier interpolant on a 4x finer node set.
    fn certify(&self, curve: &PeriodicCurve, m: usize, eps: f64) -> Certificate {
        let fine = 4 * m;
        let grid = self.grid(fine);
        let z = curve.sample(fine, 0);
        let zpp = curve.sample(fine, 2);
        let fe = self.force(&grid, &z, false);
        let residual = zpp
            .iter()
            .zip(&fe.f)
            .fold(0.0f64, |a, (p, f)| a.max((p - eps * f).abs()));
        Certificate {
            residual,
            tolerance: self.opts.residual_factor * 1f64.max(eps * fe.max_grad_g),
            min_distance: fe.min_distance,
            argmin_t: fe.argmin as f64 / fine as f64,
        }
    }

    /// Newton with mode doubling until the fine residual is certified.
    fn solve(&self, guess: &PeriodicCurve, eps: f64, modes: usize) -> Result<PeriodicOrbit, OrbitError> {
        let mut modes = modes.max(4);
        let mut iterations = 0;
        let mut curve = guess.clone();
        loop {
            let m = 2 * modes + 1;
            let grid = self.grid(m);
            let base = Base::of(&curve, m);
            let (w, it) = self.newton(&grid, &base, eps)?;
            iterations += it;
            curve = curve.linear_combination(1.0, &grid.spectral.to_curve(&w, self.n), 1.0);
            let cert = self.certify(&curve, m, eps);
            if cert.min_distance <= self.floor {
                return Err(OrbitError::Collision {
                    t: cert.argmin_t,
                    distance: cert.min_distance,
                    floor: self.floor,
                });
            }
            log::trace!("eps {eps:e}: {modes} modes, fine residual {:.2e}, {it} Newton steps", cert.residual);
            if cert.residual < cert.tolerance {
                log::debug!("orbit at eps {eps:e}: {modes} modes, residual {:.2e}", cert.residual);
                return Ok(self.package(curve, eps, modes, cert, iterations));
            }
            if 2 * modes > self.opts.max_modes {
                return Err(OrbitError::NotCertified {
                    residual: cert.residual,
                    tolerance: cert.tolerance,
                    modes,
                });
            }
            modes *= 2;
        }
    }

    fn package(&self, z: PeriodicCurve, eps: f64, modes: usize, cert: Certificate, iterations: usize) -> PeriodicOrbit {
        let winding = self.winding(&z, 8 * modes + 4);
        PeriodicOrbit {
            epsilon: eps,
            lambda: lambda_of(eps, self.q),
            q: self.q,
            sign: if self.sigma > 0.0 { Sign::Attractive } else { Sign::Repulsive },
            modes,
            z,
            residual_sup: cert.residual,
            residual_tolerance: cert.tolerance,
            min_distance_to_k: cert.min_distance,
            collision_floor: self.floor,
            winding,
            monodromy: None,
            newton_iterations: iterations,
            seed: String::new(),
        }
    }

    fn winding(&self, z: &PeriodicCurve, samples: usize) -> Option<i64> {
        let curves = self.ctx.curves().curves();
        if self.n != 2 || curves.len() != 1 {
            return None;
        }
        let zs = z.sample(samples, 0);
        let hs = curves[0].sample(samples, 0);
        let pts: Vec<[f64; 2]> = (0..samples)
            .map(|j| [zs[2 * j] - hs[2 * j], zs[2 * j + 1] - hs[2 * j + 1]])
            .collect();
        Some(angle_winding(&pts))
    }
}

struct Base {
    z: Vec<f64>,
    zpp: Vec<f64>,
}

impl Base {
    fn of(curve: &PeriodicCurve, m: usize) -> Self {
        Self {
            z: curve.sample(m, 0),
            zpp: curve.sample(m, 2),
        }
    }
}

struct Certificate {
    residual: f64,
    tolerance: f64,
    min_distance: f64,
    argmin_t: f64,
}

/// Turns of a closed sampled planar loop around the origin.
pub fn angle_winding(points: &[[f64; 2]]) -> i64 {
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let q = points[(i + 1) % points.len()];
        total += (p[0] * q[1] - p[1] * q[0]).atan2(p[0] * q[0] + p[1] * q[1]);
    }
    (total / TAU).round() as i64
}

fn constant_curve(x: &[f64]) -> PeriodicCurve {
    PeriodicCurve::zero(x.len()).translated(x)
}

/// Periodic solution near `guess` at fixed `eps`. `eps = 0` returns the constant mean of the guess.
pub fn solve_bvp(
    ctx: &ForceContext,
    sign: Sign,
    eps: f64,
    guess: &PeriodicCurve,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit, OrbitError> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(OrbitError::Invalid(format!("epsilon must be finite and >= 0, got {eps}")));
    }
    if guess.dimension() != ctx.dimension() {
        return Err(OrbitError::Invalid("guess dimension differs from the curves".into()));
    }
    let problem = Problem::new(ctx, sign, opts);
    if eps == 0.0 {
        // every constant solves z'' = 0; the guess is projected onto the constants
        let z = constant_curve(&guess.mean());
        let cert = problem.certify(&z, 2 * opts.modes + 1, 0.0);
        if cert.min_distance <= problem.floor {
            return Err(OrbitError::Collision {
                t: cert.argmin_t,
                distance: cert.min_distance,
                floor: problem.floor,
            });
        }
        let mut orbit = problem.package(z, 0.0, opts.modes, cert, 0);
        orbit.lambda = f64::INFINITY;
        return Ok(orbit);
    }
    problem.solve(guess, eps, opts.modes)
}

/// Solve posed at the physical level `lambda`. `lambda = 0` is refused.
pub fn solve_at_lambda(
    ctx: &ForceContext,
    sign: Sign,
    lambda: f64,
    guess: &PeriodicCurve,
    opts: &OrbitOptions,
) -> Result<PeriodicOrbit, OrbitError> {
    if lambda == 0.0 {
        return Err(OrbitError::Refused(match sign {
            Sign::Repulsive => {
                "lambda = 0: the unforced repulsive problem has no periodic solutions (|u|^2 is strictly convex along solutions)".into()
            }
            Sign::Attractive => {
                "lambda = 0: the unforced attractive problem has only non-isolated Kepler orbits, outside the perturbative regime".into()
            }
        }));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(OrbitError::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    solve_bvp(ctx, sign, epsilon_of(lambda, ctx.q()), guess, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    Reached,
    /// The step fell below `1e-12·target`; the branch ends at the last good point.
    Stuck,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub status: BranchStatus,
    pub start: Vec<f64>,
    pub target: f64,
    pub last_epsilon: f64,
    pub steps: usize,
    /// Last accepted orbit, if any step succeeded.
    pub orbit: Option<PeriodicOrbit>,
    pub last_error: Option<String>,
}

impl Branch {
    pub fn reached(&self) -> bool {
        self.status == BranchStatus::Reached
    }
}

/// Natural-parameter continuation from a nondegenerate critical point of G at `eps = 0`.
pub fn continue_in_epsilon(
    ctx: &ForceContext,
    sign: Sign,
    start: &CriticalPoint,
    target: f64,
    max_steps: usize,
    opts: &OrbitOptions,
) -> Result<Branch, OrbitError> {
    if start.degenerate {
        return Err(OrbitError::Refused("continuation needs a nondegenerate critical point".into()));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(OrbitError::Invalid(format!("target epsilon must be positive, got {target}")));
    }
    let problem = Problem::new(ctx, sign, opts);
    let mut prev: Option<(f64, PeriodicCurve)> = None;
    let mut cur: (f64, PeriodicCurve) = (0.0, constant_curve(&start.x));
    let mut orbit: Option<PeriodicOrbit> = None;
    let mut step = 1e-4 * target;
    let mut modes = opts.modes;
    let mut last_error = None;
    let mut steps = 0;
    let mut status = BranchStatus::StepLimit;
    while steps < max_steps {
        let next = (cur.0 + step).min(target);
        let guess = match &prev {
            // secant predictor
            Some((e0, z0)) if cur.0 > *e0 => {
                let s = (next - cur.0) / (cur.0 - e0);
                cur.1.linear_combination(1.0 + s, z0, -s)
            }
            _ => cur.1.clone(),
        };
        steps += 1;
        match problem.solve(&guess, next, modes) {
            Ok(o) => {
                modes = o.modes;
                if o.newton_iterations <= 4 {
                    step *= 1.5;
                }
                prev = Some(std::mem::replace(&mut cur, (next, o.z.clone())));
                orbit = Some(o);
                if next >= target {
                    status = BranchStatus::Reached;
                    break;
                }
            }
            Err(e) => {
                log::debug!("continuation step to {next:e} failed: {e}");
                last_error = Some(e.to_string());
                step *= 0.5;
                if step < 1e-12 * target {
                    status = BranchStatus::Stuck;
                    break;
                }
            }
        }
    }
    Ok(Branch {
        status,
        start: start.x.clone(),
        target,
        last_epsilon: cur.0,
        steps,
        orbit,
        last_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalOrbit {
    pub lambda: f64,
    pub u: PeriodicCurve,
    /// Sup over the fine nodes of `|u'' ± u/|u|^{q+1} - lambda·h|`.
    pub residual_sup: f64,
    pub min_norm: f64,
    pub max_norm: f64,
    pub max_speed: f64,
    /// `|h|_inf`.
    pub forcing_sup: f64,
    /// `|u|` left `[1e-6, 1e6]` somewhere.
    pub suspicious: bool,
}

fn fine_count(orbit: &PeriodicOrbit) -> usize {
    4 * (2 * orbit.modes + 1)
}

/// `u = lambda·(z - H)` for a single curve `H` with its equation residual.
pub fn to_physical(ctx: &ForceContext, orbit: &PeriodicOrbit) -> Result<PhysicalOrbit, OrbitError> {
    let curves = ctx.curves().curves();
    if curves.len() != 1 {
        return Err(OrbitError::Invalid("the physical form needs a single curve H".into()));
    }
    if orbit.epsilon <= 0.0 {
        return Err(OrbitError::Invalid("the physical form needs epsilon > 0".into()));
    }
    let hcurve = &curves[0];
    let lambda = orbit.lambda;
    let u = orbit.z.linear_combination(lambda, hcurve, -lambda);
    let h = hcurve.derivative(2).linear_combination(-1.0, &PeriodicCurve::zero(hcurve.dimension()), 0.0);
    let n = orbit.dimension();
    let fine = fine_count(orbit).max(4 * (2 * hcurve.modes() + 1));
    let us = u.sample(fine, 0);
    let upp = u.sample(fine, 2);
    let up = u.sample(fine, 1);
    let hs = h.sample(fine, 0);
    let s = orbit.sign.factor();
    let (mut residual, mut min_norm, mut max_norm, mut max_speed, mut hsup) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for j in 0..fine {
        let uj = &us[j * n..(j + 1) * n];
        let r = uj.iter().map(|v| v * v).sum::<f64>().sqrt();
        min_norm = min_norm.min(r);
        max_norm = max_norm.max(r);
        max_speed = max_speed.max(up[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt());
        hsup = hsup.max(hs[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt());
        let inv = r.powf(-(orbit.q + 1.0));
        let mut e2 = 0.0;
        for d in 0..n {
            let e = upp[j * n + d] + s * uj[d] * inv - lambda * hs[j * n + d];
            e2 += e * e;
        }
        residual = residual.max(e2.sqrt());
    }
    Ok(PhysicalOrbit {
        lambda,
        u,
        residual_sup: residual,
        min_norm,
        max_norm,
        max_speed,
        forcing_sup: hsup,
        suspicious: !(1e-6..=1e6).contains(&min_norm) || !(1e-6..=1e6).contains(&max_norm),
    })
}

/// Max over `samples` nodes of `|E' - lambda·<u', h>|` with
/// `E = |u'|^2/2 - s/((q-1)|u|^{q-1})`, `E'` by spectral differentiation of the sampled energy.
pub fn energy_check(u: &PeriodicCurve, h: &PeriodicCurve, lambda: f64, q: f64, sign: Sign, samples: usize) -> f64 {
    let n = u.dimension();
    let m = samples | 1;
    let us = u.sample(m, 0);
    let up = u.sample(m, 1);
    let hs = h.sample(m, 0);
    let s = sign.factor();
    let energy: Vec<f64> = (0..m)
        .map(|j| {
            let v2: f64 = up[j * n..(j + 1) * n].iter().map(|v| v * v).sum();
            let r = us[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt();
            0.5 * v2 - s / ((q - 1.0) * r.powf(q - 1.0))
        })
        .collect();
    let de = Spectral::new(m).d1(&energy, 1);
    (0..m)
        .map(|j| {
            let power: f64 = (0..n).map(|d| up[j * n + d] * hs[j * n + d]).sum();
            (de[j] - lambda * power).abs()
        })
        .fold(0.0, f64::max)
}

/// Energy identity residual of an orbit of a single-curve context, on its fine node set.
pub fn orbit_energy_residual(ctx: &ForceContext, orbit: &PeriodicOrbit) -> Result<f64, OrbitError> {
    let phys = to_physical(ctx, orbit)?;
    let h = ctx.curves().curves()[0].derivative(2).linear_combination(-1.0, &PeriodicCurve::zero(orbit.dimension()), 0.0);
    Ok(energy_check(&phys.u, &h, orbit.lambda, orbit.q, orbit.sign, fine_count(orbit)))
}

/// Floquet data of the variational equation `v'' = eps·B(t)·v` over one period.
pub fn nondegeneracy(ctx: &ForceContext, orbit: &PeriodicOrbit, opts: &OrbitOptions) -> Result<Monodromy, OrbitError> {
    let n = orbit.dimension();
    let dim = 2 * n;
    let problem = Problem::new(ctx, orbit.sign, opts);
    let eps = orbit.epsilon;
    let zc = orbit.z.clone();
    let curves = ctx.curves().curves().to_vec();
    let q = orbit.q;
    let sigma = problem.sigma;
    // columns of the state matrix are integrated together: y = [V; V'] column-major per column
    let mut y0 = vec![0.0; dim * dim];
    for c in 0..dim {
        y0[c * dim + c] = 1.0;
    }
    let mut zt = vec![0.0; n];
    let mut kt = vec![0.0; n];
    let mut blk = vec![0.0; n * n];
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| -> Result<(), String> {
        zc.eval_into(t, 0, &mut zt);
        blk.iter_mut().for_each(|v| *v = 0.0);
        for k in &curves {
            k.eval_into(t, 0, &mut kt);
            let u: Vec<f64> = zt.iter().zip(&kt).map(|(a, b)| a - b).collect();
            let r2: f64 = u.iter().map(|v| v * v).sum();
            if r2 == 0.0 {
                return Err("orbit meets the curve".into());
            }
            let inv = r2.sqrt().powf(-(q + 1.0));
            let c = (q + 1.0) * inv / r2;
            for a in 0..n {
                for e in 0..n {
                    let dn = if a == e { inv } else { 0.0 } - c * u[a] * u[e];
                    blk[a * n + e] -= sigma * dn;
                }
            }
        }
        for col in 0..dim {
            let v = &y[col * dim..col * dim + n];
            let vp = &y[col * dim + n..(col + 1) * dim];
            let o = &mut out[col * dim..(col + 1) * dim];
            o[..n].copy_from_slice(vp);
            for a in 0..n {
                o[n + a] = eps * (0..n).map(|e| blk[a * n + e] * v[e]).sum::<f64>();
            }
        }
        Ok(())
    };
    let (y1, stats) = dopri5(rhs, 0.0, 1.0, &y0, opts.monodromy_tol).map_err(|e| OrbitError::Integrator(e.to_string()))?;
    let m = DMatrix::from_column_slice(dim, dim, &y1);
    let shifted = &m - DMatrix::identity(dim, dim);
    let det_gap = shifted.clone().lu().determinant().abs();
    let sv = shifted.singular_values();
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm = m.clone().singular_values().iter().cloned().fold(0.0, f64::max);
    let eigenvalues = m.complex_eigenvalues().iter().map(|c| [c.re, c.im]).collect();
    Ok(Monodromy {
        eigenvalues,
        det_gap,
        sigma_min,
        norm,
        nondegenerate: eps > 0.0 && sigma_min > opts.nondegeneracy_threshold * norm,
        det_criterion: eps > 0.0 && det_gap > opts.nondegeneracy_threshold * norm,
        steps: stats.accepted + stats.rejected,
    })
}

/// Sup distance between two orbits on a common fine node set.
pub fn orbit_distance(a: &PeriodicOrbit, b: &PeriodicOrbit) -> f64 {
    let fine = fine_count(a).max(fine_count(b));
    let n = a.dimension();
    let (za, zb) = (a.z.sample(fine, 0), b.z.sample(fine, 0));
    (0..fine)
        .map(|j| dist(&za[j * n..(j + 1) * n], &zb[j * n..(j + 1) * n]))
        .fold(0.0, f64::max)
}

/// Equivalence classes under sup distance `< tol`, representatives in input order.
pub fn distinct_classes(orbits: &[PeriodicOrbit], tol: f64) -> Vec<usize> {
    let mut reps: Vec<usize> = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        if !reps.iter().any(|&r| orbit_distance(&orbits[r], o) < tol) {
            reps.push(i);
        }
    }
    reps
}

pub fn distinct_count(orbits: &[PeriodicOrbit], tol: f64) -> usize {
    distinct_classes(orbits, tol).len()
}

/// Change of an orbit when re-solved with twice the modes.
pub fn refinement_change(ctx: &ForceContext, orbit: &PeriodicOrbit, opts: &OrbitOptions) -> Result<f64, OrbitError> {
    let problem = Problem::new(ctx, orbit.sign, opts);
    let modes = 2 * orbit.modes;
    let m = 2 * modes + 1;
    let grid = problem.grid(m);
    let (w, _) = problem.newton(&grid, &Base::of(&orbit.z, m), orbit.epsilon)?;
    let fine = orbit.z.linear_combination(1.0, &grid.spectral.to_curve(&w, problem.n), 1.0);
    let n = problem.n;
    let count = 4 * m;
    let (a, b) = (orbit.z.sample(count, 0), fine.sample(count, 0));
    Ok((0..count)
        .map(|j| dist(&a[j * n..(j + 1) * n], &b[j * n..(j + 1) * n]))
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultistartStrategy {
    /// Critical points of G to continue from.
    pub critical_points: Vec<CriticalPoint>,
    /// Component windings to seed loops around `H` with, planar single curves only.
    pub windings: Vec<i64>,
    /// Loop radii as fractions of the curve radius.
    pub loop_radii: Vec<f64>,
    pub random_constants: usize,
    pub seed: u64,
    pub max_continuation_steps: usize,
    pub distinct_tol: f64,
    pub monodromy: bool,
}

impl Default for MultistartStrategy {
    fn default() -> Self {
        Self {
            critical_points: Vec::new(),
            windings: Vec::new(),
            loop_radii: vec![0.1, 0.3, 1.0],
            random_constants: 8,
            seed: 0,
            max_continuation_steps: 200,
            distinct_tol: 1e-3,
            monodromy: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultistartReport {
    pub epsilon: f64,
    pub sign: Sign,
    /// Distinct certified orbits in seed order.
    pub orbits: Vec<PeriodicOrbit>,
    pub seeds: usize,
    pub failures: Vec<SeedFailure>,
    /// `(winding, count)` sorted by descending winding; empty unless windings are defined.
    pub per_winding: Vec<(i64, usize)>,
}

/// All seeds are solved independently and the certified results deduplicated in seed order.
pub fn multistart_search(
    ctx: &ForceContext,
    sign: Sign,
    eps: f64,
    strategy: &MultistartStrategy,
    opts: &OrbitOptions,
) -> MultistartReport {
    let mut found: Vec<PeriodicOrbit> = Vec::new();
    let mut failures = Vec::new();
    let mut seeds = 0;
    let mut record = |label: String, result: Result<PeriodicOrbit, OrbitError>, found: &mut Vec<PeriodicOrbit>| match result {
        Ok(mut o) => {
            o.seed = label;
            found.push(o);
        }
        Err(e) => {
            log::debug!("seed {label}: {e}");
            failures.push(SeedFailure { seed: label, reason: e.to_string() });
        }
    };
    for (i, cp) in strategy.critical_points.iter().enumerate() {
        seeds += 1;
        let label = format!("critical point {i}");
        let result = continue_in_epsilon(ctx, sign, cp, eps, strategy.max_continuation_steps, opts).and_then(|b| {
            if b.reached() {
                Ok(b.orbit.expect("a reached branch has an orbit"))
            } else {
                Err(OrbitError::Stopped {
                    epsilon: b.last_epsilon,
                    reason: b.last_error.unwrap_or_default(),
                })
            }
        });
        record(label, result, &mut found);
    }
    let curves = ctx.curves().curves();
    let n = ctx.dimension();
    if n == 2 && curves.len() == 1 {
        let h = &curves[0];
        let radius = h.radius();
        for &w in &strategy.windings {
            for &rho in &strategy.loop_radii {
                seeds += 1;
                let amp = rho * radius;
                let lp = PeriodicCurve::from_complex_modes(&[(w, Complex64::new(amp, 0.0))]);
                let guess = h.linear_combination(1.0, &lp, 1.0);
                let label = format!("loop winding {w} radius {rho}");
                record(label, solve_bvp(ctx, sign, eps, &guess, opts), &mut found);
            }
        }
    }
    let (lo, hi) = ctx.curves().bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    for i in 0..strategy.random_constants {
        seeds += 1;
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..=*b)).collect();
        let label = format!("constant {i}");
        record(label, solve_bvp(ctx, sign, eps, &constant_curve(&x), opts), &mut found);
    }
    let reps = distinct_classes(&found, strategy.distinct_tol);
    let mut orbits: Vec<PeriodicOrbit> = reps.into_iter().map(|i| found[i].clone()).collect();
    if strategy.monodromy {
        for o in &mut orbits {
            match nondegeneracy(ctx, o, opts) {
                Ok(m) => o.monodromy = Some(m),
                Err(e) => log::debug!("monodromy of {}: {e}", o.seed),
            }
        }
    }
    let mut per_winding: Vec<(i64, usize)> = Vec::new();
    for o in &orbits {
        if let Some(w) = o.winding {
            match per_winding.iter_mut().find(|(v, _)| *v == w) {
                Some(e) => e.1 += 1,
                None => per_winding.push((w, 1)),
            }
        }
    }
    per_winding.sort_by(|a, b| b.0.cmp(&a.0));
    MultistartReport {
        epsilon: eps,
        sign,
        orbits,
        seeds,
        failures,
        per_winding,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Catalog, CurveSet};
    use crate::field::Kernel;

    fn circle_ctx(sign: Sign) -> ForceContext {
        let c = Catalog::parse("circle(1, 2)").unwrap().build().unwrap();
        ForceContext::new(c, Kernel::new(2.0, sign).unwrap())
    }

    fn center_point(ctx: &ForceContext) -> CriticalPoint {
        crate::critical::classify(ctx, &[0.0, 0.0], &Default::default()).unwrap()
    }

    #[test]
    fn spectral_second_derivative_and_inverse() {
        let m = 33;
        let sp = Spectral::new(m);
        let x: Vec<f64> = (0..m).map(|j| (TAU * 3.0 * j as f64 / m as f64).sin() + 2.0).collect();
        let d2 = sp.d2(&x, 1);
        for j in 0..m {
            let t = j as f64 / m as f64;
            assert!((d2[j] + (TAU * 3.0).powi(2) * (TAU * 3.0 * t).sin()).abs() < 1e-9);
        }
        let back = sp.d2_inv(&d2, 1);
        for j in 0..m {
            assert!((back[j] - (x[j] - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_epsilon_constant() {
        let ctx = circle_ctx(Sign::Attractive);
        let o = solve_bvp(&ctx, Sign::Attractive, 0.0, &constant_curve(&[0.1, 0.2]), &Default::default()).unwrap();
        assert_eq!(o.residual_sup, 0.0);
        assert_eq!(o.center(), vec![0.1, 0.2]);
    }

    #[test]
    fn circle_branch_matches_shooting() {
        let ctx = circle_ctx(Sign::Attractive);
        let opts = OrbitOptions::default();
        let branch = continue_in_epsilon(&ctx, Sign::Attractive, &center_point(&ctx), 1e-3, 200, &opts).unwrap();
        assert!(branch.reached(), "{branch:?}");
        let o = branch.orbit.unwrap();
        assert!(o.residual_sup < 1e-10, "{}", o.residual_sup);
        assert!(dist(&o.center(), &[0.0, 0.0]) < 0.1);
        // shooting oracle: integrate z'' from the orbit's initial data for one period
        let z0 = o.z.point(0.0);
        let v0 = o.z.eval(0.0, 1).unwrap();
        let h = ctx.curve().clone();
        let (y, _) = dopri5(
            |t, y, out| {
                let k = h.point(t);
                let u = [y[0] - k[0], y[1] - k[1]];
                let r3 = (u[0] * u[0] + u[1] * u[1]).powf(1.5);
                out[0] = y[2];
                out[1] = y[3];
                out[2] = -1e-3 * u[0] / r3;
                out[3] = -1e-3 * u[1] / r3;
                Ok(())
            },
            0.0,
            1.0,
            &[z0[0], z0[1], v0[0], v0[1]],
            1e-12,
        )
        .unwrap();
        assert!((y[0] - z0[0]).abs() < 1e-8 && (y[1] - z0[1]).abs() < 1e-8, "{y:?} {z0:?}");
        assert!((y[2] - v0[0]).abs() < 1e-7 && (y[3] - v0[1]).abs() < 1e-7);
        let m = nondegeneracy(&ctx, &o, &opts).unwrap();
        assert!(m.nondegenerate, "{m:?}");
        let phys = to_physical(&ctx, &o).unwrap();
        assert!((phys.lambda - 10.0).abs() < 1e-12);
        assert!(phys.min_norm > 1.0);
        assert!(o.lambda_relation_error() < 1e-14);
    }

    #[test]
    fn repulsive_circle_branch() {
        let ctx = circle_ctx(Sign::Repulsive);
        let branch =
            continue_in_epsilon(&ctx, Sign::Repulsive, &center_point(&ctx), 1e-3, 200, &Default::default()).unwrap();
        assert!(branch.reached(), "{branch:?}");
    }

    #[test]
    fn energy_identity_and_negative_control() {
        let ctx = circle_ctx(Sign::Attractive);
        let opts = OrbitOptions::default();
        let o = continue_in_epsilon(&ctx, Sign::Attractive, &center_point(&ctx), 1e-3, 200, &opts)
            .unwrap()
            .orbit
            .unwrap();
        let phys = to_physical(&ctx, &o).unwrap();
        let tol = 1e-6 * o.lambda * phys.forcing_sup * phys.max_speed;
        assert!(orbit_energy_residual(&ctx, &o).unwrap() < tol);
        assert!(phys.residual_sup < 1e-6 * o.lambda * phys.forcing_sup);
        let bumped = o.z.linear_combination(1.0, &PeriodicCurve::from_complex_modes(&[(2, Complex64::new(0.05, 0.0))]), 1.0);
        let mut bad = o.clone();
        bad.z = bumped;
        assert!(orbit_energy_residual(&ctx, &bad).unwrap() > 1e-2);
    }

    #[test]
    fn lambda_zero_refused() {
        let ctx = circle_ctx(Sign::Repulsive);
        let r = solve_at_lambda(&ctx, Sign::Repulsive, 0.0, &constant_curve(&[0.0, 0.0]), &Default::default());
        assert!(matches!(r, Err(OrbitError::Refused(_))));
    }

    #[test]
    fn distinct_counting() {
        let ctx = circle_ctx(Sign::Attractive);
        let o = solve_bvp(&ctx, Sign::Attractive, 0.0, &constant_curve(&[0.1, 0.0]), &Default::default()).unwrap();
        let mut p = o.clone();
        p.z = constant_curve(&[0.3, 0.0]);
        assert_eq!(distinct_count(&[], 1e-3), 0);
        assert_eq!(distinct_count(&[o.clone(), p.clone(), o, p], 1e-3), 2);
    }

    #[test]
    fn unit_period_map_at_zero() {
        let ctx = circle_ctx(Sign::Attractive);
        let opts = OrbitOptions::default();
        let o = solve_bvp(&ctx, Sign::Attractive, 0.0, &constant_curve(&[0.0, 0.0]), &opts).unwrap();
        let m = nondegeneracy(&ctx, &o, &opts).unwrap();
        assert!(!m.nondegenerate);
        assert!(m.det_gap < 1e-12);
        let _ = CurveSet::single(ctx.curve().clone());
    }
}
