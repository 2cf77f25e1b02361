//! Dormand-Prince 5(4) with local error control.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("too many steps ({0})")]
    TooManySteps(usize),
    #[error("right-hand side failed at t = {t}: {reason}")]
    Rhs { t: f64, reason: String },
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Debug)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` with mixed tolerance `tol * (1 + |y|)` per component.
pub fn dopri5<F>(mut f: F, t0: f64, t1: f64, y0: &[f64], tol: f64) -> Result<(Vec<f64>, Stats), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let span = t1 - t0;
    let mut h = 0.01 * span;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut stats = Stats { accepted: 0, rejected: 0 };
    let call = |f: &mut F, t: f64, y: &[f64], out: &mut [f64]| f(t, y, out).map_err(|reason| OdeError::Rhs { t, reason });
    call(&mut f, t, &y, &mut k[0])?;
    while (t1 - t) * span.signum() > 0.0 {
        if stats.accepted + stats.rejected > 1_000_000 {
            return Err(OdeError::TooManySteps(stats.accepted + stats.rejected));
        }
        if (t + h - t1) * span.signum() > 0.0 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            call(&mut f, t + C[s] * h, &tmp, &mut tail[0])?;
        }
        // tmp holds the 5th-order solution (FSAL: stage 7 was evaluated there)
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * k[s][i];
            }
            let scale = tol * (1.0 + y[i].abs().max(tmp[i].abs()));
            err = err.max((h * e).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&tmp);
            k.swap(0, 6);
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * span.abs() {
            return Err(OdeError::StepUnderflow { t });
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        // y'' = -(2 pi)^2 y returns to its start after one unit of time
        let w2 = (std::f64::consts::TAU).powi(2);
        let (y, stats) = dopri5(
            |_, y, out| {
                out[0] = y[1];
                out[1] = -w2 * y[0];
                Ok(())
            },
            0.0,
            1.0,
            &[1.0, 0.0],
            1e-10,
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-7, "{y:?}");
        assert!(stats.accepted > 10);
    }

    #[test]
    fn exponential() {
        let (y, _) = dopri5(
            |_, y, out| {
                out[0] = y[0];
                Ok(())
            },
            0.0,
            2.0,
            &[1.0],
            1e-12,
        )
        .unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-9);
    }
}
