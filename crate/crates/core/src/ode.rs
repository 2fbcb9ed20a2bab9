//! Adaptive Dormand-Prince 5(4) integrator for small first-order systems.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// differences between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 200_000 }
    }
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction).
pub fn integrate<const N: usize, F>(f: F, x0: f64, y0: [f64; N], x1: f64, tol: Tolerances) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut x = x0;
    let mut y = y0;
    let mut h = dir * (span.abs() * 1e-3).max(1e-10);
    let mut k1 = f(x, &y);
    for _ in 0..tol.max_steps {
        if (x1 - x) * dir <= 0.0 {
            return Ok(y);
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let k2 = f(x + C2 * h, &axpy(&y, &[(h * A21, &k1)]));
        let k3 = f(x + C3 * h, &axpy(&y, &[(h * A31, &k1), (h * A32, &k2)]));
        let k4 = f(x + C4 * h, &axpy(&y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]));
        let k5 = f(x + C5 * h, &axpy(&y, &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]));
        let k6 = f(x + h, &axpy(&y, &[(h * A61, &k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)]));
        let y_new = axpy(&y, &[(h * B1, &k1), (h * B3, &k3), (h * B4, &k4), (h * B5, &k5), (h * B6, &k6)]);
        let k7 = f(x + h, &y_new);
        let mut err = 0.0f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            if h.abs() < 1e-14 * x.abs().max(1.0) {
                return Err(Error::Integration { rho: x, reason: "non-finite state".into() });
            }
            continue;
        }
        if err <= 1.0 {
            x += h;
            y = y_new;
            k1 = k7;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * x.abs().max(1.0) {
            return Err(Error::Integration { rho: x, reason: "step size underflow".into() });
        }
    }
    Err(Error::Integration { rho: x, reason: "too many steps".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let y = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], 10.0, Tolerances::default()).unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-10);
        assert!((y[1] - 10f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn backward_direction() {
        let y = integrate(|_, y: &[f64; 1]| [y[0]], 1.0, [1f64.exp()], 0.0, Tolerances::default()).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12);
    }
}
