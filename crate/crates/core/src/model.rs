//! The radial equation `u_tt = u_rr + (2/r) u_r - f(u)/r^2` with
//! `f(u) = -3u(1 - u^2)`, its self-similar attractor and the potential of
//! the linearized operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `-lim_{rho -> 0} 2 U0''(rho)`: the constant in `(T-t)^2 u_rr(t,0) -> -16/5`.
pub const CURVATURE_CONSTANT: f64 = 16.0 / 5.0;

/// The cubic nonlinearity `f(u) = -3u(1 - u^2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Nonlinearity;

impl Nonlinearity {
    #[inline]
    pub fn f(self, u: f64) -> f64 {
        -3.0 * u * (1.0 - u * u)
    }

    #[inline]
    pub fn fprime(self, u: f64) -> f64 {
        -3.0 + 9.0 * u * u
    }
}

#[inline]
pub fn f_eval(u: f64) -> f64 {
    Nonlinearity.f(u)
}

#[inline]
pub fn fprime_eval(u: f64) -> f64 {
    Nonlinearity.fprime(u)
}

/// `U0(rho) = (1 - rho^2) / (1 + 3 rho^2 / 5)`.
#[inline]
pub fn u0_profile(rho: f64) -> f64 {
    let x = rho * rho;
    5.0 * (1.0 - x) / (5.0 + 3.0 * x)
}

#[inline]
pub fn u0_prime(rho: f64) -> f64 {
    let d = 5.0 + 3.0 * rho * rho;
    -80.0 * rho / (d * d)
}

#[inline]
pub fn u0_second(rho: f64) -> f64 {
    let x = rho * rho;
    let d = 5.0 + 3.0 * x;
    (720.0 * x - 400.0) / (d * d * d)
}

/// `V(rho) = f'(U0(rho))` in closed form.
#[inline]
pub fn potential_v(rho: f64) -> f64 {
    let x = rho * rho;
    let d = 5.0 + 3.0 * x;
    6.0 * (25.0 - 90.0 * x + 33.0 * x * x) / (d * d)
}

/// Static residual `(1 - rho^2)(U0'' + 2 U0'/rho) - f(U0)/rho^2`, which
/// vanishes identically because `U0` is a stationary solution in similarity
/// variables.
pub fn stationary_residual(rho: f64) -> f64 {
    let u = u0_profile(rho);
    (1.0 - rho * rho) * (u0_second(rho) + 2.0 * u0_prime(rho) / rho) - f_eval(u) / (rho * rho)
}

/// The attractor `u(t, r) = U0(r / (T - t))` for a given blowup time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub blowup_time: f64,
}

impl SelfSimilarProfile {
    pub fn new(blowup_time: f64) -> Self {
        Self { blowup_time }
    }

    pub fn profile(&self, rho: f64) -> f64 {
        u0_profile(rho)
    }

    /// `u(t, r)`; requires `t < T`.
    pub fn field(&self, t: f64, r: f64) -> Result<f64> {
        let c = similarity_map(t, r, self.blowup_time)?;
        Ok(u0_profile(c.rho))
    }

    /// `u_t(t, r) = r / (T-t)^2 * U0'(r / (T-t))`.
    pub fn field_rate(&self, t: f64, r: f64) -> Result<f64> {
        let c = similarity_map(t, r, self.blowup_time)?;
        let s = self.blowup_time - t;
        Ok(r / (s * s) * u0_prime(c.rho))
    }

    /// Exact center curvature `u_rr(t, 0) = -(16/5) / (T-t)^2`.
    pub fn center_curvature(&self, t: f64) -> Result<f64> {
        if t >= self.blowup_time {
            return Err(Error::PastBlowup { t, blowup_time: self.blowup_time });
        }
        let s = self.blowup_time - t;
        Ok(-CURVATURE_CONSTANT / (s * s))
    }
}

/// Log-time `tau = -ln(T - t)` and similarity radius `rho = r / (T - t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCoords {
    pub tau: f64,
    pub rho: f64,
}

pub fn similarity_map(t: f64, r: f64, blowup_time: f64) -> Result<SimilarityCoords> {
    if !(t < blowup_time) {
        return Err(Error::PastBlowup { t, blowup_time });
    }
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!("negative radius {r}")));
    }
    let s = blowup_time - t;
    Ok(SimilarityCoords { tau: -s.ln(), rho: r / s })
}

/// Inverse of [`similarity_map`]: returns `(t, r)`.
pub fn similarity_unmap(c: SimilarityCoords, blowup_time: f64) -> (f64, f64) {
    let s = (-c.tau).exp();
    (blowup_time - s, c.rho * s)
}
