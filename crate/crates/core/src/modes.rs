//! Eigenmode profiles `w(rho) = v(rho) / rho` on a grid in `[0, 1]`.
//!
//! All modes carry the series normalization `v = rho^3 + ...` near the
//! center, so `w = rho^2 + ...`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frobenius::eval_v0;
use crate::model::{potential_v, u0_prime};
use crate::shooting::integrate_from_one;

/// Radius where the series at the center hands over to the branch
/// integrated from `rho = 1`.
pub const MODE_SEAM: f64 = 0.9;
const SEAM_TOL: f64 = 1e-6;
const SERIES_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenmodeProfile {
    pub lambda: f64,
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
}

impl EigenmodeProfile {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(r) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidArgument(format!("mode grid point {r} outside [0, 1]")));
    }
    Ok(())
}

/// Values `v(rho)` of the mode with eigenvalue `lambda` on `grid`.
///
/// Uses the series for `rho <= 0.9` and the branch analytic at `rho = 1`,
/// rescaled to agree in value at the seam, beyond. Returns
/// [`Error::SeamMismatch`] if the derivatives then disagree by more than
/// `1e-6` relative, which happens when `lambda` is not an eigenvalue.
pub fn mode_values(lambda: f64, grid: &[f64]) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let needs_outer = grid.iter().any(|&r| r > MODE_SEAM);
    let scale = if needs_outer {
        let inner = eval_v0(lambda, MODE_SEAM, SERIES_TOL)?;
        let outer = integrate_from_one(lambda, MODE_SEAM)?;
        let scale = inner.value / outer.v;
        let mismatch = (scale * outer.dv - inner.derivative).abs() / inner.derivative.abs();
        if !(mismatch <= SEAM_TOL) {
            return Err(Error::SeamMismatch { rho: MODE_SEAM, mismatch });
        }
        scale
    } else {
        1.0
    };
    grid.iter()
        .map(|&r| {
            if r <= MODE_SEAM {
                Ok(eval_v0(lambda, r, SERIES_TOL)?.value)
            } else if r == 1.0 {
                Ok(scale)
            } else {
                Ok(scale * integrate_from_one(lambda, r)?.v)
            }
        })
        .collect()
}

pub fn build_mode(lambda: f64, grid: &[f64]) -> Result<EigenmodeProfile> {
    let v = mode_values(lambda, grid)?;
    let w = grid.iter().zip(&v).map(|(&r, &v)| if r == 0.0 { 0.0 } else { v / r }).collect();
    Ok(EigenmodeProfile { lambda, rho: grid.to_vec(), w })
}

/// The time-translation mode `-(5/16) rho U0'(rho) = 25 rho^2 / (5 + 3 rho^2)^2`.
pub fn gauge_mode_closed_form(grid: &[f64]) -> EigenmodeProfile {
    let w = grid.iter().map(|&r| -5.0 / 16.0 * r * u0_prime(r)).collect();
    EigenmodeProfile { lambda: 1.0, rho: grid.to_vec(), w }
}

/// Max-norm residual of the eigenvalue equation for the mode `lambda` on
/// `[lo, hi]`, with derivatives from five-point centered differences of
/// spacing `h`, relative to the max of `|v|` there.
pub fn ode_residual(lambda: f64, lo: f64, hi: f64, h: f64) -> Result<f64> {
    let n = ((hi - lo) / h).round() as usize;
    let grid: Vec<f64> = (0..=n + 4).map(|i| lo - 2.0 * h + i as f64 * h).collect();
    let v = mode_values(lambda, &grid)?;
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for i in 2..grid.len() - 2 {
        let r = grid[i];
        let d2 = (-v[i + 2] + 16.0 * v[i + 1] - 30.0 * v[i] + 16.0 * v[i - 1] - v[i - 2]) / (12.0 * h * h);
        let d1 = (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) / (12.0 * h);
        let res =
            -(1.0 - r * r) * d2 + 2.0 * lambda * r * d1 + (lambda * (lambda - 1.0) + potential_v(r) / (r * r)) * v[i];
        worst = worst.max(res.abs());
    }
    Ok(worst / vmax)
}
