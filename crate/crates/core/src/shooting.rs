//! Shooting cross-check of the spectrum.
//!
//! The solution regular at `rho = 0` is seeded from its Frobenius series at a
//! small radius and integrated outwards; the solution analytic at `rho = 1`
//! is seeded from its Taylor expansion at `1 - offset` and integrated
//! inwards. Eigenvalues are the zeros of their Wronskian at the match point.

use serde::{Deserialize, Serialize};

use crate::contfrac::{bisect, scan_grid, Classification};
use crate::error::{Error, Result};
use crate::frobenius::{eval_v0, AnalyticBranchAtOne};
use crate::model::potential_v;
use crate::ode::{integrate, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    FromZero,
    FromOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSolutionSample {
    pub rho: f64,
    pub v: f64,
    pub dv: f64,
    pub lambda: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub match_point: f64,
    /// Radius where the series at the center hands over to the integrator.
    pub zero_seam: f64,
    /// Distance from `rho = 1` where the Taylor branch hands over.
    pub one_offset: f64,
    pub series_tol: f64,
    pub rtol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self { match_point: 0.5, zero_seam: 0.1, one_offset: 0.25, series_tol: 1e-15, rtol: 1e-12 }
    }
}

/// `[v, v']' ` for the eigenvalue equation.
fn rhs(lambda: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    move |rho: f64, y: &[f64; 2]| {
        let pot = potential_v(rho) / (rho * rho);
        let acc = (2.0 * lambda * rho * y[1] + (lambda * (lambda - 1.0) + pot) * y[0]) / (1.0 - rho * rho);
        [y[1], acc]
    }
}

fn tolerances(cfg: &ShootingConfig) -> Tolerances {
    Tolerances { rtol: cfg.rtol, atol: 1e-300, ..Tolerances::default() }
}

fn check_match(rho_match: f64) -> Result<()> {
    if !(rho_match > 0.0 && rho_match < 1.0) {
        return Err(Error::InvalidArgument(format!("match point {rho_match} outside (0, 1)")));
    }
    Ok(())
}

pub fn integrate_from_zero(lambda: f64, rho_match: f64) -> Result<OdeSolutionSample> {
    integrate_from_zero_with(lambda, rho_match, &ShootingConfig::default())
}

pub fn integrate_from_zero_with(lambda: f64, rho_match: f64, cfg: &ShootingConfig) -> Result<OdeSolutionSample> {
    check_match(rho_match)?;
    let seam = cfg.zero_seam.min(rho_match);
    let s = eval_v0(lambda, seam, cfg.series_tol)?;
    let y = integrate(rhs(lambda), seam, [s.value, s.derivative], rho_match, tolerances(cfg))?;
    Ok(OdeSolutionSample { rho: rho_match, v: y[0], dv: y[1], lambda, origin: Origin::FromZero })
}

pub fn integrate_from_one(lambda: f64, rho_match: f64) -> Result<OdeSolutionSample> {
    integrate_from_one_with(lambda, rho_match, &ShootingConfig::default())
}

/// Normalized by `v(1) = 1`. For `rho_match >= 1 - offset` the Taylor branch
/// is evaluated directly.
pub fn integrate_from_one_with(lambda: f64, rho_match: f64, cfg: &ShootingConfig) -> Result<OdeSolutionSample> {
    check_match(rho_match)?;
    if lambda.abs() < 1e-12 {
        return Err(Error::DegenerateBoundary { lambda });
    }
    let mut branch = AnalyticBranchAtOne::new(lambda)?;
    let seed_rho = (1.0 - cfg.one_offset).max(rho_match);
    let s = branch.evaluate(seed_rho, cfg.series_tol)?;
    let y = integrate(rhs(lambda), seed_rho, [s.value, s.derivative], rho_match, tolerances(cfg))?;
    Ok(OdeSolutionSample { rho: rho_match, v: y[0], dv: y[1], lambda, origin: Origin::FromOne })
}

/// `W = v0 v1' - v0' v1` at the match point.
pub fn wronskian(lambda: f64, rho_match: f64) -> Result<f64> {
    Ok(wronskian_parts(lambda, rho_match, &ShootingConfig::default())?.0)
}

/// Raw Wronskian and its normalization by `|(v0, v0')| |(v1, v1')|` (the
/// sine of the angle between the two solution vectors).
pub fn wronskian_parts(lambda: f64, rho_match: f64, cfg: &ShootingConfig) -> Result<(f64, f64)> {
    let a = integrate_from_zero_with(lambda, rho_match, cfg)?;
    let b = integrate_from_one_with(lambda, rho_match, cfg)?;
    let w = a.v * b.dv - a.dv * b.v;
    let norm = a.v.hypot(a.dv) * b.v.hypot(b.dv);
    Ok((w, w / norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WronskianSample {
    pub lambda: f64,
    pub w: f64,
    pub w_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WronskianZero {
    pub lambda: f64,
    pub bracket: (f64, f64),
    pub normalized_residual: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WronskianScan {
    pub match_point: f64,
    pub curve: Vec<WronskianSample>,
    /// Grid points where one of the branches could not be built.
    pub failures: Vec<(f64, String)>,
    pub zeros: Vec<WronskianZero>,
}

impl WronskianScan {
    pub fn roots(&self) -> Vec<f64> {
        self.zeros.iter().filter(|z| z.classification == Classification::Root).map(|z| z.lambda).collect()
    }
}

/// Dense scan of the normalized Wronskian with bisection of sign changes.
///
/// The inner branch normalized by `v(1) = 1` has poles where `1 - lambda` is
/// a positive integer, and the Wronskian changes sign there too. A bracket is
/// accepted as a zero only if the normalized Wronskian at the refined
/// midpoint is below `1e-6` of its value at the original bracket ends.
pub fn wronskian_scan(lambda_min: f64, lambda_max: f64, step: f64, cfg: &ShootingConfig) -> Result<WronskianScan> {
    if !(step > 0.0) || !(lambda_min < lambda_max) {
        return Err(Error::InvalidArgument("wronskian scan needs lambda_min < lambda_max and step > 0".into()));
    }
    let eval = |l: f64| wronskian_parts(l, cfg.match_point, cfg).ok().map(|p| p.1);
    let grid = scan_grid(lambda_min, lambda_max, step);
    let mut curve = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    for &l in &grid {
        match wronskian_parts(l, cfg.match_point, cfg) {
            Ok((w, wn)) => {
                curve.push(WronskianSample { lambda: l, w, w_normalized: wn });
                values.push(Some(wn));
            }
            Err(e) => {
                failures.push((l, e.to_string()));
                values.push(None);
            }
        }
    }
    let mut zeros = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (Some(fa), Some(fb)) = (values[i], values[i + 1]) else { continue };
        if fa == 0.0 || (fa > 0.0) == (fb > 0.0) {
            continue;
        }
        let scale = fa.abs().max(fb.abs());
        let (lo, hi, fm) = bisect(&eval, grid[i], fa, grid[i + 1], 1e-11).unwrap_or((grid[i], grid[i + 1], scale));
        let rel = fm.abs() / scale;
        let classification = if rel <= 1e-6 { Classification::Root } else { Classification::PoleRejected };
        zeros.push(WronskianZero {
            lambda: 0.5 * (lo + hi),
            bracket: (lo, hi),
            normalized_residual: rel,
            classification,
        });
    }
    zeros.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    Ok(WronskianScan { match_point: cfg.match_point, curve, failures, zeros })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gauge_v(rho: f64) -> f64 {
        let d = 5.0 + 3.0 * rho * rho;
        25.0 * rho.powi(3) / (d * d)
    }

    #[test]
    fn from_zero_gauge_mode() {
        let s = integrate_from_zero(1.0, 0.5).unwrap();
        assert_relative_eq!(s.v, gauge_v(0.5), max_relative = 1e-9);
        assert_eq!(s.origin, Origin::FromZero);
    }

    #[test]
    fn from_zero_at_seam_is_the_series() {
        let s = integrate_from_zero(-3.3, 0.1).unwrap();
        let v = eval_v0(-3.3, 0.1, 1e-15).unwrap();
        assert_eq!(s.v, v.value);
        assert_eq!(s.dv, v.derivative);
    }

    #[test]
    fn from_one_gauge_mode() {
        // the gauge mode has v(1) = 25/64
        let s = integrate_from_one(1.0, 0.5).unwrap();
        assert_relative_eq!(s.v * 25.0 / 64.0, gauge_v(0.5), max_relative = 1e-9);
    }

    #[test]
    fn from_one_offset_robustness() {
        for &l in &[1.0, -0.5889, -3.2] {
            let a =
                integrate_from_one_with(l, 0.5, &ShootingConfig { one_offset: 0.25, ..Default::default() }).unwrap();
            let b =
                integrate_from_one_with(l, 0.5, &ShootingConfig { one_offset: 0.125, ..Default::default() }).unwrap();
            assert_relative_eq!(a.v, b.v, max_relative = 1e-9);
            assert_relative_eq!(a.dv, b.dv, max_relative = 1e-9);
        }
    }

    #[test]
    fn from_one_rejects_degenerate_lambda() {
        assert!(integrate_from_one(0.0, 0.5).is_err());
        assert!(integrate_from_one(-3.0, 0.5).is_err());
    }

    #[test]
    fn wronskian_examples() {
        let (_, w1) = wronskian_parts(1.0, 0.5, &ShootingConfig::default()).unwrap();
        assert!(w1.abs() < 1e-7);
        let (_, w) = wronskian_parts(-1.5, 0.5, &ShootingConfig::default()).unwrap();
        assert!(w.abs() > 1e-3);
        let (_, w) = wronskian_parts(-0.588904, 0.5, &ShootingConfig::default()).unwrap();
        assert!(w.abs() < 1e-5);
    }

    #[test]
    fn no_zeros_around_origin() {
        let scan = wronskian_scan(-0.5, 0.5, 0.01, &ShootingConfig::default()).unwrap();
        assert!(scan.roots().is_empty());
        // the grid hits lambda = 0, where the branch at rho = 1 does not exist
        assert!(scan.failures.iter().any(|(l, _)| l.abs() < 1e-9));
        assert_eq!(scan.curve.len() + scan.failures.len(), 101);
    }
}
