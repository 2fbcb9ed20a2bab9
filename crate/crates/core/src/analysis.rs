//! Post-processing of an evolution in similarity variables.
//!
//! Near blowup the solution is expected to behave like
//! `u = U0(rho) + sum_k c_k e^(lambda_k tau) w_k(rho)` with `s = T - t`,
//! `tau = -ln s`. At the center this gives
//! `s^2 u_rr(t, 0) + 16/5 = 2 c1 s^(-lambda1) + ...`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{curvature_scale, estimate_t, BlowupDiagnostics, FieldState};
use crate::model::{u0_profile, CURVATURE_CONSTANT};
use crate::modes::EigenmodeProfile;

/// Snapshots with `T - t` below this many grid spacings are rejected.
pub const MIN_RESOLVED_CELLS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledProfile {
    pub t: f64,
    pub tau: f64,
    pub blowup_time: f64,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
}

/// `n + 1` equally spaced points on `[0, 1]`.
pub fn rho_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Cubic Lagrange interpolation of the grid function `u` at radius `r`,
/// using the even extension `u(-r) = u(r)` near the center.
fn interpolate_even(u: &[f64], dr: f64, r: f64) -> f64 {
    let x = r / dr;
    let m = u.len() - 1;
    let i = (x.floor() as i64).clamp(1, m as i64 - 2);
    let at = |k: i64| u[k.unsigned_abs() as usize];
    let d = x - i as f64;
    let (a, b, c, e) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    // nodes at -1, 0, 1, 2 relative to i
    -d * (d - 1.0) * (d - 2.0) / 6.0 * a + (d + 1.0) * (d - 1.0) * (d - 2.0) / 2.0 * b
        - (d + 1.0) * d * (d - 2.0) / 2.0 * c
        + (d + 1.0) * d * (d - 1.0) / 6.0 * e
}

/// `U(tau, rho) = u(t, (T - t) rho)` on `rho`.
pub fn rescale_snapshot(state: &FieldState, blowup_time: f64, rho: &[f64]) -> Result<RescaledProfile> {
    let s = blowup_time - state.t;
    if !(s > 0.0) {
        return Err(Error::PastBlowup { t: state.t, blowup_time });
    }
    if s < MIN_RESOLVED_CELLS * state.dr {
        return Err(Error::InvalidArgument(format!(
            "snapshot at T - t = {s:e} is under-resolved (dr = {:e})",
            state.dr
        )));
    }
    let r_last = (state.u.len() - 1) as f64 * state.dr;
    if let Some(r) = rho.iter().find(|&&r| !(0.0..=1.0).contains(&r) || r * s > r_last) {
        return Err(Error::InvalidArgument(format!("rho = {r} outside the light cone or the grid")));
    }
    let u = rho.iter().map(|&r| interpolate_even(&state.u, state.dr, r * s)).collect();
    Ok(RescaledProfile { t: state.t, tau: -s.ln(), blowup_time, rho: rho.to_vec(), u })
}

/// `delta(rho) = U(tau, rho) - U0(rho)`.
pub fn deviation(profile: &RescaledProfile) -> Vec<(f64, f64)> {
    profile.rho.iter().zip(&profile.u).map(|(&r, &u)| (r, u - u0_profile(r))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub c1: f64,
    pub lambda1: f64,
    pub blowup_time: f64,
    /// Range of `T - t` used.
    pub window: (f64, f64),
    /// RMS residual of the line in log-log variables.
    pub residual: f64,
    pub samples: usize,
}

/// One point of the log-log curvature plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePoint {
    pub t: f64,
    pub s: f64,
    /// `s^2 kappa + 16/5`.
    pub y: f64,
}

pub fn curvature_deviation(diag: &BlowupDiagnostics, blowup_time: f64) -> Vec<CurvaturePoint> {
    diag.times
        .iter()
        .zip(&diag.kappa)
        .filter(|(&t, _)| t < blowup_time)
        .map(|(&t, &k)| {
            let s = blowup_time - t;
            CurvaturePoint { t, s, y: s * s * k + CURVATURE_CONSTANT }
        })
        .collect()
}

/// Least-squares line `(slope, intercept, rms)` through `(x, y)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - icpt).powi(2)).sum();
    (slope, icpt, (rss / n).sqrt())
}

/// Log-log points on `window`, or `None` if the bracket changes sign there.
fn log_points(diag: &BlowupDiagnostics, blowup_time: f64, window: (f64, f64)) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let pts: Vec<CurvaturePoint> =
        curvature_deviation(diag, blowup_time).into_iter().filter(|p| p.s >= window.0 && p.s <= window.1).collect();
    if pts.len() < 3 {
        return None;
    }
    let sign = pts[0].y.signum();
    if pts.iter().any(|p| p.y.signum() != sign || p.y == 0.0) {
        return None;
    }
    let x = pts.iter().map(|p| p.s.ln()).collect();
    let y = pts.iter().map(|p| p.y.abs().ln()).collect();
    Some((x, y, sign))
}

/// Rejection threshold on the RMS log-log residual.
pub const LOG_FIT_GATE: f64 = 0.05;

/// Line through `ln|s^2 kappa + 16/5|` against `ln s` on `window` for a
/// given blowup time: slope `-lambda1`, intercept `ln|2 c1|`.
pub fn fit_c1_lambda1(diag: &BlowupDiagnostics, blowup_time: f64, window: (f64, f64)) -> Result<BlowupFit> {
    let (x, y, sign) = log_points(diag, blowup_time, window).ok_or_else(|| {
        Error::FitRejected(format!("s^2 kappa + 16/5 changes sign or has too few samples on {window:?}"))
    })?;
    let (slope, icpt, rms) = line_fit(&x, &y);
    if !(rms <= LOG_FIT_GATE) {
        return Err(Error::FitRejected(format!("log-log residual {rms:.3e} above gate {LOG_FIT_GATE}")));
    }
    Ok(BlowupFit { c1: sign * 0.5 * icpt.exp(), lambda1: -slope, blowup_time, window, residual: rms, samples: x.len() })
}

/// Blowup time minimizing the log-log residual on `window`: a grid search
/// over `t0 +- half_width` followed by golden-section refinement.
///
/// The center quantity is very sensitive to `T` (a shift `dT` adds about
/// `6.4 dT / s`), so the zero crossing of [`estimate_t`] alone is not
/// accurate enough for the log-log fit.
pub fn refine_blowup_time(diag: &BlowupDiagnostics, t0: f64, window: (f64, f64), half_width: f64) -> Result<f64> {
    let t_last = diag.times.last().copied().unwrap_or(f64::NEG_INFINITY);
    let obj = |t: f64| -> f64 {
        if t <= t_last {
            return f64::INFINITY;
        }
        match log_points(diag, t, window) {
            Some((x, y, _)) => line_fit(&x, &y).2,
            None => f64::INFINITY,
        }
    };
    const N: usize = 2000;
    let lo = t0 - half_width;
    let h = 2.0 * half_width / N as f64;
    let vals: Vec<f64> = (0..=N).map(|i| obj(lo + i as f64 * h)).collect();
    let (best, fbest) = vals.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
    if !fbest.is_finite() {
        return Err(Error::FitRejected("no blowup time in the search range gives a single-signed bracket".into()));
    }
    let (mut a, mut b) = (lo + best.saturating_sub(1) as f64 * h, lo + (best + 1).min(N) as f64 * h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..200 {
        if b - a < 1e-13 * t0.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = obj(d);
        }
    }
    Ok(0.5 * (a + b))
}

/// Local log-log slopes on consecutive bins of width `bin` in `ln s`.
pub fn local_slopes(
    diag: &BlowupDiagnostics,
    blowup_time: f64,
    s_min: f64,
    s_max: f64,
    bin: f64,
) -> Vec<(f64, f64, f64)> {
    let nb = ((s_max / s_min).ln() / bin).floor() as usize;
    (0..nb)
        .filter_map(|k| {
            let lo = s_min * (k as f64 * bin).exp();
            let hi = s_min * ((k + 1) as f64 * bin).exp();
            let (x, y, _) = log_points(diag, blowup_time, (lo, hi))?;
            Some((lo, hi, line_fit(&x, &y).0))
        })
        .collect()
}

/// Largest contiguous run of bins whose local slopes agree within
/// `tolerance` (relative to the smallest in magnitude).
pub fn auto_window(
    diag: &BlowupDiagnostics,
    blowup_time: f64,
    s_min: f64,
    s_max: f64,
    bin: f64,
    tolerance: f64,
) -> Result<(f64, f64)> {
    let slopes = local_slopes(diag, blowup_time, s_min, s_max, bin);
    let mut best: Option<(usize, usize)> = None;
    for i in 0..slopes.len() {
        let (mut lo, mut hi) = (slopes[i].2, slopes[i].2);
        for j in i..slopes.len() {
            // bins must be adjacent
            if j > i && (slopes[j].0 / slopes[j - 1].1 - 1.0).abs() > 1e-9 {
                break;
            }
            lo = lo.min(slopes[j].2);
            hi = hi.max(slopes[j].2);
            if lo * hi <= 0.0 || (hi - lo) > tolerance * lo.abs().min(hi.abs()) {
                break;
            }
            if best.is_none_or(|(a, b)| j - i > b - a) {
                best = Some((i, j));
            }
        }
    }
    match best {
        Some((i, j)) if j > i => Ok((slopes[i].0, slopes[j].1)),
        _ => Err(Error::FitRejected("no range of constant log-log slope".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Smallest `T - t` used, in grid spacings.
    pub min_cells: f64,
    /// Largest `T - t` used, as a fraction of the blowup time.
    pub max_fraction: f64,
    /// Bin width in `ln s` for local slopes.
    pub bin: f64,
    pub slope_tolerance: f64,
    /// Half width of the blowup-time search, relative to the blowup time.
    pub t_search: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_cells: 25.0, max_fraction: 0.3, bin: 0.25, slope_tolerance: 0.05, t_search: 2e-3 }
    }
}

/// Blowup time from [`estimate_t`] on the late samples, `q` between
/// `min_cells` and `30 min_cells` grid spacings, where `q(t)` is closest to
/// a straight line.
pub fn rough_blowup_time(diag: &BlowupDiagnostics, min_cells: f64) -> Result<f64> {
    let s_min = min_cells * diag.dr;
    let late: Vec<f64> = diag
        .times
        .iter()
        .zip(&diag.kappa)
        .filter(|(_, &k)| k < 0.0 && (s_min..=30.0 * s_min).contains(&curvature_scale(k)))
        .map(|(&t, _)| t)
        .collect();
    let mut rough = diag.clone();
    rough.window = match (late.first(), late.last()) {
        (Some(&a), Some(&b)) => Some((a, b)),
        _ => return Err(Error::FitRejected("no samples in the asymptotic range".into())),
    };
    estimate_t(&rough)
}

/// Longest run of consecutive samples before `blowup_time` on which the
/// center curvature stays within `tol` (relative) of `-(16/5) (T - t)^-2`,
/// as the range `(s_min, s_max)` of `T - t`.
pub fn exact_tracking_range(diag: &BlowupDiagnostics, blowup_time: f64, tol: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut run: Option<(f64, f64)> = None;
    for (&t, &k) in diag.times.iter().zip(&diag.kappa) {
        let s = blowup_time - t;
        if !(s > 0.0) {
            break;
        }
        let exact = -CURVATURE_CONSTANT / (s * s);
        if (k / exact - 1.0).abs() <= tol {
            run = Some(run.map_or((s, s), |(_, hi)| (s, hi)));
            let r = run.unwrap();
            if best.is_none_or(|b| r.1 / r.0 > b.1 / b.0) {
                best = run;
            }
        } else {
            run = None;
        }
    }
    best
}

/// Full pipeline: rough `T` from [`estimate_t`], refinement of `T` on the
/// default range, automatic window, refinement of `T` on that window, and
/// the final log-log fit.
pub fn fit_blowup(diag: &BlowupDiagnostics, opts: &FitOptions) -> Result<BlowupFit> {
    let s_min = opts.min_cells * diag.dr;
    let t_rough = rough_blowup_time(diag, opts.min_cells)?;
    let s_max = opts.max_fraction * t_rough;
    if !(s_max > s_min * 10f64.powf(1.5)) {
        return Err(Error::FitRejected(format!("range [{s_min:e}, {s_max:e}] spans less than 1.5 decades")));
    }
    let half = opts.t_search * t_rough;
    let t1 = refine_blowup_time(diag, t_rough, (s_min, s_max), half)?;
    let window = auto_window(diag, t1, s_min, s_max, opts.bin, opts.slope_tolerance)?;
    let t2 = refine_blowup_time(diag, t1, window, 0.25 * half)?;
    fit_c1_lambda1(diag, t2, window)
}

/// Result of a least-squares fit of a deviation against eigenmodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFit {
    pub tau: f64,
    pub lambdas: Vec<f64>,
    /// Coefficients `c_k` in the series normalization of the modes.
    pub coeffs: Vec<f64>,
    pub condition: f64,
    pub fit_window: (f64, f64),
}

/// Condition number above which a mode fit is refused.
pub const MAX_CONDITION: f64 = 1e8;

impl ModeFit {
    /// `sum_k c_k e^(lambda_k tau) w_k(rho_i)`.
    pub fn evaluate(&self, modes: &[EigenmodeProfile]) -> Vec<f64> {
        let n = modes[0].len();
        (0..n)
            .map(|i| self.coeffs.iter().zip(modes).map(|(c, m)| c * (m.lambda * self.tau).exp() * m.w[i]).sum())
            .collect()
    }

    /// `max |delta - fit| / max |delta|` over `rho` in `[lo, hi]`.
    pub fn residual(&self, delta: &[(f64, f64)], modes: &[EigenmodeProfile], lo: f64, hi: f64) -> f64 {
        let fit = self.evaluate(modes);
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (i, &(r, d)) in delta.iter().enumerate() {
            if r >= lo && r <= hi {
                num = num.max((d - fit[i]).abs());
                den = den.max(d.abs());
            }
        }
        num / den
    }
}

/// Default `rho` range of profile fits.
pub const MODE_FIT_WINDOW: (f64, f64) = (0.05, 0.95);

/// Least squares of `delta(rho)` against `e^(lambda_k tau) w_k(rho)` for
/// the first `k_max` of `modes` over `rho` in `window`.
pub fn mode_fit(
    delta: &[(f64, f64)],
    modes: &[EigenmodeProfile],
    tau: f64,
    k_max: usize,
    window: (f64, f64),
) -> Result<ModeFit> {
    if k_max == 0 || k_max > modes.len() {
        return Err(Error::InvalidArgument(format!("k_max = {k_max} with {} modes available", modes.len())));
    }
    for m in &modes[..k_max] {
        if m.len() != delta.len() || m.rho.iter().zip(delta).any(|(a, b)| (a - b.0).abs() > 1e-12) {
            return Err(Error::InvalidArgument("modes and deviation must share the rho grid".into()));
        }
    }
    let rows: Vec<usize> = (0..delta.len()).filter(|&i| delta[i].0 >= window.0 && delta[i].0 <= window.1).collect();
    if rows.len() < k_max {
        return Err(Error::InvalidArgument("fewer samples than modes in the fit window".into()));
    }
    let a = DMatrix::from_fn(rows.len(), k_max, |i, k| (modes[k].lambda * tau).exp() * modes[k].w[rows[i]]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&i| delta[i].1));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::FitRejected(e.to_string()))?;
    Ok(ModeFit {
        tau,
        lambdas: modes[..k_max].iter().map(|m| m.lambda).collect(),
        coeffs: x.iter().copied().collect(),
        condition,
        fit_window: window,
    })
}

/// `max|delta_b| / max|delta_a|` over `rho` in `[lo, hi]`.
pub fn decay_ratio(a: &[(f64, f64)], b: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    let mx = |d: &[(f64, f64)]| d.iter().filter(|p| p.0 >= lo && p.0 <= hi).fold(0.0f64, |m, p| m.max(p.1.abs()));
    mx(b) / mx(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::RadialGrid;
    use crate::model::SelfSimilarProfile;

    fn synthetic(c: f64, lambda: f64, t_end: f64, n: usize) -> BlowupDiagnostics {
        let mut d = BlowupDiagnostics::new(1e-5);
        for j in 0..n {
            let t = t_end * j as f64 / (n - 1) as f64;
            let s = 1.0 - t;
            d.times.push(t);
            d.kappa.push(-CURVATURE_CONSTANT / (s * s) + 2.0 * c * s.powf(-2.0 - lambda));
        }
        d
    }

    #[test]
    fn synthetic_curvature_is_recovered() {
        let d = synthetic(-0.03, -0.5889, 0.999, 20000);
        let f = fit_c1_lambda1(&d, 1.0, (1e-3, 0.3)).unwrap();
        assert!((f.c1 + 0.03).abs() < 1e-3 * 0.03);
        assert!((f.lambda1 + 0.5889).abs() < 1e-3 * 0.5889);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn sign_change_is_rejected() {
        let mut d = synthetic(-0.03, -0.5889, 0.999, 2000);
        for (k, t) in d.kappa.iter_mut().zip(&d.times) {
            *k += 0.2 / (1.0 - t);
        }
        assert!(matches!(fit_c1_lambda1(&d, 1.0, (1e-3, 0.9)), Err(Error::FitRejected(_))));
    }

    #[test]
    fn blowup_time_refinement() {
        let d = synthetic(0.3, -0.5889, 0.999, 20000);
        let t = refine_blowup_time(&d, 1.0005, (2.5e-3, 0.3), 2e-3).unwrap();
        assert!((t - 1.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn auto_window_on_pure_power_law() {
        let d = synthetic(0.3, -0.5889, 0.999, 20000);
        let (lo, hi) = auto_window(&d, 1.0, 2.5e-3, 0.3, 0.25, 0.05).unwrap();
        assert!(lo <= 2.6e-3 && hi >= 0.25);
    }

    #[test]
    fn full_pipeline_on_synthetic_data() {
        let mut d = synthetic(0.3, -0.5889, 0.9995, 40000);
        d.dr = 1e-4;
        let f = fit_blowup(&d, &FitOptions::default()).unwrap();
        assert!((f.lambda1 + 0.5889).abs() < 1e-6);
        assert!((f.c1 - 0.3).abs() < 1e-6);
    }

    #[test]
    fn rescale_exact_attractor() {
        let g = RadialGrid::new(8192, 2.0).unwrap();
        let prof = SelfSimilarProfile::new(1.0);
        let mut st = crate::evolve::FieldState::vacuum(&g);
        st.t = 0.9;
        for i in 0..=g.m {
            st.u[i] = prof.field(0.9, g.r(i)).unwrap();
        }
        let p = rescale_snapshot(&st, 1.0, &rho_grid(100)).unwrap();
        assert_eq!(p.u[0], 1.0);
        let dev = deviation(&p);
        assert!(dev.iter().all(|d| d.1.abs() < 1e-7));
        assert!((p.tau + 0.1f64.ln()).abs() < 1e-12);
        st.t = 1.0 - 5.0 * st.dr;
        assert!(rescale_snapshot(&st, 1.0, &rho_grid(10)).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let dr = 0.1;
        let u: Vec<f64> = (0..20).map(|i| 1.0 + (i as f64 * dr).powi(2) - 0.5 * (i as f64 * dr).powi(3)).collect();
        let r = 0.537;
        assert!((interpolate_even(&u, dr, r) - (1.0 + r * r - 0.5 * r.powi(3))).abs() < 1e-13);
        // even extension near the center matches an even function
        let v: Vec<f64> = (0..20).map(|i| (i as f64 * dr).powi(2)).collect();
        assert!((interpolate_even(&v, dr, 0.05) - 0.0025).abs() < 1e-14);
    }

    fn toy_modes(rho: &[f64]) -> Vec<EigenmodeProfile> {
        vec![
            EigenmodeProfile { lambda: -0.5889, rho: rho.to_vec(), w: rho.iter().map(|r| r * r).collect() },
            EigenmodeProfile {
                lambda: -2.1816,
                rho: rho.to_vec(),
                w: rho.iter().map(|r| r * r * (1.0 - 2.0 * r)).collect(),
            },
        ]
    }

    #[test]
    fn single_mode_fit_is_exact() {
        let rho = rho_grid(50);
        let modes = toy_modes(&rho);
        let tau: f64 = 3.0;
        let c = 0.37;
        let delta: Vec<(f64, f64)> =
            rho.iter().zip(&modes[0].w).map(|(&r, &w)| (r, c * (-0.5889 * tau).exp() * w)).collect();
        let f = mode_fit(&delta, &modes, tau, 1, MODE_FIT_WINDOW).unwrap();
        assert!((f.coeffs[0] - c).abs() < 1e-13);
        assert!(f.residual(&delta, &modes, 0.1, 0.9) < 1e-12);
        let f2 = mode_fit(&delta, &modes, tau, 2, MODE_FIT_WINDOW).unwrap();
        assert!(f2.coeffs[1].abs() < 1e-12);
    }

    #[test]
    fn collinear_modes_are_rejected() {
        let rho = rho_grid(50);
        let mut modes = toy_modes(&rho);
        modes[1].w = modes[0].w.clone();
        let delta: Vec<(f64, f64)> = rho.iter().map(|&r| (r, r)).collect();
        assert!(matches!(mode_fit(&delta, &modes, 0.0, 2, MODE_FIT_WINDOW), Err(Error::IllConditioned(_))));
    }
}
