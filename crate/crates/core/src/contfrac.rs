//! Continued-fraction solution of the eigenvalue problem.
//!
//! The four-term recurrence for the Frobenius coefficients has the exact
//! solution `(-3/5)^n [n + 1 + gamma]`, `gamma = 5(lambda - 1)/16`. Using it
//! to reduce the order gives a three-term recurrence for
//! `b_n = a_{n+1} + g_n a_n`. The eigenvalue condition is that `b` is the
//! minimal solution, i.e. that `b_0 / b_{-1}` equals the continued fraction
//! `r_{-1}` obtained by downward recursion of `r_n = -B_n / (A_n + r_{n+1})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frobenius::p_coeffs;

/// Truncation depth used by [`eigen_residual`].
pub const DEFAULT_DEPTH: usize = 1600;
/// Seed for the downward recursion: the asymptotic ratio `-3/5` of the
/// minimal solution.
pub const DEFAULT_SEED: f64 = -0.6;
/// A refined sign change is a root only if `|F|` at its midpoint is below
/// this; otherwise it is a pole.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-6;

/// Reference values of the first twelve eigenvalues, six decimals.
pub const REFERENCE_EIGENVALUES: [f64; 12] = [
    1.0, -0.588904, -2.181597, -3.570756, -5.043294, -6.486835, -7.912777, -9.298265, -9.907103, -10.792456,
    -12.153033, -13.164487,
];

const POLE_EPS: f64 = 1e-12;
const TINY_DENOMINATOR: f64 = 1e-300;

#[inline]
pub fn gamma(lambda: f64) -> f64 {
    5.0 * (lambda - 1.0) / 16.0
}

/// `(-3/5)^n [n + 1 + 5(lambda - 1)/16]`.
pub fn exact_solution(n: i64, lambda: f64) -> f64 {
    (-0.6f64).powi(n as i32) * (n as f64 + 1.0 + gamma(lambda))
}

fn near_zero(x: f64) -> bool {
    x.abs() < POLE_EPS
}

/// `q2(n) b_{n+2} + q1(n) b_{n+1} + q0(n) b_n = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeTermRecurrence {
    pub lambda: f64,
    pub gamma: f64,
}

impl ThreeTermRecurrence {
    /// `[q0, q1, q2]` at `n`; the caller guarantees `n + 2 + gamma` and
    /// `n + 3 + gamma` are nonzero (see [`reduce_order`]).
    #[inline]
    pub fn q(&self, n: i64) -> [f64; 3] {
        let [_, p1, p2, p3] = p_coeffs(n, self.lambda);
        let nf = n as f64;
        let g = self.gamma;
        let q0 = p1 - 0.6 * (nf + 3.0 + g) / (nf + 2.0 + g) * p2 + 0.36 * (nf + 4.0 + g) / (nf + 2.0 + g) * p3;
        let q1 = p2 - 0.6 * (nf + 4.0 + g) / (nf + 3.0 + g) * p3;
        [q0, q1, p3]
    }

    /// `(A_n, B_n) = (q1/q2, q0/q2)`.
    #[inline]
    pub fn normalized(&self, n: i64) -> (f64, f64) {
        let [q0, q1, q2] = self.q(n);
        (q1 / q2, q0 / q2)
    }
}

/// Builds the reduced recurrence, flagging `lambda` if one of the
/// denominators `n + 2 + gamma`, `n + 3 + gamma` vanishes for
/// `-1 <= n <= n_max`. These are the points `lambda = 1 - 16k/5`.
pub fn reduce_order(lambda: f64, n_max: usize) -> Result<ThreeTermRecurrence> {
    let g = gamma(lambda);
    let k = -g;
    if k > 0.5 && near_zero(k - k.round()) {
        // n + 2 + gamma = 0 at n = k - 2, n + 3 + gamma = 0 at n = k - 3
        let first = k.round() as i64 - 3;
        for n in [first, first + 1] {
            if n >= -1 && n <= n_max as i64 {
                return Err(Error::ReductionPole { lambda, n });
            }
        }
    }
    Ok(ThreeTermRecurrence { lambda, gamma: g })
}

/// `b_n = a_{n+1} + (3/5)(n + 2 + gamma)/(n + 1 + gamma) a_n`.
pub fn b_from_a(a_n: f64, a_next: f64, n: i64, lambda: f64) -> Result<f64> {
    let g = gamma(lambda);
    let den = n as f64 + 1.0 + g;
    if near_zero(den) {
        if a_n == 0.0 {
            return Ok(a_next);
        }
        return Err(Error::ReductionPole { lambda, n });
    }
    Ok(a_next + 0.6 * (n as f64 + 2.0 + g) / den * a_n)
}

/// Downward recursion from `r_N = seed` to `r_{-1}`.
pub fn continued_fraction(lambda: f64, depth: usize, seed: f64) -> Result<f64> {
    if depth < 1 {
        return Err(Error::InvalidArgument("continued fraction depth must be >= 1".into()));
    }
    let rec = reduce_order(lambda, depth)?;
    let mut r = seed;
    for n in (-1..depth as i64).rev() {
        let (a, b) = rec.normalized(n);
        let den = a + r;
        if den.abs() < TINY_DENOMINATOR {
            return Err(Error::ContinuedFractionBreakdown { lambda, n });
        }
        r = -b / den;
    }
    Ok(r)
}

/// Ratios `r_{-1}, r_0, ..., r_{keep}` of the minimal solution, from a
/// downward recursion started at depth `top`.
pub fn minimal_ratios(lambda: f64, keep: usize, top: usize, seed: f64) -> Result<Vec<f64>> {
    let top = top.max(keep + 1);
    let rec = reduce_order(lambda, top)?;
    let mut out = vec![0.0; keep + 2];
    let mut r = seed;
    for n in (-1..top as i64).rev() {
        let (a, b) = rec.normalized(n);
        let den = a + r;
        if den.abs() < TINY_DENOMINATOR {
            return Err(Error::ContinuedFractionBreakdown { lambda, n });
        }
        r = -b / den;
        if n <= keep as i64 {
            out[(n + 1) as usize] = r;
        }
    }
    Ok(out)
}

/// `b_0 / b_{-1}` from the two seed relations of the Frobenius recurrence.
pub fn closed_form_side(lambda: f64) -> Result<f64> {
    let den = 80.0 + 25.0 * (lambda - 1.0);
    if near_zero(den) {
        return Err(Error::ResidualPole { lambda });
    }
    Ok((25.0 * lambda * lambda + 125.0 * lambda - 570.0) / 350.0 + (96.0 + 15.0 * (lambda - 1.0)) / den)
}

/// `F(lambda) = b_0/b_{-1} - r_{-1}(lambda)`; eigenvalues are its roots.
pub fn eigen_residual(lambda: f64) -> Result<f64> {
    eigen_residual_with(lambda, DEFAULT_DEPTH, DEFAULT_SEED)
}

pub fn eigen_residual_with(lambda: f64, depth: usize, seed: f64) -> Result<f64> {
    let lhs = closed_form_side(lambda)?;
    let mut depth = depth;
    for _ in 0..4 {
        match continued_fraction(lambda, depth, seed) {
            Ok(r) => return Ok(lhs - r),
            Err(Error::ContinuedFractionBreakdown { .. }) => depth += 1,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ContinuedFractionBreakdown { lambda, n: depth as i64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Root,
    PoleRejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueRecord {
    /// Ordinal among accepted roots in descending order; `None` for poles.
    pub index: Option<usize>,
    pub lambda: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub classification: Classification,
}

/// All refined sign changes of a scan, sorted by descending `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub records: Vec<EigenvalueRecord>,
}

impl Spectrum {
    pub fn roots(&self) -> impl Iterator<Item = &EigenvalueRecord> {
        self.records.iter().filter(|r| r.classification == Classification::Root)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.roots().map(|r| r.lambda).collect()
    }

    /// Adjacent root pairs whose gap is below half the median gap.
    pub fn spacing_anomalies(&self) -> Vec<(f64, f64)> {
        let ev = self.eigenvalues();
        if ev.len() < 3 {
            return Vec::new();
        }
        let mut gaps: Vec<f64> = ev.windows(2).map(|w| w[0] - w[1]).collect();
        let pairs: Vec<(f64, f64)> = ev.windows(2).map(|w| (w[0], w[1])).collect();
        let mut sorted = gaps.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let out = pairs.into_iter().zip(gaps.drain(..)).filter(|(_, g)| *g < 0.5 * median).map(|(p, _)| p).collect();
        out
    }
}

/// Uniform grid `lo, lo + step, ..., hi` (with `hi` included).
pub(crate) fn scan_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - g[n] > 1e-12 * step.max(1.0) {
        g.push(hi);
    }
    g
}

/// Bisection on a sign bracket `[a, b]` until `b - a < tol`. Returns the
/// final bracket and the value at its midpoint, or `None` if an evaluation
/// failed (which happens only on an exact pole).
pub(crate) fn bisect<F>(f: &F, mut a: f64, mut fa: f64, mut b: f64, tol: f64) -> Option<(f64, f64, f64)>
where
    F: Fn(f64) -> Option<f64>,
{
    for _ in 0..200 {
        if b - a < tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Some((m, m, 0.0));
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let m = 0.5 * (a + b);
    Some((a, b, f(m)?))
}

/// Scans `F` on a uniform grid, bisects every sign change to width `tol`
/// and classifies the result as root or pole by the residual at the
/// refined midpoint.
pub fn find_spectrum(lambda_min: f64, lambda_max: f64, step: f64, tol: f64) -> Spectrum {
    let f = |l: f64| eigen_residual(l).ok();
    let grid = scan_grid(lambda_min, lambda_max, step);
    let values: Vec<Option<f64>> = grid.iter().map(|&l| f(l)).collect();
    let mut records = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (Some(fa), Some(fb)) = (values[i], values[i + 1]) else { continue };
        let (a, b) = (grid[i], grid[i + 1]);
        let rec = if fa == 0.0 {
            Some((a, a, 0.0))
        } else if fb == 0.0 || (fa > 0.0) == (fb > 0.0) {
            None
        } else {
            Some(bisect(&f, a, fa, b, tol).unwrap_or((a, b, f64::INFINITY)))
        };
        if let Some((lo, hi, fm)) = rec {
            let classification =
                if fm.abs() < ROOT_RESIDUAL_TOL { Classification::Root } else { Classification::PoleRejected };
            records.push(EigenvalueRecord {
                index: None,
                lambda: 0.5 * (lo + hi),
                residual: fm.abs(),
                bracket: (lo, hi),
                classification,
            });
        }
    }
    records.sort_by(|x, y| y.lambda.total_cmp(&x.lambda));
    let mut k = 0;
    for r in records.iter_mut() {
        if r.classification == Classification::Root {
            r.index = Some(k);
            k += 1;
        }
    }
    Spectrum { records }
}
