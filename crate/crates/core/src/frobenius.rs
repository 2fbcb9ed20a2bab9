//! Frobenius solutions of the eigenvalue equation
//!
//! ```text
//! -(1 - rho^2) v'' + 2 lambda rho v' + lambda (lambda - 1) v + V(rho) v / rho^2 = 0
//! ```
//!
//! at the two regular singular points. At `rho = 0` the analytic solution is
//! `v0 = sum a_n rho^(2n+3)` with coefficients from a four-term recurrence.
//! At `rho = 1` the analytic branch is generated numerically from the
//! polynomial form of the equation.

use crate::contfrac;
use crate::error::{Error, Result};
use crate::model::potential_v;

/// Default relative tolerance for [`eval_v0`].
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
/// Hard cap on the number of series terms.
pub const MAX_SERIES_TERMS: usize = 100_000;

const RESCALE_HIGH: f64 = 1e200;
const RESCALE_LOW: f64 = 1e-200;

/// `(p0, p1, p2, p3)` of the recurrence
/// `p3(n) a_{n+3} + p2(n) a_{n+2} + p1(n) a_{n+1} + p0(n) a_n = 0`.
pub fn p_coeffs(n: i64, lambda: f64) -> [f64; 4] {
    let n = n as f64;
    let l = lambda;
    let p3 = -100.0 * n * n - 850.0 * n - 1650.0;
    let p2 = -20.0 * n * n + (100.0 * l - 130.0) * n + 25.0 * l * l + 325.0 * l - 750.0;
    let p1 = 84.0 * n * n + (120.0 * l + 378.0) * n + 30.0 * l * l + 270.0 * l + 618.0;
    let p0 = 36.0 * n * n + (36.0 * l + 90.0) * n + 9.0 * l * l + 45.0 * l + 54.0;
    [p0, p1, p2, p3]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourTermRecurrence {
    pub lambda: f64,
}

impl FourTermRecurrence {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }

    #[inline]
    pub fn coeffs(&self, n: i64) -> [f64; 4] {
        p_coeffs(n, self.lambda)
    }

    /// Solves the relation at index `n` for `a_{n+3}`.
    #[inline]
    pub fn next(&self, n: i64, a0: f64, a1: f64, a2: f64) -> f64 {
        let [p0, p1, p2, p3] = self.coeffs(n);
        -(p2 * a2 + p1 * a1 + p0 * a0) / p3
    }

    /// Residual of the relation at `n` and the largest individual term, for
    /// relative checks.
    pub fn residual(&self, n: i64, a: [f64; 4]) -> (f64, f64) {
        let p = self.coeffs(n);
        let terms = [p[0] * a[0], p[1] * a[1], p[2] * a[2], p[3] * a[3]];
        let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        (terms.iter().sum(), scale)
    }
}

/// Coefficients `a_0..=a_N` of `v0(rho) = sum a_n rho^(2n+3)` with `a_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesAtZero {
    pub lambda: f64,
    pub coeffs: Vec<f64>,
}

impl SeriesAtZero {
    pub fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Largest relative residual of the stored relations.
    pub fn max_relative_residual(&self) -> f64 {
        let rec = FourTermRecurrence::new(self.lambda);
        let a = |k: i64| if k < 0 { 0.0 } else { self.coeffs[k as usize] };
        let mut worst = 0.0f64;
        for n in -2..(self.coeffs.len() as i64 - 3) {
            let (res, scale) = rec.residual(n, [a(n), a(n + 1), a(n + 2), a(n + 3)]);
            if scale > 0.0 {
                worst = worst.max(res.abs() / scale);
            }
        }
        worst
    }

    /// Partial sum and term-wise derivative at `rho`.
    pub fn partial_sum(&self, rho: f64) -> (f64, f64) {
        let x = rho * rho;
        let mut pow = rho * x; // rho^(2n+3)
        let mut dpow = x; // rho^(2n+2)
        let (mut v, mut dv) = (0.0, 0.0);
        for (n, a) in self.coeffs.iter().enumerate() {
            v += a * pow;
            dv += a * (2 * n + 3) as f64 * dpow;
            pow *= x;
            dpow *= x;
        }
        (v, dv)
    }
}

/// Builds `a_0..=a_N`. The `n = -2` and `n = -1` relations give `a_1` and
/// `a_2`, the general relation everything after.
pub fn series_coeffs(lambda: f64, n_max: usize) -> SeriesAtZero {
    let rec = FourTermRecurrence::new(lambda);
    let mut coeffs = Vec::with_capacity(n_max + 1);
    let mut window = [0.0, 0.0, 1.0]; // a_{-2}, a_{-1}, a_0
    coeffs.push(1.0);
    for n in -2..(n_max as i64 - 2) {
        let next = rec.next(n, window[0], window[1], window[2]);
        window = [window[1], window[2], next];
        coeffs.push(next);
    }
    coeffs.truncate(n_max + 1);
    SeriesAtZero { lambda, coeffs }
}

/// Streams the coefficients `a_0, a_1, ...` without storing them.
#[derive(Debug, Clone)]
struct CoeffStream {
    rec: FourTermRecurrence,
    n: i64,
    window: [f64; 3],
}

impl CoeffStream {
    fn new(lambda: f64) -> Self {
        Self { rec: FourTermRecurrence::new(lambda), n: -2, window: [0.0, 0.0, 1.0] }
    }

    /// Returns the coefficient currently at the head and advances.
    fn advance(&mut self) -> f64 {
        let head = self.window[2];
        let next = self.rec.next(self.n, self.window[0], self.window[1], self.window[2]);
        self.window = [self.window[1], self.window[2], next];
        self.n += 1;
        head
    }
}

/// Result of an adaptive series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub derivative: f64,
    pub terms: usize,
}

/// Sums `v0` and `v0'` at `0 <= rho < 1` until the estimated tail of both
/// series drops below `tol` relative to the partial sums.
pub fn eval_v0(lambda: f64, rho: f64, tol: f64) -> Result<SeriesValue> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho = {rho} outside [0, 1)")));
    }
    if rho == 0.0 {
        return Ok(SeriesValue { value: 0.0, derivative: 0.0, terms: 0 });
    }
    let x = rho * rho;
    let damp = 1.0 / (1.0 - x);
    let mut stream = CoeffStream::new(lambda);
    let mut pow = rho * x;
    let mut dpow = x;
    let (mut v, mut dv) = (0.0f64, 0.0f64);
    let mut quiet = 0;
    for n in 0..MAX_SERIES_TERMS {
        let a = stream.advance();
        let t = a * pow;
        let dt = a * (2 * n + 3) as f64 * dpow;
        v += t;
        dv += dt;
        pow *= x;
        dpow *= x;
        let small = t.abs() * damp <= tol * v.abs() && dt.abs() * damp * damp <= tol * dv.abs();
        if small {
            quiet += 1;
            if quiet >= 4 {
                return Ok(SeriesValue { value: v, derivative: dv, terms: n + 1 });
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged { rho, terms: MAX_SERIES_TERMS })
}

/// `a_{N+1} / a_N` from plain forward recursion, with rescaling of the
/// running window to avoid overflow.
pub fn forward_tail_ratio(lambda: f64, n_max: usize) -> f64 {
    let rec = FourTermRecurrence::new(lambda);
    let mut w = [0.0, 0.0, 1.0];
    let mut n = -2i64;
    // after the loop w = [a_{N-1}, a_N, a_{N+1}]
    while n < n_max as i64 - 1 {
        let next = rec.next(n, w[0], w[1], w[2]);
        w = [w[1], w[2], next];
        n += 1;
        let big = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if big > RESCALE_HIGH || (big < RESCALE_LOW && big > 0.0) {
            let s = 1.0 / big;
            w.iter_mut().for_each(|x| *x *= s);
        }
    }
    w[2] / w[1]
}

/// `a_{N+1} / a_N` of the coefficient sequence with no component along the
/// dominant `n^(lambda-2)` solution.
///
/// Built from the minimal solution `b_n` of the reduced three-term recurrence
/// (continued-fraction ratios) and the first-order relation
/// `a_{n+1} = b_n - g_n a_n`, `g_n = (3/5)(n+2+gamma)/(n+1+gamma)`. Every step
/// is stable, so the ratio is reliable for large `N`. At an eigenvalue this is
/// the Frobenius series itself.
pub fn minimal_branch_tail_ratio(lambda: f64, n_max: usize) -> Result<f64> {
    let top = n_max + n_max.max(400);
    let ratios = contfrac::minimal_ratios(lambda, n_max, top, contfrac::DEFAULT_SEED)?;
    let gamma = contfrac::gamma(lambda);
    // s_n = b_n / a_n, t_n = a_{n+1} / a_n; b_{-1} = a_0 = 1 so s_0 = r_{-1}.
    let mut s = ratios[0];
    let mut t = f64::NAN;
    for n in 0..=n_max {
        let g = 0.6 * (n as f64 + 2.0 + gamma) / (n as f64 + 1.0 + gamma);
        t = s - g;
        if n < n_max {
            s = ratios[n + 1] * s / t;
        }
    }
    Ok(t)
}

/// Ratio `a_{N+1} / a_N` of the Frobenius coefficients.
///
/// Away from the spectrum the dominant solution is present and plain forward
/// recursion is accurate. At a root of the eigenvalue equation (residual at
/// most [`contfrac::ROOT_RESIDUAL_TOL`]) the dominant coefficient vanishes,
/// but forward recursion in double precision re-seeds it from rounding once
/// `(5/3)^n` exceeds `1e16` (around `n = 70`). There the coefficients are
/// taken from [`minimal_branch_tail_ratio`] instead.
pub fn tail_ratio(lambda: f64, n_max: usize) -> f64 {
    match contfrac::eigen_residual(lambda) {
        Ok(f) if f.abs() <= contfrac::ROOT_RESIDUAL_TOL => {
            minimal_branch_tail_ratio(lambda, n_max).unwrap_or_else(|_| forward_tail_ratio(lambda, n_max))
        }
        _ => forward_tail_ratio(lambda, n_max),
    }
}

/// Local data `(v(1), v'(1))` of the branch analytic at `rho = 1`, normalized
/// by `v(1) = 1`: the equation at `rho = 1` reduces to
/// `2 lambda v' + (lambda(lambda - 1) + V(1)) v = 0`.
pub fn boundary_data_at_one(lambda: f64) -> Result<(f64, f64)> {
    if lambda.abs() < 1e-12 {
        return Err(Error::DegenerateBoundary { lambda });
    }
    let v = 1.0;
    let dv = -(lambda * (lambda - 1.0) + potential_v(1.0)) * v / (2.0 * lambda);
    Ok((v, dv))
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

/// Coefficients of `p(1 - x)` as a polynomial in `x`.
fn poly_reflect_at_one(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for (k, &c) in p.iter().enumerate() {
        let mut binom = 1.0;
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out[j] += c * binom * sign;
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    out
}

/// Taylor expansion `v1 = sum c_n (1 - rho)^n` of the branch analytic at
/// `rho = 1`, with `c_0 = 1`.
///
/// The coefficients come from the equation multiplied by
/// `rho^2 (5 + 3 rho^2)^2`, which has polynomial coefficients. The leading
/// factor of the recurrence is `-128 n (n - 1 + lambda)`, so the branch does
/// not exist with this normalization when `1 - lambda` is a positive integer.
#[derive(Debug, Clone)]
pub struct AnalyticBranchAtOne {
    pub lambda: f64,
    q2: Vec<f64>,
    q1: Vec<f64>,
    q0: Vec<f64>,
    coeffs: Vec<f64>,
}

impl AnalyticBranchAtOne {
    pub fn new(lambda: f64) -> Result<Self> {
        let n_res = 1.0 - lambda;
        if n_res > 0.5 && (n_res - n_res.round()).abs() < 1e-12 {
            return Err(Error::DegenerateBoundary { lambda });
        }
        let l = lambda;
        let rho2 = [0.0, 0.0, 1.0];
        let d = [5.0, 0.0, 3.0];
        let d2 = poly_mul(&d, &d);
        let rho2d2 = poly_mul(&rho2, &d2);
        let p2: Vec<f64> = poly_mul(&[1.0, 0.0, -1.0], &rho2d2).iter().map(|c| -c).collect();
        let p1: Vec<f64> = poly_mul(&[0.0, 1.0], &rho2d2).iter().map(|c| 2.0 * l * c).collect();
        let pot = [150.0, 0.0, -540.0, 0.0, 198.0];
        let p0 = poly_add(&rho2d2.iter().map(|c| l * (l - 1.0) * c).collect::<Vec<_>>(), &pot);
        let q2 = poly_reflect_at_one(&p2);
        let q1: Vec<f64> = poly_reflect_at_one(&p1).iter().map(|c| -c).collect();
        let q0 = poly_reflect_at_one(&p0);
        Ok(Self { lambda, q2, q1, q0, coeffs: vec![1.0] })
    }

    fn extend(&mut self, upto: usize) {
        let get = |p: &Vec<f64>, k: i64| -> f64 {
            if k < 0 || k as usize >= p.len() {
                0.0
            } else {
                p[k as usize]
            }
        };
        while self.coeffs.len() <= upto {
            let n = self.coeffs.len() as i64;
            let mut acc = 0.0;
            let mut lead = 0.0;
            for m in (n - 8).max(0)..=n {
                let mf = m as f64;
                let t =
                    get(&self.q2, n + 1 - m) * mf * (mf - 1.0) + get(&self.q1, n - m) * mf + get(&self.q0, n - 1 - m);
                if m == n {
                    lead = t;
                } else {
                    acc += t * self.coeffs[m as usize];
                }
            }
            self.coeffs.push(-acc / lead);
        }
    }

    pub fn coeffs(&mut self, upto: usize) -> &[f64] {
        self.extend(upto);
        &self.coeffs[..=upto]
    }

    /// Value and `d/drho` at `rho` (requires `0 < 1 - rho < 1`), summed
    /// adaptively to relative tolerance `tol`.
    pub fn evaluate(&mut self, rho: f64, tol: f64) -> Result<SeriesValue> {
        let x = 1.0 - rho;
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("rho = {rho} outside (0, 1]")));
        }
        if x == 0.0 {
            let (v, dv) = boundary_data_at_one(self.lambda)?;
            return Ok(SeriesValue { value: v, derivative: dv, terms: 2 });
        }
        let damp = 1.0 / (1.0 - x);
        let (mut v, mut dvx) = (0.0f64, 0.0f64);
        let mut pow = 1.0;
        let mut quiet = 0;
        for n in 0..MAX_SERIES_TERMS {
            self.extend(n);
            let c = self.coeffs[n];
            let t = c * pow;
            let dt = if n == 0 { 0.0 } else { c * n as f64 * pow / x };
            v += t;
            dvx += dt;
            pow *= x;
            let small = t.abs() * damp <= tol * v.abs() && dt.abs() * damp * damp <= tol * dvx.abs().max(tol);
            if small && n > 2 {
                quiet += 1;
                if quiet >= 4 {
                    return Ok(SeriesValue { value: v, derivative: -dvx, terms: n + 1 });
                }
            } else {
                quiet = 0;
            }
        }
        Err(Error::SeriesNotConverged { rho, terms: MAX_SERIES_TERMS })
    }
}
