//! Method-of-lines solver for `u_tt = u_rr + (2/r) u_r - f(u)/r^2`.
//!
//! Second-order centered differences on a uniform grid `r_i = i dr`, classic
//! RK4 in time. The center value is pinned to `u = 1`; the outer boundary
//! uses the outgoing condition `p_t = -p_r - p/r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{f_eval, u0_prime, u0_profile, CURVATURE_CONSTANT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    /// Number of intervals; points are `0..=m`.
    pub m: usize,
    pub r_max: f64,
}

impl RadialGrid {
    pub fn new(m: usize, r_max: f64) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidArgument(format!("grid needs at least 8 intervals, got {m}")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("outer radius must be positive, got {r_max}")));
        }
        Ok(Self { m, r_max })
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.m as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.r(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub dr: f64,
    pub u: Vec<f64>,
    /// `u_t`.
    pub p: Vec<f64>,
}

impl FieldState {
    pub fn vacuum(grid: &RadialGrid) -> Self {
        Self { t: 0.0, dr: grid.dr(), u: vec![1.0; grid.m + 1], p: vec![0.0; grid.m + 1] }
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.dr
    }
}

/// `C^infinity` step from 1 (at `x <= 0`) to 0 (at `x >= 1`).
pub fn smooth_cutoff(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        b / (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    /// `U0(r/T0)` with its time derivative, cut off smoothly on
    /// `[r_cut, r_cut + width]`.
    TruncatedSelfSimilar { t0: f64, r_cut: f64, width: f64 },
    /// `u = 1 - A r^2 exp(-(r - r0)^2 / sigma^2) s(r)`, `p = 0`, where `s`
    /// cuts off on `[r_cut, r_cut + width]`.
    GaussianLump { amplitude: f64, r0: f64, sigma: f64, r_cut: f64, width: f64 },
}

impl InitialData {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            InitialData::TruncatedSelfSimilar { t0, r_cut, width } => {
                if !(t0 > 0.0) {
                    return bad(format!("T0 must be positive, got {t0}"));
                }
                if !(r_cut > 0.0 && width > 0.0) {
                    return bad("cut radius and width must be positive".into());
                }
            }
            InitialData::GaussianLump { amplitude, sigma, r_cut, width, r0 } => {
                if !amplitude.is_finite() || !r0.is_finite() {
                    return bad("amplitude and center must be finite".into());
                }
                if !(sigma > 0.0 && r_cut > 0.0 && width > 0.0) {
                    return bad("sigma, cut radius and width must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Radius beyond which the data is exactly vacuum.
    pub fn support(&self) -> f64 {
        match *self {
            InitialData::TruncatedSelfSimilar { r_cut, width, .. } => r_cut + width,
            InitialData::GaussianLump { r_cut, width, .. } => r_cut + width,
        }
    }

    pub fn eval(&self, r: f64) -> (f64, f64) {
        match *self {
            InitialData::TruncatedSelfSimilar { t0, r_cut, width } => {
                let s = smooth_cutoff((r - r_cut) / width);
                let rho = r / t0;
                (1.0 + s * (u0_profile(rho) - 1.0), s * r / (t0 * t0) * u0_prime(rho))
            }
            InitialData::GaussianLump { amplitude, r0, sigma, r_cut, width } => {
                let s = smooth_cutoff((r - r_cut) / width);
                let g = (-(r - r0).powi(2) / (sigma * sigma)).exp();
                (1.0 - amplitude * r * r * g * s, 0.0)
            }
        }
    }
}

pub fn init_data(data: &InitialData, grid: &RadialGrid) -> Result<FieldState> {
    data.validate()?;
    if data.support() >= grid.r_max {
        return Err(Error::InvalidArgument(format!(
            "data support {} does not fit inside the grid radius {}",
            data.support(),
            grid.r_max
        )));
    }
    let mut st = FieldState::vacuum(grid);
    for i in 0..=grid.m {
        let (u, p) = data.eval(grid.r(i));
        st.u[i] = u;
        st.p[i] = p;
    }
    if st.u[0] != 1.0 || st.p[0] != 0.0 {
        return Err(Error::InvalidArgument("initial data violates u(0) = 1".into()));
    }
    Ok(st)
}

/// Per-grid constants of the spatial operator.
#[derive(Debug, Clone)]
struct Operator {
    dr: f64,
    /// `1 / (r_i dr)`.
    inv_rdr: Vec<f64>,
    /// `1 / r_i^2`.
    inv_r2: Vec<f64>,
}

impl Operator {
    fn new(n: usize, dr: f64) -> Self {
        let mut inv_rdr = vec![0.0; n];
        let mut inv_r2 = vec![0.0; n];
        for i in 1..n {
            let r = i as f64 * dr;
            inv_rdr[i] = 1.0 / (r * dr);
            inv_r2[i] = 1.0 / (r * r);
        }
        Self { dr, inv_rdr, inv_r2 }
    }

    /// Evaluates the time derivative `k` of the stage input `(su, sp)` and
    /// in the same sweep accumulates `acc += wk * k` and writes the next
    /// stage input `base + h * k` into `(nu, np)`.
    #[allow(clippy::too_many_arguments)]
    fn stage(
        &self,
        su: &[f64],
        sp: &[f64],
        base: (&[f64], &[f64]),
        h: f64,
        wk: f64,
        acc: (&mut [f64], &mut [f64]),
        next: (&mut [f64], &mut [f64]),
    ) {
        let m = su.len() - 1;
        let dr = self.dr;
        let idr2 = 1.0 / (dr * dr);
        // equal-length reslicing lets the compiler drop bounds checks
        let n = m + 1;
        let (su, sp) = (&su[..n], &sp[..n]);
        let (bu, bp) = (&base.0[..n], &base.1[..n]);
        let (au, ap) = (&mut acc.0[..n], &mut acc.1[..n]);
        let (nu, np) = (&mut next.0[..n], &mut next.1[..n]);
        let (irdr, ir2) = (&self.inv_rdr[..n], &self.inv_r2[..n]);
        // center: u pinned, k = 0
        nu[0] = bu[0];
        np[0] = bp[0];
        for i in 1..m {
            let (w0, w1, w2) = (su[i - 1], su[i], su[i + 1]);
            let ku = sp[i];
            let kp = (w2 - 2.0 * w1 + w0) * idr2 + (w2 - w0) * irdr[i] - f_eval(w1) * ir2[i];
            au[i] += wk * ku;
            ap[i] += wk * kp;
            nu[i] = bu[i] + h * ku;
            np[i] = bp[i] + h * kp;
        }
        let rm = m as f64 * dr;
        let pr = (3.0 * sp[m] - 4.0 * sp[m - 1] + sp[m - 2]) / (2.0 * dr);
        let (ku, kp) = (sp[m], -pr - sp[m] / rm);
        au[m] += wk * ku;
        ap[m] += wk * kp;
        nu[m] = bu[m] + h * ku;
        np[m] = bp[m] + h * kp;
    }
}

/// Scratch buffers for repeated RK4 steps on one grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    op: Operator,
    bufs: [Vec<f64>; 6],
}

impl Stepper {
    pub fn new(n: usize, dr: f64) -> Self {
        let z = || vec![0.0; n];
        Self { op: Operator::new(n, dr), bufs: [z(), z(), z(), z(), z(), z()] }
    }

    /// One RK4 step of size `dt`, in place. `t` is set to `t_new` so that
    /// long runs can use `n * dt` without accumulated rounding.
    pub fn step(&mut self, st: &mut FieldState, dt: f64, t_new: f64) -> Result<()> {
        let n = st.u.len();
        if self.bufs[0].len() != n || self.op.dr != st.dr {
            *self = Self::new(n, st.dr);
        }
        let Self { op, bufs } = self;
        let [acc_u, acc_p, a_u, a_p, b_u, b_p] = bufs;
        acc_u.copy_from_slice(&st.u);
        acc_p.copy_from_slice(&st.p);
        let w = dt / 6.0;
        let base = (&st.u[..], &st.p[..]);
        op.stage(&st.u, &st.p, base, 0.5 * dt, w, (acc_u, acc_p), (a_u, a_p));
        op.stage(a_u, a_p, base, 0.5 * dt, 2.0 * w, (acc_u, acc_p), (b_u, b_p));
        op.stage(b_u, b_p, base, dt, 2.0 * w, (acc_u, acc_p), (a_u, a_p));
        // last stage: the next-stage output is unused
        op.stage(a_u, a_p, base, 0.0, w, (acc_u, acc_p), (b_u, b_p));
        if acc_u.iter().chain(acc_p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::BlowupOverflow { last_valid: Box::new(st.clone()) });
        }
        std::mem::swap(&mut st.u, acc_u);
        std::mem::swap(&mut st.p, acc_p);
        st.t = t_new;
        Ok(())
    }
}

/// Single RK4 step returning the new state.
pub fn step(state: &FieldState, dt: f64) -> Result<FieldState> {
    if !(dt > 0.0) || dt > 0.5 * state.dr * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("dt = {dt} violates dt <= 0.5 dr")));
    }
    let mut st = state.clone();
    let t_new = state.t + dt;
    Stepper::new(st.u.len(), st.dr).step(&mut st, dt, t_new)?;
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureEstimator {
    /// Least squares `u - 1 = c r^2` over the first four interior points.
    #[default]
    Quadratic,
    /// Least squares `u - 1 = c r^2 + d r^4` over the same points.
    QuadraticQuartic,
}

/// `u_rr(t, 0) = 2c` from a fit of `u_i - 1` near the center.
pub fn center_curvature(state: &FieldState) -> f64 {
    center_curvature_with(state, CurvatureEstimator::Quadratic)
}

pub fn center_curvature_with(state: &FieldState, est: CurvatureEstimator) -> f64 {
    let y: [f64; 4] = std::array::from_fn(|k| state.u[k + 1] - 1.0);
    let x: [f64; 4] = std::array::from_fn(|k| ((k + 1) as f64 * state.dr).powi(2));
    match est {
        CurvatureEstimator::Quadratic => {
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let sxx: f64 = x.iter().map(|a| a * a).sum();
            2.0 * sxy / sxx
        }
        CurvatureEstimator::QuadraticQuartic => {
            // normal equations in units of dr to keep them well scaled
            let h2 = state.dr * state.dr;
            let (mut s22, mut s24, mut s44, mut b2, mut b4) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for k in 0..4 {
                let a = x[k] / h2;
                let b = a * a;
                s22 += a * a;
                s24 += a * b;
                s44 += b * b;
                b2 += a * y[k];
                b4 += b * y[k];
            }
            let det = s22 * s44 - s24 * s24;
            2.0 * (b2 * s44 - b4 * s24) / det / h2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupDiagnostics {
    pub dr: f64,
    pub times: Vec<f64>,
    pub kappa: Vec<f64>,
    pub blowup_time: Option<f64>,
    pub window: Option<(f64, f64)>,
}

impl BlowupDiagnostics {
    pub fn new(dr: f64) -> Self {
        Self { dr, times: Vec::new(), kappa: Vec::new(), blowup_time: None, window: None }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `q = (-5 kappa / 16)^(-1/2)`, which equals `T - t` on the attractor.
pub fn curvature_scale(kappa: f64) -> f64 {
    (-kappa / CURVATURE_CONSTANT).powf(-0.5)
}

/// Relative gate on the max residual of the linear fit of `q(t)`.
pub const T_FIT_GATE: f64 = 0.05;

/// Linear fit of `q = a t + b` over samples `idx`, returning `(T, rel)`
/// where `rel` is the max residual over the range of `q`.
fn fit_q_line(times: &[f64], q: &[f64]) -> (f64, f64) {
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let mq = q.iter().sum::<f64>() / n;
    let (mut stt, mut stq) = (0.0, 0.0);
    for (t, y) in times.iter().zip(q) {
        stt += (t - mt) * (t - mt);
        stq += (t - mt) * (y - mq);
    }
    let a = stq / stt;
    let b = mq - a * mt;
    let range = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - q.iter().cloned().fold(f64::INFINITY, f64::min);
    let worst = times.iter().zip(q).map(|(t, y)| (y - a * t - b).abs()).fold(0.0, f64::max);
    (-b / a, worst / range)
}

/// Blowup time from the zero crossing of a straight line through
/// `q(t_j)`, fitted on the samples of `diag.window` (default: all samples
/// with `kappa < 0`).
pub fn estimate_t(diag: &BlowupDiagnostics) -> Result<f64> {
    let (ta, tb) = diag.window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let sel: Vec<usize> = (0..diag.len()).filter(|&j| diag.times[j] >= ta && diag.times[j] <= tb).collect();
    let ok = sel.len() >= 10
        && sel.iter().all(|&j| diag.kappa[j] < 0.0)
        && sel.windows(2).all(|w| diag.kappa[w[1]].abs() > diag.kappa[w[0]].abs());
    if !ok {
        return Err(Error::FitRejected(
            "need at least 10 samples with negative, monotonically growing curvature".into(),
        ));
    }
    let times: Vec<f64> = sel.iter().map(|&j| diag.times[j]).collect();
    let q: Vec<f64> = sel.iter().map(|&j| curvature_scale(diag.kappa[j])).collect();
    let (t, rel) = fit_q_line(&times, &q);
    if !(rel <= T_FIT_GATE) || !t.is_finite() {
        return Err(Error::FitRejected(format!("q(t) is not linear (relative residual {rel:.3})")));
    }
    Ok(t)
}

/// Geometric ladder of `T - t` values at which snapshots are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLadder {
    pub first: f64,
    pub ratio: f64,
    pub count: usize,
}

impl SnapshotLadder {
    pub fn levels(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.first / self.ratio.powi(k as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub t_end: f64,
    /// Stop once `|kappa| dr^2` exceeds this.
    pub curvature_threshold: f64,
    /// Record `kappa` every this many steps.
    pub sample_every: usize,
    pub snapshot_times: Vec<f64>,
    pub ladder: Option<SnapshotLadder>,
    pub estimator: CurvatureEstimator,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            curvature_threshold: 0.05,
            sample_every: 2,
            snapshot_times: Vec::new(),
            ladder: None,
            estimator: CurvatureEstimator::Quadratic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    EndTime,
    CurvatureThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutput {
    pub snapshots: Vec<FieldState>,
    pub diagnostics: BlowupDiagnostics,
    pub final_state: FieldState,
    pub stop: StopReason,
    pub steps: usize,
}

/// Advances `state` with `dt = cfl * dr` until `t_end` or until the center
/// curvature passes the threshold.
///
/// Ladder snapshots use a running estimate `T ~ t - q / q'` from the last
/// two curvature samples; each is stored at the first sample whose
/// estimated `T - t` is at or below the next ladder level.
pub fn evolve_until(state: FieldState, cfl: f64, stop: &StopCriteria) -> Result<EvolutionOutput> {
    if !(cfl > 0.0 && cfl <= 0.5) {
        return Err(Error::InvalidArgument(format!("CFL factor {cfl} outside (0, 0.5]")));
    }
    if stop.sample_every == 0 {
        return Err(Error::InvalidArgument("sample interval must be positive".into()));
    }
    let dt = cfl * state.dr;
    let t0 = state.t;
    let mut st = state;
    let mut stepper = Stepper::new(st.u.len(), st.dr);
    let mut diag = BlowupDiagnostics::new(st.dr);
    let mut snapshots = Vec::new();
    let mut pending_times: Vec<f64> = stop.snapshot_times.clone();
    pending_times.sort_by(f64::total_cmp);
    let mut times_iter = pending_times.into_iter().peekable();
    let ladder = stop.ladder.map(|l| l.levels()).unwrap_or_default();
    let mut next_rung = 0;
    let kappa_stop = stop.curvature_threshold / (st.dr * st.dr);
    let mut n = 0usize;
    let mut last_q: Option<(f64, f64)> = None;
    let record = |st: &FieldState, diag: &mut BlowupDiagnostics| {
        let k = center_curvature_with(st, stop.estimator);
        diag.times.push(st.t);
        diag.kappa.push(k);
        k
    };
    let mut kappa = record(&st, &mut diag);
    let reason = loop {
        if kappa.abs() >= kappa_stop {
            break StopReason::CurvatureThreshold;
        }
        if st.t >= stop.t_end - 0.5 * dt {
            break StopReason::EndTime;
        }
        n += 1;
        stepper.step(&mut st, dt, t0 + n as f64 * dt)?;
        while let Some(&ts) = times_iter.peek() {
            if st.t + 0.5 * dt >= ts {
                snapshots.push(st.clone());
                times_iter.next();
            } else {
                break;
            }
        }
        if n.is_multiple_of(stop.sample_every) {
            kappa = record(&st, &mut diag);
            if kappa < 0.0 && next_rung < ladder.len() {
                let q = curvature_scale(kappa);
                if let Some((tp, qp)) = last_q {
                    let slope = (q - qp) / (st.t - tp);
                    if slope < 0.0 {
                        let remaining = -q / slope;
                        if remaining <= ladder[next_rung] {
                            snapshots.push(st.clone());
                            while next_rung < ladder.len() && remaining <= ladder[next_rung] {
                                next_rung += 1;
                            }
                        }
                    }
                }
                last_q = Some((st.t, q));
            }
        }
    };
    snapshots.sort_by(|a, b| a.t.total_cmp(&b.t));
    snapshots.dedup_by(|a, b| a.t == b.t);
    Ok(EvolutionOutput { snapshots, diagnostics: diag, final_state: st, stop: reason, steps: n })
}

/// Combines curvature series from grids `dr` and `dr/2`, sampled at the
/// same times, into `(4 k_fine - k_coarse) / 3`.
pub fn richardson_diagnostics(coarse: &BlowupDiagnostics, fine: &BlowupDiagnostics) -> Result<BlowupDiagnostics> {
    if (fine.dr * 2.0 - coarse.dr).abs() > 1e-12 * coarse.dr {
        return Err(Error::InvalidArgument("Richardson combination needs a grid refined by exactly 2".into()));
    }
    let mut out = BlowupDiagnostics::new(coarse.dr);
    let mut j = 0;
    for (i, &t) in coarse.times.iter().enumerate() {
        while j < fine.times.len() && fine.times[j] < t - 1e-12 {
            j += 1;
        }
        if j < fine.times.len() && (fine.times[j] - t).abs() <= 1e-12 * t.abs().max(1.0) {
            out.times.push(t);
            out.kappa.push((4.0 * fine.kappa[j] - coarse.kappa[i]) / 3.0);
        }
    }
    Ok(out)
}

/// Same combination for two snapshots at equal times; coarse point `i`
/// coincides with fine point `2i`.
pub fn richardson_state(coarse: &FieldState, fine: &FieldState) -> Result<FieldState> {
    if (fine.t - coarse.t).abs() > 1e-12 * coarse.t.abs().max(1.0)
        || (2.0 * fine.dr - coarse.dr).abs() > 1e-12 * coarse.dr
    {
        return Err(Error::InvalidArgument("snapshots are not on nested grids at equal times".into()));
    }
    let n = coarse.u.len().min(fine.u.len().div_ceil(2));
    let mut out = coarse.clone();
    out.u.truncate(n);
    out.p.truncate(n);
    for i in 0..n {
        out.u[i] = (4.0 * fine.u[2 * i] - coarse.u[i]) / 3.0;
        out.p[i] = (4.0 * fine.p[2 * i] - coarse.p[i]) / 3.0;
    }
    Ok(out)
}
