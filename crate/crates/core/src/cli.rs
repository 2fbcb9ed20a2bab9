//! Command-line front end.
//!
//! Every subcommand reads one [`RunConfig`] (TOML file plus flag overrides),
//! validates all of it before doing any work, and writes CSV and JSON files
//! under `output_dir`. Each output embeds the SHA-256 of the effective
//! configuration.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure,
//! 4 acceptance-gate failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    curvature_deviation, decay_ratio, deviation, exact_tracking_range, fit_blowup, mode_fit, rescale_snapshot,
    rho_grid, rough_blowup_time, BlowupFit, FitOptions, ModeFit, MIN_RESOLVED_CELLS, MODE_FIT_WINDOW,
};
use crate::contfrac::{eigen_residual, find_spectrum, scan_grid, EigenvalueRecord, REFERENCE_EIGENVALUES};
use crate::error::{Error, Result};
use crate::evolve::{
    evolve_until, init_data, richardson_diagnostics, richardson_state, BlowupDiagnostics, CurvatureEstimator,
    EvolutionOutput, FieldState, InitialData, RadialGrid, SnapshotLadder, StopCriteria, StopReason,
};
use crate::model::u0_profile;
use crate::modes::{build_mode, EigenmodeProfile};
use crate::shooting::{wronskian_scan, ShootingConfig, WronskianZero};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_GATE: i32 = 4;

/// Profile fits are scored on this `rho` range.
pub const PROFILE_SCORE_WINDOW: (f64, f64) = (0.1, 0.9);

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
    /// Bisection width.
    pub tol: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { lambda_min: -14.0, lambda_max: 1.5, step: 0.01, tol: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WronskianConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
    pub match_point: f64,
}

impl Default for WronskianConfig {
    fn default() -> Self {
        Self { lambda_min: -7.0, lambda_max: 1.5, step: 0.01, match_point: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Number of grid intervals `M` on `[0, r_max]`.
    pub grid_points: usize,
    pub r_max: f64,
    /// `dt / dr`.
    pub cfl: f64,
    pub t_end: f64,
    /// Stop once `|kappa| dr^2` exceeds this.
    pub curvature_threshold: f64,
    pub samples_per_unit_time: f64,
    pub estimator: CurvatureEstimator,
    /// Repeat the run on a grid refined by 2 and combine both.
    pub richardson: bool,
    pub ladder: SnapshotLadder,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            grid_points: 16384,
            r_max: 2.0,
            cfl: 0.5,
            t_end: 3.0,
            curvature_threshold: 0.05,
            samples_per_unit_time: 2048.0,
            estimator: CurvatureEstimator::QuadraticQuartic,
            richardson: true,
            ladder: SnapshotLadder { first: 0.5, ratio: std::f64::consts::SQRT_2, count: 30 },
        }
    }
}

impl EvolveConfig {
    pub fn dt(&self) -> f64 {
        self.cfl * self.r_max / self.grid_points as f64
    }

    pub fn sample_every(&self) -> usize {
        ((1.0 / (self.samples_per_unit_time * self.dt())).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub options: FitOptions,
    /// Points of the `rho` grid on `[0, 1]` minus one.
    pub rho_points: usize,
    pub k_max: usize,
    /// The late snapshot is the last one with at least this many cells
    /// inside the light cone.
    pub late_min_cells: f64,
    /// The early snapshot is the one closest to this `T - t` (log scale).
    pub early_s: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { options: FitOptions::default(), rho_points: 200, k_max: 2, late_min_cells: 25.0, early_s: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub eigenvalue_tol: f64,
    pub gauge_tol: f64,
    pub wronskian_tol: f64,
    pub blowup_time_rel: f64,
    pub tracking_rel: f64,
    pub tracking_decades: f64,
    pub lambda1_rel: f64,
    pub one_mode_residual: f64,
    pub two_mode_gain: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            eigenvalue_tol: 1e-4,
            gauge_tol: 1e-8,
            wronskian_tol: 1e-3,
            blowup_time_rel: 0.01,
            tracking_rel: 0.02,
            tracking_decades: 1.5,
            lambda1_rel: 0.02,
            one_mode_residual: 0.05,
            two_mode_gain: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    /// `T` estimate against the `T0` of truncated self-similar data.
    BlowupTime,
    /// Center curvature against `-(16/5)(T0 - t)^-2`.
    ExactTracking,
    Lambda1,
    OneMode,
    TwoMode,
}

/// One named evolution: its initial data and the gates it is checked on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub data: InitialData,
    #[serde(default)]
    pub gates: Vec<GateKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub spectrum: SpectrumConfig,
    pub wronskian: WronskianConfig,
    pub evolve: EvolveConfig,
    pub fit: FitConfig,
    pub gates: GateConfig,
    pub runs: BTreeMap<String, RunSpec>,
}

pub fn default_runs() -> BTreeMap<String, RunSpec> {
    let mut runs = BTreeMap::new();
    runs.insert(
        "exact".to_string(),
        RunSpec {
            data: InitialData::TruncatedSelfSimilar { t0: 1.0, r_cut: 1.3, width: 0.3 },
            gates: vec![GateKind::BlowupTime, GateKind::ExactTracking],
        },
    );
    runs.insert(
        "blowup".to_string(),
        RunSpec {
            data: InitialData::GaussianLump { amplitude: 1.5, r0: 0.0, sigma: 3.0, r_cut: 1.2, width: 0.6 },
            gates: vec![GateKind::Lambda1, GateKind::OneMode],
        },
    );
    runs.insert(
        "profile".to_string(),
        RunSpec {
            data: InitialData::GaussianLump { amplitude: 1.7, r0: 0.0, sigma: 2.0, r_cut: 1.2, width: 0.6 },
            gates: vec![GateKind::TwoMode],
        },
    );
    runs
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            spectrum: SpectrumConfig::default(),
            wronskian: WronskianConfig::default(),
            evolve: EvolveConfig::default(),
            fit: FitConfig::default(),
            gates: GateConfig::default(),
            runs: default_runs(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_range(what: &str, lo: f64, hi: f64, step: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(config_err(format!("{what}: need finite lambda_min < lambda_max, got [{lo}, {hi}]")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(config_err(format!("{what}: step must be positive, got {step}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { output_dir: PathBuf::new(), ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.spectrum;
        check_range("spectrum", s.lambda_min, s.lambda_max, s.step)?;
        if !(s.tol > 0.0) {
            return Err(config_err("spectrum: tol must be positive"));
        }
        let w = &self.wronskian;
        check_range("wronskian", w.lambda_min, w.lambda_max, w.step)?;
        if !(w.match_point > 0.0 && w.match_point < 1.0) {
            return Err(config_err(format!("wronskian: match_point {} outside (0, 1)", w.match_point)));
        }
        let e = &self.evolve;
        if e.grid_points < 8 || !e.grid_points.is_multiple_of(2) {
            return Err(config_err(format!("evolve: grid_points must be even and >= 8, got {}", e.grid_points)));
        }
        if !(e.r_max > 0.0 && e.r_max.is_finite()) {
            return Err(config_err("evolve: r_max must be positive"));
        }
        if !(e.cfl > 0.0 && e.cfl <= 0.5) {
            return Err(config_err(format!("evolve: cfl {} outside (0, 0.5]", e.cfl)));
        }
        if !(e.t_end > 0.0 && e.t_end.is_finite()) {
            return Err(config_err("evolve: t_end must be positive"));
        }
        if !(e.curvature_threshold > 0.0) {
            return Err(config_err("evolve: curvature_threshold must be positive"));
        }
        if !(e.samples_per_unit_time > 0.0 && e.samples_per_unit_time.is_finite()) {
            return Err(config_err("evolve: samples_per_unit_time must be positive"));
        }
        let l = &e.ladder;
        if !(l.first > 0.0 && l.ratio > 1.0 && l.count >= 1) {
            return Err(config_err("evolve: ladder needs first > 0, ratio > 1, count >= 1"));
        }
        let f = &self.fit;
        let o = &f.options;
        if !(o.min_cells >= MIN_RESOLVED_CELLS && o.max_fraction > 0.0 && o.max_fraction <= 1.0) {
            return Err(config_err(format!("fit: need min_cells >= {MIN_RESOLVED_CELLS} and max_fraction in (0, 1]")));
        }
        if !(o.bin > 0.0 && o.slope_tolerance > 0.0 && o.t_search > 0.0) {
            return Err(config_err("fit: bin, slope_tolerance and t_search must be positive"));
        }
        if f.rho_points < 10 {
            return Err(config_err("fit: rho_points must be at least 10"));
        }
        if !(1..=4).contains(&f.k_max) {
            return Err(config_err(format!("fit: k_max must be in 1..=4, got {}", f.k_max)));
        }
        if !(f.late_min_cells >= MIN_RESOLVED_CELLS && f.early_s > 0.0) {
            return Err(config_err(format!("fit: need late_min_cells >= {MIN_RESOLVED_CELLS} and early_s > 0")));
        }
        let g = &self.gates;
        let tols = [
            g.eigenvalue_tol,
            g.gauge_tol,
            g.wronskian_tol,
            g.blowup_time_rel,
            g.tracking_rel,
            g.tracking_decades,
            g.lambda1_rel,
            g.one_mode_residual,
            g.two_mode_gain,
        ];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(config_err("gates: all tolerances must be positive"));
        }
        for (name, run) in &self.runs {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(config_err(format!("run name {name:?} must be non-empty [A-Za-z0-9_-]")));
            }
            run.data.validate().map_err(|e| config_err(format!("runs.{name}: {e}")))?;
            if run.data.support() >= e.r_max {
                return Err(config_err(format!(
                    "runs.{name}: data support {} does not fit inside r_max = {}",
                    run.data.support(),
                    e.r_max
                )));
            }
            if run.gates.contains(&GateKind::TwoMode) && f.k_max < 2 {
                return Err(config_err(format!("runs.{name}: the two-mode gate needs k_max >= 2")));
            }
        }
        Ok(())
    }

    pub fn run(&self, name: &str) -> Result<&RunSpec> {
        self.runs.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.runs.keys().map(String::as_str).collect();
            config_err(format!("unknown run {name:?} (configured: {})", known.join(", ")))
        })
    }
}

// ---------------------------------------------------------------- output

/// Full double precision, 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with a `# config_sha256 = ...` line, a header row and numeric rows.
pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = format!("# config_sha256 = {hash}\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt17(*x)))?;
    }
    out.push_str(std::str::from_utf8(&w.into_inner().map_err(|e| e.into_error())?).expect("utf8 csv"));
    fs::write(path, out)?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`] back into numeric columns.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| config_err(format!("{}: {e}", path.display())))?);
    }
    Ok((header, rows))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------- gates

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub measured: String,
    pub reference: String,
    pub criterion: String,
    pub passed: bool,
}

impl Gate {
    fn new(name: impl Into<String>, measured: String, reference: String, criterion: String, passed: bool) -> Self {
        Self { name: name.into(), measured, reference, criterion, passed }
    }
}

pub fn all_passed(gates: &[Gate]) -> bool {
    gates.iter().all(|g| g.passed)
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub schema: String,
    pub config_hash: String,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
    pub records: Vec<EigenvalueRecord>,
    pub gates: Vec<Gate>,
}

impl SpectrumFile {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.index.is_some()).map(|r| r.lambda).collect()
    }
}

/// Compares roots found on `[lo, hi]` with the reference eigenvalues in
/// that range: same count, each within `tol` (and `lambda0 = 1` within
/// `gauge_tol`).
fn reference_gates(kind: &str, roots: &[f64], lo: f64, hi: f64, tol: f64, gauge_tol: Option<f64>) -> Vec<Gate> {
    let refs: Vec<f64> = REFERENCE_EIGENVALUES.iter().copied().filter(|l| *l >= lo && *l <= hi).collect();
    let mut gates = vec![Gate::new(
        format!("{kind}: number of eigenvalues in [{lo}, {hi}]"),
        roots.len().to_string(),
        refs.len().to_string(),
        "equal".into(),
        roots.len() == refs.len(),
    )];
    for (n, &r) in refs.iter().enumerate() {
        let nearest = roots.iter().copied().min_by(|a, b| (a - r).abs().total_cmp(&(b - r).abs()));
        let t = if r == 1.0 { gauge_tol.unwrap_or(tol) } else { tol };
        let (measured, passed) = match nearest {
            Some(x) => (format!("{x:.9}"), (x - r).abs() <= t),
            None => ("none".into(), false),
        };
        gates.push(Gate::new(
            format!("{kind}: lambda_{n}"),
            measured,
            format!("{r}"),
            format!("abs err <= {t:e}"),
            passed,
        ));
    }
    gates
}

pub struct SpectrumOutcome {
    pub file: SpectrumFile,
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<SpectrumOutcome> {
    let s = &cfg.spectrum;
    let hash = cfg.hash();
    fs::create_dir_all(&cfg.output_dir)?;
    let spectrum = find_spectrum(s.lambda_min, s.lambda_max, s.step, s.tol);
    let roots = spectrum.eigenvalues();
    if roots.is_empty() {
        return Err(Error::FitRejected(format!("no eigenvalues found in [{}, {}]", s.lambda_min, s.lambda_max)));
    }
    let gates = reference_gates(
        "spectrum",
        &roots,
        s.lambda_min,
        s.lambda_max,
        cfg.gates.eigenvalue_tol,
        Some(cfg.gates.gauge_tol),
    );
    let file = SpectrumFile {
        schema: "ssblowup.spectrum/1".into(),
        config_hash: hash.clone(),
        lambda_min: s.lambda_min,
        lambda_max: s.lambda_max,
        step: s.step,
        records: spectrum.records,
        gates,
    };
    write_json(&cfg.output_dir.join("spectrum.json"), &file)?;
    let curve = scan_grid(s.lambda_min, s.lambda_max, s.step)
        .into_iter()
        .filter_map(|l| eigen_residual(l).ok().map(|f| vec![l, f]));
    write_csv(&cfg.output_dir.join("residual_curve.csv"), &hash, &["lambda", "residual"], curve)?;
    Ok(SpectrumOutcome { file })
}

// ---------------------------------------------------------------- wronskian

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub spectrum_file: PathBuf,
    pub pairs: Vec<(f64, Option<f64>)>,
    pub max_difference: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WronskianFile {
    pub schema: String,
    pub config_hash: String,
    pub match_point: f64,
    pub zeros: Vec<WronskianZero>,
    pub failures: Vec<(f64, String)>,
    pub cross_check: Option<CrossCheck>,
    pub gates: Vec<Gate>,
}

impl WronskianFile {
    pub fn roots(&self) -> Vec<f64> {
        self.zeros
            .iter()
            .filter(|z| z.classification == crate::contfrac::Classification::Root)
            .map(|z| z.lambda)
            .collect()
    }
}

pub fn cmd_wronskian(cfg: &RunConfig) -> Result<WronskianFile> {
    let w = &cfg.wronskian;
    let hash = cfg.hash();
    fs::create_dir_all(&cfg.output_dir)?;
    let sc = ShootingConfig { match_point: w.match_point, ..ShootingConfig::default() };
    let scan = wronskian_scan(w.lambda_min, w.lambda_max, w.step, &sc)?;
    for (l, e) in &scan.failures {
        warn!("wronskian at lambda = {l}: {e}");
    }
    let roots = scan.roots();
    let rows = scan.curve.iter().map(|p| vec![p.lambda, p.w, p.w_normalized]);
    write_csv(&cfg.output_dir.join("wronskian.csv"), &hash, &["lambda", "w", "w_normalized"], rows)?;

    let spectrum_path = cfg.output_dir.join("spectrum.json");
    let cross_check = if spectrum_path.exists() {
        let spec: SpectrumFile = read_json(&spectrum_path)?;
        let tol = cfg.gates.wronskian_tol;
        let expected: Vec<f64> =
            spec.eigenvalues().into_iter().filter(|l| *l >= w.lambda_min && *l <= w.lambda_max).collect();
        let pairs: Vec<(f64, Option<f64>)> = expected
            .iter()
            .map(|&l| (l, roots.iter().copied().min_by(|a, b| (a - l).abs().total_cmp(&(b - l).abs()))))
            .collect();
        let max_difference = pairs.iter().map(|(l, z)| z.map_or(f64::INFINITY, |z| (z - l).abs())).fold(0.0, f64::max);
        let passed = expected.len() == roots.len() && max_difference <= tol;
        Some(CrossCheck { spectrum_file: spectrum_path, pairs, max_difference, passed })
    } else {
        warn!("{} not found, skipping the cross-check", spectrum_path.display());
        None
    };
    let mut gates = reference_gates("wronskian", &roots, w.lambda_min, w.lambda_max, cfg.gates.wronskian_tol, None);
    if let Some(c) = &cross_check {
        gates.push(Gate::new(
            "wronskian: zeros against spectrum.json",
            format!("{:e}", c.max_difference),
            "0".into(),
            format!("same count, abs diff <= {:e}", cfg.gates.wronskian_tol),
            c.passed,
        ));
    }
    let file = WronskianFile {
        schema: "ssblowup.wronskian-zeros/1".into(),
        config_hash: hash,
        match_point: w.match_point,
        zeros: scan.zeros,
        failures: scan.failures,
        cross_check,
        gates,
    };
    write_json(&cfg.output_dir.join("wronskian_zeros.json"), &file)?;
    Ok(file)
}

// ---------------------------------------------------------------- evolve

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Blowup,
    NoBlowup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveManifest {
    pub schema: String,
    pub config_hash: String,
    pub run: String,
    pub data: InitialData,
    pub grid_points: usize,
    pub r_max: f64,
    pub dr: f64,
    pub dt: f64,
    pub richardson: bool,
    pub steps: usize,
    pub stop: StopReason,
    pub status: RunStatus,
    pub final_time: f64,
    pub blowup_time_estimate: Option<f64>,
    pub kappa_file: String,
    pub snapshots: Vec<SnapshotEntry>,
    pub gates: Vec<Gate>,
}

fn evolve_once(
    cfg: &EvolveConfig,
    data: &InitialData,
    m: usize,
    sample_every: usize,
    ladder: Option<SnapshotLadder>,
    times: Vec<f64>,
) -> Result<EvolutionOutput> {
    let grid = RadialGrid::new(m, cfg.r_max)?;
    let stop = StopCriteria {
        t_end: cfg.t_end,
        curvature_threshold: cfg.curvature_threshold,
        sample_every,
        snapshot_times: times,
        ladder,
        estimator: cfg.estimator,
    };
    evolve_until(init_data(data, &grid)?, cfg.cfl, &stop)
}

/// Runs the evolution (twice with Richardson combination if configured)
/// and returns the curvature series and snapshots on the base grid.
pub fn run_evolution(
    cfg: &EvolveConfig,
    data: &InitialData,
) -> Result<(EvolutionOutput, BlowupDiagnostics, Vec<FieldState>)> {
    let m = cfg.grid_points;
    let every = cfg.sample_every();
    let coarse = evolve_once(cfg, data, m, every, Some(cfg.ladder), Vec::new())?;
    if !cfg.richardson {
        let (d, s) = (coarse.diagnostics.clone(), coarse.snapshots.clone());
        return Ok((coarse, d, s));
    }
    let times: Vec<f64> = coarse.snapshots.iter().map(|s| s.t).collect();
    let fine = evolve_once(cfg, data, 2 * m, 2 * every, None, times)?;
    if fine.snapshots.len() != coarse.snapshots.len() {
        return Err(Error::InvalidArgument("refined run did not reach every snapshot time".into()));
    }
    let diag = richardson_diagnostics(&coarse.diagnostics, &fine.diagnostics)?;
    let snaps = coarse
        .snapshots
        .iter()
        .zip(&fine.snapshots)
        .map(|(a, b)| richardson_state(a, b))
        .collect::<Result<Vec<_>>>()?;
    Ok((coarse, diag, snaps))
}

pub fn run_dir(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn exact_gates(cfg: &RunConfig, spec: &RunSpec, diag: &BlowupDiagnostics, estimate: Option<f64>) -> Vec<Gate> {
    let g = &cfg.gates;
    let t0 = match spec.data {
        InitialData::TruncatedSelfSimilar { t0, .. } => Some(t0),
        _ => None,
    };
    let mut gates = Vec::new();
    for kind in &spec.gates {
        match kind {
            GateKind::BlowupTime => {
                let (measured, passed) = match (t0, estimate) {
                    (Some(t0), Some(t)) => (format!("{t:.9}"), ((t - t0) / t0).abs() <= g.blowup_time_rel),
                    (None, _) => ("needs truncated self-similar data".into(), false),
                    (_, None) => ("no estimate".into(), false),
                };
                let reference = t0.map_or("-".into(), |t| format!("{t}"));
                gates.push(Gate::new(
                    "evolve: blowup time",
                    measured,
                    reference,
                    format!("rel err <= {}", g.blowup_time_rel),
                    passed,
                ));
            }
            GateKind::ExactTracking => {
                let (measured, passed) = match t0.map(|t0| exact_tracking_range(diag, t0, g.tracking_rel)) {
                    Some(Some((lo, hi))) => {
                        let decades = (hi / lo).log10();
                        (format!("{decades:.2} decades, T - t in [{lo:.3e}, {hi:.3e}]"), decades >= g.tracking_decades)
                    }
                    Some(None) => ("never within tolerance".into(), false),
                    None => ("needs truncated self-similar data".into(), false),
                };
                gates.push(Gate::new(
                    "evolve: curvature tracks -(16/5)(T0 - t)^-2",
                    measured,
                    format!(">= {} decades", g.tracking_decades),
                    format!("rel err <= {}", g.tracking_rel),
                    passed,
                ));
            }
            _ => {}
        }
    }
    gates
}

pub fn cmd_evolve(cfg: &RunConfig, name: &str) -> Result<EvolveManifest> {
    let spec = cfg.run(name)?.clone();
    let hash = cfg.hash();
    let dir = run_dir(cfg, name);
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let e = &cfg.evolve;
    let (coarse, diag, snaps) = run_evolution(e, &spec.data)?;
    let status = match coarse.stop {
        StopReason::CurvatureThreshold => RunStatus::Blowup,
        StopReason::EndTime => RunStatus::NoBlowup,
    };
    let estimate = match status {
        RunStatus::Blowup => rough_blowup_time(&diag, cfg.fit.options.min_cells)
            .map_err(|err| warn!("run {name}: no blowup time estimate: {err}"))
            .ok(),
        RunStatus::NoBlowup => None,
    };
    write_csv(
        &dir.join("kappa.csv"),
        &hash,
        &["t", "kappa"],
        diag.times.iter().zip(&diag.kappa).map(|(t, k)| vec![*t, *k]),
    )?;
    let mut entries = Vec::with_capacity(snaps.len());
    for (i, st) in snaps.iter().enumerate() {
        let file = format!("snapshots/snapshot_{i:03}.csv");
        let rows = (0..st.u.len()).map(|j| vec![st.r(j), st.u[j], st.p[j]]);
        write_csv(&dir.join(&file), &hash, &["r", "u", "p"], rows)?;
        entries.push(SnapshotEntry { file, t: st.t });
    }
    let gates = exact_gates(cfg, &spec, &diag, estimate);
    let manifest = EvolveManifest {
        schema: "ssblowup.evolve-manifest/1".into(),
        config_hash: hash,
        run: name.to_string(),
        data: spec.data,
        grid_points: e.grid_points,
        r_max: e.r_max,
        dr: diag.dr,
        dt: e.dt(),
        richardson: e.richardson,
        steps: coarse.steps,
        stop: coarse.stop,
        status,
        final_time: coarse.final_state.t,
        blowup_time_estimate: estimate,
        kappa_file: "kappa.csv".into(),
        snapshots: entries,
        gates,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub t: f64,
    /// `T - t`.
    pub s: f64,
    pub cells: f64,
    pub tau: f64,
    pub fits: Vec<ModeFit>,
    /// Relative max-norm residual of each fit on [`PROFILE_SCORE_WINDOW`].
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub tau_a: f64,
    pub tau_b: f64,
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: String,
    pub config_hash: String,
    pub run: String,
    /// Normalization of the `c_k`: `w_k(rho) = v_k(rho) / rho` with
    /// `v_k = rho^3 + O(rho^4)`, so `w_k = rho^2 + ...`.
    pub mode_normalization: String,
    pub lambdas: Vec<f64>,
    pub center_fit: Option<BlowupFit>,
    pub center_fit_error: Option<String>,
    pub blowup_time: f64,
    pub late: ProfileFit,
    pub early: Option<ProfileFit>,
    /// Center `c1` against the late one-mode coefficient.
    pub c1_relative_difference: Option<f64>,
    pub decay: Option<DecayCheck>,
    pub gates: Vec<Gate>,
}

fn load_run(dir: &Path) -> Result<(EvolveManifest, BlowupDiagnostics, Vec<FieldState>)> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(config_err(format!("{} not found; run `evolve` first", manifest_path.display())));
    }
    let manifest: EvolveManifest = read_json(&manifest_path)?;
    let (_, rows) = read_csv(&dir.join(&manifest.kappa_file))?;
    let mut diag = BlowupDiagnostics::new(manifest.dr);
    for r in rows {
        diag.times.push(r[0]);
        diag.kappa.push(r[1]);
    }
    let mut snaps = Vec::with_capacity(manifest.snapshots.len());
    for e in &manifest.snapshots {
        let (_, rows) = read_csv(&dir.join(&e.file))?;
        snaps.push(FieldState {
            t: e.t,
            dr: manifest.dr,
            u: rows.iter().map(|r| r[1]).collect(),
            p: rows.iter().map(|r| r[2]).collect(),
        });
    }
    Ok((manifest, diag, snaps))
}

/// `lambda_1 .. lambda_k` from `spectrum.json` in the output directory, or
/// from a fresh scan.
fn damped_eigenvalues(cfg: &RunConfig, k: usize) -> Vec<f64> {
    let path = cfg.output_dir.join("spectrum.json");
    if let Ok(spec) = read_json::<SpectrumFile>(&path) {
        let ev = spec.eigenvalues();
        if ev.len() > k && ev[0] > 0.5 {
            return ev[1..=k].to_vec();
        }
    }
    let lo = -1.5 * k as f64 - 1.5;
    find_spectrum(lo, 1.5, 0.01, 1e-13).eigenvalues().into_iter().skip(1).take(k).collect()
}

fn profile_fit(
    st: &FieldState,
    blowup_time: f64,
    rho: &[f64],
    modes: &[EigenmodeProfile],
    k_max: usize,
) -> Result<(ProfileFit, Vec<(f64, f64)>)> {
    let p = rescale_snapshot(st, blowup_time, rho)?;
    let d = deviation(&p);
    let mut fits = Vec::new();
    let mut residuals = Vec::new();
    for k in 1..=k_max {
        let f = mode_fit(&d, modes, p.tau, k, MODE_FIT_WINDOW)?;
        residuals.push(f.residual(&d, modes, PROFILE_SCORE_WINDOW.0, PROFILE_SCORE_WINDOW.1));
        fits.push(f);
    }
    let s = blowup_time - st.t;
    Ok((ProfileFit { t: st.t, s, cells: s / st.dr, tau: p.tau, fits, residuals }, d))
}

pub fn cmd_fit(cfg: &RunConfig, name: &str) -> Result<FitReport> {
    let spec = cfg.run(name)?.clone();
    let hash = cfg.hash();
    let dir = run_dir(cfg, name);
    let (manifest, diag, snaps) = load_run(&dir)?;
    if manifest.status != RunStatus::Blowup {
        return Err(Error::FitRejected(format!("run {name} did not blow up")));
    }
    let f = &cfg.fit;
    let g = &cfg.gates;
    let center = fit_blowup(&diag, &f.options);
    let (center_fit, center_fit_error) = match center {
        Ok(c) => (Some(c), None),
        Err(e) => {
            warn!("run {name}: center fit failed: {e}");
            (None, Some(e.to_string()))
        }
    };
    let blowup_time = match &center_fit {
        Some(c) => c.blowup_time,
        None => rough_blowup_time(&diag, f.options.min_cells)?,
    };

    let lambdas = damped_eigenvalues(cfg, f.k_max);
    if lambdas.len() < f.k_max {
        return Err(Error::FitRejected(format!("only {} damped eigenvalues available", lambdas.len())));
    }
    let rho = rho_grid(f.rho_points);
    let modes = lambdas.iter().map(|&l| build_mode(l, &rho)).collect::<Result<Vec<_>>>()?;

    // log-log of the center deviation
    let window = center_fit.as_ref().map(|c| c.window);
    let deviation_rows = curvature_deviation(&diag, blowup_time)
        .into_iter()
        .filter(|p| p.s >= MIN_RESOLVED_CELLS * diag.dr && p.y != 0.0)
        .map(|p| {
            let inside = window.is_some_and(|(a, b)| p.s >= a && p.s <= b);
            vec![p.s.ln(), p.y.abs().ln(), p.y, f64::from(u8::from(inside))]
        });
    write_csv(&dir.join("center_deviation.csv"), &hash, &["ln_s", "ln_abs_y", "y", "in_window"], deviation_rows)?;

    // rescaled profiles of all resolved snapshots
    let resolved: Vec<&FieldState> = snaps.iter().filter(|s| blowup_time - s.t >= f.options.min_cells * s.dr).collect();
    if resolved.is_empty() {
        return Err(Error::FitRejected(format!("run {name}: no snapshot resolved by {} cells", f.options.min_cells)));
    }
    let mut profile_rows = Vec::new();
    for st in &resolved {
        let p = rescale_snapshot(st, blowup_time, &rho)?;
        for (r, u) in p.rho.iter().zip(&p.u) {
            profile_rows.push(vec![st.t, blowup_time - st.t, p.tau, *r, *u, u0_profile(*r)]);
        }
    }
    write_csv(&dir.join("rescaled_profiles.csv"), &hash, &["t", "s", "tau", "rho", "u", "u0"], profile_rows)?;

    // latest resolved snapshot against one mode
    let late_idx = snaps
        .iter()
        .rposition(|s| blowup_time - s.t >= f.late_min_cells * s.dr)
        .ok_or_else(|| Error::FitRejected(format!("run {name}: no snapshot resolved by {} cells", f.late_min_cells)))?;
    let (late, late_delta) = profile_fit(&snaps[late_idx], blowup_time, &rho, &modes, 1)?;
    let one = late.fits[0].evaluate(&modes[..1]);
    let rows = late_delta.iter().zip(&one).map(|((r, d), m)| vec![*r, *d, *m]);
    write_csv(&dir.join("one_mode_profile.csv"), &hash, &["rho", "delta", "one_mode"], rows)?;

    // earlier snapshot, one mode against k_max modes
    let early_idx = snaps
        .iter()
        .enumerate()
        .filter(|(_, s)| blowup_time - s.t > 0.0 && blowup_time - s.t >= f.late_min_cells * s.dr)
        .min_by(|(_, a), (_, b)| {
            let da = ((blowup_time - a.t) / f.early_s).ln().abs();
            let db = ((blowup_time - b.t) / f.early_s).ln().abs();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i);
    let early = match early_idx {
        Some(i) if f.k_max >= 2 => {
            let (pf, d) = profile_fit(&snaps[i], blowup_time, &rho, &modes, f.k_max)?;
            let one = pf.fits[0].evaluate(&modes[..1]);
            let many = pf.fits[f.k_max - 1].evaluate(&modes);
            let rows = d.iter().zip(one.iter().zip(&many)).map(|((r, d), (a, b))| vec![*r, *d, *a, *b]);
            write_csv(&dir.join("multi_mode_profile.csv"), &hash, &["rho", "delta", "one_mode", "k_modes"], rows)?;
            Some(pf)
        }
        _ => None,
    };

    let c1_relative_difference = center_fit.as_ref().map(|c| (late.fits[0].coeffs[0] - c.c1).abs() / c.c1.abs());
    let decay = if late_idx > 0 && blowup_time - snaps[late_idx - 1].t > 0.0 {
        let prev = rescale_snapshot(&snaps[late_idx - 1], blowup_time, &rho)?;
        let cur = rescale_snapshot(&snaps[late_idx], blowup_time, &rho)?;
        let (lo, hi) = PROFILE_SCORE_WINDOW;
        Some(DecayCheck {
            tau_a: prev.tau,
            tau_b: cur.tau,
            measured: decay_ratio(&deviation(&prev), &deviation(&cur), lo, hi),
            predicted: (lambdas[0] * (cur.tau - prev.tau)).exp(),
        })
    } else {
        None
    };

    let mut gates = Vec::new();
    for kind in &spec.gates {
        match kind {
            GateKind::Lambda1 => {
                let target = lambdas[0];
                let (measured, passed) = match &center_fit {
                    Some(c) => (format!("{:.6}", c.lambda1), ((c.lambda1 - target) / target).abs() <= g.lambda1_rel),
                    None => (center_fit_error.clone().unwrap_or_default(), false),
                };
                gates.push(Gate::new(
                    format!("fit {name}: lambda_1 from the center"),
                    measured,
                    format!("{target:.6}"),
                    format!("rel err <= {}", g.lambda1_rel),
                    passed,
                ));
            }
            GateKind::OneMode => {
                let r = late.residuals[0];
                gates.push(Gate::new(
                    format!("fit {name}: one-mode residual at T - t = {:.3e}", late.s),
                    format!("{r:.4}"),
                    "0".into(),
                    format!("<= {}", g.one_mode_residual),
                    r <= g.one_mode_residual,
                ));
            }
            GateKind::TwoMode => {
                let (measured, passed) = match &early {
                    Some(e) => {
                        let gain = e.residuals[0] / e.residuals[1];
                        (
                            format!("{:.4} -> {:.4} (x{gain:.1})", e.residuals[0], e.residuals[1]),
                            gain >= g.two_mode_gain,
                        )
                    }
                    None => ("no early snapshot".into(), false),
                };
                let at = early.as_ref().map_or(String::new(), |e| format!(" at T - t = {:.3e}", e.s));
                gates.push(Gate::new(
                    format!("fit {name}: residual one mode -> two modes{at}"),
                    measured,
                    "-".into(),
                    format!("gain >= {}", g.two_mode_gain),
                    passed,
                ));
            }
            _ => {}
        }
    }

    let report = FitReport {
        schema: "ssblowup.fit-report/1".into(),
        config_hash: hash,
        run: name.to_string(),
        mode_normalization: "w_k = v_k / rho with v_k = rho^3 + O(rho^4) at the center".into(),
        lambdas,
        center_fit,
        center_fit_error,
        blowup_time,
        late,
        early,
        c1_relative_difference,
        decay,
        gates,
    };
    write_json(&dir.join("fit_report.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- reproduce

fn gate_table(out: &mut String, gates: &[Gate]) {
    out.push_str("| check | measured | reference | criterion | result |\n|---|---|---|---|---|\n");
    for g in gates {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            g.name,
            g.measured,
            g.reference,
            g.criterion,
            if g.passed { "pass" } else { "FAIL" }
        );
    }
    out.push('\n');
}

/// Runs spectrum, Wronskian and (unless `spectrum_only`) every configured
/// run through evolve and fit, writes `report.md`, and returns all gates.
pub fn cmd_reproduce(cfg: &RunConfig, spectrum_only: bool) -> Result<Vec<Gate>> {
    let mut gates = Vec::new();
    let mut md = String::from("# Reproduction report\n\n");
    let _ = writeln!(md, "config sha256: `{}`\n", cfg.hash());

    let spec = cmd_spectrum(cfg)?;
    md.push_str("## Spectrum (continued fraction)\n\n");
    gate_table(&mut md, &spec.file.gates);
    gates.extend(spec.file.gates.iter().cloned());

    let w = cmd_wronskian(cfg)?;
    md.push_str("## Wronskian cross-check\n\n");
    gate_table(&mut md, &w.gates);
    gates.extend(w.gates.iter().cloned());

    if spectrum_only {
        md.push_str("Evolution skipped (spectrum only).\n");
    } else {
        for (name, run) in &cfg.runs {
            let _ = writeln!(md, "## Run `{name}`\n\n```\n{:?}\n```\n", run.data);
            let m = cmd_evolve(cfg, name)?;
            let _ = writeln!(md, "status: {:?}, blowup time estimate: {:?}\n", m.status, m.blowup_time_estimate);
            gate_table(&mut md, &m.gates);
            gates.extend(m.gates.iter().cloned());
            let wants_fit =
                run.gates.iter().any(|g| matches!(g, GateKind::Lambda1 | GateKind::OneMode | GateKind::TwoMode));
            if wants_fit {
                let r = cmd_fit(cfg, name)?;
                if let Some(c) = &r.center_fit {
                    let _ = writeln!(
                        md,
                        "center fit: lambda_1 = {:.6}, c_1 = {:.6}, T = {:.8}, window T - t in [{:.3e}, {:.3e}]\n",
                        c.lambda1, c.c1, c.blowup_time, c.window.0, c.window.1
                    );
                }
                if let Some(d) = r.c1_relative_difference {
                    let _ = writeln!(md, "c_1 center vs profile: relative difference {d:.3}\n");
                }
                if let Some(d) = &r.decay {
                    let _ =
                        writeln!(md, "decay of max|delta|: measured {:.4}, predicted {:.4}\n", d.measured, d.predicted);
                }
                gate_table(&mut md, &r.gates);
                gates.extend(r.gates.iter().cloned());
            }
        }
    }
    let failed = gates.iter().filter(|g| !g.passed).count();
    let _ = writeln!(md, "## Summary\n\n{} checks, {} failed.", gates.len(), failed);
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("report.md"), md)?;
    Ok(gates)
}

// ---------------------------------------------------------------- clap

#[derive(Debug, Parser)]
#[command(name = "ssblowup", version, about = "Spectrum and blowup dynamics of the self-similar attractor")]
pub struct Cli {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Scan range.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
    pub range: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub step: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues from the continued fraction.
    Spectrum {
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Wronskian scan of the two boundary-analytic branches.
    Wronskian {
        #[command(flatten)]
        scan: ScanArgs,
        #[arg(long)]
        match_point: Option<f64>,
    },
    /// Evolve one configured run.
    Evolve {
        #[arg(long, default_value = "exact")]
        run: String,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        cfl: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        no_richardson: bool,
    },
    /// Fit an evolved run.
    Fit {
        #[arg(long, default_value = "blowup")]
        run: String,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Spectrum, Wronskian, evolution and fits with one report.
    Reproduce {
        /// Skip the evolution runs.
        #[arg(long)]
        spectrum_only: bool,
    },
    /// Print the effective configuration.
    ShowConfig,
}

fn apply_scan(scan: &ScanArgs, lo: &mut f64, hi: &mut f64, step: &mut f64) {
    if let Some(r) = &scan.range {
        *lo = r[0];
        *hi = r[1];
    }
    if let Some(s) = scan.step {
        *step = s;
    }
}

/// Effective configuration: file (or defaults) with the flag overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    match &cli.command {
        Command::Spectrum { scan, tol } => {
            let s = &mut cfg.spectrum;
            apply_scan(scan, &mut s.lambda_min, &mut s.lambda_max, &mut s.step);
            if let Some(t) = tol {
                s.tol = *t;
            }
        }
        Command::Wronskian { scan, match_point } => {
            let w = &mut cfg.wronskian;
            apply_scan(scan, &mut w.lambda_min, &mut w.lambda_max, &mut w.step);
            if let Some(m) = match_point {
                w.match_point = *m;
            }
        }
        Command::Evolve { grid, cfl, t_end, no_richardson, .. } => {
            let e = &mut cfg.evolve;
            if let Some(m) = grid {
                e.grid_points = *m;
            }
            if let Some(c) = cfl {
                e.cfl = *c;
            }
            if let Some(t) = t_end {
                e.t_end = *t;
            }
            if *no_richardson {
                e.richardson = false;
            }
        }
        Command::Fit { k_max, .. } => {
            if let Some(k) = k_max {
                cfg.fit.k_max = *k;
            }
        }
        Command::Reproduce { .. } | Command::ShowConfig => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

fn print_gates(gates: &[Gate]) {
    for g in gates {
        println!(
            "[{}] {}: {} (reference {}, {})",
            if g.passed { "pass" } else { "FAIL" },
            g.name,
            g.measured,
            g.reference,
            g.criterion
        );
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = effective_config(cli)?;
    let gates = match &cli.command {
        Command::Spectrum { .. } => {
            let s = cmd_spectrum(&cfg)?;
            for r in s.file.records.iter().filter(|r| r.index.is_some()) {
                println!("lambda_{} = {:.9}  residual {:.2e}", r.index.unwrap_or(0), r.lambda, r.residual);
            }
            s.file.gates
        }
        Command::Wronskian { .. } => {
            let w = cmd_wronskian(&cfg)?;
            for z in w.roots() {
                println!("zero at lambda = {z:.9}");
            }
            w.gates
        }
        Command::Evolve { run, .. } => {
            let m = cmd_evolve(&cfg, run)?;
            println!(
                "run {run}: {:?} after {} steps, t = {:.6}, T estimate {:?}",
                m.status, m.steps, m.final_time, m.blowup_time_estimate
            );
            m.gates
        }
        Command::Fit { run, .. } => {
            let r = cmd_fit(&cfg, run)?;
            if let Some(c) = &r.center_fit {
                println!("lambda_1 = {:.6}, c_1 = {:.6}, T = {:.8}", c.lambda1, c.c1, c.blowup_time);
            }
            r.gates
        }
        Command::Reproduce { spectrum_only } => {
            let g = cmd_reproduce(&cfg, *spectrum_only)?;
            println!("report written to {}", cfg.output_dir.join("report.md").display());
            g
        }
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            Vec::new()
        }
    };
    print_gates(&gates);
    Ok(if all_passed(&gates) { EXIT_OK } else { EXIT_GATE })
}

/// Parses `args` and runs the subcommand, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::from_toml("[spectrum]\nlambda_min = -3.0\n").unwrap();
        assert_eq!(cfg.spectrum.lambda_min, -3.0);
        assert_eq!(cfg.spectrum.step, 0.01);
        assert_eq!(cfg.evolve, EvolveConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("[spectrum]\nstepp = 0.1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn zero_step_is_a_validation_error() {
        let mut cfg = RunConfig::default();
        cfg.spectrum.step = 0.0;
        let e = cfg.validate().unwrap_err();
        assert_eq!(exit_code(&e), EXIT_VALIDATION);
    }

    #[test]
    fn odd_grid_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.evolve.grid_points = 1001;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_changes_with_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.wronskian.step = 0.02;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = RunConfig { output_dir: "elsewhere".into(), ..a.clone() };
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn sample_interval_matches_grid() {
        let e = EvolveConfig::default();
        assert_eq!(e.dt(), 1.0 / 16384.0);
        assert_eq!(e.sample_every(), 8);
    }

    #[test]
    fn fmt17_roundtrips() {
        for x in [0.1, -0.588904, 1.0 / 3.0, 6.02e23, -1e-300] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn reference_gates_count_and_match() {
        let roots = [1.0, -0.5889041, -2.1815968];
        let g = reference_gates("t", &roots, -3.0, 1.5, 1e-4, Some(1e-8));
        assert_eq!(g.len(), 4);
        assert!(all_passed(&g));
        let g = reference_gates("t", &roots[..2], -3.0, 1.5, 1e-4, None);
        assert!(!all_passed(&g));
    }
}
