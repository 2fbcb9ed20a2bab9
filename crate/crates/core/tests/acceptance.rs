//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! The evolution criteria run the default configuration through the same
//! code paths as `ssblowup reproduce`.

use std::cell::{Cell, RefCell};
use std::process::ExitCode;

use proptest::test_runner::{Config, TestRunner};
use ssblowup::cli::{all_passed, cmd_evolve, cmd_fit, cmd_spectrum, cmd_wronskian, FitReport, Gate, RunConfig};
use ssblowup::contfrac::{
    continued_fraction, exact_solution, find_spectrum, gamma, DEFAULT_DEPTH, REFERENCE_EIGENVALUES,
};
use ssblowup::evolve::{init_data, FieldState, InitialData, RadialGrid, Stepper};
use ssblowup::frobenius::{eval_v0, tail_ratio, FourTermRecurrence};

struct Outcome {
    passed: bool,
    detail: String,
}

fn from_gates(gates: &[Gate]) -> Outcome {
    let failed: Vec<String> =
        gates.iter().filter(|g| !g.passed).map(|g| format!("{} = {} ({})", g.name, g.measured, g.criterion)).collect();
    let detail = if failed.is_empty() {
        gates.iter().map(|g| format!("{} = {}", g.name, g.measured)).collect::<Vec<_>>().join("; ")
    } else {
        failed.join("; ")
    };
    Outcome { passed: all_passed(gates), detail }
}

fn config(dir: &std::path::Path) -> RunConfig {
    RunConfig { output_dir: dir.to_path_buf(), ..RunConfig::default() }
}

/// Twelve eigenvalues on [-14, 1.5] matching the reference table.
fn spectrum_reproduction(cfg: &RunConfig) -> Outcome {
    match cmd_spectrum(cfg) {
        Ok(s) => {
            let mut o = from_gates(&s.file.gates);
            let ev = s.file.eigenvalues();
            o.detail = format!("{} roots found; {}", ev.len(), o.detail);
            if let Some(extra) = ev.iter().find(|l| REFERENCE_EIGENVALUES.iter().all(|r| (*l - r).abs() > 1e-3)) {
                o.detail.push_str(&format!("; unmatched root {extra:.9}"));
            }
            o
        }
        Err(e) => Outcome { passed: false, detail: e.to_string() },
    }
}

/// Series at `lambda = 1` proportional to `rho^3 / (5 + 3 rho^2)^2`.
fn gauge_identity() -> Outcome {
    let scale = eval_v0(1.0, 0.5, 1e-15).unwrap().value / (0.125 / (5.75f64 * 5.75));
    let worst = Cell::new(0.0f64);
    let mut runner = TestRunner::new(Config { cases: 2000, failure_persistence: None, ..Config::default() });
    let res = runner.run(&(0.05f64..0.95), |rho| {
        let v = eval_v0(1.0, rho, 1e-15).unwrap().value;
        let exact = scale * rho.powi(3) / (5.0 + 3.0 * rho * rho).powi(2);
        let rel = (v / exact - 1.0).abs();
        worst.set(worst.get().max(rel));
        proptest::prop_assert!(rel < 1e-8, "rho = {}, rel = {:e}", rho, rel);
        Ok(())
    });
    Outcome { passed: res.is_ok(), detail: format!("scale {scale:.12}, max rel err {:.2e}", worst.get()) }
}

/// Continued fraction independent of the seed away from reduction poles.
fn pincherle_robustness() -> Outcome {
    let poles: Vec<f64> = (1..=5).map(|k| 1.0 - 16.0 * k as f64 / 5.0).collect();
    let (mut worst, mut at, mut count) = (0.0f64, f64::NAN, 0usize);
    let mut failures = Vec::new();
    let n = 15500;
    for i in 0..=n {
        let l = -14.0 + 15.5 * i as f64 / n as f64;
        if poles.iter().any(|p| (l - p).abs() < 0.05) {
            continue;
        }
        let vals: Vec<_> = [0.0, -0.6, 1.0].iter().map(|&s| continued_fraction(l, DEFAULT_DEPTH, s)).collect();
        match (&vals[0], &vals[1], &vals[2]) {
            (Ok(a), Ok(b), Ok(c)) => {
                let d = (a - b).abs().max((c - b).abs()) / b.abs().max(1.0);
                if d >= worst {
                    worst = d;
                    at = l;
                }
                count += 1;
            }
            _ => failures.push(l),
        }
    }
    Outcome {
        passed: worst <= 1e-9 && failures.is_empty(),
        detail: format!("{count} points, max spread {worst:.2e} at lambda {at:.3}, {} failures", failures.len()),
    }
}

/// Closed-form solution of the four-term recurrence.
fn exact_solution_identity() -> Outcome {
    let worst = Cell::new(0.0f64);
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    let res = runner.run(&(0i64..2000, -14.0f64..1.5), |(n, lambda)| {
        let rec = FourTermRecurrence::new(lambda);
        // The relation is homogeneous, so the common factor (-3/5)^n is divided
        // out; it underflows to subnormals near n = 1400.
        let g = gamma(lambda);
        let a = [0, 1, 2, 3].map(|k| (-0.6f64).powi(k as i32) * ((n + k) as f64 + 1.0 + g));
        if n < 400 {
            let direct = exact_solution(n + 1, lambda) / exact_solution(n, lambda);
            proptest::prop_assert!((direct - a[1] / a[0]).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        let (r, scale) = rec.residual(n, a);
        let rel = r.abs() / scale;
        worst.set(worst.get().max(rel));
        proptest::prop_assert!(rel <= 1e-12, "n = {}, lambda = {}, rel = {:e}", n, lambda, rel);
        Ok(())
    });
    Outcome { passed: res.is_ok(), detail: format!("10000 cases, max rel residual {:.2e}", worst.get()) }
}

/// Wronskian zeros against continued-fraction eigenvalues on [-7, 1.5].
fn cross_method(cfg: &RunConfig) -> Outcome {
    match cmd_wronskian(cfg) {
        Ok(w) => {
            let mut o = from_gates(&w.gates);
            if let Some(c) = &w.cross_check {
                o.detail = format!("{} zeros, max |diff| {:.2e}", w.roots().len(), c.max_difference);
            } else {
                o.passed = false;
                o.detail = "no spectrum.json to cross-check against".into();
            }
            o
        }
        Err(e) => Outcome { passed: false, detail: e.to_string() },
    }
}

/// Tail ratio tends to 1 between eigenvalues and to -3/5 at them.
fn tail_dichotomy() -> Outcome {
    let refined = find_spectrum(-13.5, 1.5, 0.01, 1e-13).eigenvalues();
    let eig: Vec<f64> = REFERENCE_EIGENVALUES
        .iter()
        .map(|r| *refined.iter().min_by(|a, b| (*a - r).abs().total_cmp(&(*b - r).abs())).unwrap())
        .collect();
    let mut worst_mid = 0.0f64;
    let mut worst_eig = 0.0f64;
    for w in eig.windows(2) {
        worst_mid = worst_mid.max((tail_ratio(0.5 * (w[0] + w[1]), 2000) - 1.0).abs());
    }
    for &l in &eig {
        worst_eig = worst_eig.max((tail_ratio(l, 2000) + 0.6).abs());
    }
    Outcome {
        passed: worst_mid < 0.05 && worst_eig < 0.05,
        detail: format!("max |r - 1| midway {worst_mid:.2e}, max |r + 3/5| at eigenvalues {worst_eig:.2e}"),
    }
}

fn evolve_gates(cfg: &RunConfig, run: &str) -> Outcome {
    match cmd_evolve(cfg, run) {
        Ok(m) => {
            let mut o = from_gates(&m.gates);
            o.detail = format!("T estimate {:?}; {}", m.blowup_time_estimate, o.detail);
            o
        }
        Err(e) => Outcome { passed: false, detail: e.to_string() },
    }
}

fn fit_report(cfg: &RunConfig, run: &str) -> Result<FitReport, String> {
    cmd_evolve(cfg, run).map_err(|e| e.to_string())?;
    cmd_fit(cfg, run).map_err(|e| e.to_string())
}

fn select(report: &Result<FitReport, String>, key: &str) -> Outcome {
    match report {
        Ok(r) => {
            let gates: Vec<Gate> = r.gates.iter().filter(|g| g.name.contains(key)).cloned().collect();
            if gates.is_empty() {
                return Outcome { passed: false, detail: format!("run {} has no {key} gate", r.run) };
            }
            let mut o = from_gates(&gates);
            if let Some(c) = &r.center_fit {
                o.detail = format!("{} (run {}, c1 = {:.4}, T = {:.7})", o.detail, r.run, c.c1, c.blowup_time);
            }
            o
        }
        Err(e) => Outcome { passed: false, detail: e.clone() },
    }
}

fn both(a: Outcome, b: Outcome) -> Outcome {
    Outcome { passed: a.passed && b.passed, detail: format!("{}; {}", a.detail, b.detail) }
}

/// Self-convergence of the solver on a smooth interval.
fn solver_order() -> Outcome {
    let evolve = |data: &InitialData, m: usize, t_end: f64| -> FieldState {
        let g = RadialGrid::new(m, 2.0).unwrap();
        let mut st = init_data(data, &g).unwrap();
        let dt = 0.5 * g.dr();
        let n = (t_end / dt).round() as usize;
        assert!((n as f64 * dt - t_end).abs() < 1e-12, "t_end must be a whole number of steps");
        let mut stepper = Stepper::new(st.u.len(), st.dr);
        for k in 1..=n {
            stepper.step(&mut st, dt, k as f64 * dt).unwrap();
        }
        st
    };
    let factors = RefCell::new(Vec::new());
    let mut runner = TestRunner::new(Config { cases: 6, failure_persistence: None, ..Config::default() });
    let res = runner.run(&(0.5f64..1.2, 1.5f64..3.0), |(amplitude, sigma)| {
        let data = InitialData::GaussianLump { amplitude, r0: 0.0, sigma, r_cut: 1.0, width: 0.5 };
        let [a, b, c] = [256, 512, 1024].map(|m| evolve(&data, m, 0.375));
        let diff = |x: &FieldState, y: &FieldState, stride: usize| {
            (0..x.u.len()).map(|i| (x.u[i] - y.u[stride * i]).abs()).fold(0.0f64, f64::max)
        };
        let q = diff(&a, &b, 2) / diff(&b, &c, 2).max(f64::MIN_POSITIVE);
        factors.borrow_mut().push(q);
        proptest::prop_assert!((q - 4.0).abs() <= 0.5, "A = {}, sigma = {}, factor {}", amplitude, sigma, q);
        Ok(())
    });
    let detail = factors.borrow().iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>().join(", ");
    Outcome { passed: res.is_ok(), detail: format!("factors {detail}") }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = config(dir.path());
    let mut lines = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        let line = format!("criterion {n:>2} [{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        println!("{line}");
        lines.push(o.passed);
    };
    report(1, "spectrum reproduction", spectrum_reproduction(&cfg));
    report(2, "gauge-mode identity", gauge_identity());
    report(3, "Pincherle robustness", pincherle_robustness());
    report(4, "exact-solution identity", exact_solution_identity());
    report(5, "cross-method agreement", cross_method(&cfg));
    report(6, "tail dichotomy", tail_dichotomy());
    report(7, "exact blowup tracking", evolve_gates(&cfg, "exact"));
    let blowup = fit_report(&cfg, "blowup");
    let profile = fit_report(&cfg, "profile");
    report(8, "dynamical rate", select(&blowup, "lambda_1"));
    report(9, "one-mode profile law", both(select(&blowup, "one-mode"), select(&profile, "two modes")));
    report(10, "solver order", solver_order());
    let failed = lines.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
