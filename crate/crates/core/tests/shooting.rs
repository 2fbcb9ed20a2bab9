use ssblowup::contfrac::REFERENCE_EIGENVALUES;
use ssblowup::shooting::{integrate_from_one_with, integrate_from_zero_with, wronskian_scan, ShootingConfig};

fn roots(step: f64, match_point: f64) -> Vec<f64> {
    let cfg = ShootingConfig { match_point, ..ShootingConfig::default() };
    wronskian_scan(-7.0, 1.5, step, &cfg).unwrap().roots()
}

#[test]
fn zeros_on_the_plotted_window_match_the_table() {
    let found = roots(0.01, 0.5);
    assert_eq!(found.len(), 6, "{found:?}");
    let mut found = found;
    found.sort_by(|a, b| b.total_cmp(a));
    for (z, r) in found.iter().zip(&REFERENCE_EIGENVALUES) {
        assert!((z - r).abs() < 1e-3, "{z} vs {r}");
    }
}

#[test]
fn zeros_do_not_depend_on_the_match_point() {
    let a = roots(0.01, 0.4);
    let b = roots(0.01, 0.6);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }
}

#[test]
fn step_halving_keeps_refined_zeros() {
    let a = roots(0.02, 0.5);
    let b = roots(0.01, 0.5);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn branches_are_dependent_at_zeros() {
    let cfg = ShootingConfig::default();
    for l in roots(0.01, 0.5) {
        let v0 = integrate_from_zero_with(l, 0.5, &cfg).unwrap();
        let v1 = integrate_from_one_with(l, 0.5, &cfg).unwrap();
        let (q, dq) = (v0.v / v1.v, v0.dv / v1.dv);
        assert!((q / dq - 1.0).abs() < 1e-5, "lambda {l}: {q} vs {dq}");
    }
}
