use ssblowup::evolve::{init_data, FieldState, InitialData, RadialGrid, Stepper};
use ssblowup::model::u0_profile;

fn run(mut st: FieldState, dt: f64, steps: usize, mut each: impl FnMut(&FieldState)) -> FieldState {
    let mut stepper = Stepper::new(st.u.len(), st.dr);
    let t0 = st.t;
    for k in 1..=steps {
        stepper.step(&mut st, dt, t0 + k as f64 * dt).unwrap();
        each(&st);
    }
    st
}

#[test]
fn vacuum_survives_many_steps() {
    let g = RadialGrid::new(64, 2.0).unwrap();
    let dt = 0.5 * g.dr();
    let st = run(FieldState::vacuum(&g), dt, 100_000, |_| {});
    let worst = st.u.iter().map(|u| (u - 1.0).abs()).chain(st.p.iter().map(|p| p.abs())).fold(0.0, f64::max);
    assert!(worst <= 1e-13, "{worst}");
}

#[test]
fn outer_changes_do_not_reach_inside_the_cone() {
    let g = RadialGrid::new(1024, 4.0).unwrap();
    let dt = 0.5 * g.dr();
    let base = InitialData::GaussianLump { amplitude: 0.8, r0: 0.0, sigma: 1.0, r_cut: 1.0, width: 0.5 };
    let wide = InitialData::GaussianLump { amplitude: 0.8, r0: 0.0, sigma: 1.0, r_cut: 2.5, width: 0.5 };
    // Both data agree on r < 1.
    let steps = 256;
    let t = steps as f64 * dt;
    let a = run(init_data(&base, &g).unwrap(), dt, steps, |_| {});
    let b = run(init_data(&wide, &g).unwrap(), dt, steps, |_| {});
    let inside = ((1.0 - t) / g.dr()) as usize;
    // The discrete front is dispersive and smeared over a few cells.
    let margin = 20;
    let worst = (0..inside - margin).map(|i| (a.u[i] - b.u[i]).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-15, "{worst}");
}

#[test]
fn truncated_data_tracks_the_attractor() {
    let g = RadialGrid::new(4096, 2.0).unwrap();
    let dr = g.dr();
    let dt = 0.5 * dr;
    let data = InitialData::TruncatedSelfSimilar { t0: 1.0, r_cut: 1.3, width: 0.3 };
    let mut worst = 0.0f64;
    let mut checked = 0;
    let last = ((1.0 - 20.0 * dr) / dt) as usize;
    run(init_data(&data, &g).unwrap(), dt, last, |st| {
        let s = 1.0 - st.t;
        for (i, u) in st.u.iter().enumerate() {
            let rho = st.r(i) / s;
            if rho > 0.9 {
                break;
            }
            worst = worst.max((u - u0_profile(rho)).abs());
        }
        checked += 1;
    });
    assert!(checked > 0);
    assert!(worst <= 1e-3, "{worst}");
}
