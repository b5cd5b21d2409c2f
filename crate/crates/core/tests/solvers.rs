use std::sync::OnceLock;
use std::time::Instant;

use krs_core::ansatz::BaseFactor;
use krs_core::oracle::pinned_constants;
use krs_core::solver::{
    einstein_defect, gauge_normalize, identity_suite, profile_distance, solve_both, solve_momentum, solve_shooting,
};
use krs_core::{BundleConfig, CurvatureConstants, GridScheme, Profile, SolitonSolution, SolverOptions};

fn constants() -> &'static CurvatureConstants {
    static C: OnceLock<CurvatureConstants> = OnceLock::new();
    C.get_or_init(|| pinned_constants(2024).unwrap())
}

fn koiso_cao() -> &'static (SolitonSolution, SolitonSolution) {
    static S: OnceLock<(SolitonSolution, SolitonSolution)> = OnceLock::new();
    S.get_or_init(|| solve_both(&BundleConfig::koiso_cao(), constants(), &SolverOptions::default()).unwrap())
}

fn two_factor() -> BundleConfig {
    let f = BaseFactor::new(2, 2.0, 1, 1.0).unwrap();
    BundleConfig::new(vec![f, BaseFactor { kappa: 3.0, ..f }]).unwrap()
}

#[test]
fn koiso_cao_both_methods_meet_residual_targets() {
    let (m, s) = koiso_cao();
    for sol in [m, s] {
        println!("{:?}: c = {} T = {} {:?}", sol.method, sol.c_slope, sol.grid.length(), sol.residuals);
        assert!(sol.residuals.soliton() < 1e-8, "{:?}", sol.residuals);
        assert!(sol.residuals.kaehler < 1e-8);
        assert!(sol.residuals.normalization < 1e-10);
        sol.grid.validate(1e-9).unwrap();
    }
    assert!(m.residuals.cross_method.unwrap() < 1e-6);
    assert!((m.c_slope - s.c_slope).abs() < 1e-6);
    assert!(m.c_slope > 0.0);
}

#[test]
fn koiso_cao_identities_hold() {
    let (m, _) = koiso_cao();
    let r = &m.residuals;
    assert!(r.drift_laplacian < 1e-6);
    assert!(r.trace_identity < 1e-6);
    assert!(r.hamilton_constancy < 1e-6);
    assert!(r.weighted_divergence < 1e-8);
    assert!((r.hamilton_constant - 2.0).abs() < 1e-6);
}

#[test]
fn forcing_zero_potential_leaves_a_residual() {
    let (m, _) = koiso_cao();
    assert!(einstein_defect(m).unwrap() > 1e-2);
}

#[test]
fn corrupted_potential_fails_the_suite_but_keeps_divergence() {
    let (m, _) = koiso_cao();
    let g = &m.grid;
    // a bump with vanishing end slopes keeps the divergence identity intact
    let len = g.length();
    let w = std::f64::consts::PI / len;
    let bump = Profile::from_fn(&g.t, |t| {
        (0.01 * (w * t).cos(), -0.01 * w * (w * t).sin(), -0.01 * w * w * (w * t).cos())
    });
    let mut u = g.u.clone();
    for k in 0..u.len() {
        u.value[k] += bump.value[k];
        u.d1[k] += bump.d1[k];
        u.d2[k] += bump.d2[k];
    }
    let mut bad = m.clone();
    bad.grid = g.with_potential(u);
    let r = identity_suite(&bad).unwrap();
    assert!(r.drift_laplacian > 1e-3);
    assert!(r.trace_identity > 1e-3);
    assert!(r.weighted_divergence < 1e-8);
    // linear drift: boundary slopes no longer vanish
    let mut bad = m.clone();
    let lin = Profile::from_fn(&g.t, |t| (0.01 * t, 0.01, 0.0));
    let mut u = g.u.clone();
    for k in 0..u.len() {
        u.value[k] += lin.value[k];
        u.d1[k] += lin.d1[k];
    }
    bad.grid = g.with_potential(u);
    let r = identity_suite(&bad).unwrap();
    assert!(r.drift_laplacian > 1e-3 && r.hamilton_constancy > 1e-3);
}

#[test]
fn gauge_normalization_is_idempotent_and_covariant() {
    let (m, _) = koiso_cao();
    let again = gauge_normalize(m);
    assert!((again.gauge_shift - m.gauge_shift).abs() < 1e-12);
    let mut shifted = m.clone();
    shifted.grid = m.grid.with_potential(m.grid.u.shifted(5.0));
    let back = gauge_normalize(&shifted);
    assert!((back.gauge_shift - m.gauge_shift - 5.0).abs() < 1e-12);
}

#[test]
fn negative_twist_mirrors_the_solution() {
    let (m, _) = koiso_cao();
    let cfg = BundleConfig::new(vec![BaseFactor::new(2, 2.0, -1, 0.0).unwrap()]).unwrap();
    let opts = SolverOptions {
        nodes: 257,
        ..Default::default()
    };
    let mirror = solve_momentum(&cfg, constants(), &opts).unwrap();
    assert!((mirror.c_slope + m.c_slope).abs() < 1e-12);
    let g = &mirror.grid;
    let len = g.length();
    for (k, &t) in g.t.iter().enumerate() {
        let tm = len - t;
        assert!((g.f.value[k] - m.grid.interpolate(&m.grid.f.value, tm)).abs() < 1e-9);
        assert!((g.u.value[k] - m.grid.interpolate(&m.grid.u.value, tm)).abs() < 1e-9);
        assert!((g.l[0].value[k] - m.grid.interpolate(&m.grid.l[0].value, tm)).abs() < 1e-9);
    }
}

#[test]
fn two_factor_config_solves_by_both_methods() {
    let (m, s) = solve_both(&two_factor(), constants(), &SolverOptions::default()).unwrap();
    println!("two-factor: c = {} {:?}", m.c_slope, m.residuals);
    assert!(m.residuals.soliton() < 1e-8);
    assert!(s.residuals.soliton() < 1e-8);
    assert!(m.residuals.cross_method.unwrap() < 1e-6);
}

#[test]
fn refinement_changes_profiles_below_tolerance() {
    let (m, _) = koiso_cao();
    let coarse = solve_momentum(
        &BundleConfig::koiso_cao(),
        constants(),
        &SolverOptions {
            nodes: 1024,
            ..Default::default()
        },
    )
    .unwrap();
    let d = profile_distance(&coarse.grid, &m.grid);
    assert!(d < 1e-8, "{d:e}");
}

#[test]
fn uniform_scheme_is_supported() {
    let sol = solve_momentum(
        &BundleConfig::koiso_cao(),
        constants(),
        &SolverOptions {
            nodes: 1025,
            scheme: GridScheme::Uniform,
            ..Default::default()
        },
    )
    .unwrap();
    println!("uniform: {:?}", sol.residuals);
    assert!(sol.residuals.soliton() < 1e-6);
}

#[test]
fn each_method_runs_quickly() {
    let opts = SolverOptions::default();
    let cfg = BundleConfig::koiso_cao();
    let start = Instant::now();
    solve_momentum(&cfg, constants(), &opts).unwrap();
    let m = start.elapsed().as_secs_f64();
    let start = Instant::now();
    solve_shooting(&cfg, constants(), &opts).unwrap();
    let s = start.elapsed().as_secs_f64();
    println!("momentum {m:.3}s shooting {s:.3}s");
    assert!(m < 10.0 && s < 10.0);
}

fn soliton_residual_at(nodes: usize, scheme: GridScheme) -> f64 {
    let opts = SolverOptions {
        nodes,
        scheme,
        ..Default::default()
    };
    solve_momentum(&BundleConfig::koiso_cao(), constants(), &opts)
        .unwrap()
        .residuals
        .soliton()
}

#[test]
fn chebyshev_residual_reaches_its_floor_early() {
    let sizes = [16, 24, 32, 48, 64, 128, 256, 512, 1024, 2048];
    let r: Vec<f64> = sizes.iter().map(|&n| soliton_residual_at(n, GridScheme::Chebyshev)).collect();
    let floor = r.iter().copied().fold(f64::INFINITY, f64::min);
    // spectral decay: every refinement above the floor gains more than a decade
    for w in r.windows(2).take_while(|w| w[0] > 10.0 * floor) {
        assert!(w[1] < 0.1 * w[0], "{w:?}");
    }
    let at512 = r[sizes.iter().position(|&n| n == 512).unwrap()];
    assert!(at512 < 10.0 * floor && at512 < 1e-8);
}

#[test]
fn uniform_residual_is_fourth_order() {
    let r: Vec<f64> = [128, 256, 512, 1024]
        .iter()
        .map(|&n| soliton_residual_at(n, GridScheme::Uniform))
        .collect();
    for w in r.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.5, "observed order {order}");
    }
}
