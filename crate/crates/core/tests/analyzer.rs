use approx::assert_relative_eq;
use mems_singular::analyzer::*;
use mems_singular::cylinder::{solve_cylinder, CylinderConfig, CylinderField, Equation, ThetaProfile};
use mems_singular::modes::RefinedParams;
use mems_singular::phase_plane::{construct_orbit, equilibrium, PhaseParams};
use proptest::prelude::*;

#[test]
fn forced_limit_in_upper_window() {
    let mut cfg = CylinderConfig::new(3.5, 1.0, 1.0);
    cfg.boundary_t0 = ThetaProfile::Perturbed { amplitude: 0.05, k: 4, phase: 0.0 };
    let field = solve_cylinder(&cfg).unwrap();
    let est = limit_coefficient(&field, &RefinedParams::new(3.5, 1.0, 1.0).unwrap()).unwrap();
    assert_relative_eq!(est.value, est.predicted, max_relative = 0.01);
    assert!(est.error < 0.01 * est.predicted);
    let mean = fit_mode_decay(&field, 0, None).unwrap();
    assert_relative_eq!(mean.fitted_exponent, mean.predicted_exponent.unwrap(), max_relative = 0.05);
}

#[test]
fn limit_coefficient_needs_forced_regime() {
    assert!(in_forced_regime(2.0) && in_forced_regime(3.5));
    assert!(!in_forced_regime(0.0) && !in_forced_regime(3.0));
    let field = solve_cylinder(&CylinderConfig::new(0.0, 1.0, 0.5)).unwrap();
    assert!(matches!(
        limit_coefficient(&field, &RefinedParams::new(0.0, 1.0, 0.5).unwrap()),
        Err(AnalyzerError::NotApplicable(_))
    ));
}

#[test]
fn slope_check_on_exact_singular_solutions() {
    let r: Vec<f64> = (0..40).map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / 39.0)).collect();
    let linear: Vec<f64> = r.clone();
    let chk = slope_check(&r, &linear, 1.0).unwrap();
    assert!(chk.pass);
    assert_relative_eq!(chk.fitted_slope, 1.0, max_relative = 1e-12);
    let square: Vec<f64> = r.iter().map(|x| x * x).collect();
    let chk = slope_check(&r, &square, 4.0).unwrap();
    assert!(chk.pass);
    assert_relative_eq!(chk.fitted_slope, 2.0, max_relative = 1e-12);
    let control: Vec<f64> = r.iter().map(|x| x.powf(0.9)).collect();
    assert!(!slope_check(&r, &control, 1.0).unwrap().pass);
}

#[test]
fn mode_fit_calibration_on_synthetic_field() {
    let eq = Equation::new(0.0, 1.0, 0.0);
    let t_grid: Vec<f64> = (0..=300).map(|i| 0.1 * i as f64).collect();
    let theta: Vec<f64> = (0..16).map(|j| j as f64 * std::f64::consts::TAU / 16.0).collect();
    let rate = 0.6;
    let values = t_grid
        .iter()
        .map(|t| theta.iter().map(|th| eq.m + 0.05 * (-rate * t).exp() * (2.0 * th).cos()).collect())
        .collect();
    let field = CylinderField { alpha: 0.0, mu: eq.mu, equation: Some(eq), t_grid, theta, values, kmax: 7, report: None };
    let fit = fit_mode_decay(&field, 2, None).unwrap();
    assert!((fit.fitted_exponent - rate).abs() <= 1e-6 * rate);
    assert_eq!(fit.window, (10.0, 20.0));
}

#[test]
fn slope_check_on_singular_profile() {
    let alpha = 1.0;
    let r: Vec<f64> = (0..60).map(|i| 10f64.powf(-3.0 + 3.0 * i as f64 / 59.0)).collect();
    let u: Vec<f64> = r.iter().map(|x| 0.8 * x * (1.0 + 0.05 * x)).collect();
    let chk = slope_check(&r, &u, alpha).unwrap();
    assert!(chk.pass, "slope {}", chk.fitted_slope);
    assert_relative_eq!(chk.c1_hat, 0.8 * (1.0 + 0.05e-3), max_relative = 1e-12);
    assert_relative_eq!(chk.c2_hat, 0.84, max_relative = 1e-12);
    let steeper: Vec<f64> = r.iter().map(|x| x.powf(1.1)).collect();
    assert!(!slope_check(&r, &steeper, alpha).unwrap().pass);
}

#[test]
fn slope_check_rejects_short_range() {
    let r = [0.1, 0.5, 1.0];
    let u = [0.1, 0.5, 1.0];
    assert!(matches!(slope_check(&r, &u, 1.0), Err(AnalyzerError::InsufficientRange { .. })));
    assert!(matches!(slope_check(&r, &[0.1, -0.5, 1.0], 1.0), Err(AnalyzerError::InvalidInput(_))));
}

#[test]
fn loj_is_deterministic_per_seed() {
    let p = PhaseParams::from_alpha(0.0, 1.0).unwrap();
    let w = vec![equilibrium(&p); 64];
    let a = loj_estimate(&p, &w, 0.01, 200, 7).unwrap();
    let b = loj_estimate(&p, &w, 0.01, 200, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.theta_hat, 0.5);
}

#[test]
fn loj_around_orbit() {
    let p = PhaseParams::from_alpha(1.2, 1.0).unwrap();
    let o = construct_orbit(&p, 2, 256).unwrap();
    let est = loj_estimate(&p, &o.w, 0.005, 200, 0).unwrap();
    assert!(est.theta_hat >= 0.45);
}

#[test]
fn loj_rejects_nonstationary_reference() {
    let p = PhaseParams::from_alpha(0.0, 1.0).unwrap();
    let w = vec![1.2 * equilibrium(&p); 64];
    assert!(matches!(loj_estimate(&p, &w, 0.01, 10, 0), Err(AnalyzerError::InvalidInput(_))));
    let m = equilibrium(&p);
    assert!(loj_estimate(&p, &vec![m; 64], m, 10, 0).is_err());
}

#[test]
fn log_amplitude_csv() {
    let mut buf = Vec::new();
    write_log_amplitude_csv(&[0.0, 1.0], &[1.0, 0.5], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 3);
}

proptest! {
    #[test]
    fn exponential_decay_is_recovered(rate in 0.05f64..3.0, c_end in -5.0f64..5.0, t0 in 0.0f64..5.0) {
        let c = c_end + rate * (t0 + 9.9);
        let t: Vec<f64> = (0..100).map(|i| t0 + 0.1 * i as f64).collect();
        let amp: Vec<f64> = t.iter().map(|x| (c - rate * x).exp()).collect();
        let fit = fit_decay(&t, &amp, (t0, t0 + 9.9)).unwrap();
        prop_assert!((fit.fitted_exponent - rate).abs() < 1e-10 * rate.max(1.0));
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn resampling_preserves_band_limited_profiles(a in -1.0f64..1.0, b in -1.0f64..1.0, n in 16usize..64) {
        let w: Vec<f64> = (0..16).map(|j| {
            let t = j as f64 * std::f64::consts::TAU / 16.0;
            2.0 + a * t.cos() + b * (3.0 * t).sin()
        }).collect();
        let r = resample_profile(&w, n);
        for (j, x) in r.iter().enumerate() {
            let t = j as f64 * std::f64::consts::TAU / n as f64;
            prop_assert!((x - (2.0 + a * t.cos() + b * (3.0 * t).sin())).abs() < 1e-12);
        }
    }
}
