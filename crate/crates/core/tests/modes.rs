use approx::assert_relative_eq;
use mems_singular::modes::*;
use num_complex::Complex64;
use proptest::prelude::*;

/// Exact bounded response to `Re(e^{st})`: `Re(e^{st}/(s² − 2μs + 3μ² − k²))`.
fn exact_response(k: i32, mu: f64, s: Complex64, t: f64) -> f64 {
    let denom = s * s - 2.0 * mu * s + 3.0 * mu * mu - (k * k) as f64;
    ((s * t).exp() / denom).re
}

fn mode_residual(k: i32, mu: f64, forcing: &Forcing, t: f64, t0: f64, a_t0: f64) -> f64 {
    let h = 0.01;
    let a = |x: f64| bounded_mode_value(k, mu, forcing, x, t0, a_t0).unwrap();
    let (a2m, am, a0, ap, a2p) = (a(t - 2.0 * h), a(t - h), a(t), a(t + h), a(t + 2.0 * h));
    let d2 = (-a2p + 16.0 * ap - 30.0 * a0 + 16.0 * am - a2m) / (12.0 * h * h);
    let d1 = (-a2p + 8.0 * ap - 8.0 * am + a2m) / (12.0 * h);
    d2 - 2.0 * mu * d1 + (3.0 * mu * mu - (k * k) as f64) * a0 - (forcing.g)(t)
}

/// Second-order FD solve of `a'' − 2μa' + (3μ² − k²)a = g` on `[0, t_end]` with
/// `a(0) = left`, `a(t_end) = 0`, by the Thomas algorithm.
fn bvp_truncated(k: i32, mu: f64, g: &dyn Fn(f64) -> f64, left: f64, t_end: f64, n: usize) -> Vec<(f64, f64)> {
    let h = t_end / n as f64;
    let c = 3.0 * mu * mu - (k * k) as f64;
    let lower = 1.0 / (h * h) + mu / h;
    let diag = -2.0 / (h * h) + c;
    let upper = 1.0 / (h * h) - mu / h;
    let m = n - 1;
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for i in 0..m {
        let t = (i + 1) as f64 * h;
        let mut rhs = g(t);
        if i == 0 {
            rhs -= lower * left;
        }
        let denom = diag - if i > 0 { lower * cp[i - 1] } else { 0.0 };
        cp[i] = upper / denom;
        dp[i] = (rhs - if i > 0 { lower * dp[i - 1] } else { 0.0 }) / denom;
    }
    let mut a = vec![0.0; n + 1];
    a[0] = left;
    for i in (0..m).rev() {
        a[i + 1] = dp[i] - if i + 1 < m { cp[i] * a[i + 2] } else { 0.0 };
    }
    a.into_iter().enumerate().map(|(i, x)| (i as f64 * h, x)).collect()
}

#[test]
fn regimes_follow_discriminant() {
    let mu = 1.0;
    assert_eq!(mode_regime(1, mu).0, ModeRegime::Oscillatory);
    assert_eq!(mode_regime(2, mu).0, ModeRegime::Supercritical);
    assert_eq!(mode_regime(0, 1.5).0, ModeRegime::Oscillatory);
    let crit = 2f64.sqrt().recip();
    assert_eq!(mode_regime(1, crit), (ModeRegime::Critical, true));
    // √2μ < 1 < √3μ
    assert_eq!(mode_regime(1, 0.65).0, ModeRegime::Subcritical);
}

#[test]
fn damped_oscillating_forcing_matches_exact_response() {
    let s = Complex64::new(-0.7, 2.0);
    let g = move |t: f64| (s * t).exp().re;
    let forcing = Forcing { g: &g, decay_rate: 0.7 };
    for (k, mu) in [(0, 1.0), (1, 1.0), (1, 0.65), (1, 2f64.sqrt().recip())] {
        for t in [0.0, 0.5, 3.0] {
            let got = bounded_mode_value(k, mu, &forcing, t, 0.0, 0.0).unwrap();
            let want = exact_response(k, mu, s, t);
            assert_relative_eq!(got, want, epsilon = 1e-10 * (s.re * t).exp());
        }
    }
}

#[test]
fn pressure_mode_limit_is_closed_form() {
    for (alpha, p) in [(0.0, 1.0), (2.0, 0.5), (3.9, 3.0)] {
        let params = RefinedParams::new(alpha, 1.0, p).unwrap();
        let beta = params.beta();
        let amp = pressure_forcing_amplitude(p);
        let g = move |t: f64| amp * (-beta * t).exp();
        let forcing = Forcing { g: &g, decay_rate: beta };
        let exact = exact_response(0, params.mu, Complex64::new(-beta, 0.0), 0.0) * amp / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(exact, forced_limit_coefficient(alpha, p), max_relative = 1e-12);
        let got = bounded_mode_value(0, params.mu, &forcing, 2.0, 0.0, 0.0).unwrap() * (beta * 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(got, forced_limit_coefficient(alpha, p), max_relative = 1e-10);
    }
}

#[test]
fn supercritical_mode_is_anchored_and_decays() {
    let mu = 0.8;
    let g = |t: f64| 0.3 * (-2.5 * t).exp();
    let forcing = Forcing { g: &g, decay_rate: 2.5 };
    let sol = bounded_mode_solution(3, mu, &forcing, &[1.0, 2.0, 5.0, 10.0, 20.0], 0.4).unwrap();
    assert_eq!(sol.regime, ModeRegime::Supercritical);
    assert_relative_eq!(sol.a_k[0], 0.4, epsilon = 1e-12);
    let rate = free_decay_rate(3, mu);
    let forced = |t: f64| 0.3 * exact_response(3, mu, Complex64::new(-2.5, 0.0), t);
    for (t, a) in sol.t_grid.iter().zip(&sol.a_k) {
        let want = (0.4 - forced(1.0)) * (-rate * (t - 1.0)).exp() + forced(*t);
        assert_relative_eq!(*a, want, epsilon = 1e-12, max_relative = 1e-9);
    }
    assert!(bounded_mode_value(3, mu, &forcing, 0.5, 1.0, 0.4).is_err());
}

#[test]
fn free_solution_without_forcing() {
    let mu = 1.0;
    let zero = Forcing::zero();
    let sol = bounded_mode_solution(2, mu, &zero, &[0.0, 1.0, 4.0], 1.0).unwrap();
    for (t, a) in sol.t_grid.iter().zip(&sol.a_k) {
        assert_relative_eq!(*a, (-free_decay_rate(2, mu) * t).exp(), max_relative = 1e-12);
    }
    let slaved = bounded_mode_value(1, mu, &zero, 3.0, 0.0, 0.0).unwrap();
    assert_eq!(slaved, 0.0);
}

#[test]
fn resonant_alpha_is_rejected() {
    let alpha = 3f64.sqrt() - 2.0;
    assert!(matches!(RefinedParams::new(alpha, 1.0, 0.0), Err(ModeError::ResonanceExcluded { k: 2, .. })));
    assert!(RefinedParams::new(0.0, -1.0, 0.0).is_err());
}

#[test]
fn prediction_cases() {
    let [b2, bm, b3] = case_boundaries();
    let pure = predicted_decay(&RefinedParams::new(0.0, 1.0, 0.0).unwrap()).unwrap();
    assert_eq!((pure.case, pure.k), (1, 2));
    assert_relative_eq!(pure.t_exponent, (2.0 * 7f64.sqrt() - 2.0) / 3.0, max_relative = 1e-14);
    let forced = predicted_decay(&RefinedParams::new(0.5 * (b2 + bm), 1.0, 1.0).unwrap()).unwrap();
    assert_eq!((forced.case, forced.limit_shape), (3, LimitShape::Constant));
    let past = predicted_decay(&RefinedParams::new(0.5 * (bm + b3), 1.0, 1.0).unwrap()).unwrap();
    assert_eq!((past.case, past.k), (1, 3));
    let mixed = predicted_decay(&RefinedParams::new(bm, 1.0, 1.0).unwrap()).unwrap();
    assert_eq!((mixed.case, mixed.limit_shape), (4, LimitShape::MixedMode3));
    assert!(matches!(
        predicted_decay(&RefinedParams::new(-1.0, 1.0, 1.0).unwrap()),
        Err(ModeError::UncoveredCase { .. })
    ));
}

#[test]
fn mode_csv_has_header() {
    let sol = bounded_mode_solution(2, 1.0, &Forcing::zero(), &[0.0, 1.0], 1.0).unwrap();
    let mut buf = Vec::new();
    sol.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("t,a_k"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn case_formulas_agree_with_truncated_bvp() {
    let g = |t: f64| (-0.5 * t).exp() * (1.0 + 0.5 * (3.0 * t).cos());
    let forcing = Forcing { g: &g, decay_rate: 0.5 };
    let t_end = 30.0;
    let n = 15_000;
    for (k, mu) in [(0, 1.0), (1, 1.0), (1, 0.65), (1, 2f64.sqrt().recip()), (3, 0.8)] {
        let left = bounded_mode_value(k, mu, &forcing, 0.0, 0.0, 0.2).unwrap();
        let coarse = bvp_truncated(k, mu, &g, left, t_end, n);
        let fine = bvp_truncated(k, mu, &g, left, t_end, 2 * n);
        for i in (n * 4 / 30..=n * 6 / 30).step_by(250) {
            let (t, ac) = coarse[i];
            let extrapolated = (4.0 * fine[2 * i].1 - ac) / 3.0;
            let exact = bounded_mode_value(k, mu, &forcing, t, 0.0, 0.2).unwrap();
            assert!((exact - extrapolated).abs() <= 1e-6, "k = {k}, mu = {mu}, t = {t}: {exact} vs {extrapolated}");
        }
    }
}

#[test]
fn leading_mode_steps_at_interval_boundaries() {
    for k in 2..=4u32 {
        let boundary = (k as f64 - 1.0) * 3f64.sqrt() - 2.0;
        let lead = |alpha: f64| exponent_dominance(&RefinedParams::new(alpha, 1.0, 0.0).unwrap())[0].source;
        assert_eq!(lead(boundary - 1e-6), RateSource::Mode(k - 1));
        assert_eq!(lead(boundary + 1e-6), RateSource::Mode(k));
        assert!(RefinedParams::new(boundary, 1.0, 0.0).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounded_solution_satisfies_mode_equation(k in 0i32..5, mu in 0.4f64..2.0, beta in 0.2f64..2.0, t in 0.5f64..4.0) {
        let g = move |s: f64| (-beta * s).exp() * (1.0 + 0.5 * (3.0 * s).cos());
        let forcing = Forcing { g: &g, decay_rate: beta };
        let (regime, near) = mode_regime(k, mu);
        prop_assume!(!near);
        let res = mode_residual(k, mu, &forcing, t, 0.0, 0.1);
        // max |g| on [0, ∞) is g(0) = 1.5
        prop_assert!(res.abs() <= 1e-8 * 1.5, "regime {:?}, residual {}", regime, res);
    }

    #[test]
    fn dominance_is_sorted(alpha in -1.9f64..3.9, p in 0.0f64..3.0) {
        prop_assume!(RefinedParams::new(alpha, 1.0, p).is_ok());
        let rates = exponent_dominance(&RefinedParams::new(alpha, 1.0, p).unwrap());
        prop_assert!(rates.windows(2).all(|w| w[0].t_exponent <= w[1].t_exponent));
        prop_assert!(rates.iter().all(|r| r.t_exponent > 0.0));
    }

    #[test]
    fn supercritical_rates_are_positive(k in 1i32..12, mu in 0.1f64..3.0) {
        prop_assume!(mode_regime(k, mu).0 == ModeRegime::Supercritical);
        prop_assert!(free_decay_rate(k, mu) > 0.0);
    }
}
