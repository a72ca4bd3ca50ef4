use catastrophe_core::lab::{is_estimate_tail_with, richardson_fit, IsTilt};
use catastrophe_core::*;

fn unit() -> ModelParams {
    ModelParams::new(1.0, 1.0, 1.0).unwrap()
}

#[test]
fn importance_sampling_agrees_with_exact() {
    let p = unit();
    for (spec, x, t) in [
        (ScalingSpec::new(1.0, 1.0).unwrap(), 1.5, 25.0),
        (ScalingSpec::new(1.0, 2.0).unwrap(), 1.0, 4.0),
        (ScalingSpec::new(1.0, 0.5).unwrap(), 1.0, 100.0),
    ] {
        let exact = empirical_rate_curve(&p, &spec, x, &[t], 1e-12)
            .unwrap()
            .points[0]
            .log_tail;
        let reps = 40;
        let mut inside = 0;
        for seed in 0..reps {
            let e = is_estimate_tail(&p, &spec, x, t, 20_000, seed).unwrap();
            let est = e.estimate.prob();
            let se = e.rel_std_err * est;
            if (est - exact.exp()).abs() <= 3.0 * se {
                inside += 1;
            }
        }
        assert!(
            inside as f64 >= 0.95 * reps as f64,
            "T={t}: {inside}/{reps}"
        );
    }
}

#[test]
fn importance_sampling_linear_example() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 1.0).unwrap();
    let exact = empirical_rate_curve(&p, &spec, 1.5, &[50.0], 1e-12)
        .unwrap()
        .points[0]
        .log_tail;
    let e = is_estimate_tail(&p, &spec, 1.5, 50.0, 100_000, 2024).unwrap();
    let est = e.estimate.prob();
    assert!((est - exact.exp()).abs() <= 3.0 * e.rel_std_err * est);
    assert!(e.rel_std_err < 0.1);
}

#[test]
fn error_bar_scales_with_root_n() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 2.0).unwrap();
    let small = is_estimate_tail(&p, &spec, 1.0, 4.0, 40_000, 8)
        .unwrap()
        .rel_std_err;
    let large = is_estimate_tail(&p, &spec, 1.0, 4.0, 160_000, 8)
        .unwrap()
        .rel_std_err;
    assert!((small / large - 2.0).abs() < 0.3, "{small} vs {large}");
}

#[test]
fn neutral_tilt_is_plain_monte_carlo() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 1.0).unwrap();
    let e = is_estimate_tail_with(&p, &spec, 0.2, 10.0, 10_000, 4, &IsTilt::NEUTRAL).unwrap();
    let frac = e.hits as f64 / e.samples as f64;
    assert!((e.estimate.prob() - frac).abs() < 1e-12);
}

#[test]
fn importance_sampling_is_reproducible() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 1.0).unwrap();
    let a = is_estimate_tail(&p, &spec, 1.5, 20.0, 1000, 11).unwrap();
    let b = is_estimate_tail(&p, &spec, 1.5, 20.0, 1000, 11).unwrap();
    assert_eq!(a, b);
}

#[test]
fn experiment_is_a_function_of_its_config() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 1.0).unwrap();
    let r = empirical_rate_curve(&p, &spec, 1.5, &[10.0, 20.0, 40.0], 1e-12).unwrap();
    let c = &r.config;
    let again = empirical_rate_curve(&c.params, &c.spec, c.x, &c.t_grid, c.tol).unwrap();
    assert_eq!(r, again);
    let parsed: ExperimentResult = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(parsed, r);
    assert_eq!(r.to_csv().lines().count(), 4);
    assert!(r
        .to_csv()
        .starts_with("T,psi,log_tail,normalized,reference\n"));
}

#[test]
fn sandwich_brackets_linear_curve() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 1.0).unwrap();
    let r = empirical_rate_curve(&p, &spec, 1.5, &[25.0, 50.0, 100.0], 1e-12).unwrap();
    for pt in &r.points {
        let s = ldp_sandwich(&p, &spec, 1.5, pt.t).unwrap();
        assert!(s.lower.value() <= pt.log_tail && pt.log_tail <= s.upper.value());
        assert!(s.clamped);
    }
}

#[test]
fn fit_lands_near_the_linear_rate() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 1.0).unwrap();
    let r = empirical_rate_curve(&p, &spec, 1.5, &[100.0, 200.0, 400.0], 1e-12).unwrap();
    let (rate, _) = richardson_fit(&r).unwrap();
    assert!((rate - 1.5 * 3f64.ln() + 0.5).abs() < 0.02, "{rate}");
}

#[test]
fn superlinear_rejects_short_horizons() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 2.0).unwrap();
    assert!(matches!(
        empirical_rate_curve(&p, &spec, 1.0, &[0.5, 4.0], 1e-12),
        Err(Error::PreAsymptotic { .. })
    ));
}

#[test]
fn lln_fraction_shrinks_with_horizon() {
    let p = unit();
    let spec = ScalingSpec::new(1.0, 0.5).unwrap();
    let short = lln_sup_check(&p, &spec, 100.0, 0.5, 2000, 1).unwrap();
    let long = lln_sup_check(&p, &spec, 10_000.0, 0.5, 2000, 1).unwrap();
    assert!(long < short, "{long} vs {short}");
}
