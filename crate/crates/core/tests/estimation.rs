use gdisc::estimand::{gamma, theta_g};
use gdisc::estimation::{
    bootstrap_distribution, estimate_contrast, fit_transition, gformula_plugin, zeta, TransitionFit, Zeta,
};
use gdisc::experiment::cell_seed;
use gdisc::sde::simulate_panel;
use gdisc::{Grid, ModelParams, TrajectoryPanel, TreatmentPlan};

fn one() -> TreatmentPlan {
    TreatmentPlan::constant(1.0)
}

fn zero() -> TreatmentPlan {
    TreatmentPlan::constant(0.0)
}

#[test]
fn plugin_with_true_coefficients_is_theta_g() {
    let p = ModelParams::reference(-5.0);
    let plans = [
        one(),
        TreatmentPlan::piecewise(vec![0.0, 0.4], vec![1.0, -2.0]).unwrap(),
        TreatmentPlan::tabulated(vec![0.0, 0.3, 0.6], vec![0.5, 2.0, 1.0]).unwrap(),
    ];
    for plan in &plans {
        for j in [1, 3, 10, 64] {
            let g = gamma(&p, j as f64);
            let fit = TransitionFit {
                intercept: 0.0,
                lag_outcome: g.a11,
                lag_treatment: g.a12,
                residual_var: 0.0,
                transitions: 0,
            };
            let plug = gformula_plugin(&fit, p.mean_y0(), plan, &Grid::new(j, 1.0).unwrap());
            let tg = theta_g(&p, plan, j).unwrap();
            assert!((plug - tg).abs() < 1e-12 * tg.abs().max(1.0), "J={j}: {plug} vs {tg}");
        }
    }
}

#[test]
fn fit_approaches_one_step_transition() {
    let p = ModelParams::reference(-5.0);
    let j = 5;
    let panel = simulate_panel(&p, &Grid::new(j, 1.0).unwrap(), 40_000, 17).unwrap();
    let fit = fit_transition(&panel).unwrap();
    let g = gamma(&p, j as f64);
    assert!(fit.intercept.abs() < 0.02, "{fit:?}");
    assert!((fit.lag_outcome - g.a11).abs() < 0.01, "{fit:?} vs {g:?}");
    assert!((fit.lag_treatment - g.a12).abs() < 0.01, "{fit:?} vs {g:?}");
    let law = gdisc::sde::transition_law(&p, 0.2).unwrap();
    assert!((fit.residual_var / law.noise_cov.a11 - 1.0).abs() < 0.03);
}

#[test]
fn subsampled_panel_equals_directly_built_coarse_panel() {
    let p = ModelParams::reference(-7.0);
    let fine = simulate_panel(&p, &Grid::new(12, 1.0).unwrap(), 150, 4).unwrap();
    let mut vals = Vec::new();
    for i in 0..fine.units() {
        for k in (0..=12).step_by(2) {
            vals.extend_from_slice(&[fine.y(i, k), fine.w(i, k)]);
        }
    }
    let direct = TrajectoryPanel::from_values(Grid::new(6, 1.0).unwrap(), 150, vals, fine.seed()).unwrap();
    let sub = fine.subsample(2).unwrap();
    assert_eq!(sub, direct);
    assert_eq!(
        estimate_contrast(&sub, &one(), &zero()).unwrap(),
        estimate_contrast(&direct, &one(), &zero()).unwrap()
    );
}

#[test]
fn bootstrap_is_deterministic_across_threads() {
    let p = ModelParams::reference(-10.0);
    let panel = simulate_panel(&p, &Grid::new(8, 1.0).unwrap(), 200, 3).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_distribution(&panel, &one(), &zero(), 120, 55).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(3));
    assert_eq!(a.estimates.len() + a.failed, 120);
    assert_ne!(a, bootstrap_distribution(&panel, &one(), &zero(), 120, 56).unwrap());
    let r1 = zeta(&panel, &one(), &zero(), 120, 0.05, 55).unwrap();
    let r2 = zeta(&panel, &one(), &zero(), 120, 0.05, 55).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.ci_lower, a.percentile_interval(0.05).0);
}

#[test]
fn zeta_report_invariants() {
    let p = ModelParams::reference(-6.0);
    for r in 0..6 {
        let seed = cell_seed(1, 0, r);
        let panel = simulate_panel(&p, &Grid::new(10, 1.0).unwrap(), 120, seed).unwrap();
        let rep = zeta(&panel, &one(), &zero(), 100, 0.1, seed).unwrap();
        assert!(rep.ci_lower <= rep.ci_upper);
        match rep.zeta {
            Zeta::Value(z) => {
                assert!(z >= 0.0);
                if rep.ci_lower <= 0.0 && rep.ci_upper >= 0.0 {
                    assert_eq!(z, 0.0);
                }
            }
            Zeta::UndefinedDenominator => assert!(rep.tau_hat == rep.tau_hat_half),
        }
    }
}

#[test]
fn null_effect_intervals_mostly_cover_zero() {
    let p = ModelParams::reference(0.0);
    let mut zeros = 0;
    for r in 0..20 {
        let seed = cell_seed(5, 0, r);
        let panel = simulate_panel(&p, &Grid::new(8, 1.0).unwrap(), 200, seed).unwrap();
        let rep = zeta(&panel, &one(), &zero(), 200, 0.05, seed).unwrap();
        if rep.zeta == Zeta::Value(0.0) {
            zeros += 1;
        }
    }
    assert!(zeros >= 15, "only {zeros}/20 intervals covered 0");
}
