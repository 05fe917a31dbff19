//! Closed-form estimands for the linear process.
//!
//! * `η = E[Y_T^{w*}] = e^{−β11 T} E[Y0] − β12 ∫_0^T w*(s) e^{β11 (s−T)} ds`
//! * `θ^g_J`: the g-formula functional on the grid `t_k = kT/J`, obtained by
//!   iterating the one-step conditional mean `γ11 y + γ12 w` with
//!   `γ(J) = e^{−β T/J}` and the plan sampled at left endpoints.
//! * `δ_J = θ^g_J − η`.
//! * Naive adjustment (conditioning on outcome history only), which tends
//!   to the factual mean `E[Y_T]` instead of `η`.

use crate::error::{invalid, Result};
use crate::linalg2::{matexp, Mat2};
use crate::model::{Grid, ModelParams};
use crate::plan::TreatmentPlan;
use crate::quadrature::{simpson, DEFAULT_PANELS};

/// `∫_a^b w(s) e^{rate (s − b)} ds` with the default quadrature panel count.
pub fn plan_integral(plan: &TreatmentPlan, a: f64, b: f64, rate: f64) -> Result<f64> {
    plan_integral_with(plan, a, b, rate, DEFAULT_PANELS)
}

/// As [`plan_integral`], with an explicit Simpson panel count for
/// tabulated plans. Step plans always use per-piece closed forms.
pub fn plan_integral_with(plan: &TreatmentPlan, a: f64, b: f64, rate: f64, panels: usize) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && rate.is_finite()) {
        return Err(invalid("integration bounds and rate must be finite"));
    }
    if a < 0.0 {
        return Err(invalid(format!("lower bound {a} lies before time 0")));
    }
    if a > b {
        return Err(invalid(format!("lower bound {a} exceeds upper bound {b}")));
    }
    let pieces = plan.pieces(a, b);
    let total = match plan {
        TreatmentPlan::Constant { .. } | TreatmentPlan::PiecewiseConstant { .. } => {
            pieces.iter().map(|&(lo, hi, w)| w * exp_weight_integral(rate, lo, hi, b)).sum()
        }
        TreatmentPlan::Tabulated { .. } => {
            // The integrand is smooth between knots; spread the panel budget
            // over pieces by length so jumps never fall inside a panel.
            let span = b - a;
            pieces
                .iter()
                .map(|&(lo, hi, w)| {
                    let share = ((hi - lo) / span * panels as f64).ceil() as usize;
                    w * simpson(|s| (rate * (s - b)).exp(), lo, hi, share.max(2))
                })
                .sum()
        }
    };
    Ok(total)
}

/// `∫_lo^hi e^{rate (s − end)} ds`.
fn exp_weight_integral(rate: f64, lo: f64, hi: f64, end: f64) -> f64 {
    let len = hi - lo;
    let x = rate * len;
    // (1 − e^{−x}) / x, continuous at 0
    let ratio = if x == 0.0 { 1.0 } else { -(-x).exp_m1() / x };
    (rate * (hi - end)).exp() * len * ratio
}

/// One-step transition matrix `γ(k) = e^{−β T / k}`.
pub fn gamma(params: &ModelParams, k: f64) -> Mat2 {
    matexp(&params.beta, -params.horizon / k)
}

/// True counterfactual mean `η`.
pub fn true_eta(params: &ModelParams, plan: &TreatmentPlan) -> Result<f64> {
    plan.validate(params.horizon)?;
    let b = &params.beta;
    let t = params.horizon;
    let integral = plan_integral(plan, 0.0, t, b.a11)?;
    Ok((-b.a11 * t).exp() * params.mean_y0() - b.a12 * integral)
}

/// Plan sampled at the left endpoints `t_0..t_{J−1}`.
fn left_samples(plan: &TreatmentPlan, grid: &Grid) -> Vec<f64> {
    (0..grid.steps()).map(|k| plan.value_at(grid.time(k))).collect()
}

/// g-formula functional `θ^g_J` on the `J`-step equidistant grid.
pub fn theta_g(params: &ModelParams, plan: &TreatmentPlan, steps: usize) -> Result<f64> {
    if steps < 1 {
        return Err(invalid("theta_g needs J >= 1"));
    }
    plan.validate(params.horizon)?;
    let grid = Grid::new(steps, params.horizon)?;
    let g = gamma(params, steps as f64);
    let y = left_samples(plan, &grid).into_iter().fold(params.mean_y0(), |y, w| g.a11 * y + g.a12 * w);
    Ok(y)
}

/// Identification bias `δ_J = θ^g_J − η`.
pub fn identification_bias(params: &ModelParams, plan: &TreatmentPlan, steps: usize) -> Result<f64> {
    Ok(theta_g(params, plan, steps)? - true_eta(params, plan)?)
}

/// `δ_J` via its three-term expansion
///
/// ```text
/// (γ11^J − e^{−β11 T}) E[Y0] + γ12 Σ_i w_i γ11^{J−i−1} + β12 ∫_0^T w(s) e^{β11 (s−T)} ds
/// ```
///
/// with explicit powers rather than the recursion. Used as a cross-check on
/// [`identification_bias`].
pub fn identification_bias_expanded(params: &ModelParams, plan: &TreatmentPlan, steps: usize) -> Result<f64> {
    if steps < 1 {
        return Err(invalid("identification bias needs J >= 1"));
    }
    plan.validate(params.horizon)?;
    let grid = Grid::new(steps, params.horizon)?;
    let b = &params.beta;
    let t = params.horizon;
    let g = gamma(params, steps as f64);
    let j = steps as i32;

    let initial = (g.a11.powi(j) - (-b.a11 * t).exp()) * params.mean_y0();
    let weighted: f64 =
        left_samples(plan, &grid).iter().enumerate().map(|(i, w)| w * g.a11.powi(j - i as i32 - 1)).sum();
    let integral = plan_integral(plan, 0.0, t, b.a11)?;
    Ok(initial + g.a12 * weighted + b.a12 * integral)
}

/// Naive-adjustment estimand at finite `J` and its `J → ∞` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveEstimand {
    pub finite: f64,
    pub limit: f64,
}

/// Naive adjustment: `γ12(J) w*(t_{J−1}) + γ11(J) [γ11(J/(J−1)) E[Y0] + γ12(J/(J−1)) E[W0]]`,
/// limit `γ11(1) E[Y0] + γ12(1) E[W0] = E[Y_T]`.
pub fn theta_naive(params: &ModelParams, plan: &TreatmentPlan, steps: usize) -> Result<NaiveEstimand> {
    if steps < 2 {
        return Err(invalid("naive estimand needs J >= 2"));
    }
    plan.validate(params.horizon)?;
    let grid = Grid::new(steps, params.horizon)?;
    let [ey0, ew0] = params.init_mean;
    let j = steps as f64;
    let g = gamma(params, j);
    // γ(J/(J−1)) = e^{−β T (J−1)/J}
    let g_rest = matexp(&params.beta, -params.horizon * (j - 1.0) / j);
    let finite = g.a12 * plan.value_at(grid.time(steps - 1)) + g.a11 * (g_rest.a11 * ey0 + g_rest.a12 * ew0);
    Ok(NaiveEstimand { finite, limit: theta_naive_limit(params) })
}

/// `E[Y_T]`, the limit of the naive estimand.
pub fn theta_naive_limit(params: &ModelParams) -> f64 {
    let g1 = gamma(params, 1.0);
    let [ey0, ew0] = params.init_mean;
    g1.a11 * ey0 + g1.a12 * ew0
}

/// All estimands for one `(params, plan, J)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimandReport {
    pub steps: usize,
    pub eta: f64,
    pub theta_g: f64,
    pub delta: f64,
    /// `None` for `J = 1`, where the finite naive formula is undefined.
    pub theta_naive: Option<f64>,
    pub theta_naive_limit: f64,
}

pub fn estimand_report(params: &ModelParams, plan: &TreatmentPlan, steps: usize) -> Result<EstimandReport> {
    let eta = true_eta(params, plan)?;
    let theta_g = theta_g(params, plan, steps)?;
    let theta_naive = if steps >= 2 { Some(theta_naive(params, plan, steps)?.finite) } else { None };
    Ok(EstimandReport {
        steps,
        eta,
        theta_g,
        delta: theta_g - eta,
        theta_naive,
        theta_naive_limit: theta_naive_limit(params),
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig4(beta11: f64, beta21: f64, beta12: f64) -> ModelParams {
        ModelParams { beta: Mat2::new(beta11, beta12, beta21, 0.5), ..ModelParams::reference(beta12) }
    }

    #[test]
    fn constant_integral_rate_zero() {
        let v = plan_integral(&TreatmentPlan::constant(2.5), 0.0, 1.7, 0.0).unwrap();
        assert_relative_eq!(v, 2.5 * 1.7, max_relative = 1e-15);
    }

    #[test]
    fn constant_integral_closed_form() {
        let v = plan_integral(&TreatmentPlan::constant(1.0), 0.0, 1.0, 0.2).unwrap();
        assert_relative_eq!(v, 0.906346234610090701787, max_relative = 1e-14);
    }

    #[test]
    fn step_integral_half() {
        let p = TreatmentPlan::piecewise(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        assert_relative_eq!(plan_integral(&p, 0.0, 1.0, 0.0).unwrap(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn tabulated_matches_step_closed_form() {
        let knots = vec![0.0, 0.25, 0.6];
        let vals = vec![1.0, -2.0, 0.5];
        let step = TreatmentPlan::piecewise(knots.clone(), vals.clone()).unwrap();
        let tab = TreatmentPlan::tabulated(knots, vals).unwrap();
        for rate in [0.0, 0.2, -1.3, 4.0] {
            let exact = plan_integral(&step, 0.1, 0.9, rate).unwrap();
            let quad = plan_integral(&tab, 0.1, 0.9, rate).unwrap();
            assert_relative_eq!(quad, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn integral_rejects_bad_bounds() {
        let p = TreatmentPlan::constant(1.0);
        assert!(plan_integral(&p, 0.5, 0.1, 0.0).is_err());
        assert!(plan_integral(&p, -0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn eta_reference_value() {
        // e^{-0.2} + 5 (1 - e^{-0.2}) / 0.2 at 40 digits
        let eta = true_eta(&ModelParams::reference(-5.0), &TreatmentPlan::constant(1.0)).unwrap();
        assert_relative_eq!(eta, 5.350461926128435358514, max_relative = 1e-14);
    }

    #[test]
    fn eta_without_treatment_effect() {
        let p = fig4(0.7, -3.0, 0.0);
        let eta = true_eta(&p, &TreatmentPlan::constant(3.0)).unwrap();
        assert_relative_eq!(eta, (-0.7f64).exp(), max_relative = 1e-15);
        let eta0 = true_eta(&ModelParams::reference(-5.0), &TreatmentPlan::constant(0.0)).unwrap();
        assert_relative_eq!(eta0, (-0.2f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn theta_g_single_step() {
        let p = ModelParams::reference(-5.0);
        let g = gamma(&p, 1.0);
        let th = theta_g(&p, &TreatmentPlan::constant(2.0), 1).unwrap();
        assert_relative_eq!(th, g.a11 + 2.0 * g.a12, max_relative = 1e-15);
        assert!(theta_g(&p, &TreatmentPlan::constant(2.0), 0).is_err());
    }

    #[test]
    fn bias_table_regression() {
        // Eq. (5) at 40 digits for β = ((0.2, −5), (−3, 0.5)), w ≡ 1, E[Y0] = 1, T = 1.
        let want = [
            (1, 34.21677236656914164612),
            (2, 19.21529871692962125651),
            (4, 8.472678713144280082891),
            (8, 3.516998618298504463737),
            (16, 1.547826875473289302094),
            (32, 0.7211853407945487896566),
            (64, 0.3476434684924112733347),
        ];
        let p = ModelParams::reference(-5.0);
        let plan = TreatmentPlan::constant(1.0);
        for (j, d) in want {
            assert_relative_eq!(identification_bias(&p, &plan, j).unwrap(), d, max_relative = 1e-12);
        }
    }

    #[test]
    fn sharp_null_has_no_bias() {
        for b11 in [-0.5, 0.2, 0.5, 1.0] {
            let p = fig4(b11, -3.0, 0.0);
            for j in [1, 2, 5, 64, 199] {
                let d = identification_bias(&p, &TreatmentPlan::constant(1.0), j).unwrap();
                assert!(d.abs() < 1e-10, "b11={b11} J={j} delta={d}");
            }
        }
    }

    #[test]
    fn expansion_matches_direct() {
        let p = ModelParams::reference(-5.0);
        let plan = TreatmentPlan::piecewise(vec![0.0, 0.3], vec![1.0, -0.5]).unwrap();
        for j in 1..40 {
            let a = identification_bias(&p, &plan, j).unwrap();
            let b = identification_bias_expanded(&p, &plan, j).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn naive_reference_values() {
        let p = ModelParams::reference(-5.0);
        let n = theta_naive(&p, &TreatmentPlan::constant(1.0), 10).unwrap();
        assert_relative_eq!(n.finite, 13.58015257826965084398, max_relative = 1e-13);
        assert_relative_eq!(n.limit, 17.65657778568355758253, max_relative = 1e-13);
        assert!(theta_naive(&p, &TreatmentPlan::constant(1.0), 1).is_err());
    }

    #[test]
    fn naive_limit_without_effect_is_eta() {
        let p = ModelParams { init_mean: [1.0, 0.7], ..fig4(0.2, -3.0, 0.0) };
        let eta = true_eta(&p, &TreatmentPlan::constant(1.0)).unwrap();
        assert_relative_eq!(theta_naive_limit(&p), eta, max_relative = 1e-14);
    }

    #[test]
    fn report_is_consistent() {
        let p = ModelParams::reference(-5.0);
        let r = estimand_report(&p, &TreatmentPlan::constant(1.0), 8).unwrap();
        assert!((r.delta - (r.theta_g - r.eta)).abs() <= 1e-12);
        assert!(estimand_report(&p, &TreatmentPlan::constant(1.0), 1).unwrap().theta_naive.is_none());
    }
}
