//! Finite-sample g-formula pipeline on an observed panel.
//!
//! 1. Pool every transition `(Y_{k−1}, W_{k−1}) → Y_k` across units and
//!    steps and fit `Y_k ~ 1 + Y_{k−1} + W_{k−1}` by OLS.
//! 2. Under a linear-Gaussian transition model the g-formula integral
//!    reduces to iterating the fitted conditional mean along the plan, so the
//!    plug-in estimate is the mean recursion `ŷ_k = a + b ŷ_{k−1} + c w(t_{k−1})`
//!    started from the sample mean of `Y_0`.
//! 3. Contrasts between two plans share one fit; uncertainty comes from a
//!    percentile bootstrap that resamples whole units.
//! 4. `ζ` compares the estimate on the full grid with the one obtained on
//!    every second grid point.
//!
//! OLS works from per-unit sufficient statistics of mean-shifted data, so a
//! bootstrap replicate costs `O(n)` rather than `O(nJ)`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::Grid;
use crate::panel::TrajectoryPanel;
use crate::plan::TreatmentPlan;
use crate::rng::{stream, Domain};

/// Fraction of bootstrap refits allowed to fail before giving up.
pub const MAX_BOOTSTRAP_FAILURE_RATE: f64 = 0.10;

/// Fitted `E[Y_k | Y_{k−1}, W_{k−1}] = a + b Y_{k−1} + c W_{k−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionFit {
    pub intercept: f64,
    pub lag_outcome: f64,
    pub lag_treatment: f64,
    pub residual_var: f64,
    pub transitions: usize,
}

/// Additive cross-product sums over transitions, in shifted coordinates.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    x: f64,
    w: f64,
    y: f64,
    xx: f64,
    xw: f64,
    ww: f64,
    xy: f64,
    wy: f64,
    yy: f64,
}

impl Moments {
    fn push(&mut self, x: f64, w: f64, y: f64) {
        self.n += 1.0;
        self.x += x;
        self.w += w;
        self.y += y;
        self.xx += x * x;
        self.xw += x * w;
        self.ww += w * w;
        self.xy += x * y;
        self.wy += w * y;
        self.yy += y * y;
    }

    fn add(&mut self, o: &Moments) {
        self.n += o.n;
        self.x += o.x;
        self.w += o.w;
        self.y += o.y;
        self.xx += o.xx;
        self.xw += o.xw;
        self.ww += o.ww;
        self.xy += o.xy;
        self.wy += o.wy;
        self.yy += o.yy;
    }
}

/// Per-unit transition moments, shifted by the pooled means of the panel.
struct PanelMoments {
    shift: [f64; 3],
    units: Vec<Moments>,
    y0: Vec<f64>,
}

impl PanelMoments {
    fn new(panel: &TrajectoryPanel) -> Self {
        let steps = panel.steps();
        let count = (panel.units() * steps) as f64;
        let mut shift = [0.0; 3];
        for i in 0..panel.units() {
            for k in 1..=steps {
                shift[0] += panel.y(i, k - 1);
                shift[1] += panel.w(i, k - 1);
                shift[2] += panel.y(i, k);
            }
        }
        shift.iter_mut().for_each(|s| *s /= count);
        let units = (0..panel.units())
            .map(|i| {
                let mut m = Moments::default();
                for k in 1..=steps {
                    m.push(
                        panel.y(i, k - 1) - shift[0],
                        panel.w(i, k - 1) - shift[1],
                        panel.y(i, k) - shift[2],
                    );
                }
                m
            })
            .collect();
        let y0 = (0..panel.units()).map(|i| panel.y(i, 0)).collect();
        PanelMoments { shift, units, y0 }
    }

    fn fit<I: IntoIterator<Item = usize>>(&self, indices: I) -> Result<(TransitionFit, f64)> {
        let mut total = Moments::default();
        let mut y0_sum = 0.0;
        let mut count = 0usize;
        for i in indices {
            total.add(&self.units[i]);
            y0_sum += self.y0[i];
            count += 1;
        }
        Ok((solve(&total, self.shift)?, y0_sum / count as f64))
    }
}

fn solve(m: &Moments, shift: [f64; 3]) -> Result<TransitionFit> {
    let n = m.n;
    if n < 3.0 {
        return Err(Error::Degenerate(format!("need at least 3 pooled transitions, got {n}")));
    }
    let (ex, ew, ey) = (m.x / n, m.w / n, m.y / n);
    let cxx = m.xx - n * ex * ex;
    let cxw = m.xw - n * ex * ew;
    let cww = m.ww - n * ew * ew;
    let cxy = m.xy - n * ex * ey;
    let cwy = m.wy - n * ew * ey;
    let cyy = m.yy - n * ey * ey;

    // Scale of the raw (unshifted) second moments, for relative rank tests.
    let raw_xx = m.xx + 2.0 * shift[0] * m.x + n * shift[0] * shift[0];
    let raw_ww = m.ww + 2.0 * shift[1] * m.w + n * shift[1] * shift[1];
    let rel = 1e-12;
    if cxx <= rel * raw_xx || cww <= rel * raw_ww {
        return Err(Error::Degenerate("design matrix is rank deficient (a regressor is constant)".into()));
    }
    let det = cxx * cww - cxw * cxw;
    if det <= rel * cxx * cww {
        return Err(Error::Degenerate("design matrix is rank deficient (regressors are collinear)".into()));
    }
    let b = (cww * cxy - cxw * cwy) / det;
    let c = (cxx * cwy - cxw * cxy) / det;
    let a = (shift[2] + ey) - b * (shift[0] + ex) - c * (shift[1] + ew);
    let rss = (cyy - b * cxy - c * cwy).max(0.0);
    let fit = TransitionFit {
        intercept: a,
        lag_outcome: b,
        lag_treatment: c,
        residual_var: rss / (n - 3.0),
        transitions: n as usize,
    };
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::Numerical("non-finite regression coefficients".into()));
    }
    Ok(fit)
}

/// Pooled OLS of `Y_k` on `(1, Y_{k−1}, W_{k−1})` over all units and steps.
pub fn fit_transition(panel: &TrajectoryPanel) -> Result<TransitionFit> {
    let pm = PanelMoments::new(panel);
    Ok(pm.fit(0..panel.units())?.0)
}

/// Plug-in g-formula: iterate the fitted mean along the plan sampled at
/// `t_0..t_{J−1}` and return `ŷ_J`.
pub fn gformula_plugin(fit: &TransitionFit, y0_mean: f64, plan: &TreatmentPlan, grid: &Grid) -> f64 {
    (0..grid.steps()).fold(y0_mean, |y, k| {
        fit.intercept + fit.lag_outcome * y + fit.lag_treatment * plan.value_at(grid.time(k))
    })
}

fn contrast_from_fit(
    fit: &TransitionFit,
    y0_mean: f64,
    star: &TreatmentPlan,
    base: &TreatmentPlan,
    grid: &Grid,
) -> f64 {
    gformula_plugin(fit, y0_mean, star, grid) - gformula_plugin(fit, y0_mean, base, grid)
}

/// Plug-in contrast `τ̂ = ŷ_J(plan*) − ŷ_J(plan°)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastEstimate {
    pub tau_hat: f64,
    pub steps: usize,
    pub fit: TransitionFit,
    pub y0_mean: f64,
    pub plan_star: TreatmentPlan,
    pub plan_base: TreatmentPlan,
}

pub fn estimate_contrast(
    panel: &TrajectoryPanel,
    plan_star: &TreatmentPlan,
    plan_base: &TreatmentPlan,
) -> Result<ContrastEstimate> {
    let horizon = panel.grid().horizon();
    plan_star.validate(horizon)?;
    plan_base.validate(horizon)?;
    let (fit, y0_mean) = PanelMoments::new(panel).fit(0..panel.units())?;
    let tau_hat = contrast_from_fit(&fit, y0_mean, plan_star, plan_base, panel.grid());
    Ok(ContrastEstimate {
        tau_hat,
        steps: panel.steps(),
        fit,
        y0_mean,
        plan_star: plan_star.clone(),
        plan_base: plan_base.clone(),
    })
}

/// Bootstrap replicates of the contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDistribution {
    /// Successful replicate estimates, in replicate order.
    pub estimates: Vec<f64>,
    /// Replicates whose refit was rank deficient.
    pub failed: usize,
}

impl BootstrapDistribution {
    /// Percentile interval at level `1 − alpha`.
    pub fn percentile_interval(&self, alpha: f64) -> (f64, f64) {
        let mut sorted = self.estimates.clone();
        sorted.sort_by(f64::total_cmp);
        (quantile_sorted(&sorted, alpha / 2.0), quantile_sorted(&sorted, 1.0 - alpha / 2.0))
    }

    /// Sample standard deviation of the replicates.
    pub fn std_error(&self) -> f64 {
        let n = self.estimates.len() as f64;
        let mean = self.estimates.iter().sum::<f64>() / n;
        let ss: f64 = self.estimates.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    }
}

/// Quantile with linear interpolation between order statistics:
/// position `h = (m − 1) q`, value `x[⌊h⌋] + (h − ⌊h⌋)(x[⌊h⌋+1] − x[⌊h⌋])`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Resamples units with replacement `replicates` times and recomputes the
/// contrast. Replicate `r` draws from stream `(seed, Bootstrap, 0, r)`.
pub fn bootstrap_distribution(
    panel: &TrajectoryPanel,
    plan_star: &TreatmentPlan,
    plan_base: &TreatmentPlan,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapDistribution> {
    if replicates < 2 {
        return Err(invalid("need at least 2 bootstrap replicates"));
    }
    let horizon = panel.grid().horizon();
    plan_star.validate(horizon)?;
    plan_base.validate(horizon)?;
    let pm = PanelMoments::new(panel);
    let n = panel.units();
    let grid = panel.grid();

    let draws: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Domain::Bootstrap, 0, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            match pm.fit(idx) {
                Ok((fit, y0)) => Some(contrast_from_fit(&fit, y0, plan_star, plan_base, grid)),
                Err(_) => None,
            }
        })
        .collect();
    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed as f64 > MAX_BOOTSTRAP_FAILURE_RATE * replicates as f64 {
        return Err(Error::Degenerate(format!(
            "{failed} of {replicates} bootstrap refits were rank deficient"
        )));
    }
    Ok(BootstrapDistribution { estimates: draws.into_iter().flatten().collect(), failed })
}

/// Percentile bootstrap interval for the contrast at level `1 − alpha`.
pub fn bootstrap_ci(
    panel: &TrajectoryPanel,
    plan_star: &TreatmentPlan,
    plan_base: &TreatmentPlan,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    Ok(bootstrap_distribution(panel, plan_star, plan_base, replicates, seed)?.percentile_interval(alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Discretization sensitivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta {
    Value(f64),
    /// The interval excludes 0 but the full- and half-grid estimates agree
    /// exactly, so the ratio has a zero denominator.
    UndefinedDenominator,
}

impl Zeta {
    pub fn value(&self) -> Option<f64> {
        match self {
            Zeta::Value(v) => Some(*v),
            Zeta::UndefinedDenominator => None,
        }
    }

    /// Ordering key: the undefined case sorts above every finite value.
    pub fn sort_key(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

impl std::fmt::Display for Zeta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Zeta::Value(v) => write!(f, "{v:?}"),
            Zeta::UndefinedDenominator => f.write_str("undefined"),
        }
    }
}

/// `ζ = min(|lo|, |hi|) / |τ̂_J − τ̂_{J/2}|` when `0 ∉ [lo, hi]`, else 0.
pub fn zeta_value(tau_full: f64, tau_half: f64, ci_lower: f64, ci_upper: f64) -> Zeta {
    if ci_lower <= 0.0 && 0.0 <= ci_upper {
        return Zeta::Value(0.0);
    }
    let denom = (tau_full - tau_half).abs();
    if denom == 0.0 {
        return Zeta::UndefinedDenominator;
    }
    Zeta::Value(ci_lower.abs().min(ci_upper.abs()) / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaReport {
    pub steps: usize,
    pub tau_hat: f64,
    pub tau_hat_half: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub zeta: Zeta,
    pub alpha: f64,
    pub bootstrap: usize,
    pub failed_bootstrap: usize,
    pub seed: u64,
}

/// Runs the full sensitivity analysis on a panel with an even number of
/// steps: estimate and bootstrap interval on `J`, estimate on `J/2`.
pub fn zeta(
    panel: &TrajectoryPanel,
    plan_star: &TreatmentPlan,
    plan_base: &TreatmentPlan,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<ZetaReport> {
    check_alpha(alpha)?;
    let steps = panel.steps();
    if !steps.is_multiple_of(2) {
        return Err(invalid(format!(
            "zeta halves the grid, so J must be even; got J = {steps}, choose an even J"
        )));
    }
    let full = estimate_contrast(panel, plan_star, plan_base)?;
    let boot = bootstrap_distribution(panel, plan_star, plan_base, replicates, seed)?;
    let (ci_lower, ci_upper) = boot.percentile_interval(alpha);
    let half = estimate_contrast(&panel.subsample(2)?, plan_star, plan_base)?;
    Ok(ZetaReport {
        steps,
        tau_hat: full.tau_hat,
        tau_hat_half: half.tau_hat,
        ci_lower,
        ci_upper,
        zeta: zeta_value(full.tau_hat, half.tau_hat, ci_lower, ci_upper),
        alpha,
        bootstrap: replicates,
        failed_bootstrap: boot.failed,
        seed,
    })
}
