//! Exact sampling of the observational process and of the counterfactual
//! outcome process under a deterministic plan.
//!
//! Both processes are Gaussian with closed-form transitions, so the panels
//! carry no time-discretization error: over a step `Δ`
//!
//! ```text
//! X_{t+Δ} = e^{−βΔ} X_t + ε,   ε ~ N(0, ∫_0^Δ e^{−βu} σσᵀ e^{−βᵀu} du)
//! ```
//!
//! Units are simulated in parallel; unit `i` draws from its own stream
//! (see [`crate::rng`]), so the output does not depend on the thread count.

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimand::plan_integral;
use crate::linalg2::{matexp, sym_sqrt, Mat2, Vec2};
use crate::model::{check_psd, Grid, ModelParams, PSD_TOL};
use crate::panel::TrajectoryPanel;
use crate::plan::TreatmentPlan;
use crate::quadrature::DEFAULT_PANELS;
use crate::rng::{stream, Domain};

/// Below this ratio of extreme singular values of `β ⊕ β` the Kronecker
/// solve is abandoned for quadrature.
pub const KRONECKER_RCOND: f64 = 1e-8;

/// Switch to the Brownian limit of the counterfactual noise variance when
/// `|β11|·Δ` falls below this.
pub const OU_LIMIT_TOL: f64 = 1e-8;

/// Exact one-step law of the observational process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionLaw {
    /// `e^{−βΔ}`.
    pub mean_map: Mat2,
    /// `∫_0^Δ e^{−βu} σσᵀ e^{−βᵀu} du`.
    pub noise_cov: Mat2,
}

pub fn transition_law(params: &ModelParams, delta: f64) -> Result<TransitionLaw> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("step length must be positive, got {delta}")));
    }
    let mean_map = matexp(&params.beta, -delta);
    let noise_cov = match noise_cov_kronecker(params, delta) {
        Some(c) => c,
        None => noise_cov_quadrature(params, delta, DEFAULT_PANELS),
    };
    check_psd(&noise_cov, "transition noise covariance").map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TransitionLaw { mean_map, noise_cov })
}

/// Noise covariance from the Lyapunov identity
/// `βC + Cβᵀ = D − e^{−βΔ} D e^{−βᵀΔ}`, solved as
/// `(I⊗β + β⊗I) vec(C) = vec(rhs)`. `None` when `β ⊕ β` is too close to
/// singular.
pub fn noise_cov_kronecker(params: &ModelParams, delta: f64) -> Option<Mat2> {
    let b = params.beta.rows();
    // Kronecker sum on column-major vec: rows/cols indexed by (i, j) -> i + 2j.
    let k = Matrix4::from_fn(|r, c| {
        let (ri, rj) = (r % 2, r / 2);
        let (ci, cj) = (c % 2, c / 2);
        let mut v = 0.0;
        if rj == cj {
            v += b[ri][ci];
        }
        if ri == ci {
            v += b[rj][cj];
        }
        v
    });
    let sv = k.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smax.is_nan() || smax <= 0.0 || smin <= KRONECKER_RCOND * smax {
        return None;
    }
    let d = params.diffusion_cov();
    let m = matexp(&params.beta, -delta);
    let rhs = d - m * d * m.transpose();
    let v = Vector4::new(rhs.a11, rhs.a21, rhs.a12, rhs.a22);
    let x = k.lu().solve(&v)?;
    let off = 0.5 * (x[1] + x[2]);
    Some(Mat2::new(x[0], off, off, x[3]))
}

/// Noise covariance by composite Simpson on `e^{−βu} D e^{−βᵀu}`.
pub fn noise_cov_quadrature(params: &ModelParams, delta: f64, panels: usize) -> Mat2 {
    let d = params.diffusion_cov();
    let n = panels.max(2).next_multiple_of(2);
    let h = delta / n as f64;
    let mut acc = Mat2::ZERO;
    for i in 0..=n {
        let weight = match i {
            0 => 1.0,
            _ if i == n => 1.0,
            _ if i % 2 == 1 => 4.0,
            _ => 2.0,
        };
        let m = matexp(&params.beta, -(i as f64) * h);
        acc = acc + (m * d * m.transpose()).scale(weight);
    }
    let c = acc.scale(h / 3.0);
    let off = 0.5 * (c.a12 + c.a21);
    Mat2::new(c.a11, off, off, c.a22)
}

fn normal_pair<R: Rng>(rng: &mut R) -> Vec2 {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

fn affine(mean: Vec2, root: &Mat2, z: Vec2) -> Vec2 {
    let e = root.mul_vec(z);
    [mean[0] + e[0], mean[1] + e[1]]
}

fn sqrt_or_err(c: &Mat2, what: &str) -> Result<Mat2> {
    sym_sqrt(c, PSD_TOL).ok_or_else(|| invalid(format!("{what} is not positive semidefinite")))
}

/// Simulates `n` observational trajectories of `(Y, W)` on `grid`.
pub fn simulate_panel(params: &ModelParams, grid: &Grid, n: usize, seed: u64) -> Result<TrajectoryPanel> {
    if n == 0 {
        return Err(invalid("need at least one unit"));
    }
    params.validate()?;
    let law = transition_law(params, grid.step_len())?;
    let init_root = sqrt_or_err(&params.init_cov, "initial covariance")?;
    let noise_root = sqrt_or_err(&law.noise_cov, "transition noise covariance")?;
    let steps = grid.steps();

    let units: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Observational, 0, i as u64);
            let mut out = Vec::with_capacity((steps + 1) * 2);
            let mut x = affine(params.init_mean, &init_root, normal_pair(&mut rng));
            out.extend_from_slice(&x);
            for _ in 0..steps {
                x = affine(law.mean_map.mul_vec(x), &noise_root, normal_pair(&mut rng));
                out.extend_from_slice(&x);
            }
            out
        })
        .collect();
    TrajectoryPanel::from_values(*grid, n, units.concat(), Some(seed))
}

/// Variance of the counterfactual outcome noise over a step `delta`:
/// `(σ11² + σ12²)(1 − e^{−2β11Δ}) / (2β11)`.
pub fn counterfactual_noise_var(params: &ModelParams, delta: f64) -> f64 {
    let s = &params.sigma;
    let scale = s.a11 * s.a11 + s.a12 * s.a12;
    let b11 = params.beta.a11;
    if (b11 * delta).abs() < OU_LIMIT_TOL {
        scale * delta
    } else {
        scale * -(-2.0 * b11 * delta).exp_m1() / (2.0 * b11)
    }
}

/// Simulates `n` outcome trajectories under the deterministic plan. The `W`
/// column holds the plan value at each grid time.
pub fn simulate_counterfactual(
    params: &ModelParams,
    plan: &TreatmentPlan,
    grid: &Grid,
    n: usize,
    seed: u64,
) -> Result<TrajectoryPanel> {
    if n == 0 {
        return Err(invalid("need at least one unit"));
    }
    params.validate()?;
    plan.validate(params.horizon)?;
    if grid.horizon() > params.horizon {
        return Err(Error::InvalidPlan(format!(
            "grid extends to {} but the plan is only defined up to {}",
            grid.horizon(),
            params.horizon
        )));
    }
    let steps = grid.steps();
    let b11 = params.beta.a11;
    let b12 = params.beta.a12;
    let delta = grid.step_len();
    let decay = (-b11 * delta).exp();
    let sd = counterfactual_noise_var(params, delta).sqrt();
    let y0_sd = params.init_cov.a11.max(0.0).sqrt();

    // Deterministic forcing per step: −β12 ∫_{t_k}^{t_{k+1}} w(s) e^{β11 (s − t_{k+1})} ds.
    let forcing = (0..steps)
        .map(|k| Ok(-b12 * plan_integral(plan, grid.time(k), grid.time(k + 1), b11)?))
        .collect::<Result<Vec<f64>>>()?;
    let plan_vals: Vec<f64> = grid.times().iter().map(|&t| plan.value_at(t)).collect();

    let units: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Counterfactual, 0, i as u64);
            let mut out = Vec::with_capacity((steps + 1) * 2);
            let z: f64 = rng.sample(StandardNormal);
            let mut y = params.init_mean[0] + y0_sd * z;
            out.extend_from_slice(&[y, plan_vals[0]]);
            for k in 0..steps {
                let z: f64 = rng.sample(StandardNormal);
                y = decay * y + forcing[k] + sd * z;
                out.extend_from_slice(&[y, plan_vals[k + 1]]);
            }
            out
        })
        .collect();
    TrajectoryPanel::from_values(*grid, n, units.concat(), Some(seed))
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
        (*a - *b).max_abs()
    }

    fn with(beta: Mat2, sigma: Mat2) -> ModelParams {
        ModelParams { beta, sigma, ..ModelParams::reference(-5.0) }
    }

    #[test]
    fn brownian_motion_law() {
        let p = with(Mat2::ZERO, Mat2::IDENTITY);
        assert!(noise_cov_kronecker(&p, 1.0).is_none());
        let law = transition_law(&p, 1.0).unwrap();
        assert_eq!(law.mean_map, Mat2::IDENTITY);
        assert!(max_diff(&law.noise_cov, &Mat2::IDENTITY) < 1e-14);
    }

    #[test]
    fn noiseless_law() {
        let p = with(Mat2::new(0.2, -5.0, -3.0, 0.5), Mat2::ZERO);
        let law = transition_law(&p, 0.3).unwrap();
        assert_eq!(law.noise_cov, Mat2::ZERO);
        assert_eq!(law.mean_map, matexp(&p.beta, -0.3));
    }

    #[test]
    fn reference_noise_cov() {
        // mpmath adaptive quadrature at 40 digits.
        let want = Mat2::new(
            0.13781058914500762589,
            0.07285809860044603497,
            0.07285809860044603497,
            0.05059633373241658727,
        );
        let law = transition_law(&ModelParams::reference(-5.0), 0.1).unwrap();
        assert!(max_diff(&law.noise_cov, &want) < 1e-14);
    }

    #[test]
    fn routes_agree() {
        for beta in
            [Mat2::new(0.2, -5.0, -3.0, 0.5), Mat2::new(1.0, 2.0, -2.0, 1.0), Mat2::new(-0.4, 0.1, 0.3, 0.9)]
        {
            let p = with(beta, Mat2::new(1.0, 0.3, 0.3, 0.5));
            for delta in [0.01, 0.1, 1.0] {
                let a = noise_cov_kronecker(&p, delta).unwrap();
                let b = noise_cov_quadrature(&p, delta, DEFAULT_PANELS);
                assert!(max_diff(&a, &b) < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::reference(-5.0);
        assert!(transition_law(&p, 0.0).is_err());
        let g = Grid::new(4, 1.0).unwrap();
        assert!(simulate_panel(&p, &g, 0, 1).is_err());
        let bad = ModelParams { init_cov: Mat2::diag(1.0, -1.0), ..p.clone() };
        assert!(simulate_panel(&bad, &g, 3, 1).is_err());
        let late = TreatmentPlan::piecewise(vec![0.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert!(simulate_counterfactual(&p, &late, &g, 3, 1).is_err());
    }

    #[test]
    fn noiseless_panel_follows_mean_flow() {
        let p = ModelParams { sigma: Mat2::ZERO, init_cov: Mat2::ZERO, ..ModelParams::reference(-5.0) };
        let g = Grid::new(10, 1.0).unwrap();
        let panel = simulate_panel(&p, &g, 3, 11).unwrap();
        for i in 0..3 {
            for k in 0..=10 {
                let want = matexp(&p.beta, -g.time(k)).mul_vec(p.init_mean);
                assert_relative_eq!(panel.y(i, k), want[0], max_relative = 1e-12);
                assert_relative_eq!(panel.w(i, k), want[1], max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn noiseless_counterfactual_solves_scalar_ode() {
        // y' = -(b11 y + b12), y(0) = 1  =>  y(t) = -b12/b11 + (1 + b12/b11) e^{-b11 t}
        let p = ModelParams { sigma: Mat2::ZERO, init_cov: Mat2::ZERO, ..ModelParams::reference(-5.0) };
        let g = Grid::new(8, 1.0).unwrap();
        let panel = simulate_counterfactual(&p, &TreatmentPlan::constant(1.0), &g, 2, 3).unwrap();
        let (b11, b12) = (0.2, -5.0);
        for k in 0..=8 {
            let t = g.time(k);
            let want = -b12 / b11 + (1.0 + b12 / b11) * (-b11 * t).exp();
            assert_relative_eq!(panel.y(1, k), want, max_relative = 1e-13);
            assert_eq!(panel.w(1, k), 1.0);
        }
    }

    #[test]
    fn counterfactual_variance_limit() {
        let mut p = ModelParams::reference(-5.0);
        p.beta.a11 = 0.0;
        assert_relative_eq!(counterfactual_noise_var(&p, 0.5), 1.09 * 0.5, max_relative = 1e-15);
        p.beta.a11 = 1e-12;
        assert_relative_eq!(counterfactual_noise_var(&p, 0.5), 1.09 * 0.5, max_relative = 1e-11);
        p.beta.a11 = 0.2;
        let want = 1.09 * (1.0 - (-0.2f64).exp()) / 0.4;
        assert_relative_eq!(counterfactual_noise_var(&p, 0.5), want, max_relative = 1e-14);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = ModelParams::reference(-5.0);
        let g = Grid::new(5, 1.0).unwrap();
        let a = simulate_panel(&p, &g, 50, 99).unwrap();
        assert_eq!(a, simulate_panel(&p, &g, 50, 99).unwrap());
        assert_ne!(a, simulate_panel(&p, &g, 50, 100).unwrap());
        let plan = TreatmentPlan::constant(1.0);
        let c = simulate_counterfactual(&p, &plan, &g, 50, 99).unwrap();
        assert_eq!(c, simulate_counterfactual(&p, &plan, &g, 50, 99).unwrap());
    }
}
