//! Parameters of the bivariate linear process
//!
//! ```text
//! d(Y, W)ᵀ = −β (Y, W)ᵀ dt + σ dB,   (Y0, W0) ~ Normal(init_mean, init_cov)
//! ```
//!
//! and the equidistant observation grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg2::{sym_eigen, Mat2, Vec2};

pub const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Drift, per unit time.
    pub beta: Mat2,
    /// Diffusion, per sqrt unit time.
    pub sigma: Mat2,
    /// `(E[Y0], E[W0])`.
    pub init_mean: Vec2,
    pub init_cov: Mat2,
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(beta: Mat2, sigma: Mat2, init_mean: Vec2, init_cov: Mat2, horizon: f64) -> Result<Self> {
        let p = ModelParams { beta, sigma, init_mean, init_cov, horizon };
        p.validate()?;
        Ok(p)
    }

    /// Simulation settings with the given instantaneous treatment effect
    /// coefficient `beta12`: β = ((0.2, β12), (−3, 0.5)),
    /// σ = ((1, 0.3), (0.3, 0.5)), (Y0, W0) ~ N((1, 0), 0.25·I), T = 1.
    pub fn reference(beta12: f64) -> Self {
        ModelParams {
            beta: Mat2::new(0.2, beta12, -3.0, 0.5),
            sigma: Mat2::new(1.0, 0.3, 0.3, 0.5),
            init_mean: [1.0, 0.0],
            init_cov: Mat2::diag(0.25, 0.25),
            horizon: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive and finite, got {}", self.horizon)));
        }
        if !self.beta.is_finite() || !self.sigma.is_finite() || !self.init_cov.is_finite() {
            return Err(invalid("model matrices must be finite"));
        }
        if !self.init_mean.iter().all(|v| v.is_finite()) {
            return Err(invalid("initial mean must be finite"));
        }
        check_psd(&self.init_cov, "initial covariance")
    }

    pub fn mean_y0(&self) -> f64 {
        self.init_mean[0]
    }

    /// `σ σᵀ`.
    pub fn diffusion_cov(&self) -> Mat2 {
        self.sigma * self.sigma.transpose()
    }
}

pub(crate) fn check_psd(c: &Mat2, what: &str) -> Result<()> {
    if !c.is_symmetric(PSD_TOL) {
        return Err(invalid(format!("{what} is not symmetric")));
    }
    let (vals, _) = sym_eigen(c);
    if vals.iter().any(|&v| v < -PSD_TOL) {
        return Err(invalid(format!("{what} is not positive semidefinite (eigenvalues {vals:?})")));
    }
    Ok(())
}

/// Equidistant grid `t_k = k T / J`, `k = 0..=J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    steps: usize,
    horizon: f64,
}

impl Grid {
    pub fn new(steps: usize, horizon: f64) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive and finite, got {horizon}")));
        }
        Ok(Grid { steps, horizon })
    }

    /// Number of steps `J`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step_len(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k`, with `t_J` pinned to `T` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// The grid with every `factor`-th point of this one.
    pub fn coarsen(&self, factor: usize) -> Result<Grid> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(invalid(format!("cannot coarsen a {}-step grid by {factor}", self.steps)));
        }
        Grid::new(self.steps / factor, self.horizon)
    }
}
