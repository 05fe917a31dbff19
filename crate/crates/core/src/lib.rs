//! Discretization bias of the g-formula for a continuous-time linear
//! treatment–outcome process.
//!
//! The crate simulates the bivariate Ornstein–Uhlenbeck process exactly,
//! evaluates the true counterfactual mean and the discrete-time g-formula
//! functional in closed form, and runs the finite-sample pipeline (pooled
//! OLS, plug-in g-formula, unit bootstrap, discretization sensitivity `ζ`).

pub mod error;
pub mod estimand;
pub mod estimation;
pub mod experiment;
pub mod linalg2;
pub mod model;
pub mod panel;
pub mod plan;
pub mod quadrature;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
pub use linalg2::{matexp, Mat2};
pub use model::{Grid, ModelParams};
pub use panel::TrajectoryPanel;
pub use plan::TreatmentPlan;
