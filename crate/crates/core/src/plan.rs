//! Deterministic treatment plans `w*: [0, T] → ℝ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bounded, deterministic treatment trajectory.
///
/// Step plans are right-continuous: piece `i` covers
/// `[breakpoints[i], breakpoints[i + 1])` and the last piece extends to the
/// horizon. `Tabulated` uses the same left-step lookup but is integrated by
/// quadrature rather than per-piece closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TreatmentPlan {
    Constant { value: f64 },
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl TreatmentPlan {
    pub fn constant(value: f64) -> Self {
        TreatmentPlan::Constant { value }
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let plan = TreatmentPlan::PiecewiseConstant { breakpoints, values };
        plan.check_shape()?;
        Ok(plan)
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let plan = TreatmentPlan::Tabulated { times, values };
        plan.check_shape()?;
        Ok(plan)
    }

    fn knots(&self) -> Option<(&[f64], &[f64])> {
        match self {
            TreatmentPlan::Constant { .. } => None,
            TreatmentPlan::PiecewiseConstant { breakpoints, values } => Some((breakpoints, values)),
            TreatmentPlan::Tabulated { times, values } => Some((times, values)),
        }
    }

    fn check_shape(&self) -> Result<()> {
        match self.knots() {
            None => {
                if let TreatmentPlan::Constant { value } = self {
                    if !value.is_finite() {
                        return Err(Error::InvalidPlan("constant value is not finite".into()));
                    }
                }
                Ok(())
            }
            Some((knots, values)) => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::InvalidPlan(format!(
                        "need matching non-empty knot and value lists, got {} knots and {} values",
                        knots.len(),
                        values.len()
                    )));
                }
                if knots[0] != 0.0 {
                    return Err(Error::InvalidPlan(format!(
                        "first knot must be 0 so the plan is defined from time 0, got {}",
                        knots[0]
                    )));
                }
                if knots.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                    return Err(Error::InvalidPlan("knots must be strictly increasing".into()));
                }
                if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPlan("knots and values must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Checks the plan is bounded and defined everywhere on `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        self.check_shape()?;
        if let Some((knots, _)) = self.knots() {
            if let Some(last) = knots.last() {
                if *last > horizon {
                    return Err(Error::InvalidPlan(format!("knot {last} lies beyond the horizon {horizon}")));
                }
            }
        }
        Ok(())
    }

    /// Plan value at `t`. Callers keep `t` inside the validated domain;
    /// times before the first knot take the first value.
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            TreatmentPlan::Constant { value } => *value,
            TreatmentPlan::PiecewiseConstant { breakpoints: k, values }
            | TreatmentPlan::Tabulated { times: k, values } => {
                let idx = k.partition_point(|&x| x <= t);
                values[idx.saturating_sub(1)]
            }
        }
    }

    /// Constant pieces intersected with `[a, b]`, as `(lo, hi, value)`.
    pub(crate) fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        match self.knots() {
            None => vec![(a, b, self.value_at(a))],
            Some((knots, values)) => {
                let mut out = Vec::new();
                for i in 0..knots.len() {
                    let lo = knots[i].max(a);
                    let hi = knots.get(i + 1).copied().unwrap_or(f64::INFINITY).min(b);
                    if lo < hi {
                        out.push((lo, hi, values[i]));
                    }
                }
                out
            }
        }
    }

    /// Pointwise linear combination `c1·self + c2·other`, preserving the step
    /// structure of both.
    pub fn combine(&self, c1: f64, other: &TreatmentPlan, c2: f64) -> TreatmentPlan {
        if let (TreatmentPlan::Constant { value: v1 }, TreatmentPlan::Constant { value: v2 }) = (self, other)
        {
            return TreatmentPlan::constant(c1 * v1 + c2 * v2);
        }
        let mut knots: Vec<f64> = vec![0.0];
        for p in [self, other] {
            if let Some((k, _)) = p.knots() {
                knots.extend_from_slice(k);
            }
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let values = knots.iter().map(|&t| c1 * self.value_at(t) + c2 * other.value_at(t)).collect();
        TreatmentPlan::PiecewiseConstant { breakpoints: knots, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_lookup_is_right_continuous() {
        let p = TreatmentPlan::piecewise(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        assert_eq!(p.value_at(0.0), 0.0);
        assert_eq!(p.value_at(0.4999), 0.0);
        assert_eq!(p.value_at(0.5), 1.0);
        assert_eq!(p.value_at(1.0), 1.0);
    }

    #[test]
    fn rejects_malformed_knots() {
        assert!(TreatmentPlan::piecewise(vec![0.0, 0.5, 0.5], vec![1.0, 2.0, 3.0]).is_err());
        assert!(TreatmentPlan::piecewise(vec![0.1], vec![1.0]).is_err());
        assert!(TreatmentPlan::piecewise(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TreatmentPlan::tabulated(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(TreatmentPlan::constant(f64::INFINITY).validate(1.0).is_err());
    }

    #[test]
    fn rejects_knots_past_horizon() {
        let p = TreatmentPlan::piecewise(vec![0.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert!(p.validate(1.0).is_err());
        assert!(p.validate(2.0).is_ok());
    }

    #[test]
    fn pieces_clip_to_interval() {
        let p = TreatmentPlan::piecewise(vec![0.0, 0.3, 0.6], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.pieces(0.1, 0.7), vec![(0.1, 0.3, 1.0), (0.3, 0.6, 2.0), (0.6, 0.7, 3.0)]);
    }

    #[test]
    fn serde_tagged_form() {
        let p: TreatmentPlan = toml::from_str("kind = \"constant\"\nvalue = 1.0").unwrap();
        assert_eq!(p, TreatmentPlan::constant(1.0));
    }
}
