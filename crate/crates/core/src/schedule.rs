//! Step sizes and other per-iteration parameter schedules.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::topology::TheoryConstants;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizeSchedule {
    /// α_k = θ/(k + k0).
    Decaying { theta: f64, k0: u64 },
    /// α_k = α.
    Constant { alpha: f64 },
}

impl StepSizeSchedule {
    #[inline]
    pub fn alpha(&self, k: u64) -> f64 {
        match *self {
            StepSizeSchedule::Decaying { theta, k0 } => theta / (k as f64 + k0 as f64),
            StepSizeSchedule::Constant { alpha } => alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSizeSchedule::Decaying { theta, k0 } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return Err(Error::param(
                        "theta",
                        format!("must be positive, got {theta}"),
                    ));
                }
                if k0 == 0 {
                    return Err(Error::param("k0", "must be >= 1"));
                }
            }
            StepSizeSchedule::Constant { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::param(
                        "alpha",
                        format!("must be positive, got {alpha}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Step size admissible under the bounds: θ ≤ θ̲ and k0 > 2/ϕ for the
    /// decaying schedule, 0 < α ≤ θ̲ for the constant one.
    pub fn theory_decaying(consts: &TheoryConstants) -> Result<Self> {
        consts.require_valid()?;
        Ok(StepSizeSchedule::Decaying {
            theta: consts.theta_under,
            k0: consts.k0,
        })
    }

    pub fn theory_constant(consts: &TheoryConstants) -> Result<Self> {
        consts.require_valid()?;
        Ok(StepSizeSchedule::Constant {
            alpha: consts.theta_under,
        })
    }

    /// Lists every way the schedule violates the theory-mode conditions.
    pub fn theory_violations(&self, consts: &TheoryConstants) -> Vec<String> {
        let mut out = Vec::new();
        if let crate::topology::Regime::Invalid(why) = &consts.regime {
            out.push(format!("bound regime invalid: {why}"));
        }
        match *self {
            StepSizeSchedule::Decaying { theta, k0 } => {
                if theta > consts.theta_under {
                    out.push(format!(
                        "theta = {theta} exceeds theta_under = {}",
                        consts.theta_under
                    ));
                }
                if !(k0 as f64 > 2.0 / consts.phi) {
                    out.push(format!(
                        "k0 = {k0} is not above 2/phi = {}",
                        2.0 / consts.phi
                    ));
                }
            }
            StepSizeSchedule::Constant { alpha } => {
                if alpha > consts.theta_under {
                    out.push(format!(
                        "alpha = {alpha} exceeds theta_under = {}",
                        consts.theta_under
                    ));
                }
            }
        }
        out
    }
}

/// A scalar that may change with the iteration index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSchedule {
    Constant(f64),
    /// `base + scale / (k + offset)`.
    Decaying {
        base: f64,
        scale: f64,
        offset: f64,
    },
}

impl ParamSchedule {
    #[inline]
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            ParamSchedule::Constant(v) => v,
            ParamSchedule::Decaying {
                base,
                scale,
                offset,
            } => base + scale / (k as f64 + offset),
        }
    }
}

impl From<f64> for ParamSchedule {
    fn from(v: f64) -> Self {
        ParamSchedule::Constant(v)
    }
}
