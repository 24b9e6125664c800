//! Gaussian gradient masking and the local/global (ε, δ) calculators.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::RngCore;

use crate::math;
use crate::rng;
use crate::schedule::{ParamSchedule, StepSizeSchedule};
use crate::{Error, Result};

/// Per-coordinate variance of the masking noise.
///
/// `cap` is ϖ². An optional per-iteration schedule is clamped into `[0, cap]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub cap: f64,
    pub per_iteration: Option<ParamSchedule>,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec {
        cap: 0.0,
        per_iteration: None,
    };

    pub fn constant(variance: f64) -> Self {
        Self {
            cap: variance,
            per_iteration: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cap >= 0.0 && self.cap.is_finite()) {
            return Err(Error::param(
                "noise.variance",
                format!("must be finite and >= 0, got {}", self.cap),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn variance_at(&self, k: u64) -> f64 {
        match self.per_iteration {
            None => self.cap,
            Some(s) => s.at(k).clamp(0.0, self.cap),
        }
    }
}

/// Adds `N(0, variance·I)` to `g` in place. Zero variance leaves `g` untouched
/// and draws nothing.
pub fn mask_gradient<R: RngCore + ?Sized>(g: &mut [f64], variance: f64, rng: &mut R) {
    if variance == 0.0 {
        return;
    }
    let sd = math::sqrt(variance);
    for x in g.iter_mut() {
        *x += sd * rng::standard_normal(rng);
    }
}

/// `Δ_g = 2 B_g`: two scalar gradients bounded by `B_g` differ by at most that.
pub fn sensitivity_default(grad_bound: f64) -> f64 {
    2.0 * grad_bound
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "dp.epsilon must be > 0, got {eps}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "dp.delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// Single-iteration variance for (ε, δ)-DP of one masked gradient:
/// `2 Δ_g² s² (ln 1.25 − ln δ) / (d² ε²)`, where `s` is the step scale and
/// `d` is `k0` for the decaying schedule and 1 for the constant one.
pub fn required_variance_local_scaled(
    eps: f64,
    delta: f64,
    delta_g: f64,
    step_scale: f64,
    k0: Option<u64>,
) -> Result<f64> {
    check_eps_delta(eps, delta)?;
    if !(delta_g > 0.0 && delta_g.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "dp.sensitivity must be > 0, got {delta_g}"
        )));
    }
    if !(step_scale > 0.0 && step_scale.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step scale must be > 0, got {step_scale}"
        )));
    }
    let d = k0.map_or(1.0, |k| k as f64);
    let log_term = math::ln(1.25) - math::ln(delta);
    Ok(2.0 * delta_g * delta_g * step_scale * step_scale * log_term / (d * d * eps * eps))
}

/// [`required_variance_local_scaled`] with the schedule's own scale: θ and
/// `k0` for the decaying schedule, α for the constant one.
pub fn required_variance_local(
    eps: f64,
    delta: f64,
    delta_g: f64,
    schedule: &StepSizeSchedule,
) -> Result<f64> {
    match *schedule {
        StepSizeSchedule::Decaying { theta, k0 } => {
            required_variance_local_scaled(eps, delta, delta_g, theta, Some(k0))
        }
        StepSizeSchedule::Constant { alpha } => {
            required_variance_local_scaled(eps, delta, delta_g, alpha, None)
        }
    }
}

/// Inputs of the end-to-end privacy loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpBudget {
    pub delta: f64,
    pub grad_bound: f64,
    pub total_samples: u64,
    pub batch_size: u64,
    pub horizon: u64,
    pub renyi_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDp {
    pub epsilon: f64,
    /// ϖ² ≥ 6 B_g² / B_s².
    pub variance_ok: bool,
    /// `−log(B_s (ϖ² Q² / (4 B_g²) + 1) / Q)`.
    pub order_cap: f64,
    /// The configured order is within the cap; `None` when no order is set.
    pub order_ok: Option<bool>,
    pub warnings: Vec<String>,
}

impl GlobalDp {
    pub fn preconditions_hold(&self) -> bool {
        self.variance_ok && self.order_ok.unwrap_or(true) && self.order_cap > 0.0
    }
}

/// `ε = 20 B_g² K / (ϖ² Q²) + 2 B_g √(20 K ln(1/δ)) / (ϖ Q)`.
///
/// The closed form is always returned; failed preconditions are reported in
/// the flags and warnings rather than turned into errors.
pub fn global_epsilon(budget: &DpBudget, variance: f64) -> Result<GlobalDp> {
    let b = budget;
    if !(b.delta > 0.0 && b.delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "dp.delta must lie in (0, 1), got {}",
            b.delta
        )));
    }
    if !(b.grad_bound > 0.0) || b.total_samples == 0 || b.batch_size == 0 {
        return Err(Error::InvalidConfig(String::from(
            "dp.grad_bound, dp.total_samples and dp.batch_size must be positive",
        )));
    }
    if b.batch_size > b.total_samples {
        return Err(Error::InvalidConfig(format!(
            "dp.batch_size {} exceeds dp.total_samples {}",
            b.batch_size, b.total_samples
        )));
    }
    if !(variance > 0.0) {
        return Err(Error::param(
            "noise.variance",
            "global privacy needs positive variance",
        ));
    }
    let (bg, q, bs, k) = (
        b.grad_bound,
        b.total_samples as f64,
        b.batch_size as f64,
        b.horizon as f64,
    );
    let sd = math::sqrt(variance);
    let epsilon = 20.0 * bg * bg * k / (variance * q * q)
        + 2.0 * bg * math::sqrt(20.0 * k * math::ln(1.0 / b.delta)) / (sd * q);
    let variance_ok = variance >= 6.0 * bg * bg / (bs * bs);
    let order_cap = -math::ln(bs * (variance * q * q / (4.0 * bg * bg) + 1.0) / q);
    let order_ok = b.renyi_order.map(|o| o <= order_cap);
    let mut warnings = Vec::new();
    if !variance_ok {
        warnings.push(format!(
            "variance {variance} is below 6 B_g^2 / B_s^2 = {}",
            6.0 * bg * bg / (bs * bs)
        ));
    }
    if !(order_cap > 0.0) {
        warnings.push(format!("Renyi order cap {order_cap} is not positive"));
    }
    if order_ok == Some(false) {
        warnings.push(format!("Renyi order exceeds its cap {order_cap}"));
    }
    Ok(GlobalDp {
        epsilon,
        variance_ok,
        order_cap,
        order_ok,
        warnings,
    })
}
