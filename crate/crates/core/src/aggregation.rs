//! Self-centered clipping (SCC), its clipping-radius strategies, and the
//! plain gossip mean used as the non-robust baseline.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::schedule::ParamSchedule;
use crate::topology::{AgentId, STOCHASTIC_TOL};
use crate::{Error, Result};

/// Smallest clipping radius ever used; degenerate radii are raised to it.
pub const TAU_FLOOR: f64 = 1e-12;

/// What agent `i` holds when it aggregates: its own half-step and one vector
/// per neighbor. Silent Byzantine neighbors appear with a zero vector.
#[derive(Debug, Clone, Copy)]
pub struct Inbox<'a> {
    pub self_id: AgentId,
    pub self_model: &'a [f64],
    pub received: &'a [(AgentId, &'a [f64])],
}

impl Inbox<'_> {
    fn check(&self, weights: &[f64]) -> Result<()> {
        let n = self.self_model.len();
        let mut total = weights[self.self_id.0];
        for (j, v) in self.received {
            if v.len() != n {
                return Err(Error::InvalidInput(format!(
                    "message from agent {} has dimension {}, expected {n}",
                    j.0,
                    v.len()
                )));
            }
            total += weights[j.0];
        }
        if (total - 1.0).abs() > STOCHASTIC_TOL * (1 + self.received.len()) as f64 {
            return Err(Error::InvalidInput(format!(
                "weights of agent {} and its inbox sum to {total}, not 1",
                self.self_id.0
            )));
        }
        Ok(())
    }
}

/// Scale applied by `Clip` to a vector of norm `norm`.
#[inline]
pub fn clip_factor(norm: f64, tau: f64) -> f64 {
    if norm > tau {
        tau / norm
    } else {
        1.0
    }
}

/// `v · min{1, τ/‖v‖}`. `τ = +∞` is the identity.
pub fn clip(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    let s = clip_factor(math::norm(v), tau);
    Ok(v.iter().map(|x| x * s).collect())
}

/// `Σ_{j∈N_i∪{i}} w_ij (x̃_i + Clip(x̃_j − x̃_i, τ))`, written into `out`.
pub fn scc_aggregate_into(
    inbox: &Inbox<'_>,
    weights: &[f64],
    tau: f64,
    out: &mut [f64],
) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    inbox.check(weights)?;
    scc_mix(inbox, weights, tau, out);
    Ok(())
}

/// [`scc_aggregate_into`] for inboxes already known to be consistent.
pub(crate) fn scc_mix(inbox: &Inbox<'_>, weights: &[f64], tau: f64, out: &mut [f64]) {
    let own = inbox.self_model;
    if let ([xi], [o]) = (own, &mut *out) {
        let mut acc = *xi;
        for (j, v) in inbox.received {
            let d = v[0] - xi;
            acc += weights[j.0] * clip_factor(d.abs(), tau) * d;
        }
        *o = acc;
        return;
    }
    out.copy_from_slice(own);
    for (j, v) in inbox.received {
        let w = weights[j.0];
        let d = math::dist_sq(v, own);
        let s = w * clip_factor(math::sqrt(d), tau);
        for ((o, vj), xi) in out.iter_mut().zip(v.iter()).zip(own) {
            *o += s * (vj - xi);
        }
    }
}

pub fn scc_aggregate(inbox: &Inbox<'_>, weights: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; inbox.self_model.len()];
    scc_aggregate_into(inbox, weights, tau, &mut out)?;
    Ok(out)
}

/// `Σ_{j∈N_i∪{i}} w_ij x̃_j`, written into `out`.
pub fn gossip_mean_into(inbox: &Inbox<'_>, weights: &[f64], out: &mut [f64]) -> Result<()> {
    inbox.check(weights)?;
    mean_mix(inbox, weights, out);
    Ok(())
}

pub(crate) fn mean_mix(inbox: &Inbox<'_>, weights: &[f64], out: &mut [f64]) {
    let ws = weights[inbox.self_id.0];
    for (o, x) in out.iter_mut().zip(inbox.self_model) {
        *o = ws * x;
    }
    for (j, v) in inbox.received {
        let w = weights[j.0];
        for (o, vj) in out.iter_mut().zip(v.iter()) {
            *o += w * vj;
        }
    }
}

pub fn gossip_mean(inbox: &Inbox<'_>, weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; inbox.self_model.len()];
    gossip_mean_into(inbox, weights, &mut out)?;
    Ok(out)
}

fn reliable_spread(inbox: &Inbox<'_>, weights: &[f64], is_byzantine: &[bool]) -> f64 {
    inbox
        .received
        .iter()
        .filter(|(j, _)| !is_byzantine[j.0])
        .map(|(j, v)| weights[j.0] * math::dist_sq(inbox.self_model, v))
        .sum()
}

/// `√(Σ_{R_i} w_ij ‖x̃_i − x̃_j‖² / Σ_{B_i} w_ij)`.
///
/// `None` when agent `i` has no Byzantine weight, so the radius is unbounded
/// and the caller must pick a fallback. A zero spread gives [`TAU_FLOOR`].
pub fn tau_byzantine_weighted(
    inbox: &Inbox<'_>,
    weights: &[f64],
    is_byzantine: &[bool],
) -> Option<f64> {
    let (mut byz, mut spread) = (0.0, 0.0);
    for (j, v) in inbox.received {
        let w = weights[j.0];
        if is_byzantine[j.0] {
            byz += w;
        } else {
            spread += w * math::dist_sq(inbox.self_model, v);
        }
    }
    if byz <= 0.0 {
        return None;
    }
    Some(math::sqrt(spread / byz).max(TAU_FLOOR))
}

/// `Σ_{R_i} w_ij ‖x̃_i − x̃_j‖²`, floored at [`TAU_FLOOR`].
pub fn tau_reliable_spread(inbox: &Inbox<'_>, weights: &[f64], is_byzantine: &[bool]) -> f64 {
    reliable_spread(inbox, weights, is_byzantine).max(TAU_FLOOR)
}

/// Radius used by the Byzantine-weighted strategy at agents without Byzantine
/// neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoByzantineFallback {
    /// τ = +∞, the limit of the formula as the Byzantine weight vanishes.
    #[default]
    Unclipped,
    ReliableSpread,
    Manual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClipParamStrategy {
    /// Same radius at every agent, possibly varying with the iteration.
    Manual(ParamSchedule),
    /// Reads ground-truth Byzantine labels; simulation only.
    OracleByzantineWeighted { fallback: NoByzantineFallback },
    /// Reads ground-truth labels; simulation only.
    OracleReliableSpread,
}

impl ClipParamStrategy {
    pub fn uses_labels(&self) -> bool {
        !matches!(self, ClipParamStrategy::Manual(_))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClipParamStrategy::Manual(ParamSchedule::Constant(t)) if !(t > 0.0) => Err(
                Error::param("tau", format!("manual radius must be positive, got {t}")),
            ),
            ClipParamStrategy::Manual(ParamSchedule::Decaying {
                base,
                scale,
                offset,
            }) if !(base > 0.0 || (base >= 0.0 && scale > 0.0 && offset > 0.0)) => Err(
                Error::param("tau", "manual radius schedule must stay positive"),
            ),
            ClipParamStrategy::OracleByzantineWeighted {
                fallback: NoByzantineFallback::Manual(t),
            } if !(t > 0.0) => Err(Error::param(
                "tau_fallback",
                format!("must be positive, got {t}"),
            )),
            _ => Ok(()),
        }
    }

    /// Radius for agent `inbox.self_id` at iteration `k`.
    pub fn resolve(
        &self,
        k: u64,
        inbox: &Inbox<'_>,
        weights: &[f64],
        is_byzantine: &[bool],
    ) -> f64 {
        match *self {
            ClipParamStrategy::Manual(s) => s.at(k).max(TAU_FLOOR),
            ClipParamStrategy::OracleByzantineWeighted { fallback } => {
                match tau_byzantine_weighted(inbox, weights, is_byzantine) {
                    Some(t) => t,
                    None => match fallback {
                        NoByzantineFallback::Unclipped => f64::INFINITY,
                        NoByzantineFallback::ReliableSpread => {
                            tau_reliable_spread(inbox, weights, is_byzantine)
                        }
                        NoByzantineFallback::Manual(t) => t,
                    },
                }
            }
            ClipParamStrategy::OracleReliableSpread => {
                tau_reliable_spread(inbox, weights, is_byzantine)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregator {
    Scc(ClipParamStrategy),
    Mean,
}

impl Aggregator {
    pub fn uses_labels(&self) -> bool {
        matches!(self, Aggregator::Scc(s) if s.uses_labels())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Aggregator::Scc(s) => s.validate(),
            Aggregator::Mean => Ok(()),
        }
    }

    pub fn aggregate_into(
        &self,
        k: u64,
        inbox: &Inbox<'_>,
        weights: &[f64],
        is_byzantine: &[bool],
        out: &mut [f64],
    ) -> Result<()> {
        match self {
            Aggregator::Scc(s) => {
                let tau = s.resolve(k, inbox, weights, is_byzantine);
                scc_aggregate_into(inbox, weights, tau, out)
            }
            Aggregator::Mean => gossip_mean_into(inbox, weights, out),
        }
    }

    /// Skips the per-inbox consistency checks; the engine validates the
    /// network once per run.
    pub(crate) fn mix(
        &self,
        k: u64,
        inbox: &Inbox<'_>,
        weights: &[f64],
        is_byzantine: &[bool],
        out: &mut [f64],
    ) {
        match self {
            Aggregator::Scc(s) => {
                let tau = s.resolve(k, inbox, weights, is_byzantine);
                scc_mix(inbox, weights, tau, out)
            }
            Aggregator::Mean => mean_mix(inbox, weights, out),
        }
    }
}
