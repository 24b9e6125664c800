//! Byzantine message falsification.
//!
//! Every attack is omniscient: it reads the current models and half-steps of
//! all reliable agents through a shared [`RoundView`], which it cannot mutate.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::schedule::ParamSchedule;
use crate::special;
use crate::topology::{AgentId, Network};
use crate::{Error, Result};

/// Immutable snapshot of one round, as seen by the attackers.
///
/// `models` and `half_steps` are flat `n_agents × dim` buffers; only the
/// reliable agents' slots are meaningful.
#[derive(Debug, Clone, Copy)]
pub struct RoundView<'a> {
    pub k: u64,
    pub net: &'a Network,
    pub dim: usize,
    pub models: &'a [f64],
    pub half_steps: &'a [f64],
}

impl<'a> RoundView<'a> {
    #[inline]
    pub fn model(&self, a: AgentId) -> &'a [f64] {
        &self.models[a.0 * self.dim..(a.0 + 1) * self.dim]
    }

    #[inline]
    pub fn half_step(&self, a: AgentId) -> &'a [f64] {
        &self.half_steps[a.0 * self.dim..(a.0 + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlieScope {
    /// Mean and spread over all reliable agents.
    #[default]
    Global,
    /// Mean and spread over the receiver and its reliable neighbors.
    Neighborhood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VictimPolicy {
    /// The sender's lowest-numbered reliable neighbor.
    Fixed,
    /// Cycles through the sender's reliable neighbors, one per round.
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    /// Byzantine agents echo each receiver's own half-step, which makes their
    /// edges behave like extra self-weight.
    None,
    SignFlip {
        scale: f64,
    },
    Alie {
        scope: AlieScope,
    },
    Dissensus {
        degree: f64,
    },
    PerturbedDup {
        mult: ParamSchedule,
        add: ParamSchedule,
        victim: VictimPolicy,
    },
    /// Nothing is published; receivers substitute zero vectors.
    Silent,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::SignFlip { .. } => "sign_flip",
            AttackKind::Alie { .. } => "alie",
            AttackKind::Dissensus { .. } => "dissensus",
            AttackKind::PerturbedDup { .. } => "perturbed_dup",
            AttackKind::Silent => "silent",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackKind::SignFlip { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                Err(Error::param(
                    "attack.s_b",
                    format!("must be finite and >= 0, got {scale}"),
                ))
            }
            AttackKind::Dissensus { degree } if !degree.is_finite() => Err(Error::param(
                "attack.d_r",
                format!("must be finite, got {degree}"),
            )),
            _ => Ok(()),
        }
    }
}

/// `−s_b · mean(models)` for the receiver's reliable neighborhood including itself.
pub fn sign_flip_msg(models: &[&[f64]], scale: f64, out: &mut [f64]) {
    mean_into(models, out);
    for o in out.iter_mut() {
        *o *= -scale;
    }
}

fn mean_into(models: &[&[f64]], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for m in models {
        for (o, v) in out.iter_mut().zip(m.iter()) {
            *o += v;
        }
    }
    let c = models.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= c);
}

/// Multiplier `a = Φ⁻¹((|V| − ⌊|V|/2 + 1⌋) / |R|)`.
///
/// Returns `a = 0` and a warning when the threshold falls outside (0, 1).
pub fn alie_coefficient(n_agents: usize, n_reliable: usize) -> (f64, Option<String>) {
    let supporters = n_agents as f64 - math::floor(n_agents as f64 / 2.0 + 1.0);
    let p = supporters / n_reliable.max(1) as f64;
    match special::normal_quantile(p) {
        Some(a) => (a, None),
        None => (
            0.0,
            Some(format!("ALIE threshold {p} is outside (0, 1); using a = 0")),
        ),
    }
}

/// `μ − a·σ` per coordinate, with the population standard deviation.
pub fn alie_msg(models: &[&[f64]], a: f64, out: &mut [f64]) {
    mean_into(models, out);
    let c = models.len().max(1) as f64;
    for (d, o) in out.iter_mut().enumerate() {
        let var = models
            .iter()
            .map(|m| (m[d] - *o) * (m[d] - *o))
            .sum::<f64>()
            / c;
        *o -= a * math::sqrt(var);
    }
}

/// `x_r − d_r Σ_{R_r} w_ri (x_i − x_r) / Σ_{B_r} w_rb`.
pub fn dissensus_msg(
    own: &[f64],
    reliable: &[(f64, &[f64])],
    byz_weight: f64,
    degree: f64,
    out: &mut [f64],
) -> Result<()> {
    if !(byz_weight > 0.0) {
        return Err(Error::InvalidInput(String::from(
            "dissensus message needs positive Byzantine weight at the receiver",
        )));
    }
    out.copy_from_slice(own);
    let s = degree / byz_weight;
    for (w, xi) in reliable {
        for ((o, a), b) in out.iter_mut().zip(xi.iter()).zip(own) {
            *o -= s * w * (a - b);
        }
    }
    Ok(())
}

/// `p̃ · x_victim + p`.
pub fn perturbed_dup_msg(victim: &[f64], mult: f64, add: f64, out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(victim) {
        *o = mult * v + add;
    }
}

/// An attack bound to a network, with its static quantities precomputed.
#[derive(Debug, Clone)]
pub struct AttackPlan {
    kind: AttackKind,
    alie_a: f64,
    pub warnings: Vec<String>,
}

/// Per-round cache for broadcast attacks.
#[derive(Debug, Clone, Default)]
pub struct AttackRound {
    /// One broadcast message per Byzantine agent, in `net.byzantine()` order.
    broadcast: Vec<Vec<f64>>,
}

impl AttackPlan {
    pub fn new(kind: AttackKind, net: &Network) -> Result<Self> {
        kind.validate()?;
        let mut warnings = Vec::new();
        let mut alie_a = 0.0;
        if let AttackKind::Alie { .. } = kind {
            let (a, w) = alie_coefficient(net.n_agents(), net.reliable().len());
            alie_a = a;
            warnings.extend(w);
        }
        Ok(Self {
            kind,
            alie_a,
            warnings,
        })
    }

    pub fn kind(&self) -> &AttackKind {
        &self.kind
    }

    pub fn alie_coefficient(&self) -> f64 {
        self.alie_a
    }

    /// Computes the broadcast messages of this round, if the attack has any.
    pub fn prepare(&self, view: &RoundView<'_>, cache: &mut AttackRound) {
        let net = view.net;
        let byz = net.byzantine();
        cache.broadcast.resize_with(byz.len(), Vec::new);
        match self.kind {
            AttackKind::Alie {
                scope: AlieScope::Global,
            } => {
                let models: Vec<&[f64]> = net.reliable().iter().map(|&a| view.model(a)).collect();
                for msg in cache.broadcast.iter_mut() {
                    msg.resize(view.dim, 0.0);
                    alie_msg(&models, self.alie_a, msg);
                }
            }
            AttackKind::PerturbedDup { mult, add, victim } => {
                let (m, p) = (mult.at(view.k), add.at(view.k));
                for (slot, &b) in byz.iter().enumerate() {
                    let targets: Vec<AgentId> = net.reliable_neighbors(b).collect();
                    let msg = &mut cache.broadcast[slot];
                    msg.resize(view.dim, 0.0);
                    if targets.is_empty() {
                        continue;
                    }
                    let v = match victim {
                        VictimPolicy::Fixed => targets[0],
                        VictimPolicy::RoundRobin => {
                            targets[((view.k + slot as u64) % targets.len() as u64) as usize]
                        }
                    };
                    perturbed_dup_msg(view.model(v), m, p, msg);
                }
            }
            _ => {}
        }
    }

    /// Writes what Byzantine agent `sender` publishes to reliable `receiver`.
    /// Returns `false` when nothing is published.
    pub fn message(
        &self,
        view: &RoundView<'_>,
        cache: &AttackRound,
        sender: AgentId,
        receiver: AgentId,
        out: &mut [f64],
    ) -> Result<bool> {
        let net = view.net;
        let slot = || {
            net.byzantine()
                .binary_search(&sender)
                .map_err(|_| Error::InvalidInput(format!("agent {} is not Byzantine", sender.0)))
        };
        match self.kind {
            AttackKind::None => out.copy_from_slice(view.half_step(receiver)),
            AttackKind::Silent => return Ok(false),
            AttackKind::SignFlip { scale } => {
                let models = neighborhood(view, receiver);
                sign_flip_msg(&models, scale, out);
            }
            AttackKind::Alie {
                scope: AlieScope::Neighborhood,
            } => {
                let models = neighborhood(view, receiver);
                alie_msg(&models, self.alie_a, out);
            }
            AttackKind::Alie {
                scope: AlieScope::Global,
            }
            | AttackKind::PerturbedDup { .. } => {
                out.copy_from_slice(&cache.broadcast[slot()?]);
            }
            AttackKind::Dissensus { degree } => {
                let reliable: Vec<(f64, &[f64])> = net
                    .reliable_neighbors(receiver)
                    .map(|i| (net.weight(receiver, i), view.model(i)))
                    .collect();
                dissensus_msg(
                    view.model(receiver),
                    &reliable,
                    net.byzantine_weight(receiver),
                    degree,
                    out,
                )?;
            }
        }
        Ok(true)
    }

    /// Convenience wrapper returning a fresh vector (`None` when silent).
    pub fn message_vec(
        &self,
        view: &RoundView<'_>,
        sender: AgentId,
        receiver: AgentId,
    ) -> Result<Option<Vec<f64>>> {
        let mut cache = AttackRound::default();
        self.prepare(view, &mut cache);
        let mut out = vec![0.0; view.dim];
        Ok(self
            .message(view, &cache, sender, receiver, &mut out)?
            .then_some(out))
    }
}

fn neighborhood<'a>(view: &RoundView<'a>, receiver: AgentId) -> Vec<&'a [f64]> {
    core::iter::once(receiver)
        .chain(view.net.reliable_neighbors(receiver))
        .map(|a| view.model(a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_flip_examples() {
        let mut out = [0.0];
        sign_flip_msg(&[&[3.0], &[3.0], &[3.0]], 1.0, &mut out);
        assert_eq!(out, [-3.0]);
        sign_flip_msg(&[&[2.0], &[4.0]], 0.5, &mut out);
        assert_eq!(out, [-1.5]);
        sign_flip_msg(&[&[2.0], &[4.0]], 0.0, &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn alie_examples() {
        let mut out = [0.0];
        alie_msg(&[&[1.5], &[1.5]], 0.7, &mut out);
        assert_eq!(out, [1.5]);
        alie_msg(&[&[0.0], &[2.0]], 1.0, &mut out);
        // population std of {0, 2} is 1
        assert_eq!(out, [0.0]);
        let (a, w) = alie_coefficient(100, 90);
        assert!(w.is_none());
        assert!((a - 0.1116).abs() < 1e-4);
        let (a0, w0) = alie_coefficient(4, 1);
        assert_eq!(a0, 0.0);
        assert!(w0.is_some());
    }

    #[test]
    fn dissensus_examples() {
        let mut out = [0.0];
        dissensus_msg(&[0.0], &[(0.25, &[1.0])], 0.25, 1.0, &mut out).unwrap();
        assert_eq!(out, [-1.0]);
        dissensus_msg(
            &[2.0],
            &[(0.25, &[2.0]), (0.1, &[2.0])],
            0.25,
            3.0,
            &mut out,
        )
        .unwrap();
        assert_eq!(out, [2.0]);
        dissensus_msg(&[2.0], &[(0.25, &[7.0])], 0.25, 0.0, &mut out).unwrap();
        assert_eq!(out, [2.0]);
        assert!(dissensus_msg(&[0.0], &[], 0.0, 1.0, &mut out).is_err());
    }

    #[test]
    fn perturbed_dup_examples() {
        let mut out = [0.0];
        perturbed_dup_msg(&[2.0], 1.0, 0.0, &mut out);
        assert_eq!(out, [2.0]);
        perturbed_dup_msg(&[2.0], 1.01, 0.001, &mut out);
        assert!((out[0] - 2.021).abs() < 1e-15);
        perturbed_dup_msg(&[2.0], 0.0, 0.3, &mut out);
        assert_eq!(out, [0.3]);
    }
}
