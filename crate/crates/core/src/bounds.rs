//! Disagreement and optimal-gap bounds, evaluated term by term, and the
//! decaying-versus-constant comparison of measured runs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::MetricsLog;
use crate::math;
use crate::schedule::StepSizeSchedule;
use crate::topology::TheoryConstants;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerm {
    pub name: &'static str,
    pub value: f64,
}

/// A bound as a list of named terms; `total` is their sum in listed order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    pub terms: Vec<BoundTerm>,
    pub total: f64,
}

impl BoundBreakdown {
    fn new(terms: Vec<BoundTerm>) -> Self {
        let total = terms.iter().map(|t| t.value).sum();
        Self { terms, total }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// Expected disagreement after aggregation at iteration `k`:
/// `(1−ϕ)^k D0 + 2ιϑθ²/(ϕ(k+k0)²)` for the decaying schedule and
/// `(1−ϕ)^k D0 + ϑα²/ϕ` for the constant one. θ, `k0` and α come from the
/// schedule; ι is `(1 + 1/k0)²`.
pub fn disagreement_bound(
    consts: &TheoryConstants,
    d0: f64,
    k: u64,
    schedule: &StepSizeSchedule,
) -> Result<f64> {
    consts.require_valid()?;
    let c = consts;
    let transient = libm::pow(1.0 - c.phi, k as f64) * d0;
    let steady = match *schedule {
        StepSizeSchedule::Decaying { theta, k0 } => {
            let iota = (1.0 + 1.0 / k0 as f64) * (1.0 + 1.0 / k0 as f64);
            let kk = k as f64 + k0 as f64;
            2.0 * iota * c.vartheta * theta * theta / (c.phi * kk * kk)
        }
        StepSizeSchedule::Constant { alpha } => c.vartheta * alpha * alpha / c.phi,
    };
    Ok(transient + steady)
}

/// Expected disagreement before aggregation given the one after it:
/// `(1/(1−η) + 12|R|L²α²/η) D + 8|R|(σ²+ζ²)α²/η + 2n|R|ϖ²α²/η`.
pub fn pre_aggregation_bound(
    consts: &TheoryConstants,
    d_k: f64,
    alpha: f64,
) -> Result<BoundBreakdown> {
    let c = consts;
    if !(c.eta > 0.0 && c.eta < 1.0) {
        return Err(Error::RegimeInvalid(format!(
            "eta = {} is outside (0, 1)",
            c.eta
        )));
    }
    let p = &c.problem;
    let r = c.n_reliable as f64;
    let a2 = alpha * alpha;
    let l2 = p.smoothness * p.smoothness;
    Ok(BoundBreakdown::new(alloc::vec![
        BoundTerm {
            name: "disagreement",
            value: (1.0 / (1.0 - c.eta) + 12.0 * r * l2 * a2 / c.eta) * d_k,
        },
        BoundTerm {
            name: "sampling_and_heterogeneity",
            value: 8.0 * r * (p.sigma_sq + p.zeta_sq) * a2 / c.eta,
        },
        BoundTerm {
            name: "privacy_noise",
            value: 2.0 * p.dim as f64 * r * p.noise_var * a2 / c.eta,
        },
    ]))
}

/// What the optimal-gap bounds need besides the constants.
#[derive(Debug, Clone, Copy)]
pub struct GapBoundInputs<'a> {
    pub consts: &'a TheoryConstants,
    /// `f(x̄_0) − f*`.
    pub f0_gap: f64,
    /// Disagreement `D_0, …, D_K`, measured or bounded.
    pub disagreement: &'a [f64],
    pub schedule: StepSizeSchedule,
}

impl GapBoundInputs<'_> {
    fn horizon(&self) -> Result<u64> {
        if self.disagreement.is_empty() {
            return Err(Error::InvalidInput(String::from(
                "empty disagreement series",
            )));
        }
        for (k, d) in self.disagreement.iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "disagreement at {k} is not finite"
                )));
            }
        }
        if !self.f0_gap.is_finite() {
            return Err(Error::InvalidInput(String::from(
                "initial gap is not finite",
            )));
        }
        Ok(self.disagreement.len() as u64 - 1)
    }
}

fn floor_terms(c: &TheoryConstants) -> [BoundTerm; 2] {
    let p = &c.problem;
    let r = c.n_reliable as f64;
    let rho2 = c.rho * c.rho;
    let nu = p.pl_constant;
    [
        BoundTerm {
            name: "contraction_floor",
            value: 64.0 * r * rho2 * (p.sigma_sq + p.zeta_sq) / (nu * c.eta),
        },
        BoundTerm {
            name: "privacy_floor",
            value: 4.0 * p.dim as f64 / nu * (1.0 + 8.0 * r * rho2 / c.eta) * p.noise_var,
        },
    ]
}

/// Optimal-gap bound for `α_k = θ/(k + k0)` after `K ≥ 1` iterations.
pub fn decaying_gap_bound(inputs: &GapBoundInputs<'_>) -> Result<BoundBreakdown> {
    let c = inputs.consts;
    c.require_valid()?;
    let StepSizeSchedule::Decaying { theta, k0 } = inputs.schedule else {
        return Err(Error::InvalidInput(String::from(
            "decaying bound needs a decaying schedule",
        )));
    };
    let horizon = inputs.horizon()?;
    if horizon < 1 {
        return Err(Error::InvalidInput(String::from(
            "decaying bound needs K >= 1",
        )));
    }
    let p = &c.problem;
    let (nu, l, r) = (p.pl_constant, p.smoothness, c.n_reliable as f64);
    let rho2 = c.rho * c.rho;
    let log_span = math::ln(horizon as f64 + k0 as f64) - math::ln(k0 as f64);
    let (mut inv_sq, mut inv_weighted, mut lin_weighted) = (0.0, 0.0, 0.0);
    for (k, d) in inputs.disagreement.iter().enumerate() {
        let kk = k as f64 + k0 as f64;
        inv_sq += 1.0 / (kk * kk);
        inv_weighted += d / kk;
        lin_weighted += kk * d;
    }
    let [contraction, privacy] = floor_terms(c);
    Ok(BoundBreakdown::new(alloc::vec![
        BoundTerm {
            name: "initial_gap",
            value: inputs.f0_gap / (theta * nu * log_span),
        },
        BoundTerm {
            name: "sampling_variance",
            value: theta * l * p.sigma_sq * inv_sq / (nu * log_span),
        },
        BoundTerm {
            name: "disagreement_over_k",
            value: l * l / nu * (96.0 * r * rho2 / c.eta + 1.0 / r) * inv_weighted / log_span,
        },
        BoundTerm {
            name: "disagreement_times_k",
            value: 8.0 * rho2 / (nu * (1.0 - c.eta) * theta * theta) * lin_weighted / log_span,
        },
        contraction,
        privacy,
    ]))
}

/// Optimal-gap bound for a constant step after `K ≥ 0` iterations.
pub fn constant_gap_bound(inputs: &GapBoundInputs<'_>) -> Result<BoundBreakdown> {
    let c = inputs.consts;
    c.require_valid()?;
    let StepSizeSchedule::Constant { alpha } = inputs.schedule else {
        return Err(Error::InvalidInput(String::from(
            "constant bound needs a constant schedule",
        )));
    };
    let horizon = inputs.horizon()?;
    let p = &c.problem;
    let (nu, l, r) = (p.pl_constant, p.smoothness, c.n_reliable as f64);
    let rho2 = c.rho * c.rho;
    let span = nu * alpha * (horizon + 1) as f64;
    let d_sum: f64 = inputs.disagreement.iter().sum();
    let coeff =
        96.0 * r * l * l * rho2 / c.eta + l * l / r + 8.0 * rho2 / ((1.0 - c.eta) * alpha * alpha);
    let [contraction, privacy] = floor_terms(c);
    Ok(BoundBreakdown::new(alloc::vec![
        BoundTerm {
            name: "initial_gap",
            value: inputs.f0_gap / span,
        },
        BoundTerm {
            name: "disagreement_sum",
            value: coeff * d_sum / span,
        },
        BoundTerm {
            name: "sampling_variance",
            value: l * p.sigma_sq * alpha / nu,
        },
        contraction,
        privacy,
    ]))
}

/// Either bound, chosen by the schedule.
pub fn gap_bound(inputs: &GapBoundInputs<'_>) -> Result<BoundBreakdown> {
    match inputs.schedule {
        StepSizeSchedule::Decaying { .. } => decaying_gap_bound(inputs),
        StepSizeSchedule::Constant { .. } => constant_gap_bound(inputs),
    }
}

/// Final-window statistics of one regime, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSummary {
    pub label: String,
    pub consensus: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeComparison {
    pub decaying: RegimeSummary,
    pub constant: RegimeSummary,
    /// Per seed pair: decaying final-window consensus is strictly smaller.
    pub decaying_wins: Vec<bool>,
    /// `decaying − constant`.
    pub consensus_delta: f64,
    pub gap_delta: f64,
}

impl RegimeComparison {
    /// Both regimes, smallest final gap first.
    pub fn ordered_by_gap(&self) -> [&RegimeSummary; 2] {
        if self.decaying.gap <= self.constant.gap {
            [&self.decaying, &self.constant]
        } else {
            [&self.constant, &self.decaying]
        }
    }
}

fn summarize(label: &str, logs: &[MetricsLog], window: usize) -> RegimeSummary {
    let m = logs.len() as f64;
    RegimeSummary {
        label: String::from(label),
        consensus: logs
            .iter()
            .map(|l| l.final_window_consensus(window))
            .sum::<f64>()
            / m,
        gap: logs.iter().map(|l| l.final_gap()).sum::<f64>() / m,
    }
}

/// Compares seed-matched runs of the two step-size regimes over the last
/// `window` recorded rows.
pub fn regime_compare(
    decaying: &[MetricsLog],
    constant: &[MetricsLog],
    window: usize,
) -> Result<RegimeComparison> {
    if decaying.is_empty() || decaying.len() != constant.len() {
        return Err(Error::InvalidInput(format!(
            "need equally many runs per regime, got {} and {}",
            decaying.len(),
            constant.len()
        )));
    }
    for (a, b) in decaying.iter().zip(constant) {
        if !a.context.comparable(&b.context) {
            return Err(Error::InvalidInput(format!(
                "runs differ beyond the step size: {:?} vs {:?}",
                a.context, b.context
            )));
        }
    }
    let dec = summarize("decaying", decaying, window);
    let con = summarize("constant", constant, window);
    let wins = decaying
        .iter()
        .zip(constant)
        .map(|(a, b)| a.final_window_consensus(window) < b.final_window_consensus(window))
        .collect();
    Ok(RegimeComparison {
        consensus_delta: dec.consensus - con.consensus,
        gap_delta: dec.gap - con.gap,
        decaying: dec,
        constant: con,
        decaying_wins: wins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{theory_constants_from_lambda, ProblemConstants};

    fn consts(rho: f64, sigma_sq: f64, zeta_sq: f64, noise_var: f64) -> TheoryConstants {
        theory_constants_from_lambda(
            0.5,
            4,
            rho,
            ProblemConstants {
                smoothness: 2.0,
                pl_constant: 0.5,
                sigma_sq,
                zeta_sq,
                noise_var,
                dim: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn disagreement_bound_examples() {
        let c = consts(0.0, 0.1, 0.2, 0.0);
        let s = StepSizeSchedule::Decaying {
            theta: 0.01,
            k0: 20,
        };
        let at0 = disagreement_bound(&c, 0.0, 0, &s).unwrap();
        let iota = (1.0 + 1.0 / 20.0) * (1.0 + 1.0 / 20.0);
        let expected = 2.0 * iota * c.vartheta * 1e-4 / (c.phi * 400.0);
        assert!(((at0 - expected) / expected).abs() < 1e-12);
        let far = disagreement_bound(&c, 5.0, 1_000_000, &s).unwrap();
        assert!(far < 1e-9);
        let cs = StepSizeSchedule::Constant { alpha: 0.01 };
        let limit = disagreement_bound(&c, 5.0, 100_000, &cs).unwrap();
        assert!((limit - c.vartheta * 1e-4 / c.phi).abs() < 1e-12);
    }

    #[test]
    fn disagreement_bound_refuses_invalid_regime() {
        let c = consts(1.0, 0.1, 0.2, 0.0);
        let s = StepSizeSchedule::Constant { alpha: 0.01 };
        assert!(disagreement_bound(&c, 1.0, 3, &s).is_err());
    }

    #[test]
    fn pre_aggregation_examples() {
        let c = consts(0.0, 0.1, 0.2, 0.3);
        let b = pre_aggregation_bound(&c, 2.0, 0.0).unwrap();
        assert!((b.total - 2.0 / (1.0 - c.eta)).abs() < 1e-15);
        let b = consts(0.0, 0.1, 0.2, 0.0);
        let v = pre_aggregation_bound(&b, 0.0, 0.1).unwrap();
        let expected = 8.0 * 4.0 * 0.3 * 0.01 / b.eta;
        assert!((v.total - expected).abs() < 1e-12);
        let z = consts(0.0, 0.0, 0.0, 0.0);
        assert_eq!(pre_aggregation_bound(&z, 0.0, 0.3).unwrap().total, 0.0);
    }

    #[test]
    fn decaying_bound_reduces_to_initial_term() {
        let c = consts(0.0, 0.0, 0.0, 0.0);
        let d = [0.0; 11];
        let s = StepSizeSchedule::Decaying { theta: 0.5, k0: 20 };
        let inputs = GapBoundInputs {
            consts: &c,
            f0_gap: 3.0,
            disagreement: &d,
            schedule: s,
        };
        let b = decaying_gap_bound(&inputs).unwrap();
        let first = b.term("initial_gap").unwrap();
        assert_eq!(b.total, first);
        assert!(first > 0.0);
        let long = [0.0; 100_001];
        let later = decaying_gap_bound(&GapBoundInputs {
            disagreement: &long,
            ..inputs
        })
        .unwrap();
        assert!(later.total < first);
    }

    #[test]
    fn constant_floor_has_privacy_term() {
        let c = consts(0.01, 0.1, 0.2, 0.3);
        let d = [0.0; 5];
        let inputs = GapBoundInputs {
            consts: &c,
            f0_gap: 1.0,
            disagreement: &d,
            schedule: StepSizeSchedule::Constant { alpha: 0.05 },
        };
        let b = constant_gap_bound(&inputs).unwrap();
        let r = 4.0;
        let expected = 4.0 / 0.5 * (1.0 + 8.0 * r * 1e-4 / c.eta) * 0.3;
        assert!((b.term("privacy_floor").unwrap() - expected).abs() < 1e-12);
        let sum: f64 = b.terms.iter().map(|t| t.value).sum();
        assert_eq!(sum, b.total);
    }

    #[test]
    fn decaying_bound_needs_one_step() {
        let c = consts(0.0, 0.0, 0.0, 0.0);
        let inputs = GapBoundInputs {
            consts: &c,
            f0_gap: 1.0,
            disagreement: &[0.0],
            schedule: StepSizeSchedule::Decaying { theta: 0.5, k0: 20 },
        };
        assert!(decaying_gap_bound(&inputs).is_err());
    }
}
