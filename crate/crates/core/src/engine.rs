//! The synchronous round loop.
//!
//! Each round has two phases. First every reliable agent samples a gradient,
//! masks it with Gaussian noise and takes a local step, producing its
//! half-step. Then Byzantine agents publish their messages against an
//! immutable snapshot, and every reliable agent aggregates its inbox. Nobody
//! sees a value produced later in the same round.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::aggregation::{Aggregator, Inbox};
use crate::attacks::{AttackKind, AttackPlan, AttackRound, RoundView};
use crate::bounds::disagreement_bound;
use crate::metrics::spread_with_mean;
use crate::objectives::{checked_gap, GlobalProblem};
use crate::privacy::{mask_gradient, NoiseSpec};
use crate::rng::{self, SimRng, Stream};
use crate::schedule::StepSizeSchedule;
use crate::topology::{AgentId, Network, TheoryConstants};
use crate::{Error, Result};

/// Any model coordinate beyond this magnitude ends the run as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// Each coordinate i.i.d. uniform on `[lo, hi]`, from the agent's init stream.
    Uniform { lo: f64, hi: f64 },
    /// All agents start at the same point.
    Constant(Vec<f64>),
    /// One starting point per agent, Byzantine slots included.
    PerAgent(Vec<Vec<f64>>),
    /// Uniform on [−5, 5].
    #[default]
    Default,
}

#[derive(Debug, Clone)]
pub struct RunSpec<'a> {
    pub net: &'a Network,
    pub problem: &'a GlobalProblem,
    pub schedule: StepSizeSchedule,
    pub noise: NoiseSpec,
    pub attack: AttackKind,
    pub aggregator: Aggregator,
    pub horizon: u64,
    pub seed: u64,
    pub init: Init,
    /// Constants for the disagreement-bound column; the column is NaN when
    /// absent or when the regime is invalid.
    pub theory: Option<&'a TheoryConstants>,
    /// Reject schedules that violate the theory step-size conditions.
    pub enforce_theory: bool,
    /// Permit clipping strategies that read ground-truth Byzantine labels.
    pub allow_oracle: bool,
    /// Record every `record_every`-th iteration (and always the last one).
    pub record_every: u64,
    /// Keep every reliable model at each recorded row.
    pub keep_traces: bool,
}

impl<'a> RunSpec<'a> {
    pub fn new(net: &'a Network, problem: &'a GlobalProblem, schedule: StepSizeSchedule) -> Self {
        Self {
            net,
            problem,
            schedule,
            noise: NoiseSpec::NONE,
            attack: AttackKind::None,
            aggregator: Aggregator::Mean,
            horizon: 0,
            seed: 0,
            init: Init::Default,
            theory: None,
            enforce_theory: false,
            allow_oracle: false,
            record_every: 1,
            keep_traces: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub k: u64,
    /// D_k after aggregation.
    pub consensus: f64,
    /// D̃_k before aggregation; NaN on the last row, which has no half-step.
    pub pre_agg: f64,
    /// f(x̄_k).
    pub f_avg: f64,
    /// min_{j ≤ k} f(x̄_j).
    pub f_best: f64,
    /// f_best − f*.
    pub gap: f64,
    pub dk_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Diverged { k: u64 },
}

/// Identity of a run, minus the step size.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub seed: u64,
    pub horizon: u64,
    pub network: u64,
    pub problem: String,
    pub attack: &'static str,
    pub n_reliable: usize,
}

impl RunContext {
    pub fn comparable(&self, other: &RunContext) -> bool {
        self == other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    pub context: RunContext,
    pub rows: Vec<MetricsRow>,
    pub status: RunStatus,
    /// Reliable models per recorded row, in `net.reliable()` order.
    pub traces: Option<Vec<Vec<f64>>>,
    pub warnings: Vec<String>,
}

impl MetricsLog {
    pub fn last(&self) -> &MetricsRow {
        self.rows.last().expect("a log always has its initial row")
    }

    pub fn final_gap(&self) -> f64 {
        match self.status {
            RunStatus::Completed => self.last().gap,
            RunStatus::Diverged { .. } => f64::INFINITY,
        }
    }

    pub fn final_consensus(&self) -> f64 {
        match self.status {
            RunStatus::Completed => self.last().consensus,
            RunStatus::Diverged { .. } => f64::INFINITY,
        }
    }

    /// Mean D_k over the last `window` rows (infinite if diverged).
    pub fn final_window_consensus(&self, window: usize) -> f64 {
        if let RunStatus::Diverged { .. } = self.status {
            return f64::INFINITY;
        }
        let w = window.clamp(1, self.rows.len());
        self.rows[self.rows.len() - w..]
            .iter()
            .map(|r| r.consensus)
            .sum::<f64>()
            / w as f64
    }

    pub fn consensus_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.consensus).collect()
    }

    pub fn gap_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap).collect()
    }
}

/// Everything computed in one round, for observers.
#[derive(Debug, Clone, Copy)]
pub struct RoundState<'a> {
    pub k: u64,
    pub alpha: f64,
    pub dim: usize,
    pub reliable: &'a [AgentId],
    /// Flat `n_agents × dim` buffers.
    pub models: &'a [f64],
    pub half_steps: &'a [f64],
    pub gradients: &'a [f64],
    pub noises: &'a [f64],
    /// Models after aggregation.
    pub next_models: &'a [f64],
}

impl RoundState<'_> {
    pub fn slot<'b>(&self, buf: &'b [f64], a: AgentId) -> &'b [f64] {
        &buf[a.0 * self.dim..(a.0 + 1) * self.dim]
    }
}

/// Read-only hook called after every completed round.
pub trait RoundObserver {
    fn on_round(&mut self, state: &RoundState<'_>);
}

impl RoundObserver for () {
    fn on_round(&mut self, _: &RoundState<'_>) {}
}

impl<F: FnMut(&RoundState<'_>)> RoundObserver for F {
    fn on_round(&mut self, state: &RoundState<'_>) {
        self(state)
    }
}

pub fn run(spec: &RunSpec<'_>) -> Result<MetricsLog> {
    run_observed(spec, &mut ())
}

fn check(spec: &RunSpec<'_>) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    spec.schedule.validate()?;
    spec.noise.validate()?;
    spec.aggregator.validate()?;
    spec.attack.validate()?;
    if spec.record_every == 0 {
        return Err(Error::param("record_every", "must be >= 1"));
    }
    if spec.aggregator.uses_labels() && !spec.allow_oracle {
        return Err(Error::InvalidConfig(String::from(
            "oracle clipping radius needs simulation privileges to be enabled",
        )));
    }
    let reliable = spec.net.reliable();
    if !spec.problem.agents().eq(reliable.iter().copied()) {
        return Err(Error::InvalidConfig(String::from(
            "problem agents do not match the network's reliable agents",
        )));
    }
    if !spec.problem.f_star.is_finite() {
        return Err(Error::InvalidConfig(String::from(
            "problem has no finite f_star",
        )));
    }
    match spec.theory {
        Some(c) => {
            let v = spec.schedule.theory_violations(c);
            if !v.is_empty() {
                if spec.enforce_theory {
                    return Err(Error::InvalidConfig(format!(
                        "schedule violates the theory conditions: {}",
                        v.join("; ")
                    )));
                }
                warnings.push(format!("free mode: {}", v.join("; ")));
            }
        }
        None if spec.enforce_theory => {
            return Err(Error::InvalidConfig(String::from(
                "theory mode needs theory constants",
            )));
        }
        None => {}
    }
    Ok(warnings)
}

fn initial_models(spec: &RunSpec<'_>) -> Result<Vec<f64>> {
    let (n_agents, dim) = (spec.net.n_agents(), spec.problem.dim());
    let mut x = vec![0.0; n_agents * dim];
    match &spec.init {
        Init::Default | Init::Uniform { .. } => {
            let (lo, hi) = match spec.init {
                Init::Uniform { lo, hi } => (lo, hi),
                _ => (-5.0, 5.0),
            };
            if !(lo <= hi) {
                return Err(Error::param("init", format!("empty interval [{lo}, {hi}]")));
            }
            for &a in spec.net.reliable() {
                let mut r = rng::stream_rng(spec.seed, a.0 as u64, Stream::Init);
                for v in &mut x[a.0 * dim..(a.0 + 1) * dim] {
                    *v = rng::uniform(&mut r, lo, hi);
                }
            }
        }
        Init::Constant(c) => {
            if c.len() != dim {
                return Err(Error::param("init", format!("needs {dim} coordinates")));
            }
            for &a in spec.net.reliable() {
                x[a.0 * dim..(a.0 + 1) * dim].copy_from_slice(c);
            }
        }
        Init::PerAgent(all) => {
            if all.len() != n_agents || all.iter().any(|v| v.len() != dim) {
                return Err(Error::param(
                    "init",
                    format!("needs {n_agents} points of dimension {dim}"),
                ));
            }
            for (a, v) in all.iter().enumerate() {
                x[a * dim..(a + 1) * dim].copy_from_slice(v);
            }
        }
    }
    Ok(x)
}

/// Where each reliable agent finds its neighbors' vectors.
enum Source {
    Reliable(AgentId),
    /// Slot in the per-round Byzantine message buffer.
    Byzantine(AgentId, usize),
}

struct Tracker<'a> {
    spec: &'a RunSpec<'a>,
    mean: Vec<f64>,
    f_best: f64,
    d0: f64,
    rows: Vec<MetricsRow>,
    traces: Option<Vec<Vec<f64>>>,
}

impl Tracker<'_> {
    fn spread(&mut self, buf: &[f64]) -> f64 {
        let dim = self.spec.problem.dim();
        let net = self.spec.net;
        spread_with_mean(
            net.reliable()
                .iter()
                .map(|a| &buf[a.0 * dim..(a.0 + 1) * dim]),
            &mut self.mean,
        )
    }

    /// Updates the running best and, when `record`, appends a row.
    fn observe(&mut self, k: u64, x: &[f64], pre_agg: Option<f64>, record: bool) -> Result<()> {
        let consensus = self.spread(x);
        let f_avg = self.spec.problem.value(&self.mean);
        self.f_best = self.f_best.min(f_avg);
        let gap = checked_gap(self.f_best, self.spec.problem.f_star, || {
            format!("iteration {k}")
        })?;
        if k == 0 {
            self.d0 = consensus;
        }
        if !record {
            return Ok(());
        }
        let dk_bound = match self.spec.theory {
            Some(c) if c.regime_valid() => {
                disagreement_bound(c, self.d0, k, &self.spec.schedule).unwrap_or(f64::NAN)
            }
            _ => f64::NAN,
        };
        self.rows.push(MetricsRow {
            k,
            consensus,
            pre_agg: pre_agg.unwrap_or(f64::NAN),
            f_avg,
            f_best: self.f_best,
            gap,
            dk_bound,
        });
        if let Some(t) = &mut self.traces {
            let dim = self.spec.problem.dim();
            t.push(
                self.spec
                    .net
                    .reliable()
                    .iter()
                    .flat_map(|a| x[a.0 * dim..(a.0 + 1) * dim].iter().copied())
                    .collect(),
            );
        }
        Ok(())
    }
}

fn diverged(buf: &[f64], reliable: &[AgentId], dim: usize) -> bool {
    reliable.iter().any(|a| {
        buf[a.0 * dim..(a.0 + 1) * dim]
            .iter()
            .any(|v| !(v.abs() <= DIVERGENCE_LIMIT))
    })
}

/// Runs `spec.horizon` rounds, calling `observer` after each one.
pub fn run_observed(spec: &RunSpec<'_>, observer: &mut dyn RoundObserver) -> Result<MetricsLog> {
    let warnings = check(spec)?;
    let net = spec.net;
    let prob = spec.problem;
    let dim = prob.dim();
    let n_agents = net.n_agents();
    let reliable = net.reliable();
    let is_byz = net.byzantine_mask();
    let plan = AttackPlan::new(spec.attack, net)?;
    let mut warnings = warnings;
    warnings.extend(plan.warnings.iter().cloned());

    let mut x = initial_models(spec)?;
    let mut next = x.clone();
    let mut half = x.clone();
    let mut grads = vec![0.0; n_agents * dim];
    let mut noises = vec![0.0; n_agents * dim];

    let mut grad_rngs: Vec<SimRng> = reliable
        .iter()
        .map(|a| rng::stream_rng(spec.seed, a.0 as u64, Stream::Gradient))
        .collect();
    let mut noise_rngs: Vec<SimRng> = reliable
        .iter()
        .map(|a| rng::stream_rng(spec.seed, a.0 as u64, Stream::Noise))
        .collect();

    let mut byz_slots = 0usize;
    let sources: Vec<Vec<Source>> = reliable
        .iter()
        .map(|&i| {
            net.neighbors(i)
                .iter()
                .map(|&j| {
                    if is_byz[j.0] {
                        byz_slots += 1;
                        Source::Byzantine(j, byz_slots - 1)
                    } else {
                        Source::Reliable(j)
                    }
                })
                .collect()
        })
        .collect();
    let mut byz_msgs = vec![0.0; byz_slots * dim];
    let mut cache = AttackRound::default();

    let mut tracker = Tracker {
        spec,
        mean: vec![0.0; dim],
        f_best: f64::INFINITY,
        d0: 0.0,
        rows: Vec::new(),
        traces: spec.keep_traces.then(Vec::new),
    };
    let context = RunContext {
        seed: spec.seed,
        horizon: spec.horizon,
        network: net.fingerprint(),
        problem: prob.label.clone(),
        attack: spec.attack.name(),
        n_reliable: reliable.len(),
    };

    let mut status = RunStatus::Completed;
    if spec.horizon == 0 {
        tracker.observe(0, &x, None, true)?;
    }
    for k in 0..spec.horizon {
        let alpha = spec.schedule.alpha(k);
        let variance = spec.noise.variance_at(k);
        for (idx, &i) in reliable.iter().enumerate() {
            let s = i.0 * dim..(i.0 + 1) * dim;
            let local = prob.local(i).expect("checked against the network");
            local.sample_gradient(&x[s.clone()], &mut grad_rngs[idx], &mut grads[s.clone()]);
            let n = &mut noises[s.clone()];
            n.iter_mut().for_each(|v| *v = 0.0);
            mask_gradient(n, variance, &mut noise_rngs[idx]);
            for d in s {
                half[d] = x[d] - alpha * (grads[d] + noises[d]);
            }
        }
        let pre_agg = tracker.spread(&half);
        let record = k % spec.record_every == 0;
        tracker.observe(k, &x, Some(pre_agg), record)?;

        let view = RoundView {
            k,
            net,
            dim,
            models: &x,
            half_steps: &half,
        };
        plan.prepare(&view, &mut cache);
        for (idx, &i) in reliable.iter().enumerate() {
            for src in &sources[idx] {
                if let Source::Byzantine(b, slot) = *src {
                    let out = &mut byz_msgs[slot * dim..(slot + 1) * dim];
                    if !plan.message(&view, &cache, b, i, out)? {
                        out.iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
        }

        let mut received: Vec<(AgentId, &[f64])> = Vec::new();
        for (idx, &i) in reliable.iter().enumerate() {
            received.clear();
            received.extend(sources[idx].iter().map(|src| match *src {
                Source::Reliable(j) => (j, &half[j.0 * dim..(j.0 + 1) * dim]),
                Source::Byzantine(b, slot) => (b, &byz_msgs[slot * dim..(slot + 1) * dim]),
            }));
            let inbox = Inbox {
                self_id: i,
                self_model: &half[i.0 * dim..(i.0 + 1) * dim],
                received: &received,
            };
            spec.aggregator.mix(
                k,
                &inbox,
                net.weights().row(i.0),
                is_byz,
                &mut next[i.0 * dim..(i.0 + 1) * dim],
            );
        }

        observer.on_round(&RoundState {
            k,
            alpha,
            dim,
            reliable,
            models: &x,
            half_steps: &half,
            gradients: &grads,
            noises: &noises,
            next_models: &next,
        });
        core::mem::swap(&mut x, &mut next);

        if diverged(&x, reliable, dim) {
            status = RunStatus::Diverged { k: k + 1 };
            break;
        }
        if k + 1 == spec.horizon {
            tracker.observe(k + 1, &x, None, true)?;
        }
    }

    Ok(MetricsLog {
        context,
        rows: tracker.rows,
        status,
        traces: tracker.traces,
        warnings,
    })
}
