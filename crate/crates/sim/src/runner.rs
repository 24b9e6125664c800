//! Turns configuration cells into networks, problems and runs.

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use scc_core::aggregation::{Aggregator, ClipParamStrategy};
use scc_core::attacks::AttackKind;
use scc_core::bounds::{
    disagreement_bound, gap_bound, pre_aggregation_bound, BoundBreakdown, GapBoundInputs,
};
use scc_core::engine::{run_observed, Init, MetricsLog, RoundState, RunSpec, RunStatus};
use scc_core::metrics::consensus_error;
use scc_core::objectives::{
    benchmark_problem_with, estimate_sigma_zeta, pl_constant_probe, smoothness_probe, Family,
    GlobalProblem, PL_GRID, SMOOTHNESS_GRID,
};
use scc_core::rng::{stream_rng, Stream};
use scc_core::schedule::StepSizeSchedule;
use scc_core::topology::{
    build_network, rho_upper_bound, rho_upper_bound_reliable_spread, theory_constants,
    with_byzantine_edge_weight, Network, ProblemConstants, TheoryConstants,
};
use scc_core::AgentId;

use crate::config::{Cell, Config, Experiment, ScheduleName, TheoryMode};

/// Points at which σ² and ζ² are sampled.
const VARIANCE_PROBES: [f64; 11] = [-5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0];

/// A cell with everything the engine needs, built once and shared by its seeds.
#[derive(Debug)]
pub struct PreparedCell {
    pub cell: Cell,
    pub net: Network,
    pub problem: GlobalProblem,
    pub schedule: StepSizeSchedule,
    pub aggregator: Aggregator,
    pub attack: AttackKind,
    pub init: Init,
    pub theory: Option<TheoryConstants>,
    /// Why `theory` is absent, or where its constants came from.
    pub theory_note: String,
}

impl PreparedCell {
    pub fn config(&self) -> &Config {
        &self.cell.config
    }

    pub fn spec(&self, seed: u64) -> RunSpec<'_> {
        let c = self.config();
        let mut spec = RunSpec::new(&self.net, &self.problem, self.schedule);
        spec.noise = c.noise.spec();
        spec.attack = self.attack;
        spec.aggregator = self.aggregator;
        spec.horizon = c.run.horizon;
        spec.seed = seed;
        spec.init = self.init.clone();
        spec.theory = self.theory.as_ref();
        spec.enforce_theory = c.theory.mode == TheoryMode::Enforce;
        spec.allow_oracle = c.aggregation.allow_oracle;
        spec.record_every = c.run.record_every;
        spec
    }

    /// The same cell with some agents assigned a different objective family.
    pub fn with_families(&self, overrides: &[(AgentId, Family)]) -> PreparedCell {
        let c = self.config();
        PreparedCell {
            cell: self.cell.clone(),
            net: self.net.clone(),
            problem: benchmark_problem_with(
                c.topology.n_agents,
                self.net.byzantine(),
                c.problem.noise(),
                overrides,
            ),
            schedule: self.schedule,
            aggregator: self.aggregator,
            attack: self.attack,
            init: self.init.clone(),
            theory: self.theory.clone(),
            theory_note: self.theory_note.clone(),
        }
    }
}

/// Contraction factor certified for the configured aggregator, if any.
fn certified_rho(net: &Network, aggregator: &Aggregator) -> std::result::Result<f64, &'static str> {
    match aggregator {
        Aggregator::Scc(ClipParamStrategy::OracleByzantineWeighted { .. }) => {
            Ok(rho_upper_bound(net))
        }
        Aggregator::Scc(ClipParamStrategy::OracleReliableSpread) => {
            Ok(rho_upper_bound_reliable_spread(net))
        }
        Aggregator::Mean if net.byzantine().is_empty() => Ok(0.0),
        Aggregator::Mean => Err("the gossip mean has no contraction guarantee under attack"),
        Aggregator::Scc(ClipParamStrategy::Manual(_)) => {
            Err("a manual clipping radius has no certified contraction factor")
        }
    }
}

/// ν, L, σ², ζ² by the numeric probes, unless `problem.*` overrides them.
pub fn estimate_problem_constants(
    problem: &GlobalProblem,
    cfg: &Config,
) -> Result<ProblemConstants> {
    let smoothness = match cfg.problem.smoothness {
        Some(l) => l,
        None => smoothness_probe(problem, &SMOOTHNESS_GRID)?,
    };
    let pl_constant = match cfg.problem.pl_constant {
        Some(nu) => nu,
        None => pl_constant_probe(problem, &PL_GRID)?,
    };
    let (noise_var, samples, seed) = (
        cfg.noise.variance,
        cfg.theory.sigma_samples,
        cfg.topology.seed,
    );
    let probes: Vec<Vec<f64>> = VARIANCE_PROBES.iter().map(|&x| vec![x]).collect();
    let mut rng = stream_rng(seed, 0, Stream::Estimation);
    let (sigma_sq, zeta_sq) = estimate_sigma_zeta(problem, &probes, samples, &mut rng)?;
    Ok(ProblemConstants {
        smoothness,
        pl_constant,
        sigma_sq,
        zeta_sq,
        noise_var,
        dim: problem.dim(),
    })
}

pub fn prepare(cell: &Cell) -> Result<PreparedCell> {
    let c = &cell.config;
    let t = &c.topology;
    let mut net = build_network(t.kind()?, t.n_agents, &t.placement()?, t.seed)
        .with_context(|| format!("building the {:?} topology", t.kind))?;
    if let Some(w) = t.byzantine_edge_weight {
        net = with_byzantine_edge_weight(&net, w)?;
    }
    let mut problem = benchmark_problem_with(t.n_agents, net.byzantine(), c.problem.noise(), &[]);
    if let Some(f_star) = c.problem.f_star {
        problem = problem.with_f_star(f_star);
    }
    let aggregator = c.aggregation.aggregator();

    let (theory, theory_note) = if c.theory.mode == TheoryMode::Off {
        (None, String::from("theory.mode = off"))
    } else {
        match certified_rho(&net, &aggregator) {
            Ok(rho) => {
                let pc = estimate_problem_constants(&problem, c)?;
                let consts = theory_constants(&net, rho, pc)?;
                (
                    Some(consts),
                    String::from(
                        "L, nu, sigma^2, zeta^2 estimated numerically unless set in [problem]",
                    ),
                )
            }
            Err(why) => (None, String::from(why)),
        }
    };

    let need_theory = |what: &str| -> Result<&TheoryConstants> {
        theory.as_ref().ok_or_else(|| {
            anyhow!("schedule.kind = \"{what}\" needs theory constants: {theory_note}")
        })
    };
    let s = &c.schedule;
    let schedule = match s.kind {
        ScheduleName::Decaying => StepSizeSchedule::Decaying {
            theta: s.theta.unwrap_or_default(),
            k0: s.k0.unwrap_or_default(),
        },
        ScheduleName::Constant => StepSizeSchedule::Constant {
            alpha: s.alpha.unwrap_or_default(),
        },
        ScheduleName::TheoryDecaying => {
            StepSizeSchedule::theory_decaying(need_theory("theory_decaying")?)?
        }
        ScheduleName::TheoryConstant => {
            StepSizeSchedule::theory_constant(need_theory("theory_constant")?)?
        }
    };
    schedule.validate()?;
    if c.theory.mode == TheoryMode::Enforce && theory.is_none() {
        bail!("theory.mode = \"enforce\" but no theory constants: {theory_note}");
    }
    Ok(PreparedCell {
        cell: cell.clone(),
        net,
        problem,
        schedule,
        aggregator,
        attack: c.attack.kind(),
        init: c.run.init()?,
        theory,
        theory_note,
    })
}

/// Optimal-gap bound evaluated with one disagreement series.
#[derive(Debug, Clone)]
pub struct GapBounds {
    /// With the measured `D_k`.
    pub measured: Option<BoundBreakdown>,
    /// With the disagreement bound in place of `D_k`.
    pub from_dk_bound: Option<BoundBreakdown>,
}

/// Pre-aggregation disagreement at the last round that has one, with its bound.
#[derive(Debug, Clone)]
pub struct PreAggCheck {
    pub k: u64,
    pub measured: f64,
    pub bound: BoundBreakdown,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub log: MetricsLog,
    /// Largest sampled reliable gradient norm seen on the trajectory.
    pub grad_max: f64,
    /// `f(x̄_0) − f*`.
    pub f0_gap: f64,
    pub gap_bounds: GapBounds,
    pub pre_agg: Option<PreAggCheck>,
}

#[derive(Debug)]
pub struct CellResult {
    pub prepared: PreparedCell,
    pub runs: Vec<SeedRun>,
}

/// Runs one seed, tracking the full disagreement series for the bounds.
pub fn run_seed(prep: &PreparedCell, seed: u64) -> Result<SeedRun> {
    let spec = prep.spec(seed);
    let horizon = spec.horizon as usize;
    let mut d_series: Vec<f64> = Vec::with_capacity(horizon + 1);
    let mut grad_max = 0.0f64;
    let mut observer = |st: &RoundState<'_>| {
        let spread = |buf: &[f64]| {
            let models: Vec<&[f64]> = st.reliable.iter().map(|&a| st.slot(buf, a)).collect();
            consensus_error(&models)
        };
        if st.k == 0 {
            d_series.push(spread(st.models));
        }
        d_series.push(spread(st.next_models));
        for &a in st.reliable {
            let g = st.slot(st.gradients, a);
            grad_max = grad_max.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    };
    let log = run_observed(&spec, &mut observer)
        .with_context(|| format!("cell {} seed {seed}", prep.cell.index))?;
    let f0_gap = log
        .rows
        .first()
        .map_or(f64::NAN, |r| r.f_avg - prep.problem.f_star);

    let completed = log.status == RunStatus::Completed && d_series.len() == horizon + 1;
    let mut gap_bounds = GapBounds {
        measured: None,
        from_dk_bound: None,
    };
    let mut pre_agg = None;
    if let Some(c) = prep.theory.as_ref().filter(|c| c.regime_valid()) {
        if completed && horizon >= 1 {
            let inputs = GapBoundInputs {
                consts: c,
                f0_gap,
                disagreement: &d_series,
                schedule: prep.schedule,
            };
            gap_bounds.measured = gap_bound(&inputs).ok();
            let d0 = d_series[0];
            let bounded: Vec<f64> = (0..=horizon as u64)
                .map(|k| disagreement_bound(c, d0, k, &prep.schedule))
                .collect::<scc_core::Result<_>>()?;
            gap_bounds.from_dk_bound = gap_bound(&GapBoundInputs {
                disagreement: &bounded,
                ..inputs
            })
            .ok();
        }
        pre_agg = log
            .rows
            .iter()
            .rev()
            .find(|r| r.pre_agg.is_finite())
            .and_then(|r| {
                let alpha = prep.schedule.alpha(r.k);
                pre_aggregation_bound(c, r.consensus, alpha)
                    .ok()
                    .map(|bound| PreAggCheck {
                        k: r.k,
                        measured: r.pre_agg,
                        bound,
                    })
            });
    }
    Ok(SeedRun {
        seed,
        log,
        grad_max,
        f0_gap,
        gap_bounds,
        pre_agg,
    })
}

/// Prepares every cell and runs every (cell, seed) pair on the rayon pool.
/// Results come back in cell order, seeds in configured order.
pub fn execute(exp: &Experiment) -> Result<Vec<CellResult>> {
    let prepared: Vec<PreparedCell> = exp
        .cells
        .par_iter()
        .map(|cell| {
            prepare(cell)
                .with_context(|| format!("cell {} ({})", cell.index, cell.label()))
                .map_err(crate::config::config_error)
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.config().run.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let mut runs: Vec<(usize, SeedRun)> = jobs
        .par_iter()
        .map(|&(i, seed)| run_seed(&prepared[i], seed).map(|r| (i, r)))
        .collect::<Result<_>>()?;
    let mut out: Vec<CellResult> = prepared
        .into_iter()
        .map(|prepared| CellResult {
            prepared,
            runs: Vec::new(),
        })
        .collect();
    // `collect` on an indexed parallel iterator preserves job order.
    for (i, r) in runs.drain(..) {
        out[i].runs.push(r);
    }
    Ok(out)
}
