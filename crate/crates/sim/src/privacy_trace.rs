//! Paired runs on adjacent function sets: one reliable agent gets a
//! different objective family, everything else (seeds included) is shared.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use scc_core::engine::{run, MetricsLog};
use scc_core::objectives::{family_of, Family, FAMILIES};
use scc_core::rng::{stream_rng, uniform, Stream};
use scc_core::AgentId;

use crate::config::Experiment;
use crate::output::{header, num};
use crate::runner::{prepare, PreparedCell};

pub const TRACE_COLUMNS: [&str; 6] = [
    "k",
    "agent_original",
    "agent_swapped",
    "mean_original",
    "mean_swapped",
    "max_abs_diff",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub agent_original: f64,
    pub agent_swapped: f64,
    pub mean_original: f64,
    pub mean_swapped: f64,
    /// Largest coordinate difference over all reliable agents.
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone)]
pub struct SeedTrace {
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone)]
pub struct PrivacyTrace {
    pub agent: AgentId,
    pub original: Family,
    pub replacement: Family,
    pub seeds: Vec<SeedTrace>,
}

impl PrivacyTrace {
    pub fn max_abs_diff(&self) -> f64 {
        self.seeds
            .iter()
            .map(|s| s.max_abs_diff)
            .fold(0.0, f64::max)
    }
}

/// A family other than `current`, drawn from the estimation stream.
pub fn random_replacement(seed: u64, agent: AgentId, current: Family) -> Family {
    let mut rng = stream_rng(seed, agent.0 as u64, Stream::Estimation);
    let others: Vec<Family> = FAMILIES.iter().copied().filter(|f| *f != current).collect();
    let pick = (uniform(&mut rng, 0.0, others.len() as f64) as usize).min(others.len() - 1);
    others[pick]
}

fn traced(prep: &PreparedCell, seed: u64) -> Result<MetricsLog> {
    let mut spec = prep.spec(seed);
    spec.keep_traces = true;
    Ok(run(&spec)?)
}

pub fn pair_traces(
    prep: &PreparedCell,
    swapped: &PreparedCell,
    agent: AgentId,
    seed: u64,
) -> Result<SeedTrace> {
    let a = traced(prep, seed)?;
    let b = traced(swapped, seed)?;
    let dim = prep.problem.dim();
    let slot = prep
        .net
        .reliable()
        .iter()
        .position(|&r| r == agent)
        .context("swapped agent is not reliable")?;
    let (ta, tb) = (a.traces.unwrap_or_default(), b.traces.unwrap_or_default());
    let mut rows = Vec::new();
    let mut max_abs_diff = 0.0f64;
    for ((ra, xa), xb) in a.rows.iter().zip(&ta).zip(&tb) {
        let n = xa.len() / dim;
        let diff = xa
            .iter()
            .zip(xb)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        max_abs_diff = max_abs_diff.max(diff);
        rows.push(TraceRow {
            k: ra.k,
            agent_original: xa[slot * dim],
            agent_swapped: xb[slot * dim],
            mean_original: xa.iter().step_by(dim).sum::<f64>() / n as f64,
            mean_swapped: xb.iter().step_by(dim).sum::<f64>() / n as f64,
            max_abs_diff: diff,
        });
    }
    Ok(SeedTrace {
        seed,
        rows,
        max_abs_diff,
    })
}

/// Runs the first cell of `exp` on both function sets for every seed.
pub fn privacy_trace(
    exp: &Experiment,
    agent: AgentId,
    family: Option<Family>,
) -> Result<PrivacyTrace> {
    let cell = exp.cells.first().context("experiment has no cells")?;
    let prep = prepare(cell)?;
    let n = prep.net.n_agents();
    if agent.0 >= n {
        bail!(scc_core::Error::InvalidConfig(format!(
            "swapped agent {} does not exist in a {n}-agent network",
            agent.0
        )));
    }
    if prep.net.is_byzantine(agent) {
        bail!(scc_core::Error::InvalidConfig(format!(
            "swapped agent {} is Byzantine; only reliable agents hold objectives",
            agent.0
        )));
    }
    let original = family_of(agent, n);
    let replacement =
        family.unwrap_or_else(|| random_replacement(cell.config.topology.seed, agent, original));
    let swapped = prep.with_families(&[(agent, replacement)]);
    let seeds = cell
        .config
        .run
        .seeds
        .iter()
        .map(|&s| pair_traces(&prep, &swapped, agent, s))
        .collect::<Result<_>>()?;
    Ok(PrivacyTrace {
        agent,
        original,
        replacement,
        seeds,
    })
}

pub fn write(dir: &Path, exp: &Experiment, trace: &PrivacyTrace) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let hash = exp.short_hash();
    for s in &trace.seeds {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(TRACE_COLUMNS)?;
        for r in &s.rows {
            w.write_record([
                r.k.to_string(),
                num(r.agent_original),
                num(r.agent_swapped),
                num(r.mean_original),
                num(r.mean_swapped),
                num(r.max_abs_diff),
            ])?;
        }
        let mut text = header(hash, "0", &s.seed.to_string());
        text.push_str(std::str::from_utf8(&w.into_inner()?)?);
        fs::write(dir.join(format!("trace_seed_{}.csv", s.seed)), text)?;
    }
    let mut sum = String::new();
    writeln!(sum, "experiment: {}", exp.name)?;
    writeln!(sum, "config_hash: {hash}")?;
    writeln!(
        sum,
        "swapped agent {}: {:?} -> {:?}",
        trace.agent.0, trace.original, trace.replacement
    )?;
    for s in &trace.seeds {
        writeln!(
            sum,
            "seed {}: max per-iteration trace gap {}",
            s.seed,
            num(s.max_abs_diff)
        )?;
    }
    writeln!(
        sum,
        "overall max per-iteration trace gap {}",
        num(trace.max_abs_diff())
    )?;
    fs::write(dir.join("summary.txt"), sum)?;
    Ok(())
}
