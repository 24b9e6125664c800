//! Seed-ensemble statistics, regime pairing and the privacy report.

use std::collections::BTreeMap;

use scc_core::bounds::{regime_compare, BoundBreakdown, RegimeComparison};
use scc_core::engine::{MetricsLog, RunStatus};
use scc_core::privacy::{
    global_epsilon, required_variance_local, sensitivity_default, DpBudget, GlobalDp,
};
use scc_core::schedule::StepSizeSchedule;

use crate::runner::{CellResult, SeedRun};

/// Seed-averaged metrics at one recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRow {
    pub k: u64,
    /// Seeds still running at `k`; a diverged seed makes every mean infinite.
    pub n_seeds: usize,
    pub consensus_mean: f64,
    pub pre_agg_mean: f64,
    pub f_avg_mean: f64,
    /// Mean over seeds of each seed's running-best gap.
    pub gap_mean_of_min: f64,
    /// Running best of the seed-mean objective, minus f*.
    pub gap_min_of_mean: f64,
    pub dk_bound_mean: f64,
}

pub fn ensemble(runs: &[SeedRun], f_star: f64) -> Vec<EnsembleRow> {
    let len = runs.iter().map(|r| r.log.rows.len()).max().unwrap_or(0);
    let m = runs.len() as f64;
    let mut best_mean = f64::INFINITY;
    (0..len)
        .map(|i| {
            let alive: Vec<_> = runs.iter().filter_map(|r| r.log.rows.get(i)).collect();
            let k = alive[0].k;
            let mean = |f: fn(&scc_core::engine::MetricsRow) -> f64, missing: f64| {
                if alive.len() < runs.len() {
                    missing
                } else {
                    alive.iter().map(|r| f(r)).sum::<f64>() / m
                }
            };
            let f_avg_mean = mean(|r| r.f_avg, f64::INFINITY);
            best_mean = best_mean.min(f_avg_mean);
            EnsembleRow {
                k,
                n_seeds: alive.len(),
                consensus_mean: mean(|r| r.consensus, f64::INFINITY),
                pre_agg_mean: mean(|r| r.pre_agg, f64::NAN),
                f_avg_mean,
                gap_mean_of_min: mean(|r| r.gap, f64::INFINITY),
                gap_min_of_mean: (best_mean - f_star).max(0.0),
                dk_bound_mean: mean(|r| r.dk_bound, f64::NAN),
            }
        })
        .collect()
}

/// Headline numbers of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub n_seeds: usize,
    pub n_diverged: usize,
    /// Mean over seeds of the last-`final_window`-rows mean `D_k`.
    pub final_window_consensus: f64,
    pub final_consensus_mean: f64,
    pub final_gap_mean_of_min: f64,
    pub final_gap_min_of_mean: f64,
    /// Recorded rows where the seed-mean `D_k` exceeds the seed-mean bound.
    pub dk_bound_violations: usize,
    /// Recorded rows with a finite bound.
    pub dk_bound_rows: usize,
}

pub fn cell_stats(cell: &CellResult, rows: &[EnsembleRow]) -> CellStats {
    let window = cell.prepared.config().run.final_window;
    let runs = &cell.runs;
    let m = runs.len() as f64;
    let mean = |f: &dyn Fn(&MetricsLog) -> f64| runs.iter().map(|r| f(&r.log)).sum::<f64>() / m;
    let bounded: Vec<_> = rows
        .iter()
        .filter(|r| r.dk_bound_mean.is_finite())
        .collect();
    CellStats {
        n_seeds: runs.len(),
        n_diverged: runs
            .iter()
            .filter(|r| r.log.status != RunStatus::Completed)
            .count(),
        final_window_consensus: mean(&|l| l.final_window_consensus(window)),
        final_consensus_mean: mean(&|l| l.final_consensus()),
        final_gap_mean_of_min: mean(&|l| l.final_gap()),
        final_gap_min_of_mean: rows.last().map_or(f64::NAN, |r| r.gap_min_of_mean),
        dk_bound_violations: bounded
            .iter()
            .filter(|r| r.consensus_mean > r.dk_bound_mean)
            .count(),
        dk_bound_rows: bounded.len(),
    }
}

/// Term-wise mean of per-seed bound breakdowns; `None` unless every seed has one.
pub fn mean_breakdown<'a>(
    items: impl Iterator<Item = Option<&'a BoundBreakdown>>,
) -> Option<Vec<(String, f64)>> {
    let all: Vec<&BoundBreakdown> = items.collect::<Option<_>>()?;
    let first = all.first()?;
    let m = all.len() as f64;
    let mut out: Vec<(String, f64)> = first
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let v = all.iter().map(|b| b.terms[i].value).sum::<f64>() / m;
            (t.name.to_string(), v)
        })
        .collect();
    out.push((
        String::from("total"),
        all.iter().map(|b| b.total).sum::<f64>() / m,
    ));
    Some(out)
}

/// A decaying/constant pair of cells that differ only in `schedule.*`.
#[derive(Debug, Clone)]
pub struct RegimePair {
    pub group: String,
    pub decaying_cell: usize,
    pub constant_cell: usize,
    pub comparison: Result<RegimeComparison, String>,
}

pub fn regime_pairs(results: &[CellResult]) -> Vec<RegimePair> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in results.iter().enumerate() {
        let key = r
            .prepared
            .cell
            .assignments
            .iter()
            .filter(|(k, _)| !k.starts_with("schedule."))
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        groups.entry(key).or_default().push(i);
    }
    let mut out = Vec::new();
    for (group, members) in groups {
        let pick = |decaying: bool| -> Vec<usize> {
            members
                .iter()
                .copied()
                .filter(|&i| {
                    matches!(
                        results[i].prepared.schedule,
                        StepSizeSchedule::Decaying { .. }
                    ) == decaying
                })
                .collect()
        };
        let (dec, con) = (pick(true), pick(false));
        if dec.len() != 1 || con.len() != 1 {
            continue;
        }
        let (d, c) = (&results[dec[0]], &results[con[0]]);
        let logs = |r: &CellResult| r.runs.iter().map(|s| s.log.clone()).collect::<Vec<_>>();
        let window = d.prepared.config().run.final_window;
        let comparison = regime_compare(&logs(d), &logs(c), window).map_err(|e| e.to_string());
        out.push(RegimePair {
            group: if group.is_empty() {
                String::from("base")
            } else {
                group
            },
            decaying_cell: dec[0],
            constant_cell: con[0],
            comparison,
        });
    }
    out
}

/// Privacy accounting for one cell.
#[derive(Debug, Clone)]
pub struct DpReport {
    pub grad_bound: f64,
    /// `configured`, or `trajectory-conditional` when taken from the
    /// largest sampled gradient on the runs.
    pub grad_bound_source: &'static str,
    pub sensitivity: f64,
    /// `configured` or `assumed 2 B_g`.
    pub sensitivity_source: &'static str,
    pub local: Option<Result<LocalDp, String>>,
    pub global: Option<Result<GlobalDp, String>>,
}

#[derive(Debug, Clone, Copy)]
pub struct LocalDp {
    pub epsilon: f64,
    pub delta: f64,
    pub required_variance: f64,
    pub configured_variance: f64,
}

impl LocalDp {
    pub fn satisfied(&self) -> bool {
        self.configured_variance >= self.required_variance
    }
}

pub fn dp_report(cell: &CellResult) -> Option<DpReport> {
    let c = cell.prepared.config();
    let dp = &c.dp;
    if dp.epsilon.is_none() && dp.delta.is_none() {
        return None;
    }
    let (grad_bound, grad_bound_source) = match dp.grad_bound {
        Some(b) => (b, "configured"),
        None => (
            cell.runs.iter().map(|r| r.grad_max).fold(0.0, f64::max),
            "trajectory-conditional",
        ),
    };
    let (sensitivity, sensitivity_source) = match dp.sensitivity {
        Some(s) => (s, "configured"),
        None => (sensitivity_default(grad_bound), "assumed 2 B_g"),
    };
    let variance = c.noise.variance;
    let local = match (dp.epsilon, dp.delta) {
        (Some(eps), Some(delta)) => Some(
            required_variance_local(eps, delta, sensitivity, &cell.prepared.schedule)
                .map(|required_variance| LocalDp {
                    epsilon: eps,
                    delta,
                    required_variance,
                    configured_variance: variance,
                })
                .map_err(|e| e.to_string()),
        ),
        _ => None,
    };
    let global = match (dp.delta, dp.total_samples) {
        (Some(delta), Some(total_samples)) => Some(
            global_epsilon(
                &DpBudget {
                    delta,
                    grad_bound,
                    total_samples,
                    batch_size: dp.batch_size.unwrap_or(c.problem.batch_size as u64),
                    horizon: c.run.horizon,
                    renyi_order: dp.renyi_order,
                },
                variance,
            )
            .map_err(|e| e.to_string()),
        ),
        _ => None,
    };
    Some(DpReport {
        grad_bound,
        grad_bound_source,
        sensitivity,
        sensitivity_source,
        local,
        global,
    })
}
