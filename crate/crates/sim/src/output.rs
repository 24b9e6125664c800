//! Run directory layout and CSV writers.
//!
//! ```text
//! <dir>/config.toml          effective configuration
//! <dir>/cells.csv            one row per sweep cell
//! <dir>/regimes.csv          decaying vs constant, per cell pair
//! <dir>/summary.txt          human-readable digest
//! <dir>/cell_NNN/seed_S.csv  per-seed metrics
//! <dir>/cell_NNN/mean.csv    seed-ensemble metrics
//! <dir>/cell_NNN/bounds.csv  measured values and bound terms
//! <dir>/cell_NNN/network.csv edge list with weights
//! ```
//!
//! Every CSV starts with a `# config_hash=<hex> cell=<i> seed=<s>` line.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use scc_core::engine::RunStatus;
use scc_core::topology::{virtual_matrix, Network};

use crate::config::Experiment;
use crate::runner::{CellResult, SeedRun};
use crate::stats::{
    cell_stats, dp_report, ensemble, mean_breakdown, regime_pairs, CellStats, EnsembleRow,
};

pub const SEED_COLUMNS: [&str; 7] = [
    "k",
    "consensus",
    "pre_agg",
    "f_avg",
    "f_best",
    "gap",
    "dk_bound",
];
pub const MEAN_COLUMNS: [&str; 8] = [
    "k",
    "n_seeds",
    "consensus_mean",
    "pre_agg_mean",
    "f_avg_mean",
    "gap_mean_of_min",
    "gap_min_of_mean",
    "dk_bound_mean",
];
pub const BOUNDS_COLUMNS: [&str; 5] = ["source", "regime", "horizon", "term", "value"];
pub const NETWORK_COLUMNS: [&str; 5] = ["i", "j", "weight", "i_byzantine", "j_byzantine"];
pub const CELLS_COLUMNS: [&str; 20] = [
    "cell",
    "label",
    "topology",
    "n_agents",
    "n_byzantine",
    "lambda",
    "rho",
    "rho_bar",
    "regime_valid",
    "schedule",
    "aggregator",
    "attack",
    "noise_variance",
    "n_seeds",
    "n_diverged",
    "final_window_consensus",
    "final_gap_mean_of_min",
    "final_gap_min_of_mean",
    "dk_bound_violations",
    "dk_bound_rows",
];
pub const REGIMES_COLUMNS: [&str; 12] = [
    "group",
    "decaying_cell",
    "constant_cell",
    "n_pairs",
    "decaying_wins",
    "consensus_decaying",
    "consensus_constant",
    "consensus_delta",
    "gap_decaying",
    "gap_constant",
    "gap_delta",
    "smaller_gap",
];

/// Shortest round-trip representation in exponent notation.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn cell_dir(root: &Path, cell: usize) -> PathBuf {
    root.join(format!("cell_{cell:03}"))
}

pub fn seed_file(root: &Path, cell: usize, seed: u64) -> PathBuf {
    cell_dir(root, cell).join(format!("seed_{seed}.csv"))
}

pub fn header(hash: &str, cell: &str, seed: &str) -> String {
    format!("# config_hash={hash} cell={cell} seed={seed}\n")
}

struct Table {
    out: String,
}

impl Table {
    fn new(header_line: String, columns: &[&str]) -> Self {
        let mut out = header_line;
        out.push_str(&columns.join(","));
        out.push('\n');
        Table { out }
    }

    fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(fields.iter().map(|f| f.as_ref()))?;
        self.out.push_str(std::str::from_utf8(&w.into_inner()?)?);
        Ok(())
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut f =
            fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        f.write_all(self.out.as_bytes())?;
        Ok(())
    }
}

fn write_seed(path: &Path, hash: &str, cell: usize, run: &SeedRun) -> Result<()> {
    let mut t = Table::new(
        header(hash, &cell.to_string(), &run.seed.to_string()),
        &SEED_COLUMNS,
    );
    for r in &run.log.rows {
        t.row(&[
            r.k.to_string(),
            num(r.consensus),
            num(r.pre_agg),
            num(r.f_avg),
            num(r.f_best),
            num(r.gap),
            num(r.dk_bound),
        ])?;
    }
    t.save(path)
}

fn write_mean(path: &Path, hash: &str, cell: usize, rows: &[EnsembleRow]) -> Result<()> {
    let mut t = Table::new(header(hash, &cell.to_string(), "all"), &MEAN_COLUMNS);
    for r in rows {
        t.row(&[
            r.k.to_string(),
            r.n_seeds.to_string(),
            num(r.consensus_mean),
            num(r.pre_agg_mean),
            num(r.f_avg_mean),
            num(r.gap_mean_of_min),
            num(r.gap_min_of_mean),
            num(r.dk_bound_mean),
        ])?;
    }
    t.save(path)
}

fn write_network(path: &Path, hash: &str, cell: usize, net: &Network) -> Result<()> {
    let mut t = Table::new(header(hash, &cell.to_string(), "all"), &NETWORK_COLUMNS);
    for i in 0..net.n_agents() {
        let a = scc_core::AgentId(i);
        for j in 0..net.n_agents() {
            let b = scc_core::AgentId(j);
            if i == j || net.has_edge(a, b) {
                t.row(&[
                    i.to_string(),
                    j.to_string(),
                    num(net.weight(a, b)),
                    net.is_byzantine(a).to_string(),
                    net.is_byzantine(b).to_string(),
                ])?;
            }
        }
    }
    t.save(path)
}

fn regime_name(cell: &CellResult) -> &'static str {
    match cell.prepared.schedule {
        scc_core::schedule::StepSizeSchedule::Decaying { .. } => "decaying",
        scc_core::schedule::StepSizeSchedule::Constant { .. } => "constant",
    }
}

fn write_bounds(
    path: &Path,
    hash: &str,
    cell: &CellResult,
    rows: &[EnsembleRow],
    stats: &CellStats,
) -> Result<()> {
    let idx = cell.prepared.cell.index;
    let regime = regime_name(cell);
    let horizon = cell.prepared.config().run.horizon.to_string();
    let mut t = Table::new(header(hash, &idx.to_string(), "all"), &BOUNDS_COLUMNS);
    let mut put = |source: &str, term: &str, value: f64| {
        t.row(&[source, regime, horizon.as_str(), term, num(value).as_str()])
    };
    let last = rows.last();
    put("measured", "final_consensus", stats.final_consensus_mean)?;
    put(
        "measured",
        "final_window_consensus",
        stats.final_window_consensus,
    )?;
    put(
        "measured",
        "final_gap_mean_of_min",
        stats.final_gap_mean_of_min,
    )?;
    put(
        "measured",
        "final_gap_min_of_mean",
        stats.final_gap_min_of_mean,
    )?;
    put(
        "measured",
        "final_dk_bound",
        last.map_or(f64::NAN, |r| r.dk_bound_mean),
    )?;
    let m = cell.runs.len() as f64;
    put(
        "measured",
        "f0_gap",
        cell.runs.iter().map(|r| r.f0_gap).sum::<f64>() / m,
    )?;
    if let Some(terms) = mean_breakdown(cell.runs.iter().map(|r| r.gap_bounds.measured.as_ref())) {
        for (name, v) in terms {
            put("theory", &format!("gap:{name}"), v)?;
        }
    }
    if let Some(terms) = mean_breakdown(
        cell.runs
            .iter()
            .map(|r| r.gap_bounds.from_dk_bound.as_ref()),
    ) {
        for (name, v) in terms {
            put("theory_dk_bound", &format!("gap:{name}"), v)?;
        }
    }
    if cell.runs.iter().all(|r| r.pre_agg.is_some()) && !cell.runs.is_empty() {
        let pre: Vec<_> = cell
            .runs
            .iter()
            .filter_map(|r| r.pre_agg.as_ref())
            .collect();
        put(
            "measured",
            "pre_agg_at_bound_k",
            pre.iter().map(|p| p.measured).sum::<f64>() / m,
        )?;
        if let Some(terms) = mean_breakdown(pre.iter().map(|p| Some(&p.bound))) {
            for (name, v) in terms {
                put("theory", &format!("pre_agg:{name}"), v)?;
            }
        }
    }
    t.save(path)
}

fn describe_schedule(cell: &CellResult) -> String {
    match cell.prepared.schedule {
        scc_core::schedule::StepSizeSchedule::Decaying { theta, k0 } => {
            format!("decaying theta={theta} k0={k0}")
        }
        scc_core::schedule::StepSizeSchedule::Constant { alpha } => {
            format!("constant alpha={alpha}")
        }
    }
}

fn describe_aggregator(cell: &CellResult) -> String {
    format!("{:?}", cell.prepared.aggregator)
}

/// Everything the writer derives from a finished experiment.
pub struct Digest {
    pub ensembles: Vec<Vec<EnsembleRow>>,
    pub stats: Vec<CellStats>,
}

pub fn digest(results: &[CellResult]) -> Digest {
    let ensembles: Vec<Vec<EnsembleRow>> = results
        .iter()
        .map(|r| ensemble(&r.runs, r.prepared.problem.f_star))
        .collect();
    let stats = results
        .iter()
        .zip(&ensembles)
        .map(|(r, e)| cell_stats(r, e))
        .collect();
    Digest { ensembles, stats }
}

/// Writes the full run directory and checks the per-seed artifact count.
pub fn write_all(dir: &Path, exp: &Experiment, results: &[CellResult]) -> Result<Digest> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let hash = exp.short_hash();
    let d = digest(results);

    let mut cfg = format!("# config_hash={hash}\n# name={}\n", exp.name);
    cfg.push_str(&exp.resolved);
    fs::write(dir.join("config.toml"), cfg)?;

    let mut cells = Table::new(header(hash, "all", "all"), &CELLS_COLUMNS);
    for ((r, rows), s) in results.iter().zip(&d.ensembles).zip(&d.stats) {
        let idx = r.prepared.cell.index;
        let cdir = cell_dir(dir, idx);
        fs::create_dir_all(&cdir)?;
        for run in &r.runs {
            write_seed(&seed_file(dir, idx, run.seed), hash, idx, run)?;
        }
        write_mean(&cdir.join("mean.csv"), hash, idx, rows)?;
        write_bounds(&cdir.join("bounds.csv"), hash, r, rows, s)?;
        write_network(&cdir.join("network.csv"), hash, idx, &r.prepared.net)?;

        let cfg = r.prepared.config();
        let th = r.prepared.theory.as_ref();
        cells.row(&[
            idx.to_string(),
            r.prepared.cell.label(),
            format!("{:?}", cfg.topology.kind).to_lowercase(),
            cfg.topology.n_agents.to_string(),
            r.prepared.net.byzantine().len().to_string(),
            num(th.map_or_else(
                || virtual_matrix(&r.prepared.net).mixing_rate_sq,
                |c| c.lambda,
            )),
            num(th.map_or(f64::NAN, |c| c.rho)),
            num(th.map_or(f64::NAN, |c| c.rho_bar)),
            th.is_some_and(|c| c.regime_valid()).to_string(),
            describe_schedule(r),
            describe_aggregator(r),
            r.prepared.attack.name().to_string(),
            num(cfg.noise.variance),
            s.n_seeds.to_string(),
            s.n_diverged.to_string(),
            num(s.final_window_consensus),
            num(s.final_gap_mean_of_min),
            num(s.final_gap_min_of_mean),
            s.dk_bound_violations.to_string(),
            s.dk_bound_rows.to_string(),
        ])?;
    }
    cells.save(&dir.join("cells.csv"))?;

    let pairs = regime_pairs(results);
    let mut regimes = Table::new(header(hash, "all", "all"), &REGIMES_COLUMNS);
    for p in &pairs {
        if let Ok(c) = &p.comparison {
            regimes.row(&[
                p.group.clone(),
                p.decaying_cell.to_string(),
                p.constant_cell.to_string(),
                c.decaying_wins.len().to_string(),
                c.decaying_wins.iter().filter(|w| **w).count().to_string(),
                num(c.decaying.consensus),
                num(c.constant.consensus),
                num(c.consensus_delta),
                num(c.decaying.gap),
                num(c.constant.gap),
                num(c.gap_delta),
                c.ordered_by_gap()[0].label.clone(),
            ])?;
        }
    }
    regimes.save(&dir.join("regimes.csv"))?;

    fs::write(dir.join("summary.txt"), summary(exp, results, &d, &pairs)?)?;

    let expected: usize = results
        .iter()
        .map(|r| r.prepared.config().run.seeds.len())
        .sum();
    let mut found = 0;
    for r in results {
        for entry in fs::read_dir(cell_dir(dir, r.prepared.cell.index))? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if name.starts_with("seed_") && name.ends_with(".csv") {
                found += 1;
            }
        }
    }
    if found != expected {
        bail!("expected {expected} per-seed files, found {found}");
    }
    Ok(d)
}

fn summary(
    exp: &Experiment,
    results: &[CellResult],
    d: &Digest,
    pairs: &[crate::stats::RegimePair],
) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "experiment: {}", exp.name)?;
    writeln!(s, "config_hash: {}", exp.short_hash())?;
    writeln!(s, "cells: {}", results.len())?;
    for (r, st) in results.iter().zip(&d.stats) {
        let p = &r.prepared;
        writeln!(s)?;
        writeln!(s, "== cell {} [{}]", p.cell.index, p.cell.label())?;
        writeln!(
            s,
            "network: {} agents, {} Byzantine, fingerprint {:016x}",
            p.net.n_agents(),
            p.net.byzantine().len(),
            p.net.fingerprint()
        )?;
        writeln!(s, "schedule: {}", describe_schedule(r))?;
        writeln!(s, "aggregator: {}", describe_aggregator(r))?;
        writeln!(s, "attack: {:?}", p.attack)?;
        writeln!(s, "f_star: {}", num(p.problem.f_star))?;
        match &p.theory {
            Some(c) => {
                writeln!(s, "theory ({}):", p.theory_note)?;
                writeln!(
                    s,
                    "  lambda={} rho={} rho_bar={} phi={} eta={} theta_under={} k0={}",
                    num(c.lambda),
                    num(c.rho),
                    num(c.rho_bar),
                    num(c.phi),
                    num(c.eta),
                    num(c.theta_under),
                    c.k0
                )?;
                writeln!(
                    s,
                    "  L={} nu={} sigma^2={} zeta^2={} (estimated)",
                    num(c.problem.smoothness),
                    num(c.problem.pl_constant),
                    num(c.problem.sigma_sq),
                    num(c.problem.zeta_sq)
                )?;
                match &c.regime {
                    scc_core::topology::Regime::Valid => writeln!(s, "  regime: valid")?,
                    scc_core::topology::Regime::Invalid(why) => {
                        writeln!(s, "  regime: invalid ({why})")?
                    }
                }
            }
            None => writeln!(s, "theory: none ({})", p.theory_note)?,
        }
        for run in &r.runs {
            let status = match run.log.status {
                RunStatus::Completed => String::from("completed"),
                RunStatus::Diverged { k } => format!("diverged at k={k}"),
            };
            writeln!(
                s,
                "seed {}: {status}, final D={} gap={}",
                run.seed,
                num(run.log.final_consensus()),
                num(run.log.final_gap())
            )?;
            for w in &run.log.warnings {
                writeln!(s, "  warning: {w}")?;
            }
        }
        writeln!(
            s,
            "ensemble: final-window D={} gap(mean of min)={} gap(min of mean)={}",
            num(st.final_window_consensus),
            num(st.final_gap_mean_of_min),
            num(st.final_gap_min_of_mean)
        )?;
        if st.dk_bound_rows > 0 {
            writeln!(
                s,
                "disagreement bound exceeded on {} of {} recorded rows",
                st.dk_bound_violations, st.dk_bound_rows
            )?;
        }
        if let Some(dp) = dp_report(r) {
            writeln!(
                s,
                "privacy: B_g={} ({}), sensitivity={} ({})",
                num(dp.grad_bound),
                dp.grad_bound_source,
                num(dp.sensitivity),
                dp.sensitivity_source
            )?;
            match dp.local {
                Some(Ok(l)) => writeln!(
                    s,
                    "  per-iteration ({}, {})-DP needs variance {}; configured {} -> {}",
                    l.epsilon,
                    l.delta,
                    num(l.required_variance),
                    num(l.configured_variance),
                    if l.satisfied() {
                        "satisfied"
                    } else {
                        "not satisfied"
                    }
                )?,
                Some(Err(e)) => writeln!(s, "  per-iteration DP: {e}")?,
                None => {}
            }
            match dp.global {
                Some(Ok(g)) => {
                    writeln!(
                        s,
                        "  end-to-end epsilon over {} rounds: {} (preconditions {})",
                        p.config().run.horizon,
                        num(g.epsilon),
                        if g.preconditions_hold() {
                            "hold"
                        } else {
                            "fail"
                        }
                    )?;
                    for w in &g.warnings {
                        writeln!(s, "    warning: {w}")?;
                    }
                }
                Some(Err(e)) => writeln!(s, "  end-to-end DP: {e}")?,
                None => {}
            }
        }
    }
    if !pairs.is_empty() {
        writeln!(s)?;
        writeln!(s, "== regime comparison (final window)")?;
        for p in pairs {
            match &p.comparison {
                Ok(c) => writeln!(
                    s,
                    "{}: decaying D={} gap={} | constant D={} gap={} | decaying smaller D in {}/{} seed pairs",
                    p.group,
                    num(c.decaying.consensus),
                    num(c.decaying.gap),
                    num(c.constant.consensus),
                    num(c.constant.gap),
                    c.decaying_wins.iter().filter(|w| **w).count(),
                    c.decaying_wins.len()
                )?,
                Err(e) => writeln!(s, "{}: not comparable ({e})", p.group)?,
            }
        }
    }
    Ok(s)
}
