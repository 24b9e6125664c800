//! Experiment configuration: a TOML file with one section per concern,
//! dotted `key=value` overrides, and cartesian sweep axes.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use scc_core::aggregation::{Aggregator, ClipParamStrategy, NoByzantineFallback};
use scc_core::attacks::{AlieScope, AttackKind, VictimPolicy};
use scc_core::engine::Init;
use scc_core::objectives::BenchmarkNoise;
use scc_core::privacy::NoiseSpec;
use scc_core::schedule::ParamSchedule;
use scc_core::topology::{ByzantinePlacement, TopologyKind};
use scc_core::AgentId;

use crate::recipes;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub name: Option<String>,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub aggregation: AggregationConfig,
    #[serde(default)]
    pub theory: TheoryConfig,
    #[serde(default)]
    pub dp: DpConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyName {
    Star,
    Random,
    Complete,
    Ring,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyName,
    #[serde(default = "default_agents")]
    pub n_agents: usize,
    /// Edge probability for `random`.
    pub p: Option<f64>,
    pub byzantine_fraction: Option<f64>,
    /// Explicit Byzantine ids; exclusive with `byzantine_fraction`.
    pub byzantine: Option<Vec<usize>>,
    /// Overrides the Metropolis–Hastings weight of every reliable–Byzantine edge.
    pub byzantine_edge_weight: Option<f64>,
    #[serde(default = "default_topology_seed")]
    pub seed: u64,
}

fn default_agents() -> usize {
    100
}

fn default_topology_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    #[default]
    Benchmark,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub kind: ProblemName,
    #[serde(default = "default_sampling_variance")]
    pub u_variance: f64,
    #[serde(default = "default_sampling_variance")]
    pub v_variance: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Replaces the numerically located optimum.
    pub f_star: Option<f64>,
    /// Replaces the estimated P-Ł constant ν.
    pub pl_constant: Option<f64>,
    /// Replaces the estimated smoothness constant L.
    pub smoothness: Option<f64>,
}

fn default_sampling_variance() -> f64 {
    0.01
}

fn default_batch() -> usize {
    1
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: ProblemName::Benchmark,
            u_variance: default_sampling_variance(),
            v_variance: default_sampling_variance(),
            batch_size: default_batch(),
            f_star: None,
            pl_constant: None,
            smoothness: None,
        }
    }
}

impl ProblemConfig {
    pub fn noise(&self) -> BenchmarkNoise {
        BenchmarkNoise {
            u_variance: self.u_variance,
            v_variance: self.v_variance,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Decaying,
    Constant,
    /// θ̲/(k + k0) from the estimated bound constants.
    TheoryDecaying,
    /// α = θ̲ from the estimated bound constants.
    TheoryConstant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleName,
    pub theta: Option<f64>,
    pub k0: Option<u64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// ϖ², per coordinate and iteration.
    #[serde(default)]
    pub variance: f64,
}

impl NoiseConfig {
    pub fn spec(&self) -> NoiseSpec {
        NoiseSpec::constant(self.variance)
    }
}

/// A number, or `{ base, scale, offset }` for `base + scale/(k + offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamConfig {
    Constant(f64),
    Decaying {
        #[serde(default)]
        base: f64,
        scale: f64,
        offset: f64,
    },
}

impl ParamConfig {
    pub fn schedule(self) -> ParamSchedule {
        match self {
            ParamConfig::Constant(v) => ParamSchedule::Constant(v),
            ParamConfig::Decaying {
                base,
                scale,
                offset,
            } => ParamSchedule::Decaying {
                base,
                scale,
                offset,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackName {
    #[default]
    None,
    SignFlip,
    Alie,
    Dissensus,
    PerturbedDup,
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VictimName {
    Fixed,
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScopeName {
    #[default]
    Global,
    Neighborhood,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default)]
    pub kind: AttackName,
    /// Sign-flip deviation s_b.
    #[serde(default = "one")]
    pub scale: f64,
    /// Dissensus degree d_r.
    #[serde(default = "one")]
    pub degree: f64,
    /// Perturbed-dup multiplicative parameter.
    #[serde(default = "unit_param")]
    pub mult: ParamConfig,
    /// Perturbed-dup additive parameter.
    #[serde(default = "zero_param")]
    pub add: ParamConfig,
    #[serde(default)]
    pub victim: VictimName,
    /// ALIE statistics over all reliable agents or the receiver's neighborhood.
    #[serde(default)]
    pub scope: ScopeName,
}

fn one() -> f64 {
    1.0
}

fn unit_param() -> ParamConfig {
    ParamConfig::Constant(1.0)
}

fn zero_param() -> ParamConfig {
    ParamConfig::Constant(0.0)
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            kind: AttackName::None,
            scale: 1.0,
            degree: 1.0,
            mult: unit_param(),
            add: zero_param(),
            victim: VictimName::RoundRobin,
            scope: ScopeName::Global,
        }
    }
}

impl AttackConfig {
    pub fn kind(&self) -> AttackKind {
        match self.kind {
            AttackName::None => AttackKind::None,
            AttackName::Silent => AttackKind::Silent,
            AttackName::SignFlip => AttackKind::SignFlip { scale: self.scale },
            AttackName::Alie => AttackKind::Alie {
                scope: match self.scope {
                    ScopeName::Global => AlieScope::Global,
                    ScopeName::Neighborhood => AlieScope::Neighborhood,
                },
            },
            AttackName::Dissensus => AttackKind::Dissensus {
                degree: self.degree,
            },
            AttackName::PerturbedDup => AttackKind::PerturbedDup {
                mult: self.mult.schedule(),
                add: self.add.schedule(),
                victim: match self.victim {
                    VictimName::Fixed => VictimPolicy::Fixed,
                    VictimName::RoundRobin => VictimPolicy::RoundRobin,
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorName {
    #[default]
    Scc,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleRadius {
    ByzantineWeighted,
    ReliableSpread,
}

/// `"byzantine_weighted"`, `"reliable_spread"`, or a manual radius (number or schedule).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TauConfig {
    Oracle(OracleRadius),
    Manual(ParamConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackName {
    Unclipped,
    ReliableSpread,
}

/// `"unclipped"`, `"reliable_spread"`, or a manual radius.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FallbackConfig {
    Named(FallbackName),
    Manual(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationConfig {
    #[serde(default)]
    pub kind: AggregatorName,
    #[serde(default = "default_tau")]
    pub tau: TauConfig,
    #[serde(default = "default_fallback")]
    pub fallback: FallbackConfig,
    /// Oracle radii read the ground-truth Byzantine labels.
    #[serde(default)]
    pub allow_oracle: bool,
}

fn default_tau() -> TauConfig {
    TauConfig::Oracle(OracleRadius::ByzantineWeighted)
}

fn default_fallback() -> FallbackConfig {
    FallbackConfig::Named(FallbackName::Unclipped)
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            kind: AggregatorName::Scc,
            tau: default_tau(),
            fallback: default_fallback(),
            allow_oracle: false,
        }
    }
}

impl AggregationConfig {
    pub fn aggregator(&self) -> Aggregator {
        match self.kind {
            AggregatorName::Mean => Aggregator::Mean,
            AggregatorName::Scc => Aggregator::Scc(match self.tau {
                TauConfig::Manual(p) => ClipParamStrategy::Manual(p.schedule()),
                TauConfig::Oracle(OracleRadius::ReliableSpread) => {
                    ClipParamStrategy::OracleReliableSpread
                }
                TauConfig::Oracle(OracleRadius::ByzantineWeighted) => {
                    ClipParamStrategy::OracleByzantineWeighted {
                        fallback: match self.fallback {
                            FallbackConfig::Named(FallbackName::Unclipped) => {
                                NoByzantineFallback::Unclipped
                            }
                            FallbackConfig::Named(FallbackName::ReliableSpread) => {
                                NoByzantineFallback::ReliableSpread
                            }
                            FallbackConfig::Manual(t) => NoByzantineFallback::Manual(t),
                        },
                    }
                }
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TheoryMode {
    /// No constants are estimated; no bound columns.
    Off,
    /// Constants are estimated; violations become warnings.
    #[default]
    Warn,
    /// Schedules violating the bound conditions are rejected.
    Enforce,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    #[serde(default)]
    pub mode: TheoryMode,
    /// Gradient samples per probe point for the σ²/ζ² estimates.
    #[serde(default = "default_samples")]
    pub sigma_samples: usize,
}

fn default_samples() -> usize {
    2000
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            mode: TheoryMode::Warn,
            sigma_samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpConfig {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// Δ_g; defaults to 2·B_g.
    pub sensitivity: Option<f64>,
    /// B_g; defaults to the largest sampled gradient seen on the trajectory.
    pub grad_bound: Option<f64>,
    /// Q.
    pub total_samples: Option<u64>,
    /// B_s; defaults to the problem's batch size.
    pub batch_size: Option<u64>,
    pub renyi_order: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    #[default]
    Uniform,
    Constant,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default)]
    pub kind: InitName,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    pub value: Option<f64>,
}

fn default_lo() -> f64 {
    -5.0
}

fn default_hi() -> f64 {
    5.0
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitName::Uniform,
            lo: default_lo(),
            hi: default_hi(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Relative to the output root unless absolute.
    pub output_dir: Option<String>,
    #[serde(default)]
    pub init: InitConfig,
    /// Recorded rows averaged for final-window statistics.
    #[serde(default = "default_window")]
    pub final_window: usize,
}

fn default_record_every() -> u64 {
    1
}

fn default_window() -> usize {
    10
}

/// One sweep dimension. `key` assigns a single dotted path; `keys` assigns
/// several at once, each value then being an array with one entry per key.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub key: Option<String>,
    pub keys: Option<Vec<String>>,
    pub values: Vec<Value>,
}

impl SweepAxis {
    fn paths(&self) -> Result<Vec<String>> {
        match (&self.key, &self.keys) {
            (Some(k), None) => Ok(vec![k.clone()]),
            (None, Some(ks)) if !ks.is_empty() => Ok(ks.clone()),
            _ => bail!("sweep axis needs exactly one of `key` or a non-empty `keys`"),
        }
    }

    /// `(path, value)` assignments for the `i`-th value.
    fn assignments(&self, i: usize) -> Result<Vec<(String, Value)>> {
        let paths = self.paths()?;
        let v = &self.values[i];
        if paths.len() == 1 {
            return Ok(vec![(paths[0].clone(), v.clone())]);
        }
        match v {
            Value::Array(items) if items.len() == paths.len() => {
                Ok(paths.into_iter().zip(items.iter().cloned()).collect())
            }
            _ => bail!(
                "sweep value {i} for keys {paths:?} must be an array of {} entries",
                paths.len()
            ),
        }
    }
}

impl TopologyConfig {
    pub fn kind(&self) -> Result<TopologyKind> {
        Ok(match self.kind {
            TopologyName::Star => TopologyKind::Star,
            TopologyName::Complete => TopologyKind::Complete,
            TopologyName::Ring => TopologyKind::Ring,
            TopologyName::Random => TopologyKind::Random {
                p: self
                    .p
                    .ok_or_else(|| anyhow!("topology.p is required for kind = \"random\""))?,
            },
        })
    }

    pub fn placement(&self) -> Result<ByzantinePlacement> {
        match (&self.byzantine_fraction, &self.byzantine) {
            (Some(_), Some(_)) => {
                bail!("topology.byzantine_fraction and topology.byzantine are exclusive")
            }
            (Some(f), None) => Ok(ByzantinePlacement::Fraction(*f)),
            (None, Some(ids)) => Ok(ByzantinePlacement::Explicit(
                ids.iter().copied().map(AgentId).collect(),
            )),
            (None, None) => Ok(ByzantinePlacement::Fraction(0.0)),
        }
    }
}

impl RunConfig {
    pub fn init(&self) -> Result<Init> {
        Ok(match self.init.kind {
            InitName::Uniform => Init::Uniform {
                lo: self.init.lo,
                hi: self.init.hi,
            },
            InitName::Constant => Init::Constant(vec![self
                .init
                .value
                .ok_or_else(|| anyhow!("run.init.value is required for kind = \"constant\""))?]),
        })
    }
}

/// One point of the sweep grid with its resolved configuration.
#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    /// `path = value` pairs that distinguish this cell, in axis order.
    pub assignments: Vec<(String, String)>,
    pub config: Config,
}

impl Cell {
    pub fn label(&self) -> String {
        if self.assignments.is_empty() {
            return String::from("base");
        }
        self.assignments
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn value_of(&self, path: &str) -> Option<&str> {
        self.assignments
            .iter()
            .find(|(k, _)| k == path)
            .map(|(_, v)| v.as_str())
    }
}

/// A loaded configuration expanded into its sweep cells.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    /// Hex SHA-256 of the effective configuration (after overrides).
    pub hash: String,
    /// Effective configuration as canonical TOML.
    pub resolved: String,
    pub cells: Vec<Cell>,
}

impl Experiment {
    pub fn n_axes(&self) -> usize {
        self.cells.first().map_or(0, |c| c.assignments.len())
    }

    pub fn short_hash(&self) -> &str {
        &self.hash[..16]
    }

    /// Keeps only the cells accepted by `keep`, renumbering nothing.
    pub fn retain(&mut self, keep: impl Fn(&Cell) -> bool) {
        self.cells.retain(|c| keep(c));
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} cell(s), hash {})",
            self.name,
            self.cells.len(),
            self.short_hash()
        )
    }
}

/// A configuration that cannot be run as written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub(crate) fn config_error(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(ConfigError(format!("{e:#}")))
}

/// Where a configuration comes from: a file, or `recipe:<name>`.
pub fn read_source(source: &str) -> Result<(String, String)> {
    if let Some(name) = source.strip_prefix("recipe:") {
        let text = recipes::get(name).ok_or_else(|| {
            anyhow!(
                "unknown recipe `{name}`; available: {}",
                recipes::names().join(", ")
            )
        })?;
        return Ok((name.to_string(), text.to_string()));
    }
    let path = Path::new(source);
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let stem = path.file_stem().map_or_else(
        || String::from("experiment"),
        |s| s.to_string_lossy().into_owned(),
    );
    Ok((stem, text))
}

pub fn load(source: &str, overrides: &[String]) -> Result<Experiment> {
    let (stem, text) = read_source(source).map_err(config_error)?;
    parse(&stem, &text, overrides)
}

/// Parses, applies `key=value` overrides, and expands the sweep.
pub fn parse(default_name: &str, text: &str, overrides: &[String]) -> Result<Experiment> {
    parse_inner(default_name, text, overrides).map_err(config_error)
}

fn parse_inner(default_name: &str, text: &str, overrides: &[String]) -> Result<Experiment> {
    // Deserializing the raw text first gives line/column diagnostics.
    toml::from_str::<Config>(text).map_err(|e| anyhow!("invalid config: {e}"))?;
    let mut table: Table = text.parse().map_err(|e| anyhow!("invalid config: {e}"))?;
    for o in overrides {
        let (path, value) = parse_override(o)?;
        set_path(&mut table, &path, value)?;
    }
    let config: Config = Value::Table(table.clone())
        .try_into()
        .map_err(|e| anyhow!("invalid config after overrides: {e}"))?;
    let resolved = toml::to_string(&table)?;
    let hash = hex(&Sha256::digest(resolved.as_bytes()));
    let name = config
        .name
        .clone()
        .unwrap_or_else(|| default_name.to_string());

    let mut base = table;
    base.remove("sweep");
    let axes = config.sweep.clone();
    for (i, axis) in axes.iter().enumerate() {
        axis.paths()?;
        if axis.values.is_empty() {
            bail!("sweep axis {i} has no values");
        }
    }
    let mut cells = Vec::new();
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    for index in 0..total {
        let mut t = base.clone();
        let mut assignments = Vec::new();
        let mut rest = index;
        let mut picks = vec![0; axes.len()];
        for (a, axis) in axes.iter().enumerate().rev() {
            picks[a] = rest % axis.values.len();
            rest /= axis.values.len();
        }
        for (axis, &pick) in axes.iter().zip(&picks) {
            for (path, value) in axis.assignments(pick)? {
                assignments.push((path.clone(), render(&value)));
                set_path(&mut t, &path, value)?;
            }
        }
        let config: Config = Value::Table(t).try_into().map_err(|e| {
            anyhow!(
                "invalid config in sweep cell {index} ({}): {e}",
                assignments
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            )
        })?;
        check(&config).with_context(|| format!("sweep cell {index}"))?;
        cells.push(Cell {
            index,
            assignments,
            config,
        });
    }
    Ok(Experiment {
        name,
        hash,
        resolved,
        cells,
    })
}

/// Static checks beyond the schema.
fn check(c: &Config) -> Result<()> {
    if c.run.seeds.is_empty() {
        bail!("run.seeds must list at least one seed");
    }
    let mut seen = c.run.seeds.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != c.run.seeds.len() {
        bail!("run.seeds contains duplicates");
    }
    if c.run.record_every == 0 {
        bail!("run.record_every must be >= 1");
    }
    if c.run.final_window == 0 {
        bail!("run.final_window must be >= 1");
    }
    c.topology.kind()?;
    c.topology.placement()?;
    c.run.init()?;
    let s = &c.schedule;
    match s.kind {
        ScheduleName::Decaying if s.theta.is_none() || s.k0.is_none() => {
            bail!("schedule.theta and schedule.k0 are required for kind = \"decaying\"")
        }
        ScheduleName::Constant if s.alpha.is_none() => {
            bail!("schedule.alpha is required for kind = \"constant\"")
        }
        ScheduleName::TheoryDecaying | ScheduleName::TheoryConstant
            if c.theory.mode == TheoryMode::Off =>
        {
            bail!("theory schedules need theory.mode other than \"off\"")
        }
        _ => {}
    }
    if c.problem.batch_size == 0 {
        bail!("problem.batch_size must be >= 1");
    }
    c.aggregation.aggregator().validate()?;
    c.attack.kind().validate()?;
    c.noise.spec().validate()?;
    if c.aggregation.aggregator().uses_labels() && !c.aggregation.allow_oracle {
        bail!("aggregation.tau reads Byzantine labels; set aggregation.allow_oracle = true");
    }
    Ok(())
}

fn parse_override(o: &str) -> Result<(String, Value)> {
    let (path, raw) = o
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{o}` is not of the form key=value"))?;
    let path = path.trim().to_string();
    if path.is_empty() {
        bail!("override `{o}` has an empty key");
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((path, value))
}

/// Assigns `value` at a dotted `path`, creating intermediate tables.
pub fn set_path(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("malformed key `{path}`");
    }
    let mut t = table;
    for part in &parts[..parts.len() - 1] {
        let entry = t
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        t = match entry {
            Value::Table(inner) => inner,
            _ => bail!("key `{path}`: `{part}` is not a table"),
        };
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
