//! Unsafe-network topologies: agent labels, weight matrices, the virtual
//! weight matrix over reliable agents and the constants derived from it.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{self, Matrix};
use crate::math;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Tolerance for row/column sums of doubly stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Resamples of a random graph before giving up on a connected reliable subgraph.
pub const RANDOM_GRAPH_RETRIES: u32 = 100;
/// Convergence tolerance of the power method used for the mixing rate.
pub const SPECTRAL_TOL: f64 = 1e-10;
const SPECTRAL_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologyKind {
    /// Hub is the last agent, every other agent is a leaf.
    Star,
    /// Erdős–Rényi graph with edge probability `p`.
    Random {
        p: f64,
    },
    Complete,
    /// Cycle `0 – 1 – … – (n−1) – 0`.
    Ring,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ByzantinePlacement {
    /// `round(fraction * n)` agents at indices `floor(t * n / |B|)`.
    Fraction(f64),
    Explicit(Vec<AgentId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n_agents: usize,
    reliable: Vec<AgentId>,
    byzantine: Vec<AgentId>,
    is_byzantine: Vec<bool>,
    /// Sorted neighbor lists (no self loops).
    neighbors: Vec<Vec<AgentId>>,
    weights: Matrix,
}

impl Network {
    /// Validates and wraps an explicit topology. `edges` are undirected.
    pub fn from_parts(
        n_agents: usize,
        byzantine: &[AgentId],
        edges: &[(AgentId, AgentId)],
        weights: Matrix,
    ) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 agents, got {n_agents}"
            )));
        }
        if weights.rows() != n_agents || weights.cols() != n_agents {
            return Err(Error::InvalidInput(format!(
                "weight matrix is {}x{}, expected {n_agents}x{n_agents}",
                weights.rows(),
                weights.cols()
            )));
        }
        let mut is_byzantine = vec![false; n_agents];
        for b in byzantine {
            if b.0 >= n_agents {
                return Err(Error::InvalidConfig(format!(
                    "byzantine id {b} out of range"
                )));
            }
            is_byzantine[b.0] = true;
        }
        let reliable: Vec<AgentId> = (0..n_agents)
            .filter(|&i| !is_byzantine[i])
            .map(AgentId)
            .collect();
        if reliable.is_empty() {
            return Err(Error::InvalidConfig("no reliable agents".into()));
        }
        let byzantine: Vec<AgentId> = (0..n_agents)
            .filter(|&i| is_byzantine[i])
            .map(AgentId)
            .collect();

        let mut adj = vec![vec![false; n_agents]; n_agents];
        for &(a, b) in edges {
            if a.0 >= n_agents || b.0 >= n_agents {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) out of range")));
            }
            if a != b {
                adj[a.0][b.0] = true;
                adj[b.0][a.0] = true;
            }
        }
        let neighbors = adj
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &e)| e)
                    .map(|(j, _)| AgentId(j))
                    .collect()
            })
            .collect();

        let net = Network {
            n_agents,
            reliable,
            byzantine,
            is_byzantine,
            neighbors,
            weights,
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks every structural invariant the analysis relies on.
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        for i in 0..self.n_agents {
            for j in 0..self.n_agents {
                let v = w.get(i, j);
                if !(v >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "w[{i}][{j}] = {v} is negative"
                    )));
                }
                if v > 0.0 && i != j && !self.has_edge(AgentId(i), AgentId(j)) {
                    return Err(Error::InvalidInput(format!(
                        "w[{i}][{j}] = {v} > 0 without an edge"
                    )));
                }
            }
        }
        for (i, s) in w.row_sums().iter().enumerate() {
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidInput(format!("row {i} sums to {s}")));
            }
        }
        for (j, s) in w.col_sums().iter().enumerate() {
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidInput(format!("column {j} sums to {s}")));
            }
        }
        for r in &self.reliable {
            if !(w.get(r.0, r.0) > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "reliable agent {r} has non-positive self weight"
                )));
            }
        }
        if !self.reliable_subgraph_connected() {
            return Err(Error::TopologyInfeasible(
                "reliable subgraph is disconnected".into(),
            ));
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn reliable(&self) -> &[AgentId] {
        &self.reliable
    }

    pub fn byzantine(&self) -> &[AgentId] {
        &self.byzantine
    }

    #[inline]
    pub fn is_byzantine(&self, a: AgentId) -> bool {
        self.is_byzantine[a.0]
    }

    pub fn byzantine_mask(&self) -> &[bool] {
        &self.is_byzantine
    }

    pub fn neighbors(&self, a: AgentId) -> &[AgentId] {
        &self.neighbors[a.0]
    }

    pub fn reliable_neighbors(&self, a: AgentId) -> impl Iterator<Item = AgentId> + '_ {
        self.neighbors[a.0]
            .iter()
            .copied()
            .filter(move |j| !self.is_byzantine[j.0])
    }

    pub fn byzantine_neighbors(&self, a: AgentId) -> impl Iterator<Item = AgentId> + '_ {
        self.neighbors[a.0]
            .iter()
            .copied()
            .filter(move |j| self.is_byzantine[j.0])
    }

    pub fn has_edge(&self, a: AgentId, b: AgentId) -> bool {
        self.neighbors[a.0].binary_search(&b).is_ok()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: AgentId, j: AgentId) -> f64 {
        self.weights.get(i.0, j.0)
    }

    pub fn edges(&self) -> Vec<(AgentId, AgentId)> {
        let mut out = Vec::new();
        for i in 0..self.n_agents {
            for &j in &self.neighbors[i] {
                if i < j.0 {
                    out.push((AgentId(i), j));
                }
            }
        }
        out
    }

    /// Σ_{b∈B_i} w_ib.
    pub fn byzantine_weight(&self, i: AgentId) -> f64 {
        self.byzantine_neighbors(i).map(|b| self.weight(i, b)).sum()
    }

    /// Σ_{r∈R_i} w_ir, excluding the self weight.
    pub fn reliable_neighbor_weight(&self, i: AgentId) -> f64 {
        self.reliable_neighbors(i).map(|r| self.weight(i, r)).sum()
    }

    /// Breadth-first search over the subgraph induced by reliable agents.
    pub fn reliable_subgraph_connected(&self) -> bool {
        let Some(&start) = self.reliable.first() else {
            return false;
        };
        let mut seen = vec![false; self.n_agents];
        let mut queue = VecDeque::new();
        seen[start.0] = true;
        queue.push_back(start);
        let mut count = 1;
        while let Some(a) = queue.pop_front() {
            for b in self.reliable_neighbors(a) {
                if !seen[b.0] {
                    seen[b.0] = true;
                    count += 1;
                    queue.push_back(b);
                }
            }
        }
        count == self.reliable.len()
    }

    /// FNV-1a over the structure and weights; used to match logs produced on
    /// the same network.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.n_agents as u64);
        for b in &self.byzantine {
            h.write_u64(b.0 as u64);
        }
        for i in 0..self.n_agents {
            for j in 0..self.n_agents {
                h.write_u64(self.weights.get(i, j).to_bits());
            }
        }
        h.finish()
    }
}

pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    pub(crate) fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

/// Evenly spaced Byzantine indices `floor(t * n / count)`.
pub fn evenly_spaced_byzantine(n_agents: usize, count: usize) -> Vec<AgentId> {
    (0..count).map(|t| AgentId(t * n_agents / count)).collect()
}

/// Metropolis–Hastings weights: `w_ij = 1/(1 + max(deg_i, deg_j))` on edges,
/// the diagonal takes the remainder. Symmetric, hence doubly stochastic.
pub fn metropolis_hastings(n_agents: usize, edges: &[(AgentId, AgentId)]) -> Matrix {
    let mut deg = vec![0usize; n_agents];
    let mut adj = vec![vec![false; n_agents]; n_agents];
    for &(a, b) in edges {
        if a != b && !adj[a.0][b.0] {
            adj[a.0][b.0] = true;
            adj[b.0][a.0] = true;
            deg[a.0] += 1;
            deg[b.0] += 1;
        }
    }
    let mut w = Matrix::zeros(n_agents, n_agents);
    for i in 0..n_agents {
        for j in (i + 1)..n_agents {
            if adj[i][j] {
                let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
    }
    for i in 0..n_agents {
        let off: f64 = (0..n_agents).filter(|&j| j != i).map(|j| w.get(i, j)).sum();
        w.set(i, i, 1.0 - off);
    }
    w
}

fn graph_edges(kind: TopologyKind, n: usize, rng: &mut rng::SimRng) -> Vec<(AgentId, AgentId)> {
    let mut edges = Vec::new();
    match kind {
        TopologyKind::Star => {
            let hub = n - 1;
            for i in 0..hub {
                edges.push((AgentId(i), AgentId(hub)));
            }
        }
        TopologyKind::Complete => {
            for i in 0..n {
                for j in (i + 1)..n {
                    edges.push((AgentId(i), AgentId(j)));
                }
            }
        }
        TopologyKind::Ring => {
            for i in 0..n {
                let j = (i + 1) % n;
                if i < j || n > 2 {
                    edges.push((AgentId(i), AgentId(j)));
                }
            }
        }
        TopologyKind::Random { p } => {
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng::uniform(rng, 0.0, 1.0) < p {
                        edges.push((AgentId(i), AgentId(j)));
                    }
                }
            }
        }
    }
    edges
}

pub fn byzantine_count(n_agents: usize, fraction: f64) -> usize {
    math::round(fraction * n_agents as f64) as usize
}

/// Builds a network with Metropolis–Hastings weights.
///
/// Random graphs are resampled (up to [`RANDOM_GRAPH_RETRIES`] times) until the
/// reliable subgraph is connected. A star whose hub is Byzantine is rejected.
pub fn build_network(
    kind: TopologyKind,
    n_agents: usize,
    placement: &ByzantinePlacement,
    seed: u64,
) -> Result<Network> {
    if n_agents < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 agents, got {n_agents}"
        )));
    }
    let byzantine = match placement {
        ByzantinePlacement::Fraction(f) => {
            if !(0.0..=0.5).contains(f) {
                return Err(Error::InvalidConfig(format!(
                    "byzantine fraction {f} outside [0, 0.5]"
                )));
            }
            evenly_spaced_byzantine(n_agents, byzantine_count(n_agents, *f))
        }
        ByzantinePlacement::Explicit(ids) => {
            let mut ids = ids.clone();
            ids.sort();
            ids.dedup();
            ids
        }
    };
    if byzantine.len() >= n_agents {
        return Err(Error::InvalidConfig(
            "byzantine set covers every agent".into(),
        ));
    }
    if let TopologyKind::Random { p } = kind {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!(
                "edge probability {p} outside [0, 1]"
            )));
        }
    }
    if kind == TopologyKind::Star && byzantine.contains(&AgentId(n_agents - 1)) {
        return Err(Error::TopologyInfeasible(
            "star hub is Byzantine; reliable leaves would be disconnected".into(),
        ));
    }

    let attempts = match kind {
        TopologyKind::Random { .. } => RANDOM_GRAPH_RETRIES,
        _ => 1,
    };
    let mut rng = rng::stream_rng(seed, 0, Stream::Topology);
    let mut last_err = None;
    for _ in 0..attempts {
        let edges = graph_edges(kind, n_agents, &mut rng);
        let weights = metropolis_hastings(n_agents, &edges);
        match Network::from_parts(n_agents, &byzantine, &edges, weights) {
            Ok(net) => return Ok(net),
            Err(e @ Error::TopologyInfeasible(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(match last_err {
        Some(Error::TopologyInfeasible(msg)) => {
            Error::TopologyInfeasible(format!("{msg} after {attempts} attempt(s)"))
        }
        Some(e) => e,
        None => Error::TopologyInfeasible(String::from("no attempt made")),
    })
}

/// Sets every reliable–Byzantine edge to weight `weight`, moving the
/// difference onto both endpoints' diagonals so `W` stays symmetric and
/// doubly stochastic. Small weights make the Byzantine coupling weak.
pub fn with_byzantine_edge_weight(net: &Network, weight: f64) -> Result<Network> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::param(
            "byzantine_edge_weight",
            format!("must be positive, got {weight}"),
        ));
    }
    let mut w = net.weights().clone();
    for &i in net.reliable() {
        for b in net.byzantine_neighbors(i) {
            let old = w.get(i.0, b.0);
            w.set(i.0, b.0, weight);
            w.set(b.0, i.0, weight);
            w.set(i.0, i.0, w.get(i.0, i.0) + old - weight);
            w.set(b.0, b.0, w.get(b.0, b.0) + old - weight);
        }
    }
    Network::from_parts(net.n_agents(), net.byzantine(), &net.edges(), w)
}

/// Reliable-only mixing matrix with Byzantine weights folded into the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualMatrix {
    /// Indexed by position in `Network::reliable()`.
    pub w_tilde: Matrix,
    /// λ = ‖W̃ − (1/|R|)𝟙𝟙ᵀ‖₂².
    pub mixing_rate_sq: f64,
}

pub fn virtual_matrix(net: &Network) -> VirtualMatrix {
    let rel = net.reliable();
    let m = rel.len();
    let mut wt = Matrix::zeros(m, m);
    for (a, &i) in rel.iter().enumerate() {
        for (b, &j) in rel.iter().enumerate() {
            let v = if a == b {
                net.weight(i, i) + net.byzantine_weight(i)
            } else {
                net.weight(i, j)
            };
            wt.set(a, b, v);
        }
    }
    let centered = wt.minus_constant(1.0 / m as f64);
    let s = linalg::spectral_norm(&centered, SPECTRAL_TOL, SPECTRAL_MAX_ITER);
    VirtualMatrix {
        w_tilde: wt,
        mixing_rate_sq: s * s,
    }
}

/// 4·max_{i∈R} √(Σ_{r∈R_i} w_ir · Σ_{b∈B_i} w_ib): the largest contraction
/// constant for which the Byzantine-weighted clipping radius is certified.
pub fn rho_upper_bound(net: &Network) -> f64 {
    net.reliable()
        .iter()
        .map(|&i| 4.0 * math::sqrt(net.reliable_neighbor_weight(i) * net.byzantine_weight(i)))
        .fold(0.0, f64::max)
}

/// The looser bound that accompanies the alternative clipping radius
/// τ_i = Σ_r w_ir‖x̃_i − x̃_r‖²: 2·max_i √(2(1+|N_i|²) Σ_{r∈R_i} w_ir).
pub fn rho_upper_bound_reliable_spread(net: &Network) -> f64 {
    net.reliable()
        .iter()
        .map(|&i| {
            let deg = net.neighbors(i).len() as f64;
            2.0 * math::sqrt(2.0 * (1.0 + deg * deg) * net.reliable_neighbor_weight(i))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// L, the largest local smoothness constant.
    pub smoothness: f64,
    /// ν, the P-Ł constant of the global objective.
    pub pl_constant: f64,
    pub sigma_sq: f64,
    pub zeta_sq: f64,
    /// ϖ², per-coordinate noise variance cap.
    pub noise_var: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    Valid,
    Invalid(String),
}

/// Constants of the disagreement and optimal-gap bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConstants {
    pub n_reliable: usize,
    pub lambda: f64,
    pub rho: f64,
    pub problem: ProblemConstants,
    /// ρ̄ = λ/(4√|R|).
    pub rho_bar: f64,
    /// φ = λ − 4ρ√|R|.
    pub phi_big: f64,
    /// η = φ/2.
    pub eta: f64,
    /// ϕ = φ/(4 − φ).
    pub phi: f64,
    /// ϑ = 4|R|(nϖ² + 4(σ² + ζ²))/ϕ.
    pub vartheta: f64,
    /// θ = ϕ/(4√3 L).
    pub theta: f64,
    /// Smallest admissible offset, ⌈2/ϕ⌉ + 1. Zero when ϕ ≤ 0.
    pub k0: u64,
    /// θ̲ = min{θ, 1/ν}.
    pub theta_under: f64,
    /// ι = (1 + 1/k0)².
    pub iota: f64,
    pub regime: Regime,
}

impl TheoryConstants {
    pub fn regime_valid(&self) -> bool {
        self.regime == Regime::Valid
    }

    pub fn require_valid(&self) -> Result<()> {
        match &self.regime {
            Regime::Valid => Ok(()),
            Regime::Invalid(why) => Err(Error::RegimeInvalid(why.clone())),
        }
    }
}

pub fn theory_constants(
    net: &Network,
    rho: f64,
    problem: ProblemConstants,
) -> Result<TheoryConstants> {
    let lambda = virtual_matrix(net).mixing_rate_sq;
    theory_constants_from_lambda(lambda, net.reliable().len(), rho, problem)
}

pub fn theory_constants_from_lambda(
    lambda: f64,
    n_reliable: usize,
    rho: f64,
    problem: ProblemConstants,
) -> Result<TheoryConstants> {
    if !(rho >= 0.0) {
        return Err(Error::param("rho", "must be >= 0"));
    }
    if !(problem.smoothness > 0.0) {
        return Err(Error::param("smoothness", "must be > 0"));
    }
    if !(problem.pl_constant > 0.0) {
        return Err(Error::param("pl_constant", "must be > 0"));
    }
    let r = n_reliable as f64;
    let sqrt_r = math::sqrt(r);
    let rho_bar = lambda / (4.0 * sqrt_r);
    let phi_big = lambda - 4.0 * rho * sqrt_r;
    let eta = phi_big / 2.0;
    let phi = phi_big / (4.0 - phi_big);
    let n = problem.dim as f64;
    let vartheta =
        4.0 * r * (n * problem.noise_var + 4.0 * (problem.sigma_sq + problem.zeta_sq)) / phi;
    let theta = phi / (4.0 * math::sqrt(3.0) * problem.smoothness);
    let k0 = if phi > 0.0 {
        (math::ceil(2.0 / phi) as u64).saturating_add(1)
    } else {
        0
    };
    let theta_under = f64::min(theta, 1.0 / problem.pl_constant);
    let iota = if k0 > 0 {
        let t = 1.0 + 1.0 / k0 as f64;
        t * t
    } else {
        f64::INFINITY
    };

    let in_unit = |v: f64| v > 0.0 && v < 1.0;
    let regime = if !(rho < rho_bar) {
        Regime::Invalid(format!("rho = {rho} is not below rho_bar = {rho_bar}"))
    } else if !(in_unit(phi_big) && in_unit(eta) && in_unit(phi)) {
        Regime::Invalid(format!(
            "need phi_big, eta, phi in (0,1); got {phi_big}, {eta}, {phi}"
        ))
    } else {
        Regime::Valid
    };

    Ok(TheoryConstants {
        n_reliable,
        lambda,
        rho,
        problem,
        rho_bar,
        phi_big,
        eta,
        phi,
        vartheta,
        theta,
        k0,
        theta_under,
        iota,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k4_one_byzantine() -> Network {
        build_network(
            TopologyKind::Complete,
            4,
            &ByzantinePlacement::Explicit(vec![AgentId(3)]),
            0,
        )
        .unwrap()
    }

    #[test]
    fn complete_graph_has_uniform_weights() {
        let net = build_network(
            TopologyKind::Complete,
            4,
            &ByzantinePlacement::Fraction(0.0),
            9,
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((net.weights().get(i, j) - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn star_100_with_ten_percent() {
        let net = build_network(
            TopologyKind::Star,
            100,
            &ByzantinePlacement::Fraction(0.1),
            1,
        )
        .unwrap();
        assert_eq!(net.byzantine().len(), 10);
        assert_eq!(net.reliable().len(), 90);
        assert_eq!(net.byzantine()[3], AgentId(30));
    }

    #[test]
    fn star_with_byzantine_hub_is_rejected() {
        let err = build_network(
            TopologyKind::Star,
            5,
            &ByzantinePlacement::Explicit(vec![AgentId(4)]),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TopologyInfeasible(_)));
    }

    #[test]
    fn fraction_out_of_range_is_invalid_config() {
        let err = build_network(
            TopologyKind::Complete,
            4,
            &ByzantinePlacement::Fraction(0.6),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn sparse_random_graph_exhausts_retries() {
        let err = build_network(
            TopologyKind::Random { p: 0.0 },
            6,
            &ByzantinePlacement::Fraction(0.0),
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TopologyInfeasible(_)));
    }

    #[test]
    fn virtual_matrix_folds_byzantine_weight() {
        let vm = virtual_matrix(&k4_one_byzantine());
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 0.5 } else { 0.25 };
                assert!((vm.w_tilde.get(a, b) - want).abs() < 1e-15);
            }
        }
        // W̃ − J/3 has eigenvalues 1/4 on 𝟙^⊥ and 0 on 𝟙.
        assert!((vm.mixing_rate_sq - 0.0625).abs() < 1e-9);
    }

    #[test]
    fn virtual_matrix_without_byzantine_is_restriction() {
        let net = build_network(
            TopologyKind::Random { p: 0.5 },
            8,
            &ByzantinePlacement::Fraction(0.0),
            4,
        )
        .unwrap();
        let vm = virtual_matrix(&net);
        assert_eq!(&vm.w_tilde, net.weights());
    }

    #[test]
    fn uniform_virtual_matrix_has_zero_mixing_rate() {
        let net = build_network(
            TopologyKind::Complete,
            6,
            &ByzantinePlacement::Fraction(0.0),
            0,
        )
        .unwrap();
        assert!(virtual_matrix(&net).mixing_rate_sq < 1e-20);
    }

    #[test]
    fn rho_bound_examples() {
        let net = build_network(
            TopologyKind::Complete,
            5,
            &ByzantinePlacement::Fraction(0.0),
            0,
        )
        .unwrap();
        assert_eq!(rho_upper_bound(&net), 0.0);

        let want = 4.0 * math::sqrt(0.5 * 0.25);
        assert!((rho_upper_bound(&k4_one_byzantine()) - want).abs() < 1e-12);
        assert!((want - core::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn rho_bound_is_zero_for_leaf_with_only_byzantine_hub() {
        // Agents 0,1 are leaves of hub 2 (Byzantine); leaf 0 is also tied to 1
        // so the reliable subgraph stays connected. Use a path 0-1 plus hub.
        let edges = [
            (AgentId(0), AgentId(2)),
            (AgentId(1), AgentId(2)),
            (AgentId(0), AgentId(1)),
        ];
        let w = Matrix::from_rows(&[
            vec![0.5, 0.0, 0.5],
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.5, 0.0],
        ]);
        // Reliable 0 and 1 are not connected through weights, but the edge
        // exists, so the structure is valid: both leaves have Σ_r w_ir = 0.
        let net = Network::from_parts(3, &[AgentId(2)], &edges, w).unwrap();
        assert_eq!(rho_upper_bound(&net), 0.0);
    }

    #[test]
    fn theory_constants_arithmetic() {
        let pc = ProblemConstants {
            smoothness: 1.0,
            pl_constant: 1.0,
            sigma_sq: 0.0,
            zeta_sq: 0.0,
            noise_var: 0.0,
            dim: 1,
        };
        let c = theory_constants_from_lambda(0.5, 4, 0.0, pc).unwrap();
        assert!((c.phi_big - 0.5).abs() < 1e-15);
        assert!((c.eta - 0.25).abs() < 1e-15);
        assert!((c.phi - 0.5 / 3.5).abs() < 1e-15);
        assert!((c.phi - 0.142_857).abs() < 1e-6);
        assert!(c.regime_valid());
        assert!(c.k0 as f64 > 2.0 / c.phi);
        assert_eq!(c.k0, 15);

        let at_bar = theory_constants_from_lambda(0.5, 4, c.rho_bar, pc).unwrap();
        assert_eq!(at_bar.phi_big, 0.0);
        assert!(!at_bar.regime_valid());
    }

    #[test]
    fn theory_constants_are_bitwise_pure() {
        let pc = ProblemConstants {
            smoothness: 4.1,
            pl_constant: 0.0175,
            sigma_sq: 0.04,
            zeta_sq: 3.7,
            noise_var: 1e-6,
            dim: 1,
        };
        let a = theory_constants_from_lambda(0.37, 90, 0.001, pc).unwrap();
        let b = theory_constants_from_lambda(0.37, 90, 0.001, pc).unwrap();
        assert_eq!(a.vartheta.to_bits(), b.vartheta.to_bits());
        assert_eq!(a.theta_under.to_bits(), b.theta_under.to_bits());
    }
}
