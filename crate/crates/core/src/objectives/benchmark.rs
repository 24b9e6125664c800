//! The ten scalar function families of the 100-agent benchmark.
//!
//! Every family has the shape `u·h(x) + c_u·u + c_v·v` with
//! `u ~ N(1, var_u)` and `v ~ N(0, var_v)`. The `u`/`v` offsets are kept inside
//! the expectation; they shift values only, never gradients. With one agent of
//! each family the expected values add up to `x² + 1 + 3 sin²x`, so 100 agents
//! (ten per family) give `10x² + 30 sin²x + 10`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::RngCore;

use super::{minimize_1d, GlobalProblem, LocalObjective};
use crate::math::{self, cbrt, cos, sin, sqrt};
use crate::rng;
use crate::topology::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
}

pub const FAMILIES: [Family; 10] = [
    Family::F1,
    Family::F2,
    Family::F3,
    Family::F4,
    Family::F5,
    Family::F6,
    Family::F7,
    Family::F8,
    Family::F9,
    Family::F10,
];

// √(x⁴+3)
fn r4(x: f64) -> f64 {
    sqrt(x * x * x * x + 3.0)
}
fn r4_d(x: f64) -> f64 {
    2.0 * x * x * x / r4(x)
}
// x²/√(x²+1)
fn q(x: f64) -> f64 {
    x * x / sqrt(x * x + 1.0)
}
fn q_d(x: f64) -> f64 {
    let s = x * x + 1.0;
    x * (x * x + 2.0) / (s * sqrt(s))
}
// (x²+2)^{1/3}
fn t(x: f64) -> f64 {
    cbrt(x * x + 2.0)
}
fn t_d(x: f64) -> f64 {
    let c = cbrt(x * x + 2.0);
    2.0 * x / (3.0 * c * c)
}
fn sin2(x: f64) -> f64 {
    let s = sin(x);
    s * s
}
fn cos2(x: f64) -> f64 {
    let c = cos(x);
    c * c
}
// d/dx sin²x = 2 sin x cos x
fn sin2_d(x: f64) -> f64 {
    2.0 * sin(x) * cos(x)
}

impl Family {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Family> {
        FAMILIES.get(i).copied()
    }

    /// The part multiplied by `u`.
    pub fn shape(self, x: f64) -> f64 {
        match self {
            Family::F1 => 0.2 * r4(x) + 0.7 * cos2(x),
            Family::F2 => 2.0 * sin(x) - 0.1 * t(x),
            Family::F3 => 0.3 * q(x),
            Family::F4 => -0.1 * r4(x) - sin(x),
            Family::F5 => -0.2 * q(x) + 2.0 * sin2(x),
            Family::F6 => -0.1 * r4(x) - 0.1 * q(x),
            Family::F7 => -sin(x),
            Family::F8 => x * x + 0.3 * cos2(x),
            Family::F9 => 2.0 * sin2(x) + 0.2 * t(x),
            Family::F10 => -0.1 * t(x),
        }
    }

    pub fn shape_derivative(self, x: f64) -> f64 {
        match self {
            Family::F1 => 0.2 * r4_d(x) - 0.7 * sin2_d(x),
            Family::F2 => 2.0 * cos(x) - 0.1 * t_d(x),
            Family::F3 => 0.3 * q_d(x),
            Family::F4 => -0.1 * r4_d(x) - cos(x),
            Family::F5 => -0.2 * q_d(x) + 2.0 * sin2_d(x),
            Family::F6 => -0.1 * r4_d(x) - 0.1 * q_d(x),
            Family::F7 => -cos(x),
            Family::F8 => 2.0 * x - 0.3 * sin2_d(x),
            Family::F9 => 2.0 * sin2_d(x) + 0.2 * t_d(x),
            Family::F10 => -0.1 * t_d(x),
        }
    }

    /// Coefficients `(c_u, c_v)` of the additive `u` and `v` terms.
    fn offsets(self) -> (f64, f64) {
        match self {
            Family::F1 => (1.0, 0.0),
            Family::F7 => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    /// Value of the sampled function at a fixed draw `(u, v)`.
    pub fn sampled_value(self, x: f64, u: f64, v: f64) -> f64 {
        let (cu, cv) = self.offsets();
        u * self.shape(x) + cu * u + cv * v
    }

    pub fn sampled_gradient(self, x: f64, u: f64) -> f64 {
        u * self.shape_derivative(x)
    }

    /// E over u ~ N(1,·), v ~ N(0,·).
    pub fn expected_value(self, x: f64) -> f64 {
        self.shape(x) + self.offsets().0
    }

    pub fn expected_gradient(self, x: f64) -> f64 {
        self.shape_derivative(x)
    }
}

/// Family of agent `agent` among `n_agents`: ten equal contiguous blocks.
pub fn family_of(agent: AgentId, n_agents: usize) -> Family {
    Family::from_index(agent.0 * 10 / n_agents).unwrap_or(Family::F10)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkNoise {
    pub u_variance: f64,
    pub v_variance: f64,
    pub batch_size: usize,
}

impl Default for BenchmarkNoise {
    fn default() -> Self {
        Self {
            u_variance: 0.01,
            v_variance: 0.01,
            batch_size: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkObjective {
    pub family: Family,
    pub noise: BenchmarkNoise,
}

impl LocalObjective for BenchmarkObjective {
    fn dim(&self) -> usize {
        1
    }

    fn expected_value(&self, x: &[f64]) -> f64 {
        self.family.expected_value(x[0])
    }

    fn expected_gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.family.expected_gradient(x[0]);
    }

    fn sample_gradient(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let g = self.family.expected_gradient(x[0]);
        let b = self.noise.batch_size.max(1);
        let mut acc = 0.0;
        for _ in 0..b {
            let u = rng::normal(rng, 1.0, self.noise.u_variance);
            acc += u * g;
        }
        out[0] = acc / b as f64;
    }

    fn label(&self) -> String {
        format!("benchmark/{:?}", self.family)
    }
}

/// Grid step and search interval for the benchmark optimum.
pub const F_STAR_GRID_STEP: f64 = 1e-4;
pub const F_STAR_INTERVAL: (f64, f64) = (-10.0, 10.0);

/// Benchmark restricted to the reliable agents of an `n_agents` network.
///
/// `f_star` is found by a grid scan plus golden-section refinement of the
/// reliable average. ν, L, σ² and ζ² are estimated by the probes in the parent
/// module.
pub fn benchmark_problem(
    n_agents: usize,
    byzantine: &[AgentId],
    noise: BenchmarkNoise,
) -> GlobalProblem {
    benchmark_problem_with(n_agents, byzantine, noise, &[])
}

/// [`benchmark_problem`] with some agents assigned a different family, as in
/// an adjacent function set.
pub fn benchmark_problem_with(
    n_agents: usize,
    byzantine: &[AgentId],
    noise: BenchmarkNoise,
    overrides: &[(AgentId, Family)],
) -> GlobalProblem {
    let mut counts = [0usize; 10];
    let mut locals: Vec<(AgentId, Arc<dyn LocalObjective>)> = Vec::new();
    for a in (0..n_agents).map(AgentId) {
        if byzantine.contains(&a) {
            continue;
        }
        let family = overrides
            .iter()
            .find(|(o, _)| *o == a)
            .map_or_else(|| family_of(a, n_agents), |(_, f)| *f);
        counts[family.index()] += 1;
        locals.push((a, Arc::new(BenchmarkObjective { family, noise })));
    }
    let m = locals.len() as f64;
    let f = |x: f64| -> f64 {
        FAMILIES
            .iter()
            .zip(counts.iter())
            .filter(|(_, &c)| c > 0)
            .map(|(fam, &c)| c as f64 * fam.expected_value(x))
            .sum::<f64>()
            / m
    };
    let (_, f_star) = minimize_1d(
        f,
        F_STAR_INTERVAL.0,
        F_STAR_INTERVAL.1,
        F_STAR_GRID_STEP,
        1e-12,
    );
    let mut prob = GlobalProblem::new(locals, 1).with_f_star(f_star);
    prob.label = String::from("benchmark100");
    prob.family_counts = Some(counts);
    prob
}

/// The 100-agent benchmark with default sampling noise.
pub fn standard_benchmark(byzantine: &[AgentId]) -> GlobalProblem {
    benchmark_problem(100, byzantine, BenchmarkNoise::default())
}

/// Sum over all 100 agents of the expected local values.
pub fn benchmark_sum_closed_form(x: f64) -> f64 {
    10.0 * x * x + 30.0 * math::powi(sin(x), 2) + 10.0
}
