//! Local objectives, the reliable-average problem, and numeric probes for
//! the problem constants (ν, L, σ², ζ²).

mod benchmark;

pub use benchmark::{
    benchmark_problem, benchmark_problem_with, benchmark_sum_closed_form, family_of,
    standard_benchmark, BenchmarkNoise, BenchmarkObjective, Family, FAMILIES, F_STAR_GRID_STEP,
    F_STAR_INTERVAL,
};

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::RngCore;

use crate::math;
use crate::topology::AgentId;
use crate::{Error, Result};

/// One agent's stochastic objective `f_i(x) = E_ξ f_i(x; ξ)`.
pub trait LocalObjective: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn expected_value(&self, x: &[f64]) -> f64;
    fn expected_gradient(&self, x: &[f64], out: &mut [f64]);
    /// One unbiased stochastic gradient; draws come from `rng` only.
    fn sample_gradient(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);
    fn label(&self) -> String {
        String::from("custom")
    }
}

/// `f(x) = c/2 ‖x − center‖²` plus isotropic Gaussian gradient noise.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub center: Vec<f64>,
    pub curvature: f64,
    pub grad_noise_var: f64,
}

impl LocalObjective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn expected_value(&self, x: &[f64]) -> f64 {
        0.5 * self.curvature * math::dist_sq(x, &self.center)
    }

    fn expected_gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), ci) in out.iter_mut().zip(x).zip(&self.center) {
            *o = self.curvature * (xi - ci);
        }
    }

    fn sample_gradient(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.expected_gradient(x, out);
        for o in out.iter_mut() {
            *o += crate::rng::normal(rng, 0.0, self.grad_noise_var);
        }
    }

    fn label(&self) -> String {
        String::from("quadratic")
    }
}

/// `f = (1/|R|) Σ_{i∈R} f_i` together with the constants the bounds need.
#[derive(Debug, Clone)]
pub struct GlobalProblem {
    locals: Vec<(AgentId, Arc<dyn LocalObjective>)>,
    dim: usize,
    pub f_star: f64,
    pub pl_constant: Option<f64>,
    pub smoothness: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub zeta_sq: Option<f64>,
    pub label: String,
    /// Agents per benchmark family, when built from the benchmark.
    pub family_counts: Option<[usize; 10]>,
}

impl GlobalProblem {
    /// Locals are sorted by agent id. `f_star` starts at `-inf` until set.
    pub fn new(mut locals: Vec<(AgentId, Arc<dyn LocalObjective>)>, dim: usize) -> Self {
        locals.sort_by_key(|(a, _)| *a);
        Self {
            locals,
            dim,
            f_star: f64::NEG_INFINITY,
            pl_constant: None,
            smoothness: None,
            sigma_sq: None,
            zeta_sq: None,
            label: String::from("custom"),
            family_counts: None,
        }
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = f_star;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn locals(&self) -> &[(AgentId, Arc<dyn LocalObjective>)] {
        &self.locals
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.locals.iter().map(|(a, _)| *a)
    }

    pub fn local(&self, agent: AgentId) -> Option<&Arc<dyn LocalObjective>> {
        self.locals
            .binary_search_by_key(&agent, |(a, _)| *a)
            .ok()
            .map(|i| &self.locals[i].1)
    }

    /// Replaces one agent's objective, keeping every cached constant.
    pub fn replace_local(&mut self, agent: AgentId, obj: Arc<dyn LocalObjective>) -> Result<()> {
        match self.locals.binary_search_by_key(&agent, |(a, _)| *a) {
            Ok(i) => {
                self.locals[i].1 = obj;
                Ok(())
            }
            Err(_) => Err(Error::InvalidInput(format!(
                "agent {} has no local objective",
                agent.0
            ))),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let m = self.locals.len() as f64;
        self.locals
            .iter()
            .map(|(_, o)| o.expected_value(x))
            .sum::<f64>()
            / m
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let m = self.locals.len() as f64;
        let mut g = vec![0.0; self.dim];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (_, o) in &self.locals {
            o.expected_gradient(x, &mut g);
            for (acc, gi) in out.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        out.iter_mut().for_each(|o| *o /= m);
    }

    /// `f(x) − f*`, or a broken-optimum error when it is clearly negative.
    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        checked_gap(self.value(x), self.f_star, || format!("{x:?}"))
    }
}

/// Slack below `f*` tolerated as rounding before the optimum is declared broken.
pub fn gap_tolerance(f_star: f64) -> f64 {
    1e-12 * f_star.abs().max(1.0)
}

pub(crate) fn checked_gap(f: f64, f_star: f64, at: impl FnOnce() -> String) -> Result<f64> {
    let gap = f - f_star;
    if gap >= 0.0 {
        Ok(gap)
    } else if gap >= -gap_tolerance(f_star) {
        Ok(0.0)
    } else {
        Err(Error::BrokenOptimum { gap, at: at() })
    }
}

/// Minimizes a scalar function: grid scan, then golden-section search on the
/// bracket around the best grid point until it is narrower than `tol`.
pub fn minimize_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64, tol: f64) -> (f64, f64) {
    let n = math::ceil((hi - lo) / step) as usize;
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let x = (lo + i as f64 * step).min(hi);
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let inv_phi = (math::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    if fm < best.1 {
        (mid, fm)
    } else {
        best
    }
}

/// Evenly spaced points `lo, lo+step, …, ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1d {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid1d {
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let n = math::floor((self.hi - self.lo) / self.step + 1e-9) as usize;
        (0..=n).map(move |i| self.lo + i as f64 * self.step)
    }
}

/// Points closer than this to `f*` in value are skipped by the P-Ł probe.
pub const PL_EXCLUSION: f64 = 1e-9;

/// `inf ½‖∇f(x)‖² / (f(x) − f*)` over the given points.
///
/// Points with `f(x) − f*` below [`PL_EXCLUSION`] are skipped. The result is
/// an upper estimate of the largest valid ν.
pub fn pl_constant_at<'a>(
    prob: &GlobalProblem,
    points: impl IntoIterator<Item = &'a [f64]>,
) -> Result<f64> {
    let mut g = vec![0.0; prob.dim()];
    let mut best = f64::INFINITY;
    let mut used = 0usize;
    for x in points {
        let gap = prob.gap(x)?;
        if gap < PL_EXCLUSION {
            continue;
        }
        prob.gradient(x, &mut g);
        let half_sq = 0.5 * g.iter().map(|v| v * v).sum::<f64>();
        best = best.min(half_sq / gap);
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidConfig(String::from(
            "P-L probe grid has no point away from the optimum",
        )));
    }
    Ok(best)
}

/// One-dimensional P-Ł probe over a grid.
pub fn pl_constant_probe(prob: &GlobalProblem, grid: &Grid1d) -> Result<f64> {
    if prob.dim() != 1 {
        return Err(Error::InvalidConfig(format!(
            "grid probe needs dimension 1, problem has {}",
            prob.dim()
        )));
    }
    let pts: Vec<[f64; 1]> = grid.points().map(|x| [x]).collect();
    pl_constant_at(prob, pts.iter().map(|p| &p[..]))
}

/// Largest |f_i''| over all locals on a 1-D grid, by central differences of
/// the expected gradients. Used as the smoothness constant L.
pub fn smoothness_probe(prob: &GlobalProblem, grid: &Grid1d) -> Result<f64> {
    if prob.dim() != 1 {
        return Err(Error::InvalidConfig(format!(
            "grid probe needs dimension 1, problem has {}",
            prob.dim()
        )));
    }
    let h = 1e-5;
    let (mut gp, mut gm) = ([0.0], [0.0]);
    let mut best = 0.0f64;
    for (_, o) in prob.locals() {
        for x in grid.points() {
            o.expected_gradient(&[x + h], &mut gp);
            o.expected_gradient(&[x - h], &mut gm);
            best = best.max(((gp[0] - gm[0]) / (2.0 * h)).abs());
        }
    }
    Ok(best)
}

/// Empirical `(σ̂², ζ̂²)`.
///
/// σ̂² is the largest per-agent, per-probe sample mean of
/// `‖∇f_i(x;ξ) − ∇f_i(x)‖²`; ζ̂² is the largest `‖∇f_i(x) − ∇f(x)‖²`.
pub fn estimate_sigma_zeta(
    prob: &GlobalProblem,
    probes: &[Vec<f64>],
    samples_per_point: usize,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    if probes.is_empty() {
        return Err(Error::InvalidConfig(String::from("empty probe list")));
    }
    if samples_per_point < 2 {
        return Err(Error::param("samples_per_point", "must be at least 2"));
    }
    let n = prob.dim();
    let (mut mean_g, mut gi, mut gs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut sigma_sq, mut zeta_sq) = (0.0f64, 0.0f64);
    for x in probes {
        prob.gradient(x, &mut mean_g);
        for (_, o) in prob.locals() {
            o.expected_gradient(x, &mut gi);
            zeta_sq = zeta_sq.max(math::dist_sq(&gi, &mean_g));
            let mut acc = 0.0;
            for _ in 0..samples_per_point {
                o.sample_gradient(x, rng, &mut gs);
                acc += math::dist_sq(&gs, &gi);
            }
            sigma_sq = sigma_sq.max(acc / samples_per_point as f64);
        }
    }
    Ok((sigma_sq, zeta_sq))
}

/// Default probe grids for the benchmark constants.
pub const PL_GRID: Grid1d = Grid1d {
    lo: -5.0,
    hi: 5.0,
    step: 1e-3,
};
pub const SMOOTHNESS_GRID: Grid1d = Grid1d {
    lo: -10.0,
    hi: 10.0,
    step: 1e-3,
};

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(center: f64, curvature: f64) -> Arc<dyn LocalObjective> {
        Arc::new(QuadraticObjective {
            center: vec![center],
            curvature,
            grad_noise_var: 0.0,
        })
    }

    #[test]
    fn pl_of_half_square_is_one() {
        let p = GlobalProblem::new(vec![(AgentId(0), quad(0.0, 1.0))], 1).with_f_star(0.0);
        let nu = pl_constant_probe(
            &p,
            &Grid1d {
                lo: -3.0,
                hi: 3.0,
                step: 0.1,
            },
        )
        .unwrap();
        assert!((nu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pl_of_ten_x_squared_is_twenty() {
        let p = GlobalProblem::new(vec![(AgentId(0), quad(0.0, 20.0))], 1).with_f_star(0.0);
        let nu = pl_constant_probe(
            &p,
            &Grid1d {
                lo: -3.0,
                hi: 3.0,
                step: 0.25,
            },
        )
        .unwrap();
        assert!((nu - 20.0).abs() < 1e-9);
    }

    #[test]
    fn pl_probe_detects_broken_optimum() {
        let p = GlobalProblem::new(vec![(AgentId(0), quad(0.0, 1.0))], 1).with_f_star(0.5);
        let err = pl_constant_probe(
            &p,
            &Grid1d {
                lo: -1.0,
                hi: 1.0,
                step: 0.5,
            },
        );
        assert!(matches!(err, Err(Error::BrokenOptimum { .. })));
    }

    #[test]
    fn identical_locals_have_no_heterogeneity() {
        let locals = (0..4).map(|i| (AgentId(i), quad(1.0, 2.0))).collect();
        let p = GlobalProblem::new(locals, 1);
        let mut r = crate::rng::stream_rng(1, 0, crate::rng::Stream::Estimation);
        let (s, z) = estimate_sigma_zeta(&p, &[vec![-1.0], vec![3.0]], 10, &mut r).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(z, 0.0);
    }

    #[test]
    fn estimator_rejects_empty_probe_list() {
        let p = GlobalProblem::new(vec![(AgentId(0), quad(0.0, 1.0))], 1);
        let mut r = crate::rng::stream_rng(1, 0, crate::rng::Stream::Estimation);
        assert!(estimate_sigma_zeta(&p, &[], 10, &mut r).is_err());
    }

    #[test]
    fn minimize_finds_shifted_parabola() {
        let (x, fx) = minimize_1d(
            |x| (x - 1.234567) * (x - 1.234567) + 3.0,
            -10.0,
            10.0,
            1e-2,
            1e-12,
        );
        assert!((x - 1.234567).abs() < 1e-6);
        assert!((fx - 3.0).abs() < 1e-12);
    }

    #[test]
    fn replace_local_requires_known_agent() {
        let mut p = GlobalProblem::new(vec![(AgentId(2), quad(0.0, 1.0))], 1);
        assert!(p.replace_local(AgentId(2), quad(1.0, 1.0)).is_ok());
        assert!(p.replace_local(AgentId(3), quad(1.0, 1.0)).is_err());
        assert_eq!(p.value(&[1.0]), 0.0);
    }
}
