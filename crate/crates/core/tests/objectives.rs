use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scc_core::objectives::*;
use scc_core::rng::{stream_rng, Stream};
use scc_core::topology::evenly_spaced_byzantine;
use scc_core::AgentId;

#[test]
fn sampled_gradients_match_finite_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    let h = 1e-5;
    for fam in FAMILIES {
        for _ in 0..100 {
            let x: f64 = r.random_range(-10.0..10.0);
            let u: f64 = r.random_range(0.5..1.5);
            let v: f64 = r.random_range(-0.5..0.5);
            let fd = (fam.sampled_value(x + h, u, v) - fam.sampled_value(x - h, u, v)) / (2.0 * h);
            let g = fam.sampled_gradient(x, u);
            assert!((fd - g).abs() < 1e-6, "{fam:?} at {x}: {fd} vs {g}");
            let efd = (fam.expected_value(x + h) - fam.expected_value(x - h)) / (2.0 * h);
            assert!((efd - fam.expected_gradient(x)).abs() < 1e-6);
        }
    }
}

#[test]
fn benchmark_sum_identity() {
    let prob = standard_benchmark(&[]);
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x: f64 = r.random_range(-10.0..10.0);
        let total = 100.0 * prob.value(&[x]);
        let closed = 10.0 * x * x + 30.0 * x.sin().powi(2) + 10.0;
        assert!((total - closed).abs() < 1e-9, "x = {x}");
    }
}

#[test]
fn sample_gradients_are_unbiased() {
    let prob = standard_benchmark(&[]);
    let draws = 100_000;
    for (a, obj) in prob.locals().iter().step_by(10) {
        for x in [-1.0, 0.5, 3.0] {
            let mut r = stream_rng(5, a.0 as u64, Stream::Gradient);
            let mut g = [0.0];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..draws {
                obj.sample_gradient(&[x], &mut r, &mut g);
                s += g[0];
                s2 += g[0] * g[0];
            }
            let mean = s / draws as f64;
            let var = s2 / draws as f64 - mean * mean;
            let se = (var / draws as f64).sqrt();
            let mut e = [0.0];
            obj.expected_gradient(&[x], &mut e);
            assert!(
                (mean - e[0]).abs() <= 3.0 * se + 1e-15,
                "{}: {mean} vs {}",
                obj.label(),
                e[0]
            );
        }
    }
}

/// Independent optimum oracle: scan at 1e-5, then parabolic refinement.
fn brute_force_min(f: impl Fn(f64) -> f64) -> f64 {
    let step = 1e-5;
    let n = (20.0 / step) as usize;
    let (mut bx, mut bf) = (-10.0, f(-10.0));
    for i in 1..=n {
        let x = -10.0 + i as f64 * step;
        let v = f(x);
        if v < bf {
            bx = x;
            bf = v;
        }
    }
    let (a, b, c) = (f(bx - step), bf, f(bx + step));
    let denom = a - 2.0 * b + c;
    if denom > 0.0 {
        let x = bx + 0.5 * step * (a - c) / denom;
        bf.min(f(x))
    } else {
        bf
    }
}

#[test]
fn f_star_with_evenly_spaced_byzantine_agents() {
    let byz = evenly_spaced_byzantine(100, 10);
    let prob = standard_benchmark(&byz);
    assert!((prob.f_star - 0.1).abs() < 1e-12);
    let oracle = brute_force_min(|x| prob.value(&[x]));
    assert!((prob.f_star - oracle).abs() < 1e-10);
}

#[test]
fn f_star_with_unbalanced_families_matches_brute_force() {
    // Removing all of family 2 and half of family 7 shifts the minimizer.
    let byz: Vec<AgentId> = (10..20).chain(60..65).map(AgentId).collect();
    let prob = standard_benchmark(&byz);
    let oracle = brute_force_min(|x| prob.value(&[x]));
    assert!(
        (prob.f_star - oracle).abs() < 1e-10,
        "{} vs {oracle}",
        prob.f_star
    );
    assert!(prob.value(&[0.0]) - prob.f_star > 1e-4);
}

#[test]
fn pl_probe_is_positive_on_benchmark() {
    let prob = standard_benchmark(&evenly_spaced_byzantine(100, 10));
    let nu = pl_constant_probe(&prob, &PL_GRID).unwrap();
    assert!(nu > 0.0 && nu.is_finite());
    assert!(nu < 0.8);
}

#[test]
fn smoothness_probe_matches_largest_curvature() {
    let prob = standard_benchmark(&[]);
    let l = smoothness_probe(&prob, &SMOOTHNESS_GRID).unwrap();
    assert!(l > 4.0 && l < 4.2, "{l}");
}

#[test]
fn sigma_zeta_estimates() {
    let quiet = benchmark_problem(
        100,
        &[],
        BenchmarkNoise {
            u_variance: 0.0,
            v_variance: 0.0,
            batch_size: 1,
        },
    );
    let probes: Vec<Vec<f64>> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|&x| vec![x])
        .collect();
    let mut r = stream_rng(9, 0, Stream::Estimation);
    let (s, z) = estimate_sigma_zeta(&quiet, &probes, 10, &mut r).unwrap();
    assert_eq!(s, 0.0);
    assert!(z > 0.0);

    let prob = standard_benchmark(&[]);
    let (s, z) = estimate_sigma_zeta(&prob, &probes, 10_000, &mut r).unwrap();
    assert!(s > 0.0 && s.is_finite());
    assert!(z > 0.0 && z.is_finite());
}
