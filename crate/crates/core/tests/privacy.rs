use scc_core::privacy::*;
use scc_core::rng::{stream_rng, Stream};
use scc_core::schedule::StepSizeSchedule;

#[test]
fn noise_matches_configured_variance() {
    let n = 100_000;
    let mut r = stream_rng(1, 0, Stream::Noise);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut g = [0.0];
        mask_gradient(&mut g, 1.0, &mut r);
        xs.push(g[0]);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    assert!((var - 1.0).abs() < 0.05);
}

#[test]
fn agent_noise_streams_are_uncorrelated() {
    let n = 100_000;
    let mut a = stream_rng(1, 3, Stream::Noise);
    let mut b = stream_rng(1, 4, Stream::Noise);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let (mut x, mut y) = ([0.0], [0.0]);
        mask_gradient(&mut x, 0.25, &mut a);
        mask_gradient(&mut y, 0.25, &mut b);
        sab += x[0] * y[0];
        saa += x[0] * x[0];
        sbb += y[0] * y[0];
    }
    assert!((sab / (saa * sbb).sqrt()).abs() < 0.02);
    assert!((saa / n as f64 - 0.25).abs() < 0.05 * 0.25);
}

#[test]
fn required_variance_is_monotone() {
    let s = StepSizeSchedule::Decaying { theta: 0.3, k0: 12 };
    let eps_grid = [0.05, 0.1, 0.3, 0.6, 0.9];
    let delta_grid = [1e-6, 1e-4, 1e-2, 0.1, 0.5];
    for w in eps_grid.windows(2) {
        for &d in &delta_grid {
            let lo = required_variance_local(w[1], d, 1.0, &s).unwrap();
            let hi = required_variance_local(w[0], d, 1.0, &s).unwrap();
            assert!(hi >= lo);
        }
    }
    for w in delta_grid.windows(2) {
        for &e in &eps_grid {
            let lo = required_variance_local(e, w[1], 1.0, &s).unwrap();
            let hi = required_variance_local(e, w[0], 1.0, &s).unwrap();
            assert!(hi >= lo);
        }
    }
}

#[test]
fn global_epsilon_is_monotone() {
    let base = DpBudget {
        delta: 1e-3,
        grad_bound: 2.0,
        total_samples: 1000,
        batch_size: 10,
        horizon: 500,
        renyi_order: None,
    };
    let eps = |b: &DpBudget, v: f64| global_epsilon(b, v).unwrap().epsilon;
    for v in [0.5, 1.0, 2.0, 4.0] {
        assert!(eps(&base, 2.0 * v) < eps(&base, v));
        for q in [500u64, 1000, 2000] {
            let b = DpBudget {
                total_samples: q,
                ..base
            };
            let b2 = DpBudget {
                total_samples: 2 * q,
                ..base
            };
            assert!(eps(&b2, v) < eps(&b, v));
        }
        for k in [1u64, 10, 100] {
            let b = DpBudget { horizon: k, ..base };
            let b2 = DpBudget {
                horizon: 2 * k,
                ..base
            };
            assert!(eps(&b2, v) > eps(&b, v));
        }
        for g in [0.5, 1.0, 2.0] {
            let b = DpBudget {
                grad_bound: g,
                ..base
            };
            let b2 = DpBudget {
                grad_bound: 2.0 * g,
                ..base
            };
            assert!(eps(&b2, v) > eps(&b, v));
        }
    }
}

#[test]
fn quadrupling_variance_scales_summands() {
    let b = DpBudget {
        delta: 0.01,
        grad_bound: 1.0,
        total_samples: 100,
        batch_size: 1,
        horizon: 50,
        renyi_order: None,
    };
    let first = |v: f64| 20.0 * 50.0 / (v * 100.0 * 100.0);
    let e1 = global_epsilon(&b, 1.0).unwrap().epsilon;
    let e4 = global_epsilon(&b, 4.0).unwrap().epsilon;
    let second1 = e1 - first(1.0);
    let second4 = e4 - first(4.0);
    assert!((second4 - 0.5 * second1).abs() < 1e-12);
    assert!((first(4.0) - 0.25 * first(1.0)).abs() < 1e-15);
}
