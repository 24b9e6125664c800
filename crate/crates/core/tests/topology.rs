use proptest::prelude::*;
use scc_core::linalg::Matrix;
use scc_core::topology::*;
use scc_core::AgentId;

fn check_doubly_stochastic(m: &Matrix, tol: f64) {
    for s in m.row_sums().into_iter().chain(m.col_sums()) {
        assert!((s - 1.0).abs() <= tol, "sum {s}");
    }
}

#[test]
fn random_graph_example_is_valid() {
    let net = build_network(
        TopologyKind::Random { p: 0.3 },
        10,
        &ByzantinePlacement::Fraction(0.2),
        7,
    )
    .unwrap();
    check_doubly_stochastic(net.weights(), 1e-12);
    assert!(net.reliable_subgraph_connected());
    assert_eq!(net.byzantine(), &[AgentId(0), AgentId(5)]);
}

#[test]
fn seeded_construction_is_reproducible() {
    let kind = TopologyKind::Random { p: 0.4 };
    let a = build_network(kind, 30, &ByzantinePlacement::Fraction(0.1), 11).unwrap();
    let b = build_network(kind, 30, &ByzantinePlacement::Fraction(0.1), 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fingerprint(), b.fingerprint());
}

#[test]
fn weak_byzantine_coupling_is_theory_valid() {
    // Ring of reliable agents with one Byzantine agent barely attached.
    let n = 11;
    let byz = AgentId(10);
    let mut edges: Vec<(AgentId, AgentId)> = (0..10)
        .map(|i| (AgentId(i), AgentId((i + 1) % 10)))
        .collect();
    edges.push((AgentId(0), byz));
    let mut w = metropolis_hastings(n, &edges[..10]);
    let eps = 1e-7;
    w.set(0, 10, eps);
    w.set(10, 0, eps);
    w.set(0, 0, w.get(0, 0) - eps);
    w.set(10, 10, 1.0 - eps);
    let net = Network::from_parts(n, &[byz], &edges, w).unwrap();
    let rho = rho_upper_bound(&net);
    let lambda = virtual_matrix(&net).mixing_rate_sq;
    assert!(rho < lambda / (4.0 * (10f64).sqrt()));
}

#[test]
fn reweighting_byzantine_edges_keeps_weights_valid() {
    let ring = build_network(
        TopologyKind::Ring,
        11,
        &ByzantinePlacement::Explicit(vec![AgentId(10)]),
        0,
    )
    .unwrap();
    let weak = with_byzantine_edge_weight(&ring, 1e-7).unwrap();
    check_doubly_stochastic(weak.weights(), 1e-12);
    assert_eq!(weak.edges(), ring.edges());
    assert_eq!(weak.weight(AgentId(9), AgentId(10)), 1e-7);
    assert_eq!(
        weak.weight(AgentId(0), AgentId(1)),
        ring.weight(AgentId(0), AgentId(1))
    );
    let rho = rho_upper_bound(&weak);
    let lambda = virtual_matrix(&weak).mixing_rate_sq;
    assert!(rho > 0.0 && rho < lambda / (4.0 * (10f64).sqrt()));
    assert!(with_byzantine_edge_weight(&ring, 0.0).is_err());
}

fn arb_network() -> impl Strategy<Value = Network> {
    (4usize..14, 0.25f64..0.9, 0.0f64..0.35, any::<u64>()).prop_filter_map(
        "reliable subgraph must be connected",
        |(n, p, f, seed)| {
            build_network(
                TopologyKind::Random { p },
                n,
                &ByzantinePlacement::Fraction(f),
                seed,
            )
            .ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn constructed_networks_satisfy_invariants(net in arb_network()) {
        check_doubly_stochastic(net.weights(), 1e-12);
        for &i in net.reliable() {
            prop_assert!(net.weight(i, i) > 0.0);
        }
        prop_assert!(net.reliable_subgraph_connected());
        for i in 0..net.n_agents() {
            for j in 0..net.n_agents() {
                let w = net.weight(AgentId(i), AgentId(j));
                prop_assert!(w >= 0.0);
                if w > 0.0 && i != j {
                    prop_assert!(net.has_edge(AgentId(i), AgentId(j)));
                }
            }
        }
    }

    #[test]
    fn virtual_matrix_is_doubly_stochastic_with_lambda_below_one(net in arb_network()) {
        let vm = virtual_matrix(&net);
        check_doubly_stochastic(&vm.w_tilde, 1e-12);
        prop_assert!(vm.mixing_rate_sq >= 0.0);
        prop_assert!(vm.mixing_rate_sq < 1.0);
        let rel = net.reliable();
        for (a, &i) in rel.iter().enumerate() {
            let diag = net.weight(i, i) + net.byzantine_neighbors(i).map(|b| net.weight(i, b)).sum::<f64>();
            prop_assert!((vm.w_tilde.get(a, a) - diag).abs() < 1e-15);
            for (b, &j) in rel.iter().enumerate() {
                if a != b {
                    prop_assert_eq!(vm.w_tilde.get(a, b), net.weight(i, j));
                }
            }
        }
    }

    #[test]
    fn rho_is_zero_iff_no_weighted_byzantine_edge(net in arb_network()) {
        let rho = rho_upper_bound(&net);
        let coupled = net.reliable().iter().any(|&i| {
            net.byzantine_weight(i) > 0.0 && net.reliable_neighbor_weight(i) > 0.0
        });
        prop_assert_eq!(rho == 0.0, !coupled);
    }

    #[test]
    fn theory_constants_are_pure(
        lambda in 0.01f64..0.99,
        r in 2usize..200,
        rho_frac in 0.0f64..1.2,
        l in 0.1f64..10.0,
        nu in 0.001f64..1.0,
    ) {
        let pc = ProblemConstants { smoothness: l, pl_constant: nu, sigma_sq: 0.1, zeta_sq: 0.3, noise_var: 1e-6, dim: 1 };
        let rho = rho_frac * lambda / (4.0 * (r as f64).sqrt());
        let a = theory_constants_from_lambda(lambda, r, rho, pc).unwrap();
        let b = theory_constants_from_lambda(lambda, r, rho, pc).unwrap();
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        if a.regime_valid() {
            prop_assert!(a.phi_big > 0.0 && a.phi_big < 1.0);
            prop_assert!(a.eta > 0.0 && a.eta < 1.0);
            prop_assert!(a.phi > 0.0 && a.phi < 1.0);
            prop_assert!(a.k0 as f64 > 2.0 / a.phi);
        } else {
            prop_assert!(rho_frac >= 1.0);
        }
    }
}
