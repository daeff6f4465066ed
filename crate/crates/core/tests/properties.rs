mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use tscausal::criteria::backdoor_admissible;
use tscausal::graph::{ancestors, parse_graph, serialize_graph, MixedGraph, Node, NodeSet};
use tscausal::intervene::{simulate_interventional, simulate_trajectory, InterventionSpec, MonteCarlo, Strategy as Regime};
use tscausal::separation::{
    brute_force_connecting_walk, exists_connecting_walk, m_connection, m_separated, FirstEdgeConstraint,
    LastEdgeConstraint, WalkQuery,
};
use tscausal::var::{self, predictor_coeffs, subprocess_ar, SubprocessAR};

const FIRSTS: [FirstEdgeConstraint; 4] = [
    FirstEdgeConstraint::Any,
    FirstEdgeConstraint::BackDoorOnly,
    FirstEdgeConstraint::FrontDoorOnly,
    FirstEdgeConstraint::ArrowheadAtSource,
];
const LASTS: [LastEdgeConstraint; 2] = [LastEdgeConstraint::Any, LastEdgeConstraint::PointingIntoTarget];

fn graph_strategy() -> impl Strategy<Value = MixedGraph> {
    (1usize..=4, prop::collection::vec(any::<bool>(), 12), prop::collection::vec(any::<bool>(), 6), any::<u8>())
        .prop_map(|(n, dir, dash, latent)| {
            let mut directed = Vec::new();
            let mut dashed = Vec::new();
            let (mut k, mut m) = (0, 0);
            for i in 0..4 {
                for j in 0..4 {
                    if i == j {
                        continue;
                    }
                    if i < n && j < n && dir[k] {
                        directed.push((common::label(i), common::label(j)));
                    }
                    k += 1;
                    if i < j {
                        if i < n && j < n && dash[m] {
                            dashed.push((common::label(i), common::label(j)));
                        }
                        m += 1;
                    }
                }
            }
            let nodes = (0..n).map(|i| Node { id: common::label(i), observed: (latent as usize >> i) & 1 == 0 }).collect();
            MixedGraph::new(nodes, directed, dashed).unwrap()
        })
}

fn subset_of(g: &MixedGraph, mask: u8) -> NodeSet {
    g.node_ids().into_iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ancestors_form_a_closure(g in graph_strategy(), x in any::<u8>(), y in any::<u8>()) {
        let (a, b) = (subset_of(&g, x), subset_of(&g, y));
        let an_a = ancestors(&g, &a).unwrap();
        prop_assert!(a.is_subset(&an_a));
        prop_assert_eq!(ancestors(&g, &an_a).unwrap(), an_a.clone());
        let union: NodeSet = a.union(&b).cloned().collect();
        let an_union = ancestors(&g, &union).unwrap();
        let an_b = ancestors(&g, &b).unwrap();
        prop_assert_eq!(an_union.clone(), an_a.union(&an_b).cloned().collect::<NodeSet>());
        prop_assert!(an_a.is_subset(&an_union));
        prop_assert_eq!(ancestors(&g.without_dashed(), &a).unwrap(), an_a);
    }

    #[test]
    fn graph_json_round_trip(g in graph_strategy()) {
        let text = serialize_graph(&g);
        let back = parse_graph(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_graph(&back), text);
    }

    #[test]
    fn reachability_matches_enumeration(
        g in graph_strategy(),
        src in 0usize..4,
        tgt in any::<u8>(),
        given in any::<u8>(),
        allow in any::<bool>(),
    ) {
        let n = g.len();
        let sources = subset_of(&g, 1 << (src % n));
        let targets = subset_of(&g, tgt.max(1));
        prop_assume!(!targets.is_empty());
        let given = subset_of(&g, given);
        for first in FIRSTS {
            for last in LASTS {
                let q = WalkQuery::new(sources.clone(), targets.clone(), given.clone())
                    .first(first)
                    .last(last)
                    .allow_source_equals_target(allow);
                let fast = exists_connecting_walk(&g, &q).unwrap();
                let slow = brute_force_connecting_walk(&g, &q, 3 * n + 1).unwrap();
                prop_assert_eq!(fast.connected, slow.connected, "{:?} {:?}", first, last);
                if let Some(w) = &fast.witness {
                    prop_assert!(w.replays(&g, &q), "witness {} does not replay", w);
                }
                if let Some(w) = &slow.witness {
                    prop_assert!(w.replays(&g, &q));
                }
            }
        }
    }

    #[test]
    fn m_separation_is_symmetric(g in graph_strategy(), x in any::<u8>(), y in any::<u8>(), s in any::<u8>()) {
        let a = subset_of(&g, x);
        let b: NodeSet = subset_of(&g, y).difference(&a).cloned().collect();
        prop_assume!(!a.is_empty() && !b.is_empty());
        let s = subset_of(&g, s);
        prop_assert_eq!(m_separated(&g, &a, &b, &s).unwrap(), m_separated(&g, &b, &a, &s).unwrap());
        if let Some(w) = m_connection(&g, &a, &b, &s).unwrap().witness {
            prop_assert!(w.replays(&g, &WalkQuery::new(a.clone(), b.clone(), s.clone())));
        }
    }

    #[test]
    fn full_node_set_is_backdoor_admissible(g in graph_strategy()) {
        let all = g.node_ids();
        for a in &all {
            for b in &all {
                if a != b {
                    prop_assert!(backdoor_admissible(&g, a, b, &all).unwrap().holds, "{} -> {}", a, b);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn predictor_recursion_matches_companion_power(seed in any::<u64>(), d in 1usize..5, p in 1usize..4) {
        let m = common::random_var(&mut common::rng(seed), d, p, false, 0.95);
        let s = SubprocessAR::from_parts(m.labels().to_vec(), m.coefs().to_vec(), m.sigma().clone()).unwrap();
        let f = m.companion();
        let mut power = f.clone();
        for h in 1..=10 {
            let block = power.view((0, 0), (d, d)).into_owned();
            prop_assert!((predictor_coeffs(&s, h).unwrap().phi_h1 - &block).amax() < 1e-8);
            power = &power * &f;
        }
    }

    #[test]
    fn full_subprocess_recovers_the_model(seed in any::<u64>(), d in 1usize..5, p in 1usize..3) {
        let m = common::random_var(&mut common::rng(seed), d, p, false, 0.9);
        let all = m.labels().iter().cloned().collect();
        let s = subprocess_ar(&m, &all, var::default_truncation(p), var::DEFAULT_ZERO_TOL).unwrap();
        for (j, ph) in s.phi.iter().enumerate() {
            let expect = m.coefs().get(j).cloned().unwrap_or_else(|| DMatrix::zeros(d, d));
            prop_assert!((ph - expect).amax() < 1e-6);
        }
        prop_assert!((&s.sigma_tilde - m.sigma()).amax() < 1e-6);
        let gamma = var::autocovariance(&m, 0).unwrap();
        prop_assert!((&gamma[0] - gamma[0].transpose()).amax() < 1e-12);
        prop_assert!(gamma[0].clone().cholesky().is_some());
    }

    #[test]
    fn interventions_do_not_touch_the_past(seed in any::<u64>(), d in 2usize..5, time in 0usize..6, target in 0usize..4, x in -3.0f64..3.0) {
        let m = common::random_var(&mut common::rng(seed), d, 2, false, 0.9);
        let target = target % d;
        let spec = [InterventionSpec::new(common::label(target), time, Regime::atomic(x))];
        let burn = 30;
        let obs = simulate_trajectory(&m, &[], seed, 3, burn, 8).unwrap();
        let int = simulate_trajectory(&m, &spec, seed, 3, burn, 8).unwrap();
        let t = burn + time;
        prop_assert_eq!(obs.rows(0, t), int.rows(0, t));
        for j in (0..d).filter(|&j| j != target) {
            prop_assert_eq!(obs[(t, j)].to_bits(), int[(t, j)].to_bits());
        }
        prop_assert_eq!(int[(t, target)], x);
    }

    #[test]
    fn oracle_is_affine_in_the_atomic_value(seed in any::<u64>(), d in 2usize..5) {
        let m = common::random_var(&mut common::rng(seed), d, 2, false, 0.9);
        let (a, b) = (common::label(0), common::label(d - 1));
        let mc = MonteCarlo::new(200, seed).burn_in(50);
        let at = |x: f64| {
            simulate_interventional(&m, &[InterventionSpec::new(a.clone(), 0, Regime::atomic(x))], &b, 2, &mc)
                .unwrap()
                .value
        };
        let (lo, one, two) = (at(-1.0), at(1.0), at(2.0));
        prop_assert!(((two - one) - (one - lo) / 2.0).abs() < 1e-9);
    }
}

#[test]
fn oracle_does_not_depend_on_thread_count() {
    let m = common::random_var(&mut common::rng(4), 4, 2, true, 0.9);
    let spec = [InterventionSpec::new(common::label(0), 1, Regime::atomic(1.5))];
    let mc = MonteCarlo::new(500, 17);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_interventional(&m, &spec, &common::label(2), 3, &mc).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.value.to_bits(), four.value.to_bits());
    assert_eq!(one.stderr.to_bits(), four.stderr.to_bits());
}
