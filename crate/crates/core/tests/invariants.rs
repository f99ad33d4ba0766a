//! Generative invariant checks across the whole pipeline: reversibility,
//! trace bookkeeping, partition structure, serialization round trips, and
//! kernel profile identities.

use std::collections::BTreeSet;

use proptest::prelude::*;
use spinflip_core::dynamics::{
    flip_probability, kernel_profile, simulate, InitialState, Kernel, SimConfig,
};
use spinflip_core::model::{dense_edges, Graph, IsingModel, ModelBounds};
use spinflip_core::oracle::{check_detailed_balance, exact_kernel};
use spinflip_core::spins::SpinConfig;
use spinflip_core::trace::FlipTrace;

// -- strategies -------------------------------------------------------------

fn arb_kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        Just(Kernel::Glauber),
        (0.05f64..=1.0, 0.05f64..=1.0)
            .prop_map(|(r_plus, r_minus)| Kernel::Metropolis { r_plus, r_minus }),
    ]
}

/// Random model on 2..=6 sites with couplings in [-0.8, 0.8] on a random
/// edge subset and fields in [-0.5, 0.5].
fn arb_model() -> impl Strategy<Value = IsingModel> {
    (2usize..=6)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            let k = pairs.len();
            (
                Just(n),
                Just(pairs),
                proptest::collection::vec(proptest::option::of(-0.8f64..=0.8), k),
                proptest::collection::vec(-0.5f64..=0.5, n),
            )
        })
        .prop_map(|(n, pairs, weights, fields)| {
            let couplings: Vec<(usize, usize, f64)> = pairs
                .into_iter()
                .zip(weights)
                .filter_map(|((i, j), w)| match w {
                    Some(a) if a != 0.0 => Some((i, j, a)),
                    _ => None,
                })
                .collect();
            IsingModel::new(n, couplings, fields).unwrap()
        })
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2usize..=8)
        .prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            let k = pairs.len();
            (
                Just(n),
                Just(pairs),
                proptest::collection::vec(proptest::bool::ANY, k),
            )
        })
        .prop_map(|(n, pairs, mask)| {
            Graph::from_edges(
                n,
                pairs
                    .into_iter()
                    .zip(mask)
                    .filter_map(|(e, keep)| keep.then_some(e)),
            )
            .unwrap()
        })
}

// -- properties -------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detailed_balance_holds(model in arb_model(), kernel in arb_kernel()) {
        let violation = check_detailed_balance(&model, &kernel).unwrap();
        prop_assert!(violation <= 1e-12, "violation {violation}");
    }

    #[test]
    fn kernels_agree_and_respect_kappa(model in arb_model(), kernel in arb_kernel()) {
        let bounds = model.measured_bounds();
        let profile = kernel_profile(&kernel, &bounds);
        for idx in 0..1usize << model.n() {
            let config = SpinConfig::from_index(model.n(), idx);
            for i in 0..model.n() {
                let p = flip_probability(&model, &kernel, &config, i).unwrap();
                let exact = exact_kernel(&model, &kernel, &config, i).unwrap();
                prop_assert!((p - exact).abs() <= 1e-12);
                prop_assert!(p > 0.0 && p < 1.0);
                // site consistency floor: every flip probability >= kappa
                prop_assert!(p >= profile.kappa - 1e-12,
                    "p = {p} below kappa = {}", profile.kappa);
            }
        }
    }

    #[test]
    fn z_star_is_the_g_crossing(kernel in arb_kernel(), alpha in 0.05f64..=3.0) {
        let profile = kernel_profile(&kernel, &ModelBounds { d: 3, lambda: 1.0, alpha });
        let z = profile.z_star(alpha);
        let lhs = profile.g(z);
        let rhs = profile.g(alpha.exp() * z);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0),
            "g({z}) = {lhs} vs g(e^a z) = {rhs}");
    }

    #[test]
    fn dense_partition_is_a_partition(g in arb_graph()) {
        let p = dense_edges(&g);
        let all: BTreeSet<(usize, usize)> = g.edges().collect();
        // dense and matching edges partition the edge set
        let mut covered = p.dense.clone();
        for &e in &p.isolated_matching {
            prop_assert!(covered.insert(e), "edge {e:?} classified twice");
        }
        prop_assert_eq!(&covered, &all);
        // matching edges are vertex-disjoint and not incident to dense edges
        let mut used = BTreeSet::new();
        for &(i, j) in &p.isolated_matching {
            prop_assert!(used.insert(i) && used.insert(j));
        }
        for &(i, j) in &p.dense {
            prop_assert!(!used.contains(&i) && !used.contains(&j));
        }
        // isolated vertices touch nothing
        for &v in &p.isolated_vertices {
            prop_assert_eq!(g.degree(v), 0);
        }
        // a single edge is never dense
        if all.len() == 1 {
            prop_assert!(p.dense.is_empty());
        }
    }

    #[test]
    fn simulation_bookkeeping(model in arb_model(), seed in 0u64..1000, horizon in 5.0f64..40.0) {
        let trace = simulate(
            &model,
            &Kernel::Glauber,
            &SimConfig { horizon, seed, initial: InitialState::SeededUniform },
        ).unwrap();

        // same seed reproduces the trace exactly
        let again = simulate(
            &model,
            &Kernel::Glauber,
            &SimConfig { horizon, seed, initial: InitialState::SeededUniform },
        ).unwrap();
        prop_assert_eq!(trace.events(), again.events());
        prop_assert_eq!(trace.initial(), again.initial());

        // flip counts over (0, T] cover every event once
        let total: usize = (0..model.n())
            .map(|i| trace.flip_count(i, 0.0, horizon).unwrap())
            .sum();
        prop_assert_eq!(total, trace.events().len());

        // config_at agrees with an incremental replay
        let mut config = trace.initial().clone();
        for ev in trace.events() {
            config.flip(ev.site as usize);
            prop_assert_eq!(&trace.config_at(ev.time).unwrap(), &config);
        }
        prop_assert_eq!(&trace.config_at(horizon).unwrap(), &config);

        // occupation fractions partition the window
        if model.n() >= 2 {
            let occ = trace.occupation_time(0, 1, horizon).unwrap();
            let sum: f64 = occ.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(occ.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn trace_serialization_round_trips(model in arb_model(), seed in 0u64..500) {
        let trace = simulate(
            &model,
            &Kernel::Glauber,
            &SimConfig { horizon: 20.0, seed, initial: InitialState::SeededUniform },
        ).unwrap();

        let mut jsonl = Vec::new();
        trace.write_jsonl(&mut jsonl).unwrap();
        let back = FlipTrace::read_jsonl(std::io::BufReader::new(&jsonl[..])).unwrap();
        prop_assert_eq!(trace.events(), back.events());
        prop_assert_eq!(trace.initial(), back.initial());
        prop_assert_eq!(trace.horizon(), back.horizon());

        let mut binary = Vec::new();
        trace.write_binary(&mut binary).unwrap();
        let back = FlipTrace::read_binary(&binary[..]).unwrap();
        prop_assert_eq!(trace.events(), back.events());
        prop_assert_eq!(trace.initial(), back.initial());
    }

    #[test]
    fn model_json_round_trips_bit_exact(model in arb_model()) {
        let text = model.to_json();
        let back = IsingModel::from_json(&text).unwrap();
        prop_assert_eq!(&model, &back);
        // serialized floats must be identical, not just close
        prop_assert_eq!(text, back.to_json());
    }

    #[test]
    fn spin_packing_round_trips(spins in proptest::collection::vec(proptest::bool::ANY, 1..100)) {
        let spins: Vec<i8> = spins.into_iter().map(|b| if b { 1 } else { -1 }).collect();
        let config = SpinConfig::from_spins(&spins).unwrap();
        prop_assert_eq!(&config.to_spins(), &spins);
        let packed = config.to_packed_bytes();
        prop_assert_eq!(&SpinConfig::from_packed_bytes(spins.len(), &packed).unwrap(), &config);
    }
}
