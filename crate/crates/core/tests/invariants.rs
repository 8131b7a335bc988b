use ndt_core::analytic::{model_duty_cycles, ContentionMatrix};
use ndt_core::ndt::{contention_probability, predict_instance, NdtConfig};
use ndt_core::netgen::{conservation_residual, validate_instance, Instance, InstanceSeeds};
use ndt_core::rng::{stream_rng, Stream};
use ndt_core::simulator::{empirical_contention, luby_schedule, run_simulation, SimConfig};
use ndt_core::{ConflictGraph, PriorityVector};
use proptest::prelude::*;

fn instance(nodes: usize, load: f64, topology: u64, realization: u64) -> Instance {
    Instance::generate(nodes, load, InstanceSeeds { topology, realization }).unwrap()
}

/// Random simple graph on `n` vertices from an edge bitmask.
fn graph_strategy(max_links: usize) -> impl Strategy<Value = ConflictGraph> {
    (1..=max_links).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        proptest::collection::vec(any::<bool>(), pairs.len()).prop_map(move |mask| {
            let chosen: Vec<(usize, usize)> = pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(&p, _)| p).collect();
            ConflictGraph::from_edges(n, &chosen)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_instances_are_valid(nodes in 5usize..40, load in 0.4f64..7.0, t in 0u64..10_000, r in 0u64..10_000) {
        let inst = instance(nodes, load, t, r);
        prop_assert!(validate_instance(&inst).is_empty(), "{:?}", validate_instance(&inst));
        for f in 0..inst.flows.len() {
            prop_assert_eq!(conservation_residual(&inst, f), 0.0);
        }
    }

    #[test]
    fn conflicts_follow_the_interface_rule(nodes in 5usize..30, t in 0u64..10_000) {
        let inst = instance(nodes, 1.0, t, 0);
        let links = &inst.connectivity.links;
        let c = &inst.conflicts;
        prop_assert!(c.violations().is_empty());
        for a in 0..links.len() {
            for b in 0..links.len() {
                let expected = a != b && links[a].shares_endpoint(&links[b]);
                prop_assert_eq!(c.are_adjacent(a, b), expected);
            }
        }
    }

    #[test]
    fn incidence_columns_have_one_source_and_sink(nodes in 3usize..30, t in 0u64..10_000) {
        let g = &instance(nodes, 1.0, t, 0).connectivity;
        let m = g.incidence_matrix();
        for l in &g.links {
            let column: Vec<i32> = m.iter().map(|row| row[l.id]).collect();
            prop_assert_eq!(column.iter().sum::<i32>(), 0);
            prop_assert_eq!(column[l.src], 1);
            prop_assert_eq!(column[l.dst], -1);
            prop_assert_eq!(column.iter().filter(|&&v| v != 0).count(), 2);
        }
    }

    #[test]
    fn load_only_rescales_routing(nodes in 5usize..30, t in 0u64..1000, r in 0u64..1000, beta in 0.4f64..7.0) {
        let low = instance(nodes, 1.0, t, r);
        let high = instance(nodes, beta, t, r);
        prop_assert_eq!(&low.rates, &high.rates);
        for (a, b) in low.link_loads().iter().zip(high.link_loads()) {
            prop_assert!((a * beta - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn luby_schedules_are_independent_subsets(c in graph_strategy(12), seed in any::<u64>(), rounds in 1usize..5) {
        let n = c.num_links();
        let mut rng = stream_rng(seed, Stream::Contention);
        let z: Vec<f64> = (0..n).map(|e| 0.2 + (e as f64 * 0.37) % 2.0).collect();
        for trial in 0..20 {
            let contending: Vec<bool> = (0..n).map(|e| (e + trial) % 3 != 0).collect();
            let s = luby_schedule(&c, &z, &contending, rounds, &mut rng);
            prop_assert!(c.is_independent(&s));
            prop_assert!(s.iter().zip(&contending).all(|(&a, &b)| !a || b));
        }
    }

    #[test]
    fn enough_rounds_give_a_maximal_set(c in graph_strategy(12), seed in any::<u64>()) {
        // the largest draw always wins, so every round decides at least one link
        let n = c.num_links();
        let mut rng = stream_rng(seed, Stream::Contention);
        let s = luby_schedule(&c, &vec![1.0; n], &vec![true; n], n, &mut rng);
        for e in 0..n {
            prop_assert!(s[e] || c.neighbors(e).iter().any(|&i| s[i]), "link {} left out", e);
        }
    }

    #[test]
    fn simulation_conserves_packets(nodes in 5usize..25, load in 0.4f64..7.0, t in 0u64..1000, seed in any::<u64>(), rounds in 1usize..4) {
        let inst = instance(nodes, load, t, t + 1);
        let cfg = SimConfig { rounds, slots: 200, check_invariants: true, ..Default::default() };
        let res = run_simulation(&inst, &PriorityVector::uniform(inst.num_links()), &cfg, None, seed).unwrap();
        let queued: u64 = res.terminal_queues.iter().map(|&q| q as u64).sum();
        prop_assert_eq!(res.packets_arrived, res.packets_delivered + queued);
    }

    #[test]
    fn empirical_contention_is_a_valid_matrix(nodes in 5usize..25, load in 0.4f64..7.0, t in 0u64..1000, seed in any::<u64>()) {
        let inst = instance(nodes, load, t, t + 7);
        let cfg = SimConfig { slots: 300, ..Default::default() };
        let res = run_simulation(&inst, &PriorityVector::uniform(inst.num_links()), &cfg, None, seed).unwrap();
        let b = empirical_contention(&res);
        prop_assert!(b.validate(&inst.conflicts).is_ok());
        for (x, m) in res.duty_cycles.iter().zip(&b.marginal) {
            prop_assert!(x <= m);
        }
    }

    #[test]
    fn simulation_is_deterministic(nodes in 5usize..25, t in 0u64..1000, seed in any::<u64>()) {
        let inst = instance(nodes, 3.0, t, t);
        let again = instance(nodes, 3.0, t, t);
        prop_assert_eq!(inst.to_json().unwrap(), again.to_json().unwrap());
        let cfg = SimConfig { slots: 100, ..Default::default() };
        let z = PriorityVector::uniform(inst.num_links());
        let a = run_simulation(&inst, &z, &cfg, None, seed).unwrap();
        let b = run_simulation(&again, &z, &cfg, None, seed).unwrap();
        prop_assert_eq!(a.duty_cycles, b.duty_cycles);
        prop_assert_eq!(a.terminal_queues, b.terminal_queues);
        prop_assert_eq!(a.joint_b, b.joint_b);
    }

    #[test]
    fn model_is_scale_invariant(c in graph_strategy(10), scale in 1e-3f64..1e3, rounds in 1usize..4, seed in any::<u64>()) {
        let n = c.num_links();
        let mut rng = stream_rng(seed, Stream::Derive);
        use rand::Rng;
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let marginal: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b = ContentionMatrix::independent(&c, marginal);
        let scaled: Vec<f64> = z.iter().map(|v| v * scale).collect();
        let x = model_duty_cycles(&c, &z, &b, rounds, 64).unwrap().duty_cycles;
        let y = model_duty_cycles(&c, &scaled, &b, rounds, 64).unwrap().duty_cycles;
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn model_output_is_a_probability_below_contention(c in graph_strategy(10), rounds in 1usize..4, seed in any::<u64>()) {
        use rand::Rng;
        let n = c.num_links();
        let mut rng = stream_rng(seed, Stream::Derive);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let marginal: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b = ContentionMatrix::independent(&c, marginal.clone());
        let out = model_duty_cycles(&c, &z, &b, rounds, 64).unwrap();
        for e in 0..n {
            prop_assert!(out.duty_cycles[e] >= 0.0 && out.duty_cycles[e] <= marginal[e] + 1e-12);
        }
        for m in 1..out.contention.len() {
            for e in 0..n {
                prop_assert!(out.contention[m][e] <= out.contention[m - 1][e] + 1e-12);
            }
        }
    }

    #[test]
    fn higher_priority_wins_more(c in graph_strategy(8), seed in any::<u64>(), boost in 1.0f64..4.0) {
        use rand::Rng;
        let n = c.num_links();
        let mut rng = stream_rng(seed, Stream::Derive);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let b = ContentionMatrix::independent(&c, (0..n).map(|_| rng.random::<f64>()).collect());
        let mut raised = z.clone();
        raised[0] *= boost;
        let before = model_duty_cycles(&c, &z, &b, 1, 256).unwrap().duty_cycles;
        let after = model_duty_cycles(&c, &raised, &b, 1, 256).unwrap().duty_cycles;
        prop_assert!(after[0] >= before[0] - 1e-12);
    }

    #[test]
    fn ndt_duty_cycles_stay_in_range(nodes in 5usize..30, load in 0.4f64..7.0, t in 0u64..1000, rounds in 1usize..4) {
        let inst = instance(nodes, load, t, t + 3);
        let cfg = NdtConfig { rounds, ..Default::default() };
        let p = predict_instance(&inst, &PriorityVector::uniform(inst.num_links()), &cfg).unwrap();
        let trace = p.trace.unwrap();
        for x in trace.duty_cycles.iter().flatten() {
            prop_assert!((cfg.floor..=1.0).contains(x));
        }
    }

    #[test]
    fn starving_a_link_raises_its_contention(load in 0.0f64..50.0, rate in 10.0f64..42.0, x in 1e-6f64..1.0, shrink in 0.01f64..1.0) {
        prop_assert!(contention_probability(load, rate * x * shrink) >= contention_probability(load, rate * x));
    }
}
