//! Small end-to-end runs of the experiment pipeline.

use std::time::Instant;

use ndt_core::optimizer::optimize_priorities;
use ndt_core::simulator::{SimConfig, Simulation};
use ndt_core::PriorityVector;
use ndt_harness::accuracy::{ndt_config, run_accuracy_sweep, ModelInput};
use ndt_harness::bench::run_runtime_benchmark;
use ndt_harness::compare::{run_policy_comparison, summarize_policies};
use ndt_harness::metrics::mean;
use ndt_harness::plan::keys_for_size;
use ndt_harness::{ExperimentSpec, Policy};

fn spec(size: usize, load: f64, topologies: usize) -> ExperimentSpec {
    ExperimentSpec { sizes: vec![size], loads: vec![load], topologies, realizations: 1, rounds: vec![1], ..Default::default() }
}

#[test]
fn single_round_sweep_correlates() {
    let rows = run_accuracy_sweep(&spec(20, 1.0, 10));
    let pearsons: Vec<f64> =
        rows.iter().filter(|r| r.input == ModelInput::Joint).map(|r| r.pearson.unwrap_or(1.0)).collect();
    assert_eq!(pearsons.len(), 10);
    assert!(mean(&pearsons) >= 0.98, "mean pearson {}", mean(&pearsons));
}

#[test]
fn baseline_overloads_at_high_load() {
    let s = spec(50, 5.0, 1);
    let key = keys_for_size(&s, 50)[0];
    let inst = key.instance(5.0).unwrap();
    let z = PriorityVector::uniform(inst.num_links());
    let cfg = SimConfig { rounds: 1, slots: 1000, ..Default::default() };
    let mut sim = Simulation::new(&inst, &z, cfg, None, key.sim_seed).unwrap();
    let mut halfway = Vec::new();
    for slot in 0..cfg.slots {
        sim.step();
        if slot + 1 == cfg.slots / 2 {
            halfway = sim.queue_lengths();
        }
    }
    let end = sim.queue_lengths();
    let result = sim.finish(0.0);
    assert!(result.max_duty_cycle() > 0.5, "max duty cycle {}", result.max_duty_cycle());
    assert!(end.iter().zip(&halfway).any(|(e, h)| *e > 2 * h + 50), "no queue kept growing");
}

#[test]
fn optimization_lowers_predicted_loss() {
    let s = spec(50, 1.0, 10);
    let ndt = ndt_config(&s, 1);
    let keys = keys_for_size(&s, 50);
    let improved = keys
        .iter()
        .filter(|k| {
            let bundle = optimize_priorities(&k.instance(1.0).unwrap(), &ndt, &s.optimizer).unwrap();
            bundle.best_loss() < bundle.loss_trajectory[0]
        })
        .count();
    assert!(improved * 10 >= keys.len() * 8, "{improved}/{} improved", keys.len());
}

#[test]
fn gating_shortens_the_worst_queue() {
    let s = ExperimentSpec { policies: vec![Policy::Baseline, Policy::PriorityGating], ..spec(50, 1.0, 10) };
    let summary = summarize_policies(&run_policy_comparison(&s));
    let queue = |p: Policy| summary.iter().find(|r| r.policy == p.name()).unwrap().queue_median.unwrap();
    assert!(queue(Policy::PriorityGating) < queue(Policy::Baseline));
}

#[test]
fn smallest_benchmark_cell_is_quick() {
    let start = Instant::now();
    let rows = run_runtime_benchmark(&ExperimentSpec { sizes: vec![20], loads: vec![1.0], ..Default::default() }).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(start.elapsed().as_secs() < 60);
}
