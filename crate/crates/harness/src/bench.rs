//! Wall-clock comparison of the twin against simulation.
//!
//! Cells run one after another on the calling thread. Each cell discards one
//! warm-up evaluation of both. The twin is fast enough to be disturbed by
//! scheduler noise, so each instance's time is the median of
//! `bench_repeats` evaluations; cell figures are means over instances.
//! Instance generation is never timed.

use std::time::Instant;

use ndt_core::ndt::predict_instance;
use ndt_core::simulator::run_simulation;
use ndt_core::{Instance, PriorityVector};
use serde::{Deserialize, Serialize};

use crate::accuracy::{ndt_config, sim_config};
use crate::error::Result;
use crate::metrics::{mean, median};
use crate::plan::keys_for_size;
use crate::spec::ExperimentSpec;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub size: usize,
    pub load: f64,
    pub rounds: usize,
    pub instances: usize,
    pub ndt_mean_s: f64,
    pub sim_mean_s: f64,
    /// `sim_mean_s / ndt_mean_s`.
    pub speedup: f64,
}

fn time_ndt(spec: &ExperimentSpec, inst: &Instance, rounds: usize, repeats: usize) -> Result<f64> {
    let cfg = ndt_config(spec, rounds).lean();
    let z = PriorityVector::uniform(inst.num_links());
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        std::hint::black_box(predict_instance(inst, &z, &cfg)?);
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(median(&samples).expect("at least one repeat"))
}

fn time_sim(spec: &ExperimentSpec, inst: &Instance, rounds: usize, seed: u64) -> Result<f64> {
    let z = PriorityVector::uniform(inst.num_links());
    Ok(run_simulation(inst, &z, &sim_config(spec, rounds), None, seed)?.wall_clock_s)
}

pub fn run_runtime_benchmark(spec: &ExperimentSpec) -> Result<Vec<RuntimeRow>> {
    let mut rows = Vec::new();
    for &size in &spec.sizes {
        let keys = keys_for_size(spec, size);
        for &load in &spec.loads {
            let instances = keys.iter().map(|k| Ok((k.instance(load)?, k.sim_seed))).collect::<Result<Vec<_>>>()?;
            for &rounds in &spec.rounds {
                let (warm, warm_seed) = &instances[0];
                time_ndt(spec, warm, rounds, 1)?;
                time_sim(spec, warm, rounds, *warm_seed)?;

                let mut ndt = Vec::with_capacity(instances.len());
                let mut sim = Vec::with_capacity(instances.len());
                for (inst, seed) in &instances {
                    ndt.push(time_ndt(spec, inst, rounds, spec.bench_repeats)?);
                    sim.push(time_sim(spec, inst, rounds, *seed)?);
                }
                let (ndt_mean_s, sim_mean_s) = (mean(&ndt), mean(&sim));
                rows.push(RuntimeRow {
                    size,
                    load,
                    rounds,
                    instances: instances.len(),
                    ndt_mean_s,
                    sim_mean_s,
                    speedup: sim_mean_s / ndt_mean_s,
                });
            }
        }
    }
    Ok(rows)
}
