//! Model accuracy against packet-level simulation.
//!
//! Each instance is simulated under uniform priorities; the empirical
//! contention probabilities then feed the analytical model twice (marginals
//! only, and marginals with joints), and the full twin predicts from traffic
//! alone. All three are scored against the simulated duty cycles.

use std::time::Instant;

use ndt_core::analytic::{model_duty_cycles, ContentionMatrix};
use ndt_core::ndt::{predict_instance, NdtConfig, NdtPrediction};
use ndt_core::simulator::{empirical_contention, run_simulation, SimConfig, SimResult};
use ndt_core::{Instance, PriorityVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{max, pearson, rmse};
use crate::plan::{keys_for_size, InstanceKey};
use crate::spec::ExperimentSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelInput {
    /// Empirical marginals, joints taken as products.
    #[default]
    Marginal,
    /// Empirical marginals and joints.
    Joint,
    /// Full twin, contention derived from traffic.
    Ndt,
}

impl ModelInput {
    pub const ALL: [ModelInput; 3] = [ModelInput::Marginal, ModelInput::Joint, ModelInput::Ndt];
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub instance_id: String,
    pub size: usize,
    pub topology: usize,
    pub realization: usize,
    pub load: f64,
    pub rounds: usize,
    pub input: ModelInput,
    pub pearson: Option<f64>,
    pub rmse: Option<f64>,
    pub max_terminal_queue: Option<usize>,
    pub max_duty_cycle: Option<f64>,
    /// `‖x^(K) − x^(K−1)‖_∞` of the twin; empty for the other inputs.
    pub ndt_last_change: Option<f64>,
    pub model_wall_clock_s: Option<f64>,
    pub sim_wall_clock_s: Option<f64>,
    pub error: Option<String>,
}

/// Everything computed for one (instance, load, rounds) cell.
#[derive(Debug, Clone)]
pub struct AccuracyEval {
    pub instance: Instance,
    pub sim: SimResult,
    pub contention: ContentionMatrix,
    pub marginal_model: Vec<f64>,
    pub joint_model: Vec<f64>,
    pub ndt: NdtPrediction,
    pub model_wall_clock_s: [f64; 3],
}

impl AccuracyEval {
    pub fn prediction(&self, input: ModelInput) -> &[f64] {
        match input {
            ModelInput::Marginal => &self.marginal_model,
            ModelInput::Joint => &self.joint_model,
            ModelInput::Ndt => &self.ndt.duty_cycles,
        }
    }
}

pub fn sim_config(spec: &ExperimentSpec, rounds: usize) -> SimConfig {
    SimConfig { rounds, slots: spec.slots, rate_std: spec.rate_std, ..Default::default() }
}

pub fn ndt_config(spec: &ExperimentSpec, rounds: usize) -> NdtConfig {
    NdtConfig { rounds, ..spec.ndt.clone() }
}

pub fn evaluate_accuracy(spec: &ExperimentSpec, key: &InstanceKey, load: f64, rounds: usize) -> Result<AccuracyEval> {
    let instance = key.instance(load)?;
    let z = PriorityVector::uniform(instance.num_links());
    let sim = run_simulation(&instance, &z, &sim_config(spec, rounds), None, key.sim_seed)?;
    let contention = empirical_contention(&sim);
    let grid = spec.ndt.grid;

    let timed = |f: &dyn Fn() -> Result<Vec<f64>>| -> Result<(Vec<f64>, f64)> {
        let start = Instant::now();
        let out = f()?;
        Ok((out, start.elapsed().as_secs_f64()))
    };
    let independent = ContentionMatrix::independent(&instance.conflicts, contention.marginal.clone());
    let (marginal_model, t_marginal) =
        timed(&|| Ok(model_duty_cycles(&instance.conflicts, z.as_slice(), &independent, rounds, grid)?.duty_cycles))?;
    let (joint_model, t_joint) =
        timed(&|| Ok(model_duty_cycles(&instance.conflicts, z.as_slice(), &contention, rounds, grid)?.duty_cycles))?;
    let start = Instant::now();
    let ndt = predict_instance(&instance, &z, &ndt_config(spec, rounds).lean())?;
    let t_ndt = start.elapsed().as_secs_f64();

    Ok(AccuracyEval {
        instance,
        sim,
        contention,
        marginal_model,
        joint_model,
        ndt,
        model_wall_clock_s: [t_marginal, t_joint, t_ndt],
    })
}

fn rows_for(spec: &ExperimentSpec, key: &InstanceKey, load: f64, rounds: usize) -> Vec<AccuracyRow> {
    let base = AccuracyRow {
        instance_id: key.id(),
        size: key.size,
        topology: key.topology,
        realization: key.realization,
        load,
        rounds,
        ..Default::default()
    };
    match evaluate_accuracy(spec, key, load, rounds) {
        Ok(eval) => ModelInput::ALL
            .iter()
            .enumerate()
            .map(|(k, &input)| {
                let predicted = eval.prediction(input);
                AccuracyRow {
                    input,
                    pearson: pearson(predicted, &eval.sim.duty_cycles),
                    rmse: Some(rmse(predicted, &eval.sim.duty_cycles)),
                    max_terminal_queue: Some(eval.sim.max_terminal_queue()),
                    max_duty_cycle: Some(max(&eval.sim.duty_cycles)),
                    ndt_last_change: (input == ModelInput::Ndt).then_some(eval.ndt.last_change),
                    model_wall_clock_s: Some(eval.model_wall_clock_s[k]),
                    sim_wall_clock_s: Some(eval.sim.wall_clock_s),
                    ..base.clone()
                }
            })
            .collect(),
        Err(e) => ModelInput::ALL
            .iter()
            .map(|&input| AccuracyRow { input, error: Some(e.to_string()), ..base.clone() })
            .collect(),
    }
}

/// Rows ordered by size, load, rounds, instance, input. Failed cells are
/// reported in the `error` column and the sweep continues.
pub fn run_accuracy_sweep(spec: &ExperimentSpec) -> Vec<AccuracyRow> {
    let mut cells = Vec::new();
    for &size in &spec.sizes {
        let keys = keys_for_size(spec, size);
        for &load in &spec.loads {
            for &rounds in &spec.rounds {
                cells.extend(keys.iter().map(|k| (*k, load, rounds)));
            }
        }
    }
    cells.par_iter().flat_map_iter(|(key, load, rounds)| rows_for(spec, key, *load, *rounds)).collect()
}
