//! Scheduling-policy comparison under common random numbers.
//!
//! Every policy of one instance is simulated with the same seed, so arrivals
//! and fading are bitwise identical across policies; only contention differs.

use std::collections::BTreeMap;
use std::time::Instant;

use ndt_core::optimizer::{loss, optimize_priorities, PolicyBundle};
use ndt_core::simulator::{run_simulation, SimResult};
use ndt_core::{Instance, PriorityVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accuracy::{ndt_config, sim_config};
use crate::error::Result;
use crate::metrics::{mean, median, percent_change, percentile};
use crate::plan::{keys_for_size, InstanceKey};
use crate::spec::{ExperimentSpec, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub instance_id: String,
    pub size: usize,
    pub topology: usize,
    pub realization: usize,
    pub load: f64,
    pub rounds: usize,
    pub policy: Policy,
    pub max_terminal_queue: Option<usize>,
    pub max_duty_cycle: Option<f64>,
    pub mean_duty_cycle: Option<f64>,
    pub packets_delivered: Option<u64>,
    /// Twin-predicted loss at the policy's priorities.
    pub predicted_loss: Option<f64>,
    pub sim_wall_clock_s: Option<f64>,
    pub optimize_wall_clock_s: Option<f64>,
    pub error: Option<String>,
}

impl Default for PolicyRow {
    fn default() -> Self {
        PolicyRow {
            instance_id: String::new(),
            size: 0,
            topology: 0,
            realization: 0,
            load: 0.0,
            rounds: 0,
            policy: Policy::Baseline,
            max_terminal_queue: None,
            max_duty_cycle: None,
            mean_duty_cycle: None,
            packets_delivered: None,
            predicted_loss: None,
            sim_wall_clock_s: None,
            optimize_wall_clock_s: None,
            error: None,
        }
    }
}

/// Per (size, load, rounds, policy) order statistics over instances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicySummaryRow {
    pub size: usize,
    pub load: f64,
    pub rounds: usize,
    pub policy: String,
    pub instances: usize,
    pub queue_median: Option<f64>,
    pub queue_p25: Option<f64>,
    pub queue_p75: Option<f64>,
    /// Percent change of the median against the baseline median.
    pub queue_change_pct: Option<f64>,
    pub duty_median: Option<f64>,
    pub duty_p25: Option<f64>,
    pub duty_p75: Option<f64>,
    pub duty_change_pct: Option<f64>,
}

/// Simulation of one policy; the gating policy needs the optimized bundle.
pub fn simulate_policy(
    spec: &ExperimentSpec,
    instance: &Instance,
    policy: Policy,
    bundle: Option<&PolicyBundle>,
    rounds: usize,
    seed: u64,
) -> Result<SimResult> {
    let cfg = sim_config(spec, rounds);
    let result = match (policy, bundle) {
        (Policy::Baseline, _) => run_simulation(instance, &PriorityVector::uniform(instance.num_links()), &cfg, None, seed)?,
        (Policy::Priority, Some(b)) => run_simulation(instance, &b.priorities()?, &cfg, None, seed)?,
        (Policy::PriorityGating, Some(b)) => {
            let gating = b.gating.with_targets(b.x_tilde.clone())?;
            run_simulation(instance, &b.priorities()?, &cfg, Some(&gating), seed)?
        }
        (_, None) => unreachable!("optimized policies are simulated with a bundle"),
    };
    Ok(result)
}

fn rows_for(spec: &ExperimentSpec, key: &InstanceKey, load: f64, rounds: usize) -> Vec<PolicyRow> {
    let base = PolicyRow {
        instance_id: key.id(),
        size: key.size,
        topology: key.topology,
        realization: key.realization,
        load,
        rounds,
        ..Default::default()
    };
    let fail = |e: String| -> Vec<PolicyRow> {
        spec.policies.iter().map(|&policy| PolicyRow { policy, error: Some(e.clone()), ..base.clone() }).collect()
    };
    let instance = match key.instance(load) {
        Ok(i) => i,
        Err(e) => return fail(e.to_string()),
    };
    let ndt = ndt_config(spec, rounds);

    let needs_bundle = spec.policies.iter().any(|&p| p != Policy::Baseline);
    let (bundle, optimize_s) = if needs_bundle {
        let start = Instant::now();
        match optimize_priorities(&instance, &ndt, &spec.optimizer) {
            Ok(b) => (Some(b), Some(start.elapsed().as_secs_f64())),
            Err(e) => return fail(e.to_string()),
        }
    } else {
        (None, None)
    };
    let bundle = bundle.map(|b| PolicyBundle { gating: spec.gating, ..b });

    spec.policies
        .iter()
        .map(|&policy| {
            let predicted_loss = match (&bundle, policy) {
                (Some(b), Policy::Baseline) => Some(b.loss_trajectory[0]),
                (Some(b), _) => Some(b.best_loss()),
                (None, _) => loss(&PriorityVector::uniform(instance.num_links()), &instance, &ndt).ok(),
            };
            match simulate_policy(spec, &instance, policy, bundle.as_ref(), rounds, key.sim_seed) {
                Ok(sim) => PolicyRow {
                    policy,
                    max_terminal_queue: Some(sim.max_terminal_queue()),
                    max_duty_cycle: Some(sim.max_duty_cycle()),
                    mean_duty_cycle: Some(mean(&sim.duty_cycles)),
                    packets_delivered: Some(sim.packets_delivered),
                    predicted_loss,
                    sim_wall_clock_s: Some(sim.wall_clock_s),
                    optimize_wall_clock_s: if policy == Policy::Baseline { None } else { optimize_s },
                    ..base.clone()
                },
                Err(e) => PolicyRow { policy, error: Some(e.to_string()), ..base.clone() },
            }
        })
        .collect()
}

/// Rows ordered by size, load, rounds, instance, policy.
pub fn run_policy_comparison(spec: &ExperimentSpec) -> Vec<PolicyRow> {
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

/// Medians, quartiles and change against the baseline, recomputed from
/// per-instance rows. Rows with errors are left out.
pub fn summarize_policies(rows: &[PolicyRow]) -> Vec<PolicySummaryRow> {
    // load is keyed by its bit pattern; loads come from the same spec list
    type Key = (usize, u64, usize, Policy);
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let entry = groups.entry((r.size, r.load.to_bits(), r.rounds, r.policy)).or_default();
        if let (Some(q), Some(d)) = (r.max_terminal_queue, r.max_duty_cycle) {
            entry.0.push(q as f64);
            entry.1.push(d);
        }
    }
    let baseline: BTreeMap<(usize, u64, usize), (Option<f64>, Option<f64>)> = groups
        .iter()
        .filter(|(k, _)| k.3 == Policy::Baseline)
        .map(|(k, (q, d))| ((k.0, k.1, k.2), (median(q), median(d))))
        .collect();

    let mut out: Vec<PolicySummaryRow> = groups
        .iter()
        .map(|(&(size, load_bits, rounds, policy), (q, d))| {
            let (qm, dm) = (median(q), median(d));
            let (bq, bd) = baseline.get(&(size, load_bits, rounds)).copied().unwrap_or((None, None));
            PolicySummaryRow {
                size,
                load: f64::from_bits(load_bits),
                rounds,
                policy: policy.to_string(),
                instances: q.len(),
                queue_median: qm,
                queue_p25: percentile(q, 25.0),
                queue_p75: percentile(q, 75.0),
                queue_change_pct: qm.zip(bq).and_then(|(v, b)| percent_change(v, b)),
                duty_median: dm,
                duty_p25: percentile(d, 25.0),
                duty_p75: percentile(d, 75.0),
                duty_change_pct: dm.zip(bd).and_then(|(v, b)| percent_change(v, b)),
            }
        })
        .collect();
    out.sort_by(|a, b| (a.size, a.load, a.rounds).partial_cmp(&(b.size, b.load, b.rounds)).unwrap());
    out
}
