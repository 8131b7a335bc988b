//! Iterative analytical digital twin.
//!
//! Starting from the contention-free share `z_e / (z_e + Σ_{N(e)} z_i)`, each
//! iteration turns duty cycles into capacities `μ = r x`, capacities into
//! contention probabilities `b = min(λ/μ, 1)`, and contention probabilities
//! into fresh duty cycles through [`model_duty_cycles`], then damps the update
//! with an exponential moving average.

use serde::{Deserialize, Serialize};

use crate::analytic::ModelKernel;
use crate::error::check_len;
use crate::netgen::{ConflictGraph, Instance};
use crate::simulator::PriorityVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NdtConfig {
    /// Outer fixed-point iterations.
    pub iterations: usize,
    /// EMA weight of the fresh model output.
    pub alpha: f64,
    /// Contention rounds per slot.
    pub rounds: usize,
    /// Discretization points of the win-probability integral.
    pub grid: usize,
    /// Lower bound on duty cycles, keeps `λ/μ` finite.
    pub floor: f64,
    /// Keep per-iteration vectors.
    pub keep_trace: bool,
}

impl Default for NdtConfig {
    fn default() -> Self {
        NdtConfig { iterations: 5, alpha: 0.5, rounds: 1, grid: 64, floor: 1e-6, keep_trace: true }
    }
}

impl NdtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("NDT needs at least one iteration".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.rounds == 0 || self.grid == 0 {
            return Err(Error::InvalidArgument("rounds and grid must be positive".into()));
        }
        if !(self.floor >= 0.0 && self.floor < 1.0) {
            return Err(Error::InvalidArgument(format!("floor must lie in [0, 1), got {}", self.floor)));
        }
        Ok(())
    }

    pub fn lean(mut self) -> Self {
        self.keep_trace = false;
        self
    }
}

/// Per-iteration state. `duty_cycles[k]` is `x^(k)` for `k = 0..=K`;
/// `capacity[k]` and `contention[k]` are the `μ` and `b` computed in
/// iteration `k + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NdtTrace {
    pub duty_cycles: Vec<Vec<f64>>,
    pub capacity: Vec<Vec<f64>>,
    pub contention: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdtPrediction {
    pub duty_cycles: Vec<f64>,
    /// `‖x^(K) − x^(K−1)‖_∞`.
    pub last_change: f64,
    pub trace: Option<NdtTrace>,
}

/// Contention-free share of each link, `z_e / (z_e + Σ_{N(e)} z_i)`.
pub fn initial_duty_cycles(conflicts: &ConflictGraph, priorities: &[f64]) -> Vec<f64> {
    (0..conflicts.num_links())
        .map(|e| {
            let rivals: f64 = conflicts.neighbors(e).iter().map(|&i| priorities[i]).sum();
            priorities[e] / (priorities[e] + rivals)
        })
        .collect()
}

/// Contention probability from offered load and capacity; 0 on idle links.
pub fn contention_probability(load: f64, capacity: f64) -> f64 {
    if load == 0.0 {
        0.0
    } else {
        (load / capacity).min(1.0)
    }
}

/// Predicted duty cycles for per-link arrival rates `link_loads`.
///
/// Links without traffic never contend, so the model only runs on the
/// conflict subgraph induced by loaded links; idle links decay towards the
/// floor through the damping step.
pub fn predict(
    conflicts: &ConflictGraph,
    rates: &[f64],
    link_loads: &[f64],
    priorities: &PriorityVector,
    cfg: &NdtConfig,
) -> Result<NdtPrediction> {
    cfg.validate()?;
    let n = conflicts.num_links();
    check_len("rates", rates.len(), n)?;
    check_len("link loads", link_loads.len(), n)?;
    check_len("priorities", priorities.len(), n)?;
    for e in 0..n {
        let (load, rate) = (link_loads[e], rates[e]);
        if !(load >= 0.0 && load.is_finite()) || !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("link {e}: load {load}, rate {rate}")));
        }
        if load > 0.0 && rate == 0.0 {
            return Err(Error::ZeroRate { link: e, load });
        }
    }
    let z = priorities.as_slice();

    let loaded: Vec<usize> = (0..n).filter(|&e| link_loads[e] > 0.0).collect();
    let sub = conflicts.induced(&loaded);
    let sub_z: Vec<f64> = loaded.iter().map(|&e| z[e]).collect();

    let mut x = initial_duty_cycles(conflicts, z);
    let mut trace = cfg.keep_trace.then(|| NdtTrace { duty_cycles: vec![x.clone()], ..Default::default() });
    let mut last_change = 0.0;
    let mut kernel = ModelKernel::new(cfg.grid);
    let mut sub_b = vec![0.0; loaded.len()];
    let mut fresh = vec![0.0; loaded.len()];
    let mut target = vec![0.0; n];

    for _ in 0..cfg.iterations {
        for (k, &e) in loaded.iter().enumerate() {
            sub_b[k] = contention_probability(link_loads[e], rates[e] * x[e].max(cfg.floor));
        }
        kernel.independent_duty_cycles(&sub, &sub_z, &sub_b, cfg.rounds, &mut fresh);
        for (k, &e) in loaded.iter().enumerate() {
            target[e] = fresh[k];
        }

        if let Some(t) = trace.as_mut() {
            t.capacity.push(x.iter().zip(rates).map(|(&xe, &r)| r * xe.max(cfg.floor)).collect());
            let mut full_b = vec![0.0; n];
            for (k, &e) in loaded.iter().enumerate() {
                full_b[e] = sub_b[k];
            }
            t.contention.push(full_b);
        }

        last_change = 0.0;
        for e in 0..n {
            let next = ((1.0 - cfg.alpha) * x[e] + cfg.alpha * target[e]).clamp(cfg.floor, 1.0);
            last_change = f64::max(last_change, (next - x[e]).abs());
            x[e] = next;
        }
        if let Some(t) = trace.as_mut() {
            t.duty_cycles.push(x.clone());
        }
    }
    Ok(NdtPrediction { duty_cycles: x, last_change, trace })
}

pub fn predict_instance(inst: &Instance, priorities: &PriorityVector, cfg: &NdtConfig) -> Result<NdtPrediction> {
    predict(&inst.conflicts, &inst.rates, &inst.link_loads(), priorities, cfg)
}

/// `ρ_e = λ_e / (x̂_e r_e)`, 0 where `λ_e = 0`.
pub fn overload_index(duty_cycles: &[f64], link_loads: &[f64], rates: &[f64]) -> Vec<f64> {
    duty_cycles
        .iter()
        .zip(link_loads)
        .zip(rates)
        .map(|((&x, &load), &r)| if load == 0.0 { 0.0 } else { load / (x * r) })
        .collect()
}
