//! Priority tuning against the twin's predicted congestion.
//!
//! The loss averages `σ(3(ρ_e − 0.8)) + max(ρ_e − 1, 0)` over links, where `ρ`
//! is the predicted overload index. Gradients come from central differences
//! and drive Adam on log-priorities, recentred to zero mean after each step
//! since only priority ratios matter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ndt::{overload_index, predict, NdtConfig};
use crate::netgen::Instance;
use crate::simulator::{GatingParams, PriorityVector};
use crate::{Error, Result};

/// Smallest priority allowed when optimizing in linear space.
const MIN_LINEAR_PRIORITY: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Finite-difference step (in log-priority when `log_space`).
    pub fd_step: f64,
    pub log_space: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: 20,
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            fd_step: 1e-3,
            log_space: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.learning_rate > 0.0 && self.fd_step > 0.0 && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("learning rate, fd step and epsilon must be positive".into()));
        }
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::InvalidArgument(format!("moment decays must lie in [0, 1), got {} and {}", self.beta1, self.beta2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBundle {
    pub z_tilde: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub gating: GatingParams,
    /// Loss of the starting point and of each iterate after it.
    pub loss_trajectory: Vec<f64>,
}

impl PolicyBundle {
    pub fn priorities(&self) -> Result<PriorityVector> {
        PriorityVector::new(self.z_tilde.clone())
    }

    pub fn best_loss(&self) -> f64 {
        self.loss_trajectory.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Per-link congestion penalty averaged over links.
pub fn loss_from_overload(overload: &[f64]) -> f64 {
    if overload.is_empty() {
        return 0.0;
    }
    let total: f64 = overload.iter().map(|&rho| sigmoid(3.0 * (rho - 0.8)) + (rho - 1.0).max(0.0)).sum();
    total / overload.len() as f64
}

/// Predicted congestion loss of priorities `z` on `inst`.
pub fn loss(z: &PriorityVector, inst: &Instance, ndt: &NdtConfig) -> Result<f64> {
    Objective::new(inst, ndt).at(z.as_slice())
}

/// Loss evaluation with the instance's link loads precomputed.
struct Objective<'a> {
    inst: &'a Instance,
    link_loads: Vec<f64>,
    ndt: NdtConfig,
}

impl<'a> Objective<'a> {
    fn new(inst: &'a Instance, ndt: &NdtConfig) -> Self {
        Objective { inst, link_loads: inst.link_loads(), ndt: ndt.clone().lean() }
    }

    fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        let z = PriorityVector::new(z.to_vec())?;
        Ok(predict(&self.inst.conflicts, &self.inst.rates, &self.link_loads, &z, &self.ndt)?.duty_cycles)
    }

    fn at(&self, z: &[f64]) -> Result<f64> {
        let x = self.predict(z)?;
        Ok(loss_from_overload(&overload_index(&x, &self.link_loads, &self.inst.rates)))
    }

    fn at_log(&self, u: &[f64]) -> Result<f64> {
        let z: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        self.at(&z)
    }
}

/// Central differences `(f(u + h 1_e) − f(u − h 1_e)) / 2h`, probes run in
/// parallel.
pub fn central_difference<F>(f: F, u: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    (0..u.len())
        .into_par_iter()
        .map(|e| {
            let mut probe = u.to_vec();
            probe[e] = u[e] + h;
            let up = f(&probe)?;
            probe[e] = u[e] - h;
            let down = f(&probe)?;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Gradient of the loss with respect to log-priorities.
pub fn gradient(z: &PriorityVector, inst: &Instance, ndt: &NdtConfig, opt: &OptimizerConfig) -> Result<Vec<f64>> {
    let objective = Objective::new(inst, ndt);
    let u: Vec<f64> = z.as_slice().iter().map(|v| v.ln()).collect();
    central_difference(|p| objective.at_log(p), &u, opt.fd_step)
}

fn recenter(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Adam on priorities from `z = 1`, keeping the best iterate seen.
pub fn optimize_priorities(inst: &Instance, ndt: &NdtConfig, opt: &OptimizerConfig) -> Result<PolicyBundle> {
    opt.validate()?;
    ndt.validate()?;
    let n = inst.num_links();
    let objective = Objective::new(inst, ndt);

    // log-priorities in log space, priorities otherwise
    let mut param = if opt.log_space { vec![0.0; n] } else { vec![1.0; n] };
    let to_z = |p: &[f64]| -> Vec<f64> {
        if opt.log_space {
            p.iter().map(|v| v.exp()).collect()
        } else {
            p.to_vec()
        }
    };
    let eval = |p: &[f64]| if opt.log_space { objective.at_log(p) } else { objective.at(p) };

    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut current = eval(&param)?;
    let mut trajectory = vec![current];
    let mut best = (current, param.clone());

    for t in 1..=opt.steps {
        let grad = central_difference(eval, &param, opt.fd_step)?;
        let (c1, c2) = (1.0 - opt.beta1.powi(t as i32), 1.0 - opt.beta2.powi(t as i32));
        for e in 0..n {
            m[e] = opt.beta1 * m[e] + (1.0 - opt.beta1) * grad[e];
            v[e] = opt.beta2 * v[e] + (1.0 - opt.beta2) * grad[e] * grad[e];
            param[e] -= opt.learning_rate * (m[e] / c1) / ((v[e] / c2).sqrt() + opt.epsilon);
        }
        if opt.log_space {
            recenter(&mut param);
        } else {
            param.iter_mut().for_each(|p| *p = p.max(MIN_LINEAR_PRIORITY));
            let mean = param.iter().sum::<f64>() / n.max(1) as f64;
            param.iter_mut().for_each(|p| *p /= mean);
        }
        current = eval(&param)?;
        trajectory.push(current);
        if current < best.0 {
            best = (current, param.clone());
        }
    }

    let z_tilde = to_z(&best.1);
    let x_tilde = objective.predict(&z_tilde)?;
    Ok(PolicyBundle { z_tilde, x_tilde, gating: GatingParams::default(), loss_trajectory: trajectory })
}
