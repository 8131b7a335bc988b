//! Deterministic instance plan: every instance is a function of the master
//! seed, the network size and its topology/realization indices.

use ndt_core::netgen::{Instance, InstanceSeeds};
use ndt_core::rng::derive_seed;

use crate::error::Result;
use crate::spec::ExperimentSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceKey {
    pub size: usize,
    pub topology: usize,
    pub realization: usize,
    pub seeds: InstanceSeeds,
    /// Seed of the simulation streams, shared by every policy and load.
    pub sim_seed: u64,
}

impl InstanceKey {
    pub fn new(master: u64, size: usize, topology: usize, realization: usize) -> Self {
        let topo_seed = derive_seed(derive_seed(master, size as u64), topology as u64);
        let real_seed = derive_seed(topo_seed, realization as u64 + 1);
        InstanceKey {
            size,
            topology,
            realization,
            seeds: InstanceSeeds { topology: topo_seed, realization: real_seed },
            sim_seed: derive_seed(real_seed, 0),
        }
    }

    pub fn id(&self) -> String {
        format!("n{}-t{}-r{}", self.size, self.topology, self.realization)
    }

    pub fn instance(&self, load: f64) -> Result<Instance> {
        Ok(Instance::generate(self.size, load, self.seeds)?)
    }
}

/// Instances of one size, topology-major.
pub fn keys_for_size(spec: &ExperimentSpec, size: usize) -> Vec<InstanceKey> {
    (0..spec.topologies)
        .flat_map(|t| (0..spec.realizations).map(move |r| (t, r)))
        .map(|(t, r)| InstanceKey::new(spec.seed, size, t, r))
        .collect()
}

pub fn instance_plan(spec: &ExperimentSpec) -> Vec<InstanceKey> {
    spec.sizes.iter().flat_map(|&s| keys_for_size(spec, s)).collect()
}
