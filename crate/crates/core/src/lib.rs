//! Random wireless multi-hop network instances, a slotted packet simulator
//! driven by weighted Luby contention, and an analytical twin that predicts
//! per-link duty cycles without simulating.
//!
//! The crate is organised bottom-up:
//!
//! - [`netgen`] builds reproducible instances (geometry, conflicts, flows, routes, rates).
//! - [`simulator`] is the ground truth: per-slot contention, Poisson arrivals, fading service.
//! - [`analytic`] is the closed-form duty-cycle model for a given contention matrix.
//! - [`ndt`] wraps the model in a damped fixed-point iteration over capacity and contention.
//! - [`optimizer`] tunes link priorities against the twin's congestion loss.

pub mod analytic;
pub mod error;
pub mod ndt;
pub mod netgen;
pub mod optimizer;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use netgen::{ConflictGraph, ConnectivityGraph, FlowSet, Instance, RoutingMatrix};
pub use simulator::PriorityVector;
