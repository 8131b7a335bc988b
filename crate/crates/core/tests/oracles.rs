//! Monte-Carlo and closed-form references for the analytical model and the
//! generators.

use ndt_core::analytic::{model_duty_cycles, ContentionMatrix};
use ndt_core::netgen::{generate_topology, square_side};
use ndt_core::rng::{stream_rng, Stream};
use ndt_core::simulator::LubyScheduler;
use ndt_core::ConflictGraph;
use rand::Rng;

/// Fine grid so the Riemann bias sits far below the Monte-Carlo noise.
const FINE_GRID: usize = 4096;

/// Per-link scheduled frequency of one-round contention with independent
/// Bernoulli(`marginal`) contention masks.
fn monte_carlo(c: &ConflictGraph, z: &[f64], marginal: &[f64], trials: usize, seed: u64) -> Vec<f64> {
    let n = c.num_links();
    let mut mask_rng = stream_rng(seed, Stream::Arrivals);
    let mut rng = stream_rng(seed, Stream::Contention);
    let mut sched = LubyScheduler::new(n);
    let (mut mask, mut out, mut hits) = (vec![false; n], vec![false; n], vec![0u64; n]);
    for _ in 0..trials {
        for e in 0..n {
            mask[e] = mask_rng.random::<f64>() < marginal[e];
        }
        sched.schedule(c, z, &mask, 1, &mut rng, &mut out);
        for e in 0..n {
            hits[e] += u64::from(out[e]);
        }
    }
    hits.iter().map(|&h| h as f64 / trials as f64).collect()
}

fn assert_matches_monte_carlo(c: &ConflictGraph, z: &[f64], marginal: &[f64], seed: u64) {
    let trials = 200_000;
    let mc = monte_carlo(c, z, marginal, trials, seed);
    let b = ContentionMatrix::independent(c, marginal.to_vec());
    let model = model_duty_cycles(c, z, &b, 1, FINE_GRID).unwrap().duty_cycles;
    for e in 0..c.num_links() {
        let se = (mc[e] * (1.0 - mc[e]) / trials as f64).sqrt();
        let tol = (3.0 * se).max(0.005);
        assert!((model[e] - mc[e]).abs() <= tol, "link {e}: model {} vs MC {} (tol {tol})", model[e], mc[e]);
    }
}

#[test]
fn triangle_with_partial_contention() {
    let c = ConflictGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
    assert_matches_monte_carlo(&c, &[1.0, 2.0, 0.5], &[0.9, 0.6, 0.3], 1);
}

#[test]
fn path_with_mixed_priorities() {
    let c = ConflictGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
    assert_matches_monte_carlo(&c, &[3.0, 1.0, 1.5, 0.25], &[1.0, 0.5, 0.8, 0.7], 2);
}

#[test]
fn star_center_against_leaves() {
    let c = ConflictGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
    assert_matches_monte_carlo(&c, &[2.0, 1.0, 1.0, 4.0, 0.5], &[0.95, 0.4, 0.7, 0.2, 1.0], 3);
}

#[test]
fn two_link_closed_form() {
    // P_win = 1 - z_i / (2 z_e) for z_i <= z_e
    let c = ConflictGraph::from_edges(2, &[(0, 1)]);
    let b = ContentionMatrix::independent(&c, vec![1.0, 1.0]);
    for (ze, zi) in [(1.0, 1.0), (2.0, 1.0), (4.0, 1.0), (1.5, 0.5)] {
        let out = model_duty_cycles(&c, &[ze, zi], &b, 1, FINE_GRID).unwrap();
        let exact = 1.0 - zi / (2.0 * ze);
        assert!((out.duty_cycles[0] - exact).abs() < 1.0 / FINE_GRID as f64);
        assert!((out.duty_cycles[0] + out.duty_cycles[1] - 1.0).abs() < 2.0 / FINE_GRID as f64);
    }
}

#[test]
fn interior_nodes_average_eight_neighbors() {
    // away from the border, a unit disk at density 8/π holds 8 other nodes on average
    let (mut total, mut count) = (0usize, 0usize);
    for seed in 0..1000 {
        let g = generate_topology(20, seed).unwrap();
        let side = square_side(20);
        let out = g.out_links();
        for node in &g.nodes {
            let inside = |v: f64| v >= 1.0 && v <= side - 1.0;
            if inside(node.x) && inside(node.y) {
                total += out[node.id].len();
                count += 1;
            }
        }
    }
    assert!(count > 1000, "only {count} interior nodes");
    // among 20 uniform nodes, each other node lands in the unit disk with
    // probability π / side², so the expected count is 19 π / side² = 7.6
    let expected = 19.0 * std::f64::consts::PI / (square_side(20) * square_side(20));
    let mean = total as f64 / count as f64;
    assert!((mean - expected).abs() <= 0.1 * expected, "mean degree {mean}, expected {expected}");
    assert!((mean - 8.0).abs() <= 0.8, "mean degree {mean}");
}
