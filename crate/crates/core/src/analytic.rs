//! Closed-form duty cycles under weighted Luby contention.
//!
//! For each round `m` a link contends with probability `b_e^(m)` and, given
//! that it contends, wins with probability
//!
//! ```text
//! P_e = (1/z_e) ∫_0^{z_e} Π_{i ∈ N(e)} F_{i|e}(x) dx
//! ```
//!
//! where `F_{i|e}` is the CDF of neighbor `i`'s effective draw (0 when it does
//! not contend). The integral is a left Riemann sum on `L` points
//! `l·z_e/L`, `l = 0..L-1`. Duty cycles accumulate `Σ_m b_e^(m) P_e^(m)`, and
//! the probability of staying undecided into the next round follows the
//! locally tree-like update in [`survival_update`].
//!
//! Round 1 conditions neighbors on the contention matrix's joints. Later
//! rounds treat neighbors as independent of `e`.

use serde::{Deserialize, Serialize};

use crate::error::check_len;
use crate::netgen::ConflictGraph;
use crate::{Error, Result};

/// Slack allowed on `joint <= min(marginals)` for round-off in inputs.
const JOINT_SLACK: f64 = 1e-12;

/// Marginal contention probability per link and joint probability per
/// conflict edge (indexed by the conflict graph's edge ids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentionMatrix {
    pub marginal: Vec<f64>,
    pub joint: Vec<f64>,
}

impl ContentionMatrix {
    /// Joints as products of marginals.
    pub fn independent(conflicts: &ConflictGraph, marginal: Vec<f64>) -> Self {
        let joint = conflicts.edges().iter().map(|&(a, b)| marginal[a] * marginal[b]).collect();
        ContentionMatrix { marginal, joint }
    }

    pub fn validate(&self, conflicts: &ConflictGraph) -> Result<()> {
        check_len("marginal contention", self.marginal.len(), conflicts.num_links())?;
        check_len("joint contention", self.joint.len(), conflicts.num_edges())?;
        if let Some((e, p)) = self.marginal.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidContention(format!("marginal of link {e} is {p}")));
        }
        for (&(a, b), &p) in conflicts.edges().iter().zip(&self.joint) {
            let cap = self.marginal[a].min(self.marginal[b]);
            if !(p >= 0.0 && p <= cap + JOINT_SLACK) {
                return Err(Error::InvalidContention(format!(
                    "joint of ({a}, {b}) is {p}, marginals {} and {}",
                    self.marginal[a], self.marginal[b]
                )));
            }
        }
        Ok(())
    }
}

/// Predicted duty cycles with per-round diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub duty_cycles: Vec<f64>,
    /// `b_e^(m)` per round.
    pub contention: Vec<Vec<f64>>,
    /// `P_{e,win}^(m)` per round; 0 for links that do not contend in that round.
    pub win: Vec<Vec<f64>>,
}

/// CDF of a neighbor's effective draw: with probability `1 - b_cond` it does
/// not contend (draw 0), otherwise it draws uniformly on `[0, z_i]`.
pub fn conditional_cdf(x: f64, z_i: f64, b_cond: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else if x <= z_i {
        (1.0 - b_cond) + b_cond * x / z_i
    } else {
        1.0
    }
}

/// Discretized win probability, in log-sum-exp form.
///
/// `neighbors` holds `(z_i, b_cond_i)`. A grid point where any CDF is zero
/// contributes exactly zero.
pub fn win_probability(z_e: f64, neighbors: &[(f64, f64)], grid: usize) -> f64 {
    let total: f64 = (0..grid)
        .map(|l| {
            let x = l as f64 * z_e / grid as f64;
            let mut log_sum = 0.0;
            for &(z_i, b) in neighbors {
                let f = conditional_cdf(x, z_i, b);
                if f <= 0.0 {
                    return 0.0;
                }
                log_sum += f.ln();
            }
            log_sum.exp()
        })
        .sum();
    total / grid as f64
}

/// Probability of contending in the next round:
/// `b_e (1 - P_e) Π_i (1 - b_{i|e} P_i)` over `neighbors = (b_{i|e}, P_i)`.
pub fn survival_update(b_e: f64, p_e: f64, neighbors: &[(f64, f64)]) -> f64 {
    neighbors.iter().fold(b_e * (1.0 - p_e), |acc, &(b, p)| acc * (1.0 - b * p))
}

/// Same value as [`win_probability`], computed as a running product over a
/// reusable grid buffer. Neighbors with `b_cond = 0` are skipped.
///
/// `ramp` holds `0, 1, .., L-1` as floats so the inner loop vectorizes.
fn grid_win<I>(z_e: f64, neighbors: I, ramp: &[f64], acc: &mut [f64]) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let grid = acc.len();
    acc.fill(1.0);
    for (z_i, b) in neighbors {
        if b <= 0.0 {
            continue;
        }
        let step = z_e / (grid as f64 * z_i);
        // beyond x = z_i the CDF is 1
        let active = ((1.0 / step).ceil() as usize).min(grid);
        scale_by_cdf(&mut acc[..active], &ramp[..active], 1.0 - b, b * step, b);
    }
    acc.iter().sum::<f64>() / grid as f64
}

/// `acc[l] *= base + min(slope * ramp[l], cap)`.
fn scale_by_cdf(acc: &mut [f64], ramp: &[f64], base: f64, slope: f64, cap: f64) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: the CPU supports AVX, checked just above
        return unsafe { scale_by_cdf_avx(acc, ramp, base, slope, cap) };
    }
    scale_by_cdf_portable(acc, ramp, base, slope, cap)
}

#[inline(always)]
fn scale_by_cdf_portable(acc: &mut [f64], ramp: &[f64], base: f64, slope: f64, cap: f64) {
    for (a, &l) in acc.iter_mut().zip(ramp) {
        // plain comparison instead of f64::min so the loop vectorizes
        let rise = slope * l;
        *a *= base + if rise < cap { rise } else { cap };
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn scale_by_cdf_avx(acc: &mut [f64], ramp: &[f64], base: f64, slope: f64, cap: f64) {
    scale_by_cdf_portable(acc, ramp, base, slope, cap)
}

/// Duty cycles of `rounds`-round weighted Luby contention given contention
/// probabilities `b`, using a `grid`-point discretization.
pub fn model_duty_cycles(
    conflicts: &ConflictGraph,
    priorities: &[f64],
    b: &ContentionMatrix,
    rounds: usize,
    grid: usize,
) -> Result<ModelOutput> {
    let n = conflicts.num_links();
    check_len("priorities", priorities.len(), n)?;
    if rounds == 0 || grid == 0 {
        return Err(Error::InvalidArgument(format!("need rounds >= 1 and grid >= 1, got {rounds} and {grid}")));
    }
    b.validate(conflicts)?;

    // round-1 conditionals b_{i|e} = b_{i,e} / b_e, in adjacency order
    let mut cond_first = Vec::with_capacity(2 * conflicts.num_edges());
    for e in 0..n {
        let be = b.marginal[e];
        cond_first.extend(
            conflicts
                .neighbor_edges(e)
                .iter()
                .map(|&edge| if be > 0.0 { (b.joint[edge] / be).min(1.0) } else { 0.0 }),
        );
    }

    let mut out = ModelOutput { duty_cycles: vec![0.0; n], contention: Vec::with_capacity(rounds), win: Vec::with_capacity(rounds) };
    let mut duty = vec![0.0; n];
    ModelKernel::new(grid).run(conflicts, priorities, &b.marginal, Some(&cond_first), rounds, &mut duty, Some(&mut out));
    out.duty_cycles = duty;
    Ok(out)
}

/// Reusable buffers for repeated model evaluations on one grid size.
#[derive(Debug, Clone)]
pub struct ModelKernel {
    ramp: Vec<f64>,
    acc: Vec<f64>,
    contend: Vec<f64>,
    next: Vec<f64>,
    win: Vec<f64>,
}

impl ModelKernel {
    pub fn new(grid: usize) -> Self {
        ModelKernel {
            ramp: (0..grid).map(|l| l as f64).collect(),
            acc: vec![0.0; grid],
            contend: Vec::new(),
            next: Vec::new(),
            win: Vec::new(),
        }
    }

    pub fn grid(&self) -> usize {
        self.acc.len()
    }

    /// Model duty cycles when every joint is the product of its marginals.
    /// Inputs are trusted: lengths match and marginals lie in `[0, 1]`.
    pub fn independent_duty_cycles(
        &mut self,
        conflicts: &ConflictGraph,
        priorities: &[f64],
        marginal: &[f64],
        rounds: usize,
        duty: &mut [f64],
    ) {
        self.run(conflicts, priorities, marginal, None, rounds, duty, None);
    }

    /// `cond_first` holds round-1 conditionals in adjacency order; `None`
    /// uses the neighbors' marginals.
    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        conflicts: &ConflictGraph,
        priorities: &[f64],
        marginal: &[f64],
        cond_first: Option<&[f64]>,
        rounds: usize,
        duty: &mut [f64],
        mut trace: Option<&mut ModelOutput>,
    ) {
        let n = conflicts.num_links();
        duty.fill(0.0);
        self.contend.clear();
        self.contend.extend_from_slice(marginal);
        self.win.clear();
        self.win.resize(n, 0.0);
        self.next.clear();
        self.next.resize(n, 0.0);

        for round in 0..rounds {
            let first = if round == 0 { cond_first } else { None };
            let contend = &self.contend;
            let cond = |e: usize, k: usize, offset: usize| -> f64 {
                match first {
                    Some(c) => c[offset + k],
                    None => contend[conflicts.neighbors(e)[k]],
                }
            };

            let mut offset = 0;
            for e in 0..n {
                let nbrs = conflicts.neighbors(e);
                self.win[e] = 0.0;
                if contend[e] > 0.0 {
                    let pairs = nbrs.iter().enumerate().map(|(k, &i)| (priorities[i], cond(e, k, offset)));
                    self.win[e] = grid_win(priorities[e], pairs, &self.ramp, &mut self.acc);
                    duty[e] += contend[e] * self.win[e];
                }
                offset += nbrs.len();
            }

            let last = round + 1 == rounds;
            if !last {
                let mut offset = 0;
                for e in 0..n {
                    let nbrs = conflicts.neighbors(e);
                    self.next[e] = 0.0;
                    if contend[e] > 0.0 {
                        let win = &self.win;
                        self.next[e] = nbrs
                            .iter()
                            .enumerate()
                            .fold(contend[e] * (1.0 - win[e]), |s, (k, &i)| s * (1.0 - cond(e, k, offset) * win[i]));
                    }
                    offset += nbrs.len();
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.contention.push(self.contend.clone());
                t.win.push(self.win.clone());
            }
            if !last {
                std::mem::swap(&mut self.contend, &mut self.next);
            }
        }
    }
}
