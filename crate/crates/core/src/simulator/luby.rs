use rand::Rng;

use crate::netgen::ConflictGraph;

/// Reusable buffers for repeated contention over one conflict graph.
#[derive(Debug, Clone)]
pub struct LubyScheduler {
    draws: Vec<f64>,
    undecided: Vec<bool>,
    active: Vec<usize>,
    winners: Vec<usize>,
}

impl LubyScheduler {
    pub fn new(num_links: usize) -> Self {
        LubyScheduler {
            draws: vec![0.0; num_links],
            undecided: vec![false; num_links],
            active: Vec::new(),
            winners: Vec::new(),
        }
    }

    /// One slot of weighted Luby contention.
    ///
    /// Each round, every undecided link draws uniformly on `(0, z_e]` and
    /// wins iff its draw is strictly above every neighbor's draw for that
    /// round (neighbors that are not contending or already decided count
    /// as 0). Winners are scheduled and their neighbors muted, all from the
    /// same round's draws. Links still undecided after `rounds` rounds are
    /// not scheduled.
    ///
    /// Writes the schedule into `out`.
    pub fn schedule<R: Rng + ?Sized>(
        &mut self,
        conflicts: &ConflictGraph,
        priorities: &[f64],
        contending: &[bool],
        rounds: usize,
        rng: &mut R,
        out: &mut [bool],
    ) {
        out.fill(false);
        self.active.clear();
        self.active.extend((0..contending.len()).filter(|&e| contending[e]));
        for &e in &self.active {
            self.undecided[e] = true;
        }

        for _ in 0..rounds {
            if self.active.is_empty() {
                break;
            }
            for &e in &self.active {
                // 1 - U[0,1) lies in (0, 1], so a link with no rivals always wins
                self.draws[e] = (1.0 - rng.random::<f64>()) * priorities[e];
            }
            self.winners.clear();
            for &e in &self.active {
                let mine = self.draws[e];
                if conflicts.neighbors(e).iter().all(|&i| self.draws[i] < mine) {
                    self.winners.push(e);
                }
            }
            for &w in &self.winners {
                out[w] = true;
                self.undecided[w] = false;
                for &i in conflicts.neighbors(w) {
                    self.undecided[i] = false;
                }
            }
            for &e in &self.active {
                self.draws[e] = 0.0;
            }
            let undecided = &self.undecided;
            self.active.retain(|&e| undecided[e]);
        }
        for &e in &self.active {
            self.undecided[e] = false;
        }
    }
}

/// Allocating convenience wrapper around [`LubyScheduler::schedule`].
pub fn luby_schedule<R: Rng + ?Sized>(
    conflicts: &ConflictGraph,
    priorities: &[f64],
    contending: &[bool],
    rounds: usize,
    rng: &mut R,
) -> Vec<bool> {
    let mut out = vec![false; conflicts.num_links()];
    LubyScheduler::new(conflicts.num_links()).schedule(conflicts, priorities, contending, rounds, rng, &mut out);
    out
}
