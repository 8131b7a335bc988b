use std::collections::VecDeque;

/// Mean of each link's schedule indicator over the last `min(window, t)`
/// rows of `history` (oldest first). Zero for an empty history.
pub fn windowed_duty_cycle(history: &[Vec<bool>], window: usize) -> Vec<f64> {
    let num_links = history.first().map_or(0, Vec::len);
    let recent = &history[history.len().saturating_sub(window)..];
    let mut sums = vec![0usize; num_links];
    for row in recent {
        for (s, &on) in sums.iter_mut().zip(row) {
            *s += usize::from(on);
        }
    }
    let denom = recent.len().max(1) as f64;
    sums.into_iter().map(|s| s as f64 / denom).collect()
}

/// Sliding-window duty cycles maintained incrementally, one slot at a time.
#[derive(Debug, Clone)]
pub struct DutyWindow {
    window: usize,
    slots: VecDeque<Vec<usize>>,
    counts: Vec<u32>,
}

impl DutyWindow {
    pub fn new(num_links: usize, window: usize) -> Self {
        assert!(window >= 1, "window must hold at least one slot");
        DutyWindow { window, slots: VecDeque::with_capacity(window), counts: vec![0; num_links] }
    }

    pub fn push(&mut self, schedule: &[bool]) {
        if self.slots.len() == self.window {
            if let Some(old) = self.slots.pop_front() {
                for e in old {
                    self.counts[e] -= 1;
                }
            }
        }
        let on: Vec<usize> = (0..schedule.len()).filter(|&e| schedule[e]).collect();
        for &e in &on {
            self.counts[e] += 1;
        }
        self.slots.push_back(on);
    }

    pub fn duty(&self, link: usize) -> f64 {
        if self.slots.is_empty() {
            0.0
        } else {
            f64::from(self.counts[link]) / self.slots.len() as f64
        }
    }
}
