//! Online table paired with a lazily materialized Polyak target.
//!
//! The eager rule `target <- tau * online + (1 - tau) * target` applied to
//! every entry after every update is equivalent, for an entry whose online
//! value has been constant for `n` ticks, to
//! `target = online + (1 - tau)^n * (target_then - online)`.
//! Entries are therefore brought up to date only when read or written.

#[derive(Debug, Clone)]
pub struct TrackedTable {
    online: Vec<f64>,
    target: Vec<f64>,
    stamp: Vec<u64>,
    clock: u64,
    keep: f64,
}

impl TrackedTable {
    pub fn zeros(len: usize, tau: f64) -> Self {
        Self::filled(len, 0.0, tau)
    }

    pub fn filled(len: usize, value: f64, tau: f64) -> Self {
        Self {
            online: vec![value; len],
            target: vec![value; len],
            stamp: vec![0; len],
            clock: 0,
            keep: 1.0 - tau,
        }
    }

    pub fn online(&self) -> &[f64] {
        &self.online
    }

    pub fn online_at(&self, i: usize) -> f64 {
        self.online[i]
    }

    pub fn target_at(&self, i: usize) -> f64 {
        let lag = self.clock - self.stamp[i];
        if lag == 0 {
            return self.target[i];
        }
        let o = self.online[i];
        o + self.keep.powi(lag.min(i32::MAX as u64) as i32) * (self.target[i] - o)
    }

    /// Writes an online entry after settling its target at the current tick.
    pub fn set_online(&mut self, i: usize, value: f64) {
        self.target[i] = self.target_at(i);
        self.stamp[i] = self.clock;
        self.online[i] = value;
    }

    /// One Polyak step for all entries.
    pub fn tick(&mut self) {
        self.clock += 1;
    }

    /// Fully materialized target table.
    pub fn target_snapshot(&self) -> Vec<f64> {
        (0..self.online.len()).map(|i| self.target_at(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_eager_polyak() {
        let tau = 0.05;
        let mut lazy = TrackedTable::zeros(3, tau);
        let mut online = [0.0; 3];
        let mut target = [0.0; 3];
        for step in 0..200usize {
            let i = step % 3;
            if step % 7 != 0 {
                let v = (step as f64).sin();
                lazy.set_online(i, v);
                online[i] = v;
            }
            lazy.tick();
            for j in 0..3 {
                target[j] = tau * online[j] + (1.0 - tau) * target[j];
            }
            for j in 0..3 {
                assert!((lazy.target_at(j) - target[j]).abs() < 1e-12);
            }
        }
    }
}
