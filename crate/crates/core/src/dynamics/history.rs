use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Snapshot of the wake-relevant state of one turbine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub time_s: f64,
    pub yaw_deg: f64,
    pub rotor_speed: f64,
    pub ct_eff: f64,
}

/// Bounded record of past turbine states, read back at an advection lag.
#[derive(Debug, Clone, PartialEq)]
pub struct WakeHistoryBuffer {
    entries: VecDeque<HistoryEntry>,
    capacity: usize,
}

impl WakeHistoryBuffer {
    pub fn new(capacity: usize, initial: HistoryEntry) -> Self {
        let capacity = capacity.max(2);
        let mut entries = VecDeque::with_capacity(capacity);
        entries.push_back(initial);
        Self { entries, capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest(&self) -> &HistoryEntry {
        self.entries.back().expect("history is never empty")
    }

    pub fn latest_mut(&mut self) -> &mut HistoryEntry {
        self.entries.back_mut().expect("history is never empty")
    }

    /// Appends an entry; its timestamp must be strictly later than the last one.
    pub fn push(&mut self, entry: HistoryEntry) -> Result<()> {
        if entry.time_s <= self.latest().time_s {
            return Err(Error::contract(format!(
                "history timestamp {} not after {}",
                entry.time_s,
                self.latest().time_s
            )));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        Ok(())
    }

    /// State at time `t`, linearly interpolated between the bracketing entries.
    ///
    /// Times before the oldest entry return the oldest entry, times after the
    /// newest return the newest.
    pub fn at(&self, t: f64) -> HistoryEntry {
        let first = self.entries.front().expect("history is never empty");
        if !(t > first.time_s) {
            return *first;
        }
        let last = self.latest();
        if t >= last.time_s {
            return *last;
        }
        // first index with time > t; entries are sorted by construction
        let hi = self.entries.partition_point(|e| e.time_s <= t);
        let (a, b) = (self.entries[hi - 1], self.entries[hi]);
        let w = (t - a.time_s) / (b.time_s - a.time_s);
        let lerp = |x: f64, y: f64| x + w * (y - x);
        HistoryEntry {
            time_s: t,
            yaw_deg: lerp(a.yaw_deg, b.yaw_deg),
            rotor_speed: lerp(a.rotor_speed, b.rotor_speed),
            ct_eff: lerp(a.ct_eff, b.ct_eff),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(t: f64, yaw: f64) -> HistoryEntry {
        HistoryEntry { time_s: t, yaw_deg: yaw, rotor_speed: 8.0, ct_eff: 0.8 }
    }

    #[test]
    fn interpolates_and_clamps() {
        let mut h = WakeHistoryBuffer::new(10, entry(0.0, 0.0));
        h.push(entry(3.0, 3.0)).unwrap();
        h.push(entry(6.0, 9.0)).unwrap();
        assert_eq!(h.at(-5.0).yaw_deg, 0.0);
        assert_eq!(h.at(1.5).yaw_deg, 1.5);
        assert_eq!(h.at(4.5).yaw_deg, 6.0);
        assert_eq!(h.at(3.0).yaw_deg, 3.0);
        assert_eq!(h.at(100.0).yaw_deg, 9.0);
    }

    #[test]
    fn rejects_non_increasing_time() {
        let mut h = WakeHistoryBuffer::new(10, entry(0.0, 0.0));
        assert!(h.push(entry(0.0, 1.0)).is_err());
        assert!(h.push(entry(-1.0, 1.0)).is_err());
    }

    #[test]
    fn old_entries_fall_off() {
        let mut h = WakeHistoryBuffer::new(3, entry(0.0, 0.0));
        for k in 1..10 {
            h.push(entry(k as f64, k as f64)).unwrap();
        }
        assert_eq!(h.len(), 3);
        // older than capacity: oldest retained entry
        assert_eq!(h.at(0.0).yaw_deg, 7.0);
    }
}
