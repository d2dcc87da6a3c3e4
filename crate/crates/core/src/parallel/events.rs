use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// A query dispatched to a worker and not yet completed.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingEntry {
    pub worker: usize,
    pub x: Vec<f64>,
    pub m: usize,
    pub dispatch_time: f64,
    pub completion_time: f64,
    pub cost: f64,
    pub acq_value: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PendingSet {
    entries: Vec<PendingEntry>,
}

impl PendingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, e: PendingEntry) -> Result<()> {
        if e.completion_time < e.dispatch_time {
            return Err(Error::InvalidInput("completion precedes dispatch".into()));
        }
        if self.entries.iter().any(|p| p.worker == e.worker) {
            return Err(Error::InvalidInput(format!("worker {} is already busy", e.worker)));
        }
        self.entries.push(e);
        Ok(())
    }

    pub fn take(&mut self, worker: usize) -> Option<PendingEntry> {
        let pos = self.entries.iter().position(|p| p.worker == worker)?;
        Some(self.entries.remove(pos))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PendingEntry] {
        &self.entries
    }

    /// The (x, m) pairs in dispatch order.
    pub fn points(&self) -> Vec<(Vec<f64>, usize)> {
        self.entries.iter().map(|e| (e.x.clone(), e.m)).collect()
    }

    pub fn total_cost(&self) -> f64 {
        self.entries.iter().map(|e| e.cost).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    time: f64,
    worker: usize,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.worker.cmp(&other.worker))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Completion events ordered by time, ties broken by lower worker index.
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    clock: f64,
    heap: BinaryHeap<Reverse<Key>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> f64 {
        self.clock
    }

    pub fn schedule(&mut self, time: f64, worker: usize) -> Result<()> {
        if !(time >= self.clock) {
            return Err(Error::InvalidInput(format!("event at {time} precedes the clock {}", self.clock)));
        }
        self.heap.push(Reverse(Key { time, worker }));
        Ok(())
    }

    /// Advances the clock to the next completion and returns (time, worker).
    pub fn pop(&mut self) -> Option<(f64, usize)> {
        let Reverse(k) = self.heap.pop()?;
        self.clock = k.time;
        Some((k.time, k.worker))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
