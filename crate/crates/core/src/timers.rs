use std::time::Instant;

use indexmap::IndexMap;

/// Cumulative wall time per kernel category, in seconds.
///
/// Categories never nest, so their sum is bounded by the enclosing wall time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelTimers {
    entries: IndexMap<String, f64>,
}

impl KernelTimers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, seconds: f64) {
        *self.entries.entry(name.to_string()).or_insert(0.0) += seconds;
    }

    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(name, start.elapsed().as_secs_f64());
        out
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).copied()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn merge(&mut self, other: &KernelTimers) {
        for (k, v) in other.iter() {
            self.add(k, v);
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
