//! Byte counters for resident feature storage.

/// Tracks bytes currently held and the peak over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StorageMeter {
    current: usize,
    high_water: usize,
}

impl StorageMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn acquire(&mut self, bytes: usize) {
        self.current += bytes;
        self.high_water = self.high_water.max(self.current);
    }

    pub fn release(&mut self, bytes: usize) {
        self.current = self.current.saturating_sub(bytes);
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn high_water(&self) -> usize {
        self.high_water
    }
}
