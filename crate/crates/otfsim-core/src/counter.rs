//! Operation counters for complexity verification.
//!
//! One complex multiply-or-divide counts as one operation, one complex
//! add-or-subtract counts as one operation, and every application of an
//! `(M*N)`-point 2D DFT counts as one transform. Counters are explicit
//! accumulators passed into the counted kernels; parallel workloads use
//! separate counters and merge them by addition.

/// Tally of scalar arithmetic operations and 2D transform applications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    /// Complex multiplications and divisions.
    pub mul_div: u64,
    /// Complex additions and subtractions.
    pub add_sub: u64,
    /// Applications of an `(M*N)`-point 2D DFT (forward or adjoint).
    pub transforms: u64,
}

impl OpCounter {
    /// Fresh zeroed counter.
    pub fn new() -> Self {
        Self::default()
    }

    /// Total arithmetic operations (multiplies/divides plus adds/subtracts).
    pub fn arithmetic(&self) -> u64 {
        self.mul_div + self.add_sub
    }

    pub fn add_mul_div(&mut self, n: u64) {
        self.mul_div += n;
    }

    pub fn add_add_sub(&mut self, n: u64) {
        self.add_sub += n;
    }

    pub fn add_transforms(&mut self, n: u64) {
        self.transforms += n;
    }

    /// Merge another counter into this one.
    pub fn merge(&mut self, other: &OpCounter) {
        self.mul_div += other.mul_div;
        self.add_sub += other.add_sub;
        self.transforms += other.transforms;
    }
}

/// Run a workload against a fresh counter and return the accumulated tallies.
pub fn measure<F: FnOnce(&mut OpCounter)>(workload: F) -> OpCounter {
    let mut counter = OpCounter::new();
    workload(&mut counter);
    counter
}
