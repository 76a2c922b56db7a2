//! Deterministic simulation and offline checking of view-synchronized
//! consensus and replicated registers over partially connected, faulty
//! networks.
//!
//! The crate is organized bottom-up:
//!
//! * [`topology`]: process graphs, failure patterns, connected cores.
//! * [`scenario`]: run descriptions (network, timing, workload), bundled
//!   example scenarios, and liveness horizon bounds.
//! * [`sync`], [`consensus`], [`register`], [`replicated`]: the protocol
//!   state machines, written as pure transition functions.
//! * [`sim`]: the discrete-event network simulator that drives the machines
//!   and records a trace.
//! * [`trace`]: the line-delimited trace record format.
//! * [`checkers`], [`linearize`]: offline trace checkers for synchronizer,
//!   consensus, and register properties.
//! * [`fuzz`]: multi-seed scenario sweeps.
//!
//! Every run is a pure function of its scenario and seed: replaying the same
//! pair yields a byte-identical trace.

pub mod checkers;
pub mod consensus;
pub mod fuzz;
pub mod linearize;
pub mod node;
pub mod register;
pub mod replicated;
pub mod scenario;
pub mod sim;
pub mod sync;
pub mod topology;
pub mod trace;

/// Simulated clock value, in integer ticks. Scenario parameters (`delta`,
/// `rho`, timeouts, the horizon) are expressed in the same unit.
pub type SimTime = u64;

/// View number. View 0 is the sentinel pre-view; real views start at 1.
pub type View = u64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("topology: {0}")]
    Topology(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Strict majority test used by every quorum rule in the crate.
pub fn is_majority(count: usize, n: usize) -> bool {
    2 * count > n
}

/// Stateless 64-bit mixer used to derive per-message and per-process
/// randomness from a seed. splitmix64 finalizer.
pub(crate) fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    x
}

/// Hash a handful of coordinates into one deterministic word.
pub(crate) fn hash_coords(seed: u64, salt: u64, coords: &[u64]) -> u64 {
    let mut acc = mix64(seed ^ mix64(salt));
    for &c in coords {
        acc = mix64(acc ^ mix64(c));
    }
    acc
}

/// Map a hash word to a uniform fraction in `[0, 1)`.
pub(crate) fn hash_fraction(word: u64) -> f64 {
    (word >> 11) as f64 / (1u64 << 53) as f64
}

/// Map a hash word to a uniform integer in `[0, bound]`.
pub(crate) fn hash_in(word: u64, bound: u64) -> u64 {
    if bound == u64::MAX {
        word
    } else {
        word % (bound + 1)
    }
}
