//! Deterministic random streams.
//!
//! Every consumer of randomness takes an explicit stream. Streams are derived
//! from `(seed, domain, index)` so parallel work reproduces sequential runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream domains. Distinct domains never share a ChaCha stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Outcomes = 1,
    Faults = 2,
    Shots = 3,
    Bootstrap = 4,
    Calibration = 5,
}

pub fn derive(seed: u64, domain: Domain, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}

/// The pair of streams one protocol trajectory consumes.
///
/// Born-rule sampling and fault sampling are kept apart so that changing a
/// noise rate never shifts the measurement stream.
#[derive(Clone, Debug)]
pub struct TrajectoryRng {
    pub outcomes: Stream,
    pub faults: Stream,
}

impl TrajectoryRng {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        Self {
            outcomes: derive(seed, Domain::Outcomes, trajectory),
            faults: derive(seed, Domain::Faults, trajectory),
        }
    }
}
