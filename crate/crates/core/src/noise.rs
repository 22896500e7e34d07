//! Stochastic Pauli faults, readout flips and readout calibration matrices.
//!
//! Gate faults follow the usual Monte-Carlo trajectory picture: after each
//! gate a depolarizing fault fires with probability `p1` (one-qubit gates) or
//! `p2` (two-qubit gates) and applies a uniformly chosen non-identity Pauli
//! pattern. Every draw consumes exactly one uniform variate so that changing
//! a rate never desynchronizes a random stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Pauli;

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Fault probability after each one-qubit gate and each reset.
    pub p1: f64,
    /// Fault probability after each two-qubit gate.
    pub p2: f64,
    /// Probability of reading 1 when the true outcome is 0.
    pub eps01: f64,
    /// Probability of reading 0 when the true outcome is 1.
    pub eps10: f64,
    /// Probability that a reset leaves the qubit in |1⟩.
    pub reset_flip: f64,
    /// Whether readout flips also corrupt the mid-circuit hop outcomes that
    /// feed the byproduct parities.
    pub mid_circuit_flips: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            p1: 0.0,
            p2: 0.0,
            eps01: 0.0,
            eps10: 0.0,
            reset_flip: 0.0,
            mid_circuit_flips: true,
        }
    }

    /// Symmetric readout error only.
    pub fn readout_only(eps: f64) -> Self {
        Self { eps01: eps, eps10: eps, ..Self::noiseless() }
    }

    /// Gate noise with `p1 = p2 / 10` and symmetric readout error `eps`.
    pub fn two_qubit_dominated(p2: f64, eps: f64) -> Self {
        Self { p1: p2 / 10.0, p2, eps01: eps, eps10: eps, ..Self::noiseless() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("p1", self.p1),
            ("p2", self.p2),
            ("eps01", self.eps01),
            ("eps10", self.eps10),
            ("reset_flip", self.reset_flip),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { name, value });
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.eps01 == 0.0 && self.eps10 == 0.0 && self.reset_flip == 0.0
    }
}

/// Pauli pattern applied after a gate; the second entry is `I` for one-qubit gates.
pub type GateFault = [Pauli; 2];

pub fn sample_gate_fault<R: Rng + ?Sized>(model: &NoiseModel, arity: usize, rng: &mut R) -> Result<GateFault> {
    let (p, patterns) = match arity {
        1 => (model.p1, 3),
        2 => (model.p2, 15),
        other => return Err(Error::InvalidArity(other)),
    };
    let u: f64 = rng.random();
    if u >= p {
        return Ok([Pauli::I, Pauli::I]);
    }
    // Reuse the variate: u/p is uniform on [0, 1) given a fault.
    let k = (((u / p) * patterns as f64) as usize).min(patterns - 1) + 1;
    Ok(match arity {
        1 => [PAULIS[k], Pauli::I],
        _ => [PAULIS[k / 4], PAULIS[k % 4]],
    })
}

/// Reports `bit` through a noisy readout: 0 → 1 with `eps01`, 1 → 0 with `eps10`.
pub fn corrupt_readout<R: Rng + ?Sized>(bit: bool, eps01: f64, eps10: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    let eps = if bit { eps10 } else { eps01 };
    if u < eps {
        !bit
    } else {
        bit
    }
}

/// Column-stochastic single-qubit confusion matrix, `entries[i][j] = P(read i | true j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMatrix {
    pub entries: [[f64; 2]; 2],
}

impl CalibrationMatrix {
    pub fn identity() -> Self {
        Self { entries: [[1.0, 0.0], [0.0, 1.0]] }
    }

    pub fn from_rates(eps01: f64, eps10: f64) -> Self {
        Self { entries: [[1.0 - eps01, eps10], [eps01, 1.0 - eps10]] }
    }

    pub fn determinant(&self) -> f64 {
        let [[a, b], [c, d]] = self.entries;
        a * d - b * c
    }

    /// `qubit` only labels the error.
    pub fn inverse(&self, qubit: usize) -> Result<[[f64; 2]; 2]> {
        let det = self.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::SingularCalibration(qubit));
        }
        let [[a, b], [c, d]] = self.entries;
        Ok([[d / det, -b / det], [-c / det, a / det]])
    }

    /// Applies the confusion to a single-qubit distribution.
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = self.entries;
        [m[0][0] * p[0] + m[0][1] * p[1], m[1][0] * p[0] + m[1][1] * p[1]]
    }
}

/// Analytic calibration matrix of the model's readout channel.
pub fn build_calibration(model: &NoiseModel) -> CalibrationMatrix {
    CalibrationMatrix::from_rates(model.eps01, model.eps10)
}

/// Calibration estimated from `shots` simulated preparations of |0⟩ and of |1⟩.
pub fn estimate_calibration<R: Rng + ?Sized>(model: &NoiseModel, shots: u64, rng: &mut R) -> CalibrationMatrix {
    let flips = |bit: bool, rng: &mut R| {
        (0..shots).filter(|_| corrupt_readout(bit, model.eps01, model.eps10, rng) != bit).count() as f64
    };
    let shots_f = shots.max(1) as f64;
    let e01 = flips(false, rng) / shots_f;
    let e10 = flips(true, rng) / shots_f;
    CalibrationMatrix::from_rates(e01, e10)
}
