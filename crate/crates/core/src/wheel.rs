//! The hamster-wheel teleportation protocol.
//!
//! Qubit 0 is the fixed axis; qubits `1..n` form the ring. The run starts from
//! the path graph state on `0 – 1 – … – (n−1)`, so the pair `(0, 1)` holds the
//! two-qubit graph state and the rest of the ring is a line hanging off qubit 1.
//! Each hop measures the current holder in the X basis, which moves the
//! teleported component to the next qubit of the line. A leg is `n − 2` hops;
//! when the holder has no successor left, every measured ring qubit is reset,
//! rotated to |+⟩ and CZ-chained onto the holder in the order it was measured,
//! forming a fresh `(n − 1)`-node line that begins at the holder.
//!
//! After `m` hops with outcomes `s₁ … s_m` the pair `(0, r)` carries
//! `(I ⊗ H^m Z^{s₁⊕s₃⊕…} X^{s₂⊕s₄⊕…}) |φ(P₂)⟩` up to a global phase, with
//! `r = m mod (n − 1) + 1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::{graph_pair, hadamard_matrix, pauli_matrix, DensityMatrix, PairVector};
use crate::error::{Error, Result};
use crate::noise::{corrupt_readout, sample_gate_fault, NoiseModel};
use crate::rng::TrajectoryRng;
use crate::sim::{build_graph_state, Gate, Graph, Pauli, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    /// Undo the byproduct on the holder from the accumulated parities.
    Dynamic,
    /// Leave the state uncorrected and bucket it by discriminator.
    PostSelection,
}

impl fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionMode::Dynamic => "dynamic",
            CorrectionMode::PostSelection => "post_selection",
        })
    }
}

impl FromStr for CorrectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(CorrectionMode::Dynamic),
            "post_selection" | "post-selection" => Ok(CorrectionMode::PostSelection),
            other => Err(Error::InvalidConfig(format!("unknown correction mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WheelConfig {
    /// Total qubits: the axis plus `n − 1` ring qubits.
    pub n: usize,
    /// Hops to perform.
    pub m: usize,
    pub correction_mode: CorrectionMode,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl WheelConfig {
    pub fn noiseless(n: usize, m: usize, correction_mode: CorrectionMode) -> Self {
        Self { n, m, correction_mode, noise: NoiseModel::noiseless(), seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::WheelTooSmall(self.n));
        }
        if self.n > crate::sim::MAX_QUBITS {
            return Err(Error::QubitCount(self.n));
        }
        self.noise.validate()
    }
}

/// Parity pair `(⊕ odd-indexed sᵢ, ⊕ even-indexed sⱼ)`, hops indexed from 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Discriminator {
    /// Z power of the byproduct.
    pub z: bool,
    /// X power of the byproduct.
    pub x: bool,
}

impl Discriminator {
    pub const ALL: [Discriminator; 4] = [
        Discriminator { z: false, x: false },
        Discriminator { z: false, x: true },
        Discriminator { z: true, x: false },
        Discriminator { z: true, x: true },
    ];

    pub fn new(z: bool, x: bool) -> Self {
        Self { z, x }
    }
}

pub fn discriminator(outcomes: &[bool]) -> Discriminator {
    let parity = |first: usize| outcomes.iter().skip(first).step_by(2).fold(false, |acc, &s| acc ^ s);
    Discriminator { z: parity(0), x: parity(1) }
}

/// Hop outcomes plus the running parity registers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MeasurementRecord {
    outcomes: Vec<bool>,
    c_z: bool,
    c_x: bool,
}

impl MeasurementRecord {
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = bool>) -> Self {
        let mut record = Self::default();
        outcomes.into_iter().for_each(|s| record.push(s));
        record
    }

    pub fn push(&mut self, outcome: bool) {
        // Hop k (1-indexed) is odd when the current length is even.
        if self.outcomes.len() % 2 == 0 {
            self.c_z ^= outcome;
        } else {
            self.c_x ^= outcome;
        }
        self.outcomes.push(outcome);
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.outcomes
    }

    pub fn hops(&self) -> usize {
        self.outcomes.len()
    }

    pub fn c_z(&self) -> bool {
        self.c_z
    }

    pub fn c_x(&self) -> bool {
        self.c_x
    }

    pub fn discriminator(&self) -> Discriminator {
        Discriminator { z: self.c_z, x: self.c_x }
    }
}

/// `H^h Z^z X^x` acting on the holder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ByproductOperator {
    pub h_parity: bool,
    pub z_power: bool,
    pub x_power: bool,
}

pub fn byproduct_for(m: usize, d: Discriminator) -> ByproductOperator {
    ByproductOperator { h_parity: m % 2 == 1, z_power: d.z, x_power: d.x }
}

impl ByproductOperator {
    pub fn is_identity(&self) -> bool {
        !(self.h_parity || self.z_power || self.x_power)
    }

    pub fn matrix(&self) -> Matrix2<C64> {
        let mut m = Matrix2::identity();
        if self.h_parity {
            m *= hadamard_matrix();
        }
        if self.z_power {
            m *= pauli_matrix(Pauli::Z);
        }
        if self.x_power {
            m *= pauli_matrix(Pauli::X);
        }
        m
    }

    /// Gates realizing the adjoint `X^x Z^z H^h` on `qubit`, in circuit order.
    pub fn correction_gates(&self, qubit: usize) -> Vec<Gate> {
        let mut gates = Vec::with_capacity(3);
        if self.h_parity {
            gates.push(Gate::H(qubit));
        }
        if self.z_power {
            gates.push(Gate::Z(qubit));
        }
        if self.x_power {
            gates.push(Gate::X(qubit));
        }
        gates
    }

    /// The state this byproduct makes of the two-qubit graph state.
    pub fn apply_to_graph_pair(&self) -> PairVector {
        Matrix2::identity().kronecker(&self.matrix()) * graph_pair()
    }
}

/// Ring qubit holding the teleported component after `m` hops.
pub fn final_holder(m: usize, n: usize) -> usize {
    m % (n - 1) + 1
}

/// Number of wheel regenerations a run of `m` hops performs.
pub fn regenerations_after(m: usize, n: usize) -> usize {
    let leg = n - 2;
    m.saturating_sub(1) / leg
}

/// Noiseless path graph state on `0 – 1 – … – (n−1)`.
pub fn build_initial_state(n: usize) -> Result<StateVector> {
    if n < 3 {
        return Err(Error::WheelTooSmall(n));
    }
    build_graph_state(&Graph::path(n))
}

/// Teleported pair state at one point of a run.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub hops: usize,
    pub holder: usize,
    /// Recorded discriminator of this trajectory.
    pub discriminator: Discriminator,
    /// Probability of each recorded discriminator, in [`Discriminator::ALL`]
    /// order, given the true outcomes.
    pub discriminator_weights: [f64; 4],
    /// Raw in post-selection mode. In dynamic mode, corrected and averaged
    /// over hop-outcome misreads.
    pub rho: DensityMatrix,
}

/// One trajectory of the protocol.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    config: WheelConfig,
    record: MeasurementRecord,
    state: StateVector,
    /// Current line, starting at the qubit that held the component when the
    /// leg began.
    line: Vec<usize>,
    /// Index of the holder within `line`.
    position: usize,
    regenerations: usize,
    finished: bool,
    /// Discriminator of the true (unread) hop outcomes.
    true_discriminator: Discriminator,
    /// `Π (1 − 2fᵢ)` over the z and x registers, `fᵢ` being the chance hop `i`
    /// was misread.
    misread_keep: [f64; 2],
}

impl ProtocolRun {
    /// Prepares the initial chain state with gate noise.
    pub fn start(config: WheelConfig, rng: &mut TrajectoryRng) -> Result<Self> {
        config.validate()?;
        let n = config.n;
        let mut run = Self {
            state: StateVector::zero_state(n)?,
            line: (1..n).collect(),
            position: 0,
            record: MeasurementRecord::default(),
            regenerations: 0,
            finished: false,
            true_discriminator: Discriminator::default(),
            misread_keep: [1.0, 1.0],
            config,
        };
        for q in 0..n {
            run.noisy_gate(Gate::H(q), rng)?;
        }
        for q in 1..n {
            run.noisy_gate(Gate::CZ(q - 1, q), rng)?;
        }
        Ok(run)
    }

    pub fn config(&self) -> &WheelConfig {
        &self.config
    }

    pub fn record(&self) -> &MeasurementRecord {
        &self.record
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn hops(&self) -> usize {
        self.record.hops()
    }

    pub fn holder(&self) -> usize {
        self.line[self.position]
    }

    /// The unmeasured line qubit still CZ-linked to the holder, if any.
    pub fn successor(&self) -> Option<usize> {
        if self.finished {
            return None;
        }
        self.line.get(self.position + 1).copied()
    }

    pub fn line(&self) -> &[usize] {
        &self.line
    }

    pub fn regenerations(&self) -> usize {
        self.regenerations
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn byproduct(&self) -> ByproductOperator {
        byproduct_for(self.hops(), self.record.discriminator())
    }

    fn noisy_gate(&mut self, gate: Gate, rng: &mut TrajectoryRng) -> Result<()> {
        self.state.apply_gate(&gate)?;
        let fault = sample_gate_fault(&self.config.noise, gate.arity(), &mut rng.faults)?;
        let (a, b) = gate.qubits();
        self.state.apply_pauli(a, fault[0])?;
        if let Some(b) = b {
            self.state.apply_pauli(b, fault[1])?;
        }
        Ok(())
    }

    /// Measures the holder in the X basis and advances along the line,
    /// regenerating the wheel first if the line is used up. Returns the
    /// recorded (possibly misread) outcome.
    pub fn perform_hop(&mut self, forced: Option<bool>, rng: &mut TrajectoryRng) -> Result<bool> {
        if self.finished {
            return Err(Error::RunFinished);
        }
        if self.successor().is_none() {
            self.regenerate_wheel(rng)?;
        }
        let holder = self.holder();
        let outcome = self.state.measure_x(holder, forced, &mut rng.outcomes)?;
        let noise = self.config.noise;
        let register = self.record.hops() % 2;
        if register == 0 {
            self.true_discriminator.z ^= outcome;
        } else {
            self.true_discriminator.x ^= outcome;
        }
        if noise.mid_circuit_flips {
            let f = if outcome { noise.eps10 } else { noise.eps01 };
            self.misread_keep[register] *= 1.0 - 2.0 * f;
        }
        let recorded = if noise.mid_circuit_flips {
            corrupt_readout(outcome, noise.eps01, noise.eps10, &mut rng.faults)
        } else {
            outcome
        };
        self.record.push(recorded);
        self.position += 1;
        Ok(recorded)
    }

    /// Resets every measured ring qubit, prepares |+⟩ and chains them onto the
    /// holder in measurement order. Requires the current line to be used up.
    pub fn regenerate_wheel(&mut self, rng: &mut TrajectoryRng) -> Result<()> {
        if self.finished {
            return Err(Error::RunFinished);
        }
        if self.successor().is_some() {
            return Err(Error::InvalidConfig(format!(
                "holder {} still has an unmeasured successor; the wheel can only regenerate at the end of a leg",
                self.holder()
            )));
        }
        let holder = self.holder();
        let measured: Vec<usize> = self.line[..self.position].to_vec();
        let noise = self.config.noise;
        for &q in &measured {
            self.state.reset(q, &mut rng.outcomes)?;
            let fault = sample_gate_fault(&noise, 1, &mut rng.faults)?;
            self.state.apply_pauli(q, fault[0])?;
            if rand::Rng::random::<f64>(&mut rng.faults) < noise.reset_flip {
                self.state.apply_gate(&Gate::X(q))?;
            }
            self.noisy_gate(Gate::H(q), rng)?;
        }
        let mut prev = holder;
        for &q in &measured {
            self.noisy_gate(Gate::CZ(prev, q), rng)?;
            prev = q;
        }
        self.line = std::iter::once(holder).chain(measured).collect();
        self.position = 0;
        self.regenerations += 1;
        Ok(())
    }

    /// Reduced state of `(0, holder)` with the holder's link to its unmeasured
    /// successor removed (exactly, as if that CZ had never been applied).
    /// No byproduct correction is applied.
    pub fn teleported_density(&self) -> Result<DensityMatrix> {
        let holder = self.holder();
        match self.successor() {
            None => DensityMatrix::from_dmatrix(&self.state.reduced_density_matrix(&[0, holder])?),
            Some(next) => {
                let rho = self.state.reduced_density_matrix(&[0, holder, next])?;
                // CZ on local bits (1, 0), then trace out local bit 0.
                let sign = |l: usize| if l & 0b011 == 0b011 { -1.0 } else { 1.0 };
                Ok(DensityMatrix::new(Matrix4::from_fn(|r, c| {
                    (0..2)
                        .map(|s| {
                            let (i, j) = (2 * r + s, 2 * c + s);
                            rho[(i, j)] * sign(i) * sign(j)
                        })
                        .sum()
                })))
            }
        }
    }

    /// Discriminator computed from the true hop outcomes.
    pub fn true_discriminator(&self) -> Discriminator {
        self.true_discriminator
    }

    /// Probability of each recorded discriminator (in [`Discriminator::ALL`]
    /// order) given the true outcomes, over all possible hop misreads.
    pub fn recorded_discriminator_weights(&self) -> [f64; 4] {
        let flip = self.misread_keep.map(|k| 0.5 * (1.0 - k));
        let t = self.true_discriminator;
        Discriminator::ALL.map(|d| {
            let pz = if d.z != t.z { flip[0] } else { 1.0 - flip[0] };
            let px = if d.x != t.x { flip[1] } else { 1.0 - flip[1] };
            pz * px
        })
    }

    /// Pair state after applying the adjoint byproduct of the recorded
    /// outcomes, with the correction gates' one-qubit fault channel averaged
    /// exactly.
    pub fn corrected_density(&self) -> Result<DensityMatrix> {
        self.corrected_for(&self.teleported_density()?, self.record.discriminator())
    }

    /// [`ProtocolRun::corrected_density`] averaged over every way the hop
    /// outcomes could have been misread.
    pub fn expected_corrected_density(&self) -> Result<DensityMatrix> {
        let raw = self.teleported_density()?;
        let weights = self.recorded_discriminator_weights();
        let mut parts = Vec::with_capacity(4);
        for (&d, &w) in Discriminator::ALL.iter().zip(&weights) {
            if w > 0.0 {
                parts.push((self.corrected_for(&raw, d)?, w));
            }
        }
        Ok(DensityMatrix::weighted_sum(parts.iter().map(|(rho, w)| (rho, *w))))
    }

    fn corrected_for(&self, raw: &DensityMatrix, d: Discriminator) -> Result<DensityMatrix> {
        let mut rho = raw.clone();
        let p1 = self.config.noise.p1;
        for gate in byproduct_for(self.hops(), d).correction_gates(1) {
            let u = match gate {
                Gate::H(_) => hadamard_matrix(),
                Gate::Z(_) => pauli_matrix(Pauli::Z),
                Gate::X(_) => pauli_matrix(Pauli::X),
                Gate::CZ(..) => unreachable!("corrections are single-qubit"),
            };
            rho = rho.conjugate_second(&u).depolarize_second(p1);
        }
        Ok(rho)
    }

    /// Pair state as the configured correction mode would deliver it.
    pub fn snapshot(&self) -> Result<Snapshot> {
        let rho = match self.config.correction_mode {
            CorrectionMode::Dynamic => self.expected_corrected_density()?,
            CorrectionMode::PostSelection => self.teleported_density()?,
        };
        Ok(Snapshot {
            hops: self.hops(),
            holder: self.holder(),
            discriminator: self.record.discriminator(),
            discriminator_weights: self.recorded_discriminator_weights(),
            rho,
        })
    }

    /// Ends the run: detaches the holder from any unmeasured successor and, in
    /// dynamic mode, applies the byproduct correction gates with gate noise.
    pub fn finish(&mut self, rng: &mut TrajectoryRng) -> Result<()> {
        if self.finished {
            return Ok(());
        }
        if let Some(next) = self.successor() {
            self.state.apply_gate(&Gate::CZ(self.holder(), next))?;
        }
        if self.config.correction_mode == CorrectionMode::Dynamic {
            for gate in self.byproduct().correction_gates(self.holder()) {
                self.noisy_gate(gate, rng)?;
            }
        }
        self.finished = true;
        Ok(())
    }

    /// Final global state; only meaningful once the run is finished.
    pub fn final_state(&self) -> &StateVector {
        &self.state
    }
}

/// Runs trajectory `index` of `config` for `config.m` hops and finishes it.
pub fn run_trajectory(config: &WheelConfig, index: u64) -> Result<ProtocolRun> {
    let mut rng = TrajectoryRng::new(config.seed, index);
    let mut run = ProtocolRun::start(config.clone(), &mut rng)?;
    for _ in 0..config.m {
        run.perform_hop(None, &mut rng)?;
    }
    run.finish(&mut rng)?;
    Ok(run)
}

pub fn run_protocol(config: &WheelConfig) -> Result<ProtocolRun> {
    run_trajectory(config, 0)
}

/// Runs with every true hop outcome fixed; `outcomes.len()` overrides `config.m`.
pub fn run_forced(config: &WheelConfig, outcomes: &[bool]) -> Result<ProtocolRun> {
    let mut rng = TrajectoryRng::new(config.seed, 0);
    let mut run = ProtocolRun::start(config.clone(), &mut rng)?;
    for &s in outcomes {
        run.perform_hop(Some(s), &mut rng)?;
    }
    run.finish(&mut rng)?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Graph;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn pair_state(v: PairVector) -> StateVector {
        StateVector::from_amplitudes(v.iter().copied().collect()).unwrap()
    }

    #[test]
    fn misread_weights_match_enumeration() {
        let eps = 0.07;
        let hops = 7;
        let config = WheelConfig {
            noise: NoiseModel { mid_circuit_flips: true, ..NoiseModel::readout_only(eps) },
            seed: 12,
            ..WheelConfig::noiseless(5, hops, CorrectionMode::Dynamic)
        };
        let run = run_trajectory(&config, 3).unwrap();
        let truth = run.true_discriminator();
        let mut expected = [0.0; 4];
        for mask in 0u32..1 << hops {
            let flips: Vec<bool> = (0..hops).map(|i| mask >> i & 1 == 1).collect();
            let k = mask.count_ones() as i32;
            let p = eps.powi(k) * (1.0 - eps).powi(hops as i32 - k);
            let f = discriminator(&flips);
            let read = Discriminator { z: truth.z ^ f.z, x: truth.x ^ f.x };
            expected[Discriminator::ALL.iter().position(|&d| d == read).unwrap()] += p;
        }
        let weights = run.recorded_discriminator_weights();
        for (w, e) in weights.iter().zip(expected) {
            assert!((w - e).abs() < 1e-12, "{weights:?} vs {expected:?}");
        }

        let clean = run_trajectory(&WheelConfig { noise: NoiseModel::noiseless(), ..config }, 3).unwrap();
        let slot = Discriminator::ALL.iter().position(|&d| d == clean.record().discriminator()).unwrap();
        let weights = clean.recorded_discriminator_weights();
        assert!(weights.iter().enumerate().all(|(i, &w)| w == if i == slot { 1.0 } else { 0.0 }));
    }

    #[test]
    fn initial_state_phases() {
        let s = build_initial_state(3).unwrap();
        let a = s.amplitudes();
        assert!(a[0b011].re < 0.0 && a[0b110].re < 0.0 && a[0b111].re > 0.0);
        for n in [3, 5, 8] {
            let s = build_initial_state(n).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            let mag = 2f64.powf(-(n as f64) / 2.0);
            assert!(s.amplitudes().iter().all(|x| (x.norm() - mag).abs() < 1e-12));
            for (idx, amp) in s.amplitudes().iter().enumerate() {
                let bits: Vec<usize> = (0..n).map(|q| idx >> (n - 1 - q) & 1).collect();
                let parity: usize = bits.windows(2).map(|w| w[0] * w[1]).sum();
                let expected = if parity % 2 == 0 { mag } else { -mag };
                assert!((amp - c(expected)).norm() < 1e-12);
            }
        }
        assert!(matches!(build_initial_state(2), Err(Error::WheelTooSmall(2))));
    }

    #[test]
    fn holder_formula_examples() {
        assert_eq!(final_holder(0, 20), 1);
        assert_eq!(final_holder(9, 20), 10);
        assert_eq!(final_holder(56, 20), 19);
        assert_eq!(final_holder(18, 20), 19);
        assert_eq!(final_holder(19, 20), 1);
    }

    #[test]
    fn discriminator_examples() {
        assert_eq!(discriminator(&[false; 7]), Discriminator::new(false, false));
        assert_eq!(discriminator(&[true, true, true]), Discriminator::new(false, true));
        assert_eq!(discriminator(&[true, false, true, false, true]), Discriminator::new(true, false));
        assert_eq!(discriminator(&[]), Discriminator::default());
    }

    #[test]
    fn record_parities_track_outcomes() {
        let outcomes = [true, false, true, true, false, true, true];
        let mut record = MeasurementRecord::default();
        for (k, &s) in outcomes.iter().enumerate() {
            record.push(s);
            assert_eq!(record.discriminator(), discriminator(&outcomes[..=k]));
        }
        assert_eq!(record.hops(), 7);
    }

    #[test]
    fn byproduct_examples() {
        assert!(byproduct_for(4, Discriminator::default()).is_identity());
        let hz = byproduct_for(1, discriminator(&[true]));
        assert!((hz.matrix() - hadamard_matrix() * pauli_matrix(Pauli::Z)).camax() < 1e-15);
        let x = byproduct_for(2, discriminator(&[false, true]));
        assert!((x.matrix() - pauli_matrix(Pauli::X)).camax() < 1e-15);
        assert_eq!(x.correction_gates(3), vec![Gate::X(3)]);
        assert_eq!(hz.correction_gates(2), vec![Gate::H(2), Gate::Z(2)]);
    }

    #[test]
    fn single_hop_matches_statevector_oracle() {
        // Oracle: ½(|0+⟩+|1−⟩)-style projection computed directly on |φ(P₂)⟩⊗|+⟩ with CZ.
        let phi = graph_pair();
        for s in [false, true] {
            let config = WheelConfig::noiseless(3, 1, CorrectionMode::PostSelection);
            let run = run_forced(&config, &[s]).unwrap();
            assert_eq!(run.holder(), 2);
            let got = pair_state(PairVector::from_iterator(run.final_state().extract_pair((0, 2)).unwrap()));

            let mut u = hadamard_matrix();
            if s {
                u *= pauli_matrix(Pauli::Z);
            }
            let expected = pair_state(Matrix2::identity().kronecker(&u) * phi);
            assert!(got.distance_up_to_phase(&expected) < 1e-10);

            let rho = run.teleported_density().unwrap();
            let target = DensityMatrix::from_pure(&(Matrix2::identity().kronecker(&u) * phi));
            assert!(rho.trace_distance(&target) < 1e-10);
            assert_eq!(run.record().discriminator(), Discriminator::new(s, false));
        }
    }

    #[test]
    fn regeneration_restores_line_with_byproduct() {
        let n = 5;
        let outcomes = [true, false, true];
        let config = WheelConfig::noiseless(n, 3, CorrectionMode::PostSelection);
        let mut rng = TrajectoryRng::new(0, 0);
        let mut run = ProtocolRun::start(config, &mut rng).unwrap();
        for &s in &outcomes {
            run.perform_hop(Some(s), &mut rng).unwrap();
        }
        assert_eq!(run.holder(), 4);
        assert_eq!(run.successor(), None);
        run.regenerate_wheel(&mut rng).unwrap();
        assert_eq!(run.line(), &[4, 1, 2, 3]);

        // Reference: byproduct pair on (0, 4), |+⟩ on 1..3, then CZ 4–1–2–3.
        let b = byproduct_for(3, discriminator(&outcomes));
        let pair = b.apply_to_graph_pair();
        let mut amps = vec![c(0.0); 1 << n];
        for (idx, amp) in amps.iter_mut().enumerate() {
            let bit = |q: usize| idx >> (n - 1 - q) & 1;
            let local = 2 * bit(0) + bit(4);
            *amp = pair[local] * 8f64.sqrt().recip();
        }
        let mut reference = StateVector::from_amplitudes(amps).unwrap();
        for (a, bq) in [(4, 1), (1, 2), (2, 3)] {
            reference.apply_gate(&Gate::CZ(a, bq)).unwrap();
        }
        assert!((run.state().fidelity(&reference) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn measured_qubits_are_disentangled_before_rechaining() {
        let config = WheelConfig::noiseless(6, 4, CorrectionMode::Dynamic);
        let mut rng = TrajectoryRng::new(11, 0);
        let mut run = ProtocolRun::start(config, &mut rng).unwrap();
        for _ in 0..4 {
            run.perform_hop(None, &mut rng).unwrap();
        }
        let mut probe = run.state().clone();
        for &q in &run.line()[..4] {
            probe.reset(q, &mut rng.outcomes).unwrap();
            assert!(probe.probability_one(q).unwrap() < 1e-15);
        }
        // Each measured qubit sits in an X eigenstate, i.e. a product factor.
        for &q in &run.line()[..4] {
            let rho = run.state().reduced_density_matrix(&[q]).unwrap();
            let purity: f64 = (&rho * &rho).trace().re;
            assert!((purity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn regeneration_count_matches_scheduler() {
        let n = 6;
        let config = WheelConfig::noiseless(n, 0, CorrectionMode::Dynamic);
        let mut rng = TrajectoryRng::new(2, 0);
        let mut run = ProtocolRun::start(config, &mut rng).unwrap();
        assert_eq!(run.regenerations(), regenerations_after(0, n));
        for m in 1..=40 {
            run.perform_hop(None, &mut rng).unwrap();
            assert_eq!(run.regenerations(), regenerations_after(m, n), "m={m}");
            assert_eq!(run.holder(), final_holder(m, n));
        }
        // n = 20, leg 18: ⌈(m − 18)/18⌉ clamped at zero.
        for m in 0..200usize {
            let expected = if m <= 18 { 0 } else { (m - 18).div_ceil(18) };
            assert_eq!(regenerations_after(m, 20), expected);
        }
    }

    #[test]
    fn early_regeneration_rejected() {
        let config = WheelConfig::noiseless(5, 0, CorrectionMode::Dynamic);
        let mut rng = TrajectoryRng::new(0, 0);
        let mut run = ProtocolRun::start(config, &mut rng).unwrap();
        run.perform_hop(None, &mut rng).unwrap();
        assert!(run.regenerate_wheel(&mut rng).is_err());
    }

    #[test]
    fn zero_hops_gives_graph_pair() {
        let run = run_protocol(&WheelConfig::noiseless(6, 0, CorrectionMode::Dynamic)).unwrap();
        let pair = pair_state(PairVector::from_iterator(run.final_state().extract_pair((0, 1)).unwrap()));
        let target = build_graph_state(&Graph::path(2)).unwrap();
        assert!(pair.distance_up_to_phase(&target) < 1e-12);
    }

    #[test]
    fn dynamic_correction_restores_graph_pair() {
        let target = DensityMatrix::from_pure(&graph_pair());
        for m in [1, 2, 5, 7, 13] {
            for seed in 0..4 {
                let config = WheelConfig { seed, ..WheelConfig::noiseless(5, m, CorrectionMode::Dynamic) };
                let run = run_protocol(&config).unwrap();
                assert_eq!(run.holder(), final_holder(m, 5));
                let rho = DensityMatrix::from_dmatrix(
                    &run.final_state().reduced_density_matrix(&[0, run.holder()]).unwrap(),
                )
                .unwrap();
                assert!(rho.trace_distance(&target) < 1e-10, "m={m} seed={seed}");
            }
        }
    }

    #[test]
    fn snapshot_matches_finished_state() {
        for mode in [CorrectionMode::Dynamic, CorrectionMode::PostSelection] {
            let config = WheelConfig { seed: 5, ..WheelConfig::noiseless(6, 7, mode) };
            let mut rng = TrajectoryRng::new(config.seed, 0);
            let mut run = ProtocolRun::start(config.clone(), &mut rng).unwrap();
            for _ in 0..7 {
                run.perform_hop(None, &mut rng).unwrap();
            }
            let snap = run.snapshot().unwrap();
            run.finish(&mut rng).unwrap();
            let finished = DensityMatrix::from_dmatrix(
                &run.final_state().reduced_density_matrix(&[0, run.holder()]).unwrap(),
            )
            .unwrap();
            assert!(snap.rho.trace_distance(&finished) < 1e-10);
        }
    }

    #[test]
    fn zero_noise_model_is_bit_identical_to_reference_path() {
        // Reference path built from sim primitives only, sharing the outcome stream.
        let n = 6;
        let m = 9;
        let config = WheelConfig { seed: 42, ..WheelConfig::noiseless(n, m, CorrectionMode::PostSelection) };
        let run = run_protocol(&config).unwrap();

        let mut rng = TrajectoryRng::new(42, 0);
        let mut state = build_initial_state(n).unwrap();
        let mut line: Vec<usize> = (1..n).collect();
        let mut pos = 0;
        for _ in 0..m {
            if pos + 1 == line.len() {
                let holder = line[pos];
                let measured = line[..pos].to_vec();
                for &q in &measured {
                    state.reset(q, &mut rng.outcomes).unwrap();
                    state.apply_gate(&Gate::H(q)).unwrap();
                }
                let mut prev = holder;
                for &q in &measured {
                    state.apply_gate(&Gate::CZ(prev, q)).unwrap();
                    prev = q;
                }
                line = std::iter::once(holder).chain(measured).collect();
                pos = 0;
            }
            state.measure_x(line[pos], None, &mut rng.outcomes).unwrap();
            pos += 1;
        }
        state.apply_gate(&Gate::CZ(line[pos], line[pos + 1])).unwrap();
        assert_eq!(run.final_state().amplitudes(), state.amplitudes());
    }

    #[test]
    fn noisy_runs_are_deterministic() {
        let config = WheelConfig {
            n: 6,
            m: 12,
            correction_mode: CorrectionMode::Dynamic,
            noise: NoiseModel { reset_flip: 0.05, ..NoiseModel::two_qubit_dominated(0.05, 0.02) },
            seed: 9,
        };
        let a = run_trajectory(&config, 3).unwrap();
        let b = run_trajectory(&config, 3).unwrap();
        assert_eq!(a.final_state().amplitudes(), b.final_state().amplitudes());
        assert_eq!(a.record(), b.record());
        assert!((a.final_state().norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn finished_run_rejects_hops() {
        let config = WheelConfig::noiseless(4, 1, CorrectionMode::Dynamic);
        let mut run = run_protocol(&config).unwrap();
        let mut rng = TrajectoryRng::new(0, 1);
        assert!(matches!(run.perform_hop(None, &mut rng), Err(Error::RunFinished)));
    }
}
