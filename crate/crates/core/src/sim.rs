//! Dense statevector engine.
//!
//! Qubit 0 is the most significant bit of an amplitude index, so qubit `q` of
//! an `n`-qubit register toggles index bit `n - 1 - q`. The same convention is
//! used for outcome strings and for reduced density matrices: the first listed
//! qubit is the most significant local bit.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 24;

/// Outcome probabilities below this are treated as impossible.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    H(usize),
    X(usize),
    Z(usize),
    CZ(usize, usize),
}

impl Gate {
    pub fn arity(&self) -> usize {
        match self {
            Gate::CZ(..) => 2,
            _ => 1,
        }
    }

    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Z(q) => (q, None),
            Gate::CZ(a, b) => (a, Some(b)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Single-qubit measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn label(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }

    /// Rotation taking this basis' eigenvectors to the computational basis,
    /// with the +1 eigenvector mapped to |0⟩. Y uses S† followed by H.
    pub fn rotation(self) -> [[C64; 2]; 2] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Basis::Z => [[ONE, ZERO], [ZERO, ONE]],
            Basis::X => [[h, h], [h, -h]],
            // H · S† = 1/√2 [[1, -i], [1, i]]
            Basis::Y => [[h, C64::new(0.0, -FRAC_1_SQRT_2)], [h, C64::new(0.0, FRAC_1_SQRT_2)]],
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Basis::X),
            "Y" | "y" => Ok(Basis::Y),
            "Z" | "z" => Ok(Basis::Z),
            other => Err(Error::InvalidBasis(other.to_string())),
        }
    }
}

/// Undirected simple graph used to build graph states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for (u, v) in edges {
            if u == v || u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidEdge(u, v));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateEdge(u, v));
            }
            list.push((u, v));
        }
        Ok(Self { vertex_count, edges: list })
    }

    /// Path 0 – 1 – … – (n−1).
    pub fn path(n: usize) -> Self {
        Self {
            vertex_count: n,
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(num_qubits));
        }
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = ONE;
        Ok(Self { num_qubits, amplitudes })
    }

    /// Wraps an explicit amplitude vector. The norm must be 1 within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::AmplitudeLength(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(num_qubits));
        }
        let state = Self { num_qubits, amplitudes };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::QubitIndex { index: q, num_qubits: self.num_qubits });
        }
        Ok(())
    }

    #[inline]
    fn stride(&self, q: usize) -> usize {
        1 << (self.num_qubits - 1 - q)
    }

    /// Calls `f(a0, a1)` for every amplitude pair differing only in qubit `q`.
    #[inline]
    fn for_each_pair(&mut self, q: usize, mut f: impl FnMut(&mut C64, &mut C64)) {
        let s = self.stride(q);
        for chunk in self.amplitudes.chunks_exact_mut(2 * s) {
            let (lo, hi) = chunk.split_at_mut(s);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }

    /// Sum of |a|² over the amplitudes with qubit `q` set.
    fn probability_one_unchecked(&self, q: usize) -> f64 {
        let s = self.stride(q);
        self.amplitudes
            .chunks_exact(2 * s)
            .map(|chunk| chunk[s..].iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn probability_one(&self, q: usize) -> Result<f64> {
        self.check(q)?;
        Ok(self.probability_one_unchecked(q))
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        match *gate {
            Gate::H(q) => {
                self.check(q)?;
                let h = FRAC_1_SQRT_2;
                self.for_each_pair(q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = (x + y) * h;
                    *b = (x - y) * h;
                });
            }
            Gate::X(q) => {
                self.check(q)?;
                self.for_each_pair(q, std::mem::swap);
            }
            Gate::Z(q) => {
                self.check(q)?;
                let s = self.stride(q);
                for chunk in self.amplitudes.chunks_exact_mut(2 * s) {
                    chunk[s..].iter_mut().for_each(|a| *a = -*a);
                }
            }
            Gate::CZ(a, b) => {
                self.check(a)?;
                self.check(b)?;
                if a == b {
                    return Err(Error::DuplicateQubit(a));
                }
                let (outer, inner) = {
                    let (sa, sb) = (self.stride(a), self.stride(b));
                    (sa.max(sb), sa.min(sb))
                };
                for chunk in self.amplitudes.chunks_exact_mut(2 * outer) {
                    for sub in chunk[outer..].chunks_exact_mut(2 * inner) {
                        sub[inner..].iter_mut().for_each(|x| *x = -*x);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_pauli(&mut self, q: usize, pauli: Pauli) -> Result<()> {
        match pauli {
            Pauli::I => self.check(q),
            Pauli::X => self.apply_gate(&Gate::X(q)),
            Pauli::Z => self.apply_gate(&Gate::Z(q)),
            Pauli::Y => {
                self.check(q)?;
                // Y = [[0, -i], [i, 0]]
                let i = C64::i();
                self.for_each_pair(q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = -i * y;
                    *b = i * x;
                });
                Ok(())
            }
        }
    }

    /// Measures qubit `q` in the computational basis.
    ///
    /// With `forced` set the outcome is fixed (it must have nonzero
    /// probability) and `rng` is not consumed; otherwise the outcome is drawn
    /// from the Born rule using exactly one uniform variate.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, forced: Option<bool>, rng: &mut R) -> Result<bool> {
        self.check(q)?;
        let p1 = self.probability_one_unchecked(q);
        let outcome = choose_outcome(q, p1, forced, rng)?;
        let scale = 1.0 / if outcome { p1 } else { 1.0 - p1 }.sqrt();
        self.for_each_pair(q, |a, b| {
            if outcome {
                *a = ZERO;
                *b *= scale;
            } else {
                *a *= scale;
                *b = ZERO;
            }
        });
        Ok(outcome)
    }

    /// Measures qubit `q` in the Pauli-X basis; outcome `false` is |+⟩.
    pub fn measure_x<R: Rng + ?Sized>(&mut self, q: usize, forced: Option<bool>, rng: &mut R) -> Result<bool> {
        self.check(q)?;
        let s = self.stride(q);
        let p_minus: f64 = self
            .amplitudes
            .chunks_exact(2 * s)
            .map(|chunk| {
                let (lo, hi) = chunk.split_at(s);
                lo.iter().zip(hi).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
            * 0.5;
        let outcome = choose_outcome(q, p_minus, forced, rng)?;
        let p = if outcome { p_minus } else { 1.0 - p_minus };
        let scale = 0.5 / p.sqrt();
        self.for_each_pair(q, |a, b| {
            if outcome {
                let v = (*a - *b) * scale;
                *a = v;
                *b = -v;
            } else {
                let v = (*a + *b) * scale;
                *a = v;
                *b = v;
            }
        });
        Ok(outcome)
    }

    /// Resets qubit `q` to |0⟩ by a Z measurement followed by a conditional X.
    /// Returns the discarded measurement outcome.
    pub fn reset<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<bool> {
        self.check(q)?;
        let p1 = self.probability_one_unchecked(q);
        let outcome = choose_outcome(q, p1, None, rng)?;
        let scale = 1.0 / if outcome { p1 } else { 1.0 - p1 }.sqrt();
        self.for_each_pair(q, |a, b| {
            *a = if outcome { *b * scale } else { *a * scale };
            *b = ZERO;
        });
        Ok(outcome)
    }

    /// Partial trace onto `qubits`, in the listed order (first = most
    /// significant local bit).
    pub fn reduced_density_matrix(&self, qubits: &[usize]) -> Result<DMatrix<C64>> {
        let mut seen = BTreeSet::new();
        for &q in qubits {
            self.check(q)?;
            if !seen.insert(q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        let k = qubits.len();
        let dim = 1usize << k;
        let offsets: Vec<usize> = (0..dim)
            .map(|local| {
                (0..k)
                    .filter(|j| local >> (k - 1 - j) & 1 == 1)
                    .map(|j| self.stride(qubits[j]))
                    .sum()
            })
            .collect();
        let mask: usize = qubits.iter().map(|&q| self.stride(q)).sum();

        let mut acc = vec![ZERO; dim * dim];
        let mut gathered = vec![ZERO; dim];
        for base in (0..self.amplitudes.len()).filter(|i| i & mask == 0) {
            for (g, off) in gathered.iter_mut().zip(&offsets) {
                *g = self.amplitudes[base + off];
            }
            if gathered.iter().all(|a| *a == ZERO) {
                continue;
            }
            for r in 0..dim {
                let ar = gathered[r];
                if ar == ZERO {
                    continue;
                }
                for c in r..dim {
                    acc[r * dim + c] += ar * gathered[c].conj();
                }
            }
        }
        Ok(DMatrix::from_fn(dim, dim, |r, c| {
            if r <= c {
                acc[r * dim + c]
            } else {
                acc[c * dim + r].conj()
            }
        }))
    }

    /// Born-rule distribution of measuring each listed qubit in its basis,
    /// all other qubits traced out. Outcome bit 0 is the +1 eigenvalue.
    pub fn exact_distribution(&self, setting: &[(usize, Basis)]) -> Result<Vec<f64>> {
        let qubits: Vec<usize> = setting.iter().map(|&(q, _)| q).collect();
        let rho = self.reduced_density_matrix(&qubits)?;
        let bases: Vec<Basis> = setting.iter().map(|&(_, b)| b).collect();
        Ok(basis_distribution(&rho, &bases))
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// min over φ of ‖self − e^{iφ}·other‖.
    pub fn distance_up_to_phase(&self, other: &StateVector) -> f64 {
        let overlap = self.inner(other);
        let phase = if overlap.norm() > 0.0 { overlap.conj() / overlap.norm() } else { C64::new(1.0, 0.0) };
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Extracts the two-qubit factor on `(a, b)` of a state that is a product
    /// of that pair with the remaining register. Errors if it is not.
    pub fn extract_pair(&self, pair: (usize, usize)) -> Result<[C64; 4]> {
        let (a, b) = pair;
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(Error::DuplicateQubit(a));
        }
        let (sa, sb) = (self.stride(a), self.stride(b));
        let offsets = [0, sb, sa, sa + sb];
        let mask = sa | sb;
        // Largest-weight configuration of the remaining qubits fixes the factor.
        let base = (0..self.amplitudes.len())
            .filter(|i| i & mask == 0)
            .max_by(|&i, &j| {
                let wi: f64 = offsets.iter().map(|o| self.amplitudes[i + o].norm_sqr()).sum();
                let wj: f64 = offsets.iter().map(|o| self.amplitudes[j + o].norm_sqr()).sum();
                wi.total_cmp(&wj)
            })
            .expect("register has at least two qubits");
        let mut pair_amps = offsets.map(|o| self.amplitudes[base + o]);
        let norm: f64 = pair_amps.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        pair_amps.iter_mut().for_each(|x| *x /= norm);

        let rho = self.reduced_density_matrix(&[a, b])?;
        let v = nalgebra::DVector::from_row_slice(&pair_amps);
        let overlap = (v.adjoint() * &rho * &v)[(0, 0)].re;
        if (overlap - 1.0).abs() > 1e-9 {
            return Err(Error::NotProduct(vec![a, b]));
        }
        Ok(pair_amps)
    }
}

fn choose_outcome<R: Rng + ?Sized>(q: usize, p1: f64, forced: Option<bool>, rng: &mut R) -> Result<bool> {
    match forced {
        Some(outcome) => {
            let p = if outcome { p1 } else { 1.0 - p1 };
            if p < PROBABILITY_FLOOR {
                return Err(Error::ImpossibleOutcome { qubit: q, outcome: outcome as u8 });
            }
            Ok(outcome)
        }
        None => Ok(rng.random::<f64>() < p1),
    }
}

/// Graph state Π CZ_(u,v) |+⟩^⊗|V|.
pub fn build_graph_state(graph: &Graph) -> Result<StateVector> {
    let mut state = StateVector::zero_state(graph.vertex_count())?;
    for q in 0..graph.vertex_count() {
        state.apply_gate(&Gate::H(q))?;
    }
    for &(u, v) in graph.edges() {
        state.apply_gate(&Gate::CZ(u, v))?;
    }
    Ok(state)
}

/// Outcome distribution of a k-qubit density matrix measured qubit-wise in
/// `bases` (first basis acts on the most significant local qubit).
pub fn basis_distribution(rho: &DMatrix<C64>, bases: &[Basis]) -> Vec<f64> {
    let mut u = DMatrix::from_element(1, 1, ONE);
    for b in bases {
        let r = b.rotation();
        let m = DMatrix::from_fn(2, 2, |i, j| r[i][j]);
        u = u.kronecker(&m);
    }
    let rotated = &u * rho * u.adjoint();
    (0..rotated.nrows()).map(|i| rotated[(i, i)].re).collect()
}
