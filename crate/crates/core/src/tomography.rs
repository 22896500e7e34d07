//! Two-qubit state tomography with readout-error mitigation.
//!
//! The reconstruction pipeline is
//! counts → empirical distribution → qubit-wise REM → simplex projection →
//! linear inversion → nearest physical density matrix.
//!
//! Settings are the nine pairs in `{X, Y, Z}²`, ordered lexicographically
//! (`XX, XY, XZ, YX, …, ZZ`). Outcome index `2·o₀ + o₁` has the first qubit as
//! the high bit; outcome bit 0 is the +1 eigenvalue.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::density::{hermitian_eigen, pauli_matrix, DensityMatrix};
use crate::error::{Error, Result};
use crate::noise::CalibrationMatrix;
use crate::sim::{basis_distribution, Basis, Pauli};
use crate::wheel::Discriminator;

/// Probabilities of the four outcomes of one setting.
pub type Outcomes = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Setting {
    pub first: Basis,
    pub second: Basis,
}

impl Setting {
    pub fn new(first: Basis, second: Basis) -> Self {
        Self { first, second }
    }

    /// Position in [`qst_settings`].
    pub fn index(self) -> usize {
        let pos = |b: Basis| Basis::ALL.iter().position(|&x| x == b).expect("basis in ALL");
        3 * pos(self.first) + pos(self.second)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.first, self.second)
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => Ok(Setting::new(a.to_string().parse()?, b.to_string().parse()?)),
            _ => Err(Error::InvalidBasis(s.to_string())),
        }
    }
}

pub fn qst_settings() -> [Setting; 9] {
    let mut out = [Setting::new(Basis::X, Basis::X); 9];
    for (i, &a) in Basis::ALL.iter().enumerate() {
        for (j, &b) in Basis::ALL.iter().enumerate() {
            out[3 * i + j] = Setting::new(a, b);
        }
    }
    out
}

const OUTCOME_LABELS: [&str; 4] = ["00", "01", "10", "11"];

/// Outcome counts for the nine settings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountsTable {
    counts: [[u64; 4]; 9],
    metadata: BTreeMap<String, String>,
}

impl CountsTable {
    pub fn new(counts: [[u64; 4]; 9]) -> Self {
        Self { counts, metadata: BTreeMap::new() }
    }

    pub fn counts(&self, setting: Setting) -> [u64; 4] {
        self.counts[setting.index()]
    }

    pub fn all_counts(&self) -> &[[u64; 4]; 9] {
        &self.counts
    }

    pub fn shots(&self, setting: Setting) -> u64 {
        self.counts(setting).iter().sum()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Keys must be non-empty without `=` or whitespace; values must not
    /// contain line breaks.
    pub fn insert_metadata(&mut self, key: &str, value: &str) -> Result<()> {
        if key.is_empty() || key.contains('=') || key.chars().any(char::is_whitespace) {
            return Err(Error::CountsFormat { line: 0, msg: format!("invalid metadata key {key:?}") });
        }
        if value.contains(['\n', '\r']) {
            return Err(Error::CountsFormat { line: 0, msg: "metadata value contains a line break".into() });
        }
        self.metadata.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Empirical outcome frequencies of a setting.
    pub fn frequencies(&self, setting: Setting) -> Result<Outcomes> {
        let shots = self.shots(setting);
        if shots == 0 {
            return Err(Error::NoShots(setting.to_string()));
        }
        Ok(self.counts(setting).map(|c| c as f64 / shots as f64))
    }

    /// Serializes to the line-oriented `setting,outcome,count` format.
    pub fn to_text(&self) -> String {
        let settings = qst_settings();
        let shots: Vec<u64> = settings.iter().map(|&s| self.shots(s)).collect();
        let mut out = String::new();
        if shots.iter().all(|&s| s == shots[0]) {
            let _ = writeln!(out, "# shots={}", shots[0]);
        } else {
            let list: Vec<String> = shots.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "# shots={}", list.join(","));
        }
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# meta {k}={v}");
        }
        out.push_str("setting,outcome,count\n");
        for s in settings {
            for (o, label) in OUTCOME_LABELS.iter().enumerate() {
                let _ = writeln!(out, "{s},{label},{}", self.counts(s)[o]);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::CountsFormat { line, msg };
        let mut table = CountsTable::default();
        let mut declared: Option<Vec<u64>> = None;
        let mut seen = [[false; 4]; 9];
        let mut header_seen = false;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            if let Some(rest) = raw.strip_prefix("# shots=") {
                let values = rest
                    .split(',')
                    .map(|v| v.parse::<u64>().map_err(|e| err(line_no, format!("bad shots value {v:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                declared = Some(match values.len() {
                    1 => vec![values[0]; 9],
                    9 => values,
                    k => return Err(err(line_no, format!("expected 1 or 9 shot values, got {k}"))),
                });
            } else if let Some(rest) = raw.strip_prefix("# meta ") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| err(line_no, "metadata line without '='".into()))?;
                table.insert_metadata(k, v).map_err(|e| err(line_no, e.to_string()))?;
            } else if raw == "setting,outcome,count" {
                header_seen = true;
            } else if raw.trim().is_empty() {
                continue;
            } else {
                if !header_seen {
                    return Err(err(line_no, format!("unexpected line before header: {raw:?}")));
                }
                let fields: Vec<&str> = raw.split(',').collect();
                if fields.len() != 3 {
                    return Err(err(line_no, format!("expected 3 fields, got {}", fields.len())));
                }
                let setting: Setting = fields[0].parse().map_err(|e: Error| err(line_no, e.to_string()))?;
                let outcome = OUTCOME_LABELS
                    .iter()
                    .position(|&l| l == fields[1])
                    .ok_or_else(|| err(line_no, format!("bad outcome {:?}", fields[1])))?;
                let count: u64 = fields[2].parse().map_err(|e| err(line_no, format!("bad count: {e}")))?;
                let i = setting.index();
                if seen[i][outcome] {
                    return Err(err(line_no, format!("duplicate row for {setting},{}", fields[1])));
                }
                seen[i][outcome] = true;
                table.counts[i][outcome] = count;
            }
        }
        let declared = declared.ok_or_else(|| err(0, "missing '# shots=' header".into()))?;
        for s in qst_settings() {
            let i = s.index();
            if seen[i].iter().any(|x| !x) {
                return Err(Error::MissingSetting(s.to_string()));
            }
            if table.shots(s) != declared[i] {
                return Err(err(0, format!("setting {s}: counts sum to {} but header says {}", table.shots(s), declared[i])));
            }
        }
        Ok(table)
    }
}

/// Applies the inverse of `cals[j]` on local qubit `j` (qubit 0 is the high
/// bit) of a `2^k`-outcome distribution, one 2×2 factor at a time.
/// The result may leave the probability simplex.
pub fn rem_correct(probs: &[f64], cals: &[CalibrationMatrix]) -> Result<Vec<f64>> {
    let k = cals.len();
    if probs.len() != 1 << k {
        return Err(Error::CalibrationCount { expected: probs.len().trailing_zeros() as usize, got: k, len: probs.len() });
    }
    let mut out = probs.to_vec();
    for (j, cal) in cals.iter().enumerate() {
        let inv = cal.inverse(j)?;
        let stride = 1 << (k - 1 - j);
        for chunk in out.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = inv[0][0] * x + inv[0][1] * y;
                *b = inv[1][0] * x + inv[1][1] * y;
            }
        }
    }
    Ok(out)
}

/// Applies per-qubit confusion matrices (the forward readout channel).
pub fn apply_confusion(probs: Outcomes, cals: &[CalibrationMatrix; 2]) -> Outcomes {
    let mut out = probs;
    for (j, cal) in cals.iter().enumerate() {
        let stride = 1 << (1 - j);
        for base in [0usize, 1, 2, 3].into_iter().filter(|b| b & stride == 0) {
            let [a, b] = cal.apply([out[base], out[base + stride]]);
            out[base] = a;
            out[base + stride] = b;
        }
    }
    out
}

/// Euclidean projection onto the probability simplex by Michelot's
/// finite active-set iteration.
pub fn michelot_project(v: &[f64]) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 1e-12 {
        return v.to_vec();
    }
    let mut active = vec![true; v.len()];
    loop {
        let count = active.iter().filter(|&&a| a).count();
        let active_sum: f64 = v.iter().zip(&active).filter(|(_, &a)| a).map(|(x, _)| x).sum();
        let shift = (active_sum - 1.0) / count as f64;
        let x: Vec<f64> = v
            .iter()
            .zip(&active)
            .map(|(&vi, &a)| if a { vi - shift } else { 0.0 })
            .collect();
        let mut changed = false;
        for (a, &xi) in active.iter_mut().zip(&x) {
            if *a && xi < 0.0 {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            return x;
        }
    }
}

fn parity_sign(outcome: usize, mask: usize) -> f64 {
    if (outcome & mask).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn basis_pauli(b: Basis) -> Pauli {
    match b {
        Basis::X => Pauli::X,
        Basis::Y => Pauli::Y,
        Basis::Z => Pauli::Z,
    }
}

/// Linear-inversion estimate ρ = ¼ Σ ⟨P⟩ P over the sixteen two-qubit Paulis.
/// Single-qubit expectations are averaged over the three compatible settings.
pub fn linear_inversion_qst(probs: &[(Setting, Outcomes)]) -> Result<DensityMatrix> {
    let mut table: [Option<Outcomes>; 9] = [None; 9];
    for &(s, p) in probs {
        table[s.index()] = Some(p);
    }
    let settings = qst_settings();
    let mut lookup = [[0.0; 4]; 9];
    for s in settings {
        lookup[s.index()] = table[s.index()].ok_or_else(|| Error::MissingSetting(s.to_string()))?;
    }
    let expectation = |s: Setting, mask: usize| -> f64 {
        lookup[s.index()].iter().enumerate().map(|(o, p)| parity_sign(o, mask) * p).sum()
    };

    let mut rho = Matrix4::<C64>::zeros();
    let ops: [Option<Basis>; 4] = [None, Some(Basis::X), Some(Basis::Y), Some(Basis::Z)];
    for a in ops {
        for b in ops {
            let value = match (a, b) {
                (None, None) => 1.0,
                (Some(a), Some(b)) => expectation(Setting::new(a, b), 0b11),
                (Some(a), None) => Basis::ALL.iter().map(|&o| expectation(Setting::new(a, o), 0b10)).sum::<f64>() / 3.0,
                (None, Some(b)) => Basis::ALL.iter().map(|&o| expectation(Setting::new(o, b), 0b01)).sum::<f64>() / 3.0,
            };
            let pa = pauli_matrix(a.map_or(Pauli::I, basis_pauli));
            let pb = pauli_matrix(b.map_or(Pauli::I, basis_pauli));
            rho += pa.kronecker(&pb) * C64::new(value / 4.0, 0.0);
        }
    }
    Ok(DensityMatrix::new(rho))
}

/// Closest PSD trace-one matrix in Frobenius norm: the spectrum is clipped
/// from the smallest eigenvalue up, with the removed mass spread evenly over
/// the kept eigenvalues. Eigenvectors are unchanged.
pub fn smolin_project(rho: &DensityMatrix) -> DensityMatrix {
    let (ascending, vectors) = hermitian_eigen(rho.matrix());
    if ascending.min() >= 0.0 {
        return rho.clone();
    }
    let projected = smolin_spectrum(ascending.as_slice());
    let diag = Matrix4::from_diagonal(&Vector4::from_iterator(projected.iter().map(|&x| C64::new(x, 0.0))));
    DensityMatrix::new(vectors * diag * vectors.adjoint())
}

/// The spectrum step of [`smolin_project`] on eigenvalues sorted ascending.
pub fn smolin_spectrum(ascending: &[f64]) -> Vec<f64> {
    let d = ascending.len();
    let mut lambda = ascending.to_vec();
    // Walk from the most negative eigenvalue; `kept` counts the untouched top.
    let mut kept = d;
    let mut carried = 0.0;
    let mut idx = 0;
    while kept > 0 && ascending[idx] + carried / (kept as f64) < 0.0 {
        carried += ascending[idx];
        lambda[idx] = 0.0;
        kept -= 1;
        idx += 1;
    }
    for l in lambda.iter_mut().skip(idx) {
        *l += carried / kept as f64;
    }
    lambda
}

/// Born distribution of a pair state in one setting.
pub fn setting_distribution(rho: &DensityMatrix, setting: Setting) -> Outcomes {
    let m = nalgebra::DMatrix::from_fn(4, 4, |r, c| rho.matrix()[(r, c)]);
    let d = basis_distribution(&m, &[setting.first, setting.second]);
    [d[0], d[1], d[2], d[3]]
}

/// Something that yields the outcome distribution the detector reports.
pub trait ShotSource {
    fn reported_distribution(&self, setting: Setting) -> Outcomes;
}

/// A pair state read out through per-qubit confusion matrices.
#[derive(Clone, Debug)]
pub struct DensitySource {
    pub rho: DensityMatrix,
    pub readout: [CalibrationMatrix; 2],
}

impl ShotSource for DensitySource {
    fn reported_distribution(&self, setting: Setting) -> Outcomes {
        apply_confusion(setting_distribution(&self.rho, setting), &self.readout)
    }
}

/// Multinomial draw of `shots` over `probs` (negatives clipped, renormalized).
pub fn multinomial<R: Rng + ?Sized>(shots: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let clipped: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let mut remaining = shots;
    let mut mass = 1.0;
    let mut out = vec![0; probs.len()];
    for (i, &p) in clipped.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p / total;
        if i + 1 == probs.len() {
            out[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
    out
}

pub fn sample_counts<S: ShotSource + ?Sized, R: Rng + ?Sized>(source: &S, shots: u64, rng: &mut R) -> CountsTable {
    let mut counts = [[0; 4]; 9];
    for s in qst_settings() {
        let c = multinomial(shots, &source.reported_distribution(s), rng);
        counts[s.index()].copy_from_slice(&c);
    }
    CountsTable::new(counts)
}

/// Which pipeline stages run. All are on by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineOptions {
    pub rem: bool,
    pub project_probabilities: bool,
    pub project_density: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { rem: true, project_probabilities: true, project_density: true }
    }
}

/// Runs REM → simplex projection → linear inversion → physical projection on
/// per-setting distributions.
pub fn reconstruct_from_distributions(
    dists: &[(Setting, Outcomes)],
    cal: &[CalibrationMatrix; 2],
    options: PipelineOptions,
) -> Result<DensityMatrix> {
    let mut processed = Vec::with_capacity(dists.len());
    for &(s, p) in dists {
        let mut v = p.to_vec();
        if options.rem {
            v = rem_correct(&v, cal)?;
        }
        if options.project_probabilities {
            v = michelot_project(&v);
        }
        processed.push((s, [v[0], v[1], v[2], v[3]]));
    }
    let rho = linear_inversion_qst(&processed)?;
    Ok(if options.project_density { smolin_project(&rho) } else { rho })
}

pub fn reconstruct(counts: &CountsTable, cal: &[CalibrationMatrix; 2], options: PipelineOptions) -> Result<DensityMatrix> {
    let dists = qst_settings()
        .into_iter()
        .map(|s| Ok((s, counts.frequencies(s)?)))
        .collect::<Result<Vec<_>>>()?;
    reconstruct_from_distributions(&dists, cal, options)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShotMode {
    /// Finite shots per setting.
    Sampled(u64),
    /// Exact reported distributions.
    Exact,
}

#[derive(Clone, Debug)]
pub struct Tomogram {
    /// Absent in exact mode.
    pub counts: Option<CountsTable>,
    pub rho: DensityMatrix,
}

/// Full pipeline on one source.
pub fn tomograph<S: ShotSource + ?Sized, R: Rng + ?Sized>(
    source: &S,
    mode: ShotMode,
    cal: &[CalibrationMatrix; 2],
    options: PipelineOptions,
    rng: &mut R,
) -> Result<Tomogram> {
    match mode {
        ShotMode::Exact => {
            let dists: Vec<_> = qst_settings().into_iter().map(|s| (s, source.reported_distribution(s))).collect();
            Ok(Tomogram { counts: None, rho: reconstruct_from_distributions(&dists, cal, options)? })
        }
        ShotMode::Sampled(shots) => {
            if shots == 0 {
                return Err(Error::NoShots("all".into()));
            }
            let counts = sample_counts(source, shots, rng);
            let rho = reconstruct(&counts, cal, options)?;
            Ok(Tomogram { counts: Some(counts), rho })
        }
    }
}

/// Post-selected tomography: each setting's shots are split across buckets
/// in proportion to their weights, then sampled from each bucket's source.
/// A bucket left without shots in any setting is reported as
/// [`Error::EmptyBucket`].
pub fn tomograph_buckets<S: ShotSource, R: Rng + ?Sized>(
    buckets: &[(Discriminator, f64, S)],
    mode: ShotMode,
    cal: &[CalibrationMatrix; 2],
    options: PipelineOptions,
    rng: &mut R,
) -> Vec<(Discriminator, Result<Tomogram>)> {
    match mode {
        ShotMode::Exact => buckets
            .iter()
            .map(|(key, weight, source)| {
                let result = if *weight > 0.0 {
                    tomograph(source, ShotMode::Exact, cal, options, rng)
                } else {
                    Err(Error::EmptyBucket { z: key.z, x: key.x, setting: "all".into() })
                };
                (*key, result)
            })
            .collect(),
        ShotMode::Sampled(shots) => {
            let weights: Vec<f64> = buckets.iter().map(|b| b.1).collect();
            let mut tables = vec![[[0u64; 4]; 9]; buckets.len()];
            for s in qst_settings() {
                let split = multinomial(shots, &weights, rng);
                for (b, &bucket_shots) in split.iter().enumerate() {
                    if bucket_shots > 0 {
                        let c = multinomial(bucket_shots, &buckets[b].2.reported_distribution(s), rng);
                        tables[b][s.index()].copy_from_slice(&c);
                    }
                }
            }
            buckets
                .iter()
                .zip(tables)
                .map(|((key, _, _), counts)| {
                    let counts = CountsTable::new(counts);
                    let result = match qst_settings().into_iter().find(|&s| counts.shots(s) == 0) {
                        Some(s) => Err(Error::EmptyBucket { z: key.z, x: key.x, setting: s.to_string() }),
                        None => reconstruct(&counts, cal, options).map(|rho| Tomogram { counts: Some(counts), rho }),
                    };
                    (*key, result)
                })
                .collect()
        }
    }
}
