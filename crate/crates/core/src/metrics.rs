//! Entanglement and fidelity witnesses for the teleported pair, plus
//! percentile bootstrap intervals over tomography counts.

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::density::{hermitian_eigen, DensityMatrix, PairVector};
use crate::error::{Error, Result};
use crate::rng::{derive, Domain};
use crate::tomography::{multinomial, qst_settings, CountsTable};
use crate::wheel::{byproduct_for, Discriminator};

/// Which qubit of the pair the partial transpose acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

pub fn partial_transpose(rho: &DensityMatrix, subsystem: Subsystem) -> Matrix4<C64> {
    let m = rho.matrix();
    Matrix4::from_fn(|r, c| {
        let (a, b) = (r >> 1, r & 1);
        let (a2, b2) = (c >> 1, c & 1);
        match subsystem {
            Subsystem::First => m[(2 * a2 + b, 2 * a + b2)],
            Subsystem::Second => m[(2 * a + b2, 2 * a2 + b)],
        }
    })
}

/// Absolute sum of the negative eigenvalues of ρ^{T_a}.
pub fn negativity(rho: &DensityMatrix) -> f64 {
    let (evals, _) = hermitian_eigen(&partial_transpose(rho, Subsystem::First));
    evals.iter().filter(|&&l| l < 0.0).sum::<f64>().abs()
}

/// (‖ρ^{T_a}‖₁ − 1) / 2 with the trace norm taken from singular values.
pub fn negativity_trace_norm(rho: &DensityMatrix) -> f64 {
    let pt = partial_transpose(rho, Subsystem::First);
    let norm: f64 = pt.singular_values().iter().sum();
    0.5 * (norm - 1.0)
}

/// ⟨target|ρ|target⟩ for a normalized pure target.
pub fn fidelity_pure(rho: &DensityMatrix, target: &PairVector) -> f64 {
    (target.adjoint() * rho.matrix() * target)[(0, 0)].re
}

/// `(I ⊗ H^m Z^z X^x)|φ(P₂)⟩`, the ideal uncorrected state of one variant.
pub fn variant_target(m: usize, d: Discriminator) -> PairVector {
    byproduct_for(m, d).apply_to_graph_pair()
}

pub fn variant_targets(m: usize, discriminators: &[Discriminator]) -> Vec<PairVector> {
    discriminators.iter().map(|&d| variant_target(m, d)).collect()
}

/// Discriminators reachable after `m` hops.
pub fn possible_discriminators(m: usize) -> Vec<Discriminator> {
    match m {
        0 => vec![Discriminator::default()],
        1 => vec![Discriminator::new(false, false), Discriminator::new(true, false)],
        _ => Discriminator::ALL.to_vec(),
    }
}

/// Weighted mixture of pure variant states. Weights must sum to 1.
pub fn mixed_variant_density(variants: &[(PairVector, f64)]) -> Result<DensityMatrix> {
    let total: f64 = variants.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightMismatch(total));
    }
    let mut out = Matrix4::zeros();
    for (psi, w) in variants {
        out += psi * psi.adjoint() * C64::new(*w, 0.0);
    }
    Ok(DensityMatrix::new(out))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapResult {
    pub point_estimate: f64,
    /// Re-estimated values sorted ascending.
    pub resamples: Vec<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Half of `ci_high − ci_low`.
    pub epsilon: f64,
}

impl BootstrapResult {
    fn from_values(point_estimate: f64, mut resamples: Vec<f64>) -> Self {
        resamples.sort_by(f64::total_cmp);
        let (lo, hi) = percentile_indices(resamples.len());
        let ci_low = resamples[lo - 1];
        let ci_high = resamples[hi - 1];
        Self { point_estimate, resamples, ci_low, ci_high, epsilon: 0.5 * (ci_high - ci_low) }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// 1-indexed ordered-sample positions `(⌈0.025N⌉, ⌊0.975N⌋)` bounding the
/// 95 % interval.
pub fn percentile_indices(n: usize) -> (usize, usize) {
    let lo = (25 * n).div_ceil(1000).max(1);
    let hi = (975 * n / 1000).max(lo);
    (lo, hi)
}

/// Multinomial resample of every setting at its original shot count.
pub fn resample_counts<R: Rng + ?Sized>(counts: &CountsTable, rng: &mut R) -> CountsTable {
    let mut out = [[0u64; 4]; 9];
    for s in qst_settings() {
        let shots = counts.shots(s);
        if shots == 0 {
            continue;
        }
        let freq = counts.counts(s).map(|c| c as f64 / shots as f64);
        out[s.index()].copy_from_slice(&multinomial(shots, &freq, rng));
    }
    CountsTable::new(out)
}

/// Bootstrap for an estimator returning several values at once; one
/// [`BootstrapResult`] per value. Each table is resampled independently and
/// resample `i` draws from its own stream derived from a seed taken from `rng`.
pub fn bootstrap_many<F, R>(tables: &[CountsTable], estimator: F, n: usize, rng: &mut R) -> Result<Vec<BootstrapResult>>
where
    F: Fn(&[CountsTable]) -> Result<Vec<f64>> + Sync,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::BootstrapSize(n));
    }
    for table in tables {
        if let Some(s) = qst_settings().into_iter().find(|&s| table.shots(s) == 0) {
            return Err(Error::NoShots(s.to_string()));
        }
    }
    let point = estimator(tables)?;
    let base_seed: u64 = rng.random();
    let outcomes: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut stream = derive(base_seed, Domain::Bootstrap, i as u64);
            let resampled: Vec<CountsTable> = tables.iter().map(|t| resample_counts(t, &mut stream)).collect();
            estimator(&resampled)
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); point.len()];
    for (index, outcome) in outcomes.into_iter().enumerate() {
        let values = outcome.map_err(|e| Error::Bootstrap { index, source: Box::new(e) })?;
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
    }
    Ok(point
        .into_iter()
        .zip(columns)
        .map(|(p, col)| BootstrapResult::from_values(p, col))
        .collect())
}

pub fn bootstrap_ci<F, R>(counts: &CountsTable, estimator: F, n: usize, rng: &mut R) -> Result<BootstrapResult>
where
    F: Fn(&CountsTable) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    let mut results = bootstrap_many(std::slice::from_ref(counts), |t| Ok(vec![estimator(&t[0])?]), n, rng)?;
    Ok(results.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::graph_pair;
    use nalgebra::Vector4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn bell() -> PairVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Vector4::new(c(h), c(0.0), c(0.0), c(h))
    }

    fn werner(p: f64) -> DensityMatrix {
        let pure = DensityMatrix::from_pure(&bell());
        DensityMatrix::weighted_sum([(&pure, p), (&DensityMatrix::maximally_mixed(), 1.0 - p)])
    }

    #[test]
    fn partial_transpose_examples() {
        let rho = DensityMatrix::from_pure(&graph_pair());
        let pt = partial_transpose(&rho, Subsystem::First);
        let (evals, _) = hermitian_eigen(&pt);
        assert!((evals[0] + 0.5).abs() < 1e-12);

        let twice = partial_transpose(&DensityMatrix::new(pt), Subsystem::First);
        assert_eq!(twice, *rho.matrix());
        assert!((pt.trace() - c(1.0)).norm() < 1e-15);

        // Product state: ρ_a^T ⊗ ρ_b stays PSD.
        let a = nalgebra::Matrix2::new(c(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c(0.3));
        let b = nalgebra::Matrix2::new(c(0.4), C64::new(0.0, 0.3), C64::new(0.0, -0.3), c(0.6));
        let prod = DensityMatrix::new(a.kronecker(&b));
        let pt = partial_transpose(&prod, Subsystem::First);
        assert!((pt - a.transpose().kronecker(&b)).camax() < 1e-15);
        assert!(hermitian_eigen(&pt).0.min() > -1e-12);
    }

    #[test]
    fn negativity_examples() {
        assert!((negativity(&DensityMatrix::from_pure(&graph_pair())) - 0.5).abs() < 1e-12);
        let product = Vector4::new(c(0.6), c(0.8), c(0.0), c(0.0));
        assert!(negativity(&DensityMatrix::from_pure(&product)) < 1e-12);
        assert!((negativity(&werner(0.5)) - 0.125).abs() < 1e-12);
        assert!((negativity_trace_norm(&werner(0.5)) - 0.125).abs() < 1e-12);
        assert!(negativity(&werner(1.0 / 3.0)) < 1e-12);
        let subsystem_b = partial_transpose(&werner(0.5), Subsystem::Second);
        assert!((hermitian_eigen(&subsystem_b).0.min() + 0.125).abs() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let sigma = DensityMatrix::from_pure(&graph_pair());
        assert!((fidelity_pure(&sigma, &graph_pair()) - 1.0).abs() < 1e-14);
        assert!((fidelity_pure(&DensityMatrix::maximally_mixed(), &graph_pair()) - 0.25).abs() < 1e-15);
        // One uncorrected hop turns |φ(P₂)⟩ into the Bell state (|00⟩+|11⟩)/√2.
        let hopped = variant_target(1, Discriminator::default());
        assert!((hopped - bell()).norm() < 1e-15);
        assert!(fidelity_pure(&DensityMatrix::from_pure(&hopped), &graph_pair()).abs() < 1e-15);
    }

    #[test]
    fn variant_target_examples() {
        assert!((variant_target(4, Discriminator::default()) - graph_pair()).norm() < 1e-15);
        for m in [2usize, 3] {
            let targets = variant_targets(m, &Discriminator::ALL);
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let f = (targets[i].adjoint() * targets[j])[(0, 0)].norm_sqr();
                    assert!(f < 1.0 - 1e-9, "m={m} ({i},{j}) overlap {f}");
                }
            }
        }
    }

    #[test]
    fn mixture_examples() {
        let single = mixed_variant_density(&[(graph_pair(), 1.0)]).unwrap();
        assert!((single.matrix() - DensityMatrix::from_pure(&graph_pair()).matrix()).camax() < 1e-15);

        let uniform: Vec<_> = variant_targets(3, &Discriminator::ALL).into_iter().map(|v| (v, 0.25)).collect();
        let mixed = mixed_variant_density(&uniform).unwrap();
        assert!((mixed.trace() - c(1.0)).norm() < 1e-14);
        assert!(negativity(&mixed) < 1e-12);

        assert!(matches!(mixed_variant_density(&[(graph_pair(), 0.6)]), Err(Error::WeightMismatch(_))));
    }

    #[test]
    fn percentile_positions() {
        assert_eq!(percentile_indices(200), (5, 195));
        assert_eq!(percentile_indices(1000), (25, 975));
        assert_eq!(percentile_indices(2), (1, 1));
    }

    #[test]
    fn deterministic_counts_have_zero_width() {
        let counts = CountsTable::new([[1000, 0, 0, 0]; 9]);
        let r = bootstrap_ci(&counts, |t| Ok(t.counts(qst_settings()[0])[0] as f64), 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert_eq!(r.resamples.len(), 200);
    }

    #[test]
    fn bootstrap_is_reproducible_and_ordered() {
        let counts = CountsTable::new([[300, 200, 100, 400]; 9]);
        let est = |t: &CountsTable| Ok(t.frequencies(qst_settings()[4])?[0]);
        let a = bootstrap_ci(&counts, est, 200, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = bootstrap_ci(&counts, est, 200, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.resamples.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a.ci_low, a.resamples[4]);
        assert_eq!(a.ci_high, a.resamples[194]);
        // Binomial(1000, 0.3): the 95 % half-width is about 1.96·√(0.21/1000).
        assert!((a.epsilon - 1.96 * (0.21f64 / 1000.0).sqrt()).abs() < 0.006);
    }

    #[test]
    fn bootstrap_errors() {
        let counts = CountsTable::new([[10, 0, 0, 0]; 9]);
        assert!(matches!(
            bootstrap_ci(&counts, |_| Ok(0.0), 1, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::BootstrapSize(1))
        ));
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let result = bootstrap_ci(
            &counts,
            |_| {
                if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 0 {
                    Ok(0.0)
                } else {
                    Err(Error::NoShots("XX".into()))
                }
            },
            10,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert!(matches!(result, Err(Error::Bootstrap { .. })));
        let empty = CountsTable::default();
        assert!(matches!(
            bootstrap_ci(&empty, |_| Ok(0.0), 10, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::NoShots(_))
        ));
    }
}
