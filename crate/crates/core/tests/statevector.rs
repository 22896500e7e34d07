use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wheel_core::density::hermitian_eigen;
use wheel_core::sim::{Basis, Gate, StateVector};

fn state_strategy(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_filter_map("nonzero", |parts| {
        let amps: Vec<C64> = parts.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        (norm > 1e-3).then(|| StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap())
    })
}

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    prop_oneof![
        (0..n).prop_map(Gate::H),
        (0..n).prop_map(Gate::X),
        (0..n).prop_map(Gate::Z),
        (0..n, 0..n).prop_filter("distinct", |(a, b)| a != b).prop_map(|(a, b)| Gate::CZ(a, b)),
    ]
}

fn vector_distance(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #[test]
    fn gates_preserve_norm(state in state_strategy(4), gates in prop::collection::vec(gate_strategy(4), 1..40)) {
        let mut s = state;
        for g in &gates {
            s.apply_gate(g).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gates_are_involutions(state in state_strategy(4), gate in gate_strategy(4)) {
        let mut s = state.clone();
        s.apply_gate(&gate).unwrap();
        s.apply_gate(&gate).unwrap();
        prop_assert!(vector_distance(&s, &state) < 1e-10);
    }

    #[test]
    fn reduced_density_is_physical(state in state_strategy(4), a in 0usize..4, b in 0usize..4) {
        prop_assume!(a != b);
        let rho: DMatrix<C64> = state.reduced_density_matrix(&[a, b]).unwrap();
        let m = nalgebra::Matrix4::from_fn(|r, c| rho[(r, c)]);
        prop_assert!((m - m.adjoint()).camax() < 1e-12);
        prop_assert!((m.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(hermitian_eigen(&m).0.min() > -1e-10);
    }

    #[test]
    fn phase_distance_ignores_global_phase(state in state_strategy(3), theta in 0.0f64..6.283) {
        let phase = C64::from_polar(1.0, theta);
        let rotated = StateVector::from_amplitudes(state.amplitudes().iter().map(|a| a * phase).collect()).unwrap();
        prop_assert!(state.distance_up_to_phase(&rotated) < 1e-12);
    }
}

#[test]
fn born_rule_frequencies_match_exact_distribution() {
    let mut state = StateVector::zero_state(3).unwrap();
    for g in [Gate::H(0), Gate::H(1), Gate::CZ(0, 1), Gate::H(1), Gate::H(2), Gate::CZ(1, 2)] {
        state.apply_gate(&g).unwrap();
    }
    let exact = state.exact_distribution(&[(0, Basis::Z), (1, Basis::Z), (2, Basis::Z)]).unwrap();
    let samples = 100_000;
    let mut counts = [0usize; 8];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..samples {
        let mut s = state.clone();
        let mut index = 0;
        for q in 0..3 {
            index = 2 * index + s.measure_z(q, None, &mut rng).unwrap() as usize;
        }
        counts[index] += 1;
    }
    for (k, &p) in exact.iter().enumerate() {
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        let freq = counts[k] as f64 / samples as f64;
        assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "outcome {k}: {freq} vs {p}");
    }
}
