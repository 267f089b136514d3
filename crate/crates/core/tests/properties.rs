//! Randomized invariants of the linear-algebra and dynamics layers.

use mgent_core::decomposition::{schmidt_decompose, von_neumann_entropy};
use mgent_core::dynamics::{master_evolve, MasterGenerator, Propagator};
use mgent_core::linalg::{
    haar_random_unitary, max_entry_distance, partial_trace, partial_trace_matrix, trace_distance, BipartiteSpace,
    DensityOperator, HermitianOperator, PureState, Side,
};
use mgent_core::seeds::stream;
use mgent_core::{CMatrix, Tolerances, C64};
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn space() -> impl Strategy<Value = BipartiteSpace> {
    (2usize..=5, 2usize..=5).prop_map(|(m, g)| BipartiteSpace::new(m, g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pure_state_sides_share_entropy(sp in space(), seed in any::<u64>()) {
        let psi = PureState::random(sp, &mut stream(seed));
        let sm = von_neumann_entropy(&partial_trace(&psi, sp, Side::Matter).unwrap(), &tol()).unwrap();
        let sg = von_neumann_entropy(&partial_trace(&psi, sp, Side::Gravity).unwrap(), &tol()).unwrap();
        prop_assert!((sm - sg).abs() < 1e-9);
        prop_assert!(sm >= -1e-12);
        prop_assert!(sm <= (sp.dim_matter().min(sp.dim_gravity()) as f64).ln() + 1e-9);
    }

    #[test]
    fn schmidt_terms_rebuild_the_state(sp in space(), seed in any::<u64>()) {
        let psi = PureState::random(sp, &mut stream(seed));
        let sd = schmidt_decompose(&psi, sp, &mut stream(seed ^ 1), &tol()).unwrap();
        prop_assert!((psi.amplitudes() - sd.reconstruct()).norm() < 1e-9);
        let total: f64 = sd.coefficients.iter().map(|c| c * c).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(sd.coefficients.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn partial_trace_is_linear(sp in space(), seed in any::<u64>(), w in 0.0f64..1.0) {
        let mut rng = stream(seed);
        let a = DensityOperator::random(sp.total(), sp.total(), &mut rng);
        let b = DensityOperator::random(sp.total(), 2, &mut rng);
        let mix = DensityOperator::mixture(sp.total(), [(w, &a), (1.0 - w, &b)]);
        for side in [Side::Matter, Side::Gravity] {
            let lhs = partial_trace_matrix(mix.matrix(), sp, side).unwrap();
            let rhs = partial_trace_matrix(a.matrix(), sp, side).unwrap() * C64::new(w, 0.0)
                + partial_trace_matrix(b.matrix(), sp, side).unwrap() * C64::new(1.0 - w, 0.0);
            prop_assert!(max_entry_distance(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn trace_distance_is_a_metric(n in 2usize..=6, seed in any::<u64>()) {
        let mut rng = stream(seed);
        let r: Vec<DensityOperator> = (0..3).map(|k| DensityOperator::random(n, 1 + k % n, &mut rng)).collect();
        let d = |i: usize, j: usize| trace_distance(&r[i], &r[j]).unwrap();
        prop_assert!(d(0, 0) < 1e-12);
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        prop_assert!(d(0, 1) <= 1.0 + 1e-12);
    }

    #[test]
    fn entropy_is_unitarily_invariant(n in 2usize..=6, rank in 1usize..=6, seed in any::<u64>()) {
        let mut rng = stream(seed);
        let rho = DensityOperator::random(n, rank.min(n), &mut rng);
        let u = haar_random_unitary(n, &mut rng).unwrap();
        let rotated = DensityOperator::new(u.conjugate(rho.matrix())).unwrap();
        let ds = von_neumann_entropy(&rotated, &tol()).unwrap() - von_neumann_entropy(&rho, &tol()).unwrap();
        prop_assert!(ds.abs() < 1e-9);
    }

    #[test]
    fn unitary_evolution_composes(n in 2usize..=6, seed in any::<u64>(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let h = HermitianOperator::random_unit(n, &mut stream(seed));
        let p = Propagator::new(&h).unwrap();
        let lhs = p.unitary(t1).matrix() * p.unitary(t2).matrix();
        prop_assert!(max_entry_distance(&lhs, p.unitary(t1 + t2).matrix()) < 1e-12);
    }

    #[test]
    fn master_evolution_composes(seed in any::<u64>(), t1 in 0.05f64..0.5, t2 in 0.05f64..0.5) {
        let mut rng = stream(seed);
        let rho = DensityOperator::random(3, 3, &mut rng);
        let gen = MasterGenerator::dephasing(
            HermitianOperator::random_unit(3, &mut rng),
            HermitianOperator::diagonal(&[0.0, 1.0, 2.0]).matrix().clone(),
            0.4,
        )
        .unwrap();
        let dt = 1e-3;
        let mid = master_evolve(&rho, &gen, 0.0, t1, dt, &tol()).unwrap();
        let split = master_evolve(&mid, &gen, t1, t1 + t2, dt, &tol()).unwrap();
        let direct = master_evolve(&rho, &gen, 0.0, t1 + t2, dt, &tol()).unwrap();
        // Both are RK4 approximations of the same map; their gap is integrator error.
        prop_assert!(trace_distance(&split, &direct).unwrap() < 1e-10);
        prop_assert!((split.matrix().trace().re - 1.0).abs() < 1e-10);
    }
}

#[test]
fn haar_twirl_averages_to_the_maximally_mixed_state() {
    let n = 3;
    let mut rng = stream(17);
    let rho = DensityOperator::random(n, 1, &mut rng);
    let samples = 4000;
    let mut mean = CMatrix::zeros(n, n);
    for _ in 0..samples {
        let u = haar_random_unitary(n, &mut rng).unwrap();
        mean += u.conjugate(rho.matrix());
    }
    mean /= C64::new(samples as f64, 0.0);
    let target = CMatrix::identity(n, n) / C64::new(n as f64, 0.0);
    // Entries fluctuate at ~1/sqrt(samples).
    assert!(max_entry_distance(&mean, &target) < 0.03);
}
