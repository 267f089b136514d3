//! Shipped models: the partitioned box, seeded toy matter⊗gravity systems and
//! symmetry demonstrations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::von_neumann_entropy;
use crate::dynamics::{assemble_hamiltonian, reduced_matter_trajectory};
use crate::events::{declare, reset, SystemState, Variant};
use crate::linalg::{
    commutator_norm, partial_trace, tensor_state, BipartiteSpace, DensityOperator, HermitianOperator, PureState, Side,
    UnitaryOperator,
};
use crate::seeds::stream;
use crate::{CMatrix, CVector, Error, Result, Tolerances, C64};

/// Box of `n_sites` positions split into a left and a right half.
#[derive(Debug, Clone)]
pub struct PartitionBoxModel {
    n_sites: usize,
    left_projector: CMatrix,
    right_projector: CMatrix,
}

impl PartitionBoxModel {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 || !n_sites.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "n_sites must be even and positive, got {n_sites}"
            )));
        }
        let half = n_sites / 2;
        let indicator = |left: bool| {
            CMatrix::from_fn(n_sites, n_sites, |i, j| {
                if i == j && ((i < half) == left) {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        };
        Ok(Self {
            n_sites,
            left_projector: indicator(true),
            right_projector: indicator(false),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn left_projector(&self) -> &CMatrix {
        &self.left_projector
    }

    pub fn right_projector(&self) -> &CMatrix {
        &self.right_projector
    }

    /// ‖P_L ψ‖².
    pub fn left_probability(&self, psi: &CVector) -> Result<f64> {
        crate::linalg::check_len(psi.len(), self.n_sites, "box wave vector")?;
        Ok((&self.left_projector * psi).norm_squared() / psi.norm_squared())
    }

    /// Unrecorded left/right measurement: `P_L|ψ⟩⟨ψ|P_L + P_R|ψ⟩⟨ψ|P_R`.
    pub fn measure_left_right(&self, psi: &CVector) -> Result<DensityOperator> {
        crate::linalg::check_len(psi.len(), self.n_sites, "box wave vector")?;
        let rho = DensityOperator::from_pure_vector(psi)?;
        let m = rho.matrix();
        let out = &self.left_projector * m * &self.left_projector + &self.right_projector * m * &self.right_projector;
        Ok(DensityOperator::from_raw(out))
    }

    /// `(ψ_L + ψ_R)/√2` with each half uniform.
    pub fn symmetric_superposition(&self) -> CVector {
        CVector::from_element(self.n_sites, C64::new(1.0 / (self.n_sites as f64).sqrt(), 0.0))
    }
}

/// Seeded toy model: `H = diag(matter) ⊗ I + I ⊗ diag(gravity) + g R(seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModelSpec {
    pub dim_matter: usize,
    pub dim_gravity: usize,
    pub coupling_strength: f64,
    pub seed: u64,
    pub matter_spectrum: Vec<f64>,
    pub gravity_spectrum: Vec<f64>,
}

impl Default for ToyModelSpec {
    /// 3×3, linear spectra (0, 1, 2), g = 0.5, seed 42.
    fn default() -> Self {
        Self {
            dim_matter: 3,
            dim_gravity: 3,
            coupling_strength: 0.5,
            seed: 42,
            matter_spectrum: vec![0.0, 1.0, 2.0],
            gravity_spectrum: vec![0.0, 1.0, 2.0],
        }
    }
}

impl ToyModelSpec {
    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling_strength = g;
        self
    }

    pub fn space(&self) -> Result<BipartiteSpace> {
        BipartiteSpace::new(self.dim_matter, self.dim_gravity)
    }
}

/// `R(seed)` is a random Hermitian matrix of unit Frobenius norm drawn from
/// `ChaCha8Rng::seed_from_u64(seed)`.
pub fn build_toy_model(spec: &ToyModelSpec) -> Result<(BipartiteSpace, HermitianOperator)> {
    if spec.dim_matter < 2 || spec.dim_gravity < 2 {
        return Err(Error::InvalidArgument(format!(
            "toy model dims must be ≥ 2, got {}x{}",
            spec.dim_matter, spec.dim_gravity
        )));
    }
    crate::linalg::check_len(spec.matter_spectrum.len(), spec.dim_matter, "matter spectrum")?;
    crate::linalg::check_len(spec.gravity_spectrum.len(), spec.dim_gravity, "gravity spectrum")?;
    let space = spec.space()?;
    let r = HermitianOperator::random_unit(space.total(), &mut stream(spec.seed));
    let h_int = HermitianOperator::from_raw(r.matrix() * C64::new(spec.coupling_strength, 0.0));
    let h = assemble_hamiltonian(
        &HermitianOperator::diagonal(&spec.matter_spectrum),
        &HermitianOperator::diagonal(&spec.gravity_spectrum),
        &h_int,
    )?;
    Ok((space, h))
}

/// Shipped unentangled start: uniform superposition on matter ⊗ |0⟩ on gravity.
pub fn toy_product_state(space: BipartiteSpace) -> PureState {
    let matter = CVector::from_element(space.dim_matter(), C64::new(1.0, 0.0));
    let mut gravity = CVector::zeros(space.dim_gravity());
    gravity[0] = C64::new(1.0, 0.0);
    tensor_state(&matter, &gravity, space).expect("shipped factors are nonzero and sized")
}

/// Shipped entangled start: a seeded unitarily-invariant random state.
pub fn toy_entangled_state(space: BipartiteSpace, seed: u64) -> PureState {
    PureState::random(space, &mut stream(seed))
}

/// Matter-gravity entanglement entropy along the never-reset evolution of a
/// product initial state (taken to be given at t = 0).
pub fn entanglement_growth_curve(
    spec: &ToyModelSpec,
    psi0: &PureState,
    times: &[f64],
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    let (space, h) = build_toy_model(spec)?;
    crate::linalg::check_len(psi0.dim(), space.total(), "initial state")?;
    let s0 = von_neumann_entropy(&partial_trace(psi0, space, Side::Matter)?, tol)?;
    if s0 >= 1e-10 {
        return Err(Error::Precondition(format!(
            "initial state must be a product state, its entanglement entropy is {s0:.3e}"
        )));
    }
    reduced_matter_trajectory(&PureState::from_raw(psi0.amplitudes().clone(), space), &h, 0.0, times)?
        .iter()
        .map(|rho| von_neumann_entropy(rho, tol))
        .collect()
}

/// Parity `diag(1, −1, 1, …)` on an `n`-level system.
pub fn parity(n: usize) -> UnitaryOperator {
    let d: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    UnitaryOperator::from_raw(HermitianOperator::diagonal(&d).matrix().clone())
}

/// Reversal `|i⟩ ↦ |n − 1 − i⟩` on an `n`-level system.
pub fn swap(n: usize) -> UnitaryOperator {
    UnitaryOperator::from_raw(CMatrix::from_fn(n, n, |i, j| {
        if i + j == n - 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// Matter-side symmetry extended by the identity on gravity.
pub fn matter_symmetry_on_total(u_matter: &UnitaryOperator, space: BipartiteSpace) -> Result<UnitaryOperator> {
    crate::linalg::check_len(u_matter.dim(), space.dim_matter(), "matter symmetry")?;
    Ok(u_matter.tensor_identity(space.dim_gravity()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub variant: Variant,
    /// ‖[U, ρ]‖ of the declaring (matter-side) state.
    pub precondition_norm: f64,
    /// ‖[U, event projector]‖ per event.
    pub event_norms: Vec<f64>,
    /// ‖[U, post-reset matter state]‖ per event.
    pub reset_norms: Vec<f64>,
    pub max_event_norm: f64,
    pub max_reset_norm: f64,
}

/// Runs one declaration on a symmetric state and reports how each event and
/// each possible reset outcome commutes with the symmetry.
///
/// `u_sym` acts on the matter side. For the alternative variant `state` is the
/// total pure state and the precondition is checked on its matter reduction.
pub fn symmetry_demo<R: Rng + ?Sized>(
    u_sym: &UnitaryOperator,
    state: &SystemState,
    variant: Variant,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<SymmetryReport> {
    let rho = state.matter_density()?;
    let precondition_norm = commutator_norm(u_sym.matrix(), rho.matrix())?;
    if precondition_norm >= 1e-10 {
        return Err(Error::Precondition(format!(
            "symmetry does not commute with the state: ‖[U, ρ]‖ = {precondition_norm:.3e}"
        )));
    }
    let events = declare(variant, state, rng, tol)?;
    let mut event_norms = Vec::with_capacity(events.len());
    let mut reset_norms = Vec::with_capacity(events.len());
    for (k, ev) in events.events().iter().enumerate() {
        event_norms.push(commutator_norm(u_sym.matrix(), &ev.matter_projector())?);
        let after = reset(&events, k)?.matter_density()?;
        reset_norms.push(commutator_norm(u_sym.matrix(), after.matrix())?);
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(SymmetryReport {
        variant,
        precondition_norm,
        max_event_norm: max(&event_norms),
        max_reset_norm: max(&reset_norms),
        event_norms,
        reset_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::shannon_entropy;
    use crate::linalg::{hermiticity_deviation, random_complex_vector};
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn box_projectors_are_complementary() {
        let b = PartitionBoxModel::new(6).unwrap();
        let sum = b.left_projector() + b.right_projector();
        assert_eq!(sum, CMatrix::identity(6, 6));
        assert_eq!((b.left_projector() * b.right_projector()).norm(), 0.0);
        assert_eq!(b.left_projector().trace().re, 3.0);
        assert!(PartitionBoxModel::new(5).is_err());
        assert!(PartitionBoxModel::new(0).is_err());
    }

    #[test]
    fn left_localized_state_is_untouched() {
        let b = PartitionBoxModel::new(8).unwrap();
        let psi = CVector::from_fn(8, |i, _| {
            if i < 4 {
                C64::new(i as f64 + 1.0, 0.5)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let out = b.measure_left_right(&psi).unwrap();
        let pure = DensityOperator::from_pure_vector(&psi).unwrap();
        assert!(crate::linalg::max_entry_distance(out.matrix(), pure.matrix()) < 1e-15);
        assert!(von_neumann_entropy(&out, &tol()).unwrap() < 1e-12);
    }

    #[test]
    fn symmetric_superposition_gains_ln2() {
        let b = PartitionBoxModel::new(10).unwrap();
        let out = b.measure_left_right(&b.symmetric_superposition()).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&out, &tol()).unwrap(), 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn asymmetric_state_matches_binary_entropy() {
        let b = PartitionBoxModel::new(12).unwrap();
        for seed in 0..10 {
            let psi = random_complex_vector(12, &mut stream(seed));
            let p = b.left_probability(&psi).unwrap();
            let expected = shannon_entropy(&[p, 1.0 - p], 0.0);
            let out = b.measure_left_right(&psi).unwrap();
            assert_abs_diff_eq!(out.matrix().trace().re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(von_neumann_entropy(&out, &tol()).unwrap(), expected, epsilon = 1e-9);
        }
        assert!(b.measure_left_right(&CVector::zeros(4)).is_err());
    }

    #[test]
    fn toy_model_basics() {
        let spec = ToyModelSpec::default().with_coupling(0.0);
        let (_, h) = build_toy_model(&spec).unwrap();
        let off_diag = h
            .matrix()
            .iter()
            .enumerate()
            .filter(|(k, z)| k % 10 != 0 && z.norm() > 0.0)
            .count();
        assert_eq!(off_diag, 0);

        let spec = ToyModelSpec::default();
        let (_, a) = build_toy_model(&spec).unwrap();
        let (_, b) = build_toy_model(&spec).unwrap();
        assert_eq!(a, b);

        let spec = ToyModelSpec {
            dim_matter: 2,
            dim_gravity: 2,
            matter_spectrum: vec![0.0, 1.0],
            gravity_spectrum: vec![0.0, 1.0],
            ..ToyModelSpec::default()
        };
        let (_, h) = build_toy_model(&spec).unwrap();
        assert!(hermiticity_deviation(h.matrix()) < 1e-12);

        let bad = ToyModelSpec {
            matter_spectrum: vec![0.0],
            ..ToyModelSpec::default()
        };
        assert!(build_toy_model(&bad).is_err());
    }

    #[test]
    fn growth_curve_shape() {
        let spec = ToyModelSpec::default();
        let space = spec.space().unwrap();
        let psi0 = toy_product_state(space);
        let s = entanglement_growth_curve(&spec, &psi0, &[0.0, 0.2], &tol()).unwrap();
        assert!(s[0] < 1e-10);
        // Frozen from an independent expm + partial-trace oracle: S(0.2) = 1.9019e-3.
        assert!(s[1] > 1.8e-3);

        let flat =
            entanglement_growth_curve(&spec.clone().with_coupling(0.0), &psi0, &[0.0, 0.5, 1.0], &tol()).unwrap();
        assert!(flat.iter().all(|&x| x < 1e-10));

        let phased = entanglement_growth_curve(&spec, &psi0.with_phase(1.1), &[0.2], &tol()).unwrap();
        assert_abs_diff_eq!(phased[0], s[1], epsilon = 1e-12);

        let entangled = toy_entangled_state(space, 1);
        assert!(matches!(
            entanglement_growth_curve(&spec, &entangled, &[0.0], &tol()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn symmetry_demo_plain_and_precondition() {
        let rho = DensityOperator::diagonal(&[0.4, 0.2, 0.4]).unwrap();
        let report = symmetry_demo(
            &swap(3),
            &SystemState::Mixed(rho),
            Variant::Plain,
            &mut stream(0),
            &tol(),
        )
        .unwrap();
        assert!(report.max_event_norm < 1e-8 && report.max_reset_norm < 1e-8);

        let asym = DensityOperator::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        assert!(matches!(
            symmetry_demo(
                &swap(3),
                &SystemState::Mixed(asym),
                Variant::Plain,
                &mut stream(0),
                &tol()
            ),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn symmetry_demo_alternative_report_shape() {
        let space = BipartiteSpace::new(2, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::new(
            CVector::from_vec(vec![
                C64::new(s, 0.),
                C64::new(0., 0.),
                C64::new(0., 0.),
                C64::new(s, 0.),
            ]),
            space,
        )
        .unwrap();
        let r = symmetry_demo(
            &swap(2),
            &SystemState::Pure(bell),
            Variant::Alternative,
            &mut stream(3),
            &tol(),
        )
        .unwrap();
        assert_eq!(r.event_norms.len(), 2);
        assert_eq!(r.reset_norms.len(), 2);
    }

    #[test]
    fn shipped_symmetries_extend_to_total() {
        let space = BipartiteSpace::new(3, 2).unwrap();
        for u in [parity(3), swap(3)] {
            let total = matter_symmetry_on_total(&u, space).unwrap();
            assert!(UnitaryOperator::new(total.matrix().clone()).is_ok());
            assert_eq!(total.dim(), 6);
        }
        assert!(matter_symmetry_on_total(&swap(2), space).is_err());
    }
}
