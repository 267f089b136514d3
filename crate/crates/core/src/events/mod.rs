//! Event declarations, reset rules, trajectories and branch trees.
//!
//! Three declarations assign a probability distribution over "events" to the
//! current state:
//!
//! * [`Variant::Plain`]: spectral projectors `P_a` of ρ, probability `m_a λ_a`;
//!   reset to `P_a / m_a`.
//! * [`Variant::Modified`]: rank-one eigenprojectors `|ψ_a⟩⟨ψ_a|`, with a
//!   Haar-random basis inside each degenerate eigenspace, probability `λ_a`;
//!   reset to `|ψ_a⟩⟨ψ_a|`.
//! * [`Variant::Alternative`]: normalized Schmidt terms `ψ_a ⊗ γ_a` of the total
//!   pure state, probability `c_a²`; reset the total state to `ψ_a ⊗ γ_a`.
//!
//! Events are always ordered by decreasing eigenvalue (or coefficient).

mod branches;
mod trajectory;

pub use branches::{
    compare_statistical_vs_unreset, enumerate_branches, statistical_operator, unreset_state, Branch, BranchTree,
    ComparisonReport,
};
pub use trajectory::{run_ensemble, run_trajectory, sample_trajectory, Ensemble, SeriesSample, Trajectory};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{schmidt_decompose, spectral_resolution};
use crate::dynamics::{master_evolve, MasterGenerator, Propagator};
use crate::linalg::{
    haar_random_unitary, outer, partial_trace, BipartiteSpace, DensityOperator, HermitianOperator, PureState, Side,
};
use crate::{CMatrix, CVector, Error, Result, Tolerances, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Modified,
    Alternative,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Modified => "modified",
            Variant::Alternative => "alternative",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "modified" => Ok(Variant::Modified),
            "alternative" => Ok(Variant::Alternative),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other:?} (expected plain, modified or alternative)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Event {
    /// Spectral projector of rank `multiplicity`.
    Projector {
        projector: CMatrix,
        multiplicity: usize,
        eigenvalue: f64,
    },
    /// Normalized eigenvector.
    Ray { vector: CVector, eigenvalue: f64 },
    /// Normalized Schmidt term `matter ⊗ gravity`.
    Product {
        matter: CVector,
        gravity: CVector,
        coefficient: f64,
        state: PureState,
    },
}

impl Event {
    pub fn multiplicity(&self) -> usize {
        match self {
            Event::Projector { multiplicity, .. } => *multiplicity,
            _ => 1,
        }
    }

    /// Projector on the declaring state's own space (matter side for products).
    pub fn matter_projector(&self) -> CMatrix {
        match self {
            Event::Projector { projector, .. } => projector.clone(),
            Event::Ray { vector, .. } => outer(vector, vector),
            Event::Product { matter, .. } => outer(matter, matter),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EventSet {
    variant: Variant,
    events: Vec<Event>,
    probabilities: Vec<f64>,
}

impl EventSet {
    fn from_weighted(variant: Variant, events: Vec<Event>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if events.is_empty() || !(total > 0.0) {
            return Err(Error::InvalidArgument("state declares no events".into()));
        }
        // Renormalize away the mass of discarded near-null directions.
        let probabilities = weights.iter().map(|w| w / total).collect();
        Ok(Self {
            variant,
            events,
            probabilities,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.events.iter().map(Event::multiplicity).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn event(&self, chosen: usize) -> Result<&Event> {
        self.events.get(chosen).ok_or(Error::IndexOutOfRange {
            index: chosen,
            len: self.events.len(),
        })
    }
}

/// Plain declaration: spectral projectors with probability `m_a λ_a`.
pub fn declare_events_plain(rho: &DensityOperator, tol: &Tolerances) -> Result<EventSet> {
    let res = spectral_resolution(rho, tol)?;
    let weights = res
        .eigenvalues
        .iter()
        .zip(&res.multiplicities)
        .map(|(l, &m)| l * m as f64)
        .collect();
    let events = res
        .projectors
        .into_iter()
        .zip(res.multiplicities)
        .zip(res.eigenvalues)
        .map(|((projector, multiplicity), eigenvalue)| Event::Projector {
            projector,
            multiplicity,
            eigenvalue,
        })
        .collect();
    EventSet::from_weighted(Variant::Plain, events, weights)
}

/// Modified declaration: an orthonormal eigenbasis, Haar-rotated inside each
/// degenerate eigenspace, with probability `λ_a` per vector.
pub fn declare_events_modified<R: Rng + ?Sized>(
    rho: &DensityOperator,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<EventSet> {
    let res = spectral_resolution(rho, tol)?;
    let mut events = Vec::new();
    let mut weights = Vec::new();
    for (basis, &lambda) in res.eigenbases.iter().zip(&res.eigenvalues) {
        let m = basis.ncols();
        let basis = if m > 1 {
            basis * haar_random_unitary(m, rng)?.matrix()
        } else {
            basis.clone()
        };
        for col in basis.column_iter() {
            events.push(Event::Ray {
                vector: col.into_owned(),
                eigenvalue: lambda,
            });
            weights.push(lambda);
        }
    }
    EventSet::from_weighted(Variant::Modified, events, weights)
}

/// Alternative declaration: normalized Schmidt terms with probability `c_a²`.
pub fn declare_events_alternative<R: Rng + ?Sized>(
    psi: &PureState,
    space: BipartiteSpace,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<EventSet> {
    let schmidt = schmidt_decompose(psi, space, rng, tol)?;
    let weights = schmidt.coefficients.iter().map(|c| c * c).collect();
    let events = (0..schmidt.rank())
        .map(|a| Event::Product {
            matter: schmidt.matter_vectors[a].clone(),
            gravity: schmidt.gravity_vectors[a].clone(),
            coefficient: schmidt.coefficients[a],
            state: schmidt.term(a),
        })
        .collect();
    EventSet::from_weighted(Variant::Alternative, events, weights)
}

/// Draws one uniform `u ∈ [0, 1)` and returns [`select_event`] of it.
pub fn sample_event<R: Rng + ?Sized>(events: &EventSet, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    select_event(events.probabilities(), u)
}

/// Inverse CDF with half-open intervals: the first `i` with `u < Σ_{j≤i} p_j`.
/// Falls back to the last index when round-off leaves `u` past the total.
pub fn select_event(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len().saturating_sub(1)
}

/// Plain: `P_a / m_a`. Modified: `|ψ_a⟩⟨ψ_a|`.
pub fn reset_density(events: &EventSet, chosen: usize) -> Result<DensityOperator> {
    match events.event(chosen)? {
        Event::Projector {
            projector,
            multiplicity,
            ..
        } => Ok(DensityOperator::from_raw(
            projector / C64::new(*multiplicity as f64, 0.0),
        )),
        Event::Ray { vector, .. } => Ok(DensityOperator::from_raw(outer(vector, vector))),
        Event::Product { .. } => Err(Error::VariantMismatch(
            "alternative events reset the total pure state; use reset_total_state".into(),
        )),
    }
}

/// Alternative: the normalized product state `ψ_a ⊗ γ_a`.
pub fn reset_total_state(events: &EventSet, chosen: usize) -> Result<PureState> {
    match events.event(chosen)? {
        Event::Product { state, .. } => Ok(state.clone()),
        _ => Err(Error::VariantMismatch(format!(
            "{} events reset a density operator; use reset_density",
            events.variant()
        ))),
    }
}

/// State carried along a reset history.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemState {
    /// Density operator obeying a master equation (plain / modified).
    Mixed(DensityOperator),
    /// Total matter⊗gravity pure state (alternative).
    Pure(PureState),
}

impl SystemState {
    /// The matter-side density operator: the state itself, or its partial trace.
    pub fn matter_density(&self) -> Result<DensityOperator> {
        match self {
            SystemState::Mixed(rho) => Ok(rho.clone()),
            SystemState::Pure(psi) => partial_trace(psi, psi.space(), Side::Matter),
        }
    }

    pub fn as_mixed(&self) -> Option<&DensityOperator> {
        match self {
            SystemState::Mixed(rho) => Some(rho),
            SystemState::Pure(_) => None,
        }
    }

    pub fn as_pure(&self) -> Option<&PureState> {
        match self {
            SystemState::Pure(psi) => Some(psi),
            SystemState::Mixed(_) => None,
        }
    }
}

/// Evolution between resets.
#[derive(Debug, Clone)]
pub enum Dynamics {
    /// Master equation for plain / modified resets.
    Master { generator: MasterGenerator, dt_max: f64 },
    /// Total-space unitary evolution for alternative resets.
    Unitary {
        propagator: Propagator,
        space: BipartiteSpace,
    },
}

impl Dynamics {
    pub fn master(generator: MasterGenerator, dt_max: f64) -> Result<Self> {
        if !(dt_max > 0.0) {
            return Err(Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
        }
        Ok(Dynamics::Master { generator, dt_max })
    }

    pub fn unitary(h: &HermitianOperator, space: BipartiteSpace) -> Result<Self> {
        crate::linalg::check_len(h.dim(), space.total(), "total-space Hamiltonian")?;
        Ok(Dynamics::Unitary {
            propagator: Propagator::new(h)?,
            space,
        })
    }

    /// Evolves `state` over `[t_from, t_to]`.
    pub fn evolve(&self, state: &SystemState, t_from: f64, t_to: f64, tol: &Tolerances) -> Result<SystemState> {
        match (self, state) {
            (Dynamics::Master { generator, dt_max }, SystemState::Mixed(rho)) => Ok(SystemState::Mixed(master_evolve(
                rho, generator, t_from, t_to, *dt_max, tol,
            )?)),
            (Dynamics::Unitary { propagator, .. }, SystemState::Pure(psi)) => {
                Ok(SystemState::Pure(propagator.evolve(psi, t_to - t_from)?))
            }
            (Dynamics::Unitary { propagator, .. }, SystemState::Mixed(rho)) => {
                Ok(SystemState::Mixed(propagator.evolve(rho, t_to - t_from)?))
            }
            (Dynamics::Master { .. }, SystemState::Pure(_)) => Err(Error::VariantMismatch(
                "master-equation dynamics act on density operators, not total pure states".into(),
            )),
        }
    }

    /// Rejects (variant, dynamics, state) combinations that are not well posed.
    pub fn check_compatible(&self, variant: Variant, state: &SystemState) -> Result<()> {
        match (variant, self, state) {
            (Variant::Plain | Variant::Modified, Dynamics::Master { generator, .. }, SystemState::Mixed(rho)) => {
                crate::linalg::check_len(rho.dim(), generator.dim(), "initial density operator")
            }
            (Variant::Alternative, Dynamics::Unitary { space, .. }, SystemState::Pure(psi)) => {
                crate::linalg::check_len(psi.dim(), space.total(), "initial total state")
            }
            (Variant::Plain | Variant::Modified, _, _) => Err(Error::VariantMismatch(format!(
                "{variant} resets require a density operator evolving under a master equation"
            ))),
            (Variant::Alternative, _, _) => Err(Error::VariantMismatch(
                "alternative resets require a total pure state under unitary dynamics".into(),
            )),
        }
    }
}

/// Declares events for `state` under `variant`.
pub fn declare<R: Rng + ?Sized>(
    variant: Variant,
    state: &SystemState,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<EventSet> {
    match (variant, state) {
        (Variant::Plain, SystemState::Mixed(rho)) => declare_events_plain(rho, tol),
        (Variant::Modified, SystemState::Mixed(rho)) => declare_events_modified(rho, rng, tol),
        (Variant::Alternative, SystemState::Pure(psi)) => declare_events_alternative(psi, psi.space(), rng, tol),
        (v, _) => Err(Error::VariantMismatch(format!(
            "{v} declaration does not apply to this state"
        ))),
    }
}

/// Applies the reset rule for the chosen event.
pub fn reset(events: &EventSet, chosen: usize) -> Result<SystemState> {
    match events.variant() {
        Variant::Plain | Variant::Modified => reset_density(events, chosen).map(SystemState::Mixed),
        Variant::Alternative => reset_total_state(events, chosen).map(SystemState::Pure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::von_neumann_entropy;
    use crate::linalg::{commutator_norm, max_entry_distance};
    use crate::seeds::stream;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn q2() -> BipartiteSpace {
        BipartiteSpace::new(2, 2).unwrap()
    }

    fn bell() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(
            CVector::from_vec(vec![
                C64::new(s, 0.),
                C64::new(0., 0.),
                C64::new(0., 0.),
                C64::new(s, 0.),
            ]),
            q2(),
        )
        .unwrap()
    }

    fn diag532() -> DensityOperator {
        DensityOperator::diagonal(&[0.5, 0.3, 0.2]).unwrap()
    }

    fn assert_probs(set: &EventSet, expected: &[f64]) {
        assert_eq!(set.probabilities().len(), expected.len());
        for (p, e) in set.probabilities().iter().zip(expected) {
            assert_abs_diff_eq!(p, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(set.probabilities().iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn plain_declarations() {
        assert_probs(&declare_events_plain(&diag532(), &tol()).unwrap(), &[0.5, 0.3, 0.2]);

        let half = DensityOperator::maximally_mixed(2).unwrap();
        let set = declare_events_plain(&half, &tol()).unwrap();
        assert_probs(&set, &[1.0]);
        assert_eq!(set.multiplicities(), vec![2]);

        let set = declare_events_plain(&DensityOperator::diagonal(&[0.5, 0.5, 0.0]).unwrap(), &tol()).unwrap();
        assert_probs(&set, &[1.0]);
        assert_eq!(set.multiplicities(), vec![2]);
        assert!(set.events()[0].matter_projector()[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn modified_declarations() {
        let set = declare_events_modified(&diag532(), &mut stream(0), &tol()).unwrap();
        assert_probs(&set, &[0.5, 0.3, 0.2]);
        for (k, ev) in set.events().iter().enumerate() {
            let p = ev.matter_projector();
            assert_abs_diff_eq!(p[(k, k)].re, 1.0, epsilon = 1e-12);
        }

        let half = DensityOperator::maximally_mixed(2).unwrap();
        let a = declare_events_modified(&half, &mut stream(0), &tol()).unwrap();
        let b = declare_events_modified(&half, &mut stream(1), &tol()).unwrap();
        assert_probs(&a, &[0.5, 0.5]);
        for set in [&a, &b] {
            let v0 = match &set.events()[0] {
                Event::Ray { vector, .. } => vector.clone(),
                _ => unreachable!(),
            };
            let v1 = match &set.events()[1] {
                Event::Ray { vector, .. } => vector.clone(),
                _ => unreachable!(),
            };
            assert!(v0.dotc(&v1).norm() < 1e-9);
            assert_abs_diff_eq!(v0.norm(), 1.0, epsilon = 1e-9);
        }
        let pa = a.events()[0].matter_projector();
        let pb = b.events()[0].matter_projector();
        assert!(max_entry_distance(&pa, &pb) > 1e-3);
    }

    #[test]
    fn alternative_declarations() {
        let prod = PureState::basis(q2(), 1, 0).unwrap();
        assert_probs(
            &declare_events_alternative(&prod, q2(), &mut stream(0), &tol()).unwrap(),
            &[1.0],
        );
        assert_probs(
            &declare_events_alternative(&bell(), q2(), &mut stream(0), &tol()).unwrap(),
            &[0.5, 0.5],
        );

        let space = BipartiteSpace::new(3, 4).unwrap();
        let psi = PureState::random(space, &mut stream(31));
        let set = declare_events_alternative(&psi, space, &mut stream(0), &tol()).unwrap();
        let spec = partial_trace(&psi, space, Side::Matter).unwrap().eigenvalues().unwrap();
        for (p, l) in set.probabilities().iter().zip(&spec) {
            assert_abs_diff_eq!(p, l, epsilon = 1e-9);
        }
    }

    #[test]
    fn selection_boundaries() {
        let p = [0.5, 0.3, 0.2];
        assert_eq!(select_event(&p, 0.0), 0);
        assert_eq!(select_event(&p, 0.4999), 0);
        assert_eq!(select_event(&p, 0.5), 1);
        assert_eq!(select_event(&p, 0.8), 2);
        assert_eq!(select_event(&p, 0.9999999), 2);
        assert_eq!(select_event(&[1.0], 0.3), 0);
        // Round-off past the total lands on the last event.
        assert_eq!(select_event(&[0.5, 0.49999999999], 0.99999999999999), 1);
    }

    #[test]
    fn single_event_always_chosen() {
        let set = declare_events_plain(&DensityOperator::maximally_mixed(3).unwrap(), &tol()).unwrap();
        let mut rng = stream(5);
        assert!((0..100).all(|_| sample_event(&set, &mut rng) == 0));
    }

    #[test]
    fn sampling_frequencies() {
        // 3σ binomial band per event at N = 10⁴.
        let set = declare_events_plain(&diag532(), &tol()).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 3];
        let mut rng = stream(2024);
        for _ in 0..n {
            counts[sample_event(&set, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip([0.5, 0.3, 0.2]) {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn plain_and_modified_resets() {
        let set = declare_events_plain(&diag532(), &tol()).unwrap();
        let r = reset_density(&set, 0).unwrap();
        assert!(max_entry_distance(r.matrix(), DensityOperator::diagonal(&[1., 0., 0.]).unwrap().matrix()) < 1e-12);
        assert!(matches!(reset_density(&set, 3), Err(Error::IndexOutOfRange { .. })));

        let half = DensityOperator::maximally_mixed(2).unwrap();
        let set = declare_events_plain(&half, &tol()).unwrap();
        let r = reset_density(&set, 0).unwrap();
        assert!(max_entry_distance(r.matrix(), half.matrix()) < 1e-12);

        let rho = DensityOperator::diagonal(&[0.4, 0.4, 0.2]).unwrap();
        let set = declare_events_plain(&rho, &tol()).unwrap();
        assert_eq!(set.multiplicities()[0], 2);
        let r = reset_density(&set, 0).unwrap();
        assert_abs_diff_eq!(r.matrix().trace().re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(von_neumann_entropy(&r, &tol()).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert!(DensityOperator::new(r.into_matrix()).is_ok());

        let set = declare_events_modified(&rho, &mut stream(3), &tol()).unwrap();
        let r = reset_density(&set, 1).unwrap();
        assert_abs_diff_eq!(r.purity(), 1.0, epsilon = 1e-12);
        assert!(reset_total_state(&set, 0).is_err());
    }

    #[test]
    fn alternative_resets() {
        let prod = PureState::basis(q2(), 1, 1).unwrap();
        let set = declare_events_alternative(&prod, q2(), &mut stream(0), &tol()).unwrap();
        let out = reset_total_state(&set, 0).unwrap();
        assert_abs_diff_eq!(out.overlap(&prod), 1.0, epsilon = 1e-12);

        for seed in 0..10 {
            let set = declare_events_alternative(&bell(), q2(), &mut stream(seed), &tol()).unwrap();
            for k in 0..2 {
                let out = reset_total_state(&set, k).unwrap();
                let rho = partial_trace(&out, q2(), Side::Matter).unwrap();
                assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
                assert!(von_neumann_entropy(&rho, &tol()).unwrap() < 1e-10);
            }
        }
        assert!(reset_density(&set_alt(), 0).is_err());
        assert!(matches!(
            reset_total_state(&set_alt(), 9),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    fn set_alt() -> EventSet {
        declare_events_alternative(&bell(), q2(), &mut stream(0), &tol()).unwrap()
    }

    #[test]
    fn plain_projectors_inherit_symmetry() {
        // ρ block-symmetric under swapping basis 0 ↔ 1.
        let rho = DensityOperator::diagonal(&[0.35, 0.35, 0.3]).unwrap();
        let swap = CMatrix::from_row_slice(
            3,
            3,
            &[
                C64::new(0., 0.),
                C64::new(1., 0.),
                C64::new(0., 0.),
                C64::new(1., 0.),
                C64::new(0., 0.),
                C64::new(0., 0.),
                C64::new(0., 0.),
                C64::new(0., 0.),
                C64::new(1., 0.),
            ],
        );
        assert!(commutator_norm(&swap, rho.matrix()).unwrap() < 1e-10);
        let set = declare_events_plain(&rho, &tol()).unwrap();
        for k in 0..set.len() {
            assert!(commutator_norm(&swap, &set.events()[k].matter_projector()).unwrap() < 1e-8);
            assert!(commutator_norm(&swap, reset_density(&set, k).unwrap().matrix()).unwrap() < 1e-8);
        }
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("plain".parse::<Variant>().unwrap(), Variant::Plain);
        assert_eq!(Variant::Alternative.to_string(), "alternative");
        assert!("grw".parse::<Variant>().is_err());
    }
}
