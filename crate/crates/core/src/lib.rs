//! Small, dense simulator for bipartite matter⊗gravity quantum systems.
//!
//! The crate computes the entanglement entropy between the two tensor factors,
//! implements three stochastic "event" declarations together with their reset
//! rules, and builds discrete-time reset histories either by Monte Carlo
//! sampling or by exhaustive branch enumeration.
//!
//! Layout:
//!
//! * [`linalg`]: states, operators, tensor products, partial traces, Haar unitaries.
//! * [`decomposition`]: spectral resolutions, Schmidt decompositions, entropy.
//! * [`dynamics`]: Hamiltonian assembly, exact unitary propagation, Lindblad integration.
//! * [`events`]: declarations, resets, trajectories, branch trees, statistical operators.
//! * [`scenarios`]: the partition box, seeded toy models, symmetry demonstrations.
//!
//! Data-parallel loops (ensembles, tree levels, time grids) go through
//! [`parallel`]; disabling the default `parallel` feature runs them sequentially
//! with identical results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Experiment drivers take the full (state, dynamics, schedule, variant, …) tuple.
#![allow(clippy::too_many_arguments)]

pub mod decomposition;
pub mod dynamics;
pub mod error;
pub mod events;
pub mod linalg;
pub mod parallel;
pub mod scenarios;
pub mod seeds;
pub mod tolerances;

pub use error::{Error, Result};
pub use tolerances::Tolerances;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
