use serde::{Deserialize, Serialize};

/// Every numerical tolerance used by the crate, in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Max |‖ψ‖ − 1| for a pure state.
    pub norm: f64,
    /// Max-entry deviation from Hermiticity.
    pub hermitian: f64,
    /// Max |tr ρ − 1|.
    pub trace: f64,
    /// Smallest eigenvalue allowed is `-positivity`.
    pub positivity: f64,
    /// Frobenius bound on ‖U†U − I‖.
    pub unitary: f64,
    /// Absolute gap below which eigenvalues / Schmidt coefficients are merged.
    pub degeneracy: f64,
    /// Eigenvalues (and squared Schmidt coefficients) at or below this are discarded.
    pub zero_cutoff: f64,
    /// Trace drift at which master-equation integration is rejected.
    pub max_trace_drift: f64,
    /// Maximum number of branches in an enumerated tree.
    pub branch_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-10,
            hermitian: 1e-10,
            trace: 1e-10,
            positivity: 1e-10,
            unitary: 1e-9,
            degeneracy: 1e-9,
            zero_cutoff: 1e-12,
            max_trace_drift: 1e-6,
            branch_cap: 1_000_000,
        }
    }
}
