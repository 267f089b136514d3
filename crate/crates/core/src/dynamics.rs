//! Hamiltonian assembly, exact unitary propagation and Lindblad integration.

use crate::linalg::{
    check_len, eigh, hermitize, partial_trace, BipartiteSpace, DensityOperator, HermitianOperator, PureState, Side,
    UnitaryOperator,
};
use crate::{parallel, CMatrix, Error, Result, Tolerances, C64};

/// `H = h_matter ⊗ I + I ⊗ h_gravity + h_int` in matter-major ordering.
pub fn assemble_hamiltonian(
    h_matter: &HermitianOperator,
    h_gravity: &HermitianOperator,
    h_int: &HermitianOperator,
) -> Result<HermitianOperator> {
    let (dm, dg) = (h_matter.dim(), h_gravity.dim());
    check_len(h_int.dim(), dm * dg, "interaction Hamiltonian")?;
    let h = h_matter.matrix().kronecker(&CMatrix::identity(dg, dg))
        + CMatrix::identity(dm, dm).kronecker(h_gravity.matrix())
        + h_int.matrix();
    Ok(HermitianOperator::from_raw(h))
}

/// Closed-form propagator `U(t) = V e^{−iΛt} V†` from one eigendecomposition of H.
#[derive(Debug, Clone)]
pub struct Propagator {
    values: Vec<f64>,
    vectors: CMatrix,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        let (values, vectors) = eigh(h.matrix())?;
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn unitary(&self, t: f64) -> UnitaryOperator {
        let mut scaled = self.vectors.clone();
        for (j, &e) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * t);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
        UnitaryOperator::from_raw(scaled * self.vectors.adjoint())
    }

    pub fn evolve<S: UnitarilyEvolvable>(&self, state: &S, t: f64) -> Result<S> {
        check_len(state.dim(), self.dim(), "evolved state")?;
        Ok(state.evolved(&self.unitary(t)))
    }
}

/// States that transform under a unitary: `ψ ↦ Uψ`, `ρ ↦ UρU†`.
pub trait UnitarilyEvolvable: Sized {
    fn dim(&self) -> usize;
    fn evolved(&self, u: &UnitaryOperator) -> Self;
}

impl UnitarilyEvolvable for PureState {
    fn dim(&self) -> usize {
        PureState::dim(self)
    }

    fn evolved(&self, u: &UnitaryOperator) -> Self {
        PureState::from_raw(u.matrix() * self.amplitudes(), self.space())
    }
}

impl UnitarilyEvolvable for DensityOperator {
    fn dim(&self) -> usize {
        DensityOperator::dim(self)
    }

    fn evolved(&self, u: &UnitaryOperator) -> Self {
        DensityOperator::from_raw(hermitize(&u.conjugate(self.matrix())))
    }
}

/// Evolves a pure state or density operator by `e^{−iH dt}`.
pub fn unitary_evolve<S: UnitarilyEvolvable>(state: &S, h: &HermitianOperator, dt: f64) -> Result<S> {
    check_len(state.dim(), h.dim(), "evolved state")?;
    Propagator::new(h)?.evolve(state, dt)
}

/// Lindblad generator `L ρ = −i[H, ρ] + Σ_k γ_k (J_k ρ J_k† − ½{J_k†J_k, ρ})`.
#[derive(Debug, Clone)]
pub struct MasterGenerator {
    hamiltonian: HermitianOperator,
    jump_operators: Vec<CMatrix>,
    rates: Vec<f64>,
    /// `H − (i/2) Σ γ_k J_k†J_k`.
    effective: CMatrix,
}

impl MasterGenerator {
    pub fn new(hamiltonian: HermitianOperator, jump_operators: Vec<CMatrix>, rates: Vec<f64>) -> Result<Self> {
        let n = hamiltonian.dim();
        if jump_operators.len() != rates.len() {
            return Err(Error::InvalidArgument(format!(
                "{} jump operators but {} rates",
                jump_operators.len(),
                rates.len()
            )));
        }
        for j in &jump_operators {
            if j.nrows() != n || j.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: j.nrows().max(j.ncols()),
                    context: "jump operator",
                });
            }
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidArgument(format!("rate {r} must be finite and ≥ 0")));
        }
        let mut effective = hamiltonian.matrix().clone();
        for (j, &r) in jump_operators.iter().zip(&rates) {
            effective -= (j.adjoint() * j) * C64::new(0.0, 0.5 * r);
        }
        Ok(Self {
            hamiltonian,
            jump_operators,
            rates,
            effective,
        })
    }

    /// Pure Hamiltonian generator `−i[H, ·]`.
    pub fn unitary(hamiltonian: HermitianOperator) -> Self {
        Self::new(hamiltonian, Vec::new(), Vec::new()).expect("no jump operators to validate")
    }

    pub fn zero(n: usize) -> Self {
        Self::unitary(HermitianOperator::zeros(n))
    }

    /// Single-operator dephasing `γ (JρJ† − ½{J†J, ρ})` with Hamiltonian `h`.
    pub fn dephasing(h: HermitianOperator, jump: CMatrix, rate: f64) -> Result<Self> {
        Self::new(h, vec![jump], vec![rate])
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn jump_operators(&self) -> &[CMatrix] {
        &self.jump_operators
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// True when `L = 0`.
    pub fn is_zero(&self) -> bool {
        self.hamiltonian.is_zero() && self.rates.iter().all(|&r| r == 0.0)
    }

    /// `L ρ` for an arbitrary square matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let i = C64::new(0.0, 1.0);
        let mut out = (&self.effective * rho - rho * self.effective.adjoint()) * (-i);
        for (j, &r) in self.jump_operators.iter().zip(&self.rates) {
            if r != 0.0 {
                out += (j * rho * j.adjoint()) * C64::new(r, 0.0);
            }
        }
        out
    }
}

/// Strictly increasing reset times following an initial time.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetSchedule {
    initial_time: f64,
    times: Vec<f64>,
}

impl ResetSchedule {
    pub fn new(initial_time: f64, times: Vec<f64>) -> Result<Self> {
        if !initial_time.is_finite() || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("schedule times must be finite".into()));
        }
        if let Some(&first) = times.first() {
            if first <= initial_time {
                return Err(Error::InvalidArgument(format!(
                    "reset time {first} is not after the initial time {initial_time}"
                )));
            }
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("reset times must be strictly increasing".into()));
        }
        Ok(Self { initial_time, times })
    }

    pub fn empty(initial_time: f64) -> Self {
        Self {
            initial_time,
            times: Vec::new(),
        }
    }

    pub fn initial_time(&self) -> f64 {
        self.initial_time
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time of the last reset, or the initial time when there is none.
    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(self.initial_time)
    }
}

/// Integrates `ρ̇ = Lρ` from `t_start` to `t_end` with classical fixed-step RK4.
///
/// The step is `(t_end − t_start) / ceil((t_end − t_start) / dt_max)`. Each step
/// is re-Hermitized, which keeps the result exactly Hermitian without touching
/// the trace. The trace is never renormalized; a drift above
/// `tol.max_trace_drift` is an error.
pub fn master_evolve(
    rho: &DensityOperator,
    gen: &MasterGenerator,
    t_start: f64,
    t_end: f64,
    dt_max: f64,
    tol: &Tolerances,
) -> Result<DensityOperator> {
    check_len(rho.dim(), gen.dim(), "master equation state")?;
    if !(dt_max > 0.0) {
        return Err(Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
    }
    if !(t_end >= t_start) {
        return Err(Error::InvalidArgument(format!(
            "t_end {t_end} precedes t_start {t_start}"
        )));
    }
    let span = t_end - t_start;
    if span == 0.0 || gen.is_zero() {
        return Ok(rho.clone());
    }
    let steps = (span / dt_max).ceil() as usize;
    let h = span / steps as f64;
    let half = C64::new(0.5 * h, 0.0);
    let full = C64::new(h, 0.0);
    let sixth = C64::new(h / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);

    let trace0 = rho.matrix().trace().re;
    let mut state = rho.matrix().clone();
    for _ in 0..steps {
        let k1 = gen.apply(&state);
        let k2 = gen.apply(&(&state + &k1 * half));
        let k3 = gen.apply(&(&state + &k2 * half));
        let k4 = gen.apply(&(&state + &k3 * full));
        state += (k1 + k2 * two + k3 * two + k4) * sixth;
        state = hermitize(&state);
    }
    let drift = (state.trace().re - trace0).abs();
    if !drift.is_finite() || drift > tol.max_trace_drift {
        return Err(Error::TraceDrift {
            drift,
            limit: tol.max_trace_drift,
        });
    }
    Ok(DensityOperator::from_raw(state))
}

/// The linear map `T = e^{L t}` on density operators, realized by [`master_evolve`].
///
/// `T` is linear in `ρ`: `T(αρ + βσ) = αT(ρ) + βT(σ)`. The integrator preserves
/// this exactly (every RK4 stage is linear), up to floating-point round-off.
pub fn apply_linear_map(
    gen: &MasterGenerator,
    rho: &DensityOperator,
    t: f64,
    dt_max: f64,
    tol: &Tolerances,
) -> Result<DensityOperator> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be ≥ 0, got {t}")));
    }
    master_evolve(rho, gen, 0.0, t, dt_max, tol)
}

/// `tr_gravity(U(t − t0) |ψ0⟩⟨ψ0| U†)` at each requested time.
pub fn reduced_matter_trajectory(
    psi0: &PureState,
    h: &HermitianOperator,
    t0: f64,
    times: &[f64],
) -> Result<Vec<DensityOperator>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("times must be non-decreasing".into()));
    }
    check_len(psi0.dim(), h.dim(), "initial state")?;
    let prop = Propagator::new(h)?;
    let space = psi0.space();
    parallel::try_map_slice(times, |&t| reduce(&prop.evolve(psi0, t - t0)?, space))
}

fn reduce(psi: &PureState, space: BipartiteSpace) -> Result<DensityOperator> {
    partial_trace(psi, space, Side::Matter)
}
