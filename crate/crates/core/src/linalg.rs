//! Dense complex states and operators on a bipartite matter⊗gravity space.
//!
//! Composite indices are matter-major everywhere: the amplitude on matter
//! basis vector `a` and gravity basis vector `b` sits at `a * dim_gravity + b`.

use nalgebra::{SymmetricEigen, SVD};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Error, Result, Tolerances, C64};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipartiteSpace {
    dim_matter: usize,
    dim_gravity: usize,
}

impl BipartiteSpace {
    pub fn new(dim_matter: usize, dim_gravity: usize) -> Result<Self> {
        if dim_matter == 0 || dim_gravity == 0 {
            return Err(Error::InvalidArgument(format!(
                "space dimensions must be positive, got {dim_matter}x{dim_gravity}"
            )));
        }
        Ok(Self {
            dim_matter,
            dim_gravity,
        })
    }

    pub fn dim_matter(&self) -> usize {
        self.dim_matter
    }

    pub fn dim_gravity(&self) -> usize {
        self.dim_gravity
    }

    pub fn total(&self) -> usize {
        self.dim_matter * self.dim_gravity
    }

    pub fn dim_of(&self, side: Side) -> usize {
        match side {
            Side::Matter => self.dim_matter,
            Side::Gravity => self.dim_gravity,
        }
    }

    /// Composite index of matter basis `a` and gravity basis `b`.
    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.dim_gravity + b
    }
}

/// The tensor factor that is *kept* by a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Matter,
    Gravity,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Matter => Side::Gravity,
            Side::Gravity => Side::Matter,
        }
    }
}

/// Normalized amplitude vector on a bipartite space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    space: BipartiteSpace,
}

impl PureState {
    /// Wraps an already-normalized vector, rejecting anything off the unit sphere.
    pub fn new(amplitudes: CVector, space: BipartiteSpace) -> Result<Self> {
        check_len(amplitudes.len(), space.total(), "pure state amplitudes")?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > Tolerances::default().norm {
            return Err(Error::InvalidArgument(format!(
                "pure state has norm {norm}, expected 1"
            )));
        }
        Ok(Self { amplitudes, space })
    }

    /// Normalizes `amplitudes` first.
    pub fn normalized(amplitudes: CVector, space: BipartiteSpace) -> Result<Self> {
        check_len(amplitudes.len(), space.total(), "pure state amplitudes")?;
        let amplitudes = normalize(amplitudes, "pure state")?;
        Ok(Self { amplitudes, space })
    }

    /// Basis product state |a⟩⊗|b⟩.
    pub fn basis(space: BipartiteSpace, a: usize, b: usize) -> Result<Self> {
        if a >= space.dim_matter() || b >= space.dim_gravity() {
            return Err(Error::InvalidArgument(format!(
                "basis index ({a}, {b}) outside {}x{}",
                space.dim_matter(),
                space.dim_gravity()
            )));
        }
        let mut v = CVector::zeros(space.total());
        v[space.index(a, b)] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v, space })
    }

    /// Unitarily invariant random state (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(space: BipartiteSpace, rng: &mut R) -> Self {
        let v = random_complex_vector(space.total(), rng);
        let amplitudes = normalize(v, "random state").expect("gaussian vector is nonzero");
        Self { amplitudes, space }
    }

    pub(crate) fn from_raw(amplitudes: CVector, space: BipartiteSpace) -> Self {
        debug_assert_eq!(amplitudes.len(), space.total());
        Self { amplitudes, space }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn space(&self) -> BipartiteSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Amplitudes reshaped to a `dim_matter × dim_gravity` matrix.
    pub fn amplitude_matrix(&self) -> CMatrix {
        let (m, g) = (self.space.dim_matter(), self.space.dim_gravity());
        CMatrix::from_fn(m, g, |a, b| self.amplitudes[a * g + b])
    }

    /// |ψ⟩⟨ψ| on the total space.
    pub fn projector(&self) -> DensityOperator {
        DensityOperator::from_raw(outer(&self.amplitudes, &self.amplitudes))
    }

    /// |⟨ψ|φ⟩|.
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm()
    }

    /// Global phase multiplication.
    pub fn with_phase(&self, phase: f64) -> Self {
        Self {
            amplitudes: self.amplitudes.map(|z| z * C64::from_polar(1.0, phase)),
            space: self.space,
        }
    }
}

/// Hermitian, positive, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::new_with(matrix, &Tolerances::default())
    }

    pub fn new_with(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        let kind = "density operator";
        check_square(&matrix, kind)?;
        let dev = hermiticity_deviation(&matrix);
        if dev > tol.hermitian {
            return Err(invalid(kind, format!("Hermiticity deviation {dev:.3e}")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(invalid(kind, format!("trace {tr}")));
        }
        let (evals, _) = eigh(&matrix)?;
        let min = evals.last().copied().unwrap_or(0.0);
        if min < -tol.positivity {
            return Err(invalid(kind, format!("eigenvalue {min:.3e} is negative")));
        }
        Ok(Self { matrix })
    }

    /// Skips validation; callers guarantee the invariants up to round-off.
    pub(crate) fn from_raw(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_pure_vector(v: &CVector) -> Result<Self> {
        let v = normalize(v.clone(), "density from vector")?;
        Ok(Self::from_raw(outer(&v, &v)))
    }

    pub fn diagonal(probabilities: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            probabilities.len(),
            probabilities.iter().map(|&p| C64::new(p, 0.0)),
        ));
        Self::new(m)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self::from_raw(CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0)))
    }

    /// Random mixed state `G G† / tr(G G†)` with `G` an `n × rank` complex Gaussian.
    pub fn random<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> Self {
        let g = random_complex_matrix(n, rank.max(1), rng);
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        Self::from_raw(hermitize(&(m / C64::new(tr, 0.0))))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// tr ρ².
    pub fn purity(&self) -> f64 {
        // For Hermitian ρ, tr ρ² = Σ |ρ_ij|².
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(eigh(&self.matrix)?.0)
    }

    /// `Σ_i w_i ρ_i`; weights are not renormalized.
    pub fn mixture<'a, I>(dim: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (f64, &'a DensityOperator)>,
    {
        let mut acc = CMatrix::zeros(dim, dim);
        for (w, rho) in terms {
            acc += rho.matrix() * C64::new(w, 0.0);
        }
        Self::from_raw(acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let kind = "Hermitian operator";
        check_square(&matrix, kind)?;
        let dev = hermiticity_deviation(&matrix);
        if dev > Tolerances::default().hermitian {
            return Err(invalid(kind, format!("Hermiticity deviation {dev:.3e}")));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_raw(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_raw(CMatrix::zeros(n, n))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_raw(CMatrix::from_diagonal(&CVector::from_iterator(
            values.len(),
            values.iter().map(|&v| C64::new(v, 0.0)),
        )))
    }

    /// Random Hermitian matrix `(G + G†)/2` scaled to unit Frobenius norm.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = random_complex_matrix(n, n, rng);
        let h = hermitize(&g);
        let norm = h.norm();
        Self::from_raw(h / C64::new(norm, 0.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let kind = "unitary operator";
        check_square(&matrix, kind)?;
        let n = matrix.nrows();
        let dev = (matrix.adjoint() * &matrix - CMatrix::identity(n, n)).norm();
        if dev > Tolerances::default().unitary {
            return Err(invalid(kind, format!("‖U†U − I‖ = {dev:.3e}")));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_raw(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_raw(CMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// U ρ U†.
    pub fn conjugate(&self, m: &CMatrix) -> CMatrix {
        &self.matrix * m * self.matrix.adjoint()
    }

    /// U ⊗ I on a space whose first factor has `self.dim()` dimensions.
    pub fn tensor_identity(&self, dim_other: usize) -> Self {
        Self::from_raw(self.matrix.kronecker(&CMatrix::identity(dim_other, dim_other)))
    }
}

/// Borrowed state accepted by [`partial_trace`].
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityOperator),
}

impl<'a> From<&'a PureState> for StateRef<'a> {
    fn from(s: &'a PureState) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityOperator> for StateRef<'a> {
    fn from(s: &'a DensityOperator) -> Self {
        StateRef::Mixed(s)
    }
}

/// Normalized product state `matter ⊗ gravity`.
pub fn tensor_state(matter: &CVector, gravity: &CVector, space: BipartiteSpace) -> Result<PureState> {
    check_len(matter.len(), space.dim_matter(), "matter factor")?;
    check_len(gravity.len(), space.dim_gravity(), "gravity factor")?;
    let m = normalize(matter.clone(), "matter factor")?;
    let g = normalize(gravity.clone(), "gravity factor")?;
    Ok(PureState::from_raw(kron_vec(&m, &g), space))
}

/// Reduced density operator on the kept `side`.
pub fn partial_trace<'a>(state: impl Into<StateRef<'a>>, space: BipartiteSpace, side: Side) -> Result<DensityOperator> {
    match state.into() {
        StateRef::Pure(psi) => {
            check_len(psi.dim(), space.total(), "partial trace input")?;
            let m = PureState::from_raw(psi.amplitudes().clone(), space).amplitude_matrix();
            let out = match side {
                Side::Matter => &m * m.adjoint(),
                Side::Gravity => m.transpose() * m.conjugate(),
            };
            Ok(DensityOperator::from_raw(hermitize(&out)))
        }
        StateRef::Mixed(rho) => Ok(DensityOperator::from_raw(partial_trace_matrix(
            rho.matrix(),
            space,
            side,
        )?)),
    }
}

/// Partial trace as a linear map on arbitrary total-space matrices.
pub fn partial_trace_matrix(m: &CMatrix, space: BipartiteSpace, side: Side) -> Result<CMatrix> {
    check_square(m, "partial trace input")?;
    check_len(m.nrows(), space.total(), "partial trace input")?;
    let (dm, dg) = (space.dim_matter(), space.dim_gravity());
    Ok(match side {
        Side::Matter => CMatrix::from_fn(dm, dm, |a, a2| (0..dg).map(|b| m[(a * dg + b, a2 * dg + b)]).sum()),
        Side::Gravity => CMatrix::from_fn(dg, dg, |b, b2| (0..dm).map(|a| m[(a * dg + b, a * dg + b2)]).sum()),
    })
}

/// ½ Σ |singular values of ρ − σ|.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_len(sigma.dim(), rho.dim(), "trace distance operand")?;
    let diff = hermitize(&(rho.matrix() - sigma.matrix()));
    let (evals, _) = eigh(&diff)?;
    Ok(0.5 * evals.iter().map(|e| e.abs()).sum::<f64>())
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of R's diagonal divided out of Q.
pub fn haar_random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitaryOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("unitary dimension must be ≥ 1".into()));
    }
    let z = random_complex_matrix(n, n, rng);
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(UnitaryOperator::from_raw(q))
}

/// ‖AB − BA‖_F.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    check_square(a, "commutator operand")?;
    check_square(b, "commutator operand")?;
    check_len(b.nrows(), a.nrows(), "commutator operand")?;
    Ok((a * b - b * a).norm())
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues in decreasing order
/// with eigenvectors as matching columns.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Eigensolver("matrix contains non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(hermitize(m), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Eigensolver(format!("no convergence for {n}x{n} matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Thin SVD with singular values in non-increasing order:
/// returns `(U, s, V^T)` with `m = U diag(s) V^T`.
pub fn svd_sorted(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let svd = SVD::try_new(m.clone(), true, true, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Eigensolver("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = CMatrix::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let vt_sorted = CMatrix::from_fn(k, vt.ncols(), |r, c| vt[(order[r], c)]);
    Ok((u_sorted, s, vt_sorted))
}

/// Kronecker product of two vectors (first factor is the slow index).
pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    let nb = b.len();
    CVector::from_fn(a.len() * nb, |i, _| a[i / nb] * b[i % nb])
}

/// |u⟩⟨v|.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

/// (M + M†)/2.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest |M_ij − conj(M_ji)|.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Largest entry-wise modulus of `a − b`.
pub fn max_entry_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn random_complex_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng))
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    // Column-major fill order is part of the seed-to-matrix mapping.
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn normalize(v: CVector, context: &'static str) -> Result<CVector> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector(context));
    }
    Ok(v / C64::new(norm, 0.0))
}

pub(crate) fn check_len(actual: usize, expected: usize, context: &'static str) -> Result<()> {
    if actual != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        });
    }
    Ok(())
}

fn check_square(m: &CMatrix, context: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "{context} must be a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn invalid(kind: &'static str, reason: String) -> Error {
    Error::InvalidOperator { kind, reason }
}
