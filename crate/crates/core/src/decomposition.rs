//! Spectral resolutions, Schmidt decompositions and von Neumann entropy.

use rand::Rng;

use crate::linalg::{eigh, haar_random_unitary, kron_vec, svd_sorted, BipartiteSpace, DensityOperator, PureState};
use crate::{CMatrix, CVector, Result, Tolerances, C64};

/// `ρ = Σ_a λ_a P_a` over the eigenvalues above the zero cutoff.
#[derive(Debug, Clone)]
pub struct SpectralResolution {
    /// Distinct eigenvalues, strictly decreasing.
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<CMatrix>,
    pub multiplicities: Vec<usize>,
    /// Orthonormal basis of each eigenspace, as columns.
    pub eigenbases: Vec<CMatrix>,
    /// Dimension of the discarded (near-)null part.
    pub zero_rank: usize,
}

impl SpectralResolution {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Σ_a λ_a P_a.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.projectors.first().map_or(0, |p| p.nrows());
        let mut acc = CMatrix::zeros(n, n);
        for (l, p) in self.eigenvalues.iter().zip(&self.projectors) {
            acc += p * C64::new(*l, 0.0);
        }
        acc
    }

    /// Σ_a m_a λ_a.
    pub fn weight(&self) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .map(|(l, &m)| l * m as f64)
            .sum()
    }
}

/// Groups sorted (decreasing) values into runs whose consecutive gaps are
/// at most `tol`. Returns half-open index ranges.
pub(crate) fn degenerate_groups(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i - 1] - values[i] > tol {
            if start < i {
                groups.push(start..i);
            }
            start = i;
        }
    }
    groups
}

pub fn spectral_resolution(rho: &DensityOperator, tol: &Tolerances) -> Result<SpectralResolution> {
    let (values, vectors) = eigh(rho.matrix())?;
    let kept = values.iter().take_while(|&&v| v > tol.zero_cutoff).count();
    let zero_rank = values.len() - kept;

    let mut res = SpectralResolution {
        eigenvalues: Vec::new(),
        projectors: Vec::new(),
        multiplicities: Vec::new(),
        eigenbases: Vec::new(),
        zero_rank,
    };
    for g in degenerate_groups(&values[..kept], tol.degeneracy) {
        let m = g.len();
        let lambda = values[g.clone()].iter().sum::<f64>() / m as f64;
        let basis = vectors.columns(g.start, m).into_owned();
        res.projectors.push(&basis * basis.adjoint());
        res.eigenvalues.push(lambda);
        res.multiplicities.push(m);
        res.eigenbases.push(basis);
    }
    Ok(res)
}

/// `Ψ = Σ_a c_a matter_a ⊗ gravity_a`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Positive, non-increasing.
    pub coefficients: Vec<f64>,
    pub matter_vectors: Vec<CVector>,
    pub gravity_vectors: Vec<CVector>,
    pub space: BipartiteSpace,
}

impl SchmidtDecomposition {
    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// Normalized product term `matter_a ⊗ gravity_a`.
    pub fn term(&self, a: usize) -> PureState {
        PureState::from_raw(kron_vec(&self.matter_vectors[a], &self.gravity_vectors[a]), self.space)
    }

    pub fn reconstruct(&self) -> CVector {
        let mut acc = CVector::zeros(self.space.total());
        for (a, c) in self.coefficients.iter().enumerate() {
            acc += kron_vec(&self.matter_vectors[a], &self.gravity_vectors[a]) * C64::new(*c, 0.0);
        }
        acc
    }
}

/// Schmidt decomposition from the SVD of the matter-major amplitude matrix.
///
/// Coefficients whose square is at or below `zero_cutoff` are dropped. Within
/// each group of equal coefficients (gap ≤ `degeneracy`) the paired bases are
/// rotated by one Haar-random unitary: `α' = α U`, `β' = β Ū`, which leaves the
/// state unchanged. Every matter vector is then phased so that its first
/// nonzero entry is real positive, with the gravity partner absorbing the phase.
/// The stream is only consumed for groups of size ≥ 2.
pub fn schmidt_decompose<R: Rng + ?Sized>(
    psi: &PureState,
    space: BipartiteSpace,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<SchmidtDecomposition> {
    crate::linalg::check_len(psi.dim(), space.total(), "Schmidt input")?;
    let m = PureState::from_raw(psi.amplitudes().clone(), space).amplitude_matrix();
    let (u, s, vt) = svd_sorted(&m)?;
    let kept = s.iter().take_while(|&&c| c * c > tol.zero_cutoff).count();

    let mut coefficients = s[..kept].to_vec();
    let mut matter: Vec<CVector> = (0..kept).map(|k| u.column(k).into_owned()).collect();
    let mut gravity: Vec<CVector> = (0..kept).map(|k| vt.row(k).transpose()).collect();

    for g in degenerate_groups(&coefficients, tol.degeneracy) {
        let n = g.len();
        if n < 2 {
            continue;
        }
        let rms = (coefficients[g.clone()].iter().map(|c| c * c).sum::<f64>() / n as f64).sqrt();
        coefficients[g.clone()].iter_mut().for_each(|c| *c = rms);
        let rot = haar_random_unitary(n, rng)?;
        let r = rot.matrix();
        let old_m: Vec<CVector> = matter[g.clone()].to_vec();
        let old_g: Vec<CVector> = gravity[g.clone()].to_vec();
        for j in 0..n {
            let mut a = CVector::zeros(space.dim_matter());
            let mut b = CVector::zeros(space.dim_gravity());
            for k in 0..n {
                a += &old_m[k] * r[(k, j)];
                b += &old_g[k] * r[(k, j)].conj();
            }
            matter[g.start + j] = a;
            gravity[g.start + j] = b;
        }
    }

    for (a, b) in matter.iter_mut().zip(gravity.iter_mut()) {
        fix_phase(a, b);
    }

    Ok(SchmidtDecomposition {
        coefficients,
        matter_vectors: matter,
        gravity_vectors: gravity,
        space,
    })
}

fn fix_phase(a: &mut CVector, b: &mut CVector) {
    const NONZERO: f64 = 1e-10;
    if let Some(first) = a.iter().copied().find(|z| z.norm() > NONZERO) {
        let phase = first / first.norm();
        *a *= phase.conj();
        *b *= phase;
    }
}

/// −Σ p ln p over eigenvalues above the zero cutoff (natural log, k = 1).
pub fn von_neumann_entropy(rho: &DensityOperator, tol: &Tolerances) -> Result<f64> {
    let values = rho.eigenvalues()?;
    Ok(shannon_entropy(&values, tol.zero_cutoff))
}

/// −Σ p ln p over the entries of `p` above `cutoff`.
pub fn shannon_entropy(p: &[f64], cutoff: f64) -> f64 {
    let s: f64 = p.iter().filter(|&&x| x > cutoff).map(|&x| -x * x.ln()).sum();
    // −0.0 and round-off below zero are reported as zero.
    s.max(0.0)
}

/// −Σ c² ln c² from Schmidt coefficients.
pub fn entanglement_entropy_from_schmidt(schmidt: &SchmidtDecomposition, tol: &Tolerances) -> f64 {
    let p: Vec<f64> = schmidt.coefficients.iter().map(|c| c * c).collect();
    shannon_entropy(&p, tol.zero_cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_entry_distance, partial_trace, Side};
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
        PureState::normalized(
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

    fn gram_deviation(vs: &[CVector]) -> f64 {
        let mut dev = 0.0f64;
        for (i, a) in vs.iter().enumerate() {
            for (j, b) in vs.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((a.dotc(b) - C64::new(target, 0.0)).norm());
            }
        }
        dev
    }

    #[test]
    fn groups_by_consecutive_gap() {
        let g = degenerate_groups(&[0.5, 0.5, 0.3, 0.2, 0.2, 0.2], 1e-9);
        assert_eq!(g, vec![0..2, 2..3, 3..6]);
        assert!(degenerate_groups(&[], 1e-9).is_empty());
    }

    #[test]
    fn resolution_of_diagonal() {
        let rho = DensityOperator::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let r = spectral_resolution(&rho, &tol()).unwrap();
        assert_eq!(r.multiplicities, vec![1, 1, 1]);
        for (l, e) in r.eigenvalues.iter().zip([0.5, 0.3, 0.2]) {
            assert_abs_diff_eq!(*l, e, epsilon = 1e-15);
        }
        assert_eq!(r.zero_rank, 0);
        assert!(max_entry_distance(&r.reconstruct(), rho.matrix()) < 1e-12);
    }

    #[test]
    fn resolution_fully_degenerate() {
        let rho = DensityOperator::maximally_mixed(2).unwrap();
        let r = spectral_resolution(&rho, &tol()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.multiplicities, vec![2]);
        assert_abs_diff_eq!(r.eigenvalues[0], 0.5, epsilon = 1e-15);
        assert!(max_entry_distance(&r.projectors[0], &CMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn resolution_drops_null_space() {
        let rho = DensityOperator::diagonal(&[0.5, 0.5, 0.0]).unwrap();
        let r = spectral_resolution(&rho, &tol()).unwrap();
        assert_eq!(r.multiplicities, vec![2]);
        assert_eq!(r.zero_rank, 1);
        assert_abs_diff_eq!(r.weight(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn resolution_projector_algebra() {
        let rho = DensityOperator::random(5, 3, &mut stream(4));
        let r = spectral_resolution(&rho, &tol()).unwrap();
        assert_eq!(r.zero_rank, 2);
        for (a, pa) in r.projectors.iter().enumerate() {
            assert!(max_entry_distance(&(pa * pa), pa) < 1e-9);
            assert_abs_diff_eq!(pa.trace().re, r.multiplicities[a] as f64, epsilon = 1e-6);
            for pb in r.projectors.iter().skip(a + 1) {
                assert!((pa * pb).norm() < 1e-9);
            }
        }
        assert!(r.eigenvalues.windows(2).all(|w| w[0] > w[1]));
        assert!(max_entry_distance(&r.reconstruct(), rho.matrix()) < 1e-8);
    }

    #[test]
    fn schmidt_of_product_state() {
        let psi = PureState::basis(q2(), 0, 1).unwrap();
        let s = schmidt_decompose(&psi, q2(), &mut stream(0), &tol()).unwrap();
        assert_eq!(s.rank(), 1);
        assert_abs_diff_eq!(s.coefficients[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.matter_vectors[0][0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.gravity_vectors[0][1].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn schmidt_of_bell_reconstructs_for_many_seeds() {
        let psi = bell();
        let mut bases = Vec::new();
        for seed in 0..100 {
            let s = schmidt_decompose(&psi, q2(), &mut stream(seed), &tol()).unwrap();
            assert_eq!(s.rank(), 2);
            for c in &s.coefficients {
                assert_abs_diff_eq!(*c, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
            }
            assert!((s.reconstruct() - psi.amplitudes()).norm() < 1e-9);
            assert!(gram_deviation(&s.matter_vectors) < 1e-9);
            assert!(gram_deviation(&s.gravity_vectors) < 1e-9);
            bases.push(s.matter_vectors[0].clone());
        }
        let differing = bases.iter().skip(1).filter(|b| (*b - &bases[0]).camax() > 0.1).count();
        assert!(differing >= 1);
    }

    #[test]
    fn schmidt_squares_match_reduced_spectrum() {
        let space = BipartiteSpace::new(3, 4).unwrap();
        let psi = PureState::random(space, &mut stream(77));
        let s = schmidt_decompose(&psi, space, &mut stream(1), &tol()).unwrap();
        let spec = partial_trace(&psi, space, Side::Matter).unwrap().eigenvalues().unwrap();
        assert_eq!(s.rank(), 3);
        for (c, l) in s.coefficients.iter().zip(&spec) {
            assert_abs_diff_eq!(c * c, *l, epsilon = 1e-9);
        }
        assert!(s.coefficients.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn schmidt_phase_convention() {
        let space = BipartiteSpace::new(3, 3).unwrap();
        let psi = PureState::random(space, &mut stream(8));
        let s = schmidt_decompose(&psi, space, &mut stream(0), &tol()).unwrap();
        for a in &s.matter_vectors {
            let first = a.iter().find(|z| z.norm() > 1e-10).unwrap();
            assert!(first.re > 0.0 && first.im.abs() < 1e-14);
        }
        // Deterministic outside degenerate groups, regardless of the stream.
        let s2 = schmidt_decompose(&psi, space, &mut stream(99), &tol()).unwrap();
        for (a, b) in s.matter_vectors.iter().zip(&s2.matter_vectors) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn entropy_examples() {
        let pure = bell().projector();
        assert_abs_diff_eq!(von_neumann_entropy(&pure, &tol()).unwrap(), 0.0, epsilon = 1e-12);
        let half = DensityOperator::maximally_mixed(2).unwrap();
        assert_abs_diff_eq!(
            von_neumann_entropy(&half, &tol()).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        let rho = DensityOperator::diagonal(&[0.5, 0.3, 0.2]).unwrap();
        // -(0.5 ln 0.5 + 0.3 ln 0.3 + 0.2 ln 0.2)
        assert_abs_diff_eq!(
            von_neumann_entropy(&rho, &tol()).unwrap(),
            1.0296530140645737,
            epsilon = 1e-12
        );
    }
}
