//! Density matrices, their support, and unitary parameter families
//! `ρ(θ) = U(θ) ρ₀ U(θ)†` with `U(θ) = exp(-i Σ_m θ_m G_m)`.
//!
//! Everything is evaluated pointwise in θ. Eigenbranches are not tracked
//! across level crossings, so a quantity such as the QFI may jump at a θ
//! where the rank of ρ changes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermlin::{
    ComplexMatrix, EigenSystem, HermitianMatrix, commutator, eig_hermitian, hermiticity_defect,
    identity, max_abs, max_abs_diff,
};

/// Default absolute cutoff separating support eigenvalues from the kernel.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const NEGATIVITY_TOL: f64 = 1e-10;
const UNITARITY_TOL: f64 = 1e-10;

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(mat: HermitianMatrix) -> Result<Self> {
        let tr = mat.matrix().trace();
        if (tr.re - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let eig = eig_hermitian(&mat)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -NEGATIVITY_TOL {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        Ok(Self { mat })
    }

    /// `|ψ⟩⟨ψ|` for a normalized state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        Self::new(HermitianMatrix::symmetrize(&v * v.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.mat
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.mat.matrix()
    }
}

/// Spectral decomposition of a density matrix split into support and kernel.
///
/// The first `support_rank` eigenpairs (eigenvalues above `rank_tol`) span
/// the support; the rest span the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub eigen: EigenSystem,
    pub support_rank: usize,
    pub rank_tol: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigen.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn support_values(&self) -> &[f64] {
        &self.eigen.values[..self.support_rank]
    }

    /// `Π = Σ_{i≤M} |ψ_i⟩⟨ψ_i|`.
    pub fn support_projector(&self) -> ComplexMatrix {
        self.projector(0..self.support_rank)
    }

    /// `Π⊥ = 𝕀 - Π`.
    pub fn kernel_projector(&self) -> ComplexMatrix {
        self.projector(self.support_rank..self.dim())
    }

    fn projector(&self, range: std::ops::Range<usize>) -> ComplexMatrix {
        let n = self.dim();
        let mut p = ComplexMatrix::zeros(n, n);
        for k in range {
            let v = self.eigen.vectors.column(k);
            p += v * v.adjoint();
        }
        p
    }

    /// First pair of eigenvalues, at least one inside the support, closer
    /// than `tol`. Kernel-kernel ties are ignored.
    pub fn degenerate_pair(&self, tol: f64) -> Option<(usize, usize)> {
        let lam = self.values();
        for i in 0..self.support_rank {
            for j in (i + 1)..self.dim() {
                if (lam[i] - lam[j]).abs() < tol {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn ensure_nondegenerate(&self, tol: f64) -> Result<()> {
        match self.degenerate_pair(tol) {
            Some((i, j)) => Err(Error::DegenerateSpectrum {
                i,
                j,
                lambda_i: self.values()[i],
                lambda_j: self.values()[j],
                tol,
            }),
            None => Ok(()),
        }
    }
}

/// Eigendecomposition of ρ with the support cut at `rank_tol`.
///
/// Eigenvalues are reported as computed; the support is not renormalized.
pub fn spectral_support(rho: &DensityMatrix, rank_tol: f64) -> Result<SpectralData> {
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rank_tol must lie in (0, 1), got {rank_tol}"
        )));
    }
    let eigen = eig_hermitian(rho.hermitian())?;
    let support_rank = eigen.values.iter().filter(|&&l| l > rank_tol).count();
    if support_rank == 0 {
        return Err(Error::InvalidState(format!(
            "no eigenvalue above rank_tol = {rank_tol:e}"
        )));
    }
    Ok(SpectralData {
        eigen,
        support_rank,
        rank_tol,
    })
}

/// θ ↦ U(θ) ρ₀ U(θ)† with `U(θ) = exp(-i Σ_m θ_m G_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFamily {
    rho0: DensityMatrix,
    generators: Vec<HermitianMatrix>,
    commuting: bool,
}

impl StateFamily {
    pub fn new(rho0: DensityMatrix, generators: Vec<HermitianMatrix>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidArgument(
                "a state family needs at least one generator".into(),
            ));
        }
        let n = rho0.dim();
        if let Some(g) = generators.iter().find(|g| g.dim() != n) {
            return Err(Error::DimensionMismatch(n, g.dim()));
        }
        let commuting = generators.iter().enumerate().all(|(a, ga)| {
            generators[a + 1..].iter().all(|gb| {
                let scale = (max_abs(ga.matrix()) * max_abs(gb.matrix())).max(1.0);
                max_abs(&commutator(ga.matrix(), gb.matrix())) <= 1e-12 * scale
            })
        });
        Ok(Self {
            rho0,
            generators,
            commuting,
        })
    }

    pub fn rho0(&self) -> &DensityMatrix {
        &self.rho0
    }

    pub fn generators(&self) -> &[HermitianMatrix] {
        &self.generators
    }

    pub fn generator(&self, m: usize) -> Result<&HermitianMatrix> {
        self.generators.get(m).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "parameter index {m} out of range (family has {})",
                self.generators.len()
            ))
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.generators.len()
    }

    pub fn dim(&self) -> usize {
        self.rho0.dim()
    }

    /// True when every pair of generators commutes.
    pub fn is_commuting(&self) -> bool {
        self.commuting
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.parameter_count() {
            return Err(Error::InvalidArgument(format!(
                "theta has {} entries, family has {} parameters",
                theta.len(),
                self.parameter_count()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("theta must be finite".into()));
        }
        Ok(())
    }

    /// `H(θ) = Σ_m θ_m G_m`.
    pub fn hamiltonian(&self, theta: &[f64]) -> Result<HermitianMatrix> {
        self.check_theta(theta)?;
        let n = self.dim();
        let mut h = ComplexMatrix::zeros(n, n);
        for (t, g) in theta.iter().zip(&self.generators) {
            h += g.matrix() * Complex64::new(*t, 0.0);
        }
        Ok(HermitianMatrix::symmetrize(h))
    }

    pub fn unitary(&self, theta: &[f64]) -> Result<ComplexMatrix> {
        let h = self.hamiltonian(theta)?;
        let u = exp_minus_i(&h)?;
        let err = max_abs_diff(&(u.adjoint() * &u), &identity(self.dim()));
        if err > UNITARITY_TOL {
            return Err(Error::NonUnitary(err));
        }
        Ok(u)
    }

    /// `ρ(θ)`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<DensityMatrix> {
        self.check_theta(theta)?;
        if theta.iter().all(|&t| t == 0.0) {
            return Ok(self.rho0.clone());
        }
        let u = self.unitary(theta)?;
        let rho = &u * self.rho0.matrix() * u.adjoint();
        DensityMatrix::new(HermitianMatrix::symmetrize(rho))
    }
}

/// `exp(-iH)` through the eigendecomposition of `H`.
pub fn exp_minus_i(h: &HermitianMatrix) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(h)?;
    Ok(eig.reconstruct_with(|l| Complex64::from_polar(1.0, -l)))
}

/// `exp(A)` for anti-Hermitian `A = -iH`.
pub fn matrix_exp_antihermitian(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    crate::hermlin::check_square(a)?;
    let defect = max_abs(&(a + a.adjoint()));
    if defect > 1e-10 * max_abs(a).max(1.0) {
        return Err(Error::NotAntiHermitian(defect));
    }
    let h = a * Complex64::new(0.0, 1.0);
    debug_assert!(hermiticity_defect(&h) <= 2.0 * defect + f64::EPSILON);
    exp_minus_i(&HermitianMatrix::symmetrize(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::{I, ZERO, from_real_rows, kron, pauli_x, pauli_z};
    use crate::sampling;
    use crate::xstate::{XStateParams, xstate_density};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand::rngs::StdRng;
    use std::f64::consts::PI;

    fn herm(m: ComplexMatrix) -> HermitianMatrix {
        HermitianMatrix::new(m).unwrap()
    }

    fn plus_state() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        DensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(s, 0.0)]).unwrap()
    }

    fn bell() -> DensityMatrix {
        let s = 1.0 / 2f64.sqrt();
        DensityMatrix::pure(&[Complex64::new(s, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)]).unwrap()
    }

    #[test]
    fn density_validation() {
        assert!(matches!(
            DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.5, 0.4])),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[1.1, -0.1])),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn bell_support_is_one_dimensional() {
        let spec = spectral_support(&bell(), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(spec.support_rank, 1);
        assert_abs_diff_eq!(spec.values()[0], 1.0, epsilon = 1e-14);
        for &l in &spec.values()[1..] {
            assert!(l.abs() < 1e-14);
        }
    }

    #[test]
    fn xstate_supports() {
        let q = 0.25;
        let rho = xstate_density(&XStateParams::new(q, q, q, q, Complex64::new(q, 0.0)).unwrap()).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(spec.support_rank, 2);
        assert_abs_diff_eq!(spec.values()[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(spec.values()[1], 0.5, epsilon = 1e-14);

        let rho = xstate_density(&XStateParams::new(0.3, 0.15, 0.25, 0.3, Complex64::new(0.2, 0.0)).unwrap()).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(spec.support_rank, 3);
        for (got, want) in spec.support_values().iter().zip([0.5, 0.4, 0.1]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn rank_tol_must_be_in_unit_interval() {
        assert!(matches!(spectral_support(&bell(), 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(spectral_support(&bell(), 1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn support_degeneracy_is_flagged() {
        let rho = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.5, 0.5, 0.0, 0.0])).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        assert!(matches!(
            spec.ensure_nondegenerate(1e-8),
            Err(Error::DegenerateSpectrum { i: 0, j: 1, .. })
        ));
        // kernel ties alone are harmless
        let rho = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.7, 0.3, 0.0, 0.0])).unwrap();
        spectral_support(&rho, DEFAULT_RANK_TOL).unwrap().ensure_nondegenerate(1e-8).unwrap();
    }

    #[test]
    fn theta_zero_returns_initial_state() {
        let fam = StateFamily::new(plus_state(), vec![herm(pauli_z())]).unwrap();
        assert_eq!(fam.evaluate(&[0.0]).unwrap(), plus_state());
    }

    #[test]
    fn commuting_state_is_invariant() {
        let rho0 = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[1.0, 0.0])).unwrap();
        let fam = StateFamily::new(rho0.clone(), vec![herm(pauli_z())]).unwrap();
        for t in [0.3, -1.7, 12.0] {
            assert!(max_abs_diff(fam.evaluate(&[t]).unwrap().matrix(), rho0.matrix()) < 1e-15);
        }
    }

    #[test]
    fn plus_state_under_sigma_z() {
        // diag(-i, i) maps |+⟩ to |−⟩; a quarter turn lands on |+i⟩
        let fam = StateFamily::new(plus_state(), vec![herm(pauli_z())]).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let minus = DensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(-s, 0.0)]).unwrap();
        let plus_i = DensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(0.0, s)]).unwrap();
        let rho = fam.evaluate(&[PI / 2.0]).unwrap();
        assert!(max_abs_diff(rho.matrix(), minus.matrix()) < 1e-14);
        let rho = fam.evaluate(&[PI / 4.0]).unwrap();
        assert!(max_abs_diff(rho.matrix(), plus_i.matrix()) < 1e-14);
    }

    #[test]
    fn exponential_examples() {
        let zero = ComplexMatrix::zeros(3, 3);
        assert!(max_abs_diff(&matrix_exp_antihermitian(&zero).unwrap(), &identity(3)) < 1e-15);

        let a = pauli_z() * Complex64::new(0.0, -PI / 2.0);
        let u = matrix_exp_antihermitian(&a).unwrap();
        let expected = ComplexMatrix::from_row_slice(2, 2, &[-I, ZERO, ZERO, I]);
        assert!(max_abs_diff(&u, &expected) < 1e-15);

        assert!(matches!(
            matrix_exp_antihermitian(&pauli_x()),
            Err(Error::NotAntiHermitian(_))
        ));
    }

    #[test]
    fn family_validation() {
        assert!(StateFamily::new(bell(), vec![]).is_err());
        assert!(matches!(
            StateFamily::new(bell(), vec![herm(pauli_z())]),
            Err(Error::DimensionMismatch(4, 2))
        ));
        let fam = StateFamily::new(bell(), vec![herm(kron(&pauli_z(), &identity(2)))]).unwrap();
        assert!(fam.evaluate(&[0.1, 0.2]).is_err());
        assert!(fam.evaluate(&[f64::NAN]).is_err());
    }

    #[test]
    fn commutation_detection() {
        let za = herm(kron(&pauli_z(), &identity(2)));
        let zb = herm(kron(&identity(2), &pauli_z()));
        let xa = herm(kron(&pauli_x(), &identity(2)));
        assert!(StateFamily::new(bell(), vec![za.clone(), zb]).unwrap().is_commuting());
        assert!(!StateFamily::new(bell(), vec![za, xa]).unwrap().is_commuting());
    }

    #[test]
    fn kernel_projector_annihilates_state() {
        let rho = DensityMatrix::new(herm(from_real_rows(&[
            &[0.5, 0.0, 0.0, 0.5],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.5, 0.0, 0.0, 0.5],
        ])))
        .unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        let p = spec.support_projector();
        assert!(max_abs_diff(&(&p * rho.matrix()), rho.matrix()) < 1e-14);
        assert!(max_abs_diff(&(p + spec.kernel_projector()), &identity(4)) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn evaluation_preserves_spectrum_and_rank(seed in any::<u64>(), n in 2usize..6, t in -3.0f64..3.0) {
            let mut rng = StdRng::seed_from_u64(seed);
            let rank = 1 + (seed as usize) % n;
            let fam = sampling::random_family(&mut rng, n, rank, 2);
            let theta = [t, 0.5 * t - 0.2];
            let rho = fam.evaluate(&theta).unwrap();
            let s0 = spectral_support(fam.rho0(), DEFAULT_RANK_TOL).unwrap();
            let s1 = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
            prop_assert_eq!(s0.support_rank, s1.support_rank);
            for (a, b) in s0.values().iter().zip(s1.values()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
            let p = s1.support_projector();
            prop_assert!(max_abs_diff(&(&p * rho.matrix()), rho.matrix()) <= n as f64 * DEFAULT_RANK_TOL);
        }

        #[test]
        fn unitary_is_unitary(seed in any::<u64>(), n in 1usize..7) {
            let mut rng = StdRng::seed_from_u64(seed);
            let h = sampling::random_hermitian(&mut rng, n, 2.0);
            let a = h.matrix() * Complex64::new(0.0, -1.0);
            let u = matrix_exp_antihermitian(&a).unwrap();
            prop_assert!(max_abs_diff(&(u.adjoint() * &u), &identity(n)) <= 1e-10);
        }
    }
}
