//! Parameter derivatives of ρ(θ) and of its eigensystem.
//!
//! ∂ρ is exact. For commuting generators it is the commutator `-i[G_m, ρ]`;
//! otherwise it comes from the Fréchet derivative of the matrix exponential
//! in the eigenbasis of `H(θ) = Σ θ_m G_m`. Eigenvalue and eigenvector
//! derivatives follow from first-order perturbation theory applied to ∂ρ,
//! in the parallel-transport gauge `⟨ψ_i|∂ψ_i⟩ = 0`.

use num_complex::Complex64;

use crate::Numerics;
use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, HermitianMatrix, ZERO, commutator, eig_hermitian, max_abs};
use crate::states::{SpectralData, StateFamily, spectral_support};

/// Entries of `⟨ψ_j|∂ψ_i⟩` with both indices in the kernel are left at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDerivatives {
    /// `∂λ_i`.
    pub d_lambda: Vec<f64>,
    /// `overlaps[(j, i)] = ⟨ψ_j|∂ψ_i⟩`.
    pub overlaps: ComplexMatrix,
}

/// Every derivative the support formulas need, evaluated at one θ.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub spectral: SpectralData,
    /// `∂_m ρ`, one per parameter.
    pub d_rho: Vec<HermitianMatrix>,
    /// `∂_α ∂_β ρ`, indexed `[α][β]`.
    pub d2_rho: Vec<Vec<HermitianMatrix>>,
    /// `∂_m λ_i`, indexed `[m][i]`.
    pub d_lambda: Vec<Vec<f64>>,
    /// `⟨ψ_j|∂_m ψ_i⟩` at `[m][(j, i)]`.
    pub overlaps: Vec<ComplexMatrix>,
    /// `⟨∂_α ψ_i|∂_β ψ_i⟩` at `[α][β][i]`.
    pub diag_grams: Vec<Vec<Vec<Complex64>>>,
}

impl DerivativeBundle {
    pub fn compute(family: &StateFamily, theta: &[f64], numerics: &Numerics) -> Result<Self> {
        let rho = family.evaluate(theta)?;
        let spectral = spectral_support(&rho, numerics.rank_tol)?;
        spectral.ensure_nondegenerate(numerics.degeneracy_tol)?;
        let p = family.parameter_count();

        let d_rho = (0..p)
            .map(|m| d_rho_analytic(family, theta, m))
            .collect::<Result<Vec<_>>>()?;
        for d in &d_rho {
            ensure_constant_rank(&spectral, d)?;
        }
        let mut d2_rho = vec![Vec::<HermitianMatrix>::with_capacity(p); p];
        for a in 0..p {
            for b in 0..p {
                let entry = if b < a {
                    d2_rho[b][a].clone()
                } else {
                    d2_rho_with_step(family, theta, a, b, numerics.fd_step_first)?
                };
                d2_rho[a].push(entry);
            }
        }

        let mut d_lambda = Vec::with_capacity(p);
        let mut overlaps = Vec::with_capacity(p);
        for d in &d_rho {
            let ed = eigen_derivatives(&spectral, d, numerics.degeneracy_tol)?;
            d_lambda.push(ed.d_lambda);
            overlaps.push(ed.overlaps);
        }
        let n = spectral.dim();
        let diag_grams = (0..p)
            .map(|a| {
                (0..p)
                    .map(|b| (0..n).map(|i| diag_gram(&overlaps[a], &overlaps[b], i)).collect())
                    .collect()
            })
            .collect();

        Ok(Self {
            spectral,
            d_rho,
            d2_rho,
            d_lambda,
            overlaps,
            diag_grams,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.d_rho.len()
    }
}

/// Exact `∂ρ/∂θ_m` at θ.
pub fn d_rho_analytic(family: &StateFamily, theta: &[f64], m: usize) -> Result<HermitianMatrix> {
    let g = family.generator(m)?;
    if family.is_commuting() {
        let rho = family.evaluate(theta)?;
        let d = commutator(g.matrix(), rho.matrix()) * Complex64::new(0.0, -1.0);
        return Ok(HermitianMatrix::symmetrize(d));
    }
    let du = d_unitary(family, theta, m)?;
    let u = family.unitary(theta)?;
    let left = &du * family.rho0().matrix() * u.adjoint();
    Ok(HermitianMatrix::symmetrize(&left + left.adjoint()))
}

/// `∂U/∂θ_m` for `U = exp(-iH)`: in the eigenbasis of `H` the derivative is
/// the generator's matrix elements weighted by divided differences of
/// `e^{-iλ}`, written in the cancellation-free form
/// `-i e^{-i(λ_j+λ_k)/2} sinc((λ_j-λ_k)/2)`.
fn d_unitary(family: &StateFamily, theta: &[f64], m: usize) -> Result<ComplexMatrix> {
    let h = family.hamiltonian(theta)?;
    let eig = eig_hermitian(&h)?;
    let g = eig.to_eigenbasis(family.generator(m)?.matrix());
    let lam = &eig.values;
    let n = lam.len();
    let weighted = ComplexMatrix::from_fn(n, n, |j, k| {
        let mean = 0.5 * (lam[j] + lam[k]);
        let half_gap = 0.5 * (lam[j] - lam[k]);
        let sinc = if half_gap.abs() < 1e-8 {
            1.0 - half_gap * half_gap / 6.0
        } else {
            half_gap.sin() / half_gap
        };
        Complex64::new(0.0, -1.0) * Complex64::from_polar(sinc, -mean) * g[(j, k)]
    });
    Ok(eig.from_eigenbasis(&weighted))
}

/// `∂_α ∂_β ρ` at θ.
///
/// Commuting generators give `-[G_α, [G_β, ρ]]` directly. Otherwise the
/// exact first derivative `∂_β ρ` is central-differenced along θ_α with
/// step `h` and symmetrized over (α, β).
pub fn d2_rho(family: &StateFamily, theta: &[f64], alpha: usize, beta: usize) -> Result<HermitianMatrix> {
    d2_rho_with_step(family, theta, alpha, beta, crate::DEFAULT_FD_STEP_FIRST)
}

pub fn d2_rho_with_step(
    family: &StateFamily,
    theta: &[f64],
    alpha: usize,
    beta: usize,
    h: f64,
) -> Result<HermitianMatrix> {
    let ga = family.generator(alpha)?.matrix();
    let gb = family.generator(beta)?.matrix();
    if family.is_commuting() {
        let rho = family.evaluate(theta)?;
        let inner = commutator(gb, rho.matrix());
        let d2 = -commutator(ga, &inner);
        return Ok(HermitianMatrix::symmetrize(d2));
    }
    let one_sided = |outer: usize, inner: usize| -> Result<ComplexMatrix> {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[outer] += h;
        minus[outer] -= h;
        let dp = d_rho_analytic(family, &plus, inner)?;
        let dm = d_rho_analytic(family, &minus, inner)?;
        Ok((dp.matrix() - dm.matrix()) / Complex64::new(2.0 * h, 0.0))
    };
    let ab = one_sided(alpha, beta)?;
    let ba = if alpha == beta { ab.clone() } else { one_sided(beta, alpha)? };
    Ok(HermitianMatrix::symmetrize((ab + ba) * Complex64::new(0.5, 0.0)))
}

/// Central difference of `ρ(θ)` along θ_m.
pub fn d_rho_central_difference(family: &StateFamily, theta: &[f64], m: usize, h: f64) -> Result<ComplexMatrix> {
    family.generator(m)?;
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[m] += h;
    minus[m] -= h;
    let rp = family.evaluate(&plus)?;
    let rm = family.evaluate(&minus)?;
    Ok((rp.matrix() - rm.matrix()) / Complex64::new(2.0 * h, 0.0))
}

/// Second central difference of `ρ(θ)`; the mixed case uses the
/// four-point stencil.
pub fn d2_rho_central_difference(
    family: &StateFamily,
    theta: &[f64],
    alpha: usize,
    beta: usize,
    h: f64,
) -> Result<ComplexMatrix> {
    family.generator(alpha)?;
    family.generator(beta)?;
    let at = |da: f64, db: f64| -> Result<ComplexMatrix> {
        let mut t = theta.to_vec();
        t[alpha] += da;
        t[beta] += db;
        Ok(family.evaluate(&t)?.matrix().clone())
    };
    if alpha == beta {
        let mid = family.evaluate(theta)?.matrix().clone();
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[alpha] += h;
        minus[alpha] -= h;
        let rp = family.evaluate(&plus)?.matrix().clone();
        let rm = family.evaluate(&minus)?.matrix().clone();
        return Ok((rp - mid * Complex64::new(2.0, 0.0) + rm) / Complex64::new(h * h, 0.0));
    }
    let sum = at(h, h)? - at(h, -h)? - at(-h, h)? + at(-h, -h)?;
    Ok(sum / Complex64::new(4.0 * h * h, 0.0))
}

/// `max |Π⊥ ∂ρ Π⊥|`: nonzero when the derivative leaks into the kernel,
/// i.e. the rank of ρ is changing at this θ.
pub fn kernel_leakage(spec: &SpectralData, d_rho: &HermitianMatrix) -> f64 {
    let k = spec.kernel_projector();
    max_abs(&(&k * d_rho.matrix() * &k))
}

pub const RANK_CHANGE_TOL: f64 = 1e-8;

pub fn ensure_constant_rank(spec: &SpectralData, d_rho: &HermitianMatrix) -> Result<()> {
    let leak = kernel_leakage(spec, d_rho);
    if leak > RANK_CHANGE_TOL {
        return Err(Error::RankChangeDetected(leak));
    }
    Ok(())
}

/// Hellmann–Feynman eigenvalue derivatives and first-order eigenvector
/// overlaps, `⟨ψ_j|∂ψ_i⟩ = ⟨ψ_j|∂ρ|ψ_i⟩ / (λ_i - λ_j)`.
pub fn eigen_derivatives(
    spec: &SpectralData,
    d_rho: &HermitianMatrix,
    degeneracy_tol: f64,
) -> Result<EigenDerivatives> {
    if d_rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(spec.dim(), d_rho.dim()));
    }
    spec.ensure_nondegenerate(degeneracy_tol)?;
    let n = spec.dim();
    let m = spec.support_rank;
    let lam = spec.values();
    let d = spec.eigen.to_eigenbasis(d_rho.matrix());

    let d_lambda = (0..n).map(|i| d[(i, i)].re).collect();
    let overlaps = ComplexMatrix::from_fn(n, n, |j, i| {
        if i == j || (i >= m && j >= m) {
            ZERO
        } else {
            d[(j, i)] / (lam[i] - lam[j])
        }
    });
    Ok(EigenDerivatives { d_lambda, overlaps })
}

/// `⟨∂_α ψ_i|∂_β ψ_i⟩ = Σ_k conj(⟨ψ_k|∂_α ψ_i⟩) ⟨ψ_k|∂_β ψ_i⟩`, by
/// completeness of the eigenbasis. The `k = i` term vanishes in the
/// parallel-transport gauge but is kept so other gauges stay consistent.
pub fn diag_gram(overlaps_alpha: &ComplexMatrix, overlaps_beta: &ComplexMatrix, i: usize) -> Complex64 {
    overlaps_alpha
        .column(i)
        .iter()
        .zip(overlaps_beta.column(i).iter())
        .map(|(a, b)| a.conj() * b)
        .sum()
}

/// `∂_α ∂_β λ_i` from second-order perturbation theory.
pub fn second_eigen_derivative(
    spec: &SpectralData,
    d_rho_alpha: &HermitianMatrix,
    d_rho_beta: &HermitianMatrix,
    d2_rho: &HermitianMatrix,
    i: usize,
) -> f64 {
    let lam = spec.values();
    let m = spec.support_rank;
    let da = spec.eigen.to_eigenbasis(d_rho_alpha.matrix());
    let db = spec.eigen.to_eigenbasis(d_rho_beta.matrix());
    let d2 = spec.eigen.to_eigenbasis(d2_rho.matrix());
    let mut total = d2[(i, i)].re;
    for k in 0..lam.len() {
        if k == i || (k >= m && i >= m) {
            continue;
        }
        total += 2.0 * (da[(i, k)] * db[(k, i)]).re / (lam[i] - lam[k]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::{from_real_rows, identity, kron, max_abs_diff, pauli_x, pauli_y, pauli_z};
    use crate::sampling;
    use crate::states::{DEFAULT_RANK_TOL, DensityMatrix};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand::rngs::StdRng;

    fn herm(m: ComplexMatrix) -> HermitianMatrix {
        HermitianMatrix::new(m).unwrap()
    }

    fn plus_family() -> StateFamily {
        let s = 1.0 / 2f64.sqrt();
        let rho0 = DensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(s, 0.0)]).unwrap();
        StateFamily::new(rho0, vec![herm(pauli_z())]).unwrap()
    }

    fn invariant_family() -> StateFamily {
        let rho0 = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[1.0, 0.0])).unwrap();
        StateFamily::new(rho0, vec![herm(pauli_z())]).unwrap()
    }

    fn bell_family() -> StateFamily {
        let s = 1.0 / 2f64.sqrt();
        let rho0 = DensityMatrix::pure(&[Complex64::new(s, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)]).unwrap();
        StateFamily::new(rho0, vec![herm(kron(&pauli_z(), &identity(2)))]).unwrap()
    }

    #[test]
    fn invariant_state_has_zero_derivatives() {
        let fam = invariant_family();
        assert_eq!(max_abs(d_rho_analytic(&fam, &[0.4], 0).unwrap().matrix()), 0.0);
        assert_eq!(max_abs(d2_rho(&fam, &[0.4], 0, 0).unwrap().matrix()), 0.0);
        let b = DerivativeBundle::compute(&fam, &[0.4], &Numerics::default()).unwrap();
        assert!(b.d_lambda[0].iter().all(|&x| x == 0.0));
        assert_eq!(diag_gram(&b.overlaps[0], &b.overlaps[0], 0), ZERO);
    }

    #[test]
    fn plus_state_first_derivative_is_sigma_y() {
        let d = d_rho_analytic(&plus_family(), &[0.0], 0).unwrap();
        assert!(max_abs_diff(d.matrix(), &pauli_y()) < 1e-15);
    }

    #[test]
    fn plus_state_second_derivative_is_minus_two_sigma_x() {
        let d2 = d2_rho(&plus_family(), &[0.0], 0, 0).unwrap();
        assert!(max_abs_diff(d2.matrix(), &(pauli_x() * Complex64::new(-2.0, 0.0))) < 1e-15);
    }

    #[test]
    fn classical_family_eigenvalue_derivatives() {
        // ρ = ½(𝕀 + θσ_z) at θ = 0, supplied through its derivative σ_z/2
        let rho = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.5, 0.5])).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        let d_rho = HermitianMatrix::from_real_diagonal(&[0.5, -0.5]);
        // the flat spectrum is degenerate, so use the diagonal elements directly
        let d = spec.eigen.to_eigenbasis(d_rho.matrix());
        let mut dl: Vec<f64> = (0..2).map(|i| d[(i, i)].re).collect();
        dl.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(dl, vec![0.5, -0.5]);
        assert!(matches!(
            eigen_derivatives(&spec, &d_rho, 1e-8),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn split_classical_family_eigenvalue_derivatives() {
        let rho = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.6, 0.4])).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        let ed = eigen_derivatives(&spec, &HermitianMatrix::from_real_diagonal(&[0.5, -0.5]), 1e-8).unwrap();
        assert_eq!(ed.d_lambda, vec![0.5, -0.5]);
        assert_eq!(max_abs(&ed.overlaps), 0.0);
    }

    #[test]
    fn bell_gram_is_generator_variance() {
        let b = DerivativeBundle::compute(&bell_family(), &[0.0], &Numerics::default()).unwrap();
        let g = b.diag_grams[0][0][0];
        assert_abs_diff_eq!(g.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn noncommuting_first_derivative_matches_finite_difference() {
        let rho0 = DensityMatrix::new(herm(from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]))).unwrap();
        let fam = StateFamily::new(rho0, vec![herm(pauli_x()), herm(pauli_z())]).unwrap();
        assert!(!fam.is_commuting());
        let theta = [0.3, -0.8];
        for m in 0..2 {
            let exact = d_rho_analytic(&fam, &theta, m).unwrap();
            let fd = d_rho_central_difference(&fam, &theta, m, 1e-5).unwrap();
            assert!(max_abs_diff(exact.matrix(), &fd) < 1e-8);
        }
    }

    #[test]
    fn rank_change_is_detected() {
        // a tiny eigenvalue pushed below rank_tol looks like kernel, but the
        // generator couples it to a true kernel direction
        let rho0 = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[1.0 - 1e-6, 1e-6, 0.0])).unwrap();
        let g = herm(from_real_rows(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]));
        let fam = StateFamily::new(rho0, vec![g]).unwrap();
        let numerics = Numerics {
            rank_tol: 1e-5,
            ..Numerics::default()
        };
        assert!(matches!(
            DerivativeBundle::compute(&fam, &[0.0], &numerics),
            Err(Error::RankChangeDetected(_))
        ));
        DerivativeBundle::compute(&fam, &[0.0], &Numerics::default()).unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn derivatives_match_finite_differences(seed in any::<u64>(), n in 2usize..6, p in 1usize..3) {
            let mut rng = StdRng::seed_from_u64(seed);
            let rank = 1 + (seed as usize % n);
            let fam = sampling::random_family(&mut rng, n, rank, p);
            let theta: Vec<f64> = (0..p).map(|k| 0.3 - 0.4 * k as f64).collect();
            for a in 0..p {
                let exact = d_rho_analytic(&fam, &theta, a).unwrap();
                let fd = d_rho_central_difference(&fam, &theta, a, 1e-5).unwrap();
                prop_assert!(max_abs_diff(exact.matrix(), &fd) <= 1e-8);
                prop_assert!(exact.matrix().trace().norm() <= 1e-10);
                for b in 0..p {
                    let exact2 = d2_rho(&fam, &theta, a, b).unwrap();
                    // Richardson on the second difference removes its O(h²) error
                    let coarse = d2_rho_central_difference(&fam, &theta, a, b, 1e-3).unwrap();
                    let fine = d2_rho_central_difference(&fam, &theta, a, b, 5e-4).unwrap();
                    let fd2 = (fine * Complex64::new(4.0, 0.0) - coarse) / Complex64::new(3.0, 0.0);
                    prop_assert!(max_abs_diff(exact2.matrix(), &fd2) <= 1e-7, "gap {:e}", max_abs_diff(exact2.matrix(), &fd2));
                    prop_assert!(exact2.matrix().trace().norm() <= 1e-9);
                }
            }
        }

        #[test]
        fn eigen_derivative_invariants(seed in any::<u64>(), n in 2usize..6) {
            let mut rng = StdRng::seed_from_u64(seed);
            let rank = 1 + (seed as usize % n);
            let fam = sampling::random_family(&mut rng, n, rank, 1);
            let theta = [0.7];
            let numerics = Numerics::default();
            let b = DerivativeBundle::compute(&fam, &theta, &numerics).unwrap();
            let sum: f64 = b.d_lambda[0].iter().sum();
            prop_assert!(sum.abs() <= 1e-9);
            let o = &b.overlaps[0];
            let m = b.spectral.support_rank;
            for i in 0..n {
                for j in 0..n {
                    if i < m || j < m {
                        prop_assert!((o[(i, j)] + o[(j, i)].conj()).norm() <= 1e-8);
                    }
                }
            }
            // Hellmann–Feynman against differenced eigenvalues
            let h = 1e-5;
            let lp = spectral_support(&fam.evaluate(&[theta[0] + h]).unwrap(), 1e-10).unwrap();
            let lm = spectral_support(&fam.evaluate(&[theta[0] - h]).unwrap(), 1e-10).unwrap();
            for i in 0..m {
                let fd = (lp.values()[i] - lm.values()[i]) / (2.0 * h);
                prop_assert!((fd - b.d_lambda[0][i]).abs() <= 1e-6);
            }
        }
    }
}
