//! Symmetric logarithmic derivatives, quantum Fisher information and its
//! multiparameter matrix, and the quantum Cramér–Rao bound.
//!
//! The QFI is available through three algebraically equivalent routes:
//!
//! - [`QfiPath::SupportSum`]: eigenvalue/eigenvector derivative sums over the
//!   support, `Σ (∂λ_i)²/λ_i + Σ 4λ_i⟨∂ψ_i|∂ψ_i⟩ - Σ 8λ_iλ_k/(λ_i+λ_k)|⟨ψ_i|∂ψ_k⟩|²`;
//! - [`QfiPath::SldTrace`]: `Tr(ρ L²)` with the SLD built in the eigenbasis
//!   and traced in the computational basis;
//! - [`QfiPath::MatrixElement`]: `Σ 2|⟨ψ_i|∂ρ|ψ_j⟩|²/(λ_i+λ_j)` over pairs with
//!   `λ_i + λ_j > 0`.
//!
//! Only the first needs a non-degenerate support spectrum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Numerics;
use crate::derivs::{DerivativeBundle, d_rho_analytic, diag_gram, eigen_derivatives, ensure_constant_rank};
use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, HermitianMatrix, ZERO, anticommutator};
use crate::states::{SpectralData, StateFamily, spectral_support};

/// Values in `[-NEGATIVE_CLAMP, 0)` are round-off and clamp to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-9;
/// Information at or below this (relative to the largest eigenvalue for
/// matrices) counts as singular in the Cramér–Rao bound.
pub const SINGULAR_TOL: f64 = 1e-9;

/// SLD with the zero convention on the kernel-kernel block.
#[derive(Debug, Clone, PartialEq)]
pub struct SLDMatrix {
    /// `L` in the computational basis.
    pub mat: HermitianMatrix,
    /// `⟨ψ_i|L|ψ_j⟩`; entries with both `i, j` outside the support are
    /// exactly zero.
    pub eigenbasis: ComplexMatrix,
    pub support_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiPath {
    SupportSum,
    SldTrace,
    MatrixElement,
}

impl QfiPath {
    pub const ALL: [QfiPath; 3] = [QfiPath::SupportSum, QfiPath::SldTrace, QfiPath::MatrixElement];
}

/// QFI from each path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QfiPaths {
    pub support_sum: f64,
    pub sld_trace: f64,
    pub matrix_element: f64,
}

impl QfiPaths {
    pub fn values(&self) -> [f64; 3] {
        [self.support_sum, self.sld_trace, self.matrix_element]
    }

    pub fn max_gap(&self) -> f64 {
        let v = self.values();
        let mut gap = 0.0_f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                gap = gap.max((v[i] - v[j]).abs());
            }
        }
        gap
    }

    /// `max(1e-7, 1e-6·F)`.
    pub fn tolerance(&self) -> f64 {
        let f = self.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (1e-6 * f).max(1e-7)
    }

    pub fn agree(&self) -> bool {
        self.max_gap() <= self.tolerance()
    }
}

/// QFI matrix split into classical (eigenvalue) and quantum (eigenvector)
/// contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct QFIMResult {
    pub matrix: DMatrix<f64>,
    pub classical_part: DMatrix<f64>,
    pub quantum_part: DMatrix<f64>,
}

/// SLD solving `∂ρ = ½(ρL + Lρ)`:
/// `⟨ψ_i|L|ψ_j⟩ = 2⟨ψ_i|∂ρ|ψ_j⟩ / (λ_i + λ_j)` where `λ_i + λ_j > rank_tol`,
/// zero elsewhere.
pub fn sld(spec: &SpectralData, d_rho: &HermitianMatrix) -> Result<SLDMatrix> {
    if d_rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(spec.dim(), d_rho.dim()));
    }
    ensure_constant_rank(spec, d_rho)?;
    let lam = spec.values();
    let n = spec.dim();
    let d = spec.eigen.to_eigenbasis(d_rho.matrix());
    let eigenbasis = ComplexMatrix::from_fn(n, n, |i, j| {
        let denom = lam[i] + lam[j];
        if denom > spec.rank_tol {
            d[(i, j)] * (2.0 / denom)
        } else {
            ZERO
        }
    });
    let mat = HermitianMatrix::symmetrize(spec.eigen.from_eigenbasis(&eigenbasis));
    Ok(SLDMatrix {
        mat,
        eigenbasis,
        support_rank: spec.support_rank,
    })
}

/// `max |∂ρ - ½(ρL + Lρ)|`.
pub fn sld_residual(rho: &ComplexMatrix, d_rho: &HermitianMatrix, l: &SLDMatrix) -> f64 {
    let sym = anticommutator(rho, l.mat.matrix()) * Complex64::new(0.5, 0.0);
    crate::hermlin::max_abs_diff(d_rho.matrix(), &sym)
}

/// QFI for parameter `m` of the family at θ along a chosen path.
pub fn qfi(family: &StateFamily, theta: &[f64], m: usize, path: QfiPath, numerics: &Numerics) -> Result<f64> {
    let rho = family.evaluate(theta)?;
    let spec = spectral_support(&rho, numerics.rank_tol)?;
    let d_rho = d_rho_analytic(family, theta, m)?;
    qfi_from_derivative(&spec, &d_rho, path, numerics.degeneracy_tol)
}

/// All three paths at once.
pub fn qfi_all_paths(family: &StateFamily, theta: &[f64], m: usize, numerics: &Numerics) -> Result<QfiPaths> {
    let rho = family.evaluate(theta)?;
    let spec = spectral_support(&rho, numerics.rank_tol)?;
    let d_rho = d_rho_analytic(family, theta, m)?;
    let eval = |p| qfi_from_derivative(&spec, &d_rho, p, numerics.degeneracy_tol);
    Ok(QfiPaths {
        support_sum: eval(QfiPath::SupportSum)?,
        sld_trace: eval(QfiPath::SldTrace)?,
        matrix_element: eval(QfiPath::MatrixElement)?,
    })
}

/// QFI from the spectral data of ρ and a derivative ∂ρ. This is the entry
/// point for derivatives that do not come from a unitary family.
pub fn qfi_from_derivative(
    spec: &SpectralData,
    d_rho: &HermitianMatrix,
    path: QfiPath,
    degeneracy_tol: f64,
) -> Result<f64> {
    ensure_constant_rank(spec, d_rho)?;
    let raw = match path {
        QfiPath::SupportSum => {
            let ed = eigen_derivatives(spec, d_rho, degeneracy_tol)?;
            support_sum(spec, &ed.d_lambda, &ed.overlaps)
        }
        QfiPath::SldTrace => {
            let l = sld(spec, d_rho)?;
            let rho = spec.eigen.reconstruct();
            (rho * l.mat.matrix() * l.mat.matrix()).trace().re
        }
        QfiPath::MatrixElement => {
            let lam = spec.values();
            let d = spec.eigen.to_eigenbasis(d_rho.matrix());
            let mut total = 0.0;
            for i in 0..lam.len() {
                for j in 0..lam.len() {
                    let denom = lam[i] + lam[j];
                    if denom > spec.rank_tol {
                        total += 2.0 * d[(i, j)].norm_sqr() / denom;
                    }
                }
            }
            total
        }
    };
    clamp_information(raw)
}

/// The support-restricted QFI sum. Overlaps are `⟨ψ_j|∂ψ_i⟩` at `(j, i)`;
/// any gauge is accepted.
pub fn support_sum(spec: &SpectralData, d_lambda: &[f64], overlaps: &ComplexMatrix) -> f64 {
    let lam = spec.values();
    let m = spec.support_rank;
    let mut classical = 0.0;
    let mut gram_term = 0.0;
    let mut cross_term = 0.0;
    for i in 0..m {
        classical += d_lambda[i] * d_lambda[i] / lam[i];
        gram_term += 4.0 * lam[i] * diag_gram(overlaps, overlaps, i).re;
        for k in 0..m {
            cross_term += 8.0 * lam[i] * lam[k] / (lam[i] + lam[k]) * overlaps[(i, k)].norm_sqr();
        }
    }
    classical + gram_term - cross_term
}

fn clamp_information(f: f64) -> Result<f64> {
    if !f.is_finite() {
        return Err(Error::InvalidState(format!("non-finite information {f}")));
    }
    if f < -NEGATIVE_CLAMP {
        return Err(Error::NegativeInformation(f));
    }
    Ok(f.max(0.0))
}

/// QFI matrix from the support formulas, with the classical/quantum split.
pub fn qfim(family: &StateFamily, theta: &[f64], numerics: &Numerics) -> Result<QFIMResult> {
    let bundle = DerivativeBundle::compute(family, theta, numerics)?;
    Ok(qfim_from_bundle(&bundle))
}

pub fn qfim_from_bundle(bundle: &DerivativeBundle) -> QFIMResult {
    let spec = &bundle.spectral;
    let lam = spec.values();
    let m = spec.support_rank;
    let p = bundle.parameter_count();
    let mut classical = DMatrix::<f64>::zeros(p, p);
    let mut quantum = DMatrix::<f64>::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let (dla, dlb) = (&bundle.d_lambda[a], &bundle.d_lambda[b]);
            let (oa, ob) = (&bundle.overlaps[a], &bundle.overlaps[b]);
            let mut ct = 0.0;
            let mut qt = 0.0;
            for i in 0..m {
                ct += dla[i] * dlb[i] / lam[i];
                qt += 4.0 * lam[i] * bundle.diag_grams[a][b][i].re;
                for j in 0..m {
                    // ⟨∂_α ψ_i|ψ_j⟩⟨ψ_j|∂_β ψ_i⟩
                    let prod = oa[(j, i)].conj() * ob[(j, i)];
                    qt -= 8.0 * lam[i] * lam[j] / (lam[i] + lam[j]) * prod.re;
                }
            }
            classical[(a, b)] = ct;
            quantum[(a, b)] = qt;
        }
    }
    QFIMResult {
        matrix: &classical + &quantum,
        classical_part: classical,
        quantum_part: quantum,
    }
}

/// `½ Tr[ρ {L_α, L_β}]` for a list of SLDs, and the largest imaginary part
/// seen before it was discarded.
pub fn qfim_sld_trace(rho: &ComplexMatrix, slds: &[ComplexMatrix]) -> (DMatrix<f64>, f64) {
    let p = slds.len();
    let mut out = DMatrix::<f64>::zeros(p, p);
    let mut max_imag = 0.0_f64;
    for a in 0..p {
        for b in 0..p {
            let t = (rho * anticommutator(&slds[a], &slds[b])).trace() * 0.5;
            max_imag = max_imag.max(t.im.abs());
            out[(a, b)] = t.re;
        }
    }
    (out, max_imag)
}

/// SLDs for every parameter of the family at θ.
pub fn slds(family: &StateFamily, theta: &[f64], numerics: &Numerics) -> Result<Vec<SLDMatrix>> {
    let rho = family.evaluate(theta)?;
    let spec = spectral_support(&rho, numerics.rank_tol)?;
    (0..family.parameter_count())
        .map(|m| sld(&spec, &d_rho_analytic(family, theta, m)?))
        .collect()
}

/// Cramér–Rao bound `1/F` for a single parameter.
pub fn crb(f: f64) -> Result<f64> {
    // also catches NaN
    if !(f > SINGULAR_TOL) {
        return Err(Error::SingularInformation {
            eigenvalue: f,
            null_direction: vec![1.0],
        });
    }
    Ok(1.0 / f)
}

/// Matrix Cramér–Rao bound: the inverse of the QFIM. A (numerically)
/// singular QFIM reports the eigenvector of its smallest eigenvalue, i.e. the
/// parameter combination that carries no information.
pub fn crb_matrix(q: &QFIMResult) -> Result<DMatrix<f64>> {
    let f = &q.matrix;
    let p = f.nrows();
    let sym = (f + f.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (k_min, &l_min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("QFIM has at least one parameter");
    let l_max = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v));
    if l_min <= SINGULAR_TOL * l_max.max(1.0) {
        let v: DVector<f64> = eig.eigenvectors.column(k_min).into_owned();
        return Err(Error::SingularInformation {
            eigenvalue: l_min,
            null_direction: fix_sign(v).iter().copied().collect(),
        });
    }
    let mut inv = DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        let v = eig.eigenvectors.column(k);
        inv += (v * v.transpose()) / eig.eigenvalues[k];
    }
    Ok(inv)
}

/// Sign convention for real eigenvectors: largest-magnitude component
/// positive, lowest index on a tie.
fn fix_sign(v: DVector<f64>) -> DVector<f64> {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let k = v.iter().position(|x| x.abs() >= max - 1e-9 * max).unwrap_or(0);
    if v[k] < 0.0 { -v } else { v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::{identity, kron, max_abs_diff, pauli_z};
    use crate::states::{DEFAULT_RANK_TOL, DensityMatrix};
    use approx::assert_abs_diff_eq;

    fn herm(m: ComplexMatrix) -> HermitianMatrix {
        HermitianMatrix::new(m).unwrap()
    }

    fn bell_family(two: bool) -> StateFamily {
        let s = 1.0 / 2f64.sqrt();
        let rho0 = DensityMatrix::pure(&[Complex64::new(s, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)]).unwrap();
        let mut gens = vec![herm(kron(&pauli_z(), &identity(2)))];
        if two {
            gens.push(herm(kron(&identity(2), &pauli_z())));
        }
        StateFamily::new(rho0, gens).unwrap()
    }

    fn invariant_family() -> StateFamily {
        let rho0 = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.7, 0.3])).unwrap();
        StateFamily::new(rho0, vec![herm(pauli_z())]).unwrap()
    }

    #[test]
    fn classical_family_sld_is_sigma_z() {
        // ρ = ½(𝕀 + θσ_z) at θ = 0, ∂ρ = σ_z/2
        let rho = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.5, 0.5])).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        let d_rho = HermitianMatrix::from_real_diagonal(&[0.5, -0.5]);
        let l = sld(&spec, &d_rho).unwrap();
        assert!(max_abs_diff(l.mat.matrix(), &pauli_z()) < 1e-14);
        for path in [QfiPath::SldTrace, QfiPath::MatrixElement] {
            assert_abs_diff_eq!(qfi_from_derivative(&spec, &d_rho, path, 1e-8).unwrap(), 1.0, epsilon = 1e-14);
        }
        // flat spectrum: the support sum refuses it
        assert!(matches!(
            qfi_from_derivative(&spec, &d_rho, QfiPath::SupportSum, 1e-8),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn classical_family_away_from_degeneracy() {
        // θ = 0.2: ρ = diag(0.6, 0.4), F = 1/(1 - θ²), all classical
        let rho = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[0.6, 0.4])).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        let d_rho = HermitianMatrix::from_real_diagonal(&[0.5, -0.5]);
        for path in QfiPath::ALL {
            let f = qfi_from_derivative(&spec, &d_rho, path, 1e-8).unwrap();
            assert_abs_diff_eq!(f, 1.0 / 0.96, epsilon = 1e-14);
        }
    }

    #[test]
    fn invariant_state_has_zero_information() {
        let fam = invariant_family();
        let paths = qfi_all_paths(&fam, &[0.3], 0, &Numerics::default()).unwrap();
        assert_eq!(paths.values(), [0.0; 3]);
        let l = &slds(&fam, &[0.3], &Numerics::default()).unwrap()[0];
        assert_eq!(crate::hermlin::max_abs(l.mat.matrix()), 0.0);
        let q = qfim(&fam, &[0.3], &Numerics::default()).unwrap();
        assert_eq!(q.matrix, DMatrix::zeros(1, 1));
    }

    #[test]
    fn bell_state_qfi_is_four() {
        let fam = bell_family(false);
        let paths = qfi_all_paths(&fam, &[0.0], 0, &Numerics::default()).unwrap();
        for v in paths.values() {
            assert_abs_diff_eq!(v, 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bell_sld_is_twice_the_derivative() {
        let fam = bell_family(false);
        let rho = fam.evaluate(&[0.0]).unwrap();
        let spec = spectral_support(&rho, DEFAULT_RANK_TOL).unwrap();
        let d_rho = d_rho_analytic(&fam, &[0.0], 0).unwrap();
        let l = sld(&spec, &d_rho).unwrap();
        assert!(max_abs_diff(l.mat.matrix(), &(d_rho.matrix() * Complex64::new(2.0, 0.0))) < 1e-14);
        assert!(sld_residual(rho.matrix(), &d_rho, &l) < 1e-14);
        // kernel-kernel block is exactly zero
        for i in 1..4 {
            for j in 1..4 {
                assert_eq!(l.eigenbasis[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn bell_qfim_is_singular() {
        let fam = bell_family(true);
        let q = qfim(&fam, &[0.0, 0.0], &Numerics::default()).unwrap();
        for v in q.matrix.iter() {
            assert_abs_diff_eq!(*v, 4.0, epsilon = 1e-12);
        }
        match crb_matrix(&q) {
            Err(Error::SingularInformation { null_direction, .. }) => {
                let s = 1.0 / 2f64.sqrt();
                assert_abs_diff_eq!(null_direction[0], s, epsilon = 1e-9);
                assert_abs_diff_eq!(null_direction[1], -s, epsilon = 1e-9);
            }
            other => panic!("expected SingularInformation, got {other:?}"),
        }
    }

    #[test]
    fn scalar_bound() {
        assert_abs_diff_eq!(crb(4.0).unwrap(), 0.25);
        assert_eq!(crb(1.0).unwrap(), 1.0);
        assert!(matches!(crb(0.0), Err(Error::SingularInformation { .. })));
    }

    #[test]
    fn matrix_bound_inverts_qfim() {
        let m = DMatrix::from_row_slice(2, 2, &[2.5, -0.5, -0.5, 2.5]);
        let q = QFIMResult {
            matrix: m.clone(),
            classical_part: DMatrix::zeros(2, 2),
            quantum_part: m.clone(),
        };
        let inv = crb_matrix(&q).unwrap();
        assert!((inv * m - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn negative_round_off_is_clamped() {
        assert_eq!(clamp_information(-5e-10).unwrap(), 0.0);
        assert!(matches!(clamp_information(-1e-6), Err(Error::NegativeInformation(_))));
    }
}
