//! Uhlmann fidelity and fidelity susceptibility.
//!
//! Expanding `√ρ ρ(θ+δ) √ρ` to second order in δ and taking its square root
//! as `ρ + 𝓧δ + 𝓨δ²` gives `f = 1 + Tr𝓧 δ + Tr𝓨 δ² + O(δ³)`. The operator
//! equations `𝓐 = ρ𝓧 + 𝓧ρ` and `½𝓑 = ρ𝓨 + 𝓨ρ + 𝓧²` live entirely on the
//! support of ρ, so `Tr𝓧 = ½ Σ ∂λ_i = 0` and the susceptibility
//! `χ_f = -2 Tr𝓨` only involves support eigenpairs. [`expansion_terms`]
//! evaluates the closed-form diagonal of 𝓨; [`fs_numeric`] estimates
//! `χ_f` straight from fidelities.

use num_complex::Complex64;
use serde::Serialize;

use crate::Numerics;
use crate::derivs::{
    d_rho_analytic, d2_rho_with_step, diag_gram, eigen_derivatives, ensure_constant_rank,
    second_eigen_derivative,
};
use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, HermitianMatrix, PSD_CLAMP_TOL, eig_hermitian, psd_sqrt};
use crate::metrology::{QfiPath, qfi_from_derivative};
use crate::states::{DensityMatrix, StateFamily, spectral_support};

/// Eigenvalues of `√ρ σ √ρ` below this are zeroed before the square root.
pub const PRODUCT_EIGEN_FLOOR: f64 = 1e-14;
/// Step sizes of the first-order scaling check.
pub const SCALING_STEPS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

/// `f(ρ, σ) = Tr √(√ρ σ √ρ)`, clamped to `[0, 1]`.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let root = psd_sqrt(rho.hermitian(), PSD_CLAMP_TOL)?;
    let product = HermitianMatrix::symmetrize(root.matrix() * sigma.matrix() * root.matrix());
    let eig = eig_hermitian(&product)?;
    let f: f64 = eig
        .values
        .iter()
        .filter(|&&mu| mu >= PRODUCT_EIGEN_FLOOR)
        .map(|mu| mu.sqrt())
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Second-order expansion data of the fidelity for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerms {
    /// First-order coefficient `Tr𝓧 = ½ Σ_{i≤M} ∂λ_i`.
    pub tr_x: f64,
    /// Second-order coefficient with `¼ Σ ∂²λ_i = 0` applied.
    pub tr_y: f64,
    /// `𝓨_ii` for the support eigenpairs, including the `¼∂²λ_i` term.
    pub y_diag: Vec<f64>,
    /// `¼ Σ_{i≤M} ∂²λ_i`, dropped from `tr_y`; zero while the rank is constant.
    pub dropped_second_order_trace: f64,
    /// `𝓐_ij = √(λ_iλ_j) ⟨ψ_i|∂ρ|ψ_j⟩` on the support.
    pub a_support: ComplexMatrix,
    /// `𝓑_ij = √(λ_iλ_j) ⟨ψ_i|∂²ρ|ψ_j⟩` on the support.
    pub b_support: ComplexMatrix,
}

impl ExpansionTerms {
    /// `χ_f = -2 Tr𝓨`.
    pub fn susceptibility(&self) -> f64 {
        -2.0 * self.tr_y
    }
}

pub fn expansion_terms(family: &StateFamily, theta: &[f64], m: usize, numerics: &Numerics) -> Result<ExpansionTerms> {
    let rho = family.evaluate(theta)?;
    let spec = spectral_support(&rho, numerics.rank_tol)?;
    spec.ensure_nondegenerate(numerics.degeneracy_tol)?;
    let d_rho = d_rho_analytic(family, theta, m)?;
    ensure_constant_rank(&spec, &d_rho)?;
    let d2_rho = d2_rho_with_step(family, theta, m, m, numerics.fd_step_first)?;
    let ed = eigen_derivatives(&spec, &d_rho, numerics.degeneracy_tol)?;

    let lam = spec.values();
    let rank = spec.support_rank;
    let dl = &ed.d_lambda;
    let ov = &ed.overlaps;

    let tr_x = 0.5 * dl[..rank].iter().sum::<f64>();

    let mut y_diag = Vec::with_capacity(rank);
    let mut tr_y = 0.0;
    let mut dropped = 0.0;
    for i in 0..rank {
        let d2_lambda = second_eigen_derivative(&spec, &d_rho, &d_rho, &d2_rho, i);
        let mut rest = -dl[i] * dl[i] / (8.0 * lam[i]) - 0.5 * lam[i] * diag_gram(ov, ov, i).re;
        for k in 0..rank {
            let s = lam[i] + lam[k];
            rest += 2.0 * lam[i] * lam[k] * lam[k] / (s * s) * ov[(i, k)].norm_sqr();
        }
        y_diag.push(0.25 * d2_lambda + rest);
        tr_y += rest;
        dropped += 0.25 * d2_lambda;
    }

    let d = spec.eigen.to_eigenbasis(d_rho.matrix());
    let d2 = spec.eigen.to_eigenbasis(d2_rho.matrix());
    let weight = |i: usize, j: usize| Complex64::new((lam[i] * lam[j]).sqrt(), 0.0);
    let a_support = ComplexMatrix::from_fn(rank, rank, |i, j| weight(i, j) * d[(i, j)]);
    let b_support = ComplexMatrix::from_fn(rank, rank, |i, j| weight(i, j) * d2[(i, j)]);

    Ok(ExpansionTerms {
        tr_x,
        tr_y,
        y_diag,
        dropped_second_order_trace: dropped,
        a_support,
        b_support,
    })
}

/// `χ_f = -2 Tr𝓨` from the support expansion.
pub fn fs_analytic(family: &StateFamily, theta: &[f64], m: usize, numerics: &Numerics) -> Result<f64> {
    Ok(expansion_terms(family, theta, m, numerics)?.susceptibility())
}

/// Finite-difference susceptibility estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FsEstimate {
    /// Richardson-extrapolated value `2χ̂(δ/2) - χ̂(δ)`.
    pub value: f64,
    /// `χ̂(δ) = 2(1 - f(θ, θ+δ))/δ²`.
    pub coarse: f64,
    /// `χ̂(δ/2)`.
    pub fine: f64,
    pub warning: Option<String>,
}

/// `1 - f(θ, θ + δ e_m)`.
pub fn infidelity_step(family: &StateFamily, theta: &[f64], m: usize, delta: f64) -> Result<f64> {
    family.generator(m)?;
    let rho = family.evaluate(theta)?;
    let mut shifted = theta.to_vec();
    shifted[m] += delta;
    let sigma = family.evaluate(&shifted)?;
    Ok(1.0 - uhlmann_fidelity(&rho, &sigma)?)
}

/// Estimates `χ_f` by one-sided steps `δ` and `δ/2` with Richardson
/// extrapolation, which cancels the O(δ) bias from the cubic term.
pub fn fs_numeric(family: &StateFamily, theta: &[f64], m: usize, delta: f64) -> Result<FsEstimate> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("fs_delta must be positive, got {delta}")));
    }
    let chi = |d: f64| -> Result<f64> { Ok(2.0 * infidelity_step(family, theta, m, d)? / (d * d)) };
    let coarse = chi(delta)?;
    let fine = chi(0.5 * delta)?;
    let scale = coarse.abs().max(fine.abs());
    let warning = ((coarse - fine).abs() > 0.2 * scale && scale > 1e-8).then(|| {
        format!("fs_delta = {delta:e} looks badly sized: estimates {coarse:e} and {fine:e} differ by more than 20%")
    });
    Ok(FsEstimate {
        value: 2.0 * fine - coarse,
        coarse,
        fine,
        warning,
    })
}

/// Slope of `log(1 - f(θ, θ+δ))` against `log δ` over [`SCALING_STEPS`].
/// A vanishing first-order term shows up as a slope of 2.
pub fn first_order_scaling_check(family: &StateFamily, theta: &[f64], m: usize) -> Result<f64> {
    let mut xs = Vec::with_capacity(SCALING_STEPS.len());
    let mut ys = Vec::with_capacity(SCALING_STEPS.len());
    for &d in &SCALING_STEPS {
        let gap = infidelity_step(family, theta, m, d)?;
        if gap >= 1e-14 {
            xs.push(d.ln());
            ys.push(gap.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::NotApplicable(
            "1 - f stays below 1e-14 for every step; the state does not move".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Susceptibility three ways: support expansion, fidelity differences, and
/// a quarter of the QFI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FSReport {
    pub fs_analytic: f64,
    pub fs_numeric: f64,
    pub qfi_quarter: f64,
    pub max_pairwise_gap: f64,
    pub tolerance: f64,
    pub flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Flag threshold: `1e-4` relative, with an absolute floor of `1e-4`.
pub fn fs_tolerance(qfi_quarter: f64) -> f64 {
    1e-4 * qfi_quarter.abs().max(1.0)
}

pub fn fs_report(family: &StateFamily, theta: &[f64], m: usize, numerics: &Numerics) -> Result<FSReport> {
    let analytic = fs_analytic(family, theta, m, numerics)?;
    let numeric = fs_numeric(family, theta, m, numerics.fs_delta)?;
    let rho = family.evaluate(theta)?;
    let spec = spectral_support(&rho, numerics.rank_tol)?;
    let d_rho = d_rho_analytic(family, theta, m)?;
    let quarter = 0.25 * qfi_from_derivative(&spec, &d_rho, QfiPath::SupportSum, numerics.degeneracy_tol)?;
    let vals = [analytic, numeric.value, quarter];
    let gap = vals
        .iter()
        .flat_map(|a| vals.iter().map(move |b| (a - b).abs()))
        .fold(0.0_f64, f64::max);
    let tolerance = fs_tolerance(quarter);
    Ok(FSReport {
        fs_analytic: analytic,
        fs_numeric: numeric.value,
        qfi_quarter: quarter,
        max_pairwise_gap: gap,
        tolerance,
        flagged: gap > tolerance,
        warning: numeric.warning,
    })
}
