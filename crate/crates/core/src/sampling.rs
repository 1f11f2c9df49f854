//! Random matrices and states for property checks and benchmarks.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hermlin::{ComplexMatrix, HermitianMatrix, eig_hermitian};
use crate::states::{DensityMatrix, StateFamily};
use crate::xstate::XStateParams;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| gaussian(rng))
}

/// GUE-style Hermitian matrix, entries of order `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> HermitianMatrix {
    let a = random_complex_matrix(rng, n);
    HermitianMatrix::symmetrize((&a + a.adjoint()) * Complex64::new(0.5 * scale, 0.0))
}

/// Random Hermitian matrix rescaled to unit spectral norm.
pub fn random_generator<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let h = random_hermitian(rng, n, 1.0);
    let norm = eig_hermitian(&h)
        .map(|e| e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .unwrap_or(1.0);
    if norm > 0.0 { h.scale(1.0 / norm) } else { h }
}

/// Haar-distributed unitary via Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let a = random_complex_matrix(rng, n);
    let mut cols: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = a.column(j).into_owned();
        // two passes keep the basis orthonormal to machine precision
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dotc(&v);
                v -= q * proj;
            }
        }
        let norm = v.norm();
        cols.push(v / Complex64::new(norm, 0.0));
    }
    ComplexMatrix::from_columns(&cols)
}

/// Probability vector of length `n` with exactly `rank` nonzero entries
/// (leading), pairwise separated by at least `min_gap / rank` and bounded
/// below by the same amount.
pub fn random_spectrum<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize, min_gap: f64) -> Vec<f64> {
    assert!(rank >= 1 && rank <= n);
    loop {
        let mut p: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p.sort_by(|a, b| b.total_cmp(a));
        let sep = min_gap / rank as f64;
        let separated = p.windows(2).all(|w| w[0] - w[1] >= sep);
        if separated && p[rank - 1] >= sep {
            p.resize(n, 0.0);
            return p;
        }
    }
}

/// `U diag(p) U†` for a Haar unitary `U`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize, min_gap: f64) -> DensityMatrix {
    let p = random_spectrum(rng, n, rank, min_gap);
    let u = random_unitary(rng, n);
    let d = HermitianMatrix::from_real_diagonal(&p);
    let rho = &u * d.matrix() * u.adjoint();
    DensityMatrix::new(HermitianMatrix::symmetrize(rho)).expect("sampled state is valid")
}

/// Random state with `parameters` random unit-norm generators.
pub fn random_family<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    rank: usize,
    parameters: usize,
) -> StateFamily {
    let rho0 = random_density(rng, n, rank, 0.05);
    let gens = (0..parameters).map(|_| random_generator(rng, n)).collect();
    StateFamily::new(rho0, gens).expect("sampled family is valid")
}

/// Random point on the positivity region `ad >= |w|²` of the X state.
pub fn random_xstate_params<R: Rng + ?Sized>(rng: &mut R) -> XStateParams {
    let e: Vec<f64> = (0..4).map(|_| -rng.gen_range(f64::EPSILON..1.0f64).ln()).collect();
    let total: f64 = e.iter().sum();
    let (a, b, c, d) = (e[0] / total, e[1] / total, e[2] / total, e[3] / total);
    let modulus = (a * d).sqrt() * rng.gen_range(0.0..1.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    XStateParams::new(a, b, c, d, Complex64::from_polar(modulus, phase))
        .expect("sampled X state is valid")
}
