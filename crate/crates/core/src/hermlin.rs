//! Dense complex Hermitian linear algebra.
//!
//! Everything downstream works on small dense matrices (dimension up to a few
//! dozen), stored as `nalgebra::DMatrix<Complex64>`. Eigenpairs come from
//! faer's self-adjoint decomposition (nalgebra's complex `SymmetricEigen`
//! returns wrong eigenvectors on some inputs); this module adds the deterministic
//! ordering and phase conventions the rest of the crate relies on, plus the
//! residual checks that turn a silent inaccuracy into an error.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative Hermiticity tolerance applied by [`HermitianMatrix::new`].
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Negative eigenvalues in `[-PSD_CLAMP_TOL, 0)` are treated as round-off.
pub const PSD_CLAMP_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are ordered by eigenvector shape, not value.
const TIE_GAP: f64 = 1e-12;

/// A square complex matrix that is Hermitian up to a recorded defect.
///
/// Construction symmetrizes the input as `(H + H†)/2`; the largest
/// pre-symmetrization asymmetry is kept in `defect`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: ComplexMatrix,
    defect: f64,
}

impl HermitianMatrix {
    /// Validates against the default tolerance, `1e-10 * max(1, max |H_ij|)`.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        Self::named("matrix", mat)
    }

    /// Same as [`HermitianMatrix::new`] with a name used in error messages.
    pub fn named(name: &str, mat: ComplexMatrix) -> Result<Self> {
        check_square(&mat)?;
        let tol = HERMITICITY_TOL * max_abs(&mat).max(1.0);
        let defect = hermiticity_defect(&mat);
        if defect > tol {
            return Err(Error::NotHermitian {
                name: name.to_string(),
                defect,
                tol,
            });
        }
        Ok(Self::symmetrize(mat))
    }

    /// Symmetrizes without validating. Used for products that are Hermitian
    /// in exact arithmetic.
    pub fn symmetrize(mat: ComplexMatrix) -> Self {
        let defect = hermiticity_defect(&mat);
        let mat = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        Self { mat, defect }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut mat = ComplexMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            mat[(i, i)] = Complex64::new(d, 0.0);
        }
        Self { mat, defect: 0.0 }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mat: ComplexMatrix::zeros(n, n),
            defect: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.mat
    }

    /// Largest asymmetry seen before symmetrization.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            mat: &self.mat * Complex64::new(factor, 0.0),
            defect: self.defect * factor.abs(),
        }
    }
}

impl AsRef<ComplexMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.mat
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, i: usize) -> DVector<Complex64> {
        self.vectors.column(i).into_owned()
    }

    /// `V diag(f(λ)) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let fj = f(lambda);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| Complex64::new(l, 0.0))
    }

    /// `V† M V`: the matrix elements `⟨ψ_i|M|ψ_j⟩`.
    pub fn to_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.adjoint() * m * &self.vectors
    }

    /// `V M V†`.
    pub fn from_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        &self.vectors * m * self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with deterministic output.
///
/// Eigenvalues come out strictly descending. Numerically tied eigenvalues
/// (gap below 1e-12) are ordered by the index of each eigenvector's
/// largest-magnitude component. Every eigenvector is rotated so that its
/// largest-magnitude component is real and positive.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<EigenSystem> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::Empty);
    }
    let scale = max_abs(h.matrix());
    if scale == 0.0 {
        return Ok(EigenSystem {
            values: vec![0.0; n],
            vectors: ComplexMatrix::identity(n, n),
        });
    }

    let m = h.matrix();
    let evd = faer::Mat::<Complex64>::from_fn(n, n, |i, j| m[(i, j)])
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::EigenNonConvergence {
            residual: f64::INFINITY,
        })?;
    let raw_values: Vec<f64> = (0..n).map(|k| evd.S()[k].re).collect();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[b].total_cmp(&raw_values[a]));

    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    for &k in &order {
        values.push(raw_values[k]);
        columns.push(fix_phase(DVector::from_fn(n, |i, _| u[(i, k)])));
    }

    // reorder clusters of tied eigenvalues by eigenvector shape
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] < TIE_GAP * scale.max(1.0) {
            end += 1;
        }
        if end - start > 1 {
            let mut cluster: Vec<(usize, f64, DVector<Complex64>)> = (start..end)
                .map(|k| (dominant_index(&columns[k]), values[k], columns[k].clone()))
                .collect();
            cluster.sort_by_key(|c| c.0);
            for (offset, (_, v, col)) in cluster.into_iter().enumerate() {
                values[start + offset] = v;
                columns[start + offset] = col;
            }
        }
        start = end;
    }

    let vectors = ComplexMatrix::from_columns(&columns);
    let system = EigenSystem { values, vectors };

    let residual = eigen_residual(h.matrix(), &system);
    let ortho = max_abs(&(system.vectors.adjoint() * &system.vectors - ComplexMatrix::identity(n, n)));
    if residual > 1e-9 * scale.max(1.0) || ortho > 1e-10 {
        return Err(Error::EigenNonConvergence {
            residual: residual.max(ortho),
        });
    }
    Ok(system)
}

/// `max |HV - VΛ|`.
pub fn eigen_residual(h: &ComplexMatrix, system: &EigenSystem) -> f64 {
    let hv = h * &system.vectors;
    let mut worst = 0.0_f64;
    for (j, &lambda) in system.values.iter().enumerate() {
        for i in 0..h.nrows() {
            worst = worst.max((hv[(i, j)] - system.vectors[(i, j)] * lambda).norm());
        }
    }
    worst
}

/// Index of the largest-magnitude component; near-ties resolve to the
/// lowest index.
pub fn dominant_index(v: &DVector<Complex64>) -> usize {
    let max = v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    v.iter()
        .position(|z| z.norm() >= max - 1e-9 * max.max(1e-300))
        .unwrap_or(0)
}

/// Multiplies `v` by a global phase so its dominant component is real positive.
pub fn fix_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let k = dominant_index(&v);
    let z = v[k];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|c| *c *= phase);
        v[k] = Complex64::new(v[k].re, 0.0);
    }
    v
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues in `[-tol, 0)` are clamped to zero; anything more negative is
/// rejected.
pub fn psd_sqrt(p: &HermitianMatrix, tol: f64) -> Result<HermitianMatrix> {
    let eig = eig_hermitian(p)?;
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    // eigenvalues at roundoff level are unresolved; their roots would be O(√ε)
    let floor = 16.0 * eig.dim() as f64 * f64::EPSILON * eig.values.first().map_or(0.0, |l| l.abs());
    let root = eig.reconstruct_with(|l| Complex64::new(if l <= floor { 0.0 } else { l.sqrt() }, 0.0));
    Ok(HermitianMatrix::symmetrize(root))
}

pub fn check_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty);
    }
    Ok(())
}

pub fn trace(m: &ComplexMatrix) -> Result<Complex64> {
    check_square(m)?;
    Ok(m.trace())
}

pub fn hconj(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(a.ncols(), b.nrows()));
    }
    Ok(a * b)
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// `{A, B} = AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Largest entry magnitude.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    max_abs(&(a - b))
}

pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(n, m, |i, j| Complex64::new(rows[i][j], 0.0))
}

pub fn pauli_x() -> ComplexMatrix {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

/// `|ψ⟩⟨ψ|`.
pub fn outer(psi: &DVector<Complex64>) -> ComplexMatrix {
    psi * psi.adjoint()
}
