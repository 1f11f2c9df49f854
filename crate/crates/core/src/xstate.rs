//! Two-qubit X state with `z = √(bc)`:
//!
//! ```text
//!     | a  0  0  w* |
//!     | 0  b  z  0  |
//!     | 0  z  c  0  |
//!     | w  0  0  d  |
//! ```
//!
//! Closed forms for its spectrum, the QFI under `exp(-iα σ_z⊗𝕀)` and the
//! QFIM under `exp(-i(α σ_z⊗𝕀 + β 𝕀⊗σ_z))`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, EigenSystem, HermitianMatrix, ZERO, dominant_index, identity, kron, pauli_z};
use crate::states::{DEFAULT_RANK_TOL, DensityMatrix, SpectralData, StateFamily};

const PARAM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XStateParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub w: Complex64,
}

/// Generator choices for X-state families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XGenerator {
    /// `σ_z ⊗ 𝕀`.
    Alpha,
    /// `𝕀 ⊗ σ_z`.
    Beta,
}

impl XGenerator {
    pub fn matrix(self) -> ComplexMatrix {
        match self {
            XGenerator::Alpha => kron(&pauli_z(), &identity(2)),
            XGenerator::Beta => kron(&identity(2), &pauli_z()),
        }
    }
}

impl XStateParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64, w: Complex64) -> Result<Self> {
        let p = Self { a, b, c, d, w };
        p.validate()?;
        Ok(p)
    }

    /// Unit trace, non-negative diagonal and `ad ≥ |w|²`.
    pub fn validate(&self) -> Result<()> {
        let Self { a, b, c, d, w } = *self;
        if ![a, b, c, d, w.re, w.im].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("X-state parameters must be finite".into()));
        }
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            if v < -PARAM_TOL {
                return Err(Error::PositivityViolation(format!("diagonal entry {name} = {v} is negative")));
            }
        }
        let total = a + b + c + d;
        if (total - 1.0).abs() > PARAM_TOL {
            return Err(Error::PositivityViolation(format!("a + b + c + d = {total}, expected 1")));
        }
        if a * d < w.norm_sqr() - PARAM_TOL {
            return Err(Error::PositivityViolation(format!(
                "ad = {} < |w|² = {}",
                a * d,
                w.norm_sqr()
            )));
        }
        Ok(())
    }

    /// `z = √(bc)`.
    pub fn z(&self) -> f64 {
        (self.b.max(0.0) * self.c.max(0.0)).sqrt()
    }

    /// `Δ = (a - d)² + 4|w|²`.
    pub fn delta(&self) -> f64 {
        (self.a - self.d).powi(2) + 4.0 * self.w.norm_sqr()
    }

    /// `a = d = |w|` and `b = c`, where the QFI bound is attained.
    pub fn saturates_bound(&self, tol: f64) -> bool {
        let w = self.w.norm();
        (self.a - w).abs() <= tol && (self.d - w).abs() <= tol && (self.b - self.c).abs() <= tol
    }

    /// The Bell projector `|Φ⁺⟩⟨Φ⁺|`.
    pub fn bell() -> Self {
        Self {
            a: 0.5,
            b: 0.0,
            c: 0.0,
            d: 0.5,
            w: Complex64::new(0.5, 0.0),
        }
    }
}

pub fn xstate_density(p: &XStateParams) -> Result<DensityMatrix> {
    p.validate()?;
    let z = Complex64::new(p.z(), 0.0);
    let r = |x: f64| Complex64::new(x, 0.0);
    #[rustfmt::skip]
    let m = ComplexMatrix::from_row_slice(4, 4, &[
        r(p.a), ZERO,   ZERO,   p.w.conj(),
        ZERO,   r(p.b), z,      ZERO,
        ZERO,   z,      r(p.c), ZERO,
        p.w,    ZERO,   ZERO,   r(p.d),
    ]);
    DensityMatrix::new(HermitianMatrix::symmetrize(m))
}

/// The family `ρ_X(θ)` generated by the chosen local `σ_z` operators.
pub fn xstate_family(p: &XStateParams, generators: &[XGenerator]) -> Result<StateFamily> {
    let gens = generators
        .iter()
        .map(|g| HermitianMatrix::new(g.matrix()))
        .collect::<Result<Vec<_>>>()?;
    StateFamily::new(xstate_density(p)?, gens)
}

/// Closed-form eigensystem.
///
/// Outer block: `λ± = ½(a + d ± √Δ)` with eigenvectors `∝ (x±, 0, 0, 1)`,
/// `x± = (a - d ± √Δ)/(2w)`. Inner block: `λ₁ = b + c` with
/// `(0, √b, √c, 0)/√(b+c)` and `λ₂ = 0` with `(0, √c, -√b, 0)/√(b+c)`.
/// At `w = 0` the outer eigenvectors are `e₁, e₄`; at `b = c = 0` the inner
/// ones are `e₂, e₃`.
pub fn xstate_spectrum(p: &XStateParams) -> Result<SpectralData> {
    p.validate()?;
    let c1 = |x: f64| Complex64::new(x, 0.0);
    let unit = |k: usize| {
        let mut v = DVector::from_element(4, ZERO);
        v[k] = c1(1.0);
        v
    };
    let root = p.delta().sqrt();
    let lam_plus = 0.5 * (p.a + p.d + root);
    let lam_minus = 0.5 * (p.a + p.d - root);

    let (psi_plus, psi_minus) = if p.w.norm() == 0.0 {
        if p.a >= p.d { (unit(0), unit(3)) } else { (unit(3), unit(0)) }
    } else {
        let s = p.a - p.d;
        // the two algebraically equal forms of x± avoid cancellation
        let x_plus = if s >= 0.0 { c1(s + root) / (p.w * 2.0) } else { p.w.conj() * 2.0 / (root - s) };
        let x_minus = if s <= 0.0 { c1(s - root) / (p.w * 2.0) } else { -p.w.conj() * 2.0 / (s + root) };
        let vec = |x: Complex64| {
            let eps = 1.0 / (1.0 + x.norm_sqr()).sqrt();
            DVector::from_vec(vec![x * eps, ZERO, ZERO, c1(eps)])
        };
        (vec(x_plus), vec(x_minus))
    };

    let bc = p.b.max(0.0) + p.c.max(0.0);
    let (psi_1, psi_2) = if bc == 0.0 {
        (unit(1), unit(2))
    } else {
        let (sb, sc, n) = (p.b.max(0.0).sqrt(), p.c.max(0.0).sqrt(), bc.sqrt());
        (
            DVector::from_vec(vec![ZERO, c1(sb / n), c1(sc / n), ZERO]),
            DVector::from_vec(vec![ZERO, c1(sc / n), c1(-sb / n), ZERO]),
        )
    };

    let mut pairs = vec![
        (lam_plus, psi_plus),
        (p.b + p.c, psi_1),
        (lam_minus, psi_minus),
        (0.0, psi_2),
    ];
    pairs.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then_with(|| dominant_index(&x.1).cmp(&dominant_index(&y.1)))
    });
    let values: Vec<f64> = pairs.iter().map(|(l, _)| *l).collect();
    let columns: Vec<DVector<Complex64>> = pairs.into_iter().map(|(_, v)| v).collect();
    let support_rank = values.iter().filter(|&&l| l > DEFAULT_RANK_TOL).count();
    Ok(SpectralData {
        eigen: EigenSystem {
            values,
            vectors: ComplexMatrix::from_columns(&columns),
        },
        support_rank,
        rank_tol: DEFAULT_RANK_TOL,
    })
}

fn outer_term(p: &XStateParams) -> f64 {
    let s = p.a + p.d;
    if s > 0.0 { p.w.norm_sqr() / s } else { 0.0 }
}

fn inner_term(p: &XStateParams) -> f64 {
    let s = p.b + p.c;
    if s > 0.0 { p.b * p.c / s } else { 0.0 }
}

/// `F = 16(|w|²/(a+d) + bc/(b+c))` for the generator `σ_z ⊗ 𝕀`. Each ratio is
/// taken as 0 when its denominator vanishes.
pub fn xstate_qfi_closed(p: &XStateParams) -> f64 {
    16.0 * (outer_term(p) + inner_term(p))
}

/// `8(|w| + √(bc))`.
pub fn xstate_qfi_bound(p: &XStateParams) -> f64 {
    8.0 * (p.w.norm() + p.z())
}

/// `16[(|w|²/(a+d) + bc/(b+c)) 𝕀 + (|w|²/(a+d) - bc/(b+c)) σ_x]` for the
/// generators `(σ_z⊗𝕀, 𝕀⊗σ_z)`.
pub fn xstate_qfim_closed(p: &XStateParams) -> DMatrix<f64> {
    let (o, i) = (outer_term(p), inner_term(p));
    let diag = 16.0 * (o + i);
    let off = 16.0 * (o - i);
    DMatrix::from_row_slice(2, 2, &[diag, off, off, diag])
}
