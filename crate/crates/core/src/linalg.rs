//! Dense complex Hermitian algebra and entropy functionals.
//!
//! Matrices here are small (at most 16x16), so everything is dense and the
//! eigensolver is a cyclic complex Jacobi iteration. All entropies are in bits.

use std::ops::{Add, Deref, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CapError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default spectral floor for logarithms of rank-deficient operators.
pub const DEFAULT_REG: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-9;
const SUPPORT_TOL: f64 = 1e-8;
const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_TOL: f64 = 1e-15;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// A square complex matrix equal to its conjugate transpose.
///
/// Construction symmetrizes `(M + M†)/2` so floating-point drift from
/// products never accumulates in the anti-Hermitian part.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    /// Validates hermiticity within `1e-10 (1 + max|M|)` and symmetrizes.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(CapError::Shape(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let skew = max_abs(&(&mat - mat.adjoint()));
        if skew > HERMITIAN_TOL * (1.0 + max_abs(&mat)) {
            return Err(CapError::Domain(format!(
                "matrix is not Hermitian (skew part {skew:.3e})"
            )));
        }
        Ok(Self::hermitize(mat))
    }

    /// Symmetrizes without checking. Callers guarantee the input is Hermitian
    /// up to rounding (e.g. `A X A†` with Hermitian `X`).
    pub(crate) fn hermitize(mat: CMatrix) -> Self {
        let adj = mat.adjoint();
        Self {
            mat: (mat + adj).scale(0.5),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut mat = CMatrix::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            mat[(i, i)] = c(*d, 0.0);
        }
        Self { mat }
    }

    /// Builds a Hermitian operator from row-major real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut mat = CMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CapError::Shape("ragged rows".into()));
            }
            for (j, v) in row.iter().enumerate() {
                mat[(i, j)] = c(*v, 0.0);
            }
        }
        Self::new(mat)
    }

    /// `|v⟩⟨v|` for an (unnormalized) vector.
    pub fn outer(v: &CVector) -> Self {
        Self::hermitize(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: self.mat.scale(s),
        }
    }

    /// `A X A†` for a (possibly rectangular) `A`.
    pub fn congruence(&self, a: &CMatrix) -> Self {
        Self::hermitize(a * &self.mat * a.adjoint())
    }

    /// Maximum-entry distance, the norm used for most tolerances.
    pub fn max_diff(&self, other: &Self) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }

    /// `x̄ A + (1 - x̄) B` style convex combination `s·self + (1-s)·other`.
    pub fn lerp(&self, other: &Self, s: f64) -> Self {
        Self {
            mat: self.mat.scale(s) + other.mat.scale(1.0 - s),
        }
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

/// Unit-trace positive semidefinite Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    base: HermitianOperator,
}

impl DensityOperator {
    /// Checks `|tr − 1| ≤ 1e-9` and `λ_min ≥ −1e-9`.
    pub fn new(base: HermitianOperator) -> Result<Self> {
        let tr = base.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(CapError::Domain(format!("density operator has trace {tr}")));
        }
        let lmin = hermitian_eig(&base)?.min_eigenvalue();
        if lmin < -PSD_TOL {
            return Err(CapError::Domain(format!(
                "density operator has negative eigenvalue {lmin:.3e}"
            )));
        }
        Ok(Self { base })
    }

    /// Wraps an operator the caller already knows to be a valid state.
    pub(crate) fn new_unchecked(base: HermitianOperator) -> Self {
        Self { base }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            base: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Projector onto a normalized copy of `v`.
    pub fn pure(v: &CVector) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(CapError::Domain("zero state vector".into()));
        }
        Ok(Self {
            base: HermitianOperator::outer(&v.unscale(n)),
        })
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.base
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.base
    }

    /// Convex combination `s·self + (1 − s)·other`, which stays a state.
    pub fn mix(&self, other: &Self, s: f64) -> Self {
        Self {
            base: self.base.lerp(&other.base, s),
        }
    }
}

impl Deref for DensityOperator {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.base
    }
}

/// Eigen-decomposition `M = U diag(λ) U†` with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `U diag(f(λ)) U†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let u = &self.eigenvectors;
        let n = u.nrows();
        let mut scaled = u.clone();
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            let fl = f(*lam);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        HermitianOperator::hermitize(scaled * u.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|l| l)
    }

    /// Diagonal entries of `U† X U`, i.e. `⟨u_k|X|u_k⟩`.
    pub fn expectations(&self, x: &HermitianOperator) -> Vec<f64> {
        let u = &self.eigenvectors;
        (0..u.ncols())
            .map(|k| {
                let col = u.column(k);
                (col.adjoint() * x.matrix() * col)[(0, 0)].re
            })
            .collect()
    }
}

/// Cyclic complex Jacobi eigensolver.
pub fn hermitian_eig(m: &HermitianOperator) -> Result<SpectralDecomposition> {
    let n = m.dim();
    let mut a = m.matrix().clone();
    let mut v = CMatrix::identity(n, n);
    let scale = m.frobenius_norm();

    let off_norm = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += a[(p, q)].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweep = 0;
    let trivial = n <= 1 || scale == 0.0;
    while !trivial && off_norm(&a) > JACOBI_TOL * scale {
        if sweep == JACOBI_MAX_SWEEPS {
            return Err(CapError::NumericalFailure { sweeps: sweep });
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Skip rotations that cannot change the diagonal in floating point.
                if sweep > 4 && g < 1e-3 * f64::EPSILON * (app.abs() + aqq.abs()) {
                    a[(p, q)] = c(0.0, 0.0);
                    a[(q, p)] = c(0.0, 0.0);
                    continue;
                }
                let phase = apq / g;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let ph_c = phase.conj();

                // A <- A U, V <- V U with U = [[c, s], [-s e^{-iφ}, c e^{-iφ}]].
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cs - akq * ph_c * sn;
                    a[(k, q)] = akp * sn + akq * ph_c * cs;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cs - vkq * ph_c * sn;
                    v[(k, q)] = vkp * sn + vkq * ph_c * cs;
                }
                // A <- U† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cs - aqk * phase * sn;
                    a[(q, k)] = apk * sn + aqk * phase * cs;
                }
                a[(p, q)] = c(0.0, 0.0);
                a[(q, p)] = c(0.0, 0.0);
                a[(p, p)] = c(a[(p, p)].re, 0.0);
                a[(q, q)] = c(a[(q, q)].re, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Tensor product `a ⊗ b`.
pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    HermitianOperator {
        mat: a.matrix().kronecker(b.matrix()),
    }
}

fn check_reg(reg: f64) -> Result<()> {
    if !(0.0..=1e-6).contains(&reg) {
        return Err(CapError::Domain(format!(
            "spectral floor {reg} outside [0, 1e-6]"
        )));
    }
    Ok(())
}

fn floored_log2(lam: f64, reg: f64) -> f64 {
    lam.max(reg).max(f64::MIN_POSITIVE).log2()
}

/// `log₂` of a PSD operator with eigenvalues floored at `reg`.
pub fn matrix_log2_on_support(m: &HermitianOperator, reg: f64) -> Result<HermitianOperator> {
    check_reg(reg)?;
    let eig = hermitian_eig(m)?;
    matrix_log2_from(&eig, reg)
}

pub(crate) fn matrix_log2_from(eig: &SpectralDecomposition, reg: f64) -> Result<HermitianOperator> {
    let lmin = eig.min_eigenvalue();
    if lmin < -PSD_TOL {
        return Err(CapError::Domain(format!(
            "logarithm of operator with eigenvalue {lmin:.3e}"
        )));
    }
    Ok(eig.map(|l| floored_log2(l, reg)))
}

/// Nearest PSD matrix in Frobenius norm.
pub fn project_psd(m: &HermitianOperator) -> Result<HermitianOperator> {
    let eig = hermitian_eig(m)?;
    if eig.min_eigenvalue() >= 0.0 {
        return Ok(m.clone());
    }
    Ok(eig.map(|l| l.max(0.0)))
}

/// Hilbert–Schmidt inner product `Re tr(a† b)`.
pub fn hs_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(CapError::Shape(format!(
            "inner product of {}-dim and {}-dim operators",
            a.dim(),
            b.dim()
        )));
    }
    Ok(hs_inner_unchecked(a.matrix(), b.matrix()))
}

pub(crate) fn hs_inner_unchecked(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Partial trace keeping the subsystems listed in `keep` (in their original order).
pub fn partial_trace(
    m: &HermitianOperator,
    dims: &[usize],
    keep: &[usize],
) -> Result<HermitianOperator> {
    let total: usize = dims.iter().product();
    if total != m.dim() || dims.is_empty() {
        return Err(CapError::Shape(format!(
            "subsystem dims {dims:?} do not multiply to {}",
            m.dim()
        )));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(CapError::Shape(format!(
            "keep index out of range in {keep:?}"
        )));
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|k| keep.contains(k)).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let out_dim: usize = kept.iter().map(|&k| dims[k]).product();
    let tr_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Row-major strides of the full index.
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let compose = |kept_idx: usize, traced_idx: usize| -> usize {
        let mut full = 0;
        let mut rem = kept_idx;
        for &k in kept.iter().rev() {
            full += (rem % dims[k]) * strides[k];
            rem /= dims[k];
        }
        let mut rem = traced_idx;
        for &k in traced.iter().rev() {
            full += (rem % dims[k]) * strides[k];
            rem /= dims[k];
        }
        full
    };

    let src = m.matrix();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for i in 0..out_dim {
        for j in 0..out_dim {
            let mut acc = c(0.0, 0.0);
            for t in 0..tr_dim {
                acc += src[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(HermitianOperator::hermitize(out))
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(q: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&q) || q.is_nan() {
        return Err(CapError::Domain(format!(
            "binary entropy argument {q} outside [0, 1]"
        )));
    }
    let q = q.clamp(0.0, 1.0);
    Ok(xlog2x_neg(q) + xlog2x_neg(1.0 - q))
}

fn xlog2x_neg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// `−Σ λ log₂ λ` of a PSD operator (no normalization assumed).
pub fn entropy_of_psd(m: &HermitianOperator) -> Result<f64> {
    Ok(spectral_entropy(&hermitian_eig(m)?))
}

pub(crate) fn spectral_entropy(eig: &SpectralDecomposition) -> f64 {
    eig.eigenvalues.iter().map(|&l| xlog2x_neg(l)).sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    entropy_of_psd(rho)
}

/// `S(ρ‖σ) = tr ρ log₂ ρ − tr ρ log₂ σ` for PSD arguments.
///
/// Eigenvalues of `σ` at or below `reg` define its numerical kernel; if more
/// than `1e-8` of `ρ`'s weight falls there the divergence is infinite and a
/// [`CapError::Support`] is returned.
pub fn relative_entropy(
    rho: &HermitianOperator,
    sigma: &HermitianOperator,
    reg: f64,
) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(CapError::Shape(format!(
            "relative entropy of {}-dim and {}-dim operators",
            rho.dim(),
            sigma.dim()
        )));
    }
    check_reg(reg)?;
    let er = hermitian_eig(rho)?;
    let es = hermitian_eig(sigma)?;
    relative_entropy_from(&er, rho, &es, reg)
}

pub(crate) fn relative_entropy_from(
    rho_eig: &SpectralDecomposition,
    rho: &HermitianOperator,
    sigma_eig: &SpectralDecomposition,
    reg: f64,
) -> Result<f64> {
    for lmin in [rho_eig.min_eigenvalue(), sigma_eig.min_eigenvalue()] {
        if lmin < -PSD_TOL {
            return Err(CapError::Domain(format!(
                "relative entropy of operator with eigenvalue {lmin:.3e}"
            )));
        }
    }
    let neg_entropy = -spectral_entropy(rho_eig);
    let weights = sigma_eig.expectations(rho);
    let mut kernel_weight = 0.0;
    let mut cross = 0.0;
    for (mu, w) in sigma_eig.eigenvalues.iter().zip(&weights) {
        if *mu <= reg {
            kernel_weight += w.max(0.0);
        }
        cross += w * floored_log2(*mu, reg);
    }
    if kernel_weight > SUPPORT_TOL {
        return Err(CapError::Support {
            weight: kernel_weight,
        });
    }
    Ok(neg_entropy - cross)
}

/// Pauli matrices and common single-qubit states, used by protocol builders and tests.
pub mod pauli {
    use super::*;

    pub fn identity() -> HermitianOperator {
        HermitianOperator::identity(2)
    }

    pub fn x() -> HermitianOperator {
        HermitianOperator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn y() -> HermitianOperator {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(0.0, -1.0);
        m[(1, 0)] = c(0.0, 1.0);
        HermitianOperator::new(m).unwrap()
    }

    pub fn z() -> HermitianOperator {
        HermitianOperator::from_diagonal(&[1.0, -1.0])
    }

    pub fn ket(amps: &[C64]) -> CVector {
        CVector::from_column_slice(amps)
    }

    /// Eigenvector projectors of Z, X, Y: index 0 is the +1 eigenstate.
    pub fn basis_projector(basis: crate::protocol::Basis, bit: u8) -> HermitianOperator {
        use crate::protocol::Basis;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = if bit == 0 { 1.0 } else { -1.0 };
        let v = match basis {
            Basis::Z => {
                if bit == 0 {
                    ket(&[c(1.0, 0.0), c(0.0, 0.0)])
                } else {
                    ket(&[c(0.0, 0.0), c(1.0, 0.0)])
                }
            }
            Basis::X => ket(&[c(r, 0.0), c(s * r, 0.0)]),
            Basis::Y => ket(&[c(r, 0.0), c(0.0, s * r)]),
        };
        HermitianOperator::outer(&v)
    }
}
