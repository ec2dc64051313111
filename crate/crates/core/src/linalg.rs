//! Dense Hermitian eigensolver, orthonormalization, canonical angles and
//! tangent-angle matrices.
//!
//! Every matrix here is dense and complex. Real problems are carried as
//! complex matrices with zero imaginary part.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scf::SolutionCertificate;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// Relative tolerance on eigen-decomposition residuals.
pub const TOL_EIG: f64 = 1e-12;
/// Tolerance on `BᴴB − I` for orthonormal bases.
pub const TOL_ORTH: f64 = 1e-12;
/// Relative Hermitian defect accepted before symmetrization.
pub const TOL_HERM: f64 = 1e-10;
/// Relative singular value threshold for rank decisions.
pub const TOL_RANK: f64 = 1e-10;

const EIG_MAX_ITER: usize = 10_000;

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMat,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Columns `start..start+count` of the eigenvector matrix.
    pub fn vectors(&self, start: usize, count: usize) -> CMat {
        self.eigenvectors.columns(start, count).into_owned()
    }
}

/// An orthonormal basis of a k-dimensional subspace of Cⁿ.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: CMat,
}

impl Subspace {
    /// Wraps `basis`, checking `‖BᴴB − I‖_F ≤ tol_orth`.
    pub fn new(basis: CMat) -> Result<Self> {
        let defect = orthonormality_defect(&basis);
        // Bases coming out of O(n³) factorizations carry O(n·eps) error.
        let tol = TOL_ORTH.max(64.0 * f64::EPSILON * basis.nrows() as f64);
        if defect > tol {
            return Err(Error::NotOrthonormal { defect });
        }
        Ok(Self { basis })
    }

    pub(crate) fn new_unchecked(basis: CMat) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn into_basis(self) -> CMat {
        self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

impl AsRef<CMat> for Subspace {
    fn as_ref(&self) -> &CMat {
        &self.basis
    }
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn orthonormality_defect(basis: &CMat) -> f64 {
    let k = basis.ncols();
    let gram = basis.adjoint() * basis - CMat::identity(k, k);
    frobenius(&gram)
}

fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    let scale = frobenius(a);
    let d = frobenius(&(a - a.adjoint()));
    if scale == 0.0 {
        d
    } else {
        d / scale
    }
}

/// Dense Hermitian eigen-decomposition with eigenvalues sorted ascending.
///
/// `a` is symmetrized as `(A + Aᴴ)/2` before decomposition.
pub fn hermitian_eig(a: &CMat) -> Result<HermitianEig> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (a.nrows(), a.nrows()),
            found: a.shape(),
        });
    }
    let defect = hermitian_defect(a);
    if defect > TOL_HERM {
        return Err(Error::NotHermitian { defect });
    }
    let sym = hermitian_part(a);
    let (values, vectors) = if sym.iter().all(|z| z.im == 0.0) {
        let real = sym.map(|z| z.re);
        let eig = nalgebra::SymmetricEigen::try_new(real, f64::EPSILON, EIG_MAX_ITER)
            .ok_or(Error::BackendFailure("symmetric eigensolver"))?;
        (eig.eigenvalues, to_complex(&eig.eigenvectors))
    } else {
        let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER)
            .ok_or(Error::BackendFailure("hermitian eigensolver"))?;
        (eig.eigenvalues, eig.eigenvectors)
    };

    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut eigenvectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &vectors.column(src));
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Orthonormal basis for the range of a full-column-rank matrix.
pub fn orthonormalize(m: &CMat) -> Result<Subspace> {
    let (n, k) = m.shape();
    if k == 0 || k > n {
        return Err(Error::DimensionMismatch {
            expected: (n, k.min(n).max(1)),
            found: (n, k),
        });
    }
    let s = singular_values(m);
    let ratio = if s[0] > 0.0 { s[k - 1] / s[0] } else { 0.0 };
    if ratio <= TOL_RANK {
        return Err(Error::RankDeficient { ratio });
    }
    let q = m.clone().qr().q();
    Ok(Subspace::new_unchecked(q.columns(0, k).into_owned()))
}

fn check_same_shape(x: &CMat, y: &CMat) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.shape(),
            found: y.shape(),
        });
    }
    Ok(())
}

/// Canonical angles between two equal-dimensional subspaces, ascending.
///
/// Small angles are taken from the sines (singular values of `(I − YYᴴ)X`)
/// and large ones from the cosines (singular values of `YᴴX`); each branch is
/// used where it is well conditioned.
pub fn canonical_angles(x: &Subspace, y: &Subspace) -> Result<Vec<f64>> {
    Ok(angle_pairs(x, y)?.into_iter().map(|p| p.angle).collect())
}

#[derive(Debug, Clone, Copy)]
struct AnglePair {
    angle: f64,
    cos: f64,
}

fn angle_pairs(x: &Subspace, y: &Subspace) -> Result<Vec<AnglePair>> {
    let (xb, yb) = (x.basis(), y.basis());
    check_same_shape(xb, yb)?;
    let overlap = yb.adjoint() * xb;
    // descending cosines ↔ ascending angles
    let cosines = singular_values(&overlap);
    let residual = xb - yb * &overlap;
    let mut sines = singular_values(&residual);
    sines.reverse();
    Ok(cosines
        .iter()
        .zip(sines.iter())
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            let s = s.clamp(0.0, 1.0);
            let angle = if s * s < 0.5 { s.asin() } else { c.acos() };
            AnglePair { angle, cos: c }
        })
        .collect())
}

/// Which trigonometric transform of the canonical angles to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleKind {
    Theta,
    SinTheta,
    TanTheta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Spectral,
    Frobenius,
}

pub fn subspace_distance(
    x: &Subspace,
    y: &Subspace,
    kind: AngleKind,
    norm: NormKind,
) -> Result<f64> {
    let pairs = angle_pairs(x, y)?;
    let mut values = Vec::with_capacity(pairs.len());
    for p in pairs {
        values.push(match kind {
            AngleKind::Theta => p.angle,
            AngleKind::SinTheta => p.angle.sin(),
            AngleKind::TanTheta => {
                if p.cos <= TOL_RANK {
                    return Err(Error::AngleAtPiOverTwo);
                }
                p.angle.tan()
            }
        });
    }
    Ok(match norm {
        NormKind::Spectral => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormKind::Frobenius => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
    })
}

/// `T(V) = (V*⊥ᴴ V)(V*ᴴ V)⁻¹`, whose singular values are the tangents of the
/// canonical angles between `V` and the certified solution.
pub fn tangent_angle_matrix(v: &Subspace, cert: &SolutionCertificate) -> Result<CMat> {
    tangent_angle_matrix_raw(v.basis(), cert)
}

pub(crate) fn tangent_angle_matrix_raw(v: &CMat, cert: &SolutionCertificate) -> Result<CMat> {
    check_same_shape(&cert.vstar, v)?;
    let a = cert.vstar.adjoint() * v;
    let b = cert.vperp.adjoint() * v;
    let s = singular_values(&a);
    let sigma_min = *s.last().unwrap_or(&0.0);
    if sigma_min <= TOL_RANK {
        return Err(Error::SingularOverlap { sigma_min });
    }
    // T = B A⁻¹  ⇔  Aᴴ Tᴴ = Bᴴ
    let lu = a.adjoint().lu();
    let th = lu
        .solve(&b.adjoint())
        .ok_or(Error::SingularOverlap { sigma_min })?;
    Ok(th.adjoint())
}

/// Column-major `[vec(Re Z); vec(Im Z)]`.
pub fn m2v(z: &CMat) -> DVector<f64> {
    let n = z.len();
    let mut out = DVector::zeros(2 * n);
    for (idx, c) in z.iter().enumerate() {
        out[idx] = c.re;
        out[n + idx] = c.im;
    }
    out
}

/// Inverse of [`m2v`] for a `rows × cols` matrix.
pub fn v2m(x: &DVector<f64>, rows: usize, cols: usize) -> CMat {
    let n = rows * cols;
    assert_eq!(x.len(), 2 * n, "vector length must be 2·rows·cols");
    CMat::from_iterator(rows, cols, (0..n).map(|i| Complex64::new(x[i], x[n + i])))
}

/// Real inner product `Re tr(XᴴY)`.
pub fn real_inner(x: &CMat, y: &CMat) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}
