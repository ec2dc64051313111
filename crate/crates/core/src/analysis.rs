//! Local convergence analysis of plain and level-shifted SCF.
//!
//! All operators act on the tangent space `C^{(n−k)×k}` viewed as a real
//! vector space with inner product `⟨X, Y⟩ = Re tr(XᴴY)`. Spectral radii and
//! operator norms come from the dense real representation of each operator.

use std::fmt;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_eig, m2v, v2m, CMat, RMat, Subspace};
use crate::problems::{hadamard_real, laplacian_inverse_norm, NepvProblem};
use crate::scf::{SolutionCertificate, TOL_GAP};

/// Largest `N = p·k` for which dense real representations are formed.
pub const REALIFY_CAP: usize = 20_000;

/// Relative self-adjointness defect tolerated before `𝓠` is rejected.
pub const TOL_SELF_ADJOINT: f64 = 1e-8;

type Action<'a> = Box<dyn Fn(&CMat) -> CMat + Send + Sync + 'a>;

/// An R-linear operator on complex `rows × cols` matrices.
///
/// With `real_domain` set the operator is restricted to real matrices (it must
/// map them to real matrices) and its representation has size `N × N`
/// instead of `2N × 2N`.
pub struct RealLinearMap<'a> {
    rows: usize,
    cols: usize,
    real_domain: bool,
    act: Action<'a>,
}

impl fmt::Debug for RealLinearMap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealLinearMap")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("real_domain", &self.real_domain)
            .finish_non_exhaustive()
    }
}

impl<'a> RealLinearMap<'a> {
    pub fn new(rows: usize, cols: usize, act: impl Fn(&CMat) -> CMat + Send + Sync + 'a) -> Self {
        Self {
            rows,
            cols,
            real_domain: false,
            act: Box::new(act),
        }
    }

    pub fn new_real(
        rows: usize,
        cols: usize,
        act: impl Fn(&CMat) -> CMat + Send + Sync + 'a,
    ) -> Self {
        Self {
            real_domain: true,
            ..Self::new(rows, cols, act)
        }
    }

    /// Wraps a real representation back into an action.
    pub fn from_matrix(
        rows: usize,
        cols: usize,
        real_domain: bool,
        mat: RMat,
    ) -> RealLinearMap<'static> {
        let n = rows * cols;
        let expected = if real_domain { n } else { 2 * n };
        assert_eq!(
            mat.shape(),
            (expected, expected),
            "representation has the wrong size"
        );
        let act = move |z: &CMat| -> CMat {
            if real_domain {
                let x = DVector::from_iterator(n, z.iter().map(|c| c.re));
                let y = &mat * x;
                CMat::from_iterator(rows, cols, y.iter().map(|&r| Complex64::new(r, 0.0)))
            } else {
                v2m(&(&mat * m2v(z)), rows, cols)
            }
        };
        RealLinearMap {
            rows,
            cols,
            real_domain,
            act: Box::new(act),
        }
    }

    pub fn apply(&self, z: &CMat) -> CMat {
        (self.act)(z)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_real_domain(&self) -> bool {
        self.real_domain
    }

    /// `N = rows·cols`
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    /// Size of the real representation.
    pub fn real_dim(&self) -> usize {
        if self.real_domain {
            self.n()
        } else {
            2 * self.n()
        }
    }
}

/// `D_σ(V*)ᵢⱼ = (λ_{k+i} − λⱼ + σ)⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMatrix {
    pub entries: RMat,
}

impl GapMatrix {
    pub fn apply(&self, z: &CMat) -> CMat {
        hadamard_real(&self.entries, z)
    }
}

fn check_shift(cert: &SolutionCertificate, sigma: f64) -> Result<()> {
    if !(sigma > -cert.delta_star + TOL_GAP) {
        return Err(Error::ShiftOutOfRange {
            sigma,
            delta_star: cert.delta_star,
        });
    }
    Ok(())
}

pub fn gap_matrix(cert: &SolutionCertificate, sigma: f64) -> Result<GapMatrix> {
    check_shift(cert, sigma)?;
    let occ = cert.occupied();
    let virt = cert.virtuals();
    Ok(GapMatrix {
        entries: RMat::from_fn(virt.len(), occ.len(), |i, j| {
            1.0 / (virt[i] - occ[j] + sigma)
        }),
    })
}

/// `X(V) = D_σ ⊙ (V*⊥ᴴ [H_σ(V*) − H_σ(V)] V*)`.
pub fn sylvester_solution(
    problem: &dyn NepvProblem,
    cert: &SolutionCertificate,
    v: &Subspace,
    sigma: f64,
) -> Result<CMat> {
    let d = gap_matrix(cert, sigma)?;
    let shifted = |w: &CMat| {
        let h = problem.evaluate(w);
        if sigma == 0.0 {
            h
        } else {
            h - (w * w.adjoint()).scale(sigma)
        }
    };
    let diff = shifted(&cert.vstar) - shifted(v.basis());
    Ok(d.apply(&(cert.vperp.adjoint() * diff * &cert.vstar)))
}

fn operator<'a>(
    problem: &dyn NepvProblem,
    rows: usize,
    cols: usize,
    act: impl Fn(&CMat) -> CMat + Send + Sync + 'a,
) -> RealLinearMap<'a> {
    if problem.is_real() {
        RealLinearMap::new_real(rows, cols, act)
    } else {
        RealLinearMap::new(rows, cols, act)
    }
}

/// `Z ↦ V*⊥ᴴ DH(V*)[V*⊥Z] V*`
fn projected_derivative(problem: &dyn NepvProblem, cert: &SolutionCertificate, z: &CMat) -> CMat {
    let x = &cert.vperp * z;
    let dh = problem.derivative(&cert.vstar, &x);
    cert.vperp.adjoint() * (dh * &cert.vstar)
}

/// Local R-linear operator of the level-shifted SCF,
/// `𝓛_σ(Z) = D_σ ⊙ (V*⊥ᴴ DH_σ(V*)[V*⊥Z] V*)` with
/// `DH_σ(V*)[X] = DH(V*)[X] − σ(V*Xᴴ + XV*ᴴ)`. At `σ = 0` this is the plain
/// operator `𝓛`.
pub fn local_operator<'a>(
    problem: &'a dyn NepvProblem,
    cert: &'a SolutionCertificate,
    sigma: f64,
) -> Result<RealLinearMap<'a>> {
    let d = gap_matrix(cert, sigma)?;
    let (p, k) = (cert.vperp.ncols(), cert.k());
    Ok(operator(problem, p, k, move |z: &CMat| {
        let x = &cert.vperp * z;
        let mut dh_v = problem.derivative(&cert.vstar, &x) * &cert.vstar;
        if sigma != 0.0 {
            let shift = &cert.vstar * (x.adjoint() * &cert.vstar)
                + &x * (cert.vstar.adjoint() * &cert.vstar);
            dh_v -= shift.scale(sigma);
        }
        d.apply(&(cert.vperp.adjoint() * dh_v))
    }))
}

/// The same operator built as `D_σ ⊙ 𝓠(Z) − Z`.
pub fn local_operator_via_q<'a>(
    problem: &'a dyn NepvProblem,
    cert: &'a SolutionCertificate,
    sigma: f64,
) -> Result<RealLinearMap<'a>> {
    let d = gap_matrix(cert, sigma)?;
    let q = restricted_derivative(problem, cert);
    let (p, k) = (q.rows(), q.cols());
    Ok(operator(problem, p, k, move |z: &CMat| {
        d.apply(&q.apply(z)) - z
    }))
}

/// Restricted derivative operator `𝓠(Z) = V*⊥ᴴ DH(V*)[V*⊥Z] V* + Λ*⊥Z − ZΛ*`.
pub fn restricted_derivative<'a>(
    problem: &'a dyn NepvProblem,
    cert: &'a SolutionCertificate,
) -> RealLinearMap<'a> {
    let (p, k) = (cert.vperp.ncols(), cert.k());
    operator(problem, p, k, move |z: &CMat| {
        let occ = cert.occupied();
        let virt = cert.virtuals();
        let sylv = CMat::from_fn(p, k, |i, j| z[(i, j)].scale(virt[i] - occ[j]));
        projected_derivative(problem, cert, z) + sylv
    })
}

/// `𝓛_czbl(Z) = V*⊥ᴴ DH(V*)[V*⊥Z] V*`.
pub fn czbl_operator<'a>(
    problem: &'a dyn NepvProblem,
    cert: &'a SolutionCertificate,
) -> RealLinearMap<'a> {
    let (p, k) = (cert.vperp.ncols(), cert.k());
    operator(problem, p, k, move |z: &CMat| {
        projected_derivative(problem, cert, z)
    })
}

fn check_cap(op: &RealLinearMap<'_>) -> Result<()> {
    if op.n() > REALIFY_CAP {
        return Err(Error::TooLarge {
            dim: op.n(),
            cap: REALIFY_CAP,
        });
    }
    Ok(())
}

/// Dense real representation with respect to the basis `{Eᵢⱼ, iEᵢⱼ}`,
/// columns ordered as in [`m2v`]. Real-domain operators use `{Eᵢⱼ}` only.
pub fn realify(op: &RealLinearMap<'_>) -> Result<RMat> {
    check_cap(op)?;
    let (p, k, n) = (op.rows, op.cols, op.n());
    let dim = op.real_dim();
    let columns: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let mut e = CMat::zeros(p, k);
            let idx = col % n;
            e[(idx % p, idx / p)] = if col < n {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 1.0)
            };
            let out = op.apply(&e);
            if op.real_domain {
                out.iter().map(|c| c.re).collect()
            } else {
                m2v(&out).iter().copied().collect()
            }
        })
        .collect();
    Ok(DMatrix::from_fn(dim, dim, |r, c| columns[c][r]))
}

/// Eigenvalues of a general real matrix.
pub fn real_eigenvalues(m: &RMat) -> Result<Vec<Complex64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or(Error::BackendFailure("real Schur decomposition"))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// `ρ(op)`: the largest eigenvalue modulus of the real representation.
pub fn spectral_radius(op: &RealLinearMap<'_>) -> Result<f64> {
    let mat = realify(op)?;
    spectral_radius_of(&mat)
}

pub fn spectral_radius_of(mat: &RMat) -> Result<f64> {
    Ok(real_eigenvalues(mat)?
        .iter()
        .fold(0.0, |m, l| m.max(l.norm())))
}

fn largest_singular_value(mat: &RMat) -> Result<f64> {
    if mat.is_empty() {
        return Ok(0.0);
    }
    let svd = nalgebra::SVD::try_new(mat.clone(), false, false, f64::EPSILON, 100_000)
        .ok_or(Error::BackendFailure("singular value decomposition"))?;
    Ok(svd.singular_values.max())
}

/// `|||op|||_F = √λ_max(op* ∘ op)`, the largest singular value of the real
/// representation.
pub fn operator_norm_frobenius(op: &RealLinearMap<'_>) -> Result<f64> {
    largest_singular_value(&realify(op)?)
}

/// `(|||opᵐ|||_F)^{1/m}`.
pub fn eta_m(op: &RealLinearMap<'_>, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be at least 1".into()));
    }
    let mat = realify(op)?;
    let power = mat.pow(m as u32);
    Ok(largest_singular_value(&power)?.powf(1.0 / m as f64))
}

/// Adjoint of an operator with respect to `Re tr(XᴴY)`.
pub struct Adjoint<'a> {
    /// Transpose of the real representation, wrapped as an action.
    pub transposed: RealLinearMap<'static>,
    /// Closed form, when the problem supplies one.
    pub analytic: Option<RealLinearMap<'a>>,
}

impl Adjoint<'_> {
    /// Largest relative difference `‖A(Y) − B(Y)‖_F / ‖Y‖_F` between the two
    /// constructions over `probes`; `None` without a closed form.
    pub fn max_disagreement(&self, probes: &[CMat]) -> Option<f64> {
        let analytic = self.analytic.as_ref()?;
        Some(probes.iter().fold(0.0, |m, y| {
            let diff = frobenius(&(self.transposed.apply(y) - analytic.apply(y)));
            m.max(diff / frobenius(y).max(f64::MIN_POSITIVE))
        }))
    }
}

/// Adjoint of `op` through the transposed representation.
pub fn adjoint(op: &RealLinearMap<'_>) -> Result<RealLinearMap<'static>> {
    let mat = realify(op)?.transpose();
    Ok(RealLinearMap::from_matrix(
        op.rows,
        op.cols,
        op.real_domain,
        mat,
    ))
}

/// Both adjoint constructions for the plain local operator `𝓛`.
pub fn local_adjoint<'a>(
    op: &RealLinearMap<'_>,
    problem: &'a dyn NepvProblem,
    cert: &'a SolutionCertificate,
) -> Result<Adjoint<'a>> {
    let transposed = adjoint(op)?;
    let analytic = if problem.has_analytic_adjoint() {
        let d = gap_matrix(cert, 0.0)?.entries;
        let (p, k) = (cert.vperp.ncols(), cert.k());
        Some(operator(problem, p, k, move |y: &CMat| {
            problem
                .local_adjoint(&cert.vstar, &cert.vperp, &d, y)
                .expect("problem advertises an analytic adjoint")
        }))
    } else {
        None
    };
    Ok(Adjoint {
        transposed,
        analytic,
    })
}

/// `η_czbl = δ*⁻¹ |||𝓛_czbl|||_F`.
pub fn eta_czbl(problem: &dyn NepvProblem, cert: &SolutionCertificate) -> Result<f64> {
    Ok(operator_norm_frobenius(&czbl_operator(problem, cert))? / cert.delta_star)
}

/// Extreme eigenvalues of the restricted derivative operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QExtremes {
    pub mu_min: f64,
    pub mu_max: f64,
    /// `‖Q − Qᵀ‖_F / ‖Q‖_F` of the real representation.
    pub self_adjoint_defect: f64,
}

impl QExtremes {
    pub fn positive_definite(&self) -> bool {
        self.mu_min > 0.0
    }
}

pub fn q_extremes(problem: &dyn NepvProblem, cert: &SolutionCertificate) -> Result<QExtremes> {
    let q = realify(&restricted_derivative(problem, cert))?;
    let defect = (&q - q.transpose()).norm() / q.norm().max(f64::MIN_POSITIVE);
    if defect > TOL_SELF_ADJOINT {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let sym = (&q + q.transpose()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 100_000)
        .ok_or(Error::BackendFailure("symmetric eigensolver"))?;
    Ok(QExtremes {
        mu_min: eig.eigenvalues.min(),
        mu_max: eig.eigenvalues.max(),
        self_adjoint_defect: defect,
    })
}

/// Upper bound on `ρ(𝓛_σ)`:
/// `max{|μ_max/(σ+δ*) − 1|, |μ_min/(σ+s*) − 1|}`.
pub fn rho_sigma_bound(
    mu_min: f64,
    mu_max: f64,
    delta_star: f64,
    s_star: f64,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > -delta_star) {
        return Err(Error::ShiftOutOfRange { sigma, delta_star });
    }
    if !(mu_min > 0.0) || !(mu_max > 0.0) {
        return Err(Error::InvalidSpectrum { mu_min, mu_max });
    }
    let upper = (mu_max / (sigma + delta_star) - 1.0).abs();
    let lower = (mu_min / (sigma + s_star) - 1.0).abs();
    Ok(upper.max(lower))
}

/// Smallest shift with guaranteed local convergence: `μ_max/2 − δ*`.
pub fn sigma_lower_bound(mu_max: f64, delta_star: f64) -> f64 {
    0.5 * mu_max - delta_star
}

/// A-priori shift for the Kohn–Sham model: `(3/2)α‖L⁻¹‖₂ + 2`.
pub fn apriori_sigma_ks(alpha: f64, n: usize) -> f64 {
    1.5 * alpha * laplacian_inverse_norm(n) + 2.0
}

/// A-priori shift for the Gross–Pitaevskii model: `(3β + ‖A_f‖₂)/2`.
pub fn apriori_sigma_gpe(beta: f64, a_f: &CMat) -> Result<f64> {
    let eig = hermitian_eig(a_f)?;
    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    Ok(0.5 * (3.0 * beta + norm))
}

/// Shift that balances both branches of [`rho_sigma_bound`]: the root in
/// `(−δ*, ∞)` of `2(σ+δ*)(σ+s*) = μ_max(σ+s*) + μ_min(σ+δ*)`.
pub fn optimal_sigma(mu_min: f64, mu_max: f64, delta_star: f64, s_star: f64) -> Result<f64> {
    if !(mu_min > 0.0) || mu_max < mu_min {
        return Err(Error::InvalidSpectrum { mu_min, mu_max });
    }
    if !(delta_star > 0.0) || s_star < delta_star {
        return Err(Error::NoRootInRange);
    }
    // 2σ² + bσ + c = 0
    let b = 2.0 * (delta_star + s_star) - mu_max - mu_min;
    let c = 2.0 * delta_star * s_star - mu_max * s_star - mu_min * delta_star;
    let disc = b * b - 8.0 * c;
    if disc < 0.0 {
        return Err(Error::NoRootInRange);
    }
    let sq = disc.sqrt();
    // larger root, without cancellation
    let root = if b <= 0.0 {
        (-b + sq) / 4.0
    } else {
        2.0 * c / (-b - sq)
    };
    let branch_upper = mu_max / (root + delta_star) - 1.0;
    let branch_lower = 1.0 - mu_min / (root + s_star);
    let scale = 1.0 + branch_upper.abs();
    if !(root > -delta_star) || (branch_upper - branch_lower).abs() > 1e-10 * scale {
        return Err(Error::NoRootInRange);
    }
    Ok(root)
}

/// `‖𝐋𝐋ᵀ − 𝐋ᵀ𝐋‖_F` of the real representation; zero for normal operators.
pub fn normality_defect(op: &RealLinearMap<'_>) -> Result<f64> {
    let l = realify(op)?;
    let lt = l.transpose();
    Ok((&l * &lt - &lt * &l).norm())
}

/// Convergence-rate estimates for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub label: String,
    pub sigma: f64,
    /// `ρ(𝓛_σ)`
    pub eta_sup_infty: f64,
    /// `|||𝓛_σ|||_F`
    pub eta_sup: f64,
    /// `δ*⁻¹|||𝓛_czbl|||_F`, independent of σ.
    pub eta_czbl: f64,
    pub observed: Option<f64>,
}

/// Computes `ρ(𝓛_σ)`, `|||𝓛_σ|||_F` and `η_czbl` at a certified solution.
pub fn rate_report(
    problem: &dyn NepvProblem,
    cert: &SolutionCertificate,
    sigma: f64,
) -> Result<RateReport> {
    let op = local_operator(problem, cert, sigma)?;
    let mat = realify(&op)?;
    Ok(RateReport {
        label: problem.label(),
        sigma,
        eta_sup_infty: spectral_radius_of(&mat)?,
        eta_sup: largest_singular_value(&mat)?,
        eta_czbl: eta_czbl(problem, cert)?,
        observed: None,
    })
}
