//! NEPv definitions: the problem trait, the two benchmark Hamiltonians and a
//! central-difference derivative oracle.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, to_complex, CMat, RMat};

/// A nonlinear eigenvector problem `H(V)V = VΛ` with `H` right-unitarily
/// invariant in `V`.
///
/// `evaluate` and `derivative` must accept arbitrary (not necessarily
/// orthonormal) `n × k` inputs.
pub trait NepvProblem: Send + Sync {
    /// Ambient dimension `n`.
    fn dim(&self) -> usize;

    /// Number of wanted eigenvectors `k`.
    fn k(&self) -> usize;

    fn label(&self) -> String;

    fn evaluate(&self, v: &CMat) -> CMat;

    /// Directional derivative `DH(V)[X] = d/dt H(V + tX)` at `t = 0`, `t` real.
    fn derivative(&self, v: &CMat, x: &CMat) -> CMat;

    /// True when `H` has real coefficients and the iteration stays in real
    /// arithmetic; the local operators then act on real matrices only.
    fn is_real(&self) -> bool {
        false
    }

    fn has_analytic_adjoint(&self) -> bool {
        false
    }

    /// Closed-form adjoint of the plain local operator
    /// `Z ↦ D ⊙ (V*⊥ᴴ DH(V*)[V*⊥Z] V*)` for the gap matrix `d`.
    fn local_adjoint(&self, _vstar: &CMat, _vperp: &CMat, _d: &RMat, _y: &CMat) -> Option<CMat> {
        None
    }

    /// Starting basis: the k lowest eigenvectors of the coupling-free operator.
    fn initial_guess(&self) -> Result<CMat>;

    /// Problem-specific shift that guarantees local convergence of the
    /// level-shifted iteration, when one is known.
    fn apriori_sigma(&self) -> Option<f64> {
        None
    }
}

/// Central difference `(H(V+hX) − H(V−hX)) / 2h`.
pub fn fd_derivative(problem: &dyn NepvProblem, v: &CMat, x: &CMat, h: f64) -> Result<CMat> {
    if !(h > 0.0) {
        return Err(Error::InvalidParams(format!(
            "step h = {h} must be positive"
        )));
    }
    if v.shape() != x.shape() || v.shape() != (problem.dim(), problem.k()) {
        return Err(Error::DimensionMismatch {
            expected: (problem.dim(), problem.k()),
            found: x.shape(),
        });
    }
    let plus = problem.evaluate(&(v + x.scale(h)));
    let minus = problem.evaluate(&(v - x.scale(h)));
    Ok((plus - minus).scale(0.5 / h))
}

fn real_diag(d: &DVector<f64>) -> CMat {
    CMat::from_diagonal(&d.map(|x| Complex64::new(x, 0.0)))
}

fn lowest_eigenvectors(a: &CMat, k: usize) -> Result<CMat> {
    Ok(hermitian_eig(a)?.vectors(0, k))
}

/// `tridiag(−1, 2, −1)` of order `n`.
pub fn laplacian_1d(n: usize) -> RMat {
    RMat::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    })
}

/// `‖L⁻¹‖₂ = (2(1 − cos(π/(n+1))))⁻¹` for the 1D Laplacian.
pub fn laplacian_inverse_norm(n: usize) -> f64 {
    1.0 / (2.0 * (1.0 - (PI / (n as f64 + 1.0)).cos()))
}

/// Parameters of the 1D Kohn–Sham model Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KohnShamParams {
    pub n: usize,
    pub k: usize,
    pub alpha: f64,
}

impl KohnShamParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!(
                "n = {} must be at least 2",
                self.n
            )));
        }
        if self.k < 1 || self.k >= self.n {
            return Err(Error::InvalidParams(format!(
                "k = {} must satisfy 1 ≤ k < n",
                self.k
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParams(format!(
                "alpha = {} must be ≥ 0",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `H(V) = L + α·Diag(L⁻¹ diag(VVᴴ))` with `L = tridiag(−1, 2, −1)`.
#[derive(Debug, Clone)]
pub struct KohnSham {
    params: KohnShamParams,
    laplacian: RMat,
    laplacian_inv: RMat,
}

pub fn kohn_sham(params: KohnShamParams) -> Result<KohnSham> {
    params.validate()?;
    let n = params.n;
    // (L⁻¹)ᵢⱼ = min(i,j)·(n+1−max(i,j))/(n+1), one-based
    let laplacian_inv = RMat::from_fn(n, n, |i, j| {
        let (lo, hi) = ((i.min(j) + 1) as f64, (i.max(j) + 1) as f64);
        lo * (n as f64 + 1.0 - hi) / (n as f64 + 1.0)
    });
    Ok(KohnSham {
        params,
        laplacian: laplacian_1d(n),
        laplacian_inv,
    })
}

impl KohnSham {
    pub fn params(&self) -> KohnShamParams {
        self.params
    }

    pub fn laplacian(&self) -> &RMat {
        &self.laplacian
    }

    pub fn laplacian_inv(&self) -> &RMat {
        &self.laplacian_inv
    }

    fn potential(&self, rho: DVector<f64>) -> CMat {
        real_diag(&(&self.laplacian_inv * rho))
    }
}

impl NepvProblem for KohnSham {
    fn dim(&self) -> usize {
        self.params.n
    }

    fn k(&self) -> usize {
        self.params.k
    }

    fn label(&self) -> String {
        format!(
            "kohn-sham(n={}, k={}, alpha={})",
            self.params.n, self.params.k, self.params.alpha
        )
    }

    fn evaluate(&self, v: &CMat) -> CMat {
        let density = DVector::from_iterator(
            v.nrows(),
            v.row_iter()
                .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>()),
        );
        to_complex(&self.laplacian) + self.potential(density).scale(self.params.alpha)
    }

    fn derivative(&self, v: &CMat, x: &CMat) -> CMat {
        // diag(XVᴴ + VXᴴ) = 2·Re diag(XVᴴ)
        let d = DVector::from_iterator(
            v.nrows(),
            (0..v.nrows()).map(|i| {
                (0..v.ncols())
                    .map(|j| (x[(i, j)] * v[(i, j)].conj()).re)
                    .sum::<f64>()
            }),
        );
        self.potential(d).scale(2.0 * self.params.alpha)
    }

    fn is_real(&self) -> bool {
        true
    }

    fn has_analytic_adjoint(&self) -> bool {
        true
    }

    fn local_adjoint(&self, vstar: &CMat, vperp: &CMat, d: &RMat, y: &CMat) -> Option<CMat> {
        let w = vperp * hadamard_real(d, y) * vstar.adjoint();
        let diag = DVector::from_iterator(w.nrows(), (0..w.nrows()).map(|i| w[(i, i)].re));
        let pot = real_diag(&(self.laplacian_inv.transpose() * diag));
        Some((vperp.adjoint() * pot * vstar).scale(2.0 * self.params.alpha))
    }

    fn initial_guess(&self) -> Result<CMat> {
        lowest_eigenvectors(&to_complex(&self.laplacian), self.params.k)
    }

    fn apriori_sigma(&self) -> Option<f64> {
        Some(crate::analysis::apriori_sigma_ks(
            self.params.alpha,
            self.params.n,
        ))
    }
}

/// Trapping potential for the 2D Gross–Pitaevskii model.
#[derive(Clone, Copy, Serialize, Deserialize)]
pub enum Potential {
    /// `(x² + y²)/2`
    Radial,
    /// `(x² + 100y²)/2`
    NonRadial,
    #[serde(skip)]
    Custom(fn(f64, f64) -> f64),
}

impl Potential {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Potential::Radial => 0.5 * (x * x + y * y),
            Potential::NonRadial => 0.5 * (x * x + 100.0 * y * y),
            Potential::Custom(f) => f(x, y),
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Radial => f.write_str("radial"),
            Potential::NonRadial => f.write_str("nonradial"),
            Potential::Custom(_) => f.write_str("custom"),
        }
    }
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Potential::Radial, Potential::Radial)
            | (Potential::NonRadial, Potential::NonRadial) => true,
            (Potential::Custom(a), Potential::Custom(b)) => std::ptr::fn_addr_eq(*a, *b),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpeParams {
    /// Interior grid points per axis.
    pub grid_points: usize,
    /// Domain is `[−ℓ, ℓ]²`.
    pub half_width: f64,
    pub omega: f64,
    pub beta: f64,
    pub potential: Potential,
}

impl GpeParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::InvalidParams(format!(
                "grid points N = {} must be at least 2",
                self.grid_points
            )));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidParams(format!(
                "ell = {} must be positive",
                self.half_width
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "beta = {} must be ≥ 0",
                self.beta
            )));
        }
        if !self.omega.is_finite() {
            return Err(Error::InvalidParams("omega must be finite".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.grid_points as f64 + 1.0)
    }

    /// Interior points `−ℓ + i·h`, `i = 1..=N`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.grid_points)
            .map(|i| -self.half_width + i as f64 * h)
            .collect()
    }
}

/// `H(V) = A_f + β·Diag(|V|)²` on an `N × N` grid, `k = 1`.
#[derive(Debug, Clone)]
pub struct Gpe {
    params: GpeParams,
    a_f: CMat,
    a_f_norm: f64,
}

fn tridiag(n: usize, lower: f64, diag: f64, upper: f64) -> RMat {
    RMat::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if i == j + 1 {
            lower
        } else if j == i + 1 {
            upper
        } else {
            0.0
        }
    })
}

/// `A_f = Diag(f̃) − ½M − iω·M_φ` with grid index `x + N·y` (x fastest).
pub fn gpe_linear_part(params: &GpeParams) -> CMat {
    let n = params.grid_points;
    let h = params.spacing();
    let nodes = params.nodes();
    let eye = RMat::identity(n, n);
    let d1 = tridiag(n, -0.5, 0.0, 0.5);
    let d2 = tridiag(n, 1.0, -2.0, 1.0);
    let m = d2.kronecker(&eye) + eye.kronecker(&d2);
    let hx = RMat::from_diagonal(&DVector::from_iterator(n, nodes.iter().map(|x| h * x)));
    let m_phi = hx.kronecker(&d1) - d1.kronecker(&hx);

    let f_tilde = DVector::from_iterator(
        n * n,
        (0..n).flat_map(|j| {
            let nodes = &nodes;
            (0..n).map(move |i| h * h * params.potential.eval(nodes[i], nodes[j]))
        }),
    );
    let mut a = CMat::from_fn(n * n, n * n, |r, c| {
        Complex64::new(-0.5 * m[(r, c)], -params.omega * m_phi[(r, c)])
    });
    for (i, f) in f_tilde.iter().enumerate() {
        a[(i, i)] += f;
    }
    a
}

pub fn gpe(params: GpeParams) -> Result<Gpe> {
    params.validate()?;
    let a_f = gpe_linear_part(&params);
    let eig = hermitian_eig(&a_f)?;
    let a_f_norm = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    Ok(Gpe {
        params,
        a_f,
        a_f_norm,
    })
}

impl Gpe {
    pub fn params(&self) -> GpeParams {
        self.params
    }

    pub fn linear_part(&self) -> &CMat {
        &self.a_f
    }

    /// `‖A_f‖₂`
    pub fn linear_part_norm(&self) -> f64 {
        self.a_f_norm
    }
}

impl NepvProblem for Gpe {
    fn dim(&self) -> usize {
        self.a_f.nrows()
    }

    fn k(&self) -> usize {
        1
    }

    fn label(&self) -> String {
        format!(
            "gpe(N={}, ell={}, omega={}, beta={}, potential={:?})",
            self.params.grid_points,
            self.params.half_width,
            self.params.omega,
            self.params.beta,
            self.params.potential
        )
    }

    fn evaluate(&self, v: &CMat) -> CMat {
        let density = DVector::from_iterator(v.nrows(), v.column(0).iter().map(|z| z.norm_sqr()));
        &self.a_f + real_diag(&density).scale(self.params.beta)
    }

    fn derivative(&self, v: &CMat, x: &CMat) -> CMat {
        let d = DVector::from_iterator(
            v.nrows(),
            v.column(0)
                .iter()
                .zip(x.column(0).iter())
                .map(|(vi, xi)| (vi.conj() * xi).re),
        );
        real_diag(&d).scale(2.0 * self.params.beta)
    }

    fn has_analytic_adjoint(&self) -> bool {
        true
    }

    fn local_adjoint(&self, vstar: &CMat, vperp: &CMat, d: &RMat, y: &CMat) -> Option<CMat> {
        let w = vperp * hadamard_real(d, y) * vstar.adjoint();
        let weighted = CMat::from_iterator(
            vstar.nrows(),
            1,
            (0..vstar.nrows()).map(|i| vstar[(i, 0)].scale(w[(i, i)].re)),
        );
        Some((vperp.adjoint() * weighted).scale(2.0 * self.params.beta))
    }

    fn initial_guess(&self) -> Result<CMat> {
        lowest_eigenvectors(&self.a_f, 1)
    }

    fn apriori_sigma(&self) -> Option<f64> {
        Some(0.5 * (3.0 * self.params.beta + self.a_f_norm))
    }
}

/// A constant (linear) Hermitian eigenproblem `H(V) ≡ A`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    a: CMat,
    k: usize,
}

impl LinearProblem {
    pub fn new(a: CMat, k: usize) -> Result<Self> {
        if !a.is_square() || k == 0 || k >= a.nrows() {
            return Err(Error::InvalidParams(format!(
                "need a square matrix and 1 ≤ k < n, got {:?} and k = {k}",
                a.shape()
            )));
        }
        Ok(Self { a, k })
    }

    pub fn from_diagonal(diag: &[f64], k: usize) -> Result<Self> {
        Self::new(real_diag(&DVector::from_column_slice(diag)), k)
    }
}

impl NepvProblem for LinearProblem {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn k(&self) -> usize {
        self.k
    }

    fn label(&self) -> String {
        format!("linear(n={}, k={})", self.a.nrows(), self.k)
    }

    fn evaluate(&self, _v: &CMat) -> CMat {
        self.a.clone()
    }

    fn derivative(&self, _v: &CMat, _x: &CMat) -> CMat {
        CMat::zeros(self.a.nrows(), self.a.ncols())
    }

    fn is_real(&self) -> bool {
        self.a.iter().all(|z| z.im == 0.0)
    }

    fn has_analytic_adjoint(&self) -> bool {
        true
    }

    fn local_adjoint(&self, _vstar: &CMat, _vperp: &CMat, d: &RMat, _y: &CMat) -> Option<CMat> {
        Some(CMat::zeros(d.nrows(), d.ncols()))
    }

    fn initial_guess(&self) -> Result<CMat> {
        lowest_eigenvectors(&self.a, self.k)
    }
}

pub(crate) fn hadamard_real(d: &RMat, z: &CMat) -> CMat {
    CMat::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)].scale(d[(i, j)]))
}
