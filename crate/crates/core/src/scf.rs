//! Plain and level-shifted SCF iterations, solution certificates and
//! observed convergence rates.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    frobenius, hermitian_eig, orthonormality_defect, spectral_norm, subspace_distance,
    tangent_angle_matrix_raw, AngleKind, CMat, NormKind, Subspace,
};
use crate::problems::NepvProblem;

/// Absolute eigenvalue gap below which the wanted eigenspace is ill-defined.
pub const TOL_GAP: f64 = 1e-10;

/// Default least-squares window for [`observed_rate`].
pub const DEFAULT_RATE_WINDOW: usize = 30;

/// Errors below this level carry amplified roundoff rather than the
/// asymptotic rate, so [`fit_observed_rate`] ends its window before them.
pub const DEFAULT_FIT_FLOOR: f64 = 1e-8;

/// Iterations skipped at the start of a run too short for the full window.
const SHORT_RUN_SKIP: usize = 10;

#[derive(Debug, Clone)]
pub struct ScfOptions {
    pub max_iter: usize,
    /// Stop once `‖H(Vᵢ)Vᵢ − VᵢΛᵢ‖₂ ≤ tol_residual`.
    pub tol_residual: f64,
    /// Level shift σ; zero gives the plain iteration.
    pub sigma: f64,
    pub divergence_cap: f64,
    /// When set, `‖tan Θ(Vᵢ, V*)‖_F` is recorded against this solution.
    pub reference: Option<SolutionCertificate>,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol_residual: 1e-14,
            sigma: 0.0,
            divergence_cap: 1e3,
            reference: None,
        }
    }
}

impl ScfOptions {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_residual = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_reference(mut self, cert: SolutionCertificate) -> Self {
        self.reference = Some(cert);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidParams("max_iter must be at least 1".into()));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidParams("tol_residual must be positive".into()));
        }
        if !(self.divergence_cap > self.tol_residual) {
            return Err(Error::InvalidParams(
                "divergence_cap must exceed tol_residual".into(),
            ));
        }
        if !self.sigma.is_finite() {
            return Err(Error::InvalidParams("sigma must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIter,
    Diverged,
    GapCollapse,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Diverged => "diverged",
            Status::GapCollapse => "gap_collapse",
        }
    }
}

/// One SCF step as recorded in the history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖H(Vᵢ)Vᵢ − VᵢΛᵢ‖₂` on the unshifted problem.
    pub residual: f64,
    /// `λ_{k+1} − λ_k` of `H_σ(Vᵢ)`.
    pub gap: f64,
    pub subspace_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IterationHistory {
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub sigma: f64,
    pub final_v: CMat,
    /// Ritz block `VᴴH(V)V` of the final iterate.
    pub final_lambda: CMat,
}

impl IterationHistory {
    /// Number of eigen-solves that produced a new iterate.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    /// Subspace errors when every record has one.
    pub fn subspace_errors(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.subspace_error).collect()
    }

    pub fn final_subspace(&self) -> Subspace {
        Subspace::new_unchecked(self.final_v.clone())
    }
}

/// A certified NEPv solution with the full spectrum of `H(V*)`.
#[derive(Debug, Clone)]
pub struct SolutionCertificate {
    pub vstar: CMat,
    pub vperp: CMat,
    /// Ascending eigenvalues λ₁ ≤ … ≤ λₙ of `H(V*)`.
    pub eigenvalues: DVector<f64>,
    /// `λ_{k+1} − λ_k`
    pub delta_star: f64,
    /// `λₙ − λ₁`
    pub s_star: f64,
    pub residual: f64,
}

impl SolutionCertificate {
    pub fn n(&self) -> usize {
        self.vstar.nrows()
    }

    pub fn k(&self) -> usize {
        self.vstar.ncols()
    }

    /// λ₁..λ_k
    pub fn occupied(&self) -> &[f64] {
        &self.eigenvalues.as_slice()[..self.k()]
    }

    /// λ_{k+1}..λₙ
    pub fn virtuals(&self) -> &[f64] {
        &self.eigenvalues.as_slice()[self.k()..]
    }

    pub fn subspace(&self) -> Subspace {
        Subspace::new_unchecked(self.vstar.clone())
    }
}

fn residual_and_ritz(h: &CMat, v: &CMat) -> (f64, CMat) {
    let hv = h * v;
    let lambda = v.adjoint() * &hv;
    let r = hv - v * &lambda;
    (spectral_norm(&r), lambda)
}

/// Runs `[H(Vᵢ) − σVᵢVᵢᴴ]Vᵢ₊₁ = Vᵢ₊₁Λᵢ₊₁` from `v0`.
///
/// Record 0 holds the starting basis; convergence is tested from record 1 on,
/// so a run always performs at least one eigen-solve.
pub fn scf_iterate(
    problem: &dyn NepvProblem,
    v0: &Subspace,
    opts: &ScfOptions,
) -> Result<IterationHistory> {
    opts.validate()?;
    let (n, k) = (problem.dim(), problem.k());
    if v0.basis().shape() != (n, k) {
        return Err(Error::DimensionMismatch {
            expected: (n, k),
            found: v0.basis().shape(),
        });
    }
    if let Some(r) = &opts.reference {
        if r.vstar.shape() != (n, k) {
            return Err(Error::DimensionMismatch {
                expected: (n, k),
                found: r.vstar.shape(),
            });
        }
    }

    let mut v = v0.basis().clone();
    let mut records = Vec::new();
    let mut status = Status::MaxIter;
    let mut final_lambda = CMat::zeros(k, k);

    for iter in 0..=opts.max_iter {
        let h = problem.evaluate(&v);
        let (residual, lambda) = residual_and_ritz(&h, &v);
        final_lambda = lambda;

        let shifted = if opts.sigma == 0.0 {
            h
        } else {
            h - (&v * v.adjoint()).scale(opts.sigma)
        };
        let eig = hermitian_eig(&shifted)?;
        let gap = eig.eigenvalues[k] - eig.eigenvalues[k - 1];

        let subspace_error = opts
            .reference
            .as_ref()
            .map(|r| tangent_angle_matrix_raw(&v, r).map_or(f64::INFINITY, |t| frobenius(&t)));

        records.push(IterationRecord {
            iter,
            residual,
            gap,
            subspace_error,
        });

        if iter >= 1 && residual <= opts.tol_residual {
            status = Status::Converged;
            break;
        }
        if !(residual <= opts.divergence_cap) {
            status = Status::Diverged;
            break;
        }
        if gap < TOL_GAP {
            status = Status::GapCollapse;
            break;
        }
        if iter == opts.max_iter {
            break;
        }
        v = eig.vectors(0, k);
    }

    Ok(IterationHistory {
        records,
        status,
        sigma: opts.sigma,
        final_v: v,
        final_lambda,
    })
}

/// Certifies `v` as a solution: `H(V)` is decomposed, `V*` is its lowest-k
/// eigenvector block and must span the same space as `v`.
pub fn certify(
    problem: &dyn NepvProblem,
    v: &Subspace,
    cert_tol: f64,
) -> Result<SolutionCertificate> {
    let (n, k) = (problem.dim(), problem.k());
    if v.basis().shape() != (n, k) {
        return Err(Error::DimensionMismatch {
            expected: (n, k),
            found: v.basis().shape(),
        });
    }
    let defect = orthonormality_defect(v.basis());
    if defect > 1e-10 {
        return Err(Error::NotOrthonormal { defect });
    }
    let h = problem.evaluate(v.basis());
    let (residual, _) = residual_and_ritz(&h, v.basis());
    if !(residual <= cert_tol) {
        return Err(Error::NotASolution {
            residual,
            tol: cert_tol,
        });
    }
    let eig = hermitian_eig(&h)?;
    let delta_star = eig.eigenvalues[k] - eig.eigenvalues[k - 1];
    if !(delta_star > TOL_GAP) {
        return Err(Error::GapViolation { delta: delta_star });
    }
    let vstar = eig.vectors(0, k);
    // an invariant subspace that is not the lowest one is not a solution
    let misalignment = subspace_distance(
        v,
        &Subspace::new_unchecked(vstar.clone()),
        AngleKind::SinTheta,
        NormKind::Spectral,
    )?;
    let alignment_tol = (cert_tol / delta_star).max(1e-8);
    if misalignment > alignment_tol {
        return Err(Error::NotASolution {
            residual: misalignment,
            tol: alignment_tol,
        });
    }
    let s_star = eig.eigenvalues[n - 1] - eig.eigenvalues[0];
    Ok(SolutionCertificate {
        vperp: eig.vectors(k, n - k),
        vstar,
        eigenvalues: eig.eigenvalues,
        delta_star,
        s_star,
        residual,
    })
}

/// `exp(m̂)` where `m̂` is the least-squares slope of `log eᵢ` against `i` over
/// the last `window + 1` values of `errors`.
pub fn observed_rate_from(errors: &[f64], window: usize) -> Result<f64> {
    if window == 0 || errors.len() < window + 1 {
        return Err(Error::InsufficientHistory {
            available: errors.len(),
            required: window + 1,
        });
    }
    let start = errors.len() - (window + 1);
    let tail = &errors[start..];
    if let Some(pos) = tail.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::NonPositiveError { index: start + pos });
    }
    let m = tail.len() as f64;
    let xbar = (m - 1.0) / 2.0;
    let ybar = tail.iter().map(|e| e.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, e) in tail.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxy += dx * (e.ln() - ybar);
        sxx += dx * dx;
    }
    Ok((sxy / sxx).exp())
}

/// Observed rate of a run: subspace errors when recorded, residuals otherwise.
pub fn observed_rate(history: &IterationHistory, window: usize) -> Result<f64> {
    match history.subspace_errors() {
        Some(errors) => observed_rate_from(&errors, window),
        None => observed_rate_from(&history.residuals(), window),
    }
}

/// Observed rate with the fitting window ending before the first error below
/// `floor`.
///
/// When fewer than `window + 1` errors lie above the floor the whole sequence
/// is used, and a sequence shorter than the window is fitted on everything
/// after its first ten values.
pub fn fit_observed_rate(errors: &[f64], window: usize, floor: f64) -> Result<f64> {
    let cut = errors
        .iter()
        .position(|e| *e < floor)
        .unwrap_or(errors.len());
    let seg = if cut > window { &errors[..cut] } else { errors };
    if seg.len() > window || seg.len() <= SHORT_RUN_SKIP + 1 {
        observed_rate_from(seg, window)
    } else {
        let tail = &seg[SHORT_RUN_SKIP..];
        observed_rate_from(tail, tail.len() - 1)
    }
}

/// [`fit_observed_rate`] on the subspace errors when recorded, residuals
/// otherwise.
pub fn fit_history_rate(history: &IterationHistory, window: usize, floor: f64) -> Result<f64> {
    match history.subspace_errors() {
        Some(errors) => fit_observed_rate(&errors, window, floor),
        None => fit_observed_rate(&history.residuals(), window, floor),
    }
}
