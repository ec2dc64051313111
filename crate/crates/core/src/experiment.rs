//! Reproducible experiment drivers: ground-truth solutions, rate reports and
//! parameter sweeps shared by the command line and the test suites.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    optimal_sigma, q_extremes, rate_report, rho_sigma_bound, sigma_lower_bound, QExtremes,
};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, CMat, Subspace};
use crate::problems::{gpe, kohn_sham, GpeParams, KohnShamParams, NepvProblem};
use crate::scf::{
    certify, fit_history_rate, scf_iterate, IterationHistory, ScfOptions, SolutionCertificate,
    Status, DEFAULT_FIT_FLOOR, DEFAULT_RATE_WINDOW,
};

/// Residual below which a stalled run is still a usable starting point for
/// polishing with a better shift.
const POLISH_ENTRY_RESIDUAL: f64 = 1e-10;

/// Residual accepted when certifying a ground-truth solution.
pub const TRUTH_CERT_TOL: f64 = 1e-12;

/// Residual tolerance of the runs whose history feeds the observed rate.
pub const OBSERVED_RUN_TOL: f64 = 1e-12;

/// One of the two benchmark families with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum ProblemSpec {
    KohnSham(KohnShamParams),
    Gpe(GpeParams),
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn NepvProblem>> {
        Ok(match self {
            ProblemSpec::KohnSham(p) => Box::new(kohn_sham(*p)?),
            ProblemSpec::Gpe(p) => Box::new(gpe(*p)?),
        })
    }

    /// The nonlinearity strength: α for Kohn–Sham, β for GPE.
    pub fn coupling(&self) -> f64 {
        match self {
            ProblemSpec::KohnSham(p) => p.alpha,
            ProblemSpec::Gpe(p) => p.beta,
        }
    }

    pub fn with_coupling(&self, value: f64) -> Self {
        match *self {
            ProblemSpec::KohnSham(p) => ProblemSpec::KohnSham(KohnShamParams { alpha: value, ..p }),
            ProblemSpec::Gpe(p) => ProblemSpec::Gpe(GpeParams { beta: value, ..p }),
        }
    }
}

/// How the first SCF iterate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// The problem's own guess, the lowest eigenvectors of its linear part.
    Default,
    /// A seeded random block, complex unless the problem is real.
    Random(u64),
}

pub fn starting_subspace(problem: &dyn NepvProblem, start: Start) -> Result<Subspace> {
    match start {
        Start::Default => Subspace::new(problem.initial_guess()?),
        Start::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real = problem.is_real();
            let block = CMat::from_fn(problem.dim(), problem.k(), |_, _| {
                let re = rng.random::<f64>() - 0.5;
                let im = if real { 0.0 } else { rng.random::<f64>() - 0.5 };
                Complex64::new(re, im)
            });
            orthonormalize(&block)
        }
    }
}

/// Knobs shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Residual tolerance of the ground-truth runs.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random start used for observed rates.
    pub seed: u64,
    pub window: usize,
    pub fit_floor: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 5000,
            seed: 0,
            window: DEFAULT_RATE_WINDOW,
            fit_floor: DEFAULT_FIT_FLOOR,
        }
    }
}

/// A certified solution together with the shift that produced it.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub cert: SolutionCertificate,
    pub sigma_used: f64,
}

/// Computes a reference solution.
///
/// Plain SCF is tried first. If it does not reach the tolerance, the
/// level-shifted iteration is run at the problem's a-priori shift. A run that
/// stalls at a roundoff floor is finished with the shift that minimises the
/// spectral-radius bound at its approximate solution.
pub fn ground_truth(problem: &dyn NepvProblem, settings: &Settings) -> Result<GroundTruth> {
    let start = starting_subspace(problem, Start::Default)?;
    let base = ScfOptions::default()
        .with_tol(settings.tol)
        .with_max_iter(settings.max_iter);

    let mut shifts = vec![0.0];
    shifts.extend(problem.apriori_sigma());
    let mut stalled: Option<IterationHistory> = None;
    for sigma in shifts {
        let run = scf_iterate(problem, &start, &base.clone().with_sigma(sigma))?;
        if run.converged() {
            return finish(problem, &run, sigma);
        }
        let usable = run.status == Status::MaxIter && run.final_residual() <= POLISH_ENTRY_RESIDUAL;
        let better = stalled
            .as_ref()
            .is_none_or(|s| run.final_residual() < s.final_residual());
        if usable && better {
            stalled = Some(run);
        }
    }

    let stalled = stalled.ok_or_else(|| {
        Error::CertificationFailed("no shift brought the SCF residual near the tolerance".into())
    })?;
    let rough = certify(problem, &stalled.final_subspace(), POLISH_ENTRY_RESIDUAL)?;
    let q = q_extremes(problem, &rough)?;
    let sigma = optimal_sigma(q.mu_min, q.mu_max, rough.delta_star, rough.s_star)?;
    let run = scf_iterate(problem, &stalled.final_subspace(), &base.with_sigma(sigma))?;
    finish(problem, &run, sigma)
}

fn finish(problem: &dyn NepvProblem, run: &IterationHistory, sigma: f64) -> Result<GroundTruth> {
    let cert = certify(problem, &run.final_subspace(), TRUTH_CERT_TOL)
        .map_err(|e| Error::CertificationFailed(e.to_string()))?;
    Ok(GroundTruth {
        cert,
        sigma_used: sigma,
    })
}

/// Runs the SCF at shift `sigma` from a seeded random start, recording
/// subspace errors against `truth`, and fits the observed rate.
///
/// The rate is `None` when the run does not converge.
pub fn observed_run(
    problem: &dyn NepvProblem,
    truth: &SolutionCertificate,
    sigma: f64,
    settings: &Settings,
) -> Result<(IterationHistory, Option<f64>)> {
    let start = starting_subspace(problem, Start::Random(settings.seed))?;
    let opts = ScfOptions::default()
        .with_sigma(sigma)
        .with_tol(settings.tol.max(OBSERVED_RUN_TOL))
        .with_max_iter(settings.max_iter)
        .with_reference(truth.clone());
    let run = scf_iterate(problem, &start, &opts)?;
    let rate = if run.converged() {
        fit_history_rate(&run, settings.window, settings.fit_floor).ok()
    } else {
        None
    };
    Ok((run, rate))
}

/// Everything reported for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesSummary {
    pub eta_sup_infty: f64,
    pub eta_sup: f64,
    pub eta_czbl: f64,
    pub observed: Option<f64>,
    pub delta_star: f64,
    pub s_star: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub sigma_used_for_truth: f64,
}

/// Rate estimates of the SCF at shift `sigma`, with the observed rate of an
/// actual run.
pub fn compute_rates(spec: &ProblemSpec, sigma: f64, settings: &Settings) -> Result<RatesSummary> {
    let problem = spec.build()?;
    let truth = ground_truth(problem.as_ref(), settings)?;
    rates_at(problem.as_ref(), &truth, sigma, settings)
}

/// [`compute_rates`] with a precomputed ground truth.
pub fn rates_at(
    problem: &dyn NepvProblem,
    truth: &GroundTruth,
    sigma: f64,
    settings: &Settings,
) -> Result<RatesSummary> {
    let cert = &truth.cert;
    let report = rate_report(problem, cert, sigma)?;
    let q = q_extremes(problem, cert)?;
    let (_, observed) = observed_run(problem, cert, sigma, settings)?;
    Ok(RatesSummary {
        eta_sup_infty: report.eta_sup_infty,
        eta_sup: report.eta_sup,
        eta_czbl: report.eta_czbl,
        observed,
        delta_star: cert.delta_star,
        s_star: cert.s_star,
        mu_min: q.mu_min,
        mu_max: q.mu_max,
        sigma_used_for_truth: truth.sigma_used,
    })
}

/// The quantity varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Alpha,
    Beta,
    Sigma,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Sigma => "sigma",
        }
    }
}

/// Grid point spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// `steps` points from `from` to `to`, both included.
pub fn grid(from: f64, to: f64, steps: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Error::InvalidParams(
            "a grid needs finite bounds and at least one point".into(),
        ));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let last = (steps - 1) as f64;
    match spacing {
        Spacing::Linear => Ok((0..steps)
            .map(|i| from + (to - from) * i as f64 / last)
            .collect()),
        Spacing::Log => {
            if from <= 0.0 || to <= 0.0 {
                return Err(Error::InvalidParams(
                    "log spacing needs positive bounds".into(),
                ));
            }
            let (a, b) = (from.ln(), to.ln());
            Ok((0..steps)
                .map(|i| (a + (b - a) * i as f64 / last).exp())
                .collect())
        }
    }
}

/// One grid point of a sweep. Estimates are `None` when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub eta_sup_infty: Option<f64>,
    pub eta_sup: Option<f64>,
    pub eta_czbl: Option<f64>,
    pub observed: Option<f64>,
    pub rho_sigma_bound: Option<f64>,
    pub status: String,
}

impl SweepRow {
    fn failed(param_value: f64, err: &Error) -> Self {
        Self {
            param_value,
            eta_sup_infty: None,
            eta_sup: None,
            eta_czbl: None,
            observed: None,
            rho_sigma_bound: None,
            status: format!("error: {err}"),
        }
    }
}

/// Reference shifts of a σ-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMarkers {
    /// `μ_max/2 − δ*`, above which the level-shifted SCF converges locally.
    pub sigma_lower: f64,
    pub apriori_sigma: Option<f64>,
    /// Minimiser of the spectral-radius bound.
    pub optimal_sigma: Option<f64>,
    /// Grid point with the smallest `ρ(𝓛_σ)`.
    pub argmin_sigma: Option<f64>,
    pub min_eta_sup_infty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    pub markers: Option<SweepMarkers>,
}

/// Evaluates every grid point in parallel; rows come back in grid order.
///
/// A coupling sweep (α or β) recomputes the ground truth per point and
/// reports the SCF at shift `sigma`. A σ-sweep shares one ground truth.
pub fn sweep(
    spec: &ProblemSpec,
    param: SweepParam,
    values: &[f64],
    sigma: f64,
    settings: &Settings,
) -> Result<Sweep> {
    match (param, spec) {
        (SweepParam::Alpha, ProblemSpec::KohnSham(_)) | (SweepParam::Beta, ProblemSpec::Gpe(_)) => {
            let rows = values
                .par_iter()
                .map(|&v| coupling_row(&spec.with_coupling(v), v, sigma, settings))
                .collect();
            Ok(Sweep {
                param,
                rows,
                markers: None,
            })
        }
        (SweepParam::Sigma, _) => sigma_sweep(spec, values, settings),
        _ => Err(Error::InvalidParams(format!(
            "parameter {} does not belong to this problem",
            param.as_str()
        ))),
    }
}

fn coupling_row(spec: &ProblemSpec, value: f64, sigma: f64, settings: &Settings) -> SweepRow {
    let point = || -> Result<SweepRow> {
        let problem = spec.build()?;
        let truth = ground_truth(problem.as_ref(), settings)?;
        shifted_row(problem.as_ref(), &truth.cert, value, sigma, settings)
    };
    point().unwrap_or_else(|e| SweepRow::failed(value, &e))
}

fn shifted_row(
    problem: &dyn NepvProblem,
    cert: &SolutionCertificate,
    value: f64,
    sigma: f64,
    settings: &Settings,
) -> Result<SweepRow> {
    let report = rate_report(problem, cert, sigma)?;
    let bound = q_extremes(problem, cert)
        .and_then(|q| rho_sigma_bound(q.mu_min, q.mu_max, cert.delta_star, cert.s_star, sigma))
        .ok();
    let (run, observed) = observed_run(problem, cert, sigma, settings)?;
    Ok(SweepRow {
        param_value: value,
        eta_sup_infty: Some(report.eta_sup_infty),
        eta_sup: Some(report.eta_sup),
        eta_czbl: Some(report.eta_czbl),
        observed,
        rho_sigma_bound: bound,
        status: run.status.as_str().to_string(),
    })
}

fn sigma_sweep(spec: &ProblemSpec, values: &[f64], settings: &Settings) -> Result<Sweep> {
    let problem = spec.build()?;
    let problem = problem.as_ref();
    let truth = ground_truth(problem, settings)?;
    let cert = &truth.cert;
    let q: QExtremes = q_extremes(problem, cert)?;

    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&s| {
            shifted_row(problem, cert, s, s, settings).unwrap_or_else(|e| SweepRow::failed(s, &e))
        })
        .collect();

    let best = rows
        .iter()
        .filter_map(|r| r.eta_sup_infty.map(|rho| (r.param_value, rho)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let markers = SweepMarkers {
        sigma_lower: sigma_lower_bound(q.mu_max, cert.delta_star),
        apriori_sigma: problem.apriori_sigma(),
        optimal_sigma: optimal_sigma(q.mu_min, q.mu_max, cert.delta_star, cert.s_star).ok(),
        argmin_sigma: best.map(|b| b.0),
        min_eta_sup_infty: best.map(|b| b.1),
    };
    Ok(Sweep {
        param: SweepParam::Sigma,
        rows,
        markers: Some(markers),
    })
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// CSV header of a sweep.
pub const SWEEP_HEADER: &str =
    "param_value,eta_sup_infty,eta_sup,eta_czbl,observed,rho_sigma_bound,status";

/// CSV header of an iteration history.
pub const HISTORY_HEADER: &str = "iter,residual,gap,subspace_error";

impl Sweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let status = if r.status.contains([',', '"', '\n']) {
                format!("\"{}\"", r.status.replace('"', "\"\""))
            } else {
                r.status.clone()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                format_float(r.param_value),
                format_opt(r.eta_sup_infty),
                format_opt(r.eta_sup),
                format_opt(r.eta_czbl),
                format_opt(r.observed),
                format_opt(r.rho_sigma_bound),
                status
            ));
        }
        out
    }
}

impl IterationHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iter,
                format_float(r.residual),
                format_float(r.gap),
                format_opt(r.subspace_error)
            ));
        }
        out
    }
}

/// A solution basis in portable form, stored column-major.
///
/// Loading re-certifies the basis against the problem, so a file only needs
/// the subspace itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedSolution {
    pub spec: ProblemSpec,
    pub n: usize,
    pub k: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SavedSolution {
    pub fn new(spec: ProblemSpec, basis: &CMat) -> Self {
        Self {
            spec,
            n: basis.nrows(),
            k: basis.ncols(),
            re: basis.iter().map(|z| z.re).collect(),
            im: basis.iter().map(|z| z.im).collect(),
        }
    }

    pub fn basis(&self) -> Result<CMat> {
        let len = self.n * self.k;
        if self.re.len() != len || self.im.len() != len {
            return Err(Error::DimensionMismatch {
                expected: (len, len),
                found: (self.re.len(), self.im.len()),
            });
        }
        Ok(CMat::from_iterator(
            self.n,
            self.k,
            self.re
                .iter()
                .zip(&self.im)
                .map(|(&re, &im)| Complex64::new(re, im)),
        ))
    }

    /// Certifies the stored basis for `problem`.
    pub fn certify(&self, problem: &dyn NepvProblem, cert_tol: f64) -> Result<SolutionCertificate> {
        let basis = self.basis()?;
        if (problem.dim(), problem.k()) != (self.n, self.k) {
            return Err(Error::DimensionMismatch {
                expected: (problem.dim(), problem.k()),
                found: (self.n, self.k),
            });
        }
        certify(problem, &orthonormalize(&basis)?, cert_tol)
    }
}
