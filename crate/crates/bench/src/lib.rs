//! Benchmark fixtures: the standard benchmark configurations with their
//! certified solutions.

use nepv::experiment::{ground_truth, ProblemSpec, Settings};
use nepv::problems::{GpeParams, KohnShamParams, Potential};
use nepv::{NepvProblem, SolutionCertificate};

pub fn kohn_sham(alpha: f64) -> ProblemSpec {
    ProblemSpec::KohnSham(KohnShamParams { n: 10, k: 2, alpha })
}

pub fn gpe_radial() -> ProblemSpec {
    ProblemSpec::Gpe(GpeParams {
        grid_points: 10,
        half_width: 1.0,
        omega: 0.85,
        beta: 3.5,
        potential: Potential::Radial,
    })
}

/// Builds the problem and certifies its ground-truth solution.
pub fn solved(spec: &ProblemSpec) -> (Box<dyn NepvProblem>, SolutionCertificate) {
    let problem = spec.build().expect("valid benchmark parameters");
    let truth =
        ground_truth(problem.as_ref(), &Settings::default()).expect("benchmark ground truth");
    (problem, truth.cert)
}
