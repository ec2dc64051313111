//! Fixtures and reusable checks shared by the integration test targets.

#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::DVector;
use nepv::analysis::{
    eta_czbl, eta_m, gap_matrix, local_adjoint, local_operator, local_operator_via_q,
    operator_norm_frobenius, q_extremes, realify, restricted_derivative, rho_sigma_bound,
    spectral_radius, sylvester_solution,
};
use nepv::experiment::{ground_truth, ProblemSpec, Settings};
use nepv::linalg::{
    frobenius, hermitian_eig, m2v, orthonormalize, real_inner, tangent_angle_matrix,
};
use nepv::problems::{fd_derivative, GpeParams, KohnShamParams, Potential};
use nepv::{CMat, NepvProblem, SolutionCertificate, Subspace};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ks_spec(alpha: f64) -> ProblemSpec {
    ProblemSpec::KohnSham(KohnShamParams { n: 10, k: 2, alpha })
}

pub fn gpe_spec(beta: f64, potential: Potential) -> ProblemSpec {
    ProblemSpec::Gpe(GpeParams {
        grid_points: 10,
        half_width: 1.0,
        omega: 0.85,
        beta,
        potential,
    })
}

/// A benchmark problem with its certified ground truth.
pub struct Bench {
    pub name: &'static str,
    pub problem: Box<dyn NepvProblem>,
    pub cert: SolutionCertificate,
}

impl std::fmt::Debug for Bench {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

fn solve(name: &'static str, spec: ProblemSpec) -> Bench {
    let problem = spec.build().expect("valid benchmark parameters");
    let truth =
        ground_truth(problem.as_ref(), &Settings::default()).expect("benchmark ground truth");
    Bench {
        name,
        problem,
        cert: truth.cert,
    }
}

pub fn ks_085() -> &'static Bench {
    static CELL: OnceLock<Bench> = OnceLock::new();
    CELL.get_or_init(|| solve("kohn-sham alpha=0.85", ks_spec(0.85)))
}

pub fn ks_100() -> &'static Bench {
    static CELL: OnceLock<Bench> = OnceLock::new();
    CELL.get_or_init(|| solve("kohn-sham alpha=1", ks_spec(1.0)))
}

pub fn gpe_radial() -> &'static Bench {
    static CELL: OnceLock<Bench> = OnceLock::new();
    CELL.get_or_init(|| solve("gpe radial beta=3.5", gpe_spec(3.5, Potential::Radial)))
}

pub fn gpe_nonradial() -> &'static Bench {
    static CELL: OnceLock<Bench> = OnceLock::new();
    CELL.get_or_init(|| {
        solve(
            "gpe nonradial beta=2.2",
            gpe_spec(2.2, Potential::NonRadial),
        )
    })
}

pub fn all_benches() -> [&'static Bench; 4] {
    [ks_085(), ks_100(), gpe_radial(), gpe_nonradial()]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-1, 1]`, with zero imaginary part when `real`.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, real: bool) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re = rng.random_range(-1.0..1.0);
        let im = if real {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        };
        Complex64::new(re, im)
    })
}

/// A random tangent-space direction for `bench`, normalised in Frobenius norm.
pub fn random_direction(bench: &Bench, rng: &mut ChaCha8Rng) -> CMat {
    let (p, k) = (bench.cert.vperp.ncols(), bench.cert.k());
    let z = random_matrix(rng, p, k, bench.problem.is_real());
    let norm = frobenius(&z);
    z.unscale(norm)
}

/// Random unitary `k × k` matrix, real orthogonal when `real`.
pub fn random_unitary(rng: &mut ChaCha8Rng, k: usize, real: bool) -> CMat {
    orthonormalize(&random_matrix(rng, k, k, real))
        .expect("random square matrix has full rank")
        .into_basis()
}

/// The basis `orth(V* + εV*⊥Z)` near the solution.
pub fn perturbed(bench: &Bench, z: &CMat, eps: f64) -> Subspace {
    orthonormalize(&(&bench.cert.vstar + (&bench.cert.vperp * z).scale(eps)))
        .expect("perturbation keeps full rank")
}

/// One plain SCF step.
pub fn scf_step(problem: &dyn NepvProblem, v: &Subspace) -> Subspace {
    let eig = hermitian_eig(&problem.evaluate(v.basis())).expect("hermitian hamiltonian");
    Subspace::new(eig.vectors(0, problem.k())).expect("eigenvectors are orthonormal")
}

/// Admissible shifts used when sampling `σ`.
pub fn sample_shifts(bench: &Bench, count: usize, upper: f64) -> Vec<f64> {
    let lower = -bench.cert.delta_star + 0.01;
    (0..count)
        .map(|i| lower + (upper - lower) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Outcome of a property check: the worst measured value and whether it
/// satisfied the threshold.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, worst: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            worst,
            threshold,
            passed: worst <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, worst: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            worst,
            threshold,
            passed: worst >= threshold,
        }
    }
}

/// `ρ ≤ η_m ≤ η_sup` for several `m` and `η_sup ≤ η_czbl` at `σ = 0`.
/// Reports the largest violation.
pub fn ordering_chain(bench: &Bench, sigma: f64) -> Check {
    let op = local_operator(bench.problem.as_ref(), &bench.cert, sigma).unwrap();
    let rho = spectral_radius(&op).unwrap();
    let sup = operator_norm_frobenius(&op).unwrap();
    let mut chain = vec![rho];
    for m in [64, 16, 4, 2] {
        chain.push(eta_m(&op, m).unwrap());
    }
    chain.push(sup);
    if sigma == 0.0 {
        chain.push(eta_czbl(bench.problem.as_ref(), &bench.cert).unwrap());
    }
    let violation = chain.windows(2).fold(0.0f64, |m, w| m.max(w[0] - w[1]));
    Check::at_most(
        format!("ordering chain, {} sigma={sigma}", bench.name),
        violation,
        1e-10,
    )
}

/// Pairing `⟨𝓛Z, Y⟩ = ⟨Z, 𝓛*Y⟩` for both adjoint constructions, and their
/// mutual agreement.
pub fn adjoint_checks(bench: &Bench, trials: usize, seed: u64) -> Vec<Check> {
    let problem = bench.problem.as_ref();
    let op = local_operator(problem, &bench.cert, 0.0).unwrap();
    let adj = local_adjoint(&op, problem, &bench.cert).unwrap();
    let analytic = adj
        .analytic
        .as_ref()
        .expect("benchmarks have closed-form adjoints");
    let mut rng = rng(seed);
    let (mut pair_t, mut pair_a) = (0.0f64, 0.0f64);
    let mut probes = Vec::with_capacity(trials);
    for _ in 0..trials {
        let z = random_direction(bench, &mut rng);
        let y = random_direction(bench, &mut rng);
        let lhs = real_inner(&op.apply(&z), &y);
        pair_t = pair_t.max((lhs - real_inner(&z, &adj.transposed.apply(&y))).abs());
        pair_a = pair_a.max((lhs - real_inner(&z, &analytic.apply(&y))).abs());
        probes.push(y);
    }
    vec![
        Check::at_most(
            format!("adjoint pairing (transpose), {}", bench.name),
            pair_t,
            1e-11,
        ),
        Check::at_most(
            format!("adjoint pairing (closed form), {}", bench.name),
            pair_a,
            1e-11,
        ),
        Check::at_most(
            format!("closed-form vs transposed adjoint, {}", bench.name),
            adj.max_disagreement(&probes).unwrap(),
            1e-11,
        ),
    ]
}

/// `‖Λ*⊥X − XΛ* − V*⊥ᴴ[H(V*) − H(V)]V*‖_F / ‖X‖_F` at random nearby `V`.
pub fn sylvester_residual(bench: &Bench, trials: usize, seed: u64) -> Check {
    let problem = bench.problem.as_ref();
    let cert = &bench.cert;
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let z = random_direction(bench, &mut rng);
        let v = perturbed(bench, &z, 0.3);
        let x = sylvester_solution(problem, cert, &v, 0.0).unwrap();
        let rhs = cert.vperp.adjoint()
            * (problem.evaluate(&cert.vstar) - problem.evaluate(v.basis()))
            * &cert.vstar;
        let (occ, virt) = (cert.occupied(), cert.virtuals());
        let lhs = CMat::from_fn(x.nrows(), x.ncols(), |i, j| {
            x[(i, j)].scale(virt[i] - occ[j])
        });
        worst = worst.max(frobenius(&(lhs - rhs)) / frobenius(&x));
    }
    Check::at_most(format!("sylvester residual, {}", bench.name), worst, 1e-12)
}

/// `‖𝓛_σ(Z) − (D_σ ⊙ 𝓠(Z) − Z)‖_F / ‖Z‖_F` over random `Z` and `σ`.
pub fn two_path_identity(bench: &Bench, trials: usize, seed: u64) -> Check {
    let problem = bench.problem.as_ref();
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let sigma = rng.random_range(-0.9 * bench.cert.delta_star..10.0);
        let direct = local_operator(problem, &bench.cert, sigma).unwrap();
        let via_q = local_operator_via_q(problem, &bench.cert, sigma).unwrap();
        let z = random_direction(bench, &mut rng);
        worst = worst.max(frobenius(&(direct.apply(&z) - via_q.apply(&z))));
    }
    Check::at_most(
        format!("two-path shifted operator, {}", bench.name),
        worst,
        1e-12,
    )
}

/// First-order error propagation ratio
/// `‖T(Ṽ) + 𝓛(T(V))‖_F / ‖T(V)‖_F` for `V = orth(V* + εV*⊥Z)`.
///
/// One plain step maps `T(V)` to the Sylvester solution `X(V)` up to higher
/// order terms, and `X(V) = −𝓛(T(V)) + o(‖T(V)‖)` because `X` is built from
/// `H(V*) − H(V)`.
pub fn first_order_ratio(bench: &Bench, z: &CMat, eps: f64) -> f64 {
    let problem = bench.problem.as_ref();
    let op = local_operator(problem, &bench.cert, 0.0).unwrap();
    let v = perturbed(bench, z, eps);
    let t = tangent_angle_matrix(&v, &bench.cert).unwrap();
    let next = scf_step(problem, &v);
    let t_next = tangent_angle_matrix(&next, &bench.cert).unwrap();
    frobenius(&(t_next + op.apply(&t))) / frobenius(&t)
}

/// Smallest decay factor of the first-order ratio over `ε = 1e-2, 1e-3, 1e-4`.
pub fn first_order_decay(bench: &Bench, seed: u64) -> Check {
    let mut rng = rng(seed);
    let z = random_direction(bench, &mut rng);
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| first_order_ratio(bench, &z, eps))
        .collect();
    let decay = (ratios[0] / ratios[1]).min(ratios[1] / ratios[2]);
    Check::at_least(
        format!("first-order ratio decay per decade, {}", bench.name),
        decay,
        5.0,
    )
}

/// `ρ(𝓛_σ) − bound(σ)` over `count` admissible shifts up to 30.
pub fn shift_bound_dominance(bench: &Bench, count: usize) -> Check {
    let problem = bench.problem.as_ref();
    let q = q_extremes(problem, &bench.cert).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for sigma in sample_shifts(bench, count, 30.0) {
        let rho = spectral_radius(&local_operator(problem, &bench.cert, sigma).unwrap()).unwrap();
        let bound = rho_sigma_bound(
            q.mu_min,
            q.mu_max,
            bench.cert.delta_star,
            bench.cert.s_star,
            sigma,
        )
        .unwrap();
        worst = worst.max(rho - bound);
    }
    Check::at_most(
        format!("shift bound dominance on {count} shifts, {}", bench.name),
        worst,
        1e-10,
    )
}

/// Self-adjointness of `𝓠` by random sampling and by its real
/// representation, and positivity of its smallest eigenvalue.
pub fn restricted_derivative_checks(bench: &Bench, trials: usize, seed: u64) -> Vec<Check> {
    let problem = bench.problem.as_ref();
    let q = restricted_derivative(problem, &bench.cert);
    let mut rng = rng(seed);
    let mut sampled = 0.0f64;
    for _ in 0..trials {
        let z = random_direction(bench, &mut rng);
        let y = random_direction(bench, &mut rng);
        sampled = sampled.max((real_inner(&y, &q.apply(&z)) - real_inner(&q.apply(&y), &z)).abs());
    }
    let ext = q_extremes(problem, &bench.cert).unwrap();
    vec![
        Check::at_most(
            format!("restricted derivative symmetry (sampled), {}", bench.name),
            sampled,
            1e-10,
        ),
        Check::at_most(
            format!(
                "restricted derivative symmetry (representation), {}",
                bench.name
            ),
            ext.self_adjoint_defect,
            1e-10,
        ),
        Check::at_least(
            format!("restricted derivative mu_min, {}", bench.name),
            ext.mu_min,
            f64::MIN_POSITIVE,
        ),
    ]
}

/// Relative difference between the analytic derivative and central finite
/// differences with step `1e-5` at random points and directions.
pub fn derivative_agreement(bench: &Bench, trials: usize, seed: u64) -> Check {
    let problem = bench.problem.as_ref();
    let (n, k) = (problem.dim(), problem.k());
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let v = orthonormalize(&random_matrix(&mut rng, n, k, problem.is_real())).unwrap();
        let x = random_matrix(&mut rng, n, k, problem.is_real());
        let exact = problem.derivative(v.basis(), &x);
        let approx = fd_derivative(problem, v.basis(), &x, 1e-5).unwrap();
        worst = worst.max(frobenius(&(exact.clone() - approx)) / frobenius(&exact));
    }
    Check::at_most(
        format!("finite-difference derivative, {}", bench.name),
        worst,
        1e-5,
    )
}

/// `H(VQ) = H(V)` and `T(VQ) = T(V)` for random unitary `Q`.
pub fn unitary_invariance(bench: &Bench, trials: usize, seed: u64) -> Check {
    let problem = bench.problem.as_ref();
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let z = random_direction(bench, &mut rng);
        let v = perturbed(bench, &z, 0.5);
        let q = random_unitary(&mut rng, problem.k(), problem.is_real());
        let vq = Subspace::new(v.basis() * &q).unwrap();
        let h = problem.evaluate(v.basis());
        let dh = frobenius(&(&h - problem.evaluate(vq.basis()))) / frobenius(&h);
        let t = tangent_angle_matrix(&v, &bench.cert).unwrap();
        let dt = frobenius(&(&t - tangent_angle_matrix(&vq, &bench.cert).unwrap())) / frobenius(&t);
        worst = worst.max(dh).max(dt);
    }
    Check::at_most(
        format!("unitary invariance of H and T, {}", bench.name),
        worst,
        1e-12,
    )
}

/// `‖𝐋x − m2v(act(v2m(x)))‖` for random real coordinate vectors.
pub fn realify_faithfulness(bench: &Bench, sigma: f64, trials: usize, seed: u64) -> Check {
    let op = local_operator(bench.problem.as_ref(), &bench.cert, sigma).unwrap();
    let mat = realify(&op).unwrap();
    let (p, k) = (op.rows(), op.cols());
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let z = random_matrix(&mut rng, p, k, op.is_real_domain());
        let coords = if op.is_real_domain() {
            DVector::from_iterator(p * k, z.iter().map(|c| c.re))
        } else {
            m2v(&z)
        };
        let image = op.apply(&z);
        let expected = if op.is_real_domain() {
            DVector::from_iterator(p * k, image.iter().map(|c| c.re))
        } else {
            m2v(&image)
        };
        worst = worst.max((&mat * &coords - expected).norm() / coords.norm());
    }
    Check::at_most(
        format!("realification faithfulness, {}", bench.name),
        worst,
        1e-12,
    )
}

/// All entries of `D_σ` finite and positive.
pub fn gap_matrix_positive(bench: &Bench, sigma: f64) -> bool {
    gap_matrix(&bench.cert, sigma)
        .unwrap()
        .entries
        .iter()
        .all(|d| d.is_finite() && *d > 0.0)
}
