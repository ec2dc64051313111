mod args;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use nepv::experiment::{
    compute_rates, format_float, grid, starting_subspace, sweep, RatesSummary, SavedSolution,
    Start, Sweep, TRUTH_CERT_TOL,
};
use nepv::scf::{fit_history_rate, scf_iterate, DEFAULT_FIT_FLOOR, DEFAULT_RATE_WINDOW};
use nepv::{IterationHistory, IterationRecord, ScfOptions, Status};
use serde::Serialize;

use args::{Cli, Command, Format, RatesArgs, SolveArgs, SweepArgs};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(&a),
        Command::Rates(a) => rates(&a).map(|()| ExitCode::SUCCESS),
        Command::Sweep(a) => run_sweep(&a).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}

/// Exit code of a finished `solve`: zero only for a converged run.
fn status_code(status: Status) -> ExitCode {
    ExitCode::from(match status {
        Status::Converged => 0,
        Status::MaxIter => 2,
        Status::Diverged => 3,
        Status::GapCollapse => 4,
    })
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Serialize)]
struct SolveReport<'a> {
    status: &'static str,
    iterations: usize,
    sigma: f64,
    final_residual: f64,
    observed: Option<f64>,
    records: &'a [IterationRecord],
}

fn solve(a: &SolveArgs) -> Result<ExitCode> {
    let spec = a.problem.spec();
    let problem = spec.build()?;
    let start = a.seed.map_or(Start::Default, Start::Random);
    let v0 = starting_subspace(problem.as_ref(), start)?;
    let mut opts = ScfOptions::default()
        .with_sigma(a.run.sigma)
        .with_tol(a.run.tol)
        .with_max_iter(a.run.max_iter);
    if let Some(path) = &a.certificate {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let saved: SavedSolution = serde_json::from_str(&text).context("parsing saved solution")?;
        let cert = saved
            .certify(problem.as_ref(), TRUTH_CERT_TOL)
            .with_context(|| format!("certifying {}", path.display()))?;
        opts = opts.with_reference(cert);
    }

    let history = scf_iterate(problem.as_ref(), &v0, &opts)?;
    let observed = observed_of(&history);
    let text = match a.run.format.unwrap_or(Format::Csv) {
        Format::Csv => history.to_csv(),
        Format::Json => to_json(&SolveReport {
            status: history.status.as_str(),
            iterations: history.iterations(),
            sigma: history.sigma,
            final_residual: history.final_residual(),
            observed,
            records: &history.records,
        })?,
    };
    emit(a.run.out.as_deref(), &text)?;

    if let (Some(path), true) = (&a.save_solution, history.converged()) {
        fs::write(path, to_json(&SavedSolution::new(spec, &history.final_v))?)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    eprintln!(
        "status: {} after {} iterations, final residual {}",
        history.status.as_str(),
        history.iterations(),
        format_float(history.final_residual())
    );
    match observed {
        Some(rate) => eprintln!("observed rate: {}", format_float(rate)),
        None => eprintln!("observed rate: n/a"),
    }
    Ok(status_code(history.status))
}

fn observed_of(history: &IterationHistory) -> Option<f64> {
    if !history.converged() {
        return None;
    }
    fit_history_rate(history, DEFAULT_RATE_WINDOW, DEFAULT_FIT_FLOOR).ok()
}

const RATES_HEADER: &str =
    "eta_sup_infty,eta_sup,eta_czbl,observed,delta_star,s_star,mu_min,mu_max,sigma_used_for_truth";

fn rates_csv(r: &RatesSummary) -> String {
    let fields = [
        Some(r.eta_sup_infty),
        Some(r.eta_sup),
        Some(r.eta_czbl),
        r.observed,
        Some(r.delta_star),
        Some(r.s_star),
        Some(r.mu_min),
        Some(r.mu_max),
        Some(r.sigma_used_for_truth),
    ];
    let row: Vec<String> = fields
        .iter()
        .map(|f| f.map(format_float).unwrap_or_default())
        .collect();
    format!("{RATES_HEADER}\n{}\n", row.join(","))
}

fn rates(a: &RatesArgs) -> Result<()> {
    let summary = compute_rates(&a.problem.spec(), a.run.sigma, &a.run.settings(a.seed))?;
    let text = match a.run.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&summary)?,
        Format::Csv => rates_csv(&summary),
    };
    emit(a.run.out.as_deref(), &text)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    param: &'static str,
    rows: &'a [nepv::experiment::SweepRow],
    markers: &'a Option<nepv::experiment::SweepMarkers>,
}

fn markers_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".markers.json");
    PathBuf::from(name)
}

fn run_sweep(a: &SweepArgs) -> Result<()> {
    let (from, to, steps, spacing) = a.grid()?;
    let values = grid(from, to, steps, spacing)?;
    let result: Sweep = sweep(
        &a.problem.spec(),
        a.param(),
        &values,
        a.run.sigma,
        &a.run.settings(a.seed),
    )?;

    let text = match a.run.format.unwrap_or(Format::Csv) {
        Format::Csv => result.to_csv(),
        Format::Json => to_json(&SweepReport {
            param: result.param.as_str(),
            rows: &result.rows,
            markers: &result.markers,
        })?,
    };
    emit(a.run.out.as_deref(), &text)?;

    if let Some(m) = &result.markers {
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_else(|| "n/a".into());
        let lines = [
            format!("sigma_lower: {}", format_float(m.sigma_lower)),
            format!("apriori_sigma: {}", opt(m.apriori_sigma)),
            format!("optimal_sigma: {}", opt(m.optimal_sigma)),
            format!("argmin_sigma: {}", opt(m.argmin_sigma)),
            format!("min_eta_sup_infty: {}", opt(m.min_eta_sup_infty)),
        ];
        match &a.run.out {
            Some(out) => {
                for line in &lines {
                    println!("{line}");
                }
                let path = markers_path(out);
                fs::write(&path, to_json(m)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            None => {
                for line in &lines {
                    eprintln!("{line}");
                }
            }
        }
    }
    Ok(())
}
