//! Batch scenario runner for quantum Markov semigroup transport
//! computations: structure validation, distance tables, Ricci estimates,
//! functional-inequality reports, heat-flow trajectories, and geodesics.
//!
//! Exit codes: 0 success; 2 validation failure; 3 solver non-convergence;
//! 4 schema error.

mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use qms_core::Error as CoreError;
use scenario::{Scenario, TaskSpec};

#[derive(Parser, Debug)]
#[command(name = "qms", version, about = "Transport metrics and functional inequalities for quantum Markov semigroups")]
struct Cli {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,

    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (overrides the scenario's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Accept mobility families without a convexity certificate.
    #[arg(long)]
    allow_nonconvex: bool,

    /// Echo the normalized scenario JSON to stdout and exit.
    #[arg(long)]
    dump_normalized: bool,

    /// Override a solver tolerance, KEY=VAL (grid_n, max_iter, primal_tol,
    /// constraint_tol, eps_boundary). Repeatable.
    #[arg(long = "tol-override", value_name = "KEY=VAL")]
    tol_override: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn schema_err(msg: impl Into<String>) -> Failure {
    Failure {
        code: 4,
        message: msg.into(),
    }
}

fn classify(e: CoreError) -> Failure {
    let code = match &e {
        CoreError::SolverNonConvergence(_)
        | CoreError::EndpointsNotConnected
        | CoreError::NonConvexMean => 3,
        _ => 2,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&cli.scenario)
        .map_err(|e| schema_err(format!("cannot read scenario: {e}")))?;
    let mut scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| schema_err(format!("scenario parse error: {e}")))?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    scenario.solver = apply_overrides(scenario.solver.clone(), &cli.tol_override)?;

    if cli.dump_normalized {
        let norm = scenario.normalized();
        println!(
            "{}",
            serde_json::to_string_pretty(&norm).map_err(|e| schema_err(e.to_string()))?
        );
        return Ok(());
    }

    // worker pool size; reductions are deterministic regardless
    if let Ok(threads) = std::env::var("QMS_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }

    let outdir = cli
        .out
        .clone()
        .or_else(|| scenario.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qms-out"));
    std::fs::create_dir_all(&outdir)
        .map_err(|e| schema_err(format!("cannot create output dir: {e}")))?;

    let ds = scenario.build().map_err(classify)?;
    let report = ds.validate();
    output::write_json(&outdir, "validation.json", &report)
        .map_err(|e| schema_err(e.to_string()))?;
    if !report.validated {
        output::print_validation(&report);
        return Err(Failure {
            code: 2,
            message: "structure failed validation".into(),
        });
    }
    let theta = scenario.theta_assignment(&ds);
    theta.check(&ds).map_err(classify)?;
    let opts = scenario.solver.to_options(cli.allow_nonconvex);

    output::write_json(
        &outdir,
        "run.json",
        &output::RunMetadata::new(&scenario, env!("CARGO_PKG_VERSION")),
    )
    .map_err(|e| schema_err(e.to_string()))?;

    // tasks are independent; each owns a seed derived from (seed, index),
    // so results do not depend on scheduling. Outputs are written in task
    // order afterwards.
    use rayon::prelude::*;
    let results: Vec<Result<Vec<output::Artifact>, Failure>> = scenario
        .tasks
        .par_iter()
        .enumerate()
        .map(|(idx, task)| {
            let mut rng = ChaCha12Rng::seed_from_u64(scenario.seed.wrapping_add(idx as u64));
            run_task(&scenario, &ds, &theta, &opts, idx, task, &mut rng).map_err(classify)
        })
        .collect();
    for res in results {
        for artifact in res? {
            artifact
                .write(&outdir)
                .map_err(|e| schema_err(e.to_string()))?;
            println!("wrote {}", artifact.filename);
        }
    }
    Ok(())
}

fn apply_overrides(
    mut solver: scenario::SolverSpec,
    overrides: &[String],
) -> Result<scenario::SolverSpec, Failure> {
    for kv in overrides {
        let Some((key, val)) = kv.split_once('=') else {
            return Err(schema_err(format!("malformed --tol-override '{kv}'")));
        };
        let parse_f = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| schema_err(format!("invalid value in '{kv}'")))
        };
        let parse_u = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| schema_err(format!("invalid value in '{kv}'")))
        };
        match key {
            "grid_n" => solver.grid_n = parse_u(val)?,
            "max_iter" => solver.max_iter = parse_u(val)?,
            "primal_tol" => solver.primal_tol = parse_f(val)?,
            "constraint_tol" => solver.constraint_tol = parse_f(val)?,
            "eps_boundary" => solver.eps_boundary = parse_f(val)?,
            _ => return Err(schema_err(format!("unknown tolerance key '{key}'"))),
        }
    }
    Ok(solver)
}

fn run_task(
    scenario: &Scenario,
    ds: &qms_core::diffstruct::DifferentialStructure,
    theta: &qms_core::transport::ThetaAssignment,
    opts: &qms_core::transport::SolverOptions,
    idx: usize,
    task: &TaskSpec,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<output::Artifact>, CoreError> {
    match task {
        TaskSpec::Validate => {
            let report = ds.validate();
            output::print_validation(&report);
            Ok(vec![output::Artifact::json(
                format!("{idx:02}_validate.json"),
                &report,
            )])
        }
        TaskSpec::Distance { endpoints } => {
            let states: Vec<_> = endpoints
                .iter()
                .map(|m| scenario.density(&ds.algebra, m))
                .collect::<Result<_, _>>()?;
            let k = states.len();
            let mut values = vec![vec![0.0; k]; k];
            let mut residuals = vec![0.0f64; k];
            for i in 0..k {
                for j in (i + 1)..k {
                    let r = qms_core::transport::distance(ds, theta, &states[i], &states[j], opts)?;
                    values[i][j] = r.value;
                    values[j][i] = r.value;
                    residuals[i] = residuals[i].max(r.residual);
                    residuals[j] = residuals[j].max(r.residual);
                }
            }
            Ok(vec![output::Artifact::distance_csv(
                format!("{idx:02}_distance.csv"),
                &values,
                &residuals,
            )])
        }
        TaskSpec::Ricci {
            samples,
            include_witnesses,
        } => {
            let report = match qms_core::entropyflow::intertwining_lambda(ds)? {
                Some((lambda, residual)) => output::RicciJson {
                    lambda_hat: lambda,
                    method: "intertwining".into(),
                    residual,
                    witness_count: 0,
                    witnesses: None,
                },
                None => {
                    let est = qms_core::entropyflow::ricci_scan(ds, theta, *samples, true, rng)?;
                    output::RicciJson {
                        lambda_hat: est.lambda_hat,
                        method: "rayleigh-scan".into(),
                        residual: est.residual,
                        witness_count: est.witness_count,
                        witnesses: include_witnesses.then(|| {
                            est.witnesses
                                .iter()
                                .map(|(r, a)| output::Witness {
                                    rho: scenario::from_cmatrix(r),
                                    potential: scenario::from_cmatrix(a),
                                })
                                .collect()
                        }),
                    }
                }
            };
            Ok(vec![output::Artifact::json(
                format!("{idx:02}_ricci.json"),
                &report,
            )])
        }
        TaskSpec::Inequalities { samples } => {
            let report = qms_core::funcineq::inequality_report(
                ds,
                theta,
                scenario.structure_id(),
                *samples,
                opts,
                rng,
            )?;
            Ok(vec![output::Artifact::json(
                format!("{idx:02}_inequalities.json"),
                &report,
            )])
        }
        TaskSpec::Evolve { rho0, t_max, steps } => {
            let rho0 = scenario.density(&ds.algebra, rho0)?;
            let mut rows = Vec::with_capacity(steps + 1);
            for s in 0..=*steps {
                let t = t_max * s as f64 / (*steps).max(1) as f64;
                let rho_t = ds.semigroup_apply_dual(t, &rho0)?;
                let ent = qms_core::entropyflow::entropy(&ds.algebra, &ds.sigma, &rho_t)?;
                let fi = if qms_core::linalg::min_eigenvalue(&rho_t) > 1e-12 {
                    qms_core::entropyflow::fisher(ds, theta, &rho_t)?.0
                } else {
                    f64::NAN
                };
                let trace_residual = (ds.algebra.tau(&rho_t).re - 1.0).abs();
                rows.push([t, ent, fi, trace_residual]);
            }
            Ok(vec![output::Artifact::evolve_csv(
                format!("{idx:02}_evolve.csv"),
                &rows,
            )])
        }
        TaskSpec::Geodesic {
            rho0,
            a0,
            t_max,
            steps,
        } => {
            let rho0 = scenario.density(&ds.algebra, rho0)?;
            let a0 = scenario::to_cmatrix(a0).map_err(CoreError::InvalidParameter)?;
            let curve = qms_core::transport::geodesic_shoot(ds, theta, &rho0, &a0, *t_max, *steps)?;
            let rows: Vec<output::CurvePoint> = curve
                .times
                .iter()
                .zip(curve.states.iter().zip(&curve.potentials))
                .map(|(&t, (rho, a))| output::CurvePoint {
                    t,
                    rho: scenario::from_cmatrix(rho),
                    potential: scenario::from_cmatrix(a),
                })
                .collect();
            Ok(vec![output::Artifact::json(
                format!("{idx:02}_geodesic.json"),
                &rows,
            )])
        }
    }
}
