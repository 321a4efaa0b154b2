//! Result emission: deterministic JSON and CSV artifacts.
//!
//! CSV floats are printed at 17 significant digits; JSON uses the
//! shortest-roundtrip float encoding. Identical scenario + seed produce
//! byte-identical files.

use std::path::Path;

use serde::Serialize;

use crate::scenario::{Matrix, Scenario};
use qms_core::diffstruct::ValidationReport;

pub struct Artifact {
    pub filename: String,
    pub content: String,
}

impl Artifact {
    pub fn json<T: Serialize>(filename: String, value: &T) -> Artifact {
        let mut content = serde_json::to_string_pretty(value).expect("serializable report");
        content.push('\n');
        Artifact { filename, content }
    }

    pub fn distance_csv(filename: String, values: &[Vec<f64>], residuals: &[f64]) -> Artifact {
        let k = values.len();
        let mut out = String::new();
        out.push_str("row");
        for j in 0..k {
            out.push_str(&format!(",col{j}"));
        }
        out.push_str(",residual\n");
        for i in 0..k {
            out.push_str(&format!("{i}"));
            for j in 0..k {
                out.push_str(&format!(",{}", fmt17(values[i][j])));
            }
            out.push_str(&format!(",{}\n", fmt17(residuals[i])));
        }
        Artifact {
            filename,
            content: out,
        }
    }

    pub fn evolve_csv(filename: String, rows: &[[f64; 4]]) -> Artifact {
        let mut out = String::from("t,entropy,fisher,trace_residual\n");
        for r in rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt17(r[0]),
                fmt17(r[1]),
                fmt17(r[2]),
                fmt17(r[3])
            ));
        }
        Artifact {
            filename,
            content: out,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join(&self.filename), &self.content)
    }
}

/// 17 significant digits (1 before the point + 16 after, scientific).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> std::io::Result<()> {
    Artifact::json(name.to_string(), value).write(dir)
}

pub fn print_validation(report: &ValidationReport) {
    println!("{:<40} {:>14} {:>6}", "axiom", "residual", "pass");
    for c in &report.checks {
        println!(
            "{:<40} {:>14.3e} {:>6}{}",
            c.name,
            c.residual,
            if c.pass { "ok" } else { "FAIL" },
            if c.gating { "" } else { "  (informational)" }
        );
    }
    println!(
        "validated: {}",
        if report.validated { "yes" } else { "NO" }
    );
}

#[derive(Serialize)]
pub struct RicciJson {
    pub lambda_hat: f64,
    pub method: String,
    pub residual: f64,
    pub witness_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<Witness>>,
}

#[derive(Serialize)]
pub struct Witness {
    pub rho: Matrix,
    pub potential: Matrix,
}

#[derive(Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub rho: Matrix,
    pub potential: Matrix,
}

#[derive(Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub version: String,
    pub structure: String,
    pub tasks: usize,
    pub tolerances: Tolerances,
}

#[derive(Serialize)]
pub struct Tolerances {
    pub grid_n: usize,
    pub max_iter: usize,
    pub primal_tol: f64,
    pub constraint_tol: f64,
    pub eps_boundary: f64,
    pub validation: f64,
    pub cluster_rel: f64,
}

impl RunMetadata {
    pub fn new(scenario: &Scenario, version: &str) -> Self {
        RunMetadata {
            seed: scenario.seed,
            version: version.to_string(),
            structure: scenario.structure_id().to_string(),
            tasks: scenario.tasks.len(),
            tolerances: Tolerances {
                grid_n: scenario.solver.grid_n,
                max_iter: scenario.solver.max_iter,
                primal_tol: scenario.solver.primal_tol,
                constraint_tol: scenario.solver.constraint_tol,
                eps_boundary: scenario.solver.eps_boundary,
                validation: qms_core::tol::VALIDATION,
                cluster_rel: qms_core::tol::CLUSTER_REL,
            },
        }
    }
}
