//! Scenario schema: JSON in, validated structure + task list out.
//!
//! Complex matrices are row-major arrays of (re, im) pairs. A scenario
//! declares its structure either by builder name + parameters or fully
//! explicitly (V_j matrices, ω_j, homomorphism kinds, σ).

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qms_core::diffstruct::{builders, DifferentialStructure, Direction, HomKind, Homomorphism};
use qms_core::linalg::{CMatrix, RMatrix, RVector};
use qms_core::matalg::{clifford_parity_matrix, Algebra};
use qms_core::opcalc::MeanFunction;
use qms_core::transport::{SolverOptions, ThetaAssignment};

pub type Matrix = Vec<Vec<[f64; 2]>>;

pub fn to_cmatrix(m: &Matrix) -> Result<CMatrix, String> {
    let n = m.len();
    if n == 0 || m.iter().any(|row| row.len() != n) {
        return Err("matrix must be square and non-empty".into());
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(m[i][j][0], m[i][j][1])
    }))
}

pub fn from_cmatrix(m: &CMatrix) -> Matrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    Depolarizing {
        gamma: f64,
        n: usize,
    },
    MarkovGraph {
        rates: Vec<Vec<f64>>,
        pi: Vec<f64>,
    },
    MarkovLindblad {
        rates: Vec<Vec<f64>>,
        pi: Vec<f64>,
    },
    Hypercube {
        n: usize,
    },
    FermionOu {
        n: usize,
    },
    Lindblad {
        sigma: Matrix,
        jumps: Vec<Matrix>,
    },
    Explicit {
        algebra: AlgebraSpec,
        sigma: Matrix,
        directions: Vec<DirectionSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraSpec {
    Full { n: usize },
    Diagonal { weights: Vec<f64> },
    BlockDiagonal { sizes: Vec<usize> },
    Clifford { n: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    pub v: Matrix,
    pub omega: f64,
    pub ell: HomSpec,
    pub r: HomSpec,
    pub jstar: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum HomSpec {
    Identity,
    Parity,
    Swap(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    /// θ_j(r,s) = Λ(e^{ω_j/2} r, e^{−ω_j/2} s): the entropy gradient-flow
    /// mobility.
    Default,
    Log,
    Power { m: f64, beta: f64 },
    Constant { c: f64 },
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::Default
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_primal_tol")]
    pub primal_tol: f64,
    #[serde(default = "default_constraint_tol")]
    pub constraint_tol: f64,
    #[serde(default = "default_eps_boundary")]
    pub eps_boundary: f64,
    #[serde(default)]
    pub allow_nonconvex: bool,
}

fn default_grid_n() -> usize {
    32
}
fn default_max_iter() -> usize {
    4000
}
fn default_primal_tol() -> f64 {
    qms_core::tol::SOLVER_PRIMAL
}
fn default_constraint_tol() -> f64 {
    qms_core::tol::SOLVER_CONSTRAINT
}
fn default_eps_boundary() -> f64 {
    qms_core::tol::EPS_BOUNDARY
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            grid_n: default_grid_n(),
            max_iter: default_max_iter(),
            primal_tol: default_primal_tol(),
            constraint_tol: default_constraint_tol(),
            eps_boundary: default_eps_boundary(),
            allow_nonconvex: false,
        }
    }
}

impl SolverSpec {
    pub fn to_options(&self, allow_nonconvex_flag: bool) -> SolverOptions {
        SolverOptions {
            grid_n: self.grid_n,
            max_iter: self.max_iter,
            primal_tol: self.primal_tol,
            constraint_tol: self.constraint_tol,
            eps_boundary: self.eps_boundary,
            allow_nonconvex: self.allow_nonconvex || allow_nonconvex_flag,
            refinement_gap: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Validate,
    Distance {
        endpoints: Vec<Matrix>,
    },
    Ricci {
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        include_witnesses: bool,
    },
    Inequalities {
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Evolve {
        rho0: Matrix,
        t_max: f64,
        steps: usize,
    },
    Geodesic {
        rho0: Matrix,
        a0: Matrix,
        t_max: f64,
        steps: usize,
    },
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub structure: StructureSpec,
    #[serde(default)]
    pub theta: ThetaSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSpec,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
}

impl Scenario {
    pub fn structure_id(&self) -> &'static str {
        match self.structure {
            StructureSpec::Depolarizing { .. } => "depolarizing",
            StructureSpec::MarkovGraph { .. } => "markov_graph",
            StructureSpec::MarkovLindblad { .. } => "markov_lindblad",
            StructureSpec::Hypercube { .. } => "hypercube",
            StructureSpec::FermionOu { .. } => "fermion_ou",
            StructureSpec::Lindblad { .. } => "lindblad",
            StructureSpec::Explicit { .. } => "explicit",
        }
    }

    pub fn build(&self) -> Result<DifferentialStructure, qms_core::Error> {
        let rates_of = |rates: &Vec<Vec<f64>>, n: usize| {
            let mut q = RMatrix::zeros(n, n);
            for (i, row) in rates.iter().enumerate().take(n) {
                for (j, &v) in row.iter().enumerate().take(n) {
                    q[(i, j)] = v;
                }
            }
            q
        };
        match &self.structure {
            StructureSpec::Depolarizing { gamma, n } => builders::build_depolarizing(*gamma, *n),
            StructureSpec::MarkovGraph { rates, pi } => {
                builders::build_markov_graph(&rates_of(rates, pi.len()), pi)
            }
            StructureSpec::MarkovLindblad { rates, pi } => {
                builders::build_markov_lindblad(&rates_of(rates, pi.len()), pi)
            }
            StructureSpec::Hypercube { n } => builders::build_hypercube(*n),
            StructureSpec::FermionOu { n } => builders::build_fermion_ou(*n),
            StructureSpec::Lindblad { sigma, jumps } => {
                let sigma = to_cmatrix(sigma).map_err(qms_core::Error::InvalidParameter)?;
                let vs = jumps
                    .iter()
                    .map(|m| to_cmatrix(m).map_err(qms_core::Error::InvalidParameter))
                    .collect::<Result<Vec<_>, _>>()?;
                builders::build_lindblad(&vs, sigma)
            }
            StructureSpec::Explicit {
                algebra,
                sigma,
                directions,
            } => {
                let alg: Arc<Algebra> = match algebra {
                    AlgebraSpec::Full { n } => Algebra::full(*n),
                    AlgebraSpec::Diagonal { weights } => {
                        Algebra::diagonal_weighted(&RVector::from_vec(weights.clone()))
                    }
                    AlgebraSpec::BlockDiagonal { sizes } => Algebra::block_diagonal(sizes),
                    AlgebraSpec::Clifford { n } => Algebra::clifford(*n),
                };
                let sigma = to_cmatrix(sigma).map_err(qms_core::Error::InvalidParameter)?;
                let mk_hom = |spec: &HomSpec| -> Result<Homomorphism, qms_core::Error> {
                    Ok(match spec {
                        HomSpec::Identity => Homomorphism::identity(alg.clone()),
                        HomSpec::Parity => {
                            let n = match alg.kind {
                                qms_core::matalg::AlgebraKind::Clifford(n) => n,
                                _ => {
                                    return Err(qms_core::Error::InvalidParameter(
                                        "parity homomorphism needs a clifford algebra".into(),
                                    ))
                                }
                            };
                            let p = clifford_parity_matrix(n);
                            Homomorphism::from_action(
                                HomKind::Parity,
                                alg.clone(),
                                alg.clone(),
                                move |a| &p * a * &p,
                            )
                        }
                        HomSpec::Swap(j) => {
                            let j = *j;
                            let dim = alg.dim;
                            if 1usize << (usize::BITS - dim.leading_zeros() - 1) != dim {
                                return Err(qms_core::Error::InvalidParameter(
                                    "swap homomorphism needs a hypercube-sized algebra".into(),
                                ));
                            }
                            Homomorphism::from_action(
                                HomKind::CoordSwap(j),
                                alg.clone(),
                                alg.clone(),
                                move |a| {
                                    let mut out = CMatrix::zeros(dim, dim);
                                    for x in 0..dim {
                                        let y = x ^ (1 << j);
                                        out[(x, x)] = a[(y, y)];
                                    }
                                    out
                                },
                            )
                        }
                    })
                };
                let dirs = directions
                    .iter()
                    .map(|d| {
                        Ok(Direction {
                            target: alg.clone(),
                            ell: mk_hom(&d.ell)?,
                            right: mk_hom(&d.r)?,
                            v: to_cmatrix(&d.v).map_err(qms_core::Error::InvalidParameter)?,
                            omega: d.omega,
                            star: d.jstar,
                        })
                    })
                    .collect::<Result<Vec<_>, qms_core::Error>>()?;
                Ok(DifferentialStructure::new(alg, sigma, dirs))
            }
        }
    }

    pub fn theta_assignment(&self, ds: &DifferentialStructure) -> ThetaAssignment {
        match &self.theta {
            ThetaSpec::Default => ThetaAssignment::transport_default(ds),
            ThetaSpec::Log => ThetaAssignment::uniform(ds, MeanFunction::Log),
            ThetaSpec::Power { m, beta } => {
                ThetaAssignment::uniform(ds, MeanFunction::PowerDifference { m: *m, beta: *beta })
            }
            ThetaSpec::Constant { c } => {
                ThetaAssignment::uniform(ds, MeanFunction::Constant(*c))
            }
        }
    }

    /// The normalized form: defaults made explicit, matrices canonicalized.
    /// A scenario echoed by `--dump-normalized` re-parses to an identical
    /// normalized form.
    pub fn normalized(&self) -> Scenario {
        let mut s = self.clone();
        // canonicalize matrices through the parser (row-major, full square)
        if let StructureSpec::Lindblad { sigma, jumps } = &mut s.structure {
            *sigma = from_cmatrix(&to_cmatrix(sigma).expect("validated earlier"));
            for j in jumps.iter_mut() {
                *j = from_cmatrix(&to_cmatrix(j).expect("validated earlier"));
            }
        }
        s
    }

    pub fn density(&self, alg: &Arc<Algebra>, m: &Matrix) -> Result<CMatrix, qms_core::Error> {
        let raw = to_cmatrix(m).map_err(qms_core::Error::InvalidParameter)?;
        let dm = qms_core::matalg::DensityMatrix::new(alg.clone(), raw)?;
        Ok(dm.matrix)
    }
}
