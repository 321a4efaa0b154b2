//! Centralized numerical tolerances.
//!
//! Every threshold used by the library is named here; modules never carry
//! ad-hoc magic numbers. Relative tolerances are understood against the
//! natural scale of the quantity (norm of the input, trace scale, ...).

/// Eigenvalues within `CLUSTER_REL * norm(A)` are merged into one spectral
/// projector. This governs all confluent limits of discrete derivatives
/// downstream; double operator sums are discontinuous without clustering.
pub const CLUSTER_REL: f64 = 1e-9;

/// Inputs declared Hermitian are symmetrized when the asymmetry is below
/// `HERMITIZE_REL * norm(A)` and rejected above.
pub const HERMITIZE_REL: f64 = 1e-12;

/// Minimum admitted eigenvalue of a reference state, relative to its trace
/// scale. Below this, sigma powers are refused rather than computed through
/// a near-singular eigenbasis.
pub const SIGMA_MIN_EIG_REL: f64 = 1e-12;

/// Algebra membership: residual of the projection onto the block structure.
pub const MEMBERSHIP: f64 = 1e-10;

/// Per-axiom residual below which a differential-structure axiom passes.
pub const VALIDATION: f64 = 1e-9;

/// Self-adjointness residuals of the generator in the s-family inner
/// products.
pub const DETAILED_BALANCE: f64 = 1e-9;

/// Dirichlet positivity: sampled E(X_+, X_-) must not exceed this.
pub const DIRICHLET_POSITIVITY: f64 = 1e-10;

/// Numerical rank cutoff for kernel/range computations, relative to the
/// largest eigenvalue magnitude.
pub const RANK_REL: f64 = 1e-9;

/// Pseudo-inverse rank cutoff relative to the operator norm, used by the
/// continuity-equation solve.
pub const PINV_REL: f64 = 1e-11;

/// Stationarity residual at which the distance solver stops.
pub const SOLVER_PRIMAL: f64 = 1e-7;

/// Continuity-constraint residual the distance solver maintains.
pub const SOLVER_CONSTRAINT: f64 = 1e-8;

/// Default boundary regularization: rho_eps = (1-eps) rho + eps sigma.
pub const EPS_BOUNDARY: f64 = 1e-6;

/// Relative eigenvalue gap below which mean functions switch from the
/// closed form to the near-diagonal series expansion.
pub const MEAN_SERIES_SWITCH: f64 = 1e-4;

/// Residual under which an intertwining relation counts as exact and is
/// reported as a curvature certificate.
pub const INTERTWINING: f64 = 1e-9;

/// Geodesic integrator: admissible drift of the conserved energy.
pub const GEODESIC_ENERGY_DRIFT: f64 = 1e-5;

/// Geodesic integrator aborts when min eig(rho) falls below this times the
/// trace scale (curves may hit the boundary of the state space).
pub const GEODESIC_MIN_EIG: f64 = 1e-10;

/// Agreement required between the two tree-indexed forms of the geodesic
/// potential derivative.
pub const N_FORMS_AGREE: f64 = 1e-9;
