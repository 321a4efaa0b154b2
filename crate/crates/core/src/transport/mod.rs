//! The entropic transport metric.
//!
//! Given a differential structure and per-direction mobilities θ_j, the
//! operator
//!
//!   𝒦_ρ A = −div(ρ̂ # ∇A),    ρ̂_j = θ_j(ℓ_j(ρ), r_j(ρ)),
//!
//! induces a Riemannian metric on the faithful states. This module builds
//! ρ̂/ρ̌, applies 𝒦_ρ, solves the continuity equation, evaluates the kinetic
//! action ‖𝐁‖²_{−1,ρ}, minimizes the Benamou–Brenier functional for the
//! distance 𝒲, integrates geodesics, and computes the dual metric W₁ with
//! the comparison constants M and N.

pub mod solver;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;

use crate::diffstruct::DifferentialStructure;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, RVector};
use crate::opcalc::{
    self, doubsum_from_spectra, spectral_default, MeanFunction, OperatorSum2,
    SpectralDecomposition,
};
use crate::tol;

pub use solver::{distance, DistanceResult, SolverOptions};

// ---------------------------------------------------------------------------
// Mobility assignment
// ---------------------------------------------------------------------------

/// Per-direction mobility functions θ_j.
#[derive(Debug, Clone)]
pub struct ThetaAssignment {
    pub per_direction: Vec<MeanFunction>,
}

impl ThetaAssignment {
    /// The default family θ_j(r,s) = Λ(e^{ω_j/2} r, e^{−ω_j/2} s) under
    /// which the heat flow is the entropy gradient flow.
    pub fn transport_default(ds: &DifferentialStructure) -> Self {
        ThetaAssignment {
            per_direction: ds
                .directions
                .iter()
                .map(|d| MeanFunction::transport_default(d.omega))
                .collect(),
        }
    }

    pub fn uniform(ds: &DifferentialStructure, theta: MeanFunction) -> Self {
        ThetaAssignment {
            per_direction: vec![theta; ds.num_directions()],
        }
    }

    pub fn theta(&self, j: usize) -> &MeanFunction {
        &self.per_direction[j]
    }

    /// All mobilities certified convex (1-homogeneous operator monotone
    /// profile or ρ-independent)?
    pub fn convexity_certified(&self) -> bool {
        self.per_direction.iter().all(|t| t.convexity_certified())
    }

    /// Grid checks of the mobility assumptions: strict positivity on a
    /// sample grid and the symmetry θ_j(r,s) = θ_{j*}(s,r). Returns the
    /// worst symmetry residual.
    pub fn check(&self, ds: &DifferentialStructure) -> Result<f64> {
        if self.per_direction.len() != ds.num_directions() {
            return Err(Error::DimensionMismatch(
                "theta assignment vs direction count".into(),
            ));
        }
        let grid: Vec<f64> = (1..=8).map(|k| k as f64 / 2.0).collect();
        let mut worst = 0.0f64;
        for (j, th) in self.per_direction.iter().enumerate() {
            let star = ds.directions[j].star;
            let th_star = &self.per_direction[star];
            for &r in &grid {
                for &s in &grid {
                    let v = th.eval(r, s);
                    if !(v > 0.0) {
                        return Err(Error::MeanUndefined(r, s));
                    }
                    worst = worst.max((v - th_star.eval(s, r)).abs() / v.abs().max(1.0));
                }
            }
        }
        Ok(worst)
    }

    /// Boundary-extension hypothesis θ(a,b) ≥ C·min(a,b) on a grid;
    /// returns the best constant found.
    pub fn boundary_constant(&self) -> f64 {
        let grid: Vec<f64> = vec![1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0];
        let mut c = f64::INFINITY;
        for th in &self.per_direction {
            for &a in &grid {
                for &b in &grid {
                    let v = th.eval(a, b);
                    c = c.min(v / a.min(b));
                }
            }
        }
        c
    }
}

/// A tangent (velocity or momentum) field: one element of ℬ_j per
/// direction.
#[derive(Debug, Clone)]
pub struct TangentField(pub Vec<CMatrix>);

impl TangentField {
    pub fn zero(ds: &DifferentialStructure) -> Self {
        TangentField(
            ds.directions
                .iter()
                .map(|d| CMatrix::zeros(d.target.dim, d.target.dim))
                .collect(),
        )
    }

    pub fn gradient_of(ds: &DifferentialStructure, a: &CMatrix) -> Result<Self> {
        Ok(TangentField(ds.gradient(a)?))
    }
}

// ---------------------------------------------------------------------------
// rho-hat and the metric operator
// ---------------------------------------------------------------------------

/// Spectral data of (ℓ_j(ρ), r_j(ρ)) for every direction.
pub fn direction_spectra(
    ds: &DifferentialStructure,
    rho: &CMatrix,
) -> Result<Vec<(SpectralDecomposition, SpectralDecomposition)>> {
    ds.directions
        .iter()
        .map(|d| {
            let l = spectral_default(&d.ell.apply(rho))?;
            let r = spectral_default(&d.right.apply(rho))?;
            Ok((l, r))
        })
        .collect()
}

/// ρ̂_j = θ_j(ℓ_j(ρ), r_j(ρ)) as coefficient tables.
pub fn rho_hat(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
) -> Result<Vec<OperatorSum2>> {
    let spectra = direction_spectra(ds, rho)?;
    spectra
        .into_iter()
        .enumerate()
        .map(|(j, (l, r))| doubsum_from_spectra(theta.theta(j), l, r))
        .collect()
}

/// ρ̌_j = (1/θ_j)(ℓ_j(ρ), r_j(ρ)); requires ρ strictly positive.
pub fn rho_check(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
) -> Result<Vec<OperatorSum2>> {
    let spectra = direction_spectra(ds, rho)?;
    spectra
        .into_iter()
        .enumerate()
        .map(|(j, (l, r))| {
            if l.min_value() <= 0.0 || r.min_value() <= 0.0 {
                return Err(Error::SingularReferenceState);
            }
            doubsum_from_spectra(&theta.theta(j).reciprocal(), l, r)
        })
        .collect()
}

/// 𝒦_ρ A = Σ_j ∂_j†(ρ̂_j # ∂_j A).
pub fn metric_operator_apply(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    a: &CMatrix,
) -> Result<CMatrix> {
    let hat = rho_hat(ds, theta, rho)?;
    metric_apply_with(ds, &hat, a)
}

/// 𝒦_ρ with a precomputed ρ̂ table.
pub fn metric_apply_with(
    ds: &DifferentialStructure,
    hat: &[OperatorSum2],
    a: &CMatrix,
) -> Result<CMatrix> {
    let n = ds.algebra.dim;
    let mut out = CMatrix::zeros(n, n);
    for (j, table) in hat.iter().enumerate() {
        let pj = ds.partial(j, a)?;
        out += ds.partial_adjoint_tau(j, &table.contract(&pj))?;
    }
    Ok(out)
}

/// The matrix of 𝒦_ρ over the algebra basis (real symmetric PSD).
pub fn metric_matrix(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
) -> Result<RMatrix> {
    let hat = rho_hat(ds, theta, rho)?;
    let d = ds.algebra.space_dim();
    let mut m = RMatrix::zeros(d, d);
    for b in 0..d {
        let img = metric_apply_with(ds, &hat, &ds.algebra.basis[b])?;
        let coords = ds.algebra.coords_re(&img);
        for a in 0..d {
            m[(a, b)] = coords[a];
        }
    }
    Ok((m.transpose() + &m) * 0.5)
}

/// Solve 𝒦_ρ A = ν for the minimum-norm potential A ∈ 𝒜₀ (pseudo-inverse
/// with a relative rank cutoff). Errors when ν has a component outside
/// Ran(𝒦_ρ) = Ran(div).
pub fn solve_continuity(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    nu: &CMatrix,
) -> Result<CMatrix> {
    ds.require_validated()?;
    let k = metric_matrix(ds, theta, rho)?;
    let kinv = linalg::pinv_sym(&k, tol::PINV_REL);
    let y = ds.algebra.coords_re(nu);
    let x = &kinv * &y;
    let a = ds.algebra.from_coords_re(&x);
    // residual of the projection onto the range
    let back = &k * &x;
    let res = (&back - &y).norm() / y.norm().max(1e-300);
    if res > 1e-7 {
        return Err(Error::SourceNotInRange(res));
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Action functionals
// ---------------------------------------------------------------------------

/// ⟨𝐁, 𝐂⟩_ρ = Σ_j τ_j[B_j^* (ρ̂_j # C_j)].
pub fn pairing_rho(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    b: &TangentField,
    c: &TangentField,
) -> Result<Complex64> {
    let hat = rho_hat(ds, theta, rho)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..ds.num_directions() {
        acc += ds.directions[j]
            .target
            .inner_tau(&b.0[j], &hat[j].contract(&c.0[j]));
    }
    Ok(acc)
}

/// ‖𝐁‖²_ρ.
pub fn norm_rho_sq(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    b: &TangentField,
) -> Result<f64> {
    Ok(pairing_rho(ds, theta, rho, b, b)?.re)
}

/// The kinetic action 𝒜(ρ, 𝐁) = ‖𝐁‖²_{−1,ρ} = Σ_j τ_j[B_j^*(ρ̌_j # B_j)]
/// of a momentum field.
pub fn action(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    b: &TangentField,
) -> Result<f64> {
    let check = rho_check(ds, theta, rho)?;
    let mut acc = 0.0;
    for j in 0..ds.num_directions() {
        acc += ds.directions[j]
            .target
            .inner_tau(&b.0[j], &check[j].contract(&b.0[j]))
            .re;
    }
    Ok(acc)
}

/// Directional derivative ∂_ε|₀ ⟨𝒦_{ρ+εB} A, A⟩ via the tree-indexed
/// derivative of the mobility (both pullback forms summed).
pub fn metric_directional_derivative(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    a: &CMatrix,
    b: &CMatrix,
) -> Result<f64> {
    let spectra = direction_spectra(ds, rho)?;
    let mut acc = 0.0;
    for (j, (l, r)) in spectra.iter().enumerate() {
        let pa = ds.partial(j, a)?;
        let dir = &ds.directions[j];
        let (m1, m2) = opcalc::n_tensor_pullbacks(theta.theta(j), l, r, &pa)?;
        acc += ds
            .algebra
            .tau(&(b * (dir.ell.adjoint_apply(&m1) + dir.right.adjoint_apply(&m2))))
            .re;
    }
    Ok(acc)
}

/// Gradient of the action ρ ↦ 𝒜(ρ, 𝐖) in the ρ coordinates (the hot path
/// of the distance solver); the tree pullback applied to 1/θ.
pub fn action_rho_gradient(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    w: &TangentField,
) -> Result<RVector> {
    let spectra = direction_spectra(ds, rho)?;
    let n = ds.algebra.dim;
    let mut pulled = CMatrix::zeros(n, n);
    for (j, (l, r)) in spectra.iter().enumerate() {
        if l.min_value() <= 0.0 || r.min_value() <= 0.0 {
            return Err(Error::SingularReferenceState);
        }
        let recip = theta.theta(j).reciprocal();
        let dir = &ds.directions[j];
        let (m1, m2) = opcalc::n_tensor_pullbacks(&recip, l, r, &w.0[j])?;
        pulled += dir.ell.adjoint_apply(&m1) + dir.right.adjoint_apply(&m2);
    }
    Ok(ds.algebra.coords_re(&pulled))
}

// ---------------------------------------------------------------------------
// Geodesics
// ---------------------------------------------------------------------------

/// A time-discretized curve (states and potentials).
#[derive(Debug, Clone)]
pub struct Curve {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub potentials: Vec<CMatrix>,
}

/// The potential derivative Φ(ρ, A) of the geodesic equations, computed in
/// the weak form with the N^{(η)} tree tensors for η = 1 and η = 2; the two
/// forms must agree (a runtime consistency check) and their mean is used.
pub fn geodesic_phi(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    a: &CMatrix,
) -> Result<CMatrix> {
    let spectra = direction_spectra(ds, rho)?;
    let n = ds.algebra.dim;
    let mut p1 = CMatrix::zeros(n, n);
    let mut p2 = CMatrix::zeros(n, n);
    for (j, (l, r)) in spectra.iter().enumerate() {
        let pa = ds.partial(j, a)?;
        let dir = &ds.directions[j];
        let (m1, m2) = opcalc::n_tensor_pullbacks(theta.theta(j), l, r, &pa)?;
        p1 += dir.ell.adjoint_apply(&m1);
        p2 += dir.right.adjoint_apply(&m2);
    }
    let c1 = ds.algebra.coords_re(&p1);
    let c2 = ds.algebra.coords_re(&p2);
    let denom = c1.norm().max(c2.norm()).max(1.0);
    if (c1.clone() - &c2).norm() / denom > tol::N_FORMS_AGREE {
        return Err(Error::SolverNonConvergence(format!(
            "N^(1)/N^(2) tree forms disagree: {:.3e}",
            (c1 - &c2).norm() / denom
        )));
    }
    let mean = (c1 + c2) * 0.5;
    Ok(ds.algebra.from_coords_re(&mean))
}

/// Integrate the geodesic equations ∂ρ = 𝒦_ρ A, ∂A = −Φ(ρ, A) by the
/// explicit midpoint rule, with step halving controlled by the drift of the
/// conserved energy ⟨A, 𝒦_ρ A⟩. Aborts if the state approaches the
/// boundary (geodesics may leave the faithful states).
pub fn geodesic_shoot(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho0: &CMatrix,
    a0: &CMatrix,
    t_end: f64,
    steps: usize,
) -> Result<Curve> {
    ds.require_validated()?;
    let mut steps = steps.max(1);
    let scale = linalg::op_norm_hermitian(rho0);
    for _attempt in 0..4 {
        let dt = t_end / steps as f64;
        let mut rho = rho0.clone();
        let mut a = ds.project_a0(a0);
        let mut curve = Curve {
            times: vec![0.0],
            states: vec![rho.clone()],
            potentials: vec![a.clone()],
        };
        let e0 = ds
            .algebra
            .inner_tau(&a, &metric_operator_apply(ds, theta, &rho, &a)?)
            .re;
        let mut ok = true;
        let mut worst_drift = 0.0f64;
        for i in 0..steps {
            if linalg::min_eigenvalue(&rho) < tol::GEODESIC_MIN_EIG * scale {
                return Err(Error::SolverNonConvergence(
                    "geodesic reached the state-space boundary".into(),
                ));
            }
            // midpoint (RK2) step
            let k1_rho = metric_operator_apply(ds, theta, &rho, &a)?;
            let k1_a = geodesic_phi(ds, theta, &rho, &a)?;
            let rho_mid = &rho + k1_rho.scale(dt / 2.0);
            let a_mid = &a - k1_a.scale(dt / 2.0);
            if linalg::min_eigenvalue(&rho_mid) < tol::GEODESIC_MIN_EIG * scale {
                return Err(Error::SolverNonConvergence(
                    "geodesic reached the state-space boundary".into(),
                ));
            }
            let k2_rho = metric_operator_apply(ds, theta, &rho_mid, &a_mid)?;
            let k2_a = geodesic_phi(ds, theta, &rho_mid, &a_mid)?;
            rho += k2_rho.scale(dt);
            a -= k2_a.scale(dt);
            let e = ds
                .algebra
                .inner_tau(&a, &metric_operator_apply(ds, theta, &rho, &a)?)
                .re;
            worst_drift = worst_drift.max((e - e0).abs() / e0.abs().max(1e-12));
            curve.times.push((i + 1) as f64 * dt);
            curve.states.push(rho.clone());
            curve.potentials.push(a.clone());
            if worst_drift > tol::GEODESIC_ENERGY_DRIFT {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(curve);
        }
        steps *= 2;
    }
    Err(Error::SolverNonConvergence(
        "geodesic energy drift did not settle under step refinement".into(),
    ))
}

// ---------------------------------------------------------------------------
// W1 and comparison constants
// ---------------------------------------------------------------------------

/// ‖𝐁‖_{ℬ,2} = sqrt(½ Σ_j ‖ℓ_j†(B_j B_j*) + r_j†(B_j* B_j)‖_op).
pub fn tangent_sup_norm(ds: &DifferentialStructure, b: &TangentField) -> f64 {
    let mut acc = 0.0;
    for (j, bj) in b.0.iter().enumerate() {
        let d = &ds.directions[j];
        let m =
            d.ell.adjoint_apply(&(bj * bj.adjoint())) + d.right.adjoint_apply(&(bj.adjoint() * bj));
        acc += linalg::op_norm_hermitian(&m);
    }
    (acc / 2.0).sqrt()
}

/// ‖∇A‖_{ℬ,2}.
pub fn grad_sup_norm(ds: &DifferentialStructure, a: &CMatrix) -> Result<f64> {
    Ok(tangent_sup_norm(ds, &TangentField(ds.gradient(a)?)))
}

#[derive(Debug, Clone)]
pub struct W1Result {
    pub value: f64,
    /// τ[(ρ₁−ρ₀) Ā] for the normalized spectral-sign candidate; a certified
    /// lower bound tying W₁ to the total-variation sandwich.
    pub sign_candidate_value: f64,
}

/// The dual-formulation metric W₁(ρ₀, ρ₁) = sup { τ[(ρ₁−ρ₀)A] :
/// ‖∇A‖_{ℬ,2} ≤ 1 }. Maximized by gradient ascent with radial retraction
/// onto the seminorm ball from several starts (the spectral sign of ρ₁−ρ₀
/// among them); the result is feasible, hence a certified lower bound of
/// the supremum.
pub fn w1(ds: &DifferentialStructure, rho0: &CMatrix, rho1: &CMatrix) -> Result<W1Result> {
    ds.require_validated()?;
    let cdiff = rho1 - rho0;
    let cnorm = cdiff.norm();
    if cnorm < 1e-14 {
        return Ok(W1Result {
            value: 0.0,
            sign_candidate_value: 0.0,
        });
    }
    let objective = |a: &CMatrix| ds.algebra.tau(&(&cdiff * a)).re;
    let feasible = |a: &CMatrix| -> Result<Option<CMatrix>> {
        let g = grad_sup_norm(ds, a)?;
        if g < 1e-13 {
            return Ok(None);
        }
        Ok(Some(a.scale(1.0 / g)))
    };
    let mut best = 0.0f64;
    let mut sign_value = 0.0f64;
    // spectral-sign candidate
    let sign = linalg::matrix_function(&cdiff, |v| if v >= 0.0 { 1.0 } else { -1.0 });
    let sign = ds.algebra.project(&sign);
    let mut starts = vec![ds.project_a0(&cdiff), ds.project_a0(&sign)];
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x3117);
    for _ in 0..3 {
        starts.push(ds.project_a0(&ds.algebra.random_hermitian(&mut rng)));
    }
    let ascent_dir = ds.project_a0(&cdiff);
    for (si, start) in starts.iter().enumerate() {
        let Some(mut a) = feasible(start)? else {
            continue;
        };
        if si == 1 {
            sign_value = objective(&a);
        }
        best = best.max(objective(&a));
        let mut step = 0.5;
        for _ in 0..400 {
            let cand = &a + ascent_dir.scale(step / cnorm);
            if let Some(candn) = feasible(&cand)? {
                if objective(&candn) > objective(&a) + 1e-16 {
                    a = candn;
                    best = best.max(objective(&a));
                    continue;
                }
            }
            step *= 0.5;
            if step < 1e-10 {
                break;
            }
        }
    }
    Ok(W1Result {
        value: best,
        sign_candidate_value: sign_value,
    })
}

/// The comparison constants of the sandwich N⁻¹ τ|ρ₀−ρ₁| ≤ W₁ ≤ M 𝒲.
#[derive(Debug, Clone)]
pub struct ComparisonConstants {
    /// Sampled sup of ‖𝐁‖_ρ / ‖𝐁‖_{ℬ,2}.
    pub m: f64,
    /// Exactly 1 when θ_j(r,s) ≤ (r+s)/2 holds on the sample grid.
    pub m_is_one: bool,
    /// Sampled sup of ‖∇A‖_{ℬ,2} over ‖A‖ ≤ 1 with local refinement.
    pub n: f64,
}

pub fn comparison_constants<R: Rng>(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    samples: usize,
    rng: &mut R,
) -> Result<ComparisonConstants> {
    ds.require_validated()?;
    if ds.num_directions() == 0 {
        return Err(Error::InvalidParameter("empty direction set".into()));
    }
    // arithmetic-mean domination on a grid => M = 1
    let grid: Vec<f64> = vec![1e-4, 1e-2, 0.1, 0.3, 1.0, 2.0, 5.0, 20.0];
    let mut m_is_one = true;
    'outer: for th in &theta.per_direction {
        for &r in &grid {
            for &s in &grid {
                if th.eval(r, s) > 0.5 * (r + s) + 1e-12 * (r + s) {
                    m_is_one = false;
                    break 'outer;
                }
            }
        }
    }
    let mut m = 0.0f64;
    for _ in 0..samples {
        let rho = ds.algebra.random_state(rng, 1e-4);
        let b = TangentField(
            ds.directions
                .iter()
                .map(|d| {
                    let re = d.target.random_hermitian(rng);
                    let im = d.target.random_hermitian(rng);
                    re + im.map(|z| z * linalg::ci(1.0))
                })
                .collect(),
        );
        let num = norm_rho_sq(ds, theta, &rho, &b)?.sqrt();
        let den = tangent_sup_norm(ds, &b);
        if den > 1e-13 {
            m = m.max(num / den);
        }
    }
    if m_is_one {
        m = 1.0;
    }
    // N: sup over unit-op-norm A; spectral signs are extreme points of the
    // ball, so include them, then locally refine the best candidate
    let mut n = 0.0f64;
    let mut best = ds.algebra.one();
    for k in 0..samples {
        let h = ds.algebra.random_hermitian(rng);
        let cand = if k % 2 == 0 {
            linalg::matrix_function(&h, |v| if v >= 0.0 { 1.0 } else { -1.0 })
        } else {
            h.clone()
        };
        let cand = ds.algebra.project(&cand);
        let opn = linalg::op_norm_hermitian(&cand).max(1e-300);
        let cand = cand.scale(1.0 / opn);
        let g = grad_sup_norm(ds, &cand)?;
        if g > n {
            n = g;
            best = cand;
        }
    }
    let mut step = 0.3;
    for _ in 0..200 {
        let pert = ds.algebra.random_hermitian(rng);
        let cand = &best + pert.scale(step);
        let cand = cand.scale(1.0 / linalg::op_norm_hermitian(&cand).max(1e-300));
        let g = grad_sup_norm(ds, &cand)?;
        if g > n {
            n = g;
            best = cand;
        } else {
            step *= 0.95;
        }
    }
    Ok(ComparisonConstants { m, m_is_one, n })
}

/// Side-by-side distance tables for two structures sharing a generator,
/// exposing (without asserting anything) whether different divergence-form
/// representations of the same ℒ induce the same metric.
pub fn distance_table_comparison(
    ds1: &DifferentialStructure,
    theta1: &ThetaAssignment,
    ds2: &DifferentialStructure,
    theta2: &ThetaAssignment,
    endpoints: &[CMatrix],
    opts: &SolverOptions,
) -> Result<(RMatrix, RMatrix)> {
    let k = endpoints.len();
    let mut t1 = RMatrix::zeros(k, k);
    let mut t2 = RMatrix::zeros(k, k);
    for i in 0..k {
        for l in (i + 1)..k {
            t1[(i, l)] = distance(ds1, theta1, &endpoints[i], &endpoints[l], opts)?.value;
            t1[(l, i)] = t1[(i, l)];
            t2[(i, l)] = distance(ds2, theta2, &endpoints[i], &endpoints[l], opts)?.value;
            t2[(l, i)] = t2[(i, l)];
        }
    }
    Ok((t1, t2))
}
