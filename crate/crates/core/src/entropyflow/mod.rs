//! Entropy functionals, Fisher information, the entropy Hessian, and Ricci
//! lower bounds.
//!
//! The relative entropy Ent_σ(ρ) = τ[ρ(log ρ − log σ)] is the driving
//! functional of the transport gradient flow: with the default mobilities,
//! ℒ†ρ = −𝒦_ρ(log ρ − log σ). Its Hessian along geodesics,
//!
//!   Hess[A,A] = −τ[(∇ℒA)* ρ̂ # ∇A] + τ[(∇A)* 𝒩^{(η)}_{ρ,ℒ†ρ} # ∇A] ,
//!
//! yields Ricci lower bounds: by exact minimization of the Rayleigh
//! quotient over potentials and a sampled search over states
//! ([`ricci_scan`]), or by the intertwining relation ∂_j ℒ = (ℒ − λ)∂_j
//! which certifies Ric ≥ λ without any Hessian computation
//! ([`intertwining_lambda`]).

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::diffstruct::DifferentialStructure;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, RMatrix, RVector};
use crate::matalg::Algebra;
use crate::opcalc::{self, MeanFunction};
use crate::tol;
use crate::transport::{
    self, direction_spectra, metric_matrix, metric_operator_apply, rho_hat, DistanceResult,
    SolverOptions, ThetaAssignment,
};

// ---------------------------------------------------------------------------
// Entropy and Fisher information
// ---------------------------------------------------------------------------

/// Ent_σ(ρ) = τ[ρ(log ρ − log σ)], with the 0·log 0 = 0 convention on the
/// boundary.
pub fn entropy(alg: &Algebra, sigma: &CMatrix, rho: &CMatrix) -> Result<f64> {
    let rho_log_rho = linalg::matrix_function(rho, |v| if v > 0.0 { v * v.ln() } else { 0.0 });
    let log_sigma = linalg::matrix_log_psd(sigma)?;
    Ok(alg.tau(&(rho_log_rho - rho * log_sigma)).re)
}

/// log ρ − log σ, the differential of the relative entropy.
pub fn entropy_differential(sigma: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
    Ok(linalg::matrix_log_psd(rho)? - linalg::matrix_log_psd(sigma)?)
}

/// Fisher information computed two ways: the trace form
/// −τ[(log ρ − log σ) ℒ†ρ] and the metric form ‖∇(log ρ − log σ)‖²_ρ.
/// They agree by the gradient-flow identity.
pub fn fisher(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
) -> Result<(f64, f64)> {
    ds.require_validated()?;
    let d = entropy_differential(&ds.sigma, rho)?;
    let trace_form = -ds.algebra.tau(&(&d * ds.apply_adjoint_generator(rho))).re;
    let grad = transport::TangentField(ds.gradient(&d)?);
    let metric_form = transport::norm_rho_sq(ds, theta, rho, &grad)?;
    Ok((trace_form, metric_form))
}

/// ‖ℒ†ρ + 𝒦_ρ(log ρ − log σ)‖_{L²(τ)}: the gradient-flow identity
/// residual (zero for validated structures with the default mobilities).
pub fn gradient_flow_residual(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
) -> Result<f64> {
    ds.require_validated()?;
    let d = entropy_differential(&ds.sigma, rho)?;
    let lhs = ds.apply_adjoint_generator(rho) + metric_operator_apply(ds, theta, rho, &d)?;
    Ok(ds.algebra.norm_tau(&lhs))
}

/// Per-direction residual of the chain rule for the logarithm,
/// e^{−ω_j/2} V_j r_j(ρ) − e^{ω_j/2} ℓ_j(ρ) V_j = ρ̂_j # ∂_j(log ρ − log σ).
pub fn chain_rule_log_residual(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
) -> Result<f64> {
    ds.require_validated()?;
    let d = entropy_differential(&ds.sigma, rho)?;
    let hat = rho_hat(ds, theta, rho)?;
    let mut worst = 0.0f64;
    for (j, dir) in ds.directions.iter().enumerate() {
        let lhs = (&dir.v * dir.right.apply(rho)).scale((-dir.omega / 2.0).exp())
            - (dir.ell.apply(rho) * &dir.v).scale((dir.omega / 2.0).exp());
        let rhs = hat[j].contract(&ds.partial(j, &d)?);
        worst = worst.max((lhs.clone() - &rhs).norm() / lhs.norm().max(1.0));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// General entropy pairs (f, φ)
// ---------------------------------------------------------------------------

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A pair (f, φ) with f strictly convex C² and φ strictly increasing C¹
/// (or the sign-flipped pair), defining the functional ℱ(ρ) = τ[f(ρ)] and
/// the nonlinear flow ∂_t ρ = ℒφ(ρ) on tracial structures.
#[derive(Clone)]
pub struct GeneralEntropy {
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub ddf: ScalarFn,
    pub phi: ScalarFn,
    pub dphi: ScalarFn,
}

impl GeneralEntropy {
    /// f = x log x, φ = x: the von Neumann entropy flow (heat flow).
    pub fn von_neumann() -> Self {
        GeneralEntropy {
            f: Arc::new(|x| x * x.ln()),
            df: Arc::new(|x| x.ln() + 1.0),
            ddf: Arc::new(|x| 1.0 / x),
            phi: Arc::new(|x| x),
            dphi: Arc::new(|_| 1.0),
        }
    }

    /// f = x²/2, φ = x: θ ≡ 1 and 𝒦_ρ = −ℒ for every ρ.
    pub fn quadratic() -> Self {
        GeneralEntropy {
            f: Arc::new(|x| x * x / 2.0),
            df: Arc::new(|x| x),
            ddf: Arc::new(|_| 1.0),
            phi: Arc::new(|x| x),
            dphi: Arc::new(|_| 1.0),
        }
    }

    /// f = x^m/(m−1), φ = x^m: the porous-medium pair (power-difference
    /// mobility θ_m).
    pub fn porous_medium(m: f64) -> Self {
        assert!(m > 1.0, "porous-medium exponent m > 1");
        GeneralEntropy {
            f: Arc::new(move |x| x.powf(m) / (m - 1.0)),
            df: Arc::new(move |x| m / (m - 1.0) * x.powf(m - 1.0)),
            ddf: Arc::new(move |x| m * x.powf(m - 2.0)),
            phi: Arc::new(move |x| x.powf(m)),
            dphi: Arc::new(move |x| m * x.powf(m - 1.0)),
        }
    }

    /// The induced mobility θ(λ,μ) = (φ(λ)−φ(μ))/(f'(λ)−f'(μ)), with the
    /// confluent value φ'(λ)/f''(λ).
    pub fn theta(&self) -> MeanFunction {
        let phi = self.phi.clone();
        let df = self.df.clone();
        let dphi = self.dphi.clone();
        let ddf = self.ddf.clone();
        MeanFunction::Custom {
            theta: Arc::new(move |r: f64, s: f64| {
                if (r - s).abs() <= tol::CLUSTER_REL * r.abs().max(s.abs()).max(1e-300) {
                    let m = 0.5 * (r + s);
                    dphi(m) / ddf(m)
                } else {
                    (phi(r) - phi(s)) / (df(r) - df(s))
                }
            }),
            d1: None,
            d2: None,
            d11: None,
            d22: None,
        }
    }

    /// Strict positivity of θ on a sample grid (the admissibility condition
    /// for a Riemannian metric).
    pub fn check_admissible(&self) -> Result<f64> {
        let th = self.theta();
        let grid: Vec<f64> = vec![0.05, 0.2, 0.5, 1.0, 1.5, 2.5, 4.0];
        let mut min = f64::INFINITY;
        for &r in &grid {
            for &s in &grid {
                let v = th.eval(r, s);
                if !(v > 0.0) {
                    return Err(Error::MeanUndefined(r, s));
                }
                min = min.min(v);
            }
        }
        Ok(min)
    }
}

/// ‖ℒφ(ρ) + 𝒦_ρ f'(ρ)‖ for a tracial structure (σ = 1, all ω_j = 0):
/// the nonlinear gradient-flow identity residual. Also verifies
/// ℒφ(ρ) = ℒ†φ(ρ).
pub fn general_flow_residual(
    ds: &DifferentialStructure,
    pair: &GeneralEntropy,
    rho: &CMatrix,
) -> Result<f64> {
    ds.require_validated()?;
    let tracial = (ds.sigma.clone() - ds.algebra.one()).norm() < 1e-12
        && ds.directions.iter().all(|d| d.omega == 0.0);
    if !tracial {
        return Err(Error::InvalidParameter(
            "general entropy flows require sigma = 1 and all omega = 0".into(),
        ));
    }
    pair.check_admissible()?;
    let theta = ThetaAssignment::uniform(ds, pair.theta());
    let phi_rho = linalg::matrix_function(rho, |v| (pair.phi)(v));
    let df_rho = linalg::matrix_function(rho, |v| (pair.df)(v));
    let l_phi = ds.apply_generator(&phi_rho)?;
    let l_dag_phi = ds.apply_adjoint_generator(&phi_rho);
    let self_adj = (l_phi.clone() - &l_dag_phi).norm() / l_phi.norm().max(1.0);
    let res = (&l_phi + metric_operator_apply(ds, &theta, rho, &df_rho)?).norm();
    Ok(res.max(self_adj * l_phi.norm()))
}

// ---------------------------------------------------------------------------
// Entropy Hessian
// ---------------------------------------------------------------------------

/// Hess Ent_σ(ρ)[A,A] with the 𝒩 tensors assembled from spectral triple
/// sums. Both tree forms (η = 1, 2) are evaluated; they must agree to
/// 1e-8 and their mean is returned.
pub fn hessian_entropy(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    a: &CMatrix,
) -> Result<f64> {
    ds.require_validated()?;
    let la = ds.apply_generator(a)?;
    let b = ds.apply_adjoint_generator(rho);
    let hat = rho_hat(ds, theta, rho)?;
    let spectra = direction_spectra(ds, rho)?;
    let mut term1 = 0.0;
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for (j, dir) in ds.directions.iter().enumerate() {
        let pa = ds.partial(j, a)?;
        let pla = ds.partial(j, &la)?;
        term1 -= dir.target.inner_tau(&pla, &hat[j].contract(&pa)).re;
        let (l, r) = &spectra[j];
        let t1 = opcalc::tree_contract_first(theta.theta(j), l, r, &dir.ell.apply(&b), &pa)?;
        n1 += dir.target.inner_tau(&pa, &t1).re;
        let t2 = opcalc::tree_contract_second(theta.theta(j), l, r, &dir.right.apply(&b), &pa)?;
        n2 += dir.target.inner_tau(&pa, &t2).re;
    }
    let scale = term1.abs().max(n1.abs()).max(1.0);
    if (n1 - n2).abs() > 1e-8 * scale {
        return Err(Error::SolverNonConvergence(format!(
            "Hessian tree forms disagree: {:.3e}",
            (n1 - n2).abs() / scale
        )));
    }
    Ok(term1 + 0.5 * (n1 + n2))
}

/// The Hessian as a bilinear form over the given coordinate basis of 𝒜₀.
/// Returned raw (unsymmetrized); its asymmetry is a numerical residual that
/// callers may verify, and eigenproblems symmetrize it explicitly.
pub fn hessian_matrix(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
    basis: &[RVector],
) -> Result<RMatrix> {
    ds.require_validated()?;
    let b = ds.apply_adjoint_generator(rho);
    let hat = rho_hat(ds, theta, rho)?;
    let spectra = direction_spectra(ds, rho)?;
    let k = basis.len();
    let elems: Vec<CMatrix> = basis.iter().map(|x| ds.algebra.from_coords_re(x)).collect();
    let mut h = RMatrix::zeros(k, k);
    for (j, dir) in ds.directions.iter().enumerate() {
        let (l, r) = &spectra[j];
        let pas: Vec<CMatrix> = elems
            .iter()
            .map(|e| ds.partial(j, e))
            .collect::<Result<_>>()?;
        let plas: Vec<CMatrix> = elems
            .iter()
            .map(|e| ds.partial(j, &ds.apply_generator(e)?))
            .collect::<Result<_>>()?;
        for q in 0..k {
            let hat_paq = hat[j].contract(&pas[q]);
            let n1 = opcalc::tree_contract_first(theta.theta(j), l, r, &dir.ell.apply(&b), &pas[q])?;
            let n2 =
                opcalc::tree_contract_second(theta.theta(j), l, r, &dir.right.apply(&b), &pas[q])?;
            let nmean = (n1 + n2).scale(0.5);
            for p in 0..k {
                h[(p, q)] += -dir.target.inner_tau(&plas[p], &hat_paq).re
                    + dir.target.inner_tau(&pas[p], &nmean).re;
            }
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Ricci estimates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RicciMethod {
    /// Sampled Rayleigh-quotient minimization: an estimate (upper bound of
    /// the true constant from above by construction, reported as the
    /// numeric estimate when stable under refinement).
    RayleighScan,
    /// Exact intertwining relation: a certificate of Ric ≥ λ.
    Intertwining,
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciEstimate {
    pub lambda_hat: f64,
    pub method: RicciMethod,
    /// For the scan: change of the minimum during local refinement. For
    /// intertwining: the commutation residual.
    pub residual: f64,
    pub witness_count: usize,
    /// Witness states and potentials near the minimum (coordinates are
    /// kept as matrices; serialized downstream on demand).
    #[serde(skip)]
    pub witnesses: Vec<(CMatrix, CMatrix)>,
}

/// Minimum of the Rayleigh quotient Hess[A,A] / ⟨A, 𝒦_ρ A⟩ over A ∈ 𝒜₀
/// at fixed ρ (exact generalized symmetric eigenproblem), together with the
/// minimizing potential.
pub fn rayleigh_min(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    rho: &CMatrix,
) -> Result<(f64, CMatrix)> {
    let basis = ds.a0_coords().clone();
    let h = hessian_matrix(ds, theta, rho, &basis)?;
    let h = (h.transpose() + &h) * 0.5;
    let kfull = metric_matrix(ds, theta, rho)?;
    let k = basis.len();
    let mut kred = RMatrix::zeros(k, k);
    for p in 0..k {
        let col = &kfull * &basis[p];
        for q in 0..k {
            kred[(q, p)] = basis[q].dot(&col);
        }
    }
    let (ks, ksi) = linalg::sqrt_invsqrt_spd(&kred)?;
    let _ = ks;
    let s = &ksi * &h * &ksi;
    let s = (&s + s.transpose()) * 0.5;
    let (vals, vecs) = linalg::sym_eigen(&s);
    let y = vecs.column(0);
    let x = &ksi * y;
    let mut coords = RVector::zeros(ds.algebra.space_dim());
    for (p, base) in basis.iter().enumerate() {
        coords += base.scale(x[p]);
    }
    Ok((vals[0], ds.algebra.from_coords_re(&coords)))
}

/// Sampled minimization of the entropy-Hessian Rayleigh quotient: exact in
/// the potential per state, heuristic over states (Dirichlet spectra with
/// Haar rotations, σ itself, boundary-biased samples, and Nelder-Mead
/// refinement from the best candidates). The result is an upper bound on
/// the true Ricci constant, reported as the estimate when refinement is
/// stable.
pub fn ricci_scan<R: Rng>(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    samples: usize,
    refine: bool,
    rng: &mut R,
) -> Result<RicciEstimate> {
    ds.require_validated()?;
    if !ds.is_ergodic() {
        return Err(Error::RequiresErgodicity);
    }
    let n = ds.algebra.dim;
    let mut candidates: Vec<(f64, CMatrix, CMatrix)> = Vec::new();
    let push = |lam: f64, rho: CMatrix, a: CMatrix, out: &mut Vec<(f64, CMatrix, CMatrix)>| {
        out.push((lam, rho, a));
        out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        out.truncate(5);
    };
    // sigma itself
    let (lam, a) = rayleigh_min(ds, theta, &ds.sigma)?;
    push(lam, ds.sigma.clone(), a, &mut candidates);
    for k in 0..samples {
        let rho = if k % 4 == 3 {
            // boundary-biased: one eigenvalue pinned near zero
            let mut spec = linalg::dirichlet_uniform(rng, n);
            spec[0] = 1e-6;
            let z: f64 = spec.iter().sum();
            for v in &mut spec {
                *v /= z;
            }
            let u = linalg::haar_unitary(rng, n);
            let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                n,
                spec.iter().map(|&p| linalg::c(p)),
            ));
            let raw = ds.algebra.project(&(&u * d * u.adjoint()));
            let raw = (&raw + raw.adjoint()).scale(0.5);
            let fixed = linalg::matrix_function(&raw, |v| v.max(1e-8));
            let t = ds.algebra.tau(&fixed).re;
            ds.algebra.project(&fixed.scale(1.0 / t))
        } else {
            ds.algebra.random_state(rng, 1e-7)
        };
        if let Ok((lam, a)) = rayleigh_min(ds, theta, &rho) {
            push(lam, rho, a, &mut candidates);
        }
    }
    let sampled_min = candidates[0].0;
    let mut best = candidates.clone();
    if refine {
        // Nelder-Mead over the chart rho(x) = exp(H(x)) / tau[exp(H(x))],
        // x the traceless Hermitian coordinates
        let d = ds.algebra.space_dim();
        let chart = |x: &RVector| -> CMatrix {
            let mut full = RVector::zeros(d);
            for i in 1..d {
                full[i] = x[i - 1];
            }
            let h = ds.algebra.from_coords_re(&full);
            let e = opcalc::exp_hermitian(&h);
            let t = ds.algebra.tau(&e).re;
            e.scale(1.0 / t)
        };
        let eval = |x: &RVector| -> f64 {
            match rayleigh_min(ds, theta, &chart(x)) {
                Ok((lam, _)) => lam,
                Err(_) => f64::INFINITY,
            }
        };
        for cand in candidates.iter().take(5) {
            // chart coordinates of the candidate state
            let logr = match linalg::matrix_log_psd(&cand.1) {
                Ok(l) => l,
                Err(_) => continue,
            };
            let coords = ds.algebra.coords_re(&logr);
            let x0 = RVector::from_iterator(d - 1, (1..d).map(|i| coords[i]));
            let (lam, x) = nelder_mead(&eval, &x0, 0.25, 120);
            if lam < best[0].0 {
                let rho = chart(&x);
                if let Ok((lam2, a)) = rayleigh_min(ds, theta, &rho) {
                    best.insert(0, (lam2.min(lam), rho, a));
                }
            }
        }
        best.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        best.truncate(5);
    }
    let lambda_hat = best[0].0;
    Ok(RicciEstimate {
        lambda_hat,
        method: RicciMethod::RayleighScan,
        residual: (sampled_min - lambda_hat).abs(),
        witness_count: best.len(),
        witnesses: best.into_iter().map(|(_, r, a)| (r, a)).collect(),
    })
}

/// Standard Nelder-Mead simplex minimization.
fn nelder_mead(
    f: &dyn Fn(&RVector) -> f64,
    x0: &RVector,
    scale: f64,
    iters: usize,
) -> (f64, RVector) {
    let n = x0.len();
    let mut simplex: Vec<(f64, RVector)> = Vec::with_capacity(n + 1);
    simplex.push((f(x0), x0.clone()));
    for i in 0..n {
        let mut x = x0.clone();
        x[i] += scale;
        simplex.push((f(&x), x));
    }
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let centroid: RVector = {
            let mut c = RVector::zeros(n);
            for s in simplex.iter().take(n) {
                c += &s.1;
            }
            c / n as f64
        };
        let worst = simplex[n].clone();
        let refl = &centroid + (&centroid - &worst.1);
        let frefl = f(&refl);
        if frefl < simplex[0].0 {
            let exp = &centroid + (&refl - &centroid) * 2.0;
            let fexp = f(&exp);
            simplex[n] = if fexp < frefl { (fexp, exp) } else { (frefl, refl) };
        } else if frefl < simplex[n - 1].0 {
            simplex[n] = (frefl, refl);
        } else {
            let contr = &centroid + (&worst.1 - &centroid) * 0.5;
            let fcontr = f(&contr);
            if fcontr < worst.0 {
                simplex[n] = (fcontr, contr);
            } else {
                let best = simplex[0].1.clone();
                for s in simplex.iter_mut().skip(1) {
                    s.1 = (&s.1 + &best) * 0.5;
                    s.0 = f(&s.1);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    simplex.swap_remove(0)
}

/// The preferred Ricci estimate: the intertwining certificate when an
/// exact relation with strictly positive constant exists, the Rayleigh
/// scan estimate otherwise (a zero certificate is valid but uninformative
/// next to a scan).
pub fn ricci_estimate<R: Rng>(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    samples: usize,
    rng: &mut R,
) -> Result<RicciEstimate> {
    if let Some((lambda, residual)) = intertwining_lambda(ds)? {
        if lambda > tol::INTERTWINING {
            return Ok(RicciEstimate {
                lambda_hat: lambda,
                method: RicciMethod::Intertwining,
                residual,
                witness_count: 0,
                witnesses: vec![],
            });
        }
    }
    ricci_scan(ds, theta, samples, true, rng)
}

/// Least-squares solve of the intertwining relation ∂_j ℒ = (ℒ − λ) ∂_j
/// over all directions. Returns (λ, max residual) when the relation holds
/// to `tol::INTERTWINING` — a certificate of Ric ≥ λ — and None when no
/// exact intertwining exists or the direction algebras do not carry the
/// generator.
pub fn intertwining_lambda(ds: &DifferentialStructure) -> Result<Option<(f64, f64)>> {
    ds.require_validated()?;
    // the relation needs L to act on each B_j: require matching realization
    for d in &ds.directions {
        if d.target.kind != ds.algebra.kind {
            return Ok(None);
        }
    }
    let l = ds.generator().mat.map(linalg::c);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut comms = Vec::new();
    for j in 0..ds.num_directions() {
        let dj = ds.partial_matrix(j)?;
        let comm = &dj * &l - &l * &dj;
        // [∂_j, L] = -λ ∂_j in least squares over all directions
        num += -(comm
            .iter()
            .zip(dj.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>());
        den += dj.norm_squared();
        comms.push((comm, dj));
    }
    if den < 1e-300 {
        return Ok(None);
    }
    let lambda = num / den;
    let mut worst = 0.0f64;
    for (comm, dj) in &comms {
        let res = (comm + dj.scale(lambda)).norm() / dj.norm().max(1e-300);
        worst = worst.max(res);
    }
    if worst < tol::INTERTWINING {
        Ok(Some((lambda, worst)))
    } else {
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// Gradient estimate and contraction
// ---------------------------------------------------------------------------

/// Pointwise report of the Bakry-Émery gradient estimate
/// ‖∇𝒫_t A‖²_ρ ≤ e^{−2λt} ‖∇A‖²_{𝒫_t†ρ} along a time grid.
pub fn gradient_estimate_check(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    lambda: f64,
    rho: &CMatrix,
    a: &CMatrix,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    ds.require_validated()?;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let pta = ds.semigroup_apply(t, a)?;
        let ptrho = ds.semigroup_apply_dual(t, rho)?;
        let lhs = transport::norm_rho_sq(
            ds,
            theta,
            rho,
            &transport::TangentField(ds.gradient(&pta)?),
        )?;
        let rhs = (-2.0 * lambda * t).exp()
            * transport::norm_rho_sq(
                ds,
                theta,
                &ptrho,
                &transport::TangentField(ds.gradient(a)?),
            )?;
        rows.push((t, lhs, rhs));
    }
    Ok(rows)
}

/// (𝒲(𝒫_t†ρ₀, 𝒫_t†ρ₁), e^{−λt} 𝒲(ρ₀, ρ₁)): both sides of the
/// λ-contractivity bound, computed by the transport solver.
pub fn contraction_check(
    ds: &DifferentialStructure,
    theta: &ThetaAssignment,
    lambda: f64,
    rho0: &CMatrix,
    rho1: &CMatrix,
    t: f64,
    opts: &SolverOptions,
) -> Result<(DistanceResult, f64, DistanceResult)> {
    let base = transport::distance(ds, theta, rho0, rho1, opts)?;
    let e0 = ds.semigroup_apply_dual(t, rho0)?;
    let e1 = ds.semigroup_apply_dual(t, rho1)?;
    let evolved = transport::distance(ds, theta, &e0, &e1, opts)?;
    let rhs = (-lambda * t).exp() * base.value;
    Ok((evolved, rhs, base))
}
