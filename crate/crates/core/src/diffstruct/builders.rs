//! The standard differential-structure constructions: Lindblad generators
//! with detailed balance, reversible Markov chains (two realizations), the
//! discrete hypercube, the fermionic Ornstein-Uhlenbeck semigroup, and the
//! depolarizing channel.


use nalgebra::DVector;

use super::{Direction, DifferentialStructure, HomKind, Homomorphism};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, RMatrix, RVector};
use crate::matalg::{clifford_parity_matrix, Algebra, DensityMatrix};
use crate::tol;

fn finalize(ds: DifferentialStructure) -> Result<DifferentialStructure> {
    let report = ds.validate();
    if !report.validated {
        return Err(Error::InvalidParameter(format!(
            "builder produced an invalid structure (worst residual {:.3e})",
            report.worst_gating_residual()
        )));
    }
    Ok(ds)
}

/// Lindblad structure on M_n: ℬ_j = 𝒜 = M_n, ℓ_j = r_j = id, arbitrary
/// jump operators that are eigenvectors of Δ_σ and closed under adjoints.
pub fn build_lindblad(vs: &[CMatrix], sigma: CMatrix) -> Result<DifferentialStructure> {
    if vs.is_empty() {
        return Err(Error::InvalidParameter("empty jump operator set".into()));
    }
    let n = sigma.nrows();
    let alg = Algebra::full(n);
    DensityMatrix::new(alg.clone(), sigma.clone())?;
    if !DensityMatrix::new(alg.clone(), sigma.clone())?.is_faithful() {
        return Err(Error::SingularReferenceState);
    }
    // adjoint pairing
    let mut star = vec![usize::MAX; vs.len()];
    for (j, v) in vs.iter().enumerate() {
        let vd = v.adjoint();
        let mut found = None;
        for (k, w) in vs.iter().enumerate() {
            if (w - &vd).norm() <= 1e-10 * vd.norm().max(1e-300) {
                found = Some(k);
                break;
            }
        }
        star[j] = found.ok_or_else(|| {
            Error::InvalidParameter(format!("jump set not closed under adjoints at index {j}"))
        })?;
    }
    // omega_j from the modular eigenvalue, with a residual gate
    let mut directions = Vec::with_capacity(vs.len());
    for (j, v) in vs.iter().enumerate() {
        let dv = crate::matalg::relative_modular(&sigma, &sigma, v)?;
        let ip = alg.inner_tau(v, &dv);
        let nv = alg.inner_tau(v, v).re;
        let lambda = ip.re / nv;
        let res = (&dv - v.scale(lambda)).norm() / v.norm().max(1e-300);
        if res > tol::VALIDATION || lambda <= 0.0 {
            return Err(Error::NotModularEigenvector(res));
        }
        directions.push(Direction {
            target: alg.clone(),
            ell: Homomorphism::identity(alg.clone()),
            right: Homomorphism::identity(alg.clone()),
            v: v.clone(),
            omega: -lambda.ln(),
            star: star[j],
        });
    }
    finalize(DifferentialStructure::new(alg, sigma, directions))
}

fn check_reversible(q: &RMatrix, pi: &[f64]) -> Result<()> {
    let n = pi.len();
    let mut worst = 0.0f64;
    for k in 0..n {
        for p in 0..n {
            if k != p {
                worst = worst.max((pi[k] * q[(k, p)] - pi[p] * q[(p, k)]).abs());
            }
        }
    }
    if worst > 1e-12 {
        return Err(Error::RatesNotReversible(worst));
    }
    Ok(())
}

/// Reversible Markov chain in the Lindblad framework: 𝒜 the diagonal
/// subalgebra of M_n with the normalized trace, ℬ_kp = M_n,
/// V_kp = 2^{-1/2}(q_kp q_pk)^{1/4} E_kp, σ = n·diag(π),
/// ω_kp = log(π_p/π_k).
pub fn build_markov_lindblad(q: &RMatrix, pi: &[f64]) -> Result<DifferentialStructure> {
    let n = pi.len();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch("rate matrix vs pi".into()));
    }
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidParameter("pi must be strictly positive".into()));
    }
    check_reversible(q, pi)?;
    let z: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|p| p / z).collect();
    let alg = Algebra::diagonal(n);
    let full = Algebra::full(n);
    let embed = || {
        Homomorphism::from_action(HomKind::BlockEmbedding, alg.clone(), full.clone(), |a| {
            a.clone()
        })
    };
    let sigma = CMatrix::from_diagonal(&DVector::from_iterator(
        n,
        pi.iter().map(|&p| c(n as f64 * p)),
    ));
    let mut pairs = Vec::new();
    for k in 0..n {
        for p in 0..n {
            if k != p && q[(k, p)] > 0.0 {
                pairs.push((k, p));
            }
        }
    }
    let star_of = |k: usize, p: usize| pairs.iter().position(|&(a, b)| (a, b) == (p, k));
    let mut directions = Vec::with_capacity(pairs.len());
    for &(k, p) in &pairs {
        let coeff = (q[(k, p)] * q[(p, k)]).powf(0.25) / 2.0f64.sqrt();
        let mut v = CMatrix::zeros(n, n);
        v[(k, p)] = c(coeff);
        directions.push(Direction {
            target: full.clone(),
            ell: embed(),
            right: embed(),
            v,
            omega: (pi[p] / pi[k]).ln(),
            star: star_of(k, p).expect("reversibility pairs rates"),
        });
    }
    finalize(DifferentialStructure::new(alg, sigma, directions))
}

/// Reversible Markov chain on the edge set: 𝒜 = ℓ^∞_n with τ = Σ π_i δ_i,
/// ℬ_kp = ℂ with τ_kp(B) = (B/2) π_k q_kp, ℓ_kp(A) = A_k, r_kp(A) = A_p,
/// V = 1, σ = 1, ω = 0. The resulting generator is
/// (ℒA)_k = Σ_p q_kp (A_p − A_k).
pub fn build_markov_graph(q: &RMatrix, pi: &[f64]) -> Result<DifferentialStructure> {
    let n = pi.len();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch("rate matrix vs pi".into()));
    }
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::InvalidParameter("pi must be strictly positive".into()));
    }
    check_reversible(q, pi)?;
    let z: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|p| p / z).collect();
    let alg = Algebra::diagonal_weighted(&RVector::from_vec(pi.clone()));
    let mut pairs = Vec::new();
    for k in 0..n {
        for p in 0..n {
            if k != p && q[(k, p)] > 0.0 {
                pairs.push((k, p));
            }
        }
    }
    let star_of = |k: usize, p: usize| pairs.iter().position(|&(a, b)| (a, b) == (p, k));
    let mut directions = Vec::with_capacity(pairs.len());
    for &(k, p) in &pairs {
        let w = pi[k] * q[(k, p)] / 2.0;
        let target = Algebra::diagonal_weighted(&RVector::from_vec(vec![w]));
        let eval = |idx: usize| {
            Homomorphism::from_action(
                HomKind::CoordEval(idx),
                alg.clone(),
                target.clone(),
                move |a| CMatrix::from_element(1, 1, a[(idx, idx)]),
            )
        };
        directions.push(Direction {
            target: target.clone(),
            ell: eval(k),
            right: eval(p),
            v: CMatrix::from_element(1, 1, c(1.0)),
            omega: 0.0,
            star: star_of(k, p).expect("reversibility pairs rates"),
        });
    }
    let sigma = alg.one();
    finalize(DifferentialStructure::new(alg, sigma, directions))
}

/// Simple random walk on the discrete hypercube {−1,1}^n: 𝒜 = ℓ^∞(Q^n)
/// with the uniform trace, r_j the pullback of the j-th coordinate swap,
/// ℓ_j = id, V_j = 1, σ = 1. Generator ℒA(x) = 2 Σ_j (A(s_j x) − A(x)).
pub fn build_hypercube(n: usize) -> Result<DifferentialStructure> {
    if n == 0 || n > 6 {
        return Err(Error::InvalidParameter("hypercube supports 1 <= n <= 6".into()));
    }
    let dim = 1usize << n;
    let alg = Algebra::diagonal(dim);
    let mut directions = Vec::with_capacity(n);
    for j in 0..n {
        let swap = Homomorphism::from_action(
            HomKind::CoordSwap(j),
            alg.clone(),
            alg.clone(),
            move |a| {
                let mut out = CMatrix::zeros(dim, dim);
                for x in 0..dim {
                    out[(x, x)] = a[(x ^ (1 << j), x ^ (1 << j))];
                }
                out
            },
        );
        directions.push(Direction {
            target: alg.clone(),
            ell: Homomorphism::identity(alg.clone()),
            right: swap,
            v: alg.one(),
            omega: 0.0,
            star: j,
        });
    }
    let sigma = alg.one();
    finalize(DifferentialStructure::new(alg, sigma, directions))
}

/// Fermionic Ornstein-Uhlenbeck structure on the Clifford algebra C_n:
/// ∂_j A = Q_j A − Γ(A) Q_j with the parity automorphism Γ, σ = 1.
/// The generator is −4·(number operator).
pub fn build_fermion_ou(n: usize) -> Result<DifferentialStructure> {
    let alg = Algebra::clifford(n);
    let parity = clifford_parity_matrix(n);
    let mut directions = Vec::with_capacity(n);
    for j in 0..n {
        let p = parity.clone();
        let gamma = Homomorphism::from_action(
            HomKind::Parity,
            alg.clone(),
            alg.clone(),
            move |a| &p * a * &p,
        );
        directions.push(Direction {
            target: alg.clone(),
            ell: gamma,
            right: Homomorphism::identity(alg.clone()),
            v: alg.generators[j].clone(),
            omega: 0.0,
            star: j,
        });
    }
    let sigma = alg.one();
    finalize(DifferentialStructure::new(alg, sigma, directions))
}

/// Depolarizing structure on M_n with ℒA = γ(τ[A]1 − A): directions along a
/// τ-orthonormal traceless Hermitian basis {H_a}, V_a = √(γ/(2n²)) H_a,
/// ℓ = r = id, σ = 1. (On M₂ the H_a are the Pauli matrices; the scale
/// normalizes the generator to exactly γ(τ[A]1 − A).)
pub fn build_depolarizing(gamma: f64, n: usize) -> Result<DifferentialStructure> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let alg = Algebra::full(n);
    let scale = (gamma / (2.0 * (n * n) as f64)).sqrt();
    let mut directions = Vec::with_capacity(alg.space_dim() - 1);
    for a in 1..alg.space_dim() {
        directions.push(Direction {
            target: alg.clone(),
            ell: Homomorphism::identity(alg.clone()),
            right: Homomorphism::identity(alg.clone()),
            v: alg.basis[a].scale(scale),
            omega: 0.0,
            star: a - 1,
        });
    }
    let sigma = alg.one();
    finalize(DifferentialStructure::new(alg, sigma, directions))
}
