//! Finite-dimensional *-algebra core.
//!
//! An [`Algebra`] is one of four realizations (full matrix, block-diagonal,
//! diagonal, Clifford) inside M_n(ℂ), carrying a faithful tracial functional
//! τ[A] = Σ_i w_i A_ii and a Hermitian basis orthonormal for ⟨A,B⟩ = τ[A*B]
//! whose first element is the identity.
//!
//! On top of that sit the σ-weighted inner products
//!
//!   ⟨X,Y⟩_s = τ[X* σ^s Y σ^{1-s}],   s ∈ [0,1]
//!
//! (GNS at s = 0, KMS at s = 1/2, BKM as the s-average), the relative modular
//! operator Δ_{σ,ρ}(A) = σAρ⁻¹, the BKM map 𝓜A = ∫₀¹ σ^{1-s} A σ^s ds with
//! its inverse, the Moreau decomposition of a Hermitian element in the KMS
//! cone, and the P ↦ P̃ construction separating KMS- from GNS-detailed
//! balance.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, cluster_sorted, hermitian_eigen, hermitize, identity, CMatrix, RMatrix, RVector,
};
use crate::tol;

// ---------------------------------------------------------------------------
// Algebras
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraKind {
    /// Full matrix algebra M_n(ℂ) with the normalized trace.
    Full(usize),
    /// Block-diagonal ⨁ M_{n_b}(ℂ) with the normalized trace.
    BlockDiagonal(Vec<usize>),
    /// Diagonal matrices ≅ ℓ^∞_n with weights w_i (a positive measure).
    Diagonal(usize),
    /// Clifford algebra on n generators, realized in M_{2^n} by
    /// Jordan-Wigner; τ is the canonical normalized trace.
    Clifford(usize),
}

/// A *-algebra realization with tracial functional τ and a Hermitian
/// τ-orthonormal basis starting with the identity.
#[derive(Debug, Clone)]
pub struct Algebra {
    pub kind: AlgebraKind,
    /// Ambient matrix size of the realization.
    pub dim: usize,
    /// τ[A] = Σ_i trace_weights[i] * A_ii.
    pub trace_weights: RVector,
    /// Hermitian basis, τ-orthonormal, basis[0] = 1.
    pub basis: Vec<CMatrix>,
    /// Clifford generators (Jordan-Wigner), only for `Clifford`.
    pub generators: Vec<CMatrix>,
}

impl Algebra {
    pub fn full(n: usize) -> Arc<Self> {
        let w = RVector::from_element(n, 1.0 / n as f64);
        let basis = hermitian_basis_full(n, &w);
        Arc::new(Algebra {
            kind: AlgebraKind::Full(n),
            dim: n,
            trace_weights: w,
            basis,
            generators: vec![],
        })
    }

    pub fn block_diagonal(sizes: &[usize]) -> Arc<Self> {
        let n: usize = sizes.iter().sum();
        let w = RVector::from_element(n, 1.0 / n as f64);
        let mut spanning = vec![identity(n)];
        let mut off = 0;
        for &s in sizes {
            for i in 0..s {
                for j in i..s {
                    if i == j {
                        let mut m = CMatrix::zeros(n, n);
                        m[(off + i, off + i)] = c(1.0);
                        spanning.push(m);
                    } else {
                        let mut re = CMatrix::zeros(n, n);
                        re[(off + i, off + j)] = c(1.0);
                        re[(off + j, off + i)] = c(1.0);
                        spanning.push(re);
                        let mut im = CMatrix::zeros(n, n);
                        im[(off + i, off + j)] = linalg::ci(1.0);
                        im[(off + j, off + i)] = linalg::ci(-1.0);
                        spanning.push(im);
                    }
                }
            }
            off += s;
        }
        let basis = gram_schmidt_tau(spanning, &w);
        Arc::new(Algebra {
            kind: AlgebraKind::BlockDiagonal(sizes.to_vec()),
            dim: n,
            trace_weights: w,
            basis,
            generators: vec![],
        })
    }

    /// Diagonal algebra with the uniform weights 1/n.
    pub fn diagonal(n: usize) -> Arc<Self> {
        Self::diagonal_weighted(&RVector::from_element(n, 1.0 / n as f64))
    }

    /// Diagonal algebra ℓ^∞_n with τ[A] = Σ w_i A_ii, w_i > 0.
    pub fn diagonal_weighted(weights: &RVector) -> Arc<Self> {
        let n = weights.len();
        assert!(weights.iter().all(|&w| w > 0.0), "weights must be positive");
        let mut spanning = vec![identity(n)];
        for i in 0..n.saturating_sub(1) {
            let mut m = CMatrix::zeros(n, n);
            m[(i, i)] = c(1.0);
            spanning.push(m);
        }
        let basis = gram_schmidt_tau(spanning, weights);
        Arc::new(Algebra {
            kind: AlgebraKind::Diagonal(n),
            dim: n,
            trace_weights: weights.clone(),
            basis,
            generators: vec![],
        })
    }

    /// Clifford algebra C_n in M_{2^n} by Jordan-Wigner; n ≤ 6.
    pub fn clifford(n: usize) -> Arc<Self> {
        assert!((1..=6).contains(&n), "clifford(n) supported for 1 <= n <= 6");
        let dim = 1usize << n;
        let gens = jordan_wigner(n);
        // Monomials Q_S, Hermitized by an i-power; τ-orthonormal under the
        // canonical trace, identity first.
        let mut raw: Vec<(usize, CMatrix)> = Vec::with_capacity(dim);
        for mask in 0usize..dim {
            let mut m = identity(dim);
            let mut k = 0usize;
            for (j, g) in gens.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    m = &m * g;
                    k += 1;
                }
            }
            // (Q_S)* = (-1)^{k(k-1)/2} Q_S; an i-power restores Hermiticity.
            let phase = match (k * k.saturating_sub(1) / 2) % 4 {
                0 => c(1.0),
                1 => linalg::ci(1.0),
                2 => c(-1.0),
                _ => linalg::ci(-1.0),
            };
            raw.push((mask, m.map(|z| z * phase)));
        }
        raw.sort_by_key(|(mask, _)| (mask.count_ones(), *mask));
        let basis = raw.into_iter().map(|(_, m)| m).collect();
        let w = RVector::from_element(dim, 1.0 / dim as f64);
        Arc::new(Algebra {
            kind: AlgebraKind::Clifford(n),
            dim,
            trace_weights: w,
            basis,
            generators: gens,
        })
    }

    /// Dimension of the algebra as a vector space (= basis length).
    pub fn space_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn one(&self) -> CMatrix {
        identity(self.dim)
    }

    /// τ[A] = Σ_i w_i A_ii.
    pub fn tau(&self, a: &CMatrix) -> Complex64 {
        let mut t = Complex64::new(0.0, 0.0);
        for i in 0..self.dim {
            t += a[(i, i)] * self.trace_weights[i];
        }
        t
    }

    /// ⟨A,B⟩ = τ[A*B].
    pub fn inner_tau(&self, a: &CMatrix, b: &CMatrix) -> Complex64 {
        let mut t = Complex64::new(0.0, 0.0);
        // tau[(a^* b)]_ii = sum_k conj(a_ki) b_ki
        for i in 0..self.dim {
            let mut d = Complex64::new(0.0, 0.0);
            for k in 0..self.dim {
                d += a[(k, i)].conj() * b[(k, i)];
            }
            t += d * self.trace_weights[i];
        }
        t
    }

    pub fn norm_tau(&self, a: &CMatrix) -> f64 {
        self.inner_tau(a, a).re.max(0.0).sqrt()
    }

    /// Coordinates of A over the Hermitian basis (complex in general).
    pub fn coords(&self, a: &CMatrix) -> DVector<Complex64> {
        DVector::from_iterator(self.space_dim(), self.basis.iter().map(|h| self.inner_tau(h, a)))
    }

    /// Coordinates of a Hermitian element.
    pub fn coords_re(&self, a: &CMatrix) -> RVector {
        RVector::from_iterator(self.space_dim(), self.basis.iter().map(|h| self.inner_tau(h, a).re))
    }

    pub fn from_coords(&self, x: &DVector<Complex64>) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (a, h) in self.basis.iter().enumerate() {
            if x[a].norm_sqr() > 0.0 {
                m += h.map(|z| z * x[a]);
            }
        }
        m
    }

    pub fn from_coords_re(&self, x: &RVector) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (a, h) in self.basis.iter().enumerate() {
            if x[a] != 0.0 {
                m += h.map(|z| z * c(x[a]));
            }
        }
        m
    }

    /// τ-preserving conditional expectation onto the algebra.
    pub fn project(&self, a: &CMatrix) -> CMatrix {
        self.from_coords(&self.coords(a))
    }

    /// Membership residual ‖A − Π(A)‖ / max(‖A‖, 1).
    pub fn membership_residual(&self, a: &CMatrix) -> f64 {
        (a - self.project(a)).norm() / a.norm().max(1.0)
    }

    pub fn check_membership(&self, a: &CMatrix) -> Result<()> {
        let r = self.membership_residual(a);
        if r > tol::MEMBERSHIP {
            return Err(Error::NotInAlgebra(r));
        }
        Ok(())
    }

    /// A strictly positive random state: Dirichlet spectrum conjugated by a
    /// Haar unitary, projected into the algebra (the τ-conditional
    /// expectation preserves positivity and trace) and floored away from the
    /// boundary by mixing in `floor` of the identity.
    pub fn random_state<R: Rng>(&self, rng: &mut R, floor: f64) -> CMatrix {
        let n = self.dim;
        let spec = linalg::dirichlet_uniform(rng, n);
        let u = linalg::haar_unitary(rng, n);
        let d = CMatrix::from_diagonal(&DVector::from_iterator(n, spec.iter().map(|&p| c(p))));
        let raw = &u * d * u.adjoint();
        let mut p = self.project(&raw);
        p = (&p + p.adjoint()).scale(0.5);
        // clip roundoff negatives, re-project
        let (vals, u2) = hermitian_eigen(&p);
        let d2 = CMatrix::from_diagonal(&vals.map(|v| c(v.max(0.0))).into());
        p = &u2 * d2 * u2.adjoint();
        p = self.project(&p);
        p = (&p + p.adjoint()).scale(0.5);
        let t = self.tau(&p).re;
        let mut rho = p / c(t);
        if floor > 0.0 {
            rho = rho.scale(1.0 - floor) + self.one().scale(floor);
        }
        rho
    }

    /// A random Hermitian element with τ-norm 1.
    pub fn random_hermitian<R: Rng>(&self, rng: &mut R) -> CMatrix {
        let d = self.space_dim();
        let x = RVector::from_iterator(d, (0..d).map(|_| gauss(rng)));
        let x = &x / x.norm().max(1e-12);
        self.from_coords_re(&x)
    }

    /// A random traceless Hermitian element (τ[A] = 0), τ-norm 1.
    pub fn random_traceless<R: Rng>(&self, rng: &mut R) -> CMatrix {
        let d = self.space_dim();
        let mut x = RVector::zeros(d);
        for i in 1..d {
            x[i] = gauss(rng);
        }
        let x = &x / x.norm().max(1e-12);
        self.from_coords_re(&x)
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

fn hermitian_basis_full(n: usize, w: &RVector) -> Vec<CMatrix> {
    let mut spanning = vec![identity(n)];
    for i in 0..n {
        if i + 1 < n {
            let mut m = CMatrix::zeros(n, n);
            m[(i, i)] = c(1.0);
            spanning.push(m);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut re = CMatrix::zeros(n, n);
            re[(i, j)] = c(1.0);
            re[(j, i)] = c(1.0);
            spanning.push(re);
            let mut im = CMatrix::zeros(n, n);
            im[(i, j)] = linalg::ci(1.0);
            im[(j, i)] = linalg::ci(-1.0);
            spanning.push(im);
        }
    }
    gram_schmidt_tau(spanning, w)
}

/// Modified Gram-Schmidt over ⟨A,B⟩ = Σ_i w_i (A*B)_ii, keeping the order of
/// the spanning set (the identity stays first).
fn gram_schmidt_tau(spanning: Vec<CMatrix>, w: &RVector) -> Vec<CMatrix> {
    let tau = |a: &CMatrix, b: &CMatrix| -> Complex64 {
        let p = a.adjoint() * b;
        (0..w.len()).map(|i| p[(i, i)] * w[i]).sum()
    };
    let mut basis: Vec<CMatrix> = Vec::new();
    for mut v in spanning {
        for _pass in 0..2 {
            for b in &basis {
                let coeff = tau(b, &v);
                v -= b.map(|z| z * coeff);
            }
        }
        let norm = tau(&v, &v).re.max(0.0).sqrt();
        if norm > 1e-10 {
            basis.push(v.map(|z| z / c(norm)));
        }
    }
    basis
}

/// Jordan-Wigner generators Q_j = Z^{⊗(j-1)} ⊗ X ⊗ I^{⊗(n-j)}; they satisfy
/// Q_i Q_j + Q_j Q_i = 2δ_ij · 1.
fn jordan_wigner(n: usize) -> Vec<CMatrix> {
    let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let z = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let i2 = identity(2);
    (0..n)
        .map(|j| {
            let mut m = CMatrix::identity(1, 1);
            for k in 0..n {
                let f = if k < j {
                    &z
                } else if k == j {
                    &x
                } else {
                    &i2
                };
                m = m.kronecker(f);
            }
            m
        })
        .collect()
}

/// Grading operator P = Z^{⊗n}; conjugation by P is the parity automorphism
/// Γ with Γ(Q_j) = −Q_j.
pub fn clifford_parity_matrix(n: usize) -> CMatrix {
    let z = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    let mut m = CMatrix::identity(1, 1);
    for _ in 0..n {
        m = m.kronecker(&z);
    }
    m
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// A state of the algebra: Hermitian, positive semidefinite, τ[ρ] = 1, and a
/// member of the realization.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub algebra: Arc<Algebra>,
    pub matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(algebra: Arc<Algebra>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != algebra.dim || matrix.ncols() != algebra.dim {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, algebra ambient dim {}",
                matrix.nrows(),
                matrix.ncols(),
                algebra.dim
            )));
        }
        let m = hermitize(&matrix).map_err(|_| Error::NotDensity("not Hermitian".into()))?;
        let min = linalg::min_eigenvalue(&m);
        if min < -tol::MEMBERSHIP {
            return Err(Error::NotDensity(format!("negative eigenvalue {min:.3e}")));
        }
        let t = algebra.tau(&m).re;
        if (t - 1.0).abs() > tol::MEMBERSHIP {
            return Err(Error::NotDensity(format!("tau[rho] = {t}, expected 1")));
        }
        algebra
            .check_membership(&m)
            .map_err(|e| Error::NotDensity(e.to_string()))?;
        Ok(DensityMatrix { algebra, matrix: m })
    }

    /// Strictly positive (all eigenvalues above the singularity floor)?
    pub fn is_faithful(&self) -> bool {
        linalg::min_eigenvalue(&self.matrix) > tol::SIGMA_MIN_EIG_REL
    }
}

// ---------------------------------------------------------------------------
// Inner products
// ---------------------------------------------------------------------------

/// Which σ-weighted inner product on the algebra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerProductKind {
    /// ⟨X,Y⟩_s = τ[X* σ^s Y σ^{1-s}].
    SFamily(f64),
    /// s = 0.
    Gns,
    /// s = 1/2.
    Kms,
    /// ∫₀¹ ⟨X,Y⟩_s ds = τ[X* 𝓜Y].
    Bkm,
}

impl InnerProductKind {
    pub fn s_value(&self) -> Option<f64> {
        match self {
            InnerProductKind::SFamily(s) => Some(*s),
            InnerProductKind::Gns => Some(0.0),
            InnerProductKind::Kms => Some(0.5),
            InnerProductKind::Bkm => None,
        }
    }
}

fn check_sigma(sigma: &CMatrix) -> Result<()> {
    let (vals, _) = hermitian_eigen(sigma);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if vals.min() < tol::SIGMA_MIN_EIG_REL * scale {
        return Err(Error::SingularReferenceState);
    }
    Ok(())
}

/// ⟨A,B⟩_s = τ[A* σ^s B σ^{1-s}]. σ must be strictly positive whenever a
/// fractional power is required (s ∉ {0,1}).
pub fn s_inner(
    alg: &Algebra,
    sigma: &CMatrix,
    s: f64,
    a: &CMatrix,
    b: &CMatrix,
) -> Result<Complex64> {
    assert!((0.0..=1.0).contains(&s), "s must lie in [0,1]");
    let (ss, s1) = if s == 0.0 {
        (identity(alg.dim), sigma.clone())
    } else if s == 1.0 {
        (sigma.clone(), identity(alg.dim))
    } else {
        check_sigma(sigma)?;
        (
            linalg::matrix_power_psd(sigma, s)?,
            linalg::matrix_power_psd(sigma, 1.0 - s)?,
        )
    };
    Ok(alg.tau(&(a.adjoint() * ss * b * s1)))
}

/// ⟨A,B⟩_BKM = τ[A* 𝓜B].
pub fn bkm_inner(alg: &Algebra, sigma: &CMatrix, a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    let mb = bkm_map(alg, sigma, b)?;
    Ok(alg.inner_tau(a, &mb))
}

pub fn inner(
    alg: &Algebra,
    sigma: &CMatrix,
    kind: InnerProductKind,
    a: &CMatrix,
    b: &CMatrix,
) -> Result<Complex64> {
    match kind.s_value() {
        Some(s) => s_inner(alg, sigma, s, a, b),
        None => bkm_inner(alg, sigma, a, b),
    }
}

// ---------------------------------------------------------------------------
// BKM map and relative modular operator
// ---------------------------------------------------------------------------

/// Clustered spectral data of a Hermitian matrix: representatives and the
/// corresponding projectors.
pub fn clustered_projectors(a: &CMatrix) -> (Vec<f64>, Vec<CMatrix>) {
    let (vals, u) = hermitian_eigen(a);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (reps, member) = cluster_sorted(&vals, scale, tol::CLUSTER_REL);
    let n = a.nrows();
    let mut projs = vec![CMatrix::zeros(n, n); reps.len()];
    for (i, &cl) in member.iter().enumerate() {
        let col = u.column(i);
        for r in 0..n {
            for s in 0..n {
                projs[cl][(r, s)] += col[r] * col[s].conj();
            }
        }
    }
    (reps, projs)
}

/// 𝓜A = ∫₀¹ σ^{1-s} A σ^s ds = Σ Λ(λ_i, λ_k) E_i A E_k, Λ the logarithmic
/// mean of the σ-eigenvalues.
pub fn bkm_map(alg: &Algebra, sigma: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    let _ = alg;
    check_sigma(sigma)?;
    let (vals, projs) = clustered_projectors(sigma);
    let mut out = CMatrix::zeros(a.nrows(), a.ncols());
    for (i, ei) in projs.iter().enumerate() {
        let left = ei * a;
        for (k, ek) in projs.iter().enumerate() {
            out += (&left * ek).scale(crate::opcalc::mean::log_mean(vals[i], vals[k]));
        }
    }
    Ok(out)
}

/// 𝓜⁻¹A = ∫₀^∞ (t+σ)⁻¹ A (t+σ)⁻¹ dt = Σ δlog(λ_i, λ_k) E_i A E_k.
pub fn bkm_inverse(alg: &Algebra, sigma: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    let _ = alg;
    check_sigma(sigma)?;
    let (vals, projs) = clustered_projectors(sigma);
    let mut out = CMatrix::zeros(a.nrows(), a.ncols());
    for (i, ei) in projs.iter().enumerate() {
        let left = ei * a;
        for (k, ek) in projs.iter().enumerate() {
            out += (&left * ek).scale(1.0 / crate::opcalc::mean::log_mean(vals[i], vals[k]));
        }
    }
    Ok(out)
}

/// Δ_{σ,ρ}(A) = σ A ρ⁻¹.
pub fn relative_modular(sigma: &CMatrix, rho: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    let (vals, u) = hermitian_eigen(rho);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if vals.min() < tol::SIGMA_MIN_EIG_REL * scale {
        return Err(Error::SingularModularState);
    }
    let inv = &u * CMatrix::from_diagonal(&vals.map(|v| c(1.0 / v)).into()) * u.adjoint();
    Ok(sigma * a * inv)
}

// ---------------------------------------------------------------------------
// Moreau decomposition in the KMS cone
// ---------------------------------------------------------------------------

/// Decomposition X = X₊ − X₋ with X_± ⪰ 0 and ⟨X₊, X₋⟩_KMS = 0:
///
///   X_± = σ^{-1/4} (σ^{1/4} X σ^{1/4})_(±) σ^{-1/4}.
///
/// X₊ is the closest point of the positive cone in the KMS norm.
pub fn moreau_kms(alg: &Algebra, sigma: &CMatrix, x: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let _ = alg;
    let x = hermitize(x).map_err(|e| match e {
        Error::NotHermitian(a) => Error::MoreauNotSelfAdjoint(a),
        e => e,
    })?;
    check_sigma(sigma)?;
    let q = linalg::matrix_power_psd(sigma, 0.25)?;
    let qi = linalg::matrix_power_psd(sigma, -0.25)?;
    let y = &q * &x * &q;
    let yp = linalg::positive_part(&y);
    let ym = &yp - &y;
    Ok((&qi * &yp * &qi, &qi * &ym * &qi))
}

// ---------------------------------------------------------------------------
// Superoperators
// ---------------------------------------------------------------------------

/// A real linear map on the algebra, stored as a real matrix over the
/// Hermitian τ-orthonormal basis. Reality of the map ((TA)* = TA*) is a
/// structural property of this representation.
#[derive(Debug, Clone)]
pub struct Superop {
    pub alg: Arc<Algebra>,
    pub mat: RMatrix,
}

impl Superop {
    pub fn identity(alg: Arc<Algebra>) -> Self {
        let d = alg.space_dim();
        Superop {
            alg,
            mat: RMatrix::identity(d, d),
        }
    }

    /// Build from the action on basis elements.
    pub fn from_action(alg: Arc<Algebra>, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let d = alg.space_dim();
        let mut mat = RMatrix::zeros(d, d);
        for b in 0..d {
            let img = f(&alg.basis[b]);
            for a in 0..d {
                mat[(a, b)] = alg.inner_tau(&alg.basis[a], &img).re;
            }
        }
        Superop { alg, mat }
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let coords = self.alg.coords(x);
        let re = RVector::from_iterator(coords.len(), coords.iter().map(|z| z.re));
        let im = RVector::from_iterator(coords.len(), coords.iter().map(|z| z.im));
        let yre = &self.mat * re;
        let yim = &self.mat * im;
        let y = DVector::from_iterator(
            coords.len(),
            yre.iter().zip(yim.iter()).map(|(&r, &i)| Complex64::new(r, i)),
        );
        self.alg.from_coords(&y)
    }

    /// Adjoint with respect to ⟨A,B⟩ = τ[A*B] (transpose in the orthonormal
    /// basis).
    pub fn adjoint_tau(&self) -> Superop {
        Superop {
            alg: self.alg.clone(),
            mat: self.mat.transpose(),
        }
    }

    pub fn compose(&self, other: &Superop) -> Superop {
        Superop {
            alg: self.alg.clone(),
            mat: &self.mat * &other.mat,
        }
    }

    /// ‖T(1) − 1‖_τ.
    pub fn unitality_residual(&self) -> f64 {
        self.alg
            .norm_tau(&(self.apply(&self.alg.one()) - self.alg.one()))
    }

    /// Self-adjointness residual with respect to the given inner product:
    /// ‖G T − (G T)†‖ / ‖G T‖ with G the Gram matrix of the inner product.
    pub fn symmetry_residual(&self, sigma: &CMatrix, kind: InnerProductKind) -> Result<f64> {
        let g = gram(&self.alg, sigma, kind)?;
        let gt = &g * self.mat.map(c);
        let anti = &gt - gt.adjoint();
        Ok(anti.norm() / gt.norm().max(1e-300))
    }

    /// Choi matrix over the ambient matrix units; the map is extended to the
    /// ambient algebra by the τ-conditional expectation first (which is
    /// completely positive, so the extension is CP iff the map is).
    pub fn choi_ambient(&self) -> CMatrix {
        let n = self.alg.dim;
        let mut choi = CMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let mut eij = CMatrix::zeros(n, n);
                eij[(i, j)] = c(1.0);
                let img = self.apply(&self.alg.project(&eij));
                for r in 0..n {
                    for s in 0..n {
                        choi[(i * n + r, j * n + s)] = img[(r, s)];
                    }
                }
            }
        }
        choi
    }

    /// Smallest eigenvalue of the (Hermitized) Choi matrix.
    pub fn choi_min_eig(&self) -> f64 {
        let choi = self.choi_ambient();
        let h = (&choi + choi.adjoint()).scale(0.5);
        linalg::min_eigenvalue(&h)
    }
}

/// Gram matrix of the requested inner product over the algebra basis.
/// Complex Hermitian for general s; real symmetric for KMS and BKM.
pub fn gram(alg: &Algebra, sigma: &CMatrix, kind: InnerProductKind) -> Result<CMatrix> {
    let d = alg.space_dim();
    let mut g = CMatrix::zeros(d, d);
    match kind {
        InnerProductKind::Bkm => {
            for b in 0..d {
                let mb = bkm_map(alg, sigma, &alg.basis[b])?;
                for a in 0..d {
                    g[(a, b)] = alg.inner_tau(&alg.basis[a], &mb);
                }
            }
        }
        _ => {
            let s = kind.s_value().unwrap();
            let (ss, s1) = if s == 0.0 {
                (identity(alg.dim), sigma.clone())
            } else if s == 1.0 {
                (sigma.clone(), identity(alg.dim))
            } else {
                check_sigma(sigma)?;
                (
                    linalg::matrix_power_psd(sigma, s)?,
                    linalg::matrix_power_psd(sigma, 1.0 - s)?,
                )
            };
            for b in 0..d {
                let sb = &ss * &alg.basis[b] * &s1;
                for a in 0..d {
                    g[(a, b)] = alg.tau(&(alg.basis[a].adjoint() * &sb));
                }
            }
        }
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// The P ↦ P̃ construction
// ---------------------------------------------------------------------------

/// P̃(A) = 𝓜⁻¹(σ^{1/2} P(A) σ^{1/2}).
///
/// For unital completely positive P with P†σ = σ the output is unital,
/// completely positive, σ-invariant, and BKM-self-adjoint exactly when P is
/// KMS-self-adjoint.
pub fn kms_tilde_map(alg: &Arc<Algebra>, sigma: &CMatrix, p: &Superop) -> Result<Superop> {
    let ur = p.unitality_residual();
    if ur > 1e-9 {
        return Err(Error::NonUnitalMap(ur));
    }
    check_sigma(sigma)?;
    let sh = linalg::matrix_power_psd(sigma, 0.5)?;
    Ok(Superop::from_action(alg.clone(), |h| {
        let mid = &sh * p.apply(h) * &sh;
        bkm_inverse(alg, sigma, &mid).expect("sigma already checked")
    }))
}

/// Random search oracle: a unital, completely positive, σ-invariant,
/// KMS-symmetric map that does NOT commute with the modular operator (GNS
/// symmetry residual above `gns_floor`). Found by alternating projections
/// between the affine constraint set and the PSD Choi cone over random
/// Kraus starts.
pub fn random_kms_symmetric_map<R: Rng>(
    alg: &Arc<Algebra>,
    sigma: &CMatrix,
    rng: &mut R,
    gns_floor: f64,
) -> Result<Superop> {
    check_sigma(sigma)?;
    let d = alg.space_dim();
    let n = alg.dim;
    let g_kms = gram(alg, sigma, InnerProductKind::Kms)?.map(|z| z.re);

    // Affine constraints over vec(M), column-major.
    let s_coords = alg.coords_re(sigma);
    let idx = |r: usize, col: usize| col * d + r;
    let mut rows: Vec<RVector> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    // unitality: M e0 = e0
    for r in 0..d {
        let mut row = RVector::zeros(d * d);
        row[idx(r, 0)] = 1.0;
        rows.push(row);
        rhs.push(if r == 0 { 1.0 } else { 0.0 });
    }
    // sigma-invariance of the adjoint: M^T s = s
    for col in 0..d {
        let mut row = RVector::zeros(d * d);
        for r in 0..d {
            row[idx(r, col)] = s_coords[r];
        }
        rows.push(row);
        rhs.push(s_coords[col]);
    }
    // KMS symmetry: (G M) symmetric
    for a in 0..d {
        for b in (a + 1)..d {
            let mut row = RVector::zeros(d * d);
            for k in 0..d {
                row[idx(k, b)] += g_kms[(a, k)];
                row[idx(k, a)] -= g_kms[(b, k)];
            }
            rows.push(row);
            rhs.push(0.0);
        }
    }
    let m_rows = rows.len();
    let mut cmat = RMatrix::zeros(m_rows, d * d);
    for (i, row) in rows.iter().enumerate() {
        cmat.set_row(i, &row.transpose());
    }
    let b = RVector::from_vec(rhs);
    let cct = &cmat * cmat.transpose();
    let cct_pinv = linalg::pinv_sym(&cct, 1e-12);
    let project_affine = |m: &RMatrix| -> RMatrix {
        let x = RVector::from_iterator(d * d, m.iter().cloned());
        let corr = cmat.transpose() * (&cct_pinv * (&cmat * &x - &b));
        let y = x - corr;
        RMatrix::from_iterator(d, d, y.iter().cloned())
    };
    let choi_to_superop = |choi: &CMatrix| -> Superop {
        Superop::from_action(alg.clone(), |h| {
            let mut img = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let hij = h[(i, j)];
                    if hij.norm_sqr() == 0.0 {
                        continue;
                    }
                    for r in 0..n {
                        for s in 0..n {
                            img[(r, s)] += choi[(i * n + r, j * n + s)] * hij;
                        }
                    }
                }
            }
            alg.project(&img)
        })
    };

    for _attempt in 0..40 {
        let k1 = linalg::random_complex_matrix(rng, n, n);
        let k2 = linalg::random_complex_matrix(rng, n, n);
        let start =
            Superop::from_action(alg.clone(), |h| &k1 * h * k1.adjoint() + &k2 * h * k2.adjoint());
        let mut m = start.mat.clone();
        for _ in 0..600 {
            m = project_affine(&m);
            let sop = Superop {
                alg: alg.clone(),
                mat: m.clone(),
            };
            let choi = sop.choi_ambient();
            let choi_h = (&choi + choi.adjoint()).scale(0.5);
            let clipped = linalg::positive_part(&choi_h);
            m = choi_to_superop(&clipped).mat;
        }
        let m = project_affine(&m);
        let sop = Superop {
            alg: alg.clone(),
            mat: m,
        };
        let kms_res = sop.symmetry_residual(sigma, InnerProductKind::Kms)?;
        let gns_res = sop.symmetry_residual(sigma, InnerProductKind::Gns)?;
        let cp_min = sop.choi_min_eig();
        let unital = sop.unitality_residual();
        if kms_res < 1e-9 && unital < 1e-9 && cp_min > -1e-8 && gns_res > gns_floor {
            return Ok(sop);
        }
    }
    Err(Error::SolverNonConvergence(
        "no KMS-symmetric non-GNS map found in 40 attempts".into(),
    ))
}

#[cfg(test)]
mod tests;
