//! Differential structures (𝒜, ∇, σ).
//!
//! A structure consists of directions j with target algebras ℬ_j, compatible
//! unital *-homomorphism pairs (ℓ_j, r_j), operators V_j ∈ ℬ_j that are
//! eigenvectors of the relative modular operator Δ_{ℓ_j(σ), r_j(σ)} with
//! eigenvalue e^{−ω_j}, and an involution j ↦ j* with V_{j*} = V_j*.
//! Partial derivatives act by
//!
//!   ∂_j A = V_j r_j(A) − ℓ_j(A) V_j ,
//!
//! the Dirichlet form is ℰ(A,B) = Σ_j ⟨∂_j A, ∂_j B⟩_KMS,j, and the
//! generator of the associated quantum Markov semigroup is
//! ℒ = −Σ_j ∂†_{j,σ} ∂_j.

pub mod builders;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, RMatrix, RVector};
use crate::matalg::{gram, Algebra, InnerProductKind, Superop};
use crate::tol;

// ---------------------------------------------------------------------------
// Homomorphisms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum HomKind {
    Identity,
    /// Canonical embedding of a diagonal algebra into the full matrix
    /// algebra on the same ambient space.
    BlockEmbedding,
    /// Evaluation of the k-th coordinate, ℓ^∞_n → ℂ.
    CoordEval(usize),
    /// Pullback by the j-th coordinate swap of the hypercube.
    CoordSwap(usize),
    /// Parity automorphism Γ of the Clifford algebra.
    Parity,
    /// Any other linear realization.
    General,
}

/// A unital *-homomorphism between algebra realizations, stored as its real
/// matrix over the Hermitian τ-orthonormal bases (a *-homomorphism is a real
/// map, so the matrix is real).
#[derive(Debug, Clone)]
pub struct Homomorphism {
    pub kind: HomKind,
    pub source: Arc<Algebra>,
    pub target: Arc<Algebra>,
    mat: RMatrix,
}

impl Homomorphism {
    pub fn from_action(
        kind: HomKind,
        source: Arc<Algebra>,
        target: Arc<Algebra>,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Self {
        let (ds, dt) = (source.space_dim(), target.space_dim());
        let mut mat = RMatrix::zeros(dt, ds);
        for b in 0..ds {
            let img = f(&source.basis[b]);
            for a in 0..dt {
                mat[(a, b)] = target.inner_tau(&target.basis[a], &img).re;
            }
        }
        Homomorphism {
            kind,
            source,
            target,
            mat,
        }
    }

    pub fn identity(alg: Arc<Algebra>) -> Self {
        let d = alg.space_dim();
        Homomorphism {
            kind: HomKind::Identity,
            source: alg.clone(),
            target: alg,
            mat: RMatrix::identity(d, d),
        }
    }

    pub fn apply(&self, a: &CMatrix) -> CMatrix {
        let coords = self.source.coords(a);
        let re = RVector::from_iterator(coords.len(), coords.iter().map(|z| z.re));
        let im = RVector::from_iterator(coords.len(), coords.iter().map(|z| z.im));
        let yre = &self.mat * re;
        let yim = &self.mat * im;
        let y = nalgebra::DVector::from_iterator(
            yre.len(),
            yre.iter().zip(yim.iter()).map(|(&r, &i)| Complex64::new(r, i)),
        );
        self.target.from_coords(&y)
    }

    /// τ-adjoint ℓ†: (ℬ, τ_B) → (𝒜, τ); transpose over the orthonormal
    /// bases.
    pub fn adjoint_apply(&self, b: &CMatrix) -> CMatrix {
        let coords = self.target.coords(b);
        let re = RVector::from_iterator(coords.len(), coords.iter().map(|z| z.re));
        let im = RVector::from_iterator(coords.len(), coords.iter().map(|z| z.im));
        let yre = self.mat.transpose() * re;
        let yim = self.mat.transpose() * im;
        let y = nalgebra::DVector::from_iterator(
            yre.len(),
            yre.iter().zip(yim.iter()).map(|(&r, &i)| Complex64::new(r, i)),
        );
        self.source.from_coords(&y)
    }
}

// ---------------------------------------------------------------------------
// Directions and structures
// ---------------------------------------------------------------------------

/// One direction of a differential structure.
#[derive(Debug, Clone)]
pub struct Direction {
    pub target: Arc<Algebra>,
    pub ell: Homomorphism,
    pub right: Homomorphism,
    pub v: CMatrix,
    pub omega: f64,
    /// Index j* with V_{j*} = V_j*.
    pub star: usize,
}

/// Per-axiom outcome of structure validation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AxiomCheck {
    pub name: String,
    pub residual: f64,
    pub pass: bool,
    /// Informational checks do not gate the validated flag (the
    /// coordinate-evaluation trace identity is structurally inapplicable).
    pub gating: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AxiomCheck>,
    pub validated: bool,
}

impl ValidationReport {
    pub fn worst_gating_residual(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.gating)
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }
}

struct SemigroupCache {
    evals: RVector,
    /// exp(tL) = right · diag(e^{t λ}) · left
    right: RMatrix,
    left: RMatrix,
}

/// A differential structure (𝒜, ∇, σ). Immutable after construction; the
/// generator and semigroup caches initialize lazily behind `OnceLock` and
/// reads are lock-free afterwards.
pub struct DifferentialStructure {
    pub algebra: Arc<Algebra>,
    pub sigma: CMatrix,
    pub directions: Vec<Direction>,
    validated: AtomicBool,
    generator: OnceLock<Superop>,
    semigroup: OnceLock<SemigroupCache>,
    a0: OnceLock<Vec<RVector>>,
}

impl std::fmt::Debug for DifferentialStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DifferentialStructure")
            .field("algebra", &self.algebra.kind)
            .field("directions", &self.directions.len())
            .field("validated", &self.is_validated())
            .finish()
    }
}

impl DifferentialStructure {
    pub fn new(algebra: Arc<Algebra>, sigma: CMatrix, directions: Vec<Direction>) -> Self {
        DifferentialStructure {
            algebra,
            sigma,
            directions,
            validated: AtomicBool::new(false),
            generator: OnceLock::new(),
            semigroup: OnceLock::new(),
            a0: OnceLock::new(),
        }
    }

    pub fn is_validated(&self) -> bool {
        self.validated.load(Ordering::Acquire)
    }

    pub fn require_validated(&self) -> Result<()> {
        if self.is_validated() {
            Ok(())
        } else {
            Err(Error::UnvalidatedStructure)
        }
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len()
    }

    fn direction(&self, j: usize) -> Result<&Direction> {
        self.directions
            .get(j)
            .ok_or(Error::DirectionOutOfRange(j, self.directions.len()))
    }

    // -- partial derivatives ------------------------------------------------

    /// ∂_j A = V_j r_j(A) − ℓ_j(A) V_j.
    pub fn partial(&self, j: usize, a: &CMatrix) -> Result<CMatrix> {
        let d = self.direction(j)?;
        Ok(&d.v * d.right.apply(a) - d.ell.apply(a) * &d.v)
    }

    /// Gradient ∇A = (∂_j A)_j.
    pub fn gradient(&self, a: &CMatrix) -> Result<Vec<CMatrix>> {
        (0..self.directions.len()).map(|j| self.partial(j, a)).collect()
    }

    /// τ-adjoint of ∂_j: ∂_j† B = r_j†(V_j* B) − ℓ_j†(B V_j*).
    pub fn partial_adjoint_tau(&self, j: usize, b: &CMatrix) -> Result<CMatrix> {
        let d = self.direction(j)?;
        let vd = d.v.adjoint();
        Ok(d.right.adjoint_apply(&(&vd * b)) - d.ell.adjoint_apply(&(b * &vd)))
    }

    /// Divergence div 𝐁 = −Σ_j ∂_j† B_j.
    pub fn divergence(&self, b: &[CMatrix]) -> Result<CMatrix> {
        let n = self.algebra.dim;
        let mut out = CMatrix::zeros(n, n);
        for (j, bj) in b.iter().enumerate() {
            out -= self.partial_adjoint_tau(j, bj)?;
        }
        Ok(out)
    }

    /// s-weighted adjoint ∂†^{(s)}_{j,σ} B = e^{−sω_j} r_j†(V_j*B)
    /// − e^{(1−s)ω_j} ℓ_j†(B V_j*). Requires a validated structure.
    pub fn partial_adjoint_s(&self, j: usize, s: f64, b: &CMatrix) -> Result<CMatrix> {
        self.require_validated()?;
        self.partial_adjoint_s_unchecked(j, s, b)
    }

    fn partial_adjoint_s_unchecked(&self, j: usize, s: f64, b: &CMatrix) -> Result<CMatrix> {
        let d = self.direction(j)?;
        let vd = d.v.adjoint();
        let w1 = (-s * d.omega).exp();
        let w2 = ((1.0 - s) * d.omega).exp();
        Ok(d.right.adjoint_apply(&(&vd * b)).scale(w1) - d.ell.adjoint_apply(&(b * &vd)).scale(w2))
    }

    /// KMS adjoint (s = 1/2).
    pub fn partial_adjoint_kms(&self, j: usize, b: &CMatrix) -> Result<CMatrix> {
        self.partial_adjoint_s_unchecked(j, 0.5, b)
    }

    // -- inner products on the direction algebras ---------------------------

    /// ⟨B₁, B₂⟩_{s,j} = τ_j[B₁* ℓ_j(σ^s) B₂ r_j(σ^{1−s})].
    pub fn bj_s_inner(&self, j: usize, s: f64, b1: &CMatrix, b2: &CMatrix) -> Result<Complex64> {
        let d = self.direction(j)?;
        let (ls, rs) = self.sigma_power_pair(j, s)?;
        Ok(d.target.tau(&(b1.adjoint() * ls * b2 * rs)))
    }

    fn sigma_power_pair(&self, j: usize, s: f64) -> Result<(CMatrix, CMatrix)> {
        let d = self.direction(j)?;
        let ls = if s == 0.0 {
            d.target.one()
        } else {
            d.ell.apply(&linalg::matrix_power_psd(&self.sigma, s)?)
        };
        let rs = if s == 1.0 {
            d.target.one()
        } else {
            d.right.apply(&linalg::matrix_power_psd(&self.sigma, 1.0 - s)?)
        };
        Ok((ls, rs))
    }

    /// ⟨B₁, B₂⟩_{KMS,j}.
    pub fn bj_kms_inner(&self, j: usize, b1: &CMatrix, b2: &CMatrix) -> Result<Complex64> {
        self.bj_s_inner(j, 0.5, b1, b2)
    }

    // -- generator and semigroup ---------------------------------------------

    /// Apply ℒ = −Σ_j ∂†_{j,σ} ∂_j directly (no matrix assembly).
    pub fn apply_generator(&self, a: &CMatrix) -> Result<CMatrix> {
        let n = self.algebra.dim;
        let mut out = CMatrix::zeros(n, n);
        for j in 0..self.directions.len() {
            let pj = self.partial(j, a)?;
            out -= self.partial_adjoint_s_unchecked(j, 0.5, &pj)?;
        }
        Ok(out)
    }

    /// The generator as a superoperator over the algebra basis (cached).
    pub fn generator(&self) -> &Superop {
        self.generator.get_or_init(|| {
            Superop::from_action(self.algebra.clone(), |h| {
                self.apply_generator(h).expect("generator assembly")
            })
        })
    }

    /// τ-adjoint generator ℒ† (transpose over the orthonormal basis).
    pub fn adjoint_generator(&self) -> Superop {
        self.generator().adjoint_tau()
    }

    pub fn apply_adjoint_generator(&self, rho: &CMatrix) -> CMatrix {
        self.adjoint_generator().apply(rho)
    }

    /// Residual between the two closed forms of the generator and the
    /// definition −Σ ∂†∂ (they agree for valid structures by the symmetry
    /// identity).
    pub fn generator_forms_residual(&self, samples: usize) -> Result<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(0x9e3779b9);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let a = self.algebra.random_hermitian(&mut rng);
            let def = self.apply_generator(&a)?;
            let mut form_a = CMatrix::zeros(self.algebra.dim, self.algebra.dim);
            let mut form_b = CMatrix::zeros(self.algebra.dim, self.algebra.dim);
            for d in &self.directions {
                let vd = d.v.adjoint();
                let ra = d.right.apply(&a);
                let la = d.ell.apply(&a);
                let vv = &vd * &d.v;
                form_a += d
                    .right
                    .adjoint_apply(&(-(&ra * &vv) + (&vd * &la * &d.v).scale(2.0) - &vv * &ra))
                    .scale((-d.omega / 2.0).exp());
                form_b += d
                    .ell
                    .adjoint_apply(&(&d.v * &ra * &vd - &la * &d.v * &vd))
                    .scale((d.omega / 2.0).exp())
                    - d.right
                        .adjoint_apply(&(&vv * &ra - &vd * &la * &d.v))
                        .scale((-d.omega / 2.0).exp());
            }
            let scale = def.norm().max(1.0);
            worst = worst
                .max((&form_a - &def).norm() / scale)
                .max((&form_b - &def).norm() / scale);
        }
        Ok(worst)
    }

    fn semigroup_cache(&self) -> &SemigroupCache {
        self.semigroup.get_or_init(|| {
            let g = gram(&self.algebra, &self.sigma, InnerProductKind::Kms)
                .expect("KMS Gram")
                .map(|z| z.re);
            let (gs, gsi) = linalg::sqrt_invsqrt_spd(&g).expect("Gram SPD");
            let m = &self.generator().mat;
            let s = &gs * m * &gsi;
            let s = (&s + s.transpose()).scale(0.5);
            let (evals, u) = linalg::sym_eigen(&s);
            SemigroupCache {
                evals,
                right: &gsi * &u,
                left: u.transpose() * &gs,
            }
        })
    }

    /// 𝒫_t A = e^{tℒ} A.
    pub fn semigroup_apply(&self, t: f64, a: &CMatrix) -> Result<CMatrix> {
        assert!(t >= 0.0, "semigroup defined for t >= 0");
        self.require_validated()?;
        let cache = self.semigroup_cache();
        let exp = RMatrix::from_diagonal(&cache.evals.map(|l| (t * l).exp()));
        let mat = &cache.right * exp * &cache.left;
        let op = Superop {
            alg: self.algebra.clone(),
            mat,
        };
        Ok(op.apply(a))
    }

    /// Dual (trace-preserving) semigroup on states: 𝒫_t† ρ = e^{tℒ†} ρ.
    pub fn semigroup_apply_dual(&self, t: f64, rho: &CMatrix) -> Result<CMatrix> {
        assert!(t >= 0.0, "semigroup defined for t >= 0");
        self.require_validated()?;
        let cache = self.semigroup_cache();
        let exp = RMatrix::from_diagonal(&cache.evals.map(|l| (t * l).exp()));
        let mat = (&cache.right * exp * &cache.left).transpose();
        let op = Superop {
            alg: self.algebra.clone(),
            mat,
        };
        Ok(op.apply(rho))
    }

    /// Eigenvalues of the generator (real by detailed balance).
    pub fn generator_spectrum(&self) -> RVector {
        self.semigroup_cache().evals.clone()
    }

    // -- kernel / range ------------------------------------------------------

    /// Orthonormal coordinate basis of 𝒜₀ = Ran(ℒ†) ∩ 𝒜_h (as real
    /// coordinate vectors over the algebra basis), cached.
    pub fn a0_coords(&self) -> &Vec<RVector> {
        self.a0.get_or_init(|| {
            let m = &self.generator().mat;
            let mtm = m.transpose() * m;
            let (vals, u) = linalg::sym_eigen(&mtm);
            let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            let mut basis = Vec::new();
            for i in 0..vals.len() {
                if vals[i] > (tol::RANK_REL * tol::RANK_REL) * scale {
                    // Ran(L^T) = Ker(L)^perp: eigenvectors of L^T L with
                    // nonzero eigenvalue
                    basis.push(RVector::from(u.column(i)));
                }
            }
            basis
        })
    }

    pub fn kernel_dim(&self) -> usize {
        self.algebra.space_dim() - self.a0_coords().len()
    }

    /// Ergodic ⟺ Ker(ℒ) = span{1}.
    pub fn is_ergodic(&self) -> bool {
        self.kernel_dim() == 1
    }

    /// Project a Hermitian element onto 𝒜₀.
    pub fn project_a0(&self, a: &CMatrix) -> CMatrix {
        let x = self.algebra.coords_re(a);
        let mut y = RVector::zeros(x.len());
        for b in self.a0_coords() {
            y += b.scale(b.dot(&x));
        }
        self.algebra.from_coords_re(&y)
    }

    // -- validation -----------------------------------------------------------

    /// Check every axiom of the differential structure; the validated flag
    /// is set only when all gating checks pass at `tol::VALIDATION`.
    /// Sampling (multiplicativity, symmetry identity) uses a fixed-seed
    /// generator, so the report is deterministic.
    pub fn validate(&self) -> ValidationReport {
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
        let mut checks = Vec::new();
        let alg = &self.algebra;
        let push = |checks: &mut Vec<AxiomCheck>, name: String, residual: f64, gating: bool| {
            checks.push(AxiomCheck {
                name,
                residual,
                pass: residual < tol::VALIDATION,
                gating,
            });
        };

        // sigma is a faithful state of the algebra
        let sig_herm = linalg::hermitian_asymmetry(&self.sigma) / self.sigma.norm().max(1e-300);
        push(&mut checks, "sigma_hermitian".into(), sig_herm, true);
        let min_eig = linalg::min_eigenvalue(&self.sigma);
        push(
            &mut checks,
            "sigma_positive".into(),
            (-min_eig).max(0.0),
            true,
        );
        push(
            &mut checks,
            "sigma_trace_one".into(),
            (alg.tau(&self.sigma).re - 1.0).abs(),
            true,
        );
        push(
            &mut checks,
            "sigma_membership".into(),
            alg.membership_residual(&self.sigma),
            true,
        );

        for (j, d) in self.directions.iter().enumerate() {
            for (tag, hom) in [("ell", &d.ell), ("r", &d.right)] {
                // unital
                let r = d.target.norm_tau(&(hom.apply(&alg.one()) - d.target.one()));
                push(&mut checks, format!("dir{j}_{tag}_unital"), r, true);
                // multiplicative and *-preserving on sampled pairs
                let mut worst_mult = 0.0f64;
                let mut worst_star = 0.0f64;
                for _ in 0..20 {
                    let a = random_element(alg, &mut rng);
                    let b = random_element(alg, &mut rng);
                    let lhs = hom.apply(&(&a * &b));
                    let rhs = hom.apply(&a) * hom.apply(&b);
                    worst_mult = worst_mult
                        .max(d.target.norm_tau(&(lhs - rhs)) / (a.norm() * b.norm()).max(1.0));
                    let star = hom.apply(&a.adjoint()) - hom.apply(&a).adjoint();
                    worst_star = worst_star.max(d.target.norm_tau(&star) / a.norm().max(1.0));
                }
                push(
                    &mut checks,
                    format!("dir{j}_{tag}_multiplicative"),
                    worst_mult,
                    true,
                );
                push(&mut checks, format!("dir{j}_{tag}_star"), worst_star, true);
                // (tau, tau_B)-compatibility; structurally inapplicable for
                // coordinate evaluations, where it is reported but not gating
                let gating = !matches!(hom.kind, HomKind::CoordEval(_));
                let mut worst = 0.0f64;
                for _ in 0..10 {
                    let a = random_element(alg, &mut rng);
                    let r = (d.target.tau(&hom.apply(&a)) - alg.tau(&a)).norm() / a.norm().max(1.0);
                    worst = worst.max(r);
                }
                push(&mut checks, format!("dir{j}_{tag}_trace_compat"), worst, gating);
            }

            // V nonzero
            push(
                &mut checks,
                format!("dir{j}_v_nonzero"),
                if d.v.norm() > 0.0 { 0.0 } else { 1.0 },
                true,
            );

            // involution: V_{j*} = V_j*, same target data, omega_{j*} = -omega_j
            if d.star >= self.directions.len() {
                push(&mut checks, format!("dir{j}_involution"), 1.0, true);
            } else {
                let ds = &self.directions[d.star];
                let vres = (ds.v.clone() - d.v.adjoint()).norm() / d.v.norm().max(1e-300);
                let same_target = ds.target.kind == d.target.kind
                    && (ds.target.trace_weights.clone() - d.target.trace_weights.clone()).norm()
                        < 1e-12;
                let ores = (ds.omega + d.omega).abs();
                let star_of_star = self.directions[d.star].star == j;
                let r = vres
                    .max(ores)
                    .max(if same_target { 0.0 } else { 1.0 })
                    .max(if star_of_star { 0.0 } else { 1.0 });
                push(&mut checks, format!("dir{j}_involution"), r, true);
            }

            // symmetry identity (real-form condition)
            if d.star < self.directions.len() {
                let ds = &self.directions[d.star];
                let vd = d.v.adjoint();
                let mut worst = 0.0f64;
                for _ in 0..20 {
                    let a1 = random_element(alg, &mut rng);
                    let a2 = random_element(alg, &mut rng);
                    let lhs = d
                        .target
                        .tau(&(&vd * d.ell.apply(&a1) * &d.v * d.right.apply(&a2)));
                    let rhs = d
                        .target
                        .tau(&(&vd * ds.right.apply(&a1) * &d.v * ds.ell.apply(&a2)));
                    worst = worst.max((lhs - rhs).norm() / (a1.norm() * a2.norm()).max(1.0));
                }
                push(&mut checks, format!("dir{j}_symmetry_identity"), worst, true);
            }

            // modular eigenvector: ell(sigma) V r(sigma)^{-1} = e^{-omega} V
            let lsig = d.ell.apply(&self.sigma);
            let rsig = d.right.apply(&self.sigma);
            let r = match crate::matalg::relative_modular(&lsig, &rsig, &d.v) {
                Ok(dv) => (dv - d.v.scale((-d.omega).exp())).norm() / d.v.norm().max(1e-300),
                Err(_) => 1.0,
            };
            push(&mut checks, format!("dir{j}_modular_eigenvector"), r, true);
        }

        let validated = checks.iter().all(|c| !c.gating || c.pass);
        self.validated.store(validated, Ordering::Release);
        ValidationReport { checks, validated }
    }

    // -- detailed balance and Dirichlet form -----------------------------------

    /// Self-adjointness residual of ℒ in the requested inner product.
    pub fn detailed_balance_check(&self, kind: InnerProductKind) -> Result<f64> {
        self.require_validated()?;
        self.generator().symmetry_residual(&self.sigma, kind)
    }

    /// Residual of the s-weighted Dirichlet identity
    /// −⟨ℒA₁, A₂⟩_s = Σ_j e^{(s−1/2)ω_j} ⟨∂_j A₁, ∂_j A₂⟩_{s,j}
    /// over sampled pairs.
    pub fn s_weighted_dirichlet_residual(&self, s: f64, samples: usize) -> Result<f64> {
        self.require_validated()?;
        let mut rng = ChaCha12Rng::seed_from_u64(0xd1f);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let a1 = self.algebra.random_hermitian(&mut rng);
            let a2 = self.algebra.random_hermitian(&mut rng);
            let lhs = -crate::matalg::s_inner(
                &self.algebra,
                &self.sigma,
                s,
                &self.apply_generator(&a1)?,
                &a2,
            )?;
            let mut rhs = Complex64::new(0.0, 0.0);
            for j in 0..self.directions.len() {
                let w = ((s - 0.5) * self.directions[j].omega).exp();
                rhs += self
                    .bj_s_inner(j, s, &self.partial(j, &a1)?, &self.partial(j, &a2)?)?
                    * c(w);
            }
            worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
        }
        Ok(worst)
    }

    /// ℰ(A₁, A₂) = Σ_j ⟨∂_j A₁, ∂_j A₂⟩_{KMS,j}.
    pub fn dirichlet_form(&self, a1: &CMatrix, a2: &CMatrix) -> Result<Complex64> {
        self.require_validated()?;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.directions.len() {
            acc += self.bj_kms_inner(j, &self.partial(j, a1)?, &self.partial(j, a2)?)?;
        }
        Ok(acc)
    }

    /// Draw random Hermitian X, split by the KMS Moreau decomposition, and
    /// report the worst ℰ(X₊, X₋) (≤ 0 for completely Dirichlet forms).
    pub fn dirichlet_positivity_check<R: Rng>(&self, samples: usize, rng: &mut R) -> Result<f64> {
        self.require_validated()?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let x = self.algebra.random_hermitian(rng);
            let (xp, xm) = crate::matalg::moreau_kms(&self.algebra, &self.sigma, &x)?;
            let e = self.dirichlet_form(&xp, &xm)?;
            worst = worst.max(e.re);
        }
        Ok(worst)
    }

    /// The m-amplified form ℰ^{(m)} on 𝒜 ⊗ M_m: samples Hermitian 𝐇,
    /// decomposes in the σ⊗τ_m KMS cone, and reports the worst
    /// ℰ^{(m)}(𝐇₊, 𝐇₋).
    pub fn complete_dirichlet_check<R: Rng>(
        &self,
        m: usize,
        samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        self.require_validated()?;
        if m == 0 || m > 3 {
            return Err(Error::InvalidParameter(
                "amplification degree m must be 1..=3".into(),
            ));
        }
        if m == 1 {
            return self.dirichlet_positivity_check(samples, rng);
        }
        let n = self.algebra.dim;
        let nm = n * m;
        // sigma ⊗ 1_m is the reference density on 𝒜 ⊗ M_m under τ ⊗ τ_m
        let mut sigma_m = CMatrix::zeros(nm, nm);
        for blk in 0..m {
            for r in 0..n {
                for s in 0..n {
                    sigma_m[(blk * n + r, blk * n + s)] = self.sigma[(r, s)];
                }
            }
        }
        let q = linalg::matrix_power_psd(&sigma_m, 0.25)?;
        let qi = linalg::matrix_power_psd(&sigma_m, -0.25)?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            // random Hermitian 𝐇 with blocks H_ij in the algebra
            let mut h = CMatrix::zeros(nm, nm);
            for bi in 0..m {
                for bj in bi..m {
                    let blk = if bi == bj {
                        self.algebra.random_hermitian(rng)
                    } else {
                        let re = self.algebra.random_hermitian(rng);
                        let im = self.algebra.random_hermitian(rng);
                        re + im.map(|z| z * linalg::ci(1.0))
                    };
                    for r in 0..n {
                        for s in 0..n {
                            h[(bi * n + r, bj * n + s)] = blk[(r, s)];
                            h[(bj * n + s, bi * n + r)] = blk[(r, s)].conj();
                        }
                    }
                }
            }
            // Moreau parts in the sigma_m KMS cone
            let y = &h + CMatrix::zeros(nm, nm);
            let y = &q * y * &q;
            let yp = linalg::positive_part(&y);
            let ym = &yp - &y;
            let hp = &qi * yp * &qi;
            let hm = &qi * ym * &qi;
            // E^{(m)}(H+, H-) = (1/m) Σ_{ij} E((H+)_{ij}, (H-)_{ij})
            let mut acc = Complex64::new(0.0, 0.0);
            for bi in 0..m {
                for bj in 0..m {
                    let block = |mat: &CMatrix| {
                        let mut out = CMatrix::zeros(n, n);
                        for r in 0..n {
                            for s in 0..n {
                                out[(r, s)] = mat[(bi * n + r, bj * n + s)];
                            }
                        }
                        out
                    };
                    acc += self.dirichlet_form(&block(&hp), &block(&hm))?;
                }
            }
            worst = worst.max(acc.re / m as f64);
        }
        Ok(worst)
    }

    /// ‖ℒ†σ‖_τ; zero for every valid structure.
    pub fn invariance_residual(&self) -> f64 {
        self.algebra
            .norm_tau(&self.apply_adjoint_generator(&self.sigma))
    }

    /// Complex matrix of ∂_j over the orthonormal bases (𝒜 coords →
    /// ℬ_j coords). ∂_j is not a real map in general, so the matrix is
    /// complex.
    pub fn partial_matrix(&self, j: usize) -> Result<CMatrix> {
        let d = self.direction(j)?;
        let (da, db) = (self.algebra.space_dim(), d.target.space_dim());
        let mut m = CMatrix::zeros(db, da);
        for a in 0..da {
            let img = self.partial(j, &self.algebra.basis[a])?;
            let coords = d.target.coords(&img);
            for b in 0..db {
                m[(b, a)] = coords[b];
            }
        }
        Ok(m)
    }
}

fn random_element<R: Rng>(alg: &Algebra, rng: &mut R) -> CMatrix {
    let re = alg.random_hermitian(rng);
    let im = alg.random_hermitian(rng);
    re + im.map(|z| z * linalg::ci(1.0))
}

#[cfg(test)]
mod tests;
