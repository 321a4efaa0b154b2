//! Non-commutative transport calculus for finite-dimensional quantum Markov
//! semigroups with detailed balance.
//!
//! The crate is organized around a *differential structure* (𝒜, ∇, σ): a
//! finite-dimensional *-algebra 𝒜 with a faithful tracial functional τ, a
//! family of partial derivatives ∂_j A = V_j r_j(A) − ℓ_j(A) V_j indexed by
//! directions j, and a faithful reference state σ. From such a structure one
//! obtains
//!
//! - the Dirichlet form ℰ(A,B) = Σ_j ⟨∂_j A, ∂_j B⟩_KMS and its generator
//!   ℒ = −Σ_j ∂†_{j,σ} ∂_j ([`diffstruct`]),
//! - the entropic transport metric induced by 𝒦_ρ A = −div(ρ̂ # ∇A) and its
//!   Benamou–Brenier distance 𝒲 ([`transport`]),
//! - entropy Hessians, Ricci lower bounds via Rayleigh scans and intertwining
//!   ([`entropyflow`]),
//! - the MLSI / H𝒲I / Talagrand / T₁ / Poincaré chain ([`funcineq`]).
//!
//! Matrix-calculus primitives (spectral clustering, double operator sums,
//! discrete derivatives, quasi-entropies) live in [`opcalc`]; inner products,
//! modular operators, the BKM map and the KMS Moreau decomposition in
//! [`matalg`].
//!
//! All operations are pure functions over immutable data; structures cache
//! their generator lazily behind a `OnceLock` and are safe to share across
//! threads.

pub mod diffstruct;
pub mod entropyflow;
pub mod error;
pub mod funcineq;
pub mod linalg;
pub mod matalg;
pub mod opcalc;
pub mod tol;
pub mod transport;

pub use error::{Error, Result};
