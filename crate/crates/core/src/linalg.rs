//! Dense complex linear algebra helpers: Hermitian eigendecompositions,
//! matrix functions through the spectral theorem, eigenvalue clustering, and
//! seeded random matrix generation.
//!
//! Everything here works at the raw matrix level with the standard trace;
//! τ-weighted conventions live in [`crate::matalg`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tol;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[inline]
pub fn ci(im: f64) -> Complex64 {
    Complex64::new(0.0, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Standard (unnormalized) trace.
pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().sum()
}

pub fn frob_norm(a: &CMatrix) -> f64 {
    a.norm()
}

/// Operator norm of a Hermitian matrix (largest |eigenvalue|).
pub fn op_norm_hermitian(a: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(a);
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn hermitian_asymmetry(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

pub fn is_hermitian(a: &CMatrix, rel: f64) -> bool {
    hermitian_asymmetry(a) <= rel * a.norm().max(1e-300)
}

/// Symmetrize a nominally Hermitian matrix; reject when the asymmetry is
/// above `HERMITIZE_REL` relative to its norm.
pub fn hermitize(a: &CMatrix) -> Result<CMatrix> {
    let asym = hermitian_asymmetry(a);
    let scale = a.norm().max(1e-300);
    if asym > tol::HERMITIZE_REL * scale {
        return Err(Error::NotHermitian(asym / scale));
    }
    Ok((a + a.adjoint()).scale(0.5))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
/// Returns `(values, u)` with `a = u diag(values) u†`.
pub fn hermitian_eigen(a: &CMatrix) -> (RVector, CMatrix) {
    let sym = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[i].partial_cmp(&sym.eigenvalues[j]).unwrap());
    let vals = RVector::from_iterator(n, order.iter().map(|&i| sym.eigenvalues[i]));
    let mut u = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        u.set_column(k, &sym.eigenvectors.column(i));
    }
    (vals, u)
}

/// Group sorted eigenvalues into clusters: consecutive values whose gap is
/// below `rel * scale` are merged. Returns `(representatives, membership)`
/// where `membership[i]` is the cluster index of eigenvalue `i`.
pub fn cluster_sorted(vals: &RVector, scale: f64, rel: f64) -> (Vec<f64>, Vec<usize>) {
    let n = vals.len();
    let gap = rel * scale.max(1e-300);
    let mut reps = Vec::new();
    let mut member = vec![0usize; n];
    let mut start = 0;
    for i in 0..n {
        if i + 1 == n || vals[i + 1] - vals[i] > gap {
            let m = vals.rows_range(start..=i).iter().sum::<f64>() / (i - start + 1) as f64;
            for member_slot in member.iter_mut().take(i + 1).skip(start) {
                *member_slot = reps.len();
            }
            reps.push(m);
            start = i + 1;
        }
    }
    (reps, member)
}

/// Apply a scalar function to a Hermitian matrix through its spectrum.
pub fn matrix_function(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, u) = hermitian_eigen(a);
    let d = CMatrix::from_diagonal(&vals.map(|v| c(f(v))).into());
    &u * d * u.adjoint()
}

/// Fractional power of a positive definite matrix. Rejects spectra reaching
/// below `SIGMA_MIN_EIG_REL` of the matrix scale (never computed through a
/// near-singular eigenbasis).
pub fn matrix_power_psd(a: &CMatrix, p: f64) -> Result<CMatrix> {
    let (vals, u) = hermitian_eigen(a);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if p < 0.0 || p.fract() != 0.0 {
        let min = vals.min();
        if min < tol::SIGMA_MIN_EIG_REL * scale {
            return Err(Error::SingularReferenceState);
        }
    }
    let d = CMatrix::from_diagonal(&vals.map(|v| c(v.powf(p))).into());
    Ok(&u * d * u.adjoint())
}

pub fn matrix_log_psd(a: &CMatrix) -> Result<CMatrix> {
    let (vals, u) = hermitian_eigen(a);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if vals.min() < tol::SIGMA_MIN_EIG_REL * scale {
        return Err(Error::SingularReferenceState);
    }
    let d = CMatrix::from_diagonal(&vals.map(|v| c(v.ln())).into());
    Ok(&u * d * u.adjoint())
}

/// Spectral positive part X_(+) = X 1_(0,∞)(X).
pub fn positive_part(a: &CMatrix) -> CMatrix {
    matrix_function(a, |v| v.max(0.0))
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigen(a).0.min()
}

/// Eigendecomposition of a real symmetric matrix, ascending eigenvalues.
pub fn sym_eigen(a: &RMatrix) -> (RVector, RMatrix) {
    let sym = a.clone().symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[i].partial_cmp(&sym.eigenvalues[j]).unwrap());
    let vals = RVector::from_iterator(n, order.iter().map(|&i| sym.eigenvalues[i]));
    let mut u = RMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        u.set_column(k, &sym.eigenvectors.column(i));
    }
    (vals, u)
}

/// Pseudo-inverse of a real symmetric matrix with a relative rank cutoff.
pub fn pinv_sym(a: &RMatrix, rel_cutoff: f64) -> RMatrix {
    let (vals, u) = sym_eigen(a);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let inv = RVector::from_iterator(
        vals.len(),
        vals.iter()
            .map(|&v| if v.abs() > rel_cutoff * scale { 1.0 / v } else { 0.0 }),
    );
    &u * RMatrix::from_diagonal(&inv) * u.transpose()
}

/// Symmetric square root and inverse square root of an SPD matrix.
pub fn sqrt_invsqrt_spd(a: &RMatrix) -> Result<(RMatrix, RMatrix)> {
    let (vals, u) = sym_eigen(a);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if vals.min() < 1e-14 * scale {
        return Err(Error::SolverNonConvergence(
            "Gram matrix numerically singular".into(),
        ));
    }
    let s = &u * RMatrix::from_diagonal(&vals.map(f64::sqrt)) * u.transpose();
    let si = &u * RMatrix::from_diagonal(&vals.map(|v| 1.0 / v.sqrt())) * u.transpose();
    Ok((s, si))
}

// ---------------------------------------------------------------------------
// Seeded random generation
// ---------------------------------------------------------------------------

pub fn gaussian_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) / 2.0f64.sqrt()
}

pub fn random_complex_matrix<R: Rng>(rng: &mut R, n: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(n, m, |_, _| gaussian_complex(rng))
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_complex_matrix(rng, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// standard phase correction.
pub fn haar_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_complex_matrix(rng, n, n);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C_ONE };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Uniform (Dirichlet(1,...,1)) point on the probability simplex.
pub fn dirichlet_uniform<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| -(rng.random::<f64>().max(1e-300)).ln())
        .collect();
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn hermitian_eigen_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = random_hermitian(&mut rng, 6);
        let (vals, u) = hermitian_eigen(&a);
        let d = CMatrix::from_diagonal(&vals.map(c).into());
        let back = &u * d * u.adjoint();
        assert!((&a - back).norm() < 1e-12 * a.norm());
        // ascending order
        for i in 1..vals.len() {
            assert!(vals[i] >= vals[i - 1]);
        }
    }

    #[test]
    fn clustering_merges_close_values() {
        let vals = RVector::from_vec(vec![1.0, 1.0 + 1e-12, 2.0]);
        let (reps, member) = cluster_sorted(&vals, 1.0, tol::CLUSTER_REL);
        assert_eq!(reps.len(), 2);
        assert_eq!(member, vec![0, 0, 1]);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let u = haar_unitary(&mut rng, 5);
        let err = (u.adjoint() * &u - identity(5)).norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn psd_power_rejects_singular() {
        let a = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)]));
        assert!(matrix_power_psd(&a, 0.5).is_err());
    }
}
