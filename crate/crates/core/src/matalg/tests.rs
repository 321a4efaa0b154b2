use std::sync::Arc;

use super::*;
use crate::linalg::{
    self, c, commutator, identity, matrix_power_psd, op_norm_hermitian, random_hermitian, CMatrix,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

fn diag2(a: f64, b: f64) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_vec(vec![c(a), c(b)]))
}

/// Project a real superoperator matrix onto the subspace of maps that are
/// self-adjoint with respect to the inner product with Gram matrix `g`.
fn project_symmetric(g: &CMatrix, m: &crate::linalg::RMatrix) -> crate::linalg::RMatrix {
    use crate::linalg::{RMatrix, RVector};
    let d = m.nrows();
    let idx = |r: usize, col: usize| col * d + r;
    let mut rows: Vec<RVector> = Vec::new();
    // (G M)_{ab} - conj((G M)_{ba}) = 0
    for a in 0..d {
        for b in a..d {
            let mut row_re = RVector::zeros(d * d);
            let mut row_im = RVector::zeros(d * d);
            for k in 0..d {
                // + (G M)_{ab} = sum_k G_{ak} M_{kb}
                row_re[idx(k, b)] += g[(a, k)].re;
                row_im[idx(k, b)] += g[(a, k)].im;
                // - conj((G M)_{ba}) = - sum_k conj(G_{bk}) M_{ka}
                row_re[idx(k, a)] -= g[(b, k)].re;
                row_im[idx(k, a)] += g[(b, k)].im;
            }
            if a == b {
                rows.push(row_im);
            } else {
                rows.push(row_re);
                rows.push(row_im);
            }
        }
    }
    let mut cmat = RMatrix::zeros(rows.len(), d * d);
    for (i, r) in rows.iter().enumerate() {
        cmat.set_row(i, &r.transpose());
    }
    let cct = &cmat * cmat.transpose();
    let cct_pinv = linalg::pinv_sym(&cct, 1e-12);
    let x = RVector::from_iterator(d * d, m.iter().cloned());
    let y = &x - cmat.transpose() * (&cct_pinv * (&cmat * &x));
    RMatrix::from_iterator(d, d, y.iter().cloned())
}

#[test]
fn algebra_bases_are_orthonormal_and_tracial() {
    for alg in [
        Algebra::full(3),
        Algebra::diagonal(4),
        Algebra::diagonal_weighted(&crate::linalg::RVector::from_vec(vec![0.1, 0.3, 0.6])),
        Algebra::block_diagonal(&[2, 1]),
        Algebra::clifford(2),
    ] {
        assert_eq!(alg.basis.len(), alg.space_dim());
        assert!((alg.basis[0].clone() - alg.one()).norm() < 1e-12, "basis[0] = 1");
        // orthonormality = faithfulness of tau on the algebra (Gram is PD)
        for a in 0..alg.space_dim() {
            for b in 0..alg.space_dim() {
                let g = alg.inner_tau(&alg.basis[a], &alg.basis[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g.re - expect).abs() < 1e-10 && g.im.abs() < 1e-10);
            }
        }
        // traciality on the basis
        for a in alg.basis.iter().take(6) {
            for b in alg.basis.iter().take(6) {
                let lhs = alg.tau(&(a * b));
                let rhs = alg.tau(&(b * a));
                assert!((lhs - rhs).norm() < 1e-11);
            }
        }
    }
}

#[test]
fn clifford_generators_satisfy_car() {
    for n in [1, 2, 3] {
        let alg = Algebra::clifford(n);
        for (i, qi) in alg.generators.iter().enumerate() {
            for (j, qj) in alg.generators.iter().enumerate() {
                let anti = qi * qj + qj * qi;
                let expect = if i == j {
                    identity(alg.dim).scale(2.0)
                } else {
                    CMatrix::zeros(alg.dim, alg.dim)
                };
                assert!((anti - expect).norm() < 1e-12);
            }
        }
        // parity: P Q_j P = -Q_j
        let p = clifford_parity_matrix(n);
        for q in &alg.generators {
            assert!((&p * q * &p + q).norm() < 1e-12);
        }
    }
}

#[test]
fn s_inner_with_identity_sigma_is_tau_norm() {
    let alg = Algebra::full(3);
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let a = linalg::random_complex_matrix(&mut rng, 3, 3);
    for s in [0.0, 0.3, 0.5, 1.0] {
        let v = s_inner(&alg, &alg.one(), s, &a, &a).unwrap();
        let expect = alg.inner_tau(&a, &a);
        assert!((v - expect).norm() < 1e-12);
        assert!(v.re >= 0.0);
    }
}

#[test]
fn s_inner_positivity_via_absolute_square() {
    // <X,X>_s = tau[|sigma^{s/2} X sigma^{(1-s)/2}|^2]
    let alg = Algebra::full(2);
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let sigma = alg.random_state(&mut rng, 1e-3);
    let x = linalg::random_complex_matrix(&mut rng, 2, 2);
    for s in [0.2, 0.5, 0.9] {
        let v = s_inner(&alg, &sigma, s, &x, &x).unwrap();
        let half = matrix_power_psd(&sigma, s / 2.0).unwrap()
            * &x
            * matrix_power_psd(&sigma, (1.0 - s) / 2.0).unwrap();
        let expect = alg.tau(&(half.adjoint() * &half));
        assert!((v - expect).norm() < 1e-12);
        assert!(v.re > 0.0);
    }
}

#[test]
fn s_inner_frozen_2x2_value() {
    // sigma with standard-trace diag (3/4, 1/4) is diag(3/2, 1/2) in
    // normalized-trace units; <sigma_x, sigma_x>_{1/2} = sqrt(3)/2.
    let alg = Algebra::full(2);
    let sigma = diag2(1.5, 0.5);
    assert!((alg.tau(&sigma).re - 1.0).abs() < 1e-15);
    let v = s_inner(&alg, &sigma, 0.5, &pauli_x(), &pauli_x()).unwrap();
    // direct matrix-product oracle
    let sh = diag2(1.5f64.sqrt(), 0.5f64.sqrt());
    let oracle = alg.tau(&(pauli_x() * &sh * pauli_x() * &sh));
    assert!((v - oracle).norm() < 1e-14);
    assert!((v.re - 3.0f64.sqrt() / 2.0).abs() < 1e-14);
}

#[test]
fn s_inner_rejects_singular_sigma() {
    let alg = Algebra::full(2);
    let sigma = diag2(2.0, 0.0);
    let a = pauli_x();
    assert!(matches!(
        s_inner(&alg, &sigma, 0.5, &a, &a),
        Err(Error::SingularReferenceState)
    ));
    // s = 0 and s = 1 need no fractional power
    assert!(s_inner(&alg, &sigma, 0.0, &a, &a).is_ok());
}

#[test]
fn bkm_map_identity_sigma() {
    let alg = Algebra::full(3);
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let a = linalg::random_complex_matrix(&mut rng, 3, 3);
    let m = bkm_map(&alg, &alg.one(), &a).unwrap();
    assert!((m - a).norm() < 1e-12);
}

#[test]
fn bkm_map_and_inverse_are_mutual_inverses() {
    let alg = Algebra::full(4);
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let sigma = alg.random_state(&mut rng, 1e-3);
    let a = random_hermitian(&mut rng, 4);
    let round = bkm_inverse(&alg, &sigma, &bkm_map(&alg, &sigma, &a).unwrap()).unwrap();
    assert!((round - &a).norm() < 1e-10 * a.norm());
}

#[test]
fn bkm_map_offdiagonal_log_mean_coefficient() {
    // sigma = diag(e, 1): M E12 = Lambda(e,1) E12 = (e-1) E12
    let alg = Algebra::full(2);
    let sigma = diag2(std::f64::consts::E, 1.0);
    let mut e12 = CMatrix::zeros(2, 2);
    e12[(0, 1)] = c(1.0);
    let m = bkm_map(&alg, &sigma, &e12).unwrap();
    let coeff = std::f64::consts::E - 1.0;
    assert!((m - e12.scale(coeff)).norm() < 1e-13);
    // quadrature oracle for the defining integral: ∫_0^1 e^{1-s} 1^s ds
    let n = 20001;
    let mut acc = 0.0;
    for i in 0..n {
        let s = i as f64 / (n - 1) as f64;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * std::f64::consts::E.powf(1.0 - s);
    }
    acc /= (n - 1) as f64;
    assert!((acc - coeff).abs() < 1e-8);
}

#[test]
fn bkm_inverse_is_completely_positive_bkm_map_is_not() {
    let alg = Algebra::full(2);
    let sigma = diag2(1.6, 0.4);
    let inv = Superop::from_action(alg.clone(), |h| bkm_inverse(&alg, &sigma, h).unwrap());
    assert!(inv.choi_min_eig() > -1e-11, "BKM inverse must be CP");
    // witness: the BKM map itself fails positivity preservation
    let fwd = Superop::from_action(alg.clone(), |h| bkm_map(&alg, &sigma, h).unwrap());
    let mut worst = 0.0f64;
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for _ in 0..200 {
        let g = linalg::random_complex_matrix(&mut rng, 2, 2);
        let psd = &g * g.adjoint();
        let img = fwd.apply(&psd);
        worst = worst.min(linalg::min_eigenvalue(&img));
    }
    assert!(worst < -1e-6, "expected a positivity violation witness, worst {worst}");
}

#[test]
fn relative_modular_basics() {
    let alg = Algebra::full(2);
    let mut rng = ChaCha12Rng::seed_from_u64(6);
    let a = linalg::random_complex_matrix(&mut rng, 2, 2);
    // sigma = rho = 1 -> identity
    let m = relative_modular(&alg.one(), &alg.one(), &a).unwrap();
    assert!((m - &a).norm() < 1e-14);
    // eigenvalue check in the eigenbasis of sigma
    let sigma = diag2(1.5, 0.5);
    let mut e12 = CMatrix::zeros(2, 2);
    e12[(0, 1)] = c(1.0);
    let m = relative_modular(&sigma, &sigma, &e12).unwrap();
    assert!((m - e12.scale(1.5 / 0.5)).norm() < 1e-13);
    // positivity of the induced superoperator on L2(tau)
    let rho = alg.random_state(&mut rng, 1e-2);
    let sigma2 = alg.random_state(&mut rng, 1e-2);
    for _ in 0..50 {
        let b = linalg::random_complex_matrix(&mut rng, 2, 2);
        let v = alg.inner_tau(&b, &relative_modular(&sigma2, &rho, &b).unwrap());
        assert!(v.re > -1e-12 && v.im.abs() < 1e-12);
    }
    // singular rho is rejected
    assert!(matches!(
        relative_modular(&sigma, &diag2(2.0, 0.0), &e12),
        Err(Error::SingularModularState)
    ));
}

#[test]
fn moreau_kms_positive_input_is_fixed() {
    let alg = Algebra::full(2);
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let sigma = alg.random_state(&mut rng, 1e-2);
    let g = linalg::random_complex_matrix(&mut rng, 2, 2);
    let x = &g * g.adjoint();
    let (xp, xm) = moreau_kms(&alg, &sigma, &x).unwrap();
    assert!((xp - &x).norm() < 1e-11 * x.norm().max(1.0));
    assert!(xm.norm() < 1e-11 * x.norm().max(1.0));
}

#[test]
fn moreau_kms_reduces_to_spectral_parts_for_tracial_sigma() {
    let alg = Algebra::full(3);
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let x = random_hermitian(&mut rng, 3);
    let (xp, xm) = moreau_kms(&alg, &alg.one(), &x).unwrap();
    let spectral_pos = linalg::positive_part(&x);
    assert!((&xp - &spectral_pos).norm() < 1e-12);
    assert!((&x - (xp - xm)).norm() < 1e-12);
}

#[test]
fn moreau_kms_properties_and_projection_oracle() {
    let alg = Algebra::full(2);
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    // non-commuting sigma: rotate a diagonal state
    let u = linalg::haar_unitary(&mut rng, 2);
    let sigma = &u * diag2(1.7, 0.3) * u.adjoint();
    let x = random_hermitian(&mut rng, 2);
    let (xp, xm) = moreau_kms(&alg, &sigma, &x).unwrap();
    // decomposition, positivity, KMS orthogonality
    assert!((&x - (&xp - &xm)).norm() < 1e-11);
    assert!(linalg::min_eigenvalue(&xp) > -1e-11);
    assert!(linalg::min_eigenvalue(&xm) > -1e-11);
    let ortho = s_inner(&alg, &sigma, 0.5, &xp, &xm).unwrap();
    assert!(ortho.norm() < 1e-12);

    // convex-projection oracle: projected gradient onto the PSD cone in the
    // KMS norm, minimizing |X - P|_KMS^2
    let sh = matrix_power_psd(&sigma, 0.5).unwrap();
    let lmax = op_norm_hermitian(&sigma);
    let step = 0.9 / lmax;
    let mut p = linalg::positive_part(&x);
    for _ in 0..20000 {
        let grad = &sh * (&x - &p) * &sh; // KMS gradient of the squared distance, up to -2
        p = linalg::positive_part(&(&p + grad.scale(step)));
    }
    assert!(
        (&p - &xp).norm() < 1e-6 * x.norm().max(1.0),
        "projected-gradient oracle disagrees: {:.3e}",
        (&p - &xp).norm()
    );

    // optimality against sampled PSD points
    let dist = |a: &CMatrix, b: &CMatrix| {
        s_inner(&alg, &sigma, 0.5, &(a - b), &(a - b)).unwrap().re.sqrt()
    };
    let best = dist(&x, &xp);
    for _ in 0..100 {
        let g = linalg::random_complex_matrix(&mut rng, 2, 2);
        let cand = &g * g.adjoint();
        assert!(best <= dist(&x, &cand) + 1e-10);
    }
}

#[test]
fn moreau_rejects_non_hermitian() {
    let alg = Algebra::full(2);
    let mut x = CMatrix::zeros(2, 2);
    x[(0, 1)] = c(1.0);
    assert!(matches!(
        moreau_kms(&alg, &alg.one(), &x),
        Err(Error::MoreauNotSelfAdjoint(_))
    ));
}

#[test]
fn kms_cone_self_duality_sampled() {
    // <X,A>_{1/2} >= 0 for all PSD A iff X is PSD
    let alg = Algebra::full(2);
    let mut rng = ChaCha12Rng::seed_from_u64(10);
    let u = linalg::haar_unitary(&mut rng, 2);
    let sigma = &u * diag2(1.4, 0.6) * u.adjoint();
    for _ in 0..40 {
        let x = random_hermitian(&mut rng, 2);
        let x_psd = linalg::min_eigenvalue(&x) >= -1e-12;
        let mut all_nonneg = true;
        for _ in 0..200 {
            let g = linalg::random_complex_matrix(&mut rng, 2, 2);
            let a = &g * g.adjoint();
            if s_inner(&alg, &sigma, 0.5, &x, &a).unwrap().re < -1e-10 {
                all_nonneg = false;
                break;
            }
        }
        if x_psd {
            assert!(all_nonneg);
        }
        if !all_nonneg {
            assert!(!x_psd);
        }
    }
}

#[test]
fn gns_symmetry_for_one_s_implies_all_s_and_modular_commutation() {
    // Alicki's lemma on randomly generated GNS-symmetric real maps
    let alg = Algebra::full(2);
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let sigma = alg.random_state(&mut rng, 1e-2);
    let g0 = gram(&alg, &sigma, InnerProductKind::Gns).unwrap();
    for _ in 0..5 {
        let raw = crate::linalg::RMatrix::from_fn(4, 4, |_, _| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
        });
        let m = project_symmetric(&g0, &raw);
        let sop = Superop { alg: alg.clone(), mat: m };
        assert!(sop.symmetry_residual(&sigma, InnerProductKind::Gns).unwrap() < 1e-9);
        for s in [0.25, 0.5, 0.75, 1.0] {
            let r = sop.symmetry_residual(&sigma, InnerProductKind::SFamily(s)).unwrap();
            assert!(r < 1e-9, "s = {s}, residual {r:.3e}");
        }
        // commutes with the modular superoperator
        let dm = Superop::from_action(alg.clone(), |h| {
            relative_modular(&sigma, &sigma, h).unwrap()
        });
        let comm = (&sop.mat * &dm.mat - &dm.mat * &sop.mat).norm() / dm.mat.norm();
        assert!(comm < 1e-9);
    }
}

#[test]
fn kms_tilde_of_identity() {
    let alg = Algebra::full(2);
    let p = Superop::identity(alg.clone());
    // tracial sigma: the construction is the identity
    let pt = kms_tilde_map(&alg, &alg.one(), &p).unwrap();
    assert!((&pt.mat - &p.mat).norm() < 1e-10);
    // general sigma: unital, CP, sigma-invariant, BKM-symmetric (the
    // identity is KMS-symmetric)
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    let sigma = alg.random_state(&mut rng, 1e-2);
    let pt = kms_tilde_map(&alg, &sigma, &p).unwrap();
    assert!(pt.unitality_residual() < 1e-10);
    assert!(pt.choi_min_eig() > -1e-10);
    assert!(pt.symmetry_residual(&sigma, InnerProductKind::Bkm).unwrap() < 1e-10);
    let s_coords = alg.coords_re(&sigma);
    assert!((pt.mat.transpose() * &s_coords - &s_coords).norm() < 1e-10);
}

#[test]
fn kms_tilde_rejects_non_unital() {
    let alg = Algebra::full(2);
    let sigma = diag2(1.2, 0.8);
    let p = Superop::from_action(alg.clone(), |h| h.scale(0.5));
    assert!(matches!(
        kms_tilde_map(&alg, &sigma, &p),
        Err(Error::NonUnitalMap(_))
    ));
}

#[test]
fn kms_tilde_witness_separates_bkm_from_gns() {
    let alg = Algebra::full(2);
    let sigma = diag2(1.5, 0.5);
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let p = random_kms_symmetric_map(&alg, &sigma, &mut rng, 1e-3).unwrap();
    // P is KMS symmetric, unital, sigma-invariant, CP, but not GNS symmetric
    assert!(p.symmetry_residual(&sigma, InnerProductKind::Kms).unwrap() < 1e-9);
    assert!(p.symmetry_residual(&sigma, InnerProductKind::Gns).unwrap() > 1e-3);
    assert!(p.unitality_residual() < 1e-9);
    assert!(p.choi_min_eig() > -1e-8);

    let pt = kms_tilde_map(&alg, &sigma, &p).unwrap();
    // tilde map is BKM symmetric, unital, sigma-invariant
    assert!(pt.symmetry_residual(&sigma, InnerProductKind::Bkm).unwrap() < 1e-9);
    assert!(pt.unitality_residual() < 1e-9);
    let s_coords = alg.coords_re(&sigma);
    let inv = (pt.mat.transpose() * &s_coords - &s_coords).norm();
    assert!(inv < 1e-9, "tilde map must leave sigma invariant, residual {inv:.3e}");
    // ... and does not commute with the modular operator
    let dm = Superop::from_action(alg.clone(), |h| relative_modular(&sigma, &sigma, h).unwrap());
    let comm = (&pt.mat * &dm.mat - &dm.mat * &pt.mat).norm() / dm.mat.norm();
    assert!(comm > 1e-4, "witness should not commute with Delta_sigma: {comm:.3e}");
}

#[test]
fn density_matrix_validation() {
    let alg = Algebra::full(2);
    assert!(DensityMatrix::new(alg.clone(), diag2(1.5, 0.5)).is_ok());
    // wrong trace
    assert!(DensityMatrix::new(alg.clone(), diag2(1.5, 1.5)).is_err());
    // not PSD
    assert!(DensityMatrix::new(alg.clone(), diag2(2.5, -0.5)).is_err());
    // not in the algebra (off-diagonal element for a diagonal algebra)
    let d = Algebra::diagonal(2);
    let mut m = diag2(1.0, 1.0);
    m[(0, 1)] = c(0.3);
    m[(1, 0)] = c(0.3);
    assert!(DensityMatrix::new(d, m).is_err());
}

#[test]
fn superop_adjoint_and_choi() {
    let alg = Algebra::full(2);
    let mut rng = ChaCha12Rng::seed_from_u64(14);
    let k = linalg::random_complex_matrix(&mut rng, 2, 2);
    let p = Superop::from_action(alg.clone(), |h| &k * h * k.adjoint());
    // adjoint_tau is the tau-adjoint
    let a = random_hermitian(&mut rng, 2);
    let b = random_hermitian(&mut rng, 2);
    let lhs = alg.inner_tau(&a, &p.apply(&b));
    let rhs = alg.inner_tau(&p.adjoint_tau().apply(&a), &b);
    assert!((lhs - rhs).norm() < 1e-12);
    // single-Kraus maps are CP
    assert!(p.choi_min_eig() > -1e-11);
    // Hamiltonian derivations i[X, .] are real but not CP
    let q = Superop::from_action(alg.clone(), |h| {
        commutator(&pauli_x(), h).map(|z| z * linalg::ci(1.0))
    });
    assert!(q.choi_min_eig() < -1e-3);
}

#[test]
fn random_state_is_valid_density() {
    let mut rng = ChaCha12Rng::seed_from_u64(15);
    for alg in [Algebra::full(3), Algebra::diagonal(4), Algebra::clifford(2)] {
        for _ in 0..5 {
            let rho = alg.random_state(&mut rng, 1e-4);
            assert!(DensityMatrix::new(alg.clone(), rho).is_ok());
        }
    }
}

// keep Arc import used in non-test builds of this module tree
#[allow(dead_code)]
fn _arc_used(a: Arc<Algebra>) -> usize {
    a.dim
}
