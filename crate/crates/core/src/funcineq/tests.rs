use super::*;
use crate::diffstruct::builders::*;
use crate::linalg::c;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn two_point_chain() -> DifferentialStructure {
    let pi = vec![0.5, 0.5];
    let mut q = crate::linalg::RMatrix::zeros(2, 2);
    q[(0, 1)] = 1.0;
    q[(1, 0)] = 1.0;
    build_markov_graph(&q, &pi).unwrap()
}

#[test]
fn poincare_constant_exact_values() {
    // depolarizing: L has eigenvalues {0, -gamma}, so the gap is gamma
    for gamma in [0.5, 1.0, 2.3] {
        let ds = build_depolarizing(gamma, 2).unwrap();
        let theta = ThetaAssignment::transport_default(&ds);
        let p = poincare_constant(&ds, &theta).unwrap();
        assert!((p - gamma).abs() < 1e-10, "gamma {gamma}: got {p}");
    }
    // symmetric two-point chain with unit rates: gap 2
    let ds = two_point_chain();
    let theta = ThetaAssignment::transport_default(&ds);
    let p = poincare_constant(&ds, &theta).unwrap();
    assert!((p - 2.0).abs() < 1e-10, "two-point gap: {p}");
    // cross-check against the generator spectrum
    let spec = ds.generator_spectrum();
    let gap = spec.iter().cloned().map(|v| -v).filter(|v| *v > 1e-9).fold(f64::INFINITY, f64::min);
    assert!((p - gap).abs() < 1e-10);
}

#[test]
fn mlsi_estimate_with_decay_fit() {
    let gamma = 1.0;
    let ds = build_depolarizing(gamma, 2).unwrap();
    let theta = ThetaAssignment::transport_default(&ds);
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let est = mlsi_constant(&ds, &theta, 150, &mut rng).unwrap();
    // Ric >= gamma/2 implies MLSI(gamma/2); the sampled infimum lies
    // between gamma/2 and the Poincare cap
    let p = poincare_constant(&ds, &theta).unwrap();
    assert!(
        est.lambda_hat >= 0.5 * gamma - 1e-4 && est.lambda_hat <= p + 1e-6,
        "MLSI estimate {} outside [gamma/2, P]",
        est.lambda_hat
    );
    // trajectory decay at least 2*lambda-hat (the fit folds trajectory
    // states back into the infimum)
    assert!(
        est.decay_rate >= 2.0 * est.lambda_hat - 1e-4,
        "decay rate {} vs 2 lambda {}",
        est.decay_rate,
        2.0 * est.lambda_hat
    );
    // non-ergodic structures are rejected
    let pi = vec![0.25, 0.25, 0.25, 0.25];
    let mut q = crate::linalg::RMatrix::zeros(4, 4);
    q[(0, 1)] = 1.0;
    q[(1, 0)] = 1.0;
    q[(2, 3)] = 1.0;
    q[(3, 2)] = 1.0;
    let disc = build_markov_graph(&q, &pi).unwrap();
    let theta_d = ThetaAssignment::transport_default(&disc);
    assert!(matches!(
        mlsi_constant(&disc, &theta_d, 5, &mut rng),
        Err(Error::RequiresErgodicity)
    ));
}

#[test]
fn talagrand_t1_and_hwi_hold_at_estimated_constants() {
    let ds = two_point_chain();
    let theta = ThetaAssignment::transport_default(&ds);
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let opts = SolverOptions {
        grid_n: 16,
        refinement_gap: false,
        ..Default::default()
    };
    let est = mlsi_constant(&ds, &theta, 120, &mut rng).unwrap();
    let mut rng2 = ChaCha12Rng::seed_from_u64(3);
    for _ in 0..15 {
        let rho = ds.algebra.random_state(&mut rng2, 1e-4);
        let tal = talagrand_check(&ds, &theta, est.lambda_hat, &rho, &opts).unwrap();
        assert!(tal >= -1e-3, "Talagrand residual {tal:.3e}");
        let t1 = t1_check(&ds, est.lambda_hat, &rho).unwrap();
        assert!(t1 >= -1e-6, "T1 residual {t1:.3e}");
    }
    // HWI at kappa = ricci estimate; rho = sigma degenerates to 0 <= 0
    let lam = crate::entropyflow::ricci_scan(&ds, &theta, 60, true, &mut rng)
        .unwrap()
        .lambda_hat;
    for _ in 0..10 {
        let rho = ds.algebra.random_state(&mut rng2, 1e-4);
        let r = hwi_check(&ds, &theta, lam, &rho, &opts).unwrap();
        assert!(r >= -1e-3, "HWI residual {r:.3e}");
    }
    // inflated kappa: violation found
    let mut violated = false;
    for _ in 0..40 {
        let rho = ds.algebra.random_state(&mut rng2, 1e-4);
        if hwi_check(&ds, &theta, 10.0 * lam, &rho, &opts).unwrap() < -1e-6 {
            violated = true;
            break;
        }
    }
    assert!(violated, "10x kappa should break HWI");
    // invalid lambda is rejected
    let rho = ds.algebra.random_state(&mut rng2, 1e-4);
    assert!(talagrand_check(&ds, &theta, -1.0, &rho, &opts).is_err());
    assert!(t1_check(&ds, 0.0, &rho).is_err());
}

#[test]
fn chain_report_is_consistent() {
    let ds = build_depolarizing(1.0, 2).unwrap();
    let theta = ThetaAssignment::transport_default(&ds);
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let opts = SolverOptions {
        grid_n: 12,
        refinement_gap: false,
        max_iter: 1500,
        ..Default::default()
    };
    let report = inequality_report(&ds, &theta, "depolarizing-m2", 10, &opts, &mut rng).unwrap();
    assert!(report.chain_consistent, "{report:?}");
    assert!(report.constants.ric <= report.constants.mlsi + 1e-6);
    assert!(report.constants.mlsi <= report.constants.poincare + 1e-6);
    assert!(report.worst_residuals.talagrand > -1e-3);
    assert!(report.worst_residuals.t1 > -1e-6);
    assert!(report.worst_residuals.hwi > -1e-3);
    // JSON-serializable
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("poincare"));
}
