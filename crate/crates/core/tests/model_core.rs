use approx::assert_abs_diff_eq;
use bilinear_lgm::model::*;
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use proptest::prelude::*;

fn reparam(alpha: Vector4<f64>, psi: Matrix4<f64>, b: DMatrix<f64>, theta: f64) -> ReparamParams {
    let c = b.ncols();
    ReparamParams {
        alpha_prime: alpha,
        psi_prime: psi,
        b_prime: b,
        mu_x: DVector::zeros(c),
        phi: DMatrix::identity(c, c),
        theta_eps: theta,
    }
}

#[test]
fn full_loadings_rows() {
    let l = build_loadings_full(&[4.0, 2.0, 3.0], 3.0, 0.8);
    let rows: Vec<Vec<f64>> = (0..3).map(|r| l.row(r).iter().copied().collect()).collect();
    assert_eq!(rows[0], vec![1.0, 1.0, 1.0, -1.6]);
    assert_eq!(rows[1], vec![1.0, -1.0, 1.0, 0.0]);
    assert_eq!(rows[2], vec![1.0, 0.0, 0.0, -0.8]);
}

#[test]
fn reduced_loadings_rows() {
    let l = build_loadings_reduced(&[3.0, 5.0, 1.0], 3.0);
    assert_eq!(l.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
    assert_eq!(l.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 2.0]);
    assert_eq!(l.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, -2.0, 2.0]);
}

#[test]
fn full_mean_hand_product() {
    let p = reparam(
        Vector4::new(87.5, -4.2, 0.8, 2.5),
        Matrix4::zeros(),
        DMatrix::zeros(4, 0),
        1.0,
    );
    let (mu, _) = model_moments_full(&p, &[1.5, 3.5], LikelihoodMode::Marginal, None).unwrap();
    assert_abs_diff_eq!(mu[0], 92.5, epsilon = 1e-12);
    assert_abs_diff_eq!(mu[1], 84.1, epsilon = 1e-12);
}

#[test]
fn zero_variance_factors() {
    let p = reparam(
        Vector4::new(1.0, 0.5, 0.1, 1.0),
        Matrix4::zeros(),
        DMatrix::zeros(4, 2),
        2.0,
    );
    let t = [0.0, 1.0, 2.0];
    let (mu, sigma) = model_moments_full(&p, &t, LikelihoodMode::Marginal, None).unwrap();
    assert_eq!(sigma, DMatrix::identity(3, 3) * 2.0);
    let expected = build_loadings_full(&t, 1.0, 0.1) * p.factor_intercepts();
    assert_abs_diff_eq!(mu, expected, epsilon = 1e-12);
}

#[test]
fn reduced_moments_examples() {
    let p = ReducedParams {
        alpha_prime: nalgebra::Vector3::new(10.0, 1.0, 0.5),
        gamma: 3.0,
        psi_prime: nalgebra::Matrix3::zeros(),
        b_prime: DMatrix::from_row_slice(3, 1, &[1.0, 0.5, -0.2]),
        mu_x: DVector::zeros(1),
        phi: DMatrix::zeros(1, 1),
        theta_eps: 1.0,
    };
    let (mu, sigma) = model_moments_reduced(&p, &[2.0, 4.0], LikelihoodMode::Marginal, None).unwrap();
    assert_abs_diff_eq!(mu, DVector::from_vec(vec![9.5, 11.5]), epsilon = 1e-12);
    assert_eq!(sigma, DMatrix::identity(2, 2));
    // a covariate shift moves the mean by Λ B Δx
    let (m1, _) = model_moments_reduced(&p, &[2.0, 4.0], LikelihoodMode::Conditional, Some(&[0.0])).unwrap();
    let (m2, _) = model_moments_reduced(&p, &[2.0, 4.0], LikelihoodMode::Conditional, Some(&[2.0])).unwrap();
    let shift = build_loadings_reduced(&[2.0, 4.0], 3.0) * &p.b_prime * DVector::from_vec(vec![2.0]);
    assert_abs_diff_eq!(m2 - m1, shift, epsilon = 1e-12);
}

#[test]
fn conditional_at_covariate_mean_matches_marginal_mean() {
    let mut p = reparam(
        Vector4::new(87.5, -4.2, 0.8, 4.5),
        Matrix4::identity(),
        DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 0.1, 0.2, 0.3, 0.0, 0.0, 0.1]),
        1.0,
    );
    p.mu_x = DVector::from_vec(vec![0.5, -1.0]);
    let t = [0.0, 2.0, 4.5, 7.0];
    let (mm, _) = model_moments_full(&p, &t, LikelihoodMode::Marginal, None).unwrap();
    let (mc, _) = model_moments_full(&p, &t, LikelihoodMode::Conditional, Some(&[0.5, -1.0])).unwrap();
    assert_abs_diff_eq!(mm, mc, epsilon = 1e-12);
}

#[test]
fn trajectory_values() {
    let f = GrowthFactors {
        eta0: 10.0,
        eta1: 2.0,
        eta2: -1.0,
        gamma: 3.0,
    };
    assert_eq!(predict_trajectory(&f, &[3.0, 5.0]), vec![16.0, 14.0]);
    let line = GrowthFactors { eta2: 2.0, ..f };
    let y = predict_trajectory(&line, &[0.0, 1.0, 2.0, 6.0]);
    assert_eq!(y, vec![10.0, 12.0, 14.0, 22.0]);
}

#[test]
fn dataset_rejects_bad_input() {
    let y = DMatrix::zeros(2, 3);
    let t = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
    assert!(matches!(
        LongitudinalDataset::new(y.clone(), t, DMatrix::zeros(2, 0)),
        Err(bilinear_lgm::LgmError::InvalidData(_))
    ));
    let t = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 0.0, 1.0, 2.0]);
    let mut bad = y.clone();
    bad[(0, 0)] = f64::NAN;
    assert!(LongitudinalDataset::new(bad, t.clone(), DMatrix::zeros(2, 0)).is_err());
    assert!(LongitudinalDataset::new(y, t, DMatrix::zeros(3, 0)).is_err());
}

fn psd4() -> impl Strategy<Value = Matrix4<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 16).prop_map(|v| {
        let a = Matrix4::from_iterator(v);
        a * a.transpose()
    })
}

proptest! {
    #[test]
    fn trajectory_is_continuous_at_knot(
        e0 in -50.0f64..50.0, e1 in -5.0f64..5.0, e2 in -5.0f64..5.0, g in -10.0f64..10.0
    ) {
        let f = GrowthFactors { eta0: e0, eta1: e1, eta2: e2, gamma: g };
        let at = predict_trajectory(&f, &[g])[0];
        let left = e0 + e1 * g;
        prop_assert!((at - left).abs() < 1e-12 * (1.0 + left.abs()));
    }

    #[test]
    fn loadings_reproduce_trajectory_when_knot_is_at_mean(
        e0 in -50.0f64..50.0, e1 in -5.0f64..5.0, e2 in -5.0f64..5.0, g in 1.0f64..8.0,
        ts in proptest::collection::vec(0.0f64..9.0, 1..8)
    ) {
        let f = GrowthFactors { eta0: e0, eta1: e1, eta2: e2, gamma: g };
        let r = f.to_reparam(g);
        prop_assert!(r.delta.abs() < 1e-12);
        let l = build_loadings_full(&ts, g, r.eta2p);
        let y = l * DVector::from_vec(vec![r.eta0p, r.eta1p, r.eta2p, r.delta]);
        for (k, &t) in ts.iter().enumerate() {
            if t != g {
                let expected = predict_trajectory(&f, &[t])[0];
                prop_assert!((y[k] - expected).abs() < 1e-10 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn full_loadings_truncate_to_reduced(
        g in -3.0f64..12.0, hd in -3.0f64..3.0,
        ts in proptest::collection::vec(0.0f64..9.0, 1..10)
    ) {
        let full = build_loadings_full(&ts, g, hd);
        let reduced = build_loadings_reduced(&ts, g);
        prop_assert_eq!(full.columns(0, 3).into_owned(), reduced);
    }

    #[test]
    fn moments_symmetric_and_marginal_dominates(
        psi in psd4(),
        b in proptest::collection::vec(-1.0f64..1.0, 8),
        x in proptest::collection::vec(-2.0f64..2.0, 2),
        theta in 0.1f64..3.0,
        ts in proptest::collection::vec(0.0f64..9.0, 2..8)
    ) {
        let p = reparam(Vector4::new(10.0, -1.0, 0.5, 4.0), psi, DMatrix::from_row_slice(4, 2, &b), theta);
        let (_, sm) = model_moments_full(&p, &ts, LikelihoodMode::Marginal, None).unwrap();
        let (_, sc) = model_moments_full(&p, &ts, LikelihoodMode::Conditional, Some(&x)).unwrap();
        prop_assert_eq!(&sm, &sm.transpose());
        prop_assert_eq!(&sc, &sc.transpose());
        // conditional covariance does not depend on x
        let (_, sc0) = model_moments_full(&p, &ts, LikelihoodMode::Conditional, Some(&[0.0, 0.0])).unwrap();
        prop_assert_eq!(&sc, &sc0);
        let diff = &sm - &sc;
        let eig = diff.symmetric_eigen();
        prop_assert!(eig.eigenvalues.min() > -1e-9);
    }
}
