//! Randomized properties of the spectral, moment and profile routines.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use isopara_core::moments::{invert_moments, jacobian_determinant, power_sums, vandermonde_jacobian, MomentSystem};
use isopara_core::profile::{Family, Interval, Profile};
use isopara_core::spectral::{cartan_sum, cartan_terms, frobenius_covariant, sym_eig, SymMatrix};

/// Sorted values with consecutive gaps of at least `gap`.
fn separated(m: usize, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    (-3.0..-1.0f64, prop::collection::vec(gap..gap + 1.0, m - 1)).prop_map(|(start, steps)| {
        let mut out = vec![start];
        for s in steps {
            let last = *out.last().unwrap();
            out.push(last + s);
        }
        out
    })
}

/// Orthogonal matrix from the QR factorization of a dense seed matrix.
fn orthogonal(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_filter_map("rank deficient", move |v| {
        let m = DMatrix::from_vec(n, n, v);
        let qr = m.qr();
        let r = qr.r();
        if (0..n).all(|i| r[(i, i)].abs() > 1e-3) {
            Some(qr.q())
        } else {
            None
        }
    })
}

fn spectrum_with_mults() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (1usize..=4).prop_flat_map(|m| (separated(m, 0.4), prop::collection::vec(1usize..=3, m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariant_projection_matches_eigendecomposition(
        (kappas, mults, q) in spectrum_with_mults().prop_flat_map(|(k, d)| {
            let n: usize = d.iter().sum();
            (Just(k), Just(d), orthogonal(n))
        })
    ) {
        let n = q.nrows();
        let diag: Vec<f64> = kappas.iter().zip(&mults).flat_map(|(&k, &d)| std::iter::repeat_n(k, d)).collect();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(diag)) * q.transpose();
        let a = SymMatrix::symmetrized(&a).unwrap();
        let dec = sym_eig(&a, 1e-6).unwrap();
        prop_assert_eq!(&dec.mults, &mults);
        for (i, &d) in mults.iter().enumerate() {
            let p = frobenius_covariant(&a, &dec.kappas, i, 1e-6).unwrap();
            let diff = p.matrix().as_matrix() - dec.projections[i].as_matrix();
            prop_assert!(diff.norm() <= 1e-9 * n as f64, "projection {} differs by {}", i, diff.norm());
            prop_assert_eq!(p.rank(), d);
        }
        prop_assert!((dec.reconstruct() - a.as_matrix()).norm() <= 1e-10 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn cartan_terms_are_negative_at_the_smallest_curvature(
        kappas in prop::collection::vec((0.01..10.0f64, any::<bool>()), 2..6)
            .prop_map(|v| v.into_iter().map(|(m, s)| if s { m } else { -m }).collect::<Vec<_>>())
            .prop_filter("distinct", |k| {
                k.iter().enumerate().all(|(i, a)| k.iter().skip(i + 1).all(|b| (a - b).abs() > 1e-6))
            }),
        d in prop::collection::vec(1usize..5, 6),
    ) {
        let m = kappas.len();
        let mults = &d[..m];
        let i = (0..m).min_by(|&a, &b| kappas[a].abs().total_cmp(&kappas[b].abs())).unwrap();
        let terms = cartan_terms(&kappas, i).unwrap();
        prop_assert_eq!(terms.len(), m - 1);
        prop_assert!(terms.iter().all(|&t| t < 0.0));
        prop_assert!(cartan_sum(&kappas, mults, i).unwrap() != 0.0);
    }

    #[test]
    fn power_sums_invert((kappas, mults) in spectrum_with_mults(), jitter in prop::collection::vec(-0.05..0.05f64, 4)) {
        let m = kappas.len();
        let moments = power_sums(&kappas, &mults, m).unwrap();
        let scale = moments.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let guess: Vec<f64> = kappas.iter().zip(&jitter).map(|(k, j)| k + j).collect();
        let sys = MomentSystem::new(mults, moments).unwrap();
        let y = invert_moments(&sys, &guess, 1e-13 * scale).unwrap();
        for (a, b) in y.iter().zip(&kappas) {
            prop_assert!((a - b).abs() <= 1e-9, "{:?} vs {:?}", y, kappas);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences((kappas, mults) in spectrum_with_mults()) {
        let m = kappas.len();
        let (jac, _) = vandermonde_jacobian(&kappas, &mults).unwrap();
        let h = 1e-6;
        for j in 0..m {
            let mut up = kappas.clone();
            let mut dn = kappas.clone();
            up[j] += h;
            dn[j] -= h;
            let cu = power_sums(&up, &mults, m).unwrap();
            let cd = power_sums(&dn, &mults, m).unwrap();
            for k in 0..m {
                let fd = (cu[k] - cd[k]) / (2.0 * h);
                prop_assert!((fd - jac[(k, j)]).abs() <= 1e-5 * (1.0 + jac[(k, j)].abs()));
            }
        }
    }

    #[test]
    fn closed_form_determinant_matches_lu((kappas, mults) in spectrum_with_mults()) {
        let (jac, det) = vandermonde_jacobian(&kappas, &mults).unwrap();
        let lu = jac.lu().determinant();
        prop_assert!(((det - lu) / lu).abs() <= 1e-10);
        prop_assert_eq!(det, jacobian_determinant(&kappas, &mults));
    }

    #[test]
    fn power_profile_inverse_round_trips(
        a in 0.5..2.0f64,
        p in prop_oneof![-1.5..1.5f64, 0.999..1.001f64],
        c0 in 0.8..2.0f64,
        t in 0.3..4.0f64,
    ) {
        let profile = Profile::new(Family::Power { a, p }, Interval::positive(), c0).unwrap();
        let s = profile.primitive(t).unwrap();
        let back = profile.inverse_primitive(s).unwrap();
        prop_assert!((back - t).abs() <= 1e-13 * t.max(1.0));
        let quad = profile.primitive_by_quadrature(t).unwrap();
        prop_assert!((quad - s).abs() <= 1e-8 * (1.0 + s.abs()));
    }
}
