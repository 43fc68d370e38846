mod common;

use common::*;
use mobility_gwr::esda::{getis_ord_gstar, morans_i};
use mobility_gwr::gwr::local_condition_numbers;
use mobility_gwr::mgwr::{fit_mgwr, MgwrSettings};
use mobility_gwr::ols::{compute_vif, fit_ols};
use mobility_gwr::weights::{build_knn_weights, Bandwidth, KernelFamily, KernelSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = RandomInstance> {
    (any::<u64>(), 20usize..80, 1usize..5).prop_map(|(seed, n, p)| RandomInstance::new(seed, n, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn standardize_round_trips(inst in instance()) {
        let raw = inst.table();
        let z = raw.standardize().unwrap();
        let back = z.unstandardize();
        prop_assert!((back.y() - raw.y()).amax() <= 1e-9 * raw.y().amax().max(1.0));
        prop_assert!((back.x() - raw.x()).amax() <= 1e-9 * raw.x().amax().max(1.0));
        for col in z.x().column_iter() {
            let (m, s) = mobility_gwr::data::mean_std(col.as_slice());
            prop_assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        }
        let zz = z.standardize().unwrap();
        prop_assert!((zz.x() - z.x()).amax() < 1e-12);
        prop_assert!((zz.y() - z.y()).amax() < 1e-12);
        prop_assert!((zz.unstandardize().x() - raw.x()).amax() <= 1e-9 * raw.x().amax().max(1.0));
    }

    #[test]
    fn kernels_decrease_with_distance(d1 in 0.0f64..50.0, d2 in 0.0f64..50.0, b in 0.01f64..40.0) {
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        for family in [KernelFamily::Bisquare, KernelFamily::Gaussian] {
            let k = KernelSpec { family, bandwidth: Bandwidth::Fixed(b) };
            let (wn, wf) = (k.weight(near, b), k.weight(far, b));
            prop_assert!(wn >= wf);
            prop_assert!((0.0..=1.0).contains(&wn) && (0.0..=1.0).contains(&wf));
            prop_assert_eq!(k.weight(0.0, b), 1.0);
        }
    }

    #[test]
    fn moran_is_affine_invariant(inst in instance(), a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], c in -100.0f64..100.0) {
        let table = inst.table();
        let w = build_knn_weights(&table, 5).unwrap().row_standardized();
        let v: Vec<f64> = inst.y.clone();
        let moved: Vec<f64> = v.iter().map(|x| a * x + c).collect();
        let i0 = morans_i(&v, &w, 0, 0).unwrap().i;
        let i1 = morans_i(&moved, &w, 0, 0).unwrap().i;
        prop_assert!((i0 - i1).abs() < 1e-9, "{} vs {}", i0, i1);
    }

    #[test]
    fn ols_is_scale_equivariant(inst in instance(), c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let base = fit_ols(&inst.table()).unwrap();
        let y: Vec<f64> = inst.y.iter().map(|v| v * c).collect();
        let scaled_y = fit_ols(&table_from(&inst.coords, &inst.x, &y)).unwrap();
        for (a, b) in scaled_y.coefficients.iter().zip(&base.coefficients) {
            prop_assert!((a - c * b).abs() <= 1e-8 * (c * b).abs().max(1.0));
        }
        let mut x = inst.x.clone();
        x.column_mut(0).scale_mut(c);
        let scaled_x = fit_ols(&table_from(&inst.coords, &x, &inst.y)).unwrap();
        prop_assert!((scaled_x.coefficients[1] * c - base.coefficients[1]).abs() <= 1e-8 * base.coefficients[1].abs().max(1.0));
        prop_assert!((scaled_x.r_squared - base.r_squared).abs() < 1e-10);
    }

    #[test]
    fn vif_is_at_least_one(inst in instance()) {
        for v in compute_vif(&inst.table()).unwrap() {
            prop_assert!(v >= 1.0);
        }
    }

    #[test]
    fn row_standardization_keeps_zero_pattern(inst in instance(), k in 1usize..8) {
        let w = build_knn_weights(&inst.table(), k).unwrap();
        let r = w.row_standardized();
        for i in 0..w.n() {
            let before: Vec<usize> = w.row(i).iter().filter(|e| e.1 != 0.0).map(|e| e.0).collect();
            let after: Vec<usize> = r.row(i).iter().filter(|e| e.1 != 0.0).map(|e| e.0).collect();
            prop_assert_eq!(&before, &after);
            let s: f64 = r.row(i).iter().map(|e| e.1).sum();
            prop_assert!(before.is_empty() || (s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gstar_negation_mirrors(inst in instance()) {
        let w = build_knn_weights(&inst.table(), 6).unwrap().binary_with_self();
        let h = getis_ord_gstar(&inst.y, &w).unwrap();
        let neg: Vec<f64> = inst.y.iter().map(|v| -v).collect();
        let hn = getis_ord_gstar(&neg, &w).unwrap();
        for i in 0..inst.y.len() {
            prop_assert_eq!(hn.class[i], h.class[i].mirrored());
        }
    }

    #[test]
    fn local_condition_numbers_are_at_least_one(inst in instance(), k in 10usize..20) {
        for cn in local_condition_numbers(&inst.table(), &KernelSpec::adaptive_bisquare(k)).unwrap() {
            prop_assert!(cn >= 1.0 - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn mgwr_fitted_values_decompose_into_terms(seed in any::<u64>()) {
        let inst = RandomInstance::new(seed, 40, 2);
        let table = inst.table().standardize().unwrap();
        let m = fit_mgwr(&table, &MgwrSettings::default()).unwrap();
        let sums: DMatrix<f64> = DMatrix::from_fn(m.n(), 1, |i, _| m.term_contributions.row(i).sum());
        for i in 0..m.n() {
            prop_assert!((sums[(i, 0)] - m.fitted[i]).abs() < 1e-8);
            prop_assert!((m.fitted[i] + m.residuals[i] - table.y()[i]).abs() < 1e-10);
        }
        prop_assert!((m.enp.iter().sum::<f64>() - m.hat_trace).abs() < 1e-6);
    }
}
