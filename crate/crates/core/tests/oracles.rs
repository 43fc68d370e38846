mod common;

use common::*;
use mobility_gwr::esda::{getis_ord_gstar, morans_i};
use mobility_gwr::gwr::{fit_gwr, GwrProblem, GwrSettings};
use mobility_gwr::mgwr::{fit_mgwr, summarize_mgwr, MgwrSettings};
use mobility_gwr::synth::{generate, oracle, Surface, SyntheticScenario};
use mobility_gwr::weights::{
    build_contiguity_weights, build_knn_weights, kernel_weights_at, Bandwidth, Contiguity, DistanceMatrix, KernelSpec,
};

fn neighbor_sets(w: &mobility_gwr::SpatialWeights) -> Vec<Vec<usize>> {
    (0..w.n())
        .map(|i| {
            let mut v: Vec<usize> = w.row(i).iter().filter(|e| e.0 != i).map(|e| e.0).collect();
            v.sort();
            v
        })
        .collect()
}

#[test]
fn queen_center_of_three_by_three_has_eight_neighbors() {
    let table = grid_table(3, 3, &[0.0; 9]);
    let queen = build_contiguity_weights(&table, Contiguity::Queen).unwrap();
    let rook = build_contiguity_weights(&table, Contiguity::Rook).unwrap();
    assert_eq!(queen.cardinalities()[4], 8);
    assert_eq!(rook.cardinalities()[4], 4);
    assert_eq!(queen.cardinalities()[0], 3);
    assert_eq!(rook.cardinalities()[0], 2);
}

#[test]
fn contiguity_matches_lattice_oracle() {
    let table = grid_table(5, 7, &[0.0; 35]);
    for (rule, queen) in [(Contiguity::Queen, true), (Contiguity::Rook, false)] {
        let w = build_contiguity_weights(&table, rule).unwrap();
        let mut expected = oracle::grid_adjacency(5, 7, queen);
        for v in expected.iter_mut() {
            v.sort();
        }
        assert_eq!(neighbor_sets(&w), expected);
    }
}

#[test]
fn checkerboard_moran_matches_direct_formula() {
    let values: Vec<f64> = (0..16).map(|k| if (k / 4 + k % 4) % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let table = grid_table(4, 4, &values);
    let w = build_contiguity_weights(&table, Contiguity::Rook).unwrap().row_standardized();
    let engine = morans_i(&values, &w, 0, 0).unwrap().i;
    let dense = oracle::dense_from_neighbors(&oracle::grid_adjacency(4, 4, false), true);
    let direct = oracle::moran_direct(&values, &dense);
    assert!((engine + 1.0).abs() < 1e-12);
    assert!((engine - direct).abs() < 1e-12);
}

#[test]
fn moran_matches_direct_formula_on_knn_weights() {
    for seed in 0..5 {
        let inst = RandomInstance::new(seed, 60, 1);
        let w = build_knn_weights(&inst.table(), 6).unwrap().row_standardized();
        let engine = morans_i(&inst.y, &w, 0, 0).unwrap().i;
        let direct = oracle::moran_direct(&inst.y, &w.to_dense());
        assert!((engine - direct).abs() < 1e-12, "{engine} vs {direct}");
    }
}

#[test]
fn gstar_matches_direct_formula_on_hot_block() {
    let values = hot_block_values();
    let table = grid_table(9, 9, &values);
    let w = build_contiguity_weights(&table, Contiguity::Queen).unwrap().binary_with_self();
    let engine = getis_ord_gstar(&values, &w).unwrap();
    let mut nb = oracle::grid_adjacency(9, 9, true);
    for (i, v) in nb.iter_mut().enumerate() {
        v.push(i);
    }
    let direct = oracle::gstar_direct(&values, &oracle::dense_from_neighbors(&nb, false));
    for (a, b) in engine.z.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    assert!(engine.z[40] > 2.576);
}

#[test]
fn knn_rows_sum_to_one() {
    let inst = RandomInstance::new(3, 50, 1);
    let w = build_knn_weights(&inst.table(), 5).unwrap();
    assert!(w.cardinalities().iter().all(|&c| c == 5));
    let r = w.row_standardized();
    for row in r.rows() {
        let s: f64 = row.iter().map(|e| e.1).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gwr_matches_dense_local_oracle() {
    for (seed, k) in [(1u64, 20usize), (2, 35), (3, 60)] {
        let inst = RandomInstance::new(seed, 80, 3);
        let model = fit_gwr(&inst.table(), &KernelSpec::adaptive_bisquare(k)).unwrap();
        let rows = inst.rows();
        for i in (0..80).step_by(7) {
            let (beta, s_ii) = oracle::gwr_local(&rows, &inst.y, &inst.coords, i, k).unwrap();
            for (j, b) in beta.iter().enumerate() {
                assert!((model.local_coefficients[(i, j)] - b).abs() < 1e-8 * b.abs().max(1.0));
            }
            assert!((model.influence[i] - s_ii).abs() < 1e-8);
        }
    }
}

#[test]
fn local_fit_matches_brute_force_wls() {
    let inst = RandomInstance::new(9, 12, 2);
    let table = inst.table();
    let spec = KernelSpec::fixed_gaussian(3.0);
    let distances = DistanceMatrix::from_table(&table);
    let design = oracle::with_intercept(&inst.rows());
    let problem = GwrProblem::new(&table);
    for i in 0..12 {
        let w = kernel_weights_at(i, &spec, &distances).unwrap();
        let expected = oracle::brute_force_wls(&design, &w, &inst.y).unwrap();
        let fit = problem.fit_at(i, &spec).unwrap();
        for (a, b) in fit.beta.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn condition_numbers_match_jacobi_svd() {
    let inst = RandomInstance::new(21, 70, 4);
    let problem = GwrProblem::new(&inst.table());
    let spec = KernelSpec::adaptive_bisquare(25);
    let cn = problem.condition_numbers(&spec).unwrap();
    let design = oracle::with_intercept(&inst.rows());
    for (i, c) in cn.iter().enumerate() {
        let w = oracle::adaptive_bisquare_weights(&inst.coords, i, 25);
        let expected = oracle::local_condition_number(&design, &w);
        assert!((c - expected).abs() < 1e-6 * expected, "{c} vs {expected}");
    }
}

#[test]
fn sinusoidal_surface_is_recovered() {
    for seed in 0..10 {
        let scenario = SyntheticScenario::grid(
            20,
            20,
            Surface::Constant { value: 0.5 },
            vec![Surface::Sinusoidal { wavelength: 20.0, amplitude: 1.0, offset: 0.0 }],
            0.1,
            seed,
        );
        let data = generate(&scenario).unwrap();
        let model = GwrProblem::new(&data.table).calibrate(&GwrSettings::default()).unwrap();
        let n = data.table.n();
        let rmse = ((0..n)
            .map(|i| (model.local_coefficients[(i, 1)] - data.truth[(i, 1)]).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rmse < 0.15, "seed {seed}: RMSE {rmse}");
    }
}

fn zero_noise_global() -> mobility_gwr::ObservationTable {
    let scenario = SyntheticScenario::grid(
        8,
        8,
        Surface::Constant { value: 1.0 },
        vec![Surface::Constant { value: 0.7 }, Surface::Constant { value: -0.5 }],
        0.0,
        17,
    );
    generate(&scenario).unwrap().table.standardize().unwrap()
}

#[test]
fn mgwr_with_equal_bandwidths_matches_gwr() {
    let table = zero_noise_global();
    let bw = Bandwidth::Adaptive(30);
    let gwr = fit_gwr(&table, &KernelSpec::adaptive_bisquare(30)).unwrap();
    let settings = MgwrSettings {
        init_bandwidth: Some(bw),
        fixed_bandwidths: Some(vec![bw; 3]),
        max_iter: 1,
        ..Default::default()
    };
    let m = fit_mgwr(&table, &settings).unwrap();
    let n = table.n() as f64;
    let rms = (m.fitted.iter().zip(&gwr.fitted).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
    assert!(rms < 1e-4, "RMS {rms}");
}

#[test]
fn intercept_at_full_bandwidth_is_constant_on_exact_data() {
    let scenario = SyntheticScenario::grid(
        8,
        8,
        Surface::Constant { value: 0.4 },
        vec![Surface::Constant { value: 0.7 }, Surface::Constant { value: -0.2 }],
        0.0,
        5,
    );
    let table = generate(&scenario).unwrap().table.standardize().unwrap();
    let n = table.n();
    let settings = MgwrSettings {
        fixed_bandwidths: Some(vec![Bandwidth::Adaptive(n), Bandwidth::Adaptive(20), Bandwidth::Adaptive(40)]),
        ..Default::default()
    };
    let summary = summarize_mgwr(&fit_mgwr(&table, &settings).unwrap());
    let t = &summary.terms[0];
    assert_eq!(t.bandwidth, n as f64);
    assert!((t.max - t.min).abs() < 1e-6 && (t.median - t.min).abs() < 1e-6, "{t:?}");
    for t in &summary.terms {
        assert!(t.std < 1e-6, "{t:?}");
    }
}
