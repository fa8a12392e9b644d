mod common;

use common::*;
use kernel_tsne::kernels::*;
use kernel_tsne::Error;
use ndarray::{array, Array2};
use proptest::prelude::*;

#[test]
fn linear_kernel_distances_match_direct_subtraction() {
    for seed in 0..10 {
        let x = normal_matrix(30, 7, seed) * 3.0;
        let d = kernel_distance_matrix(&KernelSpec::Linear, x.view()).unwrap();
        assert!(max_abs_diff(&d.0, &naive_sq_distances(x.view())) <= 1e-12 * 200.0);
    }
}

#[test]
fn linear_kernel_distances_within_1e12_at_unit_scale() {
    let x = uniform_matrix(25, 4, -0.5, 0.5, 3);
    let d = kernel_distance_matrix(&KernelSpec::Linear, x.view()).unwrap();
    assert!(max_abs_diff(&d.0, &naive_sq_distances(x.view())) <= 1e-12);
}

#[test]
fn rbf_gram_matches_naive_evaluation() {
    let x = normal_matrix(20, 3, 4);
    let g = gram_matrix(&KernelSpec::rbf(0.7).unwrap(), x.view()).unwrap();
    assert!(max_abs_diff(&g.0, &naive_rbf_gram(0.7, x.view())) <= 1e-15);
}

#[test]
fn tiny_gamma_flattens_the_kernel() {
    let x = array![[1.0, 0.0], [0.0, 1.0], [-0.6, 0.8]];
    let g = gram_matrix(&KernelSpec::rbf(1e-12).unwrap(), x.view()).unwrap();
    assert!(g.0.iter().all(|v| (v - 1.0).abs() <= 1e-9));
}

#[test]
fn non_finite_data_is_rejected() {
    let x = array![[1.0, f64::NAN], [0.0, 1.0]];
    assert!(matches!(gram_matrix(&KernelSpec::Linear, x.view()), Err(Error::Input(_))));
    let x = array![[1.0, 2.0]];
    assert!(gram_matrix(&KernelSpec::Linear, x.view()).is_err());
}

#[test]
fn worker_count_does_not_change_results() {
    let x = normal_matrix(80, 6, 5);
    let spec = KernelSpec::rbf(0.3).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| (kernel_distance_matrix(&spec, x.view()).unwrap(), nystrom_gram(&spec, x.view(), 30, 1).unwrap()))
    };
    let (d1, n1) = run(1);
    let (d4, n4) = run(4);
    assert_eq!(d1, d4);
    assert_eq!(n1, n4);
}

#[test]
fn nystrom_single_landmark_on_identical_rows_is_all_ones() {
    let x = Array2::from_elem((6, 3), 0.25);
    let g = nystrom_gram(&KernelSpec::rbf(2.0).unwrap(), x.view(), 1, 9).unwrap();
    assert!(g.0.iter().all(|v| (v - 1.0).abs() <= 1e-12));
}

#[test]
fn nystrom_landmark_range_is_checked() {
    let x = normal_matrix(5, 2, 0);
    let spec = KernelSpec::rbf(1.0).unwrap();
    assert!(matches!(nystrom_gram(&spec, x.view(), 0, 0), Err(Error::Parameter(_))));
    assert!(matches!(nystrom_gram(&spec, x.view(), 6, 0), Err(Error::Parameter(_))));
}

#[test]
fn nystrom_is_symmetric_psd() {
    let x = normal_matrix(40, 3, 6);
    let g = nystrom_gram(&KernelSpec::rbf(0.5).unwrap(), x.view(), 10, 2).unwrap();
    assert_eq!(g.0, g.0.t());
    let m = nalgebra::DMatrix::from_fn(40, 40, |i, j| g.0[[i, j]]);
    let smallest = m.symmetric_eigenvalues().min();
    assert!(smallest > -1e-10, "{smallest}");
}

#[test]
fn rff_self_inner_product_bounded_by_two() {
    let x = normal_matrix(30, 4, 7);
    for r in [1, 3, 17, 256] {
        let z = rff_features(&KernelSpec::rbf(1.0).unwrap(), x.view(), r, 1).unwrap();
        let g = feature_gram(z.view());
        assert!((0..30).all(|i| g.0[[i, i]] <= 2.0 + 1e-12));
    }
}

#[test]
fn rff_single_feature_is_rank_one() {
    let x = normal_matrix(10, 3, 8);
    let z = rff_features(&KernelSpec::rbf(1.0).unwrap(), x.view(), 1, 4).unwrap();
    let g = feature_gram(z.view()).0;
    // every 2×2 minor of a rank-1 matrix vanishes
    for (i, j) in [(0, 1), (2, 5), (3, 9)] {
        let minor = g[[i, i]] * g[[j, j]] - g[[i, j]] * g[[j, i]];
        assert!(minor.abs() < 1e-12);
    }
}

#[test]
fn rff_requires_rbf() {
    let x = normal_matrix(4, 2, 0);
    assert!(matches!(rff_features(&KernelSpec::Linear, x.view(), 8, 0), Err(Error::UnsupportedKernel(_))));
}

#[test]
fn analytic_pair_gradient_matches_fd_on_100_pairs() {
    for seed in 0..100u64 {
        let pair = uniform_matrix(2, 3, -1.0, 1.0, seed);
        let gamma = 0.1 + 1.9 * (seed as f64 / 100.0);
        for spec in [KernelSpec::rbf(gamma).unwrap(), KernelSpec::Linear] {
            let a = kernel_pair_gradient(&spec, pair.row(0), pair.row(1)).unwrap();
            let f = kernel_pair_gradient_fd(&spec, pair.row(0), pair.row(1), DEFAULT_FD_STEP).unwrap();
            let err = (&a - &f).mapv(|v| v * v).sum().sqrt() / a.mapv(|v| v * v).sum().sqrt();
            assert!(err < 1e-6, "seed {seed} {spec:?}: {err}");
        }
    }
}

#[test]
fn linear_fd_gradient_is_exact_for_quadratics() {
    let pair = normal_matrix(2, 4, 11) * 5.0;
    let f = kernel_pair_gradient_fd(&KernelSpec::Linear, pair.row(0), pair.row(1), 1e-5).unwrap();
    let expected = (&pair.row(0) - &pair.row(1)) * 2.0;
    assert!(f.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-8));
}

#[test]
fn fd_gradient_vanishes_at_coincident_points() {
    let y = array![0.3, -1.2];
    let f = kernel_pair_gradient_fd(&KernelSpec::rbf(1.0).unwrap(), y.view(), y.view(), 1e-5).unwrap();
    assert!(f.iter().all(|v| v.abs() <= 1e-8));
}

#[test]
fn approximations_feed_distance_matrices() {
    let x = normal_matrix(30, 3, 12);
    let spec = KernelSpec::rbf(0.5).unwrap();
    let exact = approx_kernel_distance_matrix(&spec, x.view(), &KernelApprox::Exact).unwrap();
    assert_eq!(exact, kernel_distance_matrix(&spec, x.view()).unwrap());
    let full = approx_kernel_distance_matrix(&spec, x.view(), &KernelApprox::Nystrom { landmarks: 30, seed: 0 }).unwrap();
    assert!(max_abs_diff(&full.0, &exact.0) < 1e-8);
    let rff = approx_kernel_distance_matrix(&spec, x.view(), &KernelApprox::Rff { features: 2048, seed: 0 }).unwrap();
    assert!(rff.0.iter().all(|&v| v >= 0.0));
    assert!((0..30).all(|i| rff.0[[i, i]] == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rbf_gram_and_distance_invariants(seed in 0u64..10_000, n in 2usize..25, d in 1usize..6, gamma in 1e-3f64..10.0) {
        let x = normal_matrix(n, d, seed);
        let spec = KernelSpec::rbf(gamma).unwrap();
        let g = gram_matrix(&spec, x.view()).unwrap();
        prop_assert_eq!(&g.0, &g.0.t());
        prop_assert!((0..n).all(|i| g.0[[i, i]] == 1.0));
        prop_assert!(g.0.iter().all(|&v| v >= 0.0 && v <= 1.0));
        let dm = distances_from_gram(&g);
        prop_assert_eq!(&dm.0, &dm.0.t());
        prop_assert!((0..n).all(|i| dm.0[[i, i]] == 0.0));
        prop_assert!(dm.0.iter().all(|&v| (0.0..=2.0).contains(&v)));
    }
}
