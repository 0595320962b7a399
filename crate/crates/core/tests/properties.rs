use hiercode_core::codec::{
    decode_layer, decode_plain, decode_sumrate, encode_hier, encode_plain, encode_sumrate,
    CompletedResult,
};
use hiercode_core::matrix::{interpolate_matrix_poly, interpolation_weights};
use hiercode_core::optimizer::profile_objective;
use hiercode_core::runtime::{
    expected_finishing_time, hier_finishing_time, sample_worker_times, sumrate_finishing_time,
    WorkerTimeline,
};
use hiercode_core::verify::partition_covers;
use hiercode_core::*;
use num_rational::BigRational;
use proptest::prelude::*;

fn small_int_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    Matrix::from_fn(rows, cols, |_, _| {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 33) % 9) as f64 - 4.0
    })
}

fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut s = seed ^ 0x5851f42d4c957f2d;
    Matrix::from_fn(rows, cols, |_, _| {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    })
}

fn naive_product(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

fn profile_strategy(max_layers: usize, max_k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_k, 1..=max_layers).prop_map(|mut v| {
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mat_mul_matches_triple_loop(r in 1usize..12, k in 1usize..12, c in 1usize..12, seed in any::<u64>()) {
        let a = uniform_matrix(r, k, seed);
        let b = uniform_matrix(k, c, seed.wrapping_add(1));
        let got = mat_mul(&a, &b).unwrap();
        prop_assert!(got.relative_error(&naive_product(&a, &b)).unwrap() <= 1e-12);
    }

    #[test]
    fn float_round_trip_chebyshev(k in 1usize..=16, seed in any::<u64>()) {
        let coeffs: Vec<Matrix> = (0..k).map(|i| uniform_matrix(2, 3, seed.wrapping_add(i as u64))).collect();
        let points = EvalPointSet::chebyshev(k);
        let evals: Vec<Matrix> = points
            .as_slice()
            .iter()
            .map(|&x| {
                let mut acc = Matrix::zeros(2, 3);
                for (i, c) in coeffs.iter().enumerate() {
                    acc.add_scaled(&x.powi(i as i32), c).unwrap();
                }
                acc
            })
            .collect();
        let pairs: Vec<(f64, &Matrix)> = points.as_slice().iter().copied().zip(&evals).collect();
        let back = interpolate_matrix_poly(&pairs, k).unwrap();
        for (got, want) in back.iter().zip(&coeffs) {
            prop_assert!(got.sub(want).unwrap().frobenius_norm() <= 1e-8 * want.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn weights_follow_point_permutation(n in 2usize..7, shift in 1usize..6) {
        let pts: Vec<BigRational> = (1..=n as i64).map(<BigRational as Scalar>::from_i64).collect();
        let perm: Vec<usize> = (0..n).map(|s| (s + shift) % n).collect();
        let permuted: Vec<BigRational> = perm.iter().map(|&s| pts[s].clone()).collect();
        let w = interpolation_weights(&pts).unwrap();
        let wp = interpolation_weights(&permuted).unwrap();
        for m in 0..n {
            for (s, &src) in perm.iter().enumerate() {
                prop_assert_eq!(&wp[m][s], &w[m][src]);
            }
        }
    }

    #[test]
    fn tile_plan_partitions_product(
        profile in profile_strategy(4, 6),
        n_x in 6usize..40,
        extra in 0usize..30,
    ) {
        let p = Profile::new(profile).unwrap();
        let n_y = p.k_sum() + extra;
        let grids = choose_grids(&p, n_x, 5, n_y).unwrap();
        let plan = build_tile_plan(n_x, 5, n_y, &p, &grids).unwrap();
        prop_assert!(partition_covers(&plan));
        // information tiles stay within one row and one column of the ideal
        let unit = n_y / p.k_sum();
        for layer in &plan.layers {
            let ideal_r = n_x as f64 / layer.grid.m_x as f64;
            for rc in &layer.row_chunks {
                prop_assert!((rc.len() as f64 - ideal_r).abs() < 1.0);
            }
            let ideal_c = (unit * layer.threshold) as f64 / layer.grid.m_y as f64;
            for cc in &layer.col_chunks {
                prop_assert!((cc.len() as f64 - ideal_c).abs() < 1.0);
            }
        }
    }

    #[test]
    fn uncoded_partition_reconstructs_product(profile in profile_strategy(3, 4), seed in any::<u64>()) {
        let p = Profile::new(profile).unwrap();
        let (n_x, n_z, n_y) = (9, 4, p.k_sum() * 2 + 3);
        let a = small_int_matrix(n_x, n_z, seed);
        let b = small_int_matrix(n_z, n_y, seed ^ 1);
        let plan = build_tile_plan(n_x, n_z, n_y, &p, &choose_grids(&p, n_x, n_z, n_y).unwrap()).unwrap();
        let mut out = Matrix::zeros(n_x, n_y);
        for layer in &plan.layers {
            for rc in &layer.row_chunks {
                for cc in &layer.col_chunks {
                    let tile = mat_mul(
                        &a.slice_block(rc.clone(), 0..n_z).unwrap(),
                        &b.slice_block(0..n_z, cc.clone()).unwrap(),
                    ).unwrap();
                    out.place_block(&tile, rc.start, cc.start).unwrap();
                }
            }
        }
        if plan.has_residual() {
            let res = mat_mul(&a, &b.slice_block(0..n_z, plan.residual_cols.clone()).unwrap()).unwrap();
            out.place_block(&res, 0, plan.residual_cols.start).unwrap();
        }
        prop_assert_eq!(out, mat_mul(&a, &b).unwrap());
    }

    #[test]
    fn encoding_is_linear_in_a(seed in any::<u64>()) {
        let p = Profile::new(vec![4, 2]).unwrap();
        let plan = build_tile_plan(8, 3, 12, &p, &[LayerGrid::new(2, 2), LayerGrid::new(2, 1)]).unwrap();
        let a1 = small_int_matrix(8, 3, seed).to_rational();
        let a2 = small_int_matrix(8, 3, seed ^ 7).to_rational();
        let b = small_int_matrix(3, 12, seed ^ 9).to_rational();
        let pts = EvalPointSet::integer(5);
        let sum = encode_hier(&a1.add(&a2).unwrap(), &b, &plan, &pts, 5).unwrap();
        let t1 = encode_hier(&a1, &b, &plan, &pts, 5).unwrap();
        let t2 = encode_hier(&a2, &b, &plan, &pts, 5).unwrap();
        for n in 0..5 {
            for l in 0..2 {
                prop_assert_eq!(&sum[n][l].a_hat, &t1[n][l].a_hat.add(&t2[n][l].a_hat).unwrap());
                prop_assert_eq!(&sum[n][l].b_hat, &t1[n][l].b_hat);
            }
        }
    }

    #[test]
    fn random_subset_decodes_float(seed in any::<u64>(), pick in prop::sample::subsequence((0..12usize).collect::<Vec<_>>(), 6)) {
        let p = Profile::new(vec![6, 4]).unwrap();
        let (n_x, n_z, n_y) = (12, 7, 25);
        let a = uniform_matrix(n_x, n_z, seed);
        let b = uniform_matrix(n_z, n_y, seed ^ 3);
        let plan = build_tile_plan(n_x, n_z, n_y, &p, &choose_grids(&p, n_x, n_z, n_y).unwrap()).unwrap();
        let tasks = encode_hier(&a, &b, &plan, &EvalPointSet::chebyshev(12), 12).unwrap();
        let oracle = mat_mul(&a, &b).unwrap();
        let layer1: Vec<CompletedResult<f64>> = pick.iter().map(|&n| tasks[n][0].complete(0.0)).collect();
        let grid = decode_layer(&layer1, &plan, 1).unwrap();
        let tile = plan.layer(1);
        for (i, rc) in tile.row_chunks.iter().enumerate() {
            for (j, cc) in tile.col_chunks.iter().enumerate() {
                let want = oracle.slice_block(rc.clone(), cc.clone()).unwrap();
                prop_assert!(grid[i][j].relative_error(&want).unwrap() <= 1e-9);
            }
        }
    }

    #[test]
    fn sumrate_dominates_hier(profile in profile_strategy(5, 12), seed in any::<u64>()) {
        let p = Profile::new(profile).unwrap();
        let params = RuntimeParams::new(12, 1.0, 0.05).unwrap();
        let timeline = sample_worker_times(&params, seed);
        let hier = hier_finishing_time(&p, &timeline).unwrap().tau;
        let sumrate = sumrate_finishing_time(p.k_sum(), p.layers(), &timeline).unwrap();
        prop_assert!(sumrate <= hier);
    }

    #[test]
    fn hier_time_monotone_in_thresholds_and_times(profile in profile_strategy(4, 9), seed in any::<u64>(), bump in 0usize..4, slow in 0usize..10) {
        let p = Profile::new(profile.clone()).unwrap();
        let params = RuntimeParams::new(10, 1.0, 0.0).unwrap();
        let timeline = sample_worker_times(&params, seed);
        let base = hier_finishing_time(&p, &timeline).unwrap();

        // raising one K_l (keeping the profile valid and k_sum fixed changes
        // the per-subtask quantum, so compare per-layer order statistics)
        let l = bump % profile.len();
        if profile[l] < 10 && (l == 0 || profile[l - 1] > profile[l]) {
            let mut raised = profile.clone();
            raised[l] += 1;
            let mut sorted = timeline.total_times.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert!(sorted[raised[l] - 1] >= sorted[profile[l] - 1]);
        }

        let mut slower = timeline.total_times.clone();
        slower[slow] *= 1.5;
        let t2 = hier_finishing_time(&p, &WorkerTimeline::new(slower).unwrap()).unwrap();
        prop_assert!(t2.tau >= base.tau);
    }

    #[test]
    fn finishing_times_scale_with_mu_and_alpha(profile in profile_strategy(4, 10), seed in any::<u64>(), e in -3i32..4) {
        let c = 2f64.powi(e);
        let p = Profile::new(profile).unwrap();
        let base = RuntimeParams::new(10, 0.7, 0.02).unwrap();
        let scaled = RuntimeParams::new(10, 0.7 * c, 0.02 * c).unwrap();
        let t1 = sample_worker_times(&base, seed);
        let t2 = sample_worker_times(&scaled, seed);
        prop_assert_eq!(hier_finishing_time(&p, &t2).unwrap().tau, c * hier_finishing_time(&p, &t1).unwrap().tau);
        prop_assert_eq!(
            sumrate_finishing_time(p.k_sum(), p.layers(), &t2).unwrap(),
            c * sumrate_finishing_time(p.k_sum(), p.layers(), &t1).unwrap()
        );
    }

    #[test]
    fn optimizer_matches_exhaustive(l in 1usize..=4, n in 2usize..=20, frac in 0.0f64..1.0, mu in 0.1f64..3.0, alpha in 0.0f64..0.5) {
        let k = l + ((l * n - l) as f64 * frac) as usize;
        let spec = OptimizerSpec::new(l, k, RuntimeParams::new(n, mu, alpha).unwrap(), ExpectationMode::Exact).unwrap();
        let opt = optimize_profile(&spec).unwrap();
        let ex = exhaustive_profile_search(&spec).unwrap();
        prop_assert_eq!(opt.objective, ex.objective);
        prop_assert_eq!(opt.profile.k_sum(), k);
        prop_assert!(opt.profile.thresholds().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(opt.profile.thresholds().iter().all(|&t| (1..=n).contains(&t)));
        prop_assert_eq!(profile_objective(opt.profile.thresholds(), &spec).unwrap(), opt.objective);
    }

    #[test]
    fn optimum_non_increasing_in_workers(l in 1usize..=4, k_per in 1usize..=6, n in 6usize..30) {
        let k = l * k_per;
        let at = |n| {
            let spec = OptimizerSpec::new(l, k, RuntimeParams::new(n, 1.0, 0.01).unwrap(), ExpectationMode::Exact).unwrap();
            optimize_profile(&spec).unwrap().objective
        };
        prop_assert!(at(n + 1) <= at(n));
    }
}

#[test]
fn exact_end_to_end_all_plain_subsets() {
    let (n_x, n_z, n_y) = (6, 5, 8);
    let a = small_int_matrix(n_x, n_z, 11).to_rational();
    let b = small_int_matrix(n_z, n_y, 12).to_rational();
    let oracle = mat_mul(&a, &b).unwrap();
    let code = SingleCode::new(n_x, n_z, n_y, 2, 2).unwrap();
    let tasks = encode_plain(&a, &b, &code, &EvalPointSet::integer(8), 8).unwrap();
    let results: Vec<_> = tasks.iter().map(|t| t.complete(0.0)).collect();
    let mut count = 0;
    for mask in 0u32..256 {
        if mask.count_ones() != 4 {
            continue;
        }
        let subset: Vec<_> = (0..8)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| results[i].clone())
            .collect();
        assert_eq!(decode_plain(&subset, &code).unwrap(), oracle);
        count += 1;
    }
    assert_eq!(count, 70);
}

#[test]
fn exact_sumrate_random_subsets() {
    use rand::seq::index::sample;
    let (n_x, n_z, n_y) = (6, 4, 12);
    let a = small_int_matrix(n_x, n_z, 21).to_rational();
    let b = small_int_matrix(n_z, n_y, 22).to_rational();
    let oracle = mat_mul(&a, &b).unwrap();
    let code = SingleCode::new(n_x, n_z, n_y, 2, 3).unwrap();
    let tasks = encode_sumrate(&a, &b, &code, 2, &EvalPointSet::integer(16), 8).unwrap();
    let flat: Vec<_> = tasks.iter().flatten().map(|t| t.complete(0.0)).collect();
    let mut rng = runtime::trial_rng(5, 0);
    for _ in 0..50 {
        let subset: Vec<_> = sample(&mut rng, flat.len(), 6)
            .into_iter()
            .map(|i| flat[i].clone())
            .collect();
        assert_eq!(decode_sumrate(&subset, &code).unwrap(), oracle);
    }
}

#[test]
fn cross_scheme_float_agreement() {
    let (n_x, n_z, n_y) = (16, 10, 40);
    let a = uniform_matrix(n_x, n_z, 1);
    let b = uniform_matrix(n_z, n_y, 2);
    let oracle = mat_mul(&a, &b).unwrap();

    let code = SingleCode::new(n_x, n_z, n_y, 4, 4).unwrap();
    let plain = encode_plain(&a, &b, &code, &EvalPointSet::chebyshev(16), 16).unwrap();
    let res: Vec<_> = plain.iter().rev().map(|t| t.complete(0.0)).collect();
    assert!(
        decode_plain(&res, &code)
            .unwrap()
            .relative_error(&oracle)
            .unwrap()
            <= 1e-6
    );

    let sr = encode_sumrate(&a, &b, &code, 2, &EvalPointSet::chebyshev(16), 8).unwrap();
    let res: Vec<_> = sr.iter().flatten().map(|t| t.complete(0.0)).collect();
    assert!(
        decode_sumrate(&res, &code)
            .unwrap()
            .relative_error(&oracle)
            .unwrap()
            <= 1e-6
    );

    let p = Profile::new(vec![16, 8]).unwrap();
    let plan =
        build_tile_plan(n_x, n_z, n_y, &p, &choose_grids(&p, n_x, n_z, n_y).unwrap()).unwrap();
    let tasks = encode_hier(&a, &b, &plan, &EvalPointSet::chebyshev(16), 16).unwrap();
    let grids: Vec<_> = (1..=2)
        .map(|l| {
            let rs: Vec<_> = tasks.iter().map(|w| w[l - 1].complete(0.0)).collect();
            Some(decode_layer(&rs, &plan, l).unwrap())
        })
        .collect();
    let residual = codec::residual_product(&a, &b, &plan).unwrap();
    let out = codec::assemble(&grids, residual.as_ref(), &plan).unwrap();
    assert!(out.relative_error(&oracle).unwrap() <= 1e-6);
}

#[test]
fn monte_carlo_mean_tracks_expectation() {
    let params = RuntimeParams::new(200, 1.0, 0.01).unwrap();
    for profile in [vec![29], vec![40, 18], vec![120, 60, 40, 24]] {
        let p = Profile::new(profile).unwrap();
        let trials = 10_000;
        let mean = (0..trials)
            .map(|t| {
                let tl = runtime::sample_worker_times_with(&params, &mut runtime::trial_rng(99, t));
                hier_finishing_time(&p, &tl).unwrap().tau
            })
            .sum::<f64>()
            / trials as f64;
        let expected = expected_finishing_time(&p, &params, ExpectationMode::Exact)
            .unwrap()
            .value;
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "{p:?}: mc {mean} vs {expected}"
        );
    }
}
