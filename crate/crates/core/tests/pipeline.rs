use proptest::prelude::*;

use roucir::convergence::{epsilon_ladder, rung_params, ORDER_SLACK};
use roucir::models::ModelParams;
use roucir::noise::{generate_bm_increments, generate_fbm_increments, FbmMethod, RngSeed, TimeGrid};
use roucir::reflection::{epsilon_integral_reflection, MonotonicityReport};
use roucir::schemes::{run_scheme, simulate_rou_projected, SchemeKind};
use roucir::verify::{figure_params, noise_for, FIGURE2_LADDER};

#[test]
fn runs_are_bit_reproducible() {
    let grid = TimeGrid::new(2.0, 2000).unwrap();
    for hurst in [0.5, 0.75] {
        let a = noise_for(grid, hurst, RngSeed::new(5, 3));
        let b = noise_for(grid, hurst, RngSeed::new(5, 3));
        assert_eq!(a, b);
        let params = rung_params(&figure_params(hurst), 1e-3);
        let ya = run_scheme(SchemeKind::SqrtImplicit, &params, &[a]).unwrap();
        let yb = run_scheme(SchemeKind::SqrtImplicit, &params, &[b]).unwrap();
        assert_eq!(ya.to_csv(), yb.to_csv());
    }
}

#[test]
fn streams_are_independent_draws() {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    assert_ne!(
        generate_bm_increments(grid, RngSeed::new(1, 0)).increments(),
        generate_bm_increments(grid, RngSeed::new(1, 1)).increments()
    );
}

#[test]
fn coarse_runs_share_the_fine_noise() {
    let fine = generate_bm_increments(TimeGrid::new(1.0, 1000).unwrap(), RngSeed::new(2, 0));
    let coarse = fine.coarsen(10).unwrap();
    let fine_cum = fine.cumulative();
    for (k, c) in coarse.cumulative().iter().enumerate() {
        assert!((c - fine_cum[10 * k]).abs() < 1e-12);
    }
}

#[test]
fn reflection_estimates_shrink_along_the_ladder() {
    let grid = TimeGrid::with_target_step(5.0, 1e-3).unwrap();
    for (hurst, seed) in [(0.5, 21), (0.6, 22), (0.9, 23)] {
        let noise = noise_for(grid, hurst, RngSeed::new(seed, 0));
        let run = epsilon_ladder(&figure_params(hurst), &FIGURE2_LADDER, &noise).unwrap();
        for r in &run.rungs {
            assert!(MonotonicityReport::of(r.reflection.values(), ORDER_SLACK).is_monotone());
            assert_eq!(r.reflection.values()[0], 0.0);
        }
        for w in run.rungs.windows(2) {
            for (hi, lo) in w[0].reflection.values().iter().zip(w[1].reflection.values()) {
                assert!(*lo <= hi + ORDER_SLACK);
            }
        }
    }
}

#[test]
fn hosking_and_davies_harte_drive_the_same_model() {
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let dh = generate_fbm_increments(grid, 0.7, RngSeed::new(4, 0), FbmMethod::DaviesHarte).unwrap();
    let ho = generate_fbm_increments(grid, 0.7, RngSeed::new(4, 0), FbmMethod::Hosking).unwrap();
    let params = ModelParams { b: 0.0, ..figure_params(0.7) };
    for noise in [dh, ho] {
        let out = simulate_rou_projected(&params, &noise).unwrap();
        assert!(out.path.min() >= 0.0);
        let eps = epsilon_integral_reflection(&out.path.map(|y| y + 1.0).unwrap(), 0.1).unwrap();
        assert!(eps.terminal() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn implicit_paths_stay_positive(seed: u64, eps in 1e-6f64..1.0, hurst in prop::sample::select(vec![0.5, 0.6, 0.8])) {
        let grid = TimeGrid::new(1.0, 500).unwrap();
        let noise = noise_for(grid, hurst, RngSeed::new(seed, 0));
        let base = figure_params(hurst);
        let run = epsilon_ladder(&base, &[eps], &noise).unwrap();
        prop_assert!(run.rungs[0].path.min() > 0.0);
    }

    #[test]
    fn projected_paths_are_nonnegative_with_monotone_regulator(seed: u64, b in 0.0f64..3.0, sigma in 0.0f64..3.0) {
        let grid = TimeGrid::new(1.0, 300).unwrap();
        let noise = generate_bm_increments(grid, RngSeed::new(seed, 0));
        let params = ModelParams { b, sigma, ..figure_params(0.5) };
        let out = simulate_rou_projected(&params, &noise).unwrap();
        prop_assert!(out.path.min() >= 0.0);
        prop_assert!(out.reflection.values().windows(2).all(|w| w[1] >= w[0]));
    }
}
