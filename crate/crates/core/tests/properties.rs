//! Property-style invariants: Hermitian symmetry and word-sum consistency
//! of the tower, Loewner monotonicity under subinvariance, and agreement
//! of the PSD checker with the 2×2 determinant rule.

use ktree_core::kernel::{tower_value, GramMatrix};
use ktree_core::systems::{eigen_seed, random_maps, FixtureE2};
use ktree_core::tol;
use ktree_core::{KernelSystem, TowerCache};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tower_is_hermitian_on_e2(
        s in 0.0f64..1.0,
        t in 0.0f64..1.0,
        n in 0usize..8,
    ) {
        let sys = FixtureE2::new();
        let mut cache = TowerCache::new();
        let a = tower_value(&sys, &mut cache, n, &s, &t).unwrap();
        let b = tower_value(&sys, &mut cache, n, &t, &s).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-10);
    }

    #[test]
    fn word_sum_consistency_on_e2(
        s in 0.01f64..1.0,
        t in 0.01f64..1.0,
        n in 0usize..7,
    ) {
        let sys = FixtureE2::new();
        let mut cache = TowerCache::new();
        let parent = tower_value(&sys, &mut cache, n + 1, &s, &t).unwrap();
        let mut children = Complex64::new(0.0, 0.0);
        for i in 0..sys.branch_count() {
            children +=
                tower_value(&sys, &mut cache, n, &sys.branch(i, &s), &sys.branch(i, &t)).unwrap();
        }
        prop_assert!((parent - children).norm() <= 1e-10 * parent.norm().max(1.0));
    }

    #[test]
    fn tower_hermitian_and_word_sum_on_random_finite(seed in 0u64..200, n in 0usize..6) {
        let p = 2 + (seed % 4) as usize;
        let m = 2 + (seed % 2) as usize;
        let maps = random_maps(p, m, seed);
        let Ok(out) = eigen_seed(&maps, p, 300, 1e-10) else { return Ok(()); };
        let sys = &out.system;
        let mut cache = TowerCache::new();
        for s in 0..p {
            for t in 0..p {
                let a = tower_value(sys, &mut cache, n, &s, &t).unwrap();
                let b = tower_value(sys, &mut cache, n, &t, &s).unwrap();
                prop_assert!((a - b.conj()).norm() <= 1e-10 * a.norm().max(1.0));
                let parent = tower_value(sys, &mut cache, n + 1, &s, &t).unwrap();
                let mut children = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    children += tower_value(
                        sys,
                        &mut cache,
                        n,
                        &sys.branch(i, &s),
                        &sys.branch(i, &t),
                    )
                    .unwrap();
                }
                prop_assert!((parent - children).norm() <= 1e-10 * parent.norm().max(1.0));
            }
        }
    }

    #[test]
    fn tower_is_loewner_monotone_under_subinvariance(seed in 0u64..100) {
        let p = 2 + (seed % 4) as usize;
        let maps = random_maps(p, 2, 3_000 + seed);
        let Ok(out) = eigen_seed(&maps, p, 300, 1e-10) else { return Ok(()); };
        let sys = &out.system;
        let sample: Vec<usize> = (0..p).collect();
        let mut cache = TowerCache::new();
        for n in 0..5usize {
            let low = GramMatrix::from_evaluator(sys, &sample, |s, t| {
                tower_value(sys, &mut cache, n, s, t)
            })
            .unwrap();
            let high = GramMatrix::from_evaluator(sys, &sample, |s, t| {
                tower_value(sys, &mut cache, n + 1, s, t)
            })
            .unwrap();
            let cmp = high.loewner_geq(&low, tol::PSD_REL).unwrap();
            prop_assert!(cmp.is_psd, "n={n}: λ_min={}", cmp.lambda_min);
        }
    }
}

#[test]
fn psd_checker_agrees_with_determinant_oracle_on_2x2_grid() {
    let range = [-2i32, -1, 0, 1, 2];
    for &a in &range {
        for &d in &range {
            for &x in &range {
                for &y in &range {
                    let b = Complex64::new(x as f64, y as f64);
                    let entries = DMatrix::from_row_slice(
                        2,
                        2,
                        &[
                            Complex64::new(a as f64, 0.0),
                            b,
                            b.conj(),
                            Complex64::new(d as f64, 0.0),
                        ],
                    );
                    let gram = GramMatrix::new(vec![0usize, 1], entries).unwrap();
                    let verdict = gram.is_psd(tol::PSD_REL).is_psd;
                    let oracle = a >= 0 && d >= 0 && a * d - (x * x + y * y) >= 0;
                    assert_eq!(verdict, oracle, "a={a} d={d} b={x}+{y}i");
                }
            }
        }
    }
}
