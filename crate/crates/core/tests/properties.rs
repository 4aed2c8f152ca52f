//! Property-based invariants across modules.

use proptest::prelude::*;
use std::f64::consts::PI;
use torus_phase::critical::{fixed_point_residual, km_map};
use torus_phase::fft;
use torus_phase::inequality::{coercivity_split, entropy_seminorm_gap, lebedev_milin_gap, sample_rng, TiltSampler};
use torus_phase::particles::{drift, ForceMode};
use torus_phase::potentials::{make_potential, normalize, wrap, ModelParams, Potential};
use torus_phase::spectral::{distance, relative_entropy, Density, Metric};
use torus_phase::Exec;

fn model() -> impl Strategy<Value = ModelParams> {
    prop_oneof![
        Just(ModelParams::DoiOnsager),
        (0.2f64..4.0).prop_map(|beta| ModelParams::Transformer { beta }),
        (0.3f64..3.0).prop_map(|radius| ModelParams::HegselmannKrause { radius }),
        Just(ModelParams::LogGas),
    ]
}

/// Positive trigonometric densities 1 + Σ a_k cos(2πkθ + φ_k) with Σ|a_k| < 1.
fn density(m: usize) -> impl Strategy<Value = Density> {
    prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0), 1..6).prop_map(move |terms| {
        let total: f64 = terms.iter().map(|t| t.0.abs()).sum::<f64>().max(1e-12);
        let scale = 0.95 / total;
        let v = fft::grid_nodes(m)
            .iter()
            .map(|x| {
                1.0 + terms
                    .iter()
                    .enumerate()
                    .map(|(k, (a, ph))| scale * a * (2.0 * PI * ((k + 1) as f64 * x + ph)).cos())
                    .sum::<f64>()
            })
            .collect();
        Density::from_grid(v).unwrap()
    })
}

fn positions(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, n)
}

fn potential(p: &ModelParams) -> Potential {
    make_potential(p, 64).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn densities_have_unit_mass(q in density(128)) {
        prop_assert!((q.mass() - 1.0).abs() < 1e-13);
        prop_assert!((q.spectrum()[0].re - 1.0).abs() < 1e-13);
        let back = Density::from_spectrum(q.spectrum()).unwrap();
        prop_assert!(distance(&q, &back, Metric::L2).unwrap() < 1e-13);
    }

    #[test]
    fn relative_entropy_is_nonnegative(q in density(128)) {
        prop_assert!(relative_entropy(&q).unwrap() >= -1e-10);
    }

    #[test]
    fn distances_are_symmetric_metrics(p in density(64), q in density(64)) {
        for metric in [Metric::L1, Metric::L2, Metric::W2Circle] {
            let a = distance(&p, &q, metric).unwrap();
            let b = distance(&q, &p, metric).unwrap();
            prop_assert!(a >= 0.0 && (a - b).abs() < 1e-9, "{metric:?}: {a} {b}");
            prop_assert!(distance(&p, &p, metric).unwrap() < 1e-9);
        }
    }

    #[test]
    fn wrap_lands_in_the_fundamental_domain(x in -1e3f64..1e3) {
        let y = wrap(x);
        prop_assert!((-0.5..0.5).contains(&y));
        prop_assert!(((x - y) - (x - y).round()).abs() < 1e-9);
    }

    #[test]
    fn km_map_returns_a_probability_density(p in model(), q in density(128), k in 0.0f64..3.0) {
        let w = potential(&p);
        let t = km_map(&q, &w, k).unwrap();
        prop_assert!((t.mass() - 1.0).abs() < 1e-12);
        prop_assert!(t.grid_values().iter().all(|v| *v > 0.0));
        prop_assert!(fixed_point_residual(&Density::uniform(128).unwrap(), &w, k).unwrap() < 1e-12);
    }

    #[test]
    fn drift_is_permutation_and_translation_equivariant(p in model(), x in positions(40), shift in -0.5f64..0.5, k in 0.1f64..3.0) {
        let w = potential(&p);
        let d = drift(&x, &w, k, ForceMode::FourierTruncated, Exec::Sequential).unwrap();
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        let dr = drift(&rev, &w, k, ForceMode::FourierTruncated, Exec::Sequential).unwrap();
        let scale = d.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (a, b) in d.iter().zip(dr.iter().rev()) {
            prop_assert!((a - b).abs() <= 1e-13 * scale);
        }
        let moved: Vec<f64> = x.iter().map(|v| wrap(v + shift)).collect();
        let dm = drift(&moved, &w, k, ForceMode::FourierTruncated, Exec::Sequential).unwrap();
        for (a, b) in d.iter().zip(&dm) {
            prop_assert!((a - b).abs() <= 1e-12 * scale, "{a} {b}");
        }
    }

    #[test]
    fn force_modes_agree(p in model(), x in positions(200), k in 0.1f64..3.0) {
        let w = potential(&p);
        let exact = drift(&x, &w, k, ForceMode::FourierTruncated, Exec::Sequential).unwrap();
        let gridded = drift(&x, &w, k, ForceMode::FourierGridded, Exec::Parallel).unwrap();
        let scale = exact.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (a, b) in exact.iter().zip(&gridded) {
            prop_assert!((a - b).abs() <= 1e-7 * scale, "{a} {b}");
        }
    }

    #[test]
    fn execution_modes_are_bitwise_identical(p in model(), x in positions(1500), k in 0.1f64..3.0) {
        let w = potential(&p);
        for mode in [ForceMode::FourierTruncated, ForceMode::FourierGridded] {
            let a = drift(&x, &w, k, mode, Exec::Sequential).unwrap();
            let b = drift(&x, &w, k, mode, Exec::Parallel).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn sharp_inequalities_hold(n in 0usize..3, seed in any::<u64>(), index in 0usize..1000) {
        let sampler = TiltSampler { n, modes: 6, budget: 3.0, m: 1024 };
        let mut rng = sample_rng(seed, n, index);
        let psi = sampler.exponent(&mut rng);
        prop_assert!(lebedev_milin_gap(&psi, n).unwrap() >= -1e-9);
        let q = sampler.density(&mut rng).unwrap();
        prop_assert!(entropy_seminorm_gap(&q, n).unwrap() >= -1e-9);
    }

    #[test]
    fn coercivity_split_is_exact(p in model(), seed in any::<u64>(), k in 0.0f64..2.0) {
        let raw = potential(&p);
        let n = raw.periodicity();
        let (w, _) = normalize(&raw, n).unwrap();
        let mut rng = sample_rng(seed, n, 0);
        let q = TiltSampler { n, modes: 6, budget: 3.0, m: 256 }.density(&mut rng).unwrap();
        prop_assert!(coercivity_split(&q, &w, k, n).unwrap().defect() <= 1e-12);
    }
}
