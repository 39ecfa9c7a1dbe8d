//! Property tests for the grid-level identities: strip partition, Fourier
//! round trips, POVM positivity/contraction over random regions and states,
//! and snapshot round trips.

use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;

use ssct_core::field::WaveFunction;
use ssct_core::frame::CoherentFrame;
use ssct_core::grid::{make_grid, SplitGrid};
use ssct_core::numeric::counter_normal;
use ssct_core::povm;
use ssct_core::region::PhaseSpaceRegion;

fn grid_32() -> Arc<SplitGrid> {
    make_grid(1, &[(32, 20.0)], &[(32, 20.0)]).unwrap()
}

/// Deterministic pseudo-random field from a seed, arbitrary (not band-limited).
fn rough_field(grid: &Arc<SplitGrid>, seed: u64) -> WaveFunction {
    let values: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            Complex64::new(
                counter_normal(seed, &[i as u64, 0]),
                counter_normal(seed, &[i as u64, 1]),
            )
        })
        .collect();
    WaveFunction::new(grid.clone(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn strip_partition_pythagoras(seed in 0u64..1000, radius in 0.05f64..12.0) {
        let grid = grid_32();
        let psi = rough_field(&grid, seed);
        let inside = psi.restrict_strip(radius, false).unwrap().norm_sq();
        let outside = psi.restrict_strip(radius, true).unwrap().norm_sq();
        let total = psi.norm_sq();
        prop_assert!(((inside + outside) - total).abs() <= 1e-12 * total.max(1.0));
        // contraction and idempotence
        let once = psi.restrict_strip(radius, false).unwrap();
        prop_assert!(once.norm() <= psi.norm() * (1.0 + 1e-15));
        let twice = once.restrict_strip(radius, false).unwrap();
        prop_assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn fourier_round_trip(seed in 0u64..1000) {
        let grid = grid_32();
        let psi = rough_field(&grid, seed);
        let hat = ssct_core::fft::to_momentum(&grid, psi.values());
        let back = ssct_core::fft::from_momentum(&grid, &hat);
        let err = psi
            .values()
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        prop_assert!(err <= 1e-12 * psi.norm());
    }

    #[test]
    fn snapshot_round_trip_bits(seed in 0u64..1000) {
        let grid = make_grid(1, &[(8, 5.0)], &[(16, 9.0)]).unwrap();
        let psi = rough_field(&grid, seed);
        let dir = std::env::temp_dir().join("ssct_props");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("prop_{seed}.ssct"));
        ssct_core::io::write_wavefunction(&path, &psi).unwrap();
        let back = ssct_core::io::read_wavefunction(&path).unwrap();
        let _ = std::fs::remove_file(&path);
        prop_assert_eq!(psi.values(), back.values());
    }
}

fn arb_region() -> impl Strategy<Value = PhaseSpaceRegion> {
    let base = prop_oneof![
        Just(PhaseSpaceRegion::All),
        (0.5f64..6.0, 0.1f64..2.0).prop_map(|(n, m)| PhaseSpaceRegion::Far { n, m }),
        (0.5f64..6.0, 0.1f64..2.0).prop_map(|(n, m)| PhaseSpaceRegion::Sur { n, m }),
        (0.5f64..6.0, 0.1f64..2.0).prop_map(|(n, m)| PhaseSpaceRegion::Out { n, m }),
        (0.5f64..6.0, 0.1f64..2.0).prop_map(|(n, m)| PhaseSpaceRegion::In { n, m }),
        (0.5f64..8.0).prop_map(|r| PhaseSpaceRegion::SpaceStrip { r }),
        (0.5f64..6.0, 0.1f64..2.0).prop_map(|(n, m)| PhaseSpaceRegion::TransverseTube { n, m }),
    ];
    prop_oneof![
        base.clone(),
        base.clone()
            .prop_map(|r| PhaseSpaceRegion::Not(Box::new(r))),
        (base.clone(), base).prop_map(|(a, b)| PhaseSpaceRegion::Union(vec![a, b])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn povm_positivity_and_contraction(seed in 0u64..64, region in arb_region()) {
        let grid = grid_32();
        let frame = CoherentFrame::new(grid.clone(), 0.5).unwrap();
        let psi = povm::probe_state(&grid, seed).unwrap();
        let form = povm::povm_quadratic_form(&frame, &region, &psi).unwrap();
        prop_assert!(form >= -1e-14, "form {form} negative for {}", region.describe());
        prop_assert!(
            form <= psi.norm_sq() * (1.0 + 1e-6),
            "form {form} above norm for {}",
            region.describe()
        );
        let applied = povm::apply_povm(&frame, &region, &psi).unwrap();
        prop_assert!(applied.norm() <= psi.norm() * (1.0 + 1e-6));
        // complement partition: P(E) + P(not E) = identity on the lattice
        let complement = PhaseSpaceRegion::Not(Box::new(region.clone()));
        let rest = povm::apply_povm(&frame, &complement, &psi).unwrap();
        let sum = applied.add_scaled(&rest, Complex64::new(1.0, 0.0)).unwrap();
        prop_assert!(sum.distance(&psi).unwrap() <= 1e-10 * psi.norm());
    }
}
