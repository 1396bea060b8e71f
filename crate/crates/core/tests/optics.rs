use std::f64::consts::{PI, TAU};

use eprb_core::optics::{emit_pair, simulate_pairs, single_detection_probability, SourceModel, StationConfig};
use eprb_core::rng;
use eprb_core::Angle;

/// χ² critical value, 99 degrees of freedom, upper tail 0.001.
const CHI2_99_DOF_0_001: f64 = 148.230;

#[test]
fn isotropic_orientations_are_uniform() {
    let mut r = rng::stream(1, 0);
    let bins = 100;
    let n = 1_000_000;
    let mut hist = vec![0u64; bins];
    for id in 0..n {
        let p = emit_pair(SourceModel::IsotropicOrthogonalPairs, id, 0.0, &mut r);
        hist[(p.phi.radians() / TAU * bins as f64) as usize] += 1;
    }
    let expected = n as f64 / bins as f64;
    let chi2: f64 = hist.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < CHI2_99_DOF_0_001, "χ² = {chi2}");
}

#[test]
fn singles_rate_matches_closed_form() {
    let n = 200_000;
    for (k, t) in [0.55f64, 0.75, 0.92, 0.99].into_iter().enumerate() {
        let p = 4.0 * t.sqrt().acos() / PI;
        assert_eq!(single_detection_probability(t), p);
        let mut r = rng::stream(2, k as u64);
        let counts = simulate_pairs(
            SourceModel::IsotropicOrthogonalPairs,
            &StationConfig::ideal(Angle::new(0.3), t),
            &StationConfig::ideal(Angle::new(1.1), t),
            n,
            &mut r,
        );
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for singles in [counts.singles_a, counts.singles_b] {
            let rate = singles as f64 / n as f64;
            assert!((rate - p).abs() < 3.0 * sigma, "T = {t}: {rate} vs {p}");
        }
        assert_eq!(counts.doubles_a + counts.doubles_b, 0);
    }
}

#[test]
fn half_threshold_never_misses() {
    let mut r = rng::stream(3, 0);
    let counts = simulate_pairs(
        SourceModel::IsotropicOrthogonalPairs,
        &StationConfig::ideal(Angle::ZERO, 0.5),
        &StationConfig::ideal(Angle::new(0.7), 0.5),
        100_000,
        &mut r,
    );
    assert_eq!(counts.misses_a + counts.misses_b, 0);
    assert_eq!(counts.coincidences(), 100_000);
}

#[test]
fn efficiency_thins_each_station_independently() {
    let mut r = rng::stream(4, 0);
    let n = 400_000;
    let eff = 0.05;
    let station = |angle| StationConfig {
        efficiency: eff,
        ..StationConfig::ideal(Angle::new(angle), 0.5)
    };
    let counts = simulate_pairs(
        SourceModel::IsotropicOrthogonalPairs,
        &station(0.0),
        &station(0.4),
        n,
        &mut r,
    );
    for singles in [counts.singles_a, counts.singles_b] {
        let rate = singles as f64 / n as f64;
        assert!((rate - eff).abs() < 3.0 * (eff * (1.0 - eff) / n as f64).sqrt());
    }
    let c = counts.coincidences() as f64 / n as f64;
    let pc = eff * eff;
    assert!((c - pc).abs() < 3.0 * (pc * (1.0 - pc) / n as f64).sqrt());
    counts.validate().unwrap();
}

#[test]
fn noisy_tie_splits_evenly() {
    // bisecting analyzer: each channel sees exactly half the pulse
    let mut r = rng::stream(5, 0);
    let n = 100_000;
    let station_a = StationConfig {
        noise_sigma: 0.05,
        ..StationConfig::ideal(Angle::new(PI / 4.0), 0.5)
    };
    let counts = simulate_pairs(
        SourceModel::FixedBasisHV { basis: Angle::ZERO },
        &station_a,
        &StationConfig::ideal(Angle::ZERO, 0.5),
        n,
        &mut r,
    );
    let sigma = (0.25 * 0.75 / n as f64).sqrt();
    let doubles = counts.doubles_a as f64 / n as f64;
    let misses = counts.misses_a as f64 / n as f64;
    assert!((doubles - 0.25).abs() < 4.0 * sigma, "{doubles}");
    assert!((misses - 0.25).abs() < 4.0 * sigma, "{misses}");
}
