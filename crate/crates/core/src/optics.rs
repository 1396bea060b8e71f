//! Local-realist photon-pair kernel: sources, Malus-law analyzers and
//! threshold detectors.
//!
//! Each station is a polarizing beam splitter feeding two detectors. A unit
//! pulse splits into `cos²` and `sin²` fractions of the polarization-analyzer
//! angle; a detector fires when its fraction (plus optional Gaussian noise)
//! reaches the station threshold. A threshold of 0.5 gives exactly one click
//! per pulse; anything above 0.5 silently drops pulses near the bisecting
//! angle, which is where the unfair sampling comes from.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Angle, CountTable, Outcome};
use crate::error::{Error, Result};

/// Slack on the threshold comparison. Exact geometric ties (polarization
/// bisecting the analyzer axes) land within a few ulps of 0.5 after the
/// trigonometry, and must still count as reaching the threshold.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum SourceModel {
    /// Orthogonal pair, orientation uniform over [0, 2π).
    IsotropicOrthogonalPairs,
    /// Orthogonal pair restricted to one basis: φ ∈ {basis, basis + π/2}.
    FixedBasisHV { basis: Angle },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonPair {
    /// Polarization of the photon sent to A.
    pub phi: Angle,
    pub emission_time: f64,
    pub pair_id: u64,
}

impl PhotonPair {
    /// Polarization of the photon sent to B, orthogonal to A's.
    pub fn phi_b(&self) -> Angle {
        self.phi + Angle::new(FRAC_PI_2)
    }
}

/// Calibration of one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    pub angle: Angle,
    /// Fraction of the normalized pulse energy a channel needs to fire.
    pub threshold: f64,
    pub noise_sigma: f64,
    /// Probability a station result survives; otherwise it becomes a miss.
    pub efficiency: f64,
}

impl StationConfig {
    /// Noiseless, fully efficient station.
    pub fn ideal(angle: Angle, threshold: f64) -> Self {
        StationConfig {
            angle,
            threshold,
            noise_sigma: 0.0,
            efficiency: 1.0,
        }
    }

    pub fn with_angle(self, angle: Angle) -> Self {
        StationConfig { angle, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::ThresholdOutOfRange(self.threshold, "[0, 1]"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config(format!("noise sigma {} must be ≥ 0", self.noise_sigma)));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config(format!(
                "efficiency {} must lie in (0, 1]",
                self.efficiency
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StationOutcome {
    Miss,
    SinglePlus,
    SingleMinus,
    Double,
}

impl StationOutcome {
    pub fn single(self) -> Option<Outcome> {
        match self {
            StationOutcome::SinglePlus => Some(Outcome::Plus),
            StationOutcome::SingleMinus => Some(Outcome::Minus),
            _ => None,
        }
    }
}

/// Energy fractions reaching the `+` and `−` detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intensities {
    pub plus: f64,
    pub minus: f64,
}

pub fn emit_pair<R: Rng + ?Sized>(model: SourceModel, pair_id: u64, emission_time: f64, rng: &mut R) -> PhotonPair {
    let phi = match model {
        SourceModel::IsotropicOrthogonalPairs => Angle::new(rng.random::<f64>() * TAU),
        SourceModel::FixedBasisHV { basis } => {
            if rng.random::<bool>() {
                basis
            } else {
                basis + Angle::new(FRAC_PI_2)
            }
        }
    };
    PhotonPair {
        phi,
        emission_time,
        pair_id,
    }
}

/// Malus split of a unit pulse polarized at `phi` by an analyzer at `analyzer`.
///
/// The larger fraction is computed directly and the smaller one as its
/// complement, so the two sum to exactly 1.
pub fn malus_intensities(phi: Angle, analyzer: Angle) -> Intensities {
    let d = phi.radians() - analyzer.radians();
    let (s, c) = d.sin_cos();
    let (c2, s2) = (c * c, s * s);
    if c2 >= s2 {
        Intensities {
            plus: c2,
            minus: 1.0 - c2,
        }
    } else {
        Intensities {
            plus: 1.0 - s2,
            minus: s2,
        }
    }
}

#[inline]
fn fires(level: f64, threshold: f64) -> bool {
    level >= threshold - TIE_TOLERANCE
}

/// Threshold detection on both channels followed by efficiency thinning.
///
/// Random draws, in order: `+` noise and `−` noise (only when σ > 0), then the
/// thinning draw (only when efficiency < 1).
pub fn detect<R: Rng + ?Sized>(intensities: Intensities, cfg: &StationConfig, rng: &mut R) -> StationOutcome {
    let (plus, minus) = if cfg.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
        (
            intensities.plus + noise.sample(rng),
            intensities.minus + noise.sample(rng),
        )
    } else {
        (intensities.plus, intensities.minus)
    };
    let outcome = match (fires(plus, cfg.threshold), fires(minus, cfg.threshold)) {
        (true, true) => StationOutcome::Double,
        (true, false) => StationOutcome::SinglePlus,
        (false, true) => StationOutcome::SingleMinus,
        (false, false) => StationOutcome::Miss,
    };
    if cfg.efficiency < 1.0 && rng.random::<f64>() >= cfg.efficiency {
        StationOutcome::Miss
    } else {
        outcome
    }
}

/// Measures both photons of a pair; A's draws precede B's.
pub fn measure_pair<R: Rng + ?Sized>(
    pair: &PhotonPair,
    cfg_a: &StationConfig,
    cfg_b: &StationConfig,
    rng: &mut R,
) -> (StationOutcome, StationOutcome) {
    let a = detect(malus_intensities(pair.phi, cfg_a.angle), cfg_a, rng);
    let b = detect(malus_intensities(pair.phi_b(), cfg_b.angle), cfg_b, rng);
    (a, b)
}

/// Adds one measured pair to a counting table.
pub fn tally(counts: &mut CountTable, a: StationOutcome, b: StationOutcome) {
    counts.n_pairs += 1;
    for (outcome, singles, doubles, misses) in [
        (a, &mut counts.singles_a, &mut counts.doubles_a, &mut counts.misses_a),
        (b, &mut counts.singles_b, &mut counts.doubles_b, &mut counts.misses_b),
    ] {
        match outcome {
            StationOutcome::Miss => *misses += 1,
            StationOutcome::Double => *doubles += 1,
            StationOutcome::SinglePlus | StationOutcome::SingleMinus => *singles += 1,
        }
    }
    if let (Some(x), Some(y)) = (a.single(), b.single()) {
        counts.record_coincidence(x, y);
    }
}

/// Emits and measures `n` pairs, tabulating the results.
pub fn simulate_pairs<R: Rng + ?Sized>(
    source: SourceModel,
    cfg_a: &StationConfig,
    cfg_b: &StationConfig,
    n: u64,
    rng: &mut R,
) -> CountTable {
    let mut counts = CountTable::default();
    for id in 0..n {
        let pair = emit_pair(source, id, 0.0, rng);
        let (a, b) = measure_pair(&pair, cfg_a, cfg_b, rng);
        tally(&mut counts, a, b);
    }
    counts
}

/// Probability that a σ = 0 station detects a single click from an isotropic
/// source, for thresholds above one half: `4·arccos(√T)/π`.
pub fn single_detection_probability(threshold: f64) -> f64 {
    if threshold <= 0.5 {
        1.0
    } else {
        4.0 * threshold.sqrt().acos() / std::f64::consts::PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI};

    fn ideal(angle: f64, t: f64) -> StationConfig {
        StationConfig::ideal(Angle::new(angle), t)
    }

    #[test]
    fn malus_examples() {
        let i = malus_intensities(Angle::ZERO, Angle::ZERO);
        assert_eq!((i.plus, i.minus), (1.0, 0.0));
        let i = malus_intensities(Angle::new(FRAC_PI_4), Angle::ZERO);
        assert!((i.plus - 0.5).abs() < 1e-15 && (i.minus - 0.5).abs() < 1e-15);
        let i = malus_intensities(Angle::new(FRAC_PI_6), Angle::ZERO);
        assert!((i.plus - 0.75).abs() < 1e-15 && (i.minus - 0.25).abs() < 1e-15);
    }

    #[test]
    fn detect_examples() {
        let mut r = rng::stream(0, 0);
        let i = |p, m| Intensities { plus: p, minus: m };
        assert_eq!(
            detect(i(1.0, 0.0), &ideal(0.0, 0.5), &mut r),
            StationOutcome::SinglePlus
        );
        assert_eq!(detect(i(0.5, 0.5), &ideal(0.0, 0.75), &mut r), StationOutcome::Miss);
        assert_eq!(detect(i(0.5, 0.5), &ideal(0.0, 0.4), &mut r), StationOutcome::Double);
        assert_eq!(
            detect(i(0.0, 1.0), &ideal(0.0, 0.5), &mut r),
            StationOutcome::SingleMinus
        );
    }

    #[test]
    fn bisecting_polarization_is_a_double_at_half_threshold() {
        let mut r = rng::stream(0, 0);
        for phi in [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2] {
            let i = malus_intensities(Angle::new(phi), Angle::new(FRAC_PI_4));
            assert_eq!(
                detect(i, &ideal(0.0, 0.5), &mut r),
                StationOutcome::Double,
                "phi = {phi}"
            );
        }
    }

    #[test]
    fn equal_settings_anticorrelate() {
        let mut r = rng::stream(0, 0);
        let cfg = ideal(0.0, 0.5);
        let pair = |phi| PhotonPair {
            phi: Angle::new(phi),
            emission_time: 0.0,
            pair_id: 0,
        };
        assert_eq!(
            measure_pair(&pair(0.0), &cfg, &cfg, &mut r),
            (StationOutcome::SinglePlus, StationOutcome::SingleMinus)
        );
        assert_eq!(
            measure_pair(&pair(FRAC_PI_2), &cfg, &cfg, &mut r),
            (StationOutcome::SingleMinus, StationOutcome::SinglePlus)
        );
    }

    #[test]
    fn fixed_basis_emits_only_basis_states() {
        let mut r = rng::stream(1, 0);
        let model = SourceModel::FixedBasisHV { basis: Angle::ZERO };
        let mut seen = [0u32; 2];
        for _ in 0..1000 {
            let p = emit_pair(model, 0, 0.0, &mut r);
            if p.phi.radians() == 0.0 {
                seen[0] += 1;
            } else {
                assert_eq!(p.phi.radians(), FRAC_PI_2);
                seen[1] += 1;
            }
        }
        assert!(seen[0] > 400 && seen[1] > 400);
    }

    #[test]
    fn b_photon_is_orthogonal() {
        let mut r = rng::stream(2, 0);
        for _ in 0..1000 {
            let p = emit_pair(SourceModel::IsotropicOrthogonalPairs, 0, 0.0, &mut r);
            let diff = (p.phi_b() - p.phi).radians();
            assert!((diff - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn b_miss_fraction_at_three_quarters_threshold() {
        // detection window 4·arccos(√0.75)/π = 2/3
        assert!((single_detection_probability(0.75) - 2.0 / 3.0).abs() < 1e-15);
        let mut r = rng::stream(3, 0);
        let n = 200_000;
        let c = simulate_pairs(
            SourceModel::IsotropicOrthogonalPairs,
            &ideal(0.0, 0.5),
            &ideal(0.0, 0.75),
            n,
            &mut r,
        );
        let miss = c.misses_b as f64 / n as f64;
        let sigma = ((1.0 / 3.0) * (2.0 / 3.0) / n as f64).sqrt();
        assert!((miss - 1.0 / 3.0).abs() < 4.0 * sigma, "miss fraction {miss}");
        assert_eq!(c.misses_a, 0);
        c.validate().unwrap();
    }

    #[test]
    fn station_validation() {
        assert!(ideal(0.0, 1.2).validate().is_err());
        assert!(StationConfig {
            efficiency: 0.0,
            ..ideal(0.0, 0.5)
        }
        .validate()
        .is_err());
        assert!(StationConfig {
            noise_sigma: -1.0,
            ..ideal(0.0, 0.5)
        }
        .validate()
        .is_err());
        assert!(StationConfig {
            efficiency: 0.05,
            ..ideal(0.0, 0.5)
        }
        .validate()
        .is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn energy_is_conserved(phi in -50.0f64..50.0, a in -50.0f64..50.0) {
                let i = malus_intensities(Angle::new(phi), Angle::new(a));
                prop_assert_eq!(i.plus + i.minus, 1.0);
                prop_assert!(i.plus >= 0.0 && i.minus >= 0.0);
            }

            #[test]
            fn raising_threshold_never_creates_detections(
                phi in 0.0f64..TAU, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
            ) {
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                let mut r = rng::stream(0, 0);
                let i = malus_intensities(Angle::new(phi), Angle::ZERO);
                let at_lo = detect(i, &ideal(0.0, lo), &mut r);
                let at_hi = detect(i, &ideal(0.0, hi), &mut r);
                if at_lo == StationOutcome::Miss {
                    prop_assert_eq!(at_hi, StationOutcome::Miss);
                }
                if at_hi == StationOutcome::Double {
                    prop_assert_eq!(at_lo, StationOutcome::Double);
                }
            }

            #[test]
            fn half_threshold_always_clicks(phi in 0.0f64..TAU, a in 0.0f64..TAU) {
                let mut r = rng::stream(0, 0);
                let out = detect(malus_intensities(Angle::new(phi), Angle::new(a)), &ideal(0.0, 0.5), &mut r);
                prop_assert_ne!(out, StationOutcome::Miss);
            }
        }
    }
}
