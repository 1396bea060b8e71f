//! Exact σ = 0 rates for the isotropic source.
//!
//! With no noise, each channel of a station is an arc of polarization angles
//! (period π): the `+` channel fires for polarizations within
//! `h = arccos(√T)` of the analyzer axis, the `−` channel within `h` of the
//! perpendicular. For a uniform source every rate is an arc-overlap length
//! divided by π, so the whole model reduces to interval arithmetic.
//!
//! Only thresholds in `[0.5, 1]` are accepted: below one half both channels
//! can fire together and E would need a policy for doubles.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::domain::{correlation_std_error, Angle};
use crate::error::{Error, Result};

/// Fractions of emitted pairs, per outcome cell and per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRates {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
    pub detect_a: f64,
    pub detect_b: f64,
}

impl AnalyticRates {
    pub fn coincidence(&self) -> f64 {
        self.pp + self.pm + self.mp + self.mm
    }

    pub fn correlation(&self) -> Result<f64> {
        let c = self.coincidence();
        if c <= 0.0 {
            return Err(Error::NoCoincidences);
        }
        Ok((self.pp + self.mm - self.pm - self.mp) / c)
    }

    /// Expected standard error of E from `pairs` emitted pairs.
    pub fn std_error(&self, pairs: u64) -> Result<f64> {
        let e = self.correlation()?;
        let n = (self.coincidence() * pairs as f64).round() as u64;
        Ok(correlation_std_error(e, n))
    }
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    center: f64,
    half_width: f64,
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.5..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::ThresholdOutOfRange(t, "[0.5, 1]"))
    }
}

fn half_width(t: f64) -> f64 {
    t.sqrt().acos()
}

/// Overlap length of two arcs on a circle of circumference π.
fn overlap(x: Arc, y: Arc) -> f64 {
    let d = (y.center - x.center).rem_euclid(PI);
    // y's center sits at d or, going the other way, at d − π relative to x.
    [d, d - PI]
        .iter()
        .map(|&offset| {
            let lo = (-x.half_width).max(offset - y.half_width);
            let hi = x.half_width.min(offset + y.half_width);
            (hi - lo).max(0.0)
        })
        .sum()
}

/// Exact σ = 0 rates with A's analyzer at `alpha`, B's at `beta`.
pub fn analytic_rates(alpha: Angle, beta: Angle, t_a: f64, t_b: f64) -> Result<AnalyticRates> {
    check_threshold(t_a)?;
    check_threshold(t_b)?;
    let (ha, hb) = (half_width(t_a), half_width(t_b));
    let (ga, gb) = (alpha.radians(), beta.radians());
    // A sees φ; B sees φ + π/2, so B's `+` arc is centered at β − π/2 in φ.
    let a_plus = Arc {
        center: ga,
        half_width: ha,
    };
    let a_minus = Arc {
        center: ga + FRAC_PI_2,
        half_width: ha,
    };
    let b_plus = Arc {
        center: gb - FRAC_PI_2,
        half_width: hb,
    };
    let b_minus = Arc {
        center: gb,
        half_width: hb,
    };
    Ok(AnalyticRates {
        pp: overlap(a_plus, b_plus) / PI,
        pm: overlap(a_plus, b_minus) / PI,
        mp: overlap(a_minus, b_plus) / PI,
        mm: overlap(a_minus, b_minus) / PI,
        detect_a: 4.0 * ha / PI,
        detect_b: 4.0 * hb / PI,
    })
}

/// Exact E(θ) for relative analyzer angle θ.
pub fn analytic_correlation(theta: Angle, t_a: f64, t_b: f64) -> Result<f64> {
    analytic_rates(Angle::ZERO, theta, t_a, t_b)?.correlation()
}

/// Exact (max − min)/mean of the coincidence rate over a list of B angles.
pub fn analytic_modulation(alpha: Angle, b_angles: &[Angle], t_a: f64, t_b: f64) -> Result<f64> {
    let rates = b_angles
        .iter()
        .map(|&b| analytic_rates(alpha, b, t_a, t_b).map(|r| r.coincidence()))
        .collect::<Result<Vec<_>>>()?;
    Ok(super::modulation_of(&rates))
}
